//! Scenario configuration: a flat key-value text format with dotted keys,
//! validated against a closed schema (unknown keys are rejected so typos
//! fail loudly).
//!
//! ```text
//! # memory scenario
//! mode = memory
//! grid.n = 256
//! write.atl = -10
//! read.atl = -2
//! input.xi3 = 9
//! input.tau_c_over_t = 0.1
//! flags.broadband = true
//! ```

use std::collections::BTreeMap;

use crate::angular::{alignment_coefficients, HalfInt};
use crate::coupling::InterfaceParams;
use crate::error::{Error, Result};
use crate::memory::{ProtocolFlags, ProtocolRun};
use crate::propagator::Grid;
use crate::spectral::SqueezedInput;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Memory,
    Entangle,
    Coupling,
    Spectra,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Memory => "memory",
            Mode::Entangle => "entangle",
            Mode::Coupling => "coupling",
            Mode::Spectra => "spectra",
        }
    }
}

/// Keys the schema accepts, with the modes each applies to.
const SCHEMA: &[(&str, &[Mode])] = &[
    ("mode", &[Mode::Memory, Mode::Entangle, Mode::Coupling, Mode::Spectra]),
    ("seed", &[Mode::Memory, Mode::Entangle, Mode::Coupling, Mode::Spectra]),
    ("grid.n", &[Mode::Memory, Mode::Entangle, Mode::Spectra]),
    ("grid.n_t", &[Mode::Memory, Mode::Entangle, Mode::Spectra]),
    ("grid.n_z", &[Mode::Memory, Mode::Entangle]),
    ("duration", &[Mode::Memory, Mode::Entangle, Mode::Spectra]),
    ("length", &[Mode::Memory, Mode::Entangle]),
    ("epsilon", &[Mode::Memory, Mode::Entangle]),
    ("fz_mag", &[Mode::Memory, Mode::Entangle]),
    ("f0", &[Mode::Memory, Mode::Entangle]),
    ("write.atl", &[Mode::Memory]),
    ("read.atl", &[Mode::Memory]),
    ("read.duration", &[Mode::Memory]),
    ("read.grid.n_t", &[Mode::Memory]),
    ("input.xi3", &[Mode::Memory, Mode::Spectra]),
    ("input.tau_c_over_t", &[Mode::Memory, Mode::Spectra]),
    ("flags.broadband", &[Mode::Memory, Mode::Spectra]),
    ("flags.optimal_retrieval", &[Mode::Memory]),
    ("entangle.atl", &[Mode::Entangle]),
    ("entangle.atl_sweep", &[Mode::Entangle]),
    ("coupling.line_file", &[Mode::Coupling]),
    ("coupling.f0", &[Mode::Coupling]),
    ("coupling.sweep_start_mhz", &[Mode::Coupling]),
    ("coupling.sweep_stop_mhz", &[Mode::Coupling]),
    ("coupling.sweep_steps", &[Mode::Coupling]),
    ("coupling.s0", &[Mode::Coupling]),
    ("coupling.fz_bar", &[Mode::Coupling]),
    ("coupling.xi2_bar", &[Mode::Coupling]),
];

/// A parsed scenario: the validated key-value map plus the raw text (the
/// raw bytes feed the output provenance hash).
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub mode: Mode,
    values: BTreeMap<String, String>,
    pub raw_text: String,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_lowercase();
            let value = value.trim().to_string();
            if values.insert(key.clone(), value).is_some() {
                return Err(Error::Parse { line: idx + 1, msg: format!("duplicate key `{key}`") });
            }
        }

        let mode = match values.get("mode").map(String::as_str) {
            Some("memory") => Mode::Memory,
            Some("entangle") => Mode::Entangle,
            Some("coupling") => Mode::Coupling,
            Some("spectra") => Mode::Spectra,
            Some(other) => return Err(Error::Config(format!("unknown mode `{other}`"))),
            None => return Err(Error::Config("missing required key `mode`".into())),
        };

        for key in values.keys() {
            match SCHEMA.iter().find(|(k, _)| k == key) {
                None => return Err(Error::Config(format!("unknown key `{key}`"))),
                Some((_, modes)) if !modes.contains(&mode) => {
                    return Err(Error::Config(format!(
                        "key `{key}` does not apply to mode `{}`",
                        mode.as_str()
                    )));
                }
                _ => {}
            }
        }

        let cfg = ScenarioConfig { mode, values, raw_text: text.to_string() };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        // force-parse every typed value so bad entries fail at load time
        self.seed()?;
        match self.mode {
            Mode::Memory => {
                if self.write_atl()? >= 0.0 || self.read_atl()? >= 0.0 {
                    return Err(Error::Config(
                        "memory mode requires write.atl < 0 and read.atl < 0".into(),
                    ));
                }
                self.grid()?;
                self.input()?;
                self.broadband()?;
                self.optimal_retrieval()?;
                self.read_duration()?;
                self.epsilon()?;
                self.fz_mag()?;
                self.f0()?;
            }
            Mode::Entangle => {
                if self.entangle_atl()? <= 0.0 {
                    return Err(Error::Config("entangle mode requires entangle.atl > 0".into()));
                }
                for atl in self.entangle_atl_sweep()? {
                    if atl <= 0.0 {
                        return Err(Error::Config(
                            "entangle.atl_sweep entries must be positive".into(),
                        ));
                    }
                }
                self.grid()?;
                self.epsilon()?;
                self.fz_mag()?;
                self.f0()?;
            }
            Mode::Coupling => {
                self.coupling_f0()?;
                self.coupling_sweep()?;
                self.coupling_s0()?;
                self.coupling_fz_bar()?;
                self.coupling_xi2_bar()?;
            }
            Mode::Spectra => {
                self.grid()?;
                self.input()?;
                self.broadband()?;
            }
        }
        Ok(())
    }

    fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}`: bad number `{v}`"))),
        }
    }

    fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}`: bad integer `{v}`"))),
        }
    }

    fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.values.get(key).map(String::as_str) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(Error::Config(format!("key `{key}`: bad boolean `{v}`"))),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        match self.values.get("seed") {
            None => Ok(0),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key `seed`: bad integer `{v}`"))),
        }
    }

    pub fn duration(&self) -> Result<f64> {
        self.get_f64("duration", 1.0)
    }

    pub fn length(&self) -> Result<f64> {
        self.get_f64("length", 1.0)
    }

    pub fn epsilon(&self) -> Result<f64> {
        self.get_f64("epsilon", 0.05)
    }

    pub fn fz_mag(&self) -> Result<f64> {
        self.get_f64("fz_mag", 1.0)
    }

    pub fn f0(&self) -> Result<HalfInt> {
        match self.values.get("f0") {
            None => Ok(HalfInt::from_int(1)),
            Some(v) => v.parse(),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let n = self.get_usize("grid.n", 128)?;
        let n_t = self.get_usize("grid.n_t", n)?;
        let n_z = self.get_usize("grid.n_z", n)?;
        Grid::new(n_t, n_z, self.duration()?, self.length()?)
    }

    /// Grid with the time/space point count replaced from the command line.
    pub fn grid_with_override(&self, n: Option<usize>) -> Result<Grid> {
        match n {
            None => self.grid(),
            Some(n) => Grid::new(n, n, self.duration()?, self.length()?),
        }
    }

    pub fn write_atl(&self) -> Result<f64> {
        self.get_f64("write.atl", -10.0)
    }

    pub fn read_atl(&self) -> Result<f64> {
        self.get_f64("read.atl", self.write_atl()? / 5.0)
    }

    pub fn read_duration(&self) -> Result<f64> {
        self.get_f64("read.duration", self.duration()?)
    }

    pub fn entangle_atl(&self) -> Result<f64> {
        self.get_f64("entangle.atl", 10.0)
    }

    pub fn entangle_atl_sweep(&self) -> Result<Vec<f64>> {
        match self.values.get("entangle.atl_sweep") {
            None => Ok(Vec::new()),
            Some(list) => list
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        Error::Config(format!("entangle.atl_sweep: bad number `{tok}`"))
                    })
                })
                .collect(),
        }
    }

    pub fn broadband(&self) -> Result<bool> {
        self.get_bool("flags.broadband", false)
    }

    pub fn optimal_retrieval(&self) -> Result<bool> {
        self.get_bool("flags.optimal_retrieval", true)
    }

    pub fn input(&self) -> Result<SqueezedInput> {
        let xi3 = self.get_f64("input.xi3", 9.0)?;
        let ratio = self.get_f64("input.tau_c_over_t", 0.1)?;
        if !(ratio > 0.0) {
            return Err(Error::Config("input.tau_c_over_t must be positive".into()));
        }
        SqueezedInput::new(xi3, ratio * self.duration()?)
    }

    /// Alignment coefficient of the configured ground spin.
    pub fn cbar13(&self) -> Result<f64> {
        Ok(alignment_coefficients(self.f0()?)?.cbar13_f64())
    }

    /// Interface parameters for a target `ATL` with this scenario's geometry.
    pub fn params_for(&self, atl: f64, duration: f64) -> Result<InterfaceParams> {
        InterfaceParams::from_atl(
            atl,
            self.epsilon()?,
            self.fz_mag()?,
            self.cbar13()?,
            self.f0()?,
            self.length()?,
            duration,
        )
    }

    /// Assemble the full memory protocol run.
    pub fn protocol_run(&self, grid_override: Option<usize>) -> Result<ProtocolRun> {
        let grid = self.grid_with_override(grid_override)?;
        let read_n_t = self.get_usize("read.grid.n_t", grid.n_t)?;
        let read_grid = Grid::new(read_n_t, grid.n_z, self.read_duration()?, self.length()?)?;
        ProtocolRun::new(
            self.params_for(self.write_atl()?, self.duration()?)?,
            self.params_for(self.read_atl()?, self.read_duration()?)?,
            self.input()?,
            grid,
            read_grid,
            ProtocolFlags {
                broadband: self.broadband()?,
                optimal_retrieval: self.optimal_retrieval()?,
            },
        )
    }

    // coupling-mode accessors
    pub fn line_file(&self) -> Option<&str> {
        self.values.get("coupling.line_file").map(String::as_str)
    }

    pub fn coupling_f0(&self) -> Result<HalfInt> {
        match self.values.get("coupling.f0") {
            None => Ok(HalfInt::from_int(1)),
            Some(v) => v.parse(),
        }
    }

    pub fn coupling_sweep(&self) -> Result<(f64, f64, usize)> {
        let start = self.get_f64("coupling.sweep_start_mhz", -3000.0)?;
        let stop = self.get_f64("coupling.sweep_stop_mhz", 3000.0)?;
        let steps = self.get_usize("coupling.sweep_steps", 601)?;
        if !(stop > start) || steps < 2 {
            return Err(Error::Config("coupling sweep needs stop > start and steps >= 2".into()));
        }
        Ok((start, stop, steps))
    }

    pub fn coupling_s0(&self) -> Result<f64> {
        self.get_f64("coupling.s0", 1e-8)
    }

    pub fn coupling_fz_bar(&self) -> Result<f64> {
        self.get_f64("coupling.fz_bar", 1e10)
    }

    pub fn coupling_xi2_bar(&self) -> Result<f64> {
        self.get_f64("coupling.xi2_bar", 1e15)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_memory_config() {
        let cfg = ScenarioConfig::parse(
            "mode = memory\ngrid.n = 64\nwrite.atl = -10\ninput.xi3 = 9\nflags.broadband = true\n",
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Memory);
        assert_eq!(cfg.grid().unwrap().n_t, 64);
        assert!((cfg.read_atl().unwrap() + 2.0).abs() < 1e-12, "read defaults to write/5");
        assert!(cfg.broadband().unwrap());
        let run = cfg.protocol_run(None).unwrap();
        assert!((run.write.atl() + 10.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_unknown_and_misplaced_keys() {
        assert!(matches!(
            ScenarioConfig::parse("mode = memory\nwrite.atl = -10\nbogus.key = 1\n"),
            Err(Error::Config(_))
        ));
        // entangle key in memory mode
        assert!(matches!(
            ScenarioConfig::parse("mode = memory\nentangle.atl = 10\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(ScenarioConfig::parse("grid.n = 8\n"), Err(Error::Config(_))));
        assert!(ScenarioConfig::parse("mode = memory\nmode = memory\n").is_err());
        // parse errors carry line numbers
        match ScenarioConfig::parse("mode = memory\nnot a kv line\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn branch_signs_validated() {
        assert!(ScenarioConfig::parse("mode = memory\nwrite.atl = 10\n").is_err());
        assert!(ScenarioConfig::parse("mode = entangle\nentangle.atl = -10\n").is_err());
        assert!(ScenarioConfig::parse("mode = entangle\nentangle.atl = 10\n").is_ok());
    }

    #[test]
    fn typed_value_errors() {
        assert!(ScenarioConfig::parse("mode = memory\ngrid.n = many\nwrite.atl = -1\n").is_err());
        assert!(ScenarioConfig::parse("mode = memory\nflags.broadband = maybe\nwrite.atl = -1\n")
            .is_err());
        assert!(ScenarioConfig::parse("mode = spectra\ninput.tau_c_over_t = 0\n").is_err());
    }
}
