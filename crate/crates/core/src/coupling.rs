//! Spectrally dependent coupling constants of the interface (gyrotropy
//! `kappa1`, light shift `Omega1`, alignment coupling `epsilon`, cooperative
//! parameter `A`) summed over a configurable table of hyperfine transitions.
//!
//! A table for the D1 line of 87Rb ships with the crate as an editable
//! plain-text file; see [`LineTable::parse`] for the grammar.

use crate::angular::{wigner6j, HalfInt};
use crate::error::{Error, Result};

/// Planck constant over 2 pi [J s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity [F/m].
pub const EPSILON_0: f64 = 8.854_187_8128e-12;
/// Speed of light [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One ground -> excited hyperfine transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineLine {
    /// Ground-state total angular momentum.
    pub f0: HalfInt,
    /// Excited-state total angular momentum.
    pub f_excited: HalfInt,
    /// Transition angular frequency [rad/s].
    pub omega: f64,
    /// Squared reduced dipole moment [(C m)^2].
    pub dipole_sq: f64,
}

impl HyperfineLine {
    pub fn new(f0: HalfInt, f_excited: HalfInt, omega: f64, dipole_sq: f64) -> Result<Self> {
        if (f0.twice() - f_excited.twice()).abs() > 2 {
            return Err(Error::Domain(format!(
                "hyperfine line {f0} -> {f_excited}: |F - F0| must be <= 1"
            )));
        }
        if !(omega > 0.0) {
            return Err(Error::Domain(format!("hyperfine line frequency {omega} must be > 0")));
        }
        if !(dipole_sq >= 0.0) {
            return Err(Error::Domain(format!("dipole_sq {dipole_sq} must be >= 0")));
        }
        Ok(HyperfineLine { f0, f_excited, omega, dipole_sq })
    }
}

/// A parsed line table: reference frequency plus one record per transition.
#[derive(Debug, Clone)]
pub struct LineTable {
    /// Angular frequency of the declared reference transition [rad/s].
    pub reference_omega: f64,
    pub lines: Vec<HyperfineLine>,
}

const RB87_D1_DATA: &str = include_str!("../data/rb87_d1.lines");

impl LineTable {
    /// The 87Rb D1 table shipped with the crate.
    pub fn rb87_d1() -> LineTable {
        LineTable::parse(RB87_D1_DATA).expect("shipped rb87 d1 line data must parse")
    }

    /// Parse a line-data file.
    ///
    /// Grammar (one statement per line, `#` starts a comment):
    ///
    /// ```text
    /// reference_frequency_thz = <f64>   # frequency of the offset origin
    /// dipole_sq_scale = <f64>           # [(C m)^2]; weights multiply this
    /// <F0> <F> <offset_mhz> <weight>    # one record per transition
    /// ```
    ///
    /// `F0`/`F` accept half-integers as `3/2`.  Parse failures report the
    /// 1-based line number.
    pub fn parse(text: &str) -> Result<LineTable> {
        let mut reference_thz: Option<f64> = None;
        let mut dipole_sq_scale: Option<f64> = None;
        let mut records: Vec<(HalfInt, HalfInt, f64, f64)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno, msg };
            if let Some((key, value)) = content.split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "reference_frequency_thz" => {
                        reference_thz = Some(
                            value
                                .parse()
                                .map_err(|_| err(format!("bad frequency `{value}`")))?,
                        );
                    }
                    "dipole_sq_scale" => {
                        dipole_sq_scale = Some(
                            value
                                .parse()
                                .map_err(|_| err(format!("bad dipole scale `{value}`")))?,
                        );
                    }
                    other => return Err(err(format!("unknown directive `{other}`"))),
                }
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(format!(
                    "expected `F0 F offset_mhz weight`, got {} fields",
                    fields.len()
                )));
            }
            let f0: HalfInt = fields[0]
                .parse()
                .map_err(|e| err(format!("bad F0: {e}")))?;
            let f: HalfInt = fields[1]
                .parse()
                .map_err(|e| err(format!("bad F: {e}")))?;
            let offset: f64 = fields[2]
                .parse()
                .map_err(|_| err(format!("bad offset `{}`", fields[2])))?;
            let weight: f64 = fields[3]
                .parse()
                .map_err(|_| err(format!("bad weight `{}`", fields[3])))?;
            records.push((f0, f, offset, weight));
        }

        let reference_thz =
            reference_thz.ok_or(Error::Parse { line: 0, msg: "missing reference_frequency_thz".into() })?;
        let scale =
            dipole_sq_scale.ok_or(Error::Parse { line: 0, msg: "missing dipole_sq_scale".into() })?;
        if records.is_empty() {
            return Err(Error::Parse { line: 0, msg: "no transition records".into() });
        }

        let reference_omega = 2.0 * std::f64::consts::PI * reference_thz * 1e12;
        let lines = records
            .into_iter()
            .map(|(f0, f, offset_mhz, weight)| {
                let omega = reference_omega + 2.0 * std::f64::consts::PI * offset_mhz * 1e6;
                HyperfineLine::new(f0, f, omega, weight * scale)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LineTable { reference_omega, lines })
    }

    pub fn lines_for(&self, f0: HalfInt) -> impl Iterator<Item = &HyperfineLine> {
        self.lines.iter().filter(move |l| l.f0 == f0)
    }

    /// Distance [rad/s] from `omega_bar` to the nearest tabulated resonance.
    pub fn nearest_pole_distance(&self, omega_bar: f64) -> f64 {
        self.lines
            .iter()
            .map(|l| (omega_bar - l.omega).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

fn detuning_checked(line: &HyperfineLine, omega_bar: f64) -> Result<f64> {
    let delta = omega_bar - line.omega;
    if delta == 0.0 {
        return Err(Error::Singularity(format!(
            "probe frequency sits exactly on the {} -> {} resonance",
            line.f0, line.f_excited
        )));
    }
    Ok(delta)
}

fn phase(twice_sum: i32) -> f64 {
    debug_assert!(twice_sum % 2 == 0, "phase exponent must be an integer");
    if (twice_sum / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Radiative prefactor `4 pi omega |d|^2 / (S0 c * 4 pi eps0 * hbar)` shared
/// by both polarizability components, without the 1/detuning factor.
fn radiative_prefactor(line: &HyperfineLine, omega_bar: f64, s0: f64) -> f64 {
    omega_bar / (s0 * SPEED_OF_LIGHT * EPSILON_0) * line.dipole_sq / HBAR
}

/// Orientation (rank-1) part of the polarizability for a single line,
/// `(-1)^(F+F0) 6j{1 1 1; F0 F0 F} / sqrt(2) * 4 pi w |d|^2 / (S0 c) / (-hbar (w - w_line))`.
pub fn alpha1(line: &HyperfineLine, omega_bar: f64, s0: f64) -> Result<f64> {
    let delta = detuning_checked(line, omega_bar)?;
    let one = HalfInt::from_int(1);
    let sixj = wigner6j(one, one, one, line.f0, line.f0, line.f_excited)?;
    let sign = phase(line.f_excited.twice() + line.f0.twice());
    Ok(sign * std::f64::consts::FRAC_1_SQRT_2 * sixj * radiative_prefactor(line, omega_bar, s0)
        / (-delta))
}

/// Alignment (rank-2) part of the polarizability for a single line,
/// `(-1)^(1+F+F0) 6j{1 1 2; F0 F0 F} * 4 pi w |d|^2 / (S0 c) / (-hbar (w - w_line))`.
pub fn alpha2(line: &HyperfineLine, omega_bar: f64, s0: f64) -> Result<f64> {
    let delta = detuning_checked(line, omega_bar)?;
    let one = HalfInt::from_int(1);
    let two = HalfInt::from_int(2);
    let sixj = wigner6j(one, one, two, line.f0, line.f0, line.f_excited)?;
    let sign = -phase(line.f_excited.twice() + line.f0.twice());
    Ok(sign * sixj * radiative_prefactor(line, omega_bar, s0) / (-delta))
}

/// Gyrotropy constant `kappa1(omega_bar)` [1/m] for atoms in level `f0` with
/// a mean angular-momentum density `fz_bar` [hbar/m].
pub fn kappa1(
    table: &LineTable,
    f0: HalfInt,
    omega_bar: f64,
    s0: f64,
    fz_bar: f64,
) -> Result<f64> {
    let ff = f0.as_f64();
    let norm = 3.0f64.sqrt() / (ff * (ff + 1.0) * (2.0 * ff + 1.0)).sqrt();
    let mut acc = 0.0;
    for line in table.lines_for(f0) {
        acc += alpha1(line, omega_bar, s0)?;
    }
    Ok(acc * norm * fz_bar)
}

/// Light shift `Omega1(omega_bar)` [rad/s]; same structure as [`kappa1`]
/// with the photon flux `xi2_bar` [1/s] in place of the spin density.
pub fn omega1(
    table: &LineTable,
    f0: HalfInt,
    omega_bar: f64,
    s0: f64,
    xi2_bar: f64,
) -> Result<f64> {
    let ff = f0.as_f64();
    let norm = 3.0f64.sqrt() / (ff * (ff + 1.0) * (2.0 * ff + 1.0)).sqrt();
    let mut acc = 0.0;
    for line in table.lines_for(f0) {
        acc += alpha1(line, omega_bar, s0)?;
    }
    Ok(acc * norm * xi2_bar)
}

/// Alignment coupling `epsilon(omega_bar) = (1/2) sum_F alpha2`.
pub fn epsilon(table: &LineTable, f0: HalfInt, omega_bar: f64, s0: f64) -> Result<f64> {
    let mut acc = 0.0;
    for line in table.lines_for(f0) {
        acc += alpha2(line, omega_bar, s0)?;
    }
    Ok(0.5 * acc)
}

// ---------------------------------------------------------------------------
// desk-scale interface parameters

/// The classical parameter set of one interaction stage, in the working unit
/// system of the propagator (sample length, pulse duration and couplings are
/// all expressed in mutually consistent units; only the products `A T L`,
/// `kappa1 L`, ... matter for the dynamics).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceParams {
    /// Alignment coupling constant.
    pub epsilon: f64,
    /// Gyrotropy [1/length]; under optimal retrieval `kappa1 * length` is a
    /// multiple of 2 pi.
    pub kappa1: f64,
    /// Light shift [rad/time].
    pub omega1: f64,
    /// `2 Omega0 + Omega1`; zero in the degenerate configuration.
    pub omega_bar: f64,
    /// Photon flux of the strong circular mode [1/time].
    pub xi2_bar: f64,
    /// Mean angular-momentum density [1/length]; its sign selects the
    /// memory (positive) or entanglement (negative) branch.
    pub fz_bar: f64,
    /// Alignment commutator coefficient of the ground level.
    pub cbar13: f64,
    /// Ground-state spin.
    pub f0: HalfInt,
    /// Sample length.
    pub length: f64,
    /// Pulse duration.
    pub duration: f64,
    /// Beam/sample cross area.
    pub s0: f64,
}

impl InterfaceParams {
    pub fn new(
        epsilon: f64,
        xi2_bar: f64,
        fz_bar: f64,
        cbar13: f64,
        f0: HalfInt,
        length: f64,
        duration: f64,
    ) -> Result<Self> {
        if !(epsilon.is_finite() && xi2_bar > 0.0 && fz_bar.is_finite() && fz_bar != 0.0) {
            return Err(Error::Domain(
                "interface parameters require finite epsilon, xi2_bar > 0, fz_bar != 0".into(),
            ));
        }
        if !(cbar13 > 0.0 && length > 0.0 && duration > 0.0) {
            return Err(Error::Domain(
                "interface parameters require positive cbar13, length, duration".into(),
            ));
        }
        Ok(InterfaceParams {
            epsilon,
            kappa1: 0.0,
            omega1: 0.0,
            omega_bar: 0.0,
            xi2_bar,
            fz_bar,
            cbar13,
            f0,
            length,
            duration,
            s0: 1.0,
        })
    }

    /// Solve for the photon flux that realizes a target `A T L` at the given
    /// coupling, spin density and geometry.  The spin-density sign is set
    /// from the sign of the target (`A < 0` needs `fz_bar > 0`).
    pub fn from_atl(
        atl: f64,
        epsilon: f64,
        fz_mag: f64,
        cbar13: f64,
        f0: HalfInt,
        length: f64,
        duration: f64,
    ) -> Result<Self> {
        if atl == 0.0 {
            return Err(Error::DegenerateCoupling);
        }
        if !(fz_mag > 0.0 && epsilon != 0.0) {
            return Err(Error::Domain("from_atl requires fz_mag > 0 and epsilon != 0".into()));
        }
        let fz_bar = if atl < 0.0 { fz_mag } else { -fz_mag };
        let a = atl / (duration * length);
        let xi2_bar = a.abs() / (2.0 * cbar13 * epsilon * epsilon * fz_mag);
        InterfaceParams::new(epsilon, xi2_bar, fz_bar, cbar13, f0, length, duration)
    }

    /// Cooperative parameter `A = -2 cbar13 epsilon^2 xi2_bar fz_bar`.
    pub fn cooperative_a(&self) -> f64 {
        -2.0 * self.cbar13 * self.epsilon * self.epsilon * self.xi2_bar * self.fz_bar
    }

    /// Dimensionless overall coupling strength `A T L`.
    pub fn atl(&self) -> f64 {
        self.cooperative_a() * self.duration * self.length
    }

    /// Field drive coefficient `2 epsilon xi2_bar` of the wave equations.
    pub fn field_drive(&self) -> f64 {
        2.0 * self.epsilon * self.xi2_bar
    }

    /// Spin drive coefficient `cbar13 epsilon fz_bar`.
    pub fn spin_drive(&self) -> f64 {
        self.cbar13 * self.epsilon * self.fz_bar
    }

    /// Number of photons in the strong mode, `N_P = xi2_bar T`.
    pub fn n_photons(&self) -> f64 {
        self.xi2_bar * self.duration
    }

    /// Number of atoms from `|fz_bar L| = F0 N_A`.
    pub fn n_atoms(&self) -> f64 {
        (self.fz_bar * self.length).abs() / self.f0.as_f64()
    }

    /// Snap `kappa1` to the optimal-retrieval condition
    /// `kappa1 L = 2 pi * round(kappa1 L / 2 pi)`.
    pub fn snapped_kappa1(&self) -> f64 {
        let turns = (self.kappa1 * self.length / (2.0 * std::f64::consts::PI)).round();
        2.0 * std::f64::consts::PI * turns / self.length
    }
}

// ---------------------------------------------------------------------------
// feasibility report

/// User-supplied incoherent-scattering cross sections of Eq.-style loss
/// estimates; the model does not compute these.
#[derive(Debug, Clone, Copy)]
pub struct CrossSections {
    /// sigma^-_{F0}: left-polarized light on the M = F0 sublevel [area].
    pub sigma_minus: f64,
    /// sigma^+_{F0-2}: right-polarized light on the M = F0 - 2 sublevel [area].
    pub sigma_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    Pass,
    Warn,
    Fail,
}

/// Direction of the inequality whose margin is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `margin` should be << 1 (pass at <= 0.1, warn at <= 1).
    MuchLess,
    /// `margin` should be >> 1 (pass at >= 10, warn at >= 1).
    MuchGreater,
}

#[derive(Debug, Clone)]
pub struct FeasibilityItem {
    pub name: &'static str,
    pub margin: f64,
    pub sense: Sense,
    pub status: FeasibilityStatus,
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub items: Vec<FeasibilityItem>,
    /// On-resonance optical depth `n0 lambdabar^2 L`.
    pub optical_depth: f64,
    pub overall: FeasibilityStatus,
}

fn grade(margin: f64, sense: Sense) -> FeasibilityStatus {
    let ratio = match sense {
        Sense::MuchLess => margin,
        Sense::MuchGreater => 1.0 / margin,
    };
    if ratio <= 0.1 {
        FeasibilityStatus::Pass
    } else if ratio <= 1.0 {
        FeasibilityStatus::Warn
    } else {
        FeasibilityStatus::Fail
    }
}

/// Evaluate the protocol feasibility inequalities and the optical depth.
///
/// `lambda_bar` is the reduced resonance wavelength; cross sections come
/// from the caller.
pub fn feasibility_check(
    write: &InterfaceParams,
    read: Option<&InterfaceParams>,
    xs: &CrossSections,
    lambda_bar: f64,
) -> Result<FeasibilityReport> {
    if !(xs.sigma_minus > 0.0 && xs.sigma_plus > 0.0 && lambda_bar > 0.0 && write.s0 > 0.0) {
        return Err(Error::Domain(
            "feasibility_check requires positive cross sections, wavelength and area".into(),
        ));
    }
    let n_a = write.n_atoms();
    let n_p = write.n_photons();
    let eps2 = write.epsilon * write.epsilon;
    let s0 = write.s0;

    let mut items = vec![
        FeasibilityItem {
            name: "coherent coupling (write): eps^2 N_A N_P",
            margin: eps2 * n_a * n_p,
            sense: Sense::MuchGreater,
            status: grade(eps2 * n_a * n_p, Sense::MuchGreater),
        },
        FeasibilityItem {
            name: "atom transparency: N_A sigma-/S0",
            margin: n_a * xs.sigma_minus / s0,
            sense: Sense::MuchLess,
            status: grade(n_a * xs.sigma_minus / s0, Sense::MuchLess),
        },
        FeasibilityItem {
            name: "write-pulse scattering: N_P sigma+/S0",
            margin: n_p * xs.sigma_plus / s0,
            sense: Sense::MuchLess,
            status: grade(n_p * xs.sigma_plus / s0, Sense::MuchLess),
        },
    ];

    if let Some(read) = read {
        let n_p_read = read.n_photons();
        let eps2_read = read.epsilon * read.epsilon;
        items.push(FeasibilityItem {
            name: "coherent coupling (read): eps^2 N_A N_P'",
            margin: eps2_read * n_a * n_p_read,
            sense: Sense::MuchGreater,
            status: grade(eps2_read * n_a * n_p_read, Sense::MuchGreater),
        });
        items.push(FeasibilityItem {
            name: "probe hierarchy: N_P'/N_P",
            margin: n_p_read / n_p,
            sense: Sense::MuchLess,
            status: grade(n_p_read / n_p, Sense::MuchLess),
        });
        items.push(FeasibilityItem {
            name: "read-pulse scattering: N_P' sigma+/S0",
            margin: n_p_read * xs.sigma_plus / s0,
            sense: Sense::MuchLess,
            status: grade(n_p_read * xs.sigma_plus / s0, Sense::MuchLess),
        });
    }

    let optical_depth = n_a * lambda_bar * lambda_bar / s0;
    items.push(FeasibilityItem {
        name: "optical depth: N_A lambdabar^2/S0",
        margin: optical_depth,
        sense: Sense::MuchGreater,
        status: grade(optical_depth, Sense::MuchGreater),
    });

    let overall = items
        .iter()
        .map(|i| i.status)
        .fold(FeasibilityStatus::Pass, |acc, s| match (acc, s) {
            (FeasibilityStatus::Fail, _) | (_, FeasibilityStatus::Fail) => FeasibilityStatus::Fail,
            (FeasibilityStatus::Warn, _) | (_, FeasibilityStatus::Warn) => FeasibilityStatus::Warn,
            _ => FeasibilityStatus::Pass,
        });

    Ok(FeasibilityReport { items, optical_depth, overall })
}
