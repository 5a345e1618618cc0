//! Command-line front end: deterministic scenario runs with CSV/JSON/SVG
//! outputs.  Exit codes: 0 success, 2 configuration problem, 3 numeric or
//! solver failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spinlight::config::{Mode, ScenarioConfig};
use spinlight::coupling::{epsilon as eps_of, kappa1, omega1, LineTable};
use spinlight::entangle::{
    entanglement_witness, ppt_minimum_symplectic, run_entangle, solve_modes_for_state,
    SolveOptions,
};
use spinlight::error::Error;
use spinlight::memory::{fidelity_report, regime_windows, run_read, run_write};
use spinlight::output::{
    self, channel_name, config_hash, fmt_f64, modes_csv, plot_svg, read_spectra_csv, spectra_csv,
    table_csv, write_text,
};
use spinlight::propagator::{build_transfer, symplectic_residual, ChannelLabel, Grid};
use spinlight::spectral::{mandel_spectrum, GaussianState, MandelSpectrum};

#[derive(Parser)]
#[command(name = "spinlight", version, about = "Raman light-atom interface simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print progress notes to stderr.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the coupling constants of a hyperfine line table over detuning.
    Coupling {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the write/store/retrieve memory protocol.
    Memory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the grid point count per axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Generate light-spin entanglement and solve for the optimal modes.
    Entangle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Render spectra CSV files as SVG line plots.
    Plot {
        /// CSV files produced by the other subcommands.
        csv: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Deterministic self-check of the numerical kernels.
    Selftest {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::Parse { .. } | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Coupling { config, out } => cmd_coupling(config, out, cli.verbose),
        Command::Memory { config, out, grid } => cmd_memory(config, out, *grid, cli.verbose),
        Command::Entangle { config, out, grid } => cmd_entangle(config, out, *grid, cli.verbose),
        Command::Plot { csv, out } => cmd_plot(csv, out),
        Command::Selftest { out } => cmd_selftest(out),
    }
}

fn load_config(path: &Path, expect: Mode) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    let cfg = ScenarioConfig::parse(&text)?;
    if cfg.mode != expect {
        return Err(Error::Config(format!(
            "config mode `{}` does not match the `{}` subcommand",
            cfg.mode.as_str(),
            expect.as_str()
        )));
    }
    Ok(cfg)
}

fn meta_for(cfg: &ScenarioConfig) -> Vec<(&'static str, String)> {
    vec![("config_hash", config_hash(&cfg.raw_text)), ("mode", cfg.mode.as_str().to_string())]
}

fn spectra_of(state: &GaussianState) -> Vec<MandelSpectrum> {
    [ChannelLabel::XiI, ChannelLabel::XiIII, ChannelLabel::TI, ChannelLabel::TIII]
        .into_iter()
        .map(|ch| mandel_spectrum(state, ch))
        .collect()
}

fn labeled<'a>(
    stage: &str,
    specs: &'a [MandelSpectrum],
) -> Vec<(String, &'a MandelSpectrum)> {
    specs
        .iter()
        .map(|s| (format!("{}_{stage}", channel_name(s.channel)), s))
        .collect()
}

fn cmd_memory(
    path: &Path,
    out: &Path,
    grid: Option<usize>,
    verbose: bool,
) -> Result<(), Error> {
    let cfg = load_config(path, Mode::Memory)?;
    let run = cfg.protocol_run(grid)?;
    let meta = meta_for(&cfg);

    if verbose {
        eprintln!(
            "memory run: ATL = {:.3}, A'T'L = {:.3}, grid {} x {}",
            run.write.atl(),
            run.read.atl(),
            run.grid.n_t,
            run.grid.n_z
        );
    }

    let input = GaussianState::input_state(&run.input, &run.grid, &run.write, run.flags.broadband)?;
    let written = run_write(&run)?;
    let read = run_read(&written, &run)?;

    let in_specs = spectra_of(&input);
    let write_specs = spectra_of(&written);
    let read_specs = spectra_of(&read);

    let mut series = labeled("in", &in_specs);
    series.extend(labeled("write", &write_specs));
    write_text(&out.join("write_spectra.csv"), &spectra_csv(&meta, &series))?;

    let mut series = labeled("stored", &write_specs[2..]);
    series.extend(labeled("read", &read_specs));
    write_text(&out.join("read_spectra.csv"), &spectra_csv(&meta, &series))?;

    let report = fidelity_report(&run)?;
    let windows = regime_windows(&run);
    let json = serde_json::json!({
        "config_hash": config_hash(&cfg.raw_text),
        "version": output::VERSION,
        "write_atl": run.write.atl(),
        "read_atl": run.read.atl(),
        "input": { "xi1": run.input.xi1, "xi3": run.input.xi3, "tau3": run.input.tau3 },
        "broadband": run.flags.broadband,
        "quantum_fidelity": report.quantum_f,
        "stored_fidelity": report.stored_f,
        "retrieved_fidelity": report.retrieved_f,
        "classical_fidelity": report.classical_f,
        "classical_constraint_ok": report.classical_constraint_ok,
        "classical_attempts": report.classical_attempts,
        "chosen_mode": report.chosen_mode,
        "windows": {
            "q_c": windows.q_c,
            "omega_c": windows.omega_c,
            "l_c": windows.l_c,
            "write_bandwidth_margin": windows.write_bandwidth_margin,
            "write_length_margin": windows.write_length_margin,
            "read_bandwidth_margin": windows.read_bandwidth_margin,
            "read_duration_margin": windows.read_duration_margin,
            "collective_low": windows.collective_low,
            "collective_high": windows.collective_high,
        },
    });
    write_text(&out.join("fidelity.json"), &format!("{:#}\n", json))?;
    if verbose {
        eprintln!(
            "fidelity: quantum {:.4} (stored {:.4}, retrieved {:.4}) vs classical {:.4}",
            report.quantum_f, report.stored_f, report.retrieved_f, report.classical_f
        );
    }
    Ok(())
}

fn cmd_entangle(
    path: &Path,
    out: &Path,
    grid: Option<usize>,
    verbose: bool,
) -> Result<(), Error> {
    let cfg = load_config(path, Mode::Entangle)?;
    let grid = cfg.grid_with_override(grid)?;
    let meta = meta_for(&cfg);

    let run_point = |atl: f64| -> Result<_, Error> {
        let params = cfg.params_for(atl, cfg.duration()?)?;
        let state = run_entangle(&params, &grid)?;
        let pair = solve_modes_for_state(&state, &SolveOptions::default())?;
        let witness = entanglement_witness(&state, &pair)?;
        let nu = ppt_minimum_symplectic(&state, &pair)?;
        Ok((state, pair, witness, nu))
    };

    let atl = cfg.entangle_atl()?;
    let (state, pair, witness, nu) = run_point(atl)?;
    if verbose {
        eprintln!("entangle ATL = {atl}: V1+V3 = {:.6}, PPT nu = {:.6}", witness.sum, nu);
    }

    let specs = spectra_of(&state);
    write_text(&out.join("entangle_spectra.csv"), &spectra_csv(&meta, &labeled("out", &specs)))?;

    let t_coords: Vec<f64> = (0..grid.n_t).map(|i| grid.t_mid(i)).collect();
    let z_coords: Vec<f64> = (0..grid.n_z).map(|j| grid.z_mid(j)).collect();
    let h: Vec<f64> = pair.h.iter().copied().collect();
    let g: Vec<f64> = pair.g.iter().copied().collect();
    write_text(&out.join("modes.csv"), &modes_csv(&meta, &t_coords, &h, &z_coords, &g))?;

    let json = serde_json::json!({
        "config_hash": config_hash(&cfg.raw_text),
        "version": output::VERSION,
        "atl": atl,
        "v1": witness.v1,
        "v3": witness.v3,
        "epr_sum": witness.sum,
        "separable_bound": witness.separable_bound,
        "normalization": "two uncorrelated vacua give an EPR sum of 4",
        "entangled": witness.entangled,
        "residual": pair.residual,
        "ppt_min_symplectic": nu,
    });
    write_text(&out.join("witness.json"), &format!("{:#}\n", json))?;

    let sweep = cfg.entangle_atl_sweep()?;
    if !sweep.is_empty() {
        let mut rows = Vec::new();
        for atl in sweep {
            let (_, pair, witness, nu) = run_point(atl)?;
            if verbose {
                eprintln!("  sweep ATL = {atl}: V1+V3 = {:.6}", witness.sum);
            }
            rows.push(vec![atl, witness.v1, witness.v3, witness.sum, pair.residual, nu]);
        }
        let csv = table_csv(
            &meta,
            &["atl", "v1", "v3", "epr_sum", "residual", "ppt_min_symplectic"],
            &rows,
        );
        write_text(&out.join("witness_sweep.csv"), &csv)?;
    }
    Ok(())
}

fn cmd_coupling(path: &Path, out: &Path, verbose: bool) -> Result<(), Error> {
    let cfg = load_config(path, Mode::Coupling)?;
    let table = match cfg.line_file() {
        None | Some("builtin:rb87_d1") => LineTable::rb87_d1(),
        Some(file) => {
            let text = std::fs::read_to_string(file)?;
            LineTable::parse(&text)?
        }
    };
    let f0 = cfg.coupling_f0()?;
    let cbar13 = spinlight::angular::alignment_coefficients(f0)?.cbar13_f64();
    let (start, stop, steps) = cfg.coupling_sweep()?;
    let s0 = cfg.coupling_s0()?;
    let fz_bar = cfg.coupling_fz_bar()?;
    let xi2_bar = cfg.coupling_xi2_bar()?;
    const MHZ: f64 = 2.0 * std::f64::consts::PI * 1e6;

    if verbose {
        eprintln!("coupling sweep: {steps} points over [{start}, {stop}] MHz, F0 = {f0}");
    }

    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        let det = start + (stop - start) * k as f64 / (steps - 1) as f64;
        let omega = table.reference_omega + det * MHZ;
        // flag rows within one sweep step of a tabulated resonance
        let guard = (stop - start) / (steps - 1) as f64 * MHZ;
        let near_pole = table.nearest_pole_distance(omega) < guard;
        if table.nearest_pole_distance(omega) == 0.0 {
            continue; // skip exact resonance samples
        }
        let k1 = kappa1(&table, f0, omega, s0, fz_bar)?;
        let o1 = omega1(&table, f0, omega, s0, xi2_bar)?;
        let eps = eps_of(&table, f0, omega, s0)?;
        let a = -2.0 * cbar13 * eps * eps * xi2_bar * fz_bar;
        rows.push(vec![det, k1, o1, eps, a, if near_pole { 1.0 } else { 0.0 }]);
    }
    let csv = table_csv(
        &meta_for(&cfg),
        &["detuning_mhz", "kappa1", "omega1", "epsilon", "a", "near_pole"],
        &rows,
    );
    write_text(&out.join("coupling.csv"), &csv)?;
    Ok(())
}

fn cmd_plot(paths: &[PathBuf], out: &Path) -> Result<(), Error> {
    if paths.is_empty() {
        return Err(Error::Config("plot needs at least one csv path".into()));
    }
    for path in paths {
        let text = std::fs::read_to_string(path)?;
        let series = read_spectra_csv(&text)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Config(format!("bad csv path {path:?}")))?;
        let svg = plot_svg(stem, &series)?;
        write_text(&out.join(format!("{stem}.svg")), &svg)?;
    }
    Ok(())
}

fn cmd_selftest(out: &Path) -> Result<(), Error> {
    use spinlight::angular::{alignment_coefficients, clebsch_gordan, wigner6j, HalfInt};
    use spinlight::bessel::{i0, j0, j1};

    let mut lines: Vec<String> = Vec::new();
    let mut push = |name: &str, value: f64| {
        lines.push(format!("{name} = {}", fmt_f64(value)));
    };

    let h = HalfInt::from_twice;
    push("cg(1,1,1,-1|0,0)", clebsch_gordan(h(2), h(2), h(2), h(-2), h(0), h(0))?);
    push("cg(1,0,1,0|2,0)", clebsch_gordan(h(2), h(0), h(2), h(0), h(4), h(0))?);
    push("sixj(1,1,1;1,1,1)", wigner6j(h(2), h(2), h(2), h(2), h(2), h(2))?);
    let coefs = alignment_coefficients(HalfInt::from_int(2))?;
    push("c1(f0=2)", coefs.c1_f64());
    push("c3(f0=2)", coefs.c3);
    push("cbar13(f0=2)", coefs.cbar13_f64());
    push("j0(2.5)", j0(2.5));
    push("j1(12.0)", j1(12.0));
    push("i0(6.0)", i0(6.0));

    let params = spinlight::coupling::InterfaceParams::from_atl(
        -10.0,
        0.05,
        1.0,
        0.5,
        HalfInt::from_int(1),
        1.0,
        1.0,
    )?;
    let grid = Grid::new(48, 48, 1.0, 1.0)?;
    let tm = build_transfer(&params, &grid)?;
    push("symplectic_residual(atl=-10,n=48)", symplectic_residual(&tm));

    let vac = GaussianState::vacuum_state(&grid, &params)?;
    let out_state = spinlight::spectral::propagate(&vac, &tm)?;
    push("vacuum_trace_drift", out_state.normalized_trace() - vac.normalized_trace());

    let ent_params = spinlight::coupling::InterfaceParams::from_atl(
        10.0,
        0.05,
        1.0,
        0.5,
        HalfInt::from_int(1),
        1.0,
        1.0,
    )?;
    let state = run_entangle(&ent_params, &grid)?;
    let pair = solve_modes_for_state(&state, &SolveOptions::default())?;
    let witness = entanglement_witness(&state, &pair)?;
    push("epr_sum(atl=+10,n=48)", witness.sum);

    let text = format!("# spinlight selftest {}\n{}\n", output::VERSION, lines.join("\n"));
    write_text(&out.join("selftest.txt"), &text)?;
    println!("selftest: {} checks written", lines.len());
    Ok(())
}
