//! Command-line front end: `run`, `verify`, `spectrum` and `preset`.

use crate::boundary::{BoundaryKind, PecSatParams};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::format::{dump_matrix, fmt_f64};
use crate::grid::{Edge, MeshBlock};
use crate::integrator::estimate_max_timestep;
use crate::interface::{build_compatible_restriction, build_prolongation, compatibility_residual, InterfaceCoupling, InterfaceSigmas};
use crate::runner::{run_scenario, RunOptions};
use crate::sbp::{accuracy_residuals, build_sbp_1d, build_staggered_axis, sbp_identity_residual, SbpFamily};
use crate::scenario::{build_preset, dft_spectrum, find_peaks, linear_grid};
use crate::stability::spectral_stability_report;
use crate::system::SimSystem;
use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "sbp-fdtd", version, about = "2D TM FDTD with SBP operators, SAT boundaries and subgridding")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario from a config file or a preset.
    Run(RunArgs),
    /// Check operator identities, transfer compatibility and spectral stability.
    Verify(VerifyArgs),
    /// DFT of a probe CSV with a peak list.
    Spectrum(SpectrumArgs),
    /// Print a preset as a config file.
    Preset(PresetArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Domain scale for presets, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long, conflicts_with = "safety")]
    pub dt: Option<f64>,
    #[arg(long)]
    pub safety: Option<f64>,
    #[arg(long)]
    pub family: Option<String>,
    /// Spectral stability check before stepping, when the system is small enough.
    #[arg(long)]
    pub check_stability: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Restrict to one family; both by default.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_w: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_e: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_n: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_ez_coarse: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_ez_fine: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_h_coarse: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_h_fine: Option<f64>,
    /// Largest cell count for the 1D operator checks.
    #[arg(long, default_value_t = 128)]
    pub max_n: usize,
    /// Append matrix listings of the 1D operators with this many cells.
    #[arg(long)]
    pub dump: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Probe CSV with a `t,value` header.
    pub input: PathBuf,
    #[arg(long)]
    pub f_min: f64,
    #[arg(long)]
    pub f_max: f64,
    #[arg(long, default_value_t = 2001)]
    pub n_points: usize,
    /// Hann window.
    #[arg(long)]
    pub window: bool,
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    /// Output CSV; defaults to `<input stem>_spectrum.csv` beside the input.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    pub name: String,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericalBlowup { .. } => EXIT_BLOWUP,
        Error::VerificationFailed(_) => EXIT_VERIFY,
        Error::Validation(_)
        | Error::InvalidInput(_)
        | Error::InvalidArgument(_)
        | Error::UnknownPreset(_)
        | Error::UnsupportedPairing(_)
        | Error::Io(_) => EXIT_VALIDATION,
        _ => 1,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut out = std::io::stdout().lock();
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a, &mut out),
        Command::Verify(a) => match verify_options(&a) {
            Ok(opts) => cmd_verify(&opts).map(|r| {
                let _ = out.write_all(r.text.as_bytes());
                if r.passed() {
                    EXIT_OK
                } else {
                    EXIT_VERIFY
                }
            }),
            Err(e) => Err(e),
        },
        Command::Spectrum(a) => cmd_spectrum(&a, &mut out),
        Command::Preset(a) => build_preset(&a.name, a.scale).map(|c| {
            let _ = out.write_all(c.to_toml().as_bytes());
            EXIT_OK
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Config from `--config` or `--preset` with the command-line overrides applied.
pub fn resolve_config(a: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(p), None) => ScenarioConfig::load(p)?,
        (None, Some(name)) => build_preset(name, a.scale)?,
        _ => return Err(Error::Validation(vec!["--config, --preset: exactly one is required".into()])),
    };
    if let Some(n) = a.steps {
        cfg.run.steps = Some(n);
        cfg.run.t_end = None;
    }
    if let Some(dt) = a.dt {
        cfg.run.dt = Some(dt);
        cfg.run.safety = None;
    }
    if let Some(s) = a.safety {
        cfg.run.safety = Some(s);
        cfg.run.dt = None;
    }
    if let Some(f) = &a.family {
        cfg.run.family = f.clone();
    }
    if let Some(d) = &a.out_dir {
        cfg.run.out_dir = Some(d.display().to_string());
    }
    Ok(cfg)
}

pub fn cmd_run(a: &RunArgs, out: &mut impl std::io::Write) -> Result<i32> {
    let cfg = resolve_config(a)?;
    cfg.validate()?;
    let out_dir = PathBuf::from(cfg.run.out_dir.clone().unwrap_or_else(|| "out".to_string()));
    let start = Instant::now();
    let summary = run_scenario(&cfg, &RunOptions { out_dir: out_dir.clone(), check_stability: a.check_stability })?;
    let wall = start.elapsed().as_secs_f64();
    writeln!(out, "dt {}", fmt_f64(summary.dt))?;
    writeln!(out, "steps {}", summary.steps)?;
    writeln!(out, "cells {}", summary.cells)?;
    writeln!(out, "final energy {}", fmt_f64(summary.final_energy))?;
    if let Some(r) = &summary.stability {
        writeln!(out, "stability max real part {} (c/h units {})", fmt_f64(r.max_real_part), fmt_f64(r.scaled_max_real_part()))?;
    }
    for p in &summary.peaks {
        writeln!(out, "peak {} Hz relative {}", fmt_f64(p.f), fmt_f64(p.relative))?;
    }
    writeln!(out, "outputs in {} ({:.2} s)", out_dir.display(), wall)?;
    Ok(EXIT_OK)
}

/// Reads a `t,value` CSV and checks the time column is uniform; returns `(dt, values)`.
pub fn read_probe_csv(path: &Path) -> Result<(f64, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (k == 0 && line.starts_with('t')) {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            return Err(Error::InvalidInput(format!("{}:{}: expected two columns", path.display(), k + 1)));
        };
        let parse =
            |s: &str| s.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("{}:{}: bad number '{s}'", path.display(), k + 1)));
        t.push(parse(a)?);
        v.push(parse(b)?);
    }
    if t.len() < 2 {
        return Err(Error::InvalidInput(format!("{}: fewer than 2 samples", path.display())));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("{}: time column does not increase", path.display())));
    }
    for (k, &tk) in t.iter().enumerate() {
        if (tk - t[0] - k as f64 * dt).abs() > 1e-6 * dt {
            return Err(Error::InvalidInput(format!("{}: nonuniform time step at row {}", path.display(), k + 2)));
        }
    }
    Ok((dt, v))
}

pub fn cmd_spectrum(a: &SpectrumArgs, out: &mut impl std::io::Write) -> Result<i32> {
    let grid = linear_grid(a.f_min, a.f_max, a.n_points)?;
    let (dt, series) = read_probe_csv(&a.input)?;
    let mags = dft_spectrum(&series, dt, &grid, a.window)?;
    let path = a.output.clone().unwrap_or_else(|| {
        let stem = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "probe".into());
        a.input.with_file_name(format!("{stem}_spectrum.csv"))
    });
    let mut text = String::from("f,magnitude\n");
    for (f, m) in grid.iter().zip(&mags) {
        let _ = writeln!(text, "{},{}", fmt_f64(*f), fmt_f64(*m));
    }
    std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    for p in find_peaks(&grid, &mags, a.threshold) {
        writeln!(out, "peak {} Hz relative {}", fmt_f64(p.f), fmt_f64(p.relative))?;
    }
    writeln!(out, "spectrum written to {}", path.display())?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub families: Vec<SbpFamily>,
    pub pec: PecSatParams,
    pub interface: InterfaceSigmas,
    pub max_n: usize,
    pub dump: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            families: SbpFamily::ALL.to_vec(),
            pec: PecSatParams::conserving(),
            interface: InterfaceSigmas::conserving(),
            max_n: 128,
            dump: None,
        }
    }
}

pub fn verify_options(a: &VerifyArgs) -> Result<VerifyOptions> {
    let mut o = VerifyOptions { max_n: a.max_n.max(2), dump: a.dump, ..VerifyOptions::default() };
    if let Some(f) = &a.family {
        o.families = vec![f.parse()?];
    }
    for (e, v) in [(Edge::W, a.sigma_w), (Edge::E, a.sigma_e), (Edge::S, a.sigma_s), (Edge::N, a.sigma_n)] {
        if let Some(v) = v {
            o.pec.set(e, v);
        }
    }
    let s = &mut o.interface;
    if let Some(v) = a.sigma_ez_coarse {
        s.ez_coarse = v;
    }
    if let Some(v) = a.sigma_ez_fine {
        s.ez_fine = v;
    }
    if let Some(v) = a.sigma_h_coarse {
        s.h_coarse = v;
    }
    if let Some(v) = a.sigma_h_fine {
        s.h_fine = v;
    }
    Ok(o)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub text: String,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: String, value: f64, limit: f64) {
        let pass = value <= limit;
        let _ = writeln!(self.text, "{} {name} value={} limit={}", if pass { "PASS" } else { "FAIL" }, fmt_f64(value), fmt_f64(limit));
        self.checks.push(Check { name, value, limit, pass });
    }

    fn note(&mut self, line: String) {
        let _ = writeln!(self.text, "     {line}");
    }
}

/// Small PEC systems used by the spectral checks: one block, and 2:1 and 4:1 pairs.
pub fn verify_systems(family: SbpFamily, pec: PecSatParams, sigmas: InterfaceSigmas) -> Result<Vec<(String, SimSystem)>> {
    let mut out = Vec::new();
    let b = MeshBlock::new("single", (0.0, 0.0), 8, 6, 0.1, family)?;
    let mut s = SimSystem::single(b, BoundaryKind::Pec)?;
    s.pec_params = pec;
    out.push(("single-pec 8x6".to_string(), s));

    let fine = MeshBlock::new("fine", (0.0, 0.0), 8, 8, 0.1, family)?;
    let coarse = MeshBlock::new("coarse", (0.8, 0.0), 4, 4, 0.2, family)?;
    let c = InterfaceCoupling::new(0, &coarse, 1, &fine, Edge::W, 2, sigmas)?;
    let mut s = SimSystem::new(vec![coarse, fine], vec![c], vec![[BoundaryKind::Pec; 4]; 2])?;
    s.pec_params = pec;
    out.push(("pair 2:1".to_string(), s));

    let fine = MeshBlock::new("fine", (0.0, 0.0), 12, 8, 0.1, family)?;
    let coarse = MeshBlock::new("coarse", (0.0, 0.8), 3, 3, 0.4, family)?;
    let c = InterfaceCoupling::new(0, &coarse, 1, &fine, Edge::S, 4, sigmas)?;
    let mut s = SimSystem::new(vec![coarse, fine], vec![c], vec![[BoundaryKind::Pec; 4]; 2])?;
    s.pec_params = pec;
    out.push(("pair 4:1".to_string(), s));
    Ok(out)
}

/// Runs every check; failures are report content, not errors.
pub fn cmd_verify(o: &VerifyOptions) -> Result<VerifyReport> {
    let mut r = VerifyReport::default();
    let conserving_pec = o.pec == PecSatParams::conserving();
    for &family in &o.families {
        for n in 2..=o.max_n {
            let h = 1.0 / n as f64;
            let axis = build_staggered_axis(n, h)?;
            let ops = build_sbp_1d(&axis, family)?;
            r.push(format!("sbp-identity family={family} n={n}"), sbp_identity_residual(&ops)?, 1e-14);
            r.push(format!("sbp-accuracy family={family} n={n}"), accuracy_residuals(&ops, &axis)?.max(), 1e-13 / h);
        }
        for ratio in [2, 4] {
            let mut worst: f64 = 0.0;
            for nc in 2..=64 {
                let ac = build_sbp_1d(&build_staggered_axis(nc, 1.0)?, family)?;
                let af = build_sbp_1d(&build_staggered_axis(nc * ratio, 1.0 / ratio as f64)?, family)?;
                let t = build_prolongation(nc + 1, ratio)?;
                let th = build_compatible_restriction(&t, &af.p_minus, &ac.p_minus)?;
                worst = worst.max(compatibility_residual(&t, &th, &af.p_minus, &ac.p_minus));
            }
            r.push(format!("norm-compatibility family={family} ratio={ratio} coarse=2..64"), worst, 1e-14);
        }
        let reference = verify_systems(family, PecSatParams::conserving(), InterfaceSigmas::conserving())?;
        for ((name, sys), (_, base)) in verify_systems(family, o.pec, o.interface)?.into_iter().zip(&reference) {
            // step size of the conserving system on the same mesh
            let dt = estimate_max_timestep(base, 0.9).unwrap_or(0.0);
            let rep = spectral_stability_report(&sys, if dt > 0.0 { dt } else { 1e-3 / sys.rate_scale() })?;
            r.push(format!("max-real-part family={family} {name} (c/h units)"), rep.scaled_max_real_part(), 1e-9);
            r.note(format!("dim={} max real part={} 1/s skewness={}", rep.dim, fmt_f64(rep.max_real_part), fmt_f64(rep.skewness)));
            let conserving = conserving_pec && (name.starts_with("single") || o.interface == InterfaceSigmas::conserving());
            if let (Some(hi), Some(lo), true) = (rep.max_amplification_magnitude, rep.min_amplification_magnitude, dt > 0.0) {
                let dev = (hi - 1.0).abs().max((1.0 - lo).abs());
                if conserving {
                    r.push(format!("amplification family={family} {name} |λ|-1 at dt={}", fmt_f64(dt)), dev, 1e-8);
                } else {
                    r.note(format!("one-step |λ| range [{}, {}]", fmt_f64(lo), fmt_f64(hi)));
                }
            }
        }
        if let Some(n) = o.dump {
            let ops = build_sbp_1d(&build_staggered_axis(n.max(2), 1.0)?, family)?;
            let _ = writeln!(r.text, "# family {family}, n = {}, h = 1", ops.n_cells);
            r.text.push_str(&dump_matrix("d_plus", &ops.d_plus));
            r.text.push_str(&dump_matrix("d_minus", &ops.d_minus));
            r.text.push_str(&dump_matrix("p_plus", &DMatrix::from_diagonal(&DVector::from_vec(ops.p_plus.clone()))));
            r.text.push_str(&dump_matrix("p_minus", &DMatrix::from_diagonal(&DVector::from_vec(ops.p_minus.clone()))));
            r.text.push_str(&dump_matrix("p_left", &DMatrix::from_row_slice(1, ops.p_left.len(), &ops.p_left)));
        }
    }
    let failed = r.checks.iter().filter(|c| !c.pass).count();
    let _ = writeln!(r.text, "verify: {} checks, {failed} failed", r.checks.len());
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Validation(vec![])), 2);
        assert_eq!(exit_code(&Error::NumericalBlowup { step: 1, block: "b".into() }), 3);
        assert_eq!(exit_code(&Error::VerificationFailed("x".into())), 4);
    }

    #[test]
    fn overrides_replace_exclusive_keys() {
        let a = RunArgs {
            config: None,
            preset: Some("cavity-uniform".into()),
            scale: 0.5,
            out_dir: None,
            steps: Some(10),
            dt: Some(1e-11),
            safety: None,
            family: None,
            check_stability: false,
        };
        let cfg = resolve_config(&a).unwrap();
        assert_eq!((cfg.run.steps, cfg.run.t_end, cfg.run.dt, cfg.run.safety), (Some(10), None, Some(1e-11), None));
        assert!(cfg.diagnostics().is_empty());
    }
}
