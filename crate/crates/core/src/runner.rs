//! Time marching of a configured scenario and its file outputs.

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::grid::{write_snapshot, FieldKind, FieldState};
use crate::integrator::{estimate_max_timestep, Stepper};
use crate::scenario::{compute_sar, dft_spectrum, find_peaks, linear_grid, FieldNorm, Peak, SarAccumulator};
use crate::stability::{spectral_stability_report, SpectralReport};
use crate::system::{compute_energy, synchronized_energy, EnergyKind, EnergyReport, SimSystem, DEFAULT_DENSE_CAP};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSite {
    pub id: String,
    pub block: usize,
    pub kind: FieldKind,
    pub index: usize,
    pub every: u64,
}

/// A built scenario ready to step.
pub struct Simulation {
    pub sys: SimSystem,
    pub stepper: Stepper,
    pub states: Vec<FieldState>,
    pub probes: Vec<ProbeSite>,
    pub n_steps: u64,
}

impl Simulation {
    /// Builds the system and picks `dt` from `run.dt` or `run.safety` times the estimate.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let sys = cfg.build_system()?;
        let dt = match (cfg.run.dt, cfg.run.safety) {
            (Some(dt), _) => dt,
            (None, Some(s)) => estimate_max_timestep(&sys, s)?,
            (None, None) => unreachable!("validated"),
        };
        Self::assemble(cfg, sys, dt)
    }

    /// Builds with an explicit `dt`, ignoring the run's dt and safety.
    pub fn with_dt(cfg: &ScenarioConfig, dt: f64) -> Result<Self> {
        let sys = cfg.build_system()?;
        Self::assemble(cfg, sys, dt)
    }

    fn assemble(cfg: &ScenarioConfig, sys: SimSystem, dt: f64) -> Result<Self> {
        let injections = cfg.build_injections(&sys)?;
        let stepper = Stepper::new(&sys, dt, injections)?;
        let probes = cfg
            .probes
            .iter()
            .map(|p| {
                let block = ScenarioConfig::locate(&sys, p.position).expect("validated");
                let kind: FieldKind = p.field.parse().expect("validated");
                let b = &sys.blocks[block];
                let (ix, iy) = b.nearest(kind, (p.position[0], p.position[1]));
                let index = match kind {
                    FieldKind::Ez => b.ez_index(ix, iy),
                    FieldKind::Hx => b.hx_index(ix, iy),
                    FieldKind::Hy => b.hy_index(ix, iy),
                };
                ProbeSite { id: p.id.clone(), block, kind, index, every: p.every }
            })
            .collect();
        let n_steps = match (cfg.run.steps, cfg.run.t_end) {
            (Some(n), _) => n,
            (None, Some(t)) => (t / dt - 1e-9).ceil().max(0.0) as u64,
            (None, None) => unreachable!("validated"),
        };
        let states = sys.zero_states();
        Ok(Simulation { sys, stepper, states, probes, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt
    }

    pub fn step(&mut self) -> Result<()> {
        self.stepper.step(&self.sys, &mut self.states)
    }

    pub fn probe_value(&self, p: &ProbeSite) -> f64 {
        self.states[p.block].field(p.kind)[p.index]
    }

    /// Sample time of a probe after the current step: H lives half a step later.
    pub fn probe_time(&self, p: &ProbeSite) -> f64 {
        let n = self.stepper.step_index as f64;
        match p.kind {
            FieldKind::Ez => n * self.dt(),
            _ => (n + 0.5) * self.dt(),
        }
    }

    /// Energy of the stored fields, H half a step ahead of E.
    pub fn energy(&self) -> EnergyReport {
        compute_energy(&self.sys, &self.states, self.stepper.step_index as f64 * self.dt())
    }

    /// Steps once and returns the energy at the new E time level, with H
    /// synchronized according to `kind`.
    pub fn step_with_energy(&mut self, kind: EnergyKind) -> Result<EnergyReport> {
        let prev = self.states.clone();
        self.step()?;
        let t = self.stepper.step_index as f64 * self.dt();
        Ok(synchronized_energy(&self.sys, &self.states, &prev, t, kind))
    }

    /// Steps to the end, returning every probe's samples.
    pub fn run_probes(&mut self) -> Result<Vec<Vec<f64>>> {
        let mut out = vec![Vec::new(); self.probes.len()];
        for _ in 0..self.n_steps {
            self.step()?;
            let n = self.stepper.step_index;
            for (k, p) in self.probes.iter().enumerate() {
                if n % p.every == 0 {
                    out[k].push(self.probe_value(p));
                }
            }
        }
        Ok(out)
    }

    pub fn n_cells(&self) -> usize {
        self.sys.blocks.iter().map(|b| b.nx * b.ny).sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub check_stability: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dt: f64,
    pub steps: u64,
    pub cells: usize,
    pub final_energy: f64,
    pub peaks: Vec<Peak>,
    pub stability: Option<SpectralReport>,
    pub files: Vec<PathBuf>,
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(BufWriter::new(f))
}

/// Runs a scenario and writes probe, energy, snapshot, spectrum and SAR files
/// into `opts.out_dir`. Numeric content depends only on the config.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunSummary> {
    let mut sim = Simulation::new(cfg)?;
    let stability = if opts.check_stability && sim.sys.dim() <= DEFAULT_DENSE_CAP {
        let rep = spectral_stability_report(&sim.sys, sim.dt())?;
        if rep.scaled_max_real_part() > 1e-6 {
            return Err(Error::VerificationFailed(format!(
                "spectral check found max real part {} (scaled by c/h: {})",
                fmt_f64(rep.max_real_part),
                fmt_f64(rep.scaled_max_real_part())
            )));
        }
        if let Some(m) = rep.max_amplification_magnitude {
            if m > 1.0 + 1e-8 {
                return Err(Error::VerificationFailed(format!("one-step amplification {} exceeds 1", fmt_f64(m))));
            }
        }
        Some(rep)
    } else {
        None
    };
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::Io(format!("{}: {e}", opts.out_dir.display())))?;
    let dir = opts.out_dir.as_path();
    let mut files = Vec::new();

    let mut probe_out = Vec::with_capacity(sim.probes.len());
    for p in &sim.probes {
        let mut w = create(dir, &format!("{}.csv", p.id), &mut files)?;
        writeln!(w, "t,value")?;
        probe_out.push(w);
    }
    let spectrum_probe = cfg.spectrum.as_ref().map(|s| sim.probes.iter().position(|p| p.id == s.probe).expect("validated"));
    let mut spectrum_series = Vec::new();
    let mut energy_out = if cfg.run.energy_every > 0 {
        let mut w = create(dir, "energy.csv", &mut files)?;
        write!(w, "t,total")?;
        for b in &sim.sys.blocks {
            write!(w, ",block_{}", b.id)?;
        }
        writeln!(w)?;
        Some(w)
    } else {
        None
    };
    let snapshot_fields: Vec<FieldKind> = cfg.run.snapshot_fields.iter().map(|f| f.parse().expect("validated")).collect();
    let sar_norm: Option<FieldNorm> = cfg.sar.as_ref().map(|s| s.norm.parse().expect("validated"));
    let sar_start = cfg.sar.as_ref().map_or(0, |s| s.start_step);
    let mut sar_acc: Vec<SarAccumulator> = sim.sys.blocks.iter().map(|b| SarAccumulator::new(b.n_ez())).collect();

    let write_snapshots = |sim: &Simulation, files: &mut Vec<PathBuf>| -> Result<()> {
        let n = sim.stepper.step_index;
        for (b, block) in sim.sys.blocks.iter().enumerate() {
            for &k in &snapshot_fields {
                let w = create(dir, &format!("snapshot_{}_{}_{n}.txt", block.id, k.as_str()), files)?;
                write_snapshot(w, block, k.as_str(), sim.states[b].field(k))?;
            }
        }
        Ok(())
    };
    if cfg.run.snapshot_steps.contains(&0) {
        write_snapshots(&sim, &mut files)?;
    }

    for _ in 0..sim.n_steps {
        let n = sim.stepper.step_index + 1;
        let energy = if cfg.run.energy_every > 0 && n % cfg.run.energy_every == 0 {
            Some(sim.step_with_energy(EnergyKind::Centered)?)
        } else {
            sim.step()?;
            None
        };
        for (k, p) in sim.probes.iter().enumerate() {
            if n % p.every == 0 {
                let v = sim.probe_value(p);
                writeln!(probe_out[k], "{},{}", fmt_f64(sim.probe_time(p)), fmt_f64(v))?;
                if spectrum_probe == Some(k) {
                    spectrum_series.push(v);
                }
            }
        }
        if let (Some(w), Some(e)) = (energy_out.as_mut(), energy) {
            write!(w, "{},{}", fmt_f64(e.t), fmt_f64(e.total))?;
            for v in &e.per_block {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        if sar_norm.is_some() && n >= sar_start {
            for (acc, s) in sar_acc.iter_mut().zip(&sim.states) {
                acc.record(&s.ez);
            }
        }
        if cfg.run.snapshot_steps.contains(&n) {
            write_snapshots(&sim, &mut files)?;
        }
    }
    for mut w in probe_out {
        w.flush()?;
    }
    if let Some(mut w) = energy_out {
        w.flush()?;
    }

    let mut peaks = Vec::new();
    if let (Some(s), Some(k)) = (&cfg.spectrum, spectrum_probe) {
        if spectrum_series.len() >= 2 {
            let grid = linear_grid(s.f_min, s.f_max, s.n_points)?;
            let dt = sim.dt() * sim.probes[k].every as f64;
            let mags = dft_spectrum(&spectrum_series, dt, &grid, s.window)?;
            let mut w = create(dir, "spectrum.csv", &mut files)?;
            writeln!(w, "f,magnitude")?;
            for (f, m) in grid.iter().zip(&mags) {
                writeln!(w, "{},{}", fmt_f64(*f), fmt_f64(*m))?;
            }
            w.flush()?;
            peaks = find_peaks(&grid, &mags, s.threshold);
            let mut w = create(dir, "peaks.csv", &mut files)?;
            writeln!(w, "f,magnitude,relative")?;
            for p in &peaks {
                writeln!(w, "{},{},{}", fmt_f64(p.f), fmt_f64(p.magnitude), fmt_f64(p.relative))?;
            }
            w.flush()?;
        }
    }
    if let Some(norm) = sar_norm {
        for (b, block) in sim.sys.blocks.iter().enumerate() {
            if block.materials.sigma_e.iter().all(|&s| s == 0.0) {
                continue;
            }
            let sar = compute_sar(&sar_acc[b].field(norm), &block.materials, norm)?;
            let mut w = create(dir, &format!("sar_{}.txt", block.id), &mut files)?;
            write_snapshot(&mut w, block, &format!("sar_{norm}"), &sar)?;
            w.flush()?;
        }
    }

    let final_energy = sim.energy().total;
    let mut w = create(dir, "run.txt", &mut files)?;
    writeln!(w, "dt {}", fmt_f64(sim.dt()))?;
    writeln!(w, "steps {}", sim.n_steps)?;
    writeln!(w, "cells {}", sim.n_cells())?;
    writeln!(w, "unknowns {}", sim.sys.dim())?;
    writeln!(w, "final_energy {}", fmt_f64(final_energy))?;
    if let Some(norm) = sar_norm {
        writeln!(w, "sar_norm {norm}")?;
    }
    w.flush()?;

    Ok(RunSummary { dt: sim.dt(), steps: sim.n_steps, cells: sim.n_cells(), final_energy, peaks, stability, files })
}
