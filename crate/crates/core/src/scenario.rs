//! Tissue data, spectrum and SAR post-processing, and the named presets.

use crate::config::{
    BlockConfig, BoundaryConfig, InterfaceConfig, MaterialConfig, ProbeConfig, RunConfig, SarConfig, ScenarioConfig, SourceConfig,
    SpectrumConfig,
};
use crate::error::{Error, Result};
use crate::grid::{MaterialMap, C0};
use crate::sbp::SbpFamily;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tissue {
    pub name: &'static str,
    /// kg/m³
    pub density: f64,
    pub eps_rel: f64,
    /// S/m
    pub sigma: f64,
}

pub const TISSUES: [Tissue; 4] = [
    Tissue { name: "brain", density: 1046.0, eps_rel: 4.0, sigma: 0.04 },
    Tissue { name: "csf", density: 1007.0, eps_rel: 4.0, sigma: 2.00 },
    Tissue { name: "dura", density: 1174.0, eps_rel: 4.0, sigma: 0.50 },
    Tissue { name: "skull", density: 1908.0, eps_rel: 2.5, sigma: 0.02 },
];

/// Case-insensitive lookup in [`TISSUES`].
pub fn tissue(name: &str) -> Option<&'static Tissue> {
    TISSUES.iter().find(|t| t.name.eq_ignore_ascii_case(name))
}

/// Direct DFT magnitude `|Δt·Σ wₙxₙ e^{−2πi f nΔt}|` at each requested frequency,
/// optionally with a Hann window `wₙ`.
pub fn dft_spectrum(series: &[f64], dt: f64, f_grid: &[f64], window: bool) -> Result<Vec<f64>> {
    if f_grid.is_empty() {
        return Err(Error::InvalidArgument("frequency grid is empty".into()));
    }
    if series.len() < 2 {
        return Err(Error::InvalidArgument(format!("series needs at least 2 samples, got {}", series.len())));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let n = series.len();
    let x: Vec<f64> = if window {
        series.iter().enumerate().map(|(k, &v)| v * 0.5 * (1.0 - (2.0 * PI * k as f64 / (n - 1) as f64).cos())).collect()
    } else {
        series.to_vec()
    };
    const RESEED: usize = 64;
    Ok(f_grid
        .iter()
        .map(|&f| {
            let w = -2.0 * PI * f * dt;
            let (ds, dc) = w.sin_cos();
            let (mut re, mut im) = (0.0, 0.0);
            for (c, chunk) in x.chunks(RESEED).enumerate() {
                let (mut s, mut co) = (w * (c * RESEED) as f64).sin_cos();
                for &v in chunk {
                    re += v * co;
                    im += v * s;
                    let nc = co * dc - s * ds;
                    s = s * dc + co * ds;
                    co = nc;
                }
            }
            dt * re.hypot(im)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub f: f64,
    pub magnitude: f64,
    /// Magnitude over the largest magnitude on the grid.
    pub relative: f64,
}

/// Interior local maxima at or above `rel_threshold` times the global maximum,
/// in increasing frequency.
pub fn find_peaks(f_grid: &[f64], mags: &[f64], rel_threshold: f64) -> Vec<Peak> {
    let max = mags.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 || mags.len() < 3 {
        return vec![];
    }
    (1..mags.len() - 1)
        .filter(|&i| mags[i] > mags[i - 1] && mags[i] >= mags[i + 1] && mags[i] >= rel_threshold * max)
        .map(|i| Peak { f: f_grid[i], magnitude: mags[i], relative: mags[i] / max })
        .collect()
}

/// `n` equally spaced frequencies from `f_min` to `f_max` inclusive.
pub fn linear_grid(f_min: f64, f_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(f_max > f_min) || n < 2 {
        return Err(Error::InvalidInput(format!("empty frequency band [{f_min}, {f_max}] with {n} points")));
    }
    Ok((0..n).map(|k| f_min + (f_max - f_min) * k as f64 / (n - 1) as f64).collect())
}

/// How `|E|` is taken from a recorded window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldNorm {
    /// Largest `|Ez|` seen, used as the amplitude.
    Peak,
    /// Root mean square of `Ez`; amplitude `√2·rms`.
    Rms,
}

impl FieldNorm {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldNorm::Peak => "peak",
            FieldNorm::Rms => "rms",
        }
    }
}

impl fmt::Display for FieldNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "peak" => Ok(FieldNorm::Peak),
            "rms" => Ok(FieldNorm::Rms),
            other => Err(Error::InvalidArgument(format!("unknown field norm '{other}'"))),
        }
    }
}

/// Nodewise `σ·|E|²/(2ρ)` in W/kg, where `field` holds the selected norm per Ez node.
pub fn compute_sar(field: &[f64], materials: &MaterialMap, norm: FieldNorm) -> Result<Vec<f64>> {
    if field.len() != materials.sigma_e.len() {
        return Err(Error::InvalidArgument(format!("field has {} nodes, material map has {}", field.len(), materials.sigma_e.len())));
    }
    if let Some(k) = materials.density.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument(format!("density at node {k} is not positive")));
    }
    let amp2 = match norm {
        FieldNorm::Peak => 1.0,
        FieldNorm::Rms => 2.0,
    };
    Ok(field
        .iter()
        .zip(&materials.sigma_e)
        .zip(&materials.density)
        .map(|((&e, &s), &rho)| if s == 0.0 { 0.0 } else { s * amp2 * e * e / (2.0 * rho) })
        .collect())
}

/// Running peak and mean-square of Ez over a recording window.
#[derive(Debug, Clone)]
pub struct SarAccumulator {
    pub peak: Vec<f64>,
    pub sum_sq: Vec<f64>,
    pub samples: u64,
}

impl SarAccumulator {
    pub fn new(n: usize) -> Self {
        SarAccumulator { peak: vec![0.0; n], sum_sq: vec![0.0; n], samples: 0 }
    }

    pub fn record(&mut self, ez: &[f64]) {
        for ((p, s), &e) in self.peak.iter_mut().zip(self.sum_sq.iter_mut()).zip(ez) {
            *p = p.max(e.abs());
            *s += e * e;
        }
        self.samples += 1;
    }

    pub fn field(&self, norm: FieldNorm) -> Vec<f64> {
        match norm {
            FieldNorm::Peak => self.peak.clone(),
            FieldNorm::Rms => {
                let n = self.samples.max(1) as f64;
                self.sum_sq.iter().map(|s| (s / n).sqrt()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    CavityUniform,
    CavitySubgrid,
    HeadSar,
    Siw,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::CavityUniform, Preset::CavitySubgrid, Preset::HeadSar, Preset::Siw];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::CavityUniform => "cavity-uniform",
            Preset::CavitySubgrid => "cavity-subgrid",
            Preset::HeadSar => "head-sar",
            Preset::Siw => "siw",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Named preset at `scale` (1 = full size). Domain extents and positions
/// shrink with the scale; cell sizes do not.
pub fn build_preset(name: &str, scale: f64) -> Result<ScenarioConfig> {
    let preset: Preset = name.parse()?;
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidArgument(format!("scale must lie in (0, 1], got {scale}")));
    }
    match preset {
        Preset::CavityUniform => cavity_uniform(scale),
        Preset::CavitySubgrid => cavity_subgrid(scale),
        Preset::HeadSar => head_sar(scale),
        Preset::Siw => siw(scale),
    }
}

fn preset_run() -> RunConfig {
    RunConfig { family: SbpFamily::TrapezoidSecondOrder.as_str().to_string(), ..RunConfig::default() }
}

fn cells(len: f64, h: f64) -> usize {
    (len / h).round().max(0.0) as usize
}

fn cavity_common(scale: f64, blocks: Vec<BlockConfig>, interfaces: Vec<InterfaceConfig>) -> ScenarioConfig {
    ScenarioConfig {
        run: RunConfig { t_end: Some(2.2e-6 * scale), safety: Some(0.9), energy_every: 100, ..preset_run() },
        boundary: BoundaryConfig::default(),
        blocks,
        interfaces,
        materials: vec![],
        sources: vec![SourceConfig {
            kind: "gaussian".into(),
            position: [0.5 * scale, 0.5 * scale],
            amplitude: 1.0,
            f_bw: Some(0.9e9 / scale),
            ..Default::default()
        }],
        probes: vec![ProbeConfig { id: "probe".into(), position: [1.5 * scale, 0.5 * scale], field: "ez".into(), every: 1 }],
        spectrum: Some(SpectrumConfig {
            probe: "probe".into(),
            f_min: 1.0e8 / scale,
            f_max: 3.0e8 / scale,
            n_points: 4001,
            window: true,
            threshold: 0.05,
        }),
        sar: None,
    }
}

fn cavity_uniform(scale: f64) -> Result<ScenarioConfig> {
    let h = 0.025;
    let (nx, ny) = (cells(2.0 * scale, h), cells(scale, h));
    if ny < 2 {
        return Err(Error::InvalidArgument(format!("scale {scale} leaves fewer than 2 cells")));
    }
    Ok(cavity_common(scale, vec![BlockConfig::new("cavity", [0.0, 0.0], nx, ny, h)], vec![]))
}

fn cavity_subgrid(scale: f64) -> Result<ScenarioConfig> {
    let hc = 0.05;
    let n = cells(scale, hc);
    if n < 2 {
        return Err(Error::InvalidArgument(format!("scale {scale} leaves fewer than 2 coarse cells")));
    }
    let (blocks, interfaces) = layout(&[0, n, 2 * n], &[0, n], hc, 2, &[(0, 0)], |a, _, fine| {
        if fine {
            "fine".to_string()
        } else if a == 1 {
            "coarse".to_string()
        } else {
            unreachable!()
        }
    });
    Ok(cavity_common(scale, blocks, interfaces))
}

/// Rectangular tiling of coarse-cell cuts; the listed tiles are refined by `ratio`.
/// Neighbouring tiles are coupled, coarse to fine where the cell sizes differ.
fn layout(
    xcuts: &[usize],
    ycuts: &[usize],
    hc: f64,
    ratio: usize,
    fine: &[(usize, usize)],
    name: impl Fn(usize, usize, bool) -> String,
) -> (Vec<BlockConfig>, Vec<InterfaceConfig>) {
    let (na, nb) = (xcuts.len() - 1, ycuts.len() - 1);
    let is_fine = |a: usize, b: usize| fine.contains(&(a, b));
    let mut blocks = Vec::new();
    for b in 0..nb {
        for a in 0..na {
            let (nx, ny) = (xcuts[a + 1] - xcuts[a], ycuts[b + 1] - ycuts[b]);
            let origin = [xcuts[a] as f64 * hc, ycuts[b] as f64 * hc];
            let f = is_fine(a, b);
            let r = if f { ratio } else { 1 };
            blocks.push(BlockConfig::new(&name(a, b, f), origin, nx * r, ny * r, hc / r as f64));
        }
    }
    let id = |a: usize, b: usize| name(a, b, is_fine(a, b));
    let mut interfaces = Vec::new();
    let mut couple = |p: (usize, usize), q: (usize, usize), edge_p: &str, edge_q: &str| {
        let (fp, fq) = (is_fine(p.0, p.1), is_fine(q.0, q.1));
        let (coarse, fine, edge, r) = match (fp, fq) {
            (false, true) => (p, q, edge_p, ratio),
            (true, false) => (q, p, edge_q, ratio),
            _ => (p, q, edge_p, 1),
        };
        interfaces.push(InterfaceConfig {
            coarse: id(coarse.0, coarse.1),
            fine: id(fine.0, fine.1),
            edge_of_coarse: edge.to_string(),
            ratio: r,
            sigma: None,
        });
    };
    for b in 0..nb {
        for a in 0..na {
            if a + 1 < na {
                couple((a, b), (a + 1, b), "E", "W");
            }
            if b + 1 < nb {
                couple((a, b), (a, b + 1), "N", "S");
            }
        }
    }
    (blocks, interfaces)
}

fn tile_name(a: usize, b: usize, fine: bool) -> String {
    format!("{}_{a}_{b}", if fine { "fine" } else { "coarse" })
}

/// Outer radii of the skull, dura, CSF and brain ellipses, outermost first.
pub const HEAD_LAYERS: [(&str, [f64; 2]); 4] =
    [("skull", [0.090, 0.075]), ("dura", [0.083, 0.068]), ("csf", [0.081, 0.066]), ("brain", [0.078, 0.063])];

fn head_sar(scale: f64) -> Result<ScenarioConfig> {
    let hc = 4e-3;
    let (nx, ny) = (cells(4.0 * scale, hc), cells(3.0 * scale, hc));
    let half = 25;
    let ci = cells(3.6 * scale, hc);
    let cj = cells(1.5 * scale, hc);
    if ci < half + 2 || cj < half + 2 || ci + half + 2 > nx || cj + half + 2 > ny {
        return Err(Error::InvalidArgument(format!("scale {scale} is too small to hold the refined head region")));
    }
    let (blocks, interfaces) = layout(&[0, ci - half, ci + half, nx], &[0, cj - half, cj + half, ny], hc, 2, &[(1, 1)], tile_name);
    let center = [ci as f64 * hc, cj as f64 * hc];
    let materials = HEAD_LAYERS
        .iter()
        .map(|(t, r)| MaterialConfig {
            shape: "ellipse".into(),
            center: Some(center),
            radii: Some(*r),
            tissue: Some(t.to_string()),
            ..Default::default()
        })
        .collect();
    let src = [cells(0.6 * scale, hc) as f64 * hc, center[1]];
    Ok(ScenarioConfig {
        run: RunConfig { t_end: Some((center[0] - src[0]) / C0 + 12e-9), safety: Some(0.9), energy_every: 50, ..preset_run() },
        boundary: BoundaryConfig { default: "mur".into(), ..BoundaryConfig::default() },
        blocks,
        interfaces,
        materials,
        sources: vec![SourceConfig { kind: "gaussian".into(), position: src, amplitude: 1.0, f_bw: Some(0.9e9), ..Default::default() }],
        probes: vec![ProbeConfig { id: "probe".into(), position: [center[0] - 0.04, center[1]], field: "ez".into(), every: 1 }],
        spectrum: None,
        sar: Some(SarConfig { norm: "peak".into(), start_step: 0 }),
    })
}

/// Post rows of the waveguide walls, in metres.
pub const SIW_POST_ROWS: [f64; 2] = [0.031, 0.069];
pub const SIW_POST_RADIUS: f64 = 4e-3;
pub const SIW_POST_PITCH: f64 = 12e-3;

fn siw(scale: f64) -> Result<ScenarioConfig> {
    let hc = 1e-3;
    let nx = cells(0.34 * scale, hc);
    let (x1, x2) = (cells(0.04 * scale, hc), cells(0.30 * scale, hc));
    if x1 < 2 || x2 < x1 + cells(2.0 * SIW_POST_PITCH, hc) || nx < x2 + 2 {
        return Err(Error::InvalidArgument(format!("scale {scale} is too small for the post section")));
    }
    let ycuts = [0, 25, 37, 63, 75, 100];
    let (blocks, interfaces) = layout(&[0, x1, x2, nx], &ycuts, hc, 2, &[(1, 1), (1, 3)], tile_name);
    let (xa, xb) = (x1 as f64 * hc, x2 as f64 * hc);
    let mut materials = Vec::new();
    for &y in &SIW_POST_ROWS {
        let mut x = xa + SIW_POST_PITCH / 2.0;
        while x + SIW_POST_RADIUS <= xb + 1e-12 {
            materials.push(MaterialConfig {
                shape: "circle".into(),
                center: Some([x, y]),
                radius: Some(SIW_POST_RADIUS),
                pec: true,
                ..Default::default()
            });
            x += SIW_POST_PITCH;
        }
    }
    let xs = cells(0.17 * scale, hc) as f64 * hc;
    Ok(ScenarioConfig {
        run: RunConfig { t_end: Some(8e-9), safety: Some(0.9), energy_every: 100, ..preset_run() },
        boundary: BoundaryConfig { default: "mur".into(), ..BoundaryConfig::default() },
        blocks,
        interfaces,
        materials,
        sources: vec![SourceConfig {
            kind: "ramped-sine".into(),
            position: [xs, 0.037],
            line_to: Some([xs, 0.063]),
            profile: Some("half-sine".into()),
            amplitude: 1.0,
            f0: Some(7.5e9),
            n_ramp_periods: Some(3),
            ..Default::default()
        }],
        probes: vec![ProbeConfig {
            id: "probe".into(),
            position: [cells(0.25 * scale, hc) as f64 * hc, 0.05],
            field: "ez".into(),
            every: 1,
        }],
        spectrum: None,
        sar: None,
    })
}

/// The same scenario on one block of cell size `h` covering the bounding box of all blocks.
pub fn single_block_variant(cfg: &ScenarioConfig, h: f64) -> Result<ScenarioConfig> {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for b in &cfg.blocks {
        x0 = x0.min(b.origin[0]);
        y0 = y0.min(b.origin[1]);
        x1 = x1.max(b.origin[0] + b.nx as f64 * b.h);
        y1 = y1.max(b.origin[1] + b.ny as f64 * b.h);
    }
    let (nx, ny) = (cells(x1 - x0, h), cells(y1 - y0, h));
    let fits = |n: usize, len: f64| ((n as f64 * h) - len).abs() <= 1e-9 * len.max(h);
    if cfg.blocks.is_empty() || !fits(nx, x1 - x0) || !fits(ny, y1 - y0) {
        return Err(Error::InvalidArgument(format!("cell size {h} does not tile the domain")));
    }
    let base = &cfg.blocks[0];
    let mut block = BlockConfig::new("uniform", [x0, y0], nx, ny, h);
    block.eps_rel = base.eps_rel;
    block.sigma = base.sigma;
    block.density = base.density;
    block.mu_rel = base.mu_rel;
    let mut out = cfg.clone();
    out.blocks = vec![block];
    out.interfaces.clear();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tissue_table() {
        let b = tissue("Brain").unwrap();
        assert_eq!((b.density, b.eps_rel, b.sigma), (1046.0, 4.0, 0.04));
        let s = tissue("skull").unwrap();
        assert_eq!((s.density, s.eps_rel, s.sigma), (1908.0, 2.5, 0.02));
        assert_eq!(tissue("CSF").unwrap().sigma, 2.0);
        assert_eq!(tissue("dura").unwrap().density, 1174.0);
        assert!(TISSUES.iter().all(|t| t.density > 0.0 && t.eps_rel >= 1.0 && t.sigma > 0.0));
    }

    #[test]
    fn sar_values() {
        let mut m = MaterialMap::uniform(3, 4.0, 0.04, 1046.0, 1.0);
        m.sigma_e[2] = 0.0;
        let sar = compute_sar(&[1.0, 2.0, 5.0], &m, FieldNorm::Peak).unwrap();
        assert!((sar[0] - 1.912e-5).abs() < 5e-9);
        assert!((sar[1] - 4.0 * sar[0]).abs() < 1e-18);
        assert_eq!(sar[2], 0.0);
        let rms = compute_sar(&[1.0 / 2f64.sqrt(), 0.0, 0.0], &m, FieldNorm::Rms).unwrap();
        assert!((rms[0] - sar[0]).abs() < 1e-18);
    }

    #[test]
    fn pure_sine_has_one_peak() {
        let (f0, dt) = (5.0e6, 1e-9);
        let n = 40 * 200;
        let x: Vec<f64> = (0..n).map(|k| (2.0 * PI * f0 * k as f64 * dt).sin()).collect();
        let grid = linear_grid(1e6, 9e6, 801).unwrap();
        for window in [false, true] {
            let m = dft_spectrum(&x, dt, &grid, window).unwrap();
            let p = find_peaks(&grid, &m, 0.25);
            assert_eq!(p.len(), 1, "window={window}: {p:?}");
            assert!((p[0].f - f0).abs() < 1e-6 * f0);
        }
    }

    #[test]
    fn dft_matches_direct_sum() {
        let x: Vec<f64> = (0..1000).map(|k| ((k * 7919) % 113) as f64 / 113.0 - 0.5).collect();
        let dt = 1e-3;
        let f = [3.7, 111.1, 499.0];
        let m = dft_spectrum(&x, dt, &f, false).unwrap();
        for (fi, mi) in f.iter().zip(&m) {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, v) in x.iter().enumerate() {
                let a = -2.0 * PI * fi * k as f64 * dt;
                re += v * a.cos();
                im += v * a.sin();
            }
            assert!((dt * re.hypot(im) - mi).abs() < 1e-12 * (1.0 + mi));
        }
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(matches!(dft_spectrum(&[0.0, 1.0], 1.0, &[], false), Err(Error::InvalidArgument(_))));
        assert!(matches!(linear_grid(1.0, 1.0, 10), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn presets_validate() {
        for (p, s) in [
            (Preset::CavityUniform, 1.0),
            (Preset::CavitySubgrid, 1.0),
            (Preset::HeadSar, 0.3),
            (Preset::HeadSar, 1.0),
            (Preset::Siw, 0.5),
            (Preset::Siw, 1.0),
        ] {
            let cfg = build_preset(p.as_str(), s).unwrap();
            assert!(cfg.diagnostics().is_empty(), "{p} at {s}: {:?}", cfg.diagnostics());
        }
        assert!(matches!(build_preset("nope", 1.0), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn cavity_subgrid_layout() {
        let cfg = build_preset("cavity-subgrid", 1.0).unwrap();
        let f = &cfg.blocks[cfg.block_index("fine").unwrap()];
        let c = &cfg.blocks[cfg.block_index("coarse").unwrap()];
        assert_eq!((f.nx, f.ny, f.h, f.origin), (40, 40, 0.025, [0.0, 0.0]));
        assert_eq!((c.nx, c.ny, c.h, c.origin), (20, 20, 0.05, [1.0, 0.0]));
        assert_eq!(cfg.interfaces.len(), 1);
        assert_eq!((cfg.interfaces[0].edge_of_coarse.as_str(), cfg.interfaces[0].ratio), ("W", 2));
    }

    #[test]
    fn head_layers_nest_outward() {
        let cfg = build_preset("head-sar", 0.3).unwrap();
        let names: Vec<_> = cfg.materials.iter().map(|m| m.tissue.clone().unwrap()).collect();
        assert_eq!(names, ["skull", "dura", "csf", "brain"]);
        let sys = cfg.build_system().unwrap();
        assert_eq!(sys.blocks.len(), 9);
        let fine = sys.blocks.iter().find(|b| b.id.starts_with("fine")).unwrap();
        let c = cfg.materials[0].center.unwrap();
        let (ix, iy) = fine.nearest(crate::grid::FieldKind::Ez, (c[0], c[1]));
        let k = fine.ez_index(ix, iy);
        assert_eq!(fine.materials.sigma_e[k], 0.04);
        let (ix, iy) = fine.nearest(crate::grid::FieldKind::Ez, (c[0] + 0.087, c[1]));
        assert_eq!(fine.materials.sigma_e[fine.ez_index(ix, iy)], 0.02);
    }

    #[test]
    fn siw_posts_are_masked() {
        let cfg = build_preset("siw", 0.5).unwrap();
        let sys = cfg.build_system().unwrap();
        assert_eq!(sys.blocks.len(), 15);
        let centers: Vec<[f64; 2]> = cfg.materials.iter().map(|m| m.center.unwrap()).collect();
        for b in &sys.blocks {
            for ix in 0..=b.nx {
                for iy in 0..=b.ny {
                    let p = b.ez_position(ix, iy);
                    let near = centers.iter().any(|c| (p.0 - c[0]).hypot(p.1 - c[1]) < SIW_POST_RADIUS);
                    assert_eq!(b.materials.pec_mask[b.ez_index(ix, iy)], near, "{} {ix} {iy}", b.id);
                }
            }
        }
        assert!(sys.blocks.iter().any(|b| b.materials.pec_mask.iter().any(|&m| m)));
    }

    #[test]
    fn uniform_variant_covers_domain() {
        let cfg = build_preset("cavity-subgrid", 1.0).unwrap();
        let u = single_block_variant(&cfg, 0.025).unwrap();
        assert_eq!((u.blocks[0].nx, u.blocks[0].ny), (80, 40));
        assert!(u.diagnostics().is_empty());
        assert!(single_block_variant(&cfg, 0.03).is_err());
    }
}
