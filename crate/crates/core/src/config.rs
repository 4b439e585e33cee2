//! Scenario configuration: TOML text with `[section]` tables and
//! `[[block]]`-style arrays, validated as a whole before anything is built.

use crate::boundary::{BoundaryKind, PecSatParams};
use crate::error::{Error, Result};
use crate::grid::{Edge, FieldKind, MaterialMap, MeshBlock};
use crate::integrator::Injection;
use crate::interface::{check_geometry, InterfaceCoupling, InterfaceSigmas};
use crate::sbp::SbpFamily;
use crate::scenario::{tissue, FieldNorm};
use crate::source::{gaussian_tau, Waveform};
use crate::system::SimSystem;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub run: RunConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default, rename = "block")]
    pub blocks: Vec<BlockConfig>,
    #[serde(default, rename = "interface")]
    pub interfaces: Vec<InterfaceConfig>,
    #[serde(default, rename = "material")]
    pub materials: Vec<MaterialConfig>,
    #[serde(default, rename = "source")]
    pub sources: Vec<SourceConfig>,
    #[serde(default, rename = "probe")]
    pub probes: Vec<ProbeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sar: Option<SarConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety: Option<f64>,
    /// Energy-log cadence in steps; 0 disables the log.
    #[serde(default)]
    pub energy_every: u64,
    #[serde(default)]
    pub snapshot_steps: Vec<u64>,
    #[serde(default = "default_snapshot_fields")]
    pub snapshot_fields: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

fn default_family() -> String {
    SbpFamily::PaperFirstOrder.as_str().to_string()
}

fn default_snapshot_fields() -> Vec<String> {
    vec!["ez".to_string()]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: default_family(),
            steps: None,
            t_end: None,
            dt: None,
            safety: None,
            energy_every: 0,
            snapshot_steps: vec![],
            snapshot_fields: default_snapshot_fields(),
            out_dir: None,
        }
    }
}

/// Outer-edge defaults and PEC penalty overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default = "default_kind")]
    pub default: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_n: Option<f64>,
}

fn default_kind() -> String {
    "pec".to_string()
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig { default: default_kind(), sigma_w: None, sigma_e: None, sigma_s: None, sigma_n: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub id: String,
    pub origin: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    #[serde(default = "one")]
    pub eps_rel: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "one")]
    pub density: f64,
    #[serde(default = "one")]
    pub mu_rel: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub west: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub east: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub south: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub north: Option<String>,
}

fn one() -> f64 {
    1.0
}

impl BlockConfig {
    pub fn new(id: &str, origin: [f64; 2], nx: usize, ny: usize, h: f64) -> Self {
        BlockConfig {
            id: id.to_string(),
            origin,
            nx,
            ny,
            h,
            eps_rel: 1.0,
            sigma: 0.0,
            density: 1.0,
            mu_rel: 1.0,
            west: None,
            east: None,
            south: None,
            north: None,
        }
    }

    fn edge_kind(&self, edge: Edge) -> Option<&String> {
        match edge {
            Edge::W => self.west.as_ref(),
            Edge::E => self.east.as_ref(),
            Edge::S => self.south.as_ref(),
            Edge::N => self.north.as_ref(),
        }
    }

    fn edge_key(edge: Edge) -> &'static str {
        match edge {
            Edge::W => "west",
            Edge::E => "east",
            Edge::S => "south",
            Edge::N => "north",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceConfig {
    pub coarse: String,
    pub fine: String,
    pub edge_of_coarse: String,
    pub ratio: usize,
    /// `[ez_coarse, ez_fine, h_coarse, h_fine]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<[f64; 4]>,
}

/// Material override applied to every Ez node inside a shape; later entries win.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tissue: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(default)]
    pub pec: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub kind: String,
    pub position: [f64; 2],
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_bw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ramp_periods: Option<u32>,
    /// Switch-off time; the source contributes nothing from then on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_off: Option<f64>,
    /// Other end of a line source running from `position`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_to: Option<[f64; 2]>,
    /// `uniform` or `half-sine` weighting along a line source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_probe_id")]
    pub id: String,
    pub position: [f64; 2],
    #[serde(default = "default_field")]
    pub field: String,
    #[serde(default = "one_u64")]
    pub every: u64,
}

fn default_probe_id() -> String {
    "probe".to_string()
}

fn default_field() -> String {
    "ez".to_string()
}

fn one_u64() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_probe_id")]
    pub probe: String,
    pub f_min: f64,
    pub f_max: f64,
    pub n_points: usize,
    #[serde(default)]
    pub window: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SarConfig {
    /// `peak` or `rms`.
    pub norm: String,
    #[serde(default)]
    pub start_step: u64,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(vec![format!("parse: {}", e.message().trim())]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable as TOML")
    }

    pub fn block_index(&self, id: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == id)
    }

    /// Every violation, each prefixed with its location; empty when valid.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Vec::new();
        self.check_run(&mut d);
        self.check_boundary(&mut d);
        let built = self.check_blocks(&mut d);
        self.check_interfaces(&built, &mut d);
        self.check_contacts(&mut d);
        self.check_materials(&mut d);
        self.check_sources(&mut d);
        self.check_probes(&mut d);
        self.check_outputs(&mut d);
        d
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(d))
        }
    }

    fn check_run(&self, d: &mut Vec<String>) {
        let r = &self.run;
        if r.family.parse::<SbpFamily>().is_err() {
            d.push(format!("run.family: unknown family '{}'", r.family));
        }
        match (r.dt, r.safety) {
            (Some(_), Some(_)) => d.push("run.dt, run.safety: exactly one of run.dt and run.safety may be set".into()),
            (None, None) => d.push("run.dt, run.safety: one of run.dt or run.safety is required".into()),
            (Some(dt), None) if !(dt > 0.0 && dt.is_finite()) => d.push(format!("run.dt: must be positive, got {dt}")),
            (None, Some(s)) if !(s > 0.0 && s <= 1.0) => d.push(format!("run.safety: must lie in (0, 1], got {s}")),
            _ => {}
        }
        match (r.steps, r.t_end) {
            (Some(_), Some(_)) => d.push("run.steps, run.t_end: exactly one of run.steps and run.t_end may be set".into()),
            (None, None) => d.push("run.steps, run.t_end: one of run.steps or run.t_end is required".into()),
            (None, Some(t)) if !(t > 0.0 && t.is_finite()) => d.push(format!("run.t_end: must be positive, got {t}")),
            _ => {}
        }
        for (i, f) in r.snapshot_fields.iter().enumerate() {
            if f.parse::<FieldKind>().is_err() {
                d.push(format!("run.snapshot_fields[{i}]: unknown field '{f}'"));
            }
        }
    }

    fn check_boundary(&self, d: &mut Vec<String>) {
        if self.boundary.default.parse::<BoundaryKind>().is_err() {
            d.push(format!("boundary.default: unknown boundary kind '{}'", self.boundary.default));
        }
        for (key, v) in [
            ("sigma_w", self.boundary.sigma_w),
            ("sigma_e", self.boundary.sigma_e),
            ("sigma_s", self.boundary.sigma_s),
            ("sigma_n", self.boundary.sigma_n),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    d.push(format!("boundary.{key}: must be finite"));
                }
            }
        }
    }

    /// Checks the blocks; returns the ones that could be constructed.
    fn check_blocks(&self, d: &mut Vec<String>) -> Vec<Option<MeshBlock>> {
        if self.blocks.is_empty() {
            d.push("block: at least one block is required".into());
        }
        let family = self.run.family.parse::<SbpFamily>().unwrap_or(SbpFamily::PaperFirstOrder);
        let mut out = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            let loc = format!("block[{i}]");
            let n0 = d.len();
            if b.id.trim().is_empty() {
                d.push(format!("{loc}.id: must not be empty"));
            } else if self.blocks[..i].iter().any(|o| o.id == b.id) {
                d.push(format!("{loc}.id: duplicate block id '{}'", b.id));
            }
            if b.nx < 2 {
                d.push(format!("{loc}.nx: must be at least 2, got {}", b.nx));
            }
            if b.ny < 2 {
                d.push(format!("{loc}.ny: must be at least 2, got {}", b.ny));
            }
            if !(b.h > 0.0 && b.h.is_finite()) {
                d.push(format!("{loc}.h: must be positive, got {}", b.h));
            }
            if !b.origin.iter().all(|v| v.is_finite()) {
                d.push(format!("{loc}.origin: must be finite"));
            }
            if !(b.eps_rel >= 1.0) {
                d.push(format!("{loc}.eps_rel: must be at least 1, got {}", b.eps_rel));
            }
            if !(b.sigma >= 0.0 && b.sigma.is_finite()) {
                d.push(format!("{loc}.sigma: must be non-negative, got {}", b.sigma));
            }
            if !(b.density > 0.0 && b.density.is_finite()) {
                d.push(format!("{loc}.density: must be positive, got {}", b.density));
            }
            if !(b.mu_rel > 0.0 && b.mu_rel.is_finite()) {
                d.push(format!("{loc}.mu_rel: must be positive, got {}", b.mu_rel));
            }
            for e in Edge::ALL {
                if let Some(k) = b.edge_kind(e) {
                    if k.parse::<BoundaryKind>().is_err() {
                        d.push(format!("{loc}.{}: unknown boundary kind '{k}'", BlockConfig::edge_key(e)));
                    }
                }
            }
            out.push(if d.len() == n0 {
                MeshBlock::new(b.id.clone(), (b.origin[0], b.origin[1]), b.nx, b.ny, b.h, family).ok()
            } else {
                None
            });
        }
        out
    }

    fn check_interfaces(&self, built: &[Option<MeshBlock>], d: &mut Vec<String>) {
        let mut used: Vec<(usize, Edge, usize)> = Vec::new();
        for (i, c) in self.interfaces.iter().enumerate() {
            let loc = format!("interface[{i}]");
            let ci = self.block_index(&c.coarse);
            let fi = self.block_index(&c.fine);
            if ci.is_none() {
                d.push(format!("{loc}.coarse: no block with id '{}'", c.coarse));
            }
            if fi.is_none() {
                d.push(format!("{loc}.fine: no block with id '{}'", c.fine));
            }
            if c.coarse == c.fine {
                d.push(format!("{loc}: coarse and fine name the same block '{}'", c.coarse));
            }
            let edge = match c.edge_of_coarse.parse::<Edge>() {
                Ok(e) => Some(e),
                Err(_) => {
                    d.push(format!("{loc}.edge_of_coarse: expected one of N, S, E, W, got '{}'", c.edge_of_coarse));
                    None
                }
            };
            if c.ratio == 0 {
                d.push(format!("{loc}.ratio: must be a positive integer"));
            }
            if let Some(s) = c.sigma {
                if !s.iter().all(|v| v.is_finite()) {
                    d.push(format!("{loc}.sigma: must be finite"));
                }
            }
            let (Some(ci), Some(fi), Some(edge)) = (ci, fi, edge) else { continue };
            if ci == fi || c.ratio == 0 {
                continue;
            }
            for (b, e) in [(ci, edge), (fi, edge.opposite())] {
                if let Some(&(_, _, j)) = used.iter().find(|u| u.0 == b && u.1 == e) {
                    d.push(format!("{loc}: edge {e} of block '{}' is already used by interface[{j}]", self.blocks[b].id));
                }
                used.push((b, e, i));
                if let Some(k) = self.blocks[b].edge_kind(e) {
                    d.push(format!("block[{b}].{}: edge is an interface and cannot also be '{k}'", BlockConfig::edge_key(e)));
                }
            }
            if let (Some(cb), Some(fb)) = (&built[ci], &built[fi]) {
                if let Err(msg) = check_geometry(cb, fb, edge, c.ratio) {
                    d.push(format!("{loc}: {msg}"));
                }
            }
        }
    }

    /// Overlapping blocks and touching edges that are not declared interfaces.
    fn check_contacts(&self, d: &mut Vec<String>) {
        let rect = |b: &BlockConfig| (b.origin[0], b.origin[1], b.origin[0] + b.nx as f64 * b.h, b.origin[1] + b.ny as f64 * b.h);
        for i in 0..self.blocks.len() {
            for j in i + 1..self.blocks.len() {
                let (a, b) = (&self.blocks[i], &self.blocks[j]);
                let (ra, rb) = (rect(a), rect(b));
                let tol = 1e-9 * a.h.min(b.h).max(f64::MIN_POSITIVE);
                let ox = ra.2.min(rb.2) - ra.0.max(rb.0);
                let oy = ra.3.min(rb.3) - ra.1.max(rb.1);
                if ox > tol && oy > tol {
                    d.push(format!("block[{i}], block[{j}]: blocks '{}' and '{}' overlap", a.id, b.id));
                    continue;
                }
                let touching = |ea: Edge| -> bool {
                    match ea {
                        Edge::E => (ra.2 - rb.0).abs() <= tol && oy > tol,
                        Edge::W => (ra.0 - rb.2).abs() <= tol && oy > tol,
                        Edge::N => (ra.3 - rb.1).abs() <= tol && ox > tol,
                        Edge::S => (ra.1 - rb.3).abs() <= tol && ox > tol,
                    }
                };
                for ea in Edge::ALL {
                    if !touching(ea) {
                        continue;
                    }
                    let declared = self.interfaces.iter().any(|c| {
                        let Ok(e) = c.edge_of_coarse.parse::<Edge>() else { return false };
                        (c.coarse == a.id && c.fine == b.id && e == ea) || (c.coarse == b.id && c.fine == a.id && e == ea.opposite())
                    });
                    if !declared {
                        d.push(format!("block[{i}], block[{j}]: edge {ea} of '{}' touches '{}' without a declared interface", a.id, b.id));
                    }
                }
            }
        }
    }

    fn check_materials(&self, d: &mut Vec<String>) {
        for (i, m) in self.materials.iter().enumerate() {
            let loc = format!("material[{i}]");
            match m.shape.as_str() {
                "ellipse" => {
                    if m.center.is_none() {
                        d.push(format!("{loc}.center: required for an ellipse"));
                    }
                    match m.radii {
                        Some(r) if r[0] > 0.0 && r[1] > 0.0 => {}
                        _ => d.push(format!("{loc}.radii: two positive semi-axes are required for an ellipse")),
                    }
                }
                "circle" => {
                    if m.center.is_none() {
                        d.push(format!("{loc}.center: required for a circle"));
                    }
                    match m.radius {
                        Some(r) if r > 0.0 => {}
                        _ => d.push(format!("{loc}.radius: a positive radius is required for a circle")),
                    }
                }
                "rect" => match (m.min, m.max) {
                    (Some(lo), Some(hi)) if lo[0] < hi[0] && lo[1] < hi[1] => {}
                    _ => d.push(format!("{loc}.min, {loc}.max: a rect needs min < max in both coordinates")),
                },
                other => d.push(format!("{loc}.shape: expected ellipse, circle or rect, got '{other}'")),
            }
            if let Some(t) = &m.tissue {
                if tissue(t).is_none() {
                    d.push(format!("{loc}.tissue: unknown tissue '{t}'"));
                }
            }
            if let Some(e) = m.eps_rel {
                if !(e >= 1.0) {
                    d.push(format!("{loc}.eps_rel: must be at least 1, got {e}"));
                }
            }
            if let Some(s) = m.sigma {
                if !(s >= 0.0 && s.is_finite()) {
                    d.push(format!("{loc}.sigma: must be non-negative, got {s}"));
                }
            }
            if let Some(r) = m.density {
                if !(r > 0.0 && r.is_finite()) {
                    d.push(format!("{loc}.density: must be positive, got {r}"));
                }
            }
        }
    }

    fn inside_any(&self, p: [f64; 2]) -> bool {
        self.blocks.iter().any(|b| {
            let tol = 1e-9 * b.h;
            p[0] >= b.origin[0] - tol
                && p[0] <= b.origin[0] + b.nx as f64 * b.h + tol
                && p[1] >= b.origin[1] - tol
                && p[1] <= b.origin[1] + b.ny as f64 * b.h + tol
        })
    }

    fn check_sources(&self, d: &mut Vec<String>) {
        for (i, s) in self.sources.iter().enumerate() {
            let loc = format!("source[{i}]");
            match s.kind.as_str() {
                "gaussian" => {
                    let ok = match (s.f_bw, s.tau) {
                        (_, Some(t)) => t > 0.0,
                        (Some(f), None) => f > 0.0,
                        (None, None) => false,
                    };
                    if !ok {
                        d.push(format!("{loc}.f_bw, {loc}.tau: a gaussian needs f_bw > 0 or tau > 0"));
                    }
                }
                "ramped-sine" => {
                    if !matches!(s.f0, Some(f) if f > 0.0) {
                        d.push(format!("{loc}.f0: a ramped-sine needs f0 > 0"));
                    }
                    if matches!(s.n_ramp_periods, Some(0)) {
                        d.push(format!("{loc}.n_ramp_periods: must be at least 1"));
                    }
                }
                other => d.push(format!("{loc}.kind: expected gaussian or ramped-sine, got '{other}'")),
            }
            if !s.amplitude.is_finite() {
                d.push(format!("{loc}.amplitude: must be finite"));
            }
            if !self.inside_any(s.position) {
                d.push(format!("{loc}.position: {:?} is outside every block", s.position));
            }
            if let Some(q) = s.line_to {
                if !self.inside_any(q) {
                    d.push(format!("{loc}.line_to: {q:?} is outside every block"));
                }
            }
            if let Some(p) = &s.profile {
                if p != "uniform" && p != "half-sine" {
                    d.push(format!("{loc}.profile: expected uniform or half-sine, got '{p}'"));
                }
            }
        }
    }

    fn check_probes(&self, d: &mut Vec<String>) {
        for (i, p) in self.probes.iter().enumerate() {
            let loc = format!("probe[{i}]");
            if self.probes[..i].iter().any(|o| o.id == p.id) {
                d.push(format!("{loc}.id: duplicate probe id '{}'", p.id));
            }
            if p.id.is_empty() || !p.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                d.push(format!("{loc}.id: use letters, digits, '_' or '-', got '{}'", p.id));
            }
            if p.field.parse::<FieldKind>().is_err() {
                d.push(format!("{loc}.field: unknown field '{}'", p.field));
            }
            if p.every == 0 {
                d.push(format!("{loc}.every: must be at least 1"));
            }
            if !self.inside_any(p.position) {
                d.push(format!("{loc}.position: {:?} is outside every block", p.position));
            }
        }
    }

    fn check_outputs(&self, d: &mut Vec<String>) {
        if let Some(s) = &self.spectrum {
            if !self.probes.iter().any(|p| p.id == s.probe) {
                d.push(format!("spectrum.probe: no probe with id '{}'", s.probe));
            }
            if !(s.f_min >= 0.0 && s.f_max > s.f_min) {
                d.push(format!("spectrum.f_min, spectrum.f_max: need 0 ≤ f_min < f_max, got {} and {}", s.f_min, s.f_max));
            }
            if s.n_points < 2 {
                d.push("spectrum.n_points: must be at least 2".into());
            }
            if !(s.threshold >= 0.0 && s.threshold <= 1.0) {
                d.push(format!("spectrum.threshold: must lie in [0, 1], got {}", s.threshold));
            }
        }
        if let Some(s) = &self.sar {
            if s.norm.parse::<FieldNorm>().is_err() {
                d.push(format!("sar.norm: expected peak or rms, got '{}'", s.norm));
            }
        }
    }

    pub fn family(&self) -> Result<SbpFamily> {
        self.run.family.parse()
    }

    pub fn pec_params(&self) -> PecSatParams {
        let mut p = PecSatParams::conserving();
        for (e, v) in [
            (Edge::W, self.boundary.sigma_w),
            (Edge::E, self.boundary.sigma_e),
            (Edge::S, self.boundary.sigma_s),
            (Edge::N, self.boundary.sigma_n),
        ] {
            if let Some(v) = v {
                p.set(e, v);
            }
        }
        p
    }

    /// Block index and block owning a point: the first block in config order containing it.
    pub fn locate(sys: &SimSystem, p: [f64; 2]) -> Option<usize> {
        sys.blocks.iter().position(|b| b.contains((p[0], p[1])))
    }

    /// Validates, then builds the coupled system.
    pub fn build_system(&self) -> Result<SimSystem> {
        self.validate()?;
        let family = self.family()?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let mut mb = MeshBlock::new(b.id.clone(), (b.origin[0], b.origin[1]), b.nx, b.ny, b.h, family)?;
            let mut mat = MaterialMap::uniform(mb.n_ez(), b.eps_rel, b.sigma, b.density, b.mu_rel);
            for ix in 0..=b.nx {
                for iy in 0..=b.ny {
                    let p = mb.ez_position(ix, iy);
                    let k = mb.ez_index(ix, iy);
                    for m in &self.materials {
                        if !shape_contains(m, p) {
                            continue;
                        }
                        if let Some(t) = m.tissue.as_deref().and_then(tissue) {
                            mat.eps_rel[k] = t.eps_rel;
                            mat.sigma_e[k] = t.sigma;
                            mat.density[k] = t.density;
                        }
                        if let Some(v) = m.eps_rel {
                            mat.eps_rel[k] = v;
                        }
                        if let Some(v) = m.sigma {
                            mat.sigma_e[k] = v;
                        }
                        if let Some(v) = m.density {
                            mat.density[k] = v;
                        }
                        if m.pec {
                            mat.pec_mask[k] = true;
                        }
                    }
                }
            }
            mb = mb.with_materials(mat)?;
            blocks.push(mb);
        }
        let default_kind: BoundaryKind = self.boundary.default.parse()?;
        let outer: Vec<[BoundaryKind; 4]> = self
            .blocks
            .iter()
            .map(|b| {
                let mut k = [default_kind; 4];
                for e in Edge::ALL {
                    if let Some(s) = b.edge_kind(e) {
                        k[e.index()] = s.parse().unwrap_or(default_kind);
                    }
                }
                k
            })
            .collect();
        let mut couplings = Vec::with_capacity(self.interfaces.len());
        for c in &self.interfaces {
            let ci = self.block_index(&c.coarse).expect("validated");
            let fi = self.block_index(&c.fine).expect("validated");
            let sigmas = match c.sigma {
                Some([a, b, x, y]) => InterfaceSigmas { ez_coarse: a, ez_fine: b, h_coarse: x, h_fine: y },
                None => InterfaceSigmas::conserving(),
            };
            couplings.push(InterfaceCoupling::new(ci, &blocks[ci], fi, &blocks[fi], c.edge_of_coarse.parse()?, c.ratio, sigmas)?);
        }
        let mut sys = SimSystem::new(blocks, couplings, outer)?;
        sys.pec_params = self.pec_params();
        Ok(sys)
    }

    /// Source injections for a built system.
    pub fn build_injections(&self, sys: &SimSystem) -> Result<Vec<Injection>> {
        let mut out = Vec::new();
        for (i, s) in self.sources.iter().enumerate() {
            let waveform = match s.kind.as_str() {
                "gaussian" => {
                    let tau = match (s.tau, s.f_bw) {
                        (Some(t), _) => t,
                        (None, Some(f)) => gaussian_tau(f),
                        (None, None) => unreachable!("validated"),
                    };
                    Waveform::Gaussian { t0: s.t0.unwrap_or(4.0 * tau), tau }
                }
                _ => Waveform::RampedSine { f0: s.f0.expect("validated"), n_ramp_periods: s.n_ramp_periods.unwrap_or(3) },
            };
            let points: Vec<([f64; 2], f64)> = match s.line_to {
                None => vec![(s.position, 1.0)],
                Some(q) => {
                    let b = Self::locate(sys, s.position).expect("validated");
                    let h = sys.blocks[b].h;
                    let len = ((q[0] - s.position[0]).powi(2) + (q[1] - s.position[1]).powi(2)).sqrt();
                    let n = ((len / h).round() as usize).max(1);
                    let half_sine = s.profile.as_deref() == Some("half-sine");
                    (0..=n)
                        .map(|k| {
                            let u = k as f64 / n as f64;
                            let p = [s.position[0] + u * (q[0] - s.position[0]), s.position[1] + u * (q[1] - s.position[1])];
                            (p, if half_sine { (std::f64::consts::PI * u).sin() } else { 1.0 })
                        })
                        .filter(|&(_, w)| w > 0.0)
                        .collect()
                }
            };
            let mut seen: Vec<(usize, usize)> = Vec::new();
            for (p, w) in points {
                let b = Self::locate(sys, p)
                    .ok_or_else(|| Error::Validation(vec![format!("source[{i}]: point {p:?} is outside every block")]))?;
                let (ix, iy) = sys.blocks[b].nearest(FieldKind::Ez, (p[0], p[1]));
                let key = (b, sys.blocks[b].ez_index(ix, iy));
                if seen.contains(&key) {
                    continue;
                }
                seen.push(key);
                let mut inj = Injection::point(sys, b, ix, iy, s.amplitude * w, waveform);
                inj.t_off = s.t_off;
                out.push(inj);
            }
        }
        Ok(out)
    }
}

/// Whether a material shape covers point `p`.
pub fn shape_contains(m: &MaterialConfig, p: (f64, f64)) -> bool {
    match m.shape.as_str() {
        "ellipse" => match (m.center, m.radii) {
            (Some(c), Some(r)) => ((p.0 - c[0]) / r[0]).powi(2) + ((p.1 - c[1]) / r[1]).powi(2) <= 1.0,
            _ => false,
        },
        "circle" => match (m.center, m.radius) {
            (Some(c), Some(r)) => (p.0 - c[0]).powi(2) + (p.1 - c[1]).powi(2) < r * r,
            _ => false,
        },
        "rect" => match (m.min, m.max) {
            (Some(lo), Some(hi)) => p.0 >= lo[0] && p.0 <= hi[0] && p.1 >= lo[1] && p.1 <= hi[1],
            _ => false,
        },
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BLOCKS: &str = r#"
[run]
steps = 10
safety = 0.9

[[block]]
id = "fine"
origin = [0.0, 0.0]
nx = 8
ny = 8
h = 0.5

[[block]]
id = "coarse"
origin = [4.0, 0.0]
nx = 4
ny = 4
h = 1.0

[[interface]]
coarse = "coarse"
fine = "fine"
edge_of_coarse = "W"
ratio = 2

[[source]]
kind = "gaussian"
position = [1.0, 2.0]
f_bw = 1e8

[[probe]]
position = [6.0, 2.0]
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ScenarioConfig::from_toml(TWO_BLOCKS).unwrap();
        assert!(cfg.diagnostics().is_empty(), "{:?}", cfg.diagnostics());
        let sys = cfg.build_system().unwrap();
        assert_eq!(sys.blocks.len(), 2);
        assert_eq!(sys.interfaces.len(), 1);
        let inj = cfg.build_injections(&sys).unwrap();
        assert_eq!(inj.len(), 1);
        assert_eq!(inj[0].block, 0);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::from_toml(TWO_BLOCKS).unwrap();
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn dt_and_safety_are_exclusive() {
        let mut cfg = ScenarioConfig::from_toml(TWO_BLOCKS).unwrap();
        cfg.run.dt = Some(1e-12);
        let d = cfg.diagnostics();
        assert_eq!(d.len(), 1);
        assert!(d[0].contains("run.dt") && d[0].contains("run.safety"));
    }

    #[test]
    fn all_violations_are_listed() {
        let mut cfg = ScenarioConfig::from_toml(TWO_BLOCKS).unwrap();
        cfg.blocks[0].nx = 1;
        cfg.blocks[1].h = -1.0;
        cfg.probes[0].position = [100.0, 0.0];
        cfg.interfaces[0].edge_of_coarse = "X".into();
        let d = cfg.diagnostics();
        for key in ["block[0].nx", "block[1].h", "probe[0].position", "interface[0].edge_of_coarse"] {
            assert!(d.iter().any(|m| m.starts_with(key)), "missing {key} in {d:?}");
        }
    }

    #[test]
    fn undeclared_contact_is_rejected() {
        let mut cfg = ScenarioConfig::from_toml(TWO_BLOCKS).unwrap();
        cfg.interfaces.clear();
        let d = cfg.diagnostics();
        assert!(d.iter().any(|m| m.contains("without a declared interface")), "{d:?}");
    }

    #[test]
    fn interface_edge_with_explicit_kind_is_rejected() {
        let mut cfg = ScenarioConfig::from_toml(TWO_BLOCKS).unwrap();
        cfg.blocks[1].west = Some("mur".into());
        assert!(cfg.diagnostics().iter().any(|m| m.starts_with("block[1].west")));
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let text = TWO_BLOCKS.replace("steps = 10", "steps = 10\nbogus = 1");
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn shapes() {
        let m = MaterialConfig { shape: "circle".into(), center: Some([0.0, 0.0]), radius: Some(1.0), ..Default::default() };
        assert!(shape_contains(&m, (0.5, 0.5)));
        assert!(!shape_contains(&m, (1.0, 0.0)));
        let e = MaterialConfig { shape: "ellipse".into(), center: Some([0.0, 0.0]), radii: Some([2.0, 1.0]), ..Default::default() };
        assert!(shape_contains(&e, (1.9, 0.0)));
        assert!(!shape_contains(&e, (0.0, 1.1)));
    }
}
