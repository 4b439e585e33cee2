//! Rectangular mesh blocks, staggered field storage and the matrix-free curl
//! operators.
//!
//! Layouts are x-major: `Ez[ix, iy]` at `ix·(ny+1) + iy` on `(x₋, y₋)`,
//! `Hy[ix, iy]` at `ix·(ny+1) + iy` on `(x₊, y₋)`, `Hx[ix, iy]` at `ix·ny + iy`
//! on `(x₋, y₊)`.

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::sbp::{build_sbp_1d, build_staggered_axis, SbpFamily, SbpOperators1D, StaggeredAxis};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

pub const EPS0: f64 = 8.8541878128e-12;
pub const MU0: f64 = 1.25663706212e-6;
pub const C0: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Edge {
    W,
    E,
    S,
    N,
}

impl Edge {
    /// Fixed processing order.
    pub const ALL: [Edge; 4] = [Edge::W, Edge::E, Edge::S, Edge::N];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Sign of this edge's contribution `s·Eᵀ·P_t·H_trace` to the energy rate.
    pub fn sign(self) -> f64 {
        match self {
            Edge::W | Edge::N => -1.0,
            Edge::E | Edge::S => 1.0,
        }
    }

    pub fn opposite(self) -> Edge {
        match self {
            Edge::W => Edge::E,
            Edge::E => Edge::W,
            Edge::S => Edge::N,
            Edge::N => Edge::S,
        }
    }

    /// True for the W and E edges, whose outward normal is along x.
    pub fn is_x_normal(self) -> bool {
        matches!(self, Edge::W | Edge::E)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Edge::W => "W",
            Edge::E => "E",
            Edge::S => "S",
            Edge::N => "N",
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Edge {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "W" | "w" | "west" => Ok(Edge::W),
            "E" | "e" | "east" => Ok(Edge::E),
            "S" | "s" | "south" => Ok(Edge::S),
            "N" | "n" | "north" => Ok(Edge::N),
            other => Err(Error::InvalidArgument(format!("unknown edge '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Ez,
    Hx,
    Hy,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Ez => "ez",
            FieldKind::Hx => "hx",
            FieldKind::Hy => "hy",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ez" | "Ez" => Ok(FieldKind::Ez),
            "hx" | "Hx" => Ok(FieldKind::Hx),
            "hy" | "Hy" => Ok(FieldKind::Hy),
            other => Err(Error::InvalidArgument(format!("unknown field '{other}'"))),
        }
    }
}

/// Nodewise material data on the Ez layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMap {
    pub eps_rel: Vec<f64>,
    pub sigma_e: Vec<f64>,
    pub mu_rel: f64,
    pub density: Vec<f64>,
    pub pec_mask: Vec<bool>,
}

impl MaterialMap {
    pub fn vacuum(n_ez: usize) -> Self {
        MaterialMap {
            eps_rel: vec![1.0; n_ez],
            sigma_e: vec![0.0; n_ez],
            mu_rel: 1.0,
            density: vec![1.0; n_ez],
            pec_mask: vec![false; n_ez],
        }
    }

    pub fn uniform(n_ez: usize, eps_rel: f64, sigma_e: f64, density: f64, mu_rel: f64) -> Self {
        MaterialMap {
            eps_rel: vec![eps_rel; n_ez],
            sigma_e: vec![sigma_e; n_ez],
            mu_rel,
            density: vec![density; n_ez],
            pec_mask: vec![false; n_ez],
        }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.eps_rel.len();
        if self.sigma_e.len() != n || self.density.len() != n || self.pec_mask.len() != n {
            return Err(Error::InvalidArgument("material arrays differ in length".into()));
        }
        if !self.eps_rel.iter().all(|&e| e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidArgument("eps_rel must be positive".into()));
        }
        if !self.sigma_e.iter().all(|&s| s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument("sigma_e must be non-negative".into()));
        }
        if !self.density.iter().all(|&d| d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument("density must be positive".into()));
        }
        if !(self.mu_rel > 0.0 && self.mu_rel.is_finite()) {
            return Err(Error::InvalidArgument("mu_rel must be positive".into()));
        }
        Ok(())
    }

    pub fn permittivity(&self, i: usize) -> f64 {
        EPS0 * self.eps_rel[i]
    }

    pub fn permeability(&self) -> f64 {
        MU0 * self.mu_rel
    }

    pub fn inv_eps(&self) -> Vec<f64> {
        self.eps_rel.iter().map(|&e| 1.0 / (EPS0 * e)).collect()
    }
}

/// One uniform square-cell region.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshBlock {
    pub id: String,
    pub origin: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub axis_x: StaggeredAxis,
    pub axis_y: StaggeredAxis,
    pub ops_x: SbpOperators1D,
    pub ops_y: SbpOperators1D,
    pub materials: MaterialMap,
}

impl MeshBlock {
    pub fn new(id: impl Into<String>, origin: (f64, f64), nx: usize, ny: usize, h: f64, family: SbpFamily) -> Result<Self> {
        let axis_x = build_staggered_axis(nx, h)?;
        let axis_y = build_staggered_axis(ny, h)?;
        let ops_x = build_sbp_1d(&axis_x, family)?;
        let ops_y = build_sbp_1d(&axis_y, family)?;
        Ok(MeshBlock {
            id: id.into(),
            origin,
            nx,
            ny,
            h,
            axis_x,
            axis_y,
            ops_x,
            ops_y,
            materials: MaterialMap::vacuum((nx + 1) * (ny + 1)),
        })
    }

    pub fn with_materials(mut self, materials: MaterialMap) -> Result<Self> {
        if materials.eps_rel.len() != self.n_ez() {
            return Err(Error::InvalidArgument(format!(
                "material map has {} nodes, block '{}' has {}",
                materials.eps_rel.len(),
                self.id,
                self.n_ez()
            )));
        }
        materials.check()?;
        self.materials = materials;
        Ok(self)
    }

    pub fn family(&self) -> SbpFamily {
        self.ops_x.family
    }

    pub fn n_ez(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_hy(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_hx(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_state(&self) -> usize {
        self.n_ez() + self.n_hy() + self.n_hx()
    }

    pub fn ez_index(&self, ix: usize, iy: usize) -> usize {
        ix * (self.ny + 1) + iy
    }

    pub fn hy_index(&self, ix: usize, iy: usize) -> usize {
        ix * (self.ny + 1) + iy
    }

    pub fn hx_index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.h, self.ny as f64 * self.h)
    }

    /// Physical position of an Ez node.
    pub fn ez_position(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.origin.0 + self.axis_x.x_minus[ix], self.origin.1 + self.axis_y.x_minus[iy])
    }

    pub fn node_position(&self, kind: FieldKind, ix: usize, iy: usize) -> (f64, f64) {
        let (x, y) = match kind {
            FieldKind::Ez => (self.axis_x.x_minus[ix], self.axis_y.x_minus[iy]),
            FieldKind::Hy => (self.axis_x.x_plus[ix], self.axis_y.x_minus[iy]),
            FieldKind::Hx => (self.axis_x.x_minus[ix], self.axis_y.x_plus[iy]),
        };
        (self.origin.0 + x, self.origin.1 + y)
    }

    /// Closed-rectangle containment with a small relative tolerance.
    pub fn contains(&self, p: (f64, f64)) -> bool {
        let tol = 1e-9 * self.h;
        let (w, hgt) = self.extent();
        p.0 >= self.origin.0 - tol && p.0 <= self.origin.0 + w + tol && p.1 >= self.origin.1 - tol && p.1 <= self.origin.1 + hgt + tol
    }

    /// Grid index of the sample of `kind` nearest to `p`.
    pub fn nearest(&self, kind: FieldKind, p: (f64, f64)) -> (usize, usize) {
        let fx = (p.0 - self.origin.0) / self.h;
        let fy = (p.1 - self.origin.1) / self.h;
        let snap = |f: f64, shift: f64, n: usize| -> usize {
            let v = (f - shift).round();
            if v <= 0.0 {
                0
            } else {
                (v as usize).min(n)
            }
        };
        match kind {
            FieldKind::Ez => (snap(fx, 0.0, self.nx), snap(fy, 0.0, self.ny)),
            FieldKind::Hy => (snap(fx, 0.5, self.nx - 1), snap(fy, 0.0, self.ny)),
            FieldKind::Hx => (snap(fx, 0.0, self.nx), snap(fy, 0.5, self.ny - 1)),
        }
    }

    /// Number of tangential nodes along an edge.
    pub fn edge_len(&self, edge: Edge) -> usize {
        if edge.is_x_normal() {
            self.ny + 1
        } else {
            self.nx + 1
        }
    }

    /// Ez index of tangential node `t` on `edge`.
    pub fn edge_ez_index(&self, edge: Edge, t: usize) -> usize {
        match edge {
            Edge::W => self.ez_index(0, t),
            Edge::E => self.ez_index(self.nx, t),
            Edge::S => self.ez_index(t, 0),
            Edge::N => self.ez_index(t, self.ny),
        }
    }

    /// Normal-direction operators of an edge.
    pub fn normal_ops(&self, edge: Edge) -> &SbpOperators1D {
        if edge.is_x_normal() {
            &self.ops_x
        } else {
            &self.ops_y
        }
    }

    pub fn tangential_ops(&self, edge: Edge) -> &SbpOperators1D {
        if edge.is_x_normal() {
            &self.ops_y
        } else {
            &self.ops_x
        }
    }

    /// `P⁻¹·p` weights and the two H indices they act on for tangential node `t`.
    pub fn edge_h_lift(&self, edge: Edge, t: usize) -> [(usize, f64); 2] {
        match edge {
            Edge::W => {
                let l = self.ops_x.left_lift();
                [(self.hy_index(0, t), l[0]), (self.hy_index(1, t), l[1])]
            }
            Edge::E => {
                let l = self.ops_x.right_lift();
                [(self.hy_index(self.nx - 1, t), l[0]), (self.hy_index(self.nx - 2, t), l[1])]
            }
            Edge::S => {
                let l = self.ops_y.left_lift();
                [(self.hx_index(t, 0), l[0]), (self.hx_index(t, 1), l[1])]
            }
            Edge::N => {
                let l = self.ops_y.right_lift();
                [(self.hx_index(t, self.ny - 1), l[0]), (self.hx_index(t, self.ny - 2), l[1])]
            }
        }
    }

    /// Projection weights `p` and the two H indices they read for tangential node `t`.
    pub fn edge_h_projection(&self, edge: Edge, t: usize) -> [(usize, f64); 2] {
        let (ops, first, second) = match edge {
            Edge::W => (&self.ops_x, self.hy_index(0, t), self.hy_index(1, t)),
            Edge::E => (&self.ops_x, self.hy_index(self.nx - 1, t), self.hy_index(self.nx - 2, t)),
            Edge::S => (&self.ops_y, self.hx_index(t, 0), self.hx_index(t, 1)),
            Edge::N => (&self.ops_y, self.hx_index(t, self.ny - 1), self.hx_index(t, self.ny - 2)),
        };
        let n = ops.n_cells;
        let (w0, w1) = match edge {
            Edge::W | Edge::S => (ops.p_left[0], ops.p_left[1]),
            Edge::E | Edge::N => (ops.p_right[n - 1], ops.p_right[n - 2]),
        };
        [(first, w0), (second, w1)]
    }

    /// Normal-direction boundary norm weight `P₋` at the edge line.
    pub fn edge_normal_weight(&self, edge: Edge) -> f64 {
        let ops = self.normal_ops(edge);
        match edge {
            Edge::W | Edge::S => ops.p_minus[0],
            Edge::E | Edge::N => ops.p_minus[ops.n_cells],
        }
    }
}

/// Ez, Hy, Hx arrays of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub ez: Vec<f64>,
    pub hy: Vec<f64>,
    pub hx: Vec<f64>,
}

impl FieldState {
    pub fn zeros(block: &MeshBlock) -> Self {
        FieldState { ez: vec![0.0; block.n_ez()], hy: vec![0.0; block.n_hy()], hx: vec![0.0; block.n_hx()] }
    }

    pub fn check(&self, block: &MeshBlock) -> Result<()> {
        if self.ez.len() != block.n_ez() || self.hy.len() != block.n_hy() || self.hx.len() != block.n_hx() {
            return Err(Error::InvalidArgument(format!("field layout does not match block '{}'", block.id)));
        }
        Ok(())
    }

    pub fn field(&self, kind: FieldKind) -> &[f64] {
        match kind {
            FieldKind::Ez => &self.ez,
            FieldKind::Hx => &self.hx,
            FieldKind::Hy => &self.hy,
        }
    }

    pub fn len(&self) -> usize {
        self.ez.len() + self.hy.len() + self.hx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenated `[ez, hy, hx]`.
    pub fn write_flat(&self, out: &mut [f64]) {
        let (a, rest) = out.split_at_mut(self.ez.len());
        let (b, c) = rest.split_at_mut(self.hy.len());
        a.copy_from_slice(&self.ez);
        b.copy_from_slice(&self.hy);
        c.copy_from_slice(&self.hx);
    }

    pub fn read_flat(&mut self, input: &[f64]) {
        let (a, rest) = input.split_at(self.ez.len());
        let (b, c) = rest.split_at(self.hy.len());
        self.ez.copy_from_slice(a);
        self.hy.copy_from_slice(b);
        self.hx.copy_from_slice(c);
    }

    pub fn all_finite(&self) -> bool {
        self.ez.iter().chain(&self.hy).chain(&self.hx).all(|v| v.is_finite())
    }
}

/// `out = D_{x−}·hy − D_{y−}·hx` without material scaling.
pub fn curl_h_raw(block: &MeshBlock, hx: &[f64], hy: &[f64], out: &mut [f64]) {
    let ny1 = block.ny + 1;
    let ny = block.ny;
    for (ix, row) in block.ops_x.d_minus_stencil.rows.iter().enumerate() {
        let a = &hy[row.start * ny1..(row.start + 1) * ny1];
        let b = &hy[(row.start + 1) * ny1..(row.start + 2) * ny1];
        let o = &mut out[ix * ny1..(ix + 1) * ny1];
        for iy in 0..ny1 {
            o[iy] = row.coeffs[0] * a[iy] + row.coeffs[1] * b[iy];
        }
        let line = &hx[ix * ny..(ix + 1) * ny];
        for (iy, r) in block.ops_y.d_minus_stencil.rows.iter().enumerate() {
            o[iy] -= r.coeffs[0] * line[r.start] + r.coeffs[1] * line[r.start + 1];
        }
    }
}

/// `hy_out = D_{x+}·ez`, `hx_out = −D_{y+}·ez` without material scaling.
pub fn curl_e_raw(block: &MeshBlock, ez: &[f64], hx_out: &mut [f64], hy_out: &mut [f64]) {
    let ny1 = block.ny + 1;
    let ny = block.ny;
    for (ix, row) in block.ops_x.d_plus_stencil.rows.iter().enumerate() {
        let a = &ez[row.start * ny1..(row.start + 1) * ny1];
        let b = &ez[(row.start + 1) * ny1..(row.start + 2) * ny1];
        let o = &mut hy_out[ix * ny1..(ix + 1) * ny1];
        for iy in 0..ny1 {
            o[iy] = row.coeffs[0] * a[iy] + row.coeffs[1] * b[iy];
        }
    }
    for ix in 0..=block.nx {
        let line = &ez[ix * ny1..(ix + 1) * ny1];
        let o = &mut hx_out[ix * ny..(ix + 1) * ny];
        for (iy, r) in block.ops_y.d_plus_stencil.rows.iter().enumerate() {
            o[iy] = -(r.coeffs[0] * line[r.start] + r.coeffs[1] * line[r.start + 1]);
        }
    }
}

/// Ez rate from the H curl, `(1/ε)·[(D_{x−}⊗I)·hy − (I⊗D_{y−})·hx]`.
pub fn curl_h_to_ez(block: &MeshBlock, hx: &[f64], hy: &[f64]) -> Result<Vec<f64>> {
    if hx.len() != block.n_hx() || hy.len() != block.n_hy() {
        return Err(Error::InvalidArgument(format!("H layout does not match block '{}'", block.id)));
    }
    let mut out = vec![0.0; block.n_ez()];
    curl_h_raw(block, hx, hy, &mut out);
    for (o, &e) in out.iter_mut().zip(&block.materials.eps_rel) {
        *o /= EPS0 * e;
    }
    Ok(out)
}

/// `(hx_rate, hy_rate)` from the Ez curl.
pub fn curl_ez_to_h(block: &MeshBlock, ez: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if ez.len() != block.n_ez() {
        return Err(Error::InvalidArgument(format!("Ez layout does not match block '{}'", block.id)));
    }
    let mut hx = vec![0.0; block.n_hx()];
    let mut hy = vec![0.0; block.n_hy()];
    curl_e_raw(block, ez, &mut hx, &mut hy);
    let inv_mu = 1.0 / block.materials.permeability();
    hx.iter_mut().chain(hy.iter_mut()).for_each(|v| *v *= inv_mu);
    Ok((hx, hy))
}

/// Field values along an edge: Ez by selection, the normal H component by
/// boundary projection.
pub fn boundary_trace(block: &MeshBlock, state: &FieldState, kind: FieldKind, edge: Edge) -> Result<Vec<f64>> {
    state.check(block)?;
    let n = block.edge_len(edge);
    match (kind, edge.is_x_normal()) {
        (FieldKind::Ez, _) => Ok((0..n).map(|t| state.ez[block.edge_ez_index(edge, t)]).collect()),
        (FieldKind::Hy, true) => Ok(project_h_trace(block, &state.hy, edge)),
        (FieldKind::Hx, false) => Ok(project_h_trace(block, &state.hx, edge)),
        _ => Err(Error::UnsupportedPairing(format!("{kind} has no projected trace on the {edge} edge"))),
    }
}

/// Projected normal-H trace of `edge`; `h` is Hy for W/E, Hx for S/N.
pub fn project_h_trace(block: &MeshBlock, h: &[f64], edge: Edge) -> Vec<f64> {
    (0..block.edge_len(edge))
        .map(|t| {
            let [(i0, w0), (i1, w1)] = block.edge_h_projection(edge, t);
            w0 * h[i0] + w1 * h[i1]
        })
        .collect()
}

/// Snapshot in the text format `nx ny h origin_x origin_y field` followed by
/// one value per line in layout order.
pub fn write_snapshot<W: Write>(mut w: W, block: &MeshBlock, field: &str, values: &[f64]) -> std::io::Result<()> {
    writeln!(w, "{} {} {} {} {} {}", block.nx, block.ny, fmt_f64(block.h), fmt_f64(block.origin.0), fmt_f64(block.origin.1), field)?;
    for v in values {
        writeln!(w, "{}", fmt_f64(*v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(nx: usize, ny: usize, h: f64) -> MeshBlock {
        MeshBlock::new("b", (0.0, 0.0), nx, ny, h, SbpFamily::PaperFirstOrder).unwrap()
    }

    #[test]
    fn layout_sizes() {
        let b = block(2, 2, 1.0);
        assert_eq!(b.n_ez() + b.n_hy() + b.n_hx(), 21);
        let b = block(5, 3, 1.0);
        assert_eq!((b.n_ez(), b.n_hy(), b.n_hx()), (24, 20, 18));
    }

    #[test]
    fn constant_h_has_zero_curl() {
        let b = block(5, 4, 0.3);
        let r = curl_h_to_ez(&b, &vec![2.5; b.n_hx()], &vec![-1.5; b.n_hy()]).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        let (hx, hy) = curl_ez_to_h(&b, &vec![3.0; b.n_ez()]).unwrap();
        assert!(hx.iter().chain(&hy).all(|&v| v == 0.0));
    }

    #[test]
    fn linear_hy_gives_uniform_rate() {
        let b = block(6, 4, 1.0);
        let mut hy = vec![0.0; b.n_hy()];
        for ix in 0..b.nx {
            for iy in 0..=b.ny {
                hy[b.hy_index(ix, iy)] = b.axis_x.x_plus[ix];
            }
        }
        let r = curl_h_to_ez(&b, &vec![0.0; b.n_hx()], &hy).unwrap();
        for v in r {
            assert!((v * EPS0 - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hy_spike_pattern() {
        let b = block(6, 4, 1.0);
        let (i, j) = (2, 1);
        let mut hy = vec![0.0; b.n_hy()];
        hy[b.hy_index(i, j)] = 1.0;
        let r = curl_h_to_ez(&b, &vec![0.0; b.n_hx()], &hy).unwrap();
        let nz: Vec<usize> = (0..r.len()).filter(|&k| r[k] != 0.0).collect();
        assert_eq!(nz, vec![b.ez_index(i, j), b.ez_index(i + 1, j)]);
        assert_eq!(r[b.ez_index(i, j)], 1.0 / EPS0);
        assert_eq!(r[b.ez_index(i + 1, j)], -1.0 / EPS0);
    }

    #[test]
    fn linear_ez_gives_uniform_h_rates() {
        let b = block(4, 5, 0.5);
        let mut ex = vec![0.0; b.n_ez()];
        let mut ey = vec![0.0; b.n_ez()];
        for ix in 0..=b.nx {
            for iy in 0..=b.ny {
                ex[b.ez_index(ix, iy)] = b.axis_x.x_minus[ix];
                ey[b.ez_index(ix, iy)] = b.axis_y.x_minus[iy];
            }
        }
        let (hx, hy) = curl_ez_to_h(&b, &ex).unwrap();
        assert!(hx.iter().all(|&v| v == 0.0));
        assert!(hy.iter().all(|&v| (v * MU0 - 1.0).abs() < 1e-14));
        let (hx, hy) = curl_ez_to_h(&b, &ey).unwrap();
        assert!(hy.iter().all(|&v| v == 0.0));
        assert!(hx.iter().all(|&v| (v * MU0 + 1.0).abs() < 1e-14));
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let b = block(3, 3, 1.0);
        assert!(curl_h_to_ez(&b, &[0.0; 3], &vec![0.0; b.n_hy()]).is_err());
        assert!(curl_ez_to_h(&b, &[0.0; 5]).is_err());
    }

    #[test]
    fn traces() {
        let b = block(4, 3, 1.0);
        let mut s = FieldState::zeros(&b);
        for ix in 0..=b.nx {
            for iy in 0..=b.ny {
                s.ez[b.ez_index(ix, iy)] = (10 * ix + iy) as f64;
            }
        }
        let south = boundary_trace(&b, &s, FieldKind::Ez, Edge::S).unwrap();
        assert_eq!(south, vec![0.0, 10.0, 20.0, 30.0, 40.0]);

        s.hx.iter_mut().for_each(|v| *v = 7.0);
        assert_eq!(boundary_trace(&b, &s, FieldKind::Hx, Edge::S).unwrap(), vec![7.0; 5]);

        for ix in 0..=b.nx {
            for iy in 0..b.ny {
                s.hx[b.hx_index(ix, iy)] = b.axis_y.x_plus[iy];
            }
        }
        assert_eq!(boundary_trace(&b, &s, FieldKind::Hx, Edge::S).unwrap(), vec![-0.5; 5]);

        assert!(matches!(boundary_trace(&b, &s, FieldKind::Hx, Edge::E), Err(Error::UnsupportedPairing(_))));
        assert!(matches!(boundary_trace(&b, &s, FieldKind::Hy, Edge::N), Err(Error::UnsupportedPairing(_))));
    }

    #[test]
    fn nearest_node_lookup() {
        let b = MeshBlock::new("b", (1.0, 2.0), 10, 10, 0.1, SbpFamily::PaperFirstOrder).unwrap();
        assert_eq!(b.nearest(FieldKind::Ez, (1.52, 2.29)), (5, 3));
        assert_eq!(b.nearest(FieldKind::Ez, (0.0, 9.0)), (0, 10));
        assert_eq!(b.nearest(FieldKind::Hy, (1.56, 2.0)), (5, 0));
        assert!(b.contains((2.0, 3.0)));
        assert!(!b.contains((2.01, 3.0)));
    }

    #[test]
    fn snapshot_format() {
        let b = block(2, 2, 0.5);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &b, "ez", &[1.0, 0.25, 0.0, -3.0, 1e-30]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2 2 0.5 0 0 ez\n1\n0.25\n0\n-3\n1e-30\n");
    }
}
