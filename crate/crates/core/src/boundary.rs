//! Outer-edge conditions: PEC and PMC penalties, first-order Mur edges.
//!
//! A PEC penalty acts on the H lines next to the edge and is driven by the Ez
//! trace; a PMC penalty acts on the edge Ez line and is driven by the projected
//! H trace. With `σ = −s` (the negated energy sign of the edge) either penalty
//! cancels the edge's boundary term in the energy rate exactly.

use crate::error::{Error, Result};
use crate::grid::{Edge, FieldState, MeshBlock, C0};
use std::fmt;
use std::str::FromStr;

/// Penalty strengths per outer edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PecSatParams {
    pub sigma_w: f64,
    pub sigma_e: f64,
    pub sigma_s: f64,
    pub sigma_n: f64,
}

impl PecSatParams {
    /// Energy-conserving strengths `σ = −s`: (+1, −1, −1, +1).
    pub const fn conserving() -> Self {
        PecSatParams { sigma_w: 1.0, sigma_e: -1.0, sigma_s: -1.0, sigma_n: 1.0 }
    }

    pub fn get(&self, edge: Edge) -> f64 {
        match edge {
            Edge::W => self.sigma_w,
            Edge::E => self.sigma_e,
            Edge::S => self.sigma_s,
            Edge::N => self.sigma_n,
        }
    }

    pub fn set(&mut self, edge: Edge, v: f64) {
        match edge {
            Edge::W => self.sigma_w = v,
            Edge::E => self.sigma_e = v,
            Edge::S => self.sigma_s = v,
            Edge::N => self.sigma_n = v,
        }
    }
}

impl Default for PecSatParams {
    fn default() -> Self {
        Self::conserving()
    }
}

/// Condition on an outer edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Pec,
    Pmc,
    Mur,
}

impl BoundaryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryKind::Pec => "pec",
            BoundaryKind::Pmc => "pmc",
            BoundaryKind::Mur => "mur",
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pec" => Ok(BoundaryKind::Pec),
            "pmc" => Ok(BoundaryKind::Pmc),
            "mur" => Ok(BoundaryKind::Mur),
            other => Err(Error::InvalidArgument(format!("unknown boundary kind '{other}'"))),
        }
    }
}

/// Adds the raw PEC penalty `σ·P⁻¹p·Ez_edge` of one edge to the H rates
/// (multiply by `1/μ` afterwards).
pub fn pec_sat_h_raw(block: &MeshBlock, ez: &[f64], sigma: f64, edge: Edge, hx_rate: &mut [f64], hy_rate: &mut [f64]) {
    let target = if edge.is_x_normal() { hy_rate } else { hx_rate };
    for t in 0..block.edge_len(edge) {
        let v = sigma * ez[block.edge_ez_index(edge, t)];
        for (i, w) in block.edge_h_lift(edge, t) {
            target[i] += w * v;
        }
    }
}

/// PEC penalty increments `(ΔHx-rate, ΔHy-rate)` for the selected edges.
pub fn pec_sat_h(block: &MeshBlock, ez: &[f64], params: &PecSatParams, edges: &[Edge]) -> Result<(Vec<f64>, Vec<f64>)> {
    if ez.len() != block.n_ez() {
        return Err(Error::InvalidArgument(format!("Ez layout does not match block '{}'", block.id)));
    }
    let mut hx = vec![0.0; block.n_hx()];
    let mut hy = vec![0.0; block.n_hy()];
    for &edge in Edge::ALL.iter().filter(|e| edges.contains(e)) {
        pec_sat_h_raw(block, ez, params.get(edge), edge, &mut hx, &mut hy);
    }
    let inv_mu = 1.0 / block.materials.permeability();
    hx.iter_mut().chain(hy.iter_mut()).for_each(|v| *v *= inv_mu);
    Ok((hx, hy))
}

/// Adds the raw PMC penalty `σ/P_n·(pᵀH)` to the edge Ez line (multiply by
/// `1/ε` afterwards).
pub fn pmc_sat_ez_raw(block: &MeshBlock, hx: &[f64], hy: &[f64], sigma: f64, edge: Edge, ez_rate: &mut [f64]) {
    let h = if edge.is_x_normal() { hy } else { hx };
    let scale = sigma / block.edge_normal_weight(edge);
    for t in 0..block.edge_len(edge) {
        let [(i0, w0), (i1, w1)] = block.edge_h_projection(edge, t);
        ez_rate[block.edge_ez_index(edge, t)] += scale * (w0 * h[i0] + w1 * h[i1]);
    }
}

/// PMC penalty increment on the Ez rate for the selected edges.
pub fn pmc_sat_ez(block: &MeshBlock, state: &FieldState, params: &PecSatParams, edges: &[Edge]) -> Result<Vec<f64>> {
    state.check(block)?;
    let mut out = vec![0.0; block.n_ez()];
    for &edge in Edge::ALL.iter().filter(|e| edges.contains(e)) {
        pmc_sat_ez_raw(block, &state.hx, &state.hy, params.get(edge), edge, &mut out);
    }
    for (o, e) in out.iter_mut().zip(&block.materials.eps_rel) {
        *o /= crate::grid::EPS0 * e;
    }
    Ok(out)
}

/// `(cΔt − h)/(cΔt + h)` for the local wave speed.
pub fn mur_coefficient(c: f64, dt: f64, h: f64) -> f64 {
    (c * dt - h) / (c * dt + h)
}

/// Tangential index range a Mur edge updates; corners go to a Mur x-normal edge.
pub fn mur_range(block: &MeshBlock, edge: Edge, x_normal_is_mur: [bool; 2]) -> std::ops::Range<usize> {
    let n = block.edge_len(edge);
    if edge.is_x_normal() {
        0..n
    } else {
        let lo = usize::from(x_normal_is_mur[0]);
        let hi = n - usize::from(x_normal_is_mur[1]);
        lo..hi
    }
}

/// Ez index one line inside the edge.
pub fn adjacent_ez_index(block: &MeshBlock, edge: Edge, t: usize) -> usize {
    match edge {
        Edge::W => block.ez_index(1, t),
        Edge::E => block.ez_index(block.nx - 1, t),
        Edge::S => block.ez_index(t, 1),
        Edge::N => block.ez_index(t, block.ny - 1),
    }
}

/// Local wave speed at an Ez node.
pub fn wave_speed(block: &MeshBlock, i: usize) -> f64 {
    C0 / (block.materials.eps_rel[i] * block.materials.mu_rel).sqrt()
}

/// New edge Ez values after a first-order Mur update,
/// `E₀ⁿ⁺¹ = E₁ⁿ + k·(E₁ⁿ⁺¹ − E₀ⁿ)`, for every tangential node of the edge.
/// `outer` says which edges (W, E, S, N) are outer edges; an interface edge is
/// rejected.
pub fn mur_first_order(block: &MeshBlock, edge: Edge, outer: [bool; 4], ez_prev: &[f64], ez_curr: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !outer[edge.index()] {
        return Err(Error::InvalidArgument(format!("Mur update requested on interface edge {edge} of block '{}'", block.id)));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if ez_prev.len() != block.n_ez() || ez_curr.len() != block.n_ez() {
        return Err(Error::InvalidArgument(format!("Ez layout does not match block '{}'", block.id)));
    }
    Ok((0..block.edge_len(edge))
        .map(|t| {
            let i0 = block.edge_ez_index(edge, t);
            let i1 = adjacent_ez_index(block, edge, t);
            let k = mur_coefficient(wave_speed(block, i0), dt, block.h);
            ez_prev[i1] + k * (ez_curr[i1] - ez_prev[i0])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MU0;
    use crate::sbp::SbpFamily;

    fn block(nx: usize, ny: usize) -> MeshBlock {
        MeshBlock::new("b", (0.0, 0.0), nx, ny, 1.0, SbpFamily::PaperFirstOrder).unwrap()
    }

    #[test]
    fn zero_trace_gives_zero_increment() {
        let b = block(5, 4);
        let mut ez = vec![0.0; b.n_ez()];
        for ix in 1..b.nx {
            for iy in 1..b.ny {
                ez[b.ez_index(ix, iy)] = (ix * iy) as f64;
            }
        }
        let (hx, hy) = pec_sat_h(&b, &ez, &PecSatParams::conserving(), &Edge::ALL).unwrap();
        assert!(hx.iter().chain(&hy).all(|&v| v == 0.0));
    }

    #[test]
    fn west_edge_penalty_pattern() {
        let b = block(6, 4);
        let mut ez = vec![0.0; b.n_ez()];
        for iy in 0..=b.ny {
            ez[b.ez_index(0, iy)] = 1.0;
        }
        let params = PecSatParams { sigma_w: -1.0, ..PecSatParams::conserving() };
        let (hx, hy) = pec_sat_h(&b, &ez, &params, &[Edge::W]).unwrap();
        assert!(hx.iter().all(|&v| v == 0.0));
        for ix in 0..b.nx {
            for iy in 0..=b.ny {
                let v = hy[b.hy_index(ix, iy)];
                let expect = match ix {
                    0 => -2.0 / MU0,
                    1 => 1.0 / MU0,
                    _ => 0.0,
                };
                assert_eq!(v, expect, "ix={ix} iy={iy}");
            }
        }
    }

    #[test]
    fn unselected_edges_are_untouched() {
        let b = block(4, 4);
        let ez = vec![1.0; b.n_ez()];
        let (hx, hy) = pec_sat_h(&b, &ez, &PecSatParams::conserving(), &[]).unwrap();
        assert!(hx.iter().chain(&hy).all(|&v| v == 0.0));
    }

    #[test]
    fn mur_keeps_uniform_field() {
        let b = block(5, 5);
        let ez = vec![0.7; b.n_ez()];
        for edge in Edge::ALL {
            let out = mur_first_order(&b, edge, [true; 4], &ez, &ez, 1e-9).unwrap();
            for v in out {
                assert!((v - 0.7).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mur_rejects_interface_edge() {
        let b = block(5, 5);
        let ez = vec![0.0; b.n_ez()];
        let outer = [true, false, true, true];
        assert!(matches!(mur_first_order(&b, Edge::E, outer, &ez, &ez, 1e-9), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn corner_ownership() {
        let b = block(5, 3);
        assert_eq!(mur_range(&b, Edge::S, [true, true]), 1..5);
        assert_eq!(mur_range(&b, Edge::N, [false, true]), 0..5);
        assert_eq!(mur_range(&b, Edge::W, [true, true]), 0..4);
    }
}
