//! Multi-block semi-discrete system: edge roles, right-hand side evaluation,
//! energy and column-probed assembly.

use crate::boundary::{pec_sat_h_raw, pmc_sat_ez_raw, BoundaryKind, PecSatParams};
use crate::error::{Error, Result};
use crate::grid::{curl_e_raw, curl_h_raw, Edge, FieldState, MeshBlock, C0, EPS0};
use crate::interface::{add_ez_penalty, add_h_penalty, InterfaceCoupling, Side};
use nalgebra::DMatrix;
use rayon::prelude::*;

pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// What closes one block edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeRole {
    Outer(BoundaryKind),
    Interface { coupling: usize, side: Side },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSystem {
    pub blocks: Vec<MeshBlock>,
    pub interfaces: Vec<InterfaceCoupling>,
    pub pec_params: PecSatParams,
    pub pmc_params: PecSatParams,
    pub roles: Vec<[EdgeRole; 4]>,
    offsets: Vec<usize>,
}

impl SimSystem {
    /// `outer[b][e]` gives the kind used when edge `e` of block `b` is not on an interface.
    pub fn new(blocks: Vec<MeshBlock>, interfaces: Vec<InterfaceCoupling>, outer: Vec<[BoundaryKind; 4]>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("system has no blocks".into()));
        }
        if outer.len() != blocks.len() {
            return Err(Error::InvalidArgument("one outer-edge assignment per block is required".into()));
        }
        let mut roles: Vec<[EdgeRole; 4]> =
            outer.iter().map(|k| [EdgeRole::Outer(k[0]), EdgeRole::Outer(k[1]), EdgeRole::Outer(k[2]), EdgeRole::Outer(k[3])]).collect();
        let mut taken = vec![[false; 4]; blocks.len()];
        for (ci, c) in interfaces.iter().enumerate() {
            for side in [Side::Coarse, Side::Fine] {
                let b = c.block(side);
                let e = c.edge(side).index();
                if b >= blocks.len() {
                    return Err(Error::InvalidArgument(format!("interface {ci} references missing block {b}")));
                }
                if taken[b][e] {
                    return Err(Error::InvalidArgument(format!(
                        "edge {} of block '{}' is on more than one interface",
                        c.edge(side),
                        blocks[b].id
                    )));
                }
                taken[b][e] = true;
                roles[b][e] = EdgeRole::Interface { coupling: ci, side };
            }
        }
        for b in &blocks {
            b.materials.check()?;
        }
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut acc = 0;
        for b in &blocks {
            offsets.push(acc);
            acc += b.n_state();
        }
        offsets.push(acc);
        Ok(SimSystem { blocks, interfaces, pec_params: PecSatParams::conserving(), pmc_params: PecSatParams::conserving(), roles, offsets })
    }

    pub fn single(block: MeshBlock, kind: BoundaryKind) -> Result<Self> {
        SimSystem::new(vec![block], vec![], vec![[kind; 4]])
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Start of each block's `[ez, hy, hx]` slice in the concatenated state.
    pub fn offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    pub fn zero_states(&self) -> Vec<FieldState> {
        self.blocks.iter().map(FieldState::zeros).collect()
    }

    pub fn flatten(&self, states: &[FieldState]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (b, s) in states.iter().enumerate() {
            s.write_flat(&mut out[self.offsets[b]..self.offsets[b + 1]]);
        }
        out
    }

    pub fn unflatten_into(&self, x: &[f64], states: &mut [FieldState]) {
        for (b, s) in states.iter_mut().enumerate() {
            s.read_flat(&x[self.offsets[b]..self.offsets[b + 1]]);
        }
    }

    pub fn h_min(&self) -> f64 {
        self.blocks.iter().map(|b| b.h).fold(f64::INFINITY, f64::min)
    }

    pub fn has_edge_kind(&self, kind: BoundaryKind) -> bool {
        self.roles.iter().flatten().any(|r| *r == EdgeRole::Outer(kind))
    }

    pub fn has_conductivity(&self) -> bool {
        self.blocks.iter().any(|b| b.materials.sigma_e.iter().any(|&s| s > 0.0))
    }

    /// Diagonal energy weight over the concatenated state.
    pub fn energy_weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            let (px, py) = (&b.ops_x, &b.ops_y);
            let mu = b.materials.permeability();
            for ix in 0..=b.nx {
                for iy in 0..=b.ny {
                    w.push(b.materials.permittivity(b.ez_index(ix, iy)) * px.p_minus[ix] * py.p_minus[iy]);
                }
            }
            for ix in 0..b.nx {
                for iy in 0..=b.ny {
                    w.push(mu * px.p_plus[ix] * py.p_minus[iy]);
                }
            }
            for ix in 0..=b.nx {
                for iy in 0..b.ny {
                    w.push(mu * px.p_minus[ix] * py.p_plus[iy]);
                }
            }
        }
        w
    }

    /// Reference rate `c/h_min` used to scale spectral tolerances.
    pub fn rate_scale(&self) -> f64 {
        C0 / self.h_min()
    }
}

/// Projected traces of one interface, indexed by side (coarse, fine).
#[derive(Debug, Clone, Default)]
pub struct InterfaceTraces {
    pub own: [Vec<f64>; 2],
    pub mapped: [Vec<f64>; 2],
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Coarse => 0,
        Side::Fine => 1,
    }
}

impl InterfaceTraces {
    pub fn for_coupling(c: &InterfaceCoupling) -> Self {
        let (nf, nc) = c.t_mat.shape();
        InterfaceTraces { own: [vec![0.0; nc], vec![0.0; nf]], mapped: [vec![0.0; nc], vec![0.0; nf]] }
    }

    fn finish(&mut self, c: &InterfaceCoupling) {
        let [oc, of] = &self.own;
        let [mc, mf] = &mut self.mapped;
        c.map_to(Side::Coarse, of, mc);
        c.map_to(Side::Fine, oc, mf);
    }
}

pub fn fill_h_traces(sys: &SimSystem, states: &[FieldState], traces: &mut [InterfaceTraces]) {
    traces.par_iter_mut().zip(&sys.interfaces).for_each(|(tr, c)| {
        for side in [Side::Coarse, Side::Fine] {
            let b = &sys.blocks[c.block(side)];
            let s = &states[c.block(side)];
            let e = c.edge(side);
            let h = if e.is_x_normal() { &s.hy } else { &s.hx };
            for (t, v) in tr.own[side_index(side)].iter_mut().enumerate() {
                let [(i0, w0), (i1, w1)] = b.edge_h_projection(e, t);
                *v = w0 * h[i0] + w1 * h[i1];
            }
        }
        tr.finish(c);
    });
}

pub fn fill_e_traces(sys: &SimSystem, states: &[FieldState], traces: &mut [InterfaceTraces]) {
    traces.par_iter_mut().zip(&sys.interfaces).for_each(|(tr, c)| {
        for side in [Side::Coarse, Side::Fine] {
            let b = &sys.blocks[c.block(side)];
            let s = &states[c.block(side)];
            let e = c.edge(side);
            let own = &mut tr.own[side_index(side)];
            for (t, v) in own.iter_mut().enumerate() {
                *v = s.ez[b.edge_ez_index(e, t)];
            }
        }
        tr.finish(c);
    });
}

/// Which penalty terms enter a right-hand side evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RhsMode {
    /// Outer and interface penalties.
    pub sats: bool,
    /// Close Mur edges with the PMC penalty (semi-discrete analysis only).
    pub mur_as_pmc: bool,
}

impl RhsMode {
    pub const ANALYSIS: RhsMode = RhsMode { sats: true, mur_as_pmc: true };
    pub const STEPPING: RhsMode = RhsMode { sats: true, mur_as_pmc: false };
    pub const INTERIOR: RhsMode = RhsMode { sats: false, mur_as_pmc: false };
}

/// `out = D_{x−}hy − D_{y−}hx + penalties`, before the `1/ε` scaling.
pub fn e_rate_raw(sys: &SimSystem, b: usize, s: &FieldState, traces: &[InterfaceTraces], mode: RhsMode, out: &mut [f64]) {
    let block = &sys.blocks[b];
    curl_h_raw(block, &s.hx, &s.hy, out);
    if !mode.sats {
        return;
    }
    for edge in Edge::ALL {
        match sys.roles[b][edge.index()] {
            EdgeRole::Outer(BoundaryKind::Pmc) => pmc_sat_ez_raw(block, &s.hx, &s.hy, sys.pmc_params.get(edge), edge, out),
            EdgeRole::Outer(BoundaryKind::Mur) if mode.mur_as_pmc => {
                pmc_sat_ez_raw(block, &s.hx, &s.hy, sys.pmc_params.get(edge), edge, out)
            }
            EdgeRole::Interface { coupling, side } => {
                let c = &sys.interfaces[coupling];
                let tr = &traces[coupling];
                let k = side_index(side);
                add_ez_penalty(block, edge, c.sigma_ez(side), &tr.own[k], &tr.mapped[k], out);
            }
            _ => {}
        }
    }
}

/// `hy = D_{x+}ez`, `hx = −D_{y+}ez` plus penalties, before the `1/μ` scaling.
pub fn h_rate_raw(
    sys: &SimSystem,
    b: usize,
    ez: &[f64],
    traces: &[InterfaceTraces],
    mode: RhsMode,
    hx_out: &mut [f64],
    hy_out: &mut [f64],
) {
    let block = &sys.blocks[b];
    curl_e_raw(block, ez, hx_out, hy_out);
    if !mode.sats {
        return;
    }
    for edge in Edge::ALL {
        match sys.roles[b][edge.index()] {
            EdgeRole::Outer(BoundaryKind::Pec) => pec_sat_h_raw(block, ez, sys.pec_params.get(edge), edge, hx_out, hy_out),
            EdgeRole::Interface { coupling, side } => {
                let c = &sys.interfaces[coupling];
                let tr = &traces[coupling];
                let k = side_index(side);
                add_h_penalty(block, edge, c.sigma_h(side), &tr.own[k], &tr.mapped[k], hx_out, hy_out);
            }
            _ => {}
        }
    }
}

/// Scratch space for repeated operator applications.
pub struct OperatorWorkspace {
    states: Vec<FieldState>,
    rates: Vec<FieldState>,
    traces: Vec<InterfaceTraces>,
}

impl OperatorWorkspace {
    pub fn new(sys: &SimSystem) -> Self {
        OperatorWorkspace {
            states: sys.zero_states(),
            rates: sys.zero_states(),
            traces: sys.interfaces.iter().map(InterfaceTraces::for_coupling).collect(),
        }
    }
}

/// `y = A·x` for the semi-discrete operator. PEC-masked Ez nodes are projected
/// out of the input and have zero rate; conductivity enters as `−σ/ε` on Ez.
pub fn apply_operator(sys: &SimSystem, ws: &mut OperatorWorkspace, x: &[f64], y: &mut [f64], mode: RhsMode, conductivity: bool) {
    sys.unflatten_into(x, &mut ws.states);
    for (b, s) in ws.states.iter_mut().enumerate() {
        for (v, &m) in s.ez.iter_mut().zip(&sys.blocks[b].materials.pec_mask) {
            if m {
                *v = 0.0;
            }
        }
    }
    fill_h_traces(sys, &ws.states, &mut ws.traces);
    for b in 0..sys.blocks.len() {
        let block = &sys.blocks[b];
        let s = &ws.states[b];
        let r = &mut ws.rates[b];
        e_rate_raw(sys, b, s, &ws.traces, mode, &mut r.ez);
        let mats = &block.materials;
        for i in 0..r.ez.len() {
            let eps = EPS0 * mats.eps_rel[i];
            r.ez[i] /= eps;
            if conductivity {
                r.ez[i] -= mats.sigma_e[i] / eps * s.ez[i];
            }
            if mats.pec_mask[i] {
                r.ez[i] = 0.0;
            }
        }
    }
    fill_e_traces(sys, &ws.states, &mut ws.traces);
    for b in 0..sys.blocks.len() {
        let s = &ws.states[b];
        let r = &mut ws.rates[b];
        h_rate_raw(sys, b, &s.ez, &ws.traces, mode, &mut r.hx, &mut r.hy);
        let inv_mu = 1.0 / sys.blocks[b].materials.permeability();
        r.hx.iter_mut().chain(r.hy.iter_mut()).for_each(|v| *v *= inv_mu);
    }
    for (b, r) in ws.rates.iter().enumerate() {
        r.write_flat(&mut y[sys.offsets[b]..sys.offsets[b + 1]]);
    }
}

/// Energy per block and in total at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub per_block: Vec<f64>,
    pub total: f64,
}

/// `½εEᵀ(P₋⊗P₋)E + ½μHyᵀ(P₊⊗P₋)Hy + ½μHxᵀ(P₋⊗P₊)Hx`.
pub fn block_energy(block: &MeshBlock, s: &FieldState) -> f64 {
    block_energy_pair(block, s, s, s)
}

/// The energy with the H terms taken as the bilinear form between `ha` and `hb`;
/// E comes from `e`.
pub fn block_energy_pair(block: &MeshBlock, e: &FieldState, ha: &FieldState, hb: &FieldState) -> f64 {
    let (px, py) = (&block.ops_x, &block.ops_y);
    let mats = &block.materials;
    let mut el = 0.0;
    for ix in 0..=block.nx {
        let mut line = 0.0;
        for iy in 0..=block.ny {
            let i = block.ez_index(ix, iy);
            line += mats.eps_rel[i] * py.p_minus[iy] * e.ez[i] * e.ez[i];
        }
        el += EPS0 * px.p_minus[ix] * line;
    }
    let mut m = 0.0;
    for ix in 0..block.nx {
        let mut line = 0.0;
        for iy in 0..=block.ny {
            let k = block.hy_index(ix, iy);
            line += py.p_minus[iy] * ha.hy[k] * hb.hy[k];
        }
        m += px.p_plus[ix] * line;
    }
    for ix in 0..=block.nx {
        let mut line = 0.0;
        for iy in 0..block.ny {
            let k = block.hx_index(ix, iy);
            line += py.p_plus[iy] * ha.hx[k] * hb.hx[k];
        }
        m += px.p_minus[ix] * line;
    }
    0.5 * (el + mats.permeability() * m)
}

pub fn compute_energy(sys: &SimSystem, states: &[FieldState], t: f64) -> EnergyReport {
    let per_block: Vec<f64> = sys.blocks.iter().zip(states).map(|(b, s)| block_energy(b, s)).collect();
    let total = per_block.iter().sum();
    EnergyReport { t, per_block, total }
}

/// Energy of leapfrog states `(Eⁿ, Hⁿ⁺½)` given the previous `Hⁿ⁻½` in `prev`.
/// `Centered` averages the two H levels; `Leapfrog` is the quantity
/// `½EᵀM_εE + ½(Hⁿ⁻½)ᵀM_μHⁿ⁺½` that the scheme conserves exactly when the
/// operator is skew and nothing dissipates.
pub fn synchronized_energy(sys: &SimSystem, states: &[FieldState], prev: &[FieldState], t: f64, kind: EnergyKind) -> EnergyReport {
    let per_block: Vec<f64> = sys
        .blocks
        .iter()
        .zip(states.iter().zip(prev))
        .map(|(b, (s, p))| match kind {
            EnergyKind::Staggered => block_energy(b, s),
            EnergyKind::Leapfrog => block_energy_pair(b, s, p, s),
            EnergyKind::Centered => {
                let avg = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, c)| 0.5 * (a + c)).collect::<Vec<f64>>();
                let m = FieldState { ez: Vec::new(), hy: avg(&s.hy, &p.hy), hx: avg(&s.hx, &p.hx) };
                block_energy_pair(b, s, &m, &m)
            }
        })
        .collect();
    let total = per_block.iter().sum();
    EnergyReport { t, per_block, total }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    /// Stored fields as they are, H half a step ahead of E.
    Staggered,
    Centered,
    Leapfrog,
}

/// Nonzero entries of `A`, gathered column by column: `(row, col, value)`.
pub fn operator_triplets(sys: &SimSystem, mode: RhsMode, conductivity: bool) -> Vec<(usize, usize, f64)> {
    let n = sys.dim();
    let mut ws = OperatorWorkspace::new(sys);
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut out = Vec::new();
    for j in 0..n {
        x[j] = 1.0;
        apply_operator(sys, &mut ws, &x, &mut y, mode, conductivity);
        x[j] = 0.0;
        out.extend(y.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, j, v)));
    }
    out
}

/// Dense `A` by column probing of the matrix-free right-hand side.
pub fn assemble_global_matrix(sys: &SimSystem, cap: usize) -> Result<DMatrix<f64>> {
    assemble_with(sys, cap, RhsMode::ANALYSIS, true)
}

pub fn assemble_with(sys: &SimSystem, cap: usize, mode: RhsMode, conductivity: bool) -> Result<DMatrix<f64>> {
    let n = sys.dim();
    if n > cap {
        return Err(Error::TooLargeForDense { dim: n, cap });
    }
    let mut a = DMatrix::zeros(n, n);
    let mut ws = OperatorWorkspace::new(sys);
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = 1.0;
        apply_operator(sys, &mut ws, &x, a.column_mut(j).as_mut_slice(), mode, conductivity);
        x[j] = 0.0;
    }
    Ok(a)
}

/// `max|W·A + Aᵀ·W| / ((c/h_min)·max W)` from the entries of `A`.
pub fn skewness_residual(sys: &SimSystem, triplets: &[(usize, usize, f64)]) -> f64 {
    let w = sys.energy_weights();
    let mut sym: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * triplets.len());
    for &(i, j, a) in triplets {
        sym.push((i, j, w[i] * a));
        sym.push((j, i, w[i] * a));
    }
    sym.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
    let mut max = 0.0_f64;
    let mut k = 0;
    while k < sym.len() {
        let (i, j) = (sym[k].0, sym[k].1);
        let mut v = 0.0;
        while k < sym.len() && sym[k].0 == i && sym[k].1 == j {
            v += sym[k].2;
            k += 1;
        }
        max = max.max(v.abs());
    }
    let wmax = w.iter().fold(0.0_f64, |m, &v| m.max(v));
    max / (sys.rate_scale() * wmax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface::InterfaceSigmas;
    use crate::sbp::SbpFamily;

    fn pec_block(nx: usize, ny: usize, h: f64, family: SbpFamily) -> SimSystem {
        let b = MeshBlock::new("b", (0.0, 0.0), nx, ny, h, family).unwrap();
        SimSystem::single(b, BoundaryKind::Pec).unwrap()
    }

    pub(crate) fn pair(edge: Edge, r: usize, family: SbpFamily) -> SimSystem {
        let hc = 0.1;
        let hf = hc / r as f64;
        let (c, f) = match edge {
            Edge::E => {
                (MeshBlock::new("c", (0.0, 0.0), 4, 3, hc, family).unwrap(), MeshBlock::new("f", (0.4, 0.0), 5, 3 * r, hf, family).unwrap())
            }
            Edge::W => (
                MeshBlock::new("c", (0.3, 0.0), 4, 3, hc, family).unwrap(),
                MeshBlock::new("f", (0.0, 0.0), 3 * r, 3 * r, hf, family).unwrap(),
            ),
            Edge::N => {
                (MeshBlock::new("c", (0.0, 0.0), 3, 4, hc, family).unwrap(), MeshBlock::new("f", (0.0, 0.4), 3 * r, 4, hf, family).unwrap())
            }
            Edge::S => (
                MeshBlock::new("c", (0.0, 0.2), 3, 2, hc, family).unwrap(),
                MeshBlock::new("f", (0.0, 0.0), 3 * r, 2 * r, hf, family).unwrap(),
            ),
        };
        let i = InterfaceCoupling::new(0, &c, 1, &f, edge, r, InterfaceSigmas::conserving()).unwrap();
        SimSystem::new(vec![c, f], vec![i], vec![[BoundaryKind::Pec; 4]; 2]).unwrap()
    }

    #[test]
    fn dimension_of_small_block() {
        assert_eq!(pec_block(2, 2, 1.0, SbpFamily::PaperFirstOrder).dim(), 21);
    }

    #[test]
    fn pec_block_is_skew_in_energy_norm() {
        for family in SbpFamily::ALL {
            let sys = pec_block(6, 4, 0.05, family);
            let t = operator_triplets(&sys, RhsMode::ANALYSIS, true);
            assert!(skewness_residual(&sys, &t) <= 1e-12, "{family}");
        }
    }

    #[test]
    fn pmc_block_is_skew_in_energy_norm() {
        let sys = {
            let b = MeshBlock::new("b", (0.0, 0.0), 5, 4, 0.1, SbpFamily::PaperFirstOrder).unwrap();
            SimSystem::single(b, BoundaryKind::Pmc).unwrap()
        };
        let t = operator_triplets(&sys, RhsMode::ANALYSIS, true);
        assert!(skewness_residual(&sys, &t) <= 1e-12);
    }

    #[test]
    fn printed_pec_signs_break_skewness() {
        let mut sys = pec_block(6, 4, 1.0, SbpFamily::PaperFirstOrder);
        sys.pec_params = PecSatParams { sigma_w: -1.0, sigma_e: 1.0, sigma_s: -1.0, sigma_n: 1.0 };
        let t = operator_triplets(&sys, RhsMode::ANALYSIS, true);
        assert!(skewness_residual(&sys, &t) > 1e-3);
    }

    #[test]
    fn coupled_pairs_are_skew() {
        for family in SbpFamily::ALL {
            for edge in Edge::ALL {
                for r in [2, 4] {
                    let sys = pair(edge, r, family);
                    let t = operator_triplets(&sys, RhsMode::ANALYSIS, true);
                    let res = skewness_residual(&sys, &t);
                    assert!(res <= 1e-12, "{family} {edge} r={r}: {res}");
                }
            }
        }
    }

    #[test]
    fn dense_matches_probing() {
        let sys = pair(Edge::E, 2, SbpFamily::PaperFirstOrder);
        let a = assemble_global_matrix(&sys, DEFAULT_DENSE_CAP).unwrap();
        let mut ws = OperatorWorkspace::new(&sys);
        let mut y = vec![0.0; sys.dim()];
        for j in [0, 7, sys.dim() - 1] {
            let mut x = vec![0.0; sys.dim()];
            x[j] = 1.0;
            apply_operator(&sys, &mut ws, &x, &mut y, RhsMode::ANALYSIS, true);
            for i in 0..sys.dim() {
                assert_eq!(a[(i, j)], y[i]);
            }
        }
        assert!(matches!(assemble_global_matrix(&sys, 10), Err(Error::TooLargeForDense { .. })));
    }

    #[test]
    fn energy_of_unit_node() {
        let sys = pec_block(4, 4, 1.0, SbpFamily::PaperFirstOrder);
        let mut s = sys.zero_states();
        assert_eq!(compute_energy(&sys, &s, 0.0).total, 0.0);
        s[0].ez[sys.blocks[0].ez_index(2, 2)] = 1.0;
        let e = compute_energy(&sys, &s, 0.0).total;
        assert!((e - 0.5 * EPS0).abs() < 1e-26);
        assert!((e - 4.427e-12).abs() < 1e-15);
    }
}
