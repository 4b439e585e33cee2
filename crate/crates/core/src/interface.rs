//! Coupling of two blocks across a shared edge with an integer refinement ratio.
//!
//! Traces live on the tangential node lines of both blocks. The coarse side sees
//! fine data through `T̂`, the fine side sees coarse data through `T`, and
//! `Tᵀ·P_fine = P_coarse·T̂` makes the cross terms cancel in the energy rate.
//! Each side is penalized with `σ·s·(own − mapped)`, where `s` is its edge sign.

use crate::error::{Error, Result};
use crate::grid::{Edge, MeshBlock};
use nalgebra::DMatrix;

/// Piecewise-linear prolongation from `n_coarse_nodes` trace nodes to
/// `r·(n_coarse_nodes − 1) + 1` fine trace nodes.
pub fn build_prolongation(n_coarse_nodes: usize, r: usize) -> Result<DMatrix<f64>> {
    if r < 2 {
        return Err(Error::InvalidArgument(format!("refinement ratio must be at least 2, got {r}")));
    }
    if n_coarse_nodes < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 coarse nodes, got {n_coarse_nodes}")));
    }
    Ok(linear_prolongation(n_coarse_nodes, r))
}

fn linear_prolongation(n_coarse_nodes: usize, r: usize) -> DMatrix<f64> {
    let n_fine = r * (n_coarse_nodes - 1) + 1;
    let mut t = DMatrix::zeros(n_fine, n_coarse_nodes);
    for j in 0..n_fine {
        let (k, rem) = (j / r, j % r);
        if rem == 0 {
            t[(j, k)] = 1.0;
        } else {
            t[(j, k)] = (r - rem) as f64 / r as f64;
            t[(j, k + 1)] = rem as f64 / r as f64;
        }
    }
    t
}

/// `T̂ = P_coarse⁻¹·Tᵀ·P_fine`.
pub fn build_compatible_restriction(t_mat: &DMatrix<f64>, p_fine: &[f64], p_coarse: &[f64]) -> Result<DMatrix<f64>> {
    if t_mat.nrows() != p_fine.len() || t_mat.ncols() != p_coarse.len() {
        return Err(Error::InvalidArgument(format!(
            "T is {}×{} but norms have {} fine and {} coarse entries",
            t_mat.nrows(),
            t_mat.ncols(),
            p_fine.len(),
            p_coarse.len()
        )));
    }
    if let Some(v) = p_fine.iter().chain(p_coarse).find(|&&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!("norm entries must be positive, found {v}")));
    }
    let mut t_hat = t_mat.transpose();
    for i in 0..t_hat.nrows() {
        for j in 0..t_hat.ncols() {
            t_hat[(i, j)] *= p_fine[j] / p_coarse[i];
        }
    }
    Ok(t_hat)
}

/// `max|Tᵀ·P_fine − P_coarse·T̂| / max|Tᵀ·P_fine|`.
pub fn compatibility_residual(t_mat: &DMatrix<f64>, t_hat: &DMatrix<f64>, p_fine: &[f64], p_coarse: &[f64]) -> f64 {
    let mut lhs = t_mat.transpose();
    for i in 0..lhs.nrows() {
        for j in 0..lhs.ncols() {
            lhs[(i, j)] *= p_fine[j];
        }
    }
    let mut rhs = t_hat.clone();
    for i in 0..rhs.nrows() {
        for j in 0..rhs.ncols() {
            rhs[(i, j)] *= p_coarse[i];
        }
    }
    let scale = lhs.amax();
    if scale == 0.0 {
        return (lhs - rhs).amax();
    }
    (lhs - rhs).amax() / scale
}

/// Printed fine-to-coarse matrix for ratio 2: boundary rows `a1..a5`, interior
/// rows `c1..c5` centred on the coincident fine node, bottom row mirrored.
pub fn paper_restriction_preset(n_fine_nodes: usize) -> Result<DMatrix<f64>> {
    const A: [f64; 5] = [0.5505, 0.5, -0.5505, 0.0, 0.0];
    const C: [f64; 5] = [-0.0252, 0.25, 0.5505, 0.25, -0.0252];
    if n_fine_nodes < 5 || n_fine_nodes % 2 == 0 {
        return Err(Error::InvalidArgument(format!("printed restriction needs an odd fine node count of at least 5, got {n_fine_nodes}")));
    }
    let m = (n_fine_nodes - 1) / 2;
    let mut t = DMatrix::zeros(m + 1, n_fine_nodes);
    for (j, &a) in A.iter().enumerate() {
        t[(0, j)] = a;
        t[(m, n_fine_nodes - 1 - j)] = a;
    }
    for k in 1..m {
        for (j, &c) in C.iter().enumerate() {
            t[(k, 2 * k - 2 + j)] = c;
        }
    }
    Ok(t)
}

/// Row-compressed copy of a small dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    pub n_cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows()).map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] != 0.0).map(|j| (j, m[(i, j)])).collect()).collect();
        SparseRows { n_cols: m.ncols(), rows }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Shared edge runs along x (coarse N or S); couples Ez and Hx.
    Horizontal,
    /// Shared edge runs along y (coarse E or W); couples Ez and Hy.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Coarse,
    Fine,
}

/// Interface penalty strengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSigmas {
    pub ez_coarse: f64,
    pub ez_fine: f64,
    pub h_coarse: f64,
    pub h_fine: f64,
}

impl InterfaceSigmas {
    pub const fn conserving() -> Self {
        InterfaceSigmas { ez_coarse: -0.5, ez_fine: -0.5, h_coarse: -0.5, h_fine: -0.5 }
    }
}

impl Default for InterfaceSigmas {
    fn default() -> Self {
        Self::conserving()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceCoupling {
    pub coarse_block: usize,
    pub fine_block: usize,
    pub coarse_id: String,
    pub fine_id: String,
    /// Edge of the coarse block on the interface; the fine block uses the opposite one.
    pub coarse_edge: Edge,
    pub orientation: Orientation,
    pub ratio: usize,
    /// Coarse trace to fine trace.
    pub t_mat: DMatrix<f64>,
    /// Fine trace to coarse trace.
    pub t_hat: DMatrix<f64>,
    pub sigmas: InterfaceSigmas,
    t_sparse: SparseRows,
    t_hat_sparse: SparseRows,
}

impl InterfaceCoupling {
    /// Couples `coarse` (index `ci`) along `coarse_edge` to `fine` (index `fi`).
    /// Ratio 1 gives a conforming interface with identity transfers.
    pub fn new(
        ci: usize,
        coarse: &MeshBlock,
        fi: usize,
        fine: &MeshBlock,
        coarse_edge: Edge,
        ratio: usize,
        sigmas: InterfaceSigmas,
    ) -> Result<Self> {
        check_geometry(coarse, fine, coarse_edge, ratio).map_err(Error::InvalidArgument)?;
        let nc = coarse.edge_len(coarse_edge);
        let fine_edge = coarse_edge.opposite();
        let t_mat = if ratio == 1 { DMatrix::identity(nc, nc) } else { build_prolongation(nc, ratio)? };
        let t_hat =
            build_compatible_restriction(&t_mat, &fine.tangential_ops(fine_edge).p_minus, &coarse.tangential_ops(coarse_edge).p_minus)?;
        Ok(InterfaceCoupling {
            coarse_block: ci,
            fine_block: fi,
            coarse_id: coarse.id.clone(),
            fine_id: fine.id.clone(),
            coarse_edge,
            orientation: if coarse_edge.is_x_normal() { Orientation::Vertical } else { Orientation::Horizontal },
            ratio,
            t_sparse: SparseRows::from_dense(&t_mat),
            t_hat_sparse: SparseRows::from_dense(&t_hat),
            t_mat,
            t_hat,
            sigmas,
        })
    }

    pub fn fine_edge(&self) -> Edge {
        self.coarse_edge.opposite()
    }

    pub fn block(&self, side: Side) -> usize {
        match side {
            Side::Coarse => self.coarse_block,
            Side::Fine => self.fine_block,
        }
    }

    pub fn edge(&self, side: Side) -> Edge {
        match side {
            Side::Coarse => self.coarse_edge,
            Side::Fine => self.fine_edge(),
        }
    }

    /// Maps the other side's trace onto this side's nodes.
    pub fn map_to(&self, side: Side, other_trace: &[f64], out: &mut [f64]) {
        match side {
            Side::Coarse => self.t_hat_sparse.apply(other_trace, out),
            Side::Fine => self.t_sparse.apply(other_trace, out),
        }
    }

    pub fn sigma_ez(&self, side: Side) -> f64 {
        match side {
            Side::Coarse => self.sigmas.ez_coarse,
            Side::Fine => self.sigmas.ez_fine,
        }
    }

    pub fn sigma_h(&self, side: Side) -> f64 {
        match side {
            Side::Coarse => self.sigmas.h_coarse,
            Side::Fine => self.sigmas.h_fine,
        }
    }

    pub fn compatibility_residual(&self, coarse: &MeshBlock, fine: &MeshBlock) -> f64 {
        compatibility_residual(
            &self.t_mat,
            &self.t_hat,
            &fine.tangential_ops(self.fine_edge()).p_minus,
            &coarse.tangential_ops(self.coarse_edge).p_minus,
        )
    }
}

/// Geometric consistency of a coarse/fine edge pairing; `Err` carries the reason.
pub fn check_geometry(coarse: &MeshBlock, fine: &MeshBlock, coarse_edge: Edge, ratio: usize) -> std::result::Result<(), String> {
    if ratio == 0 {
        return Err("ratio must be a positive integer".into());
    }
    let rel = (coarse.h - ratio as f64 * fine.h).abs() / coarse.h;
    if rel > 1e-9 {
        return Err(format!("cell sizes {} and {} do not have ratio {ratio}", coarse.h, fine.h));
    }
    let fine_edge = coarse_edge.opposite();
    let (nc, nf) = (coarse.edge_len(coarse_edge) - 1, fine.edge_len(fine_edge) - 1);
    if nf != ratio * nc {
        return Err(format!("fine edge has {nf} cells, expected {ratio}×{nc}"));
    }
    let seg = |b: &MeshBlock, e: Edge| -> ((f64, f64), (f64, f64)) {
        let (w, h) = b.extent();
        let (x0, y0) = b.origin;
        match e {
            Edge::W => ((x0, y0), (x0, y0 + h)),
            Edge::E => ((x0 + w, y0), (x0 + w, y0 + h)),
            Edge::S => ((x0, y0), (x0 + w, y0)),
            Edge::N => ((x0, y0 + h), (x0 + w, y0 + h)),
        }
    };
    let (a0, a1) = seg(coarse, coarse_edge);
    let (b0, b1) = seg(fine, fine_edge);
    let tol = 1e-9 * coarse.h.max(1.0);
    let close = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).abs() <= tol && (p.1 - q.1).abs() <= tol;
    if !(close(a0, b0) && close(a1, b1)) {
        return Err(format!("edge segments differ: coarse {coarse_edge} from {a0:?} to {a1:?}, fine {fine_edge} from {b0:?} to {b1:?}"));
    }
    Ok(())
}

/// Adds the raw Ez penalty `σ·s/P_n·(own − mapped)` for one side (multiply by `1/ε` afterwards).
pub fn add_ez_penalty(block: &MeshBlock, edge: Edge, sigma: f64, own_h: &[f64], mapped_h: &[f64], ez_rate: &mut [f64]) {
    let scale = sigma * edge.sign() / block.edge_normal_weight(edge);
    for t in 0..own_h.len() {
        ez_rate[block.edge_ez_index(edge, t)] += scale * (own_h[t] - mapped_h[t]);
    }
}

/// Adds the raw H penalty `σ·s·P⁻¹p·(own − mapped)` for one side (multiply by `1/μ` afterwards).
pub fn add_h_penalty(block: &MeshBlock, edge: Edge, sigma: f64, own_e: &[f64], mapped_e: &[f64], hx_rate: &mut [f64], hy_rate: &mut [f64]) {
    let target = if edge.is_x_normal() { hy_rate } else { hx_rate };
    let s = sigma * edge.sign();
    for t in 0..own_e.len() {
        let d = s * (own_e[t] - mapped_e[t]);
        for (i, w) in block.edge_h_lift(edge, t) {
            target[i] += w * d;
        }
    }
}

fn ez_trace(block: &MeshBlock, ez: &[f64], edge: Edge) -> Vec<f64> {
    (0..block.edge_len(edge)).map(|t| ez[block.edge_ez_index(edge, t)]).collect()
}

fn h_trace(block: &MeshBlock, state: &crate::grid::FieldState, edge: Edge) -> Vec<f64> {
    let h = if edge.is_x_normal() { &state.hy } else { &state.hx };
    crate::grid::project_h_trace(block, h, edge)
}

fn check_pair(
    c: &InterfaceCoupling,
    coarse: &MeshBlock,
    cs: &crate::grid::FieldState,
    fine: &MeshBlock,
    fs: &crate::grid::FieldState,
) -> Result<()> {
    cs.check(coarse)?;
    fs.check(fine)?;
    if coarse.edge_len(c.coarse_edge) != c.t_mat.ncols() || fine.edge_len(c.fine_edge()) != c.t_mat.nrows() {
        return Err(Error::InvalidArgument("blocks do not match the coupling's traces".into()));
    }
    Ok(())
}

/// Interface Ez-rate increments `(coarse, fine)` on the full Ez layouts.
pub fn interface_sat_ez(
    c: &InterfaceCoupling,
    coarse: &MeshBlock,
    cs: &crate::grid::FieldState,
    fine: &MeshBlock,
    fs: &crate::grid::FieldState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(c, coarse, cs, fine, fs)?;
    let hc = h_trace(coarse, cs, c.coarse_edge);
    let hf = h_trace(fine, fs, c.fine_edge());
    let mut out = Vec::with_capacity(2);
    for (side, block, own, other) in [(Side::Coarse, coarse, &hc, &hf), (Side::Fine, fine, &hf, &hc)] {
        let mut mapped = vec![0.0; own.len()];
        c.map_to(side, other, &mut mapped);
        let mut rate = vec![0.0; block.n_ez()];
        add_ez_penalty(block, c.edge(side), c.sigma_ez(side), own, &mapped, &mut rate);
        for (r, e) in rate.iter_mut().zip(&block.materials.eps_rel) {
            *r /= crate::grid::EPS0 * e;
        }
        out.push(rate);
    }
    let fine_rate = out.pop().unwrap();
    Ok((out.pop().unwrap(), fine_rate))
}

/// Per-side H-rate increments; each pair is `(ΔHx-rate, ΔHy-rate)`.
#[allow(clippy::type_complexity)]
pub fn interface_sat_h(
    c: &InterfaceCoupling,
    coarse: &MeshBlock,
    cs: &crate::grid::FieldState,
    fine: &MeshBlock,
    fs: &crate::grid::FieldState,
) -> Result<((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))> {
    check_pair(c, coarse, cs, fine, fs)?;
    let ec = ez_trace(coarse, &cs.ez, c.coarse_edge);
    let ef = ez_trace(fine, &fs.ez, c.fine_edge());
    let mut out = Vec::with_capacity(2);
    for (side, block, own, other) in [(Side::Coarse, coarse, &ec, &ef), (Side::Fine, fine, &ef, &ec)] {
        let mut mapped = vec![0.0; own.len()];
        c.map_to(side, other, &mut mapped);
        let mut hx = vec![0.0; block.n_hx()];
        let mut hy = vec![0.0; block.n_hy()];
        add_h_penalty(block, c.edge(side), c.sigma_h(side), own, &mapped, &mut hx, &mut hy);
        let inv_mu = 1.0 / block.materials.permeability();
        hx.iter_mut().chain(hy.iter_mut()).for_each(|v| *v *= inv_mu);
        out.push((hx, hy));
    }
    let fine_rate = out.pop().unwrap();
    Ok((out.pop().unwrap(), fine_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbp::SbpFamily;
    use proptest::prelude::*;

    #[test]
    fn prolongation_3_by_2() {
        let t = build_prolongation(3, 2).unwrap();
        let expect = DMatrix::from_row_slice(5, 3, &[1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 1.0]);
        assert_eq!(t, expect);
        assert!(matches!(build_prolongation(3, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn restriction_3_by_2() {
        let t = build_prolongation(3, 2).unwrap();
        let th = build_compatible_restriction(&t, &[1.0; 5], &[2.0; 3]).unwrap();
        let expect = DMatrix::from_row_slice(3, 5, &[0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.25, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.25, 0.5]);
        assert_eq!(th, expect);
        let row: f64 = th.row(1).iter().sum();
        assert_eq!(row, 1.0);
        assert!(compatibility_residual(&t, &th, &[1.0; 5], &[2.0; 3]) <= 1e-15);
        assert!(build_compatible_restriction(&t, &[1.0, 1.0, 0.0, 1.0, 1.0], &[2.0; 3]).is_err());
    }

    #[test]
    fn printed_restriction() {
        let th = paper_restriction_preset(9).unwrap();
        assert_eq!(th.shape(), (5, 9));
        assert_eq!(th.row(0).iter().take(5).copied().collect::<Vec<_>>(), vec![0.5505, 0.5, -0.5505, 0.0, 0.0]);
        assert_eq!(th.row(2).iter().skip(2).take(5).copied().collect::<Vec<_>>(), vec![-0.0252, 0.25, 0.5505, 0.25, -0.0252]);
        let s: f64 = th.row(2).iter().sum();
        assert!((s - 1.0001).abs() < 1e-12);
        assert!(paper_restriction_preset(4).is_err());
        assert!(paper_restriction_preset(3).is_err());
        let t = build_prolongation(5, 2).unwrap();
        let r = compatibility_residual(&t, &th, &[1.0; 9], &[2.0; 5]);
        assert!(r > 1e-3);
    }

    #[test]
    fn geometry_checks() {
        let c = MeshBlock::new("c", (1.0, 0.0), 4, 4, 0.5, SbpFamily::PaperFirstOrder).unwrap();
        let f = MeshBlock::new("f", (0.0, 0.0), 4, 8, 0.25, SbpFamily::PaperFirstOrder).unwrap();
        assert!(check_geometry(&c, &f, Edge::W, 2).is_ok());
        assert!(check_geometry(&c, &f, Edge::W, 4).is_err());
        assert!(check_geometry(&c, &f, Edge::E, 2).is_err());
        let shifted = MeshBlock::new("f", (0.0, 0.25), 4, 8, 0.25, SbpFamily::PaperFirstOrder).unwrap();
        assert!(check_geometry(&c, &shifted, Edge::W, 2).is_err());
    }

    proptest! {
        #[test]
        fn constructed_pairs_are_compatible(nc in 2usize..=64, r4 in any::<bool>(), second in any::<bool>()) {
            let r = if r4 { 4 } else { 2 };
            let b1 = if second { 0.5 } else { 1.0 };
            let hc = 0.1;
            let hf = hc / r as f64;
            let mut pc = vec![hc; nc];
            pc[0] *= b1;
            pc[nc - 1] *= b1;
            let nf = r * (nc - 1) + 1;
            let mut pf = vec![hf; nf];
            pf[0] *= b1;
            pf[nf - 1] *= b1;
            let t = build_prolongation(nc, r).unwrap();
            for i in 0..nf {
                prop_assert_eq!(t.row(i).iter().sum::<f64>(), 1.0);
            }
            let th = build_compatible_restriction(&t, &pf, &pc).unwrap();
            prop_assert!(compatibility_residual(&t, &th, &pf, &pc) <= 1e-14);
            for i in 1..nc - 1 {
                prop_assert!((th.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-14);
            }
        }
    }
}
