//! One-dimensional staggered summation-by-parts operators.
//!
//! E-type values live on the `n_cells + 1` nodes `x_minus`, H-type values on the
//! `n_cells` midpoints `x_plus`. The two difference operators and their diagonal
//! norms satisfy
//!
//! ```text
//! P₋D₋ + (P₊D₊)ᵀ = −e_L·p_Lᵀ + e_R·p_Rᵀ
//! ```
//!
//! where `p_L`, `p_R` extrapolate H values to the two boundary nodes. Interior
//! rows are the usual two-point staggered differences; `D₋` closes with one-sided
//! first-order rows. Cancelling the interior rows of the identity forces
//! `P₊ = h·I`, and the boundary rows then give `p_L = [1 + b1, −b1, 0, …]`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::fmt;
use std::str::FromStr;

/// Uniform staggered 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredAxis {
    pub n_cells: usize,
    pub h: f64,
    /// Node coordinates `i·h`, length `n_cells + 1`.
    pub x_minus: Vec<f64>,
    /// Midpoint coordinates `(i + ½)·h`, length `n_cells`.
    pub x_plus: Vec<f64>,
}

pub fn build_staggered_axis(n_cells: usize, h: f64) -> Result<StaggeredAxis> {
    if n_cells == 0 {
        return Err(Error::InvalidArgument("axis needs at least one cell".into()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("cell size must be positive, got {h}")));
    }
    let x_minus = (0..=n_cells).map(|i| i as f64 * h).collect();
    let x_plus = (0..n_cells).map(|i| (i as f64 + 0.5) * h).collect();
    Ok(StaggeredAxis { n_cells, h, x_minus, x_plus })
}

/// Closure family, selected by the boundary norm weight `b1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SbpFamily {
    /// `b1 = 1`: unit norm everywhere, first-order projection `p_L = [2, −1]`.
    #[default]
    PaperFirstOrder,
    /// `b1 = ½`: trapezoid norm, second-order projection `p_L = [3/2, −1/2]`.
    TrapezoidSecondOrder,
}

impl SbpFamily {
    pub const ALL: [SbpFamily; 2] = [SbpFamily::PaperFirstOrder, SbpFamily::TrapezoidSecondOrder];

    pub fn b1(self) -> f64 {
        match self {
            SbpFamily::PaperFirstOrder => 1.0,
            SbpFamily::TrapezoidSecondOrder => 0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SbpFamily::PaperFirstOrder => "paper-first-order",
            SbpFamily::TrapezoidSecondOrder => "trapezoid-second-order",
        }
    }
}

impl fmt::Display for SbpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SbpFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-first-order" => Ok(SbpFamily::PaperFirstOrder),
            "trapezoid-second-order" => Ok(SbpFamily::TrapezoidSecondOrder),
            other => Err(Error::InvalidArgument(format!("unknown operator family '{other}'"))),
        }
    }
}

/// One row of a banded operator: `out[r] = Σ_k coeffs[k]·in[start + k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilRow {
    pub start: usize,
    pub coeffs: [f64; 2],
}

/// Matrix-free representation of a two-point banded operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil1D {
    pub n_in: usize,
    pub rows: Vec<StencilRow>,
}

impl Stencil1D {
    pub fn n_out(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.n_in);
        debug_assert_eq!(out.len(), self.rows.len());
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.coeffs[0] * input[row.start] + row.coeffs[1] * input[row.start + 1];
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.n_in);
        for (r, row) in self.rows.iter().enumerate() {
            m[(r, row.start)] += row.coeffs[0];
            m[(r, row.start + 1)] += row.coeffs[1];
        }
        m
    }
}

/// Operator set for one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SbpOperators1D {
    pub family: SbpFamily,
    pub n_cells: usize,
    pub h: f64,
    /// Norm weights of the H-type midpoints, `a1`, `a2` at each end (both 1 here).
    pub a1: f64,
    pub a2: f64,
    /// Norm weight of the two boundary nodes.
    pub b1: f64,
    /// `n_cells × (n_cells+1)`, maps node values to midpoints.
    pub d_plus: DMatrix<f64>,
    /// `(n_cells+1) × n_cells`, maps midpoint values to nodes.
    pub d_minus: DMatrix<f64>,
    /// Diagonal of `P₊`, length `n_cells`, units of length.
    pub p_plus: Vec<f64>,
    /// Diagonal of `P₋`, length `n_cells + 1`, units of length.
    pub p_minus: Vec<f64>,
    pub p_left: Vec<f64>,
    pub p_right: Vec<f64>,
    pub e_left: Vec<f64>,
    pub e_right: Vec<f64>,
    /// First row of `Q₋ = P₋D₋` (dimensionless); the last row is its mirror.
    pub q_minus_closure: [f64; 2],
    pub d_plus_stencil: Stencil1D,
    pub d_minus_stencil: Stencil1D,
}

pub fn build_sbp_1d(axis: &StaggeredAxis, family: SbpFamily) -> Result<SbpOperators1D> {
    let n = axis.n_cells;
    let h = axis.h;
    if n < 2 {
        return Err(Error::OperatorUnderdetermined(format!("{n} cell(s): the one-sided closure rows of D₋ would overlap")));
    }
    let b1 = family.b1();
    let (a1, a2) = (1.0, 1.0);
    let inv_h = 1.0 / h;
    let diff = [-inv_h, inv_h];

    let d_plus_stencil = Stencil1D { n_in: n + 1, rows: (0..n).map(|i| StencilRow { start: i, coeffs: diff }).collect() };
    let d_minus_stencil =
        Stencil1D { n_in: n, rows: (0..=n).map(|i| StencilRow { start: i.saturating_sub(1).min(n - 2), coeffs: diff }).collect() };

    let mut p_plus = vec![h; n];
    p_plus[0] = a1 * h;
    p_plus[n - 1] = a1 * h;
    if n > 2 {
        p_plus[1] = a2 * h;
        p_plus[n - 2] = a2 * h;
    }
    let mut p_minus = vec![h; n + 1];
    p_minus[0] = b1 * h;
    p_minus[n] = b1 * h;

    let mut p_left = vec![0.0; n];
    p_left[0] = 1.0 + b1;
    p_left[1] = -b1;
    let p_right: Vec<f64> = p_left.iter().rev().copied().collect();
    let mut e_left = vec![0.0; n + 1];
    e_left[0] = 1.0;
    let mut e_right = vec![0.0; n + 1];
    e_right[n] = 1.0;

    Ok(SbpOperators1D {
        family,
        n_cells: n,
        h,
        a1,
        a2,
        b1,
        d_plus: d_plus_stencil.to_dense(),
        d_minus: d_minus_stencil.to_dense(),
        p_plus,
        p_minus,
        p_left,
        p_right,
        e_left,
        e_right,
        q_minus_closure: [-b1, b1],
        d_plus_stencil,
        d_minus_stencil,
    })
}

impl SbpOperators1D {
    pub fn q_plus(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.p_plus.clone().into()) * &self.d_plus
    }

    pub fn q_minus(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.p_minus.clone().into()) * &self.d_minus
    }

    /// `P₊⁻¹·p_L`: weights with which a left-boundary penalty enters the H lines.
    pub fn left_lift(&self) -> [f64; 2] {
        [self.p_left[0] / self.p_plus[0], self.p_left[1] / self.p_plus[1]]
    }

    pub fn right_lift(&self) -> [f64; 2] {
        let n = self.n_cells;
        [self.p_right[n - 1] / self.p_plus[n - 1], self.p_right[n - 2] / self.p_plus[n - 2]]
    }

    /// Extrapolated boundary value `p_Lᵀ·H`.
    pub fn project_left(&self, h_values: &[f64]) -> f64 {
        self.p_left[0] * h_values[0] + self.p_left[1] * h_values[1]
    }

    pub fn project_right(&self, h_values: &[f64]) -> f64 {
        let n = self.n_cells;
        self.p_right[n - 1] * h_values[n - 1] + self.p_right[n - 2] * h_values[n - 2]
    }
}

/// Frobenius norm of `Q₋ + Q₊ᵀ + e_L·p_Lᵀ − e_R·p_Rᵀ`.
pub fn sbp_identity_residual(ops: &SbpOperators1D) -> Result<f64> {
    let n = ops.n_cells;
    let dims_ok = ops.d_plus.shape() == (n, n + 1)
        && ops.d_minus.shape() == (n + 1, n)
        && ops.p_plus.len() == n
        && ops.p_minus.len() == n + 1
        && ops.p_left.len() == n
        && ops.p_right.len() == n
        && ops.e_left.len() == n + 1
        && ops.e_right.len() == n + 1;
    if !dims_ok {
        return Err(Error::InvalidArgument("operator dimensions are inconsistent".into()));
    }
    let mut r = ops.q_minus() + ops.q_plus().transpose();
    for i in 0..=n {
        for j in 0..n {
            r[(i, j)] += ops.e_left[i] * ops.p_left[j] - ops.e_right[i] * ops.p_right[j];
        }
    }
    Ok(r.norm())
}

/// Max-norm residuals of `D·xᵏ − k·xᵏ⁻¹` for both operators and `k ∈ {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyResiduals {
    pub d_minus_k0: f64,
    pub d_minus_k1: f64,
    pub d_plus_k0: f64,
    pub d_plus_k1: f64,
}

impl AccuracyResiduals {
    pub fn max(&self) -> f64 {
        self.d_minus_k0.max(self.d_minus_k1).max(self.d_plus_k0).max(self.d_plus_k1)
    }
}

/// Row-wise residual `D·xᵏ − k·xᵏ⁻¹` for both operators; `k = 2` probes the closures.
pub fn accuracy_profile(ops: &SbpOperators1D, axis: &StaggeredAxis, k: i32) -> Result<(Vec<f64>, Vec<f64>)> {
    if ops.n_cells != axis.n_cells || ops.h != axis.h {
        return Err(Error::InvalidArgument("operators were built on a different axis".into()));
    }
    let mono = |x: f64| if k == 0 { 1.0 } else { x.powi(k) };
    let deriv = |x: f64| if k == 0 { 0.0 } else { k as f64 * x.powi(k - 1) };
    let xp: Vec<f64> = axis.x_plus.iter().map(|&x| mono(x)).collect();
    let xm: Vec<f64> = axis.x_minus.iter().map(|&x| mono(x)).collect();
    let mut dm = vec![0.0; ops.n_cells + 1];
    let mut dp = vec![0.0; ops.n_cells];
    ops.d_minus_stencil.apply(&xp, &mut dm);
    ops.d_plus_stencil.apply(&xm, &mut dp);
    for (v, &x) in dm.iter_mut().zip(&axis.x_minus) {
        *v -= deriv(x);
    }
    for (v, &x) in dp.iter_mut().zip(&axis.x_plus) {
        *v -= deriv(x);
    }
    Ok((dm, dp))
}

pub fn accuracy_residuals(ops: &SbpOperators1D, axis: &StaggeredAxis) -> Result<AccuracyResiduals> {
    let inf = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let (m0, p0) = accuracy_profile(ops, axis, 0)?;
    let (m1, p1) = accuracy_profile(ops, axis, 1)?;
    Ok(AccuracyResiduals { d_minus_k0: inf(&m0), d_minus_k1: inf(&m1), d_plus_k0: inf(&p0), d_plus_k1: inf(&p1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ops(n: usize, h: f64, family: SbpFamily) -> (StaggeredAxis, SbpOperators1D) {
        let axis = build_staggered_axis(n, h).unwrap();
        let ops = build_sbp_1d(&axis, family).unwrap();
        (axis, ops)
    }

    #[test]
    fn axis_coordinates() {
        let a = build_staggered_axis(4, 1.0).unwrap();
        assert_eq!(a.x_minus, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.x_plus, vec![0.5, 1.5, 2.5, 3.5]);
        let a = build_staggered_axis(1, 0.5).unwrap();
        assert_eq!(a.x_minus, vec![0.0, 0.5]);
        assert_eq!(a.x_plus, vec![0.25]);
        let a = build_staggered_axis(3, 2.0).unwrap();
        assert_eq!((a.x_minus.len(), a.x_plus.len()), (4, 3));
        assert!(a.x_minus.windows(2).all(|w| w[1] - w[0] == 2.0));
        assert!(a.x_plus.windows(2).all(|w| w[1] - w[0] == 2.0));
    }

    #[test]
    fn axis_rejects_bad_input() {
        assert!(matches!(build_staggered_axis(0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_staggered_axis(3, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_staggered_axis(3, -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_cell_is_underdetermined() {
        let a = build_staggered_axis(1, 1.0).unwrap();
        assert!(matches!(build_sbp_1d(&a, SbpFamily::PaperFirstOrder), Err(Error::OperatorUnderdetermined(_))));
    }

    #[test]
    fn paper_family_n4() {
        let (_, o) = ops(4, 1.0, SbpFamily::PaperFirstOrder);
        let row = |r: usize| o.d_minus.row(r).iter().copied().collect::<Vec<_>>();
        assert_eq!(row(0), vec![-1.0, 1.0, 0.0, 0.0]);
        assert_eq!(row(2), vec![0.0, -1.0, 1.0, 0.0]);
        assert_eq!(row(4), vec![0.0, 0.0, -1.0, 1.0]);
        assert_eq!(o.p_left, vec![2.0, -1.0, 0.0, 0.0]);
        assert_eq!(o.p_right, vec![0.0, 0.0, -1.0, 2.0]);
        assert_eq!(o.p_minus, vec![1.0; 5]);
        assert_eq!(o.p_plus, vec![1.0; 4]);
        assert_eq!((o.a1, o.a2, o.b1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn trapezoid_family_extrapolates_linear_data_exactly() {
        let (axis, o) = ops(4, 1.0, SbpFamily::TrapezoidSecondOrder);
        assert_eq!(o.p_left, vec![1.5, -0.5, 0.0, 0.0]);
        assert_eq!(o.project_left(&axis.x_plus), 0.0);
        assert_eq!(o.project_right(&axis.x_plus), 4.0);
        assert_eq!(o.p_minus, vec![0.5, 1.0, 1.0, 1.0, 0.5]);
    }

    #[test]
    fn tampered_projection_residual_is_sqrt2() {
        let (_, mut o) = ops(4, 1.0, SbpFamily::PaperFirstOrder);
        o.p_left = vec![1.0, 0.0, 0.0, 0.0];
        let r = sbp_identity_residual(&o).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15, "{r}");
        assert_eq!(r, sbp_identity_residual(&o).unwrap());
    }

    #[test]
    fn residual_rejects_dimension_mismatch() {
        let (_, mut o) = ops(4, 1.0, SbpFamily::PaperFirstOrder);
        o.p_left.pop();
        assert!(matches!(sbp_identity_residual(&o), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn constants_are_annihilated_exactly() {
        for family in SbpFamily::ALL {
            let (axis, o) = ops(9, 0.3, family);
            let (dm, dp) = accuracy_profile(&o, &axis, 0).unwrap();
            assert!(dm.iter().chain(&dp).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn quadratic_error_sits_in_the_closure_rows() {
        let (axis, o) = ops(8, 1.0, SbpFamily::PaperFirstOrder);
        let (dm, dp) = accuracy_profile(&o, &axis, 2).unwrap();
        assert!(dp.iter().all(|v| v.abs() < 1e-12));
        for (i, v) in dm.iter().enumerate() {
            if i == 0 || i == 8 {
                assert!((v.abs() - 2.0).abs() < 1e-12, "row {i}: {v}");
            } else {
                assert!(v.abs() < 1e-12, "row {i}: {v}");
            }
        }
    }

    #[test]
    fn stencil_and_dense_agree_under_column_probing() {
        let (_, o) = ops(7, 0.2, SbpFamily::TrapezoidSecondOrder);
        for (st, dense) in [(&o.d_plus_stencil, &o.d_plus), (&o.d_minus_stencil, &o.d_minus)] {
            for j in 0..st.n_in {
                let mut e = vec![0.0; st.n_in];
                e[j] = 1.0;
                let mut col = vec![0.0; st.n_out()];
                st.apply(&e, &mut col);
                for i in 0..st.n_out() {
                    assert_eq!(col[i], dense[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in SbpFamily::ALL {
            assert_eq!(f.as_str().parse::<SbpFamily>().unwrap(), f);
        }
        assert!("fourth-order".parse::<SbpFamily>().is_err());
    }

    proptest! {
        #[test]
        fn identity_and_accuracy_hold(n in 2usize..=128, h in 1e-3f64..1.0, second in any::<bool>()) {
            let family = if second { SbpFamily::TrapezoidSecondOrder } else { SbpFamily::PaperFirstOrder };
            let (axis, o) = ops(n, h, family);
            prop_assert!(sbp_identity_residual(&o).unwrap() <= 1e-14);
            prop_assert!(accuracy_residuals(&o, &axis).unwrap().max() <= 1e-13 / h);
            prop_assert!(o.p_plus.iter().chain(&o.p_minus).all(|&w| w > 0.0));
            prop_assert_eq!(o.p_left.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(o.p_right.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(o.p_left.iter().filter(|v| **v != 0.0).count(), 2);
        }

        #[test]
        fn mirror_symmetry(n in 2usize..=40, second in any::<bool>()) {
            let family = if second { SbpFamily::TrapezoidSecondOrder } else { SbpFamily::PaperFirstOrder };
            let (_, o) = ops(n, 1.0, family);
            for i in 0..n {
                for j in 0..=n {
                    prop_assert_eq!(o.d_plus[(n - 1 - i, n - j)], -o.d_plus[(i, j)]);
                    prop_assert_eq!(o.d_minus[(n - j, n - 1 - i)], -o.d_minus[(j, i)]);
                }
                prop_assert_eq!(o.p_left[n - 1 - i], o.p_right[i]);
            }
        }

        #[test]
        fn q_is_invariant_under_h_scaling(n in 2usize..=30, s in 0.1f64..10.0) {
            let (_, a) = ops(n, 1.0, SbpFamily::PaperFirstOrder);
            let (_, b) = ops(n, s, SbpFamily::PaperFirstOrder);
            let (qa, qb) = (a.q_minus() + a.q_plus().transpose(), b.q_minus() + b.q_plus().transpose());
            prop_assert!((qa - qb).amax() <= 1e-14);
            prop_assert!(b.p_minus.iter().zip(&a.p_minus).all(|(x, y)| (x - s * y).abs() <= 1e-14 * s));
        }
    }
}
