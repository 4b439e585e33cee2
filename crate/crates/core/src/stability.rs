//! Spectral diagnostics of the semi-discrete operator and the one-step map.

use crate::error::{Error, Result};
use crate::integrator::Stepper;
use crate::system::{assemble_global_matrix, operator_triplets, skewness_residual, RhsMode, SimSystem, DEFAULT_DENSE_CAP};
use nalgebra::DMatrix;

/// Largest size handed to the dense nonsymmetric eigensolver.
pub const DEFAULT_EIGEN_CAP: usize = 1600;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    /// Eigenvalues of the assembled matrices.
    Dense,
    /// Upper bound on the real parts from the energy-weighted symmetric part.
    NumericalRangeBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub dim: usize,
    pub method: SpectralMethod,
    /// Largest real part of the operator's eigenvalues, 1/s (a bound for `NumericalRangeBound`).
    pub max_real_part: f64,
    /// `c/h_min`, the natural rate scale.
    pub rate_scale: f64,
    /// Extremes of the one-step map's eigenvalue magnitudes (dense method only).
    pub max_amplification_magnitude: Option<f64>,
    pub min_amplification_magnitude: Option<f64>,
    /// `max|W·A + Aᵀ·W|` relative to `(c/h)·max W`.
    pub skewness: f64,
}

impl SpectralReport {
    pub fn scaled_max_real_part(&self) -> f64 {
        self.max_real_part / self.rate_scale
    }
}

/// Report with the default caps; fails above the dense assembly cap.
pub fn spectral_stability_report(sys: &SimSystem, dt: f64) -> Result<SpectralReport> {
    spectral_stability_report_with(sys, dt, DEFAULT_DENSE_CAP, DEFAULT_EIGEN_CAP)
}

pub fn spectral_stability_report_with(sys: &SimSystem, dt: f64, dense_cap: usize, eigen_cap: usize) -> Result<SpectralReport> {
    let n = sys.dim();
    if n > dense_cap {
        return Err(Error::TooLargeForDense { dim: n, cap: dense_cap });
    }
    let triplets = operator_triplets(sys, RhsMode::ANALYSIS, true);
    let skewness = skewness_residual(sys, &triplets);
    let w = sys.energy_weights();
    let rate_scale = sys.rate_scale();
    if n > eigen_cap {
        return Ok(SpectralReport {
            dim: n,
            method: SpectralMethod::NumericalRangeBound,
            max_real_part: symmetric_part_bound(&w, &triplets),
            rate_scale,
            max_amplification_magnitude: None,
            min_amplification_magnitude: None,
            skewness,
        });
    }
    let mut a = assemble_global_matrix(sys, dense_cap)?;
    balance(&mut a, &w, 1.0 / rate_scale);
    let max_real_part = eigenvalues(&a)?.iter().map(|z| z.0).fold(f64::NEG_INFINITY, f64::max) * rate_scale;

    let mut m = companion_matrix(sys, dt)?;
    balance(&mut m, &w, 1.0);
    let mags: Vec<f64> = eigenvalues(&m)?.iter().map(|z| z.0.hypot(z.1)).collect();
    Ok(SpectralReport {
        dim: n,
        method: SpectralMethod::Dense,
        max_real_part,
        rate_scale,
        max_amplification_magnitude: Some(mags.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        min_amplification_magnitude: Some(mags.iter().copied().fold(f64::INFINITY, f64::min)),
        skewness,
    })
}

/// Eigenvalues `(re, im)` of a dense real matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let m = faer::Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let ev = m.eigenvalues().map_err(|e| Error::EstimationFailed(format!("eigenvalue solver failed: {e:?}")))?;
    Ok(ev.iter().map(|z| (z.re, z.im)).collect())
}

/// `s·W^{½}·M·W^{-½}`, a similarity that leaves eigenvalues (scaled by `s`) intact.
fn balance(m: &mut DMatrix<f64>, w: &[f64], s: f64) {
    let r: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= s * r[i] / r[j];
        }
    }
}

/// Gershgorin bound on `λ_max` of the symmetric part of `W^{½}AW^{-½}`, which
/// bounds every eigenvalue's real part of `A`.
pub fn symmetric_part_bound(w: &[f64], triplets: &[(usize, usize, f64)]) -> f64 {
    let mut sym: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * triplets.len());
    for &(i, j, a) in triplets {
        let b = 0.5 * a * (w[i] / w[j]).sqrt();
        sym.push((i, j, b));
        sym.push((j, i, b));
    }
    sym.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
    let n = w.len();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut k = 0;
    while k < sym.len() {
        let (i, j) = (sym[k].0, sym[k].1);
        let mut v = 0.0;
        while k < sym.len() && sym[k].0 == i && sym[k].1 == j {
            v += sym[k].2;
            k += 1;
        }
        if i == j {
            diag[i] += v;
        } else {
            off[i] += v.abs();
        }
    }
    (0..n).map(|i| diag[i] + off[i]).fold(f64::NEG_INFINITY, f64::max)
}

/// One-step leapfrog map with sources off, by column probing of the stepper.
pub fn companion_matrix(sys: &SimSystem, dt: f64) -> Result<DMatrix<f64>> {
    let n = sys.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut stepper = Stepper::new(sys, dt, vec![])?;
    let mut states = sys.zero_states();
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = 1.0;
        sys.unflatten_into(&x, &mut states);
        x[j] = 0.0;
        stepper.step(sys, &mut states)?;
        let y = sys.flatten(&states);
        m.column_mut(j).copy_from_slice(&y);
    }
    Ok(m)
}
