//! Leapfrog time marching and time-step estimation.
//!
//! The state holds `Ezⁿ` and `Hⁿ⁺¹ᐟ²`. One step advances Ez with the H curl and
//! penalties evaluated at `tⁿ⁺¹ᐟ²`, then H with the new Ez.

use crate::boundary::{adjacent_ez_index, mur_coefficient, mur_range, wave_speed, BoundaryKind};
use crate::error::{Error, Result};
use crate::grid::{Edge, FieldState, EPS0};
use crate::source::Waveform;
use crate::system::{
    apply_operator, e_rate_raw, fill_e_traces, fill_h_traces, h_rate_raw, EdgeRole, InterfaceTraces, OperatorWorkspace, RhsMode, SimSystem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Soft source contribution `amplitude·w(t)·weight` added to one raw Ez rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub block: usize,
    pub index: usize,
    pub weight: f64,
    pub amplitude: f64,
    pub waveform: Waveform,
    /// Source is switched off from this time on.
    pub t_off: Option<f64>,
}

impl Injection {
    /// Point line-current source at a node: weight `1/(P_x·P_y)`.
    pub fn point(sys: &SimSystem, block: usize, ix: usize, iy: usize, amplitude: f64, waveform: Waveform) -> Self {
        let b = &sys.blocks[block];
        Injection {
            block,
            index: b.ez_index(ix, iy),
            weight: 1.0 / (b.ops_x.p_minus[ix] * b.ops_y.p_minus[iy]),
            amplitude,
            waveform,
            t_off: None,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.t_off {
            Some(off) if t >= off => 0.0,
            _ => self.amplitude * self.waveform.eval(t) * self.weight,
        }
    }
}

#[derive(Debug, Clone)]
struct MurEdge {
    edge: Edge,
    range: std::ops::Range<usize>,
    k: Vec<f64>,
    prev_edge: Vec<f64>,
    prev_adj: Vec<f64>,
}

#[derive(Debug, Clone)]
struct BlockWork {
    rate_ez: Vec<f64>,
    rate_hx: Vec<f64>,
    rate_hy: Vec<f64>,
    ca: Vec<f64>,
    cb: Vec<f64>,
    dt_inv_mu: f64,
    mur: Vec<MurEdge>,
    sources: Vec<(usize, f64)>,
}

/// Precomputed update coefficients and scratch buffers for a fixed `dt`.
pub struct Stepper {
    pub dt: f64,
    pub t: f64,
    pub step_index: u64,
    work: Vec<BlockWork>,
    traces: Vec<InterfaceTraces>,
    pub injections: Vec<Injection>,
}

impl Stepper {
    pub fn new(sys: &SimSystem, dt: f64, injections: Vec<Injection>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        for inj in &injections {
            if inj.block >= sys.blocks.len() || inj.index >= sys.blocks[inj.block].n_ez() {
                return Err(Error::InvalidArgument("source outside the mesh".into()));
            }
        }
        let work = sys
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                let m = &b.materials;
                let (ca, cb): (Vec<f64>, Vec<f64>) = (0..b.n_ez())
                    .map(|i| {
                        let eps = EPS0 * m.eps_rel[i];
                        let half = m.sigma_e[i] * dt / (2.0 * eps);
                        ((1.0 - half) / (1.0 + half), dt / eps / (1.0 + half))
                    })
                    .unzip();
                let is_mur = |e: Edge| sys.roles[bi][e.index()] == EdgeRole::Outer(BoundaryKind::Mur);
                let x_mur = [is_mur(Edge::W), is_mur(Edge::E)];
                let mur = Edge::ALL
                    .iter()
                    .filter(|&&e| is_mur(e))
                    .map(|&edge| {
                        let n = b.edge_len(edge);
                        let k = (0..n).map(|t| mur_coefficient(wave_speed(b, b.edge_ez_index(edge, t)), dt, b.h)).collect();
                        MurEdge { edge, range: mur_range(b, edge, x_mur), k, prev_edge: vec![0.0; n], prev_adj: vec![0.0; n] }
                    })
                    .collect();
                BlockWork {
                    rate_ez: vec![0.0; b.n_ez()],
                    rate_hx: vec![0.0; b.n_hx()],
                    rate_hy: vec![0.0; b.n_hy()],
                    ca,
                    cb,
                    dt_inv_mu: dt / m.permeability(),
                    mur,
                    sources: Vec::new(),
                }
            })
            .collect();
        Ok(Stepper {
            dt,
            t: 0.0,
            step_index: 0,
            work,
            traces: sys.interfaces.iter().map(InterfaceTraces::for_coupling).collect(),
            injections,
        })
    }

    /// Advances all blocks by one step.
    pub fn step(&mut self, sys: &SimSystem, states: &mut [FieldState]) -> Result<()> {
        let t_mid = self.t + 0.5 * self.dt;
        for w in &mut self.work {
            w.sources.clear();
        }
        for inj in &self.injections {
            let v = inj.value(t_mid);
            if v != 0.0 {
                self.work[inj.block].sources.push((inj.index, v));
            }
        }

        fill_h_traces(sys, states, &mut self.traces);
        let traces = &self.traces;
        let bad_e = states
            .par_iter_mut()
            .zip(self.work.par_iter_mut())
            .enumerate()
            .map(|(b, (s, w))| {
                let block = &sys.blocks[b];
                for m in &mut w.mur {
                    for t in m.range.clone() {
                        m.prev_edge[t] = s.ez[block.edge_ez_index(m.edge, t)];
                        m.prev_adj[t] = s.ez[adjacent_ez_index(block, m.edge, t)];
                    }
                }
                e_rate_raw(sys, b, s, traces, RhsMode::STEPPING, &mut w.rate_ez);
                for &(i, v) in &w.sources {
                    w.rate_ez[i] += v;
                }
                let mut acc = 0.0;
                for i in 0..s.ez.len() {
                    let v = w.ca[i] * s.ez[i] + w.cb[i] * w.rate_ez[i];
                    s.ez[i] = v;
                    acc += v;
                }
                for (v, &m) in s.ez.iter_mut().zip(&block.materials.pec_mask) {
                    if m {
                        *v = 0.0;
                    }
                }
                for m in &w.mur {
                    for t in m.range.clone() {
                        let i0 = block.edge_ez_index(m.edge, t);
                        let i1 = adjacent_ez_index(block, m.edge, t);
                        s.ez[i0] = m.prev_adj[t] + m.k[t] * (s.ez[i1] - m.prev_edge[t]);
                    }
                }
                !acc.is_finite()
            })
            .collect::<Vec<bool>>();
        self.check(sys, &bad_e)?;

        fill_e_traces(sys, states, &mut self.traces);
        let traces = &self.traces;
        let bad_h = states
            .par_iter_mut()
            .zip(self.work.par_iter_mut())
            .enumerate()
            .map(|(b, (s, w))| {
                h_rate_raw(sys, b, &s.ez, traces, RhsMode::STEPPING, &mut w.rate_hx, &mut w.rate_hy);
                let mut acc = 0.0;
                for (h, r) in s.hx.iter_mut().zip(&w.rate_hx).chain(s.hy.iter_mut().zip(&w.rate_hy)) {
                    *h += w.dt_inv_mu * r;
                    acc += *h;
                }
                !acc.is_finite()
            })
            .collect::<Vec<bool>>();
        self.check(sys, &bad_h)?;

        self.step_index += 1;
        self.t = self.step_index as f64 * self.dt;
        Ok(())
    }

    fn check(&self, sys: &SimSystem, bad: &[bool]) -> Result<()> {
        match bad.iter().position(|&b| b) {
            Some(b) => Err(Error::NumericalBlowup { step: self.step_index + 1, block: sys.blocks[b].id.clone() }),
            None => Ok(()),
        }
    }
}

/// Which spatial operator the time-step estimate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    /// All penalties; Mur edges closed by PMC penalties.
    Full,
    /// Bare curl operators with no boundary or interface terms.
    InteriorOnly,
}

const ESTIMATE_SEED: u64 = 0x5bd1_e995;

fn e_slots(sys: &SimSystem) -> Vec<std::ops::Range<usize>> {
    (0..sys.blocks.len()).map(|b| sys.offset(b)..sys.offset(b) + sys.blocks[b].n_ez()).collect()
}

/// `y = −A_EH·A_HE·x` on the E part of the concatenated state.
struct CurlCurl<'a> {
    sys: &'a SimSystem,
    ws: OperatorWorkspace,
    tmp: Vec<f64>,
    mode: RhsMode,
}

impl<'a> CurlCurl<'a> {
    fn new(sys: &'a SimSystem, mode: RhsMode) -> Self {
        CurlCurl { sys, ws: OperatorWorkspace::new(sys), tmp: vec![0.0; sys.dim()], mode }
    }

    fn apply(&mut self, x: &[f64], y: &mut [f64]) {
        apply_operator(self.sys, &mut self.ws, x, &mut self.tmp, self.mode, false);
        for r in e_slots(self.sys) {
            self.tmp[r].iter_mut().for_each(|v| *v = 0.0);
        }
        apply_operator(self.sys, &mut self.ws, &self.tmp, y, self.mode, false);
        y.iter_mut().for_each(|v| *v = -*v);
        let mut h_start = 0;
        for r in e_slots(self.sys) {
            y[h_start..r.start].iter_mut().for_each(|v| *v = 0.0);
            h_start = r.end;
        }
        y[h_start..].iter_mut().for_each(|v| *v = 0.0);
    }
}

fn random_e_vector(sys: &SimSystem) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(ESTIMATE_SEED);
    let mut x = vec![0.0; sys.dim()];
    for (b, r) in e_slots(sys).into_iter().enumerate() {
        for (k, i) in r.enumerate() {
            let masked = sys.blocks[b].materials.pec_mask[k];
            x[i] = if masked { 0.0 } else { rng.gen_range(-1.0..1.0) };
        }
    }
    x
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
pub fn tridiagonal_max_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for i in 0..m {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < m { beta[i].abs() } else { 0.0 };
        hi = hi.max(alpha[i] + r);
        lo = lo.min(alpha[i] - r);
    }
    // number of eigenvalues strictly below x
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..m {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { 0.0 };
            q = alpha[i] - x - if i > 0 { b2 / q } else { 0.0 };
            if q == 0.0 {
                q = f64::MIN_POSITIVE;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) == m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `λ_max(−A_EH·A_HE)` by Lanczos in the E-energy inner product.
pub fn curl_curl_lambda_max(sys: &SimSystem) -> Result<f64> {
    const MAX_ITER: usize = 4000;
    let w = sys.energy_weights();
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(&w).map(|((x, y), z)| x * y * z).sum() };
    let mut op = CurlCurl::new(sys, RhsMode::ANALYSIS);
    let mut v = random_e_vector(sys);
    let nv = dot(&v, &v).sqrt();
    if nv == 0.0 {
        return Err(Error::EstimationFailed("no free Ez unknowns".into()));
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut v_prev = vec![0.0; v.len()];
    let mut u = vec![0.0; v.len()];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut last = f64::NAN;
    let mut beta_prev = 0.0;
    for j in 0..MAX_ITER {
        op.apply(&v, &mut u);
        let a = dot(&u, &v);
        for i in 0..u.len() {
            u[i] -= a * v[i] + beta_prev * v_prev[i];
        }
        let b = dot(&u, &u).sqrt();
        alpha.push(a);
        if (j + 1) % 10 == 0 || b == 0.0 {
            let theta = tridiagonal_max_eigenvalue(&alpha, &beta);
            if b <= 1e-13 * theta.abs() || (theta - last).abs() <= 1e-11 * theta.abs() {
                if theta > 0.0 && theta.is_finite() {
                    return Ok(theta);
                }
                return Err(Error::EstimationFailed(format!("non-positive spectral bound {theta}")));
            }
            last = theta;
        }
        beta.push(b);
        std::mem::swap(&mut v_prev, &mut v);
        for i in 0..u.len() {
            v[i] = u[i] / b;
        }
        beta_prev = b;
    }
    Err(Error::EstimationFailed(format!("Lanczos did not converge in {MAX_ITER} iterations")))
}

/// Dominant eigenvalue magnitude of the penalty-free curl-curl map by power iteration.
pub fn interior_lambda_max(sys: &SimSystem) -> Result<f64> {
    const MAX_ITER: usize = 60_000;
    let mut op = CurlCurl::new(sys, RhsMode::INTERIOR);
    let norm = |a: &[f64]| a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = random_e_vector(sys);
    let n0 = norm(&x);
    x.iter_mut().for_each(|v| *v /= n0);
    let mut y = vec![0.0; x.len()];
    let mut checkpoint = f64::NAN;
    for j in 0..MAX_ITER {
        op.apply(&x, &mut y);
        let lam = norm(&y);
        if !(lam > 0.0) || !lam.is_finite() {
            return Err(Error::EstimationFailed(format!("power iteration produced {lam}")));
        }
        for (a, b) in x.iter_mut().zip(&y) {
            *a = b / lam;
        }
        if (j + 1) % 50 == 0 {
            if (lam - checkpoint).abs() <= 1e-9 * lam {
                return Ok(lam);
            }
            checkpoint = lam;
        }
    }
    Err(Error::EstimationFailed(format!("power iteration did not converge in {MAX_ITER} iterations")))
}

/// `safety·2/ω_max` with `ω_max² = λ_max(−A_EH·A_HE)`.
pub fn estimate_max_timestep(sys: &SimSystem, safety: f64) -> Result<f64> {
    estimate_max_timestep_with(sys, safety, EstimateMode::Full)
}

pub fn estimate_max_timestep_with(sys: &SimSystem, safety: f64, mode: EstimateMode) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidArgument(format!("safety must lie in (0, 1], got {safety}")));
    }
    let lam = match mode {
        EstimateMode::Full => curl_curl_lambda_max(sys)?,
        EstimateMode::InteriorOnly => interior_lambda_max(sys)?,
    };
    Ok(safety * 2.0 / lam.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{MeshBlock, C0};
    use crate::sbp::SbpFamily;

    #[test]
    fn tridiagonal_bisection() {
        // eigenvalues of tridiag(-1, 2, -1) of size 5: 2 - 2cos(kπ/6)
        let a = vec![2.0; 5];
        let b = vec![-1.0; 4];
        let top = tridiagonal_max_eigenvalue(&a, &b);
        assert!((top - (2.0 + 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn zero_state_stays_zero() {
        let b = MeshBlock::new("b", (0.0, 0.0), 6, 5, 0.1, SbpFamily::PaperFirstOrder).unwrap();
        let sys = SimSystem::single(b, BoundaryKind::Pec).unwrap();
        let mut s = sys.zero_states();
        let mut st = Stepper::new(&sys, 1e-10, vec![]).unwrap();
        for _ in 0..10 {
            st.step(&sys, &mut s).unwrap();
        }
        assert!(s[0].ez.iter().chain(&s[0].hx).chain(&s[0].hy).all(|&v| v == 0.0));
    }

    #[test]
    fn full_estimate_is_below_yee_bound() {
        let b = MeshBlock::new("b", (0.0, 0.0), 20, 10, 0.05, SbpFamily::PaperFirstOrder).unwrap();
        let sys = SimSystem::single(b, BoundaryKind::Pec).unwrap();
        let dt = estimate_max_timestep(&sys, 1.0).unwrap();
        let yee = 0.05 / (C0 * 2f64.sqrt());
        assert!(dt < yee && dt > 0.4 * yee, "{} {}", dt, yee);
        let half = estimate_max_timestep(&sys, 0.5).unwrap();
        assert_eq!(half, 0.5 * dt);
        assert!(estimate_max_timestep(&sys, 0.0).is_err());
    }

    #[test]
    fn blowup_is_reported() {
        let b = MeshBlock::new("b", (0.0, 0.0), 6, 6, 0.1, SbpFamily::PaperFirstOrder).unwrap();
        let sys = SimSystem::single(b, BoundaryKind::Pec).unwrap();
        let mut s = sys.zero_states();
        s[0].ez[20] = 1.0;
        let mut st = Stepper::new(&sys, 1e-9, vec![]).unwrap();
        let mut err = None;
        for _ in 0..10_000 {
            if let Err(e) = st.step(&sys, &mut s) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(Error::NumericalBlowup { .. })));
    }
}
