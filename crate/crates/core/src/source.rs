//! Excitation waveforms.

/// Default Gaussian width for a bandwidth `f_bw`: the spectrum falls to 10⁻³ at `f_bw`.
pub fn gaussian_tau(f_bw: f64) -> f64 {
    (1000f64).ln().sqrt() / (std::f64::consts::PI * f_bw)
}

pub fn gaussian_pulse(t: f64, t0: f64, tau: f64) -> f64 {
    let u = (t - t0) / tau;
    (-u * u).exp()
}

/// `r(t)·sin(2πf₀t)` with `r = 3s² − 2s³`, `s = t·f₀/n`, rising over `n` periods.
pub fn ramped_sine(t: f64, f0: f64, n_ramp_periods: u32) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let phase = (2.0 * std::f64::consts::PI * f0 * t).sin();
    let s = t * f0 / n_ramp_periods.max(1) as f64;
    if s >= 1.0 {
        phase
    } else {
        smoothstep(s) * phase
    }
}

/// Ramp envelope `3s² − 2s³` on `[0, 1]`.
pub fn smoothstep(s: f64) -> f64 {
    s * s * (3.0 - 2.0 * s)
}

pub fn smoothstep_slope(s: f64) -> f64 {
    6.0 * s * (1.0 - s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    Gaussian { t0: f64, tau: f64 },
    RampedSine { f0: f64, n_ramp_periods: u32 },
}

impl Waveform {
    pub fn gaussian_for_bandwidth(f_bw: f64) -> Self {
        let tau = gaussian_tau(f_bw);
        Waveform::Gaussian { t0: 4.0 * tau, tau }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Waveform::Gaussian { t0, tau } => gaussian_pulse(t, t0, tau),
            Waveform::RampedSine { f0, n_ramp_periods } => ramped_sine(t, f0, n_ramp_periods),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_defaults() {
        let tau = gaussian_tau(0.9e9);
        assert!((tau - 9.297e-10).abs() < 5e-13);
        assert_eq!(gaussian_pulse(4.0 * tau, 4.0 * tau, tau), 1.0);
        let v = gaussian_pulse(0.0, 4.0 * tau, tau);
        assert!((v - (-16f64).exp()).abs() < 1e-22);
        assert!((v - 1.13e-7).abs() < 1e-9);
    }

    #[test]
    fn ramp_junction_is_smooth() {
        let (f0, n) = (7.5e9, 3);
        assert_eq!(ramped_sine(0.0, f0, n), 0.0);
        let tj = n as f64 / f0;
        for &t in &[tj, tj * 1.3, tj * 7.01] {
            assert_eq!(ramped_sine(t, f0, n), (2.0 * std::f64::consts::PI * f0 * t).sin());
        }
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep_slope(1.0), 0.0);
        let d = 1e-6 / f0;
        let left = ramped_sine(tj - d, f0, n);
        let right = ramped_sine(tj + d, f0, n);
        let mid = ramped_sine(tj, f0, n);
        assert!((left - mid).abs() < 1e-4 && (right - mid).abs() < 1e-4);
        let sl = (mid - left) / d;
        let sr = (right - mid) / d;
        assert!(((sl - sr) / (2.0 * std::f64::consts::PI * f0)).abs() < 1e-5);
    }
}
