//! Spectrum and SAR post-processing.

use proptest::prelude::*;
use sbp_fdtd::grid::MaterialMap;
use sbp_fdtd::scenario::{compute_sar, dft_spectrum, find_peaks, linear_grid, FieldNorm, SarAccumulator};
use std::f64::consts::PI;

/// Independent oracle: every phase from its own `sin_cos`.
fn direct_dft(x: &[f64], dt: f64, f: f64, window: bool) -> f64 {
    let n = x.len();
    let (mut re, mut im) = (0.0, 0.0);
    for (k, &v) in x.iter().enumerate() {
        let w = if window { 0.5 * (1.0 - (2.0 * PI * k as f64 / (n - 1) as f64).cos()) } else { 1.0 };
        let (s, c) = (-2.0 * PI * f * k as f64 * dt).sin_cos();
        re += w * v * c;
        im += w * v * s;
    }
    dt * re.hypot(im)
}

fn top_two(f: &[f64], mags: &[f64], threshold: f64) -> Vec<f64> {
    let mut p = find_peaks(f, mags, threshold);
    p.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    let mut out: Vec<f64> = p.iter().take(2).map(|p| p.f).collect();
    out.sort_by(f64::total_cmp);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectrum_matches_direct_sum_and_is_homogeneous(
        x in proptest::collection::vec(-1.0f64..1.0, 2..400), a in -5.0f64..5.0, window in any::<bool>(), f_max in 1e6f64..4e8
    ) {
        let dt = 1e-9;
        let grid = linear_grid(0.0, f_max, 17).unwrap();
        let m = dft_spectrum(&x, dt, &grid, window).unwrap();
        let scale = dt * x.len() as f64;
        for (f, v) in grid.iter().zip(&m) {
            prop_assert!((v - direct_dft(&x, dt, *f, window)).abs() <= 1e-11 * scale);
        }
        let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
        let ma = dft_spectrum(&ax, dt, &grid, window).unwrap();
        for (p, q) in ma.iter().zip(&m) {
            prop_assert!((p - a.abs() * q).abs() <= 1e-12 * scale * a.abs().max(1.0));
        }
    }

    #[test]
    fn spectrum_of_a_sum_obeys_the_triangle_inequality(
        x in proptest::collection::vec(-1.0f64..1.0, 64), y in proptest::collection::vec(-1.0f64..1.0, 64)
    ) {
        let dt = 1e-9;
        let grid = linear_grid(1e6, 4e8, 33).unwrap();
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let (mx, my, ms) = (
            dft_spectrum(&x, dt, &grid, false).unwrap(),
            dft_spectrum(&y, dt, &grid, false).unwrap(),
            dft_spectrum(&s, dt, &grid, false).unwrap(),
        );
        for i in 0..grid.len() {
            prop_assert!(ms[i] <= mx[i] + my[i] + 1e-12 && ms[i] >= (mx[i] - my[i]).abs() - 1e-12);
        }
    }

    #[test]
    fn sar_is_a_nodewise_map(
        field in proptest::collection::vec(0.0f64..100.0, 2..60), split in 1usize..59, rms in any::<bool>(), seed in 0.0f64..1.0
    ) {
        prop_assume!(split < field.len());
        let n = field.len();
        let mut mats = MaterialMap::vacuum(n);
        mats.sigma_e = (0..n).map(|i| ((i as f64 + seed) * 0.37) % 1.0).collect();
        mats.density = (0..n).map(|i| 900.0 + ((i as f64 * 1.7 + seed) % 1.0) * 1200.0).collect();
        let norm = if rms { FieldNorm::Rms } else { FieldNorm::Peak };
        let whole = compute_sar(&field, &mats, norm).unwrap();
        let part = |r: std::ops::Range<usize>| {
            let mut m = MaterialMap::vacuum(r.len());
            m.sigma_e = mats.sigma_e[r.clone()].to_vec();
            m.density = mats.density[r.clone()].to_vec();
            compute_sar(&field[r], &m, norm).unwrap()
        };
        let mut joined = part(0..split);
        joined.extend(part(split..n));
        prop_assert_eq!(whole, joined);
    }
}

#[test]
fn windowing_keeps_resolved_peaks_in_place() {
    let dt = 1e-9;
    let x: Vec<f64> = (0..3000)
        .map(|k| {
            let t = k as f64 * dt;
            (2.0 * PI * 6.0e7 * t).sin() + 0.6 * (2.0 * PI * 1.43e8 * t + 0.4).cos()
        })
        .collect();
    let grid = linear_grid(1e7, 2.5e8, 2401).unwrap();
    let bin = grid[1] - grid[0];
    let plain = top_two(&grid, &dft_spectrum(&x, dt, &grid, false).unwrap(), 0.3);
    let hann = top_two(&grid, &dft_spectrum(&x, dt, &grid, true).unwrap(), 0.3);
    assert_eq!(plain.len(), 2);
    assert_eq!(hann.len(), 2);
    for (p, q) in plain.iter().zip(&hann) {
        assert!((p - q).abs() <= bin * 1.000001, "{p} vs {q}");
    }
}

#[test]
fn rms_and_peak_norms_agree_for_a_sine() {
    let mut acc = SarAccumulator::new(1);
    let steps = 4000;
    for k in 0..steps {
        acc.record(&[2.0 * (2.0 * PI * 10.0 * k as f64 / steps as f64).sin()]);
    }
    let mut mats = MaterialMap::vacuum(1);
    mats.sigma_e = vec![0.04];
    mats.density = vec![1046.0];
    let peak = compute_sar(&acc.field(FieldNorm::Peak), &mats, FieldNorm::Peak).unwrap()[0];
    let rms = compute_sar(&acc.field(FieldNorm::Rms), &mats, FieldNorm::Rms).unwrap()[0];
    let exact = 0.04 * 4.0 / (2.0 * 1046.0);
    assert!((peak / exact - 1.0).abs() <= 1e-6);
    assert!((rms / exact - 1.0).abs() <= 1e-9);
}
