//! Text formatting shared by every file writer.
//!
//! All numeric output goes through [`fmt_f64`], which emits the shortest decimal
//! string that parses back to the identical `f64`.

use nalgebra::DMatrix;
use std::fmt::Write;

/// Shortest round-trip decimal representation; switches to exponent form for
/// very small or very large magnitudes to keep lines short.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Plain-text matrix listing: a `# name rows cols` header followed by one
/// whitespace-separated row per line.
pub fn dump_matrix(name: &str, m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {name} {} {}", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_f64(m[(r, c)])).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

/// Inverse of [`dump_matrix`] for a single listing.
pub fn parse_matrix(text: &str) -> Option<(String, DMatrix<f64>)> {
    let mut lines = text.lines();
    let header = lines.next()?.strip_prefix("# ")?;
    let mut parts = header.split_whitespace();
    let name = parts.next()?.to_string();
    let rows: usize = parts.next()?.parse().ok()?;
    let cols: usize = parts.next()?.parse().ok()?;
    let mut data = Vec::with_capacity(rows * cols);
    for line in lines.take(rows) {
        for tok in line.split_whitespace() {
            data.push(tok.parse::<f64>().ok()?);
        }
    }
    if data.len() != rows * cols {
        return None;
    }
    Some((name, DMatrix::from_row_slice(rows, cols, &data)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn fmt_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = fmt_f64(v);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn matrix_listing_round_trips() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 1.0 / 3.0, 0.0, 2e-17, 7.25]);
        let text = dump_matrix("d_plus", &m);
        assert!(text.starts_with("# d_plus 2 3\n"));
        let (name, back) = parse_matrix(&text).unwrap();
        assert_eq!(name, "d_plus");
        assert_eq!(back, m);
    }
}
