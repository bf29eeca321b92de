//! Small helpers shared by the numerical modules.

use rug::{Float, Integer};

/// Working bits needed to print `digits` significant decimal digits.
pub fn bits_for_digits(digits: usize) -> u32 {
    ((digits as f64) * std::f64::consts::LOG2_10).ceil() as u32 + 16
}

/// Decimal string with `digits` significant digits.
pub fn decimal(x: &Float, digits: usize) -> String {
    x.to_string_radix(10, Some(digits.max(1)))
}

/// Natural logarithm of a positive big integer, valid beyond the f64 range.
pub fn integer_ln(n: &Integer) -> f64 {
    assert!(*n > 0, "log of non-positive integer");
    let bits = n.significant_bits();
    if bits < 1000 {
        return n.to_f64().ln();
    }
    let shift = bits - 64;
    let top = Integer::from(n >> shift).to_f64();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_of_huge_integer() {
        let n = Integer::from(Integer::u_pow_u(3, 5000));
        let expected = 5000.0 * 3f64.ln();
        assert!(rel_diff(integer_ln(&n), expected) < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 0.5).collect();
        let (s, c) = linear_fit(&x, &y).unwrap();
        assert!((s + 2.0).abs() < 1e-12 && (c - 0.5).abs() < 1e-12);
    }
}
