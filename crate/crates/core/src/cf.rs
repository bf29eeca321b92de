//! Continued fractions, return times and best-approximation distances.
//!
//! A [`ContinuedFraction`] tabulates `a_1..a_N` together with the convergents
//! `p_n/q_n` and the distances `δ_n = |q_n α − p_n|`. The number `α` itself is
//! pinned down by continuing the quotients with a periodic tail (all ones
//! unless stated otherwise), which makes it a quadratic irrational: every
//! `δ_n` is then held exactly in `Q(√d)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric;
use crate::quadratic::QuadraticIrrational;

#[derive(Clone, Debug)]
pub struct ContinuedFraction {
    quotients: Vec<u64>,
    tail: Vec<u64>,
    // index 0 holds the n = -1 entry
    p: Vec<Integer>,
    q: Vec<Integer>,
    delta: Vec<QuadraticIrrational>,
    alpha: QuadraticIrrational,
}

impl ContinuedFraction {
    /// Convergents of `[a_1, ..., a_depth, 1, 1, ...]`.
    pub fn new(quotients: &[u64], depth: usize) -> Result<Self> {
        Self::with_tail(quotients, depth, &[1])
    }

    /// Convergents of `[a_1, ..., a_depth, w, w, ...]` with `w` the periodic tail word.
    pub fn with_tail(quotients: &[u64], depth: usize, tail: &[u64]) -> Result<Self> {
        if depth > quotients.len() {
            return Err(Error::InvalidInput(format!(
                "depth {depth} exceeds the {} quotients supplied",
                quotients.len()
            )));
        }
        if let Some(pos) = quotients[..depth].iter().position(|&a| a == 0) {
            return Err(Error::InvalidInput(format!("quotient a_{} is not positive", pos + 1)));
        }
        if tail.is_empty() || tail.contains(&0) {
            return Err(Error::InvalidInput("tail word must be non-empty with positive entries".into()));
        }
        let quotients = quotients[..depth].to_vec();
        let (p, q) = recurrences(&quotients);

        let y = periodic_value(tail);
        let d = y.radicand().clone();
        let n = depth + 1;
        let num = &QuadraticIrrational::from_rational(Rational::from(&p[n]), &d)
            + &y.mul_int(&p[n - 1]);
        let den = &QuadraticIrrational::from_rational(Rational::from(&q[n]), &d)
            + &y.mul_int(&q[n - 1]);
        let alpha = num.div(&den);

        let mut delta = Vec::with_capacity(depth + 2);
        delta.push(QuadraticIrrational::from_int(1, &d));
        delta.push(alpha.clone());
        for (k, &a) in quotients.iter().enumerate() {
            // δ_n = δ_{n−2} − a_n δ_{n−1}
            let next = &delta[k] - &delta[k + 1].mul_int(&Integer::from(a));
            delta.push(next);
        }

        Ok(ContinuedFraction { quotients, tail: tail.to_vec(), p, q, delta, alpha })
    }

    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    pub fn quotients(&self) -> &[u64] {
        &self.quotients
    }

    pub fn tail(&self) -> &[u64] {
        &self.tail
    }

    /// `a_n` for `1 ≤ n`; beyond the tabulated depth the periodic tail is used.
    pub fn a(&self, n: usize) -> u64 {
        assert!(n >= 1, "partial quotients are indexed from 1");
        if n <= self.depth() {
            self.quotients[n - 1]
        } else {
            self.tail[(n - self.depth() - 1) % self.tail.len()]
        }
    }

    /// `q_n` for `-1 ≤ n ≤ depth`.
    pub fn q(&self, n: isize) -> &Integer {
        &self.q[self.idx(n)]
    }

    pub fn p(&self, n: isize) -> &Integer {
        &self.p[self.idx(n)]
    }

    /// `q_n` as a machine integer; panics when it does not fit.
    pub fn q_usize(&self, n: isize) -> usize {
        self.q(n).to_usize().expect("return time does not fit in usize")
    }

    pub fn p_i64(&self, n: isize) -> i64 {
        self.p(n).to_i64().expect("numerator does not fit in i64")
    }

    /// Exact `δ_n` for `-1 ≤ n ≤ depth`.
    pub fn delta(&self, n: isize) -> &QuadraticIrrational {
        &self.delta[self.idx(n)]
    }

    pub fn delta_float(&self, n: isize, prec: u32) -> Float {
        self.delta(n).to_float(prec)
    }

    pub fn delta_f64(&self, n: isize) -> f64 {
        self.delta(n).to_f64()
    }

    pub fn alpha(&self) -> &QuadraticIrrational {
        &self.alpha
    }

    pub fn alpha_float(&self, prec: u32) -> Float {
        self.alpha.to_float(prec)
    }

    /// Closed form `(−1)^n (q_n α − p_n)`, independent of the δ recurrence.
    pub fn delta_closed_form(&self, n: isize) -> QuadraticIrrational {
        let d = self.alpha.radicand();
        let v = &self.alpha.mul_int(self.q(n)) - &QuadraticIrrational::from_rational(Rational::from(self.p(n)), d);
        if n.rem_euclid(2) == 0 {
            v
        } else {
            -&v
        }
    }

    fn idx(&self, n: isize) -> usize {
        assert!(n >= -1 && n <= self.depth() as isize, "index {n} outside -1..={}", self.depth());
        (n + 1) as usize
    }

    /// Serializable view with decimal strings at `digits` significant digits.
    pub fn report(&self, digits: usize) -> CfReport {
        let prec = numeric::bits_for_digits(digits);
        CfReport {
            quotients: self.quotients.clone(),
            tail: self.tail.clone(),
            p: self.p[1..].iter().map(|v| v.to_string()).collect(),
            q: self.q[1..].iter().map(|v| v.to_string()).collect(),
            delta: self.delta[1..].iter().map(|d| numeric::decimal(&d.to_float(prec), digits)).collect(),
            alpha: numeric::decimal(&self.alpha_float(prec), digits),
            decimal_digits: digits,
        }
    }
}

fn recurrences(quotients: &[u64]) -> (Vec<Integer>, Vec<Integer>) {
    let mut p = vec![Integer::from(1), Integer::from(0)];
    let mut q = vec![Integer::from(0), Integer::from(1)];
    for (k, &a) in quotients.iter().enumerate() {
        let pn = Integer::from(&p[k + 1] * a) + &p[k];
        let qn = Integer::from(&q[k + 1] * a) + &q[k];
        p.push(pn);
        q.push(qn);
    }
    (p, q)
}

/// Value of the purely periodic `[0; w, w, ...]` in `Q(√D)`.
fn periodic_value(word: &[u64]) -> QuadraticIrrational {
    let (p, q) = recurrences(word);
    let k = word.len() + 1;
    // y (Q_k + Q_{k−1} y) = P_k + P_{k−1} y
    let b = Integer::from(&q[k] - &p[k - 1]);
    let disc = Integer::from(b.square_ref()) + Integer::from(&q[k - 1] * &p[k]) * 4u32;
    let (square, radicand) = split_square(disc);
    let denom = Integer::from(&q[k - 1] * 2u32);
    let rational = Rational::from((Integer::from(-&b), denom.clone()));
    let surd = Rational::from((square, denom));
    QuadraticIrrational::new(rational, surd, radicand)
}

/// `n = s² r` with small square factors of `r` pulled out.
fn split_square(mut n: Integer) -> (Integer, Integer) {
    let mut s = Integer::from(1);
    let mut f = 2u32;
    while f < 10_000 {
        let f2 = f * f;
        if n < f2 {
            break;
        }
        while n.is_divisible_u(f2) {
            n /= f2;
            s *= f;
        }
        f += 1;
    }
    (s, n)
}

#[derive(Clone, Debug, Serialize)]
pub struct CfReport {
    pub quotients: Vec<u64>,
    pub tail: Vec<u64>,
    pub p: Vec<String>,
    pub q: Vec<String>,
    pub delta: Vec<String>,
    pub alpha: String,
    pub decimal_digits: usize,
}

/// Finite-depth Diophantine data of a continued fraction.
///
/// Nothing here is a verdict about the number itself: membership in `D_τ`
/// is a tail property and every figure is "at depth N".
#[derive(Clone, Debug, Serialize)]
pub struct DiophantineProfile {
    pub depth: usize,
    pub tau: f64,
    /// `min_n q_n^{τ+1} δ_n`, the largest constant compatible with the
    /// convergents seen so far.
    pub dio_gamma: f64,
    /// `max_n a_{n+1} / q_n^τ` over the available indices.
    #[serde(rename = "Gamma")]
    pub gamma_sup: f64,
    pub gamma_argmax: usize,
    /// `(n, 2 log(a_1···a_n) / log q_n)` for every `n` with `q_n ≥ 2`.
    pub nu1_seq: Vec<(usize, f64)>,
    /// `(n, n / log q_n)` for every `n` with `q_n ≥ 2`.
    pub nu2_seq: Vec<(usize, f64)>,
    /// Largest value over the second half of the sequence.
    pub nu1: f64,
    pub nu2: f64,
    /// No growth of the partial quotients between the first and second
    /// half of the tabulated prefix.
    pub bounded_type_at_depth: bool,
}

pub fn diophantine_profile(cf: &ContinuedFraction, tau: f64) -> Result<DiophantineProfile> {
    let depth = cf.depth();
    if depth < 3 {
        return Err(Error::InvalidInput(format!("diophantine profile needs depth >= 3, got {depth}")));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!("tau must be non-negative, got {tau}")));
    }
    let mut gamma_sup = f64::NEG_INFINITY;
    let mut gamma_argmax = 0;
    for n in 0..depth {
        let ratio = cf.a(n + 1) as f64 / numeric::integer_ln(cf.q(n as isize)).mul_add(tau, 0.0).exp();
        if ratio > gamma_sup {
            gamma_sup = ratio;
            gamma_argmax = n;
        }
    }

    let mut dio_gamma = f64::INFINITY;
    for n in 1..=depth as isize {
        let lq = numeric::integer_ln(cf.q(n));
        let v = ((tau + 1.0) * lq).exp() * cf.delta_f64(n);
        dio_gamma = dio_gamma.min(v);
    }

    let mut nu1_seq = Vec::new();
    let mut nu2_seq = Vec::new();
    let mut log_prod = 0.0;
    for n in 1..=depth {
        log_prod += (cf.a(n) as f64).ln();
        let lq = numeric::integer_ln(cf.q(n as isize));
        if lq > 0.0 {
            nu1_seq.push((n, 2.0 * log_prod / lq));
            nu2_seq.push((n, n as f64 / lq));
        }
    }
    let half = depth / 2;
    let tail_max = |seq: &[(usize, f64)]| {
        seq.iter().filter(|(n, _)| *n >= half).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max)
    };
    let nu1 = tail_max(&nu1_seq);
    let nu2 = tail_max(&nu2_seq);

    let first = cf.quotients()[..half.max(1)].iter().copied().max().unwrap_or(1);
    let second = cf.quotients()[half.max(1)..].iter().copied().max().unwrap_or(1);

    Ok(DiophantineProfile {
        depth,
        tau,
        dio_gamma,
        gamma_sup,
        gamma_argmax,
        nu1_seq,
        nu2_seq,
        nu1,
        nu2,
        bounded_type_at_depth: second <= first,
    })
}

/// Test-input generators for the arithmetic classes of interest.
#[derive(Clone, Debug, PartialEq)]
pub enum QuotientKind {
    Golden,
    Periodic(Vec<u64>),
    /// `a_{n+1} = ⌈q_n^τ⌉`, which keeps the number outside `D_{τ'}` for `τ' < τ`.
    PrescribedGrowth(f64),
    RandomBounded { max_a: u64, seed: u64 },
}

pub fn generate_quotients(kind: &QuotientKind, depth: usize) -> Result<Vec<u64>> {
    if depth == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    match kind {
        QuotientKind::Golden => Ok(vec![1; depth]),
        QuotientKind::Periodic(word) => {
            if word.is_empty() {
                return Err(Error::InvalidInput("periodic word is empty".into()));
            }
            if word.contains(&0) {
                return Err(Error::InvalidInput("periodic word has a zero entry".into()));
            }
            Ok(word.iter().copied().cycle().take(depth).collect())
        }
        QuotientKind::PrescribedGrowth(tau) => prescribed_growth(*tau, depth),
        QuotientKind::RandomBounded { max_a, seed } => {
            if *max_a == 0 {
                return Err(Error::InvalidInput("max_a must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok((0..depth).map(|_| rng.gen_range(1..=*max_a)).collect())
        }
    }
}

fn prescribed_growth(tau: f64, depth: usize) -> Result<Vec<u64>> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidInput(format!("growth exponent must be finite and >= 0, got {tau}")));
    }
    let mut out = Vec::with_capacity(depth);
    let (mut q_prev, mut q) = (Integer::from(0), Integer::from(1));
    for _ in 0..depth {
        let a = ceil_pow(&q, tau);
        let a = a
            .to_u64()
            .ok_or_else(|| Error::InvalidInput(format!("prescribed growth quotient {a} overflows u64")))?;
        out.push(a.max(1));
        let next = Integer::from(&q * a.max(1)) + &q_prev;
        q_prev = std::mem::replace(&mut q, next);
    }
    Ok(out)
}

/// `⌈q^τ⌉` computed exactly when `τ` is an integer, otherwise at high precision
/// with integers recognised to 2^-200 relative.
fn ceil_pow(q: &Integer, tau: f64) -> Integer {
    if tau == tau.trunc() && tau < 64.0 {
        use rug::ops::Pow;
        return q.clone().pow(tau as u32);
    }
    let bits = q.significant_bits().max(64) * (tau.ceil() as u32 + 1) + 256;
    let v = Float::with_val(bits, q).ln() * Float::with_val(bits, tau);
    let v = v.exp();
    let nearest = Float::with_val(bits, v.round_ref());
    let gap = Float::with_val(bits, &v - &nearest).abs();
    let scale = Float::with_val(bits, v.abs_ref()) >> 200u32;
    let r = if gap <= scale { nearest } else { v.ceil() };
    r.to_integer().expect("finite power")
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Theorem1Bounds {
    pub lower: f64,
    pub upper: f64,
    /// The lower-bound formula exceeded 1 and was clamped.
    pub lower_clamped: bool,
}

/// `1/(2τ + ν₁ + ν₂ log M)` (clamped to 1) and `1/(τ + 1)`.
pub fn theorem1_bounds(tau: f64, nu1: f64, nu2: f64, m: f64) -> Result<Theorem1Bounds> {
    if !(m > 1.0) {
        return Err(Error::InvalidInput(format!("M must exceed 1, got {m}")));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!("tau must be non-negative, got {tau}")));
    }
    if !(nu2 > 0.0) || !(nu1 >= 0.0) {
        return Err(Error::InvalidInput(format!("need nu1 >= 0 and nu2 > 0, got {nu1}, {nu2}")));
    }
    let denom = 2.0 * tau + nu1 + nu2 * m.ln();
    let raw = 1.0 / denom;
    let lower_clamped = !(raw <= 1.0);
    Ok(Theorem1Bounds { lower: if lower_clamped { 1.0 } else { raw }, upper: 1.0 / (tau + 1.0), lower_clamped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<Integer> {
        v.iter().map(|&x| Integer::from(x)).collect()
    }

    #[test]
    fn fibonacci_return_times() {
        let cf = ContinuedFraction::new(&[1, 1, 1, 1, 1], 5).unwrap();
        let q: Vec<Integer> = (0..=5).map(|n| cf.q(n).clone()).collect();
        assert_eq!(q, ints(&[1, 1, 2, 3, 5, 8]));
    }

    #[test]
    fn silver_convergents() {
        let cf = ContinuedFraction::new(&[2, 2, 2], 3).unwrap();
        let q: Vec<Integer> = (0..=3).map(|n| cf.q(n).clone()).collect();
        assert_eq!(q, ints(&[1, 2, 5, 12]));
        assert_eq!(*cf.p(3), 5);
    }

    #[test]
    fn golden_distances_are_powers() {
        let cf = ContinuedFraction::new(&[1; 12], 12).unwrap();
        let a = cf.alpha().clone();
        let mut pow = a.clone();
        for n in 0..=12 {
            assert_eq!(cf.delta(n), &pow, "δ_{n} != α^{}", n + 1);
            pow = &pow * &a;
        }
        let d = a.radicand();
        let lhs = &cf.delta(1).mul_int(cf.q(2)) + &cf.delta(2).mul_int(cf.q(1));
        assert_eq!(lhs, QuadraticIrrational::from_int(1, d));
    }

    #[test]
    fn non_positive_quotient_is_rejected() {
        assert!(matches!(ContinuedFraction::new(&[1, 0, 2], 3), Err(Error::InvalidInput(_))));
        assert!(matches!(ContinuedFraction::new(&[1, 2], 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn silver_tail_is_exact() {
        let cf = ContinuedFraction::with_tail(&[2, 2], 2, &[2]).unwrap();
        // α = √2 − 1
        let expected = QuadraticIrrational::new(Rational::from(-1), Rational::from(1), Integer::from(2));
        assert_eq!(cf.alpha(), &expected);
    }

    #[test]
    fn closed_form_matches_recurrence() {
        let cf = ContinuedFraction::with_tail(&[3, 1, 4, 1, 5, 9, 2, 6], 8, &[5, 3]).unwrap();
        for n in -1..=8 {
            assert_eq!(cf.delta(n), &cf.delta_closed_form(n));
        }
    }

    #[test]
    fn golden_profile() {
        let cf = ContinuedFraction::new(&[1; 20], 20).unwrap();
        let prof = diophantine_profile(&cf, 0.0).unwrap();
        assert_eq!(prof.gamma_sup, 1.0);
        assert!(prof.bounded_type_at_depth);
        assert!(prof.nu1_seq.iter().all(|&(_, v)| v == 0.0));
        assert!(prof.nu2_seq.iter().all(|&(_, v)| v > 0.0));
    }

    #[test]
    fn growth_generator_matches_hand_recurrence() {
        // a_1 = ⌈q_0⌉ = 1, q_1 = 1; a_2 = 1, q_2 = 2; a_3 = 2, q_3 = 5; a_4 = 5
        let a = generate_quotients(&QuotientKind::PrescribedGrowth(1.0), 4).unwrap();
        assert_eq!(a, vec![1, 1, 2, 5]);
        let a = generate_quotients(&QuotientKind::PrescribedGrowth(1.0), 6).unwrap();
        assert_eq!(a, vec![1, 1, 2, 5, 27, 734]);
    }

    #[test]
    fn growth_profile_gamma_in_range() {
        for depth in 3..=6 {
            let a = generate_quotients(&QuotientKind::PrescribedGrowth(1.0), depth + 1).unwrap();
            let cf = ContinuedFraction::new(&a, depth + 1).unwrap();
            let prof = diophantine_profile(&cf, 1.0).unwrap();
            assert!((1.0..=2.0).contains(&prof.gamma_sup), "depth {depth}: {}", prof.gamma_sup);
            assert!(!prof.bounded_type_at_depth || depth < 4);
        }
    }

    #[test]
    fn fractional_growth_uses_ceiling() {
        // q_n^0.5 with q = 4 is exactly 2: the ceiling must not round up.
        assert_eq!(ceil_pow(&Integer::from(4), 0.5), 2);
        assert_eq!(ceil_pow(&Integer::from(5), 0.5), 3);
    }

    #[test]
    fn generator_errors() {
        assert!(generate_quotients(&QuotientKind::Golden, 0).is_err());
        assert!(generate_quotients(&QuotientKind::Periodic(vec![]), 3).is_err());
        let a = generate_quotients(&QuotientKind::Periodic(vec![1, 1, 1, 40]), 8).unwrap();
        assert_eq!(a, vec![1, 1, 1, 40, 1, 1, 1, 40]);
        assert_eq!(generate_quotients(&QuotientKind::Golden, 6).unwrap(), vec![1; 6]);
    }

    #[test]
    fn random_bounded_is_reproducible() {
        let k = QuotientKind::RandomBounded { max_a: 5, seed: 7 };
        let a = generate_quotients(&k, 30).unwrap();
        assert_eq!(a, generate_quotients(&k, 30).unwrap());
        assert!(a.iter().all(|&x| (1..=5).contains(&x)));
    }

    #[test]
    fn bound_formulas() {
        let b = theorem1_bounds(1.0, 0.0, 1.0, 2.0).unwrap();
        assert_eq!(b.upper, 0.5);
        let b = theorem1_bounds(0.0, 0.0, 2.0781, std::f64::consts::E).unwrap();
        assert!((b.lower - 0.4812).abs() < 1e-4);
        let b = theorem1_bounds(0.0, 0.0, 2.0781, 1.0 + 1e-12).unwrap();
        assert_eq!(b.lower, 1.0);
        assert!(b.lower_clamped);
        assert!(theorem1_bounds(0.0, 0.0, 2.0, 1.0).is_err());
        assert!(theorem1_bounds(0.0, 0.0, 2.0, 0.5).is_err());
    }
}
