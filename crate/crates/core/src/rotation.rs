//! Rotation numbers: Birkhoff brackets, closest returns, and tuning a
//! monotone family to a prescribed continued-fraction prefix.

use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::cf::ContinuedFraction;
use crate::error::{Error, Result};
use crate::map::{iterate_orbit, MapSpec, OrbitSegment};
use crate::numeric;

/// What an orbit reveals about `ρ(f)`.
#[derive(Clone, Debug)]
pub struct RotationReading {
    pub bracket: (Float, Float),
    /// `a_1..a_K`.
    pub quotients: Vec<u64>,
    /// `q_1..q_K`.
    pub return_times: Vec<u64>,
    /// `p_1..p_K`, read off the lift.
    pub numerators: Vec<i64>,
    /// `x_{q_k} − x_0 − p_k`.
    pub residuals: Vec<Float>,
    pub rational_lock: Option<(i64, u64)>,
}

impl RotationReading {
    pub fn report(&self, digits: usize) -> RotationReport {
        RotationReport {
            bracket: [numeric::decimal(&self.bracket.0, digits), numeric::decimal(&self.bracket.1, digits)],
            quotients: self.quotients.clone(),
            q: self.return_times.clone(),
            p: self.numerators.clone(),
            residuals: self.residuals.iter().map(|r| numeric::decimal(r, digits)).collect(),
            rational_lock: self.rational_lock.map(|(p, q)| format!("{p}/{q}")),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationReport {
    pub bracket: [String; 2],
    pub quotients: Vec<u64>,
    pub q: Vec<u64>,
    pub p: Vec<i64>,
    pub residuals: Vec<String>,
    pub rational_lock: Option<String>,
}

fn lock_threshold(prec: u32) -> Float {
    Float::with_val(prec, Float::i_exp(1, -((prec - 32) as i32)))
}

/// Bracket from `|F^n(x) − x − nρ| < 1`, collapsed when the base point is periodic.
pub fn birkhoff_estimate(spec: &MapSpec, n_iterations: usize) -> Result<RotationReading> {
    if n_iterations < 10 {
        return Err(Error::InvalidInput(format!("need at least 10 iterations, got {n_iterations}")));
    }
    let prec = spec.precision_bits();
    let x0 = Float::new(prec);
    let orbit = iterate_orbit(spec, &x0, n_iterations)?;
    let thr = lock_threshold(prec);
    for k in 1..=n_iterations {
        let d = orbit.diff(k, 0);
        let p = Float::with_val(prec, d.round_ref());
        let gap = Float::with_val(prec, &d - &p).abs();
        if gap <= thr {
            let p = p.to_integer().and_then(|i| i.to_i64()).expect("winding fits i64");
            let r = Float::with_val(prec, Rational::from((p, k as u64)));
            let cf = quotients_of_rational(p, k as u64);
            return Ok(RotationReading {
                bracket: (r.clone(), r),
                quotients: cf,
                return_times: Vec::new(),
                numerators: Vec::new(),
                residuals: Vec::new(),
                rational_lock: Some((p, k as u64)),
            });
        }
    }
    let n = n_iterations as u32;
    let d = orbit.diff(n_iterations, 0);
    let lo = Float::with_val(prec, &d - 1u32) / n;
    let hi = Float::with_val(prec, &d + 1u32) / n;
    Ok(RotationReading {
        bracket: (lo, hi),
        quotients: Vec::new(),
        return_times: Vec::new(),
        numerators: Vec::new(),
        residuals: Vec::new(),
        rational_lock: None,
    })
}

fn quotients_of_rational(p: i64, q: u64) -> Vec<u64> {
    let r = Rational::from((p.rem_euclid(q as i64), q));
    let (mut num, mut den) = r.into_numer_denom();
    let mut out = Vec::new();
    while num != 0 {
        let (a, rem) = den.div_rem_ref(&num).into();
        let a: Integer = a;
        out.push(a.to_u64().unwrap_or(u64::MAX));
        den = num;
        num = rem;
    }
    out
}

const MAX_ORBIT: usize = 1 << 24;

/// Partial quotients read off the one-sided closest returns of the orbit of `base`.
///
/// Record approaches to `x_0` from one side happen at the times
/// `q_{n−1} + j q_n` for `1 ≤ j ≤ a_{n+1}`; each maximal run of records on
/// one side therefore has length `a_{n+1}` and ends at `q_{n+1}`.
pub fn closest_return_quotients(spec: &MapSpec, base: &Float, depth: usize) -> Result<RotationReading> {
    if depth < 1 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    let prec = spec.precision_bits();
    let thr = lock_threshold(prec);
    let mut orbit = iterate_orbit(spec, base, 64)?;
    let u0 = orbit.frac(0).clone();
    let y_of = |o: &OrbitSegment, k: usize| {
        let mut y = Float::with_val(prec, o.frac(k) - &u0);
        if y < 0 {
            y += 1u32;
        }
        y
    };
    let err_of = |o: &OrbitSegment, k: usize| o.abs_error(k) + o.abs_error(0);

    // runs[i] = (side, length, last time)
    let mut runs: Vec<(bool, u64, usize)> = Vec::new();
    let mut lock = None;
    let y1 = y_of(&orbit, 1);
    let (mut min_y, mut min_k) = (y1.clone(), 1usize);
    let (mut max_y, mut max_k) = (y1.clone(), 1usize);
    if y1 <= thr || Float::with_val(prec, 1u32 - &y1) <= thr {
        lock = Some(1);
    } else {
        runs.push((false, 1, 1));
    }
    let mut k = 2;
    while lock.is_none() && runs.len() <= depth {
        if k >= orbit.len() {
            if orbit.len() >= MAX_ORBIT {
                return Err(Error::DepthExceeded { requested: depth, available: runs.len().saturating_sub(1) });
            }
            let extra = orbit.len().min(MAX_ORBIT - orbit.len());
            orbit.extend(spec, extra)?;
        }
        let y = y_of(&orbit, k);
        let e = err_of(&orbit, k);
        let near0 = y.to_f64();
        let near1 = 1.0 - near0;
        if y <= thr || Float::with_val(prec, 1u32 - &y) <= thr {
            lock = Some(k);
            break;
        }
        if near0.min(near1) <= e {
            return Err(Error::Resolution { index: k, detail: "return distance within the error bound".into() });
        }
        let side = if y < min_y {
            let gap = Float::with_val(prec, &min_y - &y).to_f64();
            if gap <= e + err_of(&orbit, min_k) {
                return Err(Error::Resolution { index: k, detail: format!("tie with record at {min_k}") });
            }
            min_y = y;
            min_k = k;
            Some(true)
        } else if y > max_y {
            let gap = Float::with_val(prec, &y - &max_y).to_f64();
            if gap <= e + err_of(&orbit, max_k) {
                return Err(Error::Resolution { index: k, detail: format!("tie with record at {max_k}") });
            }
            max_y = y;
            max_k = k;
            Some(false)
        } else {
            let lo = Float::with_val(prec, &y - &min_y).to_f64();
            let hi = Float::with_val(prec, &max_y - &y).to_f64();
            if lo <= e + err_of(&orbit, min_k) || hi <= e + err_of(&orbit, max_k) {
                return Err(Error::Resolution { index: k, detail: "tie with a current record".into() });
            }
            None
        };
        if let Some(s) = side {
            match runs.last_mut() {
                Some(last) if last.0 == s => {
                    last.1 += 1;
                    last.2 = k;
                }
                _ => runs.push((s, 1, k)),
            }
        }
        k += 1;
    }
    // A run is complete once the next one has started.
    let complete = if lock.is_some() { runs.len() } else { runs.len() - 1 };
    let complete = complete.min(depth);
    let quotients: Vec<u64> = runs[..complete].iter().map(|r| r.1).collect();
    let return_times: Vec<u64> = runs[..complete].iter().map(|r| r.2 as u64).collect();

    let mut q_prev2 = 0u64;
    let mut q_prev = 1u64;
    for (n, (&a, &q)) in quotients.iter().zip(&return_times).enumerate() {
        if q != a * q_prev + q_prev2 {
            return Err(Error::Resolution {
                index: q as usize,
                detail: format!("return time q_{} = {q} breaks the recurrence with a = {a}", n + 1),
            });
        }
        q_prev2 = q_prev;
        q_prev = q;
    }

    let mut numerators = Vec::new();
    let mut residuals = Vec::new();
    for &q in &return_times {
        let d = orbit.diff(q as usize, 0);
        let p = Float::with_val(prec, d.round_ref());
        residuals.push(Float::with_val(prec, &d - &p));
        numerators.push(p.to_integer().and_then(|i| i.to_i64()).expect("numerator fits i64"));
    }

    if let Some(kl) = lock {
        let p = Float::with_val(prec, orbit.diff(kl, 0).round_ref()).to_integer().and_then(|i| i.to_i64()).unwrap();
        let r = Float::with_val(prec, Rational::from((p, kl as u64)));
        return Ok(RotationReading {
            bracket: (r.clone(), r),
            quotients,
            return_times,
            numerators,
            residuals,
            rational_lock: Some((p, kl as u64)),
        });
    }

    let bracket = convergent_bracket(&numerators, &return_times, prec, &orbit);
    Ok(RotationReading { bracket, quotients, return_times, numerators, residuals, rational_lock: None })
}

/// `ρ` lies between `p_K/q_K` and `(p_K + p_{K−1})/(q_K + q_{K−1})`.
fn convergent_bracket(p: &[i64], q: &[u64], prec: u32, orbit: &OrbitSegment) -> (Float, Float) {
    let k = q.len();
    if k == 0 {
        let n = orbit.len() - 1;
        let d = orbit.diff(n, 0);
        let lo = Float::with_val(prec, &d - 1u32) / n as u32;
        let hi = Float::with_val(prec, &d + 1u32) / n as u32;
        return (lo, hi);
    }
    let (pk, qk) = (p[k - 1], q[k - 1]);
    let (pk1, qk1) = if k >= 2 {
        (p[k - 2], q[k - 2])
    } else {
        // p_0 / q_0 = floor(ρ) / 1
        (orbit.diff(1, 0).floor().to_integer().and_then(|i| i.to_i64()).unwrap(), 1)
    };
    let a = Float::with_val(prec, Rational::from((pk, qk)));
    let b = Float::with_val(prec, Rational::from((pk + pk1, qk + qk1)));
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// How far past the requested depth the convergent order tests reach.
pub const TUNE_MARGIN: usize = 3;

#[derive(Clone, Debug)]
pub struct TuneResult {
    pub omega: Float,
    pub reading: RotationReading,
    pub steps: usize,
    /// Deepest convergent order-tested; `a_1..a_{tested_through}` are pinned.
    pub tested_through: usize,
}

/// Bisection on `ω` until the map's rotation number shares the target's
/// first `depth` partial quotients, confirmed by re-extraction.
///
/// Order tests run at the convergents up to `depth + TUNE_MARGIN`, skipping
/// those whose return time is far beyond `q_depth`.
pub fn tune_parameter(template: &MapSpec, target: &[u64], depth: usize) -> Result<TuneResult> {
    if depth < 1 || target.is_empty() {
        return Err(Error::InvalidInput("tuning needs depth >= 1 and a non-empty target".into()));
    }
    let word: Vec<u64> = target.iter().copied().cycle().take(depth + TUNE_MARGIN).collect();
    let cf = ContinuedFraction::new(&word, word.len())?;
    // deeper tests only while their orbits stay within a few times the tuned return time
    let cap = (4 * cf.q_usize(depth as isize)).max(1 << 16);
    let k_max = (depth..=word.len()).take_while(|&k| cf.q_usize(k as isize) <= cap || k == depth).last().unwrap();
    let prec = template.precision_bits();
    let mut lo = Float::new(prec);
    let mut hi = Float::with_val(prec, 1u32);
    let base = template.base_point(0)?;
    let max_steps = (prec - 16) as usize;
    for step in 1..=max_steps {
        let mut mid = Float::with_val(prec, &lo + &hi) / 2u32;
        let mut verdict = None;
        // A midpoint sitting exactly on a periodic orbit of 0 is nudged aside.
        for _ in 0..4 {
            match order_tests(&template.with_omega(&mid), &cf, k_max) {
                Err(Error::Resolution { .. }) => {
                    let width = Float::with_val(prec, &hi - &lo) >> 10u32;
                    mid += width;
                }
                other => {
                    verdict = Some(other?);
                    break;
                }
            }
        }
        let verdict = verdict.ok_or_else(|| Error::Resolution { index: 0, detail: "order tests stay ambiguous".into() })?;
        let spec = template.with_omega(&mid);
        match verdict {
            Verdict::TooHigh => hi = mid,
            Verdict::TooLow => lo = mid,
            Verdict::Inside => {
                let reading = closest_return_quotients(&spec, &base, depth)?;
                if reading.quotients != word[..depth] {
                    return Err(Error::Tuning {
                        steps: step,
                        lo: numeric::decimal(&lo, 30),
                        hi: numeric::decimal(&hi, 30),
                    });
                }
                return Ok(TuneResult { omega: mid, reading, steps: step, tested_through: k_max });
            }
        }
    }
    Err(Error::Tuning { steps: max_steps, lo: numeric::decimal(&lo, 30), hi: numeric::decimal(&hi, 30) })
}

enum Verdict {
    TooHigh,
    TooLow,
    Inside,
}

/// `ρ ≥ p/q` when `F^q(0) ≥ p` and `ρ ≤ p/q` when `F^q(0) ≤ p`; the target
/// lies below odd convergents and above even ones.
fn order_tests(spec: &MapSpec, cf: &ContinuedFraction, k_max: usize) -> Result<Verdict> {
    let prec = spec.precision_bits();
    let x0 = Float::new(prec);
    let q1 = cf.q_usize(1);
    let mut orbit = iterate_orbit(spec, &x0, q1)?;
    for k in 1..=k_max {
        let q = cf.q_usize(k as isize);
        if orbit.len() <= q {
            orbit.extend(spec, q + 1 - orbit.len())?;
        }
        let gap = Float::with_val(prec, orbit.position(q) - cf.p_i64(k as isize));
        if gap.to_f64().abs() <= orbit.abs_error(q) {
            return Err(Error::Resolution { index: q, detail: format!("order test at convergent {k}") });
        }
        if k % 2 == 1 && gap >= 0 {
            return Ok(Verdict::TooHigh);
        }
        if k % 2 == 0 && gap <= 0 {
            return Ok(Verdict::TooLow);
        }
    }
    // The mediant [a_1, ..., a_k + 1] bounds the target from the other side,
    // pinning a_k itself and ruling out locking onto p_{k−1}/q_{k−1}.
    let q = cf.q_usize(k_max as isize) + cf.q_usize(k_max as isize - 1);
    let p = cf.p_i64(k_max as isize) + cf.p_i64(k_max as isize - 1);
    if orbit.len() <= q {
        orbit.extend(spec, q + 1 - orbit.len())?;
    }
    let gap = Float::with_val(prec, orbit.position(q) - p);
    if gap.to_f64().abs() <= orbit.abs_error(q) {
        return Err(Error::Resolution { index: q, detail: format!("mediant test after convergent {k_max}") });
    }
    if k_max % 2 == 1 && gap <= 0 {
        Ok(Verdict::TooLow)
    } else if k_max.is_multiple_of(2) && gap >= 0 {
        Ok(Verdict::TooHigh)
    } else {
        Ok(Verdict::Inside)
    }
}
