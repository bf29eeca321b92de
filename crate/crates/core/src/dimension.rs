//! Local dimension exponents `log μ(P_k(x)) / log |P_k(x)|` sampled along an orbit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Float;
use serde::Serialize;

use crate::cf::ContinuedFraction;
use crate::error::{Error, Result};
use crate::map::{iterate_orbit, MapSpec};
use crate::measure::{arc_measure, atom_measure};
use crate::numeric::{integer_ln, linear_fit};
use crate::partition::{tile_tolerance, PartitionTower};

#[derive(Clone, Debug)]
pub struct SamplingPlan {
    pub min_level: usize,
    pub max_level: usize,
    pub samples: usize,
    pub seed: u64,
    /// Also measure balls `B(x, |P_k(x)|)` against the deepest partition,
    /// scaled by their diameter.
    pub balls: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub inv_log_q: f64,
    pub median: f64,
    pub mean: f64,
    pub q1: f64,
    pub q3: f64,
    pub ball_median: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DimensionEstimate {
    pub samples_requested: usize,
    pub samples_used: usize,
    /// Orbit indices of the sample points.
    pub sample_indices: Vec<usize>,
    pub levels: Vec<LevelSummary>,
    /// Median exponent at the deepest level.
    pub estimate: f64,
    /// Intercept of the per-level medians against `1 / log q_k`.
    pub extrapolated: Option<f64>,
    /// Median over samples of the smallest and largest exponent on the last three levels.
    pub frostman: (f64, f64),
    pub drift: f64,
    pub low_confidence: bool,
    /// Per level, the exponent of every used sample.
    #[serde(skip)]
    pub exponents: Vec<Vec<f64>>,
    /// Orbit indices of the samples that were used.
    #[serde(skip)]
    pub used_indices: Vec<usize>,
}

impl DimensionEstimate {
    /// CSV rows `sample,level,exponent`, the sample given by its orbit index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,level,exponent\n");
        for (k, &m) in self.used_indices.iter().enumerate() {
            for (slot, level) in self.levels.iter().enumerate() {
                out.push_str(&format!("{m},{},{}\n", level.level, crate::report::decimal_f64(self.exponents[slot][k])));
            }
        }
        out
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Samples local exponents at orbit points of the base critical point lying
/// beyond every partition endpoint used, Beatty-spaced by the golden ratio.
pub fn local_dimension_samples(
    spec: &MapSpec,
    tower: &PartitionTower,
    cf: &ContinuedFraction,
    plan: &SamplingPlan,
) -> Result<DimensionEstimate> {
    let (k0, k1) = (plan.min_level.max(2), plan.max_level);
    if k1 > tower.depth() || k1 > cf.depth() {
        return Err(Error::DepthExceeded { requested: k1, available: tower.depth().min(cf.depth()) });
    }
    if k0 > k1 || plan.samples == 0 {
        return Err(Error::InvalidInput(format!("empty sampling plan: levels {k0}..={k1}, {} samples", plan.samples)));
    }
    let prec = tower.precision_bits();
    let first = tower.q(k1 as isize) + tower.q(k1 as isize - 1);
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let offset: f64 = ChaCha8Rng::seed_from_u64(plan.seed).gen();
    let sample_indices: Vec<usize> =
        (0..plan.samples).map(|j| first + ((j as f64 + offset) * phi).floor() as usize).collect();
    let last = *sample_indices.last().unwrap();
    let have = tower.orbit().len();
    let tail = if last >= have {
        Some(iterate_orbit(spec, &tower.orbit().position(have - 1), last + 1 - have)?)
    } else {
        None
    };
    let point = |m: usize| -> Float {
        match &tail {
            Some(t) if m >= have => t.position(m - (have - 1)),
            _ => tower.orbit().position(m),
        }
    };
    let points: Vec<Float> = sample_indices.iter().map(|&m| point(m)).collect();
    let tol = tower.orbit().max_abs_error() * 4.0 + tile_tolerance(prec, 1);

    let partitions = (k0..=k1).map(|k| tower.partition(k)).collect::<Result<Vec<_>>>()?;
    let deepest = partitions.last().unwrap();
    let mut exponents = vec![Vec::new(); partitions.len()];
    let mut balls = vec![Vec::new(); partitions.len()];
    let mut per_sample: Vec<Vec<f64>> = Vec::new();
    let mut used_indices = Vec::new();
    for (&m, x) in sample_indices.iter().zip(&points) {
        let mut row = Vec::with_capacity(partitions.len());
        for p in &partitions {
            let loc = p.locate(x, tol);
            if loc.alternative.is_some() {
                break;
            }
            let atom = p.atom(loc.atom).expect("located atom exists");
            let mu = atom_measure(cf, loc.atom.generation)?.to_f64();
            row.push(mu.ln() / atom.length.to_f64().ln());
        }
        if row.len() < partitions.len() {
            continue;
        }
        for (slot, p) in partitions.iter().enumerate() {
            exponents[slot].push(row[slot]);
            if plan.balls && p.level + 2 <= k1 {
                let atom = p.atom(p.locate(x, tol).atom).unwrap();
                let r = atom.length.to_f64();
                let lo = Float::with_val(prec, x - r);
                let hi = Float::with_val(prec, x + r);
                let m = arc_measure(deepest, cf, &lo, &hi, tol, f64::INFINITY)?;
                balls[slot].push((0.5 * (m.lower + m.upper)).ln() / (2.0 * r).ln());
            }
        }
        per_sample.push(row);
        used_indices.push(m);
    }
    let used = per_sample.len();
    if used == 0 {
        return Err(Error::Resolution { index: 0, detail: "every sample point sat on a partition endpoint".into() });
    }
    let mut levels = Vec::new();
    for (slot, p) in partitions.iter().enumerate() {
        let mut v = exponents[slot].clone();
        v.sort_by(f64::total_cmp);
        let ball_median = if balls[slot].is_empty() {
            None
        } else {
            let mut b = balls[slot].clone();
            b.sort_by(f64::total_cmp);
            Some(quantile(&b, 0.5))
        };
        levels.push(LevelSummary {
            level: p.level,
            inv_log_q: 1.0 / integer_ln(cf.q(p.level as isize)),
            median: quantile(&v, 0.5),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q1: quantile(&v, 0.25),
            q3: quantile(&v, 0.75),
            ball_median,
        });
    }
    let fit_from = levels.iter().position(|l| l.inv_log_q.is_finite()).unwrap_or(levels.len());
    let xs: Vec<f64> = levels[fit_from..].iter().map(|l| l.inv_log_q).collect();
    let ys: Vec<f64> = levels[fit_from..].iter().map(|l| l.median).collect();
    let extrapolated = linear_fit(&xs, &ys).map(|(_, c)| c);

    let window = per_sample[0].len().min(3);
    let mut lows: Vec<f64> = Vec::with_capacity(used);
    let mut highs: Vec<f64> = Vec::with_capacity(used);
    for row in &per_sample {
        let tail = &row[row.len() - window..];
        lows.push(tail.iter().copied().fold(f64::INFINITY, f64::min));
        highs.push(tail.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    lows.sort_by(f64::total_cmp);
    highs.sort_by(f64::total_cmp);
    let top = levels.last().unwrap();
    let drift = if levels.len() >= 2 { (top.median - levels[levels.len() - 2].median).abs() } else { 0.0 };
    let low_confidence = used < 100 || drift > 0.05;
    Ok(DimensionEstimate {
        samples_requested: plan.samples,
        samples_used: used,
        sample_indices,
        estimate: top.median,
        extrapolated,
        frostman: (quantile(&lows, 0.5), quantile(&highs, 0.5)),
        drift,
        low_confidence,
        levels,
        exponents,
        used_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Family;

    #[test]
    fn rotation_exponents_are_one() {
        let cf = ContinuedFraction::new(&[1; 24], 24).unwrap();
        let spec = MapSpec::new(Family::RigidRotation, &cf.alpha_float(256), 256).unwrap();
        let tower = PartitionTower::build(&spec, 0, 10).unwrap();
        let plan = SamplingPlan { min_level: 2, max_level: 10, samples: 40, seed: 7, balls: true };
        let est = local_dimension_samples(&spec, &tower, &cf, &plan).unwrap();
        assert_eq!(est.samples_used, 40);
        for row in &est.exponents {
            for d in row {
                assert!((d - 1.0).abs() < 1e-9);
            }
        }
        let ball = est.levels[0].ball_median.unwrap();
        assert!((ball - 1.0).abs() < 0.2, "{ball}");
        assert!(!est.low_confidence || est.samples_used < 100);
    }
}
