//! Empirical real bounds: adjacency, bridge and spot comparability, the
//! Yoccoz profile inside bridges and the almost-parabolic Schwarzian sign.

use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::MapSpec;
use crate::measure::InequalityCheck;
use crate::numeric::linear_fit;
use crate::partition::{bridge_decomposition, AtomLabel, BridgeDecomposition, DynamicalPartition, PartitionTower};

fn two_sided(x: f64, y: f64) -> f64 {
    if x > y {
        x / y
    } else {
        y / x
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdjacencyStats {
    pub level: usize,
    pub max_ratio: f64,
    pub worst_pair: (AtomLabel, AtomLabel),
    /// Counts of ratios in `[2^k, 2^{k+1})`, `k = 0, 1, ...`.
    pub histogram: Vec<u64>,
}

/// Ratios `max(|I|/|J|, |J|/|I|)` over neighbouring atoms of a partition.
pub fn adjacency_ratios(partition: &DynamicalPartition) -> AdjacencyStats {
    let atoms: Vec<_> = partition.atoms_in_order().collect();
    let mut histogram = Vec::new();
    let mut max_ratio = 0.0;
    let mut worst_pair = (atoms[0].label, atoms[0].label);
    for w in 0..atoms.len() {
        let (a, b) = (atoms[w], atoms[(w + 1) % atoms.len()]);
        let r = two_sided(a.length.to_f64(), b.length.to_f64());
        let bin = r.log2().floor().max(0.0) as usize;
        if histogram.len() <= bin {
            histogram.resize(bin + 1, 0);
        }
        histogram[bin] += 1;
        if r > max_ratio {
            max_ratio = r;
            worst_pair = (a.label, b.label);
        }
    }
    AdjacencyStats { level: partition.level, max_ratio, worst_pair, histogram }
}

/// Worst two-sided ratios of the real-bounds items at one level.
#[derive(Clone, Debug, Serialize)]
pub struct LevelBounds {
    pub level: usize,
    pub a_next: u64,
    pub r_n: usize,
    /// Adjacent atoms of `P_n`.
    pub adjacency: AdjacencyStats,
    /// `|I_{n−1}^i|` against each non-empty bridge `|G_{i,s}|`.
    pub bridge_ratio: Option<f64>,
    /// `|I_{n−1}^i|` against each critical spot `|Δ_{i,k_s}|`.
    pub spot_ratio: f64,
    /// `|Δ_{i,j}|` against `|I_{n−1}^i| / min(j − k_s, k_{s+1} − j)^2`.
    pub yoccoz_ratio: Option<f64>,
    pub min_atom_length: f64,
    /// `ln (a_1 ⋯ a_n)^2`.
    pub log_quotient_square: f64,
}

impl LevelBounds {
    /// The largest of the comparability ratios and the item it comes from.
    pub fn worst(&self) -> (f64, &'static str) {
        let mut best = (self.adjacency.max_ratio, "adjacency");
        for (v, name) in [(self.bridge_ratio, "bridge"), (Some(self.spot_ratio), "spot"), (self.yoccoz_ratio, "yoccoz")] {
            if let Some(v) = v {
                if v > best.0 {
                    best = (v, name);
                }
            }
        }
        best
    }

    /// `min |I| ≥ M^{−n} / (a_1 ⋯ a_n)^2`, in logarithms.
    pub fn min_length_check(&self, m: f64) -> InequalityCheck {
        let lhs = self.min_atom_length.ln();
        let rhs = -(self.level as f64) * m.ln() - self.log_quotient_square;
        InequalityCheck { lhs, rhs, slack: lhs - rhs, holds: lhs >= rhs }
    }
}

pub fn level_bounds(spec: &MapSpec, tower: &PartitionTower, n: usize) -> Result<LevelBounds> {
    let partition = tower.partition(n)?;
    let bridges = bridge_decomposition(spec, tower, n)?;
    let (qn, qp) = (tower.q(n as isize), tower.q(n as isize - 1));
    let prec = tower.precision_bits();
    let mut bridge_ratio: Option<f64> = None;
    let mut spot_ratio = 0.0f64;
    let mut yoccoz_ratio: Option<f64> = None;
    for i in 0..qn {
        let long = tower.atom_length(n - 1, i).to_f64();
        let delta = |j: u64| tower.atom_length(n, i + qp + j as usize * qn);
        for &k in &bridges.critical_times {
            spot_ratio = spot_ratio.max(two_sided(long, delta(k).to_f64()));
        }
        for (s, run) in bridges.bridges.iter().enumerate() {
            if run.is_empty() {
                continue;
            }
            let (ks, ke) = (bridges.critical_times[s], bridges.critical_times[s + 1]);
            let mut g = Float::new(prec);
            for j in run.iter() {
                let d = delta(j);
                let dist = (j - ks).min(ke - j) as f64;
                let r = two_sided(d.to_f64(), long / (dist * dist));
                yoccoz_ratio = Some(yoccoz_ratio.map_or(r, |v| v.max(r)));
                g += d;
            }
            let r = two_sided(long, g.to_f64());
            bridge_ratio = Some(bridge_ratio.map_or(r, |v| v.max(r)));
        }
    }
    let log_quotient_square = 2.0 * (1..=n).map(|k| (tower.a(k) as f64).ln()).sum::<f64>();
    Ok(LevelBounds {
        level: n,
        a_next: bridges.a_next,
        r_n: bridges.r_n,
        adjacency: adjacency_ratios(&partition),
        bridge_ratio,
        spot_ratio,
        yoccoz_ratio,
        min_atom_length: partition.min_length().to_f64(),
        log_quotient_square,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HalfFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct YoccozFit {
    pub level: usize,
    pub bridge: usize,
    pub atoms: u64,
    /// Index `j` of the shortest atom, where the halves meet.
    pub turn: u64,
    pub left: Option<HalfFit>,
    pub right: Option<HalfFit>,
}

/// Least-squares slope of `log |Δ_j|` against `log min(j − k_s, k_e − j)` on
/// each monotone half of a bridge, leaving out its two end atoms.
///
/// `lengths[t]` belongs to `j = first + t`.
pub fn fit_yoccoz_profile(first: u64, ks: u64, ke: u64, lengths: &[f64]) -> Option<(u64, Option<HalfFit>, Option<HalfFit>)> {
    if lengths.len() < 3 {
        return None;
    }
    let turn_at = lengths.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(t, _)| t)?;
    let interior = 1..lengths.len() - 1;
    let fit = |range: std::ops::RangeInclusive<usize>| -> Option<HalfFit> {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for t in range.filter(|t| interior.contains(t)) {
            let j = first + t as u64;
            let d = (j - ks).min(ke - j) as f64;
            xs.push(d.ln());
            ys.push(lengths[t].ln());
        }
        let (slope, intercept) = linear_fit(&xs, &ys)?;
        Some(HalfFit { slope, intercept, points: xs.len() })
    };
    Some((first + turn_at as u64, fit(0..=turn_at), fit(turn_at..=lengths.len() - 1)))
}

/// Yoccoz fits on the bridges of `I_{n−1}^0` holding at least `min_atoms` atoms.
pub fn yoccoz_fits(tower: &PartitionTower, bridges: &BridgeDecomposition, min_atoms: u64) -> Vec<YoccozFit> {
    let n = bridges.level;
    let (qn, qp) = (tower.q(n as isize), tower.q(n as isize - 1));
    let mut out = Vec::new();
    for (s, run) in bridges.bridges.iter().enumerate() {
        if run.len() < min_atoms {
            continue;
        }
        let lengths: Vec<f64> = run.iter().map(|j| tower.atom_length(n, qp + j as usize * qn).to_f64()).collect();
        let (ks, ke) = (bridges.critical_times[s], bridges.critical_times[s + 1]);
        if let Some((turn, left, right)) = fit_yoccoz_profile(run.first, ks, ke, &lengths) {
            out.push(YoccozFit { level: n, bridge: s, atoms: run.len(), turn, left, right });
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ParabolicCheck {
    pub level: usize,
    pub bridge: usize,
    pub samples: usize,
    /// Samples whose orbit came too close to a critical point.
    pub skipped: usize,
    pub negative_fraction: f64,
    pub max_schwarzian: f64,
}

/// Sign of `S(f^{q_n})` on the reduced bridges of `I_{n−1}^0`, via the chain
/// rule `S(g∘f) = (Sg∘f)(f′)² + Sf` along each sample orbit.
pub fn almost_parabolic_check(
    spec: &MapSpec,
    tower: &PartitionTower,
    bridges: &BridgeDecomposition,
    min_samples: usize,
) -> Vec<ParabolicCheck> {
    let n = bridges.level;
    let (qn, qp) = (tower.q(n as isize), tower.q(n as isize - 1));
    let mut out = Vec::new();
    for (s, run) in bridges.reduced_bridges.iter().enumerate() {
        if run.is_empty() {
            continue;
        }
        let per_atom = min_samples.div_ceil(run.len() as usize);
        let (mut negative, mut skipped, mut total) = (0usize, 0usize, 0usize);
        let mut max_s = f64::NEG_INFINITY;
        for j in run.iter() {
            let k = qp + j as usize * qn;
            let (l, _) = tower.endpoints(n, k);
            let left = tower.orbit().position(l).to_f64();
            let len = tower.atom_length(n, k).to_f64();
            for t in 0..per_atom {
                total += 1;
                let mut y = left + len * (t as f64 + 0.5) / per_atom as f64;
                let (mut acc, mut dy) = (0.0f64, 1.0f64);
                let mut ok = true;
                for _ in 0..qn {
                    let (d1, d2, d3) = spec.derivatives_f64(y);
                    if d1.abs() < 1e-9 {
                        ok = false;
                        break;
                    }
                    let sf = d3 / d1 - 1.5 * (d2 / d1).powi(2);
                    acc += sf * dy * dy;
                    dy *= d1;
                    y = spec.eval_lift_f64(y);
                }
                if !ok || !acc.is_finite() {
                    skipped += 1;
                    continue;
                }
                if acc < 0.0 {
                    negative += 1;
                }
                max_s = max_s.max(acc);
            }
        }
        let used = total - skipped;
        out.push(ParabolicCheck {
            level: n,
            bridge: s,
            samples: total,
            skipped,
            negative_fraction: if used == 0 { 0.0 } else { negative as f64 / used as f64 },
            max_schwarzian: max_s,
        });
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalConstant {
    pub value: f64,
    /// First level from which the running maximum has stabilised.
    pub n0: usize,
    pub levels: Vec<usize>,
    pub attribution: &'static str,
    pub attribution_level: usize,
    /// Some level drops the running maximum by less than 5%.
    pub stabilized: bool,
}

/// Smallest `M` making items 1–4 hold on every given level, with `n₀` the
/// first level whose removal changes the maximum over the later levels by
/// under 5%.
pub fn empirical_constant(levels: &[LevelBounds]) -> Result<EmpiricalConstant> {
    if levels.is_empty() {
        return Err(Error::InvalidInput("no levels to take the constant over".into()));
    }
    let worst: Vec<(f64, &'static str)> = levels.iter().map(LevelBounds::worst).collect();
    let suffix_max = |from: usize| worst[from..].iter().map(|w| w.0).fold(0.0, f64::max);
    let start = (0..levels.len() - 1).find(|&m| suffix_max(m + 1) >= 0.95 * suffix_max(m));
    let (arg, (value, item)) = worst
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(k, w)| (k, *w))
        .unwrap();
    Ok(EmpiricalConstant {
        value,
        n0: levels[start.unwrap_or(levels.len() - 1)].level,
        levels: levels.iter().map(|l| l.level).collect(),
        attribution: item,
        attribution_level: levels[arg].level,
        stabilized: start.is_some(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RealBoundsReport {
    pub levels: Vec<LevelBounds>,
    pub yoccoz: Vec<YoccozFit>,
    pub parabolic: Vec<ParabolicCheck>,
    pub constant: EmpiricalConstant,
    pub min_length: Vec<InequalityCheck>,
}

/// Real-bounds items over `levels`, each needing `P_{n+1}`.
pub fn real_bounds(
    spec: &MapSpec,
    tower: &PartitionTower,
    levels: std::ops::RangeInclusive<usize>,
    parabolic_samples: usize,
) -> Result<RealBoundsReport> {
    let mut per_level = Vec::new();
    let mut yoccoz = Vec::new();
    let mut parabolic = Vec::new();
    for n in levels {
        per_level.push(level_bounds(spec, tower, n)?);
        let bridges = bridge_decomposition(spec, tower, n)?;
        yoccoz.extend(yoccoz_fits(tower, &bridges, 8));
        if parabolic_samples > 0 {
            parabolic.extend(almost_parabolic_check(spec, tower, &bridges, parabolic_samples));
        }
    }
    let constant = empirical_constant(&per_level)?;
    let min_length = per_level.iter().map(|l| l.min_length_check(constant.value)).collect();
    Ok(RealBoundsReport { levels: per_level, yoccoz, parabolic, constant, min_length })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::ContinuedFraction;
    use crate::map::Family;

    #[test]
    fn synthetic_profile_has_slope_minus_two() {
        let a = 60u64;
        let lengths: Vec<f64> = (1..a).map(|j| 0.3 / (j.min(a - j) as f64).powi(2)).collect();
        let (_, left, right) = fit_yoccoz_profile(1, 0, a, &lengths).unwrap();
        assert!((left.unwrap().slope + 2.0).abs() < 1e-9);
        assert!((right.unwrap().slope + 2.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_adjacency_tracks_the_quotient() {
        let cf = ContinuedFraction::new(&[1, 1, 1, 40, 1, 1, 1, 40], 8).unwrap();
        let spec = MapSpec::new(Family::RigidRotation, &cf.alpha_float(256), 256).unwrap();
        let tower = PartitionTower::build(&spec, 0, 6).unwrap();
        let stats = adjacency_ratios(&tower.partition(3).unwrap());
        assert!(stats.max_ratio > 40.0);
        let lb = level_bounds(&spec, &tower, 3).unwrap();
        assert!(lb.bridge_ratio.unwrap() < 2.0);
        assert!(lb.spot_ratio > 40.0);
    }
}
