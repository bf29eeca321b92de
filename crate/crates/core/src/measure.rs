//! The invariant measure on dynamical atoms, central-bridge covers and the
//! singularity certificate.

use rug::ops::Pow;
use rug::{Float, Integer};
use serde::Serialize;

use crate::cf::ContinuedFraction;
use crate::error::{Error, Result};
use crate::map::MapSpec;
use crate::partition::{BridgeDecomposition, DynamicalPartition, IndexRun, PartitionTower};
use crate::quadratic::QuadraticIrrational;

/// `μ(I_g^i) = δ_g`, independent of `i`.
pub fn atom_measure(cf: &ContinuedFraction, generation: usize) -> Result<&QuadraticIrrational> {
    if generation > cf.depth() {
        return Err(Error::DepthExceeded { requested: generation, available: cf.depth() });
    }
    Ok(cf.delta(generation as isize))
}

/// Measure of an arc, bracketed by the atoms of a partition it contains
/// and those it meets.
#[derive(Clone, Debug, Serialize)]
pub struct ArcMeasure {
    pub level: usize,
    pub lower: f64,
    pub upper: f64,
    pub inside_long: u64,
    pub inside_short: u64,
    pub boundary_long: u64,
    pub boundary_short: u64,
    /// `upper - lower` exceeds the requested tolerance.
    pub wide: bool,
}

impl ArcMeasure {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `μ` of the arc running forward from `x` to `y`; `x == y` means the whole circle.
///
/// Endpoints within `snap` of an atom boundary are treated as lying on it.
pub fn arc_measure(
    partition: &DynamicalPartition,
    cf: &ContinuedFraction,
    x: &Float,
    y: &Float,
    snap: f64,
    tol: f64,
) -> Result<ArcMeasure> {
    let n = partition.level;
    let long_mu = atom_measure(cf, n - 1)?.to_f64();
    let short_mu = atom_measure(cf, n)?.to_f64();
    let prec = x.prec().max(y.prec());
    let frac = |v: &Float| Float::with_val(prec, v - Float::with_val(prec, v.floor_ref()));
    let (u, v) = (frac(x), frac(y));
    let mut span = Float::with_val(prec, &v - &u);
    if span <= 0 {
        span += 1u32;
    }
    let mut counts = [[0u64; 2]; 2];
    for atom in partition.atoms() {
        let long = atom.label.generation + 1 == n;
        let mut start = Float::with_val(prec, &atom.left - &u);
        if start < 0 {
            start += 1u32;
        }
        if Float::with_val(prec, 1u32 - &start).to_f64() <= snap {
            start = Float::new(prec);
        }
        let end = Float::with_val(prec, &start + &atom.length);
        let wraps = Float::with_val(prec, &end - 1u32).to_f64() > snap;
        let inside = !wraps && Float::with_val(prec, &end - &span).to_f64() <= snap;
        let meets_end = Float::with_val(prec, &span - &start).to_f64() > snap;
        let slot = if inside {
            0
        } else if wraps || meets_end {
            1
        } else {
            continue;
        };
        counts[slot][usize::from(!long)] += 1;
    }
    let lower = counts[0][0] as f64 * long_mu + counts[0][1] as f64 * short_mu;
    let upper = lower + counts[1][0] as f64 * long_mu + counts[1][1] as f64 * short_mu;
    Ok(ArcMeasure {
        level: n,
        lower,
        upper: upper.min(1.0),
        inside_long: counts[0][0],
        inside_short: counts[0][1],
        boundary_long: counts[1][0],
        boundary_short: counts[1][1],
        wide: upper.min(1.0) - lower > tol,
    })
}

/// `⌊a^γ⌋`. Values within a relative `2^-40` below an integer round up, so
/// that `γ = 1/3` read from a double still gives `⌊1000^γ⌋ = 10`.
pub fn trim_width(a: u64, gamma: f64) -> u64 {
    let v = Float::with_val(192, a).pow(Float::with_val(192, gamma));
    let v = Float::with_val(192, &v * (1.0 + 2f64.powi(-40)));
    v.floor().to_integer().and_then(|i| i.to_u64()).unwrap_or(0)
}

/// The sets `A_{i,γ}^n`: the central atoms of every bridge of `I_{n−1}^i`.
#[derive(Clone, Debug, Serialize)]
pub struct CoverSpec {
    pub level: usize,
    pub gamma: f64,
    pub a_next: u64,
    /// `⌊a_{n+1}^γ⌋`.
    pub trim: u64,
    /// Kept `Δ_j` per bridge, `k_s + trim + 1 ..= k_{s+1} − trim`.
    pub kept: Vec<IndexRun>,
    pub atoms_per_long_atom: u64,
    pub q_n: u64,
    pub q_prev: u64,
}

impl CoverSpec {
    pub fn is_empty(&self) -> bool {
        self.atoms_per_long_atom == 0
    }

    /// Orbit indices `k` of the atoms `I_n^k` making up `A_{i,γ}^n`.
    pub fn atom_indices(&self, i: u64) -> impl Iterator<Item = u64> + '_ {
        self.kept.iter().flat_map(move |run| run.iter().map(move |j| i + self.q_prev + j * self.q_n))
    }
}

pub fn build_cover(tower: &PartitionTower, bridges: &BridgeDecomposition, gamma: f64) -> Result<CoverSpec> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let n = bridges.level;
    let trim = trim_width(bridges.a_next, gamma);
    let kept: Vec<IndexRun> = bridges
        .critical_times
        .windows(2)
        .map(|w| {
            let (first, last) = (w[0] + trim + 1, w[1].saturating_sub(trim));
            if first > last {
                IndexRun { first: 1, last: 0 }
            } else {
                IndexRun { first, last }
            }
        })
        .collect();
    let atoms_per_long_atom = kept.iter().map(IndexRun::len).sum();
    Ok(CoverSpec {
        level: n,
        gamma,
        a_next: bridges.a_next,
        trim,
        kept,
        atoms_per_long_atom,
        q_n: tower.q(n as isize) as u64,
        q_prev: tower.q(n as isize - 1) as u64,
    })
}

/// One inequality of the cover lemma: `holds` iff `slack ≥ 0`.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn at_least(lhs: f64, rhs: f64) -> Self {
        InequalityCheck { lhs, rhs, slack: lhs - rhs, holds: lhs >= rhs }
    }

    fn at_most(lhs: f64, rhs: f64) -> Self {
        InequalityCheck { lhs, rhs, slack: rhs - lhs, holds: lhs <= rhs }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    pub cover: CoverSpec,
    pub critical_count: usize,
    pub bound_constant: f64,
    /// `μ(A)` computed exactly as `q_n · |kept| · δ_n`.
    pub measure: f64,
    pub measure_exact: String,
    /// The per-atom sum agrees exactly with the product form.
    pub measure_sum_agrees: bool,
    pub length: f64,
    pub max_piece_length: f64,
    pub piece_measure_bound: InequalityCheck,
    pub measure_bound: InequalityCheck,
    /// Worst case over `i` of `|A_i| ≤ (4N+2)M|I_{n−1}^i| / ⌊a^γ⌋`.
    pub piece_length_bound: InequalityCheck,
    pub length_bound: InequalityCheck,
}

/// Measures `A_γ^n` both ways and checks the four cover inequalities with
/// `N` critical points and bound constant `M`.
pub fn cover_report(
    tower: &PartitionTower,
    cf: &ContinuedFraction,
    cover: &CoverSpec,
    critical_count: usize,
    bound_constant: f64,
) -> Result<CoverReport> {
    let n = cover.level;
    let prec = tower.precision_bits();
    let delta = atom_measure(cf, n)?;
    let kept = Integer::from(cover.atoms_per_long_atom);
    let piece_mu = delta.mul_int(&kept);
    let total_mu = piece_mu.mul_int(&Integer::from(cover.q_n));
    let mut summed = QuadraticIrrational::from_int(0, delta.radicand());
    for _ in 0..cover.q_n {
        summed = &summed + &piece_mu;
    }
    let a = cover.a_next as f64;
    let c = (4 * critical_count + 2) as f64;
    let trim = cover.trim as f64;

    let mut total_len = Float::new(prec);
    let mut worst_piece = InequalityCheck::at_most(0.0, f64::INFINITY);
    let mut max_piece = 0.0f64;
    for i in 0..cover.q_n {
        let mut len = Float::new(prec);
        for k in cover.atom_indices(i) {
            len += tower.atom_length(n, k as usize);
        }
        let lf = len.to_f64();
        max_piece = max_piece.max(lf);
        let bound = c * bound_constant * tower.atom_length(n - 1, i as usize).to_f64() / trim;
        let check = InequalityCheck::at_most(lf, bound);
        if check.slack < worst_piece.slack {
            worst_piece = check;
        }
        total_len += len;
    }
    let length = total_len.to_f64();
    let delta_f = delta.to_f64();
    Ok(CoverReport {
        cover: cover.clone(),
        critical_count,
        bound_constant,
        measure: total_mu.to_f64(),
        measure_exact: total_mu.to_string(),
        measure_sum_agrees: summed == total_mu,
        length,
        max_piece_length: max_piece,
        piece_measure_bound: InequalityCheck::at_least(piece_mu.to_f64(), delta_f * (a - c * a.powf(cover.gamma))),
        measure_bound: InequalityCheck::at_least(
            total_mu.to_f64(),
            (1.0 - 2.0 / a) * (1.0 - c / a.powf(1.0 - cover.gamma)),
        ),
        piece_length_bound: worst_piece,
        length_bound: InequalityCheck::at_most(length, c * bound_constant / trim),
    })
}

/// A cover `A` with `μ(A) ≥ 1 − ε` and `|A| ≤ ε`.
#[derive(Clone, Debug, Serialize)]
pub struct SingularityWitness {
    pub level: usize,
    pub gamma: f64,
    pub a_next: u64,
    pub measure: f64,
    pub length: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularityCertificate {
    pub epsilon: f64,
    pub witness: Option<SingularityWitness>,
    /// Best candidate per level, whether or not it qualifies.
    pub candidates: Vec<SingularityWitness>,
    /// The map has no critical point, so no certificate is expected.
    pub control: bool,
}

/// Searches levels `1..depth` and the γ grid for a witness of singularity.
pub fn singularity_certificate(
    spec: &MapSpec,
    tower: &PartitionTower,
    cf: &ContinuedFraction,
    epsilon: f64,
    gammas: &[f64],
) -> Result<SingularityCertificate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let mut candidates = Vec::new();
    let top = tower.depth().min(cf.depth()).saturating_sub(1);
    for n in 1..=top {
        let bridges = crate::partition::bridge_decomposition(spec, tower, n)?;
        if bridges.degenerate {
            continue;
        }
        let mut best: Option<SingularityWitness> = None;
        for &gamma in gammas {
            let cover = build_cover(tower, &bridges, gamma)?;
            if cover.is_empty() || cover.trim == 0 {
                continue;
            }
            let report = cover_report(tower, cf, &cover, spec.critical_points().len(), 1.0)?;
            let margin = (report.measure - (1.0 - epsilon)).min(epsilon - report.length);
            let w = SingularityWitness {
                level: n,
                gamma,
                a_next: cover.a_next,
                measure: report.measure,
                length: report.length,
                margin,
            };
            if best.as_ref().is_none_or(|b| w.margin > b.margin) {
                best = Some(w);
            }
        }
        candidates.extend(best);
    }
    let witness = candidates
        .iter()
        .filter(|w| w.margin >= 0.0)
        .max_by(|a, b| a.margin.total_cmp(&b.margin))
        .cloned();
    Ok(SingularityCertificate { epsilon, witness, candidates, control: spec.critical_points().is_empty() })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContentSum {
    pub dimension: f64,
    pub gamma: f64,
    pub levels: Vec<usize>,
    /// `Σ_i |A_i^{n_k}|^d` per level.
    pub terms: Vec<f64>,
    /// `S_K = Σ_{k ≥ K} terms_k`.
    pub tails: Vec<f64>,
    pub tails_decreasing: bool,
    /// `M^d (4N+2)^d q_{n_k}^{1 − d(γτ+1)}` per level.
    pub majorant: Vec<f64>,
    pub majorant_exponent: f64,
    pub majorant_converges: bool,
}

/// Partial sums of `Σ_i |A_i|^d` along the levels with non-empty covers.
#[allow(clippy::too_many_arguments)]
pub fn hausdorff_content_sum(
    spec: &MapSpec,
    tower: &PartitionTower,
    levels: &[usize],
    gamma: f64,
    dimension: f64,
    tau: f64,
    bound_constant: f64,
) -> Result<ContentSum> {
    let prec = tower.precision_bits();
    let c = (4 * spec.critical_points().len() + 2) as f64;
    let exponent = 1.0 - dimension * (gamma * tau + 1.0);
    let mut used = Vec::new();
    let mut terms = Vec::new();
    let mut majorant = Vec::new();
    for &n in levels {
        let bridges = crate::partition::bridge_decomposition(spec, tower, n)?;
        let cover = build_cover(tower, &bridges, gamma)?;
        if cover.is_empty() {
            continue;
        }
        let mut term = 0.0;
        for i in 0..cover.q_n {
            let mut len = Float::new(prec);
            for k in cover.atom_indices(i) {
                len += tower.atom_length(n, k as usize);
            }
            term += len.to_f64().powf(dimension);
        }
        used.push(n);
        terms.push(term);
        majorant.push((bound_constant * c).powf(dimension) * (cover.q_n as f64).powf(exponent));
    }
    let mut tails = vec![0.0; terms.len()];
    let mut acc = 0.0;
    for k in (0..terms.len()).rev() {
        acc += terms[k];
        tails[k] = acc;
    }
    let tails_decreasing = tails.len() >= 2 && tails.windows(2).all(|w| w[1] < w[0]);
    Ok(ContentSum {
        dimension,
        gamma,
        levels: used,
        terms,
        tails,
        tails_decreasing,
        majorant,
        majorant_exponent: exponent,
        majorant_converges: exponent < 0.0,
    })
}

/// Conjugacy signature: criticalities, rotation prefix, the critical points'
/// positions as orbit indices and the measures between consecutive ones.
#[derive(Clone, Debug, Serialize)]
pub struct Signature {
    pub critical_count: usize,
    pub criticalities: Vec<u32>,
    pub quotients: Vec<u64>,
    pub gaps: Vec<ArcMeasure>,
}

pub fn signature(spec: &MapSpec, tower: &PartitionTower, cf: &ContinuedFraction) -> Result<Signature> {
    let crit = spec.critical_points();
    if crit.is_empty() {
        return Err(Error::InvalidFamily("signature needs at least one critical point".into()));
    }
    let level = tower.depth().min(cf.depth());
    let partition = tower.partition(level)?;
    let snap = tower.orbit().max_abs_error() * 4.0 + crate::partition::tile_tolerance(tower.precision_bits(), 1);
    let mut gaps = Vec::with_capacity(crit.len());
    for k in 0..crit.len() {
        let next = &crit[(k + 1) % crit.len()];
        gaps.push(arc_measure(&partition, cf, &crit[k].position, &next.position, snap, f64::INFINITY)?);
    }
    Ok(Signature {
        critical_count: crit.len(),
        criticalities: crit.iter().map(|c| c.criticality).collect(),
        quotients: tower.quotients().to_vec(),
        gaps,
    })
}
