//! Dynamical partitions `P_n`, refinement, point location and the
//! critical-spot / bridge decomposition of the long atoms.

use std::cmp::Ordering;

use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::{iterate_orbit, MapSpec, OrbitSegment};
use crate::numeric;
use crate::rotation::closest_return_quotients;

/// Orbit of a base point together with the return times it realises;
/// every partition level up to `depth` is read off it.
#[derive(Clone, Debug)]
pub struct PartitionTower {
    prec: u32,
    orbit: OrbitSegment,
    // a_1..a_N
    a: Vec<u64>,
    // index 0 holds n = -1
    q: Vec<usize>,
    p: Vec<i64>,
    base_index: usize,
}

impl PartitionTower {
    /// Extracts `a_1..a_depth` from the closest returns of the base
    /// critical point and keeps an orbit long enough for `P_depth`.
    pub fn build(spec: &MapSpec, base_index: usize, depth: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::InvalidInput("partition depth must be at least 1".into()));
        }
        let base = spec.base_point(base_index)?;
        let reading = closest_return_quotients(spec, &base, depth)?;
        if let Some((p, q)) = reading.rational_lock {
            return Err(Error::Geometry(format!("rotation number locked at {p}/{q}; no partitions")));
        }
        if reading.quotients.len() < depth {
            return Err(Error::DepthExceeded { requested: depth, available: reading.quotients.len() });
        }
        let mut q = vec![0usize, 1];
        q.extend(reading.return_times.iter().map(|&v| v as usize));
        let need = q[depth + 1] + q[depth];
        let orbit = iterate_orbit(spec, &base, need)?;
        let p0 = orbit.diff(1, 0).floor().to_integer().and_then(|i| i.to_i64()).expect("winding fits i64");
        let mut p = vec![1, p0];
        p.extend(reading.numerators.iter().copied());
        Ok(PartitionTower { prec: spec.precision_bits(), orbit, a: reading.quotients, q, p, base_index })
    }

    pub fn depth(&self) -> usize {
        self.a.len()
    }

    pub fn base_index(&self) -> usize {
        self.base_index
    }

    pub fn precision_bits(&self) -> u32 {
        self.prec
    }

    pub fn quotients(&self) -> &[u64] {
        &self.a
    }

    /// `a_n`, 1-based.
    pub fn a(&self, n: usize) -> u64 {
        self.a[n - 1]
    }

    /// `q_n` for `n ≥ -1`.
    pub fn q(&self, n: isize) -> usize {
        self.q[(n + 1) as usize]
    }

    pub fn p(&self, n: isize) -> i64 {
        self.p[(n + 1) as usize]
    }

    pub fn orbit(&self) -> &OrbitSegment {
        &self.orbit
    }

    /// Shifts one orbit point by `delta`; used to exercise the geometry checks.
    pub fn perturb_point(&mut self, k: usize, delta: f64) {
        self.orbit.shift_point(k, delta);
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n < 1 || n > self.depth() {
            return Err(Error::DepthExceeded { requested: n, available: self.depth() });
        }
        Ok(())
    }

    /// Orbit indices `(left, right)` of the atom `I_g^i`.
    pub fn endpoints(&self, g: usize, i: usize) -> (usize, usize) {
        let far = i + self.q(g as isize);
        if g.is_multiple_of(2) {
            (i, far)
        } else {
            (far, i)
        }
    }

    /// `|I_g^i| = (−1)^g (x_{i+q_g} − x_i − p_g)`.
    pub fn atom_length(&self, g: usize, i: usize) -> Float {
        let far = i + self.q(g as isize);
        let mut d = self.orbit.diff(far, i);
        d -= self.p(g as isize);
        if g % 2 == 1 {
            d = -d;
        }
        d
    }

    /// Length of the arc from `x_from` forward to `x_to`, in `[0, 1)`.
    pub fn forward_gap(&self, from: usize, to: usize) -> Float {
        let mut d = Float::with_val(self.prec, self.orbit.frac(to) - self.orbit.frac(from));
        if d < 0 {
            d += 1u32;
        }
        d
    }

    /// The partition `P_n`, with its tiling verified.
    pub fn partition(&self, n: usize) -> Result<DynamicalPartition> {
        self.check_level(n)?;
        let mut atoms = Vec::with_capacity(self.q(n as isize) + self.q(n as isize - 1));
        for (g, count) in [(n - 1, self.q(n as isize)), (n, self.q(n as isize - 1))] {
            for i in 0..count {
                let (l, r) = self.endpoints(g, i);
                let length = self.atom_length(g, i);
                if length <= 0 {
                    return Err(Error::Geometry(format!("atom I_{g}^{i} has non-positive length")));
                }
                atoms.push(Atom {
                    label: AtomLabel { generation: g, index: i },
                    left_point: l,
                    right_point: r,
                    left: self.orbit.frac(l).clone(),
                    right: self.orbit.frac(r).clone(),
                    length,
                });
            }
        }
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&x, &y| atoms[x].left.partial_cmp(&atoms[y].left).unwrap_or(Ordering::Equal));

        for w in 0..order.len() {
            let here = &atoms[order[w]];
            let next = &atoms[order[(w + 1) % order.len()]];
            if here.right_point != next.left_point {
                return Err(Error::Geometry(format!(
                    "level {n}: atom {} does not abut {} (endpoints x_{} and x_{})",
                    here.label, next.label, here.right_point, next.left_point
                )));
            }
        }
        let mut total = Float::new(self.prec);
        for a in &atoms {
            total += &a.length;
        }
        let residual = Float::with_val(self.prec, total - 1u32).abs().to_f64();
        let tol = tile_tolerance(self.prec, atoms.len());
        if residual > tol {
            return Err(Error::Geometry(format!("level {n}: tiling residual {residual:e} exceeds {tol:e}")));
        }
        Ok(DynamicalPartition { level: n, atoms, order, tiling_residual: residual, prec: self.prec })
    }
}

pub fn tile_tolerance(prec: u32, atoms: usize) -> f64 {
    2f64.powi(-((prec - 32) as i32)) * atoms as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AtomLabel {
    pub generation: usize,
    pub index: usize,
}

impl std::fmt::Display for AtomLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "I_{}^{}", self.generation, self.index)
    }
}

/// Oriented arc `[left, right)` between two orbit points.
#[derive(Clone, Debug)]
pub struct Atom {
    pub label: AtomLabel,
    pub left_point: usize,
    pub right_point: usize,
    pub left: Float,
    pub right: Float,
    pub length: Float,
}

#[derive(Clone, Debug)]
pub struct DynamicalPartition {
    pub level: usize,
    atoms: Vec<Atom>,
    // atom positions sorted by left endpoint
    order: Vec<usize>,
    pub tiling_residual: f64,
    prec: u32,
}

impl DynamicalPartition {
    /// Long atoms `I_{n−1}^i` first, then short atoms `I_n^i`.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Atoms in circle order starting from the lowest left endpoint.
    pub fn atoms_in_order(&self) -> impl Iterator<Item = &Atom> {
        self.order.iter().map(move |&k| &self.atoms[k])
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn long_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.label.generation + 1 == self.level).count()
    }

    pub fn atom(&self, label: AtomLabel) -> Option<&Atom> {
        let long = self.long_count();
        let pos = if label.generation + 1 == self.level {
            label.index
        } else if label.generation == self.level {
            long + label.index
        } else {
            return None;
        };
        self.atoms.get(pos).filter(|a| a.label == label)
    }

    pub fn min_length(&self) -> Float {
        self.atoms.iter().map(|a| a.length.clone()).min_by(|a, b| a.partial_cmp(b).unwrap()).unwrap()
    }

    /// Atom containing `x`; at an endpoint (within `tol`) both neighbours are returned.
    pub fn locate(&self, x: &Float, tol: f64) -> Located {
        let prec = self.prec;
        let mut u = Float::with_val(prec, x - Float::with_val(prec, x.floor_ref()));
        if u >= 1 {
            u -= 1u32;
        }
        // last atom whose left endpoint is <= u, wrapping to the last one
        let pos = self.order.partition_point(|&k| self.atoms[k].left <= u);
        let w = if pos == 0 { self.order.len() - 1 } else { pos - 1 };
        let here = &self.atoms[self.order[w]];
        let prev = &self.atoms[self.order[(w + self.order.len() - 1) % self.order.len()]];
        let next = &self.atoms[self.order[(w + 1) % self.order.len()]];
        let dist = |a: &Float| {
            let d = Float::with_val(prec, &u - a).abs().to_f64();
            d.min(1.0 - d)
        };
        let alternative = if dist(&here.left) <= tol {
            Some(prev.label)
        } else if dist(&here.right) <= tol {
            Some(next.label)
        } else {
            None
        };
        Located { atom: here.label, alternative }
    }

    /// Linear scan; the oracle for [`locate`](Self::locate).
    pub fn locate_by_scan(&self, x: &Float) -> AtomLabel {
        let prec = self.prec;
        let u = Float::with_val(prec, x - Float::with_val(prec, x.floor_ref()));
        for a in &self.atoms {
            let mut off = Float::with_val(prec, &u - &a.left);
            if off < 0 {
                off += 1u32;
            }
            if off < a.length {
                return a.label;
            }
        }
        unreachable!("atoms tile the circle")
    }

    /// CSV rows `generation,index,left,right,length`.
    pub fn to_csv(&self, digits: usize) -> String {
        let mut out = String::from("generation,index,left,right,length\n");
        for a in self.atoms_in_order() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                a.label.generation,
                a.label.index,
                numeric::decimal(&a.left, digits),
                numeric::decimal(&a.right, digits),
                numeric::decimal(&a.length, digits)
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Located {
    pub atom: AtomLabel,
    /// Set when the point sits on a shared endpoint.
    pub alternative: Option<AtomLabel>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementReport {
    pub level: usize,
    pub pieces_per_long_atom: u64,
    pub long_atoms_checked: usize,
    pub short_atoms_carried: usize,
    /// Largest amount by which a piece sticks out of its parent.
    pub worst_violation: f64,
    pub worst_length_mismatch: f64,
}

/// Checks that every `I_{n−1}^i` of `P_n` splits into `Δ_{i,0..a_{n+1}−1}`
/// plus `I_{n+1}^i` of `P_{n+1}`, and that the short atoms of `P_n` survive.
pub fn refine_check(tower: &PartitionTower, n: usize) -> Result<RefinementReport> {
    tower.check_level(n + 1)?;
    let prec = tower.prec;
    let fine = tower.partition(n + 1)?;
    let a_next = tower.a(n + 1);
    let (qn, qn1) = (tower.q(n as isize), tower.q(n as isize - 1));
    let tol = tile_tolerance(prec, fine.len());
    let mut worst = 0.0f64;
    let mut worst_len = 0.0f64;
    for i in 0..qn {
        let (pl, _) = tower.endpoints(n - 1, i);
        let parent_len = tower.atom_length(n - 1, i);
        let mut pieces: Vec<(usize, usize)> = (0..a_next as usize).map(|j| (n, i + qn1 + j * qn)).collect();
        pieces.push((n + 1, i));
        let mut sum = Float::new(prec);
        for &(g, k) in &pieces {
            let (l, _) = tower.endpoints(g, k);
            let len = tower.atom_length(g, k);
            let mut off = tower.forward_gap(pl, l);
            // a piece starting exactly at the parent's left end
            if Float::with_val(prec, 1u32 - &off).to_f64() <= tol {
                off = Float::new(prec);
            }
            let over = Float::with_val(prec, &off + &len) - &parent_len;
            worst = worst.max(over.to_f64());
            sum += &len;
        }
        let mismatch = Float::with_val(prec, &sum - &parent_len).abs().to_f64();
        worst_len = worst_len.max(mismatch);
    }
    for i in 0..qn1 {
        let label = AtomLabel { generation: n, index: i };
        if fine.atom(label).is_none() {
            return Err(Error::Geometry(format!("short atom {label} of P_{n} missing from P_{}", n + 1)));
        }
    }
    if worst > tol || worst_len > tol {
        return Err(Error::Geometry(format!(
            "refinement of P_{n}: piece overhang {worst:e}, length mismatch {worst_len:e} (tolerance {tol:e})"
        )));
    }
    Ok(RefinementReport {
        level: n,
        pieces_per_long_atom: a_next + 1,
        long_atoms_checked: qn,
        short_atoms_carried: qn1,
        worst_violation: worst.max(0.0),
        worst_length_mismatch: worst_len,
    })
}

/// `(i, j) ↦ i + q_{n−1} + j q_n` is a bijection from
/// `[0, q_n) × [0, a_{n+1})` onto `[q_{n−1}, q_{n+1})`.
pub fn index_tiling_holds(q_prev: u64, q_n: u64, a_next: u64) -> bool {
    let q_next = a_next * q_n + q_prev;
    let span = (q_next - q_prev) as usize;
    let mut seen = vec![false; span];
    for i in 0..q_n {
        for j in 0..a_next {
            let k = i + q_prev + j * q_n;
            if k < q_prev || k >= q_next || seen[(k - q_prev) as usize] {
                return false;
            }
            seen[(k - q_prev) as usize] = true;
        }
    }
    seen.into_iter().all(|s| s)
}

/// Run of consecutive `Δ_j` with `first..=last`; empty when `first > last`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IndexRun {
    pub first: u64,
    pub last: u64,
}

impl IndexRun {
    pub fn len(&self) -> u64 {
        if self.first > self.last {
            0
        } else {
            self.last - self.first + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> {
        self.first..self.last.saturating_add(1).max(self.first)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalHit {
    pub critical_index: usize,
    /// Atom `I_n^k` of `P_{n+1}` whose closure holds the critical point.
    pub atom_index: usize,
    pub time: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BridgeDecomposition {
    pub level: usize,
    pub a_next: u64,
    pub r_n: usize,
    /// `k_0 = 0 < k_1 < ... < k_{r_n} = a_{n+1} − 1`.
    pub critical_times: Vec<u64>,
    /// Orbit index `q_{n−1} + k_s q_n` of each spot `Δ_{k_s}` (its `I_n` label).
    pub spot_indices: Vec<u64>,
    /// `G_s` between `k_s` and `k_{s+1}` for `0 ≤ s < r_n`.
    pub bridges: Vec<IndexRun>,
    /// `B_s`: bridges trimmed by one atom per side.
    pub reduced_bridges: Vec<IndexRun>,
    pub hits: Vec<CriticalHit>,
    /// `a_{n+1} ≤ 2`: no bridge can hold an atom.
    pub degenerate: bool,
}

impl BridgeDecomposition {
    /// Spots and bridges as index sets cover `0..a_{n+1}` exactly once.
    pub fn reconstructs_long_atom(&self) -> bool {
        let mut seen = vec![0u8; self.a_next as usize];
        for &k in &self.critical_times {
            seen[k as usize] += 1;
        }
        for b in &self.bridges {
            for j in b.iter() {
                seen[j as usize] += 1;
            }
        }
        seen.iter().all(|&c| c == 1)
    }
}

/// Critical times of `T_n = f^{q_n}` on `I_{n−1} \ I_{n+1}` and the bridges between them.
pub fn bridge_decomposition(spec: &MapSpec, tower: &PartitionTower, n: usize) -> Result<BridgeDecomposition> {
    tower.check_level(n + 1)?;
    let fine = tower.partition(n + 1)?;
    let a_next = tower.a(n + 1);
    let (qn, qn1) = (tower.q(n as isize) as u64, tower.q(n as isize - 1) as u64);
    let q_next = tower.q(n as isize + 1) as u64;
    let tol = tower.orbit().max_abs_error() * 4.0 + tile_tolerance(tower.prec, 1);
    let mut hits = Vec::new();
    for (ci, c) in spec.critical_points().iter().enumerate() {
        if ci == tower.base_index {
            continue;
        }
        let loc = fine.locate(&c.position, tol);
        let mut candidates: Vec<AtomLabel> = std::iter::once(loc.atom).chain(loc.alternative).collect();
        candidates.retain(|l| l.generation == n && (l.index as u64) >= qn1 && (l.index as u64) < q_next);
        candidates.sort();
        if let Some(l) = candidates.first() {
            let time = (l.index as u64 - qn1) / qn;
            hits.push(CriticalHit { critical_index: ci, atom_index: l.index, time });
        }
    }
    let last = a_next - 1;
    let mut times = vec![0u64];
    let mut interior: Vec<u64> = hits.iter().map(|h| h.time).filter(|&t| t > 0 && t < last).collect();
    interior.sort_unstable();
    interior.dedup();
    times.extend(interior);
    if last > 0 {
        times.push(last);
    }
    let r_n = times.len() - 1;
    let bridges: Vec<IndexRun> =
        times.windows(2).map(|w| IndexRun { first: w[0] + 1, last: w[1].saturating_sub(1) }).collect();
    let reduced_bridges = bridges
        .iter()
        .map(|b| if b.len() < 3 { IndexRun { first: 1, last: 0 } } else { IndexRun { first: b.first + 1, last: b.last - 1 } })
        .collect();
    let spot_indices = times.iter().map(|&k| qn1 + k * qn).collect();
    Ok(BridgeDecomposition {
        level: n,
        a_next,
        r_n,
        critical_times: times,
        spot_indices,
        bridges,
        reduced_bridges,
        hits,
        degenerate: a_next <= 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::ContinuedFraction;
    use crate::map::Family;

    fn golden_rotation() -> (MapSpec, ContinuedFraction) {
        let cf = ContinuedFraction::new(&[1; 30], 30).unwrap();
        let spec = MapSpec::new(Family::RigidRotation, &cf.alpha_float(256), 256).unwrap();
        (spec, cf)
    }

    #[test]
    fn golden_rotation_level_four() {
        let (spec, cf) = golden_rotation();
        let tower = PartitionTower::build(&spec, 0, 6).unwrap();
        let p = tower.partition(4).unwrap();
        assert_eq!(p.len(), 8);
        assert_eq!(p.long_count(), 5);
        let d3 = cf.delta_float(3, 256);
        let d4 = cf.delta_float(4, 256);
        for a in p.atoms() {
            let want = if a.label.generation == 3 { &d3 } else { &d4 };
            let err = Float::with_val(256, &a.length - want).abs().to_f64();
            assert!(err < 1e-70, "{}: {err:e}", a.label);
        }
    }

    #[test]
    fn locate_agrees_with_scan() {
        let (spec, _) = golden_rotation();
        let tower = PartitionTower::build(&spec, 0, 5).unwrap();
        let p = tower.partition(3).unwrap();
        for k in 0..200 {
            let x = Float::with_val(256, k as f64 / 200.0 + 0.001);
            let loc = p.locate(&x, 1e-60);
            assert_eq!(loc.atom, p.locate_by_scan(&x));
        }
        let x0 = p.locate(&Float::new(256), 1e-60);
        assert!(x0.alternative.is_some());
        assert_eq!(p.locate_by_scan(&Float::new(256)), AtomLabel { generation: 2, index: 0 });
    }

    #[test]
    fn rotation_refines_exactly() {
        let (spec, _) = golden_rotation();
        let tower = PartitionTower::build(&spec, 0, 10).unwrap();
        for n in 1..10 {
            let r = refine_check(&tower, n).unwrap();
            assert_eq!(r.pieces_per_long_atom, 2);
            assert!(r.worst_violation < 1e-60);
        }
    }

    #[test]
    fn corrupted_point_is_caught() {
        let (spec, _) = golden_rotation();
        let mut tower = PartitionTower::build(&spec, 0, 8).unwrap();
        tower.perturb_point(5, 0.05);
        let bad = (1..8).any(|n| refine_check(&tower, n).is_err());
        assert!(bad);
    }

    #[test]
    fn rotation_has_single_bridge() {
        let word = [2, 1, 9, 1, 3];
        let cf = ContinuedFraction::new(&word, 5).unwrap();
        let spec = MapSpec::new(Family::RigidRotation, &cf.alpha_float(256), 256).unwrap();
        let tower = PartitionTower::build(&spec, 0, 5).unwrap();
        let b = bridge_decomposition(&spec, &tower, 2).unwrap();
        assert_eq!(b.a_next, 9);
        assert_eq!(b.r_n, 1);
        assert_eq!(b.critical_times, vec![0, 8]);
        assert_eq!(b.bridges, vec![IndexRun { first: 1, last: 7 }]);
        assert_eq!(b.reduced_bridges, vec![IndexRun { first: 2, last: 6 }]);
        assert!(b.reconstructs_long_atom());
    }

    #[test]
    fn index_tiling() {
        for (qp, qn, a) in [(0, 1, 1), (1, 2, 3), (5, 8, 40), (122, 125, 1)] {
            assert!(index_tiling_holds(qp, qn, a));
        }
    }
}
