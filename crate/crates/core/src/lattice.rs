//! Belief quantization onto the type lattice
//! `P_N(X) = {(k_1/N, ..., k_|X|/N) : k_i >= 0, sum k_i = N}`.
//!
//! Points are numbered in colexicographic order of their count vectors
//! (compare the last coordinate first). The rank of a count vector is
//! computed in closed form, so no lookup table is stored.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Default cap on the number of lattice points.
pub const DEFAULT_LATTICE_CAP: u128 = 20_000_000;

/// Fractional parts closer than this are treated as equal when detecting
/// equidistant lattice points.
const TIE_TOLERANCE: f64 = 1e-9;

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of compositions of `n` into `parts` nonnegative parts,
/// `C(n + parts - 1, parts - 1)`.
pub fn composition_count(n: usize, parts: usize) -> Option<u128> {
    if parts == 0 {
        return Some((n == 0) as u128);
    }
    binomial((n + parts - 1) as u128, (parts - 1) as u128)
}

#[derive(Debug, Clone)]
pub struct BeliefLattice {
    x_size: usize,
    n: usize,
    counts: Vec<u32>,
    /// `C(s + p, p)` at `p * (n + 1) + s`.
    stair: Vec<u64>,
}

/// Alphabets up to this size use stack buffers in [`BeliefLattice::nearest`].
const STACK_DIM: usize = 16;

/// Result of a nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub id: usize,
    /// Euclidean distance from the query to the chosen point.
    pub distance: f64,
    /// Whether several lattice points were equidistant.
    pub tied: bool,
}

impl BeliefLattice {
    /// Enumerates `P_N(X)` for `|X| = x_size` and resolution `n`.
    pub fn build(x_size: usize, n: usize, cap: u128) -> Result<Self> {
        if x_size == 0 || n == 0 {
            return Err(Error::Validation(
                "lattice needs |X| >= 1 and N >= 1".into(),
            ));
        }
        if n > u32::MAX as usize {
            return Err(Error::Validation("lattice resolution too large".into()));
        }
        let count = composition_count(n, x_size).unwrap_or(u128::MAX);
        if count > cap {
            return Err(Error::TooLarge {
                what: "belief lattice",
                count,
                cap,
            });
        }
        let mut counts = Vec::with_capacity(count as usize * x_size);
        let mut current = vec![0u32; x_size];
        fill_colex(x_size - 1, n as u32, &mut current, &mut counts);
        let mut stair = vec![0u64; x_size * (n + 1)];
        for p in 0..x_size {
            for s in 0..=n {
                // bounded by the point count, which passed the cap
                stair[p * (n + 1) + s] = binomial((s + p) as u128, p as u128).unwrap_or(0) as u64;
            }
        }
        Ok(Self {
            x_size,
            n,
            counts,
            stair,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len() / self.x_size
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    /// Integer counts `k` of point `id`.
    pub fn counts(&self, id: usize) -> &[u32] {
        &self.counts[id * self.x_size..(id + 1) * self.x_size]
    }

    /// Coordinates `k / N` of point `id`.
    pub fn point(&self, id: usize) -> Vec<f64> {
        let n = self.n as f64;
        self.counts(id).iter().map(|&k| k as f64 / n).collect()
    }

    /// Id of the point with the given counts, if they form a composition of N.
    pub fn id_of(&self, counts: &[u32]) -> Option<usize> {
        if counts.len() != self.x_size || counts.iter().map(|&k| k as usize).sum::<usize>() != self.n
        {
            return None;
        }
        Some(self.rank(counts))
    }

    #[inline]
    fn rank(&self, counts: &[u32]) -> usize {
        let row = self.n + 1;
        let mut remaining = self.n;
        let mut rank: u64 = 0;
        for p in (1..self.x_size).rev() {
            let v = counts[p] as usize;
            // compositions with a smaller value at this position
            rank += self.stair[p * row + remaining] - self.stair[p * row + remaining - v];
            remaining -= v;
        }
        rank as usize
    }

    #[inline]
    fn distance_sq(&self, pi: &[f64], counts: &[u32]) -> f64 {
        let n = self.n as f64;
        pi.iter()
            .zip(counts)
            .map(|(p, &k)| {
                let d = p - k as f64 / n;
                d * d
            })
            .sum()
    }

    pub fn distance(&self, pi: &[f64], id: usize) -> f64 {
        libm::sqrt(self.distance_sq(pi, self.counts(id)))
    }

    /// Euclidean nearest lattice point of `pi`.
    ///
    /// Among equidistant points the one with the larger occupation count
    /// wins, then the lowest id.
    pub fn nearest(&self, pi: &[f64], occupation: Option<&OccupationCounts>) -> Nearest {
        let d = self.x_size;
        if d <= STACK_DIM {
            let mut base = [0u32; STACK_DIM];
            let mut frac = [0.0; STACK_DIM];
            let mut order = [0usize; STACK_DIM];
            self.nearest_in(pi, occupation, &mut base[..d], &mut frac[..d], &mut order[..d])
        } else {
            let mut base = vec![0u32; d];
            let mut frac = vec![0.0; d];
            let mut order = vec![0usize; d];
            self.nearest_in(pi, occupation, &mut base, &mut frac, &mut order)
        }
    }

    fn nearest_in(
        &self,
        pi: &[f64],
        occupation: Option<&OccupationCounts>,
        base: &mut [u32],
        frac: &mut [f64],
        order: &mut [usize],
    ) -> Nearest {
        let d = self.x_size;
        let n = self.n as f64;
        let mut floor_sum: i64 = 0;
        for i in 0..d {
            let y = (pi[i] * n).max(0.0);
            let b = libm::floor(y);
            base[i] = b as u32;
            frac[i] = y - b;
            floor_sum += b as i64;
        }
        let ups = (self.n as i64 - floor_sum).clamp(0, d as i64) as usize;
        // Rounding coordinate i up instead of down changes the squared
        // distance by 1 - 2 frac[i]; take the `ups` largest fractions.
        for (i, o) in order.iter_mut().enumerate() {
            *o = i;
        }
        order.sort_unstable_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));

        let unique = ups == 0 || ups == d || frac[order[ups - 1]] - frac[order[ups]] > TIE_TOLERANCE;
        if unique {
            for &i in &order[..ups] {
                base[i] += 1;
            }
            return Nearest {
                id: self.rank(base),
                distance: libm::sqrt(self.distance_sq(pi, base)),
                tied: false,
            };
        }

        let boundary = frac[order[ups - 1]];
        let surely_up: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| frac[i] > boundary + TIE_TOLERANCE)
            .collect();
        let group: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| (frac[i] - boundary).abs() <= TIE_TOLERANCE)
            .collect();
        let need = ups - surely_up.len();

        let mut best: Option<(usize, f64, u64)> = None;
        let mut consider = |counts: &[u32]| {
            let id = self.rank(counts);
            let dist = libm::sqrt(self.distance_sq(pi, counts));
            let occ = occupation.map_or(0, |o| o.get(id));
            let better = match best {
                None => true,
                Some((bid, _, bocc)) => occ > bocc || (occ == bocc && id < bid),
            };
            if better {
                best = Some((id, dist, occ));
            }
        };
        if group.len() <= 20 {
            for mask in 0u32..(1u32 << group.len()) {
                if mask.count_ones() as usize != need {
                    continue;
                }
                let mut counts = base.to_vec();
                for &i in &surely_up {
                    counts[i] += 1;
                }
                for (bit, &i) in group.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        counts[i] += 1;
                    }
                }
                consider(&counts);
            }
        } else {
            let mut counts = base.to_vec();
            for &i in &order[..ups] {
                counts[i] += 1;
            }
            consider(&counts);
        }
        let (id, distance, _) = best.expect("at least one candidate");
        Nearest {
            id,
            distance,
            tied: true,
        }
    }

    /// Nearest-neighbor map with occupation-count tie breaking.
    pub fn nearest_neighbor(&self, pi: &[f64], occupation: &OccupationCounts) -> usize {
        self.nearest(pi, Some(occupation)).id
    }

    /// Covering radius of the scaled root lattice `A_{d-1}`:
    /// `sqrt(a (d - a) / d) / N` with `a = floor(d / 2)`. Every belief lies
    /// within this Euclidean distance of its nearest lattice point.
    pub fn covering_radius(&self) -> f64 {
        let d = self.x_size as f64;
        let a = libm::floor(d / 2.0);
        libm::sqrt(a * (d - a) / d) / self.n as f64
    }
}

fn fill_colex(pos: usize, remaining: u32, current: &mut [u32], out: &mut Vec<u32>) {
    if pos == 0 {
        current[0] = remaining;
        out.extend_from_slice(current);
        return;
    }
    for v in 0..=remaining {
        current[pos] = v;
        fill_colex(pos - 1, remaining - v, current, out);
    }
}

/// Visit counters per lattice point, accumulated during exploration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupationCounts {
    visits: Vec<u64>,
}

impl OccupationCounts {
    pub fn new(len: usize) -> Self {
        Self {
            visits: vec![0; len],
        }
    }

    pub fn from_visits(visits: Vec<u64>) -> Self {
        Self { visits }
    }

    #[inline]
    pub fn get(&self, id: usize) -> u64 {
        self.visits[id]
    }

    #[inline]
    pub fn record(&mut self, id: usize) {
        self.visits[id] += 1;
    }

    pub fn total(&self) -> u64 {
        self.visits.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    /// Number of points with a positive count.
    pub fn support_size(&self) -> usize {
        self.visits.iter().filter(|&&v| v > 0).count()
    }

    /// Empirical occupation measure.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.visits.iter().map(|&v| v as f64 / total).collect()
    }
}

const NO_ACTION: u32 = u32::MAX;

/// A lattice policy extended to every belief: `pi -> nearest point -> action`.
#[derive(Debug, Clone)]
pub struct ExtendedPolicy {
    lattice: Arc<BeliefLattice>,
    actions: Vec<u32>,
    occupation: OccupationCounts,
    visited: Vec<usize>,
}

/// Where an extended-policy lookup landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeLookup {
    pub action: usize,
    pub point: usize,
    /// The nearest point had no trained action and the nearest trained
    /// point was used instead.
    pub fallback: bool,
}

/// Extends `policy_on_lattice` (pairs of point id and action) to all
/// beliefs.
pub fn extend_policy(
    policy_on_lattice: &[(usize, usize)],
    lattice: Arc<BeliefLattice>,
    occupation: OccupationCounts,
) -> Result<ExtendedPolicy> {
    if occupation.len() != lattice.len() {
        return Err(Error::Dimension {
            what: "occupation counts",
            expected: lattice.len(),
            found: occupation.len(),
        });
    }
    let mut actions = vec![NO_ACTION; lattice.len()];
    for &(point, action) in policy_on_lattice {
        if point >= lattice.len() {
            return Err(Error::Validation(alloc::format!(
                "lattice point {point} out of range"
            )));
        }
        actions[point] = action as u32;
    }
    let visited: Vec<usize> = (0..lattice.len())
        .filter(|&p| actions[p] != NO_ACTION)
        .collect();
    if visited.is_empty() {
        return Err(Error::Validation("lattice policy has no trained points".into()));
    }
    Ok(ExtendedPolicy {
        lattice,
        actions,
        occupation,
        visited,
    })
}

impl ExtendedPolicy {
    pub fn lookup(&self, pi: &[f64]) -> LatticeLookup {
        let point = self.lattice.nearest_neighbor(pi, &self.occupation);
        let a = self.actions[point];
        if a != NO_ACTION {
            return LatticeLookup {
                action: a as usize,
                point,
                fallback: false,
            };
        }
        // Outside the trained support: nearest trained point, same tie rule.
        let mut best = self.visited[0];
        let mut best_d = f64::INFINITY;
        for &p in &self.visited {
            let d = self.lattice.distance_sq(pi, self.lattice.counts(p));
            let closer = d < best_d - 1e-18;
            let tie = (d - best_d).abs() <= 1e-18
                && self.occupation.get(p) > self.occupation.get(best);
            if closer || tie {
                best = p;
                best_d = d;
            }
        }
        log::warn!(
            "belief left the trained lattice support (point {point}); using trained point {best}"
        );
        LatticeLookup {
            action: self.actions[best] as usize,
            point: best,
            fallback: true,
        }
    }

    pub fn action_at(&self, point: usize) -> Option<usize> {
        let a = self.actions[point];
        (a != NO_ACTION).then_some(a as usize)
    }

    pub fn lattice(&self) -> &Arc<BeliefLattice> {
        &self.lattice
    }

    pub fn occupation(&self) -> &OccupationCounts {
        &self.occupation
    }

    pub fn trained_points(&self) -> &[usize] {
        &self.visited
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_symbols_resolution_two() {
        let l = BeliefLattice::build(2, 2, DEFAULT_LATTICE_CAP).unwrap();
        assert_eq!(l.len(), 3);
        let pts: Vec<Vec<f64>> = (0..3).map(|i| l.point(i)).collect();
        assert!(pts.contains(&vec![0.0, 1.0]));
        assert!(pts.contains(&vec![0.5, 0.5]));
        assert!(pts.contains(&vec![1.0, 0.0]));
    }

    #[test]
    fn resolution_one_gives_vertices() {
        let l = BeliefLattice::build(3, 1, DEFAULT_LATTICE_CAP).unwrap();
        assert_eq!(l.len(), 3);
        for i in 0..3 {
            assert_eq!(l.counts(i).iter().sum::<u32>(), 1);
        }
    }

    #[test]
    fn count_matches_brute_force_and_binomial() {
        let l = BeliefLattice::build(4, 8, DEFAULT_LATTICE_CAP).unwrap();
        let mut brute = 0;
        for a in 0..=8 {
            for b in 0..=8 {
                for c in 0..=8 {
                    for d in 0..=8 {
                        if a + b + c + d == 8 {
                            brute += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(l.len(), brute);
        assert_eq!(l.len() as u128, composition_count(8, 4).unwrap());
        assert_eq!(brute, 165);
    }

    #[test]
    fn rank_inverts_enumeration() {
        for (d, n) in [(2, 5), (3, 4), (4, 6), (5, 3)] {
            let l = BeliefLattice::build(d, n, DEFAULT_LATTICE_CAP).unwrap();
            for id in 0..l.len() {
                assert_eq!(l.id_of(l.counts(id)), Some(id));
            }
        }
    }

    #[test]
    fn colex_order() {
        let l = BeliefLattice::build(2, 2, DEFAULT_LATTICE_CAP).unwrap();
        assert_eq!(l.counts(0), &[2, 0]);
        assert_eq!(l.counts(1), &[1, 1]);
        assert_eq!(l.counts(2), &[0, 2]);
    }

    #[test]
    fn cap_guard() {
        assert!(matches!(
            BeliefLattice::build(8, 100, 1000),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn nearest_examples() {
        let l = BeliefLattice::build(2, 2, DEFAULT_LATTICE_CAP).unwrap();
        let occ = OccupationCounts::new(l.len());
        let id = l.nearest_neighbor(&[0.6, 0.4], &occ);
        assert_eq!(l.point(id), vec![0.5, 0.5]);
        for p in 0..l.len() {
            let hit = l.nearest(&l.point(p), Some(&occ));
            assert_eq!(hit.id, p);
            assert_eq!(hit.distance, 0.0);
        }
    }

    #[test]
    fn ties_prefer_occupied_then_lowest() {
        // (1/4, 3/4) is equidistant from (0, 1) and (1/2, 1/2) at N = 2.
        let l = BeliefLattice::build(2, 2, DEFAULT_LATTICE_CAP).unwrap();
        let mid = l.id_of(&[1, 1]).unwrap();
        let edge = l.id_of(&[0, 2]).unwrap();
        let mut occ = OccupationCounts::new(l.len());
        let hit = l.nearest(&[0.25, 0.75], Some(&occ));
        assert!(hit.tied);
        assert_eq!(hit.id, mid.min(edge));
        occ.record(edge);
        assert_eq!(l.nearest_neighbor(&[0.25, 0.75], &occ), edge);
        occ.record(mid);
        occ.record(mid);
        assert_eq!(l.nearest_neighbor(&[0.25, 0.75], &occ), mid);
    }

    #[test]
    fn extension_uses_trained_action_or_falls_back() {
        let l = Arc::new(BeliefLattice::build(2, 2, DEFAULT_LATTICE_CAP).unwrap());
        let mid = l.id_of(&[1, 1]).unwrap();
        let mut occ = OccupationCounts::new(l.len());
        occ.record(mid);
        let policy = extend_policy(&[(mid, 7)], l.clone(), occ).unwrap();
        let hit = policy.lookup(&[0.5, 0.5]);
        assert_eq!((hit.action, hit.fallback), (7, false));
        let far = policy.lookup(&[1.0, 0.0]);
        assert_eq!((far.action, far.point, far.fallback), (7, mid, true));
    }

    #[test]
    fn constant_policy_extends_to_constant() {
        let l = Arc::new(BeliefLattice::build(3, 3, DEFAULT_LATTICE_CAP).unwrap());
        let all: Vec<(usize, usize)> = (0..l.len()).map(|p| (p, 4)).collect();
        let policy = extend_policy(&all, l, OccupationCounts::new(10)).unwrap();
        for pi in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0], [0.34, 0.33, 0.33]] {
            assert_eq!(policy.lookup(&pi).action, 4);
        }
    }
}
