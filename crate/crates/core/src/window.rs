//! Sliding finite window approximation.
//!
//! A window holds the last N (quantizer, channel output) pairs. Its id is a
//! mixed-radix number with base `|M'| * |Q|`; each pair contributes the digit
//! `q * |M'| + m'` and the newest pair is the least significant digit.
//! The approximate predictor re-runs the filter over the window starting
//! from the invariant distribution.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::belief::{bayes_cost_slice, posterior_into, predict_into};
use crate::error::{Error, Result};
use crate::model::SystemSpec;
use crate::quantizer::QuantizerSet;

/// Above this many windows the table is filled lazily.
pub const DEFAULT_DENSE_CAP: u64 = 5_000_000;

/// Encoding of windows as integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowCodec {
    n: usize,
    mp_size: u64,
    q_count: u64,
    base: u64,
    count: u64,
    /// `base^(N-1)`
    high: u64,
}

impl WindowCodec {
    pub fn new(n: usize, mp_size: usize, q_count: usize) -> Result<Self> {
        if n == 0 || mp_size == 0 || q_count == 0 {
            return Err(Error::Validation(
                "window length, output alphabet and quantizer set must be nonempty".into(),
            ));
        }
        let base = (mp_size as u64)
            .checked_mul(q_count as u64)
            .ok_or(Error::TooLarge {
                what: "window base",
                count: mp_size as u128 * q_count as u128,
                cap: u64::MAX as u128,
            })?;
        let mut count: u64 = 1;
        let mut high: u64 = 1;
        for i in 0..n {
            count = count.checked_mul(base).ok_or(Error::TooLarge {
                what: "window count",
                count: u128::MAX,
                cap: u64::MAX as u128,
            })?;
            if i + 1 < n {
                high = count;
            }
        }
        Ok(Self {
            n,
            mp_size: mp_size as u64,
            q_count: q_count as u64,
            base,
            count,
            high,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of distinct windows, `(|M'| |Q|)^N`.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    #[inline]
    pub fn digit(&self, q_index: usize, m_prime: usize) -> u64 {
        q_index as u64 * self.mp_size + m_prime as u64
    }

    /// Drops the oldest pair and appends `(q_index, m_prime)`.
    #[inline]
    pub fn advance(&self, id: u64, q_index: usize, m_prime: usize) -> u64 {
        (id % self.high) * self.base + self.digit(q_index, m_prime)
    }

    /// Pair at position `k`, with `k = 0` the oldest.
    #[inline]
    pub fn pair(&self, id: u64, k: usize) -> (usize, usize) {
        let mut d = id;
        for _ in 0..(self.n - 1 - k) {
            d /= self.base;
        }
        let digit = d % self.base;
        ((digit / self.mp_size) as usize, (digit % self.mp_size) as usize)
    }

    pub fn encode(&self, state: &WindowState) -> Result<u64> {
        if state.outputs.len() != self.n || state.actions.len() != self.n {
            return Err(Error::Dimension {
                what: "window length",
                expected: self.n,
                found: state.outputs.len(),
            });
        }
        let mut id = 0u64;
        for (&q, &mp) in state.actions.iter().zip(&state.outputs) {
            if q as u64 >= self.q_count || mp as u64 >= self.mp_size {
                return Err(Error::Validation("window entry out of range".into()));
            }
            id = id * self.base + self.digit(q, mp);
        }
        Ok(id)
    }

    pub fn decode(&self, id: u64) -> WindowState {
        let (actions, outputs) = (0..self.n).map(|k| self.pair(id, k)).unzip();
        WindowState {
            outputs,
            actions,
            id,
        }
    }
}

/// Last N outputs and quantizer indices, oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowState {
    pub outputs: Vec<usize>,
    pub actions: Vec<usize>,
    pub id: u64,
}

/// Filter from the invariant distribution along the window. `None` if some
/// output in the window has zero probability.
pub fn approximate_predictor(
    spec: &SystemSpec,
    codec: &WindowCodec,
    set: &QuantizerSet,
    id: u64,
) -> Option<Vec<f64>> {
    let n = spec.x_size();
    let mut pi = spec.zeta().probs().to_vec();
    let mut filter = vec![0.0; n];
    for k in 0..codec.len() {
        let (q, mp) = codec.pair(id, k);
        posterior_into(spec, &pi, set.get(q), mp, &mut filter).ok()?;
        predict_into(spec, &filter, &mut pi);
    }
    Some(pi)
}

#[derive(Debug, Clone)]
struct Entry {
    predictor: Vec<f64>,
    costs: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Storage {
    Dense {
        predictors: Vec<f64>,
        costs: Vec<f64>,
        reachable: Vec<bool>,
    },
    Lazy(HashMap<u64, Option<Entry>>),
}

/// Approximate predictors and per-quantizer costs indexed by window id.
#[derive(Debug, Clone)]
pub struct WindowTable {
    spec: Arc<SystemSpec>,
    set: Arc<QuantizerSet>,
    codec: WindowCodec,
    storage: Storage,
}

impl WindowTable {
    /// Dense when the window count is at most `dense_cap`, lazy otherwise.
    pub fn build(
        spec: Arc<SystemSpec>,
        set: Arc<QuantizerSet>,
        n: usize,
        dense_cap: u64,
    ) -> Result<Self> {
        let codec = WindowCodec::new(n, spec.mp_size(), set.len())?;
        let storage = if codec.count() <= dense_cap {
            let count = codec.count() as usize;
            let xs = spec.x_size();
            let qs = set.len();
            let mut predictors = vec![0.0; count * xs];
            let mut costs = vec![0.0; count * qs];
            let mut reachable = vec![false; count];
            for id in 0..count {
                if let Some(p) = approximate_predictor(&spec, &codec, &set, id as u64) {
                    for (qi, q) in set.iter().enumerate() {
                        costs[id * qs + qi] = bayes_cost_slice(&spec, &p, q);
                    }
                    predictors[id * xs..(id + 1) * xs].copy_from_slice(&p);
                    reachable[id] = true;
                }
            }
            log::debug!(
                "window table N={n}: {count} windows, {} reachable",
                reachable.iter().filter(|&&r| r).count()
            );
            Storage::Dense {
                predictors,
                costs,
                reachable,
            }
        } else {
            log::info!(
                "window table N={n}: {} windows exceed the dense cap, filling lazily",
                codec.count()
            );
            Storage::Lazy(HashMap::new())
        };
        Ok(Self {
            spec,
            set,
            codec,
            storage,
        })
    }

    pub fn codec(&self) -> &WindowCodec {
        &self.codec
    }

    pub fn spec(&self) -> &Arc<SystemSpec> {
        &self.spec
    }

    pub fn quantizers(&self) -> &Arc<QuantizerSet> {
        &self.set
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense { .. })
    }

    fn lazy_entry(&mut self, id: u64) -> Option<&Entry> {
        let Storage::Lazy(map) = &mut self.storage else {
            return None;
        };
        let (spec, set, codec) = (&self.spec, &self.set, &self.codec);
        map.entry(id)
            .or_insert_with(|| {
                approximate_predictor(spec, codec, set, id).map(|p| Entry {
                    costs: set.iter().map(|q| bayes_cost_slice(spec, &p, q)).collect(),
                    predictor: p,
                })
            })
            .as_ref()
    }

    /// Approximate predictor of a window, `None` when unreachable.
    pub fn predictor(&mut self, id: u64) -> Option<&[f64]> {
        if id >= self.codec.count() {
            return None;
        }
        let xs = self.spec.x_size();
        if !self.is_dense() {
            return self.lazy_entry(id).map(|e| e.predictor.as_slice());
        }
        let Storage::Dense {
            predictors,
            reachable,
            ..
        } = &self.storage
        else {
            unreachable!()
        };
        let i = id as usize;
        reachable[i].then(|| &predictors[i * xs..(i + 1) * xs])
    }

    /// Approximate cost `c(pi_hat, Q)` of quantizer index `q`.
    pub fn cost(&mut self, id: u64, q: usize) -> Result<f64> {
        let qs = self.set.len();
        let found = match &self.storage {
            Storage::Dense {
                costs, reachable, ..
            } => {
                let i = id as usize;
                (i < reachable.len() && reachable[i]).then(|| costs[i * qs + q])
            }
            Storage::Lazy(_) => {
                if id >= self.codec.count() {
                    None
                } else {
                    self.lazy_entry(id).map(|e| e.costs[q])
                }
            }
        };
        found.ok_or(Error::UnreachableWindow(id))
    }

    pub fn is_reachable(&mut self, id: u64) -> bool {
        self.predictor(id).is_some()
    }

    /// Entries computed so far (all of them for a dense table).
    pub fn materialized(&self) -> usize {
        match &self.storage {
            Storage::Dense { reachable, .. } => reachable.len(),
            Storage::Lazy(map) => map.len(),
        }
    }

    /// Reachable windows with their predictors, in id order.
    pub fn reachable_entries(&self) -> Vec<(u64, Vec<f64>)> {
        let xs = self.spec.x_size();
        match &self.storage {
            Storage::Dense {
                predictors,
                reachable,
                ..
            } => reachable
                .iter()
                .enumerate()
                .filter(|(_, &r)| r)
                .map(|(i, _)| (i as u64, predictors[i * xs..(i + 1) * xs].to_vec()))
                .collect(),
            Storage::Lazy(map) => {
                let mut v: Vec<(u64, Vec<f64>)> = map
                    .iter()
                    .filter_map(|(&id, e)| e.as_ref().map(|e| (id, e.predictor.clone())))
                    .collect();
                v.sort_by_key(|(id, _)| *id);
                v
            }
        }
    }

    /// Rebuilds a table from stored predictors. Windows not listed are
    /// unreachable for a dense table and recomputed on demand for a lazy one.
    pub fn from_entries(
        spec: Arc<SystemSpec>,
        set: Arc<QuantizerSet>,
        n: usize,
        dense_cap: u64,
        entries: &[(u64, Vec<f64>)],
    ) -> Result<Self> {
        let codec = WindowCodec::new(n, spec.mp_size(), set.len())?;
        let xs = spec.x_size();
        let qs = set.len();
        for (id, p) in entries {
            if *id >= codec.count() || p.len() != xs {
                return Err(Error::Validation(alloc::format!(
                    "cached window {id} does not fit this table"
                )));
            }
        }
        let storage = if codec.count() <= dense_cap {
            let count = codec.count() as usize;
            let mut predictors = vec![0.0; count * xs];
            let mut costs = vec![0.0; count * qs];
            let mut reachable = vec![false; count];
            for (id, p) in entries {
                let i = *id as usize;
                predictors[i * xs..(i + 1) * xs].copy_from_slice(p);
                for (qi, q) in set.iter().enumerate() {
                    costs[i * qs + qi] = bayes_cost_slice(&spec, p, q);
                }
                reachable[i] = true;
            }
            Storage::Dense {
                predictors,
                costs,
                reachable,
            }
        } else {
            let mut map = HashMap::new();
            for (id, p) in entries {
                map.insert(
                    *id,
                    Some(Entry {
                        costs: set.iter().map(|q| bayes_cost_slice(&spec, p, q)).collect(),
                        predictor: p.clone(),
                    }),
                );
            }
            Storage::Lazy(map)
        };
        Ok(Self {
            spec,
            set,
            codec,
            storage,
        })
    }
}

/// `c_N(w, Q)`: expected distortion under the approximate predictor.
pub fn window_cost(table: &mut WindowTable, id: u64, q_index: usize) -> Result<f64> {
    table.cost(id, q_index)
}

pub fn advance_window(codec: &WindowCodec, window: &WindowState, q: usize, m_prime: usize) -> WindowState {
    codec.decode(codec.advance(window.id, q, m_prime))
}

/// Lattice resolution of the cells on which random stationary policies are
/// drawn for the loss estimate.
pub const POLICY_CELL_RESOLUTION: usize = 4;

/// Estimate of the window loss at one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossPoint {
    pub t: usize,
    /// Largest sample mean over the policies tried.
    pub estimate: f64,
    /// Standard error of the maximizing policy's mean.
    pub std_error: f64,
    /// Largest single sample over all policies.
    pub max_sample: f64,
    /// Which policy attained the estimate: 0 is uniform, `k >= 1` the k-th
    /// random stationary policy.
    pub policy: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEstimate {
    pub n: usize,
    pub points: Vec<LossPoint>,
    pub alpha: f64,
    /// `2 alpha^N`.
    pub bound: f64,
}

impl LossEstimate {
    /// Largest `estimate - bound - k * se`; nonpositive when every point
    /// lies under the bound at `k` standard errors.
    pub fn worst_excess(&self, k: f64) -> f64 {
        self.points
            .iter()
            .map(|p| p.estimate - self.bound - k * p.std_error)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossConfig {
    pub n: usize,
    pub samples: usize,
    /// Time steps `t = N, ..., N + horizon - 1` are estimated.
    pub horizon: usize,
    /// Number of random stationary policies besides the uniform one.
    pub policies: usize,
    pub seed: u64,
}

/// Monte-Carlo estimate of `sup_gamma E ||pi_t - pi_hat_t||`, where the
/// supremum is replaced by a maximum over the uniform policy and
/// `config.policies` random stationary policies. The source starts from its
/// invariant distribution.
pub fn loss_estimate(
    spec: &SystemSpec,
    set: &QuantizerSet,
    config: &LossConfig,
) -> Result<LossEstimate> {
    use crate::belief::tv_distance;
    use crate::lattice::{BeliefLattice, DEFAULT_LATTICE_CAP};
    use crate::model::{sample_from, sample_step};
    use crate::policy::{EncoderPolicy, EncoderView, RandomStationary, Uniform};
    use crate::rng::{stream, Purpose};
    use crate::stats::RunningStats;

    let n = config.n;
    if n == 0 {
        return Err(Error::Validation("window length must be at least 1".into()));
    }
    let report = crate::dobrushin::contraction_coefficient(&spec.source, &spec.channel, set)?;
    let alpha = report.best_alpha();
    let cells = Arc::new(BeliefLattice::build(
        spec.x_size(),
        POLICY_CELL_RESOLUTION,
        DEFAULT_LATTICE_CAP,
    )?);
    let mut policies: Vec<alloc::boxed::Box<dyn EncoderPolicy>> =
        vec![alloc::boxed::Box::new(Uniform(set.len()))];
    let mut draw = stream(config.seed, Purpose::PolicySample, n as u64);
    for _ in 0..config.policies {
        policies.push(alloc::boxed::Box::new(RandomStationary::sample(
            cells.clone(),
            set.len(),
            &mut draw,
        )));
    }
    let xs = spec.x_size();
    let zeta = spec.zeta().probs();
    let steps = n + config.horizon;
    let mut per_policy: Vec<Vec<RunningStats>> = Vec::with_capacity(policies.len());
    let mut max_sample = vec![0.0_f64; config.horizon];
    let mut pi = vec![0.0; xs];
    let mut filter = vec![0.0; xs];
    let mut approx = vec![0.0; xs];
    let mut approx_filter = vec![0.0; xs];
    let mut history: Vec<(usize, usize)> = Vec::with_capacity(steps);
    for (k, policy) in policies.iter().enumerate() {
        let mut stats = vec![RunningStats::new(); config.horizon];
        for s in 0..config.samples {
            let mut rng = stream(config.seed, Purpose::Stability, ((k as u64) << 32) + s as u64);
            let mut x = sample_from(zeta, &mut rng);
            pi.copy_from_slice(zeta);
            history.clear();
            for t in 0..steps {
                if t >= n {
                    approx.copy_from_slice(zeta);
                    for &(q, mp) in &history[t - n..t] {
                        posterior_into(spec, &approx, set.get(q), mp, &mut approx_filter)?;
                        predict_into(spec, &approx_filter, &mut approx);
                    }
                    let gap = tv_distance(&pi, &approx);
                    stats[t - n].push(gap);
                    max_sample[t - n] = max_sample[t - n].max(gap);
                }
                let q = policy
                    .choose(
                        &EncoderView {
                            predictor: &pi,
                            window: None,
                        },
                        &mut rng,
                    )
                    .index;
                let quant = set.get(q);
                let (xn, _, mp) = sample_step(&mut rng, x, quant, &spec.source, &spec.channel);
                posterior_into(spec, &pi, quant, mp, &mut filter)?;
                predict_into(spec, &filter, &mut pi);
                history.push((q, mp));
                x = xn;
            }
        }
        per_policy.push(stats);
    }
    let points = (0..config.horizon)
        .map(|i| {
            let (policy, best) = per_policy
                .iter()
                .enumerate()
                .max_by(|a, b| a.1[i].mean().total_cmp(&b.1[i].mean()))
                .map(|(k, s)| (k, s[i]))
                .expect("at least the uniform policy");
            LossPoint {
                t: n + i,
                estimate: best.mean(),
                std_error: best.std_error(),
                max_sample: max_sample[i],
                policy,
            }
        })
        .collect();
    Ok(LossEstimate {
        n,
        points,
        alpha,
        bound: 2.0 * libm::pow(alpha, n as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{filter_update, Belief};
    use crate::model::{ChannelKernel, DistortionFn, TransitionKernel};
    use crate::presets;
    use crate::quantizer::{Pruning, Quantizer};

    fn iid_table(n: usize) -> WindowTable {
        let spec = Arc::new(presets::iid8_noiseless(2, 0.9).unwrap());
        let set = Arc::new(spec.quantizer_set(presets::IID8_PRUNING, 1 << 20).unwrap());
        WindowTable::build(spec, set, n, DEFAULT_DENSE_CAP).unwrap()
    }

    #[test]
    fn codec_roundtrip() {
        let c = WindowCodec::new(3, 4, 5).unwrap();
        assert_eq!(c.count(), 20 * 20 * 20);
        for id in [0u64, 1, 19, 20, 401, 7999] {
            let w = c.decode(id);
            assert_eq!(c.encode(&w).unwrap(), id);
        }
    }

    #[test]
    fn advance_is_a_shift() {
        let c = WindowCodec::new(1, 3, 2).unwrap();
        let w = c.decode(4);
        let next = advance_window(&c, &w, 1, 2);
        assert_eq!((next.actions.as_slice(), next.outputs.as_slice()), (&[1][..], &[2][..]));

        let c = WindowCodec::new(3, 3, 2).unwrap();
        let w = WindowState {
            outputs: vec![0, 1, 2],
            actions: vec![1, 0, 1],
            id: 0,
        };
        let id = c.encode(&w).unwrap();
        let next = c.decode(c.advance(id, 0, 0));
        assert_eq!(next.outputs, vec![1, 2, 0]);
        assert_eq!(next.actions, vec![0, 1, 0]);

        let mut seen = std::collections::BTreeSet::new();
        for q in 0..2 {
            for mp in 0..3 {
                seen.insert(c.advance(id, q, mp));
            }
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn iid_windows_predict_zeta() {
        for n in 1..=2 {
            let mut t = iid_table(n);
            let zeta = t.spec().zeta().probs().to_vec();
            let count = t.codec().count();
            let mut reachable = 0;
            for id in 0..count {
                if let Some(p) = t.predictor(id) {
                    reachable += 1;
                    for (a, b) in p.iter().zip(&zeta) {
                        assert!((a - b).abs() < 1e-12);
                    }
                }
            }
            assert!(reachable > 0);
        }
    }

    #[test]
    fn noiseless_single_step_is_a_row_of_t() {
        let spec = Arc::new(presets::markov4_symmetric_channel(0.0, 0.9).unwrap());
        let id_q = Quantizer::identity(4, 4).unwrap();
        let set = Arc::new(
            crate::quantizer::QuantizerSet::from_members(4, 4, Pruning::NONE, vec![id_q]).unwrap(),
        );
        let mut t = WindowTable::build(spec.clone(), set, 1, DEFAULT_DENSE_CAP).unwrap();
        for mp in 0..4 {
            let p = t.predictor(mp as u64).unwrap().to_vec();
            let row = spec.source.matrix().row(mp);
            for (a, b) in p.iter().zip(row) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_steps_match_chained_filter_updates() {
        let spec = Arc::new(
            SystemSpec::new(
                TransitionKernel::from_rows(&presets::markov4_rows()).unwrap(),
                ChannelKernel::from_rows(&[
                    vec![0.7, 0.2, 0.1],
                    vec![0.1, 0.8, 0.1],
                    vec![0.3, 0.3, 0.4],
                ])
                .unwrap(),
                DistortionFn::squared(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 2.0, 3.0]).unwrap(),
                vec![0.0, 1.0, 2.0, 3.0],
                0.9,
            )
            .unwrap(),
        );
        let set = Arc::new(spec.quantizer_set(Pruning::NONE, 1 << 20).unwrap());
        let mut t = WindowTable::build(spec.clone(), set.clone(), 2, DEFAULT_DENSE_CAP).unwrap();
        let codec = *t.codec();
        for id in (0..codec.count()).step_by(97) {
            let w = codec.decode(id);
            let mut pi = spec.zeta().clone();
            for k in 0..2 {
                let q = set.get(w.actions[k]);
                pi = filter_update(&spec, &pi, q, w.outputs[k]).unwrap().next_predictor;
            }
            let got = t.predictor(id).unwrap().to_vec();
            assert!(Belief::new(got.clone()).is_ok());
            for (a, b) in got.iter().zip(pi.probs()) {
                assert!((a - b).abs() < 1e-12);
            }
            for qi in [0, 5, set.len() - 1] {
                let c = window_cost(&mut t, id, qi).unwrap();
                assert!((c - crate::belief::bayes_cost(&spec, &pi, set.get(qi))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lazy_matches_dense() {
        let spec = Arc::new(presets::markov4_symmetric_channel(0.06, 0.9).unwrap());
        let set = Arc::new(spec.quantizer_set(presets::SYMMETRIC_PRUNING, 1 << 20).unwrap());
        let mut dense = WindowTable::build(spec.clone(), set.clone(), 2, DEFAULT_DENSE_CAP).unwrap();
        let mut lazy = WindowTable::build(spec, set, 2, 10).unwrap();
        assert!(dense.is_dense() && !lazy.is_dense());
        for id in (0..dense.codec().count()).step_by(13) {
            assert_eq!(dense.predictor(id).map(|p| p.to_vec()), lazy.predictor(id).map(|p| p.to_vec()));
            assert_eq!(dense.cost(id, 3).ok(), lazy.cost(id, 3).ok());
        }
    }

    #[test]
    fn unreachable_windows_are_flagged() {
        // noiseless binary channel: a constant quantizer never emits label 1
        let mut t = iid_table(1);
        let set = t.quantizers().clone();
        let constant = set.iter().position(|q| q.bins_used() == 1);
        if let Some(qi) = constant {
            let label = set.get(qi).apply(0);
            let never = 1 - label;
            let id = t.codec().digit(qi, never);
            assert!(!t.is_reachable(id));
            assert!(matches!(t.cost(id, 0), Err(Error::UnreachableWindow(_))));
        }
    }

    #[test]
    fn loss_vanishes_for_iid_sources() {
        let spec = presets::iid8_noiseless(2, 0.9).unwrap();
        let set = spec.quantizer_set(presets::IID8_PRUNING, 1 << 20).unwrap();
        for n in 1..=3 {
            let est = loss_estimate(
                &spec,
                &set,
                &LossConfig {
                    n,
                    samples: 50,
                    horizon: 5,
                    policies: 4,
                    seed: 1,
                },
            )
            .unwrap();
            assert_eq!(est.bound, 0.0);
            for p in &est.points {
                assert!(p.estimate < 1e-12 && p.max_sample < 1e-12);
            }
        }
    }

    #[test]
    fn loss_never_exceeds_the_diameter() {
        let spec = presets::markov4_symmetric_channel(0.06, 0.9).unwrap();
        let set = spec.quantizer_set(presets::SYMMETRIC_PRUNING, 1 << 20).unwrap();
        let est = loss_estimate(
            &spec,
            &set,
            &LossConfig {
                n: 1,
                samples: 200,
                horizon: 4,
                policies: 3,
                seed: 2,
            },
        )
        .unwrap();
        assert!(est.points.iter().all(|p| p.max_sample <= 2.0 && p.estimate >= 0.0));
    }

    #[test]
    fn entries_roundtrip() {
        let spec = Arc::new(presets::markov4_symmetric_channel(0.06, 0.9).unwrap());
        let set = Arc::new(spec.quantizer_set(presets::SYMMETRIC_PRUNING, 1 << 20).unwrap());
        let mut t = WindowTable::build(spec.clone(), set.clone(), 1, DEFAULT_DENSE_CAP).unwrap();
        let entries = t.reachable_entries();
        let mut back = WindowTable::from_entries(spec, set, 1, DEFAULT_DENSE_CAP, &entries).unwrap();
        for id in 0..t.codec().count() {
            assert_eq!(t.cost(id, 2).ok(), back.cost(id, 2).ok());
        }
    }
}
