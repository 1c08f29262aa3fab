//! Tabular Q-learning on the approximate finite MDPs.
//!
//! Exploration picks quantizers uniformly at random. The learning rate for
//! a pair is `1 / (1 + visits)` counting the current visit.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::Rng as _;

use crate::belief::{bayes_cost_slice, posterior_into, predict_into};
use crate::dobrushin::{contraction_coefficient, ContractionReport};
use crate::error::{Error, Result};
use crate::lattice::{extend_policy, BeliefLattice, OccupationCounts, DEFAULT_LATTICE_CAP};
use crate::model::{sample_from, sample_step, SystemSpec};
use crate::policy::{LatticePolicy, WindowPolicy};
use crate::quantizer::QuantizerSet;
use crate::rng::{stream, Purpose, Rng};
use crate::window::{WindowTable, DEFAULT_DENSE_CAP};

/// Floor on the denominator of the relative-change stopping test.
pub const RELATIVE_FLOOR: f64 = 1e-9;

/// Value table over (state id, quantizer index); rows are created on the
/// first visit of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    actions: usize,
    v0: f64,
    index: HashMap<u64, usize>,
    states: Vec<u64>,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    pub fn new(actions: usize, v0: f64) -> Self {
        Self {
            actions,
            v0,
            index: HashMap::new(),
            states: Vec::new(),
            values: Vec::new(),
            visits: Vec::new(),
        }
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// Number of allocated states.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    fn row_or_insert(&mut self, z: u64) -> usize {
        if let Some(&r) = self.index.get(&z) {
            return r;
        }
        let r = self.states.len();
        self.index.insert(z, r);
        self.states.push(z);
        self.values.extend(core::iter::repeat(self.v0).take(self.actions));
        self.visits.extend(core::iter::repeat(0).take(self.actions));
        r
    }

    #[inline]
    pub fn value(&self, z: u64, u: usize) -> f64 {
        match self.index.get(&z) {
            Some(&r) => self.values[r * self.actions + u],
            None => self.v0,
        }
    }

    #[inline]
    pub fn visits(&self, z: u64, u: usize) -> u64 {
        match self.index.get(&z) {
            Some(&r) => self.visits[r * self.actions + u],
            None => 0,
        }
    }

    /// `min_v V(z, v)` over all actions; `v0` for a state never visited.
    #[inline]
    pub fn min_value(&self, z: u64) -> f64 {
        match self.index.get(&z) {
            Some(&r) => self.values[r * self.actions..(r + 1) * self.actions]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
            None => self.v0,
        }
    }

    /// Greedy action among the visited ones; ties go to the lowest index.
    pub fn greedy(&self, z: u64) -> Option<usize> {
        let r = *self.index.get(&z)?;
        let base = r * self.actions;
        let mut best: Option<(usize, f64)> = None;
        for u in 0..self.actions {
            if self.visits[base + u] == 0 {
                continue;
            }
            let v = self.values[base + u];
            if best.map_or(true, |(_, bv)| v < bv) {
                best = Some((u, v));
            }
        }
        best.map(|(u, _)| u)
    }

    /// Pairs with at least one visit: `(state, action, value, visits)`.
    pub fn visited_pairs(&self) -> impl Iterator<Item = (u64, usize, f64, u64)> + '_ {
        self.states.iter().enumerate().flat_map(move |(r, &z)| {
            (0..self.actions).filter_map(move |u| {
                let i = r * self.actions + u;
                (self.visits[i] > 0).then(|| (z, u, self.values[i], self.visits[i]))
            })
        })
    }

    pub fn visited_pair_count(&self) -> usize {
        self.visits.iter().filter(|&&v| v > 0).count()
    }

    /// Sets a pair directly, for restoring checkpoints.
    pub fn restore(&mut self, z: u64, u: usize, value: f64, visits: u64) -> Result<()> {
        if u >= self.actions {
            return Err(Error::Validation(format!(
                "action {u} outside 0..{}",
                self.actions
            )));
        }
        let r = self.row_or_insert(z);
        self.values[r * self.actions + u] = value;
        self.visits[r * self.actions + u] = visits;
        Ok(())
    }

    fn values_snapshot(&self) -> (Vec<f64>, Vec<u64>) {
        (self.values.clone(), self.visits.clone())
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_stored_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One update of pair `(z, u)`. Returns the learning rate that was used.
#[inline]
pub fn q_update(table: &mut QTable, z: u64, u: usize, cost: f64, z_next: u64, beta: f64) -> f64 {
    let target = cost + beta * table.min_value(z_next);
    let r = table.row_or_insert(z);
    let i = r * table.actions + u;
    table.visits[i] += 1;
    let alpha = 1.0 / (1.0 + table.visits[i] as f64);
    table.values[i] = (1.0 - alpha) * table.values[i] + alpha * target;
    alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Belief quantization onto the type lattice.
    Lattice,
    /// Sliding finite window.
    Window,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "lattice" | "belief-quantization" => Ok(Self::Lattice),
            "window" | "finite-window" => Ok(Self::Window),
            other => Err(Error::Validation(format!("unknown scheme `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Lattice => "lattice",
            Self::Window => "window",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Zeta,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    pub scheme: Scheme,
    pub n: usize,
    pub beta: f64,
    pub v0: f64,
    pub epsilon_stop: f64,
    pub check_interval: u64,
    pub max_steps: u64,
    pub seed: u64,
    pub prior: Prior,
    /// Accept a non-invariant prior for the lattice scheme anyway.
    pub allow_non_invariant_prior: bool,
    /// Keep empirical transition counts for the Bellman residual.
    pub track_transitions: bool,
    pub lattice_cap: u128,
    pub dense_cap: u64,
}

impl LearningConfig {
    pub fn new(scheme: Scheme, n: usize, beta: f64) -> Self {
        Self {
            scheme,
            n,
            beta,
            v0: 0.0,
            epsilon_stop: 1e-4,
            check_interval: 100_000,
            max_steps: 1_000_000,
            seed: 0,
            prior: Prior::Zeta,
            allow_non_invariant_prior: false,
            track_transitions: false,
            lattice_cap: DEFAULT_LATTICE_CAP,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Validation(format!("beta = {} is not in (0,1)", self.beta)));
        }
        if !(self.epsilon_stop > 0.0) {
            return Err(Error::Validation("epsilon_stop must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::Validation("N must be at least 1".into()));
        }
        if self.check_interval == 0 {
            return Err(Error::Validation("check_interval must be positive".into()));
        }
        Ok(())
    }
}

/// One exploration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploreStep {
    pub x: usize,
    pub q: usize,
    pub m: usize,
    pub m_prime: usize,
    pub cost: f64,
    pub state: u64,
    pub next_state: u64,
}

enum Approx {
    Lattice {
        lattice: Arc<BeliefLattice>,
        occupation: OccupationCounts,
        pi: Vec<f64>,
        filter: Vec<f64>,
        current: usize,
        ties: u64,
    },
    Window {
        table: WindowTable,
        current: u64,
    },
}

/// Exploration process under uniformly random quantizers.
pub struct Explorer {
    spec: Arc<SystemSpec>,
    set: Arc<QuantizerSet>,
    approx: Approx,
    x: usize,
    source_rng: Rng,
    action_rng: Rng,
    quantizer_counts: Vec<u64>,
}

fn resolve_prior(spec: &SystemSpec, config: &LearningConfig) -> Result<Vec<f64>> {
    match &config.prior {
        Prior::Zeta => Ok(spec.zeta().probs().to_vec()),
        Prior::Explicit(p) => {
            let b = crate::belief::Belief::new(p.clone())?;
            if b.len() != spec.x_size() {
                return Err(Error::Dimension {
                    what: "prior length",
                    expected: spec.x_size(),
                    found: b.len(),
                });
            }
            Ok(b.into_vec())
        }
    }
}

impl Explorer {
    pub fn new(
        spec: Arc<SystemSpec>,
        set: Arc<QuantizerSet>,
        config: &LearningConfig,
    ) -> Result<Self> {
        config.validate()?;
        let prior = resolve_prior(&spec, config)?;
        let mut source_rng = stream(config.seed, Purpose::Source, 0);
        let mut action_rng = stream(config.seed, Purpose::Exploration, 0);
        let mut x = sample_from(&prior, &mut source_rng);
        let mut quantizer_counts = vec![0; set.len()];
        let approx = match config.scheme {
            Scheme::Lattice => {
                let off = crate::belief::tv_distance(&prior, spec.zeta().probs());
                if off > 1e-9 && !config.allow_non_invariant_prior {
                    return Err(Error::NonInvariantPrior(format!(
                        "belief quantization learning needs the source to start from its \
                         invariant distribution (prior is {off:.3e} away in total variation)"
                    )));
                }
                let lattice = Arc::new(BeliefLattice::build(
                    spec.x_size(),
                    config.n,
                    config.lattice_cap,
                )?);
                let occupation = OccupationCounts::new(lattice.len());
                let hit = lattice.nearest(&prior, Some(&occupation));
                Approx::Lattice {
                    occupation,
                    current: hit.id,
                    ties: 0,
                    filter: vec![0.0; spec.x_size()],
                    pi: prior,
                    lattice,
                }
            }
            Scheme::Window => {
                let mut table =
                    WindowTable::build(spec.clone(), set.clone(), config.n, config.dense_cap)?;
                // warm-up: N steps under uniform quantizers before t = 0
                let codec = *table.codec();
                let mut w = 0u64;
                for _ in 0..config.n {
                    let q = action_rng.gen_range(0..set.len());
                    quantizer_counts[q] += 1;
                    let (xn, _, mp) =
                        sample_step(&mut source_rng, x, set.get(q), &spec.source, &spec.channel);
                    w = codec.advance(w, q, mp);
                    x = xn;
                }
                if !table.is_reachable(w) {
                    return Err(Error::UnreachableWindow(w));
                }
                Approx::Window { table, current: w }
            }
        };
        Ok(Self {
            spec,
            set,
            approx,
            x,
            source_rng,
            action_rng,
            quantizer_counts,
        })
    }

    pub fn step(&mut self) -> Result<ExploreStep> {
        let q = self.action_rng.gen_range(0..self.set.len());
        self.quantizer_counts[q] += 1;
        let quant = self.set.get(q);
        let x = self.x;
        match &mut self.approx {
            Approx::Lattice {
                lattice,
                occupation,
                pi,
                filter,
                current,
                ties,
            } => {
                let z = *current;
                occupation.record(z);
                let cost = bayes_cost_slice(&self.spec, pi, quant);
                let (xn, m, mp) = sample_step(
                    &mut self.source_rng,
                    x,
                    quant,
                    &self.spec.source,
                    &self.spec.channel,
                );
                posterior_into(&self.spec, pi, quant, mp, filter)?;
                predict_into(&self.spec, filter, pi);
                let hit = lattice.nearest(pi, Some(occupation));
                if hit.tied {
                    *ties += 1;
                }
                *current = hit.id;
                self.x = xn;
                Ok(ExploreStep {
                    x,
                    q,
                    m,
                    m_prime: mp,
                    cost,
                    state: z as u64,
                    next_state: hit.id as u64,
                })
            }
            Approx::Window { table, current } => {
                let z = *current;
                let cost = table.cost(z, q)?;
                let (xn, m, mp) = sample_step(
                    &mut self.source_rng,
                    x,
                    quant,
                    &self.spec.source,
                    &self.spec.channel,
                );
                let next = table.codec().advance(z, q, mp);
                *current = next;
                self.x = xn;
                Ok(ExploreStep {
                    x,
                    q,
                    m,
                    m_prime: mp,
                    cost,
                    state: z,
                    next_state: next,
                })
            }
        }
    }

    /// Runs `steps` steps and returns them, for two-phase training.
    pub fn collect(&mut self, steps: usize) -> Result<Vec<ExploreStep>> {
        (0..steps).map(|_| self.step()).collect()
    }

    pub fn quantizer_counts(&self) -> &[u64] {
        &self.quantizer_counts
    }

    pub fn occupation(&self) -> Option<&OccupationCounts> {
        match &self.approx {
            Approx::Lattice { occupation, .. } => Some(occupation),
            Approx::Window { .. } => None,
        }
    }

    /// Steps whose next belief was equidistant from several lattice points.
    pub fn tie_visits(&self) -> u64 {
        match &self.approx {
            Approx::Lattice { ties, .. } => *ties,
            Approx::Window { .. } => 0,
        }
    }

    pub fn lattice(&self) -> Option<&Arc<BeliefLattice>> {
        match &self.approx {
            Approx::Lattice { lattice, .. } => Some(lattice),
            Approx::Window { .. } => None,
        }
    }

    pub fn window_table(&self) -> Option<&WindowTable> {
        match &self.approx {
            Approx::Window { table, .. } => Some(table),
            Approx::Lattice { .. } => None,
        }
    }

    pub fn into_window_table(self) -> Option<WindowTable> {
        match self.approx {
            Approx::Window { table, .. } => Some(table),
            Approx::Lattice { .. } => None,
        }
    }
}

/// Applies recorded steps in order.
pub fn replay(table: &mut QTable, steps: &[ExploreStep], beta: f64) {
    for s in steps {
        q_update(table, s.state, s.q, s.cost, s.next_state, beta);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct PairStats {
    count: u64,
    cost_sum: f64,
    next: HashMap<u64, u64>,
}

/// Empirical costs and transitions of each visited pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionStats {
    pairs: HashMap<(u64, usize), PairStats>,
}

impl TransitionStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, z: u64, u: usize, cost: f64, z_next: u64) {
        let e = self.pairs.entry((z, u)).or_default();
        e.count += 1;
        e.cost_sum += cost;
        *e.next.entry(z_next).or_insert(0) += 1;
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub max: f64,
    pub mean: f64,
    /// `(state, action, residual)` for pairs with enough visits.
    pub residuals: Vec<(u64, usize, f64)>,
    /// Pairs left out for having too few visits.
    pub excluded: Vec<(u64, usize)>,
}

/// `|V(z,u) - (c_hat(z,u) + beta sum_z' P_hat(z'|z,u) min_v V(z',v))|` over
/// pairs with at least `min_visits` recorded transitions.
pub fn bellman_residual(
    table: &QTable,
    stats: &TransitionStats,
    beta: f64,
    min_visits: u64,
) -> ResidualReport {
    let mut keys: Vec<&(u64, usize)> = stats.pairs.keys().collect();
    keys.sort();
    let mut residuals = Vec::new();
    let mut excluded = Vec::new();
    for &(z, u) in keys {
        let p = &stats.pairs[&(z, u)];
        if p.count < min_visits {
            excluded.push((z, u));
            continue;
        }
        let n = p.count as f64;
        let cont: f64 = p
            .next
            .iter()
            .map(|(&zn, &c)| c as f64 / n * table.min_value(zn))
            .sum();
        let r = (table.value(z, u) - (p.cost_sum / n + beta * cont)).abs();
        residuals.push((z, u, r));
    }
    let max = residuals.iter().fold(0.0_f64, |m, r| m.max(r.2));
    let mean = if residuals.is_empty() {
        0.0
    } else {
        residuals.iter().map(|r| r.2).sum::<f64>() / residuals.len() as f64
    };
    ResidualReport {
        max,
        mean,
        residuals,
        excluded,
    }
}

/// One stopping check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckPoint {
    pub step: u64,
    pub max_relative_change: f64,
    pub states: usize,
    pub visited_pairs: usize,
}

/// Trained encoder policy.
#[derive(Debug, Clone)]
pub enum TrainedPolicy {
    Lattice(LatticePolicy),
    Window(WindowPolicy),
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub table: QTable,
    pub policy: TrainedPolicy,
    pub converged: bool,
    pub steps: u64,
    pub trace: Vec<CheckPoint>,
    pub quantizer_counts: Vec<u64>,
    pub occupation: Option<OccupationCounts>,
    pub tie_visits: u64,
    pub transitions: Option<TransitionStats>,
    /// Window scheme only; `None` for the lattice scheme.
    pub window_table: Option<WindowTable>,
    pub contraction: Option<ContractionReport>,
}

impl TrainOutcome {
    pub fn summary(&self) -> String {
        format!(
            "steps={} converged={} states={} visited_pairs={} tie_visits={}",
            self.steps,
            self.converged,
            self.table.len(),
            self.table.visited_pair_count(),
            self.tie_visits
        )
    }
}

fn max_relative_change(table: &QTable, prev: &(Vec<f64>, Vec<u64>)) -> f64 {
    let (values, visits) = prev;
    let mut worst = 0.0_f64;
    for i in 0..values.len() {
        if visits[i] == 0 {
            continue;
        }
        let d = (table.values[i] - values[i]).abs() / values[i].abs().max(RELATIVE_FLOOR);
        worst = worst.max(d);
    }
    worst
}

/// Interleaved exploration and Q-learning until the stopping test passes
/// or `max_steps` is reached.
pub fn train(
    spec: Arc<SystemSpec>,
    set: Arc<QuantizerSet>,
    config: &LearningConfig,
) -> Result<TrainOutcome> {
    let contraction = match config.scheme {
        Scheme::Window => {
            let r = contraction_coefficient(&spec.source, &spec.channel, &set)?;
            if !r.certifies_stability() {
                log::warn!(
                    "no contraction rate below one (alpha = {:.4}); the window error bound does not apply",
                    r.best_alpha()
                );
            }
            Some(r)
        }
        Scheme::Lattice => None,
    };
    let mut explorer = Explorer::new(spec.clone(), set.clone(), config)?;
    let mut table = QTable::new(set.len(), config.v0);
    let mut transitions = config.track_transitions.then(TransitionStats::new);
    let mut trace = Vec::new();
    let mut snapshot = table.values_snapshot();
    let mut converged = false;
    let mut steps = 0u64;
    while steps < config.max_steps {
        let s = explorer.step()?;
        q_update(&mut table, s.state, s.q, s.cost, s.next_state, config.beta);
        if let Some(t) = transitions.as_mut() {
            t.record(s.state, s.q, s.cost, s.next_state);
        }
        steps += 1;
        if steps % config.check_interval == 0 {
            let change = max_relative_change(&table, &snapshot);
            trace.push(CheckPoint {
                step: steps,
                max_relative_change: change,
                states: table.len(),
                visited_pairs: table.visited_pair_count(),
            });
            log::debug!("step {steps}: max relative change {change:.3e}");
            let had_pairs = snapshot.1.iter().any(|&v| v > 0);
            if had_pairs && change < config.epsilon_stop {
                converged = true;
                break;
            }
            snapshot = table.values_snapshot();
        }
    }
    if !converged {
        log::warn!("stopping test not met after {steps} steps");
    }
    let quantizer_counts = explorer.quantizer_counts().to_vec();
    let tie_visits = explorer.tie_visits();
    let occupation = explorer.occupation().cloned();
    let (policy, window_table) = match config.scheme {
        Scheme::Lattice => {
            let lattice = explorer.lattice().expect("lattice scheme").clone();
            let pairs: Vec<(usize, usize)> = table
                .states()
                .iter()
                .filter_map(|&z| table.greedy(z).map(|a| (z as usize, a)))
                .collect();
            let occ = occupation.clone().expect("lattice scheme");
            (
                TrainedPolicy::Lattice(LatticePolicy(extend_policy(&pairs, lattice, occ)?)),
                None,
            )
        }
        Scheme::Window => {
            let wt = explorer.into_window_table().expect("window scheme");
            (
                TrainedPolicy::Window(window_policy_from_table(&table, *wt.codec())),
                Some(wt),
            )
        }
    };
    Ok(TrainOutcome {
        table,
        policy,
        converged,
        steps,
        trace,
        quantizer_counts,
        occupation,
        tie_visits,
        transitions,
        window_table,
        contraction,
    })
}

pub fn window_policy_from_table(table: &QTable, codec: crate::window::WindowCodec) -> WindowPolicy {
    let actions: HashMap<u64, usize> = table
        .states()
        .iter()
        .filter_map(|&z| table.greedy(z).map(|a| (z, a)))
        .collect();
    WindowPolicy::new(codec, actions, table.action_count())
}

/// Lattice policy from a restored table and occupation counts.
pub fn lattice_policy_from_table(
    table: &QTable,
    lattice: Arc<BeliefLattice>,
    occupation: OccupationCounts,
) -> Result<LatticePolicy> {
    let pairs: Vec<(usize, usize)> = table
        .states()
        .iter()
        .filter_map(|&z| table.greedy(z).map(|a| (z as usize, a)))
        .collect();
    Ok(LatticePolicy(extend_policy(&pairs, lattice, occupation)?))
}

/// Value iteration on an explicit finite MDP with `p[s][a][s']` and
/// `c[s][a]`; returns the optimal state-action values.
pub fn value_iteration(p: &[Vec<Vec<f64>>], c: &[Vec<f64>], beta: f64, tol: f64) -> Vec<Vec<f64>> {
    let ns = p.len();
    let mut q: Vec<Vec<f64>> = c.iter().map(|r| vec![0.0; r.len()]).collect();
    loop {
        let v: Vec<f64> = q
            .iter()
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let mut delta = 0.0_f64;
        for s in 0..ns {
            for a in 0..c[s].len() {
                let next: f64 = (0..ns).map(|t| p[s][a][t] * v[t]).sum();
                let nq = c[s][a] + beta * next;
                delta = delta.max((nq - q[s][a]).abs());
                q[s][a] = nq;
            }
        }
        if delta < tol * (1.0 - beta) {
            return q;
        }
    }
}
