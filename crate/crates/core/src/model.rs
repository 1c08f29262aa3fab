//! Source, channel and distortion primitives.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::matrix::{self, StochasticMatrix};
use crate::quantizer::{Pruning, Quantizer, QuantizerSet};

/// Alphabet sizes and reproduction values.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabets {
    pub x_size: usize,
    pub m_size: usize,
    pub mp_size: usize,
    pub xhat_values: Vec<f64>,
}

impl Alphabets {
    pub fn new(x_size: usize, m_size: usize, mp_size: usize, xhat_values: Vec<f64>) -> Result<Self> {
        if x_size == 0 || m_size == 0 || mp_size == 0 {
            return Err(Error::Validation("alphabet sizes must be positive".into()));
        }
        if xhat_values.is_empty() {
            return Err(Error::Validation("reproduction alphabet is empty".into()));
        }
        Ok(Self {
            x_size,
            m_size,
            mp_size,
            xhat_values,
        })
    }

    pub fn xhat_size(&self) -> usize {
        self.xhat_values.len()
    }
}

/// Row-stochastic source kernel `T(x'|x)`, irreducible and aperiodic.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel(StochasticMatrix);

impl TransitionKernel {
    pub fn new(matrix: StochasticMatrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::Dimension {
                what: "transition kernel columns",
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        check_irreducible(&matrix)?;
        let period = period(&matrix);
        if period != 1 {
            return Err(Error::Periodic(period));
        }
        Ok(Self(matrix))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(StochasticMatrix::from_rows(rows)?)
    }

    /// Kernel of an i.i.d. source with marginal `row`.
    pub fn iid(row: &[f64]) -> Result<Self> {
        Self::new(StochasticMatrix::repeated_row(row.len(), row)?)
    }

    pub fn matrix(&self) -> &StochasticMatrix {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.rows()
    }

    /// True when all rows coincide (within the row-sum tolerance).
    pub fn is_iid(&self) -> bool {
        self.first_differing_row().is_none()
    }

    pub(crate) fn first_differing_row(&self) -> Option<usize> {
        let first = self.0.row(0);
        (1..self.size()).find(|&r| {
            self.0
                .row(r)
                .iter()
                .zip(first)
                .any(|(a, b)| (a - b).abs() > matrix::ROW_SUM_TOLERANCE)
        })
    }
}

fn support_reach(m: &StochasticMatrix, start: usize) -> Vec<bool> {
    let n = m.rows();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if m.get(u, v) > 0.0 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

fn check_irreducible(m: &StochasticMatrix) -> Result<()> {
    for from in 0..m.rows() {
        if let Some(to) = support_reach(m, from).iter().position(|s| !*s) {
            return Err(Error::Reducible { from, to });
        }
    }
    Ok(())
}

/// Period of an irreducible chain: gcd over support edges `u -> v` of
/// `level(u) + 1 - level(v)` for BFS levels from state 0.
fn period(m: &StochasticMatrix) -> usize {
    let n = m.rows();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = alloc::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if m.get(u, v) > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    for u in 0..n {
        for v in 0..n {
            if m.get(u, v) > 0.0 {
                let diff = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, diff);
            }
        }
    }
    g
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Row-stochastic channel kernel `O(m'|m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelKernel(StochasticMatrix, bool);

impl ChannelKernel {
    pub fn new(matrix: StochasticMatrix) -> Self {
        let noiseless = matrix.rows() == matrix.cols()
            && (0..matrix.rows()).all(|i| {
                (0..matrix.cols()).all(|j| matrix.get(i, j) == if i == j { 1.0 } else { 0.0 })
            });
        Self(matrix, noiseless)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Ok(Self::new(StochasticMatrix::from_rows(rows)?))
    }

    pub fn noiseless(n: usize) -> Self {
        Self::new(StochasticMatrix::identity(n))
    }

    /// `n`-ary symmetric channel with total error probability `error`.
    pub fn symmetric(n: usize, error: f64) -> Result<Self> {
        Ok(Self::new(StochasticMatrix::symmetric(n, error)?))
    }

    pub fn matrix(&self) -> &StochasticMatrix {
        &self.0
    }

    pub fn inputs(&self) -> usize {
        self.0.rows()
    }

    pub fn outputs(&self) -> usize {
        self.0.cols()
    }

    #[inline]
    pub fn is_noiseless(&self) -> bool {
        self.1
    }

    /// True when `O(s(m')|s(m)) = O(m'|m)` for every permutation `s`, i.e. a
    /// square matrix with constant diagonal and constant off-diagonal.
    pub fn is_label_symmetric(&self) -> bool {
        let n = self.inputs();
        if n != self.outputs() {
            return false;
        }
        if n == 1 {
            return true;
        }
        let diag = self.0.get(0, 0);
        let off = self.0.get(0, 1);
        (0..n).all(|i| {
            (0..n).all(|j| {
                let want = if i == j { diag } else { off };
                (self.0.get(i, j) - want).abs() <= 1e-15
            })
        })
    }
}

/// Distortion table `d(x, xhat)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionFn {
    table: Vec<f64>,
    x_size: usize,
    xhat_size: usize,
    d_max: f64,
}

impl DistortionFn {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Validation("empty distortion table".into()));
        }
        let xhat_size = rows[0].len();
        let mut table = Vec::with_capacity(rows.len() * xhat_size);
        for row in rows {
            if row.len() != xhat_size {
                return Err(Error::Dimension {
                    what: "distortion row length",
                    expected: xhat_size,
                    found: row.len(),
                });
            }
            if row.iter().any(|d| !d.is_finite() || *d < 0.0) {
                return Err(Error::Validation(
                    "distortion entries must be finite and nonnegative".into(),
                ));
            }
            table.extend_from_slice(row);
        }
        let d_max = table.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            table,
            x_size: rows.len(),
            xhat_size,
            d_max,
        })
    }

    /// `d(x, xhat) = (value(x) - xhat)^2`.
    pub fn squared(source_values: &[f64], xhat_values: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = source_values
            .iter()
            .map(|s| xhat_values.iter().map(|r| (s - r) * (s - r)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    #[inline]
    pub fn get(&self, x: usize, xhat: usize) -> f64 {
        self.table[x * self.xhat_size + xhat]
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn xhat_size(&self) -> usize {
        self.xhat_size
    }

    /// `max d(x, xhat)`.
    pub fn d_max(&self) -> f64 {
        self.d_max
    }
}

/// Complete problem data: source, channel, distortion and discount factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub alphabets: Alphabets,
    pub source: TransitionKernel,
    pub channel: ChannelKernel,
    pub distortion: DistortionFn,
    pub beta: f64,
    zeta: Belief,
}

impl SystemSpec {
    pub fn new(
        source: TransitionKernel,
        channel: ChannelKernel,
        distortion: DistortionFn,
        xhat_values: Vec<f64>,
        beta: f64,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Validation(format!("beta = {beta} is not in (0,1)")));
        }
        let alphabets = Alphabets::new(
            source.size(),
            channel.inputs(),
            channel.outputs(),
            xhat_values,
        )?;
        if distortion.x_size() != alphabets.x_size {
            return Err(Error::Dimension {
                what: "distortion rows",
                expected: alphabets.x_size,
                found: distortion.x_size(),
            });
        }
        if distortion.xhat_size() != alphabets.xhat_size() {
            return Err(Error::Dimension {
                what: "distortion columns",
                expected: alphabets.xhat_size(),
                found: distortion.xhat_size(),
            });
        }
        let zeta = stationary_distribution(&source)?;
        Ok(Self {
            alphabets,
            source,
            channel,
            distortion,
            beta,
            zeta,
        })
    }

    /// Invariant distribution of the source.
    pub fn zeta(&self) -> &Belief {
        &self.zeta
    }

    pub fn x_size(&self) -> usize {
        self.alphabets.x_size
    }

    pub fn m_size(&self) -> usize {
        self.alphabets.m_size
    }

    pub fn mp_size(&self) -> usize {
        self.alphabets.mp_size
    }

    pub fn xhat_size(&self) -> usize {
        self.alphabets.xhat_size()
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Validation(format!("beta = {beta} is not in (0,1)")));
        }
        let mut out = self.clone();
        out.beta = beta;
        Ok(out)
    }

    /// Checks that every requested pruning is loss-free for this system.
    pub fn check_pruning(&self, pruning: Pruning) -> Result<()> {
        if pruning.nonempty_bins && !self.channel.is_noiseless() {
            return Err(Error::Validation(
                "nonempty_bins pruning requires a noiseless channel".into(),
            ));
        }
        if pruning.nonempty_bins && self.m_size() > self.x_size() {
            return Err(Error::Validation(
                "nonempty_bins pruning requires |M| <= |X|".into(),
            ));
        }
        if pruning.canonical_labels && !self.channel.is_label_symmetric() {
            return Err(Error::Validation(
                "canonical_labels pruning requires a permutation-symmetric channel".into(),
            ));
        }
        if pruning.interval_bins && !self.source.is_iid() {
            return Err(Error::Validation(
                "interval_bins pruning requires an i.i.d. source".into(),
            ));
        }
        Ok(())
    }

    /// The active quantizer set for this system, after checking `pruning`.
    pub fn quantizer_set(&self, pruning: Pruning, cap: usize) -> Result<QuantizerSet> {
        self.check_pruning(pruning)?;
        if !pruning.is_none() {
            log::info!("quantizer set pruned with {pruning}");
        }
        QuantizerSet::enumerate(self.x_size(), self.m_size(), pruning, cap)
    }

    /// Short human-readable summary.
    pub fn describe(&self) -> String {
        format!(
            "|X|={} |M|={} |M'|={} |Xhat|={} beta={} d_max={}",
            self.x_size(),
            self.m_size(),
            self.mp_size(),
            self.xhat_size(),
            self.beta,
            self.distortion.d_max()
        )
    }
}

/// Unique invariant distribution of an irreducible aperiodic kernel, by a
/// direct solve of `(T^t - I) z = 0` with one equation replaced by `sum z = 1`.
pub fn stationary_distribution(t: &TransitionKernel) -> Result<Belief> {
    let m = t.matrix();
    let n = m.rows();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // row i of (T^t - I): sum_j T(i|j) z_j - z_i
            a[i * n + j] = m.get(j, i) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut z = matrix::solve(a, b)?;
    for v in z.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let zeta = Belief::normalized(z)?;
    let pushed = m.left_multiply(zeta.probs());
    let residual: f64 = pushed
        .iter()
        .zip(zeta.probs())
        .map(|(a, b)| (a - b).abs())
        .sum();
    if residual > 1e-10 {
        return Err(Error::Validation(format!(
            "stationary solve residual {residual} exceeds 1e-10"
        )));
    }
    Ok(zeta)
}

/// `O_Q(m'|x) = O(m'|Q(x))` as an `|X| x |M'|` matrix.
pub fn induced_channel(o: &ChannelKernel, q: &Quantizer) -> Result<StochasticMatrix> {
    if q.m_size() != o.inputs() {
        return Err(Error::Dimension {
            what: "quantizer labels",
            expected: o.inputs(),
            found: q.m_size(),
        });
    }
    let rows: Vec<Vec<f64>> = q.map().map(|m| o.matrix().row(m).to_vec()).collect();
    StochasticMatrix::from_rows(&rows)
}

/// One source/channel step: `m = Q(x)`, `m' ~ O(.|m)`, `x_next ~ T(.|x)`.
///
/// Draw order is fixed (channel first, then source) so trajectories are
/// reproducible from a seed.
#[inline]
pub fn sample_step<R: Rng + ?Sized>(
    rng: &mut R,
    x: usize,
    q: &Quantizer,
    t: &TransitionKernel,
    o: &ChannelKernel,
) -> (usize, usize, usize) {
    let m = q.apply(x);
    let m_prime = o.matrix().sample_row(m, rng);
    let x_next = t.matrix().sample_row(x, rng);
    (x_next, m, m_prime)
}

/// Samples a symbol from a probability vector.
#[inline]
pub fn sample_from<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    (0..probs.len()).rev().find(|&i| probs[i] > 0.0).unwrap_or(0)
}
