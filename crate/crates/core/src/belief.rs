//! Exact Bayesian predictor/filter recursion, the per-step expected
//! distortion and the optimal decoder.
//!
//! For a predictor `pi` (law of `X_t` given the channel outputs before `t`)
//! and the quantizer `Q` applied at time `t`, an observed output `m'` gives
//!
//! ```text
//! filter(x)      = O(m'|Q(x)) pi(x) / sum_y O(m'|Q(y)) pi(y)
//! next_predictor = filter T
//! ```
//!
//! The uniform reference measure on `M'` contributes a constant factor
//! `|M'|` to the likelihood that cancels in the normalization, so it is not
//! carried.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::SystemSpec;
use crate::quantizer::Quantizer;

/// Probabilities below this are treated as exact zeros.
pub const PROB_FLOOR: f64 = 1e-15;

/// Tolerance on the total mass of a belief.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// A probability vector over the source alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Validates an explicit probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Validation("empty belief".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Validation(format!(
                "belief has a negative or non-finite entry: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Validation(format!("belief sums to {sum}")));
        }
        Ok(Self(probs))
    }

    /// Clamps tiny entries to zero and rescales to unit mass.
    pub fn normalized(mut probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("non-finite belief entry".into()));
        }
        let total = apply_floor(&mut probs);
        if total <= 0.0 {
            return Err(Error::Validation("belief has no mass".into()));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        Self(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Total variation distance in the unnormalized L1 convention, so the
    /// diameter of the simplex is 2.
    pub fn tv(&self, other: &Belief) -> f64 {
        tv_distance(&self.0, &other.0)
    }

    /// `mu << nu`: every state charged by `self` is charged by `other`.
    pub fn absolutely_continuous_wrt(&self, other: &Belief) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a == 0.0 || *b > 0.0)
    }
}

/// `sum |a - b|`.
#[inline]
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Zeroes entries below [`PROB_FLOOR`] and rescales; returns the mass before
/// rescaling.
#[inline]
pub(crate) fn apply_floor(v: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for p in v.iter_mut() {
        if *p < PROB_FLOOR {
            *p = 0.0;
        }
        total += *p;
    }
    if total > 0.0 {
        let drift = (total - 1.0).abs();
        if drift > 1e-9 && drift < 1.0 - 1e-9 {
            log::trace!("renormalizing belief with mass drift {drift:e}");
        }
        let inv = 1.0 / total;
        v.iter_mut().for_each(|p| *p *= inv);
    }
    total
}

/// Filter, next predictor and normalizer from one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub filter: Belief,
    pub next_predictor: Belief,
    /// `sum_x O_Q(m'|x) pi(x)`, the probability of the observed output.
    pub normalizer: f64,
}

/// Writes the filter for output `m_prime` into `out`; returns the normalizer.
#[inline]
pub fn posterior_into(
    spec: &SystemSpec,
    pi: &[f64],
    q: &Quantizer,
    m_prime: usize,
    out: &mut [f64],
) -> Result<f64> {
    let o = spec.channel.matrix();
    let mut norm = 0.0;
    for (x, (f, &p)) in out.iter_mut().zip(pi).enumerate() {
        *f = o.get(q.apply(x), m_prime) * p;
        norm += *f;
    }
    if !(norm > 0.0) {
        return Err(Error::ImpossibleObservation { m_prime });
    }
    let inv = 1.0 / norm;
    out.iter_mut().for_each(|f| *f *= inv);
    apply_floor(out);
    Ok(norm)
}

/// Writes `filter T` into `out`.
#[inline]
pub fn predict_into(spec: &SystemSpec, filter: &[f64], out: &mut [f64]) {
    spec.source.matrix().left_multiply_into(filter, out);
    apply_floor(out);
}

/// One step of the predictor/filter recursion.
pub fn filter_update(
    spec: &SystemSpec,
    pi: &Belief,
    q: &Quantizer,
    m_prime: usize,
) -> Result<StepOutcome> {
    check_dims(spec, pi, q)?;
    if m_prime >= spec.mp_size() {
        return Err(Error::Validation(format!(
            "channel output {m_prime} outside 0..{}",
            spec.mp_size()
        )));
    }
    let n = spec.x_size();
    let mut filter = vec![0.0; n];
    let normalizer = posterior_into(spec, pi.probs(), q, m_prime, &mut filter)?;
    let mut next = vec![0.0; n];
    predict_into(spec, &filter, &mut next);
    Ok(StepOutcome {
        filter: Belief(filter),
        next_predictor: Belief(next),
        normalizer,
    })
}

fn check_dims(spec: &SystemSpec, pi: &Belief, q: &Quantizer) -> Result<()> {
    if pi.len() != spec.x_size() {
        return Err(Error::Dimension {
            what: "belief length",
            expected: spec.x_size(),
            found: pi.len(),
        });
    }
    if q.x_size() != spec.x_size() || q.m_size() != spec.m_size() {
        return Err(Error::Dimension {
            what: "quantizer domain",
            expected: spec.x_size(),
            found: q.x_size(),
        });
    }
    Ok(())
}

/// Expected distortion at the encoder under optimal decoding:
/// `sum_{m'} min_{xhat} sum_x d(x, xhat) O_Q(m'|x) pi(x)`.
#[inline]
pub fn bayes_cost_slice(spec: &SystemSpec, pi: &[f64], q: &Quantizer) -> f64 {
    let need = spec.m_size() * spec.xhat_size();
    if need <= 256 {
        let mut bins = [0.0; 256];
        bayes_cost_binned(spec, pi, q, &mut bins[..need])
    } else {
        bayes_cost_binned(spec, pi, q, &mut vec![0.0; need])
    }
}

/// Same value, grouped by channel input first:
/// `bins[m][xhat] = sum_{x : Q(x) = m} d(x, xhat) pi(x)`.
fn bayes_cost_binned(spec: &SystemSpec, pi: &[f64], q: &Quantizer, bins: &mut [f64]) -> f64 {
    let xh = spec.xhat_size();
    let d = &spec.distortion;
    for (x, &p) in pi.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let m = q.apply(x);
        for (j, b) in bins[m * xh..(m + 1) * xh].iter_mut().enumerate() {
            *b += d.get(x, j) * p;
        }
    }
    let min_row = |row: &[f64]| row.iter().copied().fold(f64::INFINITY, f64::min);
    if spec.channel.is_noiseless() {
        return bins.chunks_exact(xh).map(min_row).sum();
    }
    let o = spec.channel.matrix();
    let ms = spec.m_size();
    let mut total = 0.0;
    for mp in 0..spec.mp_size() {
        let mut best = f64::INFINITY;
        for j in 0..xh {
            let mut acc = 0.0;
            for m in 0..ms {
                acc += o.get(m, mp) * bins[m * xh + j];
            }
            best = best.min(acc);
        }
        total += best;
    }
    total
}

pub fn bayes_cost(spec: &SystemSpec, pi: &Belief, q: &Quantizer) -> f64 {
    bayes_cost_slice(spec, pi.probs(), q)
}

/// Decoder rule: the reproduction index minimizing the posterior expected
/// distortion. Values within `1e-12` of the minimum count as ties and the
/// lowest index wins.
#[inline]
pub fn optimal_reproduction_slice(spec: &SystemSpec, filter: &[f64]) -> usize {
    let d = &spec.distortion;
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for xh in 0..spec.xhat_size() {
        let mut acc = 0.0;
        for (x, &p) in filter.iter().enumerate() {
            acc += d.get(x, xh) * p;
        }
        if acc < best_val - 1e-12 {
            best_val = acc;
            best = xh;
        }
    }
    best
}

pub fn optimal_reproduction(spec: &SystemSpec, filter: &Belief) -> usize {
    optimal_reproduction_slice(spec, filter.probs())
}

/// Law of the next channel output: `P(m') = sum_x O_Q(m'|x) pi(x)`.
pub fn output_predictive(spec: &SystemSpec, pi: &Belief, q: &Quantizer) -> Vec<f64> {
    let o = spec.channel.matrix();
    let mut out = vec![0.0; spec.mp_size()];
    for (x, &p) in pi.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (slot, &w) in out.iter_mut().zip(o.row(q.apply(x))) {
            *slot += w * p;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelKernel, DistortionFn, TransitionKernel};
    use crate::presets;

    fn binary_uniform() -> SystemSpec {
        SystemSpec::new(
            TransitionKernel::iid(&[0.5, 0.5]).unwrap(),
            ChannelKernel::noiseless(2),
            DistortionFn::squared(&[0.0, 1.0], &[0.0, 1.0]).unwrap(),
            vec![0.0, 1.0],
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn constant_quantizer_is_uninformative() {
        let spec = presets::markov4_symmetric_channel(0.06, 0.9).unwrap();
        let pi = Belief::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let q = Quantizer::constant(4, 4, 2).unwrap();
        for mp in 0..4 {
            let step = filter_update(&spec, &pi, &q, mp).unwrap();
            assert!(step.filter.tv(&pi) < 1e-15);
            let pushed = spec.source.matrix().left_multiply(pi.probs());
            assert!(tv_distance(step.next_predictor.probs(), &pushed) < 1e-15);
        }
    }

    #[test]
    fn noiseless_injective_observation_pins_the_state() {
        let spec = presets::markov4_symmetric_channel(0.0, 0.9).unwrap();
        let q = Quantizer::new(vec![2, 0, 3, 1], 4).unwrap();
        let step = filter_update(&spec, spec.zeta(), &q, 3).unwrap();
        assert_eq!(step.filter, Belief::point_mass(4, 2));
        assert_eq!(step.next_predictor.probs(), spec.source.matrix().row(2));
    }

    #[test]
    fn impossible_observation_is_an_error() {
        let spec = presets::markov4_symmetric_channel(0.0, 0.9).unwrap();
        let q = Quantizer::constant(4, 4, 0).unwrap();
        assert_eq!(
            filter_update(&spec, spec.zeta(), &q, 1),
            Err(Error::ImpossibleObservation { m_prime: 1 })
        );
    }

    #[test]
    fn perfect_reconstruction_costs_nothing() {
        let spec = presets::markov4_symmetric_channel(0.0, 0.9).unwrap();
        let q = Quantizer::identity(4, 4).unwrap();
        assert_eq!(bayes_cost(&spec, spec.zeta(), &q), 0.0);
    }

    #[test]
    fn uniform_binary_constant_quantizer_costs_half() {
        let spec = binary_uniform();
        let q = Quantizer::constant(2, 2, 0).unwrap();
        assert!((bayes_cost(&spec, spec.zeta(), &q) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decoder_examples() {
        let spec = binary_uniform();
        assert_eq!(
            optimal_reproduction(&spec, &Belief::new(vec![0.9, 0.1]).unwrap()),
            0
        );
        assert_eq!(
            optimal_reproduction(&spec, &Belief::new(vec![0.1, 0.9]).unwrap()),
            1
        );
        // exact tie: lowest index
        assert_eq!(
            optimal_reproduction(&spec, &Belief::new(vec![0.5, 0.5]).unwrap()),
            0
        );
        let spec4 = presets::markov4_symmetric_channel(0.06, 0.9).unwrap();
        for x in 0..4 {
            assert_eq!(optimal_reproduction(&spec4, &Belief::point_mass(4, x)), x);
        }
    }

    #[test]
    fn output_law_examples() {
        let spec = presets::markov4_symmetric_channel(0.06, 0.9).unwrap();
        let pi = Belief::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let q = Quantizer::constant(4, 4, 1).unwrap();
        let law = output_predictive(&spec, &pi, &q);
        assert!(tv_distance(&law, spec.channel.matrix().row(1)) < 1e-15);

        let noiseless = presets::markov4_symmetric_channel(0.0, 0.9).unwrap();
        let q = Quantizer::new(vec![1, 3, 0, 2], 4).unwrap();
        let law = output_predictive(&noiseless, &pi, &q);
        for x in 0..4 {
            assert_eq!(law[q.apply(x)], pi.probs()[x]);
        }
    }

    #[test]
    fn floor_clamps_and_renormalizes() {
        let b = Belief::normalized(vec![1e-17, 0.5, 0.5]).unwrap();
        assert_eq!(b.probs(), &[0.0, 0.5, 0.5]);
        assert!(Belief::normalized(vec![0.0, 0.0]).is_err());
        assert!(Belief::new(vec![0.5, 0.6]).is_err());
        assert!(Belief::new(vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn dimension_errors() {
        let spec = binary_uniform();
        let q3 = Quantizer::constant(3, 2, 0).unwrap();
        assert!(filter_update(&spec, spec.zeta(), &q3, 0).is_err());
        let q = Quantizer::constant(2, 2, 0).unwrap();
        assert!(filter_update(&spec, spec.zeta(), &q, 5).is_err());
    }
}
