//! Rollouts with optimal decoding, baselines, and the stability experiment.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

use rand::Rng as _;

use crate::belief::{optimal_reproduction_slice, posterior_into, predict_into, tv_distance, Belief};
use crate::dobrushin::contraction_coefficient;
use crate::error::{Error, Result};
use crate::model::{sample_from, sample_step, SystemSpec};
use crate::policy::{Choice, Constant, EncoderPolicy, EncoderView, Uniform};
use crate::quantizer::{Pruning, Quantizer, QuantizerSet};
use crate::rng::{stream, Purpose, Rng};
use crate::stats::{DiscountedSum, RunningStats};
use crate::window::{WindowCodec, WindowTable};

/// Fallback rate above which a rollout is flagged.
pub const DEFAULT_FALLBACK_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderMode {
    /// Optimal decoder on the exact filter.
    TrueBelief,
    /// Decoder on the filter of the window's approximate predictor.
    Window,
}

impl DecoderMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TrueBelief => "true-belief",
            Self::Window => "window-table",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutConfig {
    pub horizon: u64,
    pub seed: u64,
    pub decoder: DecoderMode,
    /// Defaults to the invariant distribution.
    pub prior: Option<Vec<f64>>,
    pub keep_trace: bool,
    pub fallback_threshold: f64,
}

impl RolloutConfig {
    pub fn new(horizon: u64, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            decoder: DecoderMode::TrueBelief,
            prior: None,
            keep_trace: false,
            fallback_threshold: DEFAULT_FALLBACK_THRESHOLD,
        }
    }

    pub fn with_decoder(mut self, decoder: DecoderMode) -> Self {
        self.decoder = decoder;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub avg_distortion: f64,
    /// `sum_t beta^t d(X_t, Xhat_t)`.
    pub discounted_distortion: f64,
    pub horizon: u64,
    pub decoder_mode: DecoderMode,
    pub fallbacks: u64,
    pub per_step_trace: Option<Vec<f64>>,
    /// Fallback rate exceeded the configured threshold.
    pub flagged: bool,
}

impl RolloutResult {
    pub fn fallback_rate(&self) -> f64 {
        if self.horizon == 0 {
            0.0
        } else {
            self.fallbacks as f64 / self.horizon as f64
        }
    }
}

/// Simulates the source and channel under `policy` for `config.horizon`
/// steps and accumulates the decoder's distortion.
///
/// Window policies first run N warm-up steps under uniform quantizers; these
/// are not counted. `table` is required for window policies and for the
/// window decoder.
pub fn rollout<P: EncoderPolicy + ?Sized>(
    spec: &SystemSpec,
    set: &QuantizerSet,
    policy: &P,
    mut table: Option<&mut WindowTable>,
    config: &RolloutConfig,
) -> Result<RolloutResult> {
    let xs = spec.x_size();
    let prior = match &config.prior {
        Some(p) => Belief::new(p.clone())?.into_vec(),
        None => spec.zeta().probs().to_vec(),
    };
    if prior.len() != xs {
        return Err(Error::Dimension {
            what: "prior length",
            expected: xs,
            found: prior.len(),
        });
    }
    let codec: Option<WindowCodec> = match (policy.window(), table.as_deref()) {
        (Some(n), Some(t)) if t.codec().len() == n => Some(*t.codec()),
        (Some(n), Some(t)) => {
            return Err(Error::Dimension {
                what: "window length",
                expected: n,
                found: t.codec().len(),
            })
        }
        (Some(_), None) => {
            return Err(Error::Validation("window policy needs its window table".into()))
        }
        (None, Some(t)) if config.decoder == DecoderMode::Window => Some(*t.codec()),
        (None, _) => None,
    };
    if config.decoder == DecoderMode::Window && table.is_none() {
        return Err(Error::Validation("window decoder needs a window table".into()));
    }
    let mut source_rng = stream(config.seed, Purpose::Evaluation, 0);
    let mut policy_rng = stream(config.seed, Purpose::Evaluation, 1);
    let mut x = sample_from(&prior, &mut source_rng);
    let mut pi = prior;
    let mut filter = vec![0.0; xs];
    let mut approx_filter = vec![0.0; xs];
    let mut w = 0u64;

    if let Some(c) = codec {
        for _ in 0..c.len() {
            let q = policy_rng.gen_range(0..set.len());
            let quant = set.get(q);
            let (xn, _, mp) = sample_step(&mut source_rng, x, quant, &spec.source, &spec.channel);
            posterior_into(spec, &pi, quant, mp, &mut filter)?;
            predict_into(spec, &filter, &mut pi);
            w = c.advance(w, q, mp);
            x = xn;
        }
    }

    let mut total = 0.0;
    let mut discounted = DiscountedSum::new(spec.beta);
    let mut fallbacks = 0u64;
    let mut trace = config.keep_trace.then(Vec::new);
    for _ in 0..config.horizon {
        let Choice { index, fallback } = policy.choose(
            &EncoderView {
                predictor: &pi,
                window: codec.map(|_| w),
            },
            &mut policy_rng,
        );
        if fallback {
            fallbacks += 1;
        }
        let quant = set.get(index);
        let (xn, _, mp) = sample_step(&mut source_rng, x, quant, &spec.source, &spec.channel);
        posterior_into(spec, &pi, quant, mp, &mut filter)?;
        let xhat = match config.decoder {
            DecoderMode::TrueBelief => optimal_reproduction_slice(spec, &filter),
            DecoderMode::Window => {
                let t = table.as_deref_mut().expect("checked above");
                let approx = t.predictor(w).ok_or(Error::UnreachableWindow(w))?;
                posterior_into(spec, approx, quant, mp, &mut approx_filter)?;
                optimal_reproduction_slice(spec, &approx_filter)
            }
        };
        let d = spec.distortion.get(x, xhat);
        total += d;
        discounted.push(d);
        if let Some(tr) = trace.as_mut() {
            tr.push(d);
        }
        predict_into(spec, &filter, &mut pi);
        if let Some(c) = codec {
            w = c.advance(w, index, mp);
        }
        x = xn;
    }
    let horizon = config.horizon;
    let avg = if horizon == 0 { 0.0 } else { total / horizon as f64 };
    let rate = if horizon == 0 {
        0.0
    } else {
        fallbacks as f64 / horizon as f64
    };
    if rate > 0.0 {
        log::warn!("{fallbacks} of {horizon} encoder decisions used a fallback action");
    }
    Ok(RolloutResult {
        avg_distortion: avg,
        discounted_distortion: discounted.value(),
        horizon,
        decoder_mode: config.decoder,
        fallbacks,
        per_step_trace: trace,
        flagged: rate > config.fallback_threshold,
    })
}

/// Mean and sample standard deviation of `avg_distortion` over seeds.
pub fn seed_average<F>(seeds: &[u64], mut run: F) -> Result<(f64, f64)>
where
    F: FnMut(u64) -> Result<RolloutResult>,
{
    let mut s = RunningStats::new();
    for &seed in seeds {
        s.push(run(seed)?.avg_distortion);
    }
    Ok((s.mean(), libm::sqrt(s.variance())))
}

/// Best one-shot quantizer for an i.i.d. source.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerOptimum {
    pub quantizer: Quantizer,
    pub distortion: f64,
    /// Number of quantizers evaluated.
    pub searched: u64,
}

fn require_iid(spec: &SystemSpec) -> Result<()> {
    if spec.source.is_iid() {
        Ok(())
    } else {
        Err(Error::NotIid(spec.source.first_differing_row().unwrap_or(1)))
    }
}

/// Scans every map `X -> M` and returns the one with the lowest expected
/// distortion under the optimal decoder, `sum_{m'} min_xhat sum_x
/// zeta(x) d(x, xhat) O(m'|Q(x))`. The lowest id wins ties.
pub fn exhaustive_quantizer_optimum(spec: &SystemSpec, cap: u128) -> Result<QuantizerOptimum> {
    require_iid(spec)?;
    let (xs, ms, mps, xh) = (spec.x_size(), spec.m_size(), spec.mp_size(), spec.xhat_size());
    let total = crate::quantizer::space_size(xs, ms)?;
    if total > cap {
        return Err(Error::TooLarge {
            what: "quantizer search",
            count: total,
            cap,
        });
    }
    let zeta = spec.zeta().probs();
    let weight: Vec<f64> = (0..xs)
        .flat_map(|x| (0..xh).map(move |j| (x, j)))
        .map(|(x, j)| zeta[x] * spec.distortion.get(x, j))
        .collect();
    let noiseless = spec.channel.is_noiseless();
    let o = spec.channel.matrix();
    let mut map = vec![0usize; xs];
    let mut bins = vec![0.0; ms * xh];
    let mut best = (f64::INFINITY, 0u64);
    let mut searched = 0u64;
    for id in 0..total as u64 {
        bins.iter_mut().for_each(|b| *b = 0.0);
        for x in 0..xs {
            let row = &weight[x * xh..(x + 1) * xh];
            let b = &mut bins[map[x] * xh..(map[x] + 1) * xh];
            for (acc, w) in b.iter_mut().zip(row) {
                *acc += w;
            }
        }
        let cost: f64 = if noiseless {
            (0..ms)
                .map(|m| bins[m * xh..(m + 1) * xh].iter().copied().fold(f64::INFINITY, f64::min))
                .sum()
        } else {
            (0..mps)
                .map(|mp| {
                    (0..xh)
                        .map(|j| (0..ms).map(|m| o.get(m, mp) * bins[m * xh + j]).sum::<f64>())
                        .fold(f64::INFINITY, f64::min)
                })
                .sum()
        };
        searched += 1;
        if cost < best.0 {
            best = (cost, id);
            if cost == 0.0 {
                break;
            }
        }
        // odometer, x = 0 least significant
        for digit in map.iter_mut() {
            *digit += 1;
            if *digit < ms {
                break;
            }
            *digit = 0;
        }
    }
    Ok(QuantizerOptimum {
        quantizer: Quantizer::from_id(best.1, xs, ms)?,
        distortion: best.0,
        searched,
    })
}

/// Optimum over quantizers whose cells are runs of consecutive symbols,
/// for a noiseless channel. Each cell is decoded to its best single
/// reproduction value.
pub fn interval_partition_optimum(spec: &SystemSpec) -> Result<QuantizerOptimum> {
    require_iid(spec)?;
    if !spec.channel.is_noiseless() {
        return Err(Error::Validation(
            "interval search assumes a noiseless channel".into(),
        ));
    }
    let xs = spec.x_size();
    let ms = spec.m_size();
    let zeta = spec.zeta().probs();
    let cell_cost = |lo: usize, hi: usize| -> f64 {
        (0..spec.xhat_size())
            .map(|j| (lo..hi).map(|x| zeta[x] * spec.distortion.get(x, j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut searched = 0u64;
    // every subset of the xs - 1 gaps with at most ms - 1 cuts
    for mask in 0u64..(1u64 << (xs - 1)) {
        if mask.count_ones() as usize > ms - 1 {
            continue;
        }
        searched += 1;
        let mut cost = 0.0;
        let mut map = vec![0usize; xs];
        let mut lo = 0;
        let mut label = 0;
        for x in 0..xs {
            map[x] = label;
            let cut = x + 1 == xs || mask & (1 << x) != 0;
            if cut {
                cost += cell_cost(lo, x + 1);
                lo = x + 1;
                label += 1;
            }
        }
        if best.as_ref().map_or(true, |(b, _)| cost < *b) {
            best = Some((cost, map));
        }
    }
    let (distortion, map) = best.expect("at least one partition");
    Ok(QuantizerOptimum {
        quantizer: Quantizer::new(map, ms)?,
        distortion,
        searched,
    })
}

/// Encoder sends the source symbol itself; true-belief decoder.
pub fn memoryless_baseline(spec: &SystemSpec, horizon: u64, seed: u64) -> Result<RolloutResult> {
    if spec.x_size() != spec.m_size() {
        return Err(Error::Dimension {
            what: "channel inputs for memoryless encoding",
            expected: spec.x_size(),
            found: spec.m_size(),
        });
    }
    if !spec.channel.is_label_symmetric() {
        log::warn!("channel is not symmetric; memoryless encoding need not be optimal here");
    }
    let identity = Quantizer::identity(spec.x_size(), spec.m_size())?;
    let set = QuantizerSet::from_members(spec.x_size(), spec.m_size(), Pruning::NONE, vec![identity])?;
    rollout(spec, &set, &Constant(0), None, &RolloutConfig::new(horizon, seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Sample mean of `||pi^mu_t - pi^nu_t||` for `t = 0..=horizon`.
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    /// `alpha^t ||mu - nu||`.
    pub envelope: Vec<f64>,
    pub alpha: f64,
}

impl StabilityReport {
    /// Largest `mean - envelope - k * se` over time; nonpositive when the
    /// envelope holds at `k` standard errors.
    pub fn worst_excess(&self, k: f64) -> f64 {
        (0..self.mean.len())
            .map(|t| self.mean[t] - self.envelope[t] - k * self.std_error[t])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Paired predictors from priors `mu` and `nu` driven by the same outputs.
/// The source starts from `mu` and quantizers are drawn uniformly from
/// `set`.
pub fn stability_experiment(
    spec: &SystemSpec,
    set: &QuantizerSet,
    mu: &Belief,
    nu: &Belief,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if !mu.absolutely_continuous_wrt(nu) {
        return Err(Error::Validation(
            "the first prior must be absolutely continuous with respect to the second".into(),
        ));
    }
    let report = contraction_coefficient(&spec.source, &spec.channel, set)?;
    let alpha = report.best_alpha();
    let xs = spec.x_size();
    let mut stats = vec![RunningStats::new(); horizon + 1];
    let mut f_mu = vec![0.0; xs];
    let mut f_nu = vec![0.0; xs];
    let policy = Uniform(set.len());
    for s in 0..samples {
        let mut rng = stream(seed, Purpose::Stability, s as u64);
        let mut x = sample_from(mu.probs(), &mut rng);
        let mut p_mu = mu.probs().to_vec();
        let mut p_nu = nu.probs().to_vec();
        stats[0].push(tv_distance(&p_mu, &p_nu));
        for t in 1..=horizon {
            let q = policy
                .choose(
                    &EncoderView {
                        predictor: &p_mu,
                        window: None,
                    },
                    &mut rng,
                )
                .index;
            let quant = set.get(q);
            let (xn, _, mp) = sample_step(&mut rng, x, quant, &spec.source, &spec.channel);
            posterior_into(spec, &p_mu, quant, mp, &mut f_mu)?;
            posterior_into(spec, &p_nu, quant, mp, &mut f_nu)?;
            predict_into(spec, &f_mu, &mut p_mu);
            predict_into(spec, &f_nu, &mut p_nu);
            stats[t].push(tv_distance(&p_mu, &p_nu));
            x = xn;
        }
    }
    let d0 = mu.tv(nu);
    Ok(StabilityReport {
        mean: stats.iter().map(|s| s.mean()).collect(),
        std_error: stats.iter().map(|s| s.std_error()).collect(),
        envelope: (0..=horizon).map(|t| libm::pow(alpha, t as f64) * d0).collect(),
        alpha,
    })
}

/// Wraps a policy trained from the invariant prior so it can start from any
/// prior over a noiseless channel: quantizers are drawn uniformly until the
/// predictor becomes a row of the transition matrix (the filter collapsed to
/// a point mass), after which the inner policy takes over.
#[derive(Debug)]
pub struct HittingTime<'a, P: ?Sized> {
    inner: &'a P,
    spec: &'a SystemSpec,
    q_count: usize,
    hit: Cell<bool>,
}

impl<'a, P: EncoderPolicy + ?Sized> HittingTime<'a, P> {
    pub fn new(inner: &'a P, spec: &'a SystemSpec, q_count: usize) -> Result<Self> {
        if !spec.channel.is_noiseless() {
            return Err(Error::Validation(format!(
                "hitting-time mode needs a noiseless channel ({})",
                "hitting the recurrent set is not observable otherwise"
            )));
        }
        Ok(Self {
            inner,
            spec,
            q_count,
            hit: Cell::new(false),
        })
    }

    pub fn has_hit(&self) -> bool {
        self.hit.get()
    }
}

impl<P: EncoderPolicy + ?Sized> EncoderPolicy for HittingTime<'_, P> {
    fn choose(&self, view: &EncoderView<'_>, rng: &mut Rng) -> Choice {
        if !self.hit.get() {
            let t = self.spec.source.matrix();
            let hit = (0..t.rows()).any(|r| tv_distance(t.row(r), view.predictor) < 1e-12);
            if hit {
                self.hit.set(true);
            } else {
                return Uniform(self.q_count).choose(view, rng);
            }
        }
        self.inner.choose(view, rng)
    }

    fn window(&self) -> Option<usize> {
        self.inner.window()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::sync::Arc;
    use crate::belief::bayes_cost;
    use crate::model::{ChannelKernel, DistortionFn, TransitionKernel};
    use crate::presets;

    #[test]
    fn identity_policy_on_noiseless_channel_is_lossless() {
        let spec = presets::markov4_symmetric_channel(0.0, 0.9).unwrap();
        let r = memoryless_baseline(&spec, 10_000, 1).unwrap();
        assert_eq!(r.avg_distortion, 0.0);
        assert_eq!(r.discounted_distortion, 0.0);
    }

    #[test]
    fn constant_quantizer_on_uniform_binary_source() {
        let spec = SystemSpec::new(
            TransitionKernel::iid(&[0.5, 0.5]).unwrap(),
            ChannelKernel::noiseless(2),
            DistortionFn::squared(&[0.0, 1.0], &[0.0, 1.0]).unwrap(),
            vec![0.0, 1.0],
            0.9,
        )
        .unwrap();
        let set = spec.quantizer_set(Pruning::NONE, 16).unwrap();
        let qi = set.iter().position(|q| q.bins_used() == 1).unwrap();
        let expected = bayes_cost(&spec, spec.zeta(), set.get(qi));
        assert_eq!(expected, 0.5);
        let r = rollout(&spec, &set, &Constant(qi), None, &RolloutConfig::new(100_000, 3)).unwrap();
        let se = libm::sqrt(0.25 / 100_000.0);
        assert!((r.avg_distortion - expected).abs() < 4.0 * se);
    }

    #[test]
    fn short_window_decoder_loses_on_a_sticky_source() {
        let spec = Arc::new(
            SystemSpec::new(
                TransitionKernel::from_rows(&[vec![0.99, 0.01], vec![0.01, 0.99]]).unwrap(),
                ChannelKernel::symmetric(2, 0.3).unwrap(),
                DistortionFn::squared(&[0.0, 1.0], &[0.0, 1.0]).unwrap(),
                vec![0.0, 1.0],
                0.9,
            )
            .unwrap(),
        );
        let identity = Quantizer::identity(2, 2).unwrap();
        let set = Arc::new(
            QuantizerSet::from_members(2, 2, Pruning::NONE, vec![identity]).unwrap(),
        );
        let mut table = WindowTable::build(spec.clone(), set.clone(), 1, 1 << 10).unwrap();
        let rc = RolloutConfig::new(50_000, 2);
        let exact = rollout(&spec, &set, &Constant(0), Some(&mut table), &rc).unwrap();
        let short = rollout(
            &spec,
            &set,
            &Constant(0),
            Some(&mut table),
            &rc.clone().with_decoder(DecoderMode::Window),
        )
        .unwrap();
        assert_eq!(short.decoder_mode, DecoderMode::Window);
        assert!(exact.avg_distortion < 0.1, "{}", exact.avg_distortion);
        assert!(short.avg_distortion > exact.avg_distortion + 0.1, "{}", short.avg_distortion);
    }

    #[test]
    fn exhaustive_and_interval_searches_agree() {
        for m in [2usize, 4] {
            let spec = presets::iid8_noiseless(m, 0.9).unwrap();
            let full = exhaustive_quantizer_optimum(&spec, 1 << 30).unwrap();
            let intervals = interval_partition_optimum(&spec).unwrap();
            assert!((full.distortion - intervals.distortion).abs() < 1e-12, "m = {m}");
            assert_eq!(full.searched, (m as u64).pow(8));
        }
        let lossless = presets::iid8_noiseless(8, 0.9).unwrap();
        assert_eq!(exhaustive_quantizer_optimum(&lossless, 1 << 30).unwrap().distortion, 0.0);
    }

    #[test]
    fn two_symbols_two_labels() {
        let spec = SystemSpec::new(
            TransitionKernel::iid(&[0.3, 0.7]).unwrap(),
            ChannelKernel::noiseless(2),
            DistortionFn::squared(&[0.0, 1.0], &[0.0, 1.0]).unwrap(),
            vec![0.0, 1.0],
            0.9,
        )
        .unwrap();
        let best = exhaustive_quantizer_optimum(&spec, 1 << 20).unwrap();
        assert_eq!(best.distortion, 0.0);
        assert!(best.quantizer.is_injective());
    }

    #[test]
    fn search_rejects_markov_sources() {
        let spec = presets::markov4_symmetric_channel(0.06, 0.9).unwrap();
        assert!(matches!(
            exhaustive_quantizer_optimum(&spec, 1 << 20),
            Err(Error::NotIid(_))
        ));
    }

    #[test]
    fn equal_priors_stay_together() {
        let spec = presets::markov4_symmetric_channel(0.06, 0.9).unwrap();
        let set = spec.quantizer_set(presets::SYMMETRIC_PRUNING, 1 << 20).unwrap();
        let mu = Belief::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let r = stability_experiment(&spec, &set, &mu, &mu, 10, 200, 1).unwrap();
        assert!(r.mean.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn iid_source_forgets_the_prior_in_one_step() {
        let spec = presets::iid8_noiseless(2, 0.9).unwrap();
        let set = spec.quantizer_set(presets::IID8_PRUNING, 1 << 20).unwrap();
        let mu = Belief::point_mass(8, 3);
        let nu = Belief::uniform(8);
        let r = stability_experiment(&spec, &set, &mu, &nu, 5, 100, 2).unwrap();
        assert!(r.mean[0] > 0.0);
        assert!(r.mean[1..].iter().all(|&m| m < 1e-12));
    }

    #[test]
    fn memoryless_distortion_is_relabeling_invariant() {
        let spec = presets::markov4_symmetric_channel(0.06, 0.9).unwrap();
        let perm = [2usize, 0, 3, 1];
        let t = spec.source.matrix();
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| t.get(perm[i], perm[j])).collect())
            .collect();
        let d: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| spec.distortion.get(perm[i], perm[j])).collect())
            .collect();
        let relabeled = SystemSpec::new(
            TransitionKernel::from_rows(&rows).unwrap(),
            ChannelKernel::symmetric(4, 0.06).unwrap(),
            DistortionFn::from_rows(&d).unwrap(),
            vec![0.0, 1.0, 2.0, 3.0],
            0.9,
        )
        .unwrap();
        let seeds = [1, 2, 3, 4, 5];
        let (a, sa) = seed_average(&seeds, |s| memoryless_baseline(&spec, 50_000, s)).unwrap();
        let (b, sb) = seed_average(&seeds, |s| memoryless_baseline(&relabeled, 50_000, s)).unwrap();
        assert!((a - b).abs() < 3.0 * (sa + sb) + 1e-3, "{a} vs {b}");
    }

    #[test]
    fn discounted_sum_one_pass_vs_compensated() {
        let mut rng = stream(9, Purpose::Evaluation, 0);
        let beta = 0.9999;
        let mut plain = 0.0;
        let mut w = 1.0;
        let mut kahan = DiscountedSum::new(beta);
        for _ in 0..100_000 {
            let d: f64 = rng.gen::<f64>() * 9.0;
            plain += w * d;
            w *= beta;
            kahan.push(d);
        }
        assert!((plain - kahan.value()).abs() <= 1e-6 * kahan.value());
    }

    #[test]
    fn hitting_wrapper_needs_noiseless_channel() {
        let noisy = presets::markov4_symmetric_channel(0.06, 0.9).unwrap();
        assert!(HittingTime::new(&Constant(0), &noisy, 3).is_err());
        let clean = presets::markov4_symmetric_channel(0.0, 0.9).unwrap();
        let set = clean.quantizer_set(Pruning::NONE, 1 << 20).unwrap();
        let identity = set.index_of(Quantizer::identity(4, 4).unwrap().id()).unwrap();
        let inner = Constant(identity);
        let wrapped = HittingTime::new(&inner, &clean, set.len()).unwrap();
        let mut cfg = RolloutConfig::new(2_000, 4);
        cfg.prior = Some(vec![0.25; 4]);
        let r = rollout(&clean, &set, &wrapped, None, &cfg).unwrap();
        assert!(wrapped.has_hit());
        assert!(r.avg_distortion < 0.1);
    }
}
