//! Dobrushin ergodicity coefficients and the predictor contraction rates
//! built from them.

use crate::error::Result;
use crate::matrix::StochasticMatrix;
use crate::model::{induced_channel, ChannelKernel, TransitionKernel};
use crate::quantizer::QuantizerSet;

/// `min over row pairs (i, j) of sum_k min(K[i][k], K[j][k])`.
///
/// A single-row matrix has no pairs; the empty minimum is taken as 1.
pub fn dobrushin(k: &StochasticMatrix) -> f64 {
    let mut best = 1.0_f64;
    for i in 0..k.rows() {
        for j in i + 1..k.rows() {
            let overlap: f64 = k
                .row(i)
                .iter()
                .zip(k.row(j))
                .map(|(a, b)| a.min(*b))
                .sum();
            best = best.min(overlap);
        }
    }
    best.clamp(0.0, 1.0)
}

/// Contraction rates for predictor stability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub delta_t: f64,
    pub delta_o: f64,
    /// Minimum of `delta(O_Q)` over the active quantizers.
    pub tilde_delta_o: f64,
    /// `(1 - delta(T)) (2 - delta(O))`.
    pub alpha: f64,
    /// `(1 - delta(T)) (2 - tilde_delta(O))`.
    pub alpha_sharp: f64,
    /// `1 - delta(T)`, only valid when `delta(T) > 1/2`.
    pub alpha_fallback: Option<f64>,
}

impl ContractionReport {
    /// Smallest rate that the theory certifies.
    pub fn best_alpha(&self) -> f64 {
        let mut a = self.alpha.min(self.alpha_sharp);
        if let Some(f) = self.alpha_fallback {
            a = a.min(f);
        }
        a
    }

    /// Whether the window approximation has a certified exponential rate.
    pub fn certifies_stability(&self) -> bool {
        self.best_alpha() < 1.0
    }

    /// The analytic bound `2 alpha^N` on the window loss term.
    pub fn loss_bound(&self, window: usize) -> f64 {
        2.0 * libm::pow(self.best_alpha(), window as f64)
    }
}

pub fn contraction_coefficient(
    t: &TransitionKernel,
    o: &ChannelKernel,
    quantizers: &QuantizerSet,
) -> Result<ContractionReport> {
    let delta_t = dobrushin(t.matrix());
    let delta_o = dobrushin(o.matrix());
    let mut tilde = 1.0_f64;
    for q in quantizers.iter() {
        tilde = tilde.min(dobrushin(&induced_channel(o, q)?));
    }
    let alpha = (1.0 - delta_t) * (2.0 - delta_o);
    let alpha_sharp = (1.0 - delta_t) * (2.0 - tilde);
    Ok(ContractionReport {
        delta_t,
        delta_o,
        tilde_delta_o: tilde,
        alpha,
        alpha_sharp,
        alpha_fallback: (delta_t > 0.5).then_some(1.0 - delta_t),
    })
}
