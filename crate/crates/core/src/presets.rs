//! The benchmark systems used by the experiments and the acceptance suite.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::matrix::StochasticMatrix;
use crate::model::{ChannelKernel, DistortionFn, SystemSpec, TransitionKernel};
use crate::quantizer::Pruning;

/// Marginal of the 8-symbol i.i.d. source.
pub const IID8_MARGINAL: [f64; 8] = [
    0.25, 0.125, 0.125, 0.0625, 0.0625, 0.0625, 0.25, 0.0625,
];

/// The 4-state Markov source with Dobrushin coefficient 2/3.
pub fn markov4_rows() -> Vec<Vec<f64>> {
    vec![
        vec![1.0 / 2.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0],
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0],
        vec![1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0],
        vec![1.0 / 4.0, 1.0 / 4.0, 1.0 / 4.0, 1.0 / 4.0],
    ]
}

/// The 4x4 example kernel with Dobrushin coefficient 1/2.
pub fn dobrushin_example_rows() -> Vec<Vec<f64>> {
    vec![
        vec![1.0 / 2.0, 1.0 / 2.0, 0.0, 0.0],
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0],
        vec![1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0],
        vec![1.0 / 4.0, 1.0 / 4.0, 1.0 / 4.0, 1.0 / 4.0],
    ]
}

/// The randomly generated 6-state source, as printed (4 decimals).
pub fn markov6_rows_printed() -> Vec<Vec<f64>> {
    vec![
        vec![0.2476, 0.1527, 0.0775, 0.2219, 0.2082, 0.0920],
        vec![0.0805, 0.0247, 0.0776, 0.1290, 0.3718, 0.3164],
        vec![0.1510, 0.2335, 0.2042, 0.0107, 0.1425, 0.2580],
        vec![0.0056, 0.2252, 0.2303, 0.2173, 0.1141, 0.2076],
        vec![0.1357, 0.2685, 0.0494, 0.1981, 0.2930, 0.0553],
        vec![0.2373, 0.2795, 0.0698, 0.0399, 0.1371, 0.2363],
    ]
}

fn indices(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

/// 8-symbol i.i.d. source over a noiseless channel with `m_size` inputs,
/// squared distortion with reproduction alphabet equal to the source values.
pub fn iid8_noiseless(m_size: usize, beta: f64) -> Result<SystemSpec> {
    let values = indices(8);
    SystemSpec::new(
        TransitionKernel::iid(&IID8_MARGINAL)?,
        ChannelKernel::noiseless(m_size),
        DistortionFn::squared(&values, &values)?,
        values,
        beta,
    )
}

/// Pruning that is loss-free for [`iid8_noiseless`].
pub const IID8_PRUNING: Pruning = Pruning {
    nonempty_bins: true,
    canonical_labels: true,
    interval_bins: true,
};

/// 4-state Markov source over the 4-ary symmetric channel.
pub fn markov4_symmetric_channel(error: f64, beta: f64) -> Result<SystemSpec> {
    let values = indices(4);
    let channel = if error == 0.0 {
        ChannelKernel::noiseless(4)
    } else {
        ChannelKernel::symmetric(4, error)?
    };
    SystemSpec::new(
        TransitionKernel::from_rows(&markov4_rows())?,
        channel,
        DistortionFn::squared(&values, &values)?,
        values,
        beta,
    )
}

/// Pruning that is loss-free for symmetric channels.
pub const SYMMETRIC_PRUNING: Pruning = Pruning {
    nonempty_bins: false,
    canonical_labels: true,
    interval_bins: false,
};

/// 6-state source (rows rescaled to sum to one) over the 3-ary symmetric
/// channel with error probability 0.04.
pub fn markov6_ternary(beta: f64) -> Result<SystemSpec> {
    let values = indices(6);
    let (matrix, _) = StochasticMatrix::from_rows_normalized(&markov6_rows_printed())?;
    SystemSpec::new(
        TransitionKernel::new(matrix)?,
        ChannelKernel::symmetric(3, 0.04)?,
        DistortionFn::squared(&values, &values)?,
        values,
        beta,
    )
}
