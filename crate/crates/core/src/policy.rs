//! Encoder policies: maps from the encoder's information to a quantizer
//! index in the active set.

use alloc::sync::Arc;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::Rng as _;

use crate::lattice::{BeliefLattice, ExtendedPolicy};
use crate::rng::Rng;
use crate::window::WindowCodec;

/// What the encoder knows at time t.
#[derive(Debug, Clone, Copy)]
pub struct EncoderView<'a> {
    /// True predictor `pi_t`.
    pub predictor: &'a [f64],
    /// Current window id, when the policy uses windows.
    pub window: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Choice {
    pub index: usize,
    /// The policy had no trained action for this state.
    pub fallback: bool,
}

impl Choice {
    pub fn trained(index: usize) -> Self {
        Self {
            index,
            fallback: false,
        }
    }
}

pub trait EncoderPolicy {
    fn choose(&self, view: &EncoderView<'_>, rng: &mut Rng) -> Choice;

    /// Window length the policy reads, if any.
    fn window(&self) -> Option<usize> {
        None
    }
}

/// Always the same quantizer.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub usize);

impl EncoderPolicy for Constant {
    fn choose(&self, _: &EncoderView<'_>, _: &mut Rng) -> Choice {
        Choice::trained(self.0)
    }
}

/// Uniform choice over `0..len`, independent of history.
#[derive(Debug, Clone, Copy)]
pub struct Uniform(pub usize);

impl EncoderPolicy for Uniform {
    fn choose(&self, _: &EncoderView<'_>, rng: &mut Rng) -> Choice {
        Choice::trained(rng.gen_range(0..self.0))
    }
}

/// Random deterministic stationary policy: a fixed action table over the
/// cells of a coarse belief lattice.
#[derive(Debug, Clone)]
pub struct RandomStationary {
    lattice: Arc<BeliefLattice>,
    actions: Vec<usize>,
}

impl RandomStationary {
    pub fn sample(lattice: Arc<BeliefLattice>, q_count: usize, rng: &mut Rng) -> Self {
        let actions = (0..lattice.len()).map(|_| rng.gen_range(0..q_count)).collect();
        Self { lattice, actions }
    }
}

impl EncoderPolicy for RandomStationary {
    fn choose(&self, view: &EncoderView<'_>, _: &mut Rng) -> Choice {
        let cell = self.lattice.nearest(view.predictor, None).id;
        Choice::trained(self.actions[cell])
    }
}

/// Trained lattice policy extended to all beliefs.
#[derive(Debug, Clone)]
pub struct LatticePolicy(pub ExtendedPolicy);

impl EncoderPolicy for LatticePolicy {
    fn choose(&self, view: &EncoderView<'_>, _: &mut Rng) -> Choice {
        let hit = self.0.lookup(view.predictor);
        Choice {
            index: hit.action,
            fallback: hit.fallback,
        }
    }
}

/// Trained window policy. Windows never seen in training get the most
/// common trained action.
#[derive(Debug, Clone)]
pub struct WindowPolicy {
    codec: WindowCodec,
    actions: HashMap<u64, usize>,
    modal: usize,
}

impl WindowPolicy {
    pub fn new(codec: WindowCodec, actions: HashMap<u64, usize>, q_count: usize) -> Self {
        let mut tally = alloc::vec![0usize; q_count.max(1)];
        for &a in actions.values() {
            tally[a] += 1;
        }
        let modal = (0..tally.len()).max_by_key(|&a| (tally[a], core::cmp::Reverse(a))).unwrap_or(0);
        Self {
            codec,
            actions,
            modal,
        }
    }

    pub fn codec(&self) -> &WindowCodec {
        &self.codec
    }

    pub fn action(&self, window: u64) -> Option<usize> {
        self.actions.get(&window).copied()
    }

    pub fn modal_action(&self) -> usize {
        self.modal
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

impl EncoderPolicy for WindowPolicy {
    fn choose(&self, view: &EncoderView<'_>, _: &mut Rng) -> Choice {
        let w = view.window.expect("window policy needs a window");
        match self.actions.get(&w) {
            Some(&a) => Choice::trained(a),
            None => Choice {
                index: self.modal,
                fallback: true,
            },
        }
    }

    fn window(&self) -> Option<usize> {
        Some(self.codec.len())
    }
}

impl<P: EncoderPolicy + ?Sized> EncoderPolicy for &P {
    fn choose(&self, view: &EncoderView<'_>, rng: &mut Rng) -> Choice {
        (**self).choose(view, rng)
    }

    fn window(&self) -> Option<usize> {
        (**self).window()
    }
}
