//! Quantizers (maps from the source alphabet to the channel input alphabet)
//! and the finite action sets built from them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;

use crate::error::{Error, Result};

/// A total map `X -> M`.
///
/// `id` is the mixed-radix encoding of the map in base `|M|` with `x = 0` as
/// the least significant digit, so ids range over `0..|M|^|X|`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Quantizer {
    map: Vec<u16>,
    id: u64,
    m_size: usize,
}

impl Quantizer {
    pub fn new(map: Vec<usize>, m_size: usize) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::Validation("quantizer over an empty alphabet".into()));
        }
        if m_size == 0 || m_size > u16::MAX as usize {
            return Err(Error::Validation(format!("unsupported |M| = {m_size}")));
        }
        space_size(map.len(), m_size)?;
        let mut id = 0u64;
        for &m in map.iter().rev() {
            if m >= m_size {
                return Err(Error::Validation(format!(
                    "quantizer label {m} outside 0..{m_size}"
                )));
            }
            id = id * m_size as u64 + m as u64;
        }
        Ok(Self {
            map: map.into_iter().map(|m| m as u16).collect(),
            id,
            m_size,
        })
    }

    /// Decodes a quantizer from its id.
    pub fn from_id(id: u64, x_size: usize, m_size: usize) -> Result<Self> {
        let total = space_size(x_size, m_size)?;
        if id as u128 >= total {
            return Err(Error::Validation(format!(
                "quantizer id {id} outside 0..{total}"
            )));
        }
        let mut rest = id;
        let map = (0..x_size)
            .map(|_| {
                let digit = (rest % m_size as u64) as u16;
                rest /= m_size as u64;
                digit
            })
            .collect();
        Ok(Self { map, id, m_size })
    }

    /// `x -> x`, requires `|M| >= |X|`.
    pub fn identity(x_size: usize, m_size: usize) -> Result<Self> {
        if m_size < x_size {
            return Err(Error::Validation(format!(
                "identity quantizer needs |M| >= |X| ({m_size} < {x_size})"
            )));
        }
        Self::new((0..x_size).collect(), m_size)
    }

    pub fn constant(x_size: usize, m_size: usize, label: usize) -> Result<Self> {
        Self::new(vec![label; x_size], m_size)
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.map[x] as usize
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn x_size(&self) -> usize {
        self.map.len()
    }

    pub fn m_size(&self) -> usize {
        self.m_size
    }

    pub fn map(&self) -> impl Iterator<Item = usize> + '_ {
        self.map.iter().map(|&m| m as usize)
    }

    /// Number of distinct labels actually used.
    pub fn bins_used(&self) -> usize {
        let mut seen = vec![false; self.m_size];
        self.map.iter().for_each(|&m| seen[m as usize] = true);
        seen.into_iter().filter(|s| *s).count()
    }

    pub fn is_injective(&self) -> bool {
        self.bins_used() == self.map.len()
    }
}

impl fmt::Display for Quantizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, m) in self.map.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "]")
    }
}

/// `|M|^|X|` or an error when it does not fit a `u64` id.
pub fn space_size(x_size: usize, m_size: usize) -> Result<u128> {
    let total = (m_size as u128).checked_pow(x_size as u32);
    match total {
        Some(t) if t <= u64::MAX as u128 => Ok(t),
        _ => Err(Error::TooLarge {
            what: "quantizer space",
            count: u128::MAX,
            cap: u64::MAX as u128,
        }),
    }
}

/// Opt-in reductions of the quantizer set.
///
/// Each one is only loss-free under a condition on the source or channel;
/// [`crate::model::SystemSpec`] checks the condition before it is applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Pruning {
    /// Drop maps that leave a channel input unused (noiseless channels).
    pub nonempty_bins: bool,
    /// Keep one map per relabeling class of the channel inputs (channels
    /// invariant under a joint permutation of inputs and outputs).
    pub canonical_labels: bool,
    /// Keep only maps whose bins are contiguous runs of source symbols
    /// (i.i.d. sources under a distortion convex in the symbol order).
    pub interval_bins: bool,
}

impl Pruning {
    pub const NONE: Pruning = Pruning {
        nonempty_bins: false,
        canonical_labels: false,
        interval_bins: false,
    };

    pub fn is_none(&self) -> bool {
        *self == Self::NONE
    }

    /// Parses a whitespace- or comma-separated list of flag names.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Pruning::NONE;
        for token in text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
        {
            match token {
                "none" => {}
                "nonempty_bins" => p.nonempty_bins = true,
                "canonical_labels" => p.canonical_labels = true,
                "interval_bins" => p.interval_bins = true,
                other => {
                    return Err(Error::Validation(format!("unknown pruning flag `{other}`")))
                }
            }
        }
        Ok(p)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.nonempty_bins {
            out.push("nonempty_bins");
        }
        if self.canonical_labels {
            out.push("canonical_labels");
        }
        if self.interval_bins {
            out.push("interval_bins");
        }
        out
    }
}

impl fmt::Display for Pruning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.names();
        if names.is_empty() {
            write!(f, "none")
        } else {
            write!(f, "{}", names.join(","))
        }
    }
}

/// The active action set: an ordered list of quantizers sorted by id.
///
/// Positions in this list ("active indices") are what Q-tables and window
/// ids refer to.
#[derive(Debug, Clone)]
pub struct QuantizerSet {
    x_size: usize,
    m_size: usize,
    pruning: Pruning,
    members: Vec<Quantizer>,
    position: HashMap<u64, usize>,
}

/// Default cap on the number of active quantizers.
pub const DEFAULT_SET_CAP: usize = 1 << 20;

impl QuantizerSet {
    /// Enumerates every map `X -> M` that survives `pruning`.
    ///
    /// Applicability of the pruning is not checked here; see
    /// [`crate::model::SystemSpec::quantizer_set`].
    pub fn enumerate(x_size: usize, m_size: usize, pruning: Pruning, cap: usize) -> Result<Self> {
        if x_size == 0 || m_size == 0 {
            return Err(Error::Validation("empty alphabet".into()));
        }
        let total = space_size(x_size, m_size)?;
        if pruning.is_none() && total > cap as u128 {
            return Err(Error::TooLarge {
                what: "quantizer set",
                count: total,
                cap: cap as u128,
            });
        }
        let mut maps = Vec::new();
        let mut current = vec![0usize; x_size];
        let mut used = vec![false; m_size];
        Enumerator {
            x_size,
            m_size,
            pruning,
            cap,
        }
        .walk(0, 0, &mut current, &mut used, &mut maps)?;
        let members = maps
            .into_iter()
            .map(|m| Quantizer::new(m, m_size))
            .collect::<Result<Vec<_>>>()?;
        Self::from_members(x_size, m_size, pruning, members)
    }

    /// Builds a set from explicit members (deduplicated and sorted by id).
    pub fn from_members(
        x_size: usize,
        m_size: usize,
        pruning: Pruning,
        mut members: Vec<Quantizer>,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Validation("quantizer set is empty".into()));
        }
        for q in &members {
            if q.x_size() != x_size || q.m_size() != m_size {
                return Err(Error::Validation(format!(
                    "quantizer {q} does not map {x_size} symbols into {m_size} labels"
                )));
            }
        }
        members.sort_by_key(|q| q.id());
        members.dedup_by_key(|q| q.id());
        let position = members
            .iter()
            .enumerate()
            .map(|(i, q)| (q.id(), i))
            .collect();
        Ok(Self {
            x_size,
            m_size,
            pruning,
            members,
            position,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    #[inline]
    pub fn get(&self, index: usize) -> &Quantizer {
        &self.members[index]
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Quantizer> {
        self.members.iter()
    }

    /// Active index of the quantizer with the given id.
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.position.get(&id).copied()
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn m_size(&self) -> usize {
        self.m_size
    }

    pub fn pruning(&self) -> Pruning {
        self.pruning
    }

    /// Ids of all members, in order; used for cache keys.
    pub fn ids(&self) -> Vec<u64> {
        self.members.iter().map(Quantizer::id).collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "{} quantizers ({} -> {} labels, pruning: {})",
            self.len(),
            self.x_size,
            self.m_size,
            self.pruning
        )
    }
}

struct Enumerator {
    x_size: usize,
    m_size: usize,
    pruning: Pruning,
    cap: usize,
}

impl Enumerator {
    fn walk(
        &self,
        x: usize,
        distinct: usize,
        current: &mut Vec<usize>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        if x == self.x_size {
            if self.pruning.nonempty_bins && distinct < self.m_size {
                return Ok(());
            }
            if out.len() >= self.cap {
                return Err(Error::TooLarge {
                    what: "quantizer set",
                    count: out.len() as u128 + 1,
                    cap: self.cap as u128,
                });
            }
            out.push(current.clone());
            return Ok(());
        }
        if self.pruning.nonempty_bins && self.m_size - distinct > self.x_size - x {
            return Ok(());
        }
        let top = if self.pruning.canonical_labels {
            (distinct + 1).min(self.m_size)
        } else {
            self.m_size
        };
        for label in 0..top {
            let fresh = !used[label];
            if self.pruning.interval_bins && x > 0 && !fresh && current[x - 1] != label {
                continue;
            }
            current[x] = label;
            used[label] = true;
            self.walk(x + 1, distinct + fresh as usize, current, used, out)?;
            if fresh {
                used[label] = false;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn id_roundtrip_is_bijective() {
        let mut seen = hashbrown::HashSet::new();
        for id in 0..81u64 {
            let q = Quantizer::from_id(id, 4, 3).unwrap();
            assert_eq!(Quantizer::new(q.map().collect(), 3).unwrap().id(), id);
            seen.insert(q.map().collect::<Vec<_>>());
        }
        assert_eq!(seen.len(), 81);
        assert!(Quantizer::from_id(81, 4, 3).is_err());
    }

    #[test]
    fn digit_order_puts_first_symbol_lowest() {
        let q = Quantizer::new(vec![1, 0, 0], 2).unwrap();
        assert_eq!(q.id(), 1);
        let q = Quantizer::new(vec![0, 0, 1], 2).unwrap();
        assert_eq!(q.id(), 4);
    }

    #[test]
    fn full_set_has_every_map() {
        let set = QuantizerSet::enumerate(4, 4, Pruning::NONE, 1 << 20).unwrap();
        assert_eq!(set.len(), 256);
        for (i, q) in set.iter().enumerate() {
            assert_eq!(q.id(), i as u64);
        }
    }

    fn stirling2(n: usize, k: usize) -> usize {
        if n == 0 && k == 0 {
            return 1;
        }
        if n == 0 || k == 0 {
            return 0;
        }
        k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)
    }

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn canonical_labels_count_set_partitions() {
        let set = QuantizerSet::enumerate(
            4,
            4,
            Pruning {
                canonical_labels: true,
                ..Pruning::NONE
            },
            1 << 20,
        )
        .unwrap();
        // Bell(4)
        assert_eq!(set.len(), 15);
        let set = QuantizerSet::enumerate(
            6,
            3,
            Pruning {
                canonical_labels: true,
                ..Pruning::NONE
            },
            1 << 20,
        )
        .unwrap();
        assert_eq!(set.len(), (1..=3).map(|k| stirling2(6, k)).sum::<usize>());
    }

    #[test]
    fn interval_canonical_nonempty_are_compositions() {
        let p = Pruning {
            nonempty_bins: true,
            canonical_labels: true,
            interval_bins: true,
        };
        for m in [2usize, 4, 8] {
            let set = QuantizerSet::enumerate(8, m, p, 1 << 20).unwrap();
            assert_eq!(set.len(), binomial(7, m - 1));
            for q in set.iter() {
                let labels: Vec<usize> = q.map().collect();
                assert!(labels.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
                assert_eq!(q.bins_used(), m);
            }
        }
    }

    #[test]
    fn nonempty_alone_counts_surjections() {
        let p = Pruning {
            nonempty_bins: true,
            ..Pruning::NONE
        };
        let set = QuantizerSet::enumerate(4, 2, p, 1 << 20).unwrap();
        assert_eq!(set.len(), 16 - 2);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            QuantizerSet::enumerate(8, 8, Pruning::NONE, 1000),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn parses_pruning_flags() {
        let p = Pruning::parse("canonical_labels, interval_bins").unwrap();
        assert!(p.canonical_labels && p.interval_bins && !p.nonempty_bins);
        assert_eq!(Pruning::parse(&p.to_string()).unwrap(), p);
        assert!(Pruning::parse("bogus").is_err());
    }
}
