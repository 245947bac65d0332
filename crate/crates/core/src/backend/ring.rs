//! Consistent-hash ring with virtual nodes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::generator::vocab::mix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "node-{}", self.0)
    }
}

/// Keys placed on the ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StoreKey {
    Article(u64),
    Media(u64),
}

impl StoreKey {
    pub fn hash(self) -> u64 {
        match self {
            StoreKey::Article(id) => mix(mix(id) ^ 0xA5A5_0000_0000_0001),
            StoreKey::Media(id) => mix(mix(id) ^ 0x5A5A_0000_0000_0002),
        }
    }
}

fn token(node: NodeId, vnode: u32) -> u64 {
    mix(mix(node.0 as u64 + 1).wrapping_add(vnode as u64))
}

/// Sorted vnode tokens. Shard `i` is the key range `(token[i-1], token[i]]`;
/// shard 0 also takes the wrap-around above the last token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    tokens: Vec<(u64, NodeId)>,
    vnodes: u32,
}

impl Ring {
    pub fn new(nodes: impl IntoIterator<Item = NodeId>, vnodes: u32) -> Self {
        let mut tokens: Vec<(u64, NodeId)> =
            nodes.into_iter().flat_map(|n| (0..vnodes).map(move |v| (token(n, v), n))).collect();
        tokens.sort();
        tokens.dedup_by_key(|t| t.0);
        Ring { tokens, vnodes }
    }

    pub fn shard_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn vnodes(&self) -> u32 {
        self.vnodes
    }

    pub fn shard_of(&self, key_hash: u64) -> usize {
        let i = self.tokens.partition_point(|(t, _)| *t < key_hash);
        if i == self.tokens.len() {
            0
        } else {
            i
        }
    }

    /// Inclusive hash bounds of a shard; shard 0 wraps.
    pub fn range(&self, shard: usize) -> (u64, u64) {
        let end = self.tokens[shard].0;
        let start = if shard == 0 { self.tokens[self.tokens.len() - 1].0.wrapping_add(1) } else { self.tokens[shard - 1].0 + 1 };
        (start, end)
    }

    /// The first `r` distinct nodes met walking clockwise from the shard's token.
    pub fn replicas(&self, shard: usize, r: usize) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(r);
        let n = self.tokens.len();
        for step in 0..n {
            let node = self.tokens[(shard + step) % n].1;
            if !out.contains(&node) {
                out.push(node);
                if out.len() == r {
                    break;
                }
            }
        }
        out
    }

    pub fn nodes(&self) -> BTreeSet<NodeId> {
        self.tokens.iter().map(|t| t.1).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nodes(n: u32) -> Vec<NodeId> {
        (0..n).map(NodeId).collect()
    }

    #[test]
    fn ranges_cover_key_space_without_overlap() {
        let ring = Ring::new(nodes(4), 8);
        let mut total: u128 = 0;
        for s in 0..ring.shard_count() {
            let (a, b) = ring.range(s);
            total += if a <= b { (b - a) as u128 + 1 } else { (u64::MAX - a) as u128 + 1 + b as u128 + 1 };
        }
        assert_eq!(total, u64::MAX as u128 + 1);
    }

    #[test]
    fn adding_a_fifth_node_moves_about_a_fifth_of_keys() {
        let before = Ring::new(nodes(4), 64);
        let after = Ring::new(nodes(5), 64);
        let keys = 10_000u64;
        let moved = (0..keys)
            .filter(|k| {
                let h = StoreKey::Article(*k).hash();
                before.replicas(before.shard_of(h), 1) != after.replicas(after.shard_of(h), 1)
            })
            .count();
        let frac = moved as f64 / keys as f64;
        assert!((frac - 0.2).abs() <= 0.05, "moved {frac}");
    }

    proptest! {
        #[test]
        fn replicas_are_distinct(n in 1u32..9, r in 1usize..5, key in any::<u64>()) {
            let ring = Ring::new(nodes(n), 16);
            let reps = ring.replicas(ring.shard_of(key), r);
            prop_assert_eq!(reps.len(), r.min(n as usize));
            let set: BTreeSet<_> = reps.iter().collect();
            prop_assert_eq!(set.len(), reps.len());
        }

        #[test]
        fn shard_contains_its_keys(key in any::<u64>()) {
            let ring = Ring::new(nodes(3), 8);
            let (a, b) = ring.range(ring.shard_of(key));
            if a <= b {
                prop_assert!(a <= key && key <= b);
            } else {
                prop_assert!(key >= a || key <= b);
            }
        }
    }
}
