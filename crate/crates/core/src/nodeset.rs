//! Bitset over dense node indices.
//!
//! Sets up to 64 nodes live inline in a single word; larger graphs spill to
//! the heap. Trailing zero words are always trimmed so that derived equality
//! and hashing are structural.

use std::cmp::Ordering;
use std::fmt;

use itertools::Itertools;
use smallvec::SmallVec;

const WORD: usize = 64;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct NodeSet {
    words: SmallVec<[u64; 1]>,
}

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(node: usize) -> Self {
        let mut s = Self::new();
        s.insert(node);
        s
    }

    /// The set `{0, 1, ..., n - 1}`.
    pub fn full(n: usize) -> Self {
        (0..n).collect()
    }

    pub fn insert(&mut self, node: usize) -> bool {
        let (w, b) = (node / WORD, node % WORD);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn remove(&mut self, node: usize) -> bool {
        let (w, b) = (node / WORD, node % WORD);
        if w >= self.words.len() {
            return false;
        }
        let present = self.words[w] & (1 << b) != 0;
        self.words[w] &= !(1 << b);
        self.trim();
        present
    }

    pub fn contains(&self, node: usize) -> bool {
        let (w, b) = (node / WORD, node % WORD);
        self.words.get(w).is_some_and(|word| word & (1 << b) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn with(&self, node: usize) -> Self {
        let mut s = self.clone();
        s.insert(node);
        s
    }

    pub fn without(&self, node: usize) -> Self {
        let mut s = self.clone();
        s.remove(node);
        s
    }

    pub fn union(&self, other: &Self) -> Self {
        let (long, short) = if self.words.len() >= other.words.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = long.clone();
        for (o, s) in out.words.iter_mut().zip(short.words.iter()) {
            *o |= s;
        }
        out
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut out = NodeSet {
            words: self
                .words
                .iter()
                .zip(other.words.iter())
                .map(|(a, b)| a & b)
                .collect(),
        };
        out.trim();
        out
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (o, s) in out.words.iter_mut().zip(other.words.iter()) {
            *o &= !s;
        }
        out.trim();
        out
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & b == 0)
    }

    /// Members in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * WORD + b)
            })
        })
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = NodeSet::new();
        for n in iter {
            s.insert(n);
        }
        s
    }
}

impl<'a> FromIterator<&'a usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = &'a usize>>(iter: I) -> Self {
        iter.into_iter().copied().collect()
    }
}

impl Extend<usize> for NodeSet {
    fn extend<I: IntoIterator<Item = usize>>(&mut self, iter: I) {
        for n in iter {
            self.insert(n);
        }
    }
}

/// Canonical order: by size, then lexicographically over the sorted indices.
impl Ord for NodeSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.iter().cmp(other.iter()))
    }
}

impl PartialOrd for NodeSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Subsets of `pool` with at most `max_size` members, in canonical order.
pub fn canonical_subsets(pool: &NodeSet, max_size: usize) -> impl Iterator<Item = NodeSet> + '_ {
    let members = pool.to_vec();
    let top = max_size.min(members.len());
    (0..=top).flat_map(move |k| {
        members
            .clone()
            .into_iter()
            .combinations(k)
            .map(NodeSet::from_iter)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra_across_word_boundary() {
        let a: NodeSet = [1, 63, 64, 130].into_iter().collect();
        let b: NodeSet = [1, 64].into_iter().collect();
        assert_eq!(a.len(), 4);
        assert!(b.is_subset(&a));
        assert!(!a.is_subset(&b));
        assert_eq!(a.difference(&b).to_vec(), vec![63, 130]);
        assert_eq!(a.intersection(&b), b);
        assert_eq!(b.union(&NodeSet::singleton(200)).to_vec(), vec![1, 64, 200]);
        let mut c = NodeSet::singleton(130);
        c.remove(130);
        assert_eq!(c, NodeSet::new());
        assert!(c.is_empty());
    }

    #[test]
    fn canonical_order_is_size_then_lex() {
        let pool: NodeSet = [0, 1, 2].into_iter().collect();
        let subsets: Vec<Vec<usize>> = canonical_subsets(&pool, 3).map(|s| s.to_vec()).collect();
        assert_eq!(
            subsets,
            vec![
                vec![],
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 1, 2]
            ]
        );
        let mut sorted: Vec<NodeSet> = canonical_subsets(&pool, 3).collect();
        sorted.reverse();
        sorted.sort();
        assert_eq!(
            sorted.iter().map(|s| s.to_vec()).collect::<Vec<_>>(),
            subsets
        );
    }

    #[test]
    fn subset_cap_truncates() {
        let pool = NodeSet::full(4);
        assert_eq!(canonical_subsets(&pool, 1).count(), 5);
        assert_eq!(canonical_subsets(&NodeSet::new(), 3).count(), 1);
    }
}
