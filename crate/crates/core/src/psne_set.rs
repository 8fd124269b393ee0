use std::cmp::Ordering;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// A set of joint-action indices: the equivalence-class identity of a game.
///
/// Stored as a sorted, deduplicated index list plus a hash set for O(1)
/// membership. Equality, hashing and ordering use the sorted list only.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "Vec<u64>", into = "Vec<u64>")]
pub struct PsneSet {
    indices: Vec<u64>,
    members: HashSet<u64>,
}

impl PsneSet {
    pub fn new(mut indices: Vec<u64>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        let members = indices.iter().copied().collect();
        PsneSet { indices, members }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: u64) -> bool {
        self.members.contains(&index)
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.indices.iter().copied()
    }

    /// |self ∩ other|, by merging the sorted lists.
    pub fn intersection_len(&self, other: &PsneSet) -> usize {
        let (mut a, mut b) = (
            self.indices.iter().peekable(),
            other.indices.iter().peekable(),
        );
        let mut n = 0;
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                Ordering::Less => {
                    a.next();
                }
                Ordering::Greater => {
                    b.next();
                }
                Ordering::Equal => {
                    n += 1;
                    a.next();
                    b.next();
                }
            }
        }
        n
    }

    pub fn is_subset(&self, other: &PsneSet) -> bool {
        self.len() <= other.len() && self.iter().all(|x| other.contains(x))
    }

    /// Canonical order used for deterministic tie-breaks: smaller set first,
    /// then lexicographically smaller sorted index sequence.
    pub fn canonical_cmp(&self, other: &PsneSet) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.indices.cmp(&other.indices))
    }
}

impl PartialEq for PsneSet {
    fn eq(&self, other: &Self) -> bool {
        self.indices == other.indices
    }
}

impl Eq for PsneSet {}

impl Hash for PsneSet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.indices.hash(state);
    }
}

impl PartialOrd for PsneSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PsneSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical_cmp(other)
    }
}

impl From<Vec<u64>> for PsneSet {
    fn from(v: Vec<u64>) -> Self {
        PsneSet::new(v)
    }
}

impl From<PsneSet> for Vec<u64> {
    fn from(s: PsneSet) -> Self {
        s.indices
    }
}

impl FromIterator<u64> for PsneSet {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        PsneSet::new(iter.into_iter().collect())
    }
}
