//! Ordered document-id sets.
//!
//! A `DocSet` is either a sorted id array or a bitset over the snapshot's
//! `[0, universe)` id space. The representation is picked from the density of the
//! set: arrays cost four bytes per member, bitsets one bit per possible id, so a
//! set switches to the bitset form once it holds at least `universe / 32` ids.
//! All operations return sorted, duplicate-free results regardless of the
//! representations involved.

use std::cmp::Ordering;
use std::fmt;

pub type DocId = u32;

/// `small.len() * GALLOP_RATIO < large.len()` selects galloping over a linear merge.
const GALLOP_RATIO: usize = 16;

#[derive(Clone)]
pub struct DocSet {
    universe: u32,
    repr: Repr,
}

#[derive(Clone)]
enum Repr {
    Sparse(Vec<DocId>),
    Dense { words: Vec<u64>, len: u32 },
}

fn words_for(universe: u32) -> usize {
    (universe as usize).div_ceil(64)
}

fn prefers_dense(len: usize, universe: u32) -> bool {
    universe >= 64 && (len as u64) * 32 >= universe as u64
}

impl DocSet {
    pub fn empty(universe: u32) -> Self {
        DocSet {
            universe,
            repr: Repr::Sparse(Vec::new()),
        }
    }

    /// Every id in `[0, universe)`.
    pub fn all(universe: u32) -> Self {
        DocSet::from_sorted(universe, (0..universe).collect())
    }

    /// Builds a set from ids that are already strictly increasing and below `universe`.
    pub fn from_sorted(universe: u32, ids: Vec<DocId>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]), "ids must be strictly increasing");
        debug_assert!(ids.last().is_none_or(|&l| l < universe), "id outside universe");
        DocSet {
            universe,
            repr: Repr::Sparse(ids),
        }
        .normalized()
    }

    pub fn from_unsorted(universe: u32, ids: impl IntoIterator<Item = DocId>) -> Self {
        let mut ids: Vec<DocId> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        DocSet::from_sorted(universe, ids)
    }

    pub fn universe(&self) -> u32 {
        self.universe
    }

    pub fn len(&self) -> usize {
        match &self.repr {
            Repr::Sparse(ids) => ids.len(),
            Repr::Dense { len, .. } => *len as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.repr, Repr::Dense { .. })
    }

    pub fn contains(&self, id: DocId) -> bool {
        match &self.repr {
            Repr::Sparse(ids) => ids.binary_search(&id).is_ok(),
            Repr::Dense { words, .. } => bit(words, id),
        }
    }

    pub fn iter(&self) -> Iter<'_> {
        match &self.repr {
            Repr::Sparse(ids) => Iter::Sparse(ids.iter()),
            Repr::Dense { words, .. } => Iter::Dense {
                words,
                index: 0,
                current: words.first().copied().unwrap_or(0),
            },
        }
    }

    pub fn to_vec(&self) -> Vec<DocId> {
        match &self.repr {
            Repr::Sparse(ids) => ids.clone(),
            Repr::Dense { .. } => self.iter().collect(),
        }
    }

    pub fn intersect(&self, other: &DocSet) -> DocSet {
        let universe = self.universe.max(other.universe);
        let repr = match (&self.repr, &other.repr) {
            (Repr::Sparse(a), Repr::Sparse(b)) => Repr::Sparse(intersect_sorted(a, b)),
            (Repr::Sparse(a), Repr::Dense { words, .. })
            | (Repr::Dense { words, .. }, Repr::Sparse(a)) => {
                Repr::Sparse(a.iter().copied().filter(|&id| bit(words, id)).collect())
            }
            (Repr::Dense { words: a, .. }, Repr::Dense { words: b, .. }) => {
                dense_from_words(a.iter().zip(b.iter()).map(|(x, y)| x & y).collect())
            }
        };
        DocSet { universe, repr }.normalized()
    }

    /// Intersects with a raw sorted id slice, such as a postings list.
    pub fn intersect_sorted(&self, ids: &[DocId]) -> DocSet {
        let repr = match &self.repr {
            Repr::Sparse(a) => Repr::Sparse(intersect_sorted(a, ids)),
            Repr::Dense { words, .. } => {
                Repr::Sparse(ids.iter().copied().filter(|&id| bit(words, id)).collect())
            }
        };
        DocSet {
            universe: self.universe,
            repr,
        }
        .normalized()
    }

    pub fn intersection_len(&self, other: &DocSet) -> usize {
        match (&self.repr, &other.repr) {
            (Repr::Sparse(a), Repr::Sparse(b)) => intersect_count(a, b),
            (Repr::Sparse(a), Repr::Dense { words, .. })
            | (Repr::Dense { words, .. }, Repr::Sparse(a)) => {
                a.iter().filter(|&&id| bit(words, id)).count()
            }
            (Repr::Dense { words: a, .. }, Repr::Dense { words: b, .. }) => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x & y).count_ones() as usize)
                .sum(),
        }
    }

    /// `|self ∩ ids|` for a raw sorted slice, without materializing the result.
    pub fn intersection_len_sorted(&self, ids: &[DocId]) -> usize {
        match &self.repr {
            Repr::Sparse(a) => intersect_count(a, ids),
            Repr::Dense { words, .. } => ids.iter().filter(|&&id| bit(words, id)).count(),
        }
    }

    pub fn union(&self, other: &DocSet) -> DocSet {
        let universe = self.universe.max(other.universe);
        let repr = match (&self.repr, &other.repr) {
            (Repr::Sparse(a), Repr::Sparse(b)) => Repr::Sparse(union_sorted(a, b)),
            (Repr::Sparse(a), Repr::Dense { words, .. })
            | (Repr::Dense { words, .. }, Repr::Sparse(a)) => {
                let mut words = words.clone();
                words.resize(words_for(universe), 0);
                for &id in a {
                    set_bit(&mut words, id);
                }
                dense_from_words(words)
            }
            (Repr::Dense { words: a, .. }, Repr::Dense { words: b, .. }) => {
                let n = a.len().max(b.len());
                dense_from_words(
                    (0..n)
                        .map(|i| a.get(i).copied().unwrap_or(0) | b.get(i).copied().unwrap_or(0))
                        .collect(),
                )
            }
        };
        DocSet { universe, repr }.normalized()
    }

    /// `self \ other`.
    pub fn difference(&self, other: &DocSet) -> DocSet {
        let universe = self.universe.max(other.universe);
        let repr = match (&self.repr, &other.repr) {
            (Repr::Sparse(a), Repr::Sparse(b)) => Repr::Sparse(difference_sorted(a, b)),
            (Repr::Sparse(a), Repr::Dense { words, .. }) => {
                Repr::Sparse(a.iter().copied().filter(|&id| !bit(words, id)).collect())
            }
            (Repr::Dense { words, .. }, Repr::Sparse(b)) => {
                let mut words = words.clone();
                for &id in b {
                    clear_bit(&mut words, id);
                }
                dense_from_words(words)
            }
            (Repr::Dense { words: a, .. }, Repr::Dense { words: b, .. }) => dense_from_words(
                a.iter()
                    .enumerate()
                    .map(|(i, x)| x & !b.get(i).copied().unwrap_or(0))
                    .collect(),
            ),
        };
        DocSet { universe, repr }.normalized()
    }

    /// `[0, universe) \ self`.
    pub fn complement(&self) -> DocSet {
        DocSet::all(self.universe).difference(self)
    }

    pub fn is_subset(&self, other: &DocSet) -> bool {
        self.intersection_len(other) == self.len()
    }

    fn normalized(self) -> DocSet {
        let universe = self.universe;
        match self.repr {
            Repr::Sparse(ids) if prefers_dense(ids.len(), universe) => {
                let mut words = vec![0u64; words_for(universe)];
                for &id in &ids {
                    set_bit(&mut words, id);
                }
                DocSet {
                    universe,
                    repr: Repr::Dense {
                        words,
                        len: ids.len() as u32,
                    },
                }
            }
            Repr::Dense { words, len } if !prefers_dense(len as usize, universe) => {
                let ids = DocSet {
                    universe,
                    repr: Repr::Dense { words, len },
                }
                .iter()
                .collect();
                DocSet {
                    universe,
                    repr: Repr::Sparse(ids),
                }
            }
            repr => DocSet { universe, repr },
        }
    }

    #[cfg(test)]
    fn force_dense(self) -> DocSet {
        let universe = self.universe;
        let mut words = vec![0u64; words_for(universe)];
        for id in self.iter() {
            set_bit(&mut words, id);
        }
        let len = self.len() as u32;
        DocSet {
            universe,
            repr: Repr::Dense { words, len },
        }
    }

    #[cfg(test)]
    fn force_sparse(self) -> DocSet {
        DocSet {
            universe: self.universe,
            repr: Repr::Sparse(self.to_vec()),
        }
    }
}

impl PartialEq for DocSet {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.iter().eq(other.iter())
    }
}

impl Eq for DocSet {}

impl fmt::Debug for DocSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl<'a> IntoIterator for &'a DocSet {
    type Item = DocId;
    type IntoIter = Iter<'a>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

pub enum Iter<'a> {
    Sparse(std::slice::Iter<'a, DocId>),
    Dense {
        words: &'a [u64],
        index: usize,
        current: u64,
    },
}

impl Iterator for Iter<'_> {
    type Item = DocId;

    fn next(&mut self) -> Option<DocId> {
        match self {
            Iter::Sparse(it) => it.next().copied(),
            Iter::Dense {
                words,
                index,
                current,
            } => loop {
                if *current != 0 {
                    let tz = current.trailing_zeros();
                    *current &= *current - 1;
                    return Some((*index as u32) * 64 + tz);
                }
                *index += 1;
                if *index >= words.len() {
                    return None;
                }
                *current = words[*index];
            },
        }
    }
}

fn bit(words: &[u64], id: DocId) -> bool {
    words
        .get((id / 64) as usize)
        .is_some_and(|w| w & (1u64 << (id % 64)) != 0)
}

fn set_bit(words: &mut [u64], id: DocId) {
    words[(id / 64) as usize] |= 1u64 << (id % 64);
}

fn clear_bit(words: &mut [u64], id: DocId) {
    if let Some(w) = words.get_mut((id / 64) as usize) {
        *w &= !(1u64 << (id % 64));
    }
}

fn dense_from_words(words: Vec<u64>) -> Repr {
    let len = words.iter().map(|w| w.count_ones()).sum();
    Repr::Dense { words, len }
}

/// Index of the first element of `set[lo..]` that is `>= target`, found by
/// exponential probing followed by a binary search over the bracketed range.
fn gallop(set: &[DocId], lo: usize, target: DocId) -> usize {
    let mut step = 1;
    let mut hi = lo;
    while hi < set.len() && set[hi] < target {
        hi = lo + step;
        step *= 2;
    }
    let start = lo + step / 4;
    let end = hi.min(set.len());
    start.min(end) + set[start.min(end)..end].partition_point(|&x| x < target)
}

fn for_each_common(a: &[DocId], b: &[DocId], mut visit: impl FnMut(DocId)) {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.is_empty() {
        return;
    }
    if small.len() * GALLOP_RATIO < large.len() {
        let mut base = 0;
        for &target in small {
            base = gallop(large, base, target);
            if base >= large.len() {
                break;
            }
            if large[base] == target {
                visit(target);
                base += 1;
            }
        }
    } else {
        let (mut i, mut j) = (0, 0);
        while i < small.len() && j < large.len() {
            match small[i].cmp(&large[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    visit(small[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

pub fn intersect_sorted(a: &[DocId], b: &[DocId]) -> Vec<DocId> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    for_each_common(a, b, |id| out.push(id));
    out
}

pub fn intersect_count(a: &[DocId], b: &[DocId]) -> usize {
    let mut n = 0;
    for_each_common(a, b, |_| n += 1);
    n
}

fn union_sorted(a: &[DocId], b: &[DocId]) -> Vec<DocId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn difference_sorted(a: &[DocId], b: &[DocId]) -> Vec<DocId> {
    let mut out = Vec::with_capacity(a.len());
    let mut j = 0;
    for &x in a {
        j = gallop(b, j, x);
        if j >= b.len() || b[j] != x {
            out.push(x);
        }
    }
    out
}
