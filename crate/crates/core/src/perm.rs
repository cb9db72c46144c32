//! Permutations of `{0, …, n-1}` and shuffle sets.
//!
//! A permutation is stored in one-line notation: `p[i] = σ(i)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || seen[i] {
                return Err(Error::InvalidPermutation(images));
            }
            seen[i] = true;
        }
        Ok(Self(images))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Self(inv)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Number of inversions `|σ|`.
    pub fn inversions(&self) -> usize {
        let mut c = 0;
        for i in 0..self.0.len() {
            for j in i + 1..self.0.len() {
                if self.0[i] > self.0[j] {
                    c += 1;
                }
            }
        }
        c
    }

    /// `(-1)^{|σ|}`.
    pub fn sign(&self) -> i64 {
        if self.inversions().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// Reorders `items` so that slot `i` receives `items[σ(i)]`.
    pub fn permute<T: Clone>(&self, items: &[T]) -> Result<Vec<T>> {
        if items.len() != self.0.len() {
            return Err(Error::SizeMismatch { got: self.0.len(), expected: items.len() });
        }
        Ok(self.0.iter().map(|&j| items[j].clone()).collect())
    }
}

/// `J_{l;s}`: permutations increasing on `0..s` and on `s..l`, in
/// lexicographic order of their one-line notation. Empty unless `1 ≤ s ≤ l-1`.
pub fn shuffles(l: usize, s: usize) -> Vec<Permutation> {
    if s == 0 || s >= l {
        return Vec::new();
    }
    let mut out = Vec::new();
    // choose the image set of the first s letters
    fn rec(l: usize, s: usize, start: usize, chosen: &mut Vec<usize>, out: &mut Vec<Permutation>) {
        if chosen.len() == s {
            let rest: Vec<usize> = (0..l).filter(|i| !chosen.contains(i)).collect();
            let mut images = chosen.clone();
            images.extend(rest);
            out.push(Permutation(images));
            return;
        }
        for i in start..l {
            chosen.push(i);
            rec(l, s, i + 1, chosen, out);
            chosen.pop();
        }
    }
    rec(l, s, 0, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// `J_{l;s}^{-1}`: inverses of the shuffles, sorted lexicographically.
pub fn inverse_shuffles(l: usize, s: usize) -> Vec<Permutation> {
    let mut out: Vec<Permutation> = shuffles(l, s).iter().map(Permutation::inverse).collect();
    out.sort();
    out
}

/// All permutations of `n` letters in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    fn rec(n: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Permutation>) {
        if cur.len() == n {
            out.push(Permutation(cur.clone()));
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), &mut vec![false; n], &mut out);
    out
}
