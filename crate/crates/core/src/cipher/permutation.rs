use super::keystream::reduce;
use crate::error::{Error, Result};

/// A permutation of `0..m`, stored by images: `apply(x) = images[x]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let m = images.len();
        let mut seen = vec![false; m];
        for &s in &images {
            if s >= m || seen[s] {
                return Err(Error::InvalidConfig(format!("{images:?} is not a permutation")));
            }
            seen[s] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(m: usize) -> Self {
        Self { images: (0..m).collect() }
    }

    /// Fisher-Yates shuffle of the identity driven by `m − 1` words.
    pub fn shuffle(m: usize, mut words: impl Iterator<Item = u64>) -> Self {
        let mut images: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            let j = reduce(words.next().expect("enough keystream words"), i + 1);
            images.swap(i, j);
        }
        Self { images }
    }

    /// The permutation sending the entries of `from` onto equal entries of
    /// `to`, matching equal values in index order.
    pub fn matching(from: &[f64], to: &[f64], tol: f64) -> Result<Self> {
        if from.len() != to.len() {
            return Err(Error::DimensionMismatch(format!("{} vs {} entries", from.len(), to.len())));
        }
        let order = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
            idx
        };
        let (a, b) = (order(from), order(to));
        let mut images = vec![0; from.len()];
        for (&x, &s) in a.iter().zip(&b) {
            if (from[x] - to[s]).abs() > tol {
                return Err(Error::InvalidConfig(format!(
                    "{to:?} is not a rearrangement of {from:?}"
                )));
            }
            images[x] = s;
        }
        Ok(Self { images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (x, &s) in self.images.iter().enumerate() {
            inv[s] = x;
        }
        Self { images: inv }
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &Self) -> Self {
        Self {
            images: inner.images.iter().map(|&x| self.images[x]).collect(),
        }
    }

    /// Distribution of `π(X)` for `X ~ p`.
    pub fn push_forward(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        for (x, &w) in p.iter().enumerate() {
            out[self.images[x]] = w;
        }
        out
    }

    /// Lexicographic rank among all permutations of `0..m`.
    pub fn rank(&self) -> u64 {
        let m = self.len();
        let mut rank = 0u64;
        for i in 0..m {
            let smaller = self.images[i + 1..].iter().filter(|&&v| v < self.images[i]).count() as u64;
            rank = rank * (m - i) as u64 + smaller;
        }
        rank
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validation() {
        assert!(Permutation::new(vec![1, 0, 2]).is_ok());
        assert!(Permutation::new(vec![1, 1, 2]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn push_forward_of_a_cycle() {
        // cycle (2 0 1): 2 → 0 → 1 → 2
        let p = Permutation::new(vec![1, 2, 0]).unwrap();
        assert_eq!(p.push_forward(&[0.8, 0.1, 0.1]), vec![0.1, 0.8, 0.1]);
    }

    #[test]
    fn ranks_enumerate_lexicographically() {
        let all = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for (r, images) in all.iter().enumerate() {
            assert_eq!(Permutation::new(images.to_vec()).unwrap().rank(), r as u64);
        }
    }

    #[test]
    fn binary_shuffle_is_xor() {
        for word in [0u64, 1 << 62, 1 << 63, u64::MAX] {
            let p = Permutation::shuffle(2, std::iter::once(word));
            // top bit set keeps j = 1: no swap
            let b = 1 - (word >> 63) as usize;
            for x in 0..2 {
                assert_eq!(p.apply(x), x ^ b);
            }
        }
    }

    #[test]
    fn matching_maps_values() {
        let q = [0.7, 0.2, 0.1];
        let omega = [0.1, 0.7, 0.2];
        let b = Permutation::matching(&q, &omega, 1e-12).unwrap();
        assert_eq!(b.push_forward(&q), omega.to_vec());
        assert!(Permutation::matching(&q, &[0.6, 0.3, 0.1], 1e-12).is_err());
        let ties = Permutation::matching(&[0.5, 0.25, 0.25], &[0.25, 0.5, 0.25], 1e-12).unwrap();
        assert_eq!(ties.images(), &[1, 0, 2]);
    }

    #[test]
    fn shuffle_hits_every_permutation_evenly() {
        use crate::cipher::Keystream;
        let ks = Keystream::from_seed(42);
        let mut counts = [0usize; 6];
        let n = 60_000;
        for t in 0..n as u64 {
            counts[Permutation::shuffle(3, (0..2).map(|j| ks.word(3 * t + j))).rank() as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 5.0 * 10_000f64.sqrt(), "{counts:?}");
        }
    }

    proptest! {
        #[test]
        fn inverse_and_compose(seed in any::<u64>(), m in 1usize..9) {
            use crate::cipher::Keystream;
            let ks = Keystream::from_seed(seed);
            let p = Permutation::shuffle(m, (0..m as u64).map(|i| ks.word(i)));
            let q = Permutation::shuffle(m, (0..m as u64).map(|i| ks.word(100 + i)));
            prop_assert_eq!(p.compose(&p.inverse()), Permutation::identity(m));
            for x in 0..m {
                prop_assert_eq!(p.compose(&q).apply(x), p.apply(q.apply(x)));
                prop_assert_eq!(p.inverse().apply(p.apply(x)), x);
            }
            prop_assert!(p.rank() < (1..=m as u64).product::<u64>());
        }
    }
}
