//! The maximum squared interpoint distance and its Gumbel-type limit.
//!
//! `M_n^2 = max_{i<j} ||X_i - X_j||^2` is evaluated through the Gram identity
//! `||a - b||^2 = <a,a> + <b,b> - 2<a,b>` on row tiles. Standardized as
//!
//! ```text
//! W = 4 sqrt(log n) ((M_n^2 - 2p) / sqrt(p s) - mu),
//! mu = 2 sqrt(log n) - log log n / (4 sqrt(log n)),
//! ```
//!
//! with `s = a_p` (Gaussian) or `s = b_p` (sub-Gaussian), `W` converges to
//! `F(x) = exp(-K e^{-x/2})`, `K = 1 / (4 sqrt(2 pi))`.

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{substream, DataMatrix};

/// `K = 1 / (4 sqrt(2 pi))`.
pub const LIMIT_K: f64 = 0.099_735_570_100_358_17;

/// Lexicographic numbering of the pairs `i < j` of `n` items (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairIndex {
    n: usize,
}

impl PairIndex {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of pairs, `n (n - 1) / 2`.
    pub fn len(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of `(i, j)`; `None` unless `i < j < n`.
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        (i < j && j < self.n).then(|| i * (2 * self.n - i - 1) / 2 + (j - i - 1))
    }

    /// Inverse of [`PairIndex::index`].
    pub fn pair(&self, l: usize) -> Option<(usize, usize)> {
        if l >= self.len() {
            return None;
        }
        let mut i = 0;
        let mut start = 0;
        loop {
            let row = self.n - i - 1;
            if l < start + row {
                return Some((i, i + 1 + (l - start)));
            }
            start += row;
            i += 1;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }
}

/// Maximum squared distance and the pair attaining it (0-based rows,
/// smallest pair index on ties).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarthestPair {
    pub value: f64,
    pub pair: (usize, usize),
}

impl FarthestPair {
    /// Larger value wins; equal values keep the lexicographically smaller pair.
    fn better(self, other: Self) -> Self {
        if other.value > self.value || (other.value == self.value && other.pair < self.pair) {
            other
        } else {
            self
        }
    }
}

/// Tuning of the pairwise kernel. Results do not depend on either field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelOptions {
    pub block: usize,
    pub parallel: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { block: 64, parallel: false }
    }
}

/// Dot product with a fixed eight-lane accumulation order, so that
/// `dot(a, b) == dot(b, a)` bitwise.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for k in chunks * 8..a.len() {
        tail += a[k] * b[k];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Columns shifted by their midrange; reduces cancellation in the Gram
/// identity for data far from the origin.
fn centered_rows(x: &DataMatrix) -> Vec<f64> {
    let p = x.p();
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for row in x.rows() {
        for k in 0..p {
            lo[k] = lo[k].min(row[k]);
            hi[k] = hi[k].max(row[k]);
        }
    }
    let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
    let mut out = Vec::with_capacity(x.n() * p);
    for row in x.rows() {
        out.extend(row.iter().zip(&mid).map(|(v, m)| v - m));
    }
    out
}

/// `M_n^2` with the default kernel options.
pub fn max_interpoint_sq(x: &DataMatrix) -> Result<FarthestPair> {
    max_interpoint_sq_with(x, KernelOptions::default())
}

/// `M_n^2` by the tiled Gram kernel.
pub fn max_interpoint_sq_with(x: &DataMatrix, opts: KernelOptions) -> Result<FarthestPair> {
    let n = x.n();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let p = x.p();
    let y = centered_rows(x);
    let row = |i: usize| &y[i * p..(i + 1) * p];
    let norms: Vec<f64> = (0..n).map(|i| dot(row(i), row(i))).collect();
    let block = opts.block.max(1);
    let tiles = n.div_ceil(block);

    let tile = |bi: usize| -> FarthestPair {
        let mut best = FarthestPair { value: f64::NEG_INFINITY, pair: (usize::MAX, usize::MAX) };
        let i_range = bi * block..((bi + 1) * block).min(n);
        for bj in bi..tiles {
            let j_range = bj * block..((bj + 1) * block).min(n);
            for i in i_range.clone() {
                let xi = row(i);
                for j in j_range.clone().filter(|&j| j > i) {
                    let d = (norms[i] + norms[j] - 2.0 * dot(xi, row(j))).max(0.0);
                    best = best.better(FarthestPair { value: d, pair: (i, j) });
                }
            }
        }
        best
    };

    let init = FarthestPair { value: f64::NEG_INFINITY, pair: (usize::MAX, usize::MAX) };
    let best = if opts.parallel {
        (0..tiles).into_par_iter().map(tile).reduce(|| init, FarthestPair::better)
    } else {
        (0..tiles).map(tile).fold(init, FarthestPair::better)
    };
    Ok(best)
}

/// Reference `O(n^2 p)` double loop over coordinate differences.
pub fn max_interpoint_sq_naive(x: &DataMatrix) -> Result<FarthestPair> {
    let n = x.n();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let mut best = FarthestPair { value: f64::NEG_INFINITY, pair: (0, 1) };
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            if d > best.value {
                best = FarthestPair { value: d, pair: (i, j) };
            }
        }
    }
    Ok(best)
}

/// Centering and scale of `M_n^2` for sample size `n` and dimension `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub n: usize,
    pub p: usize,
    pub scale: f64,
    pub mu: f64,
}

impl Normalization {
    pub fn new(n: usize, p: usize, scale: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooFewRows { needed: 3, got: n });
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::BadScale(scale));
        }
        if p == 0 {
            return Err(Error::BadArgument("dimension must be positive".into()));
        }
        Ok(Self { n, p, scale, mu: centering(n) })
    }

    fn log_root(&self) -> f64 {
        (self.n as f64).ln().sqrt()
    }

    /// `W = 4 sqrt(log n) ((mn2 - 2p) / sqrt(p scale) - mu)`.
    pub fn standardize(&self, mn2: f64) -> f64 {
        let p = self.p as f64;
        4.0 * self.log_root() * ((mn2 - 2.0 * p) / (p * self.scale).sqrt() - self.mu)
    }

    /// Inverse of [`Normalization::standardize`].
    pub fn destandardize(&self, w: f64) -> f64 {
        let p = self.p as f64;
        2.0 * p + (p * self.scale).sqrt() * (w / (4.0 * self.log_root()) + self.mu)
    }
}

/// `mu(n) = 2 sqrt(log n) - log log n / (4 sqrt(log n))`.
pub fn centering(n: usize) -> f64 {
    let l = (n as f64).ln();
    2.0 * l.sqrt() - l.ln() / (4.0 * l.sqrt())
}

/// Free-function form of [`Normalization::standardize`].
pub fn standardize(mn2: f64, norm: &Normalization) -> f64 {
    norm.standardize(mn2)
}

/// `F(x) = exp(-K e^{-x/2})`.
pub fn limit_cdf(x: f64) -> f64 {
    (-LIMIT_K * (-x / 2.0).exp()).exp()
}

/// `F^{-1}(q) = -2 log(-log(q) / K)`.
pub fn limit_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::BadProbability(q));
    }
    Ok(-2.0 * (-(q.ln()) / LIMIT_K).ln())
}

/// Inverse-CDF draws from the limit law on stream 0 of `seed`.
pub fn limit_sample(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, 0);
    (0..count)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            limit_quantile(u).expect("open-interval uniform")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_index_is_lexicographic_bijection() {
        for n in [0, 1, 2, 3, 7] {
            let h = PairIndex::new(n);
            let pairs: Vec<_> = h.iter().collect();
            assert_eq!(pairs.len(), h.len());
            for (l, &(i, j)) in pairs.iter().enumerate() {
                assert_eq!(h.index(i, j), Some(l));
                assert_eq!(h.pair(l), Some((i, j)));
            }
            assert_eq!(h.pair(h.len()), None);
        }
        let h = PairIndex::new(4);
        assert_eq!(h.index(1, 1), None);
        assert_eq!(h.index(2, 1), None);
        assert_eq!(h.index(0, 4), None);
    }

    #[test]
    fn three_four_five() {
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let best = max_interpoint_sq(&x).unwrap();
        assert_eq!(best.value, 25.0);
        assert_eq!(best.pair, (0, 1));
    }

    #[test]
    fn identical_rows() {
        let x = DataMatrix::from_rows(&vec![vec![1.25, -3.5, 7.0]; 5]).unwrap();
        let best = max_interpoint_sq(&x).unwrap();
        assert_eq!(best.value, 0.0);
        assert_eq!(best.pair, (0, 1));
    }

    #[test]
    fn too_few_rows() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(max_interpoint_sq(&x), Err(Error::TooFewRows { needed: 2, got: 1 }));
        assert!(max_interpoint_sq_naive(&x).is_err());
    }

    #[test]
    fn ties_take_the_smallest_pair() {
        // square corners: both diagonals have length^2 2
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        for block in [1, 2, 3, 64] {
            for parallel in [false, true] {
                let best = max_interpoint_sq_with(&x, KernelOptions { block, parallel }).unwrap();
                assert_eq!(best, FarthestPair { value: 2.0, pair: (0, 2) });
            }
        }
    }

    #[test]
    fn dot_is_symmetric_bitwise() {
        let a: Vec<f64> = (0..29).map(|k| (k as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..29).map(|k| (k as f64 * 1.91).cos() * 1e3).collect();
        assert_eq!(dot(&a, &b), dot(&b, &a));
    }

    #[test]
    fn standardize_centering_and_inverse() {
        let norm = Normalization::new(50, 2000, 8.0).unwrap();
        let at_center = 2.0 * 2000.0 + (2000.0f64 * 8.0).sqrt() * norm.mu;
        assert!(norm.standardize(at_center).abs() < 1e-9);
        for m in [3000.0, 4000.0, 4500.0, 5100.5] {
            assert!((norm.destandardize(norm.standardize(m)) - m).abs() < 1e-10 * m);
        }
        assert!(norm.standardize(4501.0) > norm.standardize(4500.0));
    }

    #[test]
    fn standardize_hand_value() {
        // n=50, p=2000, s=8, M^2=4500
        let l = 50f64.ln();
        let mu = 2.0 * l.sqrt() - l.ln() / (4.0 * l.sqrt());
        let expected = 4.0 * l.sqrt() * ((4500.0 - 4000.0) / 16000f64.sqrt() - mu);
        let norm = Normalization::new(50, 2000, 8.0).unwrap();
        assert!((standardize(4500.0, &norm) - expected).abs() < 1e-12);
        assert!((expected - 1.340_954_085_611_152).abs() < 1e-12);
    }

    #[test]
    fn normalization_rejects_bad_input() {
        assert!(matches!(Normalization::new(2, 10, 8.0), Err(Error::TooFewRows { .. })));
        assert!(matches!(Normalization::new(10, 10, 0.0), Err(Error::BadScale(_))));
        assert!(matches!(Normalization::new(10, 10, -1.0), Err(Error::BadScale(_))));
    }

    #[test]
    fn limit_constant() {
        let k = 1.0 / (4.0 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((LIMIT_K - k).abs() < 1e-17);
    }

    #[test]
    fn limit_cdf_values() {
        assert!((limit_cdf(0.0) - 0.905_076_715_740_942_7).abs() < 1e-15);
        assert!(limit_cdf(100.0) >= 1.0 - 1e-15);
        assert!(limit_cdf(-60.0) < 1e-100);
        let mut prev = 0.0;
        for i in -8..=40 {
            let v = limit_cdf(i as f64);
            assert!(v > prev || v == 1.0);
            prev = v;
        }
    }

    #[test]
    fn limit_quantile_values() {
        assert!(limit_quantile((-LIMIT_K).exp()).unwrap().abs() < 1e-14);
        assert!((limit_quantile(0.5).unwrap() - (-3.877_439_947_485_798)).abs() < 1e-12);
        assert!(matches!(limit_quantile(0.0), Err(Error::BadProbability(_))));
        assert!(matches!(limit_quantile(1.0), Err(Error::BadProbability(_))));
        for i in 1..100 {
            let q = i as f64 / 100.0;
            assert!((limit_cdf(limit_quantile(q).unwrap()) - q).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_sample_deterministic() {
        assert_eq!(limit_sample(100, 4), limit_sample(100, 4));
        assert_ne!(limit_sample(100, 4), limit_sample(100, 5));
    }
}
