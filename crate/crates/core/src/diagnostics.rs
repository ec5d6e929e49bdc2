//! Checkable pieces of the limit argument.
//!
//! The squared distance of pair `(i, j)` is a sum over coordinates of the
//! pair features `y_{k,(i,j)} = (x_{i,k} - x_{j,k})^2`. Their covariances
//! depend only on how two pairs overlap, on the coordinate lag, and on the
//! innovation kurtosis through `C = (T^{o2})^2`:
//!
//! | overlap   | same coordinate      | coordinates `k != m`             |
//! |-----------|----------------------|----------------------------------|
//! | identical | `8 + 2 c_kk (k4-3)`  | `8 r_{km}^2 + 2 c_km (k4-3)`     |
//! | share one | `2 + c_kk (k4-3)`    | `2 r_{km}^2 + c_km (k4-3)`       |
//! | disjoint  | `0`                  | `0`                              |
//!
//! Summing over coordinates gives the covariance `Xi` of the normalized
//! feature sum, which factors as `b_p Sigma_p`. The Poisson-approximation
//! terms for the maximum of the limiting Gaussian field are evaluated with
//! an erfc-based normal tail.

use std::sync::Arc;

use libm::erfc;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covmodel::{check_kappa4, CovModel};
use crate::error::{Error, Result};
use crate::extremestat::{PairIndex, LIMIT_K};
use crate::sampling::{kurtosis_of, substream, InnovationSpec, Sampler};

/// How two index pairs intersect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OverlapClass {
    Identical,
    ShareOne,
    Disjoint,
}

impl OverlapClass {
    /// Classifies `{a.0, a.1}` against `{b.0, b.1}`; both must be proper pairs.
    pub fn classify(a: (usize, usize), b: (usize, usize)) -> Result<Self> {
        if a.0 == a.1 || b.0 == b.1 {
            return Err(Error::BadPattern(format!("{a:?} or {b:?} is not a pair of distinct indices")));
        }
        let shared = [a.0, a.1].iter().filter(|v| **v == b.0 || **v == b.1).count();
        Ok(match shared {
            2 => OverlapClass::Identical,
            1 => OverlapClass::ShareOne,
            _ => OverlapClass::Disjoint,
        })
    }

    /// Rows needed to realize the overlap: 2, 3 or 4.
    fn rows(self) -> usize {
        match self {
            OverlapClass::Identical => 2,
            OverlapClass::ShareOne => 3,
            OverlapClass::Disjoint => 4,
        }
    }
}

/// Whether the two features sit on the same coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordRelation {
    Same,
    Cross,
}

/// Gaussian-innovation feature covariance; `r` is `r_{|k-m|}` and is
/// ignored for [`CoordRelation::Same`].
pub fn pair_cov_gaussian(r: f64, overlap: OverlapClass, coords: CoordRelation) -> Result<f64> {
    let r2 = match coords {
        CoordRelation::Same => 1.0,
        CoordRelation::Cross => {
            if r.is_nan() || r.abs() >= 1.0 {
                return Err(Error::BadArgument(format!("|r| = {} must be < 1", r.abs())));
            }
            r * r
        }
    };
    Ok(match overlap {
        OverlapClass::Identical => 8.0 * r2,
        OverlapClass::ShareOne => 2.0 * r2,
        OverlapClass::Disjoint => 0.0,
    })
}

/// Feature covariance `Cov(y_{k,alpha}, y_{m,beta})` for coordinates `k`,
/// `m` (0-based) under i.i.d. innovations with fourth moment `kappa4`.
pub fn pair_cov_subgaussian(model: &CovModel, kappa4: f64, k: usize, m: usize, overlap: OverlapClass) -> Result<f64> {
    check_kappa4(kappa4)?;
    let p = model.p();
    if k >= p || m >= p {
        return Err(Error::BadPattern(format!("coordinates ({k}, {m}) outside dimension {p}")));
    }
    let r = model.spec().correlation(k.abs_diff(m));
    let c = model.c_matrix()[(k, m)];
    let excess = kappa4 - 3.0;
    Ok(match overlap {
        OverlapClass::Identical => 8.0 * r * r + 2.0 * c * excess,
        OverlapClass::ShareOne => 2.0 * r * r + c * excess,
        OverlapClass::Disjoint => 0.0,
    })
}

/// Feature pair being measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPattern {
    pub overlap: OverlapClass,
    pub k: usize,
    pub m: usize,
}

impl PairPattern {
    pub fn coords(&self) -> CoordRelation {
        if self.k == self.m {
            CoordRelation::Same
        } else {
            CoordRelation::Cross
        }
    }

    pub fn lag(&self) -> usize {
        self.k.abs_diff(self.m)
    }
}

/// Theoretical vs Monte Carlo covariance of one feature pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMomentReport {
    pub pattern: PairPattern,
    pub theoretical: f64,
    pub empirical: f64,
    pub se: f64,
    pub draws: usize,
}

impl PairMomentReport {
    /// `|empirical - theoretical| / se`.
    pub fn z_score(&self) -> f64 {
        (self.empirical - self.theoretical).abs() / self.se
    }
}

/// Minimum number of draws accepted by [`empirical_pair_cov`].
pub const MIN_DRAWS: usize = 10_000;

/// Sample covariance of the features named by `pattern` over `draws`
/// independent row groups (rows drawn through `T eps`).
pub fn empirical_pair_cov(
    model: &Arc<CovModel>,
    innovation: InnovationSpec,
    pattern: PairPattern,
    draws: usize,
    seed: u64,
) -> Result<PairMomentReport> {
    if draws < MIN_DRAWS {
        return Err(Error::BadArgument(format!("need at least {MIN_DRAWS} draws, got {draws}")));
    }
    let kappa4 = kurtosis_of(&innovation)?;
    let theoretical = pair_cov_subgaussian(model, kappa4, pattern.k, pattern.m, pattern.overlap)?;
    let sampler = Sampler::from_model(Arc::clone(model), innovation)?;
    let mut rng = substream(seed, 0);

    // first feature on rows (0, 1); second on (0, 1), (0, 2) or (2, 3)
    let second = match pattern.overlap {
        OverlapClass::Identical => (0, 1),
        OverlapClass::ShareOne => (0, 2),
        OverlapClass::Disjoint => (2, 3),
    };
    let rows = pattern.overlap.rows();
    let mut a = Vec::with_capacity(draws);
    let mut b = Vec::with_capacity(draws);
    for _ in 0..draws {
        let x = sampler.sample_with(rows, None, &mut rng)?;
        let d1 = x.get(0, pattern.k) - x.get(1, pattern.k);
        let d2 = x.get(second.0, pattern.m) - x.get(second.1, pattern.m);
        a.push(d1 * d1);
        b.push(d2 * d2);
    }
    let n = draws as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let products: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (u - mean_a) * (v - mean_b)).collect();
    let empirical = products.iter().sum::<f64>() / (n - 1.0);
    let var = products.iter().map(|z| (z - empirical).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(PairMomentReport { pattern, theoretical, empirical, se: (var / n).sqrt(), draws })
}

/// `N x N` matrix over pairs with 1 on the diagonal, `off` where the pairs
/// share one index and 0 elsewhere (`N = n(n-1)/2`).
pub fn overlap_matrix(n: usize, off: f64) -> DMatrix<f64> {
    let h = PairIndex::new(n);
    let pairs: Vec<_> = h.iter().collect();
    DMatrix::from_fn(pairs.len(), pairs.len(), |l, k| {
        match OverlapClass::classify(pairs[l], pairs[k]).expect("proper pairs") {
            OverlapClass::Identical => 1.0,
            OverlapClass::ShareOne => off,
            OverlapClass::Disjoint => 0.0,
        }
    })
}

/// Size limits of the brute-force `Xi` assembly.
pub const XI_MAX_P: usize = 6;
pub const XI_MAX_N: usize = 5;

/// Covariance of `p^{-1/2} sum_t Y_t` assembled entry by entry from
/// [`pair_cov_subgaussian`].
pub fn assemble_xi(model: &CovModel, kappa4: f64, n: usize) -> Result<DMatrix<f64>> {
    let p = model.p();
    if p > XI_MAX_P || !(2..=XI_MAX_N).contains(&n) {
        return Err(Error::BadArgument(format!(
            "brute-force assembly supports p <= {XI_MAX_P}, 2 <= n <= {XI_MAX_N} (got p={p}, n={n})"
        )));
    }
    let pairs: Vec<_> = PairIndex::new(n).iter().collect();
    let size = pairs.len();
    let mut xi = DMatrix::zeros(size, size);
    for l in 0..size {
        for k in 0..size {
            let overlap = OverlapClass::classify(pairs[l], pairs[k])?;
            let mut sum = 0.0;
            for t in 0..p {
                for s in 0..p {
                    sum += pair_cov_subgaussian(model, kappa4, t, s, overlap)?;
                }
            }
            xi[(l, k)] = sum / p as f64;
        }
    }
    Ok(xi)
}

/// Scale `s` with `xi = s * sigma` on the support of `sigma`, if the ratio is
/// constant to `tol` (relative) and `xi` vanishes off the support.
pub fn factor_scale(xi: &DMatrix<f64>, sigma: &DMatrix<f64>, tol: f64) -> Option<f64> {
    let mut scale: Option<f64> = None;
    for (x, s) in xi.iter().zip(sigma.iter()) {
        if *s == 0.0 {
            if x.abs() > tol {
                return None;
            }
            continue;
        }
        let ratio = x / s;
        match scale {
            None => scale = Some(ratio),
            Some(r0) if (ratio - r0).abs() <= tol * r0.abs().max(1.0) => {}
            Some(_) => return None,
        }
    }
    scale
}

/// Upper normal tail `1 - Phi(z)` via `erfc`.
pub fn normal_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Poisson-approximation terms for the maximum of the `n(n-1)/2` standard
/// normal pair variables at level `s_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChenSteinReport {
    pub n: usize,
    pub x: f64,
    pub rho: f64,
    pub s_n: f64,
    /// Expected number of exceedances, `N (1 - Phi(s_n))`.
    pub lambda_p: f64,
    /// `N 2(n-2) (1 - Phi(s_n))^2`.
    pub u1: f64,
    /// `n^3 (1 - Phi(sqrt2 s_n / sqrt(1 + rho)))`.
    pub u2_bound: f64,
    /// Limit of `lambda_p`, `K e^{-x/2}`.
    pub lambda_limit: f64,
}

/// `s_n = sqrt(4 log n - log log n + x)`.
pub fn level(n: usize, x: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::BadArgument(format!("n = {n} must be at least 3")));
    }
    let l = (n as f64).ln();
    let s2 = 4.0 * l - l.ln() + x;
    if s2.is_nan() || s2 <= 0.0 {
        return Err(Error::BadArgument(format!("4 log n - log log n + x = {s2} must be positive")));
    }
    Ok(s2.sqrt())
}

/// Tail argument of the `u2` bound, `sqrt2 s / sqrt(1 + rho)`.
pub fn u2_argument(s_n: f64, rho: f64) -> f64 {
    std::f64::consts::SQRT_2 * s_n / (1.0 + rho).sqrt()
}

pub fn chen_stein_terms(n: usize, x: f64, rho: f64) -> Result<ChenSteinReport> {
    if !(0.0..=1.0 / 3.0).contains(&rho) {
        return Err(Error::BadArgument(format!("rho = {rho} outside [0, 1/3]")));
    }
    let s_n = level(n, x)?;
    let nf = n as f64;
    let pairs = nf * (nf - 1.0) / 2.0;
    let tail = normal_tail(s_n);
    Ok(ChenSteinReport {
        n,
        x,
        rho,
        s_n,
        lambda_p: pairs * tail,
        u1: pairs * 2.0 * (nf - 2.0) * tail * tail,
        u2_bound: nf.powi(3) * normal_tail(u2_argument(s_n, rho)),
        lambda_limit: LIMIT_K * (-x / 2.0).exp(),
    })
}

/// `|lambda_p(n, x) - K e^{-x/2}|` along `n_grid`.
pub fn lambda_limit_gap(n_grid: &[usize], x: f64) -> Result<Vec<(usize, f64)>> {
    n_grid
        .iter()
        .map(|&n| {
            let r = chen_stein_terms(n, x, 0.25)?;
            Ok((n, (r.lambda_p - r.lambda_limit).abs()))
        })
        .collect()
}
