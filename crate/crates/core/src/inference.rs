//! Tests built on `M_n^2`: the covariance-identity test, its power function,
//! and the single-outlier test with a known or estimated `a_p`.
//!
//! Both tests reject when
//!
//! ```text
//! M_n^2 >= 2p + sqrt(p a / 8) (q_alpha + 8 log n - log log n) / sqrt(2 log n)
//! ```
//!
//! with `a = 8` for `H0: Sigma = I` and `a = a_p` for outlier detection.
//! `a_p` can be replaced by `8 T_{2,n} / p`, where `T_{2,n}` is the
//! U-statistic estimator of `tr(Sigma^2)`.
//!
//! The power of the trace-based test grows with `n/p * sum r_k^2 (p - k)`
//! rather than `log n / p * sum r_k^2 (p - k)`, so that test is the more
//! efficient one against Toeplitz alternatives; only `M_n^2` is provided here.

use serde::{Deserialize, Serialize};

use crate::covmodel::{compute_ap, ToeplitzSpec};
use crate::error::{Error, Result};
use crate::extremestat::{dot, limit_cdf, max_interpoint_sq};
use crate::sampling::DataMatrix;

/// Result of a threshold test on `M_n^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
    pub alpha: f64,
    pub n: usize,
    pub p: usize,
    pub scale: f64,
}

impl TestOutcome {
    pub fn verdict(&self) -> &'static str {
        if self.reject {
            "REJECT"
        } else {
            "ACCEPT"
        }
    }
}

/// One evaluation of the power function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub spec: ToeplitzSpec,
    pub n: usize,
    pub alpha: f64,
    pub ap: f64,
    pub beta: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::BadProbability(alpha))
    }
}

/// Upper-`alpha` critical value `-log(32 pi) - 2 log log (1 - alpha)^{-1}`.
pub fn q_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let lll = (-(1.0 - alpha).ln()).ln();
    Ok(-(32.0 * std::f64::consts::PI).ln() - 2.0 * lll)
}

/// Rejection threshold for `M_n^2` at scale `a`.
pub fn threshold(n: usize, p: usize, alpha: f64, scale: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::TooFewRows { needed: 3, got: n });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::BadScale(scale));
    }
    let q = q_alpha(alpha)?;
    let (p, l) = (p as f64, (n as f64).ln());
    Ok(2.0 * p + (p * scale / 8.0).sqrt() * (q + 8.0 * l - l.ln()) / (2.0 * l).sqrt())
}

fn run_test(x: &DataMatrix, alpha: f64, scale: f64) -> Result<TestOutcome> {
    let threshold = threshold(x.n(), x.p(), alpha, scale)?;
    let statistic = max_interpoint_sq(x)?.value;
    Ok(TestOutcome { statistic, threshold, reject: statistic >= threshold, alpha, n: x.n(), p: x.p(), scale })
}

/// Test of `H0: Sigma = I_p`.
pub fn cov_identity_test(x: &DataMatrix, alpha: f64) -> Result<TestOutcome> {
    run_test(x, alpha, 8.0)
}

/// Asymptotic power against `Sigma = R(spec)`:
/// `1 - F(sqrt(8/a_p) q_alpha + (sqrt(8/a_p) - 1)(8 log n - log log n))`.
pub fn power_beta(spec: &ToeplitzSpec, n: usize, alpha: f64) -> Result<PowerPoint> {
    if n < 3 {
        return Err(Error::TooFewRows { needed: 3, got: n });
    }
    let q = q_alpha(alpha)?;
    let ap = compute_ap(spec)?;
    let s = (8.0 / ap).sqrt();
    let l = (n as f64).ln();
    let arg = s * q + (s - 1.0) * (8.0 * l - l.ln());
    let beta = (1.0 - limit_cdf(arg)).clamp(0.0, 1.0);
    Ok(PowerPoint { spec: spec.clone(), n, alpha, ap, beta })
}

fn gram(x: &DataMatrix) -> Vec<f64> {
    let n = x.n();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = dot(x.row(i), x.row(j));
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}

/// Falling factorial `n (n-1) ... (n-m+1)`.
fn falling(n: usize, m: usize) -> f64 {
    (0..m).map(|k| (n - k) as f64).product()
}

/// U-statistic estimate of `tr(Sigma^2)`:
///
/// ```text
/// T = A / P(n,2) - 2 B / P(n,3) + C / P(n,4)
/// A = sum_{i != j} (X_i'X_j)^2
/// B = sum_{i,j,k distinct} X_i'X_j X_j'X_k
/// C = sum_{i,j,k,l distinct} X_i'X_j X_k'X_l
/// ```
///
/// evaluated in `O(n^2 p)` from the Gram matrix using
/// `B = sum_j s_j^2 - A` and `C = S^2 - 4B - 2A`, where `s_j` are the
/// off-diagonal row sums of the Gram matrix and `S` their total. Data are
/// used as given (mean assumed zero).
pub fn t2n(x: &DataMatrix) -> Result<f64> {
    let n = x.n();
    if n < 4 {
        return Err(Error::TooFewRows { needed: 4, got: n });
    }
    let g = gram(x);
    let mut a = 0.0;
    let mut row_sq = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let mut s = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            let v = g[i * n + j];
            s += v;
            a += v * v;
        }
        row_sq += s * s;
        total += s;
    }
    let b = row_sq - a;
    let c = total * total - 4.0 * b - 2.0 * a;
    Ok(a / falling(n, 2) - 2.0 * b / falling(n, 3) + c / falling(n, 4))
}

/// Direct enumeration over all distinct index tuples; `O(n^4)`.
pub fn t2n_naive(x: &DataMatrix) -> Result<f64> {
    let n = x.n();
    if n < 4 {
        return Err(Error::TooFewRows { needed: 4, got: n });
    }
    let ip = |i: usize, j: usize| -> f64 { x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum() };
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let gij = ip(i, j);
            a += gij * gij;
            for k in (0..n).filter(|&k| k != i && k != j) {
                b += gij * ip(j, k);
                for l in (0..n).filter(|&l| l != i && l != j && l != k) {
                    c += gij * ip(k, l);
                }
            }
        }
    }
    Ok(a / falling(n, 2) - 2.0 * b / falling(n, 3) + c / falling(n, 4))
}

/// Plug-in `a_p` estimate `8 T_{2,n} / p`.
pub fn estimate_ap(x: &DataMatrix) -> Result<f64> {
    Ok(8.0 * t2n(x)? / x.p() as f64)
}

/// Source of `a_p` for [`outlier_test`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApSource {
    Known(f64),
    Estimate,
}

/// Test of "no outlier among `X_1..X_n`".
pub fn outlier_test(x: &DataMatrix, alpha: f64, ap: ApSource) -> Result<TestOutcome> {
    let scale = match ap {
        ApSource::Known(a) => {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::BadScale(a));
            }
            a
        }
        ApSource::Estimate => {
            let a = estimate_ap(x)?;
            if a.is_nan() || a <= 0.0 {
                return Err(Error::BadScale(a));
            }
            a
        }
    };
    run_test(x, alpha, scale)
}
