//! Toeplitz correlation models and the constants derived from them.
//!
//! A model is a unit-diagonal Toeplitz matrix `R = (r_{|i-j|})` together with
//! its symmetric positive semidefinite square root `T`. The normalizing
//! constants of the maximum interpoint distance are functions of `R`
//! (Gaussian case, `a_p`) or of `T` and the innovation kurtosis
//! (sub-Gaussian case, `b_p` and the off-diagonal correlation `rho_p`).
//!
//! Matrix norms here are the entry-absolute-sum norm `||A|| = sum |A_ij|`,
//! not an operator norm.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are treated as round-off and clipped.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Correlation sequence shape of a stationary coordinate process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ToeplitzKind {
    /// `r_k = r^k`, `0 <= r < 1`.
    Ar1(f64),
    /// `r_1..r_m` given, `r_k = 0` for `k > m`.
    MDependent(Vec<f64>),
    /// All of `r_1..r_{p-1}` given explicitly.
    Custom(Vec<f64>),
}

/// A correlation sequence paired with a dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzSpec {
    pub kind: ToeplitzKind,
    pub p: usize,
}

impl ToeplitzSpec {
    /// Validated constructor.
    pub fn new(kind: ToeplitzKind, p: usize) -> Result<Self> {
        let spec = Self { kind, p };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ar1(r: f64, p: usize) -> Result<Self> {
        Self::new(ToeplitzKind::Ar1(r), p)
    }

    pub fn m_dependent(r: Vec<f64>, p: usize) -> Result<Self> {
        Self::new(ToeplitzKind::MDependent(r), p)
    }

    pub fn custom(r: Vec<f64>, p: usize) -> Result<Self> {
        Self::new(ToeplitzKind::Custom(r), p)
    }

    /// The identity correlation `R = I_p`.
    pub fn identity(p: usize) -> Result<Self> {
        Self::ar1(0.0, p)
    }

    /// Checks the sequence constraints. Positive semidefiniteness is only
    /// checked by [`build_model`].
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::BadSpec("dimension p must be at least 1".into()));
        }
        match &self.kind {
            ToeplitzKind::Ar1(r) => {
                if !r.is_finite() || !(0.0..1.0).contains(r) {
                    return Err(Error::BadSpec(format!("AR(1) coefficient {r} not in [0, 1)")));
                }
            }
            ToeplitzKind::MDependent(rs) => {
                if rs.is_empty() {
                    return Err(Error::BadSpec("m-dependent sequence needs m >= 1".into()));
                }
                check_lags(rs)?;
            }
            ToeplitzKind::Custom(rs) => {
                if rs.len() != self.p - 1 {
                    return Err(Error::BadSpec(format!(
                        "custom sequence has {} lags, dimension {} needs {}",
                        rs.len(),
                        self.p,
                        self.p - 1
                    )));
                }
                check_lags(rs)?;
            }
        }
        Ok(())
    }

    /// Correlation at lag `k` (`r_0 = 1`).
    pub fn correlation(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match &self.kind {
            ToeplitzKind::Ar1(r) => r.powi(k as i32),
            ToeplitzKind::MDependent(rs) | ToeplitzKind::Custom(rs) => rs.get(k - 1).copied().unwrap_or(0.0),
        }
    }

    /// `r_1..r_{p-1}`.
    pub fn lags(&self) -> Vec<f64> {
        (1..self.p).map(|k| self.correlation(k)).collect()
    }

    /// True when every off-diagonal correlation is zero.
    pub fn is_identity(&self) -> bool {
        (1..self.p).all(|k| self.correlation(k) == 0.0)
    }

    /// The `p x p` Toeplitz matrix with entries `r_{|i-j|}`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let lags: Vec<f64> = (0..self.p).map(|k| self.correlation(k)).collect();
        DMatrix::from_fn(self.p, self.p, |i, j| lags[i.abs_diff(j)])
    }
}

fn check_lags(rs: &[f64]) -> Result<()> {
    for (k, r) in rs.iter().enumerate() {
        if !r.is_finite() || r.abs() >= 1.0 {
            return Err(Error::BadSpec(format!("|r_{}| = {} must be < 1", k + 1, r.abs())));
        }
    }
    Ok(())
}

fn join(rs: &[f64]) -> String {
    rs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
}

/// Text form used by config files and the CLI: `ar1:0.5`, `mdep:0.5,0.2`,
/// `custom:0.3,0.1,0`. The dimension is carried separately.
impl fmt::Display for ToeplitzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToeplitzKind::Ar1(r) => write!(f, "ar1:{r}"),
            ToeplitzKind::MDependent(rs) => write!(f, "mdep:{}", join(rs)),
            ToeplitzKind::Custom(rs) => write!(f, "custom:{}", join(rs)),
        }
    }
}

impl FromStr for ToeplitzKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("identity") {
            return Ok(ToeplitzKind::Ar1(0.0));
        }
        let (tag, body) =
            s.split_once(':').ok_or_else(|| Error::BadSpec(format!("expected <kind>:<values>, got {s:?}")))?;
        let values = parse_list(body)?;
        match tag.trim().to_ascii_lowercase().as_str() {
            "ar1" => match values.as_slice() {
                [r] => Ok(ToeplitzKind::Ar1(*r)),
                _ => Err(Error::BadSpec("ar1 takes exactly one coefficient".into())),
            },
            "mdep" => Ok(ToeplitzKind::MDependent(values)),
            "custom" => Ok(ToeplitzKind::Custom(values)),
            other => Err(Error::BadSpec(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Parses a comma-separated list of reals; an empty body yields an empty list.
pub(crate) fn parse_list(body: &str) -> Result<Vec<f64>> {
    let body = body.trim();
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::BadSpec(format!("not a number: {v:?}"))))
        .collect()
}

/// Bound parameters of the geometric rho-mixing decay `K1 exp(-K2 k^gamma)`.
///
/// Only `gamma` enters any computation (through [`regime_ratio`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingParams {
    pub gamma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl MixingParams {
    pub fn new(gamma: f64, k1: f64, k2: f64) -> Result<Self> {
        if !(gamma > 0.0 && k1 > 1.0 && k2 > 0.0) {
            return Err(Error::BadArgument(format!(
                "mixing parameters need gamma > 0, K1 > 1, K2 > 0 (got {gamma}, {k1}, {k2})"
            )));
        }
        Ok(Self { gamma, k1, k2 })
    }

    /// Exponent `nu = max((2 + 4 gamma) / (3 gamma), 7/3)`.
    pub fn nu(&self) -> f64 {
        ((2.0 + 4.0 * self.gamma) / (3.0 * self.gamma)).max(7.0 / 3.0)
    }
}

/// `(log n)^nu / p^(1/9)`; values at or above 1 mean the sample is far from
/// the asymptotic regime.
pub fn regime_ratio(n: usize, p: usize, mixing: &MixingParams) -> f64 {
    (n as f64).ln().powf(mixing.nu()) / (p as f64).powf(1.0 / 9.0)
}

/// A validated correlation matrix with its symmetric square root.
#[derive(Debug)]
pub struct CovModel {
    spec: ToeplitzSpec,
    r: DMatrix<f64>,
    t: DMatrix<f64>,
    eig_min: f64,
    c: OnceLock<DMatrix<f64>>,
}

impl Clone for CovModel {
    fn clone(&self) -> Self {
        Self { spec: self.spec.clone(), r: self.r.clone(), t: self.t.clone(), eig_min: self.eig_min, c: self.c.clone() }
    }
}

/// Assembles `R` and its unique symmetric PSD square root `T`.
pub fn build_model(spec: &ToeplitzSpec) -> Result<CovModel> {
    spec.validate()?;
    let p = spec.p;
    let r = spec.matrix();
    if spec.is_identity() {
        return Ok(CovModel { spec: spec.clone(), t: DMatrix::identity(p, p), r, eig_min: 1.0, c: OnceLock::new() });
    }

    let eigen = SymmetricEigen::new(r.clone());
    let eig_min = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if eig_min < -PSD_TOLERANCE {
        return Err(Error::NotPsd { min_eig: eig_min });
    }

    // T = Q diag(sqrt(lambda)) Q^T
    let q = &eigen.eigenvectors;
    let mut scaled = q.clone();
    for (mut col, &lambda) in scaled.column_iter_mut().zip(eigen.eigenvalues.iter()) {
        col *= lambda.max(0.0).sqrt();
    }
    let t = &scaled * q.transpose();
    let t = (&t + t.transpose()) * 0.5;

    Ok(CovModel { spec: spec.clone(), r, t, eig_min, c: OnceLock::new() })
}

impl CovModel {
    pub fn spec(&self) -> &ToeplitzSpec {
        &self.spec
    }

    pub fn p(&self) -> usize {
        self.spec.p
    }

    /// The correlation matrix `R`.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// The symmetric square root `T`, `T T = R`.
    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn eig_min(&self) -> f64 {
        self.eig_min
    }

    /// `C = (T^{o2})^2`, whose entries `c_km = sum_j t_kj^2 t_mj^2` carry the
    /// kurtosis correction of the pair-feature covariances.
    pub fn c_matrix(&self) -> &DMatrix<f64> {
        self.c.get_or_init(|| {
            let t2 = hadamard_square(&self.t);
            &t2 * &t2
        })
    }

    /// `(||(T^2)^{o2}||, ||(T^{o2})^2||)`.
    pub fn hadamard_norms(&self) -> (f64, f64) {
        let tt = &self.t * &self.t;
        (entry_abs_norm(&hadamard_square(&tt)), entry_abs_norm(self.c_matrix()))
    }
}

/// `sum_{i,j} |A_ij|`.
pub fn entry_abs_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// Entrywise square `A o A`.
pub fn hadamard_square(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.map(|v| v * v)
}

/// Rejects kurtosis values outside `[1, 5)`.
pub fn check_kappa4(kappa4: f64) -> Result<()> {
    if (1.0..5.0).contains(&kappa4) {
        Ok(())
    } else {
        Err(Error::BadKurtosis(kappa4))
    }
}

/// Gaussian scale `a_p = 8 + (16/p) sum_{k=1}^{p-1} r_k^2 (p - k)`.
pub fn compute_ap(spec: &ToeplitzSpec) -> Result<f64> {
    spec.validate()?;
    let p = spec.p;
    let tail: f64 = (1..p)
        .map(|k| {
            let r = spec.correlation(k);
            r * r * (p - k) as f64
        })
        .sum();
    Ok(8.0 + 16.0 * tail / p as f64)
}

/// Sub-Gaussian scale
/// `b_p = p^{-1} (8 ||(T^2)^{o2}|| + 2 (kappa4 - 3) ||(T^{o2})^2||)`.
///
/// Equals `2 (kappa4 + 1)` exactly for the identity model.
pub fn compute_bp(model: &CovModel, kappa4: f64) -> Result<f64> {
    check_kappa4(kappa4)?;
    let (n1, n2) = model.hadamard_norms();
    let p = model.p() as f64;
    Ok(2.0 * (4.0 * (n1 / p) + (kappa4 - 3.0) * (n2 / p)))
}

/// Off-diagonal correlation of the limiting Gaussian field for pairs sharing
/// one index.
pub fn compute_rhop(model: &CovModel, kappa4: f64) -> Result<f64> {
    check_kappa4(kappa4)?;
    let (n1, n2) = model.hadamard_norms();
    let k = kappa4 - 3.0;
    Ok((2.0 * n1 + k * n2) / (8.0 * n1 + 2.0 * k * n2))
}

/// Real, two-sided spectral density `(1/pi)(1 + 2 sum_{k>=1} r_k cos(k lambda))`.
///
/// For AR(1) the infinite sum is evaluated in closed form.
pub fn spectral_density(spec: &ToeplitzSpec, lambda: f64) -> Result<f64> {
    spec.validate()?;
    if !(-PI..=PI).contains(&lambda) {
        return Err(Error::BadArgument(format!("frequency {lambda} outside [-pi, pi]")));
    }
    let value = match &spec.kind {
        ToeplitzKind::Ar1(r) => (1.0 - r * r) / (PI * (1.0 - 2.0 * r * lambda.cos() + r * r)),
        ToeplitzKind::MDependent(rs) | ToeplitzKind::Custom(rs) => {
            let sum: f64 = rs.iter().enumerate().map(|(k, r)| r * ((k + 1) as f64 * lambda).cos()).sum();
            (1.0 + 2.0 * sum) / PI
        }
    };
    Ok(value)
}
