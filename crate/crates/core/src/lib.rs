//! Maximum interpoint distance of high-dimensional samples with
//! Toeplitz-dependent sub-Gaussian coordinates.
//!
//! - [`covmodel`]: correlation models, square roots and the scales `a_p`, `b_p`, `rho_p`.
//! - [`sampling`]: seeded row generation `X = mu + T eps`.
//! - [`extremestat`]: `M_n^2`, its standardization and the Gumbel-type limit law.
//! - [`inference`]: covariance-identity and outlier tests, power, `T_{2,n}`.
//! - [`diagnostics`]: pair-feature covariances and Poisson-approximation terms.
//! - [`harness`]: Monte Carlo experiments and their reports.

pub mod covmodel;
pub mod diagnostics;
pub mod error;
pub mod extremestat;
pub mod harness;
pub mod inference;
pub mod sampling;

pub use error::{Error, Result};
