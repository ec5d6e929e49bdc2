//! Sampling of `X_i = mu + T eps_i` with standardized sub-Gaussian innovations.
//!
//! Every sample is driven by a ChaCha8 generator addressed by
//! `(seed, stream)`; replication `r` of an experiment uses stream `r`, so
//! replications never share generator state and can run in any order.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covmodel::{build_model, check_kappa4, CovModel, ToeplitzKind, ToeplitzSpec};
use crate::error::{Error, Result};

/// Generator for replication `stream` under master seed `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Law of the i.i.d. innovation components; every kind has mean 0 and
/// variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InnovationSpec {
    Gaussian,
    /// `+-1` with probability 1/2 each.
    Rademacher,
    /// Uniform on `(-sqrt3, sqrt3)`.
    Uniform,
    /// `+-sqrt(kappa4)` with probability `1/(2 kappa4)` each, else 0.
    ThreePoint(f64),
}

impl InnovationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationSpec::ThreePoint(k) => check_kappa4(k),
            _ => Ok(()),
        }
    }

    /// Draws one standardized innovation.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InnovationSpec::Gaussian => rng.sample(StandardNormal),
            InnovationSpec::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            InnovationSpec::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            InnovationSpec::ThreePoint(k) => {
                let u: f64 = rng.random();
                let half = 0.5 / k;
                if u < half {
                    k.sqrt()
                } else if u < 2.0 * half {
                    -k.sqrt()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Exact fourth moment `E eps^4` of the innovation law.
pub fn kurtosis_of(spec: &InnovationSpec) -> Result<f64> {
    spec.validate()?;
    Ok(match *spec {
        InnovationSpec::Gaussian => 3.0,
        InnovationSpec::Rademacher => 1.0,
        InnovationSpec::Uniform => 9.0 / 5.0,
        InnovationSpec::ThreePoint(k) => k,
    })
}

impl fmt::Display for InnovationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnovationSpec::Gaussian => f.write_str("gaussian"),
            InnovationSpec::Rademacher => f.write_str("rademacher"),
            InnovationSpec::Uniform => f.write_str("uniform"),
            InnovationSpec::ThreePoint(k) => write!(f, "three_point:{k}"),
        }
    }
}

impl FromStr for InnovationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let spec = match s.as_str() {
            "gaussian" | "normal" => InnovationSpec::Gaussian,
            "rademacher" => InnovationSpec::Rademacher,
            "uniform" => InnovationSpec::Uniform,
            other => {
                let k = other
                    .strip_prefix("three_point:")
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::BadArgument(format!("unknown innovation {other:?}")))?;
                InnovationSpec::ThreePoint(k)
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub stream: u64,
    pub model: String,
    pub innovation: String,
}

/// An `n x p` sample stored row-major; row `i` is observation `X_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    pub provenance: Option<Provenance>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::Data(format!("{} values cannot fill {n} x {p}", values.len())));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite entry at row {}, column {}", bad / p + 1, bad % p + 1)));
        }
        Ok(Self { n, p, values, provenance: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Data("rows have different lengths".into()));
        }
        Self::new(rows.len(), p, rows.concat())
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Self { n, p, values: vec![0.0; n * p], provenance: None }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // p == 0 would make chunks_exact panic
        self.values.chunks_exact(self.p.max(1)).take(self.n)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.p + k]
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { n: self.n, p: self.p, values: self.values.iter().map(|&v| f(v)).collect(), provenance: None }
    }

    /// Adds `shift[k]` to column `k` of every row.
    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.p {
            return Err(Error::BadArgument(format!("shift has length {}, expected {}", shift.len(), self.p)));
        }
        let mut out = self.clone();
        out.provenance = None;
        for row in out.values.chunks_exact_mut(self.p.max(1)) {
            for (v, s) in row.iter_mut().zip(shift) {
                *v += s;
            }
        }
        Ok(out)
    }

    /// Rows reordered so that output row `i` is input row `order[i]`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if order.len() != self.n || order.iter().any(|&i| i >= self.n || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::BadArgument("not a permutation of the rows".into()));
        }
        let values = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Ok(Self { n: self.n, p: self.p, values, provenance: None })
    }

    /// Appends one observation.
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.p {
            return Err(Error::BadArgument(format!("row has length {}, expected {}", row.len(), self.p)));
        }
        self.values.extend_from_slice(row);
        self.n += 1;
        Ok(())
    }

    pub fn set_row(&mut self, i: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.p || i >= self.n {
            return Err(Error::BadArgument("row index or length out of range".into()));
        }
        self.values[i * self.p..(i + 1) * self.p].copy_from_slice(row);
        Ok(())
    }

    /// CSV with header `x1..xp` and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (1..=self.p).map(|k| format!("x{k}")).collect();
        w.write_record(&header).map_err(io_err)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }

    /// Reads the CSV layout produced by [`DataMatrix::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
        let p = reader.headers().map_err(io_err)?.len();
        let mut values = Vec::new();
        let mut n = 0;
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(io_err)?;
            if record.len() != p {
                return Err(Error::Data(format!("row {} has {} fields, header has {p}", line + 1, record.len())));
            }
            for field in record.iter() {
                let v: f64 =
                    field.parse().map_err(|_| Error::Data(format!("row {}: not a number {field:?}", line + 1)))?;
                values.push(v);
            }
            n += 1;
        }
        Self::new(n, p, values)
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

#[derive(Debug, Clone)]
enum Route {
    /// `R = I`: rows are the innovations themselves.
    Identity,
    /// Gaussian AR(1): `x_1 = z_1`, `x_k = r x_{k-1} + sqrt(1 - r^2) z_k`.
    Ar1Markov { r: f64, scale: f64 },
    /// `x = T eps` with the symmetric root.
    SymmetricRoot(Arc<CovModel>),
}

/// Reusable row generator for one `(model, innovation)` pair.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: ToeplitzSpec,
    innovation: InnovationSpec,
    route: Route,
}

impl Sampler {
    /// Always multiplies by the symmetric root `T` (identity models skip the
    /// product, which would return the innovations unchanged).
    pub fn from_model(model: Arc<CovModel>, innovation: InnovationSpec) -> Result<Self> {
        innovation.validate()?;
        let spec = model.spec().clone();
        let route = if spec.is_identity() { Route::Identity } else { Route::SymmetricRoot(model) };
        Ok(Self { spec, innovation, route })
    }

    /// Picks the cheapest exact route. Gaussian AR(1) rows are generated by
    /// the Markov recursion, which has law `N(0, R)` without forming `T`;
    /// everything else goes through [`build_model`].
    pub fn for_spec(spec: &ToeplitzSpec, innovation: InnovationSpec) -> Result<Self> {
        spec.validate()?;
        innovation.validate()?;
        if spec.is_identity() {
            return Ok(Self { spec: spec.clone(), innovation, route: Route::Identity });
        }
        if let (ToeplitzKind::Ar1(r), InnovationSpec::Gaussian) = (&spec.kind, innovation) {
            let route = Route::Ar1Markov { r: *r, scale: (1.0 - r * r).sqrt() };
            return Ok(Self { spec: spec.clone(), innovation, route });
        }
        let model = Arc::new(build_model(spec)?);
        Self::from_model(model, innovation)
    }

    pub fn spec(&self) -> &ToeplitzSpec {
        &self.spec
    }

    pub fn innovation(&self) -> InnovationSpec {
        self.innovation
    }

    /// Draws `n` rows from `rng`; `mean` of `None` means the zero vector.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, mean: Option<&[f64]>, rng: &mut R) -> Result<DataMatrix> {
        let p = self.spec.p;
        if n == 0 {
            return Err(Error::TooFewRows { needed: 1, got: 0 });
        }
        if let Some(m) = mean {
            if m.len() != p {
                return Err(Error::BadArgument(format!("mean has length {}, expected {p}", m.len())));
            }
        }
        let mut values = vec![0.0; n * p];
        match &self.route {
            Route::Identity => {
                for v in values.iter_mut() {
                    *v = self.innovation.draw(rng);
                }
            }
            Route::Ar1Markov { r, scale } => {
                for row in values.chunks_exact_mut(p) {
                    let mut prev = self.innovation.draw(rng);
                    row[0] = prev;
                    for v in row[1..].iter_mut() {
                        prev = r * prev + scale * self.innovation.draw(rng);
                        *v = prev;
                    }
                }
            }
            Route::SymmetricRoot(model) => {
                // column i of eps is the innovation vector of row i
                let mut eps = DMatrix::<f64>::zeros(p, n);
                for v in eps.as_mut_slice().iter_mut() {
                    *v = self.innovation.draw(rng);
                }
                let xt = model.t() * eps;
                values.copy_from_slice(xt.as_slice());
            }
        }
        if let Some(m) = mean {
            for row in values.chunks_exact_mut(p) {
                for (v, mu) in row.iter_mut().zip(m) {
                    *v += mu;
                }
            }
        }
        DataMatrix::new(n, p, values)
    }

    /// Draws `n` rows from substream `(seed, stream)`.
    pub fn sample_stream(&self, n: usize, mean: Option<&[f64]>, seed: u64, stream: u64) -> Result<DataMatrix> {
        let mut rng = substream(seed, stream);
        let mut data = self.sample_with(n, mean, &mut rng)?;
        data.provenance = Some(Provenance {
            seed,
            stream,
            model: format!("{} p={}", self.spec.kind, self.spec.p),
            innovation: self.innovation.to_string(),
        });
        Ok(data)
    }
}

/// `n` i.i.d. rows of `mean + T eps` using stream 0 of `seed`.
pub fn sample(
    model: &Arc<CovModel>,
    innovation: InnovationSpec,
    n: usize,
    mean: &[f64],
    seed: u64,
) -> Result<DataMatrix> {
    Sampler::from_model(Arc::clone(model), innovation)?.sample_stream(n, Some(mean), seed, 0)
}
