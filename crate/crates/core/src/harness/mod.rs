//! Reproducible Monte Carlo experiments on `M_n^2`.
//!
//! Replication `r` draws its sample from stream `r` of the master seed and
//! emits one record; records are collected in replication order, so reports
//! depend only on the configuration, never on the worker count.

mod config;

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{default_scale_mode, MCConfig, ScaleMode, TestKind};

use crate::covmodel::{build_model, compute_ap, compute_bp, ToeplitzKind};
use crate::error::{Error, Result};
use crate::extremestat::{limit_cdf, max_interpoint_sq, Normalization};
use crate::inference::{estimate_ap, threshold};
use crate::sampling::{kurtosis_of, InnovationSpec, Sampler};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "MAXDIST_THREADS";

/// Worker count from [`THREADS_ENV`], else the available parallelism.
pub fn worker_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// One replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub mn2: f64,
    pub standardized: f64,
    pub reject: bool,
    pub scale: f64,
}

/// Empirical vs limiting CDF at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub empirical: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MCSummary {
    pub ks_distance: f64,
    pub rejection_rate: f64,
    /// Theoretical scale, or the mean estimated `a_p` over replications.
    pub scale_used: f64,
    pub threshold_scale: Option<f64>,
    pub cdf_grid: Vec<GridPoint>,
    /// Wall-clock time; excluded from serialized output.
    #[serde(skip)]
    pub runtime_ms: u128,
}

// runtime is not part of the result
impl PartialEq for MCSummary {
    fn eq(&self, other: &Self) -> bool {
        self.ks_distance == other.ks_distance
            && self.rejection_rate == other.rejection_rate
            && self.scale_used == other.scale_used
            && self.threshold_scale == other.threshold_scale
            && self.cdf_grid == other.cdf_grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub config: MCConfig,
    pub records: Vec<RepRecord>,
    pub summary: MCSummary,
}

impl MCReport {
    /// Records as CSV with header `rep,mn2,standardized,reject`.
    pub fn write_records_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Data(e.to_string());
        writeln!(out, "rep,mn2,standardized,reject").map_err(io)?;
        for r in &self.records {
            writeln!(out, "{},{:.16e},{:.16e},{}", r.rep, r.mn2, r.standardized, u8::from(r.reject)).map_err(io)?;
        }
        Ok(())
    }

    /// Config and summary as pretty JSON.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct View<'a> {
            config: &'a MCConfig,
            reps: usize,
            summary: &'a MCSummary,
        }
        serde_json::to_string_pretty(&View { config: &self.config, reps: self.records.len(), summary: &self.summary })
            .map_err(|e| Error::Data(e.to_string()))
    }
}

/// Two-sided Kolmogorov-Smirnov distance between `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        let upper = ((i + 1) as f64 / n - f).abs();
        let lower = (i as f64 / n - f).abs();
        d.max(upper).max(lower)
    });
    Ok(d)
}

/// Runs the experiment on a pool of [`worker_threads`] workers.
pub fn run_mc(cfg: &MCConfig) -> Result<MCReport> {
    run_mc_with_threads(cfg, worker_threads())
}

/// Runs the experiment on a dedicated pool of `threads` workers.
pub fn run_mc_with_threads(cfg: &MCConfig, threads: usize) -> Result<MCReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| run_inner(cfg))
}

fn sampler_and_scale(cfg: &MCConfig) -> Result<(Sampler, Option<f64>)> {
    let spec = &cfg.model;
    // identity and Gaussian AR(1) rows never need the square root
    let direct =
        spec.is_identity() || matches!((&spec.kind, cfg.innovation), (ToeplitzKind::Ar1(_), InnovationSpec::Gaussian));
    let model =
        if cfg.scale_mode == ScaleMode::TheoreticalBp || !direct { Some(Arc::new(build_model(spec)?)) } else { None };
    let scale = match (cfg.scale_mode, &model) {
        (ScaleMode::TheoreticalAp, _) => Some(compute_ap(spec)?),
        (ScaleMode::TheoreticalBp, Some(m)) => Some(compute_bp(m, kurtosis_of(&cfg.innovation)?)?),
        _ => None,
    };
    let sampler = match model {
        Some(m) if !direct => Sampler::from_model(m, cfg.innovation)?,
        _ => Sampler::for_spec(spec, cfg.innovation)?,
    };
    Ok((sampler, scale))
}

fn run_inner(cfg: &MCConfig) -> Result<MCReport> {
    let start = Instant::now();
    let (sampler, theoretical) = sampler_and_scale(cfg)?;
    let (n, p) = (cfg.n, cfg.p());
    let fixed_threshold = match cfg.test {
        TestKind::CovIdentity => Some(threshold(n, p, cfg.alpha, 8.0)?),
        TestKind::Outlier => theoretical.map(|s| threshold(n, p, cfg.alpha, s)).transpose()?,
    };

    let records: Vec<RepRecord> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| -> Result<RepRecord> {
            let x = sampler.sample_stream(n, None, cfg.seed, rep as u64)?;
            let mn2 = max_interpoint_sq(&x)?.value;
            let scale = match theoretical {
                Some(s) => s,
                None => estimate_ap(&x)?,
            };
            let standardized = Normalization::new(n, p, scale)?.standardize(mn2);
            let cut = match fixed_threshold {
                Some(t) => t,
                None => threshold(n, p, cfg.alpha, scale)?,
            };
            Ok(RepRecord { rep, mn2, standardized, reject: mn2 >= cut, scale })
        })
        .collect::<Result<_>>()?;

    let standardized: Vec<f64> = records.iter().map(|r| r.standardized).collect();
    let reps = records.len() as f64;
    let ks = ks_distance(&standardized, limit_cdf)?;
    let rejection_rate = records.iter().filter(|r| r.reject).count() as f64 / reps;
    let scale_used = theoretical.unwrap_or_else(|| records.iter().map(|r| r.scale).sum::<f64>() / reps);
    let cdf_grid = cfg
        .x_grid
        .iter()
        .map(|&x| GridPoint {
            x,
            empirical: standardized.iter().filter(|&&w| w <= x).count() as f64 / reps,
            limit: limit_cdf(x),
        })
        .collect();
    let threshold_scale = match cfg.test {
        TestKind::CovIdentity => Some(8.0),
        TestKind::Outlier => theoretical,
    };

    Ok(MCReport {
        config: cfg.clone(),
        records,
        summary: MCSummary {
            ks_distance: ks,
            rejection_rate,
            scale_used,
            threshold_scale,
            cdf_grid,
            runtime_ms: start.elapsed().as_millis(),
        },
    })
}
