//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! model = ar1:0.5          # ar1:<r> | mdep:<r1,..,rm> | custom:<r1,..,r_{p-1}> | identity
//! p = 2000
//! n = 50
//! innovation = gaussian    # gaussian | rademacher | uniform | three_point:<kappa4>
//! reps = 1000
//! seed = 20240601
//! alpha = 0.05
//! scale_mode = theoretical_ap   # theoretical_ap | theoretical_bp | estimated_ap
//! test = outlier                # outlier | cov_identity
//! x_grid = -2,0,2
//! ```
//!
//! `model`, `p` and `n` are required. `scale_mode` defaults to
//! `theoretical_ap` for Gaussian innovations and `theoretical_bp` otherwise.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::covmodel::{parse_list, ToeplitzKind, ToeplitzSpec};
use crate::error::{Error, Result};
use crate::sampling::InnovationSpec;

/// Which scale standardizes `M_n^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    TheoreticalAp,
    TheoreticalBp,
    EstimatedAp,
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleMode::TheoreticalAp => "theoretical_ap",
            ScaleMode::TheoreticalBp => "theoretical_bp",
            ScaleMode::EstimatedAp => "estimated_ap",
        })
    }
}

impl FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "theoretical_ap" => Ok(ScaleMode::TheoreticalAp),
            "theoretical_bp" => Ok(ScaleMode::TheoreticalBp),
            "estimated_ap" => Ok(ScaleMode::EstimatedAp),
            other => Err(Error::Config(format!("unknown scale_mode {other:?}"))),
        }
    }
}

/// Decision rule applied to each replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Threshold at the scale chosen by `scale_mode`.
    Outlier,
    /// Threshold at scale 8 (`H0: Sigma = I`) regardless of `scale_mode`.
    CovIdentity,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Outlier => "outlier",
            TestKind::CovIdentity => "cov_identity",
        })
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "outlier" => Ok(TestKind::Outlier),
            "cov_identity" => Ok(TestKind::CovIdentity),
            other => Err(Error::Config(format!("unknown test {other:?}"))),
        }
    }
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub model: ToeplitzSpec,
    pub innovation: InnovationSpec,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub scale_mode: ScaleMode,
    pub test: TestKind,
    pub x_grid: Vec<f64>,
}

impl MCConfig {
    /// Config with defaults for everything but the model and sample size.
    pub fn new(model: ToeplitzSpec, innovation: InnovationSpec, n: usize) -> Self {
        let scale_mode = default_scale_mode(innovation);
        Self {
            model,
            innovation,
            n,
            reps: 1000,
            seed: 0,
            alpha: 0.05,
            scale_mode,
            test: TestKind::Outlier,
            x_grid: vec![-2.0, 0.0, 2.0],
        }
    }

    pub fn p(&self) -> usize {
        self.model.p
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.innovation.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n < 3 {
            return Err(Error::Config(format!("n = {} must be at least 3", self.n)));
        }
        if self.scale_mode == ScaleMode::EstimatedAp && self.n < 4 {
            return Err(Error::Config("estimated_ap needs n >= 4".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if self.x_grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("x_grid must be finite".into()));
        }
        Ok(())
    }

    /// Parses the flat text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut model: Option<ToeplitzKind> = None;
        let mut p: Option<usize> = None;
        let mut n: Option<usize> = None;
        let mut innovation = InnovationSpec::Gaussian;
        let mut reps = None;
        let mut seed = None;
        let mut alpha = None;
        let mut scale_mode = None;
        let mut test = None;
        let mut x_grid = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let ctx = |e: Error| Error::Config(format!("line {} ({key}): {e}", lineno + 1));
            match key {
                "model" => model = Some(value.parse().map_err(ctx)?),
                "p" => p = Some(parse_num(value).map_err(ctx)?),
                "n" => n = Some(parse_num(value).map_err(ctx)?),
                "innovation" => innovation = value.parse().map_err(ctx)?,
                "reps" => reps = Some(parse_num(value).map_err(ctx)?),
                "seed" => seed = Some(parse_num(value).map_err(ctx)?),
                "alpha" => alpha = Some(parse_num(value).map_err(ctx)?),
                "scale_mode" => scale_mode = Some(value.parse().map_err(ctx)?),
                "test" => test = Some(value.parse().map_err(ctx)?),
                "x_grid" => x_grid = Some(parse_list(value).map_err(ctx)?),
                other => return Err(Error::Config(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }

        let kind = model.ok_or_else(|| Error::Config("missing key: model".into()))?;
        let p = p.ok_or_else(|| Error::Config("missing key: p".into()))?;
        let n = n.ok_or_else(|| Error::Config("missing key: n".into()))?;
        let spec = ToeplitzSpec { kind, p };
        let mut cfg = MCConfig::new(spec, innovation, n);
        cfg.reps = reps.unwrap_or(cfg.reps);
        cfg.seed = seed.unwrap_or(cfg.seed);
        cfg.alpha = alpha.unwrap_or(cfg.alpha);
        cfg.scale_mode = scale_mode.unwrap_or(cfg.scale_mode);
        cfg.test = test.unwrap_or(cfg.test);
        cfg.x_grid = x_grid.unwrap_or(cfg.x_grid);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Writes the flat text format; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let grid = self.x_grid.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "model = {}\np = {}\nn = {}\ninnovation = {}\nreps = {}\nseed = {}\nalpha = {}\nscale_mode = {}\ntest = {}\nx_grid = {}\n",
            self.model.kind,
            self.model.p,
            self.n,
            self.innovation,
            self.reps,
            self.seed,
            self.alpha,
            self.scale_mode,
            self.test,
            grid
        )
    }
}

pub fn default_scale_mode(innovation: InnovationSpec) -> ScaleMode {
    match innovation {
        InnovationSpec::Gaussian => ScaleMode::TheoreticalAp,
        _ => ScaleMode::TheoreticalBp,
    }
}

fn parse_num<T: FromStr>(value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("not a valid number: {value:?}")))
}
