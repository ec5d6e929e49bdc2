use std::fs::{self, File};
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{ArgGroup, Args, Parser, Subcommand};

use maxdist::covmodel::{
    build_model, compute_ap, compute_bp, compute_rhop, regime_ratio, MixingParams, ToeplitzKind, ToeplitzSpec,
};
use maxdist::diagnostics::{chen_stein_terms, empirical_pair_cov, OverlapClass, PairPattern};
use maxdist::error::Error;
use maxdist::harness::{run_mc, MCConfig};
use maxdist::inference::{cov_identity_test, outlier_test, power_beta, ApSource, TestOutcome};
use maxdist::sampling::{kurtosis_of, DataMatrix, InnovationSpec};

#[derive(Parser)]
#[command(name = "maxdist", version, about = "Maximum interpoint distance: limits, tests and simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a_p, b_p, rho_p and the regime ratio for a model.
    Model {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 3.0)]
        kappa4: f64,
        /// Sample size used for the regime ratio.
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 2.0)]
        k1: f64,
        #[arg(long, default_value_t = 1.0)]
        k2: f64,
    },
    /// Run a Monte Carlo experiment from a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for records.csv and summary.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Test H0: Sigma = I on a data CSV.
    TestCov {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Test for an outlying observation on a data CSV.
    #[command(group(ArgGroup::new("scale").required(true).args(["ap", "estimate_ap"])))]
    DetectOutlier {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        ap: Option<f64>,
        #[arg(long)]
        estimate_ap: bool,
    },
    /// Evaluate the power function over a grid of n and alpha.
    Power {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.05")]
        alpha: Vec<f64>,
    },
    /// Pair-moment checks and Poisson-approximation terms.
    Diagnose {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "gaussian")]
        innovation: String,
        #[arg(long, default_value_t = 200_000)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// First coordinate (0-based).
        #[arg(long, default_value_t = 0)]
        k: usize,
        /// Second coordinate for the cross-coordinate patterns (0-based).
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Sample size for the Poisson-approximation terms.
        #[arg(long = "sample-size", default_value_t = 10_000)]
        sample_size: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,0,2")]
        x_grid: Vec<f64>,
    },
}

#[derive(Args)]
#[command(group(ArgGroup::new("kind").required(true).args(["ar1", "mdep", "custom", "model"])))]
struct ModelArgs {
    /// AR(1) coefficient r in [0, 1).
    #[arg(long)]
    ar1: Option<f64>,
    /// m-dependent lags r_1,..,r_m.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mdep: Option<Vec<f64>>,
    /// All lags r_1,..,r_{p-1}.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    custom: Option<Vec<f64>>,
    /// Model in config syntax, e.g. ar1:0.5.
    #[arg(long)]
    model: Option<String>,
    /// Dimension.
    #[arg(long)]
    p: usize,
}

impl ModelArgs {
    fn spec(&self) -> Result<ToeplitzSpec, Error> {
        let kind = if let Some(r) = self.ar1 {
            ToeplitzKind::Ar1(r)
        } else if let Some(rs) = &self.mdep {
            ToeplitzKind::MDependent(rs.clone())
        } else if let Some(rs) = &self.custom {
            ToeplitzKind::Custom(rs.clone())
        } else if let Some(text) = &self.model {
            text.parse()?
        } else {
            return Err(Error::Config("no model given".into()));
        };
        ToeplitzSpec::new(kind, self.p)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Data(_) | Error::TooFewRows { .. } | Error::EmptySample => 3,
        _ => 2,
    }
}

fn read_data(path: &PathBuf) -> Result<DataMatrix, Error> {
    let file = File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    DataMatrix::read_csv(BufReader::new(file))
}

fn print_outcome(out: &TestOutcome) {
    println!("n = {}", out.n);
    println!("p = {}", out.p);
    println!("scale = {}", out.scale);
    println!("statistic = {:.6}", out.statistic);
    println!("threshold = {:.6}", out.threshold);
    println!("{}", out.verdict());
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Model { model, kappa4, n, gamma, k1, k2 } => {
            let spec = model.spec()?;
            let mixing = MixingParams::new(gamma, k1, k2)?;
            let cov = build_model(&spec)?;
            println!("model = {} p={}", spec.kind, spec.p);
            println!("a_p = {}", compute_ap(&spec)?);
            println!("b_p = {} (kappa4 = {kappa4})", compute_bp(&cov, kappa4)?);
            println!("rho_p = {}", compute_rhop(&cov, kappa4)?);
            println!("min_eigenvalue = {:e}", cov.eig_min());
            let ratio = regime_ratio(n.max(3), spec.p, &mixing);
            println!("regime_ratio = {ratio} (n = {n}, nu = {})", mixing.nu());
            if ratio >= 1.0 {
                eprintln!("warning: (log n)^nu / p^(1/9) >= 1, far from the asymptotic regime");
            }
        }
        Command::Simulate { config, out } => {
            let text = fs::read_to_string(&config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            let cfg = MCConfig::parse(&text)?;
            let report = run_mc(&cfg)?;
            fs::create_dir_all(&out).map_err(|e| Error::Data(e.to_string()))?;
            let csv = File::create(out.join("records.csv")).map_err(|e| Error::Data(e.to_string()))?;
            report.write_records_csv(std::io::BufWriter::new(csv))?;
            fs::write(out.join("summary.json"), report.summary_json()? + "\n")
                .map_err(|e| Error::Data(e.to_string()))?;
            let s = &report.summary;
            println!("reps = {}", report.records.len());
            println!("scale_used = {}", s.scale_used);
            println!("ks_distance = {:.6}", s.ks_distance);
            println!("rejection_rate = {:.4}", s.rejection_rate);
            eprintln!("runtime_ms = {}", s.runtime_ms);
        }
        Command::TestCov { data, alpha } => {
            let x = read_data(&data)?;
            print_outcome(&cov_identity_test(&x, alpha)?);
        }
        Command::DetectOutlier { data, alpha, ap, estimate_ap } => {
            let x = read_data(&data)?;
            let source = match (ap, estimate_ap) {
                (Some(a), false) => ApSource::Known(a),
                (None, true) => ApSource::Estimate,
                _ => return Err(Error::Config("give exactly one of --ap or --estimate-ap".into())),
            };
            print_outcome(&outlier_test(&x, alpha, source)?);
        }
        Command::Power { model, n, alpha } => {
            let spec = model.spec()?;
            for &size in &n {
                for &a in &alpha {
                    let pt = power_beta(&spec, size, a)?;
                    println!("n = {}, p = {}, alpha = {}, a_p = {:.6}, beta = {:.4}", size, spec.p, a, pt.ap, pt.beta);
                }
            }
        }
        Command::Diagnose { model, innovation, draws, seed, k, m, sample_size, x_grid } => {
            let spec = model.spec()?;
            let innovation: InnovationSpec = innovation.parse()?;
            let kappa4 = kurtosis_of(&innovation)?;
            let cov = Arc::new(build_model(&spec)?);
            let patterns = [
                PairPattern { overlap: OverlapClass::Identical, k, m: k },
                PairPattern { overlap: OverlapClass::ShareOne, k, m: k },
                PairPattern { overlap: OverlapClass::Identical, k, m },
                PairPattern { overlap: OverlapClass::ShareOne, k, m },
            ];
            println!("pattern,k,m,theoretical,empirical,se,z");
            for (i, pattern) in patterns.into_iter().enumerate() {
                let rep = empirical_pair_cov(&cov, innovation, pattern, draws, seed.wrapping_add(i as u64))?;
                println!(
                    "{:?},{},{},{:.6},{:.6},{:.6},{:.3}",
                    pattern.overlap,
                    pattern.k,
                    pattern.m,
                    rep.theoretical,
                    rep.empirical,
                    rep.se,
                    rep.z_score()
                );
            }
            let rho = compute_rhop(&cov, kappa4)?;
            println!("x,n,s_n,lambda_p,lambda_limit,u1,u2_bound,rho");
            for x in x_grid {
                let cs = chen_stein_terms(sample_size, x, rho)?;
                println!(
                    "{},{},{:.6},{:.6e},{:.6e},{:.6e},{:.6e},{:.6}",
                    x, cs.n, cs.s_n, cs.lambda_p, cs.lambda_limit, cs.u1, cs.u2_bound, cs.rho
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
