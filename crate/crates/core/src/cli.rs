//! Command-line interface: `simulate`, `fit`, `predict`, `cv` and `rerun`.
//!
//! Exit codes: 0 on success, 1 on runtime errors, 2 on usage errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::distributions::SupportBase;
use crate::error::Error;
use crate::evaluate::{
    cross_validate, posterior_summary, predict_with, rmse_real, CvReport, ModelSpec,
    ParameterSummary, PredictOptions,
};
use crate::io;
use crate::model::{CovariateSet, PredictorKind, RatingData};
use crate::sampler::{gibbs_fit, ChainConfig, PosteriorDraws};
use crate::simulate::{simulate_replicate, SimConfig, SimTruth};

#[derive(Debug, Parser, Serialize)]
#[command(name = "binrec", version, about = "Bayesian shifted-binomial rating model")]
pub struct Cli {
    /// Cap on worker threads for parallel steps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Simulate a dataset with known ground truth.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler and write posterior draws.
    Fit(FitArgs),
    /// Predict ratings from saved draws.
    Predict(PredictArgs),
    /// Cross-validate a list of models.
    Cv(CvArgs),
    /// Re-execute the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// TOML simulation config.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Replicate index; 0 uses the config seed unchanged.
    #[arg(long, default_value_t = 0)]
    pub replicate: usize,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    #[arg(long)]
    pub ratings: PathBuf,
    /// User covariates.
    #[arg(long)]
    pub x: PathBuf,
    /// Item covariates.
    #[arg(long)]
    pub y: PathBuf,
    /// Rating scale.
    #[arg(long, default_value_t = 5)]
    pub k: u32,
    /// Ratings live in {0..k} instead of {1..k}.
    #[arg(long)]
    pub zero_based: bool,
}

impl DataArgs {
    fn base(&self) -> SupportBase {
        if self.zero_based {
            SupportBase::ZeroBased
        } else {
            SupportBase::OneBased
        }
    }

    fn load(&self) -> Result<(RatingData, CovariateSet), Failure> {
        let x = io::read_matrix(&self.x)?;
        let y = io::read_matrix(&self.y)?;
        let cov = CovariateSet::new(x, y)?;
        self.base().validate_k(self.k).map_err(|e| Failure::Usage(e.to_string()))?;
        let data = io::read_ratings(&self.ratings, cov.n(), cov.m(), self.k, self.base())?;
        Ok((data, cov))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ChainArgs {
    #[arg(long, value_enum, default_value_t = PredictorKind::Linear)]
    pub form: PredictorKind,
    /// Number of latent factors (0 disables them).
    #[arg(long, default_value_t = 0)]
    pub latent: usize,
    /// Horseshoe prior on the coefficients.
    #[arg(long)]
    pub sparse_coefficients: bool,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ChainArgs {
    fn config(&self) -> ChainConfig {
        ChainConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            sparse_coefficients: self.sparse_coefficients,
            latent_l: self.latent,
            ..ChainConfig::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Credible levels reported in summary.json.
    #[arg(long = "ci", default_values_t = [0.95])]
    pub levels: Vec<f64>,
    /// truth.json of a simulated dataset; adds parameter RMSE to the summary.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Suppress progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Output directory of a previous fit.
    #[arg(long)]
    pub draws: PathBuf,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// CSV of `user,item` cells to predict.
    #[arg(long, conflicts_with = "all_missing", required_unless_present = "all_missing")]
    pub cells: Option<PathBuf>,
    /// Predict every cell absent from `--ratings`.
    #[arg(long, requires = "ratings")]
    pub all_missing: bool,
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    /// Allow rows absent from training; they get the covariate-only predictor.
    #[arg(long)]
    pub cold_start: bool,
    #[arg(long = "ci", default_value_t = 0.95)]
    pub level: f64,
    /// Append the predictive pmf as columns.
    #[arg(long)]
    pub pmf: bool,
    /// Use the pmf at the posterior-mean predictor.
    #[arg(long)]
    pub plug_in: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// TOML file with a `[[model]]` list.
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub cwd: PathBuf,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub duration_secs: f64,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(Error::Io(e))
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn run_from_args(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli, argv) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let started = Instant::now();
    let mut manifest = RunManifest {
        command: String::new(),
        argv: argv.clone(),
        cwd: std::env::current_dir()?,
        config: serde_json::to_value(&cli.command).unwrap_or(serde_json::Value::Null),
        seed: None,
        inputs: BTreeMap::new(),
        outputs: Vec::new(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_secs: 0.0,
    };
    let out_dir = match &cli.command {
        Command::Simulate(a) => {
            manifest.command = "simulate".into();
            cmd_simulate(a, &mut manifest)?;
            a.out.clone()
        }
        Command::Fit(a) => {
            manifest.command = "fit".into();
            cmd_fit(a, &mut manifest)?;
            a.out.clone()
        }
        Command::Predict(a) => {
            manifest.command = "predict".into();
            cmd_predict(a, &mut manifest)?;
            a.out.clone()
        }
        Command::Cv(a) => {
            manifest.command = "cv".into();
            cmd_cv(a, &mut manifest)?;
            a.out.clone()
        }
        Command::Rerun(a) => return cmd_rerun(a),
    };
    manifest.duration_secs = started.elapsed().as_secs_f64();
    io::write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn output(manifest: &mut RunManifest, dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    manifest.outputs.push(path.clone());
    path
}

fn cmd_simulate(a: &SimulateArgs, manifest: &mut RunManifest) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| Failure::Usage(format!("{}: {e}", a.config.display())))?;
    let mut cfg: SimConfig = toml::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", a.config.display())))?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    manifest.inputs.insert("config".into(), a.config.clone());
    manifest.config = serde_json::json!({ "simulation": cfg, "replicate": a.replicate });
    manifest.seed = Some(cfg.replicate_seed(a.replicate));

    let ds = simulate_replicate(&cfg, a.replicate)?;
    prepare_out(&a.out)?;
    io::write_ratings(&output(manifest, &a.out, "ratings.csv"), &ds.data)?;
    io::write_matrix(&output(manifest, &a.out, "X.csv"), &ds.covariates.x, "x")?;
    io::write_matrix(&output(manifest, &a.out, "Y.csv"), &ds.covariates.y, "y")?;
    io::write_json(&output(manifest, &a.out, "truth.json"), &ds.truth)?;
    println!(
        "simulated {} x {} ratings with {} observed cells into {}",
        cfg.n,
        cfg.m,
        ds.data.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TruthComparison {
    pub rmse_coefficients: f64,
    pub rmse_f: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitSummary {
    pub form: PredictorKind,
    pub latent: usize,
    pub retained_draws: usize,
    pub final_log_likelihood: Option<f64>,
    pub parameters: Vec<ParameterSummary>,
    pub truth: Option<TruthComparison>,
}

fn cmd_fit(a: &FitArgs, manifest: &mut RunManifest) -> Result<(), Failure> {
    let config = a.chain.config();
    let (data, cov) = a.data.load()?;
    let dim = a.chain.form.dim(cov.p(), cov.q());
    config.validate(dim).map_err(|e| Failure::Usage(e.to_string()))?;
    if config.retained_draws() < 2 {
        return Err(Failure::Usage("fewer than 2 retained draws; raise --iterations".into()));
    }
    for &level in &a.levels {
        if !(level > 0.0 && level < 1.0) {
            return Err(Failure::Usage(format!("--ci must lie in (0, 1), got {level}")));
        }
    }
    manifest.seed = Some(config.seed);
    manifest.inputs.insert("ratings".into(), a.data.ratings.clone());
    manifest.inputs.insert("x".into(), a.data.x.clone());
    manifest.inputs.insert("y".into(), a.data.y.clone());
    let truth: Option<SimTruth> = match &a.truth {
        Some(path) => {
            manifest.inputs.insert("truth".into(), path.clone());
            Some(io::read_json(path)?)
        }
        None => None,
    };

    let quiet = a.quiet;
    let mut last_ll = None;
    let mut sink = |t: usize, ll: f64| {
        last_ll = Some(ll);
        if !quiet {
            eprintln!("iteration {t:>6}  log-likelihood {ll:.4}");
        }
    };
    let draws = gibbs_fit(&data, &cov, a.chain.form, &config, Some(&mut sink))?;

    let truth = match truth {
        Some(t) => Some(compare_truth(&draws, &t)?),
        None => None,
    };
    let summary = FitSummary {
        form: draws.kind,
        latent: draws.l,
        retained_draws: draws.len(),
        final_log_likelihood: last_ll,
        parameters: posterior_summary(&draws, &a.levels)?,
        truth,
    };
    prepare_out(&a.out)?;
    io::write_draws(&output(manifest, &a.out, "draws.csv"), &draws)?;
    io::write_json(&output(manifest, &a.out, "model.json"), &draws)?;
    io::write_json(&output(manifest, &a.out, "summary.json"), &summary)?;
    if let Some(t) = &summary.truth {
        println!("rmse(coefficients) vs truth: {:.4}", t.rmse_coefficients);
        if let Some(f) = t.rmse_f {
            println!("rmse(F) vs truth: {f:.4}");
        }
    }
    println!("wrote {} draws to {}", draws.len(), a.out.display());
    Ok(())
}

fn compare_truth(draws: &PosteriorDraws, truth: &SimTruth) -> Result<TruthComparison, Failure> {
    if truth.form != draws.kind || truth.coefficients.len() != draws.kind.dim(draws.p, draws.q) {
        return Err(Failure::Usage(
            "truth.json was generated with a different predictor form".into(),
        ));
    }
    let est = draws.coefficient_mean();
    let rmse_coefficients = rmse_real(est.as_slice(), &truth.coefficients)?;
    let rmse_f = match (draws.f_mean(), truth.f()) {
        (Some(est), Some(tru)) if est.shape() == tru.shape() => {
            Some(rmse_real(est.as_slice(), tru.as_slice())?)
        }
        _ => None,
    };
    Ok(TruthComparison {
        rmse_coefficients,
        rmse_f,
    })
}

fn cmd_predict(a: &PredictArgs, manifest: &mut RunManifest) -> Result<(), Failure> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Failure::Usage(format!("--ci must lie in (0, 1), got {}", a.level)));
    }
    let meta: PosteriorDraws = io::read_json(&a.draws.join("model.json"))?;
    let draws = io::read_draws(&a.draws.join("draws.csv"), meta)?;
    manifest.seed = Some(draws.seed);
    manifest.inputs.insert("draws".into(), a.draws.clone());
    manifest.inputs.insert("x".into(), a.x.clone());
    manifest.inputs.insert("y".into(), a.y.clone());
    let cov = CovariateSet::new(io::read_matrix(&a.x)?, io::read_matrix(&a.y)?)?;

    let cells = if a.all_missing {
        let path = a.ratings.as_ref().expect("clap enforces --ratings");
        manifest.inputs.insert("ratings".into(), path.clone());
        let data = io::read_ratings(path, draws.n, draws.m, draws.k, draws.support_base)?;
        data.unobserved_cells()
    } else {
        let path = a.cells.as_ref().expect("clap enforces --cells");
        manifest.inputs.insert("cells".into(), path.clone());
        io::read_cells(path)?
    };
    let opts = PredictOptions {
        cold_start: a.cold_start,
        level: a.level,
        plug_in: a.plug_in,
    };
    let result = predict_with(&draws, &cov, &cells, &opts)?;

    let mut text = String::from("user,item,point,lower,upper");
    let (lo, hi) = result
        .predictions
        .iter()
        .fold((i64::MAX, i64::MIN), |(lo, hi), p| {
            (lo.min(p.support_min), hi.max(p.support_min + p.pmf.len() as i64 - 1))
        });
    if a.pmf {
        for r in lo..=hi {
            text.push_str(&format!(",p{r}"));
        }
    }
    text.push('\n');
    for p in &result.predictions {
        text.push_str(&format!("{},{},{},{},{}", p.user, p.item, p.point, p.lower, p.upper));
        if a.pmf {
            for r in lo..=hi {
                let t = r - p.support_min;
                let v = if t >= 0 && (t as usize) < p.pmf.len() { p.pmf[t as usize] } else { 0.0 };
                text.push_str(&format!(",{v}"));
            }
        }
        text.push('\n');
    }
    prepare_out(&a.out)?;
    io::write_atomic(&output(manifest, &a.out, "predictions.csv"), text.as_bytes())?;
    println!("wrote {} predictions to {}", cells.len(), a.out.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelList {
    model: Vec<ModelSpec>,
}

fn cmd_cv(a: &CvArgs, manifest: &mut RunManifest) -> Result<(), Failure> {
    if a.folds < 2 {
        return Err(Failure::Usage(format!("--folds must be at least 2, got {}", a.folds)));
    }
    let text = fs::read_to_string(&a.models)
        .map_err(|e| Failure::Usage(format!("{}: {e}", a.models.display())))?;
    let list: ModelList = toml::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", a.models.display())))?;
    if list.model.is_empty() {
        return Err(Failure::Usage("the model list is empty".into()));
    }
    let (data, cov) = a.data.load()?;
    if a.folds > data.len() {
        return Err(Failure::Usage(format!(
            "--folds {} exceeds the {} observed ratings",
            a.folds,
            data.len()
        )));
    }
    manifest.seed = Some(a.seed);
    manifest.inputs.insert("ratings".into(), a.data.ratings.clone());
    manifest.inputs.insert("x".into(), a.data.x.clone());
    manifest.inputs.insert("y".into(), a.data.y.clone());
    manifest.inputs.insert("models".into(), a.models.clone());
    manifest.config = serde_json::json!({ "args": serde_json::to_value(a).ok(), "models": list.model });

    let reports = cross_validate(&data, &cov, &list.model, a.folds, a.seed)?;
    prepare_out(&a.out)?;
    io::write_json(&output(manifest, &a.out, "cv_report.json"), &reports)?;
    let mut table = String::from("model,fold,test_size,rmse,error\n");
    for r in &reports {
        for f in &r.folds {
            table.push_str(&format!(
                "{},{},{},{},{}\n",
                r.model,
                f.fold + 1,
                f.test_size,
                f.rmse.map(|x| x.to_string()).unwrap_or_default(),
                f.error.as_deref().unwrap_or("").replace([',', '\n'], " ")
            ));
        }
    }
    io::write_atomic(&output(manifest, &a.out, "cv_report.csv"), table.as_bytes())?;
    print_cv(&reports);
    Ok(())
}

fn print_cv(reports: &[CvReport]) {
    let width = reports.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    println!("{:<width$}  rmse", "model");
    for r in reports {
        println!("{:<width$}  {}", r.model, r.formatted);
        for f in r.folds.iter().filter(|f| f.error.is_some()) {
            println!("  fold {} failed: {}", f.fold + 1, f.error.as_deref().unwrap_or(""));
        }
    }
}

fn cmd_rerun(a: &RerunArgs) -> Result<(), Failure> {
    let manifest: RunManifest = io::read_json(&a.manifest)?;
    let mut argv = manifest.argv.clone();
    if let Some(out) = &a.out {
        let out = std::path::absolute(out)?;
        set_out(&mut argv, &out.to_string_lossy());
    }
    let cli = Cli::try_parse_from(&argv)
        .map_err(|e| Failure::Usage(format!("manifest argv no longer parses: {e}")))?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(Failure::Usage("a rerun manifest cannot point at another rerun".into()));
    }
    std::env::set_current_dir(&manifest.cwd)?;
    run(cli, argv)
}

fn set_out(argv: &mut Vec<String>, out: &str) {
    if let Some(pos) = argv.iter().position(|s| s == "--out") {
        if pos + 1 < argv.len() {
            argv[pos + 1] = out.to_string();
            return;
        }
    }
    if let Some(pos) = argv.iter().position(|s| s.starts_with("--out=")) {
        argv[pos] = format!("--out={out}");
        return;
    }
    argv.push("--out".into());
    argv.push(out.to_string());
}
