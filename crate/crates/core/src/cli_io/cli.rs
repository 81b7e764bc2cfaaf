//! Command-line front end: argument definitions and the five commands.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use super::emit::{fmt_f64, run_to_csv, run_to_json};
use super::nist::parse_nist_strd;
use super::table::{parse_csv, ColumnRef};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::{model_by_id, CustomModel, RegressionModel};
use crate::recycler::{
    self, base_fit, confidence_interval, coverage_study, observed_dataset, pivot_table_cell,
    recycle_from_base, sampling_distribution_sim, with_workers, CoverageConfig, Direction, Pivot,
    RecycleConfig, SimDistConfig,
};
use crate::stats;
use crate::weights::WeightScheme;
use crate::wls::{self, SolverConfig};

const DESIGN_RANGE: (f64, f64) = (0.0, 10.0);

#[derive(Debug, Parser)]
#[command(
    name = "recycle-nls",
    version,
    about = "Nonlinear least squares with random-weighting resampling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Least-squares fit of a dataset.
    Fit(FitArgs),
    /// Recycled replicates and confidence intervals for one dataset.
    Recycle(RecycleArgs),
    /// Simulated sampling distribution of the pivot.
    Simdist(SimdistArgs),
    /// Coverage study of recycled intervals.
    Coverage(CoverageArgs),
    /// Pivot summaries per sample size and weight scheme.
    Tables(TablesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Built-in model: model1, model2, chwirut1 or linear.
    #[arg(long, conflicts_with = "model_file")]
    pub model: Option<String>,
    /// TOML model declaration.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// NIST StRD `.dat` file or delimited text.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "x")]
    pub x_col: ColumnRef,
    #[arg(long, default_value = "y")]
    pub y_col: ColumnRef,
    /// The delimited file has no header row; columns are then zero-based indices.
    #[arg(long)]
    pub no_header: bool,
    /// Starting values, comma separated.
    #[arg(long)]
    pub start: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// True parameter vector, comma separated.
    #[arg(long)]
    pub theta0: Option<String>,
    #[arg(long = "noise-sd", default_value_t = 0.25)]
    pub noise_sd: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, env = "RECYCLE_NLS_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct RecycleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Sample size of the synthetic dataset used when `--data` is absent.
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    #[arg(long, default_value = "multinomial")]
    pub scheme: WeightScheme,
    #[arg(long = "B", default_value_t = 10_000)]
    pub replicates: usize,
    /// Direction `c`: `e<j>` or a comma list (normalized).
    #[arg(long, default_value = "e1")]
    pub c: String,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SimdistArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    /// Direction `c`; defaults to the normalized all-ones vector.
    #[arg(long)]
    pub c: Option<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, value_delimiter = ',', default_value = "150")]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "multinomial")]
    pub scheme: Vec<WeightScheme>,
    #[arg(long = "B", default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, value_delimiter = ',', default_value = "10,30,50,80,150")]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "multinomial,dirichlet,exponential")]
    pub scheme: Vec<WeightScheme>,
    #[arg(long = "B", default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long)]
    pub c: Option<String>,
    /// Also write every pivot sample with its normal reference quantile here.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

impl Cli {
    pub fn out_path(&self) -> Option<&std::path::Path> {
        let run = match &self.command {
            Command::Fit(a) => &a.run,
            Command::Recycle(a) => &a.run,
            Command::Simdist(a) => &a.run,
            Command::Coverage(a) => &a.run,
            Command::Tables(a) => &a.run,
        };
        run.out.as_deref()
    }
}

/// Text produced by a command plus any non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    pub warnings: Vec<String>,
}

/// Runs a parsed command and writes its output to `--out` or returns it for
/// stdout.
pub fn run(cli: &Cli) -> Result<Output> {
    let out = match &cli.command {
        Command::Fit(a) => cmd_fit(a)?,
        Command::Recycle(a) => cmd_recycle(a)?,
        Command::Simdist(a) => cmd_simdist(a)?,
        Command::Coverage(a) => cmd_coverage(a)?,
        Command::Tables(a) => cmd_tables(a)?,
    };
    if let Some(path) = cli.out_path() {
        std::fs::write(path, &out.body).map_err(|e| Error::io(path, e))?;
    }
    Ok(out)
}

fn load_model(m: &ModelArgs) -> Result<Box<dyn RegressionModel>> {
    match (&m.model, &m.model_file) {
        (_, Some(path)) => Ok(Box::new(CustomModel::from_toml_file(path)?)),
        (Some(id), None) => model_by_id(id),
        (None, None) => Err(Error::InvalidInput("one of --model or --model-file is required".into())),
    }
}

fn model_label(m: &ModelArgs, model: &dyn RegressionModel) -> String {
    m.model.clone().unwrap_or_else(|| model.name().to_string())
}

/// Conventional true values for the simulation models.
fn default_theta0(model: &dyn RegressionModel) -> Option<Vec<f64>> {
    match model.name() {
        "model1" => Some(vec![2.0, 0.04]),
        "model2" => Some(vec![10.0, 0.0]),
        _ => None,
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("{what}: bad number `{t}`")))
        })
        .collect()
}

fn theta0_for(sim: &SimArgs, model: &dyn RegressionModel) -> Result<Vec<f64>> {
    let theta0 = match &sim.theta0 {
        Some(s) => parse_list(s, "--theta0")?,
        None => default_theta0(model).ok_or_else(|| {
            Error::InvalidInput(format!("--theta0 is required for model `{}`", model.name()))
        })?,
    };
    crate::models::check_theta(model, &theta0)?;
    Ok(theta0)
}

fn workers(run: &RunArgs) -> usize {
    run.workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    })
}

fn direction(c: Option<&str>, p: usize) -> Result<Direction> {
    match c {
        Some(s) => Direction::parse(s, p),
        None => Direction::normalized(vec![1.0; p]),
    }
}

struct LoadedData {
    data: Dataset,
    start: Option<Vec<f64>>,
    certified: Option<(Vec<f64>, Vec<f64>, f64)>,
}

fn is_nist(path: &std::path::Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("dat"))
}

fn load_data(d: &DataArgs, path: &std::path::Path) -> Result<LoadedData> {
    if is_nist(path) {
        let nist = parse_nist_strd(path)?;
        Ok(LoadedData {
            start: nist.start(0),
            certified: Some((nist.certified.clone(), nist.certified_sd.clone(), nist.residual_sd)),
            data: nist.data,
        })
    } else {
        Ok(LoadedData {
            data: parse_csv(path, &d.x_col, &d.y_col, !d.no_header)?,
            start: None,
            certified: None,
        })
    }
}

fn start_for(d: &DataArgs, loaded: &LoadedData, model: &dyn RegressionModel) -> Result<Vec<f64>> {
    let start = match &d.start {
        Some(s) => parse_list(s, "--start")?,
        None => loaded
            .start
            .clone()
            .or_else(|| default_theta0(model))
            .ok_or_else(|| Error::InvalidInput("--start is required".into()))?,
    };
    crate::models::check_theta(model, &start)?;
    Ok(start)
}

fn to_json(v: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct ParamRow {
    param: usize,
    estimate: f64,
    std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    certified: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certified_sd: Option<f64>,
}

fn cmd_fit(a: &FitArgs) -> Result<Output> {
    let model = load_model(&a.model)?;
    let path = a
        .data
        .data
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("fit needs --data".into()))?;
    let loaded = load_data(&a.data, path)?;
    let start = start_for(&a.data, &loaded, model.as_ref())?;
    let n = loaded.data.len();
    let fit = wls::fit(model.as_ref(), &loaded.data, &vec![1.0; n], &start, &SolverConfig::default())?;

    let rows: Vec<ParamRow> = (0..fit.n_params())
        .map(|j| ParamRow {
            param: j + 1,
            estimate: fit.theta[j],
            std_error: fit
                .sigma
                .as_ref()
                .map_or(f64::NAN, |s| fit.sigma_hat() * (s[(j, j)] / n as f64).sqrt()),
            certified: loaded.certified.as_ref().map(|c| c.0[j]),
            certified_sd: loaded.certified.as_ref().map(|c| c.1[j]),
        })
        .collect();
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push(format!("fit stopped without converging: {:?}", fit.stop));
    }
    let body = match a.run.format {
        Format::Json => to_json(&json!({
            "config": {
                "command": "fit",
                "model": model_label(&a.model, model.as_ref()),
                "data": path.display().to_string(),
                "start": start,
            },
            "n": n,
            "theta": fit.theta,
            "params": rows,
            "rss": fit.rss,
            "sigma_hat": fit.sigma_hat(),
            "certified_residual_sd": loaded.certified.as_ref().map(|c| c.2),
            "iterations": fit.iters,
            "converged": fit.converged,
            "stop": format!("{:?}", fit.stop),
            "grad_norm": fit.grad_norm,
            "warnings": warnings,
        }))?,
        Format::Csv => {
            let mut s = String::from("param,estimate,std_error,certified,certified_sd\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "theta_{},{},{},{},{}",
                    r.param,
                    fmt_f64(r.estimate),
                    fmt_f64(r.std_error),
                    r.certified.map_or(String::new(), fmt_f64),
                    r.certified_sd.map_or(String::new(), fmt_f64),
                );
            }
            let _ = writeln!(
                s,
                "sigma,{},,{},",
                fmt_f64(fit.sigma_hat()),
                loaded.certified.as_ref().map_or(String::new(), |c| fmt_f64(c.2))
            );
            s
        }
    };
    Ok(Output { body, warnings })
}

fn cmd_recycle(a: &RecycleArgs) -> Result<Output> {
    let model = load_model(&a.model)?;
    let p = model.n_params();
    let seed = a.run.seed;
    let (data, start, source) = match &a.data.data {
        Some(path) => {
            let loaded = load_data(&a.data, path)?;
            let start = start_for(&a.data, &loaded, model.as_ref())?;
            (loaded.data, start, path.display().to_string())
        }
        None => {
            let theta0 = theta0_for(&a.sim, model.as_ref())?;
            let data = observed_dataset(model.as_ref(), &theta0, a.n, a.sim.noise_sd, seed, DESIGN_RANGE)?;
            (data, theta0, "synthetic".to_string())
        }
    };
    let c = Direction::parse(&a.c, p)?;
    let solver = SolverConfig::default();
    let base = base_fit(model.as_ref(), &data, &start, &solver)?;
    let config = RecycleConfig {
        replicates: a.replicates,
        direction: c,
        solver,
        seed,
        workers: workers(&a.run),
    };
    let run = with_workers(config.workers, || {
        recycle_from_base(model.as_ref(), &data, base, &a.scheme, &config)
    })??;

    let mut warnings = Vec::new();
    if run.unreliable() {
        warnings.push(format!(
            "{} of {} replicates excluded; results flagged unreliable",
            run.replicates() - run.usable(),
            run.replicates()
        ));
    }
    let mut intervals = Vec::new();
    for j in 0..p {
        let ci = run
            .with_direction(Direction::axis(p, j)?)
            .and_then(|r| confidence_interval(&r, j, a.level));
        match ci {
            Ok(ci) => intervals.push(Some(ci)),
            Err(e) => {
                warnings.push(format!("no interval for theta_{}: {e}", j + 1));
                intervals.push(None);
            }
        }
    }
    let body = match a.run.format {
        Format::Csv => run_to_csv(&run),
        Format::Json => {
            let echo = json!({
                "command": "recycle",
                "model": model_label(&a.model, model.as_ref()),
                "data": source,
                "n": data.len(),
                "start": start,
                "noise_sd": if a.data.data.is_none() { Some(a.sim.noise_sd) } else { None },
                "scheme": a.scheme.to_string(),
                "B": a.replicates,
                "c": run.direction.as_slice(),
                "level": a.level,
                "seed": seed,
            });
            to_json(&run_to_json(&run, echo, &intervals, &warnings)?)?
        }
    };
    Ok(Output { body, warnings })
}

fn cmd_simdist(a: &SimdistArgs) -> Result<Output> {
    let model = load_model(&a.model)?;
    let theta0 = theta0_for(&a.sim, model.as_ref())?;
    let cfg = SimDistConfig {
        direction: direction(a.c.as_deref(), model.n_params())?,
        theta0,
        n: a.n,
        reps: a.reps,
        noise_sd: a.sim.noise_sd,
        seed: a.run.seed,
        workers: workers(&a.run),
        solver: SolverConfig::default(),
        design_range: DESIGN_RANGE,
    };
    let sim = sampling_distribution_sim(model.as_ref(), &cfg)?;
    let mut warnings = Vec::new();
    if sim.dropped > 0 {
        warnings.push(format!("{} of {} simulated fits failed", sim.dropped, a.reps));
    }
    let body = match a.run.format {
        Format::Csv => {
            let mut s = String::from("index,r,r_stud,sigma_hat\n");
            for (i, ((r, rs), sh)) in sim.raw.iter().zip(&sim.studentized).zip(&sim.sigma_hat).enumerate() {
                let _ = writeln!(s, "{},{},{},{}", i + 1, fmt_f64(*r), fmt_f64(*rs), fmt_f64(*sh));
            }
            s
        }
        Format::Json => {
            let raw = stats::SummaryStats::from_slice(&sim.raw)?;
            let stud = stats::SummaryStats::from_slice(&sim.studentized)?;
            to_json(&json!({
                "config": {
                    "command": "simdist",
                    "model": model_label(&a.model, model.as_ref()),
                    "theta0": cfg.theta0,
                    "n": cfg.n,
                    "reps": cfg.reps,
                    "noise_sd": cfg.noise_sd,
                    "c": cfg.direction.as_slice(),
                    "seed": cfg.seed,
                },
                "summary": {
                    "raw": raw,
                    "studentized": stud,
                    "mean_sigma_hat": stats::SummaryStats::from_slice(&sim.sigma_hat)?.mean,
                    "dropped": sim.dropped,
                },
                "design": sim.design,
                "raw": sim.raw,
                "studentized": sim.studentized,
                "sigma_hat": sim.sigma_hat,
                "warnings": warnings,
            }))?
        }
    };
    Ok(Output { body, warnings })
}

fn cmd_coverage(a: &CoverageArgs) -> Result<Output> {
    let model = load_model(&a.model)?;
    let theta0 = theta0_for(&a.sim, model.as_ref())?;
    let workers = workers(&a.run);
    let mut warnings = Vec::new();
    let mut reports = Vec::new();
    for &n in &a.n {
        for scheme in &a.scheme {
            let cfg = CoverageConfig {
                theta0: theta0.clone(),
                n,
                scheme: *scheme,
                replicates: a.replicates,
                reps: a.reps,
                level: a.level,
                noise_sd: a.sim.noise_sd,
                seed: a.run.seed,
                workers,
                solver: SolverConfig::default(),
                design_range: DESIGN_RANGE,
            };
            match coverage_study(model.as_ref(), &cfg) {
                Ok(r) => {
                    if r.dropped > 0 || r.unreliable_runs > 0 {
                        warnings.push(format!(
                            "n={n} {scheme}: {} reps dropped, {} unreliable",
                            r.dropped, r.unreliable_runs
                        ));
                    }
                    reports.push(r);
                }
                Err(e) => warnings.push(format!("n={n} {scheme}: {e}")),
            }
        }
    }
    if reports.is_empty() {
        return Err(Error::InvalidInput(format!("every coverage cell failed: {}", warnings.join("; "))));
    }
    let body = match a.run.format {
        Format::Csv => {
            let mut s = String::from("n,scheme,param,coverage,mean_length,intervals,reps,dropped,unreliable_runs\n");
            for r in &reports {
                for pc in &r.params {
                    let _ = writeln!(
                        s,
                        "{},{},theta_{},{},{},{},{},{},{}",
                        r.n,
                        r.scheme,
                        pc.param + 1,
                        fmt_f64(pc.coverage),
                        fmt_f64(pc.mean_length),
                        pc.intervals,
                        r.reps,
                        r.dropped,
                        r.unreliable_runs
                    );
                }
            }
            s
        }
        Format::Json => to_json(&json!({
            "config": {
                "command": "coverage",
                "model": model_label(&a.model, model.as_ref()),
                "theta0": theta0,
                "n": a.n,
                "schemes": a.scheme.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                "B": a.replicates,
                "reps": a.reps,
                "level": a.level,
                "noise_sd": a.sim.noise_sd,
                "seed": a.run.seed,
            },
            "cells": reports,
            "warnings": warnings,
        }))?,
    };
    Ok(Output { body, warnings })
}

fn cmd_tables(a: &TablesArgs) -> Result<Output> {
    let model = load_model(&a.model)?;
    let theta0 = theta0_for(&a.sim, model.as_ref())?;
    let c = direction(a.c.as_deref(), model.n_params())?;
    let workers = workers(&a.run);
    let mut warnings = Vec::new();
    let mut cells = Vec::new();
    for &n in &a.n {
        let cell = pivot_table_cell(
            model.as_ref(),
            &theta0,
            n,
            &a.scheme,
            a.replicates,
            a.reps,
            a.sim.noise_sd,
            &c,
            a.run.seed,
            workers,
            &SolverConfig::default(),
        );
        match cell {
            Ok(cell) => {
                for col in std::iter::once(&cell.simulated).chain(&cell.recycled) {
                    if col.excluded > 0 {
                        warnings.push(format!("n={n} {}: {} excluded", col.label, col.excluded));
                    }
                }
                cells.push(cell);
            }
            Err(e) => warnings.push(format!("n={n}: {e}")),
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidInput(format!("every table cell failed: {}", warnings.join("; "))));
    }
    if let Some(path) = &a.samples {
        let mut s = String::from("n,column,index,pivot,normal_quantile\n");
        for cell in &cells {
            for col in std::iter::once(&cell.simulated).chain(&cell.recycled) {
                let mut sorted = col.sample.clone();
                sorted.sort_by(f64::total_cmp);
                let m = sorted.len() as f64;
                for (i, v) in sorted.iter().enumerate() {
                    let z = stats::normal_quantile((i as f64 + 0.5) / m)?;
                    let _ = writeln!(s, "{},{},{},{},{}", cell.n, col.label, i + 1, fmt_f64(*v), fmt_f64(z));
                }
            }
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))?;
    }
    let body = match a.run.format {
        Format::Csv => {
            let mut s = String::from("n,column,count,mean,sd,mean_sigma,excluded\n");
            for cell in &cells {
                for col in std::iter::once(&cell.simulated).chain(&cell.recycled) {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{}",
                        cell.n,
                        col.label,
                        col.pivots.n,
                        fmt_f64(col.pivots.mean),
                        fmt_f64(col.pivots.sd),
                        fmt_f64(col.mean_sigma),
                        col.excluded
                    );
                }
            }
            s
        }
        Format::Json => to_json(&json!({
            "config": {
                "command": "tables",
                "model": model_label(&a.model, model.as_ref()),
                "theta0": theta0,
                "n": a.n,
                "schemes": a.scheme.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                "B": a.replicates,
                "reps": a.reps,
                "noise_sd": a.sim.noise_sd,
                "c": c.as_slice(),
                "seed": a.run.seed,
            },
            "cells": cells,
            "warnings": warnings,
        }))?,
    };
    Ok(Output { body, warnings })
}

/// Summary of the studentized recycled pivots used in JSON output.
pub(crate) fn pivot_summary(run: &recycler::RecycleRun) -> Result<Value> {
    let stud = run.pivot_sample(Pivot::Studentized);
    let raw = run.pivot_sample(Pivot::Raw);
    Ok(json!({
        "r_star": stats::SummaryStats::from_slice(&raw)?,
        "r_star_stud": stats::SummaryStats::from_slice(&stud)?,
        "ks_stud_vs_normal": stats::ks_vs_normal(&stud, 0.0, 1.0)?,
    }))
}
