//! Monte-Carlo studies: the simulated sampling distribution of the pivot,
//! coverage of recycled intervals, and the per-(n, scheme) summaries behind
//! the pivot tables.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    base_fit, confidence_interval, pivot_r, recycle_from_base, with_workers, CiResult, Direction,
    Pivot, RecycleConfig,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::RegressionModel;
use crate::stats::SummaryStats;
use crate::weights::{derive_seed, RngStream, WeightScheme};
use crate::wls::{self, SolverConfig};

const DESIGN_TAG: u64 = 1;
const NOISE_TAG: u64 = 2;
const RECYCLE_TAG: u64 = 3;
const OBSERVED_TAG: u64 = 4;

/// `n` design points drawn uniformly on `[lo, hi]`.
pub fn uniform_design(n: usize, lo: f64, hi: f64, stream: RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

/// `y_i = f(x_i; θ₀) + ε_i` with `ε_i ~ N(0, noise_sd²)`.
pub fn simulate_dataset(
    model: &(impl RegressionModel + ?Sized),
    x: &[f64],
    theta0: &[f64],
    noise_sd: f64,
    stream: RngStream,
) -> Result<Dataset> {
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidInput(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    let mut rng = stream.rng();
    let y = x
        .iter()
        .map(|&xi| {
            let eps: f64 = rng.sample(StandardNormal);
            Ok(model.eval(xi, theta0)? + noise_sd * eps)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(x.to_vec(), y)
}

#[derive(Debug, Clone)]
pub struct SimDistConfig {
    pub theta0: Vec<f64>,
    pub n: usize,
    pub direction: Direction,
    pub reps: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub workers: usize,
    pub solver: SolverConfig,
    pub design_range: (f64, f64),
}

/// Simulated sampling distribution of `R` under a fixed design.
#[derive(Debug, Clone, Serialize)]
pub struct SimDistribution {
    pub design: Vec<f64>,
    /// `R` per successful rep, in rep order.
    pub raw: Vec<f64>,
    /// `R / σ̂` with the rep's own σ̂.
    pub studentized: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub dropped: usize,
}

fn check_sim_inputs(
    model: &(impl RegressionModel + ?Sized),
    theta0: &[f64],
    n: usize,
    reps: usize,
    c: &Direction,
) -> Result<()> {
    crate::models::check_theta(model, theta0)?;
    if n <= model.n_params() {
        return Err(Error::InvalidInput(format!(
            "n = {n} must exceed p = {}",
            model.n_params()
        )));
    }
    if reps < 1 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    if c.dim() != model.n_params() {
        return Err(Error::DimensionMismatch {
            what: "direction",
            expected: model.n_params(),
            found: c.dim(),
        });
    }
    Ok(())
}

fn fixed_design(cfg_seed: u64, n: usize, range: (f64, f64)) -> Vec<f64> {
    uniform_design(n, range.0, range.1, RngStream::new(derive_seed(cfg_seed, DESIGN_TAG), 0))
}

/// The single "observed" dataset tied to `seed`: it shares its design with
/// [`sampling_distribution_sim`] under the same seed and draws independent noise.
pub fn observed_dataset(
    model: &(impl RegressionModel + ?Sized),
    theta0: &[f64],
    n: usize,
    noise_sd: f64,
    seed: u64,
    design_range: (f64, f64),
) -> Result<Dataset> {
    crate::models::check_theta(model, theta0)?;
    let x = fixed_design(seed, n, design_range);
    simulate_dataset(model, &x, theta0, noise_sd, RngStream::new(derive_seed(seed, OBSERVED_TAG), 0))
}

/// Draws one design from `seed`, then `reps` fresh noise vectors; fits each
/// dataset from θ₀ and returns `R` with `θ_ref = θ₀`. Failed fits are dropped.
pub fn sampling_distribution_sim(
    model: &(impl RegressionModel + ?Sized),
    cfg: &SimDistConfig,
) -> Result<SimDistribution> {
    check_sim_inputs(model, &cfg.theta0, cfg.n, cfg.reps, &cfg.direction)?;
    let design = fixed_design(cfg.seed, cfg.n, cfg.design_range);
    let noise_seed = derive_seed(cfg.seed, NOISE_TAG);
    let outcomes: Vec<Option<(f64, f64)>> = with_workers(cfg.workers, || {
        (0..cfg.reps as u64)
            .into_par_iter()
            .map(|r| {
                let data =
                    simulate_dataset(model, &design, &cfg.theta0, cfg.noise_sd, RngStream::new(noise_seed, r)).ok()?;
                let fit = wls::fit(model, &data, &vec![1.0; cfg.n], &cfg.theta0, &cfg.solver).ok()?;
                if !fit.converged {
                    return None;
                }
                let r = pivot_r(model, &data, &fit.theta, &cfg.theta0, &cfg.direction).ok()?;
                Some((r, fit.sigma_hat()))
            })
            .collect()
    })?;
    let mut out = SimDistribution {
        design,
        raw: Vec::new(),
        studentized: Vec::new(),
        sigma_hat: Vec::new(),
        dropped: 0,
    };
    for o in outcomes {
        match o {
            Some((r, s)) => {
                out.raw.push(r);
                out.studentized.push(super::studentize(r, s));
                out.sigma_hat.push(s);
            }
            None => out.dropped += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CoverageConfig {
    pub theta0: Vec<f64>,
    pub n: usize,
    pub scheme: WeightScheme,
    pub replicates: usize,
    pub reps: usize,
    pub level: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub workers: usize,
    pub solver: SolverConfig,
    pub design_range: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct RepOutcome {
    pub rep: usize,
    /// `None` when the base fit failed and the rep was dropped.
    pub theta_hat: Option<Vec<f64>>,
    pub intervals: Vec<Option<CiResult>>,
    pub unreliable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamCoverage {
    pub param: usize,
    pub intervals: usize,
    pub coverage: f64,
    pub mean_length: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub scheme: String,
    pub n: usize,
    pub level: f64,
    pub reps: usize,
    pub dropped: usize,
    pub unreliable_runs: usize,
    pub params: Vec<ParamCoverage>,
    pub outcomes: Vec<RepOutcome>,
}

/// Coverage of bootstrap-t intervals for every θ_j over `reps` simulated
/// datasets, each with its own uniform design.
pub fn coverage_study(
    model: &(impl RegressionModel + ?Sized),
    cfg: &CoverageConfig,
) -> Result<CoverageReport> {
    let p = model.n_params();
    check_sim_inputs(model, &cfg.theta0, cfg.n, cfg.reps, &Direction::axis(p, 0)?)?;
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::InvalidInput(format!("level must be in (0, 1), got {}", cfg.level)));
    }
    if cfg.replicates < 1 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    let design_seed = derive_seed(cfg.seed, DESIGN_TAG);
    let noise_seed = derive_seed(cfg.seed, NOISE_TAG);
    let recycle_seed = derive_seed(cfg.seed, RECYCLE_TAG);

    let outcomes: Vec<RepOutcome> = with_workers(cfg.workers, || {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let dropped = RepOutcome {
                    rep,
                    theta_hat: None,
                    intervals: vec![None; p],
                    unreliable: false,
                };
                let x = uniform_design(cfg.n, cfg.design_range.0, cfg.design_range.1, RngStream::new(design_seed, rep as u64));
                let Ok(data) = simulate_dataset(model, &x, &cfg.theta0, cfg.noise_sd, RngStream::new(noise_seed, rep as u64)) else {
                    return dropped;
                };
                let Ok(base) = base_fit(model, &data, &cfg.theta0, &cfg.solver) else {
                    return dropped;
                };
                let rc = RecycleConfig {
                    replicates: cfg.replicates,
                    direction: Direction::axis(p, 0).expect("p >= 1"),
                    solver: cfg.solver.clone(),
                    seed: derive_seed(recycle_seed, rep as u64),
                    workers: 1,
                };
                let Ok(run) = recycle_from_base(model, &data, base, &cfg.scheme, &rc) else {
                    return dropped;
                };
                let intervals = (0..p)
                    .map(|j| {
                        let run_j = run.with_direction(Direction::axis(p, j).ok()?).ok()?;
                        let mut ci = confidence_interval(&run_j, j, cfg.level).ok()?;
                        ci.covered = Some(ci.contains(cfg.theta0[j]));
                        Some(ci)
                    })
                    .collect();
                RepOutcome {
                    rep,
                    theta_hat: Some(run.base.theta.clone()),
                    intervals,
                    unreliable: run.unreliable(),
                }
            })
            .collect()
    })?;

    let params = (0..p)
        .map(|j| {
            let cis: Vec<&CiResult> = outcomes.iter().filter_map(|o| o.intervals[j].as_ref()).collect();
            let k = cis.len();
            let covered = cis.iter().filter(|c| c.covered == Some(true)).count();
            let mean_length = cis.iter().map(|c| c.length()).sum::<f64>() / k as f64;
            ParamCoverage {
                param: j,
                intervals: k,
                coverage: covered as f64 / k as f64,
                mean_length,
            }
        })
        .collect();
    Ok(CoverageReport {
        scheme: cfg.scheme.to_string(),
        n: cfg.n,
        level: cfg.level,
        reps: cfg.reps,
        dropped: outcomes.iter().filter(|o| o.theta_hat.is_none()).count(),
        unreliable_runs: outcomes.iter().filter(|o| o.unreliable).count(),
        params,
        outcomes,
    })
}

/// Mean, SD and mean σ̂ of one column of a pivot table.
#[derive(Debug, Clone, Serialize)]
pub struct PivotColumn {
    pub label: String,
    pub pivots: SummaryStats,
    pub mean_sigma: f64,
    pub excluded: usize,
    /// Studentized pivot values (sorted for recycled columns, rep order for
    /// the simulated column).
    #[serde(skip)]
    pub sample: Vec<f64>,
}

/// One sample-size row of a pivot table: the simulated distribution of
/// `R/σ̂` plus the recycled distribution of `R*/σ̂_n` per weight scheme.
#[derive(Debug, Clone, Serialize)]
pub struct PivotTableCell {
    pub n: usize,
    pub simulated: PivotColumn,
    pub recycled: Vec<PivotColumn>,
}

/// Builds one row: `sim_reps` simulated datasets on a fixed design, and one
/// observed dataset on the same design recycled `replicates` times per scheme.
#[allow(clippy::too_many_arguments)]
pub fn pivot_table_cell(
    model: &(impl RegressionModel + ?Sized),
    theta0: &[f64],
    n: usize,
    schemes: &[WeightScheme],
    replicates: usize,
    sim_reps: usize,
    noise_sd: f64,
    direction: &Direction,
    seed: u64,
    workers: usize,
    solver: &SolverConfig,
) -> Result<PivotTableCell> {
    let sim_cfg = SimDistConfig {
        theta0: theta0.to_vec(),
        n,
        direction: direction.clone(),
        reps: sim_reps,
        noise_sd,
        seed,
        workers,
        solver: solver.clone(),
        design_range: (0.0, 10.0),
    };
    let sim = sampling_distribution_sim(model, &sim_cfg)?;
    let simulated = PivotColumn {
        label: "simulated".into(),
        pivots: SummaryStats::from_slice(&sim.studentized)?,
        mean_sigma: SummaryStats::from_slice(&sim.sigma_hat)?.mean,
        excluded: sim.dropped,
        sample: sim.studentized.clone(),
    };
    let observed = observed_dataset(model, theta0, n, noise_sd, seed, sim_cfg.design_range)?;
    let base = base_fit(model, &observed, theta0, solver)?;
    let recycle_seed = derive_seed(seed, RECYCLE_TAG);
    let recycled = with_workers(workers, || {
        schemes
            .iter()
            .enumerate()
            .map(|(k, scheme)| {
                let rc = RecycleConfig {
                    replicates,
                    direction: direction.clone(),
                    solver: solver.clone(),
                    seed: derive_seed(recycle_seed, k as u64),
                    workers,
                };
                let run = recycle_from_base(model, &observed, base.clone(), scheme, &rc)?;
                let sample = run.pivot_sample(Pivot::Studentized);
                Ok(PivotColumn {
                    label: scheme.to_string(),
                    pivots: SummaryStats::from_slice(&sample)?,
                    mean_sigma: run.sigma_star_summary()?.mean,
                    excluded: run.replicates() - run.usable(),
                    sample,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(PivotTableCell {
        n,
        simulated,
        recycled,
    })
}
