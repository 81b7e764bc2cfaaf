//! The recycling procedure: refit under B random weight vectors, form the
//! recycled pivots and invert their distribution into confidence intervals.

mod simulation;

pub use simulation::{
    coverage_study, observed_dataset, pivot_table_cell, sampling_distribution_sim, simulate_dataset, uniform_design,
    CoverageConfig, CoverageReport, ParamCoverage, PivotColumn, PivotTableCell, RepOutcome,
    SimDistConfig, SimDistribution,
};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::RegressionModel;
use crate::stats::{self, SummaryStats};
use crate::weights::{RngStream, WeightSource, WeightVector};
use crate::wls::{self, FitResult, SolverConfig};

/// Minimum number of usable replicates for an interval.
pub const MIN_CI_REPLICATES: usize = 50;

/// Fraction of excluded replicates above which a run is flagged unreliable.
pub const UNRELIABLE_FRACTION: f64 = 0.05;

/// A unit vector `c` selecting the linear combination `cᵀθ` under study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Requires `‖c‖₂ = 1` to within 1e-12.
    pub fn new(c: Vec<f64>) -> Result<Self> {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if c.is_empty() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "direction must have unit norm, got {norm}"
            )));
        }
        Ok(Self(c))
    }

    pub fn normalized(c: Vec<f64>) -> Result<Self> {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("direction must be nonzero".into()));
        }
        Ok(Self(c.into_iter().map(|v| v / norm).collect()))
    }

    /// The coordinate vector `e_j` (zero-based `j`).
    pub fn axis(p: usize, j: usize) -> Result<Self> {
        if j >= p {
            return Err(Error::InvalidInput(format!("axis {j} out of range for p = {p}")));
        }
        let mut c = vec![0.0; p];
        c[j] = 1.0;
        Ok(Self(c))
    }

    /// Zero-based coordinate index if this is exactly an axis direction.
    pub fn axis_index(&self) -> Option<usize> {
        let mut idx = None;
        for (j, &v) in self.0.iter().enumerate() {
            if v == 1.0 && idx.is_none() {
                idx = Some(j);
            } else if v != 0.0 {
                return None;
            }
        }
        idx
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    fn quad(&self, m: &DMatrix<f64>) -> f64 {
        let p = self.0.len();
        let mut s = 0.0;
        for j in 0..p {
            for k in 0..p {
                s += self.0[j] * m[(j, k)] * self.0[k];
            }
        }
        s
    }

    /// Parses `e<j>` (one-based) or a comma list, which is normalized.
    pub fn parse(s: &str, p: usize) -> Result<Self> {
        let s = s.trim();
        if let Some(j) = s.strip_prefix('e').or_else(|| s.strip_prefix('E')) {
            let j: usize = j
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad axis direction `{s}`")))?;
            if j == 0 {
                return Err(Error::InvalidInput("axis directions are one-based".into()));
            }
            return Self::axis(p, j - 1);
        }
        let c = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad direction component `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if c.len() != p {
            return Err(Error::DimensionMismatch {
                what: "direction",
                expected: p,
                found: c.len(),
            });
        }
        Self::normalized(c)
    }
}

/// `cᵀ Σ c` with a positivity check.
fn direction_variance(c: &Direction, sigma: &DMatrix<f64>) -> Result<f64> {
    if sigma.nrows() != c.dim() {
        return Err(Error::DimensionMismatch {
            what: "direction",
            expected: sigma.nrows(),
            found: c.dim(),
        });
    }
    let v = c.quad(sigma);
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::NonPositiveVariance(v));
    }
    Ok(v)
}

/// `R = √n cᵀ(θ̂ − θ_ref) / √(cᵀ Σ_n(θ_ref) c)`, with Σ_n evaluated at `theta_ref`.
pub fn pivot_r(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    theta_hat: &[f64],
    theta_ref: &[f64],
    c: &Direction,
) -> Result<f64> {
    let info = wls::sigma_n_inv(model, data, theta_ref)?;
    let sigma = wls::invert_spd(&info).ok_or(Error::NonPositiveVariance(0.0))?;
    pivot_with_sigma(theta_hat, theta_ref, &sigma, c, data.len())
}

fn pivot_with_sigma(
    theta: &[f64],
    center: &[f64],
    sigma: &DMatrix<f64>,
    c: &Direction,
    n: usize,
) -> Result<f64> {
    let v = direction_variance(c, sigma)?;
    let diff: Vec<f64> = theta.iter().zip(center).map(|(a, b)| a - b).collect();
    Ok((n as f64).sqrt() * c.dot(&diff) / v.sqrt())
}

/// `R* = √n cᵀ(θ̂* − θ̂) / (τ_n √(cᵀ Σ_n(θ̂) c))`.
pub fn pivot_r_star(base: &FitResult, theta_star: &[f64], tau: f64, c: &Direction) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let sigma = base.sigma.as_ref().ok_or(Error::NonPositiveVariance(0.0))?;
    Ok(pivot_with_sigma(theta_star, &base.theta, sigma, c, base.n)? / tau)
}

/// `R* / σ̂_n`. A zero σ̂_n (exact fit) maps a zero pivot to zero.
fn studentize(r_star: f64, sigma_hat: f64) -> f64 {
    if sigma_hat > 0.0 {
        r_star / sigma_hat
    } else if r_star == 0.0 {
        0.0
    } else {
        f64::NAN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicateStatus {
    Converged,
    NotConverged,
    /// Fewer than p positive weights, or τ_n = 0.
    Degenerate,
    /// The weighted fit raised an error (domain exit or singular system).
    Failed,
}

impl fmt::Display for ReplicateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::NotConverged => "not_converged",
            Self::Degenerate => "degenerate",
            Self::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pivot {
    Raw,
    Studentized,
}

impl FromStr for Pivot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "studentized" | "stud" => Ok(Self::Studentized),
            _ => Err(Error::InvalidInput(format!("unknown pivot `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecycleConfig {
    pub replicates: usize,
    pub direction: Direction,
    pub solver: SolverConfig,
    pub seed: u64,
    pub workers: usize,
}

/// B recycled replicates around one base fit.
#[derive(Debug, Clone)]
pub struct RecycleRun {
    pub scheme: String,
    pub base: FitResult,
    pub tau: f64,
    pub direction: Direction,
    pub seed: u64,
    /// B rows of θ̂*ᵇ; NaN rows for degenerate or failed replicates.
    pub theta_star: Vec<Vec<f64>>,
    /// `√(Q_n(θ̂*ᵇ) / (n − p))`
    pub sigma_star: Vec<f64>,
    pub r_star: Vec<f64>,
    pub r_star_stud: Vec<f64>,
    pub flags: Vec<ReplicateStatus>,
}

impl RecycleRun {
    pub fn replicates(&self) -> usize {
        self.flags.len()
    }

    pub fn usable(&self) -> usize {
        self.flags
            .iter()
            .filter(|f| **f == ReplicateStatus::Converged)
            .count()
    }

    pub fn unreliable(&self) -> bool {
        let excluded = self.replicates() - self.usable();
        excluded as f64 > UNRELIABLE_FRACTION * self.replicates() as f64
    }

    /// Pivot values of converged replicates, sorted ascending.
    pub fn pivot_sample(&self, pivot: Pivot) -> Vec<f64> {
        let col = match pivot {
            Pivot::Raw => &self.r_star,
            Pivot::Studentized => &self.r_star_stud,
        };
        let mut v: Vec<f64> = col
            .iter()
            .zip(&self.flags)
            .filter(|(r, f)| **f == ReplicateStatus::Converged && r.is_finite())
            .map(|(r, _)| *r)
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `F̂*_B(t) = (1/B) Σ I[R*ᵇ ≤ t]` over converged replicates.
    pub fn recycled_cdf(&self, t: f64, pivot: Pivot) -> f64 {
        stats::ecdf(&self.pivot_sample(pivot), t)
    }

    /// Values of one column of θ̂* over converged replicates.
    pub fn theta_star_column(&self, j: usize) -> Vec<f64> {
        self.theta_star
            .iter()
            .zip(&self.flags)
            .filter(|(_, f)| **f == ReplicateStatus::Converged)
            .map(|(t, _)| t[j])
            .collect()
    }

    pub fn theta_star_summary(&self, j: usize) -> Result<SummaryStats> {
        SummaryStats::from_slice(&self.theta_star_column(j))
    }

    pub fn sigma_star_summary(&self) -> Result<SummaryStats> {
        let v: Vec<f64> = self
            .sigma_star
            .iter()
            .zip(&self.flags)
            .filter(|(_, f)| **f == ReplicateStatus::Converged)
            .map(|(s, _)| *s)
            .collect();
        SummaryStats::from_slice(&v)
    }

    /// Recomputes the pivots for another direction from the stored θ̂* rows.
    /// The replicate fits do not depend on `c`, so no refitting is needed.
    pub fn with_direction(&self, c: Direction) -> Result<Self> {
        let sigma_hat = self.base.sigma_hat();
        let mut r_star = Vec::with_capacity(self.replicates());
        let mut r_stud = Vec::with_capacity(self.replicates());
        for (theta, flag) in self.theta_star.iter().zip(&self.flags) {
            let r = match flag {
                ReplicateStatus::Converged | ReplicateStatus::NotConverged => {
                    pivot_r_star(&self.base, theta, self.tau, &c)?
                }
                _ => f64::NAN,
            };
            r_star.push(r);
            r_stud.push(studentize(r, sigma_hat));
        }
        Ok(Self {
            direction: c,
            r_star,
            r_star_stud: r_stud,
            ..self.clone()
        })
    }
}

/// One weighted refit started from the base estimate.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub theta: Vec<f64>,
    pub sigma: f64,
    pub r_star: f64,
    pub r_star_stud: f64,
    pub status: ReplicateStatus,
}

pub fn replicate_with_weights(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    base: &FitResult,
    weights: &WeightVector,
    c: &Direction,
    solver: &SolverConfig,
) -> Replicate {
    let failed = |status| Replicate {
        theta: vec![f64::NAN; base.n_params()],
        sigma: f64::NAN,
        r_star: f64::NAN,
        r_star_stud: f64::NAN,
        status,
    };
    if weights.is_degenerate() {
        return failed(ReplicateStatus::Degenerate);
    }
    match wls::fit(model, data, &weights.w, &base.theta, solver) {
        Ok(fit) => {
            let r_star = match pivot_r_star(base, &fit.theta, weights.tau, c) {
                Ok(r) => r,
                Err(_) => return failed(ReplicateStatus::Failed),
            };
            Replicate {
                sigma: fit.sigma_hat(),
                r_star,
                r_star_stud: studentize(r_star, base.sigma_hat()),
                status: if fit.converged {
                    ReplicateStatus::Converged
                } else {
                    ReplicateStatus::NotConverged
                },
                theta: fit.theta,
            }
        }
        Err(Error::Degenerate { .. }) => failed(ReplicateStatus::Degenerate),
        Err(_) => failed(ReplicateStatus::Failed),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Err(Error::InvalidInput("workers must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Fits the unit-weight estimate and checks it is usable as a recycling base.
pub fn base_fit(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    theta_start: &[f64],
    solver: &SolverConfig,
) -> Result<FitResult> {
    let base = wls::fit(model, data, &vec![1.0; data.len()], theta_start, solver)?;
    if !base.converged {
        return Err(Error::BaseFitNotConverged(format!("{:?}", base.stop)));
    }
    if base.sigma.is_none() {
        return Err(Error::NonPositiveVariance(0.0));
    }
    Ok(base)
}

/// Fits the data, then draws B weight vectors on streams `1..=B` of
/// `config.seed` and refits each one from the base estimate.
pub fn run_recycle<S: WeightSource + ?Sized>(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    theta_start: &[f64],
    source: &S,
    config: &RecycleConfig,
) -> Result<RecycleRun> {
    let base = base_fit(model, data, theta_start, &config.solver)?;
    with_workers(config.workers, || recycle_from_base(model, data, base, source, config))?
}

/// Same as [`run_recycle`] with a precomputed base fit, on the current pool.
pub fn recycle_from_base<S: WeightSource + ?Sized>(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    base: FitResult,
    source: &S,
    config: &RecycleConfig,
) -> Result<RecycleRun> {
    if config.replicates < 1 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    if config.direction.dim() != base.n_params() {
        return Err(Error::DimensionMismatch {
            what: "direction",
            expected: base.n_params(),
            found: config.direction.dim(),
        });
    }
    base.sigma.as_ref().ok_or(Error::NonPositiveVariance(0.0))?;
    let n = data.len();
    let results: Vec<(f64, Replicate)> = (1..=config.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let wv = source.draw(n, RngStream::new(config.seed, b));
            let rep = replicate_with_weights(model, data, &base, &wv, &config.direction, &config.solver);
            (wv.tau, rep)
        })
        .collect();
    let tau = results.first().map(|(t, _)| *t).unwrap_or(f64::NAN);
    let mut run = RecycleRun {
        scheme: source.label(),
        base,
        tau,
        direction: config.direction.clone(),
        seed: config.seed,
        theta_star: Vec::with_capacity(results.len()),
        sigma_star: Vec::with_capacity(results.len()),
        r_star: Vec::with_capacity(results.len()),
        r_star_stud: Vec::with_capacity(results.len()),
        flags: Vec::with_capacity(results.len()),
    };
    for (_, rep) in results {
        run.theta_star.push(rep.theta);
        run.sigma_star.push(rep.sigma);
        run.r_star.push(rep.r_star);
        run.r_star_stud.push(rep.r_star_stud);
        run.flags.push(rep.status);
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiResult {
    /// Zero-based parameter index.
    pub param: usize,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covered: Option<bool>,
}

impl CiResult {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Inverts a sorted sample of studentized pivots around `center`:
/// `[center − q_U·scale, center − q_L·scale]`.
pub fn bootstrap_t_interval(
    center: f64,
    scale: f64,
    sorted_pivots: &[f64],
    level: f64,
) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level must be in (0, 1), got {level}")));
    }
    let q_lo = stats::quantile(sorted_pivots, (1.0 - level) / 2.0)?;
    let q_hi = stats::quantile(sorted_pivots, (1.0 + level) / 2.0)?;
    Ok((center - q_hi * scale, center - q_lo * scale))
}

/// Bootstrap-t interval for θ_j from a run made with `c = e_j`.
pub fn confidence_interval(run: &RecycleRun, j: usize, level: f64) -> Result<CiResult> {
    if run.direction.axis_index() != Some(j) {
        return Err(Error::InvalidInput(format!(
            "run direction is not the axis e_{}",
            j + 1
        )));
    }
    let pivots = run.pivot_sample(Pivot::Studentized);
    if pivots.len() < MIN_CI_REPLICATES {
        return Err(Error::TooFewReplicates {
            found: pivots.len(),
            required: MIN_CI_REPLICATES,
        });
    }
    let base = &run.base;
    let sigma = base.sigma.as_ref().ok_or(Error::NonPositiveVariance(0.0))?;
    let scale = base.sigma_hat() * (sigma[(j, j)] / base.n as f64).sqrt();
    let (lower, upper) = bootstrap_t_interval(base.theta[j], scale, &pivots, level)?;
    Ok(CiResult {
        param: j,
        level,
        lower,
        upper,
        method: "bootstrap-t",
        covered: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ExpDecayModel, LinearModel};
    use crate::weights::{FixedWeights, WeightScheme};

    #[test]
    fn direction_validation() {
        assert!(Direction::new(vec![1.0, 1.0]).is_err());
        let c = Direction::normalized(vec![1.0, 1.0]).unwrap();
        assert!((c.as_slice()[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(Direction::parse("e2", 2).unwrap().axis_index(), Some(1));
        assert_eq!(Direction::parse("3,4", 2).unwrap().as_slice(), &[0.6, 0.8]);
        assert!(Direction::parse("e3", 2).is_err());
        assert!(Direction::parse("e0", 2).is_err());
        assert!(Direction::parse("1,2,3", 2).is_err());
        assert!(Direction::normalized(vec![0.0, 0.0]).is_err());
        assert_eq!(Direction::normalized(vec![1.0, 1.0]).unwrap().axis_index(), None);
    }

    fn unit_design_fit(theta_hat: f64) -> (Dataset, FitResult) {
        // f = θx on x = (1,1,1,1): Σ_n = 1
        let d = Dataset::new(vec![1.0; 4], vec![theta_hat; 4]).unwrap();
        let r = wls::fit(&LinearModel, &d, &[1.0; 4], &[theta_hat], &SolverConfig::default()).unwrap();
        (d, r)
    }

    #[test]
    fn pivot_r_examples() {
        let (d, base) = unit_design_fit(2.5);
        assert_eq!(base.theta, vec![2.5]);
        let c = Direction::axis(1, 0).unwrap();
        let r = pivot_r(&LinearModel, &d, &base.theta, &[2.0], &c).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(pivot_r(&LinearModel, &d, &[2.0], &[2.0], &c).unwrap(), 0.0);
    }

    #[test]
    fn pivot_r_star_examples() {
        let (d, base) = unit_design_fit(2.0);
        let c = Direction::axis(1, 0).unwrap();
        assert!((pivot_r_star(&base, &[2.5], 1.0, &c).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(pivot_r_star(&base, &base.theta, 0.7, &c).unwrap(), 0.0);
        assert!(matches!(
            pivot_r_star(&base, &[2.5], 0.0, &c),
            Err(Error::DegenerateWeights)
        ));
        // identity with pivot_r centred at θ̂
        let tau = 0.8;
        let via_r = pivot_r(&LinearModel, &d, &[2.3], &base.theta, &c).unwrap() / tau;
        let r_star = pivot_r_star(&base, &[2.3], tau, &c).unwrap();
        assert!((via_r - r_star).abs() < 1e-12);
    }

    #[test]
    fn non_positive_variance() {
        let d = Dataset::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let c = Direction::axis(1, 0).unwrap();
        assert!(matches!(
            pivot_r(&LinearModel, &d, &[1.0], &[0.0], &c),
            Err(Error::NonPositiveVariance(_))
        ));
    }

    fn noisy_model1(n: usize) -> Dataset {
        let x: Vec<f64> = (0..n).map(|i| 10.0 * (i as f64 + 0.5) / n as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| ExpDecayModel.eval(xi, &[2.0, 0.04]).unwrap() + 0.25 * ((i * 7919 % 13) as f64 / 6.0 - 1.0))
            .collect();
        Dataset::new(x, y).unwrap()
    }

    fn config(b: usize, c: Direction, workers: usize) -> RecycleConfig {
        RecycleConfig {
            replicates: b,
            direction: c,
            solver: SolverConfig::default(),
            seed: 77,
            workers,
        }
    }

    #[test]
    fn unit_weights_give_zero_pivot() {
        let d = noisy_model1(40);
        let src = FixedWeights { w: vec![1.0; 40], tau: 1.0 };
        let c = Direction::normalized(vec![1.0, 1.0]).unwrap();
        let run = run_recycle(&ExpDecayModel, &d, &[2.0, 0.04], &src, &config(1, c, 1)).unwrap();
        assert_eq!(run.flags, vec![ReplicateStatus::Converged]);
        assert!(run.r_star[0].abs() < 1e-8);
    }

    #[test]
    fn run_is_worker_count_invariant() {
        let d = noisy_model1(30);
        let c = Direction::normalized(vec![1.0, 1.0]).unwrap();
        let scheme = WeightScheme::Multinomial;
        let a = run_recycle(&ExpDecayModel, &d, &[2.0, 0.04], &scheme, &config(64, c.clone(), 1)).unwrap();
        let b = run_recycle(&ExpDecayModel, &d, &[2.0, 0.04], &scheme, &config(64, c, 4)).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.r_star), bits(&b.r_star));
        assert_eq!(a.flags, b.flags);
    }

    #[test]
    fn recycled_cdf_limits() {
        let d = noisy_model1(30);
        let run = run_recycle(
            &ExpDecayModel,
            &d,
            &[2.0, 0.04],
            &WeightScheme::Exponential,
            &config(100, Direction::axis(2, 0).unwrap(), 2),
        )
        .unwrap();
        let s = run.pivot_sample(Pivot::Raw);
        assert_eq!(run.recycled_cdf(s[0] - 1.0, Pivot::Raw), 0.0);
        assert_eq!(run.recycled_cdf(*s.last().unwrap(), Pivot::Raw), 1.0);
    }

    #[test]
    fn with_direction_matches_fresh_run() {
        let d = noisy_model1(30);
        let scheme = WeightScheme::Dirichlet { alpha: 1.0 };
        let e2 = Direction::axis(2, 1).unwrap();
        let run1 = run_recycle(&ExpDecayModel, &d, &[2.0, 0.04], &scheme, &config(20, Direction::axis(2, 0).unwrap(), 1)).unwrap();
        let run2 = run_recycle(&ExpDecayModel, &d, &[2.0, 0.04], &scheme, &config(20, e2.clone(), 1)).unwrap();
        let switched = run1.with_direction(e2).unwrap();
        assert_eq!(switched.r_star, run2.r_star);
    }

    #[test]
    fn interval_shapes() {
        let zeros = vec![0.0; 60];
        assert_eq!(bootstrap_t_interval(1.5, 0.3, &zeros, 0.95).unwrap(), (1.5, 1.5));
        let sym: Vec<f64> = (-30..=30).map(|i| i as f64 / 10.0).collect();
        let (lo, hi) = bootstrap_t_interval(1.5, 0.3, &sym, 0.9).unwrap();
        assert!(((hi - 1.5) - (1.5 - lo)).abs() < 1e-12);
        assert!(bootstrap_t_interval(0.0, 1.0, &sym, 1.0).is_err());
    }

    #[test]
    fn interval_requires_axis_and_enough_replicates() {
        let d = noisy_model1(30);
        let scheme = WeightScheme::Multinomial;
        let run = run_recycle(&ExpDecayModel, &d, &[2.0, 0.04], &scheme, &config(20, Direction::axis(2, 0).unwrap(), 1)).unwrap();
        assert!(matches!(
            confidence_interval(&run, 0, 0.95),
            Err(Error::TooFewReplicates { .. })
        ));
        assert!(confidence_interval(&run, 1, 0.95).is_err());
        let run = run_recycle(&ExpDecayModel, &d, &[2.0, 0.04], &scheme, &config(200, Direction::axis(2, 0).unwrap(), 2)).unwrap();
        let ci = confidence_interval(&run, 0, 0.95).unwrap();
        assert!(ci.lower < run.base.theta[0] && run.base.theta[0] < ci.upper);
    }
}
