//! Weighted nonlinear least squares.
//!
//! Minimizes `Q(θ) = Σ w_i (y_i − f(x_i; θ))²` by Levenberg–Marquardt on the
//! weighted Gauss–Newton normal equations
//! `(JᵀWJ + λ diag(JᵀWJ)) δ = JᵀW r`, with `r = y − f`. With unit weights this
//! is the ordinary least-squares estimator; with random weights it is one
//! recycled replicate.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::PivotedCholesky;
use crate::models::{check_theta, ParamBox, RegressionModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when `‖∇Q‖∞ ≤ grad_tol (1 + |Q|)`.
    pub grad_tol: f64,
    /// Stop when every accepted step satisfies `|δ_j| ≤ step_tol (|θ_j| + step_tol)`.
    pub step_tol: f64,
    /// Stop when an accepted step lowers Q by at most `q_rel_tol × Q`.
    pub q_rel_tol: f64,
    pub damping_init: f64,
    pub damping_factor: f64,
    pub damping_min: f64,
    pub damping_max: f64,
    /// Keep the objective value after every accepted step in `FitResult::trace`.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-8,
            step_tol: 1e-10,
            q_rel_tol: 1e-12,
            damping_init: 1e-3,
            damping_factor: 10.0,
            damping_min: 1e-12,
            damping_max: 1e12,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.grad_tol,
            self.step_tol,
            self.q_rel_tol,
            self.damping_init,
            self.damping_min,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput("solver tolerances must be > 0".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        if !(self.damping_factor > 1.0) {
            return Err(Error::InvalidInput("damping_factor must be > 1".into()));
        }
        if !(self.damping_max >= self.damping_init && self.damping_init >= self.damping_min) {
            return Err(Error::InvalidInput(
                "damping_init must lie in [damping_min, damping_max]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    Step,
    Objective,
    MaxIters,
    DampingCeiling,
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(self, Self::Gradient | Self::Step | Self::Objective)
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: Vec<f64>,
    /// Weighted objective at `theta` (equals the plain RSS for unit weights).
    pub q: f64,
    /// Unweighted residual sum of squares `Q_n(theta)`.
    pub rss: f64,
    /// `rss / (n − p)`; NaN when n = p.
    pub sigma2: f64,
    /// `(1/n) Σ ∇f_i ∇f_iᵀ` at `theta`.
    pub sigma_inv: DMatrix<f64>,
    /// Inverse of `sigma_inv`, if it is numerically nonsingular.
    pub sigma: Option<DMatrix<f64>>,
    pub iters: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// `‖∇Q‖∞` of the weighted objective at `theta`.
    pub grad_norm: f64,
    pub n: usize,
    /// Objective after each accepted step, starting value first. Empty unless
    /// `SolverConfig::record_trace` is set.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn sigma_hat(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }
}

fn check_weights(data: &Dataset, w: &[f64]) -> Result<()> {
    if w.len() != data.len() {
        return Err(Error::DimensionMismatch {
            what: "weight vector",
            expected: data.len(),
            found: w.len(),
        });
    }
    if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and >= 0".into()));
    }
    Ok(())
}

/// `Σ w_i (y_i − f(x_i; θ))²`, summed in index order.
pub fn weighted_rss(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    theta: &[f64],
    w: &[f64],
) -> Result<f64> {
    check_weights(data, w)?;
    check_theta(model, theta)?;
    let mut q = 0.0;
    for ((x, y), wi) in data.iter().zip(w) {
        let r = y - model.eval(x, theta)?;
        q += wi * r * r;
    }
    Ok(q)
}

/// Unweighted residual sum of squares `Q_n(θ)`.
pub fn rss(model: &(impl RegressionModel + ?Sized), data: &Dataset, theta: &[f64]) -> Result<f64> {
    check_theta(model, theta)?;
    let mut q = 0.0;
    for (x, y) in data.iter() {
        let r = y - model.eval(x, theta)?;
        q += r * r;
    }
    Ok(q)
}

/// `∇Q(θ) = 2 Σ w_i φ_i(θ)` with `φ_i = −(y_i − f_i) ∇f_i`.
pub fn rss_gradient(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    theta: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    check_weights(data, w)?;
    check_theta(model, theta)?;
    let p = theta.len();
    let mut g = vec![0.0; p];
    let mut gf = vec![0.0; p];
    for ((x, y), wi) in data.iter().zip(w) {
        let r = y - model.eval(x, theta)?;
        model.grad_into(x, theta, &mut gf)?;
        for j in 0..p {
            g[j] -= 2.0 * wi * r * gf[j];
        }
    }
    Ok(g)
}

/// `Σ_n⁻¹(θ) = (1/n) Σ ∇f_i(θ) ∇f_i(θ)ᵀ`.
pub fn sigma_n_inv(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    theta: &[f64],
) -> Result<DMatrix<f64>> {
    design_information(model, data.x(), theta)
}

pub(crate) fn design_information(
    model: &(impl RegressionModel + ?Sized),
    x: &[f64],
    theta: &[f64],
) -> Result<DMatrix<f64>> {
    check_theta(model, theta)?;
    let p = theta.len();
    let mut acc = DMatrix::<f64>::zeros(p, p);
    let mut gf = vec![0.0; p];
    for &xi in x {
        model.grad_into(xi, theta, &mut gf)?;
        for j in 0..p {
            for k in 0..=j {
                acc[(j, k)] += gf[j] * gf[k];
            }
        }
    }
    let n = x.len() as f64;
    Ok(DMatrix::from_fn(p, p, |j, k| {
        if j >= k {
            acc[(j, k)] / n
        } else {
            acc[(k, j)] / n
        }
    }))
}

/// Inverse of a symmetric positive-definite matrix, `None` if numerically singular.
pub fn invert_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    PivotedCholesky::new(a).map(|c| c.inverse())
}

/// `∇φ_i(θ) = ∇f_i ∇f_iᵀ − (y_i − f_i) ∇²f_i`. Diagnostic only.
pub fn grad_phi(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    theta: &[f64],
    i: usize,
) -> Result<DMatrix<f64>> {
    check_theta(model, theta)?;
    if i >= data.len() {
        return Err(Error::InvalidInput(format!(
            "observation index {i} out of range (n = {})",
            data.len()
        )));
    }
    let (x, y) = (data.x()[i], data.y()[i]);
    let g = DVector::from_vec(model.grad(x, theta)?);
    let r = y - model.eval(x, theta)?;
    let outer = &g * g.transpose();
    if r == 0.0 {
        return Ok(outer);
    }
    Ok(outer - model.hessian(x, theta)? * r)
}

/// Identifiability functional `D_n(θ, θ′) = (1/n) Σ (f_i(θ) − f_i(θ′))²`.
pub fn condition_j_diag(
    model: &(impl RegressionModel + ?Sized),
    x: &[f64],
    theta: &[f64],
    theta_prime: &[f64],
) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidDataset("empty design".into()));
    }
    let mut s = 0.0;
    for &xi in x {
        let d = model.eval(xi, theta)? - model.eval(xi, theta_prime)?;
        s += d * d;
    }
    Ok(s / x.len() as f64)
}

/// Weighted objective, `JᵀWJ` and `JᵀW r` at one point.
struct NormalSystem {
    q: f64,
    fitted: Vec<f64>,
    jtwj: DMatrix<f64>,
    jtwr: DVector<f64>,
}

fn normal_system(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    theta: &[f64],
    w: &[f64],
    gf: &mut [f64],
) -> Result<NormalSystem> {
    let p = theta.len();
    let mut q = 0.0;
    let mut jtwj = DMatrix::zeros(p, p);
    let mut jtwr = DVector::zeros(p);
    let mut fitted = Vec::with_capacity(data.len());
    for ((x, y), &wi) in data.iter().zip(w) {
        let f = model.eval(x, theta)?;
        fitted.push(f);
        let r = y - f;
        q += wi * r * r;
        if wi == 0.0 {
            continue;
        }
        model.grad_into(x, theta, gf)?;
        for j in 0..p {
            let wg = wi * gf[j];
            jtwr[j] += wg * r;
            for k in 0..=j {
                jtwj[(j, k)] += wg * gf[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            jtwj[(k, j)] = jtwj[(j, k)];
        }
    }
    Ok(NormalSystem { q, fitted, jtwj, jtwr })
}

/// `Q(old) − Q(new)`. Computed as `Σ w Δf (2r − Δf)` while that exceeds its
/// rounding floor; below it, from the trapezoid rule on the gradient, whose
/// error scales with the step rather than with `|f|`.
fn objective_decrease(
    data: &Dataset,
    w: &[f64],
    old: &NormalSystem,
    new: &NormalSystem,
    step: &[f64],
) -> f64 {
    let mut value = 0.0;
    let mut floor = 0.0;
    for ((y, wi), (fo, fn_)) in data.y().iter().zip(w).zip(old.fitted.iter().zip(&new.fitted)) {
        let df = fn_ - fo;
        let r2 = 2.0 * (y - fo);
        value += wi * df * (r2 - df);
        floor += wi * (fo.abs() + fn_.abs()) * (r2.abs() + df.abs());
    }
    if value.abs() > 8.0 * f64::EPSILON * floor {
        return value;
    }
    step.iter()
        .zip(old.jtwr.iter().zip(new.jtwr.iter()))
        .map(|(d, (a, b))| d * (a + b))
        .sum()
}

/// One damped step from `theta`, kept only if it lowers the objective and
/// stays inside the box.
#[allow(clippy::too_many_arguments)]
fn polish_step(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    w: &[f64],
    theta: &[f64],
    sys: &NormalSystem,
    lambda: f64,
    bounds: &ParamBox,
    gf: &mut [f64],
) -> Option<(Vec<f64>, NormalSystem)> {
    let max_diag = sys.jtwj.diagonal().amax();
    let mut a = sys.jtwj.clone();
    for j in 0..theta.len() {
        a[(j, j)] += lambda * a[(j, j)].max(1e-12 * max_diag);
    }
    let delta = PivotedCholesky::new(&a)?.solve(&sys.jtwr);
    let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
    if !bounds.contains(&trial) {
        return None;
    }
    let next = normal_system(model, data, &trial, w, gf).ok()?;
    let step: Vec<f64> = delta.iter().copied().collect();
    (next.q.is_finite() && objective_decrease(data, w, sys, &next, &step) > 0.0).then_some((trial, next))
}

/// Fits `θ` by minimizing the weighted residual sum of squares from `theta_start`.
///
/// Exhausting `max_iters` or the damping ceiling is not an error; it is
/// reported through `converged = false`.
pub fn fit(
    model: &(impl RegressionModel + ?Sized),
    data: &Dataset,
    w: &[f64],
    theta_start: &[f64],
    cfg: &SolverConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    check_weights(data, w)?;
    check_theta(model, theta_start)?;
    let p = model.n_params();
    let positive = w.iter().filter(|&&v| v > 0.0).count();
    if positive < p {
        return Err(Error::Degenerate {
            positive,
            required: p,
        });
    }
    let bounds = model.bounds();
    if !bounds.contains(theta_start) {
        return Err(Error::domain(
            model.name(),
            format!("start {theta_start:?} outside the admissible region"),
        ));
    }

    let mut gf = vec![0.0; p];
    let mut theta = theta_start.to_vec();
    let mut sys = normal_system(model, data, &theta, w, &mut gf)?;
    let mut lambda = cfg.damping_init;
    let mut iters = 0;
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(sys.q);
    }
    let mut projected_last = false;

    let stop = 'outer: loop {
        let grad_norm = 2.0 * sys.jtwr.amax();
        if grad_norm <= cfg.grad_tol * (1.0 + sys.q.abs()) {
            break StopReason::Gradient;
        }
        if iters >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        iters += 1;

        let max_diag = sys.jtwj.diagonal().amax();
        let scale: DVector<f64> = sys.jtwj.diagonal().map(|d| d.max(1e-12 * max_diag));
        loop {
            let mut a = sys.jtwj.clone();
            for j in 0..p {
                a[(j, j)] += lambda * scale[j];
            }
            let Some(chol) = PivotedCholesky::new(&a) else {
                lambda *= cfg.damping_factor;
                if lambda > cfg.damping_max {
                    return Err(Error::SingularNormalEquations);
                }
                continue;
            };
            let delta = chol.solve(&sys.jtwr);
            let mut trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            let projected = !bounds.contains(&trial);
            if projected {
                trial = bounds.project(&trial, &theta);
            }
            let accepted = match normal_system(model, data, &trial, w, &mut gf) {
                Ok(next) if next.q.is_finite() => {
                    let step: Vec<f64> = trial.iter().zip(&theta).map(|(t, o)| t - o).collect();
                    let decrease = objective_decrease(data, w, &sys, &next, &step);
                    (decrease > 0.0).then_some((next, decrease))
                }
                _ => None,
            };
            match accepted {
                Some((next, decrease)) => {
                    if projected && projected_last {
                        return Err(Error::domain(
                            model.name(),
                            "iterates repeatedly left the admissible region",
                        ));
                    }
                    projected_last = projected;
                    let small_step = trial
                        .iter()
                        .zip(&theta)
                        .all(|(t, old)| (t - old).abs() <= cfg.step_tol * (old.abs() + cfg.step_tol));
                    let small_drop = decrease <= cfg.q_rel_tol * sys.q;
                    theta = trial;
                    sys = next;
                    if cfg.record_trace {
                        trace.push(sys.q);
                    }
                    lambda = (lambda / cfg.damping_factor).max(cfg.damping_min);
                    if small_step {
                        break 'outer StopReason::Step;
                    }
                    if small_drop {
                        break 'outer StopReason::Objective;
                    }
                    break;
                }
                None => {
                    // Rejections also happen when the remaining decrease is
                    // below what Q can resolve in floating point.
                    let gn_decrease = PivotedCholesky::new(&sys.jtwj)
                        .map(|c| sys.jtwr.dot(&c.solve(&sys.jtwr)));
                    if gn_decrease.is_some_and(|d| d <= cfg.q_rel_tol * sys.q) {
                        break 'outer StopReason::Objective;
                    }
                    lambda *= cfg.damping_factor;
                    if lambda > cfg.damping_max {
                        break 'outer StopReason::DampingCeiling;
                    }
                }
            }
        }
    };

    // The stopping tests are scaled by Q, so on large-Q problems they can
    // fire while θ is still off by ~grad/curvature; one more damped step
    // removes most of that.
    if stop.converged() && sys.jtwr.amax() > 0.0 {
        if let Some((trial, next)) = polish_step(model, data, w, &theta, &sys, lambda, &bounds, &mut gf) {
            theta = trial;
            sys = next;
            if cfg.record_trace {
                trace.push(sys.q);
            }
        }
    }

    let n = data.len();
    let rss = rss(model, data, &theta)?;
    let sigma2 = if n > p { rss / (n - p) as f64 } else { f64::NAN };
    let sigma_inv = sigma_n_inv(model, data, &theta)?;
    let sigma = invert_spd(&sigma_inv);
    Ok(FitResult {
        grad_norm: 2.0 * sys.jtwr.amax(),
        q: sys.q,
        rss,
        sigma2,
        sigma_inv,
        sigma,
        iters,
        converged: stop.converged(),
        stop,
        theta,
        n,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ExpDecayModel, LinearModel};
    use approx::assert_relative_eq;

    fn line_data(x: &[f64], y: &[f64]) -> Dataset {
        Dataset::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn rss_examples() {
        // residuals (1, −2) at θ = 1 on f = θx
        let d = line_data(&[1.0, 1.0], &[2.0, -1.0]);
        assert_eq!(weighted_rss(&LinearModel, &d, &[1.0], &[1.0, 1.0]).unwrap(), 5.0);
        let d = line_data(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]);
        assert_eq!(weighted_rss(&LinearModel, &d, &[1.0], &[0.0, 2.0, 4.0]).unwrap(), 6.0);
        let d = line_data(&[1.0, 2.0], &[3.0, 6.0]);
        assert_eq!(weighted_rss(&LinearModel, &d, &[3.0], &[0.7, 9.0]).unwrap(), 0.0);
    }

    #[test]
    fn gradient_vanishes() {
        let d = line_data(&[1.0, 2.0], &[3.0, 6.0]);
        assert_eq!(rss_gradient(&LinearModel, &d, &[3.0], &[1.0, 1.0]).unwrap(), vec![0.0]);
        assert_eq!(rss_gradient(&LinearModel, &d, &[1.0], &[0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let d = line_data(&[1.0, 2.0], &[1.0, 1.0]);
        let w = [1.0, 1.0];
        let theta = [1.0, 0.0];
        let g = rss_gradient(&ExpDecayModel, &d, &theta, &w).unwrap();
        let h = 1e-7;
        for j in 0..2 {
            let mut up = theta;
            let mut down = theta;
            up[j] += h;
            down[j] -= h;
            let fd = (weighted_rss(&ExpDecayModel, &d, &up, &w).unwrap()
                - weighted_rss(&ExpDecayModel, &d, &down, &w).unwrap())
                / (2.0 * h);
            assert_relative_eq!(g[j], fd, max_relative = 1e-6);
        }
        // closed form: r = (1 − 1, 1 − 2) = (0, −1); ∇f at x=2: (2, −4)
        assert_relative_eq!(g[0], 4.0, epsilon = 1e-12);
        assert_relative_eq!(g[1], -8.0, epsilon = 1e-12);
    }

    #[test]
    fn weight_length_and_sign_are_checked() {
        let d = line_data(&[1.0, 2.0], &[1.0, 1.0]);
        assert!(weighted_rss(&LinearModel, &d, &[1.0], &[1.0]).is_err());
        assert!(weighted_rss(&LinearModel, &d, &[1.0], &[1.0, -1.0]).is_err());
    }

    #[test]
    fn sigma_inv_of_line_is_mean_square_design() {
        let d = line_data(&[1.0, 2.0, 3.0], &[0.0; 3]);
        let s = sigma_n_inv(&LinearModel, &d, &[5.0]).unwrap();
        assert_relative_eq!(s[(0, 0)], 14.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn sigma_inv_vanishes_under_fast_decay() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let d = line_data(&x, &[0.0; 10]);
        let s = sigma_n_inv(&ExpDecayModel, &d, &[2.0, 50.0]).unwrap();
        assert!(s.amax() < 1e-40);
    }

    #[test]
    fn sigma_inv_brute_force() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let d = line_data(&x, &[0.0; 5]);
        let (a, b) = (2.0_f64, 0.04_f64);
        let s = sigma_n_inv(&ExpDecayModel, &d, &[a, b]).unwrap();
        let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
        for xi in x {
            let g1 = xi * (-b * xi).exp();
            let g2 = -a * xi * xi * (-b * xi).exp();
            s11 += g1 * g1;
            s12 += g1 * g2;
            s22 += g2 * g2;
        }
        assert_relative_eq!(s[(0, 0)], s11 / 5.0, max_relative = 1e-13);
        assert_relative_eq!(s[(0, 1)], s12 / 5.0, max_relative = 1e-13);
        assert_relative_eq!(s[(1, 0)], s12 / 5.0, max_relative = 1e-13);
        assert_relative_eq!(s[(1, 1)], s22 / 5.0, max_relative = 1e-13);
    }

    #[test]
    fn grad_phi_cases() {
        // zero residual: outer product only
        let d = line_data(&[2.0], &[ExpDecayModel.eval(2.0, &[2.0, 0.04]).unwrap()]);
        let gp = grad_phi(&ExpDecayModel, &d, &[2.0, 0.04], 0).unwrap();
        let g = ExpDecayModel.grad(2.0, &[2.0, 0.04]).unwrap();
        assert_eq!(gp[(0, 1)], g[0] * g[1]);
        assert_eq!(gp[(1, 1)], g[1] * g[1]);

        // linear: x_i² regardless of residual
        let d = line_data(&[3.0], &[100.0]);
        assert_eq!(grad_phi(&LinearModel, &d, &[1.0], 0).unwrap()[(0, 0)], 9.0);
        assert!(grad_phi(&LinearModel, &d, &[1.0], 1).is_err());
    }

    #[test]
    fn grad_phi_is_half_hessian_of_single_term() {
        // Model I, x=1, θ=(2,0): f = 2, so y = 3 gives residual 1.
        let d = line_data(&[1.0], &[3.0]);
        let theta = [2.0, 0.0];
        let gp = grad_phi(&ExpDecayModel, &d, &theta, 0).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut up = theta;
            let mut down = theta;
            up[k] += h;
            down[k] -= h;
            let gu = rss_gradient(&ExpDecayModel, &d, &up, &[1.0]).unwrap();
            let gd = rss_gradient(&ExpDecayModel, &d, &down, &[1.0]).unwrap();
            for j in 0..2 {
                let fd = (gu[j] - gd[j]) / (2.0 * h) / 2.0;
                assert!((gp[(j, k)] - fd).abs() < 1e-6, "({j},{k}) {} vs {fd}", gp[(j, k)]);
            }
        }
        // [[1,−2],[−2,4]] − 1·[[0,−1],[−1,2]]
        assert_relative_eq!(gp[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(gp[(0, 1)], -1.0, epsilon = 1e-15);
        assert_relative_eq!(gp[(1, 1)], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn condition_j_examples() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 10.0 / 9.0).collect();
        let t = [2.0, 0.04];
        assert_eq!(condition_j_diag(&ExpDecayModel, &x, &t, &t).unwrap(), 0.0);
        let tp = [2.1, 0.04];
        let direct: f64 = x
            .iter()
            .map(|&xi| {
                let d = 2.0 * xi * (-0.04 * xi).exp() - 2.1 * xi * (-0.04 * xi).exp();
                d * d
            })
            .sum::<f64>()
            / 10.0;
        let got = condition_j_diag(&ExpDecayModel, &x, &t, &tp).unwrap();
        assert!(got > 0.0);
        assert_relative_eq!(got, direct, max_relative = 1e-12);
    }

    #[test]
    fn fit_at_truth_is_immediate() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 / 3.0).collect();
        let y: Vec<f64> = x.iter().map(|&xi| ExpDecayModel.eval(xi, &[2.0, 0.04]).unwrap()).collect();
        let d = Dataset::new(x, y).unwrap();
        let r = fit(&ExpDecayModel, &d, &[1.0; 30], &[2.0, 0.04], &SolverConfig::default()).unwrap();
        assert_eq!(r.theta, vec![2.0, 0.04]);
        assert_eq!(r.q, 0.0);
        assert!(r.converged);
        assert_eq!(r.iters, 0);
    }

    #[test]
    fn fit_line_closed_form() {
        let x = [0.5, 1.0, 2.0, 3.5];
        let y = [1.1, 1.9, 4.3, 6.6];
        let w = [0.0, 2.0, 0.5, 3.0];
        let d = line_data(&x, &y);
        let r = fit(&LinearModel, &d, &w, &[0.0], &SolverConfig::default()).unwrap();
        let num: f64 = (0..4).map(|i| w[i] * x[i] * y[i]).sum();
        let den: f64 = (0..4).map(|i| w[i] * x[i] * x[i]).sum();
        assert_relative_eq!(r.theta[0], num / den, max_relative = 1e-10);
        assert!(r.converged);
    }

    #[test]
    fn degenerate_weights_are_reported() {
        let d = line_data(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        let err = fit(&ExpDecayModel, &d, &[0.0, 3.0, 0.0], &[1.0, 0.0], &SolverConfig::default());
        assert!(matches!(err, Err(Error::Degenerate { positive: 1, required: 2 })));
    }

    #[test]
    fn start_outside_box_is_rejected() {
        let d = line_data(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        let err = fit(&ExpDecayModel, &d, &[1.0; 3], &[500.0, 0.0], &SolverConfig::default());
        assert!(matches!(err, Err(Error::Domain { .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.damping_factor = 1.0;
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig {
            grad_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn max_iters_exhaustion_is_a_flag() {
        let x: Vec<f64> = (1..=20).map(f64::from).map(|v| v / 2.0).collect();
        let y: Vec<f64> = x.iter().map(|&xi| ExpDecayModel.eval(xi, &[2.0, 0.3]).unwrap() + 0.01 * xi.sin()).collect();
        let d = Dataset::new(x, y).unwrap();
        let cfg = SolverConfig {
            max_iters: 1,
            ..SolverConfig::default()
        };
        let r = fit(&ExpDecayModel, &d, &[1.0; 20], &[1.0, 0.0], &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.stop, StopReason::MaxIters);
    }
}
