//! Mean functions `f(x; θ)` for nonlinear regression.
//!
//! Every model exposes its value, its analytic gradient in θ, and a Hessian
//! (analytic where cheap, otherwise central differences of the gradient).
//! Models are pure functions of their arguments and are shared freely across
//! worker threads.

use std::fmt;
use std::path::Path;

use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node,
    Value,
};
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Axis-aligned admissible region Θ for a model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// When set, the lower bounds are excluded (θ_j > lower_j).
    strict_lower: bool,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, strict_lower: bool) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter box bounds",
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::InvalidInput(
                "parameter box needs lower <= upper".into(),
            ));
        }
        Ok(Self {
            lower,
            upper,
            strict_lower,
        })
    }

    pub fn unbounded(p: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; p],
            upper: vec![f64::INFINITY; p],
            strict_lower: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().enumerate().all(|(j, &t)| {
                let above = if self.strict_lower {
                    t > self.lower[j]
                } else {
                    t >= self.lower[j]
                };
                above && t <= self.upper[j]
            })
    }

    /// Projects `trial` onto the box. For an open lower face the coordinate is
    /// moved halfway from `anchor` (an admissible point) towards the face.
    pub fn project(&self, trial: &[f64], anchor: &[f64]) -> Vec<f64> {
        trial
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let (lo, hi) = (self.lower[j], self.upper[j]);
                if t > hi {
                    hi
                } else if self.strict_lower && t <= lo {
                    lo + 0.5 * (anchor[j] - lo)
                } else if t < lo {
                    lo
                } else {
                    t
                }
            })
            .collect()
    }
}

/// A nonlinear mean function `f(x; θ)` with derivatives in θ.
pub trait RegressionModel: Send + Sync {
    fn name(&self) -> &str;

    /// Parameter dimension p.
    fn n_params(&self) -> usize;

    fn bounds(&self) -> ParamBox {
        ParamBox::unbounded(self.n_params())
    }

    fn eval(&self, x: f64, theta: &[f64]) -> Result<f64>;

    /// Writes ∇_θ f(x; θ) into `out` (length p).
    fn grad_into(&self, x: f64, theta: &[f64], out: &mut [f64]) -> Result<()>;

    fn grad(&self, x: f64, theta: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_params()];
        self.grad_into(x, theta, &mut out)?;
        Ok(out)
    }

    /// ∇²_θ f(x; θ). The default takes central differences of the gradient
    /// and symmetrizes the result.
    fn hessian(&self, x: f64, theta: &[f64]) -> Result<DMatrix<f64>> {
        fd_hessian(self, x, theta)
    }
}

impl fmt::Debug for dyn RegressionModel + '_ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RegressionModel({}, p={})", self.name(), self.n_params())
    }
}

pub(crate) fn check_theta(model: &(impl RegressionModel + ?Sized), theta: &[f64]) -> Result<()> {
    if theta.len() != model.n_params() {
        return Err(Error::DimensionMismatch {
            what: "parameter vector",
            expected: model.n_params(),
            found: theta.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::domain(model.name(), "non-finite parameter"));
    }
    Ok(())
}

fn finite(model: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(model, format!("non-finite model value {v}")))
    }
}

/// Central-difference approximation of ∇_θ f with a fixed step `h`.
pub fn fd_gradient(
    model: &(impl RegressionModel + ?Sized),
    x: f64,
    theta: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step h must be > 0, got {h}")));
    }
    check_theta(model, theta)?;
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|j| {
            probe[j] = theta[j] + h;
            let up = model.eval(x, &probe)?;
            probe[j] = theta[j] - h;
            let down = model.eval(x, &probe)?;
            probe[j] = theta[j];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Central differences with a per-coordinate step `h_j = 1e-6 (1 + |θ_j|)`.
fn fd_gradient_scaled(
    model: &(impl RegressionModel + ?Sized),
    x: f64,
    theta: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let mut probe = theta.to_vec();
    for j in 0..theta.len() {
        let h = 1e-6 * (1.0 + theta[j].abs());
        probe[j] = theta[j] + h;
        let up = model.eval(x, &probe)?;
        probe[j] = theta[j] - h;
        let down = model.eval(x, &probe)?;
        probe[j] = theta[j];
        out[j] = (up - down) / (2.0 * h);
    }
    Ok(())
}

fn fd_hessian(model: &(impl RegressionModel + ?Sized), x: f64, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_theta(model, theta)?;
    let p = theta.len();
    let mut hess = DMatrix::zeros(p, p);
    let mut probe = theta.to_vec();
    let mut up = vec![0.0; p];
    let mut down = vec![0.0; p];
    for k in 0..p {
        let h = 1e-5 * (1.0 + theta[k].abs());
        probe[k] = theta[k] + h;
        model.grad_into(x, &probe, &mut up)?;
        probe[k] = theta[k] - h;
        model.grad_into(x, &probe, &mut down)?;
        probe[k] = theta[k];
        for j in 0..p {
            hess[(j, k)] = (up[j] - down[j]) / (2.0 * h);
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Model I: `f(x; θ) = θ1 x exp(−θ2 x)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpDecayModel;

impl RegressionModel for ExpDecayModel {
    fn name(&self) -> &str {
        "model1"
    }

    fn n_params(&self) -> usize {
        2
    }

    fn bounds(&self) -> ParamBox {
        ParamBox {
            lower: vec![-100.0, -5.0],
            upper: vec![100.0, 5.0],
            strict_lower: false,
        }
    }

    fn eval(&self, x: f64, theta: &[f64]) -> Result<f64> {
        check_theta(self, theta)?;
        finite(self.name(), theta[0] * x * (-theta[1] * x).exp())
    }

    fn grad_into(&self, x: f64, theta: &[f64], out: &mut [f64]) -> Result<()> {
        check_theta(self, theta)?;
        let e = (-theta[1] * x).exp();
        out[0] = finite(self.name(), x * e)?;
        out[1] = finite(self.name(), -theta[0] * x * x * e)?;
        Ok(())
    }

    fn hessian(&self, x: f64, theta: &[f64]) -> Result<DMatrix<f64>> {
        check_theta(self, theta)?;
        let e = (-theta[1] * x).exp();
        let off = -x * x * e;
        Ok(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, off, off, theta[0] * x * x * x * e],
        ))
    }
}

/// Model II: `f(x; θ) = θ1 x / (exp(θ2) + x)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SaturationModel;

impl SaturationModel {
    fn denom(&self, x: f64, theta: &[f64]) -> Result<f64> {
        let d = theta[1].exp() + x;
        if d == 0.0 || !d.is_finite() {
            return Err(Error::domain(self.name(), format!("exp(θ2) + x = {d}")));
        }
        Ok(d)
    }
}

impl RegressionModel for SaturationModel {
    fn name(&self) -> &str {
        "model2"
    }

    fn n_params(&self) -> usize {
        2
    }

    fn bounds(&self) -> ParamBox {
        ParamBox {
            lower: vec![-100.0, -10.0],
            upper: vec![100.0, 10.0],
            strict_lower: false,
        }
    }

    fn eval(&self, x: f64, theta: &[f64]) -> Result<f64> {
        check_theta(self, theta)?;
        let d = self.denom(x, theta)?;
        finite(self.name(), theta[0] * x / d)
    }

    fn grad_into(&self, x: f64, theta: &[f64], out: &mut [f64]) -> Result<()> {
        check_theta(self, theta)?;
        let d = self.denom(x, theta)?;
        let e = theta[1].exp();
        out[0] = x / d;
        out[1] = finite(self.name(), -theta[0] * x * e / (d * d))?;
        Ok(())
    }

    fn hessian(&self, x: f64, theta: &[f64]) -> Result<DMatrix<f64>> {
        check_theta(self, theta)?;
        let d = self.denom(x, theta)?;
        let e = theta[1].exp();
        let off = -x * e / (d * d);
        // ∂/∂θ2 of −θ1 x e / d² = −θ1 x e (d − 2e) / d³
        let h22 = -theta[0] * x * e * (d - 2.0 * e) / (d * d * d);
        Ok(DMatrix::from_row_slice(2, 2, &[0.0, off, off, h22]))
    }
}

/// NIST Chwirut1: `f(x; θ) = exp(−θ1 x) / (θ2 + θ3 x)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChwirutModel;

impl ChwirutModel {
    fn denom(&self, x: f64, theta: &[f64]) -> Result<f64> {
        let d = theta[1] + theta[2] * x;
        if d == 0.0 {
            return Err(Error::domain(self.name(), "θ2 + θ3 x = 0"));
        }
        Ok(d)
    }
}

impl RegressionModel for ChwirutModel {
    fn name(&self) -> &str {
        "chwirut1"
    }

    fn n_params(&self) -> usize {
        3
    }

    fn bounds(&self) -> ParamBox {
        ParamBox {
            lower: vec![0.0; 3],
            upper: vec![f64::INFINITY; 3],
            strict_lower: true,
        }
    }

    fn eval(&self, x: f64, theta: &[f64]) -> Result<f64> {
        check_theta(self, theta)?;
        let d = self.denom(x, theta)?;
        finite(self.name(), (-theta[0] * x).exp() / d)
    }

    fn grad_into(&self, x: f64, theta: &[f64], out: &mut [f64]) -> Result<()> {
        check_theta(self, theta)?;
        let d = self.denom(x, theta)?;
        let f = finite(self.name(), (-theta[0] * x).exp() / d)?;
        out[0] = -x * f;
        out[1] = finite(self.name(), -f / d)?;
        out[2] = finite(self.name(), -x * f / d)?;
        Ok(())
    }
}

/// Straight line through the origin, `f(x; θ) = θ1 x`. Linear in θ, so its
/// weighted least-squares fit has a closed form.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearModel;

impl RegressionModel for LinearModel {
    fn name(&self) -> &str {
        "linear"
    }

    fn n_params(&self) -> usize {
        1
    }

    fn eval(&self, x: f64, theta: &[f64]) -> Result<f64> {
        check_theta(self, theta)?;
        finite(self.name(), theta[0] * x)
    }

    fn grad_into(&self, x: f64, theta: &[f64], out: &mut [f64]) -> Result<()> {
        check_theta(self, theta)?;
        out[0] = x;
        Ok(())
    }

    fn hessian(&self, _x: f64, theta: &[f64]) -> Result<DMatrix<f64>> {
        check_theta(self, theta)?;
        Ok(DMatrix::zeros(1, 1))
    }
}

type EvalFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// A user-supplied model built from callables. Without a gradient callable
/// the gradient is filled by central differences with `h_j = 1e-6 (1 + |θ_j|)`.
pub struct CustomModel {
    name: String,
    p: usize,
    eval: Box<EvalFn>,
    grad: Option<Box<GradFn>>,
    bounds: ParamBox,
}

impl CustomModel {
    pub fn new(
        name: impl Into<String>,
        p: usize,
        eval: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            p,
            eval: Box::new(eval),
            grad: None,
            bounds: ParamBox::unbounded(p),
        }
    }

    pub fn with_grad(mut self, grad: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }

    pub fn with_bounds(mut self, bounds: ParamBox) -> Result<Self> {
        if bounds.dim() != self.p {
            return Err(Error::DimensionMismatch {
                what: "parameter box",
                expected: self.p,
                found: bounds.dim(),
            });
        }
        self.bounds = bounds;
        Ok(self)
    }

    /// Loads a model from a TOML declaration:
    ///
    /// ```toml
    /// name = "decay"
    /// params = ["a", "b"]
    /// expr = "a * x * math::exp(-b * x)"
    /// # optional
    /// grad = ["x * math::exp(-b * x)", "-a * x * x * math::exp(-b * x)"]
    /// lower = [-100.0, -5.0]
    /// upper = [100.0, 5.0]
    /// ```
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let decl: ModelDecl = toml::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("model declaration: {e}")))?;
        decl.build()
    }
}

impl RegressionModel for CustomModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_params(&self) -> usize {
        self.p
    }

    fn bounds(&self) -> ParamBox {
        self.bounds.clone()
    }

    fn eval(&self, x: f64, theta: &[f64]) -> Result<f64> {
        check_theta(self, theta)?;
        finite(&self.name, (self.eval)(x, theta))
    }

    fn grad_into(&self, x: f64, theta: &[f64], out: &mut [f64]) -> Result<()> {
        check_theta(self, theta)?;
        match &self.grad {
            Some(g) => {
                g(x, theta, out);
                for &v in out.iter() {
                    finite(&self.name, v)?;
                }
                Ok(())
            }
            None => fd_gradient_scaled(self, x, theta, out),
        }
    }
}

impl fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomModel")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("analytic_grad", &self.grad.is_some())
            .finish()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDecl {
    name: String,
    params: Vec<String>,
    expr: String,
    #[serde(default)]
    grad: Option<Vec<String>>,
    #[serde(default)]
    lower: Option<Vec<f64>>,
    #[serde(default)]
    upper: Option<Vec<f64>>,
}

struct Expr {
    tree: Node<DefaultNumericTypes>,
    params: Vec<String>,
}

impl Expr {
    fn parse(src: &str, params: &[String]) -> Result<Self> {
        let tree = build_operator_tree::<DefaultNumericTypes>(src)
            .map_err(|e| Error::InvalidInput(format!("expression `{src}`: {e}")))?;
        Ok(Self {
            tree,
            params: params.to_vec(),
        })
    }

    fn eval(&self, x: f64, theta: &[f64]) -> f64 {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        let bind = |ctx: &mut HashMapContext, name: &str, v: f64| {
            ctx.set_value(name.to_string(), Value::Float(v)).is_ok()
        };
        if !bind(&mut ctx, "x", x) {
            return f64::NAN;
        }
        for (name, &v) in self.params.iter().zip(theta) {
            if !bind(&mut ctx, name, v) {
                return f64::NAN;
            }
        }
        self.tree
            .eval_number_with_context(&ctx)
            .unwrap_or(f64::NAN)
    }
}

impl ModelDecl {
    fn build(self) -> Result<CustomModel> {
        let p = self.params.len();
        if p == 0 {
            return Err(Error::InvalidInput("model needs at least one parameter".into()));
        }
        if self.params.iter().any(|n| n == "x") {
            return Err(Error::InvalidInput("`x` is reserved for the predictor".into()));
        }
        let value = Expr::parse(&self.expr, &self.params)?;
        let mut model = CustomModel::new(self.name, p, move |x, t| value.eval(x, t));
        if let Some(grads) = self.grad {
            if grads.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "gradient expressions",
                    expected: p,
                    found: grads.len(),
                });
            }
            let parts = grads
                .iter()
                .map(|g| Expr::parse(g, &self.params))
                .collect::<Result<Vec<_>>>()?;
            model = model.with_grad(move |x, t, out| {
                for (o, e) in out.iter_mut().zip(&parts) {
                    *o = e.eval(x, t);
                }
            });
        }
        if self.lower.is_some() || self.upper.is_some() {
            let lower = self.lower.unwrap_or_else(|| vec![f64::NEG_INFINITY; p]);
            let upper = self.upper.unwrap_or_else(|| vec![f64::INFINITY; p]);
            model = model.with_bounds(ParamBox::new(lower, upper, false)?)?;
        }
        Ok(model)
    }
}

/// Looks up a built-in model by its string id.
pub fn model_by_id(id: &str) -> Result<Box<dyn RegressionModel>> {
    match id.to_ascii_lowercase().as_str() {
        "model1" => Ok(Box::new(ExpDecayModel)),
        "model2" => Ok(Box::new(SaturationModel)),
        "chwirut1" => Ok(Box::new(ChwirutModel)),
        "linear" => Ok(Box::new(LinearModel)),
        other => Err(Error::InvalidInput(format!("unknown model id `{other}`"))),
    }
}
