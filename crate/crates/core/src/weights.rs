//! Exchangeable random weights with unit mean.
//!
//! Three schemes are provided: multinomial counts (Efron's bootstrap),
//! scaled Dirichlet draws (the Bayesian bootstrap for α = 1) and i.i.d.
//! standard exponentials. Every draw is a pure function of an [`RngStream`],
//! so replicate `b` gets the same weights no matter which thread runs it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// A counter-based random stream: ChaCha8 keyed by `seed`, with `stream_id`
/// selecting one of 2⁶⁴ independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a tag into a seed to get an unrelated seed for a separate purpose.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    /// Counts from n trials over n equiprobable cells.
    Multinomial,
    /// `n × Dirichlet(α, …, α)`.
    Dirichlet { alpha: f64 },
    /// I.i.d. Exp(1).
    Exponential,
}

impl WeightScheme {
    pub fn dirichlet(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!(
                "Dirichlet alpha must be finite and > 0, got {alpha}"
            )));
        }
        Ok(Self::Dirichlet { alpha })
    }

    /// Exact marginal standard deviation τ_n of one weight.
    pub fn tau(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            Self::Multinomial => ((nf - 1.0) / nf).sqrt(),
            Self::Dirichlet { alpha } => ((nf - 1.0) / (nf * alpha + 1.0)).sqrt(),
            Self::Exponential => 1.0,
        }
    }

    pub fn draw(&self, n: usize, stream: RngStream) -> WeightVector {
        let mut rng = stream.rng();
        let w = match *self {
            Self::Multinomial => {
                let mut counts = vec![0.0; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1.0;
                }
                counts
            }
            Self::Dirichlet { alpha } => {
                let gamma = Gamma::new(alpha, 1.0).expect("alpha validated at construction");
                let g: Vec<f64> = (0..n).map(|_| gamma.sample(&mut rng)).collect();
                let total: f64 = g.iter().sum();
                let scale = n as f64 / total;
                g.into_iter().map(|v| v * scale).collect()
            }
            Self::Exponential => (0..n).map(|_| Exp1.sample(&mut rng)).collect(),
        };
        WeightVector {
            w,
            tau: self.tau(n),
            scheme: Some(*self),
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Multinomial => f.write_str("multinomial"),
            Self::Dirichlet { alpha } => write!(f, "dirichlet:{alpha}"),
            Self::Exponential => f.write_str("exponential"),
        }
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    /// Accepts `multinomial`, `dirichlet`, `dirichlet:<alpha>` and `exponential`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            None => match s.as_str() {
                "multinomial" => Ok(Self::Multinomial),
                "dirichlet" => Self::dirichlet(1.0),
                "exponential" => Ok(Self::Exponential),
                _ => Err(Error::InvalidInput(format!("unknown weight scheme `{s}`"))),
            },
            Some(("dirichlet", alpha)) => {
                let alpha: f64 = alpha
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad Dirichlet alpha `{alpha}`")))?;
                Self::dirichlet(alpha)
            }
            Some(_) => Err(Error::InvalidInput(format!("unknown weight scheme `{s}`"))),
        }
    }
}

/// One draw of weights together with the scheme's exact τ_n.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub tau: f64,
    pub scheme: Option<WeightScheme>,
}

impl WeightVector {
    pub fn is_degenerate(&self) -> bool {
        !(self.tau > 0.0)
    }

    /// `W_i = (w_i − 1) / τ_n`.
    pub fn standardize(&self) -> Result<Vec<f64>> {
        if self.is_degenerate() {
            return Err(Error::DegenerateWeights);
        }
        Ok(self.w.iter().map(|w| (w - 1.0) / self.tau).collect())
    }
}

/// Anything that can produce a weight vector for replicate stream `stream`.
pub trait WeightSource: Send + Sync {
    fn draw(&self, n: usize, stream: RngStream) -> WeightVector;
    fn label(&self) -> String;
}

impl WeightSource for WeightScheme {
    fn draw(&self, n: usize, stream: RngStream) -> WeightVector {
        WeightScheme::draw(self, n, stream)
    }

    fn label(&self) -> String {
        self.to_string()
    }
}

/// The same weight vector for every replicate, with a caller-chosen τ.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedWeights {
    pub w: Vec<f64>,
    pub tau: f64,
}

impl WeightSource for FixedWeights {
    fn draw(&self, n: usize, _stream: RngStream) -> WeightVector {
        assert_eq!(n, self.w.len(), "fixed weight vector has the wrong length");
        WeightVector {
            w: self.w.clone(),
            tau: self.tau,
            scheme: None,
        }
    }

    fn label(&self) -> String {
        "fixed".into()
    }
}

/// Monte-Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            se: (var / n).sqrt(),
        }
    }
}

/// Monte-Carlo moments of the standardized weights `W_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub scheme: String,
    pub n: usize,
    pub draws: usize,
    pub tau: f64,
    /// `(1/n) Σ W_i`
    pub mean_w: Estimate,
    /// `(1/n) Σ W_i²`
    pub mean_w2: Estimate,
    /// `(1/n) Σ (W_i − W̄)²`
    pub centered_w2: Estimate,
    /// `W_i W_j`, i ≠ j, averaged over pairs within a draw
    pub cross: Estimate,
    /// `W_i² W_j²`, i ≠ j
    pub cross_sq: Estimate,
    /// `W_i⁴`
    pub fourth: Estimate,
    /// Largest `|Σ w_i − n|` seen over all draws.
    pub max_sum_error: f64,
}

/// Estimates the moments listed in [`MomentReport`] from `draws` weight
/// vectors on streams `0..draws` of `seed`.
pub fn assumption_w_report(
    scheme: &WeightScheme,
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<MomentReport> {
    if n < 2 || draws < 1 {
        return Err(Error::InvalidInput("need n >= 2 and draws >= 1".into()));
    }
    let per_draw: Vec<[f64; 7]> = (0..draws as u64)
        .into_par_iter()
        .map(|d| {
            let wv = scheme.draw(n, RngStream::new(seed, d));
            let big_w = wv.standardize().expect("tau > 0 for n >= 2");
            let nf = n as f64;
            let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
            for &v in &big_w {
                let v2 = v * v;
                s1 += v;
                s2 += v2;
                s4 += v2 * v2;
            }
            let pairs = nf * (nf - 1.0);
            let mean = s1 / nf;
            let centered = s2 / nf - mean * mean;
            let sum_err = (wv.w.iter().sum::<f64>() - nf).abs();
            [
                mean,
                s2 / nf,
                centered,
                (s1 * s1 - s2) / pairs,
                (s2 * s2 - s4) / pairs,
                s4 / nf,
                sum_err,
            ]
        })
        .collect();
    let column = |k: usize| Estimate::from_values(&per_draw.iter().map(|r| r[k]).collect::<Vec<_>>());
    Ok(MomentReport {
        scheme: scheme.to_string(),
        n,
        draws,
        tau: scheme.tau(n),
        mean_w: column(0),
        mean_w2: column(1),
        centered_w2: column(2),
        cross: column(3),
        cross_sq: column(4),
        fourth: column(5),
        max_sum_error: per_draw.iter().map(|r| r[6]).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        assert_eq!("multinomial".parse::<WeightScheme>().unwrap(), WeightScheme::Multinomial);
        assert_eq!(
            "dirichlet:2.5".parse::<WeightScheme>().unwrap(),
            WeightScheme::Dirichlet { alpha: 2.5 }
        );
        assert_eq!(
            "Dirichlet".parse::<WeightScheme>().unwrap(),
            WeightScheme::Dirichlet { alpha: 1.0 }
        );
        assert_eq!("exponential".parse::<WeightScheme>().unwrap(), WeightScheme::Exponential);
        assert!("dirichlet:-1".parse::<WeightScheme>().is_err());
        assert!("dirichlet:abc".parse::<WeightScheme>().is_err());
        assert!("poisson".parse::<WeightScheme>().is_err());
        for s in ["multinomial", "dirichlet:0.5", "exponential"] {
            assert_eq!(s.parse::<WeightScheme>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn multinomial_single_cell_is_degenerate() {
        let wv = WeightScheme::Multinomial.draw(1, RngStream::new(1, 0));
        assert_eq!(wv.w, vec![1.0]);
        assert_eq!(wv.tau, 0.0);
        assert!(wv.is_degenerate());
        assert!(matches!(wv.standardize(), Err(Error::DegenerateWeights)));
    }

    #[test]
    fn dirichlet_pair_lies_on_simplex() {
        for s in 0..50 {
            let wv = WeightScheme::Dirichlet { alpha: 1.0 }.draw(2, RngStream::new(9, s));
            assert!((wv.w[0] + wv.w[1] - 2.0).abs() < 1e-12);
            assert!(wv.w[0] > 0.0 && wv.w[0] < 2.0);
        }
    }

    #[test]
    fn multinomial_variance_matches_binomial() {
        let n = 10_000;
        let wv = WeightScheme::Multinomial.draw(n, RngStream::new(42, 7));
        assert_eq!(wv.w.iter().sum::<f64>(), n as f64);
        assert!(wv.w.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        let var = wv.w.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / (n - 1) as f64;
        let tau2 = (n as f64 - 1.0) / n as f64;
        assert!(var > 0.9 * tau2 && var < 1.1 * tau2, "var {var}");
    }

    #[test]
    fn standardize_arithmetic() {
        let wv = WeightVector {
            w: vec![0.0, 2.0],
            tau: 1.0,
            scheme: None,
        };
        assert_eq!(wv.standardize().unwrap(), vec![-1.0, 1.0]);
        let ones = WeightVector {
            w: vec![1.0; 5],
            tau: 1.0,
            scheme: None,
        };
        assert_eq!(ones.standardize().unwrap(), vec![0.0; 5]);

        let wv = WeightScheme::Exponential.draw(37, RngStream::new(3, 3));
        let big_w = wv.standardize().unwrap();
        let mean_w = wv.w.iter().sum::<f64>() / 37.0;
        let mean_big = big_w.iter().sum::<f64>() / 37.0;
        assert!((mean_big - (mean_w - 1.0) / wv.tau).abs() < 1e-14);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let scheme = WeightScheme::Dirichlet { alpha: 1.0 };
        let a = scheme.draw(20, RngStream::new(5, 1));
        let b = scheme.draw(20, RngStream::new(5, 1));
        let c = scheme.draw(20, RngStream::new(5, 2));
        assert_eq!(a, b);
        assert_ne!(a.w, c.w);
        assert_ne!(derive_seed(5, 1), derive_seed(5, 2));
    }

    #[test]
    fn tau_formulas() {
        assert!((WeightScheme::Multinomial.tau(4) - 0.75_f64.sqrt()).abs() < 1e-15);
        assert!((WeightScheme::Dirichlet { alpha: 1.0 }.tau(4) - 0.6_f64.sqrt()).abs() < 1e-15);
        assert_eq!(WeightScheme::Exponential.tau(4), 1.0);
    }

    #[test]
    fn exponential_cross_moment_is_zero() {
        let r = assumption_w_report(&WeightScheme::Exponential, 20, 4000, 11).unwrap();
        assert!(r.cross.mean.abs() <= 3.0 * r.cross.se, "{:?}", r.cross);
    }

    #[test]
    fn report_rejects_tiny_inputs() {
        assert!(assumption_w_report(&WeightScheme::Multinomial, 1, 10, 0).is_err());
        assert!(assumption_w_report(&WeightScheme::Multinomial, 10, 0, 0).is_err());
    }
}
