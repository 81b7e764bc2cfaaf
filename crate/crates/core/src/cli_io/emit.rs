//! Serialization of recycling runs.

use std::fmt::Write as _;

use serde_json::{json, Value};

use super::cli::pivot_summary;
use crate::error::Result;
use crate::recycler::{CiResult, RecycleRun};

/// Round-trippable text for a float; non-finite values become `NaN`/`inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// One row per replicate: `b, θ*_1..p, σ*, R*, R*/σ̂, flag`.
pub fn run_to_csv(run: &RecycleRun) -> String {
    let p = run.base.n_params();
    let mut s = String::from("b");
    for j in 1..=p {
        let _ = write!(s, ",theta_star_{j}");
    }
    s.push_str(",sigma_star,r_star,r_star_stud,flag\n");
    for (b, theta) in run.theta_star.iter().enumerate() {
        let _ = write!(s, "{}", b + 1);
        for v in theta {
            let _ = write!(s, ",{}", fmt_f64(*v));
        }
        let _ = writeln!(
            s,
            ",{},{},{},{}",
            fmt_f64(run.sigma_star[b]),
            fmt_f64(run.r_star[b]),
            fmt_f64(run.r_star_stud[b]),
            run.flags[b]
        );
    }
    s
}

/// Config echo, base fit, summary statistics, per-replicate rows and warnings.
pub fn run_to_json(
    run: &RecycleRun,
    config: Value,
    intervals: &[Option<CiResult>],
    warnings: &[String],
) -> Result<Value> {
    let p = run.base.n_params();
    let theta_star = (0..p)
        .map(|j| run.theta_star_summary(j))
        .collect::<Result<Vec<_>>>()?;
    let replicates: Vec<Value> = (0..run.replicates())
        .map(|b| {
            json!({
                "b": b + 1,
                "theta_star": run.theta_star[b],
                "sigma_star": run.sigma_star[b],
                "r_star": run.r_star[b],
                "r_star_stud": run.r_star_stud[b],
                "flag": run.flags[b].to_string(),
            })
        })
        .collect();
    Ok(json!({
        "config": config,
        "base": {
            "theta": run.base.theta,
            "rss": run.base.rss,
            "sigma_hat": run.base.sigma_hat(),
            "iterations": run.base.iters,
        },
        "tau": run.tau,
        "summary": {
            "replicates": run.replicates(),
            "usable": run.usable(),
            "unreliable": run.unreliable(),
            "theta_star": theta_star,
            "sigma_star": run.sigma_star_summary()?,
            "pivots": pivot_summary(run)?,
            "intervals": intervals,
        },
        "replicates": replicates,
        "warnings": warnings,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }
}
