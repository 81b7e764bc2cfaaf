use proptest::prelude::*;

use recycle_nls::recycler::{pivot_r_star, Direction};
use recycle_nls::stats::{ks_two_sample, quantile};
use recycle_nls::weights::RngStream;
use recycle_nls::{fit, Dataset, ExpDecayModel, LinearModel, RegressionModel, SolverConfig, WeightScheme};

fn scheme() -> impl Strategy<Value = WeightScheme> {
    prop_oneof![
        Just(WeightScheme::Multinomial),
        (0.2f64..5.0).prop_map(|alpha| WeightScheme::Dirichlet { alpha }),
        Just(WeightScheme::Exponential),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_nonnegative_and_reproducible(s in scheme(), n in 2usize..300, seed in any::<u64>(), id in any::<u64>()) {
        let a = s.draw(n, RngStream::new(seed, id));
        let b = s.draw(n, RngStream::new(seed, id));
        prop_assert_eq!(&a.w, &b.w);
        prop_assert_eq!(a.w.len(), n);
        prop_assert!(a.w.iter().all(|w| *w >= 0.0 && w.is_finite()));
        prop_assert_eq!(a.tau, s.tau(n));
        if s == WeightScheme::Multinomial {
            prop_assert_eq!(a.w.iter().sum::<f64>(), n as f64);
            prop_assert!(a.w.iter().all(|w| w.fract() == 0.0));
        }
        if let WeightScheme::Dirichlet { .. } = s {
            prop_assert!((a.w.iter().sum::<f64>() - n as f64).abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn linear_fit_matches_closed_form(
        rows in prop::collection::vec((0.1f64..10.0, -20.0f64..20.0, 0.0f64..3.0), 2..60),
    ) {
        let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let mut w: Vec<f64> = rows.iter().map(|r| r.2).collect();
        w[0] += 0.5;
        let d = Dataset::new(x.clone(), y.clone()).unwrap();
        let f = fit(&LinearModel, &d, &w, &[0.0], &SolverConfig::default()).unwrap();
        let num: f64 = (0..x.len()).map(|i| w[i] * x[i] * y[i]).sum();
        let den: f64 = (0..x.len()).map(|i| w[i] * x[i] * x[i]).sum();
        prop_assert!(f.converged);
        prop_assert!((f.theta[0] - num / den).abs() <= 1e-10 * (1.0 + (num / den).abs()));
    }

    #[test]
    fn fit_never_increases_objective(theta1 in 0.5f64..4.0, theta2 in 0.0f64..0.2, seed in any::<u64>()) {
        let x: Vec<f64> = (1..=30).map(|i| i as f64 / 3.0).collect();
        let noise = WeightScheme::Exponential.draw(30, RngStream::new(seed, 0)).w;
        let y: Vec<f64> = x
            .iter()
            .zip(&noise)
            .map(|(xi, e)| ExpDecayModel.eval(*xi, &[2.0, 0.04]).unwrap() + 0.2 * (e - 1.0))
            .collect();
        let d = Dataset::new(x, y).unwrap();
        let cfg = SolverConfig { record_trace: true, ..SolverConfig::default() };
        let f = fit(&ExpDecayModel, &d, &[1.0; 30], &[theta1, theta2], &cfg).unwrap();
        // Steps are accepted on an accurate decrease. Each re-summed Q carries
        // rounding of order ε·Σ|r|·(|y| + |f|), so near the optimum two
        // evaluations may disagree by that much.
        let resolution: f64 = d
            .iter()
            .map(|(xi, yi)| {
                let fi = ExpDecayModel.eval(xi, &f.theta).unwrap();
                4.0 * (yi - fi).abs() * (yi.abs() + fi.abs()) + (yi - fi).powi(2)
            })
            .sum::<f64>()
            * 2.0
            * f64::EPSILON;
        prop_assert!(f.trace.windows(2).all(|t| t[1] <= t[0] + resolution));
    }

    #[test]
    fn pivot_scales_inversely_with_tau(delta in -1.0f64..1.0, tau in 0.1f64..3.0) {
        let d = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], vec![1.1, 1.9, 3.2, 3.9]).unwrap();
        let base = fit(&LinearModel, &d, &[1.0; 4], &[1.0], &SolverConfig::default()).unwrap();
        let c = Direction::axis(1, 0).unwrap();
        let star = [base.theta[0] + delta];
        let r1 = pivot_r_star(&base, &star, 1.0, &c).unwrap();
        let rt = pivot_r_star(&base, &star, tau, &c).unwrap();
        prop_assert!((rt * tau - r1).abs() <= 1e-12 * (1.0 + r1.abs()));
    }

    #[test]
    fn quantiles_are_monotone(mut v in prop::collection::vec(-1e3f64..1e3, 1..200), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        v.sort_by(f64::total_cmp);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantile(&v, lo).unwrap() <= quantile(&v, hi).unwrap());
        prop_assert_eq!(quantile(&v, 0.0).unwrap(), v[0]);
        prop_assert_eq!(quantile(&v, 1.0).unwrap(), *v.last().unwrap());
    }

    #[test]
    fn ks_is_symmetric_and_bounded(mut a in prop::collection::vec(-5f64..5.0, 1..80), mut b in prop::collection::vec(-5f64..5.0, 1..80)) {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let ab = ks_two_sample(&a, &b).unwrap();
        prop_assert_eq!(ab, ks_two_sample(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
    }
}
