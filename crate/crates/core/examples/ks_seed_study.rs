//! How often the n = 150 vs n = 30 KS comparison holds across independent
//! seeds, with 2,000 simulated and 2,000 recycled draws per cell.
//!
//! `cargo run --release --example ks_seed_study -- [seeds]`

use recycle_nls::recycler::{pivot_table_cell, Direction};
use recycle_nls::stats::ks_two_sample;
use recycle_nls::{ExpDecayModel, SolverConfig, WeightScheme};

// Typical bootstrap SE of the n = 30 statistic at this draw count.
const KS_SE: f64 = 0.009;

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let schemes = [
        WeightScheme::Multinomial,
        WeightScheme::Dirichlet { alpha: 1.0 },
        WeightScheme::Exponential,
    ];
    let c = Direction::normalized(vec![1.0, 1.0]).unwrap();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let mut sums = [[0.0_f64; 2]; 3];
    let mut pass = [0_u64; 3];
    let mut all = 0;
    for seed in 0..seeds {
        let cell = |n| {
            pivot_table_cell(&ExpDecayModel, &[2.0, 0.04], n, &schemes, 2000, 2000, 0.25, &c, 90_000 + seed, workers, &SolverConfig::default())
                .unwrap()
        };
        let (small, large) = (cell(30), cell(150));
        let (sim_small, sim_large) = (sorted(&small.simulated.sample), sorted(&large.simulated.sample));
        let mut every = true;
        for k in 0..3 {
            let ks30 = ks_two_sample(&small.recycled[k].sample, &sim_small).unwrap();
            let ks150 = ks_two_sample(&large.recycled[k].sample, &sim_large).unwrap();
            sums[k][0] += ks30;
            sums[k][1] += ks150;
            if ks150 <= ks30 + KS_SE {
                pass[k] += 1;
            } else {
                every = false;
            }
        }
        all += every as u64;
    }
    for k in 0..3 {
        println!(
            "{}: mean KS30 {:.4} mean KS150 {:.4} holds {}/{seeds}",
            schemes[k],
            sums[k][0] / seeds as f64,
            sums[k][1] / seeds as f64,
            pass[k]
        );
    }
    println!("all schemes: {all}/{seeds}");
}
