//! Bisects the sensor noise level so the default sweep's 1.5 m accuracy lands
//! near a target, reporting the full grid at each step.
//!
//! cargo run --release -p breathsim --example calibrate -- [target] [lo] [hi] [steps] [seeds]

use breathsim::channel::ChannelConfig;
use breathsim::eval::{distance_sweep, render_report, SweepConfig};
use breathsim::ml::ModelKind;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median over seeds of the mean of DT and RF accuracy at each distance.
fn evaluate(sigma: f64, seeds: u64) -> Vec<(f64, f64, f64)> {
    let mut per_seed = Vec::new();
    for seed in 0..seeds {
        let config = SweepConfig {
            channel: ChannelConfig {
                noise_sigma: sigma,
                ..ChannelConfig::default()
            },
            seed,
            ..SweepConfig::default()
        };
        let report = distance_sweep(&config).expect("sweep");
        if seed == 0 {
            print!("{}", render_report(&report));
        }
        per_seed.push(report);
    }
    SweepConfig::default()
        .distances
        .iter()
        .map(|&d| {
            let dt = median(
                per_seed
                    .iter()
                    .map(|r| r.accuracy(d, ModelKind::Tree).unwrap())
                    .collect(),
            );
            let rf = median(
                per_seed
                    .iter()
                    .map(|r| r.accuracy(d, ModelKind::Forest).unwrap())
                    .collect(),
            );
            (d, dt, rf)
        })
        .collect()
}

fn main() {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let target = args.first().copied().unwrap_or(0.75);
    let (mut lo, mut hi) = (
        args.get(1).copied().unwrap_or(0.005),
        args.get(2).copied().unwrap_or(0.2),
    );
    let steps = args.get(3).copied().unwrap_or(8.0) as usize;
    let seeds = args.get(4).copied().unwrap_or(1.0) as u64;

    for _ in 0..steps {
        let mid = (lo * hi).sqrt();
        let grid = evaluate(mid, seeds);
        let far = grid.last().map(|&(_, dt, rf)| (dt + rf) / 2.0).unwrap();
        println!("sigma {mid:.5}: {grid:?} -> far {far:.4}");
        if far > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    println!("bracket [{lo:.5}, {hi:.5}]");
}
