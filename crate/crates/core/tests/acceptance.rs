//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;

use breathsim::channel::{acquire, measure_snr, path_gain, ChannelConfig};
use breathsim::dataset::{chest_trace, to_dataset, FeatureRow, GeneratorConfig};
use breathsim::dsp::{fft_in_place, DspConfig};
use breathsim::eval::{cross_validate, distance_sweep, run_distance, stratified_kfold, EvalReport, SweepConfig};
use breathsim::features::extract_features;
use breathsim::ml::{
    best_split, deserialize_model, gini, serialize_model, train, Classifier, Dataset, ModelKind, TrainConfig,
};
use breathsim::seed::rng_from_seed;
use breathsim::waveform::{class_ranges, synth_chest_trace, BreathingClass, WaveformSpec};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

const DISTANCES: [f64; 3] = [0.5, 1.0, 1.5];
const KINDS: [ModelKind; 2] = [ModelKind::Tree, ModelKind::Forest];

/// Default sweeps for seeds 0..5, plus 1.5 m runs for seeds 5..10.
struct SweepRuns {
    reports: Vec<EvalReport>,
    far: Vec<EvalReport>,
    features_near: Vec<FeatureRow>,
}

fn sweep_runs() -> SweepRuns {
    let mut reports = Vec::new();
    let mut features_near = Vec::new();
    for seed in 0..5 {
        let config = SweepConfig {
            seed,
            ..SweepConfig::default()
        };
        let mut rows = Vec::new();
        for d in DISTANCES {
            let run = run_distance(&config, d).expect("sweep");
            if seed == 0 && d == 0.5 {
                features_near = run.features.clone();
            }
            rows.extend(run.rows);
        }
        reports.push(EvalReport::new(config.k, seed, rows));
    }
    let far = (5..10)
        .map(|seed| {
            let config = SweepConfig {
                seed,
                ..SweepConfig::default()
            };
            EvalReport::new(config.k, seed, run_distance(&config, 1.5).expect("sweep").rows)
        })
        .collect();
    SweepRuns {
        reports,
        far,
        features_near,
    }
}

fn near_floor(runs: &SweepRuns) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut detail = Vec::new();
    for kind in KINDS {
        let accs: Vec<f64> = runs.reports.iter().map(|r| r.accuracy(0.5, kind).unwrap()).collect();
        let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.min(min);
        detail.push(format!("{} min over 5 seeds {:.4}", kind.label(), min));
    }
    outcome(worst >= 0.90, detail.join(", "))
}

fn trend(runs: &SweepRuns) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for kind in KINDS {
        let medians: Vec<f64> = DISTANCES
            .iter()
            .map(|&d| median(runs.reports.iter().map(|r| r.accuracy(d, kind).unwrap()).collect()))
            .collect();
        pass &= medians.windows(2).all(|w| w[1] <= w[0] + 0.02);
        detail.push(format!(
            "{} {:.4} / {:.4} / {:.4}",
            kind.label(),
            medians[0],
            medians[1],
            medians[2]
        ));
    }
    outcome(pass, detail.join(", "))
}

fn forest_at_range(runs: &SweepRuns) -> Outcome {
    let all: Vec<&EvalReport> = runs.reports.iter().chain(&runs.far).collect();
    let dt = median(all.iter().map(|r| r.accuracy(1.5, ModelKind::Tree).unwrap()).collect());
    let rf = median(
        all.iter()
            .map(|r| r.accuracy(1.5, ModelKind::Forest).unwrap())
            .collect(),
    );
    outcome(rf >= dt - 0.01, format!("median over 10 seeds: RF {rf:.4}, DT {dt:.4}"))
}

fn noiseless_ablation() -> Outcome {
    let config = SweepConfig {
        channel: ChannelConfig {
            noise_sigma: 0.0,
            ..ChannelConfig::default()
        },
        generator: GeneratorConfig::default().with_jitter(0.0),
        ..SweepConfig::default()
    };
    let report = distance_sweep(&config).expect("sweep");
    let min = report
        .rows
        .iter()
        .map(|r| r.mean_accuracy)
        .fold(f64::INFINITY, f64::min);
    outcome(
        min >= 0.99,
        format!("lowest cell {min:.4} over {} cells", report.rows.len()),
    )
}

fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    // Reduce the index product first so the angle stays accurate.
                    let angle = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, angle)
                })
                .sum()
        })
        .collect()
}

fn fft_oracle() -> Outcome {
    let mut rng = rng_from_seed(101);
    let mut worst = 0.0f64;
    for bits in 3..=12 {
        let n = 1usize << bits;
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let expected = naive_dft(&x);
        let mut got = x.clone();
        fft_in_place(&mut got);
        let err = got
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = expected.iter().map(|v| v.norm()).fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    outcome(
        worst <= 1e-9,
        format!("worst relative error {worst:.3e} over n = 8..4096"),
    )
}

/// Brute force over every feature and every midpoint of adjacent distinct values.
/// Scores are compared exactly as fractions of the weighted child impurity.
fn brute_force_split(d: &Dataset) -> Option<(usize, f64, f64)> {
    let n = d.len() as i128;
    let counts = |rows: &[usize]| {
        let mut c = [0i128; 8];
        for &r in rows {
            c[d.label(r)] += 1;
        }
        c
    };
    // Weighted child impurity as num / den, and the parent's as a fraction.
    let impurity = |c: &[i128; 8]| {
        let m: i128 = c.iter().sum();
        (m * m - c.iter().map(|v| v * v).sum::<i128>(), m * m)
    };
    let all: Vec<usize> = (0..d.len()).collect();
    let (pn, pd) = impurity(&counts(&all));

    let mut best: Option<(i128, i128, usize, f64)> = None;
    for f in 0..d.n_features() {
        let mut values: Vec<f64> = (0..d.len()).map(|r| d.value(r, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<usize> = all.iter().copied().filter(|&r| d.value(r, f) <= t).collect();
            let right: Vec<usize> = all.iter().copied().filter(|&r| d.value(r, f) > t).collect();
            let (ln, ld) = impurity(&counts(&left));
            let (rn, rd) = impurity(&counts(&right));
            let (nl, nr) = (left.len() as i128, right.len() as i128);
            // (nl/n)·ln/ld + (nr/n)·rn/rd
            let num = nl * ln * rd + nr * rn * ld;
            let den = n * ld * rd;
            if num * pd >= pn * den {
                continue;
            }
            let better = match best {
                None => true,
                Some((bn, bd, bf, bt)) => {
                    let lhs = num * bd;
                    let rhs = bn * den;
                    lhs < rhs || (lhs == rhs && (f, t) < (bf, bt))
                }
            };
            if better {
                best = Some((num, den, f, t));
            }
        }
    }
    best.map(|(num, den, f, t)| (f, t, pn as f64 / pd as f64 - num as f64 / den as f64))
}

fn split_oracle() -> Outcome {
    let mut rng = rng_from_seed(202);
    let mut mismatches = 0;
    let mut splits = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=20);
        let f = rng.random_range(1..=3);
        let classes = rng.random_range(2..=4);
        // Values on a coarse grid so ties between rows are common.
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| rng.random_range(0..8) as f64 / 4.0).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let d = Dataset::new(rows, labels, (0..f).map(|i| format!("f{i}")).collect()).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let features: Vec<usize> = (0..f).collect();
        let got = best_split(&d, &all, &features, 0.0).map(|s| (s.feature, s.threshold, s.impurity_decrease));
        let expected = brute_force_split(&d);
        splits += expected.is_some() as usize;
        let same = match (got, expected) {
            (None, None) => true,
            (Some((gf, gt, gd)), Some((ef, et, ed))) => gf == ef && gt == et && (gd - ed).abs() < 1e-12,
            _ => false,
        };
        mismatches += !same as usize;
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches on 200 datasets ({splits} with a split)"),
    )
}

fn gini_values() -> Outcome {
    let pure = gini(&[4, 0, 0]).unwrap();
    let half = gini(&[3, 3]).unwrap();
    let third = gini(&[2, 1]).unwrap();
    let pass = pure.abs() < 1e-12 && (half - 0.5).abs() < 1e-12 && (third - 4.0 / 9.0).abs() < 1e-12;
    outcome(pass, format!("pure {pure}, [3,3] {half}, [2,1] {third}"))
}

fn path_gain_and_snr() -> Outcome {
    let gains: Vec<f64> = [0.5, 1.0, 1.5]
        .iter()
        .map(|&d| path_gain(&ChannelConfig::at_distance(d)))
        .collect();
    let gains_ok = gains
        .iter()
        .zip([1.0, 0.25, 1.0 / 9.0])
        .all(|(g, e)| (g - e).abs() < 1e-12);

    let drops: Vec<f64> = (0..10)
        .map(|seed| {
            let chest = chest_trace(BreathingClass::Eupnea, &GeneratorConfig::default(), seed).unwrap();
            let snr = |d: f64| {
                let config = ChannelConfig {
                    seed,
                    ..ChannelConfig::at_distance(d)
                };
                measure_snr(&chest, &acquire(&chest, &config).unwrap(), &config).unwrap()
            };
            snr(0.5) - snr(1.5)
        })
        .collect();
    let drop = median(drops);
    let snr_ok = (drop - 19.1).abs() <= 1.5;
    outcome(
        gains_ok && snr_ok,
        format!("gains {gains:?}, median SNR drop 0.5 m -> 1.5 m {drop:.2} dB"),
    )
}

fn rate_class(rate: f64) -> BreathingClass {
    [
        BreathingClass::Bradypnea,
        BreathingClass::Eupnea,
        BreathingClass::Tachypnea,
    ]
    .into_iter()
    .find(|&c| class_ranges(c).contains(rate, 0.44))
    .expect("rate covered by a class")
}

fn rate_sweep() -> Outcome {
    let mut worst: (f64, f64) = (0.0, 0.0);
    for bpm in 3..=50 {
        let rate = bpm as f64;
        let spec = WaveformSpec {
            class: rate_class(rate),
            rate,
            depth: 0.44,
            duration: 60.0,
            sample_rate: 20.0,
            period_jitter: 0.0,
            amplitude_jitter: 0.0,
            seed: bpm,
        };
        let chest = synth_chest_trace(&spec).unwrap();
        let config = ChannelConfig {
            seed: bpm,
            ..ChannelConfig::default()
        };
        let sensor = acquire(&chest, &config).unwrap();
        let est = extract_features(&sensor, &DspConfig::default()).unwrap().est_rate_bpm;
        if (est - rate).abs() > (worst.1 - worst.0).abs() {
            worst = (rate, est);
        }
    }
    let err = (worst.1 - worst.0).abs();
    outcome(
        err <= 1.0,
        format!("worst error {err:.3} BPM (true {}, estimated {:.3})", worst.0, worst.1),
    )
}

fn folds_serialization_determinism(runs: &SweepRuns) -> Outcome {
    let mut problems = Vec::new();

    let dataset = to_dataset(&runs.features_near).unwrap();
    let plan = stratified_kfold(dataset.labels(), 10, 5).unwrap();
    for class in 0..8 {
        let per_fold: Vec<usize> = (0..10)
            .map(|f| plan.test_rows(f).iter().filter(|&&r| dataset.label(r) == class).count())
            .collect();
        let spread = per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap();
        if spread > 1 {
            problems.push(format!("class {class} fold counts {per_fold:?}"));
        }
    }

    let mut rng = rng_from_seed(303);
    for kind in KINDS {
        let model = train(&dataset, kind, &kind.default_config().with_seed(9)).unwrap();
        let restored = deserialize_model(&serialize_model(&model)).unwrap();
        let differing = (0..1000)
            .filter(|_| {
                let x: Vec<f64> = (0..dataset.n_features())
                    .map(|j| {
                        let v = dataset.value(rng.random_range(0..dataset.len()), j);
                        v * rng.random_range(0.5..1.5)
                    })
                    .collect();
                model.predict(&x).unwrap() != restored.predict(&x).unwrap()
            })
            .count();
        if differing > 0 {
            problems.push(format!("{} round trip changed {differing} predictions", kind.label()));
        }
    }

    let first = distance_sweep(&SweepConfig::default()).unwrap().to_json();
    let second = distance_sweep(&SweepConfig::default()).unwrap().to_json();
    if first != second {
        problems.push("repeated sweep reports differ".into());
    }
    if first != runs.reports[0].to_json() {
        problems.push("sweep report differs from per-distance runs".into());
    }

    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "fold spread <= 1, 2000 predictions preserved, sweep JSON byte-identical".to_string()
        } else {
            problems.join("; ")
        },
    )
}

fn chance_level(runs: &SweepRuns) -> Outcome {
    let base = to_dataset(&runs.features_near).unwrap();
    let accs: Vec<f64> = (0..10)
        .map(|rep| {
            let mut labels = base.labels().to_vec();
            labels.shuffle(&mut rng_from_seed(400 + rep));
            let d = Dataset::new(base.rows().to_vec(), labels, base.feature_names().to_vec()).unwrap();
            cross_validate(&d, ModelKind::Tree, &TrainConfig::tree(), 10, rep)
                .unwrap()
                .mean_accuracy
        })
        .collect();
    let m = median(accs);
    outcome(
        (0.05..=0.20).contains(&m),
        format!("median accuracy with shuffled labels {m:.4}"),
    )
}

fn main() -> ExitCode {
    let runs = sweep_runs();
    let checks: Vec<(&str, Outcome)> = vec![
        ("0.5 m accuracy >= 0.90 for DT and RF", near_floor(&runs)),
        ("accuracy non-increasing 0.5 -> 1 -> 1.5 m (+0.02 slack)", trend(&runs)),
        ("1.5 m median RF >= median DT - 0.01", forest_at_range(&runs)),
        ("noiseless ablation: every cell >= 0.99", noiseless_ablation()),
        ("FFT matches naive DFT within 1e-9", fft_oracle()),
        ("best_split matches brute-force oracle", split_oracle()),
        ("Gini unit values", gini_values()),
        ("path gain values and 19.1 dB SNR drop", path_gain_and_snr()),
        ("rate estimate within 1 BPM for 3..50 BPM", rate_sweep()),
        (
            "fold balance, model round trip, sweep determinism",
            folds_serialization_determinism(&runs),
        ),
        ("chance level with shuffled labels in [0.05, 0.20]", chance_level(&runs)),
    ];

    let mut failed = 0;
    for (name, o) in &checks {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    println!(
        "{} of {} acceptance criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
