//! Runs the default protocol over a range of seeds and prints the headline
//! quantities, one line per seed.
//!
//! cargo run --release -p frictionlab-core --example seed_scan -- 0 20

use frictionlab::experiments::run_experiment_with;
use frictionlab::{Lexicon, RunConfig};

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    max - min
}

fn main() {
    let args: Vec<u64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let (from, to) = match args.as_slice() {
        [a, b] => (*a, *b),
        _ => (0, 10),
    };
    let lexicon = Lexicon::builtin();
    let mut passing = 0;
    for seed in from..to {
        let config = RunConfig {
            seed,
            ..RunConfig::default()
        };
        let r = run_experiment_with(&config, &lexicon).expect("run").report;
        let kw = &r.comparison.keyword;
        let sem = &r.comparison.semantic;
        let phi_k = kw.friction.unwrap_or(f64::NAN);
        let phi_s = sem.friction.unwrap_or(f64::NAN);
        let red = r.comparison.change.friction_reduction.unwrap_or(f64::NAN);
        let sr = spread(r.tau_sweep.iter().filter_map(|x| x.recall));
        let sp = spread(r.tau_sweep.iter().filter_map(|x| x.precision));
        let kr = spread(
            r.kappa_neighbourhood(1)
                .into_iter()
                .filter_map(|x| x.recall),
        );
        let rows = &r.noise_ladder.rows;
        let first = &rows[0];
        let last = &rows[rows.len() - 1];
        let sem_drop = first.semantic.recall.unwrap() - last.semantic.recall.unwrap();
        let kw_drop = first.keyword.recall.unwrap() - last.keyword.recall.unwrap();
        let ok = (0.45..=0.65).contains(&phi_k)
            && (0.03..=0.15).contains(&phi_s)
            && red >= 0.70
            && sem.recall.unwrap() - kw.recall.unwrap() >= 0.30
            && sem.precision >= kw.precision
            && sem.f1 > kw.f1
            && sr <= 0.05
            && sp <= 0.10
            && kr >= 0.10
            && sem_drop < 0.05
            && kw_drop >= 0.20;
        passing += usize::from(ok);
        println!(
            "seed {seed:>4} {} kappa {} acc {:.3}/{:.3} phi {:.3}/{:.3} red {:.3} P {:.3}/{:.3} F1 {:.3}/{:.3} tau-recall {:.3} tau-prec {:.3} kappa-recall {:.3} ladder {:.3}/{:.3}",
            if ok { "PASS" } else { "fail" },
            r.thresholds.kappa,
            r.thresholds.keyword_acceptance,
            r.thresholds.semantic_acceptance,
            phi_k, phi_s, red,
            kw.precision.unwrap_or(f64::NAN), sem.precision.unwrap_or(f64::NAN),
            kw.f1.unwrap_or(f64::NAN), sem.f1.unwrap_or(f64::NAN),
            sr, sp, kr, kw_drop, sem_drop,
        );
    }
    println!("{passing}/{} seeds pass", to - from);
}
