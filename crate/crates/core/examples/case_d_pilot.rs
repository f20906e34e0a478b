//! Pilot for the noisy case: runs case_d over many seeds and reports how far
//! the noisy trace error rises above the noise-free peak.
//!
//! ```text
//! cargo run --release -p haptic-cf --example case_d_pilot -- 200
//! ```

use haptic_cf::sim::{preset, run, run_summary};
use rayon::prelude::*;

fn main() {
    let n: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("run count"))
        .unwrap_or(200);

    let clean = run(&preset("case_c").unwrap()).unwrap().summary;
    let clean_peak = clean.peak_trace_error;
    println!(
        "noise-free peak {clean_peak:.6}  final {:.6}",
        clean.final_trace_error
    );

    let base = preset("case_d").unwrap();
    let mut results: Vec<(u64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cfg = base.clone();
            cfg.seed = 10_000 + i;
            let scenario = cfg.validate().unwrap();
            let s = run_summary(&scenario, scenario.r_hat0).unwrap();
            (
                cfg.seed,
                s.peak_trace_error / clean_peak,
                s.final_trace_error,
            )
        })
        .collect();

    results.sort_by(|a, b| a.1.total_cmp(&b.1));
    let ratios: Vec<f64> = results.iter().map(|r| r.1).collect();
    let mut finals: Vec<f64> = results.iter().map(|r| r.2).collect();
    finals.sort_by(f64::total_cmp);
    let q = |v: &[f64], p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
    println!(
        "peak ratio  median {:.4}  p99 {:.4}  max {:.4} (seed {})",
        q(&ratios, 0.5),
        q(&ratios, 0.99),
        ratios[ratios.len() - 1],
        results[results.len() - 1].0
    );
    println!(
        "final trace error  median {:.4}  p99 {:.4}  max {:.4}",
        q(&finals, 0.5),
        q(&finals, 0.99),
        finals[finals.len() - 1]
    );
}
