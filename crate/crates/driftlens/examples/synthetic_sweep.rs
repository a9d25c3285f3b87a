//! Sweeps the published tuning grid on a seeded synthetic drift task and
//! prints the best parameter combination per method.
//!
//! Run with: cargo run --release -p driftlens --example synthetic_sweep

use driftlens::dataio::{synth_two_domain, uniform_drift};
use driftlens::harness::{grid_search, Classifier, Norm, ParamGrids};
use driftlens::Method;
use std::time::Instant;

fn main() {
    let dim = 16;
    let drift = uniform_drift(dim, 5.0);
    let (source, target) = synth_two_domain(7, 60, 4, dim, &drift).unwrap();

    let mut grids = ParamGrids::ucsd();
    grids.d.retain(|&d| d <= dim);

    for method in Method::ALL {
        let t0 = Instant::now();
        let outcome = grid_search(
            &source,
            &target,
            method,
            &grids,
            Classifier::OneNn,
            Norm::Zscore,
        )
        .unwrap();
        match outcome.best {
            Some(best) => println!(
                "{:>5}: accuracy {:6.2} at d={} lambda={} kappa={} mu={} ({} cells, {:.2}s)",
                method.to_string(),
                best.accuracy,
                best.params.d,
                best.params.lambda,
                best.params.kappa,
                best.params.mu,
                outcome.surface.records.len(),
                t0.elapsed().as_secs_f64()
            ),
            None => println!("{:>5}: every cell failed", method.to_string()),
        }
    }
}
