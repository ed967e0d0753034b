//! Fixtures shared by the benchmarks.

use abc_rates::engine::{run_rejection, simulate_observed, RunConfig};
use abc_rates::models::{UniformRiskModel, UniformShapeModel};
use abc_rates::{ParameterPoint, ReferenceTable, Sampler, SummaryVector};

pub fn shape_problem(n: usize, k0: usize) -> (UniformShapeModel, SummaryVector) {
    let model = UniformShapeModel::new(n, k0, 0.5).expect("valid shape model");
    let observed = simulate_observed(&model, &ParameterPoint::scalar(0.5), 1);
    (model, observed)
}

/// A risk-model table with `accepted` draws at tolerance `epsilon`.
pub fn risk_table(accepted: usize, epsilon: f64) -> ReferenceTable {
    let model = UniformRiskModel::new(10_000, 0.5).expect("valid risk model");
    let observed = simulate_observed(&model, &ParameterPoint::scalar(0.5), 1);
    let cfg = RunConfig::fixed(u64::MAX, epsilon, 2)
        .with_sampler(Sampler::Localized)
        .until_accepted(accepted);
    run_rejection(&model, &observed, &cfg).expect("risk run")
}

/// Log-log points with a slope change at 10^-1.6.
pub fn bent_curve(points: usize) -> Vec<(f64, f64)> {
    (0..points)
        .map(|i| {
            let le = -2.2 + 1.4 * i as f64 / (points - 1) as f64;
            let ly = -3.0 + 2.0 * (le + 1.6f64).max(0.0) + 0.01 * ((i * 7919) % 13) as f64 / 13.0;
            (10f64.powf(le), 10f64.powf(ly))
        })
        .collect()
}
