use rand::seq::SliceRandom;
use serde::Serialize;

use crate::metrics::{compute_metrics, MetricsError, MetricsReport};
use crate::rng;

use super::config::Scenario;
use super::kernel::run_scenario;
use super::trace::Trace;

/// Result of one scenario in a batch.
#[derive(Clone, Debug, Serialize)]
pub struct BatchResult {
    pub id: String,
    /// Position the scenario ran at.
    pub position: usize,
    pub trace: Trace,
    #[serde(skip)]
    pub metrics: Result<MetricsReport, MetricsError>,
}

/// Runs scenarios in an order shuffled by `order_seed`. Each run owns its
/// state, so results do not depend on the order; results come back in input
/// order.
pub fn run_batch(scenarios: &[Scenario], order_seed: u64) -> Vec<BatchResult> {
    let mut order: Vec<usize> = (0..scenarios.len()).collect();
    order.shuffle(&mut rng::stream(order_seed, "batch", 0));
    let mut out: Vec<Option<BatchResult>> = vec![None; scenarios.len()];
    for (position, &i) in order.iter().enumerate() {
        let trace = run_scenario(&scenarios[i]);
        let metrics = compute_metrics(&trace);
        out[i] = Some(BatchResult {
            id: scenarios[i].config.id.clone(),
            position,
            trace,
            metrics,
        });
    }
    out.into_iter().map(|r| r.expect("every index ran")).collect()
}
