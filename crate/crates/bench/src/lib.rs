//! Shared setup helpers for the criterion benchmarks: pinned instances so
//! numbers are comparable across runs.

use metastable_core::{
    all_pairs_distances, fixture, DistanceOracle, Graph, InteractionKernel, ModelParams,
};

/// The 10-vertex benchmark fixture with its distance oracle.
pub fn petersen() -> (Graph, DistanceOracle) {
    let g = fixture("petersen").expect("fixture exists");
    let d = all_pairs_distances(&g);
    (g, d)
}

/// Reference parameter set used by all throughput benchmarks.
pub fn params() -> ModelParams {
    ModelParams { kernel: InteractionKernel::Exponential { j: 1.0 }, h: 0.9, beta: 1.5 }
}
