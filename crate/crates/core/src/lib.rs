//! Core algorithms for studying metastability of a long-range Ising model on
//! random regular graphs: graph construction and structure, the interaction
//! model and its energy algebra, Glauber/Metropolis dynamics with exact and
//! Monte Carlo hitting times, exhaustive energy-landscape analysis,
//! constructive spin-flip paths with audited energy bounds, and the
//! closed-form barrier estimates tying it all together.

pub mod bounds;
pub mod dynamics;
pub mod experiments;
pub mod graph;
pub mod landscape;
pub mod model;
pub mod pathbounds;

pub use graph::{
    all_pairs_distances, cheeger, fixture, generate_random_regular, BoundaryReport, CheegerMode,
    CheegerResult, DistanceOracle, Graph,
};
pub use model::{InteractionKernel, ModelParams, SpinConfiguration};
