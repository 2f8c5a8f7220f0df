//! Simulation of linear structural equation models under interventions,
//! certification of approximately invariant diagonal representations, PAC
//! budget calculators and a Monte-Carlo generalization harness.

pub mod bounds;
pub mod config;
pub mod design;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod intervention;
pub mod invariance;
pub mod io;
pub mod linalg;
pub mod sem;
pub mod cli;

pub use error::{Error, Result};
pub use intervention::{apply, sample_intervention, Intervention, InterventionDistribution};
pub use invariance::{Head, Representation};
pub use sem::{build_sem, Dataset, Edge, Noise, SemModel};
