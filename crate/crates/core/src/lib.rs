//! Simple random walks interacting monotonically with growing subgraphs
//! of Z^d.

pub mod egs;
pub mod error;
pub mod harness;
pub mod interactions;
pub mod lattice;
pub mod potential;
pub mod psrw;
pub mod rng;
pub mod walker;

#[cfg(test)]
mod proptests;

pub use error::{Error, Result};
pub use lattice::{ball, bernoulli_domain, neighbors, Domain, Edge, GrowingDomain, Metric, Site};
pub use rng::Streams;
pub use walker::{run, srw_step, RunConfig, StoppingLog, WalkState};
pub use egs::{EgsConfig, LayeredChain, Schedule};
pub use harness::{run_experiment, ExperimentConfig, Model, ReplicaResult};
pub use interactions::{BoundaryPolicy, Interaction, InteractionPolicy, Radius};
pub use potential::{CriterionReport, DirichletProblem, Method, Verdict};
pub use psrw::{ProbeBudget, Strategy, StretchedLattice};
