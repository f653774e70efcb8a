//! Discrete potential theory: Dirichlet solves, criterion series, the
//! `S = sum p_n` estimator and the almost-regular-shape checker.

pub mod ars;
pub mod bounds;
pub mod constants;
pub mod criteria;
pub mod dirichlet;
pub mod estimator;

pub use bounds::{ever_hit_zero_bound, s_star, StarReport};
pub use criteria::{egs_bracket, egs_criterion, obt_box_criterion, CriterionReport, Schedule, Verdict};
pub use dirichlet::{solve_hit_probability, DirichletProblem, DirichletSolution, Method, Node};
pub use estimator::{s_estimator, DomainSnapshots, SEstimate, SnapshotSource, Term};
pub use ars::{ars_check, ArsReport};
