//! Zonotope reachability for hybrid automata driven by sampled input
//! trajectories, with a delayed robot contact model on top.

pub mod automaton;
pub mod constrained;
pub mod contact;
pub mod engine;
pub mod error;
pub mod export;
pub mod guard;
pub mod input;
pub mod interval;
pub mod linprog;
pub mod par;
pub mod reach_linear;
pub mod reach_quadratic;
pub mod runner;
pub mod safety;
pub mod scenario;
pub mod sim;
pub mod switching;
pub mod zonotope;

pub use constrained::ConstrainedZonotope;
pub use error::{ReachError, Result};
pub use interval::{Interval, IntervalVector};
pub use zonotope::{HalfSpace, Hyperplane, Zonotope};
