//! Dynamic programming on discretized inventory grids.
//!
//! The crate covers the full periodic-review pipeline: discrete demand laws
//! on a lattice, piecewise-linear holding/backorder costs and the regime
//! constants they induce, grid MDPs with finite/infinite-horizon value
//! iteration, (s,S) threshold extraction and structural verification,
//! vanishing-discount average-cost diagnostics, and container-observation
//! POMDPs solved by exact Bayes filtering over the reachable belief tree.
//!
//! Everything here is `no_std` + `alloc`; file formats and the command line
//! live in the `invctl` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod average;
pub mod costs;
pub mod demand;
mod error;
pub mod inventory;
pub mod lattice;
pub mod mdp;
pub mod pomdp;
mod rng;
pub mod simulate;
pub mod structure;

pub use error::{Error, Result};

pub use average::{DiscountLadder, LadderEntry, RelativeValue};
pub use costs::{CostModel, HoldingCost, NAlpha, RegimeConstants};
pub use demand::Demand;
pub use inventory::{GFunction, InventoryDynamics, InventoryModel};
pub use lattice::Lattice;
pub use mdp::{Clamping, Dynamics, GridMdp, RelativeSolution, ValueSolution, ViOptions};
pub use pomdp::{Belief, BeliefTree, BoundaryConvention, ContainerPartition, ContainerSpec};
pub use simulate::SimulationSummary;
pub use structure::{PolicyStructure, Regime, StepRule, Thresholds, Violation};

/// Default tolerance for argmin-set membership and tie detection.
pub const TIE_TOL: f64 = 1e-9;
