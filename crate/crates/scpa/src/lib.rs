//! Minimum-channel periodic scheduling for collaborative-perception networks
//! with hard age-of-information guarantees.
//!
//! A fusion center monitors regions through overlapping sources. Each region
//! carries a hard age deadline; fusing updates from several sources only works
//! while their generation times stay within the region's tolerance. The
//! pipeline activates the cheapest sufficient sources, groups them onto
//! divisibility-chain intervals so fusions can always be aligned, and searches
//! offsets that minimize the number of channels. An exact slot-level simulator
//! verifies every produced schedule, and a covering linear program yields a
//! channel lower bound to compare against.

pub mod activation;
pub mod arith;
pub mod error;
pub mod experiment;
pub mod grouping;
pub mod lower_bound;
pub mod model;
pub mod offsets;
pub mod pipeline;
pub mod render;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use model::{HomogeneousSchedule, Instance, RegionSpec, ScheduleEntry, SourceId};
pub use pipeline::{solve_scpa, SolveConfig, SolveReport};
