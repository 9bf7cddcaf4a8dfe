//! Synthetic grid-city toolkit for spatial-cognition experiments on language models.
//!
//! The crate builds a deterministic road-grid world, generates relational and
//! trajectory text corpora from it, parses and scores model-produced navigation
//! text, generates perturbation cases, and trains regression probes over
//! exported hidden-state vectors. No language model is ever run here; the crate
//! produces the inputs for training and consumes the outputs of inference.

pub mod datagen;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pathparse;
pub mod perturb;
pub mod probe;
pub mod rng;
pub mod routing;
pub mod world;

pub use error::{Error, Result};
pub use routing::{Direction, PathStep, RoadGraph, Trajectory};
pub use world::{Coordinate, GridWorld, PoiId, RoadId, WorldConfig};
