//! Sheet-metal B-rep analysis: STEP exchange, rule-based feature recognition,
//! feature-enriched face adjacency graphs and a small graph network for
//! bending-time and collision prediction.

pub mod brep;
pub mod datagen;
pub mod enrich;
pub mod featrec;
pub mod geom;
pub mod nn;
pub mod step;
