//! Scene-change analytics.
//!
//! `scenekit` measures how the amenity mix of urban areas changes over time
//! through four complementary models:
//!
//! - **development**: fixed-effects panel regressions of scene performance
//!   scores on education and income ([`panel_fe`], [`scenescore`]);
//! - **differentiation**: a taxonomy-depth specialization index and its
//!   relation to business density ([`specialization`], [`panel_fe`]);
//! - **diffusion**: S- and C-shaped adoption curves and cohort summaries
//!   ([`diffusion`]);
//! - **defense**: tension/structure series built from review logs and
//!   lagged-response tests ([`defense`]).
//!
//! Every estimator has a seeded synthetic generator in [`simulate`] with a
//! known ground truth, and [`cli`] ties the pieces into batch runs that
//! write CSV/JSON reports and a reproducibility manifest.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory, one per
//! capability.

pub mod cli;
pub mod data;
pub mod defense;
pub mod diffusion;
pub mod panel_fe;
pub mod rng;
pub mod scenescore;
pub mod simulate;
pub mod specialization;
pub mod stats;
pub mod svg;

pub use data::{
    parse_amenity_panel, parse_census, parse_events, parse_openings, parse_taxonomy, parse_weights,
    AmenityPanel, CensusTable, DataError, DimensionWeightTable, Opening, OpeningLog, ReviewEvent,
    ReviewEventLog, Taxonomy, WidePanel,
};
