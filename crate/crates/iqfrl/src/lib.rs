//! Quantified fuzzy rule learning for robot controllers.
//!
//! The crate learns rule bases whose antecedents quantify over raw range
//! scans ("the distance is low in at least 60 percent of the right sector"),
//! so no hand-crafted feature preprocessing is needed. It also ships a small
//! 2D simulator used to generate wall-following training data and to score
//! learned controllers.

pub mod classify;
pub mod cli;
pub mod dataset;
pub mod fusion;
pub mod fuzzy;
pub mod kb_io;
pub mod learn;
pub mod model;
pub mod select;
pub mod sim;
