//! Engine for co-creative tile-level design with machine-learned partners.
//!
//! The crate covers the whole pipeline: the level model and palette
//! ([`level`]), session event logs ([`events`]), credited SMDP datasets
//! ([`dataset`]), a small deterministic neural layer ([`nn`]), the three
//! baseline partners ([`agents`]), the convolutional partner ([`cnn`]),
//! replay evaluation ([`eval`]) and the turn-based session manager
//! ([`session`]).

pub mod level;
pub mod events;
pub mod dataset;
pub mod nn;
pub mod agents;
pub mod cnn;
pub mod eval;
pub mod session;
