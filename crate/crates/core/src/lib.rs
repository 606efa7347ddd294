//! TreeTracker Join: a backjumping left-deep join operator, its mapping from
//! bushy plans, and a differential testing harness around it.

pub mod engine;
pub mod casefile;
pub mod error;
pub mod harness;
pub mod jointree;
pub mod oracle;
pub mod planalg;
pub mod relmodel;
pub mod synth;

pub use error::{Error, Result};
