//! Shape control of deformable objects from raw point clouds, using modal
//! features extracted on a graph built from a geometric primitive.

pub mod controller;
pub mod error;
pub mod features;
pub mod graph;
pub mod harness;
pub mod plant;
pub mod projection;
pub mod sensor;

pub use error::{Error, Result};
