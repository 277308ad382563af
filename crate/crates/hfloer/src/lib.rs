//! Primary homoclinic Floer homology for area-preserving planar maps with a
//! hyperbolic fixed point.
//!
//! The pipeline: trace the four half-branches of the invariant manifolds as
//! adaptive polylines (`trace`), find and polish their transversal crossings
//! (`cross`), organize the crossings into a tangle with orbit structure,
//! primary classification and Maslov grading (`tangle`), assemble the integer
//! chain complex whose boundary operator counts embedded bigons (`complex`),
//! and compute its homology over the integers by Smith normal form
//! (`homology`). `pipeline` wires the steps together behind a flat key-value
//! config (`config`) and writes the artifacts (`artifacts`, `svg`).

pub mod artifacts;
pub mod complex;
pub mod config;
pub mod cross;
pub mod error;
pub mod geom;
pub mod homology;
pub mod maps;
pub mod pipeline;
pub mod svg;
pub mod tangle;
pub mod trace;

pub use error::{Error, Result};
