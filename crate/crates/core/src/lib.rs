//! Minimal geodesic paths and region-driven active contours on images.
//!
//! Distances are computed by a fast-marching solver over Riemannian and
//! Randers metrics, planar or lifted to orientations, and geodesics are
//! recovered by descending the distance map.

pub mod config;
pub mod curve;
pub mod eikonal;
pub mod error;
pub mod features;
pub mod geodesic;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod region;

pub use error::Error;
