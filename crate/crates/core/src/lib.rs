//! Constructive packings of unit squares into strips, tilted quadrilaterals,
//! right trapezoids and large squares, with a verifier that checks every
//! layout and measures its wasted area.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod quad_primitive;
pub mod square;
pub mod strip;
pub mod trapezoid;
pub mod verifier;

pub use error::{PackError, Result};
pub use geometry::{GridBlock, PlacedSquare, Point, Region};
pub use verifier::{measure_waste, verify_layout, Layout, PackingStats, Violation};
