//! Infinitesimal isometries of surfaces in three-space and the limit bending
//! energy of thin shells.

pub mod bending;
pub mod elliptic;
pub mod error;
pub mod jet;
pub mod numerics;
pub mod parabolic;
pub mod selftest;

pub use error::{Error, Result};
pub use jet::{Jet, Scalar};
pub mod expr;
pub mod geodesic;
pub mod grid;
pub mod hyperbolic;
pub mod isometry;
pub mod killing;
pub mod surface;
