//! Least-squares surface reconstruction on arbitrary pixel domains.
//!
//! Derivative and smoothing operators are assembled from 2D Savitzky-Golay
//! kernels fitted on nearest-pixel neighborhoods, so any foreground mask
//! (holes, thin parts, several components) gets consistent, high-order
//! stencils. The operators drive two pipelines:
//!
//! - [`reconstruct::normals_from_depth`]: differentiate a depth map and take
//!   the cross product of the tangent vectors.
//! - [`reconstruct::height_from_normals`]: integrate a normal map by solving
//!   the tangency equations as a sparse linear least-squares problem, under
//!   orthographic or perspective projection.
//!
//! ```
//! use std::sync::Arc;
//! use sgrecon::domain::{Mask, PixelDomain};
//! use sgrecon::reconstruct::{height_from_normals, ReconstructionOptions};
//! use sgrecon::synth::{gradients_to_normals, peaks_surface};
//!
//! let surface = peaks_surface(32, 32, 1.0);
//! let normals = gradients_to_normals(surface.depth.domain.clone(), &surface.gx, &surface.gy);
//! let result = height_from_normals(&normals, &ReconstructionOptions::default()).unwrap();
//! assert_eq!(result.depth.z.len(), 32 * 32);
//! # let _ = (Arc::new(PixelDomain::new(&Mask::full(2, 2)).unwrap()),);
//! ```

pub mod camera;
pub mod domain;
pub mod error;
pub mod field;
pub mod io;
pub mod kernel;
pub mod reconstruct;
pub mod solver;
pub mod sparse;
pub mod synth;

pub use camera::{CameraIntrinsics, Projection};
pub use domain::{build_domain, Mask, Neighborhood, Offset, Pixel, PixelDomain};
pub use error::{Error, Result};
pub use field::{DepthField, NormalField};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/domains.md")]
    mod domains {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/height_from_normals.md")]
    mod height_from_normals {}
    #[doc = include_str!("../../../book/src/normals_from_depth.md")]
    mod normals_from_depth {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
