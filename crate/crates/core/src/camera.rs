//! Camera models used to unproject pixels to 3D points.

use crate::error::{Error, Result};

/// Pinhole intrinsics in pixel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub f: f64,
    pub cu: f64,
    pub cv: f64,
}

impl CameraIntrinsics {
    pub fn new(f: f64, cu: f64, cv: f64) -> Result<Self> {
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "focal length must be positive, got {f}"
            )));
        }
        if !cu.is_finite() || !cv.is_finite() {
            return Err(Error::NonFinite("principal point"));
        }
        Ok(Self { f, cu, cv })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    /// `p = (s·u, s·v, z)` with `s` the pixel pitch.
    Orthographic { pixel_pitch: f64 },
    /// `p = ((u - cu)·z/f, (v - cv)·z/f, z)`.
    Perspective(CameraIntrinsics),
}

impl Projection {
    pub const fn orthographic() -> Self {
        Projection::Orthographic { pixel_pitch: 1.0 }
    }

    pub fn unproject(&self, u: f64, v: f64, z: f64) -> [f64; 3] {
        match *self {
            Projection::Orthographic { pixel_pitch } => [pixel_pitch * u, pixel_pitch * v, z],
            Projection::Perspective(k) => [(u - k.cu) * z / k.f, (v - k.cv) * z / k.f, z],
        }
    }

    pub fn intrinsics(&self) -> Option<CameraIntrinsics> {
        match *self {
            Projection::Perspective(k) => Some(k),
            Projection::Orthographic { .. } => None,
        }
    }
}

impl Default for Projection {
    fn default() -> Self {
        Projection::orthographic()
    }
}
