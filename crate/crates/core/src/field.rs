//! Per-pixel fields over a [`PixelDomain`], ordered by its linear indexing.

use std::sync::Arc;

use crate::domain::PixelDomain;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct DepthField {
    pub domain: Arc<PixelDomain>,
    pub z: Vec<f64>,
}

impl DepthField {
    pub fn new(domain: Arc<PixelDomain>, z: Vec<f64>) -> Result<Self> {
        if z.len() != domain.len() {
            return Err(Error::DimensionMismatch(format!(
                "depth has {} values for {} foreground pixels",
                z.len(),
                domain.len()
            )));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("depth"));
        }
        Ok(Self { domain, z })
    }

    pub fn from_fn(domain: Arc<PixelDomain>, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let z = domain.pixels().iter().map(|p| f(p.u, p.v)).collect();
        Self { domain, z }
    }
}

/// Unit normals `(nx, ny, nz)` per foreground pixel.
#[derive(Clone, Debug)]
pub struct NormalField {
    pub domain: Arc<PixelDomain>,
    pub n: Vec<[f64; 3]>,
}

impl NormalField {
    /// Validates lengths and unit norm (within 1e-6).
    pub fn new(domain: Arc<PixelDomain>, n: Vec<[f64; 3]>) -> Result<Self> {
        if n.len() != domain.len() {
            return Err(Error::DimensionMismatch(format!(
                "normal field has {} values for {} foreground pixels",
                n.len(),
                domain.len()
            )));
        }
        for (i, v) in n.iter().enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("normals"));
            }
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                let p = domain.pixel_of(i);
                return Err(Error::InvalidArgument(format!(
                    "normal at ({}, {}) has length {norm}",
                    p.u, p.v
                )));
            }
        }
        Ok(Self { domain, n })
    }

    /// Normalizes every vector; zero vectors become `(0, 0, 1)`.
    pub fn normalized(domain: Arc<PixelDomain>, raw: Vec<[f64; 3]>) -> Result<Self> {
        let n = raw.into_iter().map(|v| normalize(v).unwrap_or([0.0, 0.0, 1.0])).collect();
        Self::new(domain, n)
    }

    pub fn nx(&self) -> Vec<f64> {
        self.n.iter().map(|v| v[0]).collect()
    }

    pub fn ny(&self) -> Vec<f64> {
        self.n.iter().map(|v| v[1]).collect()
    }

    pub fn nz(&self) -> Vec<f64> {
        self.n.iter().map(|v| v[2]).collect()
    }
}

pub(crate) fn normalize(v: [f64; 3]) -> Option<[f64; 3]> {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| [v[0] / norm, v[1] / norm, v[2] / norm])
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, Mask};

    #[test]
    fn rejects_non_unit_normals() {
        let d = Arc::new(build_domain(&Mask::full(1, 2)).unwrap());
        assert!(NormalField::new(d.clone(), vec![[0.0, 0.0, 1.0], [0.0, 0.0, 2.0]]).is_err());
        let ok = NormalField::normalized(d, vec![[0.0, 0.0, 2.0], [0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(ok.n, vec![[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn depth_length_checked() {
        let d = Arc::new(build_domain(&Mask::full(2, 2)).unwrap());
        assert!(DepthField::new(d.clone(), vec![0.0; 3]).is_err());
        assert!(DepthField::new(d, vec![0.0, 1.0, f64::NAN, 2.0]).is_err());
    }
}
