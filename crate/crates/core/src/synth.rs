//! Synthetic surfaces, gradient noise and evaluation metrics.
//!
//! Gradients are per pixel: `gx = ∂z/∂u`, `gy = ∂z/∂v`. Noise comes from a
//! counter-based generator keyed by `(seed, stream, pixel, channel)`, so a
//! realization does not depend on iteration order or thread count.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::domain::{build_domain, Mask, PixelDomain};
use crate::error::{Error, Result};
use crate::field::{dot, DepthField, NormalField};
use crate::reconstruct::{height_from_normals, ReconstructionOptions};

#[derive(Clone, Debug)]
pub struct SyntheticSurface {
    pub name: String,
    pub depth: DepthField,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl SyntheticSurface {
    pub fn domain(&self) -> &Arc<PixelDomain> {
        &self.depth.domain
    }

    pub fn normals(&self) -> NormalField {
        gradients_to_normals(self.domain().clone(), &self.gx, &self.gy)
    }
}

/// Value and `(∂/∂x, ∂/∂y)` of the peaks function.
pub fn peaks(x: f64, y: f64) -> (f64, f64, f64) {
    let e1 = (-x * x - (y + 1.0).powi(2)).exp();
    let e2 = (-x * x - y * y).exp();
    let e3 = (-(x + 1.0).powi(2) - y * y).exp();
    let q = x / 5.0 - x.powi(3) - y.powi(5);

    let z = 3.0 * (1.0 - x).powi(2) * e1 - 10.0 * q * e2 - e3 / 3.0;
    let dx = (-6.0 * (1.0 - x) - 6.0 * x * (1.0 - x).powi(2)) * e1
        - 10.0 * ((0.2 - 3.0 * x * x) - 2.0 * x * q) * e2
        + (2.0 / 3.0) * (x + 1.0) * e3;
    let dy = -6.0 * (1.0 - x).powi(2) * (y + 1.0) * e1
        - 10.0 * (-5.0 * y.powi(4) - 2.0 * y * q) * e2
        + (2.0 / 3.0) * y * e3;
    (z, dx, dy)
}

fn full_domain(w: usize, h: usize) -> Arc<PixelDomain> {
    Arc::new(build_domain(&Mask::full(w, h)).expect("non-empty grid"))
}

fn sample(
    name: &str,
    domain: Arc<PixelDomain>,
    f: impl Fn(usize, usize) -> (f64, f64, f64),
) -> SyntheticSurface {
    let vals: Vec<_> = domain.pixels().iter().map(|p| f(p.u, p.v)).collect();
    SyntheticSurface {
        name: name.to_string(),
        depth: DepthField {
            domain,
            z: vals.iter().map(|v| v.0).collect(),
        },
        gx: vals.iter().map(|v| v.1).collect(),
        gy: vals.iter().map(|v| v.2).collect(),
    }
}

/// Peaks on a full `w×h` grid; `u ∈ [0, w−1]` maps to `x ∈ [−3, 3]`, same
/// for `v` and `y`.
///
/// # Panics
/// If `w` or `h` is below 2.
pub fn peaks_surface(w: usize, h: usize, amplitude: f64) -> SyntheticSurface {
    assert!(w >= 2 && h >= 2, "peaks grid needs at least 2×2 pixels");
    let (sx, sy) = (6.0 / (w - 1) as f64, 6.0 / (h - 1) as f64);
    sample("peaks", full_domain(w, h), |u, v| {
        let (z, dx, dy) = peaks(-3.0 + sx * u as f64, -3.0 + sy * v as f64);
        (amplitude * z, amplitude * dx * sx, amplitude * dy * sy)
    })
}

/// Sum of three anisotropic Gaussian bumps on a full grid.
pub fn gaussian_bumps_surface(w: usize, h: usize) -> SyntheticSurface {
    let (wf, hf) = (w as f64, h as f64);
    let bumps = [
        (0.30 * wf, 0.35 * hf, 0.12 * wf, 0.15 * hf, 6.0),
        (0.65 * wf, 0.60 * hf, 0.18 * wf, 0.10 * hf, -4.0),
        (0.45 * wf, 0.80 * hf, 0.08 * wf, 0.08 * hf, 3.0),
    ];
    sample("bumps", full_domain(w, h), |u, v| {
        let (u, v) = (u as f64, v as f64);
        bumps.iter().fold((0.0, 0.0, 0.0), |acc, &(cu, cv, su, sv, a)| {
            let (du, dv) = (u - cu, v - cv);
            let g = a * (-0.5 * (du * du / (su * su) + dv * dv / (sv * sv))).exp();
            (acc.0 + g, acc.1 - g * du / (su * su), acc.2 - g * dv / (sv * sv))
        })
    })
}

/// Hemisphere of radius `0.45·min(w, h)` over a disc mask of 90% of that
/// radius, so gradients stay bounded.
pub fn hemisphere_surface(w: usize, h: usize) -> SyntheticSurface {
    let r = 0.45 * w.min(h) as f64;
    let (cu, cv) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mask = Mask::from_fn(w, h, |u, v| {
        (u as f64 - cu).hypot(v as f64 - cv) <= 0.9 * r
    });
    let domain = Arc::new(build_domain(&mask).expect("hemisphere mask needs a larger grid"));
    sample("hemisphere", domain, |u, v| {
        let (x, y) = (u as f64 - cu, v as f64 - cv);
        let z = (r * r - x * x - y * y).sqrt();
        (z, -x / z, -y / z)
    })
}

/// Looks up a shipped surface by name: `peaks`, `bumps` or `hemisphere`.
pub fn named_surface(name: &str, w: usize, h: usize) -> Result<SyntheticSurface> {
    if w < 8 || h < 8 {
        return Err(Error::InvalidArgument(format!(
            "synthetic surfaces need at least 8×8 pixels, got {w}×{h}"
        )));
    }
    match name {
        "peaks" => Ok(peaks_surface(w, h, 1.0)),
        "bumps" => Ok(gaussian_bumps_surface(w, h)),
        "hemisphere" => Ok(hemisphere_surface(w, h)),
        other => Err(Error::InvalidArgument(format!("unknown surface '{other}'"))),
    }
}

/// `n = (−gx, −gy, 1)/‖·‖`.
///
/// # Panics
/// If the gradient lengths differ from the domain size.
pub fn gradients_to_normals(domain: Arc<PixelDomain>, gx: &[f64], gy: &[f64]) -> NormalField {
    assert!(gx.len() == domain.len() && gy.len() == domain.len());
    let n = gx
        .iter()
        .zip(gy)
        .map(|(&p, &q)| {
            let s = (p * p + q * q + 1.0).sqrt();
            [-p / s, -q / s, 1.0 / s]
        })
        .collect();
    NormalField { domain, n }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Standard normal sample for `(seed, stream, index)`.
pub fn gaussian_at(seed: u64, stream: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 64);
    rng.sample(StandardNormal)
}

/// Adds `N(0, σ²)` to every gradient sample. Equivalent to
/// [`add_gradient_noise_stream`] with stream 0.
pub fn add_gradient_noise(surface: &SyntheticSurface, spec: NoiseSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    add_gradient_noise_stream(surface, spec, 0)
}

/// Noise for independent trials: streams `2·stream` and `2·stream + 1` feed
/// `gx` and `gy`.
pub fn add_gradient_noise_stream(
    surface: &SyntheticSurface,
    spec: NoiseSpec,
    stream: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(spec.sigma >= 0.0) || !spec.sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {}", spec.sigma)));
    }
    let perturb = |g: &[f64], channel: u64| -> Vec<f64> {
        if spec.sigma == 0.0 {
            return g.to_vec();
        }
        g.par_iter()
            .enumerate()
            .map(|(i, &v)| v + spec.sigma * gaussian_at(spec.seed, 2 * stream + channel, i as u64))
            .collect()
    };
    Ok((perturb(&surface.gx, 0), perturb(&surface.gy, 1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alignment {
    /// Subtract `mean(z − z_gt)`.
    Offset,
    /// Multiply `z` by `s* = zᵀz_gt / zᵀz`.
    Scale,
    None,
}

pub fn rmse_aligned(z: &[f64], gt: &[f64], mode: Alignment) -> Result<f64> {
    if z.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted values vs {} ground truth",
            z.len(),
            gt.len()
        )));
    }
    if z.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let n = z.len() as f64;
    let (offset, scale) = match mode {
        Alignment::None => (0.0, 1.0),
        Alignment::Offset => (z.iter().zip(gt).map(|(a, b)| a - b).sum::<f64>() / n, 1.0),
        Alignment::Scale => {
            let zz: f64 = z.iter().map(|a| a * a).sum();
            if zz == 0.0 {
                return Err(Error::InvalidArgument("scale alignment of an all-zero depth".into()));
            }
            (0.0, z.iter().zip(gt).map(|(a, b)| a * b).sum::<f64>() / zz)
        }
    };
    let sse: f64 = z
        .iter()
        .zip(gt)
        .map(|(a, b)| (scale * a - offset - b).powi(2))
        .sum();
    Ok((sse / n).sqrt())
}

/// Per-pixel angles in degrees.
pub fn angular_errors(n: &[[f64; 3]], gt: &[[f64; 3]]) -> Vec<f64> {
    n.iter()
        .zip(gt)
        .map(|(a, b)| dot(*a, *b).clamp(-1.0, 1.0).acos().to_degrees())
        .collect()
}

/// Lower median of the values, `None` when empty.
pub fn lower_median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let k = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    Some(*m)
}

/// Median angular error in degrees over pixels where `valid` is true (all
/// pixels when `None`). Returns 0 when no pixel is valid.
pub fn median_angular_error(n: &[[f64; 3]], gt: &[[f64; 3]], valid: Option<&[bool]>) -> Result<f64> {
    if n.len() != gt.len() || valid.is_some_and(|v| v.len() != n.len()) {
        return Err(Error::DimensionMismatch("normal fields differ in length".into()));
    }
    let mut errs: Vec<f64> = angular_errors(n, gt)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| valid.is_none_or(|v| v[*i]))
        .map(|(_, e)| e)
        .collect();
    Ok(lower_median(&mut errs).unwrap_or(0.0))
}

#[derive(Clone, Debug)]
pub struct SweepMethod {
    pub name: String,
    pub options: ReconstructionOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    pub method: String,
    pub trial: usize,
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sigma,method,trial,rmse\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{:e}", r.sigma, r.method, r.trial, r.rmse).unwrap();
        }
        s
    }

    /// Mean RMSE over trials; `NaN` if there are no rows for the pair.
    pub fn mean(&self, sigma: f64, method: &str) -> f64 {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.sigma == sigma && r.method == method)
            .map(|r| r.rmse)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Noisy-gradient sweep: for every `(sigma, trial)` one noise realization is
/// drawn and integrated with every method, scored by offset-aligned RMSE.
/// Rows are ordered by sigma, then method, then trial.
pub fn noise_sweep(
    surface: &SyntheticSurface,
    sigmas: &[f64],
    methods: &[SweepMethod],
    trials: usize,
    seed: u64,
) -> Result<SweepReport> {
    let jobs: Vec<(usize, usize, usize)> = (0..sigmas.len())
        .flat_map(|s| (0..methods.len()).flat_map(move |m| (0..trials).map(move |t| (s, m, t))))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(s, m, t)| {
            let sigma = sigmas[s];
            let stream = ((s as u64) << 32) | t as u64;
            let (gx, gy) = add_gradient_noise_stream(surface, NoiseSpec { sigma, seed }, stream)?;
            let normals = gradients_to_normals(surface.domain().clone(), &gx, &gy);
            let rec = height_from_normals(&normals, &methods[m].options)?;
            Ok(SweepRow {
                sigma,
                method: methods[m].name.clone(),
                trial: t,
                rmse: rmse_aligned(&rec.depth.z, &surface.depth.z, Alignment::Offset)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { rows })
}
