//! Normals-from-depth and height-from-normals.
//!
//! Both pipelines rest on the tangency condition `∂p/∂u · n = 0`,
//! `∂p/∂v · n = 0`, where `p(u, v)` is the 3D point seen at pixel `(u, v)`.
//! With orthographic projection `p = (u, v, z)` and the conditions reduce to
//! `n_z·z_u = −n_x`, `n_z·z_v = −n_y`. With perspective projection
//! `p = ((u − c_u)z/f, (v − c_v)z/f, z)` they stay linear in `z`:
//!
//! ```text
//! (n_x(u − c_u)/f + n_y(v − c_v)/f + n_z)·z_u + (n_x/f)·z = 0
//! (n_x(u − c_u)/f + n_y(v − c_v)/f + n_z)·z_v + (n_y/f)·z = 0
//! ```
//!
//! Replacing `z_u`, `z_v` by `D_u z`, `D_v z` yields a sparse least-squares
//! system, optionally augmented with the smoothness rows `λ(S − I)z = 0` and
//! depth-prior rows `ω z = ω z_prior`.
//!
//! The orthographic system determines `z` up to one constant per connected
//! component and the perspective system up to one scale per component. The
//! constant is removed by subtracting the component mean (the minimum-norm
//! solution has it at zero already); the scale by pinning one pixel.

use std::sync::Arc;

use log::warn;

use crate::camera::{CameraIntrinsics, Projection};
use crate::domain::PixelDomain;
use crate::error::{Error, Result};
use crate::field::{cross, normalize, DepthField, NormalField};
use crate::solver::{fix_gauge, solve, Gauge, LsqProblem, LsqSolution, Pin, SolverOptions};
use crate::sparse::{
    assemble_operators, vstack, KernelConfig, NeighborhoodMode, OperatorBundle, SparseOperator,
};

/// Depth prior `ω·w_i·z_i = ω·w_i·prior_i`; rows with `w_i = 0` are omitted.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthPrior {
    pub z: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DepthPrior {
    /// Prior on every pixel with unit weight.
    pub fn dense(z: Vec<f64>) -> Self {
        let weights = vec![1.0; z.len()];
        Self { z, weights }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionOptions {
    pub projection: Projection,
    /// Weight of the smoothness rows `λ(S − I)z = 0`.
    pub lambda: f64,
    pub prior: Option<DepthPrior>,
    /// Weight of the depth-prior rows.
    pub omega: f64,
    pub kernel: KernelConfig,
    pub solver: SolverOptions,
    /// Perspective pin pixel (linear index). Components without a pin use the
    /// pixel nearest their centroid.
    pub pin: Option<usize>,
    /// Depth assigned to the pin pixels.
    pub pin_value: f64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            projection: Projection::orthographic(),
            lambda: 0.1,
            prior: None,
            omega: 0.0,
            kernel: KernelConfig::default(),
            solver: SolverOptions::default(),
            pin: None,
            pin_value: 1.0,
        }
    }
}

impl ReconstructionOptions {
    pub fn perspective(intrinsics: CameraIntrinsics) -> Self {
        Self {
            projection: Projection::Perspective(intrinsics),
            ..Self::default()
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.omega >= 0.0) {
            return Err(Error::InvalidArgument(
                "lambda and omega must be non-negative".into(),
            ));
        }
        if let Projection::Orthographic { pixel_pitch } = self.projection {
            if !(pixel_pitch > 0.0) {
                return Err(Error::InvalidArgument("pixel pitch must be positive".into()));
            }
        }
        if self.omega > 0.0 {
            let prior = self.prior.as_ref().ok_or_else(|| {
                Error::InvalidArgument("a positive prior weight needs a prior depth field".into())
            })?;
            if prior.z.len() != n || prior.weights.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "prior has {} values and {} weights for {n} pixels",
                    prior.z.len(),
                    prior.weights.len()
                )));
            }
            if prior.z.iter().chain(&prior.weights).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("depth prior"));
            }
        }
        Ok(())
    }

    fn active_prior(&self) -> Option<&DepthPrior> {
        self.prior.as_ref().filter(|_| self.omega > 0.0)
    }
}

/// Estimated normals plus the pixels whose tangents were degenerate; those
/// hold `(0, 0, 1)`.
#[derive(Clone, Debug)]
pub struct NormalEstimate {
    pub normals: NormalField,
    pub invalid: Vec<bool>,
}

impl NormalEstimate {
    pub fn invalid_count(&self) -> usize {
        self.invalid.iter().filter(|&&b| b).count()
    }
}

/// Differentiates `depth` with the configured operators (3D neighborhoods
/// allowed) and returns `normalize(t_u × t_v)`.
///
/// The orientation is that of the cross product: `n_z > 0` for orthographic
/// height fields, and `(0, 0, 1)` for a fronto-parallel plane in front of a
/// perspective camera.
pub fn normals_from_depth(depth: &DepthField, opts: &ReconstructionOptions) -> Result<NormalEstimate> {
    let domain = &depth.domain;
    let bundle = assemble_operators(domain, &opts.kernel, Some(depth), Some(&opts.projection))?;
    let zu = bundle.du.matvec(&depth.z)?;
    let zv = bundle.dv.matvec(&depth.z)?;

    let mut invalid = vec![false; domain.len()];
    let n = domain
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (z, gu, gv) = (depth.z[i], zu[i], zv[i]);
            let (tu, tv) = match opts.projection {
                Projection::Orthographic { pixel_pitch: s } => ([s, 0.0, gu], [0.0, s, gv]),
                Projection::Perspective(k) => {
                    let (x, y) = (p.u as f64 - k.cu, p.v as f64 - k.cv);
                    (
                        [(x * gu + z) / k.f, y * gu / k.f, gu],
                        [x * gv / k.f, (y * gv + z) / k.f, gv],
                    )
                }
            };
            normalize(cross(tu, tv)).unwrap_or_else(|| {
                invalid[i] = true;
                [0.0, 0.0, 1.0]
            })
        })
        .collect();
    let estimate = NormalEstimate {
        normals: NormalField {
            domain: domain.clone(),
            n,
        },
        invalid,
    };
    if estimate.invalid_count() > 0 {
        warn!("{} pixels have degenerate tangents", estimate.invalid_count());
    }
    Ok(estimate)
}

fn smoothness_block(bundle: &OperatorBundle) -> Result<SparseOperator> {
    bundle.s.add(&SparseOperator::identity(bundle.s.nrows()), -1.0)
}

fn prior_block(prior: &DepthPrior, n: usize) -> Result<(SparseOperator, Vec<f64>)> {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        let w = prior.weights[i];
        if w != 0.0 {
            rows.push(vec![(i, w)]);
            rhs.push(w * prior.z[i]);
        }
    }
    Ok((SparseOperator::from_rows(rows.len(), n, rows)?, rhs))
}

/// Appends the optional smoothness and prior blocks to a tangency system.
fn augment(
    mut blocks: Vec<(f64, SparseOperator)>,
    mut b: Vec<f64>,
    bundle: &OperatorBundle,
    opts: &ReconstructionOptions,
) -> Result<(SparseOperator, Vec<f64>)> {
    let n = bundle.du.ncols();
    if opts.lambda > 0.0 {
        blocks.push((opts.lambda, smoothness_block(bundle)?));
        b.extend(std::iter::repeat(0.0).take(n));
    }
    if let Some(prior) = opts.active_prior() {
        let (p, rhs) = prior_block(prior, n)?;
        blocks.push((opts.omega, p));
        b.extend(rhs.into_iter().map(|v| opts.omega * v));
    }
    let refs: Vec<(f64, &SparseOperator)> = blocks.iter().map(|(s, a)| (*s, a)).collect();
    Ok((vstack(&refs)?, b))
}

fn check_normals(normals: &NormalField, bundle: &OperatorBundle) -> Result<()> {
    if normals.n.len() != bundle.du.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} normals for operators over {} pixels",
            normals.n.len(),
            bundle.du.ncols()
        )));
    }
    Ok(())
}

/// Stacks `diag(n_z)·D_u z = −s·n_x`, `diag(n_z)·D_v z = −s·n_y` (`s` the
/// pixel pitch), plus the smoothness and prior blocks when their weights are
/// positive.
pub fn build_ortho_system(
    normals: &NormalField,
    bundle: &OperatorBundle,
    opts: &ReconstructionOptions,
) -> Result<LsqProblem> {
    check_normals(normals, bundle)?;
    opts.validate(normals.n.len())?;
    let pitch = match opts.projection {
        Projection::Orthographic { pixel_pitch } => pixel_pitch,
        Projection::Perspective(_) => 1.0,
    };
    let nz = normals.nz();
    let blocks = vec![
        (1.0, bundle.du.scale_rows(&nz)?),
        (1.0, bundle.dv.scale_rows(&nz)?),
    ];
    let b: Vec<f64> = normals
        .n
        .iter()
        .map(|v| -pitch * v[0])
        .chain(normals.n.iter().map(|v| -pitch * v[1]))
        .collect();
    let (a, b) = augment(blocks, b, bundle, opts)?;
    Ok(LsqProblem::new(a, b)?.with_options(opts.solver.clone()))
}

/// Stacks the homogeneous perspective tangency rows, the optional smoothness
/// and prior blocks, and one pin row per component not covered by the prior.
pub fn build_persp_system(
    normals: &NormalField,
    bundle: &OperatorBundle,
    intrinsics: &CameraIntrinsics,
    opts: &ReconstructionOptions,
) -> Result<LsqProblem> {
    check_normals(normals, bundle)?;
    opts.validate(normals.n.len())?;
    let domain = &normals.domain;
    let f = intrinsics.f;
    let mut g = Vec::with_capacity(domain.len());
    let (mut ex, mut ey) = (Vec::with_capacity(domain.len()), Vec::with_capacity(domain.len()));
    for (p, n) in domain.pixels().iter().zip(&normals.n) {
        let (x, y) = (p.u as f64 - intrinsics.cu, p.v as f64 - intrinsics.cv);
        g.push(n[0] * x / f + n[1] * y / f + n[2]);
        ex.push(n[0] / f);
        ey.push(n[1] / f);
    }
    let row_x = bundle.du.scale_rows(&g)?.add(&SparseOperator::diagonal(&ex), 1.0)?;
    let row_y = bundle.dv.scale_rows(&g)?.add(&SparseOperator::diagonal(&ey), 1.0)?;
    let (a, b) = augment(vec![(1.0, row_x), (1.0, row_y)], vec![0.0; 2 * domain.len()], bundle, opts)?;

    let mut solver = opts.solver.clone();
    solver.pins.extend(
        pin_indices(domain, opts)
            .into_iter()
            .map(|index| Pin {
                index,
                value: opts.pin_value,
            }),
    );
    Ok(LsqProblem::new(a, b)?.with_options(solver))
}

/// Components that carry at least one positive prior weight.
fn prior_components(domain: &PixelDomain, opts: &ReconstructionOptions) -> Vec<bool> {
    let mut covered = vec![false; domain.num_components()];
    if let Some(prior) = opts.active_prior() {
        for (i, &w) in prior.weights.iter().enumerate() {
            if w != 0.0 {
                covered[domain.component_of(i)] = true;
            }
        }
    }
    covered
}

/// One pin per component without prior coverage.
fn pin_indices(domain: &PixelDomain, opts: &ReconstructionOptions) -> Vec<usize> {
    let covered = prior_components(domain, opts);
    (0..domain.num_components())
        .filter(|&c| !covered[c])
        .map(|c| match opts.pin {
            Some(p) if p < domain.len() && domain.component_of(p) == c => p,
            _ => domain.component_anchor(c),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub depth: DepthField,
    pub solution: LsqSolution,
}

/// Integrates a normal field into depth.
///
/// Orthographic results have zero mean per component; perspective results
/// equal `pin_value` at each component's pin. Components constrained by the
/// depth prior are returned as solved.
pub fn height_from_normals(normals: &NormalField, opts: &ReconstructionOptions) -> Result<Reconstruction> {
    if let NeighborhoodMode::Points3d { .. } = opts.kernel.mode {
        return Err(Error::InvalidArgument(
            "height-from-normals needs 2D neighborhoods; 3D neighborhoods require a depth map".into(),
        ));
    }
    let domain = &normals.domain;
    opts.validate(domain.len())?;
    let bundle = assemble_operators(domain, &opts.kernel, None, None)?;
    let covered = prior_components(domain, opts);

    let (solution, gauge) = match opts.projection {
        Projection::Orthographic { .. } => {
            let problem = build_ortho_system(normals, &bundle, opts)?;
            (solve(&problem)?, Gauge::OffsetZeroMean)
        }
        Projection::Perspective(k) => {
            let problem = build_persp_system(normals, &bundle, &k, opts)?;
            (solve(&problem)?, Gauge::ScalePin(pin_indices(domain, opts)))
        }
    };
    if !solution.converged {
        warn!(
            "least-squares solve stopped after {} iterations without converging",
            solution.iterations
        );
    }

    let z = if covered.iter().all(|&c| c) {
        solution.z.clone()
    } else {
        let fixed = fix_gauge(&solution.z, domain, &gauge)?;
        let scale = match gauge {
            Gauge::OffsetZeroMean => 1.0,
            Gauge::ScalePin(_) => opts.pin_value,
        };
        fixed
            .into_iter()
            .zip(&solution.z)
            .enumerate()
            .map(|(i, (g, &raw))| if covered[domain.component_of(i)] { raw } else { scale * g })
            .collect()
    };

    Ok(Reconstruction {
        depth: DepthField {
            domain: Arc::clone(domain),
            z,
        },
        solution,
    })
}
