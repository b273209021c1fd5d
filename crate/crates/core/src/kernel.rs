//! 2D Savitzky-Golay kernels on arbitrary neighborhoods, and the classic
//! finite-difference stencils they are compared against.
//!
//! A kernel is the row of the design-matrix pseudoinverse that maps the
//! neighborhood samples to one coefficient of the locally fitted polynomial
//!
//! ```text
//! z(u, v) ≈ Σ_{a+b ≤ k} c_ab · du^a · dv^b
//! ```
//!
//! `c_00` is the smoothed value, `c_10` the derivative along `u` and `c_01`
//! the derivative along `v`, all evaluated at the neighborhood center.

use nalgebra::DMatrix;

use crate::domain::{Neighborhood, Offset};
use crate::error::{Error, Result};

/// Which polynomial coefficient a kernel extracts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Smooth,
    DerivU,
    DerivV,
}

impl Target {
    /// Lowest polynomial order at which the target exists.
    pub fn min_order(self) -> usize {
        match self {
            Target::Smooth => 0,
            Target::DerivU | Target::DerivV => 1,
        }
    }

    fn exponents(self) -> (u32, u32) {
        match self {
            Target::Smooth => (0, 0),
            Target::DerivU => (1, 0),
            Target::DerivV => (0, 1),
        }
    }
}

/// Number of monomials of total degree `≤ order`.
pub const fn coefficient_count(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Monomial exponents `(a, b)` for `du^a dv^b`, in lexicographic order:
/// `(0,0), (0,1), …, (0,k), (1,0), …, (k,0)`.
pub fn monomials(order: usize) -> Vec<(u32, u32)> {
    let k = order as u32;
    (0..=k).flat_map(|a| (0..=k - a).map(move |b| (a, b))).collect()
}

fn column_of(order: usize, target: Target) -> usize {
    let want = target.exponents();
    monomials(order)
        .iter()
        .position(|&e| e == want)
        .expect("target below minimum order")
}

/// The `m × c` matrix of monomials evaluated at each neighborhood offset.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub order: usize,
    pub matrix: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

fn design_from_offsets(offsets: &[Offset], order: usize) -> DMatrix<f64> {
    let exps = monomials(order);
    DMatrix::from_fn(offsets.len(), exps.len(), |i, j| {
        let (a, b) = exps[j];
        (offsets[i].du as f64).powi(a as i32) * (offsets[i].dv as f64).powi(b as i32)
    })
}

pub fn design_matrix(neighborhood: &Neighborhood, order: usize) -> Result<DesignMatrix> {
    let m = neighborhood.len();
    let c = coefficient_count(order);
    if m < c {
        return Err(Error::OrderTooHigh {
            order,
            coefficients: c,
            samples: m,
        });
    }
    Ok(DesignMatrix {
        order,
        matrix: design_from_offsets(&neighborhood.offsets(), order),
    })
}

/// A stencil: weights on pixel offsets relative to the center.
#[derive(Clone, Debug, PartialEq)]
pub struct SgKernel {
    pub offsets: Vec<Offset>,
    pub weights: Vec<f64>,
    pub target: Target,
    /// Polynomial order the kernel is exact for.
    pub order: usize,
    /// Set when the weights come from a rank-truncated pseudoinverse.
    pub degenerate: bool,
}

impl SgKernel {
    /// Applies the kernel to samples given as a function of the offset.
    pub fn apply(&self, mut sample: impl FnMut(Offset) -> f64) -> f64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(&o, &w)| w * sample(o))
            .sum()
    }

    pub fn weight(&self, offset: Offset) -> f64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .filter(|(&o, _)| o == offset)
            .map(|(_, &w)| w)
            .sum()
    }
}

/// Truncated SVD pseudoinverse. Returns the `c × m` pseudoinverse and whether
/// the design matrix has full column rank at the truncation tolerance
/// `max(m, c) · ε · σ_max`.
fn pseudoinverse(design: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let (m, c) = design.shape();
    let a = faer::Mat::from_fn(m, c, |i, j| design[(i, j)]);
    let svd = a.thin_svd().expect("SVD converges on finite input");
    let (u, v, sigma) = (svd.U(), svd.V(), svd.S().column_vector());
    let sigma_max = (0..sigma.nrows()).map(|j| sigma[j]).fold(0.0, f64::max);
    let tol = m.max(c) as f64 * f64::EPSILON * sigma_max;

    let mut pinv = DMatrix::zeros(c, m);
    let mut rank = 0;
    for j in 0..sigma.nrows() {
        let s = sigma[j];
        if s <= tol {
            continue;
        }
        rank += 1;
        // pinv += v_j · u_jᵀ / σ_j
        for col in 0..m {
            let uj = u[(col, j)] / s;
            for row in 0..c {
                pinv[(row, col)] += v[(row, j)] * uj;
            }
        }
    }
    (pinv, rank == c)
}

/// How to treat neighborhoods that stay rank-deficient at the lowest usable
/// order (collinear pixels, single-pixel components).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DegeneratePolicy {
    /// Fail with [`Error::DegenerateNeighborhood`].
    Error,
    /// Use the minimum-norm least-squares fit from the rank-truncated
    /// pseudoinverse. Unidentifiable derivatives come out as zero.
    #[default]
    MinimumNorm,
}

/// Fits kernels for several targets, sharing decompositions. The order is
/// lowered one step at a time until the design matrix has full rank.
pub(crate) fn fit_kernels(
    offsets: &[Offset],
    order: usize,
    targets: &[Target],
    policy: DegeneratePolicy,
) -> Result<Vec<SgKernel>> {
    let mut out: Vec<Option<SgKernel>> = vec![None; targets.len()];
    let make = |pinv: &DMatrix<f64>, k: usize, t: Target, degenerate: bool| SgKernel {
        offsets: offsets.to_vec(),
        weights: pinv.row(column_of(k, t)).iter().copied().collect(),
        target: t,
        order: k,
        degenerate,
    };

    for k in (0..=order).rev() {
        if out.iter().all(Option::is_some) {
            break;
        }
        if coefficient_count(k) > offsets.len() {
            continue;
        }
        let needed = out
            .iter()
            .zip(targets)
            .any(|(o, t)| o.is_none() && t.min_order() <= k);
        if !needed {
            continue;
        }
        let (pinv, full_rank) = pseudoinverse(&design_from_offsets(offsets, k));
        if !full_rank {
            continue;
        }
        for (slot, &t) in out.iter_mut().zip(targets) {
            if slot.is_none() && t.min_order() <= k {
                *slot = Some(make(&pinv, k, t, false));
            }
        }
    }

    for (slot, &t) in out.iter_mut().zip(targets) {
        if slot.is_some() {
            continue;
        }
        match policy {
            DegeneratePolicy::Error => return Err(Error::DegenerateNeighborhood),
            DegeneratePolicy::MinimumNorm => {
                let k = t.min_order();
                let (pinv, _) = pseudoinverse(&design_from_offsets(offsets, k));
                *slot = Some(make(&pinv, k, t, true));
            }
        }
    }
    Ok(out.into_iter().map(|k| k.expect("filled above")).collect())
}

/// Savitzky-Golay kernel of polynomial order `order` for `target`.
///
/// If the design matrix is rank-deficient the order is lowered until it is
/// not; the returned kernel records the order actually used. Fails if even
/// the lowest order for the target is rank-deficient.
pub fn sg_kernel(neighborhood: &Neighborhood, order: usize, target: Target) -> Result<SgKernel> {
    if order < target.min_order() {
        return Err(Error::InvalidArgument(format!(
            "{target:?} needs polynomial order at least {}",
            target.min_order()
        )));
    }
    design_matrix(neighborhood, order)?;
    let mut k = fit_kernels(
        &neighborhood.offsets(),
        order,
        &[target],
        DegeneratePolicy::Error,
    )?;
    Ok(k.remove(0))
}

/// Like [`sg_kernel`], but starts from the highest feasible order not above
/// `order` and applies `policy` to neighborhoods that stay degenerate.
pub fn sg_kernel_with_policy(
    neighborhood: &Neighborhood,
    order: usize,
    target: Target,
    policy: DegeneratePolicy,
) -> Result<SgKernel> {
    let mut k = fit_kernels(&neighborhood.offsets(), order, &[target], policy)?;
    Ok(k.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassicKind {
    Forward,
    Backward,
    Central,
    SmoothedCentral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    U,
    V,
}

impl Direction {
    pub fn target(self) -> Target {
        match self {
            Direction::U => Target::DerivU,
            Direction::V => Target::DerivV,
        }
    }
}

/// Fixed finite-difference stencils. `v` grows downwards, so the forward
/// difference along `v` uses the pixel below.
pub fn classic_kernel(kind: ClassicKind, direction: Direction) -> SgKernel {
    // Stencils written along u as (du, dv, weight); transposed for v.
    let along_u: Vec<(i64, i64, f64)> = match kind {
        ClassicKind::Forward => vec![(0, 0, -1.0), (1, 0, 1.0)],
        ClassicKind::Backward => vec![(-1, 0, -1.0), (0, 0, 1.0)],
        ClassicKind::Central => vec![(-1, 0, -0.5), (1, 0, 0.5)],
        ClassicKind::SmoothedCentral => vec![
            (-1, -1, -1.0 / 12.0),
            (1, -1, 1.0 / 12.0),
            (-1, 0, -4.0 / 12.0),
            (1, 0, 4.0 / 12.0),
            (-1, 1, -1.0 / 12.0),
            (1, 1, 1.0 / 12.0),
        ],
    };
    let order = match kind {
        ClassicKind::Forward | ClassicKind::Backward => 1,
        ClassicKind::Central | ClassicKind::SmoothedCentral => 2,
    };
    let (offsets, weights) = along_u
        .into_iter()
        .map(|(a, b, w)| match direction {
            Direction::U => (Offset::new(a, b), w),
            Direction::V => (Offset::new(b, a), w),
        })
        .unzip();
    SgKernel {
        offsets,
        weights,
        target: direction.target(),
        order,
        degenerate: false,
    }
}
