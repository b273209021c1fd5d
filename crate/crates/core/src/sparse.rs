//! Row-compressed sparse operators and assembly of the differentiation and
//! smoothing matrices over a pixel domain.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::camera::Projection;
use crate::domain::{Offset, Pixel, PixelDomain};
use crate::error::{Error, Result};
use crate::field::DepthField;
use crate::kernel::{
    classic_kernel, coefficient_count, fit_kernels, ClassicKind, DegeneratePolicy, Direction,
    Target,
};

/// Entries below this magnitude are dropped after assembly.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// CSR matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Builds from per-row `(column, value)` lists. Duplicate columns are
    /// summed.
    pub fn from_rows(rows: usize, cols: usize, entries: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if entries.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "{} row lists for {rows} rows",
                entries.len()
            )));
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in entries {
            row.sort_by_key(|&(c, _)| c);
            let start = col_idx.len();
            for (c, v) in row {
                if c >= cols {
                    return Err(Error::DimensionMismatch(format!(
                        "column {c} out of range for {cols} columns"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("operator entries"));
                }
                if col_idx.len() > start && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries = vec![Vec::new(); rows];
        for &(r, c, v) in triplets {
            if r >= rows {
                return Err(Error::DimensionMismatch(format!(
                    "row {r} out of range for {rows} rows"
                )));
            }
            entries[r].push((c, v));
        }
        Self::from_rows(rows, cols, entries)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&c, &v)| (i, c, v))
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "operator has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x`, summing each row in ascending column order.
    pub(crate) fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// `x = Aᵀ y`, accumulating rows in ascending order.
    pub(crate) fn tmatvec_into(&self, y: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&c, &v) in c.iter().zip(v) {
                x[c] += v * yi;
            }
        }
    }

    pub fn tmatvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "operator has {} rows, vector has {} entries",
                self.rows,
                y.len()
            )));
        }
        let mut x = vec![0.0; self.cols];
        self.tmatvec_into(y, &mut x);
        Ok(x)
    }

    /// `diag(d) · A`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "{} row scales for {} rows",
                d.len(),
                self.rows
            )));
        }
        let mut out = self.clone();
        for (i, &s) in d.iter().enumerate() {
            for v in &mut out.values[self.row_ptr[i]..self.row_ptr[i + 1]] {
                *v *= s;
            }
        }
        Ok(out)
    }

    /// `self + alpha · other`.
    pub fn add(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} plus {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = (0..self.rows)
            .map(|i| {
                let (ca, va) = self.row(i);
                let (cb, vb) = other.row(i);
                ca.iter()
                    .copied()
                    .zip(va.iter().copied())
                    .chain(cb.iter().copied().zip(vb.iter().map(|v| alpha * v)))
                    .collect()
            })
            .collect();
        Self::from_rows(self.rows, self.cols, entries)
    }

    /// Removes stored entries with magnitude below `tol`.
    pub fn prune(&self, tol: f64) -> Self {
        let entries = (0..self.rows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .filter(|(_, v)| v.abs() >= tol)
                    .map(|(&c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self::from_rows(self.rows, self.cols, entries).expect("pruning keeps a valid operator")
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }
}

pub fn matvec(a: &SparseOperator, x: &[f64]) -> Result<Vec<f64>> {
    a.matvec(x)
}

/// Vertical concatenation of `scale · block` for each block.
pub fn vstack(blocks: &[(f64, &SparseOperator)]) -> Result<SparseOperator> {
    let cols = match blocks.first() {
        Some((_, a)) => a.cols,
        None => return Err(Error::InvalidArgument("vstack of no blocks".into())),
    };
    let mut out = SparseOperator {
        rows: 0,
        cols,
        row_ptr: vec![0],
        col_idx: Vec::new(),
        values: Vec::new(),
    };
    for &(scale, a) in blocks {
        if a.cols != cols {
            return Err(Error::DimensionMismatch(format!(
                "vstack blocks with {} and {} columns",
                cols, a.cols
            )));
        }
        let base = out.col_idx.len();
        out.col_idx.extend_from_slice(&a.col_idx);
        out.values.extend(a.values.iter().map(|v| scale * v));
        out.row_ptr.extend(a.row_ptr[1..].iter().map(|p| p + base));
        out.rows += a.rows;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    SavitzkyGolay,
    Classic(ClassicKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborhoodMode {
    /// Nearest pixels in the image plane; interior pixels share the square
    /// kernel.
    Pixels2d,
    /// Nearest unprojected 3D points inside a `window×window` box.
    Points3d { window: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// Odd kernel width `d`; neighborhoods hold `d²` pixels.
    pub size: usize,
    /// Polynomial order `k`.
    pub order: usize,
    pub mode: NeighborhoodMode,
    pub degenerate: DegeneratePolicy,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: KernelKind::SavitzkyGolay,
            size: 5,
            order: 3,
            mode: NeighborhoodMode::Pixels2d,
            degenerate: DegeneratePolicy::MinimumNorm,
        }
    }
}

impl KernelConfig {
    pub fn sg(size: usize, order: usize) -> Self {
        Self {
            size,
            order,
            ..Self::default()
        }
    }

    pub fn classic(kind: ClassicKind) -> Self {
        Self {
            kind: KernelKind::Classic(kind),
            size: 3,
            order: 1,
            ..Self::default()
        }
    }

    pub fn with_mode(mut self, mode: NeighborhoodMode) -> Self {
        self.mode = mode;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.size == 0 || self.size % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd, got {}",
                self.size
            )));
        }
        if let NeighborhoodMode::Points3d { window } = self.mode {
            if window == 0 || window % 2 == 0 {
                return Err(Error::InvalidArgument(format!(
                    "3D search window must be odd, got {window}"
                )));
            }
        }
        if self.kind == KernelKind::SavitzkyGolay {
            if self.order < 1 {
                return Err(Error::InvalidArgument(
                    "derivative kernels need polynomial order at least 1".into(),
                ));
            }
            if coefficient_count(self.order) > self.size * self.size {
                return Err(Error::OrderTooHigh {
                    order: self.order,
                    coefficients: coefficient_count(self.order),
                    samples: self.size * self.size,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssemblyStats {
    /// Rows that reused the shared square kernel.
    pub square_rows: usize,
    /// Rows that needed a neighborhood-specific kernel.
    pub custom_rows: usize,
    /// Rows fitted from a rank-truncated (or empty) stencil.
    pub degenerate_rows: Vec<usize>,
    /// Stencil size of each derivative row before small entries are dropped.
    pub stencil_sizes: Vec<usize>,
}

/// `D_u`, `D_v` and `S` over one domain.
#[derive(Clone, Debug)]
pub struct OperatorBundle {
    pub du: SparseOperator,
    pub dv: SparseOperator,
    pub s: SparseOperator,
    pub config: KernelConfig,
    pub stats: AssemblyStats,
}

struct PixelRows {
    du: Vec<(usize, f64)>,
    dv: Vec<(usize, f64)>,
    s: Vec<(usize, f64)>,
    square: bool,
    degenerate: bool,
    stencil: usize,
}

fn scatter(domain: &PixelDomain, center: Pixel, offsets: &[Offset], weights: &[f64]) -> Vec<(usize, f64)> {
    offsets
        .iter()
        .zip(weights)
        .map(|(o, &w)| {
            let j = domain
                .index_at(center.u as i64 + o.du, center.v as i64 + o.dv)
                .expect("stencil member inside the domain");
            (j, w)
        })
        .collect()
}

/// Assembles `D_u`, `D_v` and `S` for `domain`.
///
/// Savitzky-Golay rows use the shared `d×d` kernel wherever the full block is
/// foreground (2D mode only) and a kernel fitted on the `d²` nearest pixels
/// (or 3D points) of the same component elsewhere. Classic stencils switch
/// to a one-sided variant where a neighbor is missing; their `S` is the
/// average of the available 4-neighbors.
///
/// `depth` and `projection` are required in 3D mode and ignored otherwise.
pub fn assemble_operators(
    domain: &PixelDomain,
    config: &KernelConfig,
    depth: Option<&DepthField>,
    projection: Option<&Projection>,
) -> Result<OperatorBundle> {
    config.validate()?;
    let geometry = match config.mode {
        NeighborhoodMode::Pixels2d => None,
        NeighborhoodMode::Points3d { window } => {
            let depth = depth.ok_or_else(|| {
                Error::InvalidArgument("3D neighborhoods need a depth field".into())
            })?;
            let projection = projection.ok_or_else(|| {
                Error::InvalidArgument("3D neighborhoods need a projection".into())
            })?;
            if depth.z.len() != domain.len() {
                return Err(Error::DimensionMismatch(format!(
                    "depth has {} values for {} foreground pixels",
                    depth.z.len(),
                    domain.len()
                )));
            }
            Some((depth.z.as_slice(), *projection, window))
        }
    };

    let rows: Vec<PixelRows> = match config.kind {
        KernelKind::SavitzkyGolay => assemble_sg(domain, config, geometry)?,
        KernelKind::Classic(kind) => assemble_classic(domain, kind, config.degenerate)?,
    };

    let n = domain.len();
    let mut stats = AssemblyStats::default();
    let (mut du, mut dv, mut s) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (i, r) in rows.into_iter().enumerate() {
        if r.square {
            stats.square_rows += 1;
        } else {
            stats.custom_rows += 1;
        }
        if r.degenerate {
            stats.degenerate_rows.push(i);
        }
        stats.stencil_sizes.push(r.stencil);
        du.push(r.du);
        dv.push(r.dv);
        s.push(r.s);
    }
    Ok(OperatorBundle {
        du: SparseOperator::from_rows(n, n, du)?.prune(DROP_TOLERANCE),
        dv: SparseOperator::from_rows(n, n, dv)?.prune(DROP_TOLERANCE),
        s: SparseOperator::from_rows(n, n, s)?.prune(DROP_TOLERANCE),
        config: *config,
        stats,
    })
}

fn assemble_sg(
    domain: &PixelDomain,
    config: &KernelConfig,
    geometry: Option<(&[f64], Projection, usize)>,
) -> Result<Vec<PixelRows>> {
    let d = config.size;
    let targets = [Target::Smooth, Target::DerivU, Target::DerivV];
    let square_offsets = crate::domain::Neighborhood::square(d).offsets();
    let square = fit_kernels(&square_offsets, config.order, &targets, DegeneratePolicy::Error)?;
    let support = match geometry {
        None => domain.square_support(d),
        Some(_) => vec![false; domain.len()],
    };

    domain
        .pixels()
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            if support[i] {
                return Ok(PixelRows {
                    s: scatter(domain, p, &square_offsets, &square[0].weights),
                    du: scatter(domain, p, &square_offsets, &square[1].weights),
                    dv: scatter(domain, p, &square_offsets, &square[2].weights),
                    square: true,
                    degenerate: false,
                    stencil: d * d,
                });
            }
            let want = d * d;
            let members = match geometry {
                None => {
                    let k = want.min(domain.component_size(domain.component_of(i)));
                    domain.knn_pixels(p, k)?.members
                }
                Some((depth, projection, window)) => {
                    let mut m = domain.window_candidates_3d(depth, &projection, p, window)?;
                    m.truncate(want);
                    m
                }
            };
            let offsets: Vec<Offset> = members.iter().map(|m| m.offset_from(p)).collect();
            let kernels = fit_kernels(&offsets, config.order, &targets, config.degenerate)
                .map_err(|e| match e {
                    Error::DegenerateNeighborhood => Error::DegenerateAt(p),
                    e => e,
                })?;
            Ok(PixelRows {
                s: scatter(domain, p, &offsets, &kernels[0].weights),
                du: scatter(domain, p, &offsets, &kernels[1].weights),
                dv: scatter(domain, p, &offsets, &kernels[2].weights),
                square: false,
                degenerate: kernels.iter().any(|k| k.degenerate),
                stencil: offsets.len(),
            })
        })
        .collect()
}

fn fallback_chain(kind: ClassicKind) -> &'static [ClassicKind] {
    use ClassicKind::*;
    match kind {
        Forward => &[Forward, Backward],
        Backward => &[Backward, Forward],
        Central => &[Central, Forward, Backward],
        SmoothedCentral => &[SmoothedCentral, Central, Forward, Backward],
    }
}

fn assemble_classic(
    domain: &PixelDomain,
    kind: ClassicKind,
    policy: DegeneratePolicy,
) -> Result<Vec<PixelRows>> {
    let stencil_row = |p: Pixel, dir: Direction| -> Option<Vec<(usize, f64)>> {
        fallback_chain(kind).iter().find_map(|&k| {
            let kernel = classic_kernel(k, dir);
            kernel
                .offsets
                .iter()
                .zip(&kernel.weights)
                .map(|(o, &w)| {
                    domain
                        .index_at(p.u as i64 + o.du, p.v as i64 + o.dv)
                        .map(|j| (j, w))
                })
                .collect()
        })
    };

    domain
        .pixels()
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let du = stencil_row(p, Direction::U);
            let dv = stencil_row(p, Direction::V);
            let degenerate = du.is_none() || dv.is_none();
            if degenerate && policy == DegeneratePolicy::Error {
                return Err(Error::DegenerateAt(p));
            }
            let (du, dv) = (du.unwrap_or_default(), dv.unwrap_or_default());
            let stencil = du.len().max(dv.len());

            let neighbors: Vec<usize> = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
                .iter()
                .filter_map(|&(a, b)| domain.index_at(p.u as i64 + a, p.v as i64 + b))
                .collect();
            let s = if neighbors.is_empty() {
                vec![(i, 1.0)]
            } else {
                let w = 1.0 / neighbors.len() as f64;
                neighbors.into_iter().map(|j| (j, w)).collect()
            };
            Ok(PixelRows {
                du,
                dv,
                s,
                square: false,
                degenerate,
                stencil,
            })
        })
        .collect()
}
