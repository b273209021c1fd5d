//! Sparse linear least squares with a minimum-norm contract.
//!
//! [`solve`] runs LSMR (Fong & Saunders, 2011) from the zero vector. All
//! iterates stay in the row space of `A`, so for rank-deficient systems the
//! limit is the minimum-norm minimizer; this is what resolves the free
//! integration constant of orthographic height-from-normals. LSMR's estimate
//! of `‖Aᵀr‖` is non-increasing by construction and is reported per
//! iteration.

use crate::domain::PixelDomain;
use crate::error::{Error, Result};
use crate::sparse::{vstack, SparseOperator};

/// An appended equality `z[index] = value`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pin {
    pub index: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative tolerance for both LSMR stopping tests.
    pub tol_rel: f64,
    /// Iteration cap; `None` means `10·n`.
    pub max_iters: Option<usize>,
    /// Rows `w·z[i] = w·value` appended before solving, with `w = ‖A‖_∞`.
    pub pins: Vec<Pin>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_rel: 1e-10,
            max_iters: None,
            pins: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LsqProblem {
    pub a: SparseOperator,
    pub b: Vec<f64>,
    pub options: SolverOptions,
}

impl LsqProblem {
    pub fn new(a: SparseOperator, b: Vec<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "operator has {} rows, right-hand side has {}",
                a.nrows(),
                b.len()
            )));
        }
        Ok(Self {
            a,
            b,
            options: SolverOptions::default(),
        })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }
}

#[derive(Clone, Debug)]
pub struct LsqSolution {
    pub z: Vec<f64>,
    /// `‖Az − b‖`, recomputed from `z` (pin rows included).
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// LSMR's `‖Aᵀr‖` estimate after each iteration.
    pub normal_residuals: Vec<f64>,
}

/// Stable Givens rotation: returns `(c, s, r)` with `[c s; -s c]·[a; b] = [r; 0]`.
fn sym_ortho(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        (if a == 0.0 { 1.0 } else { a.signum() }, 0.0, a.abs())
    } else if a == 0.0 {
        (0.0, b.signum(), b.abs())
    } else if b.abs() > a.abs() {
        let tau = a / b;
        let s = b.signum() / (1.0 + tau * tau).sqrt();
        let c = s * tau;
        (c, s, b / s)
    } else {
        let tau = b / a;
        let c = a.signum() / (1.0 + tau * tau).sqrt();
        let s = c * tau;
        (c, s, a / c)
    }
}

const MAX_REFINEMENTS: usize = 3;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn scale(x: &mut [f64], s: f64) {
    x.iter_mut().for_each(|v| *v *= s);
}

/// Minimizes `‖Az − b‖²`, returning the minimum-norm minimizer.
///
/// Stops when `‖r‖ ≤ tol·(‖b‖ + ‖A‖‖z‖)` (compatible systems) or
/// `‖Aᵀr‖ ≤ tol·‖A‖‖r‖` (least-squares systems), with LSMR's running
/// estimates of `‖A‖`, `‖r‖` and `‖Aᵀr‖`. Hitting the iteration cap returns
/// the last iterate with `converged = false`.
pub fn solve(problem: &LsqProblem) -> Result<LsqSolution> {
    let LsqProblem { a, b, options } = problem;
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} rows, right-hand side has {}",
            a.nrows(),
            b.len()
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    if a.triplets().any(|(_, _, v)| !v.is_finite()) {
        return Err(Error::NonFinite("operator"));
    }
    let n = a.ncols();
    for pin in &options.pins {
        if pin.index >= n {
            return Err(Error::InvalidArgument(format!(
                "pin index {} out of range for {n} unknowns",
                pin.index
            )));
        }
        if !pin.value.is_finite() {
            return Err(Error::NonFinite("pin value"));
        }
    }

    let pinned;
    let (a, b) = if options.pins.is_empty() {
        (a, b.clone())
    } else {
        let w = a.norm_inf();
        let rows = options.pins.iter().map(|p| vec![(p.index, 1.0)]).collect();
        let pin_rows = SparseOperator::from_rows(options.pins.len(), n, rows)?;
        pinned = vstack(&[(1.0, a), (w, &pin_rows)])?;
        let mut b = b.clone();
        b.extend(options.pins.iter().map(|p| w * p.value));
        (&pinned, b)
    };

    let max_iters = options.max_iters.unwrap_or(10 * n.max(1));
    let (mut z, mut iterations, mut converged, normal_residuals) =
        lsmr(a, &b, options.tol_rel, max_iters);

    // The recurrences drift from the true residual once the Lanczos vectors
    // lose orthogonality. Restarting on the true residual corrects that; each
    // correction lies in the row space, so the minimum-norm property holds.
    let mut r = vec![0.0; a.nrows()];
    let residual = |z: &[f64], r: &mut Vec<f64>| {
        a.matvec_into(z, r);
        r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
        norm(r)
    };
    let mut residual_norm = residual(&z, &mut r);
    for _ in 0..MAX_REFINEMENTS {
        if !converged || iterations >= max_iters || residual_norm == 0.0 {
            break;
        }
        let (dz, its, ok, _) = lsmr(a, &r, options.tol_rel, max_iters - iterations);
        iterations += its;
        converged = ok;
        let candidate: Vec<f64> = z.iter().zip(&dz).map(|(x, d)| x + d).collect();
        let mut r_new = vec![0.0; a.nrows()];
        let new_norm = residual(&candidate, &mut r_new);
        if new_norm > residual_norm {
            break;
        }
        let step = norm(&dz);
        z = candidate;
        r = r_new;
        residual_norm = new_norm;
        if step <= options.tol_rel * norm(&z) {
            break;
        }
    }

    Ok(LsqSolution {
        z,
        residual_norm,
        iterations,
        converged,
        normal_residuals,
    })
}

fn lsmr(a: &SparseOperator, b: &[f64], tol: f64, max_iters: usize) -> (Vec<f64>, usize, bool, Vec<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    let mut x = vec![0.0; n];
    let mut history = Vec::new();

    let mut u = b.to_vec();
    let norm_b = norm(&u);
    let mut beta = norm_b;
    if beta > 0.0 {
        scale(&mut u, 1.0 / beta);
    }
    let mut v = vec![0.0; n];
    a.tmatvec_into(&u, &mut v);
    let mut alpha = norm(&v);
    if alpha > 0.0 {
        scale(&mut v, 1.0 / alpha);
    }

    let mut zetabar = alpha * beta;
    let mut alphabar = alpha;
    let mut rho = 1.0;
    let mut rhobar = 1.0;
    let mut cbar = 1.0;
    let mut sbar = 0.0;

    let mut h = v.clone();
    let mut hbar = vec![0.0; n];

    let mut betadd = beta;
    let mut betad = 0.0;
    let mut rhodold = 1.0;
    let mut tautildeold = 0.0;
    let mut thetatilde = 0.0;
    let mut zeta = 0.0;

    let mut norm_a2 = alpha * alpha;

    if zetabar == 0.0 {
        return (x, 0, true, history);
    }

    let mut au = vec![0.0; m];
    let mut atu = vec![0.0; n];
    for itn in 1..=max_iters {
        // Golub-Kahan bidiagonalization step.
        a.matvec_into(&v, &mut au);
        for (ui, ai) in u.iter_mut().zip(&au) {
            *ui = ai - alpha * *ui;
        }
        beta = norm(&u);
        if beta > 0.0 {
            scale(&mut u, 1.0 / beta);
            a.tmatvec_into(&u, &mut atu);
            for (vi, ai) in v.iter_mut().zip(&atu) {
                *vi = ai - beta * *vi;
            }
            alpha = norm(&v);
            if alpha > 0.0 {
                scale(&mut v, 1.0 / alpha);
            }
        }

        // Rotations (no damping).
        let alphahat = alphabar;
        let rhoold = rho;
        let (c, s, r) = sym_ortho(alphahat, beta);
        rho = r;
        let thetanew = s * alpha;
        alphabar = c * alpha;

        let rhobarold = rhobar;
        let zetaold = zeta;
        let thetabar = sbar * rho;
        let (cb, sb, rb) = sym_ortho(cbar * rho, thetanew);
        cbar = cb;
        sbar = sb;
        rhobar = rb;
        zeta = cbar * zetabar;
        zetabar *= -sbar;

        // Update h, hbar, x.
        let hbar_scale = thetabar * rho / (rhoold * rhobarold);
        let x_scale = zeta / (rho * rhobar);
        let h_scale = thetanew / rho;
        for i in 0..n {
            hbar[i] = h[i] - hbar_scale * hbar[i];
            x[i] += x_scale * hbar[i];
            h[i] = v[i] - h_scale * h[i];
        }

        // Estimate ‖r‖.
        let betaacute = betadd;
        let betahat = c * betaacute;
        betadd = -s * betaacute;

        let thetatildeold = thetatilde;
        let (ctildeold, stildeold, rhotildeold) = sym_ortho(rhodold, thetabar);
        thetatilde = stildeold * rhobar;
        rhodold = ctildeold * rhobar;
        betad = -stildeold * betad + ctildeold * betahat;

        tautildeold = (zetaold - thetatildeold * tautildeold) / rhotildeold;
        let taud = (zeta - thetatilde * tautildeold) / rhodold;
        let norm_r = ((betad - taud).powi(2) + betadd * betadd).sqrt();

        norm_a2 += beta * beta;
        let norm_a = norm_a2.sqrt();
        norm_a2 += alpha * alpha;

        let norm_ar = zetabar.abs();
        history.push(norm_ar);
        let norm_x = norm(&x);

        let test1 = if norm_b > 0.0 { norm_r / norm_b } else { norm_r };
        let test2 = if norm_a * norm_r > 0.0 {
            norm_ar / (norm_a * norm_r)
        } else {
            0.0
        };
        let rtol = if norm_b > 0.0 {
            tol + tol * norm_a * norm_x / norm_b
        } else {
            tol * norm_a * norm_x
        };
        if norm_ar == 0.0 || test2 <= tol || test1 <= rtol {
            return (x, itn, true, history);
        }
    }
    (x, max_iters, false, history)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gauge {
    /// Subtract each component's mean.
    OffsetZeroMean,
    /// Divide each component by its value at a pin pixel, then negate
    /// components whose median is negative. Components without a listed pin
    /// use [`PixelDomain::component_anchor`].
    ScalePin(Vec<usize>),
}

/// Removes the offset or scale ambiguity of a reconstruction, per connected
/// component.
pub fn fix_gauge(z: &[f64], domain: &PixelDomain, gauge: &Gauge) -> Result<Vec<f64>> {
    if z.len() != domain.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} foreground pixels",
            z.len(),
            domain.len()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("depth"));
    }
    let labels = domain.component_labels();
    let nc = domain.num_components();
    let mut out = z.to_vec();
    match gauge {
        Gauge::OffsetZeroMean => {
            let mut sum = vec![0.0; nc];
            for (&c, &v) in labels.iter().zip(z) {
                sum[c] += v;
            }
            for (o, &c) in out.iter_mut().zip(labels) {
                *o -= sum[c] / domain.component_size(c) as f64;
            }
        }
        Gauge::ScalePin(pins) => {
            let mut pivot_index: Vec<Option<usize>> = vec![None; nc];
            for &p in pins {
                if p >= z.len() {
                    return Err(Error::InvalidArgument(format!("pin index {p} out of range")));
                }
                pivot_index[labels[p]].get_or_insert(p);
            }
            for (c, slot) in pivot_index.iter_mut().enumerate() {
                let p = *slot.get_or_insert_with(|| domain.component_anchor(c));
                if z[p].abs() < 1e-12 {
                    return Err(Error::DegeneratePin(p));
                }
            }
            for (o, &c) in out.iter_mut().zip(labels) {
                *o /= z[pivot_index[c].unwrap()];
            }
            for c in 0..nc {
                let mut vals: Vec<f64> = out
                    .iter()
                    .zip(labels)
                    .filter(|(_, &l)| l == c)
                    .map(|(&v, _)| v)
                    .collect();
                vals.sort_by(f64::total_cmp);
                if vals[(vals.len() - 1) / 2] < 0.0 {
                    for (o, &l) in out.iter_mut().zip(labels) {
                        if l == c {
                            *o = -*o;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
