//! Acceptance suite. Prints one PASS/FAIL line per criterion and a summary.
//! Exits with status 1 on any failure only when `SGRECON_ACCEPTANCE_STRICT`
//! is set.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sgrecon::domain::{build_domain, Mask, Neighborhood, Offset, Pixel, PixelDomain};
use sgrecon::io::{depth_to_map, encode_pfm, normals_to_map};
use sgrecon::kernel::{design_matrix, monomials, sg_kernel, ClassicKind, Target};
use sgrecon::reconstruct::{height_from_normals, normals_from_depth, DepthPrior, ReconstructionOptions};
use sgrecon::solver::{solve, LsqProblem};
use sgrecon::sparse::{assemble_operators, vstack, KernelConfig, NeighborhoodMode, SparseOperator};
use sgrecon::synth::{
    angular_errors, lower_median, noise_sweep, peaks_surface, rmse_aligned, Alignment, SweepMethod,
};
use sgrecon::{CameraIntrinsics, DepthField, NormalField};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Numerical rank from the singular values of the QR factor `R`, which
/// match those of `m` and are computed more accurately.
fn rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().qr().r().singular_values();
    let max = sv.max();
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * max;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Minimum-norm least-squares solution `A⁺b` from the eigendecomposition of
/// `AᵀA`, dropping eigenvalues below `1e-10·λ_max`.
fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let eig = (a.transpose() * a).symmetric_eigen();
    let atb = a.transpose() * b;
    let max = eig.eigenvalues.max();
    let mut x = DVector::zeros(a.ncols());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-10 * max {
            let v = eig.eigenvectors.column(i);
            x += v * (v.dot(&atb) / l);
        }
    }
    x
}

fn full(w: usize, h: usize) -> Arc<PixelDomain> {
    Arc::new(build_domain(&Mask::full(w, h)).unwrap())
}

// 1
fn kernel_golden() -> Outcome {
    let hood = Neighborhood::square(3);
    let k = sg_kernel(&hood, 2, Target::DerivU).unwrap();
    let design = design_matrix(&hood, 2).unwrap().matrix;
    // Independent oracle: (CᵀC)⁻¹Cᵀ by LU.
    let ctc = design.transpose() * &design;
    let oracle = ctc.lu().solve(&design.transpose()).unwrap();
    let col = monomials(2).iter().position(|&m| m == (1, 0)).unwrap();

    let mut fig = 0.0f64;
    let mut exact = 0.0f64;
    let mut orc = 0.0f64;
    for (i, (o, w)) in k.offsets.iter().zip(&k.weights).enumerate() {
        let printed = (o.du as f64) * 0.167;
        fig = fig.max((w - printed).abs());
        exact = exact.max((w - o.du as f64 / 6.0).abs());
        orc = orc.max((w - oracle[(col, i)]).abs());
    }
    outcome(
        fig <= 1e-3 && orc <= 1e-12 && exact <= 1e-12,
        format!("max |w - ±0.167| = {fig:.2e}, max |w - u/6| = {exact:.2e}, max |w - oracle| = {orc:.2e}"),
    )
}

fn random_poly(rng: &mut ChaCha8Rng, order: usize) -> Vec<((u32, u32), f64)> {
    monomials(order)
        .into_iter()
        .map(|m| (m, rng.random_range(-1.0..1.0)))
        .collect()
}

fn eval_poly(p: &[((u32, u32), f64)], o: Offset) -> f64 {
    p.iter()
        .map(|&((a, b), c)| c * (o.du as f64).powi(a as i32) * (o.dv as f64).powi(b as i32))
        .sum()
}

fn coefficient(p: &[((u32, u32), f64)], m: (u32, u32)) -> f64 {
    p.iter().find(|e| e.0 == m).map_or(0.0, |e| e.1)
}

fn random_knn_neighborhood(rng: &mut ChaCha8Rng, k_min: usize) -> Neighborhood {
    loop {
        let mask = Mask::from_fn(12, 12, |_, _| rng.random_bool(0.7));
        let Ok(d) = build_domain(&mask) else { continue };
        let i = rng.random_range(0..d.len());
        let avail = d.component_size(d.component_of(i));
        if avail < k_min {
            continue;
        }
        let k = rng.random_range(k_min..=avail.min(25));
        return d.knn_pixels(d.pixel_of(i), k).unwrap();
    }
}

// 2
fn polynomial_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    let mut resampled = 0usize;
    for trial in 0..100 {
        let hood = if trial < 50 {
            Neighborhood::square([3, 5, 7][trial % 3])
        } else {
            random_knn_neighborhood(&mut rng, 12)
        };
        for order in 1..=3usize {
            if monomials(order).len() > hood.len() {
                continue;
            }
            let kernels: Vec<_> = [Target::Smooth, Target::DerivU, Target::DerivV]
                .iter()
                .map(|&t| sg_kernel(&hood, order, t))
                .collect();
            if kernels.iter().any(|k| k.as_ref().map_or(true, |k| k.order != order || k.degenerate)) {
                resampled += 1;
                continue;
            }
            let p = random_poly(&mut rng, order);
            let max_sample = hood.offsets().iter().map(|&o| eval_poly(&p, o).abs()).fold(0.0, f64::max);
            let tol = 1e-8 * (1.0 + max_sample);
            for (k, m) in kernels.iter().zip([(0, 0), (1, 0), (0, 1)]) {
                let got = k.as_ref().unwrap().apply(|o| eval_poly(&p, o));
                let err = (got - coefficient(&p, m)).abs();
                worst = worst.max(err / tol);
                if err > tol {
                    failures += 1;
                }
                checks += 1;
            }
        }
    }
    outcome(
        failures == 0 && checks >= 600,
        format!("{checks} checks, {failures} failures, worst err/tol = {worst:.2e}, {resampled} rank-deficient fits skipped"),
    )
}

fn grown_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, size: usize) -> Mask {
    let mut on = vec![false; w * h];
    let start = rng.random_range(0..w * h);
    on[start] = true;
    let mut members = vec![start];
    while members.len() < size {
        let i = members[rng.random_range(0..members.len())];
        let (u, v) = ((i % w) as i64, (i / w) as i64);
        let (du, dv) = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.random_range(0..4)];
        let (nu, nv) = (u + du, v + dv);
        if nu >= 0 && nv >= 0 && (nu as usize) < w && (nv as usize) < h {
            let j = nv as usize * w + nu as usize;
            if !on[j] {
                on[j] = true;
                members.push(j);
            }
        }
    }
    Mask::new(w, h, on).unwrap()
}

fn derivative_rank(mask: &Mask, config: &KernelConfig) -> (usize, usize, usize) {
    let d = Arc::new(build_domain(mask).unwrap());
    let b = assemble_operators(&d, config, None, None).unwrap();
    let stacked = vstack(&[(1.0, &b.du), (1.0, &b.dv)]).unwrap();
    (rank(&stacked.to_dense()), d.len(), d.num_components())
}

fn rank_masks() -> Vec<(Mask, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut masks = Vec::new();
    for _ in 0..20 {
        let (w, h) = (rng.random_range(2..=8), rng.random_range(2..=8));
        let size = rng.random_range(2..=w * h);
        masks.push((grown_mask(&mut rng, w, h, size), true));
    }
    for _ in 0..10 {
        // Blobs in the left and right thirds of an 8×8 grid never touch.
        let (nl, nr) = (rng.random_range(1..=24), rng.random_range(1..=24));
        let left = grown_mask(&mut rng, 3, 8, nl);
        let right = grown_mask(&mut rng, 3, 8, nr);
        let mask = Mask::from_fn(8, 8, |u, v| match u {
            0..=2 => left.get(u, v),
            5..=7 => right.get(u - 5, v),
            _ => false,
        });
        masks.push((mask, false));
    }
    masks
}

/// Masks whose rank differs from `n − #components`, and the total deficit.
fn rank_mismatches(masks: &[(Mask, bool)], config: &KernelConfig) -> (usize, usize) {
    let mut bad = 0;
    let mut deficit = 0;
    for (mask, connected) in masks {
        let (r, n, c) = derivative_rank(mask, config);
        let expected = n - c;
        if (*connected && c != 1) || r != expected {
            bad += 1;
            deficit += expected.saturating_sub(r);
        }
    }
    (bad, deficit)
}

// 3
fn rank_property() -> Outcome {
    let masks = rank_masks();
    let (sg_bad, sg_deficit) = rank_mismatches(&masks, &KernelConfig::default());
    let (fw_bad, _) = rank_mismatches(&masks, &KernelConfig::classic(ClassicKind::Forward));
    outcome(
        sg_bad == 0,
        format!(
            "20 connected + 10 two-component masks; default sg: {sg_bad} masks below n - #components (total deficit {sg_deficit}); fw: {fw_bad} mismatches"
        ),
    )
}

fn ortho_peaks() -> (f64, Vec<u8>) {
    let s = peaks_surface(64, 64, 1.0);
    let opts = ReconstructionOptions {
        lambda: 0.1,
        kernel: KernelConfig::sg(5, 3),
        ..Default::default()
    };
    let rec = height_from_normals(&s.normals(), &opts).unwrap();
    let rmse = rmse_aligned(&rec.depth.z, &s.depth.z, Alignment::Offset).unwrap();
    (rmse, encode_pfm(&depth_to_map(&rec.depth)))
}

// 4
fn ortho_round_trip() -> (Outcome, f64) {
    let (rmse, _) = ortho_peaks();
    (outcome(rmse <= 1e-2, format!("offset-aligned RMSE = {rmse:.3e} (bound 1e-2)")), rmse)
}

fn ray(k: &CameraIntrinsics, p: Pixel) -> [f64; 3] {
    [(p.u as f64 - k.cu) / k.f, (p.v as f64 - k.cv) / k.f, 1.0]
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let s = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / s, v[1] / s, v[2] / s]
}

/// Depth of the plane `n·X = n_z·z0` (through `(0, 0, z0)`) along each ray.
fn plane_depth(k: &CameraIntrinsics, p: Pixel, n: [f64; 3], z0: f64) -> f64 {
    let r = ray(k, p);
    n[2] * z0 / (n[0] * r[0] + n[1] * r[1] + n[2] * r[2])
}

fn persp_planes() -> (f64, f64, Vec<u8>) {
    let k = CameraIntrinsics::new(100.0, 15.5, 15.5).unwrap();
    let d = full(32, 32);
    let opts = ReconstructionOptions {
        lambda: 0.0,
        ..ReconstructionOptions::perspective(k)
    };

    let n = unit([0.3, -0.2, 1.0]);
    let gt: Vec<f64> = d.pixels().iter().map(|&p| plane_depth(&k, p, n, 2.0)).collect();
    let normals = NormalField::new(d.clone(), vec![n; d.len()]).unwrap();
    let rec = height_from_normals(&normals, &opts).unwrap();
    let rms_gt = (gt.iter().map(|z| z * z).sum::<f64>() / gt.len() as f64).sqrt();
    let rel = rmse_aligned(&rec.depth.z, &gt, Alignment::Scale).unwrap() / rms_gt;

    let flat = NormalField::new(d.clone(), vec![[0.0, 0.0, 1.0]; d.len()]).unwrap();
    let pinned = ReconstructionOptions {
        pin_value: 2.5,
        ..opts
    };
    let rec_flat = height_from_normals(&flat, &pinned).unwrap();
    let flat_err = rec_flat.depth.z.iter().map(|z| (z - 2.5).abs()).fold(0.0, f64::max);

    let mut bytes = encode_pfm(&depth_to_map(&rec.depth));
    bytes.extend(encode_pfm(&depth_to_map(&rec_flat.depth)));
    (rel, flat_err, bytes)
}

// 5
fn persp_round_trip() -> Outcome {
    let (rel, flat, _) = persp_planes();
    outcome(
        rel <= 1e-4 && flat <= 1e-8,
        format!("slanted plane scale-aligned relative RMSE = {rel:.3e} (bound 1e-4); fronto-parallel max |z - pin| = {flat:.3e} (bound 1e-8)"),
    )
}

const SIGMAS: [f64; 4] = [0.02, 0.05, 0.1, 0.2];

fn sweep_methods() -> Vec<SweepMethod> {
    vec![
        SweepMethod {
            name: "sg".into(),
            options: ReconstructionOptions {
                lambda: 1.0,
                kernel: KernelConfig::sg(5, 3),
                ..Default::default()
            },
        },
        SweepMethod {
            name: "fw".into(),
            options: ReconstructionOptions {
                lambda: 1.0,
                kernel: KernelConfig::classic(ClassicKind::Forward),
                ..Default::default()
            },
        },
    ]
}

fn run_sweep() -> String {
    let s = peaks_surface(128, 128, 1.0);
    noise_sweep(&s, &SIGMAS, &sweep_methods(), 5, 6).unwrap().to_csv()
}

// 6
fn noise_ordering() -> Outcome {
    let s = peaks_surface(128, 128, 1.0);
    let report = noise_sweep(&s, &SIGMAS, &sweep_methods(), 5, 6).unwrap();
    let sg: Vec<f64> = SIGMAS.iter().map(|&x| report.mean(x, "sg")).collect();
    let fw: Vec<f64> = SIGMAS.iter().map(|&x| report.mean(x, "fw")).collect();
    let ordered = SIGMAS.iter().enumerate().filter(|(_, &x)| x >= 0.05).all(|(i, _)| sg[i] < fw[i]);
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/");
    outcome(
        ordered && monotone(&sg) && monotone(&fw),
        format!(
            "mean RMSE at sigma {:?}: sg(d5,k3,λ=1) {} vs fw(λ=1) {}; sg<fw for sigma>=0.05: {ordered}; non-decreasing: {}",
            SIGMAS,
            fmt(&sg),
            fmt(&fw),
            monotone(&sg) && monotone(&fw)
        ),
    )
}

struct TwoPlane {
    near: [f64; 2],
    far: [f64; 2],
    bytes: Vec<u8>,
}

fn two_plane_scene() -> TwoPlane {
    let (w, h, split) = (64usize, 48usize, 32usize);
    let k = CameraIntrinsics::new(100.0, 31.5, 23.5).unwrap();
    let d = full(w, h);
    let n1 = unit([0.3, 0.1, 1.0]);
    let n2 = unit([-0.2, 0.15, 1.0]);
    let gt_n: Vec<[f64; 3]> = d.pixels().iter().map(|p| if p.u < split { n1 } else { n2 }).collect();
    let z: Vec<f64> = d
        .pixels()
        .iter()
        .map(|&p| if p.u < split { plane_depth(&k, p, n1, 1.0) } else { plane_depth(&k, p, n2, 10.0) })
        .collect();
    let depth = DepthField::new(d.clone(), z).unwrap();
    let dist = |p: &Pixel| if p.u < split { split - 1 - p.u } else { p.u - split };

    let mut near = [0.0; 2];
    let mut far = [0.0; 2];
    let mut bytes = Vec::new();
    for (slot, mode) in [NeighborhoodMode::Pixels2d, NeighborhoodMode::Points3d { window: 11 }]
        .into_iter()
        .enumerate()
    {
        let opts = ReconstructionOptions {
            kernel: KernelConfig::sg(5, 3).with_mode(mode),
            ..ReconstructionOptions::perspective(k)
        };
        let est = normals_from_depth(&depth, &opts).unwrap();
        let errs = angular_errors(&est.normals.n, &gt_n);
        let pick = |f: &dyn Fn(usize) -> bool| {
            let mut v: Vec<f64> = d.pixels().iter().zip(&errs).filter(|(p, _)| f(dist(p))).map(|(_, e)| *e).collect();
            lower_median(&mut v).unwrap()
        };
        near[slot] = pick(&|t| t < 3);
        far[slot] = pick(&|t| t >= 8);
        bytes.extend(encode_pfm(&normals_to_map(&est.normals)));
    }
    TwoPlane { near, far, bytes }
}

// 7
fn knn3d_discontinuity() -> Outcome {
    let r = two_plane_scene();
    let pass = r.near[1] < r.near[0] && (r.far[0] - r.far[1]).abs() <= 0.5;
    outcome(
        pass,
        format!(
            "median angular error near edge: square {:.3}° vs 3D-KNN {:.3}°; far field: {:.3e}° vs {:.3e}°",
            r.near[0], r.near[1], r.far[0], r.far[1]
        ),
    )
}

fn random_instance(rng: &mut ChaCha8Rng, deficient: bool) -> (SparseOperator, Vec<f64>) {
    let n = rng.random_range(5..=200);
    let m = rng.random_range(n..=2 * n);
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((i, i, rng.random_range(1.0..2.0)));
    }
    for _ in 0..(3 * m) {
        trip.push((rng.random_range(0..m), rng.random_range(0..n), rng.random_range(-0.3..0.3)));
    }
    let mut a = SparseOperator::from_triplets(m, n, &trip).unwrap().to_dense();
    if deficient {
        // Duplicate a few columns and zero one: rank drops, null space is known.
        for _ in 0..3 {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            if i != j {
                let c = a.column(i).clone_owned();
                a.set_column(j, &c);
            }
        }
        a.column_mut(rng.random_range(0..n)).fill(0.0);
    }
    let mut rows = vec![Vec::new(); m];
    for i in 0..m {
        for j in 0..n {
            if a[(i, j)] != 0.0 {
                rows[i].push((j, a[(i, j)]));
            }
        }
    }
    let b = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    (SparseOperator::from_rows(m, n, rows).unwrap(), b)
}

// 8
fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut oracle_worst = 0.0f64;
    let mut deficient_checked = 0;
    for t in 0..50 {
        let deficient = t % 3 == 0;
        let (a, b) = random_instance(&mut rng, deficient);
        let dense = a.to_dense();
        let bv = DVector::from_vec(b.clone());
        let x_ref = pinv_solve(&dense, &bv);
        let oracle_residual = (dense.transpose() * (&dense * &x_ref - &bv)).norm();
        oracle_worst = oracle_worst.max(oracle_residual);
        let sol = solve(&LsqProblem::new(a, b).unwrap()).unwrap();
        let x = DVector::from_vec(sol.z);
        worst = worst.max((&x - &x_ref).norm() / x_ref.norm());
        if deficient && rank(&dense) < dense.ncols() {
            deficient_checked += 1;
        }
    }
    // Minimum norm on an underdetermined system: [1 1]·x = 2 → (1, 1).
    let tiny = SparseOperator::from_rows(1, 2, vec![vec![(0, 1.0), (1, 1.0)]]).unwrap();
    let x = solve(&LsqProblem::new(tiny, vec![2.0]).unwrap()).unwrap().z;
    let min_norm = (x[0] - 1.0).abs().max((x[1] - 1.0).abs());
    outcome(
        worst <= 1e-7 && min_norm <= 1e-12 && deficient_checked > 0,
        format!("50 instances, worst relative error {worst:.2e} (oracle max |Aᵀr| {oracle_worst:.1e}); {deficient_checked} rank-deficient; [1 1]x=2 -> error {min_norm:.1e}"),
    )
}

// 9
fn depth_prior(reference: f64) -> Outcome {
    let s = peaks_surface(64, 64, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let weights: Vec<f64> = (0..s.depth.z.len())
        .map(|_| if rng.random_bool(0.2) { 1.0 } else { 0.0 })
        .collect();
    let opts = ReconstructionOptions {
        lambda: 0.1,
        kernel: KernelConfig::sg(5, 3),
        omega: 10.0,
        prior: Some(DepthPrior {
            z: s.depth.z.clone(),
            weights,
        }),
        ..Default::default()
    };
    let rec = height_from_normals(&s.normals(), &opts).unwrap();
    let abs = rmse_aligned(&rec.depth.z, &s.depth.z, Alignment::None).unwrap();
    let unprimed = height_from_normals(&s.normals(), &ReconstructionOptions::default()).unwrap();
    let without = rmse_aligned(&unprimed.depth.z, &s.depth.z, Alignment::None).unwrap();
    outcome(
        abs <= 2.0 * reference,
        format!("absolute RMSE with prior {abs:.3e} vs bound 2 x {reference:.3e}; without prior {without:.3e}"),
    )
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let files = vec![
        ("ortho.pfm".to_string(), ortho_peaks().1),
        ("persp.pfm".to_string(), persp_planes().2),
        ("sweep.csv".to_string(), run_sweep().into_bytes()),
        ("two_plane.pfm".to_string(), two_plane_scene().bytes),
    ];
    for (name, bytes) in &files {
        fs::write(dir.join(name), bytes).unwrap();
    }
    files
        .into_iter()
        .map(|(name, _)| {
            let bytes = fs::read(dir.join(&name)).unwrap();
            (name, bytes)
        })
        .collect()
}

// 10
fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = artifacts(a.path());
    let second = artifacts(b.path());
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    outcome(
        differing.is_empty(),
        format!(
            "{} output files written twice; differing: {}",
            first.len(),
            if differing.is_empty() { "none".to_string() } else { differing.join(", ") }
        ),
    )
}

fn report(id: u32, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    let elapsed = t.elapsed();
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let pass = o.pass && in_time;
    let budget_note = budget.map_or(String::new(), |b| format!(" / budget {:.0} s", b.as_secs_f64()));
    println!(
        "{} [{id:>2}] {name}: {} [{:.2} s{budget_note}]",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    pass
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let mut results = Vec::new();
    results.push(report(1, "kernel golden", secs(1), kernel_golden));
    results.push(report(2, "polynomial exactness", secs(10), polynomial_exactness));
    results.push(report(3, "rank property", secs(10), rank_property));
    let mut reference = f64::NAN;
    results.push(report(4, "orthographic round trip", secs(30), || {
        let (o, r) = ortho_round_trip();
        reference = r;
        o
    }));
    results.push(report(5, "perspective round trip", secs(10), persp_round_trip));
    results.push(report(6, "noise ordering", secs(300), noise_ordering));
    results.push(report(7, "3D-KNN discontinuity", secs(30), knn3d_discontinuity));
    results.push(report(8, "solver oracle", secs(30), solver_oracle));
    results.push(report(9, "depth prior", secs(30), || depth_prior(reference)));
    results.push(report(10, "determinism", None, determinism));
    let failed: Vec<String> =
        results.iter().enumerate().filter(|(_, p)| !**p).map(|(i, _)| (i + 1).to_string()).collect();
    println!("{}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing: {}", failed.join(", "));
    }
    if std::env::var_os("SGRECON_ACCEPTANCE_STRICT").is_some() && !failed.is_empty() {
        std::process::exit(1);
    }
}
