//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 solver did not
//! converge.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use sgrecon::domain::{build_domain, Neighborhood, Offset, PixelDomain};
use sgrecon::io::{
    depth_to_map, map_to_depth, map_to_normals, normals_to_map, read_intrinsics, read_pfm,
    read_pgm, write_obj, write_pfm, write_pgm,
};
use sgrecon::kernel::{classic_kernel, sg_kernel, ClassicKind, Direction, Target};
use sgrecon::reconstruct::{
    height_from_normals, normals_from_depth, DepthPrior, ReconstructionOptions,
};
use sgrecon::sparse::{KernelConfig, NeighborhoodMode};
use sgrecon::synth::{
    add_gradient_noise, gradients_to_normals, median_angular_error, named_surface, noise_sweep,
    rmse_aligned, Alignment, NoiseSpec, SweepMethod,
};
use sgrecon::Projection;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] sgrecon::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("solver did not converge after {0} iterations")]
    NotConverged(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Data(sgrecon::Error::InvalidArgument(_)) => EXIT_USAGE,
            CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "sgrecon", version, about = "Surface reconstruction on masked pixel domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a normal map into depth.
    Hfn(HfnArgs),
    /// Estimate normals from a depth map.
    Nfd(NfdArgs),
    /// Print a kernel as "du dv weight" rows.
    Kernels(KernelArgs),
    /// Write a synthetic surface with noisy normals.
    Synth(SynthArgs),
    /// Noise sweep over sigma and methods; prints CSV.
    Sweep(SweepArgs),
    /// Compare a prediction with ground truth.
    Eval(EvalArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ProjectionArg {
    Ortho,
    Persp,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DerivArg {
    Sg,
    Fw,
    Bw,
    C,
    Sc,
}

impl DerivArg {
    fn classic(self) -> Option<ClassicKind> {
        match self {
            DerivArg::Sg => None,
            DerivArg::Fw => Some(ClassicKind::Forward),
            DerivArg::Bw => Some(ClassicKind::Backward),
            DerivArg::C => Some(ClassicKind::Central),
            DerivArg::Sc => Some(ClassicKind::SmoothedCentral),
        }
    }

    fn parse_list(s: &str) -> CliResult<DerivArg> {
        DerivArg::from_str(s, true).map_err(|_| CliError::Usage(format!("--methods: unknown method '{s}'")))
    }

    fn name(self) -> &'static str {
        match self {
            DerivArg::Sg => "sg",
            DerivArg::Fw => "fw",
            DerivArg::Bw => "bw",
            DerivArg::C => "c",
            DerivArg::Sc => "sc",
        }
    }
}

#[derive(Args, Debug)]
struct CameraArgs {
    #[arg(long, value_enum, default_value = "ortho")]
    projection: ProjectionArg,
    /// Text file with f=, cu=, cv= lines (perspective only).
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    /// Orthographic pixel size in depth units.
    #[arg(long, default_value_t = 1.0)]
    pixel_pitch: f64,
}

impl CameraArgs {
    fn projection(&self) -> CliResult<Projection> {
        match self.projection {
            ProjectionArg::Ortho => Ok(Projection::Orthographic {
                pixel_pitch: self.pixel_pitch,
            }),
            ProjectionArg::Persp => {
                let path = self.intrinsics.as_ref().ok_or_else(|| {
                    CliError::Usage("--projection persp requires --intrinsics".into())
                })?;
                Ok(Projection::Perspective(read_intrinsics(path)?))
            }
        }
    }
}

#[derive(Args, Debug)]
struct KernelOpts {
    /// Polynomial order.
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Odd kernel width.
    #[arg(long, default_value_t = 5)]
    ksize: usize,
    #[arg(long, value_enum, default_value = "sg")]
    deriv: DerivArg,
}

impl KernelOpts {
    fn config(&self) -> KernelConfig {
        match self.deriv.classic() {
            None => KernelConfig::sg(self.ksize, self.order),
            Some(kind) => KernelConfig::classic(kind),
        }
    }
}

#[derive(Args, Debug)]
struct HfnArgs {
    #[arg(long)]
    normals: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[command(flatten)]
    camera: CameraArgs,
    #[command(flatten)]
    kernel: KernelOpts,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Depth prior; NaN pixels carry no prior.
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Prior weight.
    #[arg(long, default_value_t = 1.0, requires = "prior")]
    omega: f64,
    /// Perspective depth at the pin pixels.
    #[arg(long, default_value_t = 1.0)]
    pin_value: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the surface as a triangle mesh.
    #[arg(long)]
    export_obj: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NfdArgs {
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[command(flatten)]
    camera: CameraArgs,
    #[command(flatten)]
    kernel: KernelOpts,
    /// Pick neighbors among unprojected 3D points.
    #[arg(long)]
    knn3d: bool,
    /// Search window for --knn3d.
    #[arg(long, default_value_t = 11, requires = "knn3d")]
    window: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Smooth,
    Du,
    Dv,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[command(flatten)]
    kernel: KernelOpts,
    #[arg(long, value_enum, default_value = "du")]
    target: TargetArg,
    /// File of "du dv" offset lines; defaults to the centered square.
    #[arg(long)]
    neighborhood: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w = w.parse().map_err(|_| format!("invalid width '{w}'"))?;
    let h = h.parse().map_err(|_| format!("invalid height '{h}'"))?;
    Ok((w, h))
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// peaks, bumps or hemisphere.
    #[arg(long, default_value = "peaks")]
    surface: String,
    #[arg(long, value_parser = parse_size, default_value = "64x64")]
    size: (usize, usize),
    /// Gradient noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value = "peaks")]
    surface: String,
    #[arg(long, value_parser = parse_size, default_value = "128x128")]
    size: (usize, usize),
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.05,0.1,0.2")]
    sigmas: Vec<f64>,
    /// Comma-separated derivative kinds (sg, fw, bw, c, sc).
    #[arg(long, value_delimiter = ',', default_value = "sg,fw")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(long, default_value_t = 5)]
    ksize: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    RmseOffset,
    RmseScale,
    Rmse,
    MaeNormals,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, value_enum, default_value = "rmse-offset")]
    metric: MetricArg,
}

fn load_domain(path: &Path) -> CliResult<Arc<PixelDomain>> {
    Ok(Arc::new(build_domain(&read_pgm(path)?)?))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn hfn(args: &HfnArgs) -> CliResult<()> {
    let projection = args.camera.projection()?;
    let domain = load_domain(&args.mask)?;
    let normals = map_to_normals(&read_pfm(&args.normals)?, domain.clone())?;
    let prior = match &args.prior {
        None => None,
        Some(path) => {
            let map = read_pfm(path)?;
            if map.width != domain.width() || map.height != domain.height() || map.channels != 1 {
                return Err(sgrecon::Error::DimensionMismatch(format!(
                    "{}: prior must be a 1-channel {}×{} map",
                    path.display(),
                    domain.width(),
                    domain.height()
                ))
                .into());
            }
            let (z, weights) = domain
                .pixels()
                .iter()
                .map(|p| {
                    let v = f64::from(map.pixel(p.u, p.v)[0]);
                    if v.is_finite() { (v, 1.0) } else { (0.0, 0.0) }
                })
                .unzip();
            Some(DepthPrior { z, weights })
        }
    };
    let mut opts = ReconstructionOptions {
        projection,
        lambda: args.lambda,
        omega: if prior.is_some() { args.omega } else { 0.0 },
        prior,
        kernel: args.kernel.config(),
        pin_value: args.pin_value,
        ..Default::default()
    };
    opts.solver.tol_rel = args.tol;
    opts.solver.max_iters = args.max_iters;

    let rec = height_from_normals(&normals, &opts)?;
    info!(
        "{} pixels, {} iterations, residual {:e}",
        domain.len(),
        rec.solution.iterations,
        rec.solution.residual_norm
    );
    write_pfm(&depth_to_map(&rec.depth), &args.out)?;
    if let Some(obj) = &args.export_obj {
        write_obj(&rec.depth, &projection, obj)?;
    }
    if !rec.solution.converged {
        return Err(CliError::NotConverged(rec.solution.iterations));
    }
    Ok(())
}

fn nfd(args: &NfdArgs) -> CliResult<()> {
    let projection = args.camera.projection()?;
    let domain = load_domain(&args.mask)?;
    let depth = map_to_depth(&read_pfm(&args.depth)?, domain)?;
    let mut kernel = args.kernel.config();
    if args.knn3d {
        kernel = kernel.with_mode(NeighborhoodMode::Points3d {
            window: args.window,
        });
    }
    let opts = ReconstructionOptions {
        projection,
        kernel,
        ..Default::default()
    };
    let est = normals_from_depth(&depth, &opts)?;
    write_pfm(&normals_to_map(&est.normals), &args.out)?;
    Ok(())
}

fn parse_offsets(text: &str, path: &Path) -> CliResult<Vec<Offset>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let parsed = match f[..] {
            [a, b] => a.parse().ok().zip(b.parse().ok()),
            _ => None,
        };
        let (du, dv) = parsed.ok_or_else(|| {
            CliError::Usage(format!("{}: line {}: expected 'du dv'", path.display(), i + 1))
        })?;
        out.push(Offset::new(du, dv));
    }
    Ok(out)
}

fn kernels(args: &KernelArgs) -> CliResult<String> {
    let target = match args.target {
        TargetArg::Smooth => Target::Smooth,
        TargetArg::Du => Target::DerivU,
        TargetArg::Dv => Target::DerivV,
    };
    let kernel = match args.kernel.deriv.classic() {
        Some(kind) => {
            let dir = match args.target {
                TargetArg::Du => Direction::U,
                TargetArg::Dv => Direction::V,
                TargetArg::Smooth => {
                    return Err(CliError::Usage(
                        "--target smooth is only defined for --deriv sg".into(),
                    ))
                }
            };
            classic_kernel(kind, dir)
        }
        None => {
            let hood = match &args.neighborhood {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                        path: path.clone(),
                        source,
                    })?;
                    Neighborhood::from_offsets(&parse_offsets(&text, path)?)
                }
                None => {
                    if args.kernel.ksize % 2 == 0 {
                        return Err(CliError::Usage("--ksize must be odd".into()));
                    }
                    Neighborhood::square(args.kernel.ksize)
                }
            };
            sg_kernel(&hood, args.kernel.order, target)?
        }
    };
    let mut s = String::new();
    for (o, w) in kernel.offsets.iter().zip(&kernel.weights) {
        s.push_str(&format!("{} {} {:.16e}\n", o.du, o.dv, w));
    }
    Ok(s)
}

fn synth(args: &SynthArgs) -> CliResult<()> {
    let (w, h) = args.size;
    let surface = named_surface(&args.surface, w, h)?;
    let (gx, gy) = add_gradient_noise(
        &surface,
        NoiseSpec {
            sigma: args.sigma,
            seed: args.seed,
        },
    )?;
    let normals = gradients_to_normals(surface.domain().clone(), &gx, &gy);
    fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    write_pgm(&surface.domain().mask(), args.out_dir.join("mask.pgm"))?;
    write_pfm(&depth_to_map(&surface.depth), args.out_dir.join("depth.pfm"))?;
    write_pfm(&normals_to_map(&normals), args.out_dir.join("normals.pfm"))?;
    Ok(())
}

fn sweep(args: &SweepArgs) -> CliResult<String> {
    let (w, h) = args.size;
    let surface = named_surface(&args.surface, w, h)?;
    let methods = args
        .methods
        .iter()
        .map(|m| {
            let d = DerivArg::parse_list(m.trim())?;
            let kernel = KernelOpts {
                order: args.order,
                ksize: args.ksize,
                deriv: d,
            }
            .config();
            Ok(SweepMethod {
                name: d.name().to_string(),
                options: ReconstructionOptions {
                    lambda: args.lambda,
                    kernel,
                    ..Default::default()
                },
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let report = noise_sweep(&surface, &args.sigmas, &methods, args.trials, args.seed)?;
    Ok(report.to_csv())
}

fn eval(args: &EvalArgs) -> CliResult<f64> {
    let domain = load_domain(&args.mask)?;
    let (pred, gt) = (read_pfm(&args.pred)?, read_pfm(&args.gt)?);
    let value = match args.metric {
        MetricArg::MaeNormals => {
            let p = map_to_normals(&pred, domain.clone())?;
            let g = map_to_normals(&gt, domain)?;
            median_angular_error(&p.n, &g.n, None)?
        }
        m => {
            let p = map_to_depth(&pred, domain.clone())?;
            let g = map_to_depth(&gt, domain)?;
            let mode = match m {
                MetricArg::RmseOffset => Alignment::Offset,
                MetricArg::RmseScale => Alignment::Scale,
                _ => Alignment::None,
            };
            rmse_aligned(&p.z, &g.z, mode)?
        }
    };
    Ok(value)
}

fn dispatch(cli: &Cli) -> CliResult<Option<String>> {
    match &cli.command {
        Command::Hfn(a) => hfn(a).map(|_| None),
        Command::Nfd(a) => nfd(a).map(|_| None),
        Command::Kernels(a) => kernels(a).map(Some),
        Command::Synth(a) => synth(a).map(|_| None),
        Command::Sweep(a) => {
            let csv = sweep(a)?;
            match &a.out {
                Some(path) => write_text(path, &csv).map(|_| None),
                None => Ok(Some(csv)),
            }
        }
        Command::Eval(a) => eval(a).map(|v| Some(format!("{v:?}\n"))),
    }
}

fn thread_count() -> CliResult<usize> {
    match std::env::var("SGRECON_THREADS") {
        Err(_) => Ok(0),
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("SGRECON_THREADS: invalid value '{s}'"))),
    }
}

/// Runs one command line and returns the process exit code. Output goes to
/// stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let result = thread_count().and_then(|n| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("SGRECON_THREADS: {e}")))?;
        pool.install(|| dispatch(&cli))
    });
    match result {
        Ok(out) => {
            if let Some(text) = out {
                print!("{text}");
            }
            0
        }
        Err(e) => {
            eprintln!("sgrecon: {e}");
            e.exit_code()
        }
    }
}
