//! Command-line front end for `fracblind`.
//!
//! Exit codes: 0 on success, 1 for usage, configuration and input-format
//! errors, 2 when the computation itself (or writing its results) fails.
//! Results go to standard output as `key=value` lines; diagnostics go to
//! standard error. Outputs are only written once every step has succeeded.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fracblind::synth::{self, KernelSpec, NoiseSpec};
use fracblind::{BoundaryMode, ColorImage, Image, Kernel, MetricReport};
use thiserror::Error;

use config::Overrides;
use io::Raster;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("bad magic number: {0}")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes of pixel data, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error(transparent)]
    Compute(#[from] fracblind::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) | CliError::Write { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fracblind", version, about = "Blind image deblurring with fractional-order kernel priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the blur kernel of an image and restore it.
    Deblur(DeblurArgs),
    /// Blur an image with a parametric kernel and optional noise.
    Blur(BlurArgs),
    /// Compare a restored image (and optionally a kernel) with ground truth.
    Evaluate(EvaluateArgs),
    /// Render a parametric kernel.
    Kernel(KernelArgs),
}

/// Solver settings shared by all commands; flags override `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Tuning {
    /// File of `key = value` settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kernel_size: Option<usize>,
    /// Fractional gradient order.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// zero, periodic or reflexive.
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gaussian noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
}

impl Tuning {
    fn resolve(&self) -> Result<Overrides, CliError> {
        let file = match &self.config {
            Some(p) => config::load_config(p)?,
            None => Overrides::default(),
        };
        let boundary = match &self.boundary {
            Some(b) => Some(b.parse::<BoundaryMode>().map_err(|e| CliError::Usage(e.to_string()))?),
            None => None,
        };
        let flags = Overrides {
            kernel_size: self.kernel_size,
            lambda: self.lambda,
            alpha: self.alpha,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            sigma: self.sigma,
            boundary,
            seed: self.seed,
            noise: self.noise,
            ..Default::default()
        };
        Ok(file.merged(&flags))
    }
}

#[derive(Debug, Args)]
pub struct DeblurArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Kernel estimate as an image (max weight shown as white).
    #[arg(long)]
    pub save_kernel: Option<PathBuf>,
    /// Kernel estimate as a text grid of normalized weights.
    #[arg(long)]
    pub save_kernel_txt: Option<PathBuf>,
    /// Ground truth for per-level PSNR and final metrics.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Debug, Args)]
pub struct BlurArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Kernel spec `kind[:p1[:p2]]`, e.g. `motion:15:45`, `gauss:9:1.5`, `box:5`.
    #[arg(long)]
    pub kernel: String,
    #[arg(long)]
    pub save_kernel: Option<PathBuf>,
    #[arg(long)]
    pub save_kernel_txt: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub restored: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Estimated kernel as a text grid.
    #[arg(long, requires = "kernel_truth")]
    pub kernel_estimate: Option<PathBuf>,
    /// True kernel: a text-grid file or a kernel spec.
    #[arg(long, requires = "kernel_estimate")]
    pub kernel_truth: Option<String>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long)]
    pub kernel: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub save_kernel_txt: Option<PathBuf>,
}

/// Files to write once the command has succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn image(&mut self, path: &Path, raster: &Raster) -> Result<(), CliError> {
        self.files.push((path.to_path_buf(), io::encode(path, raster)?));
        Ok(())
    }

    fn kernel(&mut self, image: Option<&PathBuf>, text: Option<&PathBuf>, k: &Kernel<f64>) -> Result<(), CliError> {
        if let Some(p) = image {
            self.image(p, &Raster::Gray(io::kernel_image(k)))?;
        }
        if let Some(p) = text {
            self.files.push((p.clone(), io::kernel_to_text(k).into_bytes()));
        }
        Ok(())
    }

    /// Writes everything; on failure removes what was already written.
    fn commit(self) -> Result<(), CliError> {
        let mut written: Vec<&Path> = Vec::new();
        for (path, bytes) in &self.files {
            if let Err(source) = std::fs::write(path, bytes) {
                for p in written {
                    let _ = std::fs::remove_file(p);
                }
                let _ = std::fs::remove_file(path);
                return Err(CliError::Write { path: path.display().to_string(), source });
            }
            written.push(path);
        }
        Ok(())
    }
}

fn read_kernel_spec(spec: &str) -> Result<Kernel<f64>, CliError> {
    let spec: KernelSpec = spec.parse().map_err(|e: fracblind::Error| CliError::Usage(e.to_string()))?;
    Ok(synth::make_kernel(&spec)?)
}

fn read_kernel_any(arg: &str) -> Result<Kernel<f64>, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: arg.to_string(), source })?;
        io::kernel_from_text(&text)
    } else {
        read_kernel_spec(arg)
    }
}

fn deblur(args: &DeblurArgs, out: &mut String) -> Result<Outputs, CliError> {
    let settings = args.tuning.resolve()?;
    let cfg = settings.pipeline();
    if settings.boundary.is_some_and(|b| b != BoundaryMode::Periodic) {
        log::warn!("deblur always works with periodic boundaries; --boundary is ignored");
    }
    let input = io::read_image(&args.input)?;
    let truth = match &args.truth {
        Some(p) => Some(io::read_image(p)?),
        None => None,
    };
    if let Some(t) = &truth {
        if (t.width(), t.height()) != (input.width(), input.height()) {
            return Err(CliError::Usage("--truth differs in size from --input".into()));
        }
    }
    let gray = input.luminance();
    let truth_gray = truth.as_ref().map(Raster::luminance);
    let result = fracblind::deblur_blind_traced(&gray, &cfg, truth_gray.as_ref(), None)?;
    let restored = match &input {
        Raster::Gray(_) => Raster::Gray(result.restored.clone()),
        Raster::Color(c) if result.no_gradient_information => {
            let [r, g, b] = c.channels();
            Raster::Color(ColorImage::new(r.clamp01(), g.clamp01(), b.clamp01())?)
        }
        Raster::Color(c) => Raster::Color(fracblind::pipeline::final_nonblind_color(c, &result.kernel, &cfg)?),
    };

    for l in &result.levels {
        out.push_str(&format!(
            "level={} kernel_size={} width={} height={} zero_count={} zero_fraction={:.6}",
            l.level, l.kernel_size, l.width, l.height, l.zero_count, l.zero_fraction
        ));
        if let Some(p) = l.psnr {
            out.push_str(&format!(" psnr={p:.6}"));
        }
        out.push('\n');
    }
    if result.no_gradient_information {
        out.push_str("no_gradient_information=true\n");
    }
    if let Some(t) = &truth_gray {
        out.push_str(&MetricReport::compare(&restored.luminance(), t)?.to_wire());
    }

    let mut files = Outputs::default();
    files.image(&args.output, &restored)?;
    files.kernel(args.save_kernel.as_ref(), args.save_kernel_txt.as_ref(), &result.kernel)?;
    Ok(files)
}

fn blur(args: &BlurArgs) -> Result<Outputs, CliError> {
    let settings = args.tuning.resolve()?;
    let kernel = read_kernel_spec(&args.kernel)?;
    let input = io::read_image(&args.input)?;
    let mode = settings.boundary.unwrap_or_default();
    let seed = settings.seed.unwrap_or(0);
    let noise_std = settings.noise.unwrap_or(0.0);
    if noise_std.is_nan() || noise_std < 0.0 {
        return Err(CliError::Usage(format!("--noise must be non-negative, got {noise_std}")));
    }
    let blur_plane = |img: &Image<f64>, channel: u64| -> Result<Image<f64>, CliError> {
        let noise = if noise_std > 0.0 { NoiseSpec::gaussian(noise_std, seed.wrapping_add(channel)) } else { NoiseSpec::none() };
        Ok(synth::blur(img, &kernel, mode, &noise)?)
    };
    let output = match &input {
        Raster::Gray(g) => Raster::Gray(blur_plane(g, 0)?),
        Raster::Color(c) => {
            let [r, g, b] = c.channels();
            Raster::Color(ColorImage::new(blur_plane(r, 0)?, blur_plane(g, 1)?, blur_plane(b, 2)?)?)
        }
    };
    let mut files = Outputs::default();
    files.image(&args.output, &output)?;
    files.kernel(args.save_kernel.as_ref(), args.save_kernel_txt.as_ref(), &kernel)?;
    Ok(files)
}

fn evaluate(args: &EvaluateArgs, out: &mut String) -> Result<Outputs, CliError> {
    let restored = io::read_image(&args.restored)?.luminance();
    let truth = io::read_image(&args.truth)?.luminance();
    if !restored.same_shape(&truth) {
        return Err(CliError::Usage("--restored and --truth differ in size".into()));
    }
    let mut report = MetricReport::compare(&restored, &truth)?;
    if let (Some(est), Some(tru)) = (&args.kernel_estimate, &args.kernel_truth) {
        let est = read_kernel_any(&est.to_string_lossy())?;
        report.kernel_xcorr = Some(fracblind::kernel_xcorr(&est, &read_kernel_any(tru)?));
    }
    out.push_str(&report.to_wire());
    Ok(Outputs::default())
}

fn kernel(args: &KernelArgs, out: &mut String) -> Result<Outputs, CliError> {
    let k = read_kernel_spec(&args.kernel)?;
    let mut files = Outputs::default();
    files.kernel(args.output.as_ref(), args.save_kernel_txt.as_ref(), &k)?;
    if files.files.is_empty() {
        out.push_str(&io::kernel_to_text(&k));
    }
    Ok(files)
}

/// Runs one command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut stdout = String::new();
    let result = match &cli.command {
        Command::Deblur(a) => deblur(a, &mut stdout),
        Command::Blur(a) => blur(a),
        Command::Evaluate(a) => evaluate(a, &mut stdout),
        Command::Kernel(a) => kernel(a, &mut stdout),
    }
    .and_then(Outputs::commit);
    match result {
        Ok(()) => {
            let mut lock = std::io::stdout().lock();
            let _ = lock.write_all(stdout.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
