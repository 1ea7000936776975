//! Coarse-to-fine blind deblurring driver and the non-blind finisher.

use crate::error::{Error, Result};
use crate::image::{build_pyramid, convolve2d, resample_bilinear, resize_kernel, BoundaryMode, ColorImage, Image, Kernel};
use crate::kernelest::{estimate_kernel_traced, KernelParams};
use crate::latent::{estimate_latent, estimate_latent_traced, LatentParams};
use crate::metrics::psnr;
use crate::scalar::Real;
use crate::trace::{record, SolverTrace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig<T> {
    /// Finest-level kernel side, odd and at least 3.
    pub kernel_size: usize,
    /// Pyramid downscaling factor between levels.
    pub scale: f64,
    /// Latent/kernel alternations per level.
    pub inner_iters: usize,
    pub latent: LatentParams<T>,
    pub kernel: KernelParams<T>,
    /// Divisor applied to `γ1` and `α` after each alternation.
    pub decay: T,
    pub gamma1_floor: T,
    pub alpha_floor: T,
    /// Finisher uses `γ1 * finisher_ratio`.
    pub finisher_ratio: T,
    /// Shift each kernel estimate so its center of mass sits on the center
    /// tap, removing the translation left free by the blind model.
    pub recenter_kernel: bool,
    /// The final kernel is recentered once more with its center of mass
    /// taken over weights above this fraction of the peak.
    pub recenter_floor: T,
    /// Taps below this fraction of the kernel peak are zeroed after each
    /// kernel estimate; 0 disables pruning.
    pub kernel_prune: T,
}

impl<T: Real> Default for PipelineConfig<T> {
    fn default() -> Self {
        PipelineConfig {
            kernel_size: 25,
            scale: 2f64.sqrt(),
            inner_iters: 5,
            latent: LatentParams::default(),
            kernel: KernelParams::default(),
            decay: T::lit(1.1),
            gamma1_floor: T::lit(1e-3),
            alpha_floor: T::lit(1e-3),
            finisher_ratio: T::lit(0.1),
            recenter_kernel: true,
            recenter_floor: T::lit(0.2),
            kernel_prune: T::lit(0.05),
        }
    }
}

impl<T: Real> PipelineConfig<T> {
    pub fn with_kernel_size(kernel_size: usize) -> Self {
        PipelineConfig { kernel_size, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!("kernel size must be odd and >= 3, got {}", self.kernel_size)));
        }
        if !(self.scale > 1.0) {
            return Err(Error::InvalidParam(format!("pyramid scale must exceed 1, got {}", self.scale)));
        }
        if !(self.decay >= T::one()) {
            return Err(Error::InvalidParam("decay divisor must be at least 1".into()));
        }
        if !(self.gamma1_floor > T::zero() && self.alpha_floor >= T::zero()) {
            return Err(Error::InvalidParam("decay floors must be non-negative (gamma1 floor positive)".into()));
        }
        if !(self.kernel_prune >= T::zero() && self.kernel_prune < T::one()) {
            return Err(Error::InvalidParam("kernel prune fraction must lie in [0, 1)".into()));
        }
        if !(self.recenter_floor >= T::zero() && self.recenter_floor < T::one()) {
            return Err(Error::InvalidParam("recenter floor must lie in [0, 1)".into()));
        }
        if !(self.finisher_ratio > T::zero()) {
            return Err(Error::InvalidParam("finisher ratio must be positive".into()));
        }
        self.latent.validate()?;
        self.kernel.validate()
    }

    pub fn decay_gamma1(&self, gamma1: T) -> T {
        decay(gamma1, self.decay, self.gamma1_floor)
    }

    pub fn decay_alpha(&self, alpha: T) -> T {
        decay(alpha, self.decay, self.alpha_floor)
    }
}

/// `max(v / divisor, floor)`.
pub fn decay<T: Real>(v: T, divisor: T, floor: T) -> T {
    (v / divisor).max(floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiagnostics {
    /// Coarsest level is 0.
    pub level: usize,
    pub kernel_size: usize,
    pub width: usize,
    pub height: usize,
    pub zero_count: usize,
    pub zero_fraction: f64,
    /// PSNR of the level's latent estimate against the resampled truth.
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeblurResult<T> {
    pub restored: Image<T>,
    pub kernel: Kernel<T>,
    pub levels: Vec<LevelDiagnostics>,
    /// The input had no gradients; the kernel is a delta by convention.
    pub no_gradient_information: bool,
}

pub fn deblur_blind<T: Real>(y: &Image<T>, cfg: &PipelineConfig<T>) -> Result<DeblurResult<T>> {
    deblur_blind_traced(y, cfg, None, None)
}

/// Full pipeline with optional ground truth (for per-level PSNR) and trace.
pub fn deblur_blind_traced<T: Real>(
    y: &Image<T>,
    cfg: &PipelineConfig<T>,
    truth: Option<&Image<T>>,
    trace: Option<&mut SolverTrace>,
) -> Result<DeblurResult<T>> {
    let (kernel, levels, flat) = estimate_psf(y, cfg, truth, trace)?;
    let restored = if flat { y.clamp01() } else { final_nonblind(y, &kernel, cfg)? };
    Ok(DeblurResult { restored, kernel, levels, no_gradient_information: flat })
}

/// Kernel from the luminance plane, then the finisher on each channel.
pub fn deblur_blind_color<T: Real>(
    y: &ColorImage<T>,
    cfg: &PipelineConfig<T>,
) -> Result<(ColorImage<T>, DeblurResult<T>)> {
    let result = deblur_blind(&y.luminance(), cfg)?;
    let restored = if result.no_gradient_information {
        let [r, g, b] = y.channels();
        ColorImage::new(r.clamp01(), g.clamp01(), b.clamp01())?
    } else {
        final_nonblind_color(y, &result.kernel, cfg)?
    };
    Ok((restored, result))
}

fn is_flat<T: Real>(y: &Image<T>) -> bool {
    let first = y.data()[0];
    y.data().iter().all(|&v| v == first)
}

fn estimate_psf<T: Real>(
    y: &Image<T>,
    cfg: &PipelineConfig<T>,
    truth: Option<&Image<T>>,
    mut trace: Option<&mut SolverTrace>,
) -> Result<(Kernel<T>, Vec<LevelDiagnostics>, bool)> {
    cfg.validate()?;
    if y.width() < cfg.kernel_size || y.height() < cfg.kernel_size {
        return Err(Error::dim(format!(
            "image {}x{} is smaller than the {}x{} kernel",
            y.width(),
            y.height(),
            cfg.kernel_size,
            cfg.kernel_size
        )));
    }
    if let Some(t) = truth {
        if !t.same_shape(y) {
            return Err(Error::dim("ground truth differs in size from the input"));
        }
    }
    if is_flat(y) {
        log::warn!("input is constant; returning a delta kernel");
        return Ok((Kernel::delta(cfg.kernel_size, cfg.kernel_size)?, Vec::new(), true));
    }

    let pyramid = build_pyramid(y, cfg.kernel_size, cfg.scale)?;
    let mut gamma1 = cfg.latent.gamma1;
    let mut alpha = cfg.kernel.alpha;
    let mut kernel: Option<Kernel<T>> = None;
    let mut levels = Vec::with_capacity(pyramid.len());

    for (index, level) in pyramid.iter().enumerate() {
        record(&mut trace, TraceEvent::Level(index));
        let ks = level.kernel_size;
        let at_level = |e: Error| Error::AtLevel { level: index, source: Box::new(e) };
        let mut k = match &kernel {
            None => Kernel::delta(ks, ks)?,
            Some(prev) => resize_kernel(prev, ks, ks).map_err(at_level)?,
        };
        let mut x = level.image.clone();
        for _ in 0..cfg.inner_iters {
            let lp = LatentParams { gamma1, ..cfg.latent };
            x = estimate_latent_traced(&level.image, &k, &lp, trace.as_deref_mut()).map_err(at_level)?;
            let kp = KernelParams { alpha, ..cfg.kernel };
            k = estimate_kernel_traced(&level.image, &x, (ks, ks), Some(&k), &kp, trace.as_deref_mut())
                .map_err(at_level)?;
            if cfg.kernel_prune > T::zero() {
                k = k.pruned(cfg.kernel_prune).map_err(at_level)?;
            }
            if cfg.recenter_kernel {
                k = k.recentered().map_err(at_level)?;
            }
            gamma1 = cfg.decay_gamma1(gamma1);
            alpha = cfg.decay_alpha(alpha);
            record(&mut trace, TraceEvent::Gamma1(gamma1.to_f64_lossy()));
            record(&mut trace, TraceEvent::Alpha(alpha.to_f64_lossy()));
        }
        let level_psnr = match truth {
            Some(t) => Some(psnr(&x.clamp01(), &resample_bilinear(t, x.width(), x.height())?)?),
            None => None,
        };
        log::debug!(
            "level {index}: {}x{} kernel {ks}, zero fraction {:.3}",
            x.width(),
            x.height(),
            k.zero_fraction()
        );
        levels.push(LevelDiagnostics {
            level: index,
            kernel_size: ks,
            width: x.width(),
            height: x.height(),
            zero_count: k.zero_count(),
            zero_fraction: k.zero_fraction(),
            psnr: level_psnr,
        });
        kernel = Some(k);
    }
    let mut kernel = kernel.ok_or_else(|| Error::dim("image too small for any pyramid level"))?;
    if cfg.recenter_kernel {
        kernel = kernel.recentered_above(cfg.recenter_floor)?;
    }
    Ok((kernel, levels, false))
}

/// Non-blind restoration with a known kernel: edge taper, then the latent
/// solver with softened regularization, then clamping to `[0, 1]`.
pub fn final_nonblind<T: Real>(y: &Image<T>, k: &Kernel<T>, cfg: &PipelineConfig<T>) -> Result<Image<T>> {
    if k.is_delta() {
        return Ok(y.clamp01());
    }
    let tapered = edge_taper(y, k)?;
    let lp = LatentParams { gamma1: cfg.latent.gamma1 * cfg.finisher_ratio, ..cfg.latent };
    Ok(estimate_latent(&tapered, k, &lp)?.clamp01())
}

pub fn final_nonblind_color<T: Real>(
    y: &ColorImage<T>,
    k: &Kernel<T>,
    cfg: &PipelineConfig<T>,
) -> Result<ColorImage<T>> {
    let [r, g, b] = y.channels();
    ColorImage::new(final_nonblind(r, k, cfg)?, final_nonblind(g, k, cfg)?, final_nonblind(b, k, cfg)?)
}

/// Per-axis blend weight at distance `d` from the nearest border.
fn taper_weights(projection: &[f64], n: usize) -> Vec<f64> {
    let lag = |t: usize| -> f64 { projection.iter().zip(&projection[t.min(projection.len())..]).map(|(a, b)| a * b).sum() };
    let a0 = lag(0);
    (0..n)
        .map(|i| {
            let d = i.min(n - 1 - i);
            let t = 2 * d + 1;
            if a0 <= 0.0 || t >= projection.len() { 1.0 } else { 1.0 - lag(t) / a0 }
        })
        .collect()
}

/// Blends `y` toward its periodic blur near the borders.
///
/// The weight on `y` is `1 - a(2d + 1) / a(0)` per axis, with `a` the
/// autocorrelation of the kernel's projection on that axis and `d` the
/// distance to the nearest border; pixels at least a kernel radius from
/// every border are returned unchanged.
pub fn edge_taper<T: Real>(y: &Image<T>, k: &Kernel<T>) -> Result<Image<T>> {
    if k.is_delta() {
        return Ok(y.clone());
    }
    let row_proj: Vec<f64> =
        (0..k.rows()).map(|r| (0..k.cols()).map(|c| k.get(r, c).to_f64_lossy()).sum()).collect();
    let col_proj: Vec<f64> =
        (0..k.cols()).map(|c| (0..k.rows()).map(|r| k.get(r, c).to_f64_lossy()).sum()).collect();
    let wr = taper_weights(&row_proj, y.height());
    let wc = taper_weights(&col_proj, y.width());
    let blurred = convolve2d(y, k, BoundaryMode::Periodic)?;
    let mut out = y.clone();
    for r in 0..y.height() {
        for c in 0..y.width() {
            let w = wr[r] * wc[c];
            if w < 1.0 {
                let w = T::lit(w);
                out.set(r, c, w * y.get(r, c) + (T::one() - w) * blurred.get(r, c));
            }
        }
    }
    Ok(out)
}
