//! Image-quality and kernel-accuracy metrics on `[0, 1]`-range images.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::image::{Image, Kernel};
use crate::scalar::Real;

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 100.0;

const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

/// Standard five-scale MS-SSIM exponents.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Smallest side accepted by [`ms_ssim`].
pub const MS_SSIM_MIN_SIDE: usize = 32;

fn check_shapes<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::dim(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn mse<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check_shapes(a, b)?;
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x.to_f64_lossy() - y.to_f64_lossy();
            d * d
        })
        .sum();
    Ok(s / a.len() as f64)
}

/// `10 log10(1 / MSE)` in dB, capped at [`PSNR_CAP`].
pub fn psnr<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let w: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Mean luminance and contrast-structure terms over all fully-contained windows.
struct SsimMaps {
    luminance: f64,
    contrast_structure: f64,
    ssim: f64,
}

fn ssim_maps(a: &[f64], b: &[f64], w: usize, h: usize, window: usize) -> SsimMaps {
    let g = gaussian_window(window, SSIM_SIGMA);
    let (ow, oh) = (w + 1 - window, h + 1 - window);
    let (mut lsum, mut csum, mut ssum) = (0.0, 0.0, 0.0);
    for r in 0..oh {
        for c in 0..ow {
            let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, gi) in g.iter().enumerate() {
                for (j, gj) in g.iter().enumerate() {
                    let wt = gi * gj;
                    let idx = (r + i) * w + c + j;
                    let (x, y) = (a[idx], b[idx]);
                    ma += wt * x;
                    mb += wt * y;
                    aa += wt * (x * x);
                    bb += wt * (y * y);
                    ab += wt * (x * y);
                }
            }
            let va = aa - ma * ma;
            let vb = bb - mb * mb;
            let cov = ab - ma * mb;
            let l = (2.0 * (ma * mb) + SSIM_C1) / (ma * ma + mb * mb + SSIM_C1);
            let cs = (2.0 * cov + SSIM_C2) / (va + vb + SSIM_C2);
            lsum += l;
            csum += cs;
            ssum += l * cs;
        }
    }
    let n = (ow * oh) as f64;
    SsimMaps { luminance: lsum / n, contrast_structure: csum / n, ssim: ssum / n }
}

fn window_for(w: usize, h: usize) -> usize {
    let m = SSIM_WINDOW.min(w).min(h);
    if m.is_multiple_of(2) { m - 1 } else { m }
}

fn to_f64<T: Real>(img: &Image<T>) -> Vec<f64> {
    img.data().iter().map(|v| v.to_f64_lossy()).collect()
}

/// Gaussian-windowed SSIM (11x11, σ = 1.5, shrunk for small images).
pub fn ssim<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check_shapes(a, b)?;
    let window = window_for(a.width(), a.height());
    Ok(ssim_maps(&to_f64(a), &to_f64(b), a.width(), a.height(), window).ssim)
}

fn halve(v: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (nw, nh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(nw * nh);
    for r in 0..nh {
        for c in 0..nw {
            let i = 2 * r * w + 2 * c;
            out.push(0.25 * (v[i] + v[i + 1] + v[i + w] + v[i + w + 1]));
        }
    }
    (out, nw, nh)
}

/// Five-scale MS-SSIM with 2x2 average downsampling between scales.
///
/// Per-scale terms are clamped at zero so the result stays in `[0, 1]`.
pub fn ms_ssim<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    check_shapes(a, b)?;
    if a.width() < MS_SSIM_MIN_SIDE || a.height() < MS_SSIM_MIN_SIDE {
        return Err(Error::dim(format!(
            "ms-ssim needs at least {MS_SSIM_MIN_SIDE}x{MS_SSIM_MIN_SIDE}, got {}x{}",
            a.width(),
            a.height()
        )));
    }
    let (mut va, mut vb) = (to_f64(a), to_f64(b));
    let (mut w, mut h) = (a.width(), a.height());
    let mut value = 1.0;
    for (scale, &weight) in MS_SSIM_WEIGHTS.iter().enumerate() {
        let maps = ssim_maps(&va, &vb, w, h, window_for(w, h));
        value *= maps.contrast_structure.max(0.0).powf(weight);
        if scale + 1 == MS_SSIM_WEIGHTS.len() {
            value *= maps.luminance.max(0.0).powf(weight);
        } else {
            let (na, nw, nh) = halve(&va, w, h);
            vb = halve(&vb, w, h).0;
            va = na;
            w = nw;
            h = nh;
        }
    }
    Ok(value)
}

/// Maximum normalized cross-correlation over all relative translations.
pub fn kernel_xcorr<T: Real>(k1: &Kernel<T>, k2: &Kernel<T>) -> f64 {
    let a: Vec<f64> = k1.weights().iter().map(|v| v.to_f64_lossy()).collect();
    let b: Vec<f64> = k2.weights().iter().map(|v| v.to_f64_lossy()).collect();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (r1, c1, r2, c2) = (k1.rows() as isize, k1.cols() as isize, k2.rows() as isize, k2.cols() as isize);
    let mut best = f64::MIN;
    for dr in -(r1 - 1)..r2 {
        for dc in -(c1 - 1)..c2 {
            let mut s = 0.0;
            for p in 0..r1 {
                let q_r = p + dr;
                if !(0..r2).contains(&q_r) {
                    continue;
                }
                for q in 0..c1 {
                    let q_c = q + dc;
                    if (0..c2).contains(&q_c) {
                        s += a[(p * c1 + q) as usize] * b[(q_r * c2 + q_c) as usize];
                    }
                }
            }
            best = best.max(s);
        }
    }
    (best / (na * nb)).clamp(0.0, 1.0)
}

/// Collected quality numbers, serialized as `metric=value` lines.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: Option<f64>,
    pub ms_ssim: Option<f64>,
    pub kernel_xcorr: Option<f64>,
}

impl MetricReport {
    /// PSNR and SSIM always; MS-SSIM when the images are large enough.
    pub fn compare<T: Real>(restored: &Image<T>, truth: &Image<T>) -> Result<Self> {
        let ms = if restored.width() >= MS_SSIM_MIN_SIDE && restored.height() >= MS_SSIM_MIN_SIDE {
            Some(ms_ssim(restored, truth)?)
        } else {
            None
        };
        Ok(MetricReport {
            psnr: psnr(restored, truth)?,
            ssim: Some(ssim(restored, truth)?),
            ms_ssim: ms,
            kernel_xcorr: None,
        })
    }

    /// One `name=value` line per present metric, six decimals each.
    pub fn to_wire(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "psnr={:.6}", self.psnr);
        for (name, v) in [("ssim", self.ssim), ("ms_ssim", self.ms_ssim), ("kernel_xcorr", self.kernel_xcorr)] {
            if let Some(v) = v {
                let _ = writeln!(out, "{name}={v:.6}");
            }
        }
        out
    }

    pub fn from_wire(text: &str) -> Result<Self> {
        let mut report = MetricReport::default();
        let mut saw_psnr = false;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::InvalidParam(format!("malformed metric line '{line}'")))?;
            let v: f64 =
                value.trim().parse().map_err(|_| Error::InvalidParam(format!("bad metric value in '{line}'")))?;
            match key.trim() {
                "psnr" => {
                    report.psnr = v;
                    saw_psnr = true;
                }
                "ssim" => report.ssim = Some(v),
                "ms_ssim" => report.ms_ssim = Some(v),
                "kernel_xcorr" => report.kernel_xcorr = Some(v),
                other => return Err(Error::InvalidParam(format!("unknown metric '{other}'"))),
            }
        }
        if !saw_psnr {
            return Err(Error::InvalidParam("metric report lacks psnr".into()));
        }
        Ok(report)
    }
}
