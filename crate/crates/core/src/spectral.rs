//! 2D discrete Fourier transforms of real grids, PSF embedding, and the two
//! FFT-diagonalized closed-form solvers used by the latent-image and kernel
//! estimators.
//!
//! Everything here assumes periodic boundary conditions: convolution with
//! an embedded kernel becomes a pointwise product of spectra.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::image::{Image, Kernel};
use crate::scalar::Real;

/// Added to every closed-form denominator before division.
pub const DENOMINATOR_EPS: f64 = 1e-12;

/// Imaginary residue above this after an inverse transform is reported.
const IMAG_WARN: f64 = 1e-6;

/// Row-major grid of complex Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    width: usize,
    height: usize,
    values: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn from_values(width: usize, height: usize, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::dim(format!("spectrum length {} does not match {width}x{height}", values.len())));
        }
        Ok(Spectrum { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// The zero-frequency coefficient.
    pub fn dc(&self) -> Complex<T> {
        self.values[0]
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Spectrum { width: self.width, height: self.height, values: self.values.iter().map(|&z| f(z)).collect() }
    }

    pub fn zip_map(&self, other: &Spectrum<T>, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        assert!(self.width == other.width && self.height == other.height, "spectrum shape mismatch");
        Spectrum {
            width: self.width,
            height: self.height,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `|S|^2` per frequency.
    pub fn power(&self) -> Vec<T> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Cached forward/inverse plans for one grid size.
///
/// Plans are immutable and `Send + Sync`, so a planner can be shared
/// across threads.
#[derive(Clone)]
pub struct Fft2<T: Real> {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("width", &self.width).field("height", &self.height).finish()
    }
}

impl<T: Real> Fft2<T> {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn check(&self, w: usize, h: usize) {
        assert!(w == self.width && h == self.height, "grid {w}x{h} does not match plan {}x{}", self.width, self.height);
    }

    fn transform(&self, values: &mut [Complex<T>], row: &Arc<dyn Fft<T>>, col: &Arc<dyn Fft<T>>) {
        for chunk in values.chunks_exact_mut(self.width) {
            row.process(chunk);
        }
        let mut column = vec![Complex::new(T::zero(), T::zero()); self.height];
        for c in 0..self.width {
            for r in 0..self.height {
                column[r] = values[r * self.width + c];
            }
            col.process(&mut column);
            for r in 0..self.height {
                values[r * self.width + c] = column[r];
            }
        }
    }

    pub fn forward(&self, img: &Image<T>) -> Spectrum<T> {
        self.check(img.width(), img.height());
        let mut values: Vec<Complex<T>> = img.data().iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.transform(&mut values, &self.row_fwd, &self.col_fwd);
        Spectrum { width: self.width, height: self.height, values }
    }

    /// Inverse transform, normalized by `1/(W*H)`, keeping the real part.
    pub fn inverse(&self, spec: &Spectrum<T>) -> Image<T> {
        self.check(spec.width, spec.height);
        let mut values = spec.values.clone();
        self.transform(&mut values, &self.row_inv, &self.col_inv);
        let scale = T::one() / T::lit((self.width * self.height) as f64);
        let mut imag = T::zero();
        let data: Vec<T> = values
            .iter()
            .map(|z| {
                imag = imag.max(z.im.abs() * scale);
                z.re * scale
            })
            .collect();
        if imag > T::lit(IMAG_WARN) {
            log::warn!("inverse transform left imaginary residue {imag}");
        }
        Image::new(self.width, self.height, data).expect("inverse transform of finite spectrum")
    }
}

pub fn fft2<T: Real>(img: &Image<T>) -> Spectrum<T> {
    Fft2::new(img.width(), img.height()).forward(img)
}

pub fn ifft2<T: Real>(spec: &Spectrum<T>) -> Image<T> {
    Fft2::new(spec.width, spec.height).inverse(spec)
}

/// Zero-pads an odd-sized grid to `width x height` with its center moved to index `(0, 0)`.
pub fn embed_centered<T: Real>(small: &Image<T>, width: usize, height: usize) -> Result<Image<T>> {
    if small.width() > width || small.height() > height {
        return Err(Error::dim(format!(
            "kernel {}x{} exceeds target {width}x{height}",
            small.height(),
            small.width()
        )));
    }
    let (cr, cc) = (small.height() as isize / 2, small.width() as isize / 2);
    let mut out = Image::zeros(width, height);
    for p in 0..small.height() {
        for q in 0..small.width() {
            let r = (p as isize - cr).rem_euclid(height as isize) as usize;
            let c = (q as isize - cc).rem_euclid(width as isize) as usize;
            out.set(r, c, out.get(r, c) + small.get(p, q));
        }
    }
    Ok(out)
}

/// Inverse of [`embed_centered`]: the `rows x cols` window around the origin.
pub fn crop_centered<T: Real>(full: &Image<T>, rows: usize, cols: usize) -> Result<Image<T>> {
    if rows > full.height() || cols > full.width() {
        return Err(Error::dim(format!("crop {rows}x{cols} exceeds grid {}x{}", full.height(), full.width())));
    }
    let (cr, cc) = (rows as isize / 2, cols as isize / 2);
    let (h, w) = (full.height() as isize, full.width() as isize);
    Ok(Image::from_fn(cols, rows, |p, q| {
        full.get((p as isize - cr).rem_euclid(h) as usize, (q as isize - cc).rem_euclid(w) as usize)
    }))
}

/// Optical transfer function: the kernel embedded at image size with its
/// center at the origin, then transformed.
pub fn psf_to_otf<T: Real>(k: &Kernel<T>, width: usize, height: usize) -> Result<Spectrum<T>> {
    Ok(fft2(&embed_centered(&k.to_image(), width, height)?))
}

fn psf_to_otf_with<T: Real>(plan: &Fft2<T>, k: &Image<T>) -> Result<Spectrum<T>> {
    Ok(plan.forward(&embed_centered(k, plan.width, plan.height)?))
}

/// Closed-form minimizer of
/// `||k * x - y||^2 + beta ||x - a||^2 + mu1 sum_i ||grad_i x - b_i||^2`
/// for a fixed blur kernel, with the image-dependent spectra cached.
#[derive(Debug, Clone)]
pub struct LatentSolver<T: Real> {
    plan: Fft2<T>,
    /// conj(K) F(y)
    data_num: Spectrum<T>,
    /// |K|^2
    kernel_power: Vec<T>,
    grad_h: Spectrum<T>,
    grad_v: Spectrum<T>,
    /// |G_h|^2 + |G_v|^2
    grad_power: Vec<T>,
}

impl<T: Real> LatentSolver<T> {
    pub fn new(y: &Image<T>, k: &Kernel<T>, grad_h_otf: &Spectrum<T>, grad_v_otf: &Spectrum<T>) -> Result<Self> {
        let plan = Fft2::new(y.width(), y.height());
        for g in [grad_h_otf, grad_v_otf] {
            if g.width != y.width() || g.height != y.height() {
                return Err(Error::dim("gradient transfer function does not match image size"));
            }
        }
        let otf = psf_to_otf_with(&plan, &k.to_image())?;
        let fy = plan.forward(y);
        let data_num = otf.zip_map(&fy, |kk, yy| kk.conj() * yy);
        let grad_power = grad_h_otf.power().iter().zip(grad_v_otf.power()).map(|(&a, b)| a + b).collect();
        Ok(LatentSolver {
            plan,
            data_num,
            kernel_power: otf.power(),
            grad_h: grad_h_otf.clone(),
            grad_v: grad_v_otf.clone(),
            grad_power,
        })
    }

    /// Solves for `x`; `a = None` drops the intensity coupling term.
    pub fn solve(&self, a: Option<&Image<T>>, b_h: &Image<T>, b_v: &Image<T>, beta: T, mu1: T) -> Result<Image<T>> {
        let fa = a.map(|a| self.plan.forward(a));
        self.solve_with(fa.as_ref(), b_h, b_v, beta, mu1)
    }

    /// Transform of an image on the solver's grid.
    pub fn spectrum(&self, img: &Image<T>) -> Spectrum<T> {
        self.plan.forward(img)
    }

    /// [`LatentSolver::solve`] with the transform of `a` supplied, so it can
    /// be reused while `a` is fixed.
    pub fn solve_with(
        &self,
        fa: Option<&Spectrum<T>>,
        b_h: &Image<T>,
        b_v: &Image<T>,
        beta: T,
        mu1: T,
    ) -> Result<Image<T>> {
        let fbh = self.plan.forward(b_h);
        let fbv = self.plan.forward(b_v);
        let eps = T::lit(DENOMINATOR_EPS);
        let mut values = Vec::with_capacity(self.kernel_power.len());
        for i in 0..self.kernel_power.len() {
            let den = self.kernel_power[i] + beta + mu1 * self.grad_power[i];
            if !(den >= eps) {
                return Err(Error::Singular(format!("latent system denominator {den} at frequency {i}")));
            }
            let mut num = self.data_num.values[i]
                + (self.grad_h.values[i].conj() * fbh.values[i] + self.grad_v.values[i].conj() * fbv.values[i])
                    .scale(mu1);
            if let Some(fa) = fa {
                num = num + fa.values[i].scale(beta);
            }
            values.push(num.unscale(den + eps));
        }
        Ok(self.plan.inverse(&Spectrum { width: self.plan.width, height: self.plan.height, values }))
    }
}

/// One-shot form of [`LatentSolver`].
#[allow(clippy::too_many_arguments)]
pub fn solve_x_closed_form<T: Real>(
    y: &Image<T>,
    k: &Kernel<T>,
    a: &Image<T>,
    b_h: &Image<T>,
    b_v: &Image<T>,
    beta: T,
    mu1: T,
    grad_h_otf: &Spectrum<T>,
    grad_v_otf: &Spectrum<T>,
) -> Result<Image<T>> {
    LatentSolver::new(y, k, grad_h_otf, grad_v_otf)?.solve(Some(a), b_h, b_v, beta, mu1)
}

/// Closed-form minimizer of
/// `sum_i ||gx_i * k - gy_i||^2 + mu2 ||k - w^T c||^2 + mu3 ||k - d||^2`
/// over image-sized `k`, with the gradient spectra cached.
#[derive(Debug, Clone)]
pub struct KernelSolver<T: Real> {
    plan: Fft2<T>,
    /// sum_i conj(F(gx_i)) F(gy_i)
    data_num: Spectrum<T>,
    /// sum_i |F(gx_i)|^2
    data_den: Vec<T>,
}

impl<T: Real> KernelSolver<T> {
    pub fn new(gx: [&Image<T>; 2], gy: [&Image<T>; 2]) -> Result<Self> {
        let (w, h) = (gx[0].width(), gx[0].height());
        if gx.iter().chain(gy.iter()).any(|g| g.width() != w || g.height() != h) {
            return Err(Error::dim("gradient fields must share one size"));
        }
        let plan = Fft2::new(w, h);
        let fx: Vec<Spectrum<T>> = gx.iter().map(|g| plan.forward(g)).collect();
        let fy: Vec<Spectrum<T>> = gy.iter().map(|g| plan.forward(g)).collect();
        let n = w * h;
        let mut num = vec![Complex::new(T::zero(), T::zero()); n];
        let mut den = vec![T::zero(); n];
        for (sx, sy) in fx.iter().zip(&fy) {
            for i in 0..n {
                num[i] = num[i] + sx.values[i].conj() * sy.values[i];
                den[i] = den[i] + sx.values[i].norm_sqr();
            }
        }
        Ok(KernelSolver { plan, data_num: Spectrum { width: w, height: h, values: num }, data_den: den })
    }

    pub fn width(&self) -> usize {
        self.plan.width
    }

    pub fn height(&self) -> usize {
        self.plan.height
    }

    /// Spectrum of a kernel-support grid embedded at the solver size.
    pub fn embed_spectrum(&self, small: &Image<T>) -> Result<Spectrum<T>> {
        psf_to_otf_with(&self.plan, small)
    }

    /// Image-sized solution, origin-centered, before cropping or projection.
    /// `d` and `synth_c` are kernel-support grids.
    pub fn solve_full(&self, d: &Image<T>, synth_c: &Image<T>, mu2: T, mu3: T) -> Result<Image<T>> {
        let fd = self.embed_spectrum(d)?;
        let fc = self.embed_spectrum(synth_c)?;
        self.solve_full_spectra(&fd, &fc, mu2, mu3)
    }

    /// As [`Self::solve_full`] with the embedded spectra already computed.
    pub fn solve_full_spectra(&self, fd: &Spectrum<T>, fc: &Spectrum<T>, mu2: T, mu3: T) -> Result<Image<T>> {
        if !(mu2 + mu3 > T::zero()) {
            return Err(Error::InvalidParam("kernel solve needs mu2 + mu3 > 0".into()));
        }
        let eps = T::lit(DENOMINATOR_EPS);
        let values = (0..self.data_den.len())
            .map(|i| {
                let num = self.data_num.values[i] + fd.values[i].scale(mu3) + fc.values[i].scale(mu2);
                num.unscale(self.data_den[i] + mu3 + mu2 + eps)
            })
            .collect();
        Ok(self.plan.inverse(&Spectrum { width: self.plan.width, height: self.plan.height, values }))
    }

    /// Cropped to `rows x cols` around the origin, clamped and normalized.
    pub fn solve(&self, d: &Image<T>, synth_c: &Image<T>, mu2: T, mu3: T) -> Result<Kernel<T>> {
        let full = self.solve_full(d, synth_c, mu2, mu3)?;
        let window = crop_centered(&full, d.height(), d.width())?;
        Kernel::from_image(&window)?.normalize()
    }
}

/// One-shot form of [`KernelSolver`]. `d` and `synth_c` (the framelet
/// synthesis of the thresholded coefficients) live on the kernel support.
#[allow(clippy::too_many_arguments)]
pub fn solve_k_closed_form<T: Real>(
    gx_h: &Image<T>,
    gx_v: &Image<T>,
    gy_h: &Image<T>,
    gy_v: &Image<T>,
    d: &Image<T>,
    synth_c: &Image<T>,
    mu2: T,
    mu3: T,
) -> Result<Kernel<T>> {
    KernelSolver::new([gx_h, gx_v], [gy_h, gy_v])?.solve(d, synth_c, mu2, mu3)
}
