//! Kernel (PSF) estimation from an intermediate latent image.
//!
//! The kernel prior is `||W k||_0 - α ||k||_1` with `W` the framelet
//! analysis operator, and the data term is fitted on fractional-order
//! gradients. The solver alternates:
//!
//! * `c`: hard threshold of `W k` at `γ2 / μ2` (outer loop, `μ2` doubling
//!   from `2 γ2`);
//! * `d`, Bregman variable `b`, then `k` by the FFT closed form (inner
//!   loop, `μ3` doubling from `2 μ2`).

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::framelet::{analyze, synthesize, FrameletCoeffs};
use crate::fracgrad::{GlStencil, Gradient, DEFAULT_ORDER, DEFAULT_TAPS};
use crate::image::{resize_kernel, BoundaryMode, Image, Kernel};
use crate::latent::doubling;
use crate::scalar::Real;
use crate::spectral::KernelSolver;
use crate::trace::{record, SolverTrace, TraceEvent};

/// Rule for the `d`-update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DUpdate {
    /// `d = k + b`.
    #[default]
    Literal,
    /// `d = (k + b) + (γ2 α / (2 μ3)) sign(k + b)`, the exact minimizer of
    /// `-γ2 α |d| + μ3 (d - k - b)^2`.
    ExactProx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams<T> {
    pub gamma2: T,
    /// Weight of the subtracted l1 term, in `[0, 1]`.
    pub alpha: T,
    /// Fractional gradient order.
    pub order: T,
    pub taps: usize,
    pub mu2_max: T,
    pub mu3_max: T,
    pub growth: T,
    /// Per-orientation retained pixel count is `factor * rows * cols`;
    /// `None` disables truncation.
    pub truncation_factor: Option<T>,
    pub d_update: DUpdate,
    pub swap_axes: bool,
}

impl<T: Real> Default for KernelParams<T> {
    fn default() -> Self {
        KernelParams {
            gamma2: T::lit(4e-3),
            alpha: T::lit(0.5),
            order: T::lit(DEFAULT_ORDER),
            taps: DEFAULT_TAPS,
            mu2_max: T::lit(1e5),
            mu3_max: T::lit(1e5),
            growth: T::lit(2.0),
            truncation_factor: Some(T::lit(2.0)),
            d_update: DUpdate::Literal,
            swap_axes: false,
        }
    }
}

impl<T: Real> KernelParams<T> {
    pub fn mu2_init(&self) -> T {
        T::lit(2.0) * self.gamma2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma2 > T::zero()) {
            return Err(Error::InvalidParam(format!("gamma2 must be positive, got {}", self.gamma2)));
        }
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::InvalidParam(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.growth > T::one()) {
            return Err(Error::InvalidParam("penalty growth factor must exceed 1".into()));
        }
        if !(self.mu2_max > self.mu2_init()) {
            return Err(Error::InvalidParam("mu2_max must exceed 2*gamma2".into()));
        }
        if !(self.mu3_max > T::lit(2.0) * self.mu2_init()) {
            return Err(Error::InvalidParam("mu3_max must exceed 4*gamma2".into()));
        }
        if let Some(f) = self.truncation_factor {
            if !(f > T::zero()) {
                return Err(Error::InvalidParam("truncation factor must be positive".into()));
            }
        }
        GlStencil::new(self.order, self.taps)?;
        Ok(())
    }

    /// The `(μ2, [μ3...])` pairs visited; data independent.
    pub fn schedule(&self) -> Vec<(T, Vec<T>)> {
        doubling(self.mu2_init(), self.mu2_max, self.growth)
            .into_iter()
            .map(|mu2| (mu2, doubling(T::lit(2.0) * mu2, self.mu3_max, self.growth)))
            .collect()
    }

    pub fn gradient(&self) -> Result<Gradient<T>> {
        let mut g = Gradient::new(GlStencil::new(self.order, self.taps)?, BoundaryMode::Periodic);
        g.swap_axes = self.swap_axes;
        Ok(g)
    }
}

/// Framelet auxiliary: keep coefficients with `|wk|^2 >= γ2 / μ2`.
pub fn threshold_c<T: Real>(wk: &FrameletCoeffs<T>, gamma2: T, mu2: T) -> FrameletCoeffs<T> {
    let thr = gamma2 / mu2;
    wk.map(|v| if v * v >= thr { v } else { T::zero() })
}

/// `d = k + b`.
pub fn update_d<T: Real>(k: &Image<T>, bregman: &Image<T>) -> Image<T> {
    k.zip_map(bregman, |a, b| a + b)
}

/// `d = (k + b) + shift * sign(k + b)` with `shift = γ2 α / (2 μ3)`.
pub fn update_d_exact_prox<T: Real>(k: &Image<T>, bregman: &Image<T>, shift: T) -> Image<T> {
    k.zip_map(bregman, |a, b| {
        let s = a + b;
        if s > T::zero() {
            s + shift
        } else if s < T::zero() {
            s - shift
        } else {
            s
        }
    })
}

/// `b + (k - d)`.
pub fn update_bregman<T: Real>(bregman: &Image<T>, k: &Image<T>, d: &Image<T>) -> Image<T> {
    let kd = k.zip_map(d, |a, b| a - b);
    bregman.zip_map(&kd, |a, b| a + b)
}

/// Orientation bin in `[0, 4)` of a gradient vector, over angles mod π.
fn orientation_bin<T: Real>(h: T, v: T) -> usize {
    let mut theta = v.atan2(h);
    if theta < T::zero() {
        theta = theta + T::PI();
    }
    let bin = (theta / T::FRAC_PI_4()).floor().to_usize().unwrap_or(0);
    bin.min(3)
}

/// Keeps, within each of four orientation bins, the pixels whose gradient
/// magnitude is among the `ceil(factor * rows * cols)` largest (ties at the
/// cutoff kept); everything else is zeroed.
pub fn truncate_gradients<T: Real>(
    gx_h: &Image<T>,
    gx_v: &Image<T>,
    k_rows: usize,
    k_cols: usize,
    factor: T,
) -> [Image<T>; 2] {
    let quota = (factor * T::lit((k_rows * k_cols) as f64)).ceil().to_usize().unwrap_or(usize::MAX).max(1);
    let mag: Vec<T> = gx_h.data().iter().zip(gx_v.data()).map(|(&h, &v)| (h * h + v * v).sqrt()).collect();
    let bins: Vec<usize> =
        gx_h.data().iter().zip(gx_v.data()).map(|(&h, &v)| orientation_bin(h, v)).collect();
    let mut cutoff = [T::zero(); 4];
    for (b, cut) in cutoff.iter_mut().enumerate() {
        let mut m: Vec<T> = mag.iter().zip(&bins).filter(|&(&m, &bb)| bb == b && m > T::zero()).map(|(&m, _)| m).collect();
        if m.len() > quota {
            m.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
            *cut = m[quota - 1];
        }
    }
    let keep: Vec<bool> = mag.iter().zip(&bins).map(|(&m, &b)| m > T::zero() && m >= cutoff[b]).collect();
    let mask = |g: &Image<T>| {
        let mut out = g.clone();
        for (o, &k) in out.data_mut().iter_mut().zip(&keep) {
            if !k {
                *o = T::zero();
            }
        }
        out
    };
    [mask(gx_h), mask(gx_v)]
}

pub fn estimate_kernel<T: Real>(
    y: &Image<T>,
    x: &Image<T>,
    size: (usize, usize),
    warm: Option<&Kernel<T>>,
    p: &KernelParams<T>,
) -> Result<Kernel<T>> {
    estimate_kernel_traced(y, x, size, warm, p, None)
}

pub fn estimate_kernel_traced<T: Real>(
    y: &Image<T>,
    x: &Image<T>,
    size: (usize, usize),
    warm: Option<&Kernel<T>>,
    p: &KernelParams<T>,
    mut trace: Option<&mut SolverTrace>,
) -> Result<Kernel<T>> {
    p.validate()?;
    let (rows, cols) = size;
    if !y.same_shape(x) {
        return Err(Error::dim("blurred and latent images differ in size"));
    }
    if rows % 2 == 0 || cols % 2 == 0 || rows > y.height() || cols > y.width() {
        return Err(Error::dim(format!("kernel size {rows}x{cols} must be odd and fit the image")));
    }

    let grad = p.gradient()?;
    let [mut gxh, mut gxv] = grad.apply(x)?;
    let [gyh, gyv] = grad.apply(y)?;
    if let Some(f) = p.truncation_factor {
        [gxh, gxv] = truncate_gradients(&gxh, &gxv, rows, cols, f);
    }
    let solver = KernelSolver::new([&gxh, &gxv], [&gyh, &gyv])?;

    let mut k = match warm {
        Some(w) if w.rows() == rows && w.cols() == cols => w.normalize()?,
        Some(w) => resize_kernel(w, rows, cols)?,
        None => Kernel::delta(rows, cols)?,
    }
    .to_image();
    let mut bregman = Image::zeros(cols, rows);

    for (mu2, mu3s) in p.schedule() {
        record(&mut trace, TraceEvent::Mu2(mu2.to_f64_lossy()));
        let c = threshold_c(&analyze(&k), p.gamma2, mu2);
        let fc = solver.embed_spectrum(&synthesize(&c)?)?;
        for mu3 in mu3s {
            record(&mut trace, TraceEvent::Mu3(mu3.to_f64_lossy()));
            let ratio = (p.gamma2 * p.alpha / mu3).abs();
            if !(ratio < T::one()) {
                return Err(Error::Domain(format!("|gamma2*alpha/mu3| = {ratio} is not below 1")));
            }
            let d = match p.d_update {
                DUpdate::Literal => update_d(&k, &bregman),
                DUpdate::ExactProx => update_d_exact_prox(&k, &bregman, p.gamma2 * p.alpha / (T::lit(2.0) * mu3)),
            };
            bregman = update_bregman(&bregman, &k, &d);
            let fd = solver.embed_spectrum(&d)?;
            let full = solver.solve_full_spectra(&fd, &fc, mu2, mu3)?;
            let window = crate::spectral::crop_centered(&full, rows, cols)?;
            k = Kernel::from_image(&window)?.normalize()?.to_image();
        }
    }
    Kernel::from_image(&k)
}
