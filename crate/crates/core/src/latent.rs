//! Latent sharp-image estimation for a fixed kernel by half-quadratic
//! splitting of the l0 intensity and gradient priors.
//!
//! The outer loop doubles the intensity penalty `β` (from `2 γ1 σ`) and
//! refreshes the intensity auxiliary `a`; the inner loop doubles the
//! gradient penalty `μ1` (from `2 γ1`), refreshes the gradient auxiliary
//! `b` and solves for `x` in closed form. Both loops stop once the
//! penalty exceeds its cap.

use crate::error::{Error, Result};
use crate::fracgrad::{GlStencil, Gradient};
use crate::image::{BoundaryMode, Image, Kernel};
use crate::scalar::Real;
use crate::spectral::LatentSolver;
use crate::trace::{record, SolverTrace, TraceEvent};

/// How the gradient auxiliary is thresholded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientThreshold {
    /// Keep or zero both components together based on `g_h^2 + g_v^2`.
    #[default]
    Isotropic,
    /// Threshold each component on its own square.
    Anisotropic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentParams<T> {
    pub gamma1: T,
    /// Weight of the intensity l0 term; 0 disables it.
    pub sigma: T,
    pub beta_max: T,
    pub mu1_max: T,
    pub growth: T,
    pub gradient_threshold: GradientThreshold,
}

impl<T: Real> Default for LatentParams<T> {
    fn default() -> Self {
        LatentParams {
            gamma1: T::lit(2e-2),
            sigma: T::one(),
            beta_max: T::lit(8.0),
            mu1_max: T::lit(1e5),
            growth: T::lit(2.0),
            gradient_threshold: GradientThreshold::Isotropic,
        }
    }
}

impl<T: Real> LatentParams<T> {
    pub fn beta_init(&self) -> T {
        T::lit(2.0) * self.gamma1 * self.sigma
    }

    pub fn mu1_init(&self) -> T {
        T::lit(2.0) * self.gamma1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 > T::zero()) {
            return Err(Error::InvalidParam(format!("gamma1 must be positive, got {}", self.gamma1)));
        }
        if !(self.sigma >= T::zero()) {
            return Err(Error::InvalidParam(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if !(self.growth > T::one()) {
            return Err(Error::InvalidParam("penalty growth factor must exceed 1".into()));
        }
        if self.sigma > T::zero() && !(self.beta_max > self.beta_init()) {
            return Err(Error::InvalidParam("beta_max must exceed 2*gamma1*sigma".into()));
        }
        if !(self.mu1_max > self.mu1_init()) {
            return Err(Error::InvalidParam("mu1_max must exceed 2*gamma1".into()));
        }
        Ok(())
    }

    /// The `(β, [μ1...])` pairs the solver will visit; depends only on the
    /// parameters, never on data.
    pub fn schedule(&self) -> Vec<(T, Vec<T>)> {
        let inner = doubling(self.mu1_init(), self.mu1_max, self.growth);
        if self.sigma == T::zero() {
            return vec![(T::zero(), inner)];
        }
        doubling(self.beta_init(), self.beta_max, self.growth).into_iter().map(|b| (b, inner.clone())).collect()
    }
}

/// `start, start*g, ...` for as long as the value does not exceed `max`
/// (the do-while form: the first value is always visited).
pub(crate) fn doubling<T: Real>(start: T, max: T, growth: T) -> Vec<T> {
    let mut out = vec![start];
    let mut v = start * growth;
    while v <= max {
        out.push(v);
        v = v * growth;
    }
    out
}

/// Intensity auxiliary: `a = x` where `x^2 >= γ1 σ / β`, else 0.
pub fn threshold_a<T: Real>(x: &Image<T>, gamma1: T, sigma: T, beta: T) -> Image<T> {
    let thr = gamma1 * sigma / beta;
    x.map(|v| if v * v >= thr { v } else { T::zero() })
}

/// Gradient auxiliary: keep `∇x` where its squared magnitude reaches `γ1 / μ1`.
pub fn threshold_b<T: Real>(
    grad: [&Image<T>; 2],
    gamma1: T,
    mu1: T,
    mode: GradientThreshold,
) -> [Image<T>; 2] {
    let thr = gamma1 / mu1;
    match mode {
        GradientThreshold::Anisotropic => grad.map(|g| g.map(|v| if v * v >= thr { v } else { T::zero() })),
        GradientThreshold::Isotropic => {
            let [gh, gv] = grad;
            let keep: Vec<bool> = gh.data().iter().zip(gv.data()).map(|(&h, &v)| h * h + v * v >= thr).collect();
            let mask = |g: &Image<T>| {
                let mut out = g.clone();
                for (o, &k) in out.data_mut().iter_mut().zip(&keep) {
                    if !k {
                        *o = T::zero();
                    }
                }
                out
            };
            [mask(gh), mask(gv)]
        }
    }
}

/// Ordinary periodic gradient used by the latent solver.
pub fn latent_gradient<T: Real>() -> Gradient<T> {
    Gradient::new(GlStencil::first_difference(), BoundaryMode::Periodic)
}

pub fn estimate_latent<T: Real>(y: &Image<T>, k: &Kernel<T>, p: &LatentParams<T>) -> Result<Image<T>> {
    estimate_latent_traced(y, k, p, None)
}

pub fn estimate_latent_traced<T: Real>(
    y: &Image<T>,
    k: &Kernel<T>,
    p: &LatentParams<T>,
    mut trace: Option<&mut SolverTrace>,
) -> Result<Image<T>> {
    p.validate()?;
    let grad = latent_gradient::<T>();
    let [gh, gv] = grad.otfs(y.width(), y.height());
    let solver = LatentSolver::new(y, k, &gh, &gv)?;
    let mut x = y.clone();
    for (beta, mu1s) in p.schedule() {
        let fa = (p.sigma > T::zero()).then(|| solver.spectrum(&threshold_a(&x, p.gamma1, p.sigma, beta)));
        record(&mut trace, TraceEvent::Beta(beta.to_f64_lossy()));
        for mu1 in mu1s {
            record(&mut trace, TraceEvent::Mu1(mu1.to_f64_lossy()));
            let [dh, dv] = grad.apply(&x)?;
            let [bh, bv] = threshold_b([&dh, &dv], p.gamma1, mu1, p.gradient_threshold);
            x = solver.solve_with(fa.as_ref(), &bh, &bv, beta, mu1)?;
        }
    }
    Ok(x)
}
