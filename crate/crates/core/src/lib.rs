//! Blind image deblurring: coarse-to-fine PSF estimation with a framelet
//! `l0 - α l1` kernel prior and fractional-order gradients, plus synthetic
//! blur generation and quality metrics.
//!
//! Everything is generic over the scalar ([`Real`], implemented for `f32`
//! and `f64`); the aliases below fix it to one of the two.
//!
//! ```
//! use fracblind::{synth, BoundaryMode, PipelineConfig};
//!
//! let truth = synth::piecewise_constant::<f64>(32, 32);
//! let k = synth::make_kernel(&"motion:3:0".parse().unwrap()).unwrap();
//! let y = synth::blur(&truth, &k, BoundaryMode::Periodic, &synth::NoiseSpec::none()).unwrap();
//! let cfg = PipelineConfig { inner_iters: 1, ..PipelineConfig::with_kernel_size(3) };
//! let out = fracblind::deblur_blind(&y, &cfg).unwrap();
//! assert!(out.kernel.is_normalized(1e-9));
//! ```

// `!(x > 0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fracgrad;
pub mod framelet;
pub mod image;
pub mod kernelest;
pub mod latent;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod spectral;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use fracgrad::{frac_grad, frac_grad_adjoint, Direction, GlStencil, Gradient};
pub use framelet::{analyze, synthesize, FilterBank, FrameletCoeffs};
pub use image::{
    build_pyramid, convolve2d, correlate2d, resample_bilinear, resize_kernel, BoundaryMode, ColorImage, Image,
    Kernel,
};
pub use kernelest::{estimate_kernel, DUpdate, KernelParams};
pub use latent::{estimate_latent, GradientThreshold, LatentParams};
pub use metrics::{kernel_xcorr, ms_ssim, psnr, ssim, MetricReport};
pub use pipeline::{
    deblur_blind, deblur_blind_color, deblur_blind_traced, edge_taper, final_nonblind, DeblurResult,
    LevelDiagnostics, PipelineConfig,
};
pub use scalar::Real;
pub use trace::{SolverTrace, TraceEvent};

pub type ImageF64 = Image<f64>;
pub type KernelF64 = Kernel<f64>;
pub type ColorImageF64 = ColorImage<f64>;
pub type PipelineConfigF64 = PipelineConfig<f64>;
pub type DeblurResultF64 = DeblurResult<f64>;

pub type ImageF32 = Image<f32>;
pub type KernelF32 = Kernel<f32>;
pub type ColorImageF32 = ColorImage<f32>;
pub type PipelineConfigF32 = PipelineConfig<f32>;
pub type DeblurResultF32 = DeblurResult<f32>;
