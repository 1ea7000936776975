//! Synthetic blur generation for ground-truth experiments.
//!
//! Noise is drawn from ChaCha8 seeded through `seed_from_u64` and mapped to
//! a standard normal with `rand_distr`'s ziggurat sampler, so a given seed
//! produces the same field on every platform.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::{convolve2d, BoundaryMode, Image, Kernel};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    None,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub std: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec::default()
    }

    pub fn gaussian(std: f64, seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::Gaussian, std, seed }
    }

    /// Additive noise field of the given size (all zeros for `None` or `std = 0`).
    pub fn field<T: Real>(&self, width: usize, height: usize) -> Result<Image<T>> {
        if !(self.std >= 0.0) || !self.std.is_finite() {
            return Err(Error::InvalidParam(format!("noise std must be non-negative, got {}", self.std)));
        }
        if self.kind == NoiseKind::None || self.std == 0.0 {
            return Ok(Image::zeros(width, height));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let data = (0..width * height)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z * self.std)
            })
            .collect();
        Image::new(width, height, data)
    }
}

/// Parametric kernel families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Delta { size: usize },
    Box { size: usize },
    Gaussian { size: usize, std: f64 },
    /// Straight-line motion of `length` pixels at `angle` degrees
    /// (counter-clockwise from the +x axis, y pointing up).
    LinearMotion { size: usize, length: f64, angle: f64 },
}

impl KernelSpec {
    pub fn size(&self) -> usize {
        match *self {
            KernelSpec::Delta { size }
            | KernelSpec::Box { size }
            | KernelSpec::Gaussian { size, .. }
            | KernelSpec::LinearMotion { size, .. } => size,
        }
    }

    /// Motion kernel on the smallest odd support holding the segment.
    pub fn motion(length: f64, angle: f64) -> Self {
        let l = length.max(1.0).ceil() as usize;
        KernelSpec::LinearMotion { size: if l.is_multiple_of(2) { l + 1 } else { l }, length, angle }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// `kind[:p1[:p2]]`: `delta:3`, `box:5`, `gauss:9:1.5`, `motion:15:45`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || Error::InvalidParam(format!("malformed kernel spec '{s}' (expected kind[:p1[:p2]])"));
        let num = |i: usize| -> Result<f64> { parts.get(i).ok_or_else(bad)?.parse::<f64>().map_err(|_| bad()) };
        let size = |i: usize| -> Result<usize> {
            let v = num(i)?;
            if v < 1.0 || v.fract() != 0.0 || (v as usize).is_multiple_of(2) {
                return Err(Error::InvalidParam(format!("kernel size must be an odd positive integer in '{s}'")));
            }
            Ok(v as usize)
        };
        let arity = |n: usize| if parts.len() == n { Ok(()) } else { Err(bad()) };
        match parts[0].to_ascii_lowercase().as_str() {
            "delta" => {
                if parts.len() == 1 {
                    return Ok(KernelSpec::Delta { size: 1 });
                }
                arity(2)?;
                Ok(KernelSpec::Delta { size: size(1)? })
            }
            "box" => {
                arity(2)?;
                Ok(KernelSpec::Box { size: size(1)? })
            }
            "gauss" | "gaussian" => {
                arity(3)?;
                Ok(KernelSpec::Gaussian { size: size(1)?, std: num(2)? })
            }
            "motion" => {
                arity(3)?;
                let length = num(1)?;
                if !(length > 0.0) {
                    return Err(Error::InvalidParam(format!("motion length must be positive in '{s}'")));
                }
                Ok(KernelSpec::motion(length, num(2)?))
            }
            _ => Err(bad()),
        }
    }
}

/// Normalized nonnegative kernel of the requested family.
pub fn make_kernel<T: Real>(spec: &KernelSpec) -> Result<Kernel<T>> {
    let size = spec.size();
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!("kernel size must be odd, got {size}")));
    }
    let c = (size / 2) as f64;
    let weights: Vec<f64> = match *spec {
        KernelSpec::Delta { .. } => return Kernel::delta(size, size),
        KernelSpec::Box { .. } => vec![1.0; size * size],
        KernelSpec::Gaussian { std, .. } => {
            if !(std >= 0.0) {
                return Err(Error::InvalidParam(format!("gaussian std must be non-negative, got {std}")));
            }
            if std == 0.0 {
                return Kernel::delta(size, size);
            }
            (0..size * size)
                .map(|i| {
                    let (r, q) = ((i / size) as f64 - c, (i % size) as f64 - c);
                    (-(r * r + q * q) / (2.0 * std * std)).exp()
                })
                .collect()
        }
        KernelSpec::LinearMotion { length, angle, .. } => {
            if !(length > 0.0) {
                return Err(Error::InvalidParam(format!("motion length must be positive, got {length}")));
            }
            let half = (length - 1.0).max(0.0) / 2.0;
            let (s, co) = angle.to_radians().sin_cos();
            (0..size * size)
                .map(|i| {
                    // y up: row offsets grow downward
                    let (x, y) = ((i % size) as f64 - c, c - (i / size) as f64);
                    let along = x * co + y * s;
                    let perp = (-x * s + y * co).abs();
                    if along.abs() <= half + 1e-9 { (1.0 - perp).max(0.0) } else { 0.0 }
                })
                .collect()
        }
    };
    Kernel::new(size, size, weights.into_iter().map(T::lit).collect())?.normalize()
}

/// `x * k + noise`, without clamping.
pub fn blur_unclamped<T: Real>(x: &Image<T>, k: &Kernel<T>, mode: BoundaryMode, noise: &NoiseSpec) -> Result<Image<T>> {
    let y = convolve2d(x, k, mode)?;
    if noise.kind == NoiseKind::None {
        return Ok(y);
    }
    let n = noise.field(x.width(), x.height())?;
    Ok(y.zip_map(&n, |a, b| a + b))
}

/// `x * k + noise`, clamped to `[0, 1]`.
pub fn blur<T: Real>(x: &Image<T>, k: &Kernel<T>, mode: BoundaryMode, noise: &NoiseSpec) -> Result<Image<T>> {
    Ok(blur_unclamped(x, k, mode, noise)?.clamp01())
}

/// Deterministic piecewise-constant scene: background, rectangles, a disc
/// and a thin bar, all with distinct intensities.
pub fn piecewise_constant<T: Real>(width: usize, height: usize) -> Image<T> {
    let (w, h) = (width as f64, height as f64);
    Image::from_fn(width, height, |r, c| {
        let (y, x) = (r as f64 / h, c as f64 / w);
        let v = if (x - 0.68).powi(2) + (y - 0.68).powi(2) < 0.18f64.powi(2) {
            0.85
        } else if (0.15..0.45).contains(&x) && (0.2..0.55).contains(&y) {
            0.95
        } else if (0.55..0.9).contains(&x) && (0.12..0.3).contains(&y) {
            0.55
        } else if (0.12..0.2).contains(&x) && (0.62..0.9).contains(&y) {
            0.7
        } else {
            0.15
        };
        T::lit(v)
    })
}
