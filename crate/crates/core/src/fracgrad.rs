//! Grünwald–Letnikov fractional-order gradients and their adjoints.
//!
//! For order `λ` and `L` taps the horizontal operator is
//! `out(r, c) = sum_{l < L} g_l u(r, c - l)` with `g_l = (-1)^l C(λ, l)`,
//! and the vertical one runs the same sum over `r - l`. With `λ = 1` this is
//! the ordinary backward difference `[1, -1]`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::image::{BoundaryMode, Image};
use crate::scalar::Real;
use crate::spectral::{Fft2, Spectrum};

/// Default fractional order used for kernel estimation.
pub const DEFAULT_ORDER: f64 = 1.1;
/// Default stencil length.
pub const DEFAULT_TAPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Along the column index (within a row).
    Horizontal,
    /// Along the row index (within a column).
    Vertical,
}

/// Signed G-L coefficients `g_l = (-1)^l C(λ, l)`, `l = 0..L`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlStencil<T> {
    order: T,
    coeffs: Vec<T>,
}

impl<T: Real> GlStencil<T> {
    /// Builds the stencil with the recurrence `g_l = g_{l-1} (1 - (λ+1)/l)`,
    /// which avoids the gamma poles of the direct ratio.
    pub fn new(order: T, taps: usize) -> Result<Self> {
        if !(order > T::zero()) || !order.is_finite() {
            return Err(Error::Domain(format!("fractional order must be positive, got {order}")));
        }
        if taps == 0 {
            return Err(Error::InvalidParam("stencil needs at least one tap".into()));
        }
        let mut coeffs = Vec::with_capacity(taps);
        coeffs.push(T::one());
        for l in 1..taps {
            let prev = coeffs[l - 1];
            coeffs.push(prev * (T::one() - (order + T::one()) / T::lit(l as f64)));
        }
        Ok(GlStencil { order, coeffs })
    }

    /// The ordinary backward difference `[1, -1]`.
    pub fn first_difference() -> Self {
        GlStencil { order: T::one(), coeffs: vec![T::one(), -T::one()] }
    }

    pub fn order(&self) -> T {
        self.order
    }

    pub fn taps(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Transfer function of the operator along `dir` on a `width x height` periodic grid.
    pub fn otf(&self, dir: Direction, width: usize, height: usize) -> Spectrum<T> {
        let mut grid = Image::zeros(width, height);
        for (l, &g) in self.coeffs.iter().enumerate() {
            let (r, c) = match dir {
                Direction::Horizontal => (0, l % width),
                Direction::Vertical => (l % height, 0),
            };
            grid.set(r, c, grid.get(r, c) + g);
        }
        Fft2::new(width, height).forward(&grid)
    }
}

/// Convenience wrapper for [`GlStencil::new`].
pub fn gl_coeffs<T: Real>(order: T, taps: usize) -> Result<GlStencil<T>> {
    GlStencil::new(order, taps)
}

fn check_extent<T: Real>(g: &Image<T>, stencil: &GlStencil<T>, dir: Direction) -> Result<()> {
    let extent = match dir {
        Direction::Horizontal => g.width(),
        Direction::Vertical => g.height(),
    };
    if stencil.taps() > extent {
        return Err(Error::dim(format!("stencil of {} taps exceeds grid extent {extent}", stencil.taps())));
    }
    Ok(())
}

fn apply<T: Real>(g: &Image<T>, stencil: &GlStencil<T>, dir: Direction, mode: BoundaryMode, sign: isize) -> Image<T> {
    Image::from_fn(g.width(), g.height(), |r, c| {
        stencil.coeffs.iter().enumerate().fold(T::zero(), |acc, (l, &w)| {
            let off = sign * l as isize;
            let v = match dir {
                Direction::Horizontal => g.get_bounded(r as isize, c as isize + off, mode),
                Direction::Vertical => g.get_bounded(r as isize + off, c as isize, mode),
            };
            acc + w * v
        })
    })
}

/// One-sided backward G-L sum along `dir`.
pub fn frac_grad<T: Real>(g: &Image<T>, stencil: &GlStencil<T>, dir: Direction, mode: BoundaryMode) -> Result<Image<T>> {
    check_extent(g, stencil, dir)?;
    Ok(apply(g, stencil, dir, mode, -1))
}

/// Forward-looking sum `out(c) = sum_l g_l u(c + l)`; the exact adjoint of
/// [`frac_grad`] under `Periodic` and `Zero` modes.
pub fn frac_grad_adjoint<T: Real>(
    g: &Image<T>,
    stencil: &GlStencil<T>,
    dir: Direction,
    mode: BoundaryMode,
) -> Result<Image<T>> {
    check_extent(g, stencil, dir)?;
    Ok(apply(g, stencil, dir, mode, 1))
}

/// A gradient pair operator: one stencil applied along both axes.
#[derive(Debug, Clone)]
pub struct Gradient<T> {
    pub stencil: GlStencil<T>,
    pub mode: BoundaryMode,
    /// Exchanges which axis is reported as horizontal.
    pub swap_axes: bool,
}

impl<T: Real> Gradient<T> {
    pub fn new(stencil: GlStencil<T>, mode: BoundaryMode) -> Self {
        Gradient { stencil, mode, swap_axes: false }
    }

    fn dirs(&self) -> [Direction; 2] {
        if self.swap_axes {
            [Direction::Vertical, Direction::Horizontal]
        } else {
            [Direction::Horizontal, Direction::Vertical]
        }
    }

    /// `(∇_h g, ∇_v g)`.
    pub fn apply(&self, g: &Image<T>) -> Result<[Image<T>; 2]> {
        let [h, v] = self.dirs();
        Ok([frac_grad(g, &self.stencil, h, self.mode)?, frac_grad(g, &self.stencil, v, self.mode)?])
    }

    /// `∇_h^T p_h + ∇_v^T p_v`.
    pub fn adjoint(&self, p: [&Image<T>; 2]) -> Result<Image<T>> {
        let [h, v] = self.dirs();
        let a = frac_grad_adjoint(p[0], &self.stencil, h, self.mode)?;
        let b = frac_grad_adjoint(p[1], &self.stencil, v, self.mode)?;
        Ok(a.zip_map(&b, |x, y| x + y))
    }

    /// Periodic transfer functions `(G_h, G_v)` at the given size.
    pub fn otfs(&self, width: usize, height: usize) -> [Spectrum<T>; 2] {
        let [h, v] = self.dirs();
        [self.stencil.otf(h, width, height), self.stencil.otf(v, width, height)]
    }
}

/// Closed-form transfer function of a stencil at discrete frequency `u` of `n`.
pub fn stencil_response<T: Real>(stencil: &GlStencil<T>, u: usize, n: usize) -> Complex<T> {
    stencil.coeffs.iter().enumerate().fold(Complex::new(T::zero(), T::zero()), |acc, (l, &g)| {
        let phase = -T::TAU() * T::lit((u * l) as f64 / n as f64);
        acc + Complex::new(phase.cos(), phase.sin()).scale(g)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{fft2, ifft2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Lanczos approximation (g = 7, n = 9) with reflection for x < 1/2.
    fn gamma(x: f64) -> f64 {
        const G: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let pi = std::f64::consts::PI;
        if x < 0.5 {
            return pi / ((pi * x).sin() * gamma(1.0 - x));
        }
        let x = x - 1.0;
        let t = x + 7.5;
        let a = G.iter().enumerate().skip(1).fold(G[0], |acc, (i, &g)| acc + g / (x + i as f64));
        (2.0 * pi).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }

    fn gamma_oracle(order: f64, taps: usize) -> Vec<f64> {
        (0..taps)
            .map(|l| {
                let c = gamma(order + 1.0) / (gamma(l as f64 + 1.0) * gamma(order - l as f64 + 1.0));
                if l % 2 == 0 { c } else { -c }
            })
            .collect()
    }

    #[test]
    fn integer_orders_give_binomials() {
        assert_eq!(gl_coeffs(1.0, 3).unwrap().coeffs(), &[1.0, -1.0, 0.0]);
        assert_eq!(gl_coeffs(2.0, 3).unwrap().coeffs(), &[1.0, -2.0, 1.0]);
        assert_eq!(gl_coeffs(2.0, 5).unwrap().coeffs(), &[1.0, -2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn half_order_matches_gamma_oracle() {
        let s = gl_coeffs(0.5, 3).unwrap();
        let oracle = gamma_oracle(0.5, 3);
        for (a, b) in s.coeffs().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        for (a, b) in s.coeffs().iter().zip([1.0, -0.5, -0.125]) {
            assert!((a - b).abs() < 1e-12);
        }
        for order in [0.3, 1.1, 1.7, 2.5] {
            let s = gl_coeffs(order, 8).unwrap();
            for (a, b) in s.coeffs().iter().zip(gamma_oracle(order, 8)) {
                assert!((a - b).abs() < 1e-11, "order {order}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn non_positive_order_is_rejected() {
        assert!(matches!(gl_coeffs(0.0, 3), Err(Error::Domain(_))));
        assert!(matches!(gl_coeffs(-1.0, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn order_one_is_backward_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = Image::from_fn(6, 5, |_, _| rng.random::<f64>());
        let s = gl_coeffs(1.0, 3).unwrap();
        let gh = frac_grad(&u, &s, Direction::Horizontal, BoundaryMode::Periodic).unwrap();
        let gv = frac_grad(&u, &s, Direction::Vertical, BoundaryMode::Periodic).unwrap();
        for r in 0..5 {
            for c in 0..6 {
                assert_eq!(gh.get(r, c), u.get(r, c) - u.get(r, (c + 5) % 6));
                assert_eq!(gv.get(r, c), u.get(r, c) - u.get((r + 4) % 5, c));
            }
        }
    }

    #[test]
    fn half_order_row_example() {
        let u = Image::new(3, 1, vec![1.0f64, 2.0, 3.0]).unwrap();
        let s = gl_coeffs(0.5, 3).unwrap();
        let g = frac_grad(&u, &s, Direction::Horizontal, BoundaryMode::Periodic).unwrap();
        assert!((g.get(0, 2) - 1.875).abs() < 1e-15);
    }

    #[test]
    fn integer_order_kills_constants() {
        let u = Image::filled(7, 7, 0.4);
        for order in [1.0, 2.0, 3.0] {
            let s = gl_coeffs(order, 7).unwrap();
            let g = frac_grad(&u, &s, Direction::Vertical, BoundaryMode::Periodic).unwrap();
            assert!(g.max_abs() < 1e-14);
        }
    }

    #[test]
    fn stencil_longer_than_grid_is_rejected() {
        let u = Image::<f64>::zeros(2, 8);
        let s = gl_coeffs(1.5, 3).unwrap();
        assert!(frac_grad(&u, &s, Direction::Horizontal, BoundaryMode::Periodic).is_err());
        assert!(frac_grad(&u, &s, Direction::Vertical, BoundaryMode::Periodic).is_ok());
    }

    #[test]
    fn adjoint_of_first_difference_is_negated_forward_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = Image::from_fn(5, 4, |_, _| rng.random::<f64>());
        let s = gl_coeffs(1.0, 2).unwrap();
        let a = frac_grad_adjoint(&u, &s, Direction::Horizontal, BoundaryMode::Periodic).unwrap();
        for r in 0..4 {
            for c in 0..5 {
                assert_eq!(a.get(r, c), -(u.get(r, (c + 1) % 5) - u.get(r, c)));
            }
        }
        let dc = Image::filled(5, 4, 0.9);
        let g = frac_grad(&dc, &s, Direction::Vertical, BoundaryMode::Periodic).unwrap();
        let back = frac_grad_adjoint(&g, &s, Direction::Vertical, BoundaryMode::Periodic).unwrap();
        assert!(back.max_abs() < 1e-15);
    }

    #[test]
    fn adjoint_inner_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for mode in [BoundaryMode::Periodic, BoundaryMode::Zero] {
            for dir in [Direction::Horizontal, Direction::Vertical] {
                let s = gl_coeffs(1.3, 4).unwrap();
                let f = Image::from_fn(8, 8, |_, _| rng.random::<f64>() - 0.5);
                let g = Image::from_fn(8, 8, |_, _| rng.random::<f64>() - 0.5);
                let lhs = frac_grad(&f, &s, dir, mode).unwrap().dot(&g);
                let rhs = f.dot(&frac_grad_adjoint(&g, &s, dir, mode).unwrap());
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn periodic_operator_is_spectral_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = Image::from_fn(9, 7, |_, _| rng.random::<f64>());
        let s = gl_coeffs(1.1, 3).unwrap();
        for dir in [Direction::Horizontal, Direction::Vertical] {
            let spatial = frac_grad(&u, &s, dir, BoundaryMode::Periodic).unwrap();
            let otf = s.otf(dir, 9, 7);
            let spectral = ifft2(&fft2(&u).zip_map(&otf, |a, b| a * b));
            assert!(spatial.max_abs_diff(&spectral) < 1e-12);
        }
        let otf = s.otf(Direction::Horizontal, 9, 7);
        for u in 0..9 {
            assert!((otf.get(0, u) - stencil_response(&s, u, 9)).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_swap_exchanges_axes() {
        let u = Image::from_fn(5, 5, |r, c| (r * r + 2 * c) as f64);
        let mut op = Gradient::new(GlStencil::first_difference(), BoundaryMode::Periodic);
        let [h, v] = op.apply(&u).unwrap();
        op.swap_axes = true;
        let [h2, v2] = op.apply(&u).unwrap();
        assert_eq!(h, v2);
        assert_eq!(v, h2);
    }
}
