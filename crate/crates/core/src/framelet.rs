//! Single-level undecimated tight framelet transform built from the
//! piecewise-linear B-spline filter bank, with periodic extension.
//!
//! With periodic extension the analysis operator `W` satisfies `W^T W = I`
//! exactly, so [`synthesize`] is both the adjoint and the left inverse of
//! [`analyze`].

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Real;

/// The three 3-tap filters, anchored at offsets `-1, 0, +1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterBank<T> {
    pub filters: [[T; 3]; 3],
}

impl<T: Real> FilterBank<T> {
    /// Lowpass `1/4 [1, 2, 1]`, first-order `sqrt(2)/4 [1, 0, -1]`,
    /// second-order `1/4 [-1, 2, -1]`.
    pub fn linear_bspline() -> Self {
        let q = T::lit(0.25);
        let s = T::SQRT_2() * q;
        let two = T::lit(2.0);
        FilterBank { filters: [[q, two * q, q], [s, T::zero(), -s], [-q, two * q, -q]] }
    }

    /// Frequency response `sum_m h(m) e^{-i w m}` of filter `i`, as `(re, im)`.
    pub fn response(&self, i: usize, omega: T) -> (T, T) {
        self.filters[i].iter().zip([-1.0, 0.0, 1.0]).fold((T::zero(), T::zero()), |(re, im), (&h, m)| {
            let phase = -omega * T::lit(m);
            (re + h * phase.cos(), im + h * phase.sin())
        })
    }

    /// `sum_i |H_i(w)|^2`; identically 1 for a tight frame.
    pub fn power_sum(&self, omega: T) -> T {
        (0..3)
            .map(|i| {
                let (re, im) = self.response(i, omega);
                re * re + im * im
            })
            .sum()
    }
}

/// Nine full-size subbands; `(i, j)` holds the response to `h_i` along
/// rows (vertical axis) and `h_j` along columns (horizontal axis).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameletCoeffs<T> {
    subbands: Vec<Image<T>>,
}

impl<T: Real> FrameletCoeffs<T> {
    pub fn from_subbands(subbands: Vec<Image<T>>) -> Result<Self> {
        if subbands.len() != 9 {
            return Err(Error::dim(format!("expected 9 subbands, got {}", subbands.len())));
        }
        if subbands.iter().any(|s| !s.same_shape(&subbands[0])) {
            return Err(Error::dim("framelet subbands differ in size"));
        }
        Ok(FrameletCoeffs { subbands })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        FrameletCoeffs { subbands: vec![Image::zeros(width, height); 9] }
    }

    pub fn subband(&self, i: usize, j: usize) -> &Image<T> {
        &self.subbands[3 * i + j]
    }

    pub fn subband_mut(&mut self, i: usize, j: usize) -> &mut Image<T> {
        &mut self.subbands[3 * i + j]
    }

    pub fn subbands(&self) -> &[Image<T>] {
        &self.subbands
    }

    pub fn width(&self) -> usize {
        self.subbands[0].width()
    }

    pub fn height(&self) -> usize {
        self.subbands[0].height()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        FrameletCoeffs { subbands: self.subbands.iter().map(|s| s.map(&f)).collect() }
    }

    pub fn norm_sq(&self) -> T {
        self.subbands.iter().map(|s| s.norm_sq()).sum()
    }

    pub fn dot(&self, other: &FrameletCoeffs<T>) -> T {
        self.subbands.iter().zip(&other.subbands).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn count_nonzero(&self) -> usize {
        self.subbands.iter().map(|s| s.data().iter().filter(|&&v| v != T::zero()).count()).sum()
    }

    pub fn len(&self) -> usize {
        9 * self.subbands[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Fraction of exactly-zero coefficients.
    pub fn zero_fraction(&self) -> f64 {
        1.0 - self.count_nonzero() as f64 / self.len() as f64
    }
}

#[derive(Clone, Copy)]
enum Axis {
    Vertical,
    Horizontal,
}

/// Periodic 3-tap filter along one axis. `sign = -1` convolves, `+1` correlates.
fn filter_axis<T: Real>(g: &Image<T>, taps: &[T; 3], axis: Axis, sign: isize) -> Image<T> {
    let (w, h) = (g.width() as isize, g.height() as isize);
    Image::from_fn(g.width(), g.height(), |r, c| {
        taps.iter().zip(-1isize..=1).fold(T::zero(), |acc, (&t, m)| {
            if t == T::zero() {
                return acc;
            }
            let v = match axis {
                Axis::Vertical => g.get((r as isize + sign * m).rem_euclid(h) as usize, c),
                Axis::Horizontal => g.get(r, (c as isize + sign * m).rem_euclid(w) as usize),
            };
            acc + t * v
        })
    })
}

pub fn analyze<T: Real>(g: &Image<T>) -> FrameletCoeffs<T> {
    let bank = FilterBank::<T>::linear_bspline();
    let mut subbands = Vec::with_capacity(9);
    for hi in &bank.filters {
        let vert = filter_axis(g, hi, Axis::Vertical, -1);
        for hj in &bank.filters {
            subbands.push(filter_axis(&vert, hj, Axis::Horizontal, -1));
        }
    }
    FrameletCoeffs { subbands }
}

/// Adjoint of [`analyze`]; reconstructs `g` from `analyze(g)` exactly.
pub fn synthesize<T: Real>(coeffs: &FrameletCoeffs<T>) -> Result<Image<T>> {
    let first = &coeffs.subbands[0];
    if coeffs.subbands.len() != 9 || coeffs.subbands.iter().any(|s| !s.same_shape(first)) {
        return Err(Error::dim("framelet subbands differ in size"));
    }
    let bank = FilterBank::<T>::linear_bspline();
    let mut out = Image::zeros(first.width(), first.height());
    for (i, hi) in bank.filters.iter().enumerate() {
        let mut row_sum = Image::zeros(first.width(), first.height());
        for (j, hj) in bank.filters.iter().enumerate() {
            let part = filter_axis(coeffs.subband(i, j), hj, Axis::Horizontal, 1);
            row_sum = row_sum.zip_map(&part, |a, b| a + b);
        }
        let part = filter_axis(&row_sum, hi, Axis::Vertical, 1);
        out = out.zip_map(&part, |a, b| a + b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_grid_lives_in_lowpass_only() {
        let c = analyze(&Image::filled(6, 5, 0.7));
        for i in 0..3 {
            for j in 0..3 {
                let expect: f64 = if (i, j) == (0, 0) { 0.7 } else { 0.0 };
                assert!(c.subband(i, j).data().iter().all(|&v| (v - expect).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        assert_eq!(analyze(&Image::<f64>::zeros(4, 4)).count_nonzero(), 0);
        assert_eq!(synthesize(&FrameletCoeffs::<f64>::zeros(4, 4)).unwrap(), Image::zeros(4, 4));
    }

    #[test]
    fn horizontal_ramp_first_order_band_is_centered_difference() {
        let n = 8;
        let g = Image::from_fn(n, n, |_, c| c as f64 / n as f64);
        let band = analyze(&g).subband(0, 1).clone();
        let s = 2f64.sqrt() / 4.0;
        for r in 0..n {
            for c in 0..n {
                // oracle: direct periodic filter sum, h1 = s [1, 0, -1] at offsets -1, 0, 1, convolved
                let right = g.get(r, (c + 1) % n);
                let left = g.get(r, (c + n - 1) % n);
                assert!((band.get(r, c) - s * (right - left)).abs() < 1e-14);
            }
        }
        // away from the wrap, the band is the constant s * 2/N
        assert!((band.get(3, 3) - s * 2.0 / n as f64).abs() < 1e-14);
    }

    #[test]
    fn lowpass_impulse_synthesizes_to_tensor_footprint() {
        let mut coeffs = FrameletCoeffs::<f64>::zeros(7, 7);
        coeffs.subband_mut(0, 0).set(3, 4, 1.0);
        let g = synthesize(&coeffs).unwrap();
        let h0 = [0.25, 0.5, 0.25];
        for r in 0..7 {
            for c in 0..7 {
                let dr = r as isize - 3;
                let dc = c as isize - 4;
                let expect =
                    if dr.abs() <= 1 && dc.abs() <= 1 { h0[(dr + 1) as usize] * h0[(dc + 1) as usize] } else { 0.0 };
                assert!((g.get(r, c) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn perfect_reconstruction_and_adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (w, h) in [(5, 5), (9, 4), (3, 3), (1, 1)] {
            let g = Image::from_fn(w, h, |_, _| rng.random::<f64>() - 0.5);
            let a = analyze(&g);
            assert!(synthesize(&a).unwrap().max_abs_diff(&g) < 1e-12);
            assert!((a.norm_sq() - g.norm_sq()).abs() < 1e-12);

            let c = FrameletCoeffs::from_subbands(
                (0..9).map(|_| Image::from_fn(w, h, |_, _| rng.random::<f64>() - 0.5)).collect(),
            )
            .unwrap();
            assert!((a.dot(&c) - g.dot(&synthesize(&c).unwrap())).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_subbands_rejected() {
        let mut bands = vec![Image::<f64>::zeros(4, 4); 8];
        bands.push(Image::zeros(3, 4));
        assert!(FrameletCoeffs::from_subbands(bands).is_err());
    }

    #[test]
    fn filter_bank_partition_of_unity() {
        let bank = FilterBank::<f64>::linear_bspline();
        for n in 0..64 {
            let w = -std::f64::consts::PI + n as f64 * 0.1;
            assert!((bank.power_sum(w) - 1.0).abs() < 1e-14);
            // masks cos^2(w/2) and sin^2(w/2) for the even filters
            assert!((bank.response(0, w).0 - (w / 2.0).cos().powi(2)).abs() < 1e-14);
            assert!((bank.response(2, w).0 - (w / 2.0).sin().powi(2)).abs() < 1e-14);
            let (re, im) = bank.response(1, w);
            assert!(re.abs() < 1e-15);
            assert!((im.abs() - 2f64.sqrt() / 2.0 * w.sin().abs()).abs() < 1e-14);
        }
    }
}
