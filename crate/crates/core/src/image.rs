//! Image and kernel containers, spatial convolution with boundary handling,
//! bilinear resampling and the coarse-to-fine pyramid.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// How reads outside the frame are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BoundaryMode {
    Zero,
    #[default]
    Periodic,
    /// Half-sample symmetric: `-1 -> 0`, `-2 -> 1`, `n -> n-1`.
    Reflexive,
}

impl BoundaryMode {
    /// Maps a possibly out-of-range index into `0..n`, or `None` for a zero read.
    #[inline]
    pub fn resolve(self, idx: isize, n: usize) -> Option<usize> {
        let n_i = n as isize;
        if (0..n_i).contains(&idx) {
            return Some(idx as usize);
        }
        match self {
            BoundaryMode::Zero => None,
            BoundaryMode::Periodic => Some(idx.rem_euclid(n_i) as usize),
            BoundaryMode::Reflexive => {
                let m = idx.rem_euclid(2 * n_i);
                Some(if m >= n_i { 2 * n_i - 1 - m } else { m } as usize)
            }
        }
    }
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" => Ok(BoundaryMode::Zero),
            "periodic" => Ok(BoundaryMode::Periodic),
            "reflexive" | "symmetric" => Ok(BoundaryMode::Reflexive),
            other => Err(Error::InvalidParam(format!(
                "unknown boundary mode '{other}' (expected zero, periodic or reflexive)"
            ))),
        }
    }
}

/// Row-major 2D grid of real samples.
///
/// Holds images as well as every same-shaped intermediate (gradients,
/// framelet subbands, image-sized kernels). Values are unconstrained here;
/// clamping to `[0, 1]` happens only at I/O boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dim(format!("image must be non-empty, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::dim(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("image samples must be finite".into()));
        }
        Ok(Image { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "image must be non-empty");
        Image { width, height, data: vec![value; width * height] }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    /// Builds an image from `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "image must be non-empty");
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Image { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn same_shape(&self, other: &Image<T>) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.data[row * self.width + col] = v;
    }

    /// Reads with out-of-frame indices resolved by `mode`.
    #[inline]
    pub fn get_bounded(&self, row: isize, col: isize, mode: BoundaryMode) -> T {
        match (mode.resolve(row, self.height), mode.resolve(col, self.width)) {
            (Some(r), Some(c)) => self.get(r, c),
            _ => T::zero(),
        }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Image { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise combination of two equally shaped grids.
    pub fn zip_map(&self, other: &Image<T>, f: impl Fn(T, T) -> T) -> Self {
        assert!(self.same_shape(other), "zip_map on mismatched shapes");
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::lit(self.data.len() as f64)
    }

    pub fn dot(&self, other: &Image<T>) -> T {
        assert!(self.same_shape(other), "dot on mismatched shapes");
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Image<T>) -> T {
        assert!(self.same_shape(other), "max_abs_diff on mismatched shapes");
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn clamp01(&self) -> Self {
        self.map(|v| v.max(T::zero()).min(T::one()))
    }

    /// Circular shift: output(r, c) = input(r - dr, c - dc).
    pub fn circshift(&self, dr: isize, dc: isize) -> Self {
        let (h, w) = (self.height as isize, self.width as isize);
        Image::from_fn(self.width, self.height, |r, c| {
            self.get((r as isize - dr).rem_euclid(h) as usize, (c as isize - dc).rem_euclid(w) as usize)
        })
    }

    pub fn cast<U: Real>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// Point-spread function on an odd-sized support.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    rows: usize,
    cols: usize,
    weights: Vec<T>,
}

impl<T: Real> Kernel<T> {
    /// Wraps raw weights without normalizing them.
    pub fn new(rows: usize, cols: usize, weights: Vec<T>) -> Result<Self> {
        check_odd(rows, cols)?;
        if weights.len() != rows * cols {
            return Err(Error::dim(format!(
                "kernel weight count {} does not match {rows}x{cols}",
                weights.len()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("kernel weights must be finite".into()));
        }
        Ok(Kernel { rows, cols, weights })
    }

    /// Unit mass at the center.
    pub fn delta(rows: usize, cols: usize) -> Result<Self> {
        check_odd(rows, cols)?;
        let mut weights = vec![T::zero(); rows * cols];
        weights[(rows / 2) * cols + cols / 2] = T::one();
        Ok(Kernel { rows, cols, weights })
    }

    /// Takes an odd-sized grid as raw kernel weights.
    pub fn from_image(img: &Image<T>) -> Result<Self> {
        Self::new(img.height(), img.width(), img.data().to_vec())
    }

    pub fn to_image(&self) -> Image<T> {
        Image { width: self.cols, height: self.rows, data: self.weights.clone() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `(row, col)` of the center tap.
    #[inline]
    pub fn center(&self) -> (usize, usize) {
        (self.rows / 2, self.cols / 2)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.weights[row * self.cols + col]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn sum(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Clamps negative weights to zero and rescales to unit sum.
    pub fn normalize(&self) -> Result<Self> {
        let clamped: Vec<T> = self.weights.iter().map(|&v| v.max(T::zero())).collect();
        let total: T = clamped.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::DegenerateKernel);
        }
        Ok(Kernel { rows: self.rows, cols: self.cols, weights: clamped.into_iter().map(|v| v / total).collect() })
    }

    pub fn is_normalized(&self, tol: T) -> bool {
        self.weights.iter().all(|&v| v >= T::zero()) && (self.sum() - T::one()).abs() <= tol
    }

    /// True when every weight off the center is exactly zero.
    pub fn is_delta(&self) -> bool {
        let (cr, cc) = self.center();
        let center = cr * self.cols + cc;
        self.weights.iter().enumerate().all(|(i, &v)| i == center || v == T::zero()) && self.weights[center] != T::zero()
    }

    /// Number of weights that are exactly zero.
    pub fn zero_count(&self) -> usize {
        self.weights.iter().filter(|&&v| v == T::zero()).count()
    }

    pub fn zero_fraction(&self) -> f64 {
        self.zero_count() as f64 / self.weights.len() as f64
    }

    /// Zeroes taps below `fraction * max` and renormalizes.
    pub fn pruned(&self, fraction: T) -> Result<Self> {
        let peak = self.weights.iter().fold(T::zero(), |m, &v| m.max(v));
        let cut = peak * fraction;
        let w = self.weights.iter().map(|&v| if v < cut { T::zero() } else { v }).collect();
        Kernel::new(self.rows, self.cols, w)?.normalize()
    }

    /// Integer shift moving the center of mass onto the center tap.
    /// Mass pushed outside the window is dropped before renormalizing;
    /// a kernel with no mass is returned as is.
    pub fn recentered(&self) -> Result<Self> {
        self.recentered_above(T::zero())
    }

    /// Like [`Kernel::recentered`], but the center of mass is taken over
    /// `max(w - fraction * peak, 0)` so a faint spread of small taps does
    /// not pull it off the main blur path.
    pub fn recentered_above(&self, fraction: T) -> Result<Self> {
        let peak = self.weights.iter().fold(T::zero(), |m, &v| m.max(v));
        let floor = peak * fraction;
        let total = self.weights.iter().fold(T::zero(), |a, &v| a + (v - floor).max(T::zero()));
        if !(total > T::zero()) {
            return Ok(self.clone());
        }
        let (mut mr, mut mc) = (T::zero(), T::zero());
        for r in 0..self.rows {
            for c in 0..self.cols {
                let w = (self.get(r, c) - floor).max(T::zero());
                mr = mr + w * T::lit(r as f64);
                mc = mc + w * T::lit(c as f64);
            }
        }
        let (cr, cc) = self.center();
        let dr = cr as isize - (mr / total).to_f64_lossy().round() as isize;
        let dc = cc as isize - (mc / total).to_f64_lossy().round() as isize;
        if dr == 0 && dc == 0 {
            return Ok(self.clone());
        }
        let mut out = vec![T::zero(); self.weights.len()];
        for r in 0..self.rows as isize {
            for c in 0..self.cols as isize {
                let (nr, nc) = (r + dr, c + dc);
                if (0..self.rows as isize).contains(&nr) && (0..self.cols as isize).contains(&nc) {
                    out[nr as usize * self.cols + nc as usize] = self.get(r as usize, c as usize);
                }
            }
        }
        Kernel::new(self.rows, self.cols, out)?.normalize()
    }

    /// Kernel rotated by 180 degrees.
    pub fn flipped(&self) -> Self {
        let mut weights = self.weights.clone();
        weights.reverse();
        Kernel { rows: self.rows, cols: self.cols, weights }
    }

    pub fn cast<U: Real>(&self) -> Kernel<U> {
        Kernel {
            rows: self.rows,
            cols: self.cols,
            weights: self.weights.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

fn check_odd(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 || rows.is_multiple_of(2) || cols.is_multiple_of(2) {
        return Err(Error::dim(format!("kernel dimensions must be odd and positive, got {rows}x{cols}")));
    }
    Ok(())
}

fn check_fits<T: Real>(img: &Image<T>, k: &Kernel<T>) -> Result<()> {
    if k.rows() > img.height() || k.cols() > img.width() {
        return Err(Error::dim(format!(
            "kernel {}x{} larger than image {}x{}",
            k.rows(),
            k.cols(),
            img.height(),
            img.width()
        )));
    }
    Ok(())
}

/// Center-anchored true convolution (kernel flipped):
/// `out(i, j) = sum_{p,q} k(p, q) * img(i - (p - cr), j - (q - cc))`.
pub fn convolve2d<T: Real>(img: &Image<T>, k: &Kernel<T>, mode: BoundaryMode) -> Result<Image<T>> {
    check_fits(img, k)?;
    Ok(filter2d(img, k, mode, -1))
}

/// Center-anchored correlation; the adjoint of [`convolve2d`] under
/// `Periodic` and `Zero` modes.
pub fn correlate2d<T: Real>(img: &Image<T>, k: &Kernel<T>, mode: BoundaryMode) -> Result<Image<T>> {
    check_fits(img, k)?;
    Ok(filter2d(img, k, mode, 1))
}

fn filter2d<T: Real>(img: &Image<T>, k: &Kernel<T>, mode: BoundaryMode, sign: isize) -> Image<T> {
    let (cr, cc) = (k.rows() as isize / 2, k.cols() as isize / 2);
    let taps: Vec<(isize, isize, T)> = (0..k.rows())
        .flat_map(|p| (0..k.cols()).map(move |q| (p, q)))
        .filter_map(|(p, q)| {
            let w = k.get(p, q);
            (w != T::zero()).then_some((sign * (p as isize - cr), sign * (q as isize - cc), w))
        })
        .collect();
    Image::from_fn(img.width(), img.height(), |r, c| {
        taps.iter().fold(T::zero(), |acc, &(dr, dc, w)| {
            acc + w * img.get_bounded(r as isize + dr, c as isize + dc, mode)
        })
    })
}

/// Align-corners sample position of destination index `dst` in a source axis of length `src_len`.
#[inline]
fn source_coord(dst: usize, src_len: usize, dst_len: usize) -> f64 {
    if dst_len == 1 {
        (src_len as f64 - 1.0) / 2.0
    } else {
        dst as f64 * (src_len as f64 - 1.0) / (dst_len as f64 - 1.0)
    }
}

/// Bilinear resampling with corner pixels aligned.
pub fn resample_bilinear<T: Real>(img: &Image<T>, new_w: usize, new_h: usize) -> Result<Image<T>> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::dim(format!("resample target must be non-empty, got {new_w}x{new_h}")));
    }
    if new_w == img.width() && new_h == img.height() {
        return Ok(img.clone());
    }
    let axis = |len: usize, src_len: usize| -> Vec<(usize, usize, T)> {
        (0..len)
            .map(|d| {
                let s = source_coord(d, src_len, len);
                let lo = (s.floor() as usize).min(src_len - 1);
                let hi = (lo + 1).min(src_len - 1);
                (lo, hi, T::lit(s - lo as f64))
            })
            .collect()
    };
    let xs = axis(new_w, img.width());
    let ys = axis(new_h, img.height());
    Ok(Image::from_fn(new_w, new_h, |r, c| {
        let (y0, y1, fy) = ys[r];
        let (x0, x1, fx) = xs[c];
        let top = img.get(y0, x0) * (T::one() - fx) + img.get(y0, x1) * fx;
        let bottom = img.get(y1, x0) * (T::one() - fx) + img.get(y1, x1) * fx;
        top * (T::one() - fy) + bottom * fy
    }))
}

/// One rung of the coarse-to-fine pyramid.
#[derive(Debug, Clone)]
pub struct PyramidLevel<T> {
    /// Downscaling exponent: the image is `scale^-exponent` of the input size.
    pub exponent: usize,
    pub image: Image<T>,
    pub kernel_size: usize,
}

/// Nearest odd integer to `v`, never below 1.
pub fn nearest_odd(v: f64) -> usize {
    let k = ((v - 1.0) / 2.0).round().max(0.0) as usize;
    2 * k + 1
}

/// Kernel size per pyramid exponent, finest first, stopping once the size
/// reaches 3. Exponents that would repeat the previous size are skipped.
pub fn pyramid_kernel_sizes(kernel_size: usize, scale: f64) -> Vec<(usize, usize)> {
    let mut sizes = vec![(0, kernel_size)];
    if kernel_size <= 3 || !(scale > 1.0) {
        return sizes;
    }
    let mut exponent = 1;
    while sizes.last().is_some_and(|&(_, s)| s > 3) && exponent < 256 {
        let s = nearest_odd(kernel_size as f64 / scale.powi(exponent as i32)).max(3);
        if s < sizes.last().unwrap().1 {
            sizes.push((exponent, s));
        }
        exponent += 1;
    }
    sizes
}

/// Builds the image pyramid, coarsest level first.
///
/// A level is dropped (and the pyramid stops) when its downscaled image
/// would be smaller than its kernel in either dimension.
pub fn build_pyramid<T: Real>(img: &Image<T>, kernel_size: usize, scale: f64) -> Result<Vec<PyramidLevel<T>>> {
    if kernel_size.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!("kernel size must be odd, got {kernel_size}")));
    }
    if !(scale > 1.0) {
        return Err(Error::InvalidParam(format!("pyramid scale must exceed 1, got {scale}")));
    }
    let mut levels = Vec::new();
    for (exponent, ks) in pyramid_kernel_sizes(kernel_size, scale) {
        let f = scale.powi(exponent as i32);
        let w = ((img.width() as f64 / f).round() as usize).max(1);
        let h = ((img.height() as f64 / f).round() as usize).max(1);
        if exponent > 0 && (w < ks || h < ks) {
            break;
        }
        levels.push(PyramidLevel { exponent, image: resample_bilinear(img, w, h)?, kernel_size: ks });
    }
    levels.reverse();
    Ok(levels)
}

/// Resizes a kernel between pyramid levels.
///
/// Each source tap is splatted bilinearly to its scaled offset from the
/// target center (the adjoint of bilinear interpolation), so mass and the
/// center are preserved; the result is then clamped and normalized.
pub fn resize_kernel<T: Real>(k: &Kernel<T>, new_rows: usize, new_cols: usize) -> Result<Kernel<T>> {
    check_odd(new_rows, new_cols)?;
    let (cr, cc) = k.center();
    let (nr, nc) = (new_rows / 2, new_cols / 2);
    let sr = new_rows as f64 / k.rows() as f64;
    let sc = new_cols as f64 / k.cols() as f64;
    let mut out = vec![T::zero(); new_rows * new_cols];
    for p in 0..k.rows() {
        for q in 0..k.cols() {
            let w = k.get(p, q);
            if w == T::zero() {
                continue;
            }
            let y = nr as f64 + (p as f64 - cr as f64) * sr;
            let x = nc as f64 + (q as f64 - cc as f64) * sc;
            let (y0, x0) = (y.floor(), x.floor());
            let (fy, fx) = (y - y0, x - x0);
            for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
                for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
                    let (yy, xx) = (y0 + dy, x0 + dx);
                    let share = wy * wx;
                    if share == 0.0 || yy < 0.0 || xx < 0.0 || yy >= new_rows as f64 || xx >= new_cols as f64 {
                        continue;
                    }
                    let idx = yy as usize * new_cols + xx as usize;
                    out[idx] = out[idx] + w * T::lit(share);
                }
            }
        }
    }
    Kernel::new(new_rows, new_cols, out)?.normalize()
}

/// Three equally sized planes in R, G, B order.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage<T> {
    channels: [Image<T>; 3],
}

impl<T: Real> ColorImage<T> {
    pub fn new(r: Image<T>, g: Image<T>, b: Image<T>) -> Result<Self> {
        if !r.same_shape(&g) || !r.same_shape(&b) {
            return Err(Error::dim("color planes differ in size"));
        }
        Ok(ColorImage { channels: [r, g, b] })
    }

    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    pub fn channels(&self) -> &[Image<T>; 3] {
        &self.channels
    }

    pub fn into_channels(self) -> [Image<T>; 3] {
        self.channels
    }

    /// `0.299 R + 0.587 G + 0.114 B`.
    pub fn luminance(&self) -> Image<T> {
        let [r, g, b] = &self.channels;
        let (wr, wg, wb) = (T::lit(0.299), T::lit(0.587), T::lit(0.114));
        let rg = r.zip_map(g, |x, y| wr * x + wg * y);
        rg.zip_map(b, |x, y| x + wb * y)
    }
}
