//! Pixel-lattice fields, the damage mask and the discrete gradient/divergence
//! pair.
//!
//! Grid spacing is one pixel. The gradient uses forward differences with a
//! zero difference on the far edge; [`divergence`] is defined as the exact
//! negative adjoint of [`gradient`], so `<∇u, p> = -<u, div p>` holds for every
//! pair of fields up to rounding.

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Scalar};

/// `M`-channel real field on a `width × height` lattice, stored row-major with
/// channels innermost. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageField<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageField<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::InvalidField(format!(
                "data length {} != {width}×{height}×{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite entry at index {i}")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::filled(width, height, channels, T::zero())
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        check_dims(width, height, channels)?;
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a field from `f(x, y, m)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        check_dims(width, height, channels)?;
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for m in 0..channels {
                    data.push(f(x, y, m));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, m: usize) -> usize {
        (y * self.width + x) * self.channels + m
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, m: usize) -> T {
        self.data[self.index(x, y, m)]
    }

    /// Channel vector of pixel `i` (row-major pixel index).
    #[inline]
    pub fn pixel(&self, i: usize) -> &[T] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape_string(),
                got: other.shape_string(),
            })
        }
    }

    pub(crate) fn shape_string(&self) -> String {
        format!("{}×{}×{}", self.width, self.height, self.channels)
    }

    /// Euclidean inner product over all entries.
    pub fn dot(&self, other: &Self) -> T {
        compensated_sum(self.data.iter().zip(&other.data).map(|(&a, &b)| a * b))
    }

    /// Largest channel-Euclidean norm over all pixels.
    pub fn max_pixel_norm(&self) -> T {
        (0..self.pixel_count())
            .map(|i| pixel_norm(self.pixel(i)))
            .fold(T::zero(), T::max)
    }

    /// Largest absolute entry.
    pub fn sup_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn sup_distance(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }
}

fn check_dims(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 || channels == 0 {
        return Err(Error::InvalidField(format!(
            "dimensions must be positive, got {width}×{height}×{channels}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn pixel_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Per-pixel flag: `true` marks a pixel of the inpainting region `D`.
/// At least one pixel is always known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DamageMask {
    width: usize,
    height: usize,
    damaged: Vec<bool>,
}

impl DamageMask {
    pub fn new(width: usize, height: usize, damaged: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!(
                "dimensions must be positive, got {width}×{height}"
            )));
        }
        if damaged.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "flag count {} != {width}×{height}",
                damaged.len()
            )));
        }
        if damaged.iter().all(|&d| d) {
            return Err(Error::InvalidMask("mask damages entire domain".into()));
        }
        Ok(Self {
            width,
            height,
            damaged,
        })
    }

    /// No damaged pixels: pure denoising.
    pub fn none(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut damaged = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                damaged.push(f(x, y));
            }
        }
        Self::new(width, height, damaged)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_damaged(&self, i: usize) -> bool {
        self.damaged[i]
    }

    pub fn is_damaged_at(&self, x: usize, y: usize) -> bool {
        self.damaged[y * self.width + x]
    }

    pub fn flags(&self) -> &[bool] {
        &self.damaged
    }

    pub fn damaged_count(&self) -> usize {
        self.damaged.iter().filter(|&&d| d).count()
    }

    pub(crate) fn ensure_matches<T: Scalar>(&self, field: &ImageField<T>) -> Result<()> {
        if self.width == field.width() && self.height == field.height() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: format!("{}×{}", field.width(), field.height()),
                got: format!("{}×{} mask", self.width, self.height),
            })
        }
    }
}

/// Per-pixel `2×M` tensor field. Row 0 holds x-differences, row 1
/// y-differences; pixel `i` occupies `[2M i, 2M (i+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

/// Dual variables (`τ`, `σ`, test fields) share the gradient layout.
pub type DualField<T> = GradientField<T>;

impl<T: Scalar> GradientField<T> {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![T::zero(); width * height * 2 * channels],
        }
    }

    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height, channels)?;
        if data.len() != width * height * 2 * channels {
            return Err(Error::InvalidField(format!(
                "tensor data length {} != {width}×{height}×2×{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, row: usize, m: usize) -> usize {
        ((y * self.width + x) * 2 + row) * self.channels + m
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, row: usize, m: usize) -> T {
        self.data[self.index(x, y, row, m)]
    }

    /// The `2×M` tensor at pixel `i`, flattened row by row.
    #[inline]
    pub fn tensor(&self, i: usize) -> &[T] {
        let n = 2 * self.channels;
        &self.data[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn tensor_mut(&mut self, i: usize) -> &mut [T] {
        let n = 2 * self.channels;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Frobenius norm of the tensor at pixel `i`.
    pub fn tensor_norm(&self, i: usize) -> T {
        pixel_norm(self.tensor(i))
    }

    pub fn max_tensor_norm(&self) -> T {
        (0..self.pixel_count())
            .map(|i| self.tensor_norm(i))
            .fold(T::zero(), T::max)
    }

    pub fn dot(&self, other: &Self) -> T {
        compensated_sum(self.data.iter().zip(&other.data).map(|(&a, &b)| a * b))
    }

    /// `Σ |P(x)|²` over all pixels.
    pub fn squared_norm(&self) -> T {
        compensated_sum(self.data.iter().map(|&a| a * a))
    }

    pub fn sup_distance(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }
}

/// Forward-difference gradient with a zero difference at the far edge.
pub fn gradient<T: Scalar>(u: &ImageField<T>) -> GradientField<T> {
    let mut out = GradientField::zeros(u.width(), u.height(), u.channels());
    gradient_into(u, &mut out);
    out
}

pub(crate) fn gradient_into<T: Scalar>(u: &ImageField<T>, out: &mut GradientField<T>) {
    let (w, h, c) = (u.width(), u.height(), u.channels());
    let src = u.as_slice();
    let dst = out.as_mut_slice();
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let base = p * 2 * c;
            for m in 0..c {
                let here = src[p * c + m];
                dst[base + m] = if x + 1 < w {
                    src[(p + 1) * c + m] - here
                } else {
                    T::zero()
                };
                dst[base + c + m] = if y + 1 < h {
                    src[(p + w) * c + m] - here
                } else {
                    T::zero()
                };
            }
        }
    }
}

/// Negative adjoint of [`gradient`]: backward differences, truncated at the
/// boundary so that `<gradient(u), p> = -<u, divergence(p)>`.
pub fn divergence<T: Scalar>(p: &GradientField<T>) -> ImageField<T> {
    let mut data = vec![T::zero(); p.width() * p.height() * p.channels()];
    divergence_into(p, &mut data);
    ImageField {
        width: p.width(),
        height: p.height(),
        channels: p.channels(),
        data,
    }
}

pub(crate) fn divergence_into<T: Scalar>(p: &GradientField<T>, out: &mut [T]) {
    let (w, h, c) = (p.width(), p.height(), p.channels());
    let src = p.as_slice();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            for m in 0..c {
                let mut acc = T::zero();
                if x + 1 < w {
                    acc = acc + src[i * 2 * c + m];
                }
                if x > 0 {
                    acc = acc - src[(i - 1) * 2 * c + m];
                }
                if y + 1 < h {
                    acc = acc + src[i * 2 * c + c + m];
                }
                if y > 0 {
                    acc = acc - src[(i - w) * 2 * c + c + m];
                }
                out[i * c + m] = acc;
            }
        }
    }
}

/// Radial projection of every pixel onto the closed ball of radius `radius`
/// in channel space.
pub fn clamp_to_ball<T: Scalar>(u: &ImageField<T>, radius: T) -> Result<ImageField<T>> {
    if radius.is_nan() || radius < T::zero() {
        return Err(Error::Domain(format!("ball radius must be >= 0, got {radius}")));
    }
    let mut out = u.clone();
    let c = u.channels();
    for px in out.data.chunks_mut(c) {
        let n = pixel_norm(px);
        if n > radius {
            let s = radius / n;
            px.iter_mut().for_each(|v| *v = *v * s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn field_validation() {
        assert!(ImageField::<f64>::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(ImageField::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(ImageField::<f64>::zeros(0, 3, 1).is_err());
        assert!(DamageMask::new(2, 1, vec![true, true]).is_err());
        assert!(DamageMask::new(2, 1, vec![true]).is_err());
        assert!(DamageMask::new(2, 1, vec![true, false]).is_ok());
    }

    #[test]
    fn constant_gradient_is_zero() {
        let u = ImageField::filled(5, 4, 2, 0.7).unwrap();
        assert!(gradient(&u).as_slice().iter().all(|&v| v == 0.0));
        let v = ImageField::new(1, 2, 1, vec![0.3, 0.3]).unwrap();
        assert!(gradient(&v).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_pixel_gradient() {
        let u = ImageField::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let g = gradient(&u);
        assert_eq!(g.tensor(0), &[1.0, 0.0]);
        assert_eq!(g.tensor(1), &[0.0, 0.0]);
    }

    #[test]
    fn two_pixel_divergence() {
        // <∇u, p> = u1 - u0 forces div p = (1, -1)
        let p = GradientField::new(2, 1, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(divergence(&p).as_slice(), &[1.0, -1.0]);
        let z = GradientField::<f64>::zeros(3, 3, 2);
        assert!(divergence(&z).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = ImageField::<f64>::from_fn(8, 8, 2, |_, _, _| rng.gen_range(-1.0..1.0)).unwrap();
        let pdata = (0..8 * 8 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = GradientField::new(8, 8, 2, pdata).unwrap();
        let lhs = gradient(&u).dot(&p);
        let rhs = u.dot(&divergence(&p));
        assert!((lhs + rhs).abs() < 1e-12);
    }

    #[test]
    fn boundary_entries_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = ImageField::from_fn(4, 3, 2, |_, _, _| rng.gen::<f64>()).unwrap();
        let g = gradient(&u);
        for y in 0..3 {
            for m in 0..2 {
                assert_eq!(g.get(3, y, 0, m), 0.0);
            }
        }
        for x in 0..4 {
            for m in 0..2 {
                assert_eq!(g.get(x, 2, 1, m), 0.0);
            }
        }
    }

    #[test]
    fn clamp_examples() {
        let u = ImageField::new(2, 1, 1, vec![0.5, -1.0]).unwrap();
        assert_eq!(clamp_to_ball(&u, 1.0).unwrap(), u);
        let s = ImageField::new(1, 1, 1, vec![2.0]).unwrap();
        assert_eq!(clamp_to_ball(&s, 0.5).unwrap().as_slice(), &[0.5]);
        let v = ImageField::<f64>::new(1, 1, 2, vec![3.0, 4.0]).unwrap();
        let c = clamp_to_ball(&v, 1.0).unwrap();
        assert!((c.as_slice()[0] - 0.6).abs() < 1e-15);
        assert!((c.as_slice()[1] - 0.8).abs() < 1e-15);
        assert!(clamp_to_ball(&v, -1.0).is_err());
    }
}
