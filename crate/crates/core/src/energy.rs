//! Discrete primal energies and their exact gradient.
//!
//! ```text
//! I_δ[u] = Σ_pixels F_δ(∇u) + (λ/ζ) Σ_{pixels ∉ D} |u - f|^ζ
//! ```
//!
//! With `δ = 0` this is the target energy `I`. All reductions run in
//! row-major pixel order with compensated summation, so values do not depend
//! on anything but the inputs.

use crate::density::DensityParams;
use crate::error::{Error, Result};
use crate::grid::{divergence_into, gradient_into, pixel_norm, DamageMask, GradientField, ImageField};
use crate::scalar::{CompensatedSum, Scalar};

/// Model weights: fidelity weight `lambda > 0`, fidelity exponent `zeta > 1`
/// and the integrand. `fidelity_smoothing` replaces `|u-f|` with
/// `sqrt(|u-f|² + ε²)` inside the solver objective; it is only accepted for
/// `zeta < 2` and defaults to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    lambda: T,
    zeta: T,
    density: DensityParams<T>,
    fidelity_smoothing: T,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(lambda: T, zeta: T, density: DensityParams<T>) -> Result<Self> {
        if !lambda.is_finite() || lambda <= T::zero() {
            return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
        }
        if !zeta.is_finite() || zeta <= T::one() {
            return Err(Error::InvalidParameter(format!("zeta must be > 1, got {zeta}")));
        }
        Ok(Self {
            lambda,
            zeta,
            density,
            fidelity_smoothing: T::zero(),
        })
    }

    pub fn with_fidelity_smoothing(mut self, eps: T) -> Result<Self> {
        if !eps.is_finite() || eps < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "fidelity smoothing must be >= 0, got {eps}"
            )));
        }
        if eps > T::zero() && self.zeta >= T::lit(2.0) {
            return Err(Error::InvalidParameter(
                "fidelity smoothing is only available for zeta < 2".into(),
            ));
        }
        self.fidelity_smoothing = eps;
        Ok(self)
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn zeta(&self) -> T {
        self.zeta
    }

    pub fn density(&self) -> &DensityParams<T> {
        &self.density
    }

    pub fn fidelity_smoothing(&self) -> T {
        self.fidelity_smoothing
    }

    pub fn with_delta(&self, delta: T) -> Result<Self> {
        Ok(Self {
            density: self.density.with_delta(delta)?,
            ..*self
        })
    }

    /// Same model with `δ = 0` and no fidelity smoothing: the target problem.
    pub fn target(&self) -> Self {
        Self {
            density: self.density.inviscid(),
            fidelity_smoothing: T::zero(),
            ..*self
        }
    }

    /// `(λ/ζ) r^ζ` for a residual norm `r`, including smoothing.
    #[inline]
    fn fidelity_term(&self, r: T) -> T {
        let eps = self.fidelity_smoothing;
        let r = if eps > T::zero() { (r * r + eps * eps).sqrt() } else { r };
        let two = T::lit(2.0);
        let pow = if self.zeta == two { r * r } else { r.powf(self.zeta) };
        self.lambda / self.zeta * pow
    }

    /// Scalar factor `λ r^(ζ-2)` multiplying the residual vector, zero at `r = 0`
    /// for unsmoothed `ζ < 2`.
    #[inline]
    fn fidelity_slope(&self, r: T) -> T {
        let two = T::lit(2.0);
        if self.zeta == two {
            return self.lambda;
        }
        let eps = self.fidelity_smoothing;
        let r = if eps > T::zero() { (r * r + eps * eps).sqrt() } else { r };
        if r == T::zero() {
            return T::zero();
        }
        self.lambda * r.powf(self.zeta - two)
    }
}

fn check_shapes<T: Scalar>(
    u: &ImageField<T>,
    f: &ImageField<T>,
    mask: &DamageMask,
) -> Result<()> {
    u.ensure_same_shape(f)?;
    mask.ensure_matches(u)
}

/// `(λ/ζ) Σ_{pixels ∉ D} |u - f|^ζ`. Values of `f` on `D` are ignored.
pub fn fidelity<T: Scalar>(
    u: &ImageField<T>,
    f: &ImageField<T>,
    mask: &DamageMask,
    params: &ModelParams<T>,
) -> Result<T> {
    check_shapes(u, f, mask)?;
    Ok(fidelity_unchecked(u.as_slice(), f.as_slice(), u.channels(), mask, params))
}

fn fidelity_unchecked<T: Scalar>(
    u: &[T],
    f: &[T],
    channels: usize,
    mask: &DamageMask,
    params: &ModelParams<T>,
) -> T {
    let mut acc = CompensatedSum::new();
    let mut diff = vec![T::zero(); channels];
    for (i, (up, fp)) in u.chunks(channels).zip(f.chunks(channels)).enumerate() {
        if mask.is_damaged(i) {
            continue;
        }
        for ((d, &a), &b) in diff.iter_mut().zip(up).zip(fp) {
            *d = a - b;
        }
        acc.add(params.fidelity_term(pixel_norm(&diff)));
    }
    acc.value()
}

/// `Σ F_δ(∇u) + fidelity`; with `δ = 0` the discrete `I[u]`.
pub fn primal_energy<T: Scalar>(
    u: &ImageField<T>,
    f: &ImageField<T>,
    mask: &DamageMask,
    params: &ModelParams<T>,
) -> Result<T> {
    check_shapes(u, f, mask)?;
    let mut ws = EnergyWorkspace::new(u.width(), u.height(), u.channels());
    Ok(ws.evaluate(u, f, mask, params, None))
}

/// Exact gradient of [`primal_energy`] with respect to every pixel value:
/// `-div(DF_δ(∇u)) + λ 1_{Ω-D} |u-f|^(ζ-2) (u-f)`.
pub fn euler_residual<T: Scalar>(
    u: &ImageField<T>,
    f: &ImageField<T>,
    mask: &DamageMask,
    params: &ModelParams<T>,
) -> Result<ImageField<T>> {
    check_shapes(u, f, mask)?;
    let mut ws = EnergyWorkspace::new(u.width(), u.height(), u.channels());
    let mut g = ImageField::zeros(u.width(), u.height(), u.channels())?;
    ws.evaluate(u, f, mask, params, Some(g.as_mut_slice()));
    Ok(g)
}

/// `δ Σ |∇u|²`, the viscous part of the energy up to a factor two.
pub fn viscous_dissipation<T: Scalar>(u: &ImageField<T>, delta: T) -> T {
    delta * crate::grid::gradient(u).squared_norm()
}

/// Scratch buffers for repeated energy/gradient evaluation on one grid.
#[derive(Debug, Clone)]
pub(crate) struct EnergyWorkspace<T> {
    grad: GradientField<T>,
    flux: GradientField<T>,
    div: Vec<T>,
}

impl<T: Scalar> EnergyWorkspace<T> {
    pub(crate) fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            grad: GradientField::zeros(width, height, channels),
            flux: GradientField::zeros(width, height, channels),
            div: vec![T::zero(); width * height * channels],
        }
    }

    /// Energy of `u`; when `out` is given the exact gradient is written there.
    /// Shapes must already be validated.
    pub(crate) fn evaluate(
        &mut self,
        u: &ImageField<T>,
        f: &ImageField<T>,
        mask: &DamageMask,
        params: &ModelParams<T>,
        out: Option<&mut [T]>,
    ) -> T {
        let density = params.density();
        gradient_into(u, &mut self.grad);
        let mut acc = CompensatedSum::new();
        for i in 0..self.grad.pixel_count() {
            acc.add(density.density_value(self.grad.tensor(i)));
        }
        acc.add(fidelity_unchecked(u.as_slice(), f.as_slice(), u.channels(), mask, params));
        let energy = acc.value();

        if let Some(out) = out {
            for i in 0..self.grad.pixel_count() {
                density.density_gradient_into(self.grad.tensor(i), self.flux.tensor_mut(i));
            }
            divergence_into(&self.flux, &mut self.div);
            let c = u.channels();
            let (us, fs) = (u.as_slice(), f.as_slice());
            let mut diff = vec![T::zero(); c];
            for i in 0..u.pixel_count() {
                let range = i * c..(i + 1) * c;
                if mask.is_damaged(i) {
                    for k in range {
                        out[k] = -self.div[k];
                    }
                    continue;
                }
                for (m, k) in range.clone().enumerate() {
                    diff[m] = us[k] - fs[k];
                }
                let slope = params.fidelity_slope(pixel_norm(&diff));
                for (m, k) in range.enumerate() {
                    out[k] = -self.div[k] + slope * diff[m];
                }
            }
        }
        energy
    }
}
