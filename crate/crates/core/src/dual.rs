//! Dual variables, the dual functional and the duality-gap certificate.
//!
//! For a tensor field `τ` with `|τ| < c̄` the Lagrangian
//! `Σ [τ:∇v - F*(τ)] + (λ/ζ) Σ_{Ω-D} |v - f|^ζ` can be minimized over `v`
//! pixel by pixel after summation by parts. With `d = -div τ`:
//!
//! * on known pixels the infimum of `d·v + (λ/ζ)|v - f|^ζ` is
//!   `d·f - (ζ-1)/ζ · λ^(-1/(ζ-1)) · |d|^(ζ/(ζ-1))`;
//! * on damaged pixels there is no fidelity, so `v` is restricted to the ball
//!   `|v| <= L` and the infimum is `-L |d|`.
//!
//! Because every minimizer satisfies `sup |u| <= L = sup_{Ω-D} |f|`, the sum
//! `R̂[τ]` is a rigorous lower bound for `min I`.

use crate::energy::{primal_energy, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, pixel_norm, DamageMask, DualField, ImageField};
use crate::scalar::{CompensatedSum, Scalar};

/// Margin below which a certificate flags near-saturated dual fields.
const MARGIN_WARNING: f64 = 1e-12;

/// Primal and dual values of a candidate together with feasibility
/// diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualCertificate<T> {
    /// `I[u]`, the inviscid energy.
    pub primal_value: T,
    /// `R̂[τ]`; `-∞` when `τ` leaves the conjugate domain.
    pub dual_value: T,
    /// `(primal - dual) / max(1, |primal|)`, `+∞` for an infeasible dual.
    pub relative_gap: T,
    /// `max |div τ|` over damaged pixels (zero at an exact minimizer).
    pub divergence_residual_on_damage: T,
    /// `c̄ - max |τ|`.
    pub feasibility_margin: T,
}

impl<T: Scalar> DualCertificate<T> {
    pub fn dual_feasible(&self) -> bool {
        self.dual_value > T::neg_infinity()
    }

    /// `primal - dual`, clipped at zero.
    pub fn absolute_gap(&self) -> T {
        (self.primal_value - self.dual_value).max(T::zero())
    }

    pub fn margin_warning(&self) -> bool {
        self.feasibility_margin < T::lit(MARGIN_WARNING)
    }
}

/// `τ = DF(∇u)` and `σ = δ∇u + τ`.
pub fn dual_from_primal<T: Scalar>(
    u: &ImageField<T>,
    params: &ModelParams<T>,
) -> (DualField<T>, DualField<T>) {
    let grad = gradient(u);
    let density = params.density();
    let inviscid = density.inviscid();
    let mut tau = DualField::zeros(u.width(), u.height(), u.channels());
    for i in 0..grad.pixel_count() {
        inviscid.density_gradient_into(grad.tensor(i), tau.tensor_mut(i));
    }
    let delta = density.delta();
    let mut sigma = tau.clone();
    if delta > T::zero() {
        for (s, &g) in sigma.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *s = *s + delta * g;
        }
    }
    (tau, sigma)
}

/// The certified lower bound `R̂[τ]` of the inviscid problem. The viscosity
/// and fidelity smoothing in `params` are ignored. Requires
/// `radius >= sup_{Ω-D} |f|`.
pub fn dual_value<T: Scalar>(
    tau: &DualField<T>,
    f: &ImageField<T>,
    mask: &DamageMask,
    params: &ModelParams<T>,
    radius: T,
) -> Result<T> {
    check_inputs(tau, f, mask, radius)?;
    let density = params.density().inviscid();

    let mut acc = CompensatedSum::new();
    for i in 0..tau.pixel_count() {
        let conj = density.phi_conjugate(tau.tensor_norm(i))?;
        if conj.is_infinite() {
            return Ok(T::neg_infinity());
        }
        acc.add(-conj);
    }

    let div = divergence(tau);
    let mut d = vec![T::zero(); f.channels()];
    for i in 0..f.pixel_count() {
        for (dm, &v) in d.iter_mut().zip(div.pixel(i)) {
            *dm = -v;
        }
        if mask.is_damaged(i) {
            acc.add(-radius * pixel_norm(&d));
        } else {
            acc.add(known_pixel_infimum(&d, f.pixel(i), params.lambda(), params.zeta()));
        }
    }
    Ok(acc.value())
}

fn check_inputs<T: Scalar>(
    tau: &DualField<T>,
    f: &ImageField<T>,
    mask: &DamageMask,
    radius: T,
) -> Result<()> {
    if tau.width() != f.width() || tau.height() != f.height() || tau.channels() != f.channels() {
        return Err(Error::ShapeMismatch {
            expected: f.shape_string(),
            got: format!("{}×{}×{} dual field", tau.width(), tau.height(), tau.channels()),
        });
    }
    mask.ensure_matches(f)?;
    if radius.is_nan() || radius < T::zero() {
        return Err(Error::Domain(format!("ball radius must be >= 0, got {radius}")));
    }
    Ok(())
}

/// `L = max_{pixels ∉ D} |f(x)|`, the maximum-principle radius.
pub fn known_data_bound<T: Scalar>(f: &ImageField<T>, mask: &DamageMask) -> T {
    (0..f.pixel_count())
        .filter(|&i| !mask.is_damaged(i))
        .map(|i| pixel_norm(f.pixel(i)))
        .fold(T::zero(), T::max)
}

/// Evaluates the duality gap of `u` for the inviscid problem, using the dual
/// candidate `τ = DF(∇u)`.
pub fn certify<T: Scalar>(
    u: &ImageField<T>,
    f: &ImageField<T>,
    mask: &DamageMask,
    params: &ModelParams<T>,
    radius: T,
) -> Result<DualCertificate<T>> {
    let target = params.target();
    let primal_value = primal_energy(u, f, mask, &target)?;
    let (tau, _) = dual_from_primal(u, &target);
    let dual_value = dual_value(&tau, f, mask, &target, radius)?;

    let div = divergence(&tau);
    let divergence_residual_on_damage = (0..u.pixel_count())
        .filter(|&i| mask.is_damaged(i))
        .map(|i| pixel_norm(div.pixel(i)))
        .fold(T::zero(), T::max);
    let feasibility_margin = target.density().recession_constant() - tau.max_tensor_norm();

    let relative_gap = if dual_value == T::neg_infinity() {
        T::infinity()
    } else {
        ((primal_value - dual_value) / primal_value.abs().max(T::one())).max(T::zero())
    };
    Ok(DualCertificate {
        primal_value,
        dual_value,
        relative_gap,
        divergence_residual_on_damage,
        feasibility_margin,
    })
}

/// Pointwise infimum of `d·v + (λ/ζ)|v - f|^ζ` over all `v`, in closed form.
pub fn known_pixel_infimum<T: Scalar>(d: &[T], f: &[T], lambda: T, zeta: T) -> T {
    let one = T::one();
    let dn = pixel_norm(d);
    let df = d.iter().zip(f).fold(T::zero(), |s, (&a, &b)| s + a * b);
    let pow = if zeta == T::lit(2.0) {
        dn * dn
    } else {
        dn.powf(zeta / (zeta - one))
    };
    df - (zeta - one) / zeta * lambda.powf(-one / (zeta - one)) * pow
}
