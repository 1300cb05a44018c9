//! The radial μ-elliptic integrand `Φ_μ` and the vectorial density built on it.
//!
//! `Φ_μ(t) = ∫₀ᵗ ∫₀ˢ (1 + r)^(-μ) dr ds` is convex, vanishes to second order
//! at the origin and grows linearly with slope `1/(μ-1)` at infinity, so it
//! behaves like a smoothed total variation. The density acting on a `2×M`
//! gradient tensor `P` is `F(P) = Φ_μ(|P|)` with `|·|` the Frobenius norm, and
//! its viscous regularization is `F_δ(P) = δ/2 |P|² + F(P)`.
//!
//! Tensors are passed as flat slices; only their Euclidean norm matters.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Below this `|μ - 2|` the closed form switches to its expansion about `μ = 2`.
const MU_TWO_BAND: f64 = 1e-6;
/// Below this `t` the closed forms are replaced by Taylor polynomials.
const SMALL_T: f64 = 1e-4;
/// Below this `|P|` the radial quotient `Φ'(t)/t` uses its series.
const SMALL_NORM: f64 = 1e-12;
const CONJUGATE_MAX_ITERS: usize = 200;

/// Parameters of the integrand family: ellipticity exponent `mu > 1` and
/// viscosity weight `delta >= 0` (`delta = 0` is the limit integrand).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams<T> {
    mu: T,
    delta: T,
}

impl<T: Scalar> DensityParams<T> {
    pub fn new(mu: T, delta: T) -> Result<Self> {
        if !mu.is_finite() || mu <= T::one() {
            return Err(Error::Domain(format!("mu must be finite and > 1, got {mu}")));
        }
        if !delta.is_finite() || delta < T::zero() {
            return Err(Error::Domain(format!(
                "delta must be finite and >= 0, got {delta}"
            )));
        }
        Ok(Self { mu, delta })
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// Same exponent, different viscosity.
    pub fn with_delta(&self, delta: T) -> Result<Self> {
        Self::new(self.mu, delta)
    }

    /// The limit integrand `F` (viscosity dropped).
    pub fn inviscid(&self) -> Self {
        Self {
            mu: self.mu,
            delta: T::zero(),
        }
    }

    /// Slope of `Φ_μ` at infinity, `c̄ = 1/(μ-1)`. This is the radius of the
    /// ball on which the conjugate is finite. The viscosity term plays no role.
    pub fn recession_constant(&self) -> T {
        T::one() / (self.mu - T::one())
    }

    fn check_arg(&self, t: T, what: &str) -> Result<()> {
        if t.is_nan() || t < T::zero() {
            return Err(Error::Domain(format!("{what} requires t >= 0, got {t}")));
        }
        Ok(())
    }

    /// `Φ_μ(t)`.
    pub fn phi(&self, t: T) -> Result<T> {
        self.check_arg(t, "phi")?;
        Ok(self.phi_at(t))
    }

    /// `Φ'_μ(t) = (1 - (1+t)^(1-μ)) / (μ-1)`, strictly increasing with
    /// `0 <= Φ'_μ(t) < c̄`.
    pub fn phi_prime(&self, t: T) -> Result<T> {
        self.check_arg(t, "phi_prime")?;
        Ok(self.phi_prime_at(t))
    }

    /// `Φ''_μ(t) = (1+t)^(-μ)`.
    pub fn phi_second(&self, t: T) -> Result<T> {
        self.check_arg(t, "phi_second")?;
        Ok(self.phi_second_at(t))
    }

    pub(crate) fn phi_at(&self, t: T) -> T {
        let one = T::one();
        let mu = self.mu;
        if t < T::lit(SMALL_T) {
            // t²/2 - μt³/6 + μ(μ+1)t⁴/24 - μ(μ+1)(μ+2)t⁵/120
            let c2 = T::lit(0.5);
            let c3 = -mu / T::lit(6.0);
            let c4 = mu * (mu + one) / T::lit(24.0);
            let c5 = -mu * (mu + one) * (mu + T::lit(2.0)) / T::lit(120.0);
            return t * t * (c2 + t * (c3 + t * (c4 + t * c5)));
        }
        let log1p = t.ln_1p();
        let eps = T::lit(2.0) - mu;
        // ((1+t)^ε - 1)/ε, continuous through ε = 0
        let growth = if eps.abs() < T::lit(MU_TWO_BAND) {
            let el = eps * log1p;
            log1p * (one + el / T::lit(2.0) + el * el / T::lit(6.0))
        } else {
            (eps * log1p).exp_m1() / eps
        };
        (t - growth) / (mu - one)
    }

    pub(crate) fn phi_prime_at(&self, t: T) -> T {
        let a = self.mu - T::one();
        -(-a * t.ln_1p()).exp_m1() / a
    }

    pub(crate) fn phi_second_at(&self, t: T) -> T {
        (-self.mu * t.ln_1p()).exp()
    }

    /// `Φ'(t)/t`, continuous at zero with limit `Φ''(0) = 1`.
    pub(crate) fn radial_quotient(&self, t: T) -> T {
        if t < T::lit(SMALL_NORM) {
            let mu = self.mu;
            T::one() - mu * t / T::lit(2.0) + mu * (mu + T::one()) * t * t / T::lit(6.0)
        } else {
            self.phi_prime_at(t) / t
        }
    }

    /// `F_δ(P) = δ/2 |P|² + Φ_μ(|P|)`.
    pub fn density_value(&self, p: &[T]) -> T {
        let sq = norm_sq(p);
        let t = sq.sqrt();
        self.delta * sq / T::lit(2.0) + self.phi_at(t)
    }

    /// `DF_δ(P) = δP + Φ'_μ(|P|) P/|P|`, written into `out`.
    pub fn density_gradient_into(&self, p: &[T], out: &mut [T]) {
        debug_assert_eq!(p.len(), out.len());
        let t = norm_sq(p).sqrt();
        let scale = self.delta + self.radial_quotient(t);
        for (o, &x) in out.iter_mut().zip(p) {
            *o = scale * x;
        }
    }

    pub fn density_gradient(&self, p: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); p.len()];
        self.density_gradient_into(p, &mut out);
        out
    }

    /// Fenchel conjugate `Φ*_μ(s) = sup_t [s t - Φ_μ(t)]` of the inviscid
    /// integrand. Returns `+∞` outside the effective domain.
    pub fn phi_conjugate(&self, s: T) -> Result<T> {
        if s.is_nan() || s < T::zero() {
            return Err(Error::Domain(format!("phi_conjugate requires s >= 0, got {s}")));
        }
        let cbar = self.recession_constant();
        let two = T::lit(2.0);
        if s >= cbar {
            if self.mu > two && s == cbar {
                return Ok(self.conjugate_boundary_value());
            }
            return Ok(T::infinity());
        }
        if s == T::zero() {
            return Ok(T::zero());
        }
        match self.invert_phi_prime(s) {
            Some(t) => Ok((s * t - self.phi_at(t)).max(T::zero())),
            // s lies within rounding of c̄: the maximizer escapes to infinity
            None if self.mu > two => Ok(self.conjugate_boundary_value()),
            None => Ok(T::infinity()),
        }
    }

    /// `Φ*(c̄) = 1/((μ-1)(μ-2))`, finite only for `μ > 2`.
    fn conjugate_boundary_value(&self) -> T {
        let one = T::one();
        one / ((self.mu - one) * (self.mu - T::lit(2.0)))
    }

    /// Root of `Φ'(t) = s` for `0 < s < c̄` by bracketed Newton.
    fn invert_phi_prime(&self, s: T) -> Option<T> {
        let tol = T::lit(1e-12).max(T::lit(8.0) * T::epsilon());
        let limit = T::max_value() / T::lit(4.0);
        let mut lo = T::zero();
        let mut hi = T::one();
        while self.phi_prime_at(hi) <= s {
            lo = hi;
            hi = hi * T::lit(2.0);
            if hi > limit {
                return None;
            }
        }
        let mut t = (lo + hi) / T::lit(2.0);
        for _ in 0..CONJUGATE_MAX_ITERS {
            let g = self.phi_prime_at(t) - s;
            if g.abs() <= tol * s.max(T::one()) {
                return Some(t);
            }
            if g < T::zero() {
                lo = t;
            } else {
                hi = t;
            }
            let newton = t - g / self.phi_second_at(t);
            t = if newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) / T::lit(2.0)
            };
            if hi - lo <= T::epsilon() * hi {
                return Some(t);
            }
        }
        Some(t)
    }
}

#[inline]
pub(crate) fn norm_sq<T: Scalar>(p: &[T]) -> T {
    p.iter().fold(T::zero(), |acc, &x| acc + x * x)
}
