//! Reference computations used as ground truth by the test suites.
//!
//! Nothing here calls into the closed forms of [`crate::density`] or the
//! gradient machinery of [`crate::grid`]: `Φ_μ` is recomputed by adaptive
//! quadrature and energies by summing the definition pixel by pixel. The
//! routines are slow and only meant for desk-scale instances.

use crate::energy::{primal_energy, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{DamageMask, ImageField};

/// Largest number of unknowns [`brute_force_minimize`] accepts.
pub const BRUTE_FORCE_MAX_UNKNOWNS: usize = 8;
const SCAN_STEP: f64 = 1e-2;
const GOLDEN_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 20_000;
const SWEEP_TOL: f64 = 1e-8;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `∫₀ᵗ ∫₀ˢ (1+r)^(-μ) dr ds` by nested adaptive Simpson, to about `1e-11`.
/// Both variables are taken logarithmically (`1 + r = eˣ`, `1 + s = eʸ`), so
/// the integrands are smooth exponentials on `[0, ln(1+t)]`.
pub fn phi_by_quadrature(mu: f64, t: f64) -> f64 {
    assert!(mu > 1.0 && t >= 0.0, "phi_by_quadrature needs mu > 1, t >= 0");
    let inner = |y: f64| adaptive_simpson(&|x: f64| ((1.0 - mu) * x).exp(), 0.0, y, 1e-14);
    adaptive_simpson(&|y: f64| y.exp() * inner(y), 0.0, t.ln_1p(), 1e-12)
}

/// The same double integral collapsed to `∫₀ᵗ (t - r)(1+r)^(-μ) dr`.
pub fn phi_by_single_quadrature(mu: f64, t: f64) -> f64 {
    adaptive_simpson(&|r: f64| (t - r) * (1.0 + r).powf(-mu), 0.0, t, 1e-13)
}

/// Discrete `I` (no viscosity) of a single-channel field, summed straight
/// from the definition.
#[allow(clippy::too_many_arguments)]
pub fn energy_by_definition(
    u: &[f64],
    width: usize,
    height: usize,
    f: &[f64],
    damaged: &[bool],
    mu: f64,
    lambda: f64,
    zeta: f64,
) -> f64 {
    let mut total = 0.0;
    for y in 0..height {
        for x in 0..width {
            total += pixel_energy(u, width, height, f, damaged, mu, lambda, zeta, x, y);
        }
    }
    total
}

/// Integrand and data term of the single pixel `(x, y)`.
#[allow(clippy::too_many_arguments)]
fn pixel_energy(
    u: &[f64],
    width: usize,
    height: usize,
    f: &[f64],
    damaged: &[bool],
    mu: f64,
    lambda: f64,
    zeta: f64,
    x: usize,
    y: usize,
) -> f64 {
    let i = y * width + x;
    let dx = if x + 1 < width { u[i + 1] - u[i] } else { 0.0 };
    let dy = if y + 1 < height { u[i + width] - u[i] } else { 0.0 };
    let mut e = phi_by_single_quadrature(mu, (dx * dx + dy * dy).sqrt());
    if !damaged[i] {
        e += lambda / zeta * (u[i] - f[i]).abs().powf(zeta);
    }
    e
}

/// Golden-section search for the minimum of a unimodal `g` on `[a, b]`.
pub fn golden_section(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    while (b - a).abs() > tol {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    0.5 * (a + b)
}

/// Cyclic coordinate search for the minimizer of the inviscid energy over
/// `[-bound, bound]^N`: a grid scan at spacing `1e-2` per coordinate on the
/// first sweep, then golden-section refinement on every sweep until no
/// coordinate moves. Only single-channel instances with at most
/// [`BRUTE_FORCE_MAX_UNKNOWNS`] pixels are accepted.
pub fn brute_force_minimize(
    f: &ImageField<f64>,
    mask: &DamageMask,
    params: &ModelParams<f64>,
    bound: f64,
) -> Result<(ImageField<f64>, f64)> {
    let (w, h) = (f.width(), f.height());
    if f.channels() != 1 {
        return Err(Error::OracleSize(format!(
            "only single-channel instances, got {} channels",
            f.channels()
        )));
    }
    if w * h > BRUTE_FORCE_MAX_UNKNOWNS {
        return Err(Error::OracleSize(format!(
            "{} unknowns exceeds the cap of {BRUTE_FORCE_MAX_UNKNOWNS}",
            w * h
        )));
    }
    if mask.width() != w || mask.height() != h {
        return Err(Error::ShapeMismatch {
            expected: format!("{w}×{h}"),
            got: format!("{}×{} mask", mask.width(), mask.height()),
        });
    }
    let mu = params.density().mu();
    let (lambda, zeta) = (params.lambda(), params.zeta());
    let data = f.as_slice();
    let damaged = mask.flags();
    // the part of the energy that depends on pixel k: its own term and the
    // forward differences reaching it from the left and from above
    let local = |u: &[f64], k: usize| {
        let (x, y) = (k % w, k / w);
        let mut e = pixel_energy(u, w, h, data, damaged, mu, lambda, zeta, x, y);
        if x > 0 {
            e += pixel_energy(u, w, h, data, damaged, mu, lambda, zeta, x - 1, y);
        }
        if y > 0 {
            e += pixel_energy(u, w, h, data, damaged, mu, lambda, zeta, x, y - 1);
        }
        e
    };

    let mut u = vec![0.0; w * h];
    let steps = (2.0 * bound / SCAN_STEP).ceil().max(1.0) as usize;
    for sweep in 0..MAX_SWEEPS {
        let mut moved = 0.0f64;
        for k in 0..u.len() {
            let current = u[k];
            let along = |v: f64| {
                let mut probe = u.clone();
                probe[k] = v;
                local(&probe, k)
            };
            let (lo, hi) = if sweep == 0 {
                let mut best = (f64::INFINITY, current);
                for j in 0..=steps {
                    let v = (-bound + j as f64 * SCAN_STEP).min(bound);
                    let e = along(v);
                    if e < best.0 {
                        best = (e, v);
                    }
                }
                ((best.1 - SCAN_STEP).max(-bound), (best.1 + SCAN_STEP).min(bound))
            } else {
                bracket(&along, current, bound)
            };
            let v = golden_section(&along, lo, hi, GOLDEN_TOL);
            if along(v) < along(current) {
                moved = moved.max((v - current).abs());
                u[k] = v;
            }
        }
        if sweep > 0 && moved < SWEEP_TOL {
            break;
        }
    }
    let e = energy_by_definition(&u, w, h, data, damaged, mu, lambda, zeta);
    Ok((ImageField::new(w, h, 1, u)?, e))
}

/// Bracket for a convex 1D function around `x`, inside `[-bound, bound]`.
fn bracket(g: &dyn Fn(f64) -> f64, x: f64, bound: f64) -> (f64, f64) {
    let mut width = 1e-4;
    let g0 = g(x);
    loop {
        let lo = (x - width).max(-bound);
        let hi = (x + width).min(bound);
        let (glo, ghi) = (g(lo), g(hi));
        let lo_ok = glo >= g0 || lo <= -bound;
        let hi_ok = ghi >= g0 || hi >= bound;
        if lo_ok && hi_ok {
            return (lo, hi);
        }
        width *= 4.0;
    }
}

/// Central finite differences of [`primal_energy`] in every pixel and channel.
pub fn fd_gradient(
    u: &ImageField<f64>,
    f: &ImageField<f64>,
    mask: &DamageMask,
    params: &ModelParams<f64>,
    step: f64,
) -> Result<ImageField<f64>> {
    let mut out = Vec::with_capacity(u.as_slice().len());
    let base = u.as_slice().to_vec();
    for k in 0..base.len() {
        let mut plus = base.clone();
        plus[k] += step;
        let mut minus = base.clone();
        minus[k] -= step;
        let ep = primal_energy(&ImageField::new(u.width(), u.height(), u.channels(), plus)?, f, mask, params)?;
        let em = primal_energy(&ImageField::new(u.width(), u.height(), u.channels(), minus)?, f, mask, params)?;
        out.push((ep - em) / (2.0 * step));
    }
    ImageField::new(u.width(), u.height(), u.channels(), out)
}
