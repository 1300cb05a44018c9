//! Smooth inner minimization of `I_δ` and the outer vanishing-viscosity
//! continuation `δ ↓ 0`.
//!
//! For `δ > 0` the energy `I_δ` is strictly convex with a continuous
//! gradient, so a descent method with a sufficient-decrease line search
//! converges to its unique minimizer. The inner method is limited-memory BFGS
//! with Armijo backtracking; the first step and every memory reset use a
//! Barzilai–Borwein length. The outer loop shrinks `δ` geometrically,
//! warm-starting each solve, and stops as soon as the duality gap of the
//! inviscid problem drops below `gap_tol`.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{certify, known_data_bound, DualCertificate};
use crate::energy::{primal_energy, viscous_dissipation, EnergyWorkspace, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{pixel_norm, DamageMask, ImageField};
use crate::scalar::{compensated_sum, Scalar};

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const STEP_MIN: f64 = 1e-8;
const STEP_MAX: f64 = 1e4;
const LBFGS_MEMORY: usize = 8;
/// Slack on the maximum-principle check.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-8;
/// A line search that fails while the residual is already within this factor
/// of the tolerance ends the solve as stalled rather than as an error.
/// Energies are only resolved to a few ulps, which caps attainable residuals.
const STALL_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    /// Initial viscosity.
    pub delta0: T,
    /// Smallest viscosity visited.
    pub delta_min: T,
    /// Geometric shrink factor in `(0, 1)`.
    pub delta_factor: T,
    /// Inner stopping tolerance on `sup |∇I_δ|`, relative to `1 + sup |f|`.
    pub inner_tol: T,
    pub inner_max_iters: usize,
    /// Target relative duality gap.
    pub gap_tol: T,
    pub seed: u64,
    /// Start from a seeded random field in the maximum-principle ball
    /// instead of the data extended by its mean.
    pub randomize_init: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            delta0: T::lit(0.1),
            delta_min: T::lit(1e-8),
            delta_factor: T::lit(0.1),
            inner_tol: T::lit(1e-8),
            inner_max_iters: 5000,
            gap_tol: T::lit(1e-4),
            seed: 0,
            randomize_init: false,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.delta0 > T::zero()) || !self.delta0.is_finite() {
            return bad(format!("delta0 must be > 0, got {}", self.delta0));
        }
        if !(self.delta_min > T::zero()) || self.delta_min > self.delta0 {
            return bad(format!(
                "delta_min must satisfy 0 < delta_min <= delta0, got {}",
                self.delta_min
            ));
        }
        if !(self.delta_factor > T::zero() && self.delta_factor < T::one()) {
            return bad(format!("delta_factor must lie in (0, 1), got {}", self.delta_factor));
        }
        if !(self.inner_tol > T::zero()) {
            return bad(format!("inner_tol must be > 0, got {}", self.inner_tol));
        }
        if self.inner_max_iters == 0 {
            return bad("inner_max_iters must be positive".into());
        }
        if !(self.gap_tol >= T::zero()) {
            return bad(format!("gap_tol must be >= 0, got {}", self.gap_tol));
        }
        Ok(())
    }

    /// Viscosities visited by the continuation, largest first.
    pub fn schedule(&self) -> Vec<T> {
        let floor = self.delta_min * (T::one() - T::lit(1e-9));
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let d = self.delta0 * self.delta_factor.powi(k);
            if d < floor {
                break;
            }
            out.push(d);
            k += 1;
        }
        out
    }
}

/// Why an inner solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStatus {
    Converged,
    MaxIterations,
    /// The line search could no longer resolve a decrease, with the residual
    /// already close to the tolerance.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct InnerSolve<T> {
    pub u: ImageField<T>,
    pub status: InnerStatus,
    pub iterations: usize,
    pub energy: T,
    pub residual_inf_norm: T,
    /// Energy after every accepted step, starting with the initial value.
    pub energy_trace: Vec<T>,
}

impl<T> InnerSolve<T> {
    pub fn converged(&self) -> bool {
        self.status == InnerStatus::Converged
    }
}

/// One row of the continuation log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord<T> {
    pub delta: T,
    pub inner_iterations: usize,
    pub inner_status: InnerStatus,
    pub i_delta_value: T,
    pub i_value: T,
    pub dual_value: T,
    pub relative_gap: T,
    pub residual_inf_norm: T,
    pub max_abs_u: T,
    /// `δ Σ |∇u_δ|²`.
    pub viscous_dissipation: T,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Restoration<T> {
    pub u: ImageField<T>,
    pub certificate: DualCertificate<T>,
    pub records: Vec<ConvergenceRecord<T>>,
    /// Maximum-principle radius `L = sup_{Ω-D} |f|`.
    pub bound: T,
}

impl<T: Scalar> Restoration<T> {
    pub fn gap_reached(&self, gap_tol: T) -> bool {
        self.certificate.relative_gap <= gap_tol
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.records.iter().map(|r| r.inner_iterations).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPrincipleCheck<T> {
    pub passed: bool,
    /// `L - sup |u|`; negative when violated.
    pub margin: T,
    pub bound: T,
    pub sup_norm: T,
}

/// Checks `sup |u| <= L + 1e-8` with `L` the largest channel norm of `f` on
/// known pixels.
pub fn check_max_principle<T: Scalar>(
    u: &ImageField<T>,
    f: &ImageField<T>,
    mask: &DamageMask,
) -> MaxPrincipleCheck<T> {
    let bound = known_data_bound(f, mask);
    let sup_norm = u.max_pixel_norm();
    let margin = bound - sup_norm;
    MaxPrincipleCheck {
        passed: margin >= -T::lit(MAX_PRINCIPLE_SLACK),
        margin,
        bound,
        sup_norm,
    }
}

fn check_inputs<T: Scalar>(
    u: &ImageField<T>,
    f: &ImageField<T>,
    mask: &DamageMask,
) -> Result<()> {
    u.ensure_same_shape(f)?;
    mask.ensure_matches(f)
}

fn sup_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    compensated_sum(a.iter().zip(b).map(|(&x, &y)| x * y))
}

fn clip_step<T: Scalar>(step: T) -> T {
    if !step.is_finite() {
        return T::lit(STEP_MAX);
    }
    step.max(T::lit(STEP_MIN)).min(T::lit(STEP_MAX))
}

/// Minimizes `I_δ` from `u0` for a fixed `delta > 0`.
pub fn minimize_smooth<T: Scalar>(
    u0: &ImageField<T>,
    delta: T,
    f: &ImageField<T>,
    mask: &DamageMask,
    params: &ModelParams<T>,
    cfg: &SolverConfig<T>,
) -> Result<InnerSolve<T>> {
    check_inputs(u0, f, mask)?;
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "inner solve requires delta > 0, got {delta}"
        )));
    }
    let model = params.with_delta(delta)?;
    let threshold = cfg.inner_tol * (T::one() + f.sup_abs());
    let n = u0.as_slice().len();
    let mut ws = EnergyWorkspace::new(u0.width(), u0.height(), u0.channels());

    let mut x = u0.clone();
    let mut g = vec![T::zero(); n];
    let mut energy = ws.evaluate(&x, f, mask, &model, Some(&mut g));
    let mut trace = vec![energy];

    let mut trial = x.clone();
    let mut g_trial = vec![T::zero(); n];
    let mut dir = vec![T::zero(); n];
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut bb_step = clip_step(T::one() / sup_abs(&g));
    let mut alpha_buf = vec![T::zero(); LBFGS_MEMORY];

    // for zeta < 2 the fidelity gradient is only Hölder continuous where
    // u = f; next to such pixels no step length resolves a decrease, whatever
    // the residual
    let kinked = model.zeta() < T::lit(2.0) && model.fidelity_smoothing() == T::zero();
    let mut iterations = 0;
    loop {
        let residual = sup_abs(&g);
        if residual <= threshold {
            return Ok(finish(x, InnerStatus::Converged, iterations, energy, residual, trace));
        }
        if iterations >= cfg.inner_max_iters {
            return Ok(finish(x, InnerStatus::MaxIterations, iterations, energy, residual, trace));
        }

        let mut accepted = None;
        for attempt in 0..2 {
            // attempt 0 uses the quasi-Newton direction, attempt 1 plain descent
            let use_memory = attempt == 0 && !history.is_empty();
            let initial = if use_memory {
                two_loop(&g, &history, &mut alpha_buf, &mut dir);
                T::one()
            } else {
                for (d, &gi) in dir.iter_mut().zip(&g) {
                    *d = -gi;
                }
                bb_step
            };
            let mut slope = dot(&g, &dir);
            if !(slope < T::zero()) {
                if use_memory {
                    history.clear();
                    continue;
                }
                slope = -dot(&g, &g);
            }
            if let Some(step) = armijo(
                &mut ws, &x, &dir, energy, slope, initial, f, mask, &model, &mut trial,
                &mut g_trial,
            ) {
                accepted = Some(step);
                break;
            }
            if !use_memory {
                break;
            }
            history.clear();
        }

        let Some((step, new_energy)) = accepted else {
            if kinked || residual <= threshold * T::lit(STALL_FACTOR) {
                return Ok(finish(x, InnerStatus::Stalled, iterations, energy, residual, trace));
            }
            return Err(Error::LineSearch {
                backtracks: MAX_BACKTRACKS,
                iteration: iterations,
                delta: delta.as_f64(),
                residual: residual.as_f64(),
            });
        };

        let s: Vec<T> = dir.iter().map(|&d| step * d).collect();
        let y: Vec<T> = g_trial.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            bb_step = clip_step(dot(&s, &s) / sy);
            if history.len() == LBFGS_MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, T::one() / sy));
        }

        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        energy = new_energy;
        trace.push(energy);
        iterations += 1;
    }
}

fn finish<T>(
    u: ImageField<T>,
    status: InnerStatus,
    iterations: usize,
    energy: T,
    residual_inf_norm: T,
    energy_trace: Vec<T>,
) -> InnerSolve<T> {
    InnerSolve {
        u,
        status,
        iterations,
        energy,
        residual_inf_norm,
        energy_trace,
    }
}

/// L-BFGS two-loop recursion: writes `-H g` into `dir`.
fn two_loop<T: Scalar>(
    g: &[T],
    history: &VecDeque<(Vec<T>, Vec<T>, T)>,
    alpha: &mut [T],
    dir: &mut [T],
) {
    dir.copy_from_slice(g);
    for (k, (s, y, rho)) in history.iter().enumerate().rev() {
        let a = *rho * dot(s, dir);
        alpha[k] = a;
        for (d, &yi) in dir.iter_mut().zip(y) {
            *d = *d - a * yi;
        }
    }
    let (s, y, _) = history.back().expect("non-empty history");
    let gamma = dot(s, y) / dot(y, y);
    dir.iter_mut().for_each(|d| *d = *d * gamma);
    for (k, (s, y, rho)) in history.iter().enumerate() {
        let b = *rho * dot(y, dir);
        let a = alpha[k];
        for (d, &si) in dir.iter_mut().zip(s) {
            *d = *d + (a - b) * si;
        }
    }
    dir.iter_mut().for_each(|d| *d = -*d);
}

/// Backtracking until `E(x + t d) <= E(x) + c₁ t <g, d>`. On success the trial
/// point and its gradient are left in `trial`/`g_trial`.
#[allow(clippy::too_many_arguments)]
fn armijo<T: Scalar>(
    ws: &mut EnergyWorkspace<T>,
    x: &ImageField<T>,
    dir: &[T],
    energy: T,
    slope: T,
    initial: T,
    f: &ImageField<T>,
    mask: &DamageMask,
    model: &ModelParams<T>,
    trial: &mut ImageField<T>,
    g_trial: &mut [T],
) -> Option<(T, T)> {
    let c1 = T::lit(ARMIJO_C1);
    let half = T::lit(0.5);
    let mut step = initial;
    for _ in 0..=MAX_BACKTRACKS {
        for ((t, &xi), &d) in trial.as_mut_slice().iter_mut().zip(x.as_slice()).zip(dir) {
            *t = xi + step * d;
        }
        let e = ws.evaluate(trial, f, mask, model, Some(g_trial));
        if e.is_finite() && e < energy && e <= energy + c1 * step * slope {
            return Some((step, e));
        }
        step = step * half;
    }
    None
}

/// Starting point: the data on known pixels and the per-channel mean of the
/// known data on damaged pixels, or a seeded random field in the
/// maximum-principle ball.
pub fn initial_guess<T: Scalar>(
    f: &ImageField<T>,
    mask: &DamageMask,
    cfg: &SolverConfig<T>,
) -> Result<ImageField<T>> {
    mask.ensure_matches(f)?;
    let c = f.channels();
    if cfg.randomize_init {
        let bound = known_data_bound(f, mask).as_f64();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut data = Vec::with_capacity(f.as_slice().len());
        for _ in 0..f.pixel_count() {
            let mut px: Vec<f64> = (0..c).map(|_| rng.gen_range(-1.0..=1.0) * bound).collect();
            let n = px.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > bound && n > 0.0 {
                px.iter_mut().for_each(|v| *v *= bound / n);
            }
            data.extend(px.into_iter().map(T::lit));
        }
        return ImageField::new(f.width(), f.height(), c, data);
    }
    let mean = known_mean(f, mask);
    let mut data = f.as_slice().to_vec();
    for i in 0..f.pixel_count() {
        if mask.is_damaged(i) {
            data[i * c..(i + 1) * c].copy_from_slice(&mean);
        }
    }
    ImageField::new(f.width(), f.height(), c, data)
}

fn known_mean<T: Scalar>(f: &ImageField<T>, mask: &DamageMask) -> Vec<T> {
    let c = f.channels();
    let known: Vec<usize> = (0..f.pixel_count()).filter(|&i| !mask.is_damaged(i)).collect();
    let count = T::from_usize(known.len()).expect("pixel count fits scalar");
    (0..c)
        .map(|m| compensated_sum(known.iter().map(|&i| f.pixel(i)[m])) / count)
        .collect()
}

/// The common value of all known pixels, if there is one.
fn constant_known_value<T: Scalar>(f: &ImageField<T>, mask: &DamageMask) -> Option<Vec<T>> {
    let mut known = (0..f.pixel_count()).filter(|&i| !mask.is_damaged(i));
    let first = f.pixel(known.next()?).to_vec();
    known
        .all(|i| f.pixel(i) == first.as_slice())
        .then_some(first)
}

/// Vanishing-viscosity continuation with warm starts; always returns a
/// certificate for the final iterate.
pub fn continuation<T: Scalar>(
    f: &ImageField<T>,
    mask: &DamageMask,
    params: &ModelParams<T>,
    cfg: &SolverConfig<T>,
) -> Result<Restoration<T>> {
    cfg.validate()?;
    mask.ensure_matches(f)?;
    let bound = known_data_bound(f, mask);

    if let Some(value) = constant_known_value(f, mask) {
        let started = Instant::now();
        let c = f.channels();
        let u = ImageField::from_fn(f.width(), f.height(), c, |_, _, m| value[m])?;
        let certificate = certify(&u, f, mask, params, bound)?;
        let i_delta_value = primal_energy(&u, f, mask, &params.with_delta(cfg.delta0)?)?;
        let record = ConvergenceRecord {
            delta: cfg.delta0,
            inner_iterations: 0,
            inner_status: InnerStatus::Converged,
            i_delta_value,
            i_value: certificate.primal_value,
            dual_value: certificate.dual_value,
            relative_gap: certificate.relative_gap,
            residual_inf_norm: T::zero(),
            max_abs_u: u.max_pixel_norm(),
            viscous_dissipation: T::zero(),
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        return Ok(Restoration {
            u,
            certificate,
            records: vec![record],
            bound,
        });
    }

    let mut u = initial_guess(f, mask, cfg)?;
    let mut records = Vec::new();
    let mut certificate = certify(&u, f, mask, params, bound)?;
    for delta in cfg.schedule() {
        let started = Instant::now();
        let inner = minimize_smooth(&u, delta, f, mask, params, cfg)?;
        u = inner.u;
        certificate = certify(&u, f, mask, params, bound)?;
        records.push(ConvergenceRecord {
            delta,
            inner_iterations: inner.iterations,
            inner_status: inner.status,
            i_delta_value: inner.energy,
            i_value: certificate.primal_value,
            dual_value: certificate.dual_value,
            relative_gap: certificate.relative_gap,
            residual_inf_norm: inner.residual_inf_norm,
            max_abs_u: max_abs(&u),
            viscous_dissipation: viscous_dissipation(&u, delta),
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        if certificate.relative_gap <= cfg.gap_tol {
            break;
        }
    }
    Ok(Restoration {
        u,
        certificate,
        records,
        bound,
    })
}

fn max_abs<T: Scalar>(u: &ImageField<T>) -> T {
    (0..u.pixel_count())
        .map(|i| pixel_norm(u.pixel(i)))
        .fold(T::zero(), T::max)
}
