mod common;

use rand::Rng;
use tvcert::oracle::brute_force_minimize;
use tvcert::solver::initial_guess;
use tvcert::{
    check_max_principle, clamp_to_ball, continuation, known_data_bound, minimize_smooth, primal_energy, Config,
    Config32, DamageMask, InnerStatus, DensityParams, Image, Image32, ModelParams,
};

fn full_schedule() -> Config {
    Config { gap_tol: 0.0, ..Config::default() }
}

#[test]
fn bridge_becomes_a_ramp() {
    let (f, mask) = common::bridge();
    let p = common::model(2.0, 1e4, 2.0);
    let u0 = initial_guess(&f, &mask, &Config::default()).unwrap();
    let inner = minimize_smooth(&u0, 1e-8, &f, &mask, &p, &Config::default()).unwrap();
    for (i, v) in inner.u.as_slice().iter().enumerate() {
        assert!((v - 0.25 * i as f64).abs() < 1e-2, "pixel {i}: {v}");
    }
    let run = continuation(&f, &mask, &p, &full_schedule()).unwrap();
    for (i, v) in run.u.as_slice().iter().enumerate() {
        assert!((v - 0.25 * i as f64).abs() < 1e-2, "pixel {i}: {v}");
    }
}

#[test]
fn agrees_with_brute_force() {
    for (name, f, mask, p) in common::oracle_instances() {
        let bound = known_data_bound(&f, &mask);
        let run = continuation(&f, &mask, &p, &full_schedule()).unwrap();
        let (reference, energy) = brute_force_minimize(&f, &mask, &p, bound).unwrap();
        let ours = run.certificate.primal_value;
        assert!((ours - energy).abs() <= 1e-4, "{name}: {ours} vs {energy}");
        assert!(run.u.sup_distance(&reference) <= 1e-3, "{name}: {}", run.u.sup_distance(&reference));
        assert!(check_max_principle(&run.u, &f, &mask).passed, "{name}");
    }
}

#[test]
fn inner_solve_is_unique() {
    let (f, mask) = common::checkerboard();
    let p = common::model(2.0, 10.0, 2.0);
    let cfg = |seed| Config { seed, randomize_init: true, ..Config::default() };
    let a = initial_guess(&f, &mask, &cfg(1)).unwrap();
    let b = initial_guess(&f, &mask, &cfg(2)).unwrap();
    assert!(a.sup_distance(&b) > 0.1);
    let ua = minimize_smooth(&a, 1e-2, &f, &mask, &p, &cfg(1)).unwrap();
    let ub = minimize_smooth(&b, 1e-2, &f, &mask, &p, &cfg(2)).unwrap();
    for run in [&ua, &ub] {
        assert_ne!(run.status, InnerStatus::MaxIterations);
        assert!(run.residual_inf_norm <= 1e-6);
    }
    assert!(ua.u.sup_distance(&ub.u) <= 1e-6);
}

#[test]
fn inner_energy_never_increases() {
    let (f, mask) = common::checkerboard();
    for zeta in [1.5, 2.0, 3.0] {
        let p = common::model(2.0, 10.0, zeta);
        let cfg = Config { seed: 4, randomize_init: true, ..Config::default() };
        let u0 = initial_guess(&f, &mask, &cfg).unwrap();
        let inner = minimize_smooth(&u0, 1e-3, &f, &mask, &p, &cfg).unwrap();
        assert!(inner.energy_trace.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn continuation_records() {
    let (f, mask) = common::checkerboard();
    let run = continuation(&f, &mask, &common::model(2.0, 10.0, 2.0), &full_schedule()).unwrap();
    assert_eq!(run.records.len(), 8);
    for w in run.records.windows(2) {
        assert!(w[1].i_value <= w[0].i_value + 1e-12);
        assert!(w[1].delta < w[0].delta);
    }
    let tail: Vec<f64> = run.records.iter().rev().take(3).map(|r| r.viscous_dissipation).collect();
    assert!(tail[0] * 10.0 <= tail[1] * (1.0 + 1e-6) && tail[1] * 10.0 <= tail[2] * (1.0 + 1e-6));
    assert!(run.records.iter().all(|r| r.relative_gap >= 0.0 && r.i_value <= r.i_delta_value));
}

#[test]
fn gap_tolerance_stops_early() {
    let (f, mask) = common::checkerboard();
    let cfg = Config { gap_tol: 1e-4, ..Config::default() };
    let run = continuation(&f, &mask, &common::model(2.0, 10.0, 2.0), &cfg).unwrap();
    assert!(run.certificate.relative_gap <= 1e-4);
    assert!(run.records.len() < 8);
    assert!(run.gap_reached(1e-4));
}

#[test]
fn constant_denoising_stops_at_once() {
    let f = Image::filled(5, 4, 3, 0.25).unwrap();
    let mask = DamageMask::none(5, 4).unwrap();
    let run = continuation(&f, &mask, &common::model(2.0, 1.0, 2.0), &Config::default()).unwrap();
    assert_eq!(run.certificate.relative_gap, 0.0);
    assert!(run.records.len() <= 1);
    assert_eq!(run.u, f);
}

#[test]
fn constant_data_with_holes_is_filled() {
    let f = Image::filled(4, 4, 1, 0.6).unwrap();
    let mask = DamageMask::from_fn(4, 4, |x, y| x == y).unwrap();
    let p = common::model(3.0, 2.0, 1.5);
    let cfg = Config { seed: 9, randomize_init: true, ..Config::default() };
    let u0 = initial_guess(&f, &mask, &cfg).unwrap();
    let inner = minimize_smooth(&u0, 1e-2, &f, &mask, &p, &cfg).unwrap();
    assert!(inner.u.sup_distance(&f) < 1e-5);
}

#[test]
fn clamping_never_increases_energy() {
    let mut r = common::rng(31);
    for _ in 0..50 {
        let (w, h) = (r.gen_range(1..=7), r.gen_range(1..=7));
        let m = if r.gen_bool(0.5) { 3 } else { 1 };
        let f = common::random_field(&mut r, w, h, m, 1.0);
        let mask = common::random_mask(&mut r, w, h, 0.4);
        let bound = known_data_bound(&f, &mask) * r.gen_range(1.0..1.5);
        let u = common::random_field(&mut r, w, h, m, 3.0);
        let p = ModelParams::new(
            r.gen_range(0.1..10.0),
            [1.5, 2.0, 3.0][r.gen_range(0..3)],
            DensityParams::new([1.5, 2.0, 3.0][r.gen_range(0..3)], r.gen_range(0.0..0.1)).unwrap(),
        )
        .unwrap();
        let clamped = clamp_to_ball(&u, bound).unwrap();
        let before = primal_energy(&u, &f, &mask, &p).unwrap();
        let after = primal_energy(&clamped, &f, &mask, &p).unwrap();
        assert!(after <= before * (1.0 + 1e-14));
    }
}

#[test]
fn single_precision_solve() {
    let (f, mask) = common::checkerboard();
    let f32_field = Image32::new(16, 16, 1, f.as_slice().iter().map(|&v| v as f32).collect()).unwrap();
    let p = ModelParams::new(10.0f32, 2.0, DensityParams::new(2.0f32, 0.0).unwrap()).unwrap();
    let cfg = Config32 { delta_min: 1e-4, inner_tol: 1e-4, gap_tol: 1e-2, ..Config32::default() };
    let run = continuation(&f32_field, &mask, &p, &cfg).unwrap();
    assert!(run.certificate.relative_gap <= 1e-2);
    assert!(check_max_principle(&run.u, &f32_field, &mask).margin >= -1e-5);
}

#[test]
fn rejects_bad_configuration() {
    let (f, mask) = common::checkerboard();
    let p = common::model(2.0, 10.0, 2.0);
    let bad = Config { delta_factor: 1.5, ..Config::default() };
    assert!(continuation(&f, &mask, &p, &bad).is_err());
    let bad = Config { delta_min: 1.0, ..Config::default() };
    assert!(continuation(&f, &mask, &p, &bad).is_err());
    assert!(minimize_smooth(&f, 0.0, &f, &mask, &p, &Config::default()).is_err());
    let small = Image::zeros(3, 3, 1).unwrap();
    assert!(continuation(&small, &mask, &p, &Config::default()).is_err());
}
