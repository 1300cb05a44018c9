#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvcert::{DamageMask, DensityParams, Image, Model, ModelParams};

pub fn model(mu: f64, lambda: f64, zeta: f64) -> Model {
    ModelParams::new(lambda, zeta, DensityParams::new(mu, 0.0).unwrap()).unwrap()
}

/// 16×16 checkerboard of 4×4 cells (0.9 / 0.1) with the central 4×4 block damaged.
pub fn checkerboard() -> (Image, DamageMask) {
    let f = Image::from_fn(16, 16, 1, |x, y, _| if (x / 4 + y / 4) % 2 == 0 { 0.9 } else { 0.1 }).unwrap();
    let mask = DamageMask::from_fn(16, 16, |x, y| (6..10).contains(&x) && (6..10).contains(&y)).unwrap();
    (f, mask)
}

/// 1×5 strip, 0 on the left end, 1 on the right, middle three damaged.
pub fn bridge() -> (Image, DamageMask) {
    let f = Image::new(5, 1, 1, vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let mask = DamageMask::new(5, 1, vec![false, true, true, true, false]).unwrap();
    (f, mask)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(rng: &mut ChaCha8Rng, w: usize, h: usize, m: usize, amp: f64) -> Image {
    let data = (0..w * h * m).map(|_| rng.gen_range(-amp..=amp)).collect();
    Image::new(w, h, m, data).unwrap()
}

/// Random mask damaging roughly `fraction` of the pixels, never all of them.
pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, fraction: f64) -> DamageMask {
    let mut flags: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(fraction)).collect();
    if flags.iter().all(|&d| d) {
        flags[0] = false;
    }
    DamageMask::new(w, h, flags).unwrap()
}

/// Small single-channel instances for the brute-force oracle.
pub fn oracle_instances() -> Vec<(&'static str, Image, DamageMask, Model)> {
    let (bf, bm) = bridge();
    let mut out = vec![("bridge 1x5", bf, bm, model(2.0, 1e4, 2.0))];
    let mut r = rng(7);
    let shapes = [
        (2, 2, 0.25, 2.0, 1.0, 2.0),
        (2, 3, 0.0, 2.0, 2.0, 2.0),
        (2, 4, 0.3, 1.5, 5.0, 2.0),
        (4, 2, 0.3, 3.0, 3.0, 3.0),
        (1, 8, 0.4, 2.0, 10.0, 1.5),
        (3, 2, 0.2, 2.5, 1.0, 3.0),
        (2, 2, 0.0, 1.5, 0.5, 1.5),
        (3, 1, 0.34, 2.0, 4.0, 2.0),
        (4, 2, 0.5, 2.0, 20.0, 2.0),
    ];
    let names = ["2x2", "2x3", "2x4", "4x2", "1x8", "3x2", "2x2 denoise", "3x1", "4x2 heavy"];
    for (name, &(w, h, frac, mu, lambda, zeta)) in names.iter().zip(&shapes) {
        let f = random_field(&mut r, w, h, 1, 1.0);
        let mask = random_mask(&mut r, w, h, frac);
        out.push((*name, f, mask, model(mu, lambda, zeta)));
    }
    out
}
