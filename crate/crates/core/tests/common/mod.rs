#![allow(dead_code)]

use std::sync::Arc;

use mpesplit::grid::{Field, ScalarKind, SpectralGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real field with nodal values uniform on `[-amp, amp]`.
pub fn random_real(grid: &Arc<SpectralGrid>, amp: f64, rng: &mut ChaCha8Rng) -> Field {
    let vals: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-amp..=amp)).collect();
    Field::from_real(grid, &vals).unwrap()
}

pub fn random_complex(grid: &Arc<SpectralGrid>, amp: f64, rng: &mut ChaCha8Rng) -> Field {
    let vals: Vec<Complex64> = (0..grid.len())
        .map(|_| Complex64::new(rng.gen_range(-amp..=amp), rng.gen_range(-amp..=amp)))
        .collect();
    Field::from_complex(grid, vals, ScalarKind::Complex).unwrap()
}

/// Smooth random real field: a few low Fourier modes with random amplitudes.
pub fn random_smooth(grid: &Arc<SpectralGrid>, amp: f64, rng: &mut ChaCha8Rng) -> Field {
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(1..4) as f64,
                rng.gen_range(0..4) as f64,
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let l = grid.length();
    let raw = Field::from_fn_real(grid, |x, y| {
        let k = std::f64::consts::TAU / l;
        modes
            .iter()
            .map(|&(p, q, a, ph)| a * (k * (p * x + q * y) + ph).cos())
            .sum::<f64>()
    });
    let m = raw.norm_inf().max(1e-300);
    raw.map_real(|v| amp * v / m)
}

pub fn max_rel_diff(a: &Field, b: &Field) -> f64 {
    a.difference(b).unwrap().norm_inf() / b.norm_inf().max(1e-300)
}
