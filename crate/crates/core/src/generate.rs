//! Seeded test signals.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::analysis::block_partition;
use crate::error::{domain, Result};
use crate::rng::rng_from_seed;
use crate::signal::Signal;

fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// i.i.d. standard complex Gaussian entries (unit variance).
///
/// # Panics
/// If `d < 2`.
pub fn gaussian_signal(d: usize, seed: u64) -> Signal {
    let mut rng = rng_from_seed(seed);
    Signal::new((0..d).map(|_| complex_normal(&mut rng)).collect()).expect("d >= 2")
}

/// A Gaussian signal adjusted to be `m`-flat: in every block of the flatness
/// partition one random entry is raised to the mean power of the remaining
/// entries, which is at least twice the flatness threshold.
pub fn flat_signal(d: usize, m: usize, seed: u64) -> Result<Signal> {
    if d < 2 {
        return domain(format!("signal length must be >= 2, got {d}"));
    }
    let blocks = block_partition(d, m)?;
    let mut rng = rng_from_seed(seed);
    let mut x: Vec<Complex64> = (0..d).map(|_| complex_normal(&mut rng)).collect();
    let chosen: Vec<usize> = blocks
        .iter()
        .map(|&(start, len)| start + rng.random_range(0..len))
        .collect();
    let rest: f64 = x
        .iter()
        .enumerate()
        .filter(|(i, _)| !chosen.contains(i))
        .map(|(_, v)| v.norm_sqr())
        .sum();
    let free = d - chosen.len();
    let target = if free == 0 { 1.0 } else { (rest / free as f64).sqrt() };
    for &i in &chosen {
        let phase = if x[i].norm() > 0.0 { x[i].arg() } else { 0.0 };
        if x[i].norm() < target {
            x[i] = Complex64::from_polar(target, phase);
        }
    }
    Signal::new(x)
}

/// Exactly `s`-sparse signal with Gaussian nonzeros on a uniformly random
/// support.
pub fn sparse_signal(d: usize, s: usize, seed: u64) -> Result<Signal> {
    if d < 2 || s > d {
        return domain(format!("need d >= 2 and s <= d, got d = {d}, s = {s}"));
    }
    let mut rng = rng_from_seed(seed);
    let support = sample(&mut rng, d, s);
    let mut x = vec![Complex64::new(0.0, 0.0); d];
    for i in support.iter() {
        let mut v = complex_normal(&mut rng);
        while v.norm() < 1e-3 {
            v = complex_normal(&mut rng);
        }
        x[i] = v;
    }
    Signal::new(x)
}
