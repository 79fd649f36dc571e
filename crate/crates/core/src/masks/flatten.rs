use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, BlockPrError, Result};
use crate::rng::rng_from_seed;
use crate::signal::Signal;

/// The randomized unitary `W = P F B`: random signs `B`, unitary DFT `F`, and
/// a uniformly random permutation `P` with `(P v)_i = v[perm[i]]`.
///
/// Only the sign pattern, the permutation, and FFT plans are stored, so both
/// directions cost `O(d log d)`.
#[derive(Clone)]
pub struct FlatteningOperator {
    d: usize,
    seed: Option<u64>,
    signs: Vec<f64>,
    perm: Vec<usize>,
    forward: Option<Arc<dyn Fft<f64>>>,
    inverse: Option<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for FlatteningOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlatteningOperator")
            .field("d", &self.d)
            .field("seed", &self.seed)
            .field("identity", &self.is_identity())
            .finish()
    }
}

/// Draw `W = P F B` for dimension `d` from `seed`.
pub fn build_flattener(d: usize, seed: u64) -> Result<FlatteningOperator> {
    if d < 2 {
        return domain(format!("flattener dimension must be >= 2, got {d}"));
    }
    let mut rng = rng_from_seed(seed);
    let signs = (0..d)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(&mut rng);
    let mut planner = FftPlanner::new();
    Ok(FlatteningOperator {
        d,
        seed: Some(seed),
        signs,
        perm,
        forward: Some(planner.plan_fft_forward(d)),
        inverse: Some(planner.plan_fft_inverse(d)),
    })
}

impl FlatteningOperator {
    /// `W = I`.
    pub fn identity(d: usize) -> Result<Self> {
        if d < 2 {
            return domain(format!("flattener dimension must be >= 2, got {d}"));
        }
        Ok(Self {
            d,
            seed: None,
            signs: vec![1.0; d],
            perm: (0..d).collect(),
            forward: None,
            inverse: None,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_identity(&self) -> bool {
        self.forward.is_none()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    fn check(&self, x: &Signal) -> Result<()> {
        if x.len() != self.d {
            return Err(BlockPrError::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `W x`.
    pub fn apply(&self, x: &Signal) -> Result<Signal> {
        self.check(x)?;
        let Some(fft) = &self.forward else {
            return Ok(x.clone());
        };
        let scale = 1.0 / (self.d as f64).sqrt();
        let mut buf: Vec<Complex64> = x
            .entries()
            .iter()
            .zip(&self.signs)
            .map(|(v, s)| v * *s)
            .collect();
        fft.process(&mut buf);
        let out = self.perm.iter().map(|&p| buf[p] * scale).collect();
        Signal::new(out)
    }

    /// `W^{-1} y = W^* y = B F^* P^T y`.
    pub fn apply_inverse(&self, y: &Signal) -> Result<Signal> {
        self.check(y)?;
        let Some(ifft) = &self.inverse else {
            return Ok(y.clone());
        };
        let scale = 1.0 / (self.d as f64).sqrt();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.d];
        for (i, &p) in self.perm.iter().enumerate() {
            buf[p] = y.entries()[i];
        }
        ifft.process(&mut buf);
        let out = buf
            .iter()
            .zip(&self.signs)
            .map(|(v, s)| v * (*s * scale))
            .collect();
        Signal::new(out)
    }
}
