//! Local correlation masks and the forward measurement model.
//!
//! A mask `m_l` is a length-`d` vector supported on its first `delta` entries.
//! Measuring `x` with mask `l` at shift `s` yields
//!
//! ```text
//! (b_l)_s = | sum_{k < delta} conj(m_l[k]) x[(s + k) mod d] |^2
//! ```
//!
//! so each mask contributes `d` circular-correlation intensities.

mod flatten;

pub use flatten::{build_flattener, FlatteningOperator};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, BlockPrError, Result};
use crate::rng::rng_from_seed;
use crate::signal::{snr_to_noise_variance, LiftedLayout, MeasurementVector, Signal};

/// How an ensemble was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskKind {
    /// Exponentially damped windowed Fourier masks with damping `a`.
    DeterministicFourier { a: f64 },
    /// i.i.d. standard complex Gaussian support entries.
    RandomGaussian { gamma: f64, seed: u64 },
    /// Masks supplied directly by the caller.
    Custom,
}

/// Reproducible description of an ensemble (no raw mask values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDescriptor {
    pub d: usize,
    pub delta: usize,
    #[serde(flatten)]
    pub kind: MaskKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskEnsemble {
    layout: LiftedLayout,
    kind: MaskKind,
    /// Support values, `masks[l][k]` for `k < delta`.
    masks: Vec<Vec<Complex64>>,
}

/// Default damping `a = max(4, (delta - 1) / 2)`.
pub fn default_damping(delta: usize) -> f64 {
    f64::max(4.0, (delta as f64 - 1.0) / 2.0)
}

/// Number of random masks `ceil(gamma (2 delta - 1))`.
pub fn random_mask_count(delta: usize, gamma: f64) -> usize {
    let exact = gamma * (2 * delta - 1) as f64;
    let rounded = exact.round();
    if (exact - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        exact.ceil() as usize
    }
}

/// The damped Fourier ensemble of `2 delta - 1` masks,
/// `m_l[k] = e^{-(k+1)/a} (2 delta - 1)^{-1/4} e^{2 pi i k l / (2 delta - 1)}`
/// for `k < delta` (0-based `k`, `l`). `a` defaults to [`default_damping`].
pub fn build_deterministic_masks(d: usize, delta: usize, a: Option<f64>) -> Result<MaskEnsemble> {
    let layout = LiftedLayout::new(d, delta)?;
    let a = a.unwrap_or_else(|| default_damping(delta));
    if !a.is_finite() || a <= 0.0 {
        return domain(format!("damping a must be positive and finite, got {a}"));
    }
    let w = layout.width();
    let scale = (w as f64).powf(-0.25);
    let masks = (0..w)
        .map(|l| {
            (0..delta)
                .map(|k| {
                    let amp = (-((k + 1) as f64) / a).exp() * scale;
                    Complex64::from_polar(amp, 2.0 * PI * (k * l) as f64 / w as f64)
                })
                .collect()
        })
        .collect();
    Ok(MaskEnsemble {
        layout,
        kind: MaskKind::DeterministicFourier { a },
        masks,
    })
}

/// `ceil(gamma (2 delta - 1))` masks whose support entries are i.i.d.
/// complex Gaussian with real and imaginary parts drawn from `N(0, 1/2)`.
pub fn build_random_masks(d: usize, delta: usize, gamma: f64, seed: u64) -> Result<MaskEnsemble> {
    let layout = LiftedLayout::new(d, delta)?;
    if !gamma.is_finite() || gamma < 1.0 {
        return domain(format!("oversampling factor must be >= 1, got {gamma}"));
    }
    let count = random_mask_count(delta, gamma);
    let mut rng = rng_from_seed(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let masks = (0..count)
        .map(|_| {
            (0..delta)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * s, im * s)
                })
                .collect()
        })
        .collect();
    Ok(MaskEnsemble {
        layout,
        kind: MaskKind::RandomGaussian { gamma, seed },
        masks,
    })
}

impl MaskEnsemble {
    /// Build an ensemble from explicit support values (`masks[l]` has
    /// `delta` entries). At least `2 delta - 1` masks are required for the
    /// lifted system to be square or tall.
    pub fn from_masks(d: usize, delta: usize, masks: Vec<Vec<Complex64>>) -> Result<Self> {
        let layout = LiftedLayout::new(d, delta)?;
        if masks.len() < layout.width() {
            return domain(format!(
                "need at least {} masks, got {}",
                layout.width(),
                masks.len()
            ));
        }
        if let Some(bad) = masks.iter().position(|m| m.len() != delta) {
            return domain(format!("mask {bad} does not have exactly {delta} support entries"));
        }
        Ok(Self {
            layout,
            kind: MaskKind::Custom,
            masks,
        })
    }

    pub fn from_descriptor(desc: &EnsembleDescriptor) -> Result<Self> {
        match desc.kind {
            MaskKind::DeterministicFourier { a } => build_deterministic_masks(desc.d, desc.delta, Some(a)),
            MaskKind::RandomGaussian { gamma, seed } => build_random_masks(desc.d, desc.delta, gamma, seed),
            MaskKind::Custom => domain("custom ensembles cannot be rebuilt from a descriptor"),
        }
    }

    pub fn descriptor(&self) -> EnsembleDescriptor {
        EnsembleDescriptor {
            d: self.d(),
            delta: self.delta(),
            kind: self.kind.clone(),
        }
    }

    pub fn d(&self) -> usize {
        self.layout.d()
    }

    pub fn delta(&self) -> usize {
        self.layout.delta()
    }

    pub fn layout(&self) -> LiftedLayout {
        self.layout
    }

    /// Number of masks `L`.
    pub fn count(&self) -> usize {
        self.masks.len()
    }

    /// Total measurement count `D = L d`.
    pub fn measurement_count(&self) -> usize {
        self.count() * self.d()
    }

    pub fn kind(&self) -> &MaskKind {
        &self.kind
    }

    /// Support values of mask `l`.
    pub fn support(&self, l: usize) -> &[Complex64] {
        &self.masks[l]
    }

    /// Mask `l` as a full length-`d` vector.
    pub fn dense_mask(&self, l: usize) -> Vec<Complex64> {
        let mut m = vec![Complex64::new(0.0, 0.0); self.d()];
        m[..self.delta()].copy_from_slice(&self.masks[l]);
        m
    }

    /// Same ensemble with every mask multiplied by `c`; the result is tagged
    /// as custom.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            layout: self.layout,
            kind: MaskKind::Custom,
            masks: self
                .masks
                .iter()
                .map(|m| m.iter().map(|&v| v * c).collect())
                .collect(),
        }
    }
}

/// Squared-magnitude local correlation measurements of `x`.
pub fn correlation_measure(x: &Signal, ensemble: &MaskEnsemble) -> Result<MeasurementVector> {
    let d = ensemble.d();
    if x.len() != d {
        return Err(BlockPrError::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    let xs = x.entries();
    let delta = ensemble.delta();
    let mut out = Vec::with_capacity(ensemble.measurement_count());
    for l in 0..ensemble.count() {
        let m = ensemble.support(l);
        for s in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, mk) in m.iter().enumerate().take(delta) {
                let idx = s + k;
                let idx = if idx >= d { idx - d } else { idx };
                acc += mk.conj() * xs[idx];
            }
            out.push(acc.norm_sqr());
        }
    }
    MeasurementVector::new(d, ensemble.count(), out)
}

/// Noisy measurements together with the realized noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyMeasurement {
    pub noisy: MeasurementVector,
    pub noise: Vec<f64>,
    pub variance: f64,
}

/// Add i.i.d. real Gaussian noise whose variance realizes `snr_db` relative to
/// the energy `||M x||^2 = sum(b)` of the noiseless measurements `b`.
/// `snr_db = +inf` adds nothing.
pub fn add_noise(b: &MeasurementVector, snr_db: f64, seed: u64) -> Result<NoisyMeasurement> {
    if snr_db == f64::INFINITY {
        return Ok(NoisyMeasurement {
            noisy: b.clone(),
            noise: vec![0.0; b.len()],
            variance: 0.0,
        });
    }
    if snr_db.is_nan() {
        return domain("SNR must not be NaN");
    }
    let energy: f64 = b.entries().iter().sum();
    let variance = snr_to_noise_variance(energy, b.len(), snr_db)?;
    let sigma = variance.sqrt();
    let mut rng = rng_from_seed(seed);
    let noise: Vec<f64> = (0..b.len())
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let noisy = b.entries().iter().zip(&noise).map(|(v, n)| v + n).collect();
    Ok(NoisyMeasurement {
        noisy: MeasurementVector::new(b.d(), b.masks(), noisy)?,
        noise,
        variance,
    })
}
