//! Shared domain types: signals, measurement vectors, the lifted vector of
//! local products and its index map, and global-phase-invariant error metrics.
//!
//! All indices are 0-based. The lifted position of the product
//! `conj(x_i) * x_j` for a pair `(i, j)` with `|(j - i) mod d| < delta` is
//!
//! ```text
//! k(i, j) = (i * (2 delta - 1) + o) mod ((2 delta - 1) d),   o = (j - i) mod d
//! ```
//!
//! where `o` is normalized into `{-ceil(d/2)+1, ..., floor(d/2)}`. The 1-based
//! index used in the literature is `k(i - 1, j - 1) + 1`. Each block of
//! `2 delta - 1` consecutive entries starts with `|x_i|^2`, followed by the
//! forward products of `x_i` and then the backward products of `x_{i+1}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, BlockPrError, Result};

/// A dense complex vector of length `d >= 2` with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    entries: Vec<Complex64>,
}

impl Signal {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() < 2 {
            return domain(format!("signal length must be >= 2, got {}", entries.len()));
        }
        if let Some(pos) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain(format!("signal entry {pos} is not finite"));
        }
        Ok(Self { entries })
    }

    pub fn zeros(d: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); d])
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Standard basis vector `e_k`.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return domain(format!("basis index {k} out of range for d = {d}"));
        }
        let mut entries = vec![Complex64::new(0.0, 0.0); d];
        entries[k] = Complex64::new(1.0, 0.0);
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.entries
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.entries)
    }

    pub fn scaled(&self, c: Complex64) -> Signal {
        Signal {
            entries: self.entries.iter().map(|&z| z * c).collect(),
        }
    }

    /// Multiply by the unimodular factor `e^{i theta}`.
    pub fn rotated(&self, theta: f64) -> Signal {
        self.scaled(Complex64::from_polar(1.0, theta))
    }
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Squared-magnitude measurements laid out mask-major: entry `(b_l)_s` of
/// mask `l` at shift `s` lives at position `l * d + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    d: usize,
    masks: usize,
    entries: Vec<f64>,
}

impl MeasurementVector {
    pub fn new(d: usize, masks: usize, entries: Vec<f64>) -> Result<Self> {
        if d == 0 || masks == 0 {
            return domain("measurement vector needs d > 0 and at least one mask");
        }
        if entries.len() != d * masks {
            return Err(BlockPrError::DimensionMismatch {
                expected: d * masks,
                found: entries.len(),
            });
        }
        Ok(Self { d, masks, entries })
    }

    pub fn zeros(d: usize, masks: usize) -> Result<Self> {
        Self::new(d, masks, vec![0.0; d * masks])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of masks `L` in the ensemble that produced this vector.
    pub fn masks(&self) -> usize {
        self.masks
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    /// All shifts of mask `l`.
    pub fn block(&self, l: usize) -> &[f64] {
        &self.entries[l * self.d..(l + 1) * self.d]
    }

    pub fn get(&self, l: usize, shift: usize) -> f64 {
        self.entries[l * self.d + shift]
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Shape parameters `(d, delta)` of a lifted vector together with the
/// bijective index map between band pairs `(i, j)` and lifted positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftedLayout {
    d: usize,
    delta: usize,
}

impl LiftedLayout {
    /// Requires `delta >= 2` and `2 delta - 1 <= d`, so that the band offsets
    /// `-(delta-1)..=(delta-1)` are distinct modulo `d`.
    pub fn new(d: usize, delta: usize) -> Result<Self> {
        if delta < 2 {
            return domain(format!("support width delta must be >= 2, got {delta}"));
        }
        if 2 * delta - 1 > d {
            return domain(format!(
                "support width delta = {delta} too large for d = {d} (need 2*delta - 1 <= d)"
            ));
        }
        Ok(Self { d, delta })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Block width `2 delta - 1`.
    pub fn width(&self) -> usize {
        2 * self.delta - 1
    }

    /// Total lifted length `(2 delta - 1) d`.
    pub fn len(&self) -> usize {
        self.width() * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.d == 0
    }

    /// `(j - i) mod d` normalized into `{-ceil(d/2)+1, ..., floor(d/2)}`.
    pub fn offset(&self, i: usize, j: usize) -> isize {
        normalized_offset(i, j, self.d)
    }

    /// Lifted position of `conj(x_i) x_j`.
    pub fn index(&self, i: usize, j: usize) -> Result<usize> {
        if i >= self.d || j >= self.d {
            return domain(format!("pair ({i}, {j}) out of range for d = {}", self.d));
        }
        let o = self.offset(i, j);
        if o.unsigned_abs() >= self.delta {
            return domain(format!(
                "pair ({i}, {j}) is outside the band |i - j mod d| < {}",
                self.delta
            ));
        }
        Ok(self.index_unchecked(i, o))
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, i: usize, o: isize) -> usize {
        let len = self.len() as isize;
        ((i * self.width()) as isize + o).rem_euclid(len) as usize
    }

    /// Inverse of [`LiftedLayout::index`].
    pub fn pair(&self, k: usize) -> Result<(usize, usize)> {
        if k >= self.len() {
            return domain(format!("lifted index {k} out of range {}", self.len()));
        }
        let w = self.width();
        let t = k + self.delta - 1;
        let i = (t / w) % self.d;
        let o = (t % w) as isize - (self.delta as isize - 1);
        let j = (i as isize + o).rem_euclid(self.d as isize) as usize;
        Ok((i, j))
    }

    /// Lifted position of `|x_j|^2`.
    pub fn diagonal(&self, j: usize) -> usize {
        j * self.width()
    }
}

pub(crate) fn normalized_offset(i: usize, j: usize, d: usize) -> isize {
    let d = d as isize;
    let r = (j as isize - i as isize).rem_euclid(d);
    if r > d / 2 {
        r - d
    } else {
        r
    }
}

/// Free-function form of [`LiftedLayout::index`].
pub fn lifted_index(i: usize, j: usize, d: usize, delta: usize) -> Result<usize> {
    LiftedLayout::new(d, delta)?.index(i, j)
}

/// The lifted unknowns: local products `conj(x_i) x_j` for every band pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVector {
    layout: LiftedLayout,
    entries: Vec<Complex64>,
}

impl LiftedVector {
    pub fn new(layout: LiftedLayout, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != layout.len() {
            return Err(BlockPrError::DimensionMismatch {
                expected: layout.len(),
                found: entries.len(),
            });
        }
        Ok(Self { layout, entries })
    }

    /// The exact lifted vector of a signal.
    pub fn from_signal(x: &Signal, delta: usize) -> Result<Self> {
        let layout = LiftedLayout::new(x.len(), delta)?;
        let xs = x.entries();
        let d = layout.d();
        let entries = (0..layout.len())
            .map(|k| {
                let (i, j) = layout.pair(k).expect("k in range");
                debug_assert!(j < d);
                xs[i].conj() * xs[j]
            })
            .collect();
        Ok(Self { layout, entries })
    }

    pub fn layout(&self) -> LiftedLayout {
        self.layout
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.entries
    }

    /// Value at the band pair `(i, j)`, i.e. the estimate of `conj(x_i) x_j`.
    pub fn get(&self, i: usize, j: usize) -> Result<Complex64> {
        Ok(self.entries[self.layout.index(i, j)?])
    }

    pub fn diagonal(&self, j: usize) -> Complex64 {
        self.entries[self.layout.diagonal(j)]
    }

    pub fn inf_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Result of aligning an estimate to a reference over the circle group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalPhaseError {
    /// Phase applied to the reference `x` that best matches the estimate.
    pub theta_star: f64,
    /// `min_theta || x_est - e^{i theta} x ||_2`.
    pub absolute_l2: f64,
    /// `|| x ||_2` of the reference.
    pub reference_norm: f64,
}

impl GlobalPhaseError {
    pub fn relative_l2(&self) -> Result<f64> {
        if self.reference_norm == 0.0 {
            return Err(BlockPrError::Degenerate(
                "relative error undefined for a zero reference".into(),
            ));
        }
        Ok(self.absolute_l2 / self.reference_norm)
    }

    /// `10 log10(||x_est - e^{i theta*} x||^2 / ||x||^2)`.
    pub fn error_db(&self) -> Result<f64> {
        let rel = self.relative_l2()?;
        Ok(20.0 * rel.log10())
    }
}

/// Best global phase alignment of `estimate` to `reference`.
///
/// The minimizer of `|| estimate - e^{i theta} reference ||` is
/// `theta* = arg <reference, estimate>`; when the inner product vanishes every
/// `theta` is optimal and `0` is reported.
pub fn global_phase_align(reference: &Signal, estimate: &Signal) -> Result<GlobalPhaseError> {
    if reference.len() != estimate.len() {
        return Err(BlockPrError::DimensionMismatch {
            expected: reference.len(),
            found: estimate.len(),
        });
    }
    let inner: Complex64 = reference
        .entries()
        .iter()
        .zip(estimate.entries())
        .map(|(x, y)| x.conj() * y)
        .sum();
    let theta_star = if inner == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        inner.arg()
    };
    let rot = Complex64::from_polar(1.0, theta_star);
    let absolute_l2 = reference
        .entries()
        .iter()
        .zip(estimate.entries())
        .map(|(x, y)| (y - rot * x).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(GlobalPhaseError {
        theta_star,
        absolute_l2,
        reference_norm: reference.norm(),
    })
}

/// Noise variance `sigma^2 = E / (D 10^{snr/10})` for a target SNR in dB,
/// where `E = ||M x||_2^2` and `D` is the number of measurements.
pub fn snr_to_noise_variance(signal_energy: f64, count: usize, snr_db: f64) -> Result<f64> {
    if !signal_energy.is_finite() || signal_energy <= 0.0 {
        return domain(format!("signal energy must be positive, got {signal_energy}"));
    }
    if count == 0 {
        return domain("measurement count must be positive");
    }
    Ok(signal_energy / (count as f64 * 10f64.powf(snr_db / 10.0)))
}
