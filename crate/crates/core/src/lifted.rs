//! The lifted block-circulant system and its FFT-based solver.
//!
//! Interleaving the measurements shift-major (`P b`, position `s L + l` holds
//! `(b_l)_s`) turns the quadratic forward model into the linear system
//! `P b = M' y`, where `M'` is block circulant with `d x d` blocks of shape
//! `L x (2 delta - 1)`. Its first block row is `[M'_0, ..., M'_{delta-1}, 0, ...]`
//! and block `(s, s + l)` equals `M'_l`. Unitary block Fourier matrices
//! (`U` with entries `e^{2 pi i k t / d} / sqrt(d)`) diagonalize it into
//!
//! ```text
//! J_k = sum_l M'_l e^{2 pi i k l / d},   k = 0, ..., d - 1.
//! ```
//!
//! For the damped Fourier masks `J_k = F diag(s_k)` with `F` the unitary DFT of
//! size `2 delta - 1`, so each block solve is a short inverse FFT and a
//! diagonal division.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, BlockPrError, Result};
use crate::masks::{MaskEnsemble, MaskKind};
use crate::signal::{LiftedLayout, LiftedVector, MeasurementVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative threshold below which a block is treated as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

/// Extreme singular values over all blocks `J_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Block attaining `sigma_min`.
    pub weakest_block: usize,
    /// `(sigma_min, sigma_max)` of each block.
    pub per_block: Vec<(f64, f64)>,
}

impl ConditionSummary {
    fn from_blocks(per_block: Vec<(f64, f64)>) -> Self {
        let mut sigma_max = 0.0f64;
        let mut sigma_min = f64::INFINITY;
        let mut weakest_block = 0;
        for (k, &(lo, hi)) in per_block.iter().enumerate() {
            sigma_max = sigma_max.max(hi);
            if lo < sigma_min {
                sigma_min = lo;
                weakest_block = k;
            }
        }
        Self {
            sigma_max,
            sigma_min,
            weakest_block,
            per_block,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }

    pub fn is_singular(&self) -> bool {
        self.sigma_min.is_nan() || self.sigma_min < SINGULAR_TOLERANCE * self.sigma_max || self.sigma_max == 0.0
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.is_singular() {
            return Err(BlockPrError::Conditioning {
                block: self.weakest_block,
                sigma_min: self.sigma_min,
                sigma_max: self.sigma_max,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Factorization {
    /// `J_k = F diag(s_k)`; `s` is `d x (2 delta - 1)`, row-major in `k`.
    ClosedForm { a: f64, s: Vec<Complex64> },
    /// Per-block SVD pseudo-inverses (`(2 delta - 1) x L`) of the stored blocks.
    Generic {
        blocks: Vec<DMatrix<Complex64>>,
        pinv: Vec<DMatrix<Complex64>>,
    },
}

#[derive(Clone)]
struct Plans {
    fwd_d: Arc<dyn Fft<f64>>,
    inv_d: Arc<dyn Fft<f64>>,
    inv_w: Arc<dyn Fft<f64>>,
}

#[derive(Clone)]
pub struct LiftedSystem {
    layout: LiftedLayout,
    masks: usize,
    factorization: Factorization,
    condition: ConditionSummary,
    plans: Plans,
    /// Closed form only: `1 / (d sqrt(w) s)`, folding every FFT scale into
    /// one multiplier per entry.
    gain: Vec<Complex64>,
}

impl std::fmt::Debug for LiftedSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiftedSystem")
            .field("d", &self.layout.d())
            .field("delta", &self.layout.delta())
            .field("masks", &self.masks)
            .field("closed_form", &self.is_closed_form())
            .field("sigma_min", &self.condition.sigma_min)
            .field("sigma_max", &self.condition.sigma_max)
            .finish()
    }
}

/// The nonzero blocks `M'_0, ..., M'_{delta-1}` of the first block row, each
/// `L x (2 delta - 1)`.
///
/// Row `l` of block `M'_b` holds the coefficients `m_l[p] conj(m_l[q])` whose
/// lifted column `p (2 delta - 1) + q - p` falls into block `b`.
pub fn first_block_row(ensemble: &MaskEnsemble) -> Vec<DMatrix<Complex64>> {
    let delta = ensemble.delta();
    let w = 2 * delta - 1;
    let l_count = ensemble.count();
    let mut blocks = vec![DMatrix::from_element(l_count, w, ZERO); delta];
    for l in 0..l_count {
        let m = ensemble.support(l);
        for p in 0..delta {
            for q in 0..delta {
                let c = p * w + q - p;
                blocks[c / w][(l, c % w)] += m[p] * m[q].conj();
            }
        }
    }
    blocks
}

/// `J_k = sum_b M'_b e^{2 pi i k b / d}` by direct summation.
pub fn block_by_summation(row: &[DMatrix<Complex64>], k: usize, d: usize) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_element(row[0].nrows(), row[0].ncols(), ZERO);
    for (b, mb) in row.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, 2.0 * PI * ((k * b) % d) as f64 / d as f64);
        out += mb * phase;
    }
    out
}

/// Closed-form diagonal factors `s_{k,j}` of the damped Fourier ensemble,
/// returned row-major as a `d x (2 delta - 1)` table (0-based `k`, `j`).
///
/// With `z = e^{-2/a} e^{2 pi i k / d}` and `r = 2 delta - 1 - j`:
///
/// ```text
/// j <  delta:  s = e^{-(j+2)/a} (1 - z^{delta-j}) / (1 - z)
/// j >= delta:  s = e^{-(r+2)/a} e^{2 pi i k (r-1) / d} (1 - z^{delta-r}) / (1 - z)
/// ```
pub fn s_table(d: usize, delta: usize, a: f64) -> Result<Vec<Complex64>> {
    LiftedLayout::new(d, delta)?;
    if !a.is_finite() || a <= 0.0 {
        return domain(format!("damping a must be positive and finite, got {a}"));
    }
    let w = 2 * delta - 1;
    let mut s = Vec::with_capacity(d * w);
    for k in 0..d {
        let omega = |e: isize| Complex64::from_polar(1.0, 2.0 * PI * ((k as isize * e).rem_euclid(d as isize)) as f64 / d as f64);
        let z = Complex64::from_polar((-2.0 / a).exp(), 2.0 * PI * k as f64 / d as f64);
        let denom = Complex64::new(1.0, 0.0) - z;
        let geometric = |n: usize| {
            let zn = Complex64::from_polar((-2.0 * n as f64 / a).exp(), 0.0) * omega(n as isize);
            (Complex64::new(1.0, 0.0) - zn) / denom
        };
        for j in 0..w {
            let v = if j < delta {
                geometric(delta - j) * (-((j + 2) as f64) / a).exp()
            } else {
                let r = w - j;
                geometric(delta - r) * omega(r as isize - 1) * (-((r + 2) as f64) / a).exp()
            };
            s.push(v);
        }
    }
    Ok(s)
}

fn svd_extremes(m: &DMatrix<Complex64>) -> (f64, f64) {
    let sv = m.singular_values();
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (lo, hi)
}

fn pseudo_inverse(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let svd = m.clone().svd(true, true);
    let hi = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = SINGULAR_TOLERANCE * hi;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^*");
    let mut inv = DMatrix::from_element(m.ncols(), m.nrows(), ZERO);
    for (i, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma > cutoff && sigma > 0.0 {
            let vi = v_t.row(i).adjoint();
            let ui = u.column(i).adjoint();
            inv += (vi * ui) * Complex64::new(1.0 / sigma, 0.0);
        }
    }
    inv
}

fn plans(d: usize, w: usize) -> Plans {
    let mut planner = FftPlanner::new();
    Plans {
        fwd_d: planner.plan_fft_forward(d),
        inv_d: planner.plan_fft_inverse(d),
        inv_w: planner.plan_fft_inverse(w),
    }
}

/// Assemble `M'` in block-diagonal form. Damped Fourier ensembles get the
/// closed-form factorization; everything else gets per-block pseudo-inverses.
///
/// Assembly never fails on a singular system; the condition summary records
/// it and [`solve_lifted`] reports it.
pub fn assemble_blocks(ensemble: &MaskEnsemble) -> Result<LiftedSystem> {
    match ensemble.kind() {
        MaskKind::DeterministicFourier { a } if ensemble.count() == 2 * ensemble.delta() - 1 => {
            assemble_closed_form(ensemble, *a)
        }
        _ => assemble_generic(ensemble),
    }
}

fn assemble_closed_form(ensemble: &MaskEnsemble, a: f64) -> Result<LiftedSystem> {
    let layout = ensemble.layout();
    let (d, w) = (layout.d(), layout.width());
    let s = s_table(d, layout.delta(), a)?;
    let per_block = s
        .chunks(w)
        .map(|row| {
            let lo = row.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
            let hi = row.iter().map(|v| v.norm()).fold(0.0, f64::max);
            (lo, hi)
        })
        .collect();
    let scale = d as f64 * (w as f64).sqrt();
    let gain = s.iter().map(|v| (v * scale).inv()).collect();
    Ok(LiftedSystem {
        layout,
        masks: w,
        factorization: Factorization::ClosedForm { a, s },
        condition: ConditionSummary::from_blocks(per_block),
        plans: plans(d, w),
        gain,
    })
}

/// Assemble with explicit blocks and SVD pseudo-inverses regardless of the
/// ensemble kind.
pub fn assemble_generic(ensemble: &MaskEnsemble) -> Result<LiftedSystem> {
    let layout = ensemble.layout();
    let (d, w) = (layout.d(), layout.width());
    let row = first_block_row(ensemble);
    let blocks: Vec<DMatrix<Complex64>> = (0..d).map(|k| block_by_summation(&row, k, d)).collect();
    let per_block = blocks.iter().map(svd_extremes).collect();
    let pinv = blocks.iter().map(pseudo_inverse).collect();
    Ok(LiftedSystem {
        layout,
        masks: ensemble.count(),
        factorization: Factorization::Generic { blocks, pinv },
        condition: ConditionSummary::from_blocks(per_block),
        plans: plans(d, w),
        gain: Vec::new(),
    })
}

impl LiftedSystem {
    pub fn layout(&self) -> LiftedLayout {
        self.layout
    }

    pub fn d(&self) -> usize {
        self.layout.d()
    }

    pub fn delta(&self) -> usize {
        self.layout.delta()
    }

    /// Number of masks `L` (block row count).
    pub fn mask_count(&self) -> usize {
        self.masks
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.factorization, Factorization::ClosedForm { .. })
    }

    pub fn condition(&self) -> &ConditionSummary {
        &self.condition
    }

    /// Block `J_k` as an `L x (2 delta - 1)` matrix.
    pub fn block(&self, k: usize) -> DMatrix<Complex64> {
        match &self.factorization {
            Factorization::Generic { blocks, .. } => blocks[k].clone(),
            Factorization::ClosedForm { s, .. } => {
                let w = self.layout.width();
                let scale = 1.0 / (w as f64).sqrt();
                DMatrix::from_fn(w, w, |r, c| {
                    let f = Complex64::from_polar(scale, -2.0 * PI * ((r * c) % w) as f64 / w as f64);
                    f * s[k * w + c]
                })
            }
        }
    }

    /// `(M')^+ P b` for a measurement-layout vector `b` (mask-major, length
    /// `L d`), returned in lifted order.
    fn apply_inverse(&self, b: &[f64]) -> Result<Vec<Complex64>> {
        let d = self.d();
        let w = self.layout.width();
        let l_count = self.masks;
        if b.len() != l_count * d {
            return Err(BlockPrError::DimensionMismatch {
                expected: l_count * d,
                found: b.len(),
            });
        }
        self.condition.check()?;

        // U_L^* P b: one forward FFT per mask block, then gather k-major.
        // Both unitary 1/sqrt(d) factors are applied once, after the solve.
        let mut spectra: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plans.fwd_d.process(&mut spectra);
        let mut z = vec![ZERO; w * d];
        match &self.factorization {
            Factorization::ClosedForm { .. } => {
                transpose(&spectra, w, d, &mut z);
                self.plans.inv_w.process(&mut z);
                for (zi, g) in z.iter_mut().zip(&self.gain) {
                    *zi *= g;
                }
            }
            Factorization::Generic { pinv, .. } => {
                let mut rhs = vec![ZERO; l_count * d];
                transpose(&spectra, l_count, d, &mut rhs);
                let inv_d = 1.0 / d as f64;
                for (k, (p, zk)) in pinv.iter().zip(z.chunks_exact_mut(w)).enumerate() {
                    let rk = nalgebra::DVectorView::from_slice(&rhs[k * l_count..(k + 1) * l_count], l_count);
                    for (o, v) in zk.iter_mut().zip((p * rk).iter()) {
                        *o = v * inv_d;
                    }
                }
            }
        }

        // U_w z: inverse FFT over k for each lifted column.
        let cols = &mut spectra[..w * d];
        transpose(&z, d, w, cols);
        self.plans.inv_d.process(cols);
        transpose(cols, w, d, &mut z);
        let y = z;
        Ok(y)
    }
}

/// Row-major `rows x cols` into row-major `cols x rows`, in cache tiles.
fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    const TILE: usize = 16;
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// `y~ = (M')^+ P b`, the least-squares lifted estimate (exact inverse when
/// `L = 2 delta - 1`).
pub fn solve_lifted(sys: &LiftedSystem, b: &MeasurementVector) -> Result<LiftedVector> {
    if b.d() != sys.d() || b.masks() != sys.mask_count() {
        return Err(BlockPrError::DimensionMismatch {
            expected: sys.d() * sys.mask_count(),
            found: b.len(),
        });
    }
    let y = sys.apply_inverse(b.entries())?;
    LiftedVector::new(sys.layout, y)
}

/// Noise as seen in the lifted domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualNoise {
    pub values: Vec<Complex64>,
    pub inf_norm: f64,
}

/// `n~ = (M')^+ P n` for a noise vector in measurement layout.
pub fn residual_noise(sys: &LiftedSystem, noise: &[f64]) -> Result<ResidualNoise> {
    let values = sys.apply_inverse(noise)?;
    let inf_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(ResidualNoise { values, inf_norm })
}

/// Shift-major reordering `P`: position `s L + l` receives `v[l d + s]`.
pub fn interleave<T: Copy>(v: &[T], masks: usize) -> Result<Vec<T>> {
    if masks == 0 || !v.len().is_multiple_of(masks) {
        return domain(format!("length {} is not divisible by mask count {masks}", v.len()));
    }
    let d = v.len() / masks;
    Ok((0..v.len()).map(|pos| v[(pos % masks) * d + pos / masks]).collect())
}

/// Inverse of [`interleave`].
pub fn deinterleave<T: Copy>(v: &[T], masks: usize) -> Result<Vec<T>> {
    if masks == 0 || !v.len().is_multiple_of(masks) {
        return domain(format!("length {} is not divisible by mask count {masks}", v.len()));
    }
    let d = v.len() / masks;
    Ok((0..v.len()).map(|pos| v[(pos % d) * masks + pos / d]).collect())
}
