//! Compressive phase retrieval: recover a compressed sketch `C x` up to a
//! global phase with the flattened BlockPR pipeline, then decode the sparse
//! signal from it.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, BlockPrError, Result};
use crate::lifted::{assemble_blocks, LiftedSystem};
use crate::masks::{build_deterministic_masks, build_flattener, correlation_measure, FlatteningOperator, MaskEnsemble};
use crate::rng::rng_from_seed;
use crate::signal::{l2_norm, MeasurementVector, Signal};
use crate::sync::recover_arbitrary;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SketchKind {
    /// `sqrt(d/m)` times `m` distinct rows of the unitary DFT.
    SubsampledDft { seed: u64 },
    /// i.i.d. complex Gaussian entries of variance `1/m`.
    Gaussian { seed: u64 },
}

#[derive(Clone)]
enum SketchData {
    Dft {
        rows: Vec<usize>,
        fwd: Arc<dyn Fft<f64>>,
        inv: Arc<dyn Fft<f64>>,
    },
    Dense(DMatrix<Complex64>),
}

/// A compressive sensing matrix `C` of shape `m x d`.
#[derive(Clone)]
pub struct Sketch {
    d: usize,
    m: usize,
    kind: SketchKind,
    data: SketchData,
}

impl std::fmt::Debug for Sketch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sketch")
            .field("d", &self.d)
            .field("m", &self.m)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Sketch {
    pub fn new(d: usize, m: usize, kind: SketchKind) -> Result<Self> {
        if m == 0 || m >= d {
            return domain(format!("sketch rows must satisfy 0 < m < d, got m = {m}, d = {d}"));
        }
        let data = match kind {
            SketchKind::SubsampledDft { seed } => {
                let mut rng = rng_from_seed(seed);
                let mut rows = sample(&mut rng, d, m).into_vec();
                rows.sort_unstable();
                let mut planner = FftPlanner::new();
                SketchData::Dft {
                    rows,
                    fwd: planner.plan_fft_forward(d),
                    inv: planner.plan_fft_inverse(d),
                }
            }
            SketchKind::Gaussian { seed } => {
                let mut rng = rng_from_seed(seed);
                let s = 1.0 / (2.0 * m as f64).sqrt();
                SketchData::Dense(DMatrix::from_fn(m, d, |_, _| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * s, im * s)
                }))
            }
        };
        Ok(Self { d, m, kind, data })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    /// `C x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        match &self.data {
            SketchData::Dft { rows, fwd, .. } => {
                let mut buf = x.to_vec();
                fwd.process(&mut buf);
                let scale = 1.0 / (self.m as f64).sqrt();
                rows.iter().map(|&r| buf[r] * scale).collect()
            }
            SketchData::Dense(c) => (c * DVector::from_column_slice(x)).as_slice().to_vec(),
        }
    }

    /// `C^* z`.
    pub fn adjoint(&self, z: &[Complex64]) -> Vec<Complex64> {
        match &self.data {
            SketchData::Dft { rows, inv, .. } => {
                let mut buf = vec![ZERO; self.d];
                let scale = 1.0 / (self.m as f64).sqrt();
                for (&r, v) in rows.iter().zip(z) {
                    buf[r] = v * scale;
                }
                inv.process(&mut buf);
                buf
            }
            SketchData::Dense(c) => (c.adjoint() * DVector::from_column_slice(z)).as_slice().to_vec(),
        }
    }

    /// Columns of `C` indexed by `support`, as a dense `m x |support|` matrix.
    pub fn columns(&self, support: &[usize]) -> DMatrix<Complex64> {
        let mut out = DMatrix::from_element(self.m, support.len(), ZERO);
        let mut e = vec![ZERO; self.d];
        for (c, &j) in support.iter().enumerate() {
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.apply(&e);
            e[j] = ZERO;
            out.set_column(c, &DVector::from_vec(col));
        }
        out
    }
}

/// Recovers a sparse vector from (approximate) sketch values `z = C x`.
pub trait SparseDecoder: Send + Sync {
    fn decode(&self, sketch: &Sketch, z: &[Complex64], s: usize) -> Result<Vec<Complex64>>;
}

/// Normalized iterative hard thresholding followed by a least-squares fit on
/// the final support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedIht {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for NormalizedIht {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-10,
        }
    }
}

fn top_s(v: &[Complex64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].norm_sqr().total_cmp(&v[a].norm_sqr()).then(a.cmp(&b)));
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

fn threshold(v: &[Complex64], s: usize) -> (Vec<Complex64>, Vec<usize>) {
    let support = top_s(v, s);
    let mut out = vec![ZERO; v.len()];
    for &i in &support {
        out[i] = v[i];
    }
    (out, support)
}

fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn least_squares_on(sketch: &Sketch, z: &[Complex64], support: &[usize]) -> Vec<Complex64> {
    let cs = sketch.columns(support);
    let svd = cs.svd(true, true);
    let sol = svd
        .solve(&DVector::from_column_slice(z), 1e-12)
        .expect("SVD computed with U and V");
    let mut out = vec![ZERO; sketch.d()];
    for (k, &j) in support.iter().enumerate() {
        out[j] = sol[k];
    }
    out
}

impl SparseDecoder for NormalizedIht {
    fn decode(&self, sketch: &Sketch, z: &[Complex64], s: usize) -> Result<Vec<Complex64>> {
        if z.len() != sketch.rows() {
            return Err(BlockPrError::DimensionMismatch {
                expected: sketch.rows(),
                found: z.len(),
            });
        }
        if s == 0 || s > sketch.rows() {
            return domain(format!("sparsity must satisfy 1 <= s <= m, got {s}"));
        }
        let z_norm = l2_norm(z);
        let d = sketch.d();
        if z_norm == 0.0 {
            return Ok(vec![ZERO; d]);
        }
        let (c_shrink, kappa) = (0.01, 2.0);
        let mut x = vec![ZERO; d];
        let mut support = top_s(&sketch.adjoint(z), s);
        let mut residual = z_norm;
        for _ in 0..self.max_iterations {
            let r = sub(z, &sketch.apply(&x));
            residual = l2_norm(&r);
            if residual <= self.tolerance * z_norm {
                return Ok(least_squares_on(sketch, z, &support));
            }
            let g = sketch.adjoint(&r);
            let mut gs = vec![ZERO; d];
            for &i in &support {
                gs[i] = g[i];
            }
            let cg = l2_norm(&sketch.apply(&gs));
            let mut mu = if cg > 0.0 { (l2_norm(&gs) / cg).powi(2) } else { 1.0 };
            let step = |mu: f64| {
                let v: Vec<Complex64> = x.iter().zip(&g).map(|(a, b)| a + b * mu).collect();
                threshold(&v, s)
            };
            let (mut next, mut next_support) = step(mu);
            while next_support != support {
                let delta = sub(&next, &x);
                let cd = l2_norm(&sketch.apply(&delta));
                if cd == 0.0 {
                    break;
                }
                let omega = (1.0 - c_shrink) * (l2_norm(&delta) / cd).powi(2);
                if mu <= omega {
                    break;
                }
                mu /= kappa * (1.0 - c_shrink);
                (next, next_support) = step(mu);
            }
            let change = l2_norm(&sub(&next, &x));
            let scale = l2_norm(&next);
            x = next;
            support = next_support;
            if change <= self.tolerance * scale {
                return Ok(least_squares_on(sketch, z, &support));
            }
        }
        Err(BlockPrError::DecoderNonConvergence {
            iterations: self.max_iterations,
            residual: residual / z_norm,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsePipelineConfig {
    /// Target sparsity `s`.
    pub s: usize,
    /// Sketch rows `m`.
    pub m: usize,
    pub sketch: SketchKind,
    /// Support width of the inner BlockPR system on `C^m`.
    pub inner_delta: usize,
    /// Seed of the inner flattening operator.
    pub flatten_seed: u64,
    /// Tail parameter of the compressible error bound.
    pub epsilon: f64,
    pub decoder: NormalizedIht,
}

impl SparsePipelineConfig {
    /// Defaults for sketch size `m`: subsampled DFT rows and inner support
    /// `2 ceil(log2 m) + 3`, clamped so the inner system fits in `C^m`.
    pub fn new(s: usize, m: usize, seed: u64) -> Self {
        let log_m = (m.max(2) as f64).log2().ceil() as usize;
        let inner_delta = (2 * log_m + 3).min(m.div_ceil(2)).max(2);
        Self {
            s,
            m,
            sketch: SketchKind::SubsampledDft { seed },
            inner_delta,
            flatten_seed: seed.wrapping_add(1),
            epsilon: 1.0,
            decoder: NormalizedIht::default(),
        }
    }
}

/// The sketch plus the flattened BlockPR system operating on `C^m`.
#[derive(Debug, Clone)]
pub struct SparseInner {
    pub sketch: Sketch,
    pub ensemble: MaskEnsemble,
    pub system: LiftedSystem,
    pub flattener: FlatteningOperator,
}

impl SparseInner {
    pub fn new(d: usize, cfg: &SparsePipelineConfig) -> Result<Self> {
        if cfg.s == 0 || cfg.s > cfg.m {
            return domain(format!("sparsity must satisfy 1 <= s <= m, got s = {}, m = {}", cfg.s, cfg.m));
        }
        let sketch = Sketch::new(d, cfg.m, cfg.sketch)?;
        let ensemble = build_deterministic_masks(cfg.m, cfg.inner_delta, None)?;
        let system = assemble_blocks(&ensemble)?;
        let flattener = build_flattener(cfg.m, cfg.flatten_seed)?;
        Ok(Self {
            sketch,
            ensemble,
            system,
            flattener,
        })
    }
}

/// `|M W C x|^2`.
pub fn sparse_measure(x: &Signal, inner: &SparseInner) -> Result<MeasurementVector> {
    if x.len() != inner.sketch.d() {
        return Err(BlockPrError::DimensionMismatch {
            expected: inner.sketch.d(),
            found: x.len(),
        });
    }
    let cx = Signal::new(inner.sketch.apply(x.entries()))?;
    correlation_measure(&inner.flattener.apply(&cx)?, &inner.ensemble)
}

/// Recover `e^{i phi} C x` with the flattened pipeline, then decode.
pub fn sparse_recover_with(
    b: &MeasurementVector,
    cfg: &SparsePipelineConfig,
    inner: &SparseInner,
    decoder: &dyn SparseDecoder,
) -> Result<Signal> {
    let z = recover_arbitrary(b, &inner.system, &inner.flattener)?;
    let x = decoder.decode(&inner.sketch, z.signal.entries(), cfg.s)?;
    Signal::new(x)
}

/// [`sparse_recover_with`] using the configured hard-thresholding decoder.
pub fn sparse_recover(b: &MeasurementVector, cfg: &SparsePipelineConfig, inner: &SparseInner) -> Result<Signal> {
    sparse_recover_with(b, cfg, inner, &cfg.decoder)
}

/// `||x - x_s||_2 + ||x - x_{s/eps}||_1 / sqrt(s)` with `x_k` the best
/// `k`-term approximation.
pub fn compressible_error_scale(x: &Signal, s: usize, epsilon: f64) -> f64 {
    let tail = |k: usize, p: i32| {
        let keep = top_s(x.entries(), k.min(x.len()));
        x.entries()
            .iter()
            .enumerate()
            .filter(|(i, _)| keep.binary_search(i).is_err())
            .map(|(_, v)| v.norm().powi(p))
            .sum::<f64>()
    };
    let k = ((s as f64) / epsilon).floor() as usize;
    tail(s, 2).sqrt() + tail(k, 1) / (s as f64).sqrt()
}
