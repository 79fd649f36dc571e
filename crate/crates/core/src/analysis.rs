//! Conditioning, flatness, and dense reference computations.
//!
//! The dense oracles materialize `M`, `M'`, and the block Fourier matrices
//! for small `d` so that the fast factored paths can be checked entrywise.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, BlockPrError, Result};
use crate::lifted::{assemble_blocks, first_block_row, LiftedSystem};
use crate::masks::{build_deterministic_masks, correlation_measure, default_damping, MaskEnsemble};
use crate::signal::{global_phase_align, LiftedLayout, Signal};
use crate::sync::blockpr_recover;

pub use crate::lifted::s_table;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest `d` for which dense matrices are built.
pub const DENSE_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatBlock {
    pub start: usize,
    pub len: usize,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub m: usize,
    pub is_flat: bool,
    pub threshold: f64,
    pub blocks: Vec<FlatBlock>,
}

/// Split `0..d` into `floor(d/m)` contiguous blocks as `(start, len)`.
///
/// The `d mod m` leftover entries enlarge the leading blocks by one each.
/// When there are more leftovers than blocks the sizes are spread as evenly
/// as possible, which can exceed `m + 1`.
pub fn block_partition(d: usize, m: usize) -> Result<Vec<(usize, usize)>> {
    if m == 0 || m > d {
        return domain(format!("block size m must satisfy 1 <= m <= d, got m = {m}, d = {d}"));
    }
    let count = d / m;
    let (base, extra) = (d / count, d % count);
    let mut blocks = Vec::with_capacity(count);
    let mut start = 0;
    for b in 0..count {
        let len = base + usize::from(b < extra);
        blocks.push((start, len));
        start += len;
    }
    Ok(blocks)
}

/// Whether every block of the partition has an entry of magnitude at least
/// `||x|| / (2 sqrt(d))`.
pub fn is_m_flat(x: &Signal, m: usize) -> Result<FlatnessReport> {
    let d = x.len();
    let threshold = x.norm() / (2.0 * (d as f64).sqrt());
    let blocks: Vec<FlatBlock> = block_partition(d, m)?
        .into_iter()
        .map(|(start, len)| FlatBlock {
            start,
            len,
            max_abs: x.entries()[start..start + len]
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max),
        })
        .collect();
    let is_flat = blocks.iter().all(|b| b.max_abs >= threshold);
    Ok(FlatnessReport {
        m,
        is_flat,
        threshold,
        blocks,
    })
}

/// `|s_{k,j}|` from the real cosine expression, independent of
/// [`s_table`]. Row-major `d x (2 delta - 1)`, 0-based.
pub fn s_modulus_table(d: usize, delta: usize, a: f64) -> Result<Vec<f64>> {
    LiftedLayout::new(d, delta)?;
    let w = 2 * delta - 1;
    let e = |x: f64| x.exp();
    let mut out = Vec::with_capacity(d * w);
    for k in 0..d {
        let theta = 2.0 * PI * k as f64 / d as f64;
        let denom = 1.0 + e(-4.0 / a) - 2.0 * e(-2.0 / a) * theta.cos();
        for j1 in 1..=w {
            let (pre, n) = if j1 <= delta {
                (e(-((j1 + 1) as f64) / a), (delta + 1 - j1) as f64)
            } else {
                (e(-((2 * (delta + 1) - j1) as f64) / a), (j1 - delta) as f64)
            };
            let num = 1.0 + e(-4.0 * n / a) - 2.0 * e(-2.0 * n / a) * (n * theta).cos();
            out.push(pre * (num / denom).sqrt());
        }
    }
    Ok(out)
}

/// Lower bound `(7 / (20 a)) e^{-(delta+1)/a}` on every `|s_{k,j}|`.
pub fn singular_value_lower_bound(delta: usize, a: f64) -> f64 {
    7.0 / (20.0 * a) * (-((delta + 1) as f64) / a).exp()
}

/// Upper bound `3 a e^{-2/a}` on every `|s_{k,j}|`.
pub fn singular_value_upper_bound(a: f64) -> f64 {
    3.0 * a * (-2.0 / a).exp()
}

/// `max{144 e^2, (9 e^2 / 4) (delta - 1)^2}`, valid for the default damping.
pub fn kappa_bound(delta: usize) -> f64 {
    let dm1 = (delta - 1) as f64;
    f64::max(144.0 * E * E, 9.0 * E * E / 4.0 * dm1 * dm1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub kappa: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `(sigma_min, sigma_max)` for each block `J_k`.
    pub per_block: Vec<(f64, f64)>,
}

/// `kappa(M') = max_k sigma_1(J_k) / min_k sigma_min(J_k)`.
pub fn condition_number(sys: &LiftedSystem) -> Result<ConditionReport> {
    let c = sys.condition();
    c.check()?;
    Ok(ConditionReport {
        kappa: c.kappa(),
        sigma_min: c.sigma_min,
        sigma_max: c.sigma_max,
        per_block: c.per_block.clone(),
    })
}

/// Dense materializations of the measurement operator and the lifted system.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    pub d: usize,
    pub delta: usize,
    pub masks: usize,
    /// `L d x d`, mask-major rows: `M[l d + s, (s + k) mod d] = conj(m_l[k])`.
    pub m: DMatrix<Complex64>,
    /// `L d x (2 delta - 1) d`, block circulant with shift-major rows.
    pub m_prime: DMatrix<Complex64>,
    /// Block Fourier matrix acting on the row side (`alpha = L`).
    pub u_rows: DMatrix<Complex64>,
    /// Block Fourier matrix acting on the column side (`alpha = 2 delta - 1`).
    pub u_cols: DMatrix<Complex64>,
    /// `U_L^* M' U_{2 delta - 1}`.
    pub j: DMatrix<Complex64>,
}

/// Entry `(i, j)` of block `M'_l` (all indices 1-based, `i` selects the mask).
fn m_prime_entry(ensemble: &MaskEnsemble, l: usize, i: usize, j: usize) -> Complex64 {
    let delta = ensemble.delta();
    let m = |p: usize| ensemble.support(i - 1)[p - 1];
    if j + l <= delta + 1 {
        m(l) * m(j + l - 1).conj()
    } else if l < delta && j + l >= 2 * delta {
        m(l + 1) * m(l + j + 1 - 2 * delta).conj()
    } else {
        ZERO
    }
}

/// The block Fourier matrix `U_alpha` with `d x d` blocks
/// `I_alpha e^{2 pi i r c / d} / sqrt(d)`.
pub fn block_fourier(d: usize, alpha: usize) -> DMatrix<Complex64> {
    let scale = 1.0 / (d as f64).sqrt();
    DMatrix::from_fn(alpha * d, alpha * d, |r, c| {
        if r % alpha != c % alpha {
            return ZERO;
        }
        let (br, bc) = (r / alpha, c / alpha);
        Complex64::from_polar(scale, 2.0 * PI * ((br * bc) % d) as f64 / d as f64)
    })
}

pub fn dense_oracle(ensemble: &MaskEnsemble) -> Result<DenseOracle> {
    let (d, delta, masks) = (ensemble.d(), ensemble.delta(), ensemble.count());
    if d > DENSE_LIMIT {
        return Err(BlockPrError::TooLarge { d, limit: DENSE_LIMIT });
    }
    let w = 2 * delta - 1;
    let mut m = DMatrix::from_element(masks * d, d, ZERO);
    for l in 0..masks {
        for s in 0..d {
            for (k, v) in ensemble.support(l).iter().enumerate() {
                m[(l * d + s, (s + k) % d)] = v.conj();
            }
        }
    }
    let mut m_prime = DMatrix::from_element(masks * d, w * d, ZERO);
    for s in 0..d {
        for l in 1..=delta {
            let col_block = (s + l - 1) % d;
            for i in 1..=masks {
                for j in 1..=w {
                    m_prime[(s * masks + i - 1, col_block * w + j - 1)] = m_prime_entry(ensemble, l, i, j);
                }
            }
        }
    }
    let u_rows = block_fourier(d, masks);
    let u_cols = block_fourier(d, w);
    let j = u_rows.adjoint() * &m_prime * &u_cols;
    Ok(DenseOracle {
        d,
        delta,
        masks,
        m,
        m_prime,
        u_rows,
        u_cols,
        j,
    })
}

impl DenseOracle {
    /// Frobenius norm of `J` outside its `L x (2 delta - 1)` diagonal blocks.
    pub fn offblock_frobenius(&self) -> f64 {
        let w = 2 * self.delta - 1;
        let mut acc = 0.0;
        for r in 0..self.j.nrows() {
            for c in 0..self.j.ncols() {
                if r / self.masks != c / w {
                    acc += self.j[(r, c)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }

    /// Diagonal block `k` of `J`.
    pub fn block(&self, k: usize) -> DMatrix<Complex64> {
        let w = 2 * self.delta - 1;
        self.j.view((k * self.masks, k * w), (self.masks, w)).into_owned()
    }

    /// Singular-value condition number of the dense `M'`.
    pub fn kappa(&self) -> f64 {
        let sv = self.m_prime.singular_values();
        let hi = sv.iter().cloned().fold(0.0, f64::max);
        let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// One named numerical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyCheck {
    pub name: String,
    pub computed: f64,
    pub bound: f64,
    pub pass: bool,
}

impl VerifyCheck {
    fn at_most(name: impl Into<String>, computed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            computed,
            bound,
            pass: computed <= bound,
        }
    }

    fn at_least(name: impl Into<String>, computed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            computed,
            bound,
            pass: computed >= bound,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerifyOptions {
    /// Blend the first mask of each deterministic ensemble toward the second
    /// by this fraction before the conditioning checks (`0` leaves them
    /// untouched, `1` makes the system singular).
    pub perturbation: f64,
}

fn perturbed(ens: MaskEnsemble, t: f64) -> Result<MaskEnsemble> {
    if t == 0.0 {
        return Ok(ens);
    }
    let mut masks: Vec<Vec<Complex64>> = (0..ens.count()).map(|l| ens.support(l).to_vec()).collect();
    let target = masks[1].clone();
    for (v, u) in masks[0].iter_mut().zip(&target) {
        *v = *v * (1.0 - t) + u * t;
    }
    MaskEnsemble::from_masks(ens.d(), ens.delta(), masks)
}

fn kappa_or_inf(sys: &LiftedSystem) -> f64 {
    condition_number(sys).map(|c| c.kappa).unwrap_or(f64::INFINITY)
}

/// Fixture signal used by the verification suite.
pub fn fixture_signal() -> Signal {
    Signal::new(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(2.0, 0.0),
    ])
    .expect("valid fixture")
}

/// Run the built-in battery of structural and conditioning checks.
pub fn verify_suite(opts: VerifyOptions) -> Result<Vec<VerifyCheck>> {
    let mut checks = Vec::new();

    // Lifted ordering of the 4 x 2 example.
    let layout = LiftedLayout::new(4, 2)?;
    let listed = [
        (0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1),
        (2, 2), (2, 3), (3, 2), (3, 3), (3, 0), (0, 3),
    ];
    let mismatches = listed
        .iter()
        .enumerate()
        .filter(|(k, &(i, j))| layout.index(i, j).ok() != Some(*k))
        .count();
    checks.push(VerifyCheck::at_most("fixture_lifted_ordering", mismatches as f64, 0.0));

    // Factored first block row against the entrywise definition.
    let fixture = build_deterministic_masks(4, 2, None)?;
    let oracle = dense_oracle(&fixture)?;
    let row = first_block_row(&fixture);
    let mut diff = 0.0f64;
    for (l, block) in row.iter().enumerate() {
        let dense = oracle.m_prime.view((0, l * 3), (3, 3));
        diff = diff.max((block - dense).norm());
    }
    checks.push(VerifyCheck::at_most("fixture_m_prime_blocks", diff, 1e-14));

    // Block diagonalization and the lifted identity on small grids.
    let mut worst_offblock = 0.0f64;
    let mut worst_identity = 0.0f64;
    for (d, delta) in [(8, 2), (12, 3), (16, 4)] {
        let ens = build_deterministic_masks(d, delta, None)?;
        let oracle = dense_oracle(&ens)?;
        worst_offblock = worst_offblock.max(oracle.offblock_frobenius() / oracle.m_prime.norm());
        let x = crate::generate::gaussian_signal(d, d as u64);
        let y = crate::signal::LiftedVector::from_signal(&x, delta)?;
        let yv = nalgebra::DVector::from_column_slice(y.entries());
        let b = correlation_measure(&x, &ens)?;
        let pb = crate::lifted::interleave(b.entries(), ens.count())?;
        let pb = nalgebra::DVector::from_iterator(pb.len(), pb.iter().map(|&v| Complex64::new(v, 0.0)));
        worst_identity = worst_identity.max((&oracle.m_prime * yv - &pb).norm() / pb.norm());
    }
    checks.push(VerifyCheck::at_most("block_diagonalization", worst_offblock, 1e-10));
    checks.push(VerifyCheck::at_most("lifted_identity", worst_identity, 1e-10));

    // Closed form against direct summation.
    let ens = build_deterministic_masks(16, 3, None)?;
    let sys = assemble_blocks(&ens)?;
    let row = first_block_row(&ens);
    let closed = (0..16)
        .map(|k| (sys.block(k) - crate::lifted::block_by_summation(&row, k, 16)).norm())
        .fold(0.0, f64::max);
    checks.push(VerifyCheck::at_most("closed_form_blocks", closed, 1e-12));

    // Singular-value and condition-number bounds.
    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = 0.0f64;
    let mut worst_kappa = 0.0f64;
    for delta in 2..=24 {
        let a = default_damping(delta);
        let ens = perturbed(build_deterministic_masks(128, delta, Some(a))?, opts.perturbation)?;
        let sys = assemble_blocks(&ens)?;
        let c = sys.condition();
        worst_lower = worst_lower.min(c.sigma_min / singular_value_lower_bound(delta, a));
        worst_upper = worst_upper.max(c.sigma_max / singular_value_upper_bound(a));
        worst_kappa = worst_kappa.max(kappa_or_inf(&sys) / kappa_bound(delta));
    }
    checks.push(VerifyCheck::at_least("singular_value_lower_bound_ratio", worst_lower, 1.0));
    checks.push(VerifyCheck::at_most("singular_value_upper_bound_ratio", worst_upper, 1.0));
    checks.push(VerifyCheck::at_most("kappa_bound_ratio", worst_kappa, 1.0));

    // Independence of d.
    let mut worst_rel = 0.0f64;
    for delta in 2..=16 {
        let k64 = kappa_or_inf(&assemble_blocks(&build_deterministic_masks(64, delta, None)?)?);
        let k128 = kappa_or_inf(&assemble_blocks(&build_deterministic_masks(128, delta, None)?)?);
        worst_rel = worst_rel.max((k64 - k128).abs() / k128);
    }
    checks.push(VerifyCheck::at_most("kappa_independent_of_d", worst_rel, 1e-6));

    // Recovery of the fixture signal.
    let x = fixture_signal();
    let sys = assemble_blocks(&fixture)?;
    let rec = blockpr_recover(&correlation_measure(&x, &fixture)?, &sys)?;
    let err = global_phase_align(&x, &rec.signal)?.relative_l2()?;
    checks.push(VerifyCheck::at_most("fixture_recovery", err, 1e-10));

    Ok(checks)
}
