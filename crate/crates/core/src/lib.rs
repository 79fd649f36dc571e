//! Phase retrieval from local correlation measurements.
//!
//! A signal `x` in `C^d` is measured through squared magnitudes of its
//! circular correlations with a few masks supported on `delta` consecutive
//! entries. The measurements are linear in the local products
//! `conj(x_i) x_j`, `|i - j mod d| < delta`; the resulting block-circulant
//! system is solved with FFTs, and a greedy angular synchronization turns the
//! products back into `x` up to a global phase.
//!
//! ```
//! use blockpr::{assemble_blocks, blockpr_recover, build_deterministic_masks,
//!               correlation_measure, gaussian_signal, global_phase_align};
//!
//! let x = gaussian_signal(64, 7);
//! let masks = build_deterministic_masks(64, 6, None).unwrap();
//! let b = correlation_measure(&x, &masks).unwrap();
//! let system = assemble_blocks(&masks).unwrap();
//! let recovered = blockpr_recover(&b, &system).unwrap();
//! let err = global_phase_align(&x, &recovered.signal).unwrap();
//! assert!(err.relative_l2().unwrap() < 1e-8);
//! ```

pub mod analysis;
pub mod error;
pub mod generate;
pub mod lifted;
pub mod masks;
pub mod rng;
pub mod signal;
pub mod sparse;
pub mod sync;

pub use num_complex::Complex64;

pub use analysis::{
    block_partition, condition_number, dense_oracle, is_m_flat, kappa_bound, s_table, verify_suite,
    ConditionReport, DenseOracle, FlatnessReport, VerifyCheck, VerifyOptions,
};
pub use error::{BlockPrError, Result};
pub use generate::{flat_signal, gaussian_signal, sparse_signal};
pub use lifted::{
    assemble_blocks, assemble_generic, deinterleave, interleave, residual_noise, solve_lifted,
    ConditionSummary, Factorization, LiftedSystem, ResidualNoise,
};
pub use masks::{
    add_noise, build_deterministic_masks, build_flattener, build_random_masks, correlation_measure,
    default_damping, EnsembleDescriptor, FlatteningOperator, MaskEnsemble, MaskKind, NoisyMeasurement,
};
pub use rng::{derive_seed, rng_from_seed};
pub use signal::{
    global_phase_align, lifted_index, snr_to_noise_variance, GlobalPhaseError, LiftedLayout, LiftedVector,
    MeasurementVector, Signal,
};
pub use sparse::{
    sparse_measure, sparse_recover, sparse_recover_with, NormalizedIht, Sketch, SketchKind, SparseDecoder,
    SparseInner, SparsePipelineConfig,
};
pub use sync::{
    blockpr_recover, magnitudes, recover_arbitrary, synchronize, Recovery, RecoveryDiagnostics, SyncExit,
    SyncOutcome,
};
