//! Shared inputs for the benchmarks.

use blockpr::{
    assemble_blocks, build_deterministic_masks, build_random_masks, correlation_measure, gaussian_signal,
    LiftedSystem, MaskEnsemble, MeasurementVector, Result,
};

/// A measured random signal together with its ensemble and assembled system.
pub struct Workload {
    pub ensemble: MaskEnsemble,
    pub system: LiftedSystem,
    pub measurements: MeasurementVector,
}

impl Workload {
    /// Deterministic masks, or oversampled Gaussian masks when `gamma` is given.
    pub fn new(d: usize, delta: usize, gamma: Option<f64>) -> Result<Self> {
        let ensemble = match gamma {
            Some(g) => build_random_masks(d, delta, g, 11)?,
            None => build_deterministic_masks(d, delta, None)?,
        };
        let system = assemble_blocks(&ensemble)?;
        let measurements = correlation_measure(&gaussian_signal(d, 5), &ensemble)?;
        Ok(Self {
            ensemble,
            system,
            measurements,
        })
    }
}
