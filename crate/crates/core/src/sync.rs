//! Greedy angular synchronization and the end-to-end recovery pipeline.
//!
//! The lifted estimate `y~` carries `conj(x_i) x_j` for nearby pairs. Phases
//! are propagated from the entry of largest magnitude (the anchor): each
//! reference `j` assigns every unset neighbor `t` within distance `delta - 1`
//! the phase `phi_j + (arg y~(j,t) - arg y~(t,j)) / 2`, and the reference then
//! jumps forward to the strongest diagonal entry among its next `delta - 1`
//! neighbors.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{BlockPrError, Result};
use crate::lifted::{solve_lifted, LiftedSystem};
use crate::masks::FlatteningOperator;
use crate::signal::{LiftedVector, MeasurementVector, Signal};

/// Why the propagation loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncExit {
    /// The forward window of the current reference was fully assigned.
    WindowComplete,
    /// The reference advanced `d` times without completing a window.
    AdvanceLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncOutcome {
    /// Phase estimates relative to the anchor, in radians.
    pub phases: Vec<f64>,
    /// Entries whose phase could not be tied back to the anchor through
    /// nonzero lifted products; their phase is reported as 0.
    pub unreached: Vec<usize>,
    pub anchor: usize,
    /// Sequence of reference indices, starting with the anchor.
    pub visit_order: Vec<usize>,
    /// For each entry, the reference that set it (`None` for the anchor).
    pub parent: Vec<Option<usize>>,
    pub exit: SyncExit,
}

fn arg(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.arg()
    }
}

/// Wrap an angle into `(-pi, pi]`.
fn wrap(theta: f64) -> f64 {
    let r = (theta + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Phase difference `phi_t - phi_j` from the two conjugate lifted entries.
///
/// Halving the difference of the two arguments is only defined modulo `pi`;
/// the branch closer to `arg y~(j,t)` is kept.
fn symmetrized_difference(forward: Complex64, backward: Complex64) -> f64 {
    let half = 0.5 * wrap(arg(forward) - arg(backward));
    if wrap(half - arg(forward)).abs() > PI / 2.0 {
        wrap(half + PI)
    } else {
        half
    }
}

/// Run the greedy synchronization on a lifted estimate.
pub fn synchronize(y: &LiftedVector) -> SyncOutcome {
    let layout = y.layout();
    let (d, delta) = (layout.d(), layout.delta());
    let diag: Vec<f64> = (0..d).map(|j| y.diagonal(j).norm()).collect();
    let anchor = argmax_lowest(diag.iter().copied());

    let mut phases = vec![0.0; d];
    let mut set = vec![false; d];
    let mut reliable = vec![false; d];
    let mut parent = vec![None; d];
    set[anchor] = true;
    reliable[anchor] = diag[anchor] > 0.0;

    let entry = |i: usize, o: isize| y.entries()[layout.index_unchecked(i, o)];
    let window_open = |j: usize, set: &[bool]| (1..delta).any(|i| !set[(j + i) % d]);

    let mut j = anchor;
    let mut visit_order = vec![anchor];
    let mut advances = 0;
    let exit = loop {
        if !window_open(j, &set) {
            break SyncExit::WindowComplete;
        }
        if advances >= d {
            break SyncExit::AdvanceLimit;
        }
        for i in 1 - delta as isize..delta as isize {
            let t = (j as isize + i).rem_euclid(d as isize) as usize;
            if set[t] {
                continue;
            }
            let forward = entry(j, i);
            let backward = entry(t, -i);
            phases[t] = phases[j] + symmetrized_difference(forward, backward);
            set[t] = true;
            parent[t] = Some(j);
            reliable[t] = reliable[j] && forward != Complex64::new(0.0, 0.0) && backward != Complex64::new(0.0, 0.0);
        }
        let step = 1 + argmax_lowest((1..delta).map(|i| diag[(j + i) % d]));
        j = (j + step) % d;
        visit_order.push(j);
        advances += 1;
    };

    let mut unreached = Vec::new();
    for t in 0..d {
        if !set[t] || !reliable[t] {
            phases[t] = 0.0;
            unreached.push(t);
        } else {
            phases[t] = wrap(phases[t]);
        }
    }
    SyncOutcome {
        phases,
        unreached,
        anchor,
        visit_order,
        parent,
        exit,
    }
}

/// `|x~_j| = sqrt(|y~(j,j)|)`.
pub fn magnitudes(y: &LiftedVector) -> Vec<f64> {
    (0..y.layout().d()).map(|j| y.diagonal(j).norm().sqrt()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryDiagnostics {
    pub anchor: usize,
    pub unreached: Vec<usize>,
    pub exit: SyncExit,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub signal: Signal,
    pub lifted: LiftedVector,
    pub diagnostics: RecoveryDiagnostics,
}

/// Solve the lifted system, synchronize phases, and assemble `x~`.
pub fn blockpr_recover(b: &MeasurementVector, sys: &LiftedSystem) -> Result<Recovery> {
    let lifted = solve_lifted(sys, b)?;
    let sync = synchronize(&lifted);
    let mags = magnitudes(&lifted);
    let signal = Signal::new(
        mags.iter()
            .zip(&sync.phases)
            .map(|(&r, &phi)| Complex64::from_polar(r, phi))
            .collect(),
    )?;
    let cond = sys.condition();
    Ok(Recovery {
        signal,
        lifted,
        diagnostics: RecoveryDiagnostics {
            anchor: sync.anchor,
            unreached: sync.unreached,
            exit: sync.exit,
            sigma_min: cond.sigma_min,
            sigma_max: cond.sigma_max,
            kappa: cond.kappa(),
        },
    })
}

/// Recover `x` from measurements of `W x`: run [`blockpr_recover`] and map the
/// result back through `W^*`.
pub fn recover_arbitrary(
    b: &MeasurementVector,
    sys: &LiftedSystem,
    w: &FlatteningOperator,
) -> Result<Recovery> {
    if w.d() != sys.d() {
        return Err(BlockPrError::DimensionMismatch {
            expected: sys.d(),
            found: w.d(),
        });
    }
    let mut rec = blockpr_recover(b, sys)?;
    rec.signal = w.apply_inverse(&rec.signal)?;
    Ok(rec)
}
