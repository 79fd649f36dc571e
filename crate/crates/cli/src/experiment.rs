use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use blockpr::{
    add_noise, assemble_blocks, block_partition, build_flattener, condition_number, correlation_measure,
    flat_signal, gaussian_signal, global_phase_align, is_m_flat, recover_arbitrary, residual_noise,
    solve_lifted, sparse_measure, sparse_recover, sparse_signal, BlockPrError, LiftedSystem, Result,
    Signal, SketchKind, SparseInner, SparsePipelineConfig,
};

use crate::config::{stream, Experiment, ExperimentConfig, MaskChoice};

/// One row of output: a single trial at a single grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub experiment: Experiment,
    pub d: usize,
    pub delta: Option<usize>,
    pub masks: Option<MaskChoice>,
    pub mask_count: Option<usize>,
    #[serde(with = "crate::config::snr_serde::option")]
    pub snr_db: Option<f64>,
    pub m: Option<usize>,
    pub s: Option<usize>,
    pub trial: usize,
    pub seed: u64,
    pub error_db: Option<f64>,
    pub abs_error: Option<f64>,
    pub rel_error: Option<f64>,
    pub kappa: Option<f64>,
    pub unreached: Option<usize>,
    pub noise_l2: Option<f64>,
    pub lifted_noise_inf: Option<f64>,
    pub flat: Option<bool>,
    pub unitarity_error: Option<f64>,
    /// Wall-clock seconds; excluded from reproducibility guarantees.
    pub solve_seconds: Option<f64>,
    pub status: String,
}

impl TrialResult {
    fn blank(cfg: &ExperimentConfig, d: usize, trial: usize, seed: u64) -> Self {
        Self {
            experiment: cfg.experiment,
            d,
            delta: None,
            masks: None,
            mask_count: None,
            snr_db: None,
            m: None,
            s: None,
            trial,
            seed,
            error_db: None,
            abs_error: None,
            rel_error: None,
            kappa: None,
            unreached: None,
            noise_l2: None,
            lifted_noise_inf: None,
            flat: None,
            unitarity_error: None,
            solve_seconds: None,
            status: "ok".into(),
        }
    }

    fn fail(mut self, err: BlockPrError) -> Self {
        self.status = format!("error: {err}");
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn set_error(&mut self, x: &Signal, estimate: &Signal) -> Result<()> {
        let e = global_phase_align(x, estimate)?;
        self.abs_error = Some(e.absolute_l2);
        self.rel_error = Some(e.relative_l2()?);
        self.error_db = Some(e.error_db()?);
        Ok(())
    }
}

/// Kind of summary row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Median,
}

/// Summary over the successful trials of one grid point. Every numeric field
/// is recomputed from the per-trial rows (flat is reported as a fraction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub statistic: Statistic,
    pub ok_trials: usize,
    pub row: TrialResult,
    pub unreached: Option<f64>,
    pub flat_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub aggregates: Vec<Aggregate>,
}

fn run_trials<F>(cfg: &ExperimentConfig, f: F) -> Vec<TrialResult>
where
    F: Fn(usize) -> TrialResult + Sync,
{
    (0..cfg.trials).into_par_iter().map(&f).collect()
}

fn test_signal(cfg: &ExperimentConfig, d: usize, trial: usize) -> Result<Signal> {
    let seed = cfg.trial_seed(stream::SIGNAL, trial);
    match cfg.flat_m {
        Some(m) => flat_signal(d, m, seed),
        None => Ok(gaussian_signal(d, seed)),
    }
}

fn shared_system(cfg: &ExperimentConfig, d: usize, delta: usize) -> Result<Option<LiftedSystem>> {
    match cfg.masks {
        MaskChoice::Det => Ok(Some(assemble_blocks(&cfg.ensemble(d, delta, 0)?)?)),
        MaskChoice::Rand => Ok(None),
    }
}

fn robustness_trial(
    cfg: &ExperimentConfig,
    shared: Option<&LiftedSystem>,
    d: usize,
    delta: usize,
    snr: f64,
    trial: usize,
) -> TrialResult {
    let mut row = TrialResult::blank(cfg, d, trial, cfg.trial_seed(stream::SIGNAL, trial));
    row.delta = Some(delta);
    row.masks = Some(cfg.masks);
    row.snr_db = Some(snr);
    let go = |row: &mut TrialResult| -> Result<()> {
        let ens = cfg.ensemble(d, delta, trial)?;
        row.mask_count = Some(ens.count());
        let owned;
        let sys = match shared {
            Some(s) => s,
            None => {
                owned = assemble_blocks(&ens)?;
                &owned
            }
        };
        row.kappa = Some(sys.condition().kappa());
        let x = test_signal(cfg, d, trial)?;
        let w = if cfg.flatten {
            build_flattener(d, cfg.trial_seed(stream::FLATTEN, trial))?
        } else {
            blockpr::FlatteningOperator::identity(d)?
        };
        let b = correlation_measure(&w.apply(&x)?, &ens)?;
        let noisy = add_noise(&b, snr, cfg.trial_seed(stream::NOISE, trial))?;
        row.noise_l2 = Some(noisy.noise.iter().map(|v| v * v).sum::<f64>().sqrt());
        row.lifted_noise_inf = Some(residual_noise(sys, &noisy.noise)?.inf_norm);
        let start = Instant::now();
        let rec = recover_arbitrary(&noisy.noisy, sys, &w)?;
        row.solve_seconds = Some(start.elapsed().as_secs_f64());
        row.unreached = Some(rec.diagnostics.unreached.len());
        row.set_error(&x, &rec.signal)
    };
    match go(&mut row) {
        Ok(()) => row,
        Err(e) => row.fail(e),
    }
}

fn robustness(cfg: &ExperimentConfig) -> Result<Vec<Vec<TrialResult>>> {
    let mut points = Vec::new();
    for &d in &cfg.d {
        for &delta in &cfg.delta {
            let shared = shared_system(cfg, d, delta)?;
            for &snr in &cfg.snr_db {
                points.push(run_trials(cfg, |t| robustness_trial(cfg, shared.as_ref(), d, delta, snr, t)));
            }
        }
    }
    Ok(points)
}

fn runtime(cfg: &ExperimentConfig) -> Result<Vec<Vec<TrialResult>>> {
    let mut points = Vec::new();
    for &d in &cfg.d {
        for &delta in &cfg.delta {
            let ens = cfg.ensemble(d, delta, 0)?;
            let sys = assemble_blocks(&ens)?;
            let x = test_signal(cfg, d, 0)?;
            let b = correlation_measure(&x, &ens)?;
            // Timed sequentially so concurrent trials do not distort each other.
            let rows = (0..cfg.trials)
                .map(|trial| {
                    let mut row = TrialResult::blank(cfg, d, trial, cfg.trial_seed(stream::SIGNAL, 0));
                    row.delta = Some(delta);
                    row.masks = Some(cfg.masks);
                    row.mask_count = Some(ens.count());
                    let start = Instant::now();
                    let y = solve_lifted(&sys, &b);
                    row.solve_seconds = Some(start.elapsed().as_secs_f64());
                    match y {
                        Ok(_) => {
                            row.kappa = Some(sys.condition().kappa());
                            row
                        }
                        Err(e) => row.fail(e),
                    }
                })
                .collect();
            points.push(rows);
        }
    }
    Ok(points)
}

fn condno(cfg: &ExperimentConfig) -> Result<Vec<Vec<TrialResult>>> {
    let mut points = Vec::new();
    for &d in &cfg.d {
        for &delta in &cfg.delta {
            points.push(run_trials(cfg, |trial| {
                let mut row = TrialResult::blank(cfg, d, trial, cfg.trial_seed(stream::MASKS, trial));
                row.delta = Some(delta);
                row.masks = Some(cfg.masks);
                let go = |row: &mut TrialResult| -> Result<()> {
                    let ens = cfg.ensemble(d, delta, trial)?;
                    row.mask_count = Some(ens.count());
                    row.kappa = Some(condition_number(&assemble_blocks(&ens)?)?.kappa);
                    Ok(())
                };
                match go(&mut row) {
                    Ok(()) => row,
                    Err(e) => row.fail(e),
                }
            }));
        }
    }
    Ok(points)
}

fn flatness(cfg: &ExperimentConfig) -> Result<Vec<Vec<TrialResult>>> {
    let m = cfg.m.unwrap_or(64);
    let mut points = Vec::new();
    for &d in &cfg.d {
        block_partition(d, m)?;
        points.push(run_trials(cfg, |trial| {
            let mut row = TrialResult::blank(cfg, d, trial, cfg.trial_seed(stream::SIGNAL, trial));
            row.m = Some(m);
            let go = |row: &mut TrialResult| -> Result<()> {
                let x = test_signal(cfg, d, trial)?;
                let w = build_flattener(d, cfg.trial_seed(stream::FLATTEN, trial))?;
                let wx = w.apply(&x)?;
                row.unitarity_error = Some((wx.norm() - x.norm()).abs() / x.norm());
                row.flat = Some(is_m_flat(&wx, m)?.is_flat);
                Ok(())
            };
            match go(&mut row) {
                Ok(()) => row,
                Err(e) => row.fail(e),
            }
        }));
    }
    Ok(points)
}

fn sparse(cfg: &ExperimentConfig) -> Result<Vec<Vec<TrialResult>>> {
    let m = cfg.m.unwrap_or(64);
    let s = cfg.s.unwrap_or(4);
    let mut points = Vec::new();
    for &d in &cfg.d {
        sparse_signal(d, s, 0)?;
        let mut probe = SparsePipelineConfig::new(s, m, 0);
        if let Some(&delta) = cfg.delta.first() {
            probe.inner_delta = delta;
        }
        SparseInner::new(d, &probe)?;
        for &snr in &cfg.snr_db {
            points.push(run_trials(cfg, |trial| {
                let mut row = TrialResult::blank(cfg, d, trial, cfg.trial_seed(stream::SIGNAL, trial));
                row.m = Some(m);
                row.s = Some(s);
                row.snr_db = Some(snr);
                let go = |row: &mut TrialResult| -> Result<()> {
                    let mut pc = SparsePipelineConfig::new(s, m, cfg.trial_seed(stream::SKETCH, trial));
                    pc.flatten_seed = cfg.trial_seed(stream::FLATTEN, trial);
                    if let Some(&delta) = cfg.delta.first() {
                        pc.inner_delta = delta;
                    }
                    if cfg.masks == MaskChoice::Rand {
                        pc.sketch = SketchKind::Gaussian { seed: cfg.trial_seed(stream::SKETCH, trial) };
                    }
                    row.delta = Some(pc.inner_delta);
                    let inner = SparseInner::new(d, &pc)?;
                    row.kappa = Some(inner.system.condition().kappa());
                    let x = sparse_signal(d, s, cfg.trial_seed(stream::SIGNAL, trial))?;
                    let b = sparse_measure(&x, &inner)?;
                    let noisy = add_noise(&b, snr, cfg.trial_seed(stream::NOISE, trial))?;
                    row.noise_l2 = Some(noisy.noise.iter().map(|v| v * v).sum::<f64>().sqrt());
                    let start = Instant::now();
                    let xh = sparse_recover(&noisy.noisy, &pc, &inner)?;
                    row.solve_seconds = Some(start.elapsed().as_secs_f64());
                    row.set_error(&x, &xh)
                };
                match go(&mut row) {
                    Ok(()) => row,
                    Err(e) => row.fail(e),
                }
            }));
        }
    }
    Ok(points)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}

/// Summary rows of one grid point.
pub fn aggregate(rows: &[TrialResult]) -> Vec<Aggregate> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let ok: Vec<&TrialResult> = rows.iter().filter(|r| r.is_ok()).collect();
    let collect = |f: &dyn Fn(&TrialResult) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
    let columns: [Vec<f64>; 8] = [
        collect(&|r| r.error_db),
        collect(&|r| r.abs_error),
        collect(&|r| r.rel_error),
        collect(&|r| r.kappa),
        collect(&|r| r.unreached.map(|u| u as f64)),
        collect(&|r| r.noise_l2),
        collect(&|r| r.lifted_noise_inf),
        collect(&|r| r.unitarity_error),
    ];
    let seconds = collect(&|r| r.solve_seconds);
    let flats: Vec<f64> = collect(&|r| r.flat.map(|f| if f { 1.0 } else { 0.0 }));
    [Statistic::Mean, Statistic::Median]
        .into_iter()
        .map(|stat| {
            let reduce = match stat {
                Statistic::Mean => mean,
                Statistic::Median => median,
            };
            let mut row = first.clone();
            row.trial = 0;
            row.seed = 0;
            row.error_db = reduce(&columns[0]);
            row.abs_error = reduce(&columns[1]);
            row.rel_error = reduce(&columns[2]);
            row.kappa = reduce(&columns[3]);
            row.unreached = None;
            row.noise_l2 = reduce(&columns[5]);
            row.lifted_noise_inf = reduce(&columns[6]);
            row.unitarity_error = reduce(&columns[7]);
            row.solve_seconds = reduce(&seconds);
            row.flat = None;
            row.status = "ok".into();
            Aggregate {
                statistic: stat,
                ok_trials: ok.len(),
                row,
                unreached: reduce(&columns[4]),
                flat_fraction: mean(&flats),
            }
        })
        .collect()
}

/// Execute the configured grid. Rows are ordered by grid point then trial
/// index, independent of how trials were scheduled.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.trials == 0 {
        return Err(BlockPrError::Domain("trials must be positive".into()));
    }
    if cfg.d.is_empty() {
        return Err(BlockPrError::Domain("at least one d is required".into()));
    }
    let uses_delta = matches!(
        cfg.experiment,
        Experiment::Robustness | Experiment::Runtime | Experiment::Condno
    );
    if uses_delta && cfg.delta.is_empty() {
        return Err(BlockPrError::Domain("at least one delta is required".into()));
    }
    if let Some(m) = cfg.flat_m {
        for &d in &cfg.d {
            flat_signal(d, m, 0)?;
        }
    }
    let points = match cfg.experiment {
        Experiment::Robustness => robustness(cfg)?,
        Experiment::Runtime => runtime(cfg)?,
        Experiment::Condno => condno(cfg)?,
        Experiment::Flatness => flatness(cfg)?,
        Experiment::Sparse => sparse(cfg)?,
        Experiment::Verify | Experiment::Recover => {
            return Err(BlockPrError::Domain(format!(
                "{} is not a grid experiment",
                cfg.experiment.name()
            )))
        }
    };
    let aggregates = points.iter().flat_map(|p| aggregate(p)).collect();
    Ok(ExperimentOutput {
        config: cfg.clone(),
        trials: points.into_iter().flatten().collect(),
        aggregates,
    })
}
