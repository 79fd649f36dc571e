//! CSV and JSON rendering of experiment results.
//!
//! CSV layout (schema v1): a `# blockpr-csv v1 experiment=<name>` comment,
//! then a header line, one row per trial in grid order, then two summary
//! rows per grid point whose `trial` column is `mean` or `median`. Empty cells
//! mean "not applicable". Only `solve_seconds` varies between identical runs.

use std::io::{self, Write};

use crate::experiment::{Aggregate, ExperimentOutput, Statistic, TrialResult};

pub const CSV_SCHEMA: &str = "blockpr-csv v1";
pub const JSON_SCHEMA: &str = "blockpr-results/1";

pub const COLUMNS: [&str; 21] = [
    "experiment",
    "d",
    "delta",
    "masks",
    "mask_count",
    "snr_db",
    "m",
    "s",
    "trial",
    "seed",
    "error_db",
    "abs_error",
    "rel_error",
    "kappa",
    "unreached",
    "noise_l2",
    "lifted_noise_inf",
    "flat",
    "unitarity_error",
    "solve_seconds",
    "status",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn float(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) if x == f64::INFINITY => "inf".into(),
        Some(x) if x == f64::NEG_INFINITY => "-inf".into(),
        Some(x) => format!("{x:e}"),
    }
}

fn cells(r: &TrialResult, trial: String, unreached: String, flat: String) -> Vec<String> {
    vec![
        r.experiment.name().to_string(),
        r.d.to_string(),
        opt(r.delta),
        r.masks.map(|m| format!("{m:?}").to_lowercase()).unwrap_or_default(),
        opt(r.mask_count),
        float(r.snr_db),
        opt(r.m),
        opt(r.s),
        trial,
        r.seed.to_string(),
        float(r.error_db),
        float(r.abs_error),
        float(r.rel_error),
        float(r.kappa),
        unreached,
        float(r.noise_l2),
        float(r.lifted_noise_inf),
        flat,
        float(r.unitarity_error),
        float(r.solve_seconds),
        r.status.replace(',', ";"),
    ]
}

fn trial_cells(r: &TrialResult) -> Vec<String> {
    let flat = r.flat.map(|f| if f { "1" } else { "0" }.to_string()).unwrap_or_default();
    cells(r, r.trial.to_string(), opt(r.unreached), flat)
}

fn aggregate_cells(a: &Aggregate) -> Vec<String> {
    let name = match a.statistic {
        Statistic::Mean => "mean",
        Statistic::Median => "median",
    };
    let mut row = cells(&a.row, name.into(), float(a.unreached), float(a.flat_fraction));
    let last = row.len() - 1;
    row[last] = format!("ok_trials={}", a.ok_trials);
    row
}

pub fn write_csv<W: Write>(out: &ExperimentOutput, mut w: W) -> io::Result<()> {
    writeln!(w, "# {CSV_SCHEMA} experiment={}", out.config.experiment.name())?;
    writeln!(w, "{}", COLUMNS.join(","))?;
    for r in &out.trials {
        writeln!(w, "{}", trial_cells(r).join(","))?;
    }
    for a in &out.aggregates {
        writeln!(w, "{}", aggregate_cells(a).join(","))?;
    }
    Ok(())
}

pub fn write_json<W: Write>(out: &ExperimentOutput, w: W) -> io::Result<()> {
    let doc = serde_json::json!({
        "schema": JSON_SCHEMA,
        "config": out.config,
        "trials": out.trials,
        "aggregates": out.aggregates,
    });
    serde_json::to_writer_pretty(w, &doc).map_err(io::Error::other)
}
