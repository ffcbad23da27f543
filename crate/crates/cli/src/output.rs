//! results.csv, summary.json and plotdata/*.csv.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::experiments::{Outcome, Plot, Verdict};

/// Bumped whenever the column set below changes.
pub const RESULTS_VERSION: u32 = 1;
pub const RESULTS_COLUMNS: [&str; 7] = ["experiment", "n", "dim", "index", "t", "metric", "value"];

#[derive(Serialize)]
struct Summary<'a> {
    format_version: u32,
    experiment: &'a str,
    seed: u64,
    pass: bool,
    verdicts: &'a [Verdict],
    fitted: &'a BTreeMap<String, Value>,
    error: Option<&'a str>,
    config: &'a ExperimentConfig,
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Shortest round-trip formatting keeps identical runs byte-identical.
fn num(v: f64) -> String {
    format!("{v}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_results(path: &Path, experiment: &str, out: &Outcome) -> io::Result<()> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    writeln!(file, "# splmart results v{RESULTS_VERSION}: {}", RESULTS_COLUMNS.join(","))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(RESULTS_COLUMNS).map_err(csv_err)?;
    for r in &out.rows {
        w.write_record([
            experiment.to_string(),
            opt(r.n),
            opt(r.dim),
            opt(r.index),
            r.t.map(num).unwrap_or_default(),
            r.metric.to_string(),
            num(r.value),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

fn write_plot(dir: &Path, plot: &Plot) -> io::Result<()> {
    let mut file = io::BufWriter::new(fs::File::create(dir.join(format!("{}.csv", plot.name)))?);
    writeln!(file, "# splmart plotdata v{RESULTS_VERSION}: {}", plot.columns.join(","))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(&plot.columns).map_err(csv_err)?;
    for row in &plot.rows {
        w.write_record(row.iter().map(|v| num(*v))).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_all(dir: &Path, config: &ExperimentConfig, seed: u64, out: &Outcome) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let name = config.experiment.name();
    write_results(&dir.join("results.csv"), name, out)?;
    let summary = Summary {
        format_version: RESULTS_VERSION,
        experiment: name,
        seed,
        pass: out.pass(),
        verdicts: &out.verdicts,
        fitted: &out.fitted,
        error: out.error.as_deref(),
        config,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    if !out.plots.is_empty() {
        let plots = dir.join("plotdata");
        fs::create_dir_all(&plots)?;
        for p in &out.plots {
            write_plot(&plots, p)?;
        }
    }
    Ok(())
}
