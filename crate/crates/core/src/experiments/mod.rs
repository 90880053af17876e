//! Configuration-driven experiments: convergence runs, gamma sweeps and the
//! lower-bound demonstration. Every run yields CSV rows plus a JSON manifest.

mod aggregate;
mod config;
mod convergence;
mod lower_bound;

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use aggregate::{emit_plot_data, AggregateRow};
pub use config::{
    EstimatorKind, Equation, ExperimentConfig, HardSystem, KernelConfig, KernelFamily, LowerBoundConfig,
    OracleKind, ResolvedKernel,
};
pub use convergence::{run_convergence_experiment, run_gamma_sweep};
pub use lower_bound::run_lower_bound_demo;

use crate::error::Result;

/// One line of `results.csv`. Unset fields are written empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub kernel: String,
    pub gamma: Option<f64>,
    pub n: Option<usize>,
    pub trial: Option<usize>,
    pub estimator: String,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub manifest: serde_json::Value,
}

impl ExperimentOutput {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows, out)
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Writes `results.csv` and `manifest.json` into `dir`, creating it if needed.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_csv(fs::File::create(dir.join("results.csv"))?)?;
        let mut f = fs::File::create(dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(&mut f, &self.manifest)?;
        writeln!(f)?;
        Ok(())
    }
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    // Header-only output when there are no rows.
    if rows.is_empty() {
        w.write_record(["experiment", "kernel", "gamma", "n", "trial", "estimator", "metric", "value", "stderr", "seed"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}
