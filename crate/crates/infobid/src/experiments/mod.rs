//! Reproducible experiment pipelines. Each `run` is a pure function of its
//! config; `write` emits CSV tables with a header row plus a flat JSON summary.

use std::path::Path;

use serde_json::{Map, Value};

use crate::error::Result;

pub mod bounds;
pub mod exp1;
pub mod exp2;
pub mod exp3;
pub mod exp4;
pub mod toy;

pub trait Report {
    /// Flat key/value summary.
    fn summary(&self) -> Map<String, Value>;

    /// Write CSV artifacts and `summary.json` into `out`.
    fn write(&self, out: &Path) -> Result<()>;

    /// Hard invariants that failed during the run. Empty when all held.
    fn invariant_failures(&self) -> Vec<String>;
}

pub(crate) fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_summary(out: &Path, summary: &Map<String, Value>) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(out.join("summary.json"), text + "\n")?;
    Ok(())
}

pub(crate) fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub(crate) fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}
