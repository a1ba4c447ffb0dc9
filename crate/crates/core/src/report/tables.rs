//! CSV tables: screening summaries, plan comparisons and convergence traces.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::contingency::ScreeningReport;
use crate::error::Result;
use crate::ga::GAResult;

/// Counts bytes passed through to the inner writer.
struct Counting<W> {
    inner: W,
    bytes: usize,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn csv_writer<W: Write>(sink: W) -> csv::Writer<Counting<W>> {
    csv::WriterBuilder::new().from_writer(Counting { inner: sink, bytes: 0 })
}

fn finish<W: Write>(w: csv::Writer<Counting<W>>) -> Result<usize> {
    let inner = w.into_inner().map_err(|e| e.into_error())?;
    Ok(inner.bytes)
}

/// Rounds to `decimals` places and prints without trailing zeros.
fn round_str(x: f64, decimals: i32) -> String {
    let scale = 10f64.powi(decimals);
    let r = (x * scale).round() / scale + 0.0;
    format!("{r}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRow {
    pub approach: String,
    pub n_infeasible: usize,
    pub n_solution: usize,
    pub n_no_instability: usize,
    /// Whole seconds.
    pub runtime_s: u64,
}

impl From<&ScreeningReport> for ScreeningRow {
    fn from(r: &ScreeningReport) -> Self {
        ScreeningRow {
            approach: r.approach.clone(),
            n_infeasible: r.n_infeasible,
            n_solution: r.n_solution,
            n_no_instability: r.n_no_instability,
            runtime_s: r.runtime_s.round() as u64,
        }
    }
}

/// Header `approach,n_infeasible,n_solution,n_no_instability,runtime_s` and
/// one row per entry. Returns the number of bytes written.
pub fn write_screening_csv<W: Write>(rows: &[ScreeningRow], sink: W) -> Result<usize> {
    let mut w = csv_writer(sink);
    w.write_record(["approach", "n_infeasible", "n_solution", "n_no_instability", "runtime_s"])?;
    for r in rows {
        w.write_record([
            r.approach.clone(),
            r.n_infeasible.to_string(),
            r.n_solution.to_string(),
            r.n_no_instability.to_string(),
            r.runtime_s.to_string(),
        ])?;
    }
    finish(w)
}

pub fn read_screening_csv<R: Read>(source: R) -> Result<Vec<ScreeningRow>> {
    let mut rdr = csv::Reader::from_reader(source);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialShed {
    pub load: usize,
    pub fraction: f64,
    pub importance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub line: usize,
    pub partial_shed_mw: f64,
    pub partial: Vec<PartialShed>,
    pub binary_shed_mw: f64,
    pub binary_loads: Vec<usize>,
}

impl ComparisonRow {
    /// Builds a row from a fractional and a binary plan for the same outage.
    pub fn from_results(line: usize, partial: &GAResult, binary: &GAResult, with_importance: bool) -> Self {
        ComparisonRow {
            line,
            partial_shed_mw: partial.shed_mw,
            partial: partial
                .shed_loads
                .iter()
                .map(|s| PartialShed {
                    load: s.load,
                    fraction: s.fraction,
                    importance: with_importance.then_some(s.importance),
                })
                .collect(),
            binary_shed_mw: binary.shed_mw,
            binary_loads: binary.shed_loads.iter().map(|s| s.load).collect(),
        }
    }

    /// Assignment cell such as `4(0.9)|9(0.9)` or `0(0.3,0.794)`.
    pub fn partial_cell(&self) -> String {
        self.partial
            .iter()
            .map(|p| match p.importance {
                Some(imp) => format!("{}({},{})", p.load, round_str(p.fraction, 3), round_str(imp, 3)),
                None => format!("{}({})", p.load, round_str(p.fraction, 3)),
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Columns `line,partial_shed_mw,partial_loads,binary_shed_mw,binary_loads`;
/// shed totals are rounded to one decimal.
pub fn write_comparison_table<W: Write>(rows: &[ComparisonRow], sink: W) -> Result<usize> {
    let mut w = csv_writer(sink);
    w.write_record(["line", "partial_shed_mw", "partial_loads", "binary_shed_mw", "binary_loads"])?;
    for r in rows {
        w.write_record([
            r.line.to_string(),
            round_str(r.partial_shed_mw, 1),
            r.partial_cell(),
            round_str(r.binary_shed_mw, 1),
            r.binary_loads.iter().map(ToString::to_string).collect::<Vec<_>>().join("|"),
        ])?;
    }
    finish(w)
}

/// Two columns, `generation,best_fitness`.
pub fn export_convergence<W: Write>(history: &[f64], sink: W) -> Result<usize> {
    let mut w = csv_writer(sink);
    w.write_record(["generation", "best_fitness"])?;
    for (g, v) in history.iter().enumerate() {
        w.write_record([g.to_string(), v.to_string()])?;
    }
    finish(w)
}

/// Several runs as separate series: `series,generation,best_fitness`.
pub fn export_convergence_series<W: Write>(series: &[(String, Vec<f64>)], sink: W) -> Result<usize> {
    let mut w = csv_writer(sink);
    w.write_record(["series", "generation", "best_fitness"])?;
    for (name, history) in series {
        for (g, v) in history.iter().enumerate() {
            w.write_record([name.clone(), g.to_string(), v.to_string()])?;
        }
    }
    finish(w)
}
