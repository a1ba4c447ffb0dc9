use serde::{Deserialize, Serialize};

use super::newton::{LoadingBasis, PowerFlowModel, PowerFlowSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::grid::{Line, Network};

/// Slack on the 100 % and voltage-band comparisons so that values sitting
/// exactly on a limit are not flipped by rounding.
const LIMIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub safe: bool,
    /// `(line id, loading %)` for every in-service line above 100 %.
    pub line_violations: Vec<(usize, f64)>,
    /// `(bus id, |V|)` for every energized load bus outside its band.
    pub voltage_violations: Vec<(u32, f64)>,
    pub nonconverged: bool,
    /// Largest loading over in-service lines (0 when not converged).
    pub max_loading_percent: f64,
}

impl SafetyReport {
    fn nonconverged() -> Self {
        SafetyReport {
            safe: false,
            line_violations: Vec::new(),
            voltage_violations: Vec::new(),
            nonconverged: true,
            max_loading_percent: 0.0,
        }
    }
}

/// Loading of `line` as a percentage of its rating. Out-of-service lines
/// carry nothing.
pub fn line_loading_percent(sol: &PowerFlowSolution, line: &Line, basis: LoadingBasis) -> Result<f64> {
    if !sol.converged {
        return Err(Error::NotConverged);
    }
    Ok(sol
        .line_flow(line.id)
        .map_or(0.0, |f| f.loading_percent(line.rating_mva, basis)))
}

/// Checks a solved network: every in-service line at or below 100 % and
/// every energized load bus inside `[v_min, v_max]` (when
/// `check_voltage` is set).
pub fn assess(net: &Network, sol: &PowerFlowSolution, opts: &SolverOptions) -> SafetyReport {
    if !sol.converged {
        return SafetyReport::nonconverged();
    }
    let mut line_violations = Vec::new();
    let mut max_loading: f64 = 0.0;
    for flow in &sol.line_flows {
        let line = net.line(flow.id).expect("flow for known line");
        let pct = flow.loading_percent(line.rating_mva, opts.loading);
        max_loading = max_loading.max(pct);
        if pct > 100.0 + LIMIT_EPS {
            line_violations.push((flow.id, pct));
        }
    }
    let mut load_bus = vec![false; net.buses().len()];
    for l in net.loads() {
        load_bus[net.bus_position(l.bus).expect("validated bus reference")] = true;
    }
    let mut voltage_violations = Vec::new();
    for (i, bus) in net.buses().iter().enumerate() {
        if !opts.check_voltage || !load_bus[i] || !sol.energized[i] {
            continue;
        }
        let v = sol.v_mag[i];
        if v < bus.v_min - LIMIT_EPS || v > bus.v_max + LIMIT_EPS {
            voltage_violations.push((bus.id, v));
        }
    }
    SafetyReport {
        safe: line_violations.is_empty() && voltage_violations.is_empty(),
        line_violations,
        voltage_violations,
        nonconverged: false,
        max_loading_percent: max_loading,
    }
}

impl PowerFlowModel<'_> {
    /// Solves with the given load fractions and checks safety.
    pub fn evaluate_safety(&self, fractions: Option<&[f64]>, opts: &SolverOptions) -> Result<SafetyReport> {
        let sol = self.solve(fractions, opts)?;
        Ok(assess(self.network(), &sol, opts))
    }
}

/// Solves `net` and reports whether it is safe. Non-convergence is reported
/// as unsafe rather than as an error.
pub fn evaluate_safety(net: &Network, opts: &SolverOptions) -> Result<SafetyReport> {
    PowerFlowModel::new(net)?.evaluate_safety(None, opts)
}
