//! Newton-Raphson AC power flow in polar coordinates.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat, Triplet};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ybus::{branch_stamps, build_ybus, AdmittanceMatrix, BranchStamp};
use crate::error::{Error, Result};
use crate::grid::{BusKind, Network};

/// How line loading percent is measured against the MVA rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoadingBasis {
    /// Apparent power at the worse end: `max(|S_from|, |S_to|) / rating`.
    #[default]
    ApparentPower,
    /// Current at the worse end against the rated current at nominal
    /// voltage: `max(|S_from|/|V_from|, |S_to|/|V_to|) / rating`.
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Largest allowed power mismatch, per unit.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Start from 1.0 pu at PQ buses and zero angles; otherwise angles
    /// come from a DC power flow.
    pub flat_start: bool,
    /// Switch PV buses to PQ when their units hit a reactive limit.
    pub enforce_q_limits: bool,
    pub loading: LoadingBasis,
    /// Include the load-bus voltage band in the safety check.
    pub check_voltage: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-8,
            max_iterations: 30,
            flat_start: true,
            enforce_q_limits: true,
            loading: LoadingBasis::ApparentPower,
            check_voltage: true,
        }
    }
}

impl SolverOptions {
    /// Thermal screening only: current-based loading, no voltage band and
    /// generator reactive limits ignored.
    pub fn thermal_only() -> Self {
        SolverOptions {
            enforce_q_limits: false,
            loading: LoadingBasis::Current,
            check_voltage: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("solver tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Complex power flowing into a branch at each end, in MVA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchFlow {
    pub id: usize,
    pub s_from: Complex64,
    pub s_to: Complex64,
    pub v_from: f64,
    pub v_to: f64,
}

impl BranchFlow {
    pub fn loading_percent(&self, rating_mva: f64, basis: LoadingBasis) -> f64 {
        let (from, to) = match basis {
            LoadingBasis::ApparentPower => (self.s_from.norm(), self.s_to.norm()),
            LoadingBasis::Current => (
                self.s_from.norm() / self.v_from,
                self.s_to.norm() / self.v_to,
            ),
        };
        100.0 * from.max(to) / rating_mva
    }

    /// Series and charging losses, `S_from + S_to`.
    pub fn losses(&self) -> Complex64 {
        self.s_from + self.s_to
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub converged: bool,
    pub iterations: usize,
    /// Bus ids in network order; `v_mag` and `v_ang` follow the same order.
    pub bus_ids: Vec<u32>,
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    /// False for buses cut off from the slack; their voltage is reported as 0.
    pub energized: Vec<bool>,
    /// In-service lines, sorted by id.
    pub line_flows: Vec<BranchFlow>,
    pub transformer_flows: Vec<BranchFlow>,
    /// Net complex power injected at the slack bus, MW + j MVAr.
    pub slack_injection: Complex64,
    /// Largest remaining mismatch, per unit.
    pub max_mismatch: f64,
    /// PV buses that were switched to PQ at a reactive limit.
    pub q_limited_buses: Vec<u32>,
}

impl PowerFlowSolution {
    pub fn line_flow(&self, line_id: usize) -> Option<&BranchFlow> {
        self.line_flows
            .binary_search_by_key(&line_id, |f| f.id)
            .ok()
            .map(|k| &self.line_flows[k])
    }

    pub fn voltage(&self, position: usize) -> Complex64 {
        Complex64::from_polar(self.v_mag[position], self.v_ang[position])
    }
}

/// Network data prepared once for repeated solves under different load
/// scalings (the GA evaluates thousands of chromosomes per outage).
pub struct PowerFlowModel<'a> {
    net: &'a Network,
    ybus: AdmittanceMatrix,
    lines: Vec<(usize, BranchStamp)>,
    transformers: Vec<(usize, BranchStamp)>,
    energized: Vec<bool>,
    kind: Vec<BusKind>,
    v_set: Vec<f64>,
    p_gen_mw: Vec<f64>,
    q_range_mvar: Vec<(f64, f64)>,
    slack: usize,
    load_bus: Vec<usize>,
}

struct NewtonOutcome {
    converged: bool,
    iterations: usize,
    mismatch: f64,
}

impl<'a> PowerFlowModel<'a> {
    pub fn new(net: &'a Network) -> Result<Self> {
        let n = net.buses().len();
        let ybus = build_ybus(net)?;
        let (lines, transformers) = branch_stamps(net)?;
        let energized = net.energized();
        let slack = net.slack_position();

        let mut p_gen_mw = vec![0.0; n];
        let mut q_range_mvar = vec![(0.0, 0.0); n];
        let mut online = vec![false; n];
        let mut gen_v = vec![None; n];
        for g in net.generators().iter().filter(|g| g.in_service) {
            let i = net.bus_position(g.bus).expect("validated bus reference");
            if !energized[i] {
                continue;
            }
            p_gen_mw[i] += g.p_mw;
            q_range_mvar[i].0 += g.q_min_mvar;
            q_range_mvar[i].1 += g.q_max_mvar;
            online[i] = true;
            gen_v[i].get_or_insert(g.v_setpoint);
        }

        let mut kind = Vec::with_capacity(n);
        let mut v_set = Vec::with_capacity(n);
        for (i, bus) in net.buses().iter().enumerate() {
            let k = match bus.kind {
                BusKind::Pv if !online[i] => BusKind::Pq,
                k => k,
            };
            kind.push(k);
            v_set.push(bus.v_setpoint.or(gen_v[i]).unwrap_or(1.0));
        }

        let load_bus = net
            .loads()
            .iter()
            .map(|l| net.bus_position(l.bus).expect("validated bus reference"))
            .collect();

        Ok(PowerFlowModel {
            net,
            ybus,
            lines,
            transformers,
            energized,
            kind,
            v_set,
            p_gen_mw,
            q_range_mvar,
            slack,
            load_bus,
        })
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn ybus(&self) -> &AdmittanceMatrix {
        &self.ybus
    }

    /// Bus positions hosting at least one load and connected to the slack.
    pub fn energized_load_buses(&self) -> Vec<usize> {
        let mut buses: Vec<usize> = self
            .load_bus
            .iter()
            .copied()
            .filter(|&b| self.energized[b])
            .collect();
        buses.sort_unstable();
        buses.dedup();
        buses
    }

    /// Solves the power flow with every load scaled by `fractions[i]`
    /// (all ones when `None`).
    pub fn solve(&self, fractions: Option<&[f64]>, opts: &SolverOptions) -> Result<PowerFlowSolution> {
        opts.validate()?;
        if let Some(f) = fractions {
            self.net.check_fractions(f)?;
        }
        let n = self.net.buses().len();
        let base = self.net.base_mva();

        let mut load_mw = vec![0.0; n];
        let mut load_mvar = vec![0.0; n];
        for (k, load) in self.net.loads().iter().enumerate() {
            let g = fractions.map_or(1.0, |f| f[k]);
            load_mw[self.load_bus[k]] += g * load.p_mw;
            load_mvar[self.load_bus[k]] += g * load.q_mvar;
        }
        for i in 0..n {
            if !self.energized[i] && (load_mw[i] != 0.0 || load_mvar[i] != 0.0) {
                return Err(Error::Disconnected(self.net.buses()[i].id));
            }
        }

        let mut s_spec: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(self.p_gen_mw[i] - load_mw[i], -load_mvar[i]) / base)
            .collect();
        let mut kind = self.kind.clone();

        let mut v: Vec<Complex64> = (0..n)
            .map(|i| match kind[i] {
                _ if !self.energized[i] => Complex64::new(0.0, 0.0),
                BusKind::Pq => Complex64::new(1.0, 0.0),
                _ => Complex64::new(self.v_set[i], 0.0),
            })
            .collect();
        if !opts.flat_start {
            self.dc_angles(&s_spec, &kind, &mut v);
        }

        let mut iterations = 0;
        let mut q_limited = Vec::new();
        let mut switched = vec![false; n];
        let outcome = loop {
            let mut outcome = self.newton(&mut v, &s_spec, &kind, opts);
            iterations += outcome.iterations;
            outcome.iterations = iterations;
            if !outcome.converged || !opts.enforce_q_limits {
                break outcome;
            }
            // Switch the worst violator only, then re-solve.
            let injections = self.injections(&v);
            let mut worst: Option<(usize, f64, f64)> = None;
            for i in 0..n {
                if kind[i] != BusKind::Pv || switched[i] {
                    continue;
                }
                let q_gen = injections[i].im * base + load_mvar[i];
                let (q_min, q_max) = self.q_range_mvar[i];
                let (excess, limit) = if q_gen > q_max {
                    (q_gen - q_max, q_max)
                } else if q_gen < q_min {
                    (q_min - q_gen, q_min)
                } else {
                    continue;
                };
                if excess > 1e-6 && worst.is_none_or(|(_, e, _)| excess > e) {
                    worst = Some((i, excess, limit));
                }
            }
            let Some((i, _, limit)) = worst else {
                break outcome;
            };
            kind[i] = BusKind::Pq;
            switched[i] = true;
            s_spec[i].im = (limit - load_mvar[i]) / base;
            q_limited.push(self.net.buses()[i].id);
        };

        Ok(self.assemble(v, outcome, q_limited))
    }

    fn injections(&self, v: &[Complex64]) -> Vec<Complex64> {
        let current = self.ybus.mul_vec(v);
        v.iter().zip(&current).map(|(vi, ii)| vi * ii.conj()).collect()
    }

    fn newton(
        &self,
        v: &mut [Complex64],
        s_spec: &[Complex64],
        kind: &[BusKind],
        opts: &SolverOptions,
    ) -> NewtonOutcome {
        let n = v.len();
        // Unknown layout: angles of non-slack buses, then magnitudes of PQ buses.
        let mut ang_col = vec![usize::MAX; n];
        let mut mag_col = vec![usize::MAX; n];
        let mut pvpq = Vec::new();
        let mut pq = Vec::new();
        for i in 0..n {
            if !self.energized[i] || kind[i] == BusKind::Slack {
                continue;
            }
            ang_col[i] = pvpq.len();
            pvpq.push(i);
            if kind[i] == BusKind::Pq {
                pq.push(i);
            }
        }
        for (k, &i) in pq.iter().enumerate() {
            mag_col[i] = pvpq.len() + k;
        }
        let dim = pvpq.len() + pq.len();

        let mismatch = |v: &[Complex64]| -> (Vec<f64>, f64) {
            let s = self.injections(v);
            let mut f = Vec::with_capacity(dim);
            f.extend(pvpq.iter().map(|&i| s[i].re - s_spec[i].re));
            f.extend(pq.iter().map(|&i| s[i].im - s_spec[i].im));
            let norm = f.iter().fold(0.0f64, |m, x| if m.is_nan() || x.is_nan() { f64::NAN } else { m.max(x.abs()) });
            (f, norm)
        };

        let (mut f, mut norm) = mismatch(v);
        let mut iterations = 0;
        let j = Complex64::new(0.0, 1.0);
        let mut jacobian: Option<Option<JacobianPattern>> = None;
        loop {
            if norm <= opts.tolerance {
                return NewtonOutcome {
                    converged: true,
                    iterations,
                    mismatch: norm,
                };
            }
            if iterations >= opts.max_iterations || !norm.is_finite() || norm > 1e10 {
                return NewtonOutcome {
                    converged: false,
                    iterations,
                    mismatch: norm,
                };
            }

            let current = self.ybus.mul_vec(v);
            let mut pattern = Vec::with_capacity(4 * self.ybus.nnz());
            let mut values = Vec::with_capacity(4 * self.ybus.nnz());
            let mut push = |r: usize, c: usize, x: f64| {
                pattern.push(Pair::new(r, c));
                values.push(x);
            };
            for i in 0..n {
                let (p_row, q_row) = (ang_col[i], mag_col[i]);
                if p_row == usize::MAX {
                    continue;
                }
                let vi = v[i];
                let unit_i = vi / vi.norm();
                for &(k, y) in self.ybus.row(i) {
                    let vk = v[k];
                    let mut d_ang = -j * vi * (y * vk).conj();
                    let mut d_mag = vi * (y * (vk / vk.norm())).conj();
                    if k == i {
                        d_ang += j * vi * current[i].conj();
                        d_mag += current[i].conj() * unit_i;
                    }
                    if ang_col[k] != usize::MAX {
                        push(p_row, ang_col[k], d_ang.re);
                        if q_row != usize::MAX {
                            push(q_row, ang_col[k], d_ang.im);
                        }
                    }
                    if mag_col[k] != usize::MAX {
                        push(p_row, mag_col[k], d_mag.re);
                        if q_row != usize::MAX {
                            push(q_row, mag_col[k], d_mag.im);
                        }
                    }
                }
            }
            // The pattern only depends on the bus types, so it is analyzed once.
            let jac = jacobian.get_or_insert_with(|| JacobianPattern::new(dim, &pattern));
            let Some(dx) = jac.as_ref().and_then(|p| p.solve(&values, &f)) else {
                return NewtonOutcome {
                    converged: false,
                    iterations,
                    mismatch: norm,
                };
            };
            for &i in &pvpq {
                let (mag, ang) = v[i].to_polar();
                let mag = if mag_col[i] != usize::MAX { mag - dx[mag_col[i]] } else { mag };
                v[i] = Complex64::from_polar(mag, ang - dx[ang_col[i]]);
            }
            iterations += 1;
            (f, norm) = mismatch(v);
        }
    }

    /// Replaces initial angles with a lossless DC power-flow estimate.
    fn dc_angles(&self, s_spec: &[Complex64], kind: &[BusKind], v: &mut [Complex64]) {
        let n = v.len();
        let mut col = vec![usize::MAX; n];
        let mut order = Vec::new();
        for i in 0..n {
            if self.energized[i] && kind[i] != BusKind::Slack {
                col[i] = order.len();
                order.push(i);
            }
        }
        let mut triplets = Vec::new();
        for (_, s) in self.lines.iter().chain(&self.transformers) {
            let b = s.yft.im;
            for (a, c) in [(s.from, s.to), (s.to, s.from)] {
                if col[a] != usize::MAX {
                    triplets.push(Triplet::new(col[a], col[a], b));
                    if col[c] != usize::MAX {
                        triplets.push(Triplet::new(col[a], col[c], -b));
                    }
                }
            }
        }
        let p: Vec<f64> = order.iter().map(|&i| s_spec[i].re).collect();
        if let Some(theta) = solve_sparse(order.len(), &triplets, &p) {
            for (k, &i) in order.iter().enumerate() {
                v[i] = Complex64::from_polar(v[i].norm(), theta[k]);
            }
        }
    }

    fn assemble(&self, v: Vec<Complex64>, outcome: NewtonOutcome, q_limited_buses: Vec<u32>) -> PowerFlowSolution {
        let base = self.net.base_mva();
        let flow = |id: usize, s: &BranchStamp| {
            let (vf, vt) = (v[s.from], v[s.to]);
            let i_from = s.yff * vf + s.yft * vt;
            let i_to = s.ytf * vf + s.ytt * vt;
            BranchFlow {
                id,
                s_from: vf * i_from.conj() * base,
                s_to: vt * i_to.conj() * base,
                v_from: vf.norm(),
                v_to: vt.norm(),
            }
        };
        let mut line_flows: Vec<BranchFlow> = self.lines.iter().map(|(id, s)| flow(*id, s)).collect();
        line_flows.sort_by_key(|f| f.id);
        let transformer_flows = self.transformers.iter().map(|(id, s)| flow(*id, s)).collect();
        let slack_injection = self.injections(&v)[self.slack] * base;
        PowerFlowSolution {
            converged: outcome.converged,
            iterations: outcome.iterations,
            bus_ids: self.net.buses().iter().map(|b| b.id).collect(),
            v_mag: v.iter().map(|x| x.norm()).collect(),
            v_ang: v.iter().map(|x| x.arg()).collect(),
            energized: self.energized.clone(),
            line_flows,
            transformer_flows,
            slack_injection,
            max_mismatch: outcome.mismatch,
            q_limited_buses,
        }
    }
}

/// Sparsity pattern and symbolic LU of a Jacobian with fixed bus types.
struct JacobianPattern {
    dim: usize,
    symbolic: SymbolicSparseColMat<usize>,
    order: Argsort<usize>,
    lu: SymbolicLu<usize>,
}

impl JacobianPattern {
    fn new(dim: usize, pattern: &[Pair<usize, usize>]) -> Option<Self> {
        let (symbolic, order) = SymbolicSparseColMat::try_new_from_indices(dim, dim, pattern).ok()?;
        let lu = SymbolicLu::try_new(symbolic.as_ref()).ok()?;
        Some(JacobianPattern {
            dim,
            symbolic,
            order,
            lu,
        })
    }

    /// Solves `J x = b` with `values` in the order of the pattern.
    fn solve(&self, values: &[f64], b: &[f64]) -> Option<Vec<f64>> {
        if self.dim == 0 {
            return Some(Vec::new());
        }
        let a = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.order, values).ok()?;
        let lu = Lu::try_new_with_symbolic(self.lu.clone(), a.as_ref()).ok()?;
        let rhs = faer::Col::<f64>::from_fn(self.dim, |i| b[i]);
        let x = lu.solve(&rhs);
        let x: Vec<f64> = (0..self.dim).map(|i| x[i]).collect();
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

/// Solves `A x = b` for a sparse `A` given as triplets (duplicates summed).
/// Returns `None` when the matrix is singular or the result is not finite.
fn solve_sparse(dim: usize, triplets: &[Triplet<usize, usize, f64>], b: &[f64]) -> Option<Vec<f64>> {
    if dim == 0 {
        return Some(Vec::new());
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, triplets).ok()?;
    let lu = a.sp_lu().ok()?;
    let rhs = faer::Col::<f64>::from_fn(dim, |i| b[i]);
    let x = lu.solve(&rhs);
    let x: Vec<f64> = (0..dim).map(|i| x[i]).collect();
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves the AC power flow of `net` as given.
pub fn solve(net: &Network, opts: &SolverOptions) -> Result<PowerFlowSolution> {
    PowerFlowModel::new(net)?.solve(None, opts)
}
