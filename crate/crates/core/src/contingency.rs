//! Outage enumeration and screening.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ga::{run_multistep, GAConfig, GAResult, GeneticSearch, StageConfig, StageTrace};
use crate::grid::Network;
use crate::powerflow::{evaluate_safety, SafetyReport, SolverOptions};

/// Default limit on the number of cases an N-K enumeration may produce.
pub const DEFAULT_CASE_CAP: u128 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyCase {
    pub out_lines: Vec<usize>,
    pub label: String,
}

impl ContingencyCase {
    pub fn new(mut out_lines: Vec<usize>) -> Self {
        out_lines.sort_unstable();
        out_lines.dedup();
        let label = match out_lines.as_slice() {
            [one] => format!("line {one}"),
            many => format!(
                "lines {}",
                many.iter().map(ToString::to_string).collect::<Vec<_>>().join("+")
            ),
        };
        ContingencyCase { out_lines, label }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleEvidence {
    /// Best unsafe plan the search found, if it ran.
    pub best: Option<GAResult>,
    /// Structural error that prevented the search, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "detail", rename_all = "snake_case")]
pub enum Classification {
    NoInstability,
    SolutionFound(GAResult),
    Infeasible(InfeasibleEvidence),
}

impl Classification {
    pub fn result(&self) -> Option<&GAResult> {
        match self {
            Classification::NoInstability => None,
            Classification::SolutionFound(r) => Some(r),
            Classification::Infeasible(e) => e.best.as_ref(),
        }
    }
}

/// One line per in-service line, ordered by line id.
pub fn enumerate_n1(net: &Network) -> Vec<ContingencyCase> {
    let mut ids: Vec<usize> = net.lines().iter().filter(|l| l.in_service).map(|l| l.id).collect();
    ids.sort_unstable();
    ids.into_iter().map(|id| ContingencyCase::new(vec![id])).collect()
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Every `k`-subset of in-service lines, in lexicographic order of ids.
pub fn enumerate_nk(net: &Network, k: usize, cap: u128) -> Result<Vec<ContingencyCase>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut ids: Vec<usize> = net.lines().iter().filter(|l| l.in_service).map(|l| l.id).collect();
    ids.sort_unstable();
    let cases = binomial(ids.len() as u128, k as u128);
    if cases > cap {
        return Err(Error::TooManyCases { cases, cap });
    }
    let mut out = Vec::with_capacity(cases as usize);
    if k > ids.len() {
        return Ok(out);
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(ContingencyCase::new(idx.iter().map(|&i| ids[i]).collect()));
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < ids.len() - k + p) else {
            break;
        };
        idx[pos] += 1;
        for p in pos + 1..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
    Ok(out)
}

/// GA seed for one case, independent of enumeration order.
pub fn case_seed(seed: u64, label: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(label.as_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningConfig {
    pub ga: GAConfig,
    /// Run the staged search instead of the plain GA.
    pub stages: Option<StageConfig>,
    pub solver: SolverOptions,
}

impl ScreeningConfig {
    pub fn new(ga: GAConfig, stages: Option<StageConfig>, solver: SolverOptions) -> Self {
        ScreeningConfig { ga, stages, solver }
    }

    /// Short description such as `partial-nocond` or `binary-sat25`.
    pub fn approach(&self) -> String {
        let mode = if self.stages.is_some() {
            "multistep"
        } else if self.ga.gene_step >= 1.0 {
            "binary"
        } else {
            "partial"
        };
        match self.ga.saturate {
            Some(s) => format!("{mode}-sat{s}"),
            None => format!("{mode}-nocond"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ga.validate()?;
        self.solver.validate()?;
        if let Some(s) = &self.stages {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case: ContingencyCase,
    pub seed: u64,
    /// Safety of the outage with every load served; `None` when the outage
    /// islands loads.
    pub base_safety: Option<SafetyReport>,
    pub classification: Classification,
    /// Stage trace when the staged search ran.
    pub stages: Option<Vec<StageTrace>>,
    #[serde(skip)]
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub approach: String,
    pub config: ScreeningConfig,
    pub cases: Vec<CaseOutcome>,
    pub n_no_instability: usize,
    pub n_solution: usize,
    pub n_infeasible: usize,
    /// Number of cases that ran a search.
    pub ga_invocations: usize,
    /// Wall-clock seconds for the whole screening. Kept out of records.
    #[serde(skip)]
    pub runtime_s: f64,
}

/// Searches one case without the all-loads-on shortcut.
fn search(
    outaged: &Network,
    cfg: &ScreeningConfig,
    seed: u64,
    invocations: &AtomicUsize,
) -> Result<(GAResult, Option<Vec<StageTrace>>)> {
    invocations.fetch_add(1, Ordering::Relaxed);
    let ga = GAConfig {
        seed,
        ..cfg.ga.clone()
    };
    Ok(match &cfg.stages {
        Some(stages) => {
            let m = run_multistep(outaged, stages, &ga, &cfg.solver)?;
            (m.result, Some(m.stages))
        }
        None => (GeneticSearch::new(outaged, &ga, &cfg.solver).run()?, None),
    })
}

fn classify_inner(
    net: &Network,
    case: &ContingencyCase,
    cfg: &ScreeningConfig,
    seed: u64,
    invocations: &AtomicUsize,
) -> Result<CaseOutcome> {
    let start = Instant::now();
    let outaged = net.apply_outage(&case.out_lines)?;
    let islanded = outaged
        .islanded_loads()
        .into_iter()
        .any(|i| outaged.loads()[i].p_mw != 0.0 || outaged.loads()[i].q_mvar != 0.0);
    let base_safety = if islanded {
        None
    } else {
        Some(evaluate_safety(&outaged, &cfg.solver)?)
    };

    let (classification, stages) = if base_safety.as_ref().is_some_and(|s| s.safe) {
        (Classification::NoInstability, None)
    } else {
        match search(&outaged, cfg, seed, invocations) {
            Ok((r, stages)) if r.feasible => (Classification::SolutionFound(r), stages),
            Ok((r, stages)) => (
                Classification::Infeasible(InfeasibleEvidence {
                    best: Some(r),
                    error: None,
                }),
                stages,
            ),
            Err(e) => (
                Classification::Infeasible(InfeasibleEvidence {
                    best: None,
                    error: Some(e.to_string()),
                }),
                None,
            ),
        }
    };
    Ok(CaseOutcome {
        case: case.clone(),
        seed,
        base_safety,
        classification,
        stages,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

/// Classifies one outage: `NoInstability` when it is safe with every load
/// served (no search runs), otherwise the search decides between
/// `SolutionFound` and `Infeasible`. The search is seeded with `cfg.ga.seed`.
pub fn classify_case(net: &Network, case: &ContingencyCase, cfg: &ScreeningConfig) -> Result<Classification> {
    cfg.validate()?;
    let counter = AtomicUsize::new(0);
    Ok(classify_inner(net, case, cfg, cfg.ga.seed, &counter)?.classification)
}

/// Screens the given cases in parallel. Each case is seeded from the global
/// seed and its label. `progress` receives `(finished, total)`.
pub fn screen_cases(
    net: &Network,
    cases: &[ContingencyCase],
    cfg: &ScreeningConfig,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<ScreeningReport> {
    cfg.validate()?;
    for case in cases {
        for &id in &case.out_lines {
            net.line(id).ok_or(Error::UnknownLine(id))?;
        }
    }
    let start = Instant::now();
    let invocations = AtomicUsize::new(0);
    let finished = AtomicUsize::new(0);
    let outcomes: Vec<CaseOutcome> = cases
        .par_iter()
        .map(|case| {
            let seed = case_seed(cfg.ga.seed, &case.label);
            let outcome = classify_inner(net, case, cfg, seed, &invocations).unwrap_or_else(|e| CaseOutcome {
                case: case.clone(),
                seed,
                base_safety: None,
                classification: Classification::Infeasible(InfeasibleEvidence {
                    best: None,
                    error: Some(e.to_string()),
                }),
                stages: None,
                elapsed_s: 0.0,
            });
            let done = finished.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(f) = progress {
                f(done, cases.len());
            }
            outcome
        })
        .collect();

    let count = |p: fn(&Classification) -> bool| outcomes.iter().filter(|o| p(&o.classification)).count();
    Ok(ScreeningReport {
        approach: cfg.approach(),
        config: cfg.clone(),
        n_no_instability: count(|c| matches!(c, Classification::NoInstability)),
        n_solution: count(|c| matches!(c, Classification::SolutionFound(_))),
        n_infeasible: count(|c| matches!(c, Classification::Infeasible(_))),
        ga_invocations: invocations.into_inner(),
        cases: outcomes,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Screens every single-line outage.
pub fn run_screening(net: &Network, cfg: &ScreeningConfig) -> Result<ScreeningReport> {
    screen_cases(net, &enumerate_n1(net), cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(104, 2), 5356);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn labels() {
        assert_eq!(ContingencyCase::new(vec![77]).label, "line 77");
        assert_eq!(ContingencyCase::new(vec![9, 3]).label, "lines 3+9");
    }

    #[test]
    fn case_seed_depends_on_label() {
        assert_eq!(case_seed(1, "line 4"), case_seed(1, "line 4"));
        assert_ne!(case_seed(1, "line 4"), case_seed(1, "line 5"));
        assert_ne!(case_seed(1, "line 4"), case_seed(2, "line 4"));
    }

    #[test]
    fn approach_labels() {
        let mut cfg = ScreeningConfig::new(GAConfig::default(), None, SolverOptions::default());
        assert_eq!(cfg.approach(), "partial-nocond");
        cfg.ga.saturate = Some(25);
        cfg.ga.gene_step = 1.0;
        assert_eq!(cfg.approach(), "binary-sat25");
    }
}
