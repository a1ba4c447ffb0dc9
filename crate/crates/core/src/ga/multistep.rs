use serde::{Deserialize, Serialize};

use super::config::GAConfig;
use super::engine::{GAResult, GenerationProgress, GeneticSearch};
use crate::error::{Error, Result};
use crate::grid::Network;
use crate::powerflow::SolverOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    /// Ascending importance cut points. Stage `s` frees loads with
    /// importance below `thresholds[s]`.
    pub thresholds: Vec<f64>,
    /// Optional GA settings for stage `s`; the final all-loads stage is
    /// `thresholds.len()`.
    pub overrides: Vec<Option<GAConfig>>,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            thresholds: vec![0.8],
            overrides: Vec::new(),
        }
    }
}

impl StageConfig {
    pub fn with_threshold(threshold: f64) -> Self {
        StageConfig {
            thresholds: vec![threshold],
            overrides: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for &t in &self.thresholds {
            if !(t > prev && t <= 1.0) {
                return Err(Error::Config(format!(
                    "stage thresholds must be strictly ascending within (0, 1], got {:?}",
                    self.thresholds
                )));
            }
            prev = t;
        }
        if self.overrides.len() > self.thresholds.len() + 1 {
            return Err(Error::Config("more stage overrides than stages".into()));
        }
        for cfg in self.overrides.iter().flatten() {
            cfg.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    /// 1-based stage number.
    pub stage: usize,
    /// `None` for the final stage that frees every load.
    pub threshold: Option<f64>,
    pub free_loads: usize,
    pub feasible: bool,
    pub best_scalar: f64,
    pub generations_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStepResult {
    pub result: GAResult,
    /// Stage that produced `result` (the first feasible one, or the last
    /// one run).
    pub stage_reached: usize,
    pub stages: Vec<StageTrace>,
}

/// Salted per-stage seed; stage 0 keeps the configured seed.
fn stage_seed(seed: u64, stage: usize) -> u64 {
    seed.wrapping_add((stage as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Runs the GA in stages of increasing importance. Loads at or above the
/// stage threshold are held at 1. Stops at the first feasible stage; a last
/// stage frees every load unless an earlier stage already did.
pub fn run_multistep(
    net: &Network,
    stages: &StageConfig,
    cfg: &GAConfig,
    opts: &SolverOptions,
) -> Result<MultiStepResult> {
    run_multistep_observed(net, stages, cfg, opts, None)
}

/// [`run_multistep`] with a callback receiving the 0-based stage index and
/// the generation progress of that stage.
pub fn run_multistep_observed(
    net: &Network,
    stages: &StageConfig,
    cfg: &GAConfig,
    opts: &SolverOptions,
    progress: Option<&(dyn Fn(usize, GenerationProgress) + Sync)>,
) -> Result<MultiStepResult> {
    stages.validate()?;
    cfg.validate()?;
    let importance: Vec<f64> = net.loads().iter().map(|l| l.importance).collect();

    let mut plan: Vec<Option<f64>> = stages.thresholds.iter().copied().map(Some).collect();
    plan.push(None);

    let mut trace = Vec::new();
    let mut last: Option<GAResult> = None;
    for (s, threshold) in plan.into_iter().enumerate() {
        let free: Vec<bool> = importance
            .iter()
            .map(|&imp| threshold.is_none_or(|t| imp < t))
            .collect();
        let n_free = free.iter().filter(|&&f| f).count();
        if let Some(prev) = trace.last().map(|t: &StageTrace| t.free_loads) {
            // A stage that frees nothing new repeats the previous search.
            if n_free == prev {
                continue;
            }
        }

        let mut stage_cfg = stages.overrides.get(s).cloned().flatten().unwrap_or_else(|| cfg.clone());
        stage_cfg.seed = stage_seed(cfg.seed, s);
        let pins: Vec<Option<f64>> = free.iter().map(|&f| if f { None } else { Some(1.0) }).collect();
        let forward = |p: GenerationProgress| {
            if let Some(f) = progress {
                f(s, p);
            }
        };
        let result = GeneticSearch::new(net, &stage_cfg, opts)
            .pins(&pins)
            .on_progress(&forward)
            .run()?;

        trace.push(StageTrace {
            stage: s + 1,
            threshold,
            free_loads: n_free,
            feasible: result.feasible,
            best_scalar: result.best_fitness.scalar,
            generations_run: result.generations_run,
        });
        let feasible = result.feasible;
        last = Some(result);
        if feasible || n_free == importance.len() {
            break;
        }
    }

    let result = last.expect("at least one stage runs");
    Ok(MultiStepResult {
        stage_reached: trace.last().map_or(1, |t| t.stage),
        result,
        stages: trace,
    })
}
