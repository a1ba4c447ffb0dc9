//! Executes normalized requests. Shared by the HTTP jobs and the CLI.

use gridshed::contingency::{enumerate_n1, screen_cases, ScreeningReport};
use gridshed::ga::{run_multistep_observed, GAResult, GeneticSearch};
use gridshed::grid::Network;
use gridshed::report::{OptimizeRun, RunPayload, RunRecord};
use gridshed::Result;

use crate::request::{apply_importance, Mode, OptimizeConfig, ScreenConfig};

/// Receives `(done, total)`; `done` never decreases.
pub type ProgressSink<'a> = &'a (dyn Fn(usize, usize) + Sync);

/// Upper bound on the generations an optimize run can report.
pub fn optimize_total(cfg: &OptimizeConfig) -> usize {
    let stages = cfg.stages.as_ref().map_or(1, |s| s.thresholds.len() + 1);
    stages * cfg.ga.max_iterations.max(1)
}

/// The intact-plan result when serving every load is already safe.
pub fn short_circuit(net: &Network, cfg: &OptimizeConfig) -> Result<Option<OptimizeRun>> {
    let net = apply_importance(net, &cfg.importance)?.apply_outage(&cfg.outage)?;
    Ok(GAResult::all_served(&net, &cfg.ga, &cfg.solver)?.map(|result| OptimizeRun {
        out_lines: cfg.outage.clone(),
        mode: cfg.mode.to_string(),
        result,
        stages: None,
    }))
}

/// Runs the search for one outage. Skips it when the outage is safe with
/// every load served.
pub fn optimize(net: &Network, cfg: &OptimizeConfig, progress: ProgressSink<'_>) -> Result<OptimizeRun> {
    let total = optimize_total(cfg);
    if let Some(run) = short_circuit(net, cfg)? {
        progress(total, total);
        return Ok(run);
    }
    let net = apply_importance(net, &cfg.importance)?.apply_outage(&cfg.outage)?;
    let per_stage = cfg.ga.max_iterations.max(1);
    let (result, stages) = match (cfg.mode, &cfg.stages) {
        (Mode::Multistep, Some(stages)) => {
            let report = |s: usize, p: gridshed::ga::GenerationProgress| {
                progress((s * per_stage + p.generation).min(total), total);
            };
            let m = run_multistep_observed(&net, stages, &cfg.ga, &cfg.solver, Some(&report))?;
            (m.result, Some(m.stages))
        }
        _ => {
            let report = |p: gridshed::ga::GenerationProgress| progress(p.generation, total);
            (GeneticSearch::new(&net, &cfg.ga, &cfg.solver).on_progress(&report).run()?, None)
        }
    };
    progress(total, total);
    Ok(OptimizeRun {
        out_lines: cfg.outage.clone(),
        mode: cfg.mode.to_string(),
        result,
        stages,
    })
}

/// Screens every single-line outage; progress counts finished cases.
pub fn screen(net: &Network, cfg: &ScreenConfig, progress: ProgressSink<'_>) -> Result<ScreeningReport> {
    let net = apply_importance(net, &cfg.importance)?;
    let cases = enumerate_n1(&net);
    screen_cases(&net, &cases, &cfg.screening(), Some(progress))
}

pub fn optimize_record(case_id: &str, cfg: &OptimizeConfig, run: OptimizeRun) -> Result<RunRecord> {
    RunRecord::new(case_id, cfg, RunPayload::Optimize(run))
}

pub fn screen_record(case_id: &str, cfg: &ScreenConfig, report: ScreeningReport) -> Result<RunRecord> {
    RunRecord::new(case_id, cfg, RunPayload::Screening(report))
}
