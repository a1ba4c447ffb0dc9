//! Staged search that spares important loads, compared with a plain
//! partial run on the same outage.
//!
//! cargo run --release --example multistep_importance

use gridshed::ga::{run_ga, run_multistep, GAConfig, StageConfig};
use gridshed::grid::read_case_file;
use gridshed::powerflow::SolverOptions;
use gridshed::report::{write_comparison_table, ComparisonRow};

fn main() -> gridshed::Result<()> {
    let net = read_case_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/case_RTS_GMLC.m"))?;
    let mut importance = vec![1.0; net.n_loads()];
    for (load, w) in [(0, 0.794), (2, 0.915), (34, 0.566), (36, 0.750)] {
        importance[load] = w;
    }
    let net = net.with_importance(&importance)?.apply_outage(&[23])?;
    let opts = SolverOptions::thermal_only();
    let cfg = GAConfig::default();

    let plain = run_ga(&net, &cfg, &opts)?;
    let staged = run_multistep(&net, &StageConfig::with_threshold(0.8), &cfg, &opts)?;
    for t in &staged.stages {
        println!(
            "stage {}: {} free loads, feasible={}, {} generations",
            t.stage, t.free_loads, t.feasible, t.generations_run
        );
    }

    let rows = [
        ComparisonRow::from_results(23, &plain, &plain, false),
        ComparisonRow::from_results(23, &staged.result, &staged.result, true),
    ];
    println!("plain partial, then staged with importance:");
    write_comparison_table(&rows, std::io::stdout().lock())?;
    Ok(())
}
