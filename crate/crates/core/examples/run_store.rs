//! Stores an optimize run, reads it back and exports its convergence
//! history.

use gridshed::ga::{run_ga, GAConfig};
use gridshed::grid::{read_case_file, serialize_case_compact};
use gridshed::powerflow::SolverOptions;
use gridshed::report::{export_convergence, OptimizeRun, RunPayload, RunRecord, RunStore};

fn main() -> gridshed::Result<()> {
    let net = read_case_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/case_RTS_GMLC.m"))?;
    let outaged = net.apply_outage(&[77])?;
    let cfg = GAConfig {
        saturate: Some(25),
        seed: 7,
        ..GAConfig::default()
    };
    let result = run_ga(&outaged, &cfg, &SolverOptions::thermal_only())?;

    let root = std::env::temp_dir().join("gridshed-example-store");
    let store = RunStore::open(&root)?;
    let case_id = store.store_case(&serialize_case_compact(&net))?;
    let record = RunRecord::new(
        &case_id,
        &cfg,
        RunPayload::Optimize(OptimizeRun {
            out_lines: vec![77],
            mode: "partial".into(),
            result,
            stages: None,
        }),
    )?;
    store.store_run(&record)?;

    let back = store.load_run(&record.run_id)?;
    println!("stored run {} under {}", back.run_id, root.display());
    println!("{} runs in the index", store.list()?.len());
    if let RunPayload::Optimize(o) = &back.payload {
        export_convergence(&o.result.history, std::io::stdout().lock())?;
    }
    Ok(())
}
