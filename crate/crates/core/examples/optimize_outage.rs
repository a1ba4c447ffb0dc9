//! Partial and binary load shedding for one RTS-GMLC outage.
//!
//! cargo run --release --example optimize_outage -- [line-id] [seed]

use gridshed::ga::{GAConfig, GeneticSearch, GenerationProgress};
use gridshed::grid::read_case_file;
use gridshed::powerflow::{evaluate_safety, SolverOptions};
use gridshed::report::{write_comparison_table, ComparisonRow};

fn main() -> gridshed::Result<()> {
    let mut args = std::env::args().skip(1);
    let line: usize = args.next().map_or(77, |a| a.parse().expect("line id"));
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));

    let net = read_case_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/case_RTS_GMLC.m"))?.apply_outage(&[line])?;
    let opts = SolverOptions::thermal_only();
    let base = evaluate_safety(&net, &opts)?;
    println!("line {line} out: safe={} overloads={:?}", base.safe, base.line_violations);

    let print = |p: GenerationProgress| {
        if p.generation % 100 == 0 {
            println!("  generation {:>3}/{}  best {:.2}", p.generation, p.max_generations, p.best_scalar);
        }
    };
    let partial = GeneticSearch::new(&net, &GAConfig { seed, ..GAConfig::default() }, &opts)
        .on_progress(&print)
        .run()?;
    let binary = GeneticSearch::new(&net, &GAConfig { seed, ..GAConfig::binary() }, &opts).run()?;

    for (name, r) in [("partial", &partial), ("binary", &binary)] {
        let plan: Vec<String> = r
            .shed_loads
            .iter()
            .map(|s| format!("load {} at {:.1}", s.load, s.fraction))
            .collect();
        println!("{name}: feasible={} shed {:.1} MW  [{}]", r.feasible, r.shed_mw, plan.join(", "));
    }

    let row = ComparisonRow::from_results(line, &partial, &binary, false);
    write_comparison_table(&[row], std::io::stdout().lock())?;
    Ok(())
}
