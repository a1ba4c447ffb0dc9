//! Exhaustive search over the loads near an outage, checked against the GA
//! restricted to the same loads.

use gridshed::ga::{BruteForce, GAConfig, GeneticSearch};
use gridshed::grid::read_case_file;
use gridshed::powerflow::SolverOptions;

fn main() -> gridshed::Result<()> {
    let net = read_case_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/case_RTS_GMLC.m"))?.apply_outage(&[77])?;
    let opts = SolverOptions::thermal_only();
    let free = [38, 39, 40];

    let search = BruteForce::new(&net, 0.1, &opts).free_only(&free);
    println!("{} lattice points", search.size()?);
    let exact = search.run()?;

    let pins: Vec<Option<f64>> = (0..net.n_loads())
        .map(|i| if free.contains(&i) { None } else { Some(1.0) })
        .collect();
    let ga = GeneticSearch::new(&net, &GAConfig::default(), &opts).pins(&pins).run()?;

    for (name, r) in [("exhaustive", &exact), ("ga", &ga)] {
        println!(
            "{name:>10}: fitness {:.2}  shed {:.1} MW  genes {:?}",
            r.best_fitness.scalar,
            r.shed_mw,
            free.iter().map(|&i| r.best.gene(i)).collect::<Vec<_>>()
        );
    }
    Ok(())
}
