//! N-1 screening of RTS-GMLC with saturation, printed as a CSV summary
//! row followed by the cases that needed shedding.
//!
//! cargo run --release --example n1_screening -- [saturate]

use gridshed::contingency::{run_screening, Classification, ScreeningConfig};
use gridshed::ga::GAConfig;
use gridshed::grid::read_case_file;
use gridshed::powerflow::SolverOptions;
use gridshed::report::{write_screening_csv, ScreeningRow};

fn main() -> gridshed::Result<()> {
    let saturate: usize = std::env::args().nth(1).map_or(25, |a| a.parse().expect("generations"));
    let net = read_case_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/case_RTS_GMLC.m"))?;
    let cfg = ScreeningConfig::new(
        GAConfig {
            saturate: Some(saturate),
            ..GAConfig::default()
        },
        None,
        SolverOptions::thermal_only(),
    );
    let report = run_screening(&net, &cfg)?;
    write_screening_csv(&[ScreeningRow::from(&report)], std::io::stdout().lock())?;

    for case in &report.cases {
        match &case.classification {
            Classification::NoInstability => {}
            Classification::SolutionFound(r) => println!("{:<8} shed {:>6.1} MW", case.case.label, r.shed_mw),
            Classification::Infeasible(_) => println!("{:<8} infeasible", case.case.label),
        }
    }
    Ok(())
}
