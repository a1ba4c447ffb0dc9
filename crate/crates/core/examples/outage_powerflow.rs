//! Solves the RTS-GMLC case intact and with one line out, then prints the
//! most loaded lines and any voltage violations.
//!
//! cargo run --example outage_powerflow -- [line-id] [--thermal]
//!
//! `--thermal` ignores generator reactive limits.

use gridshed::grid::read_case_file;
use gridshed::powerflow::{assess, LoadingBasis, PowerFlowModel, SolverOptions};

fn main() -> gridshed::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let thermal = args.iter().any(|a| a == "--thermal");
    let outage: Option<usize> = args
        .iter()
        .find(|a| !a.starts_with("--"))
        .map(|a| a.parse().expect("line id"));
    let net = read_case_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/case_RTS_GMLC.m"))?;
    let net = match outage {
        Some(id) => net.apply_outage(&[id])?,
        None => net,
    };
    let opts = if thermal {
        SolverOptions::thermal_only()
    } else {
        SolverOptions::default()
    };
    let sol = PowerFlowModel::new(&net)?.solve(None, &opts)?;
    println!(
        "converged={} iterations={} mismatch={:.2e} q-limited buses={:?}",
        sol.converged, sol.iterations, sol.max_mismatch, sol.q_limited_buses
    );

    let mut loadings: Vec<(usize, f64, f64)> = sol
        .line_flows
        .iter()
        .map(|f| {
            let rating = net.line(f.id).unwrap().rating_mva;
            (
                f.id,
                f.loading_percent(rating, LoadingBasis::ApparentPower),
                f.loading_percent(rating, LoadingBasis::Current),
            )
        })
        .collect();
    loadings.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("line  loading(S)%  loading(I)%");
    for (id, s, i) in loadings.iter().take(5) {
        println!("{id:>4}  {s:>10.2}  {i:>10.2}");
    }

    let report = assess(&net, &sol, &opts);
    println!("safe={}", report.safe);
    for (bus, v) in &report.voltage_violations {
        println!("voltage violation at bus {bus}: {v:.4} pu");
    }
    Ok(())
}
