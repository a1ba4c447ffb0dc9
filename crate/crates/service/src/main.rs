use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridshed::contingency::Classification;
use gridshed::ga::{BruteForce, GAResult, BRUTE_FORCE_LIMIT};
use gridshed::grid::{parse_case, read_case_file, serialize_case_compact, Network};
use gridshed::powerflow::{evaluate_safety, SolverOptions};
use gridshed::report::{write_screening_csv, RunPayload, RunStore, ScreeningRow};
use gridshed_service::request::{apply_importance, Mode, OptimizeRequest, ScreenRequest};
use gridshed_service::{runner, ServiceConfig};

#[derive(Parser)]
#[command(name = "gridshed", version, about = "Load shedding under transmission outages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a case file.
    Validate {
        #[arg(long)]
        case: PathBuf,
    },
    /// Store a case in the run store and print its id.
    Upload {
        #[arg(long)]
        case: PathBuf,
    },
    /// Search a shedding plan for one outage.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Line id to take out; repeat or separate with commas.
        #[arg(long, value_delimiter = ',')]
        outage: Vec<usize>,
        /// Print the stored record instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Classify every single-line outage.
    Screen {
        #[command(flatten)]
        common: Common,
        /// Write the summary row as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// List each case that needed a search.
        #[arg(long)]
        verbose: bool,
    },
    /// Exhaustive search for small instances.
    Oracle {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, value_delimiter = ',')]
        outage: Vec<usize>,
        /// Gene lattice step; 1.0 is binary shedding.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, default_value_t = BRUTE_FORCE_LIMIT)]
        limit: u128,
        /// Only these loads may shed; others stay fully served.
        #[arg(long, value_delimiter = ',')]
        free: Vec<usize>,
        #[arg(long)]
        thermal: bool,
    },
    /// List stored runs, or print one record.
    Runs { id: Option<String> },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = ServiceConfig::default().workers)]
        workers: usize,
        #[arg(long, default_value_t = 32)]
        max_body_mb: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    case: PathBuf,
    #[arg(long, default_value = "partial")]
    mode: Mode,
    #[arg(long)]
    seed: Option<u64>,
    /// Stop after this many generations without improvement.
    #[arg(long)]
    saturate: Option<usize>,
    /// Importance threshold of the first stage (multistep).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Gene lattice step for partial and multistep modes.
    #[arg(long)]
    step: Option<f64>,
    /// Importance override `LOAD=VALUE`; repeatable.
    #[arg(long, value_parser = parse_importance)]
    importance: Vec<(usize, f64)>,
    /// Judge safety on line current only: no reactive limits, no voltage band.
    #[arg(long)]
    thermal: bool,
}

fn parse_importance(s: &str) -> Result<(usize, f64), String> {
    let (load, value) = s.split_once('=').ok_or("expected LOAD=VALUE")?;
    Ok((
        load.trim().parse().map_err(|e| format!("load id: {e}"))?,
        value.trim().parse().map_err(|e| format!("importance: {e}"))?,
    ))
}

impl Common {
    fn ga(&self) -> gridshed::ga::GAConfig {
        let mut ga = gridshed::ga::GAConfig::default();
        if let Some(n) = self.max_iterations {
            ga.max_iterations = n;
        }
        if let Some(s) = self.step {
            ga.gene_step = s;
        }
        ga
    }

    fn importance(&self) -> BTreeMap<usize, f64> {
        self.importance.iter().copied().collect()
    }
}

fn solver(thermal: bool) -> SolverOptions {
    if thermal {
        SolverOptions::thermal_only()
    } else {
        SolverOptions::default()
    }
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

/// Reads a case, stores its canonical form and returns the network parsed
/// back from it, as the service would.
fn load_case(store: &RunStore, path: &PathBuf) -> CliResult<(String, Network)> {
    let net = read_case_file(path)?;
    let canonical = serialize_case_compact(&net);
    let id = store.store_case(&canonical)?;
    Ok((id, parse_case(&canonical)?))
}

fn print_plan(net: &Network, r: &GAResult) {
    println!(
        "feasible: {}  shed: {:.2} MW / {:.2} MVAr  fitness: {:.2}",
        r.feasible, r.shed_mw, r.shed_mvar, r.best_fitness.scalar
    );
    for s in &r.shed_loads {
        let l = &net.loads()[s.load];
        println!(
            "  load {:>3} (bus {}, {:.1} MW, importance {:.3}) served at {:.1}",
            s.load, l.bus, l.p_mw, s.importance, s.fraction
        );
    }
    println!(
        "generations: {}  evaluations: {}  elapsed: {:.2} s",
        r.generations_run, r.evaluations, r.elapsed_s
    );
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Validate { case } => {
            let net = read_case_file(&case)?;
            let (p, q) = net.total_load();
            println!(
                "ok: {} buses, {} lines, {} transformers, {} generators, {} loads ({p:.1} MW, {q:.1} MVAr)",
                net.buses().len(),
                net.lines().len(),
                net.transformers().len(),
                net.generators().len(),
                net.n_loads()
            );
            let safety = evaluate_safety(&net, &SolverOptions::default())?;
            println!(
                "intact case: {} (max loading {:.1}%)",
                if safety.safe { "safe" } else { "unsafe" },
                safety.max_loading_percent
            );
        }
        Command::Upload { case } => {
            let store = RunStore::from_env()?;
            let (id, _) = load_case(&store, &case)?;
            println!("{id}");
        }
        Command::Optimize { common, outage, json } => {
            let store = RunStore::from_env()?;
            let (case_id, net) = load_case(&store, &common.case)?;
            let req = OptimizeRequest {
                outage,
                mode: common.mode,
                ga: common.ga(),
                seed: common.seed,
                saturate: common.saturate,
                threshold: common.threshold,
                stages: None,
                importance: common.importance(),
                solver: solver(common.thermal),
            };
            let cfg = req.normalize(&net)?;
            let run_id = cfg.run_id(&case_id)?;
            let record = if store.contains(&run_id) {
                store.load_run(&run_id)?
            } else {
                let run = runner::optimize(&net, &cfg, &|_, _| {})?;
                let record = runner::optimize_record(&case_id, &cfg, run)?;
                store.store_run(&record)?;
                record
            };
            if json {
                std::io::stdout().write_all(&record.to_bytes()?)?;
                return Ok(());
            }
            let RunPayload::Optimize(o) = &record.payload else {
                return Err("stored record is not an optimize run".into());
            };
            println!("run {}", record.run_id);
            if let Some(stages) = &o.stages {
                for s in stages {
                    println!(
                        "stage {} (threshold {}): {} free loads, feasible {}",
                        s.stage,
                        s.threshold.map_or("none".into(), |t| t.to_string()),
                        s.free_loads,
                        s.feasible
                    );
                }
            }
            print_plan(&apply_importance(&net, &cfg.importance)?, &o.result);
        }
        Command::Screen { common, out, verbose } => {
            let store = RunStore::from_env()?;
            let (case_id, net) = load_case(&store, &common.case)?;
            let req = ScreenRequest {
                mode: common.mode,
                ga: common.ga(),
                seed: common.seed,
                saturate: common.saturate,
                threshold: common.threshold,
                stages: None,
                importance: common.importance(),
                solver: solver(common.thermal),
            };
            let cfg = req.normalize(&net)?;
            let run_id = cfg.run_id(&case_id)?;
            let record = if store.contains(&run_id) {
                store.load_run(&run_id)?
            } else {
                let progress = |done: usize, total: usize| eprint!("\rscreened {done}/{total}");
                let report = runner::screen(&net, &cfg, &progress)?;
                eprintln!();
                let record = runner::screen_record(&case_id, &cfg, report)?;
                store.store_run(&record)?;
                record
            };
            let RunPayload::Screening(report) = &record.payload else {
                return Err("stored record is not a screening run".into());
            };
            println!("run {}", record.run_id);
            println!(
                "{}: {} infeasible, {} solution found, {} no instability, {:.1} s",
                report.approach, report.n_infeasible, report.n_solution, report.n_no_instability, report.runtime_s
            );
            if verbose {
                for c in &report.cases {
                    match &c.classification {
                        Classification::NoInstability => {}
                        Classification::SolutionFound(r) => {
                            println!("  {:<10} solution  shed {:.1} MW", c.case.label, r.shed_mw)
                        }
                        Classification::Infeasible(_) => println!("  {:<10} infeasible", c.case.label),
                    }
                }
            }
            if let Some(path) = out {
                let mut w = BufWriter::new(File::create(&path)?);
                write_screening_csv(&[ScreeningRow::from(report)], &mut w)?;
                w.flush()?;
            }
        }
        Command::Oracle {
            case,
            outage,
            step,
            limit,
            free,
            thermal,
        } => {
            let net = read_case_file(&case)?.apply_outage(&outage)?;
            let mut search = BruteForce::new(&net, step, &solver(thermal)).limit(limit);
            if !free.is_empty() {
                search = search.free_only(&free);
            }
            println!("search space: {} points", search.size()?);
            print_plan(&net, &search.run()?);
        }
        Command::Runs { id: None } => {
            for e in RunStore::from_env()?.list()? {
                println!("{}  {:<9}  case {}  {}", e.run_id, e.kind, e.case_id, e.created_unix_ms);
            }
        }
        Command::Runs { id: Some(id) } => {
            std::io::stdout().write_all(&RunStore::from_env()?.record_bytes(&id)?)?;
        }
        Command::Serve {
            addr,
            workers,
            max_body_mb,
        } => {
            let cfg = ServiceConfig {
                workers,
                max_body_bytes: max_body_mb << 20,
            };
            let store = RunStore::from_env()?;
            tokio::runtime::Runtime::new()?.block_on(gridshed_service::serve(addr, store, cfg))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(path) = e.downcast_ref::<gridshed::Error>().and_then(|e| e.field_path()) {
                eprintln!("  at {path}");
            }
            ExitCode::FAILURE
        }
    }
}
