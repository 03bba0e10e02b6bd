//! `topo-opt`: run the optimization experiments, the property suites, and
//! diagram distances from the command line.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use topo_opt::experiments::{run_experiment, ExperimentName, ExperimentSpec, GRID_DECAY, GRID_LR};
use topo_opt::metrics::fg_distance;
use topo_opt::persistence::PersistenceDiagram;
use topo_opt::validation::{
    gradient_suite, metric_suite, moving_set_suite, pairing_suite, stability_suite, vineyard_suite, GradFamily,
    GradLoss,
};
use topo_opt::TopoError;

/// Environment variable holding the number of worker threads for grid cells.
const THREADS_ENV: &str = "TOPO_OPT_THREADS";

#[derive(Parser)]
#[command(name = "topo-opt", version, about = "Persistence-based topological optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment over a step-size grid and write its artifacts.
    Run {
        /// circle_outlier, circle_subsample or sphere_h2.
        #[arg(long)]
        experiment: String,
        /// Comma-separated methods; defaults to the experiment's methods.
        #[arg(long, value_delimiter = ',')]
        method: Vec<String>,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        /// Learning rate; the standard grid values are used when omitted.
        #[arg(long)]
        lr: Option<f64>,
        /// Decay rate; the standard grid values are used when omitted.
        #[arg(long)]
        decay: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the randomized property suites against their oracles.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// FG_q distance between two diagram files (`dim,birth,death` tables).
    Distance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Order q; `inf` gives the bottleneck distance.
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Ground norm q′ on the plane.
        #[arg(long, default_value_t = 2.0)]
        ground: f64,
        /// Homology dimension; all dimensions when omitted.
        #[arg(long)]
        dim: Option<usize>,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<TopoError> for Failure {
    fn from(e: TopoError) -> Self {
        match e {
            TopoError::InvalidParameter(_) | TopoError::Parse { .. } => Failure::Validation(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn threads_from_env() -> Result<usize, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::Validation(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(1),
    }
}

fn run(
    experiment: &str,
    methods: Vec<String>,
    steps: usize,
    lr: Option<f64>,
    decay: Option<f64>,
    seed: u64,
    out: PathBuf,
) -> Result<(), Failure> {
    let name: ExperimentName = experiment.parse()?;
    let mut spec = ExperimentSpec::preset(name, out);
    if !methods.is_empty() {
        spec.methods = methods;
    }
    spec.steps = steps;
    spec.seed = seed;
    spec.threads = threads_from_env()?;
    let lrs: Vec<f64> = lr.map_or_else(|| GRID_LR.to_vec(), |x| vec![x]);
    let decays: Vec<f64> = decay.map_or_else(|| GRID_DECAY.to_vec(), |x| vec![x]);
    spec.grid = lrs.iter().flat_map(|&l| decays.iter().map(move |&g| (l, g))).collect();
    let start = Instant::now();
    let report = run_experiment(&spec)?;
    println!("method,lr,decay,initial_loss,final_loss,total_ms,stop");
    for (method, i) in &report.best {
        let c = &report.cells[*i];
        println!(
            "{method},{},{},{:.6},{:.6},{:.0},{:?}",
            c.lr,
            c.decay,
            c.initial_loss(),
            c.final_loss(),
            c.total_ms(),
            c.outcome.stop
        );
    }
    log::info!("{} cells in {:.1?}; artifacts in {}", report.cells.len(), start.elapsed(), spec.out.display());
    Ok(())
}

fn check(seed: u64) -> Result<(), Failure> {
    let mut failed = Vec::new();
    let mut report = |name: &str, trials: usize, failures: &[String]| {
        let status = if failures.is_empty() { "PASS" } else { "FAIL" };
        println!("{status} {name}: {trials} trials, {} failures", failures.len());
        for f in failures.iter().take(5) {
            println!("    {f}");
        }
        if !failures.is_empty() {
            failed.push(name.to_string());
        }
    };
    let r = pairing_suite(seed, 200, 30);
    report("pairing vs rank oracle", r.trials, &r.failures);
    let r = vineyard_suite(seed + 1, 100, 30);
    report("vineyard transpositions vs re-reduction", r.trials, &r.failures);
    let (r, cases) = moving_set_suite(seed + 2, 200, 50);
    let mut failures = r.failures;
    if cases.len() < 4 {
        failures.push(format!("only {} of 4 moving-set cases exercised", cases.len()));
    }
    report("moving set fast vs naive", r.trials, &failures);
    let r = metric_suite(seed + 3, 100, 5, 1e-12);
    report("FG distance vs enumeration", r.trials, &r.failures);
    let r = stability_suite(seed + 4, 100);
    report("bottleneck stability (lower-star)", r.trials, &r.failures);
    for fam in [GradFamily::Rips, GradFamily::WeightedRips, GradFamily::LowerStar] {
        for loss in [GradLoss::TotalPersistence, GradLoss::DistanceToTarget, GradLoss::Singleton] {
            let r = gradient_suite(seed + 5, fam, loss, 100, 1e-6, 1e-4);
            report(&format!("gradient {fam:?} × {loss:?} vs finite differences"), r.configs, &r.failures);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("{} suite(s) failed: {}", failed.len(), failed.join("; "))))
    }
}

fn read_diagram(path: &PathBuf) -> Result<PersistenceDiagram, Failure> {
    let file = File::open(path).map_err(|e| Failure::Runtime(format!("cannot open {}: {e}", path.display())))?;
    Ok(PersistenceDiagram::read_text(BufReader::new(file))?)
}

fn distance(a: PathBuf, b: PathBuf, q: f64, ground: f64, dim: Option<usize>) -> Result<(), Failure> {
    if !(q >= 1.0) || !(ground >= 1.0) {
        return Err(Failure::Validation(format!("q and ground norm must be at least 1 (q={q}, ground={ground})")));
    }
    let (da, db) = (read_diagram(&a)?, read_diagram(&b)?);
    let dims: Vec<usize> = match dim {
        Some(p) => vec![p],
        None => (0..da.dims.len().max(db.dims.len())).collect(),
    };
    for p in dims {
        let (d, _) = fg_distance(&da.ordinary(p), &db.ordinary(p), q, ground);
        println!("{p},{d}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { experiment, method, steps, lr, decay, seed, out } => {
            run(&experiment, method, steps, lr, decay, seed, out)
        }
        Command::Check { seed } => check(seed),
        Command::Distance { a, b, q, ground, dim } => distance(a, b, q, ground, dim),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
