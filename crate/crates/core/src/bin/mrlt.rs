use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mrlt::runner::{self, RunConfig};
use mrlt::{Error, SchemeKind};

/// Adaptive multiresolution finite-volume solver with local time-stepping.
#[derive(Parser, Debug)]
#[command(name = "mrlt", version, about)]
struct Args {
    /// Configuration file (key = value lines with [run]/[params] sections).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Problem name: advection1d, burgers1d, burgers2d, flame1d, euler2d.
    #[arg(long)]
    problem: Option<String>,

    /// Scheme: fv-rk2, fv-rk3, mr-rk2, mr-rk3, mrlt-rk2, mrlt-nerk2, mrlt-nerk3.
    #[arg(long)]
    scheme: Option<String>,

    /// Finest refinement level L.
    #[arg(long)]
    max_level: Option<u8>,

    /// Detail threshold epsilon.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Courant number sigma.
    #[arg(long)]
    cfl: Option<f64>,

    /// Final time.
    #[arg(long)]
    tend: Option<f64>,

    /// Fixed time step (overrides the CFL choice).
    #[arg(long)]
    dt: Option<f64>,

    /// Output directory for snapshots, grid dump and metrics.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Snapshot cadence in coarse cycles.
    #[arg(long)]
    snapshot_every: Option<u64>,

    /// Level of the FV/RK3 reference run used for the L1 error.
    #[arg(long)]
    reference_level: Option<u8>,

    /// Run the fixed-two-grid convergence study instead of a single run.
    #[arg(long)]
    convergence: bool,
}

fn build_config(args: &Args) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            runner::parse_config(&text)?
        }
        None => {
            let problem = args.problem.clone().ok_or_else(|| Error::Config {
                line: 0,
                msg: "--problem is required without --config".into(),
            })?;
            let scheme = args.scheme.as_deref().ok_or_else(|| Error::Config {
                line: 0,
                msg: "--scheme is required without --config".into(),
            })?;
            RunConfig::new(&problem, SchemeKind::parse(scheme)?)
        }
    };
    if let Some(p) = &args.problem {
        cfg.problem = p.clone();
    }
    if let Some(s) = &args.scheme {
        cfg.scheme = SchemeKind::parse(s)?;
    }
    if args.max_level.is_some() {
        cfg.max_level = args.max_level;
    }
    if args.epsilon.is_some() {
        cfg.epsilon = args.epsilon;
    }
    if args.cfl.is_some() {
        cfg.sigma = args.cfl;
    }
    if args.tend.is_some() {
        cfg.t_end = args.tend;
    }
    if args.dt.is_some() {
        cfg.dt_override = args.dt;
    }
    if args.out.is_some() {
        cfg.out_dir = args.out.clone();
    }
    if args.snapshot_every.is_some() {
        cfg.snapshot_every = args.snapshot_every;
    }
    if args.reference_level.is_some() {
        cfg.reference_level = args.reference_level;
    }
    Ok(cfg)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config { .. }
        | Error::Constraint { .. }
        | Error::UnknownProblem(_)
        | Error::UnknownScheme(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();

    if args.convergence {
        let schemes = [
            SchemeKind::FvRk2,
            SchemeKind::MrRk2,
            SchemeKind::MrltRk2,
            SchemeKind::MrltNerk2,
            SchemeKind::FvRk3,
            SchemeKind::MrRk3,
            SchemeKind::MrltNerk3,
        ];
        let dt_list = [1.6e-4, 0.8e-4];
        match runner::convergence_harness(&schemes, &dt_list) {
            Ok(rows) => {
                println!("{:<14} {:>10} {:>10}", "scheme", "dt=1.6e-4", "dt=0.8e-4");
                for row in rows {
                    print!("{:<14}", row.scheme.name());
                    for p in row.orders {
                        print!(" {:>10.4}", p);
                    }
                    println!();
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code_for(&e))
            }
        }
    } else {
        let cfg = match build_config(&args) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code_for(&e));
            }
        };
        match runner::run(&cfg) {
            Ok(metrics) => {
                println!(
                    "problem={} scheme={} cycles={} wall_s={:.3} compression_mean={:.3} compression_final={:.3}",
                    metrics.problem,
                    metrics.scheme.name(),
                    metrics.cycles,
                    metrics.wall_seconds,
                    metrics.compression_mean(),
                    metrics.compression_final()
                );
                if let Some(e) = &metrics.e_l1 {
                    let parts: Vec<String> = e.iter().map(|v| format!("{v:.6e}")).collect();
                    println!("e_l1={}", parts.join(","));
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code_for(&e))
            }
        }
    }
}
