use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sephier_cli::{
    replay, run, write_trace, Check, Expect, Report, RunConfig, RunError, EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_PASS,
};

#[derive(Parser)]
#[command(name = "sephier", version, about = "Separability checks for nonlinear Schrödinger hierarchies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plain tensor-derivation residual sweep
    PlainDerivation(RunArgs),
    /// (Anti-)symmetric tensor-derivation residual sweep
    SymDerivation(RunArgs),
    /// Pair-jet invariance under the scale and shift flows
    FlowInvariance(RunArgs),
    /// Flow vector field applied to the separability right side
    FlowField(RunArgs),
    /// Constant-k linearity certificate
    CertifyLinearity(RunArgs),
    /// Separability for pairs of N-particle conglomerates
    Conglomerate(RunArgs),
    /// Grid evolution separation gaps
    EvolveGap(RunArgs),
    /// Gauged linear hierarchy against deformed and undeformed products
    GaugeDemo(RunArgs),
    /// Every suite in order
    All(RunArgs),
    /// Re-evaluate the witnesses stored in a report
    Replay { report: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration (defaults apply when omitted)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Report path; the report goes to stdout otherwise
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evolution trace CSV path
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_enum)]
    expect: Option<Expect>,
}

fn configure_threads() -> Result<(), RunError> {
    let Ok(value) = std::env::var("SEPHIER_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| RunError::Config(format!("SEPHIER_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| RunError::Config(e.to_string()))
}

fn run_check(check: Check, args: RunArgs) -> Result<i32, RunError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.check = check;
    config.seed = args.seed.unwrap_or(config.seed);
    config.samples = args.samples.unwrap_or(config.samples);
    config.expect = args.expect.unwrap_or(config.expect);
    config.out = args.out.or(config.out);
    config.csv = args.csv.or(config.csv);
    let outcome = run(&config)?;
    let report = &outcome.report;
    for c in &report.checks {
        eprintln!(
            "{} {} value={:.3e} {:?} {:.1e} ({})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.bound,
            c.threshold,
            c.verdict
        );
    }
    for s in &report.skipped {
        eprintln!("SKIP {}: {}", s.check, s.reason);
    }
    match &config.out {
        Some(path) => {
            std::fs::write(path, report.to_json() + "\n").map_err(|e| RunError::Io { path: path.clone(), source: e })?
        }
        None => println!("{}", report.to_json()),
    }
    if let Some(path) = &config.csv {
        write_trace(path, &outcome.trace)?;
    }
    Ok(report.exit_code)
}

fn run_replay(path: PathBuf) -> Result<i32, RunError> {
    let text = std::fs::read_to_string(&path).map_err(|e| RunError::Io { path: path.clone(), source: e })?;
    let report = Report::from_json(&text)?;
    let outcomes = replay(&report)?;
    println!("{}", serde_json::to_string_pretty(&outcomes).expect("outcomes serialize"));
    Ok(if outcomes.iter().all(|o| o.agree) { EXIT_PASS } else { EXIT_CHECK_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::PlainDerivation(a) => run_check(Check::PlainDerivation, a),
        Command::SymDerivation(a) => run_check(Check::SymDerivation, a),
        Command::FlowInvariance(a) => run_check(Check::FlowInvariance, a),
        Command::FlowField(a) => run_check(Check::FlowField, a),
        Command::CertifyLinearity(a) => run_check(Check::CertifyLinearity, a),
        Command::Conglomerate(a) => run_check(Check::Conglomerate, a),
        Command::EvolveGap(a) => run_check(Check::EvolveGap, a),
        Command::GaugeDemo(a) => run_check(Check::GaugeDemo, a),
        Command::All(a) => run_check(Check::All, a),
        Command::Replay { report } => run_replay(report),
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
