//! `qsdc` command-line driver.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 internal
//! invariant violation.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsdc::backend::{BackendKind, OracleMode};
use qsdc::runner::{run_with, sweep, write_sweep_csv, Grid, RunConfig, RunOptions};
use qsdc::{BitVector, Error, Leg, Strategy, Variant};

#[derive(Parser)]
#[command(name = "qsdc", version, about = "Quantum secure direct communication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials of one configuration and write a JSON report.
    Run(RunArgs),
    /// Run a parameter grid and write a CSV table of aggregates.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    m: Option<usize>,
    /// Two-party secret, binary (MSB first) or 0x-prefixed hex.
    #[arg(long)]
    secret: Option<BitVector>,
    #[arg(long)]
    secret_b: Option<BitVector>,
    #[arg(long)]
    secret_c: Option<BitVector>,
    #[arg(long)]
    backend: Option<BackendKind>,
    #[arg(long)]
    trials: Option<usize>,
    /// none, measure-resend, intercept-resend-fake, entangle-measure or pns.
    #[arg(long)]
    attack: Option<Strategy>,
    /// distribution or return.
    #[arg(long)]
    leg: Option<Leg>,
    /// Measure-resend in a random Z/X basis per qubit.
    #[arg(long)]
    eve_random_basis: bool,
    #[arg(long)]
    decoys: Option<usize>,
    #[arg(long)]
    validate_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// diagonal or circuit.
    #[arg(long, value_parser = parse_oracle_mode)]
    oracle_mode: Option<OracleMode>,
    #[arg(long)]
    dense_cap: Option<usize>,
    /// Disable decoys and entanglement validation.
    #[arg(long)]
    no_security: bool,
    /// Record wall-clock time in the report.
    #[arg(long)]
    timing: bool,
    /// Report path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON grid: a `base` configuration plus optional axis lists.
    #[arg(long)]
    grid: PathBuf,
    /// CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_oracle_mode(s: &str) -> Result<OracleMode, String> {
    match s {
        "diagonal" => Ok(OracleMode::Diagonal),
        "circuit" => Ok(OracleMode::Circuit),
        _ => Err(format!("unknown oracle mode `{s}` (expected diagonal or circuit)")),
    }
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(variant, m, backend, trials, seed, oracle_mode, dense_cap);
        if self.secret.is_some() {
            c.secret = self.secret;
        }
        if self.secret_b.is_some() {
            c.secret_b = self.secret_b;
        }
        if self.secret_c.is_some() {
            c.secret_c = self.secret_c;
        }
        if let Some(s) = self.attack {
            c.attack.strategy = s;
        }
        if let Some(l) = self.leg {
            c.attack.leg = l;
        }
        if self.eve_random_basis {
            c.attack.random_basis = true;
        }
        if self.decoys.is_some() {
            c.decoys = self.decoys;
        }
        if self.validate_k.is_some() {
            c.validate_k = self.validate_k;
        }
        if self.no_security {
            c.security = false;
        }
        Ok(c)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 1,
        Error::Config { .. }
        | Error::Parse(_)
        | Error::Resource(_)
        | Error::Dimension { .. }
        | Error::Argument(_) => 2,
        _ => 3,
    }
}

fn main_run(args: RunArgs) -> Result<u8, Error> {
    let timing = args.timing;
    let out = args.out.clone();
    let config = args.into_config()?;
    let report = run_with(&config, RunOptions { timing })?;
    let mut w = output(&out)?;
    writeln!(w, "{}", report.to_json()?)?;
    w.flush()?;
    let a = &report.aggregates;
    eprintln!(
        "{} trials: decode success {:.4}, abort {:.4}, detection {:.4}",
        a.trials, a.decode_success_rate, a.abort_rate, a.detection_rate
    );
    let violations = report.invariant_violations();
    for v in &violations {
        eprintln!("invariant violation: {v}");
    }
    Ok(if violations.is_empty() { 0 } else { 3 })
}

fn main_sweep(args: SweepArgs) -> Result<u8, Error> {
    let text = std::fs::read_to_string(&args.grid)
        .map_err(|e| Error::Io(format!("{}: {e}", args.grid.display())))?;
    let grid = Grid::from_json(&text)?;
    let rows = sweep(&grid);
    write_sweep_csv(&rows, output(&args.out)?)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    eprintln!("{} cells, {failed} failed", rows.len());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => main_run(args),
        Command::Sweep(args) => main_sweep(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
