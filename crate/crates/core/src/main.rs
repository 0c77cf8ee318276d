use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pfasst_mg::harness::{parse_config, run_experiment, Experiment, HarnessError};
use pfasst_mg::par;
use pfasst_mg::pfasst::write_trace;

/// Runs one experiment and writes its CSV table.
#[derive(Debug, Parser)]
#[command(name = "pfasst-mg", version)]
struct Cli {
    /// damping | order-study | vcycle-study | weak-scaling | strong-3d | single-run
    experiment: String,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel kernels.
    #[arg(long)]
    threads: Option<usize>,
    /// Override one config key, e.g. `--set tol=1e-10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Per-rank PFASST trace CSV (single-run with a PFASST variant, strong-3d).
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn run(cli: &Cli) -> Result<bool, HarnessError> {
    let experiment: Experiment = cli.experiment.parse()?;
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?,
        None => String::new(),
    };
    let cfg = parse_config(experiment, &text, &cli.set)?;
    if let Some(0) = cli.threads {
        return Err(HarnessError::Config("--threads must be >= 1".into()));
    }
    let outcome = match cli.threads {
        Some(t) => par::with_threads(t, || run_experiment(&cfg))?,
        None => run_experiment(&cfg)?,
    };
    if cli.trace.is_some() && outcome.trace.is_none() {
        return Err(HarnessError::Config(format!("--trace is not available for {experiment} with this variant")));
    }
    let stamp = cfg.raw.stamp();
    match &cli.out {
        Some(path) => outcome.table.write_csv(BufWriter::new(File::create(path)?), &stamp)?,
        None => outcome.table.write_csv(io::stdout().lock(), &stamp)?,
    }
    if let (Some(path), Some(rows)) = (&cli.trace, &outcome.trace) {
        let mut w = BufWriter::new(File::create(path)?);
        write_trace(rows, &mut w).map_err(|e| HarnessError::Io(io::Error::other(e.to_string())))?;
        w.flush()?;
    }
    let mut err = io::stderr().lock();
    for line in &outcome.summary {
        writeln!(err, "{line}")?;
    }
    Ok(!outcome.unconverged)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: some runs did not reach the residual tolerance");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
