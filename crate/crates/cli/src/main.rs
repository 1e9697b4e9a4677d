use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anonqtx::analysis::{sweep, SWEEP_COLUMNS};
use anonqtx::experiment::{
    run_experiment, ExperimentConfig, ExperimentError, RunDocument, RunStatus, SweepConfig, PAIR_COLUMNS,
};
use anonqtx::qsim::BellLabel;
use anonqtx::verify::{run_battery, CheckRow, Fault, VerifyOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const RESULT_STEM: &str = "result";
const LOG_FILE: &str = "channel_log.jsonl";
const SWEEP_STEM: &str = "sweep";
const VERIFY_STEM: &str = "verify";

#[derive(Parser)]
#[command(name = "anonqtx", version, about = "Anonymous quantum transmission simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol execution from a configuration document.
    Run(RunArgs),
    /// Run the self-check battery; the exit code is the number of failed rows.
    Verify(VerifyArgs),
    /// Evaluate the detection bound and Monte Carlo rates over a grid.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipParity,
}

#[derive(Args)]
struct Output {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Replace existing output files.
    #[arg(long)]
    force_overwrite: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    /// Divide trial counts by ten and widen statistical tolerances.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the table to the output directory as well.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    force_overwrite: bool,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quick: bool,
    #[command(flatten)]
    output: Output,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let message = match &e {
            ExperimentError::Parse { .. } => format!("config error: {e}"),
            _ => e.to_string(),
        };
        Failure::new(1, message)
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(1, format!("{}: {e}", path.display()))
}

fn read_config(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

/// Fails if any target exists and overwriting was not requested.
fn prepare(dir: &Path, files: &[PathBuf], force: bool) -> Result<(), Failure> {
    if !force {
        if let Some(existing) = files.iter().find(|f| f.exists()) {
            return Err(Failure::new(
                1,
                format!("{} exists; pass --force-overwrite to replace it", existing.display()),
            ));
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("result serializes");
    bytes.push(b'\n');
    bytes
}

fn csv_bytes<T: Serialize>(columns: &[&str], rows: &[T]) -> Result<Vec<u8>, Failure> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::new(1, format!("csv: {e}"));
    writer.write_record(columns).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.into_inner().map_err(|e| Failure::new(1, format!("csv: {e}")))
}

#[derive(Serialize)]
struct PairRow {
    seed: u64,
    distributor: usize,
    attempt: u32,
    round: u32,
    label: BellLabel,
    touched: bool,
    fidelity: f64,
}

fn pair_rows(doc: &RunDocument) -> Vec<PairRow> {
    doc.pairs
        .iter()
        .map(|p| PairRow {
            seed: doc.seed,
            distributor: p.distributor.0,
            attempt: p.attempt,
            round: p.round,
            label: p.label,
            touched: p.touched,
            fidelity: p.fidelity,
        })
        .collect()
}

fn cmd_run(args: &RunArgs) -> Result<u8, Failure> {
    let mut config = ExperimentConfig::parse(&read_config(&args.config)?)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let format = args.output.format.unwrap_or(Format::Json);
    let result_path = args.output.out.join(format!("{RESULT_STEM}.{}", format.extension()));
    let log_path = args.output.out.join(LOG_FILE);
    prepare(&args.output.out, &[result_path.clone(), log_path.clone()], args.output.force_overwrite)?;

    let output = run_experiment(&config, LOG_FILE)?;
    let doc = &output.document;
    let bytes = match format {
        Format::Json => json_bytes(doc),
        Format::Csv => csv_bytes(&PAIR_COLUMNS, &pair_rows(doc))?,
    };
    write_file(&result_path, &bytes)?;
    write_file(&log_path, output.log.to_json_lines().as_bytes())?;
    eprintln!(
        "protocol {}: {} pairs, {} restarts, status {:?}",
        doc.protocol, doc.pair_count, doc.restarts, doc.status
    );
    Ok(match doc.status {
        RunStatus::Completed => 0,
        RunStatus::RestartLimit => 2,
    })
}

fn print_table(rows: &[CheckRow]) {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = std::io::stdout().lock();
    for row in rows {
        let mark = if row.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{mark}  {:width$}  {}", row.name, row.detail);
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let format = args.format.unwrap_or(Format::Json);
    let target = args
        .out
        .as_ref()
        .map(|dir| (dir.clone(), dir.join(format!("{VERIFY_STEM}.{}", format.extension()))));
    if let Some((dir, path)) = &target {
        prepare(dir, std::slice::from_ref(path), args.force_overwrite)?;
    }
    let opts = VerifyOptions {
        quick: args.quick,
        fault: args.inject_fault.map(|f| match f {
            FaultArg::FlipParity => Fault::FlipParity,
        }),
        seed: args.seed,
    };
    let rows = run_battery(&opts);
    print_table(&rows);
    if let Some((_, path)) = &target {
        #[derive(Serialize)]
        struct Row<'a> {
            seed: u64,
            name: &'a str,
            passed: bool,
            detail: &'a str,
        }
        let table: Vec<Row> = rows
            .iter()
            .map(|r| Row {
                seed: args.seed,
                name: r.name,
                passed: r.passed,
                detail: &r.detail,
            })
            .collect();
        let bytes = match format {
            Format::Json => json_bytes(&table),
            Format::Csv => csv_bytes(&["seed", "name", "passed", "detail"], &table)?,
        };
        write_file(path, &bytes)?;
    }
    let failures = rows.iter().filter(|r| !r.passed).count();
    Ok(failures.min(u8::MAX as usize) as u8)
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, Failure> {
    let config = SweepConfig::parse(&read_config(&args.config)?)?;
    let seed = args.seed.unwrap_or(config.seed);
    let format = args.output.format.unwrap_or(Format::Csv);
    let path = args.output.out.join(format!("{SWEEP_STEM}.{}", format.extension()));
    prepare(&args.output.out, std::slice::from_ref(&path), args.output.force_overwrite)?;
    let rows = sweep(&config.spec(args.quick), seed).map_err(|e| Failure::new(1, e.to_string()))?;
    let bytes = match format {
        Format::Json => json_bytes(&serde_json::json!({ "seed": seed, "rows": rows })),
        Format::Csv => csv_bytes(&SWEEP_COLUMNS, &rows)?,
    };
    write_file(&path, &bytes)?;
    eprintln!("{} grid points written to {}", rows.len(), path.display());
    Ok(0)
}

fn configure_threads() {
    if let Some(n) = std::env::var("ANONQTX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
