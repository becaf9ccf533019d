//! `augur` — batch forecasting pipeline over unconventional event signals.
//!
//! Subcommands: `synth` (seeded synthetic streams), `generate` (per-cell
//! training datasets), `filter` (standalone rebalancing), `sweep` (the full
//! cross-validated grid), and `report` (summaries and plot data). Exit
//! codes: 0 success, 1 input error, 2 internal error; every failure prints
//! one machine-parsable `error: <CODE>: <text>` line on stderr.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use augur_cli::config::RunConfig;
use augur_cli::{report, synth};
use augur_core::dataset::{read_dataset, write_dataset_with_metadata, Metadata};
use augur_core::eval;
use augur_core::timeline::{
    generate_datasets, read_events, read_events_mapped, write_events, EventRecord,
};

#[derive(Parser)]
#[command(
    name = "augur",
    version,
    about = "Forecast attack events from unconventional signal streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Declarative run configuration (TOML); defaults apply when absent.
    /// Every key can be overridden with AUGUR_* environment variables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap the worker thread count (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Output directory (or output file for synth/filter).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seed-deterministic synthetic event stream.
    Synth,
    /// Materialize one training dataset per (attack type, t_x, t_g) cell.
    Generate {
        /// Event stream file (native format unless a column mapping is
        /// configured).
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Apply one rebalancing filter to a dataset CSV.
    Filter {
        /// Input dataset CSV.
        #[arg(long)]
        input: PathBuf,
        /// Filter name: smote, spread, or smote_pp.
        #[arg(long)]
        filter: String,
    },
    /// Evaluate every (attack, t_x, t_g, filter) cell with repeated
    /// stratified cross-validation and write the report files.
    Sweep {
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Render a human-readable summary (plus plot data) from sweep outputs.
    Report {
        /// cells.csv produced by sweep; defaults to <out>/cells.csv.
        #[arg(long)]
        cells: Option<PathBuf>,
    },
}

enum CliError {
    Input(String),
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "error: INPUT: {msg}"),
            CliError::Internal(msg) => write!(f, "error: INTERNAL: {msg}"),
        }
    }
}

impl From<augur_core::Error> for CliError {
    fn from(e: augur_core::Error) -> CliError {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Input(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(1),
            CliError::Internal(_) => ExitCode::from(2),
        }
    }
}

fn main() -> ExitCode {
    let outcome = std::panic::catch_unwind(run);
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("{e}");
            e.code()
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unexpected panic".to_string());
            eprintln!("{}", CliError::Internal(msg));
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return Err(CliError::Input("invalid command line".into()));
        }
        Err(e) => {
            // --help / --version
            let _ = e.print();
            return Ok(());
        }
    };

    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| CliError::Internal(format!("cannot build worker pool: {e}")))?;

    match &cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Generate { events } => cmd_generate(&cfg, events.as_deref()),
        Command::Filter { input, filter } => cmd_filter(&cfg, input, filter),
        Command::Sweep { events } => pool.install(|| cmd_sweep(&cfg, events.as_deref())),
        Command::Report { cells } => cmd_report(&cfg, cells.as_deref()),
    }
}

fn load_events(cfg: &RunConfig, flag: Option<&Path>) -> Result<Vec<EventRecord>, CliError> {
    let path = flag
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.events_path());
    if !path.exists() {
        return Err(CliError::Input(format!(
            "events file not found: {}",
            path.display()
        )));
    }
    let events = match cfg.column_map()? {
        Some(map) => read_events_mapped(&path, &map)?,
        None => read_events(&path)?,
    };
    Ok(events)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

/// Synth writes to `--out` directly when it names a `.csv` file, otherwise
/// into `<out>/events.csv`.
fn synth_target(cfg: &RunConfig) -> PathBuf {
    let out = cfg.out_dir();
    if out.extension().is_some_and(|e| e == "csv") {
        out
    } else {
        out.join("events.csv")
    }
}

fn cmd_synth(cfg: &RunConfig) -> Result<(), CliError> {
    let signal_config = cfg.signal_config()?;
    let spec = cfg.synth_spec()?;
    let events = synth::generate(&spec, &signal_config)?;
    let target = synth_target(cfg);
    if let Some(parent) = target.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_events(&events, &target)?;
    println!(
        "wrote {} events ({} attacks) to {}",
        events.len(),
        events
            .iter()
            .filter(|e| e.kind == augur_core::timeline::EventKind::Attack)
            .count(),
        target.display()
    );
    Ok(())
}

fn cmd_generate(cfg: &RunConfig, events_flag: Option<&Path>) -> Result<(), CliError> {
    let events = load_events(cfg, events_flag)?;
    let signal_config = cfg.signal_config()?;
    let grid = cfg.grid()?;
    let (gt_start, gt_end) = cfg.gt_span()?;
    let datasets = generate_datasets(
        &events,
        &signal_config,
        &cfg.grid.attack_types,
        &grid,
        gt_start,
        gt_end,
    )?;

    let dir = cfg.out_dir().join("datasets");
    ensure_dir(&dir)?;
    let mut written = 0usize;
    for ((attack, pair), ds) in &datasets {
        let name = format!("{attack}_{}_{}.csv", pair.t_x, pair.t_g);
        augur_core::dataset::write_dataset(ds, &dir.join(name))?;
        written += 1;
    }
    println!("wrote {written} datasets to {}", dir.display());
    Ok(())
}

fn cmd_filter(cfg: &RunConfig, input: &Path, filter_name: &str) -> Result<(), CliError> {
    if !input.exists() {
        return Err(CliError::Input(format!(
            "dataset not found: {}",
            input.display()
        )));
    }
    let spec = cfg.filter_spec(filter_name)?;
    let ds = read_dataset(input)?;
    let output = spec.apply(&ds, cfg.seed)?;

    let target = {
        let out = cfg.out_dir();
        if out.extension().is_some_and(|e| e == "csv") {
            out
        } else {
            ensure_dir(&out)?;
            let stem = input
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "dataset".into());
            out.join(format!("{stem}_{filter_name}.csv"))
        }
    };
    let stats = &output.stats;
    let mut meta = Metadata::new();
    meta.set("filter", filter_name);
    meta.set("seed", cfg.seed);
    meta.set("removed_majority", stats.removed_majority);
    meta.set("synthetic_minority", stats.synthetic_minority);
    meta.set("majority_weight_total", stats.majority_weight_total);
    meta.set("minority_weight_total", stats.minority_weight_total);
    if let Some(found) = stats.minority_cluster_found {
        meta.set("minority_cluster_found", found);
    }
    if stats.degenerate_duplication {
        meta.set("degenerate_duplication", true);
        eprintln!("warning: single minority row; synthetics are zero-jitter duplicates");
    }
    write_dataset_with_metadata(&output.dataset, &target, meta)?;
    println!(
        "wrote {} rows to {} (removed {}, synthesized {})",
        output.dataset.len(),
        target.display(),
        stats.removed_majority,
        stats.synthetic_minority
    );
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, events_flag: Option<&Path>) -> Result<(), CliError> {
    let events = load_events(cfg, events_flag)?;
    let signal_config = cfg.signal_config()?;
    let grid = cfg.grid()?;
    let (gt_start, gt_end) = cfg.gt_span()?;
    let sweep_config = cfg.sweep_config()?;

    let result = eval::sweep(
        &events,
        &signal_config,
        &cfg.grid.attack_types,
        &grid,
        gt_start,
        gt_end,
        &sweep_config,
    )?;

    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }
    for cell in result.cells.iter().filter(|c| c.failed_folds > 0) {
        eprintln!(
            "warning: {} {} {} {}: {} folds failed ({})",
            cell.attack,
            cell.filter,
            cell.t_x,
            cell.t_g,
            cell.failed_folds,
            cell.failure_reason.as_deref().unwrap_or("unknown")
        );
    }

    let dir = cfg.out_dir();
    ensure_dir(&dir)?;
    report::write_cells(&result, &dir.join(report::CELLS_FILE))?;
    report::write_comparisons(&result, &dir.join(report::COMPARISONS_FILE))?;
    report::write_importance(&result, &dir.join(report::IMPORTANCE_FILE))?;
    if !result.variable_tx.is_empty() {
        report::write_variable_tx(&result, &dir.join(report::VARIABLE_TX_FILE))?;
    }
    let rows: Vec<report::CellRow> = result.cells.iter().map(Into::into).collect();
    report::write_plot_data(&rows, &dir)?;

    println!(
        "evaluated {} cells ({} comparisons) into {}",
        result.cells.len(),
        result.comparisons.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_report(cfg: &RunConfig, cells_flag: Option<&Path>) -> Result<(), CliError> {
    let cells_path = cells_flag
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out_dir().join(report::CELLS_FILE));
    if !cells_path.exists() {
        return Err(CliError::Input(format!(
            "cells file not found: {}",
            cells_path.display()
        )));
    }
    let cells = report::read_cells(&cells_path)?;
    let dir = cells_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let optional = |name: &str| -> PathBuf { dir.join(name) };
    let comparisons = {
        let p = optional(report::COMPARISONS_FILE);
        if p.exists() {
            report::read_comparisons(&p)?
        } else {
            Vec::new()
        }
    };
    let importance = {
        let p = optional(report::IMPORTANCE_FILE);
        if p.exists() {
            report::read_importance(&p)?
        } else {
            Vec::new()
        }
    };
    let variable_tx = {
        let p = optional(report::VARIABLE_TX_FILE);
        if p.exists() {
            report::read_variable_tx(&p)?
        } else {
            Vec::new()
        }
    };

    print!(
        "{}",
        report::render_summary(&cells, &comparisons, &importance, &variable_tx)
    );

    let plot_dir = cfg.out_dir();
    ensure_dir(&plot_dir)?;
    report::write_plot_data(&cells, &plot_dir)?;
    Ok(())
}
