//! The `crossdex` command-line interface.
//!
//! Subcommands: `ingest-check`, `correlate`, `run`, `wilcoxon`,
//! `report`, `synth`. Exit codes: 0 success, 1 usage error, 2 data or
//! config error, 3 run completed but some sessions failed.
//!
//! `CROSSDEX_THREADS` caps harness parallelism (results are identical
//! at any setting). `CROSSDEX_TIMESTAMP` overrides the artifact
//! timestamp, making `run` output byte-reproducible.

use crate::harness::{
    compare_cross_vs_ablation, load_results, persist_results, run_experiment, ExperimentConfig,
    LoadedResults, ResultMatrix, SessionOutcome,
};
use crate::report::{self, Format};
use crate::series::{load_series, IndexSeries};
use clap::{Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUN_FAILURES: i32 = 3;

#[derive(Parser)]
#[command(
    name = "crossdex",
    version,
    about = "Cross-market training laboratory for long-horizon index forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate index CSV files and summarize their contents.
    IngestCheck {
        /// CSV files (`date,close`); the symbol is the file stem.
        paths: Vec<PathBuf>,
    },
    /// Pairwise Pearson correlations over the shared calendars.
    Correlate {
        /// Two or more CSV files.
        paths: Vec<PathBuf>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full cross-training experiment described by a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to these model kinds (comma-separated).
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Restrict to these index symbols (comma-separated).
        #[arg(long, value_delimiter = ',')]
        indexes: Option<Vec<String>>,
    },
    /// Paired signed-rank comparison of self- vs cross-trained accuracy.
    Wilcoxon {
        #[arg(long)]
        results: PathBuf,
        /// Location shifts to test (default: the run's mu_shifts).
        #[arg(long)]
        mu: Option<Vec<f64>>,
        /// Write per-shift CSV files here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        indexes: Option<Vec<String>>,
    },
    /// Accuracy tables and plot-ready CSVs from persisted results.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: FormatArg,
        /// Write report files here instead of stdout (plot CSVs require it).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        indexes: Option<Vec<String>>,
    },
    /// Generate synthetic index CSVs.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        /// Days to generate.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Log-return correlation for correlated-gbm.
        #[arg(long)]
        rho: Option<f64>,
        /// Output CSV path (correlated-gbm appends `_a`/`_b`).
        #[arg(long)]
        out: PathBuf,
        /// Symbol name (defaults to the output file stem).
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Md,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Md => Format::Md,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    Gbm,
    CorrelatedGbm,
    Linear,
}

/// Entry point; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not usage errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(command: Command) -> Result<i32, Box<dyn std::error::Error>> {
    match command {
        Command::IngestCheck { paths } => cmd_ingest_check(&paths),
        Command::Correlate { paths, out } => cmd_correlate(&paths, out.as_deref()),
        Command::Run {
            config,
            seed,
            out,
            models,
            indexes,
        } => cmd_run(&config, seed, out, models, indexes),
        Command::Wilcoxon {
            results,
            mu,
            out,
            models,
            indexes,
        } => cmd_wilcoxon(&results, mu, out.as_deref(), models, indexes),
        Command::Report {
            results,
            format,
            out,
            models,
            indexes,
        } => cmd_report(&results, format.into(), out.as_deref(), models, indexes),
        Command::Synth {
            kind,
            n,
            seed,
            rho,
            out,
            name,
        } => cmd_synth(kind, n, seed, rho, &out, name),
    }
}

fn symbol_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().to_uppercase())
        .unwrap_or_else(|| "UNNAMED".into())
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<IndexSeries>, Box<dyn std::error::Error>> {
    paths
        .iter()
        .map(|p| Ok(load_series(p, &symbol_of(p))?))
        .collect()
}

fn cmd_ingest_check(paths: &[PathBuf]) -> Result<i32, Box<dyn std::error::Error>> {
    if paths.is_empty() {
        return Err("ingest-check needs at least one file".into());
    }
    for path in paths {
        let series = load_series(path, &symbol_of(path))?;
        let first = series.points().first().expect("non-empty").0;
        let last = series.points().last().expect("non-empty").0;
        println!(
            "OK {}: {} rows, {} .. {}",
            path.display(),
            series.len(),
            first,
            last
        );
    }
    Ok(EXIT_OK)
}

fn cmd_correlate(paths: &[PathBuf], out: Option<&Path>) -> Result<i32, Box<dyn std::error::Error>> {
    if paths.len() < 2 {
        return Err("correlate needs at least two files".into());
    }
    let series = load_all(paths)?;
    let rows = crate::series::correlation_table(&series)?;
    let csv = report::correlation_csv(&rows);
    emit(out, "correlations.csv", &csv)?;
    Ok(EXIT_OK)
}

fn timestamp() -> String {
    std::env::var("CROSSDEX_TIMESTAMP")
        .unwrap_or_else(|_| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn threads_from_env() -> Option<usize> {
    std::env::var("CROSSDEX_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    models: Option<Vec<String>>,
    indexes: Option<Vec<String>>,
) -> Result<i32, Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::from_toml_path(config_path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
        for spec in &mut cfg.models {
            spec.seed = seed;
        }
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if let Some(filter) = models {
        cfg.models
            .retain(|m| filter.iter().any(|f| f == m.kind.name()));
        if cfg.models.is_empty() {
            return Err("--models filter removed every configured model".into());
        }
    }
    if let Some(filter) = indexes {
        cfg.indexes.retain(|i| filter.contains(&i.symbol));
        if cfg.indexes.is_empty() {
            return Err("--indexes filter removed every configured index".into());
        }
    }

    let matrix = run_experiment(&cfg, threads_from_env())?;

    std::fs::create_dir_all(&cfg.output_dir)?;
    let results_path = cfg.output_dir.join("results.json");
    persist_results(&matrix, &cfg, &timestamp(), &results_path)?;
    std::fs::write(cfg.output_dir.join("metrics.csv"), metrics_csv(&matrix))?;

    let failures = matrix.failure_count();
    println!(
        "wrote {} ({} cells, {} failed sessions)",
        results_path.display(),
        matrix.cells.len(),
        failures
    );
    if failures > 0 {
        for cell in &matrix.cells {
            for s in &cell.sessions {
                if let SessionOutcome::Failed { session_id, error } = s {
                    eprintln!(
                        "failed: {} {}->{} session {}: {}",
                        cell.model, cell.train_index, cell.test_index, session_id, error
                    );
                }
            }
        }
        return Ok(EXIT_RUN_FAILURES);
    }
    Ok(EXIT_OK)
}

fn metrics_csv(matrix: &ResultMatrix) -> String {
    let mut out = String::from("model,train_index,test_index,session_id,mape,rmse\n");
    for cell in &matrix.cells {
        for s in &cell.sessions {
            if let Some(m) = s.metrics() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    cell.model, cell.train_index, cell.test_index, m.session_id, m.mape, m.rmse
                );
            }
        }
    }
    out
}

fn load_filtered(
    path: &Path,
    models: Option<Vec<String>>,
    indexes: Option<Vec<String>>,
) -> Result<LoadedResults, Box<dyn std::error::Error>> {
    let mut loaded = load_results(path)?;
    if !loaded.integrity_ok {
        eprintln!("warning: config hash mismatch: results file was modified after the run");
    }
    if let Some(filter) = models {
        loaded
            .results
            .matrix
            .cells
            .retain(|c| filter.contains(&c.model));
    }
    if let Some(filter) = indexes {
        loaded
            .results
            .matrix
            .cells
            .retain(|c| filter.contains(&c.train_index) && filter.contains(&c.test_index));
    }
    Ok(loaded)
}

fn cmd_wilcoxon(
    results_path: &Path,
    mu: Option<Vec<f64>>,
    out: Option<&Path>,
    models: Option<Vec<String>>,
    indexes: Option<Vec<String>>,
) -> Result<i32, Box<dyn std::error::Error>> {
    let loaded = load_filtered(results_path, models, indexes)?;
    let matrix = &loaded.results.matrix;
    let shifts = mu.unwrap_or_else(|| loaded.results.config.mu_shifts.clone());

    for mu in &shifts {
        let rows = compare_cross_vs_ablation(matrix, *mu)?;
        for train in matrix.indexes() {
            let table = match report::wilcoxon_table(&rows, &train, Format::Csv) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let name = format!("wilcoxon_mu{mu}_{train}.csv");
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(dir.join(&name), &table)?;
                    println!("wrote {}", dir.join(&name).display());
                }
                None => {
                    println!("# trained on {train}, mu = {mu}");
                    print!("{table}");
                }
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_report(
    results_path: &Path,
    format: Format,
    out: Option<&Path>,
    models: Option<Vec<String>>,
    indexes: Option<Vec<String>>,
) -> Result<i32, Box<dyn std::error::Error>> {
    let loaded = load_filtered(results_path, models, indexes)?;
    let matrix = &loaded.results.matrix;
    if matrix.cells.is_empty() {
        return Err(Box::new(report::ReportError::EmptyResults));
    }
    let ext = match format {
        Format::Md => "md",
        Format::Csv => "csv",
    };

    let mut body = String::new();
    for index in matrix.indexes() {
        if matrix
            .models()
            .iter()
            .any(|m| matrix.cell(m, &index, &index).is_some())
        {
            let _ = writeln!(body, "## Self-trained accuracy: {index}\n");
            body.push_str(&report::ablation_table(matrix, &index, format)?);
            body.push('\n');
        }
    }
    for model in matrix.models() {
        let _ = writeln!(
            body,
            "## Cross-trained MAPE: {model} (rows trained on, columns tested on)\n"
        );
        body.push_str(&report::cross_table(matrix, &model, format)?);
        body.push('\n');
    }

    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let report_path = dir.join(format!("report.{ext}"));
            std::fs::write(&report_path, &body)?;
            println!("wrote {}", report_path.display());
            let plots = dir.join("plots");
            std::fs::create_dir_all(&plots)?;
            for cell in &matrix.cells {
                let csv =
                    report::plot_csv(matrix, &cell.model, &cell.train_index, &cell.test_index)?;
                let name = format!(
                    "plot_{}_{}_{}.csv",
                    cell.model, cell.train_index, cell.test_index
                );
                std::fs::write(plots.join(&name), csv)?;
            }
            println!(
                "wrote {} plot files under {}",
                matrix.cells.len(),
                plots.display()
            );
        }
        None => print!("{body}"),
    }
    Ok(EXIT_OK)
}

fn cmd_synth(
    kind: SynthKind,
    n: usize,
    seed: u64,
    rho: Option<f64>,
    out: &Path,
    name: Option<String>,
) -> Result<i32, Box<dyn std::error::Error>> {
    let base_name = name.unwrap_or_else(|| symbol_of(out));
    match kind {
        SynthKind::Gbm => {
            let series = crate::synth::gbm(&base_name, n, seed)?;
            crate::series::save_series(&series, out)?;
            println!("wrote {}", out.display());
        }
        SynthKind::Linear => {
            let series = crate::synth::linear(&base_name, n, seed)?;
            crate::series::save_series(&series, out)?;
            println!("wrote {}", out.display());
        }
        SynthKind::CorrelatedGbm => {
            let rho = rho.ok_or("correlated-gbm requires --rho")?;
            let (a, b) = crate::synth::correlated_gbm(
                &format!("{base_name}_A"),
                &format!("{base_name}_B"),
                n,
                seed,
                rho,
            )?;
            let pa = with_suffix(out, "_a");
            let pb = with_suffix(out, "_b");
            crate::series::save_series(&a, &pa)?;
            crate::series::save_series(&b, &pb)?;
            println!("wrote {} and {}", pa.display(), pb.display());
        }
    }
    Ok(EXIT_OK)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy())
        .unwrap_or_default();
    let file = if ext.is_empty() {
        format!("{stem}{suffix}")
    } else {
        format!("{stem}{suffix}.{ext}")
    };
    path.with_file_name(file)
}

fn emit(out: Option<&Path>, _default_name: &str, body: &str) -> std::io::Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, body)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}
