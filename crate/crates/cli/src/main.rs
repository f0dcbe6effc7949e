//! `bench` — configuration-driven counterfactual benchmark CLI.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use cfbench_core::bench::{
    self, emit_report, model_impact_summary, sweep_hyperparameter, BenchConfig, BenchmarkReport,
    ReportFormat, SweepParam,
};
use cfbench_core::cf::Algorithm;

#[derive(Parser)]
#[command(name = "bench", about = "Counterfactual explanation benchmark", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured (dataset x model x algorithm) grid.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run cells on N worker threads (results are identical either way).
        #[arg(long)]
        parallel: Option<usize>,
        /// Override the config's global seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Recompute cells even when stored results exist.
        #[arg(long)]
        force: bool,
    },
    /// Sweep one generator hyperparameter over a fixed request set.
    Sweep {
        #[arg(long)]
        algo: String,
        #[arg(long)]
        param: String,
        /// Comma-separated list, e.g. 0,1,4,16
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        config: PathBuf,
    },
    /// Decision-path bias analysis on the decision-tree cells.
    Paths {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-emit a stored report in another format.
    Report {
        #[arg(long = "in")]
        in_dir: PathBuf,
        #[arg(long, default_value = "text")]
        format: String,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, parallel, seed, force } => {
            let mut config = BenchConfig::from_toml_file(&config)
                .with_context(|| "loading benchmark config")?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(threads) = parallel {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global()
                    .ok();
            }
            let report = bench::run_benchmark(&config, parallel.is_some(), force)?;
            emit_report(&report, ReportFormat::Structured, &config.output_dir)?;
            emit_report(&report, ReportFormat::Csv, &config.output_dir)?;
            emit_report(&report, ReportFormat::Text, &config.output_dir)?;
            let impact = model_impact_summary(&report);
            if !impact.rows.is_empty() {
                std::fs::write(
                    config.output_dir.join("model_impact.csv"),
                    impact.to_csv(),
                )?;
            }
            print!("{}", report.render_text());
            println!("\nresults written to {}", config.output_dir.display());
            if report.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{} cell(s) failed", report.failures.len());
                Ok(ExitCode::from(2))
            }
        }
        Command::Sweep { algo, param, values, config } => {
            let config = BenchConfig::from_toml_file(&config)?;
            let algorithm: Algorithm = algo.parse()?;
            let param: SweepParam = param.parse()?;
            let table = sweep_hyperparameter(&config, algorithm, param, &values)?;
            std::fs::create_dir_all(&config.output_dir)?;
            let path = config
                .output_dir
                .join(format!("sweep_{}_{}.csv", table.algorithm, table.param));
            std::fs::write(&path, table.to_csv())?;
            println!("value,coverage,mean_spa,mean_l1,mean_l2");
            for row in &table.rows {
                println!(
                    "{},{:.2},{},{},{}",
                    row.value,
                    row.coverage,
                    row.mean_spa.map_or("-".into(), |v| format!("{v:.3}")),
                    row.mean_l1.map_or("-".into(), |v| format!("{v:.3}")),
                    row.mean_l2.map_or("-".into(), |v| format!("{v:.3}")),
                );
            }
            println!("sweep written to {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Paths { config } => {
            let config = BenchConfig::from_toml_file(&config)?;
            let reports = bench::run_bias_analysis(&config)?;
            for (dataset, report) in &reports {
                let text_path = config.output_dir.join(format!("paths_{dataset}.txt"));
                std::fs::write(&text_path, report.render_text())?;
                let csv_path = config.output_dir.join(format!("paths_{dataset}.csv"));
                std::fs::write(&csv_path, report.to_csv())?;
                println!("=== {dataset} ===");
                print!("{}", report.render_text());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { in_dir, format } => {
            let report = BenchmarkReport::load(&in_dir.join("report.json"))
                .with_context(|| "loading report.json from --in directory")?;
            let format: ReportFormat = format.parse()?;
            let files = emit_report(&report, format, &in_dir)?;
            if format == ReportFormat::Text {
                print!("{}", report.render_text());
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
