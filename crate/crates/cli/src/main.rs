use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use arcma::harness::{
    collect_records, compare, execute, run, run_efficiency, summarize, write_comparison,
    write_efficiency, write_record, EfficiencyConfig, MatrixConfig, Preset, RunConfig,
};
use clap::{Parser, Subcommand, ValueEnum};

/// CMA-ES with adaptive re-evaluation: experiment runner.
#[derive(Parser, Debug)]
#[command(name = "arcma", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (TOML). Required by `run`; optional elsewhere.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for `matrix`.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed; overrides the config's seed (the base seed for `matrix`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Built-in experiment matrix, used by `matrix` and `validate` when no config is given.
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute one run config and write its record.
    Run,
    /// Expand a matrix config or preset, execute every run, then summarize.
    Matrix,
    /// Aggregate the run records in a directory into per-method ECDFs and a summary table.
    Ecdf {
        /// Directory holding the JSON summaries; defaults to `--out`.
        records: Option<PathBuf>,
    },
    /// Frozen-state efficiency experiment.
    Efficiency,
    /// Check a config (run, matrix or efficiency) without executing it.
    Validate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Paper => Preset::Paper,
            PresetArg::Desk => Preset::Desk,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run => cmd_run(cli),
        Command::Matrix => cmd_matrix(cli),
        Command::Ecdf { records } => cmd_ecdf(cli, records.as_deref()),
        Command::Efficiency => cmd_efficiency(cli),
        Command::Validate => cmd_validate(cli),
    }
}

fn load_run(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().context("`run` needs --config")?;
    let mut config =
        RunConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn load_matrix(cli: &Cli) -> Result<MatrixConfig> {
    let mut matrix = match (&cli.config, cli.preset) {
        (Some(_), Some(_)) => bail!("give either --config or --preset, not both"),
        (Some(path), None) => MatrixConfig::from_file(path)
            .with_context(|| format!("reading {}", path.display()))?,
        (None, preset) => MatrixConfig::preset(preset.map_or(Preset::Desk, Preset::from)),
    };
    if let Some(seed) = cli.seed {
        matrix.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        matrix.out_dir = out.clone();
    }
    matrix.validate()?;
    Ok(matrix)
}

fn load_efficiency(cli: &Cli) -> Result<EfficiencyConfig> {
    let mut config = match &cli.config {
        Some(path) => EfficiencyConfig::from_file(path)
            .with_context(|| format!("reading {}", path.display()))?,
        None => EfficiencyConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.freeze.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn cmd_run(cli: &Cli) -> Result<()> {
    let config = load_run(cli)?;
    let record = run(&config)?;
    let path = write_record(&record, &config.out_dir)?;
    println!(
        "{}: {} iterations, {} evaluations, final error {:e} ({:?})",
        path.display(),
        record.iterations,
        record.budget_used,
        record.final_error,
        record.terminal
    );
    Ok(())
}

fn cmd_matrix(cli: &Cli) -> Result<()> {
    let matrix = load_matrix(cli)?;
    let configs = matrix.expand();
    let workers = cli.workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get)
    });
    eprintln!("running {} configs on {workers} workers", configs.len());
    let outcomes = execute(&configs, &matrix.out_dir, workers)?;
    let mut failed = 0;
    for (config, outcome) in &outcomes {
        if let Err(e) = outcome {
            failed += 1;
            eprintln!("{}: {e}", config.stem());
        }
    }
    let comparison = compare(&configs, &matrix.out_dir)?;
    for path in &comparison.missing {
        eprintln!("missing record: {}", path.display());
    }
    if !comparison.cells.is_empty() {
        write_comparison(&comparison.cells, &comparison.ecdfs, &matrix.out_dir)?;
    }
    println!(
        "{} runs, {failed} failed, {} cells summarized in {}",
        configs.len(),
        comparison.cells.len(),
        matrix.out_dir.display()
    );
    if failed > 0 {
        bail!("{failed} runs failed");
    }
    Ok(())
}

fn cmd_ecdf(cli: &Cli, records: Option<&Path>) -> Result<()> {
    let input = records
        .or(cli.out.as_deref())
        .context("give a records directory or --out")?;
    let out = cli.out.as_deref().unwrap_or(input);
    let (results, unreadable) = collect_records(input)?;
    for path in &unreadable {
        eprintln!("skipping unreadable record: {}", path.display());
    }
    if results.is_empty() {
        bail!("no run records in {}", input.display());
    }
    let (cells, ecdfs) = summarize(&results)?;
    for path in write_comparison(&cells, &ecdfs, out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_efficiency(cli: &Cli) -> Result<()> {
    let config = load_efficiency(cli)?;
    let report = run_efficiency(&config)?;
    let [csv, json] = write_efficiency(&report, &config, &config.out_dir)?;
    let c = &report.curve;
    println!(
        "frozen at iteration {}: 2a/b = {:.3}, empirical argmax M = {}, bound held at {}/{} grid points",
        report.frozen.iteration,
        c.m_star_theoretical,
        c.m_star_empirical,
        c.points_above_bound(2.0),
        c.m_grid.len()
    );
    println!("{}\n{}", csv.display(), json.display());
    Ok(())
}

fn cmd_validate(cli: &Cli) -> Result<()> {
    let Some(path) = &cli.config else {
        let matrix = load_matrix(cli)?;
        println!("preset ok: {} runs", matrix.expand().len());
        return Ok(());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = text.parse().context("not valid TOML")?;
    if table.contains_key("method") {
        let config = RunConfig::from_toml_str(&text)?;
        println!("run config ok: {}", config.stem());
    } else if ["freeze", "trials", "grid_points", "step"].iter().any(|k| table.contains_key(*k)) {
        EfficiencyConfig::from_toml_str(&text)?.validate()?;
        println!("efficiency config ok");
    } else {
        let matrix = MatrixConfig::from_toml_str(&text)?;
        println!("matrix config ok: {} runs", matrix.expand().len());
    }
    Ok(())
}
