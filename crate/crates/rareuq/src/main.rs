//! Command-line driver for the estimation library: single-shot fits and
//! estimates plus the seeded experiment suites, all emitting deterministic
//! CSV artifacts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rareuq::config::{ExperimentConfig, ExperimentId};
use rareuq::cross_entropy::save_trajectory_csv;
use rareuq::error::Result;
use rareuq::experiments::{
    run_av_demo_with, run_table1, run_table2, run_variance_decomposition_check, save_av_rows_csv,
    save_av_summary_csv, save_coverage_csv, save_variance_csv, AvDemoReport, CoverageReport,
};
use rareuq::input_models::{fit_mle, Family};
use rareuq::lane_change::{dataset_inputs, load_dataset_csv, save_dataset_csv, LaneChangeSample};

/// Crude-sampling sample count used to cross-check the demo's estimate.
const ORACLE_SAMPLES: usize = 100_000_000;

#[derive(Parser)]
#[command(
    name = "rareuq",
    version,
    about = "Rare-event Monte Carlo estimation with input-uncertainty quantification"
)]
struct Cli {
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON file overriding any subset of the experiment settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV artifacts and run metadata.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker thread count; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Publication-scale settings where they differ from desk scale.
    #[arg(long, global = true)]
    paper_scale: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit exponential input models to a lane-change dataset CSV.
    Fit {
        /// Dataset with columns v_mps, inv_range_per_m, inv_ttc_per_s.
        csv: PathBuf,
    },
    /// Estimate the lane-change crash probability with a simulation-only
    /// confidence interval.
    Estimate {
        /// Dataset CSV; a synthetic dataset is generated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Estimate the crash probability with both the simulation-only and the
    /// bootstrap input-uncertainty interval.
    Uq {
        /// Dataset CSV; a synthetic dataset is generated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Known-parameter bootstrap coverage study.
    Table1,
    /// Estimated-Gaussian-tail coverage study comparing CF, LR, and SU
    /// intervals.
    Table2,
    /// Lane-change demo: estimates and interval widths across batch sizes.
    AvDemo,
    /// Nested-sampling check of the variance decomposition identity.
    VarCheck,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit { csv } => fit_command(csv),
        Command::Estimate { data } => estimate_command(cli, data.as_deref(), false),
        Command::Uq { data } => estimate_command(cli, data.as_deref(), true),
        Command::Table1 => table_command(cli, ExperimentId::Table1),
        Command::Table2 => table_command(cli, ExperimentId::Table2),
        Command::AvDemo => av_demo_command(cli),
        Command::VarCheck => var_check_command(cli),
    }
}

/// Desk defaults for the subcommand's experiment, adjusted by --paper-scale,
/// then the --config file, then explicit --seed/--out flags.
fn build_config(cli: &Cli, id: ExperimentId) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::desk_defaults(id, cli.seed.unwrap_or(0));
    if cli.paper_scale {
        config.apply_paper_scale();
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)?;
        config.apply_overrides(ExperimentConfig::parse_overrides(&text)?)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn write_metadata(config: &ExperimentConfig) -> Result<()> {
    let meta = serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "config_sha256": config.content_hash()?,
        "config": serde_json::to_value(config)?,
    });
    std::fs::create_dir_all(&config.output_dir)?;
    std::fs::write(
        config.output_dir.join("run_metadata.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    Ok(())
}

fn print_coverage(reports: &[CoverageReport]) {
    println!("method       k  coverage (se)        mean width");
    for r in reports {
        println!(
            "{:<28} {:>7}  {:.4} ({:.4})  {:e}",
            r.method, r.k, r.coverage, r.coverage_se, r.mean_width
        );
    }
}

fn fit_command(csv: &Path) -> Result<()> {
    let dataset = load_dataset_csv(csv)?;
    let fitted = fit_mle(
        &Family::Product(vec![Family::Exponential, Family::Exponential]),
        &dataset_inputs(&dataset),
    )?;
    let doc = serde_json::json!({
        "model": serde_json::to_value(&fitted.model)?,
        "sample_count": fitted.sample_count,
        "param_names": fitted.model.param_names(),
        "params": fitted.model.params(),
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn load_optional_dataset(path: Option<&std::path::Path>) -> Result<Option<Vec<LaneChangeSample>>> {
    path.map(load_dataset_csv).transpose()
}

fn estimate_command(cli: &Cli, data: Option<&std::path::Path>, with_uq: bool) -> Result<()> {
    let config = build_config(cli, ExperimentId::AvDemo)?;
    let dataset = load_optional_dataset(data)?;
    let report = run_av_demo_with(&config, dataset, None)?;
    let last = report
        .rows
        .last()
        .expect("the prefix grid is never empty");
    let mut doc = serde_json::json!({
        "crash_probability": last.point,
        "batch_size": last.n,
        "alpha": config.alpha,
        "simulation_only": { "lower": last.su_lower, "upper": last.su_upper },
        "fitted_params": report.fitted_model.params(),
        "tilt": report.tilt,
    });
    if with_uq {
        doc["input_uncertainty"] = serde_json::json!({
            "lower": last.lr_lower,
            "upper": last.lr_upper,
            "replicates": config.replicate_count,
        });
    }
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn table_command(cli: &Cli, id: ExperimentId) -> Result<()> {
    let config = build_config(cli, id)?;
    let reports = match id {
        ExperimentId::Table1 => run_table1(&config)?,
        ExperimentId::Table2 => run_table2(&config)?,
        _ => unreachable!("table_command only serves the coverage studies"),
    };
    std::fs::create_dir_all(&config.output_dir)?;
    let file = format!("{}_coverage.csv", id.label());
    save_coverage_csv(&config.output_dir.join(&file), &reports)?;
    write_metadata(&config)?;
    print_coverage(&reports);
    println!("wrote {}", config.output_dir.join(file).display());
    Ok(())
}

fn av_demo_command(cli: &Cli) -> Result<()> {
    let config = build_config(cli, ExperimentId::AvDemo)?;
    let report = run_av_demo_with(&config, None, Some(ORACLE_SAMPLES))?;
    save_av_artifacts(&config, &report)?;
    write_metadata(&config)?;
    println!("n        point        su_width     lr_width");
    for row in &report.rows {
        println!(
            "{:<8} {:e}  {:e}  {:e}",
            row.n, row.point, row.su_width, row.lr_width
        );
    }
    if let Some(oracle) = &report.oracle {
        println!(
            "oracle ({} crude samples): {:e} +/- {:e}",
            ORACLE_SAMPLES, oracle.point, oracle.stderr
        );
    }
    println!("artifacts in {}", config.output_dir.display());
    Ok(())
}

fn save_av_artifacts(config: &ExperimentConfig, report: &AvDemoReport) -> Result<()> {
    std::fs::create_dir_all(&config.output_dir)?;
    save_dataset_csv(
        &config.output_dir.join("lane_change_dataset.csv"),
        &report.dataset,
    )?;
    save_trajectory_csv(
        &config.output_dir.join("ce_trajectory.csv"),
        &report.trajectory,
    )?;
    save_av_rows_csv(&config.output_dir.join("av_demo_widths.csv"), &report.rows)?;
    save_av_summary_csv(
        &config.output_dir.join("av_demo_summary.csv"),
        report,
    )?;
    Ok(())
}

fn var_check_command(cli: &Cli) -> Result<()> {
    let config = build_config(cli, ExperimentId::VarCheck)?;
    let rows = run_variance_decomposition_check(&config)?;
    std::fs::create_dir_all(&config.output_dir)?;
    save_variance_csv(
        &config.output_dir.join("variance_decomposition.csv"),
        &rows,
    )?;
    write_metadata(&config)?;
    println!("k        inner_n  lhs          t1           t2           gap");
    for r in &rows {
        println!(
            "{:<8} {:<8} {:e}  {:e}  {:e}  {:.4}",
            r.k, r.inner_n, r.lhs, r.t1, r.t2, r.gap
        );
    }
    println!(
        "wrote {}",
        config.output_dir.join("variance_decomposition.csv").display()
    );
    Ok(())
}
