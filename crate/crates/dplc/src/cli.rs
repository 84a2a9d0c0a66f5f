use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dplc_core::estimator::{predict_eta, tune_architecture, tune_lambda, GModel};
use dplc_core::metrics::c_index;
use dplc_core::sim::simulate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bench::{run_experiment_with, selection_table};
use crate::config::{parse_arch_grid, parse_lambda_grid, RunConfig};
use crate::error::{AppError, AppResult};
use crate::io::{default_names, read_dataset, read_json, read_table, write_dataset, write_json};
use crate::model_io::ModelBundle;

/// `println!` that stops quietly when stdout is closed (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "dplc", version, about = "SCAD-penalized deep partially linear Cox model")]
pub struct Cli {
    /// Master seed; overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for benchmark replicates (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tune λ (and optionally the network) by BIC and fit a model.
    Fit(FitArgs),
    /// Linear predictors of a saved model on new data.
    Predict(PredictArgs),
    /// Write one simulated dataset and its true parameters.
    Simulate(SimulateArgs),
    /// Replicated simulation experiment with selection and C-index reports.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with `time`, `status`, `x_*` and `z_*` columns.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON run configuration; defaults apply to missing fields.
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated values or `lo:hi:n` (log-spaced).
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// e.g. `depths=1,2;widths=4,8;dropouts=0.3;lrs=0.01`; enables architecture tuning.
    #[arg(long)]
    pub arch_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// `model.json` written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with the training `x_*` and `z_*` columns, in any order.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated values or `lo:hi:n` (log-spaced).
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// Same syntax as for `fit`.
    #[arg(long)]
    pub arch_grid: Option<String>,
}

fn load_config(
    path: Option<&Path>,
    seed: Option<u64>,
    threads: Option<usize>,
    lambda_grid: Option<&str>,
    arch_grid: Option<&str>,
) -> AppResult<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    } else {
        cfg.fit.seed = cfg.seed;
    }
    if let Some(t) = threads {
        cfg.experiment.threads = t;
    }
    if let Some(g) = lambda_grid {
        cfg.lambda_grid = parse_lambda_grid(g)?;
    }
    if let Some(g) = arch_grid {
        cfg.arch_grid = Some(parse_arch_grid(g)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(path: &Path) -> AppResult<()> {
    fs::create_dir_all(path).map_err(|e| AppError::io(path, e))
}

fn csv_writer(path: &Path) -> AppResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| AppError::format(path, e.to_string()))
}

fn write_rows<I, R>(path: &Path, rows: I) -> AppResult<()>
where
    I: IntoIterator<Item = R>,
    R: Serialize,
{
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| AppError::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

#[derive(Serialize)]
struct SelectionRow<'a> {
    feature: &'a str,
    beta: f64,
    hazard_ratio: f64,
}

#[derive(Serialize)]
struct BicRow {
    lambda: f64,
    support_size: usize,
    bic: f64,
    selected: bool,
}

#[derive(Serialize)]
struct PredictionRow {
    row: usize,
    eta: f64,
}

#[derive(Serialize)]
struct CIndexRow {
    method: &'static str,
    replicate: usize,
    c_index: f64,
}

pub fn cmd_fit(args: &FitArgs, seed: Option<u64>) -> AppResult<()> {
    let cfg = load_config(args.config.as_deref(), seed, None, args.lambda_grid.as_deref(), args.arch_grid.as_deref())?;
    let (ds, x_names, z_names) = read_dataset(&args.data, cfg.fit.g_model == GModel::Zero)?;
    create_dir(&args.out)?;
    let mut fit_cfg = cfg.fit.clone();
    if let (Some(grid), GModel::Network) = (&cfg.arch_grid, fit_cfg.g_model) {
        let sel = tune_architecture(&ds, grid, cfg.arch_criterion, &fit_cfg)?;
        write_rows(&args.out.join("architecture.csv"), &sel.cells)?;
        fit_cfg = sel.apply(&fit_cfg);
    }
    let path = tune_lambda(&ds, &cfg.lambda_grid, &fit_cfg)?;
    let model = &path.model;
    let bundle = ModelBundle::new(model, &x_names, &z_names, &fit_cfg, &path.entries);
    write_json(&args.out.join("model.json"), &bundle)?;
    write_rows(
        &args.out.join("selection.csv"),
        model.support.iter().map(|&j| SelectionRow {
            feature: &x_names[j],
            beta: model.beta[j],
            hazard_ratio: model.beta[j].exp(),
        }),
    )?;
    write_rows(
        &args.out.join("bic_path.csv"),
        path.entries.iter().enumerate().map(|(k, e)| BicRow {
            lambda: e.lambda,
            support_size: e.support_size,
            bic: e.bic,
            selected: k == path.best_index,
        }),
    )?;
    say!(
        "λ = {}  selected {} of {} features  BIC = {:.4}",
        model.lambda,
        model.support.len(),
        x_names.len(),
        model.diagnostics.bic
    );
    for &j in &model.support {
        say!("  {:<24} β = {:>10.4}  HR = {:>10.4}", x_names[j], model.beta[j], model.beta[j].exp());
    }
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs) -> AppResult<()> {
    let bundle: ModelBundle = read_json(&args.model)?;
    let model = bundle.to_model()?;
    let table = read_table(&args.data, false)?;
    let pick = |have: &[String], want: &[String], prefix: &str| -> AppResult<Vec<usize>> {
        let mut sorted_have = have.to_vec();
        sorted_have.sort();
        let mut sorted_want = want.to_vec();
        sorted_want.sort();
        if sorted_have != sorted_want {
            return Err(AppError::format(
                &args.data,
                format!("`{prefix}` columns {have:?} do not match the training columns {want:?}"),
            ));
        }
        Ok(want.iter().map(|w| have.iter().position(|h| h == w).unwrap()).collect())
    };
    let xi = pick(&table.x_names, &bundle.x_names, "x_")?;
    let zi = pick(&table.z_names, &bundle.z_names, "z_")?;
    let x = table.x.select_cols(&xi);
    let z = table.z.select_cols(&zi);
    let eta = predict_eta(&model, &x, &z)?;
    write_rows(&args.out, eta.iter().enumerate().map(|(row, &eta)| PredictionRow { row, eta }))?;
    if let (Some(times), Some(status)) = (&table.times, &table.status) {
        match c_index(&eta, times, status) {
            Ok(c) => say!("c_index {c}"),
            Err(e) => say!("c_index unavailable: {e}"),
        }
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs, seed: Option<u64>) -> AppResult<()> {
    let cfg = load_config(args.config.as_deref(), seed, None, None, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sim = simulate(&cfg.sim, &mut rng)?;
    create_dir(&args.out)?;
    let x_names = default_names("x_", cfg.sim.p);
    let z_names = default_names("z_", cfg.sim.r);
    write_dataset(&args.out.join("data.csv"), &sim.dataset, &x_names, &z_names)?;
    #[derive(Serialize)]
    struct Truth<'a> {
        seed: u64,
        sim: &'a dplc_core::sim::SimConfig,
        beta0: &'a [f64],
        alpha0: &'a [f64],
        support: Vec<&'a str>,
        censoring_bound: f64,
        censoring_rate: f64,
        perturbed_g0: usize,
    }
    write_json(
        &args.out.join("truth.json"),
        &Truth {
            seed: cfg.seed,
            sim: &cfg.sim,
            beta0: &sim.beta0,
            alpha0: &sim.alpha0,
            support: sim.support.iter().map(|&j| x_names[j].as_str()).collect(),
            censoring_bound: sim.censoring_bound,
            censoring_rate: sim.censoring_rate,
            perturbed_g0: sim.perturbed,
        },
    )?;
    say!(
        "wrote {} subjects, {} events, censoring {:.3}",
        sim.dataset.len(),
        sim.dataset.n_events(),
        sim.censoring_rate
    );
    Ok(())
}

pub fn cmd_benchmark(args: &BenchmarkArgs, seed: Option<u64>, threads: Option<usize>) -> AppResult<()> {
    let cfg = load_config(args.config.as_deref(), seed, threads, args.lambda_grid.as_deref(), args.arch_grid.as_deref())?;
    create_dir(&args.out)?;
    let rows_path = args.out.join("replicates.csv");
    let mut writer = csv_writer(&rows_path)?;
    let (rows, summary) = run_experiment_with(&cfg, |chunk| {
        for row in chunk {
            writer.serialize(row).map_err(|e| AppError::format(&rows_path, e.to_string()))?;
        }
        writer.flush().map_err(|e| AppError::io(&rows_path, e))
    })?;
    write_json(&args.out.join("summary.json"), &summary)?;
    write_json(&args.out.join("config.json"), &cfg)?;

    let table_path = args.out.join("table1.csv");
    let mut w = csv_writer(&table_path)?;
    let table = selection_table(&summary);
    for line in &table {
        w.write_record(line).map_err(|e| AppError::format(&table_path, e.to_string()))?;
    }
    w.flush().map_err(|e| AppError::io(&table_path, e))?;

    write_rows(
        &args.out.join("cindex_long.csv"),
        rows.iter().filter_map(|r| {
            r.c_index.map(|c| CIndexRow {
                method: r.method.label(),
                replicate: r.replicate,
                c_index: c,
            })
        }),
    )?;

    for line in &table {
        say!("{}", line.join("\t"));
    }
    for m in &summary.methods {
        if let Some(c) = m.c_index {
            say!("{} C-index median {:.4} (IQR {:.4}), failed {}", m.method.label(), c.median, c.iqr, m.failed);
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> AppResult<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, cli.seed),
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a, cli.seed),
        Command::Benchmark(a) => cmd_benchmark(a, cli.seed, cli.threads),
    }
}
