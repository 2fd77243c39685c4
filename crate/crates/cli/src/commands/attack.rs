use super::{parse_init, read_dataset, write_json, InitSpec};
use anyhow::{bail, Context, Result};
use clap::Args;
use recon_core::{
    answers_to_csv, eval_workload, load_schema, load_workload, rap_rank, AnswerVector,
    AttackConfig, InitMode, OptimizerConfig, Provenance,
};
use std::path::PathBuf;

#[derive(Args)]
pub struct AttackArgs {
    /// Schema config JSON.
    #[arg(long)]
    schema: PathBuf,

    /// Target data CSV; optional when --answers supplies the statistics.
    #[arg(long)]
    data: Option<PathBuf>,

    /// Treat dataset CSVs as pre-discretized label files.
    #[arg(long)]
    labels: bool,

    /// Reuse persisted bin edges instead of recomputing them.
    #[arg(long)]
    bins: Option<PathBuf>,

    /// Workload config JSON.
    #[arg(long)]
    workload: PathBuf,

    /// Released answer vector CSV (query_id,value); replaces --data.
    #[arg(long)]
    answers: Option<PathBuf>,

    /// The answers CSV holds raw counts; normalize by the total-population
    /// query when the workload has one, else by --population.
    #[arg(long)]
    answers_are_counts: bool,

    /// Population divisor for count-valued answers.
    #[arg(long)]
    population: Option<u64>,

    /// Initialization: `uniform` or `dataset:<path>`.
    #[arg(long, default_value = "uniform")]
    init: String,

    /// Score gap for dataset initialization.
    #[arg(long, default_value_t = recon_core::optimizer::DEFAULT_INIT_GAP)]
    gap: f64,

    /// Tie-breaking noise scale for dataset initialization.
    #[arg(long, default_value_t = recon_core::optimizer::DEFAULT_INIT_NOISE)]
    noise: f64,

    /// Number of projection runs (K).
    #[arg(long, default_value_t = recon_core::attack::DEFAULT_RUNS)]
    runs: usize,

    /// Rounding draws per run.
    #[arg(long, default_value_t = 1)]
    draws: usize,

    /// Relaxed-row budget N' (default: 1000 for uniform init, seed size for
    /// dataset init).
    #[arg(long)]
    rows: Option<usize>,

    /// Adam learning rate.
    #[arg(long, default_value_t = 0.1)]
    lr: f64,

    /// Maximum optimization epochs per run.
    #[arg(long, default_value_t = 1000)]
    epochs: usize,

    /// Query batch size (0 = full batch; default: full batch up to 20k
    /// queries, 4096 beyond).
    #[arg(long)]
    batch: Option<usize>,

    /// Early-stopping tolerance on the loss (0 disables).
    #[arg(long, default_value_t = 1e-8)]
    stop_tol: f64,

    /// Master seed; the full pipeline is a pure function of it.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: AttackArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let schema = load_schema(&args.schema)
        .with_context(|| format!("loading schema {}", args.schema.display()))?;
    let workload = load_workload(&args.workload, schema.domain.clone())
        .with_context(|| format!("loading workload {}", args.workload.display()))?;

    let target = if let Some(answers_path) = &args.answers {
        let raw = recon_core::raw_answers_from_csv(answers_path)?;
        if raw.len() != workload.len() {
            bail!(
                "answers file {} has {} entries but the workload has {} queries",
                answers_path.display(),
                raw.len(),
                workload.len()
            );
        }
        let values = if args.answers_are_counts {
            let denom = workload
                .queries()
                .iter()
                .position(|q| q.k() == 0)
                .map(|i| raw[i])
                .or(args.population.map(|p| p as f64))
                .context(
                    "count-valued answers need a total-population query in the workload \
                     or --population",
                )?;
            if denom <= 0.0 {
                bail!("population divisor must be positive, got {denom}");
            }
            raw.iter().map(|v| v / denom).collect()
        } else {
            raw
        };
        AnswerVector::new(values, Provenance::Exact)
            .context("released answers must be fractions in [0, 1]")?
    } else {
        let data = args
            .data
            .as_ref()
            .context("either --data or --answers is required")?;
        let dataset = read_dataset(data, &schema, args.labels, args.bins.as_deref(), Some(&args.out))?;
        eval_workload(&workload, &dataset)?
    };

    let init = match parse_init(&args.init)? {
        InitSpec::Uniform => InitMode::Uniform,
        InitSpec::DatasetPath(path) => {
            let seed_data =
                read_dataset(&path, &schema, args.labels, args.bins.as_deref(), None)?;
            InitMode::FromDataset {
                seed: seed_data,
                gap: args.gap,
                noise_scale: args.noise,
            }
        }
    };

    let m = workload.len();
    let optimizer = OptimizerConfig {
        learning_rate: args.lr,
        max_epochs: args.epochs,
        batch_size: args
            .batch
            .unwrap_or_else(|| OptimizerConfig::for_workload_size(m).batch_size),
        stop_tol: args.stop_tol,
        ..OptimizerConfig::default()
    };
    let cfg = AttackConfig {
        runs: args.runs,
        draws_per_run: args.draws,
        relaxed_rows: args.rows,
        init,
        optimizer,
        master_seed: args.seed,
    };

    let outcome = rap_rank(&workload, &target, &cfg)?;
    outcome.ranking.to_csv(&args.out.join("ranking.csv"))?;
    answers_to_csv(&target, &args.out.join("answers.csv"))?;
    let manifest = serde_json::json!({
        "command": "attack",
        "schema": args.schema.display().to_string(),
        "workload": args.workload.display().to_string(),
        "n_queries": m,
        "seed": args.seed,
        "runs": args.runs,
        "draws": args.draws,
        "optimizer": cfg.optimizer,
        "result": outcome.manifest,
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;
    println!(
        "attack: {} effective runs, {} unique rows ranked -> {}",
        outcome.manifest.runs_effective,
        outcome.manifest.unique_rows,
        args.out.join("ranking.csv").display()
    );
    Ok(())
}
