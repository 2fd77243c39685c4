use super::{read_dataset, write_json};
use anyhow::{bail, Context, Result};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recon_core::{
    augment_attribute, baseline_ranking, dataset_to_csv, hierarchy_baselines, load_schema,
    split_holdout,
};
use recon_core::util::derive_seed;
use std::path::PathBuf;

#[derive(Args)]
pub struct BaselineArgs {
    /// Schema config JSON.
    #[arg(long)]
    schema: PathBuf,

    /// Data CSV: the dataset to split (holdout), the enclosing corpus
    /// (hierarchy), or the auxiliary dataset to strengthen (augment).
    #[arg(long)]
    data: PathBuf,

    /// Treat dataset CSVs as pre-discretized label files.
    #[arg(long)]
    labels: bool,

    /// Reuse persisted bin edges.
    #[arg(long)]
    bins: Option<PathBuf>,

    /// holdout | hierarchy | augment
    #[arg(long)]
    mode: String,

    /// Hierarchy mode: the target unit's labels for the schema's hierarchy
    /// columns, coarse to fine, comma-separated.
    #[arg(long)]
    target_path: Option<String>,

    /// Augment mode: the target dataset whose attribute distribution is
    /// copied.
    #[arg(long)]
    target_data: Option<PathBuf>,

    /// Augment mode: the attribute to resample.
    #[arg(long)]
    attr: Option<String>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: BaselineArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let schema = load_schema(&args.schema)
        .with_context(|| format!("loading schema {}", args.schema.display()))?;
    let data = read_dataset(
        &args.data,
        &schema,
        args.labels,
        args.bins.as_deref(),
        Some(&args.out),
    )?;

    let mut outputs: Vec<String> = Vec::new();
    match args.mode.as_str() {
        "holdout" => {
            // One ranking from the holdout half; the target half is saved
            // (as a label CSV) for evaluation against it.
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, 0, "split"));
            let (target, holdout) = split_holdout(&data, &mut rng)?;
            let ranking = baseline_ranking(&holdout);
            let ranking_path = args.out.join("baseline_holdout.csv");
            ranking.to_csv(&ranking_path)?;
            let target_path = args.out.join("target.csv");
            dataset_to_csv(&target, &target_path)?;
            outputs.push(ranking_path.display().to_string());
            outputs.push(target_path.display().to_string());
        }
        "hierarchy" => {
            let spec = args
                .target_path
                .as_ref()
                .context("--mode hierarchy requires --target-path")?;
            if schema.hierarchy.is_empty() {
                bail!("schema {} declares no hierarchy columns", args.schema.display());
            }
            let path: Vec<String> = spec.split(',').map(|s| s.trim().to_string()).collect();
            let levels = hierarchy_baselines(&data, &schema.hierarchy, &path)?;
            for (name, dataset) in levels {
                let ranking = baseline_ranking(&dataset);
                let out = args.out.join(format!("baseline_{name}.csv"));
                ranking.to_csv(&out)?;
                outputs.push(out.display().to_string());
            }
        }
        "augment" => {
            let attr = args.attr.as_ref().context("--mode augment requires --attr")?;
            let target_file = args
                .target_data
                .as_ref()
                .context("--mode augment requires --target-data")?;
            let target = read_dataset(
                target_file,
                &schema,
                args.labels,
                args.bins.as_deref(),
                None,
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, 0, "augment"));
            let augmented = augment_attribute(&data, &target, attr, &mut rng)?;
            let ranking = baseline_ranking(&augmented);
            let out = args.out.join(format!("baseline_augment_{attr}.csv"));
            ranking.to_csv(&out)?;
            outputs.push(out.display().to_string());
        }
        other => bail!("unknown baseline mode {other:?} (holdout | hierarchy | augment)"),
    }

    let manifest = serde_json::json!({
        "command": "baseline",
        "mode": args.mode,
        "schema": args.schema.display().to_string(),
        "data": args.data.display().to_string(),
        "seed": args.seed,
        "target_path": args.target_path,
        "attr": args.attr,
        "outputs": outputs,
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;
    for path in &outputs {
        println!("baseline: wrote {path}");
    }
    Ok(())
}
