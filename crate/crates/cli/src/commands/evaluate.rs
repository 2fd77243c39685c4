use super::{read_dataset, stem, write_json};
use anyhow::{bail, Context, Result};
use clap::Args;
use recon_core::{
    average_curves, emit_report, load_schema, match_rate_curve, ConfidenceRanking, MatchRateCurve,
};
use std::path::PathBuf;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Schema config JSON.
    #[arg(long)]
    schema: PathBuf,

    /// Target dataset CSV (repeat for multi-target averaging).
    #[arg(long, required = true)]
    target: Vec<PathBuf>,

    /// Treat dataset CSVs as pre-discretized label files.
    #[arg(long)]
    labels: bool,

    /// Reuse persisted bin edges.
    #[arg(long)]
    bins: Option<PathBuf>,

    /// Ranking CSV (repeat for several methods, or one per target when
    /// averaging).
    #[arg(long, required = true)]
    ranking: Vec<PathBuf>,

    /// none | holdout. `holdout` caps u at the holdout ranking's unique-row
    /// count so the baseline is not penalized for a short candidate list.
    #[arg(long, default_value = "none")]
    u_rule: String,

    /// Holdout baseline ranking CSV; included as a curve and, under
    /// `--u-rule holdout`, the source of the u cap.
    #[arg(long)]
    holdout: Option<PathBuf>,

    /// Average the per-target curves onto the k/u grid.
    #[arg(long)]
    average: bool,

    /// Number of k/u grid points for averaging.
    #[arg(long, default_value_t = 100)]
    grid_points: usize,

    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let schema = load_schema(&args.schema)
        .with_context(|| format!("loading schema {}", args.schema.display()))?;
    let domain = schema.domain.clone();

    let targets: Vec<_> = args
        .target
        .iter()
        .map(|path| {
            read_dataset(path, &schema, args.labels, args.bins.as_deref(), None)
                .map(|d| (stem(path), d))
        })
        .collect::<Result<_>>()?;

    let holdout_ranking = args
        .holdout
        .as_ref()
        .map(|path| ConfidenceRanking::from_csv(path, domain.clone()).map(|r| (stem(path), r)))
        .transpose()?;
    if holdout_ranking.is_some() && targets.len() != 1 {
        bail!("--holdout applies to a single target");
    }

    let u_override = match args.u_rule.as_str() {
        "none" => None,
        "holdout" => {
            let (_, ranking) = holdout_ranking
                .as_ref()
                .context("--u-rule holdout requires --holdout <ranking.csv>")?;
            if targets.len() != 1 {
                bail!("--u-rule holdout applies to a single target");
            }
            let u_hat = ranking.len();
            let u = targets[0].1.unique_count();
            Some(u_hat.min(u))
        }
        other => bail!("unknown --u-rule {other:?} (none | holdout)"),
    };

    let rankings: Vec<(String, ConfidenceRanking)> = args
        .ranking
        .iter()
        .map(|path| {
            ConfidenceRanking::from_csv(path, domain.clone()).map(|r| (stem(path), r))
        })
        .collect::<recon_core::Result<_>>()?;

    // Pairing: one target serves every ranking; otherwise rankings and
    // targets pair positionally.
    let mut curves: Vec<MatchRateCurve> = Vec::new();
    if targets.len() == 1 {
        let (dataset_id, target) = &targets[0];
        for (method, ranking) in &rankings {
            curves.push(match_rate_curve(ranking, target, u_override, method, dataset_id)?);
        }
        if let Some((method, ranking)) = &holdout_ranking {
            curves.push(match_rate_curve(ranking, target, u_override, method, dataset_id)?);
        }
    } else {
        if rankings.len() != targets.len() {
            bail!(
                "{} rankings vs {} targets: supply one target, or exactly one ranking per target",
                rankings.len(),
                targets.len()
            );
        }
        for ((method, ranking), (dataset_id, target)) in rankings.iter().zip(&targets) {
            curves.push(match_rate_curve(ranking, target, None, method, dataset_id)?);
        }
    }

    let averaged = if args.average {
        if args.grid_points == 0 {
            bail!("--grid-points must be positive");
        }
        let grid: Vec<f64> = (1..=args.grid_points)
            .map(|i| i as f64 / args.grid_points as f64)
            .collect();
        vec![average_curves(&curves, &grid)?]
    } else {
        Vec::new()
    };

    let written = emit_report(&curves, &averaged, &args.out)?;
    let manifest = serde_json::json!({
        "command": "evaluate",
        "schema": args.schema.display().to_string(),
        "targets": args.target.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "rankings": args.ranking.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "u_rule": args.u_rule,
        "u_override": u_override,
        "average": args.average,
        "grid_points": args.grid_points,
        "outputs": written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;
    for path in &written {
        println!("evaluate: wrote {}", path.display());
    }
    Ok(())
}
