use super::write_json;
use anyhow::{bail, Context, Result};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recon_core::util::derive_seed;
use recon_core::{
    all_k_way_marginals, both_contain, eval_workload, posterior_membership_ranking, rap_rank,
    verify_identity, AttackConfig, Attribute, Dataset, DatasetPrior, Domain, InitMode,
    OptimizerConfig, Row,
};
use std::collections::HashSet;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Args)]
pub struct OracleArgs {
    /// Attribute cardinalities of the tiny synthetic domain, e.g. `2,2`.
    #[arg(long, default_value = "2,2")]
    cards: String,

    /// Dataset size n (the enumeration covers all size-n multisets).
    #[arg(long, default_value_t = 2)]
    n: usize,

    /// Marginal arity of the released workload.
    #[arg(long, default_value_t = 1)]
    marginal_k: usize,

    /// Predicate row for the membership check, `row=<label,...>`
    /// (default: both datasets contain the lexicographically first row).
    #[arg(long)]
    chi: Option<String>,

    /// Projection runs for the attack-vs-posterior ranking comparison.
    #[arg(long, default_value_t = 10)]
    runs: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: OracleArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let cards: Vec<usize> = args
        .cards
        .split(',')
        .map(|s| s.trim().parse().context("cards must be comma-separated integers"))
        .collect::<Result<_>>()?;
    if cards.is_empty() {
        bail!("--cards must list at least one cardinality");
    }
    let attributes: Vec<Attribute> = cards
        .iter()
        .enumerate()
        .map(|(i, &c)| Attribute::new(format!("x{i}"), (0..c).map(|v| v.to_string()).collect()))
        .collect::<recon_core::Result<_>>()?;
    let domain = Arc::new(Domain::new(attributes)?);

    let prior = DatasetPrior::uniform(domain.clone(), args.n)?;
    if args.marginal_k < 1 || args.marginal_k > domain.attr_count() {
        bail!(
            "--marginal-k {} out of range for a {}-attribute domain",
            args.marginal_k,
            domain.attr_count()
        );
    }
    let workload = all_k_way_marginals(domain.clone(), args.marginal_k)?;

    // Draw the "true" dataset from the prior: n i.i.d. uniform rows.
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, 0, "oracle-data"));
    let rows: Vec<Row> = (0..args.n)
        .map(|_| {
            Row::new(
                (0..domain.attr_count())
                    .map(|a| rng.gen_range(0..domain.cardinality(a)) as u32)
                    .collect(),
            )
        })
        .collect();
    let true_dataset = Dataset::new(domain.clone(), rows)?;
    let observed = eval_workload(&workload, &true_dataset)?;

    let chi_row = match &args.chi {
        Some(spec) => {
            let labels = spec
                .strip_prefix("row=")
                .context("--chi must have the form row=<label,...>")?;
            let parts: Vec<&str> = labels.split(',').map(str::trim).collect();
            if parts.len() != domain.attr_count() {
                bail!(
                    "--chi row has {} labels, domain has {} attributes",
                    parts.len(),
                    domain.attr_count()
                );
            }
            let values = parts
                .iter()
                .enumerate()
                .map(|(a, label)| {
                    domain
                        .attribute(a)
                        .label_index(label)
                        .map(|v| v as u32)
                        .with_context(|| format!("unknown label {label:?} for attribute x{a}"))
                })
                .collect::<Result<_>>()?;
            Row::new(values)
        }
        None => domain.enumerate_rows()[0].clone(),
    };

    let report = verify_identity(&prior, &workload, both_contain(chi_row.clone()))?;
    let reference = posterior_membership_ranking(&prior, &workload, &observed)?;
    let posterior = recon_core::exact_posterior(&prior, &workload, &observed)?;

    let attack_cfg = AttackConfig {
        runs: args.runs,
        relaxed_rows: Some(args.n),
        optimizer: OptimizerConfig::default(),
        ..AttackConfig::new(InitMode::Uniform, derive_seed(args.seed, 0, "oracle-attack"))
    };
    let outcome = rap_rank(&workload, &observed, &attack_cfg)?;

    // Compare top-u sets of the attack ranking and the exact reference.
    let u = true_dataset.unique_count();
    let top = |entries: &[recon_core::RankedRow]| -> HashSet<Vec<u32>> {
        entries
            .iter()
            .take(u)
            .map(|e| e.row.values().to_vec())
            .collect()
    };
    let attack_top = top(outcome.ranking.entries());
    let reference_top = top(reference.entries());
    let intersection = attack_top.intersection(&reference_top).count();
    let union = attack_top.union(&reference_top).count();
    let jaccard = intersection as f64 / union as f64;

    let chi_labels: Vec<String> = chi_row
        .values()
        .iter()
        .enumerate()
        .map(|(a, &v)| domain.label(a, v as usize).to_string())
        .collect();
    let json = serde_json::json!({
        "command": "oracle",
        "cards": cards,
        "n": args.n,
        "marginal_k": args.marginal_k,
        "seed": args.seed,
        "chi_row": chi_labels,
        "identity": report,
        "posterior_support_size": posterior.support.len(),
        "identifiable": posterior.support.len() == 1,
        "attack_runs": args.runs,
        "top_u_agreement": {
            "u": u,
            "jaccard": jaccard,
            "equal": attack_top == reference_top,
        },
    });
    write_json(&args.out.join("oracle.json"), &json)?;
    println!(
        "oracle: lhs = {:.15}, rhs = {:.15}, gap = {:.3e} ({})",
        report.lhs,
        report.rhs,
        report.gap,
        if report.gap < 1e-12 { "gap < 1e-12" } else { "gap >= 1e-12" }
    );
    println!(
        "oracle: posterior support {} dataset(s); top-{u} agreement with the exact ranker: jaccard {:.3}",
        posterior.support.len(),
        jaccard
    );
    Ok(())
}
