//! Reconstruction of confidence-ranked rows of a discrete dataset from its
//! published aggregate statistics.
//!
//! The pipeline: encode released statistics as a CNF query workload, solve a
//! continuous relaxation of "find a dataset with these answers" many times
//! from random starting points, round each solution back to discrete rows,
//! and rank rows by how often they recur across solutions. Distributional
//! baselines and a top-k match-rate harness make the rankings comparable.

pub mod attack;
pub mod baselines;
pub mod bayes;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod optimizer;
pub mod queries;
pub mod util;

pub use attack::{
    rank_by_frequency, randomized_round, rap_rank, AttackConfig, AttackManifest, AttackOutcome,
    ConfidenceRanking, InitMode, RankedRow,
};
pub use baselines::{augment_attribute, baseline_ranking, drop_attribute, hierarchy_baselines};
pub use bayes::{
    both_contain, exact_posterior, posterior_membership_ranking, verify_identity, DatasetPrior,
    IdentityReport, Posterior,
};
pub use domain::{
    build_domain, dataset_to_csv, ingest_csv, load_schema, quantile_bins, split_holdout,
    Attribute, BinEdges, BinSource, Dataset, Domain, Row, Schema, SchemaConfig,
};
pub use error::{Error, Result};
pub use evaluation::{
    average_curves, default_grid, emit_report, match_rate, match_rate_curve, AveragedCurve,
    CurvePoint, MatchRateCurve,
};
pub use optimizer::{
    init_from_dataset, init_uniform, loss_gradient, project, Adam, OptimizerConfig,
    ProjectionResult, RelaxedDataset, RunMetadata,
};
pub use queries::{
    all_k_way_marginals, answers_to_csv, build_workload, eval_query, eval_workload, load_workload,
    raw_answers_from_csv, relaxed_eval, relaxed_gradient, AnswerVector, Clause, CnfQuery,
    Provenance, QueryWorkload, WorkloadConfig,
};
