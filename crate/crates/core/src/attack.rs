//! The reconstruction attack: repeated randomized projection runs, randomized
//! rounding back to discrete rows, multiset union, and frequency-based
//! confidence ranking.

use crate::domain::{Dataset, Domain, Row};
use crate::error::{Error, Result};
use crate::optimizer::{
    init_from_dataset, init_uniform, project, OptimizerConfig, RelaxedDataset, RunMetadata,
    DEFAULT_INIT_GAP, DEFAULT_INIT_NOISE,
};
use crate::queries::{AnswerVector, QueryWorkload};
use crate::util::derive_seed;
use ndarray::Axis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

/// Default number of projection runs.
pub const DEFAULT_RUNS: usize = 100;
/// Default relaxed-row budget for uniform initialization.
pub const DEFAULT_RELAXED_ROWS: usize = 1000;

/// How each projection run is initialized.
#[derive(Debug, Clone)]
pub enum InitMode {
    /// Fresh uniform-random scores per run.
    Uniform,
    /// Score rows seeded at a fixed dataset; optimizer and rounding
    /// randomness stay fresh per run.
    FromDataset {
        seed: Dataset,
        gap: f64,
        noise_scale: f64,
    },
}

impl InitMode {
    pub fn from_dataset(seed: Dataset) -> Self {
        InitMode::FromDataset {
            seed,
            gap: DEFAULT_INIT_GAP,
            noise_scale: DEFAULT_INIT_NOISE,
        }
    }

    fn describe(&self) -> String {
        match self {
            InitMode::Uniform => "uniform".into(),
            InitMode::FromDataset { gap, noise_scale, .. } => {
                format!("dataset(gap={gap}, noise={noise_scale})")
            }
        }
    }
}

/// Attack configuration.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    /// Number of independent projection runs (K).
    pub runs: usize,
    /// Rounding draws taken per run.
    pub draws_per_run: usize,
    /// Relaxed-row budget N'. Defaults to 1000 for uniform initialization
    /// and to the seed dataset's size for dataset initialization.
    pub relaxed_rows: Option<usize>,
    pub init: InitMode,
    pub optimizer: OptimizerConfig,
    pub master_seed: u64,
}

impl AttackConfig {
    pub fn new(init: InitMode, master_seed: u64) -> Self {
        AttackConfig {
            runs: DEFAULT_RUNS,
            draws_per_run: 1,
            relaxed_rows: None,
            init,
            optimizer: OptimizerConfig::default(),
            master_seed,
        }
    }

    fn effective_rows(&self) -> usize {
        match (&self.init, self.relaxed_rows) {
            (_, Some(n)) => n,
            (InitMode::Uniform, None) => DEFAULT_RELAXED_ROWS,
            (InitMode::FromDataset { seed, .. }, None) => seed.len(),
        }
    }
}

/// Provenance of a ranking produced by the attack.
#[derive(Debug, Clone, Serialize)]
pub struct RankingProvenance {
    pub master_seed: u64,
    pub runs: usize,
    pub draws_per_run: usize,
}

/// One ranked row with its frequency in the union multiset.
#[derive(Debug, Clone)]
pub struct RankedRow {
    pub row: Row,
    pub frequency: u64,
}

/// Unique rows ordered by descending frequency, ties broken by ascending
/// lexicographic order of the index vectors. Rank is 1-based position.
#[derive(Debug, Clone)]
pub struct ConfidenceRanking {
    domain: Arc<Domain>,
    entries: Vec<RankedRow>,
    provenance: Option<RankingProvenance>,
}

impl ConfidenceRanking {
    pub(crate) fn from_counts(
        domain: Arc<Domain>,
        counts: HashMap<Row, u64>,
        provenance: Option<RankingProvenance>,
    ) -> Self {
        let mut entries: Vec<RankedRow> = counts
            .into_iter()
            .map(|(row, frequency)| RankedRow { row, frequency })
            .collect();
        entries.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.row.cmp(&b.row)));
        ConfidenceRanking { domain, entries, provenance }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn entries(&self) -> &[RankedRow] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn provenance(&self) -> Option<&RankingProvenance> {
        self.provenance.as_ref()
    }

    /// Total multiset size the ranking was built from.
    pub fn total_frequency(&self) -> u64 {
        self.entries.iter().map(|e| e.frequency).sum()
    }

    /// Write as CSV: `rank,frequency,<attr labels...>`.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        {
            let mut writer = csv::Writer::from_writer(&mut buf);
            let mut header = vec!["rank".to_string(), "frequency".to_string()];
            header.extend(self.domain.attributes().iter().map(|a| a.name().to_string()));
            writer.write_record(&header)?;
            for (i, entry) in self.entries.iter().enumerate() {
                let mut record = vec![(i + 1).to_string(), entry.frequency.to_string()];
                record.extend(
                    entry
                        .row
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(a, &v)| self.domain.label(a, v as usize).to_string()),
                );
                writer.write_record(&record)?;
            }
            writer.flush()?;
        }
        crate::util::atomic_write(path, &buf)?;
        Ok(())
    }

    /// Read a ranking CSV written by [`ConfidenceRanking::to_csv`].
    pub fn from_csv(path: &Path, domain: Arc<Domain>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let headers = reader.headers()?.clone();
        let mut col_of_attr = Vec::with_capacity(domain.attr_count());
        for attr in domain.attributes() {
            let pos = headers.iter().position(|h| h == attr.name()).ok_or_else(|| {
                Error::Config(format!(
                    "ranking {} lacks column {:?}",
                    path.display(),
                    attr.name()
                ))
            })?;
            col_of_attr.push(pos);
        }
        let freq_col = headers
            .iter()
            .position(|h| h == "frequency")
            .ok_or_else(|| Error::Config("ranking lacks a frequency column".into()))?;
        let mut entries = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let frequency: u64 = record
                .get(freq_col)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config(format!("ranking row {}: bad frequency", i + 2)))?;
            let mut values = Vec::with_capacity(domain.attr_count());
            for (a, &pos) in col_of_attr.iter().enumerate() {
                let label = record.get(pos).unwrap_or("");
                let v = domain.attribute(a).label_index(label).ok_or_else(|| {
                    Error::Config(format!(
                        "ranking row {}: unknown label {:?} for column {:?}",
                        i + 2,
                        label,
                        domain.attribute(a).name()
                    ))
                })?;
                values.push(v as u32);
            }
            entries.push(RankedRow { row: Row::new(values), frequency });
        }
        for pair in entries.windows(2) {
            if pair[1].frequency > pair[0].frequency {
                return Err(Error::Config(
                    "ranking frequencies must be non-increasing".into(),
                ));
            }
        }
        Ok(ConfidenceRanking { domain, entries, provenance: None })
    }
}

/// Sample discrete datasets from a relaxed dataset: for each draw and each
/// relaxed row, one category per attribute is drawn independently from that
/// row's softmax block.
pub fn randomized_round<R: Rng + ?Sized>(
    relaxed: &RelaxedDataset,
    rng: &mut R,
    draws: usize,
) -> Vec<Dataset> {
    let domain = relaxed.domain().clone();
    let probs = relaxed.probabilities();
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut rows = Vec::with_capacity(relaxed.n_rows());
        for prow in probs.axis_iter(Axis(0)) {
            let mut values = Vec::with_capacity(domain.attr_count());
            for a in 0..domain.attr_count() {
                let off = domain.offset(a);
                let card = domain.cardinality(a);
                let u: f64 = rng.gen();
                let mut cumulative = 0.0;
                let mut chosen = card - 1;
                for j in 0..card {
                    cumulative += prow[off + j];
                    if u < cumulative {
                        chosen = j;
                        break;
                    }
                }
                values.push(chosen as u32);
            }
            rows.push(Row::new(values));
        }
        out.push(Dataset::new(domain.clone(), rows).expect("rounded rows are valid"));
    }
    out
}

/// Rank the unique rows of a multiset by descending multiplicity.
pub fn rank_by_frequency(dataset: &Dataset) -> ConfidenceRanking {
    let mut counts: HashMap<Row, u64> = HashMap::new();
    for row in dataset.rows() {
        *counts.entry(row.clone()).or_insert(0) += 1;
    }
    ConfidenceRanking::from_counts(dataset.domain().clone(), counts, None)
}

/// A run that aborted, recorded in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct FailedRun {
    pub run_index: usize,
    pub error: String,
}

/// Everything worth persisting about one attack invocation.
#[derive(Debug, Clone, Serialize)]
pub struct AttackManifest {
    pub master_seed: u64,
    pub runs_requested: usize,
    pub runs_effective: usize,
    pub draws_per_run: usize,
    pub relaxed_rows: usize,
    pub init_mode: String,
    pub union_size: u64,
    pub unique_rows: usize,
    pub per_run: Vec<RunMetadata>,
    pub failed_runs: Vec<FailedRun>,
}

/// Attack output: the ranking plus run metadata.
#[derive(Debug)]
pub struct AttackOutcome {
    pub ranking: ConfidenceRanking,
    pub manifest: AttackManifest,
}

/// Run the full attack: `runs` independent projections from fresh
/// initializations, randomized rounding of each result, multiset union, and
/// frequency ranking.
///
/// Per-run randomness is derived from `(master_seed, run index, stage)`, so
/// runs are independent of execution order and may execute in parallel. A
/// run whose projection aborts is excluded; the manifest reports the
/// effective run count.
pub fn rap_rank(
    workload: &QueryWorkload,
    target: &AnswerVector,
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    if cfg.runs < 1 {
        return Err(Error::Attack("need at least one run".into()));
    }
    if cfg.draws_per_run < 1 {
        return Err(Error::Attack("need at least one rounding draw per run".into()));
    }
    if target.len() != workload.len() {
        return Err(Error::Attack(format!(
            "target has length {}, workload has {} queries",
            target.len(),
            workload.len()
        )));
    }
    if let InitMode::FromDataset { seed, .. } = &cfg.init {
        if seed.domain().as_ref() != workload.domain().as_ref() {
            return Err(Error::Attack("seed dataset domain differs from workload".into()));
        }
    }
    let n_rows = cfg.effective_rows();
    if n_rows == 0 {
        return Err(Error::Attack("relaxed row budget must be positive".into()));
    }

    let domain = workload.domain().clone();
    type RunOutcome = std::result::Result<(Vec<Dataset>, RunMetadata), String>;
    let results: Vec<(usize, RunOutcome)> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let outcome = run_once(workload, target, cfg, n_rows, run);
            (run, outcome.map_err(|e| e.to_string()))
        })
        .collect();

    let mut union: Vec<Row> = Vec::new();
    let mut per_run = Vec::new();
    let mut failed_runs = Vec::new();
    for (run, outcome) in results {
        match outcome {
            Ok((datasets, metadata)) => {
                for ds in &datasets {
                    union.extend_from_slice(ds.rows());
                }
                per_run.push(metadata);
            }
            Err(error) => failed_runs.push(FailedRun { run_index: run, error }),
        }
    }
    if per_run.is_empty() {
        let first = &failed_runs[0];
        return Err(Error::Attack(format!(
            "all {} runs failed; run {}: {}",
            cfg.runs, first.run_index, first.error
        )));
    }

    let mut counts: HashMap<Row, u64> = HashMap::new();
    for row in union {
        *counts.entry(row).or_insert(0) += 1;
    }
    let runs_effective = per_run.len();
    let provenance = RankingProvenance {
        master_seed: cfg.master_seed,
        runs: runs_effective,
        draws_per_run: cfg.draws_per_run,
    };
    let ranking = ConfidenceRanking::from_counts(domain, counts, Some(provenance));
    let manifest = AttackManifest {
        master_seed: cfg.master_seed,
        runs_requested: cfg.runs,
        runs_effective,
        draws_per_run: cfg.draws_per_run,
        relaxed_rows: n_rows,
        init_mode: cfg.init.describe(),
        union_size: ranking.total_frequency(),
        unique_rows: ranking.len(),
        per_run,
        failed_runs,
    };
    Ok(AttackOutcome { ranking, manifest })
}

fn run_once(
    workload: &QueryWorkload,
    target: &AnswerVector,
    cfg: &AttackConfig,
    n_rows: usize,
    run: usize,
) -> Result<(Vec<Dataset>, RunMetadata)> {
    let run_idx = run as u64;
    let init = match &cfg.init {
        InitMode::Uniform => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, run_idx, "init"));
            init_uniform(workload.domain().clone(), n_rows, &mut rng)?
        }
        InitMode::FromDataset { seed, gap, noise_scale } => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, run_idx, "init"));
            init_from_dataset(seed, Some(n_rows), *gap, *noise_scale, &mut rng)?
        }
    };
    let mut opt_cfg = cfg.optimizer.clone();
    opt_cfg.seed = derive_seed(cfg.master_seed, run_idx, "opt");
    let projected = project(workload, target, init, &opt_cfg)
        .map_err(|e| Error::Attack(format!("run {run}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, run_idx, "round"));
    let rounded = randomized_round(&projected.relaxed, &mut rng, cfg.draws_per_run);
    Ok((rounded, projected.metadata))
}
