//! Statistical query workloads: CNF counting queries and k-way marginals,
//! evaluated exactly on datasets and differentiably on relaxed datasets.
//!
//! A CNF query is a conjunction of clauses, each clause an allowed-value set
//! for one attribute; its answer on a dataset is the fraction of rows whose
//! value lies in every clause's set. The relaxation replaces a row by
//! per-attribute probability blocks: a clause scores the probability mass of
//! its allowed set and a query scores the product over clauses, which
//! coincides with exact evaluation on one-hot rows.

use crate::domain::{Dataset, Domain, Row};
use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// Tolerance for judging a relaxed row block normalized.
pub const BLOCK_NORMALIZATION_TOL: f64 = 1e-6;

/// One conjunct: `attribute value ∈ allowed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    attr: usize,
    allowed: Vec<u32>,
}

impl Clause {
    pub fn new(attr: usize, mut allowed: Vec<u32>) -> Result<Self> {
        if allowed.is_empty() {
            return Err(Error::Query(format!(
                "clause on attribute {attr} has an empty allowed set"
            )));
        }
        allowed.sort_unstable();
        allowed.dedup();
        Ok(Clause { attr, allowed })
    }

    pub fn attr(&self) -> usize {
        self.attr
    }

    pub fn allowed(&self) -> &[u32] {
        &self.allowed
    }
}

/// A conjunction of clauses over distinct attributes. `k = 0` (no clauses)
/// is the constant-true total-population query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfQuery {
    clauses: Vec<Clause>,
}

impl CnfQuery {
    pub fn new(clauses: Vec<Clause>) -> Result<Self> {
        let mut attrs: Vec<usize> = clauses.iter().map(|c| c.attr).collect();
        attrs.sort_unstable();
        attrs.dedup();
        if attrs.len() != clauses.len() {
            return Err(Error::Query(
                "clauses must reference distinct attributes".into(),
            ));
        }
        Ok(CnfQuery { clauses })
    }

    /// A k-way marginal: each fixed attribute constrained to one value.
    pub fn marginal(pairs: &[(usize, u32)]) -> Result<Self> {
        CnfQuery::new(
            pairs
                .iter()
                .map(|&(attr, value)| Clause::new(attr, vec![value]))
                .collect::<Result<_>>()?,
        )
    }

    pub fn k(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn matches(&self, row: &Row) -> bool {
        self.clauses
            .iter()
            .all(|c| c.allowed.binary_search(&(row.values()[c.attr])).is_ok())
    }

    fn validate(&self, domain: &Domain) -> Result<()> {
        for clause in &self.clauses {
            if clause.attr >= domain.attr_count() {
                return Err(Error::Query(format!(
                    "clause references attribute index {} outside the domain",
                    clause.attr
                )));
            }
            let card = domain.cardinality(clause.attr) as u32;
            if let Some(&v) = clause.allowed.iter().find(|&&v| v >= card) {
                return Err(Error::Query(format!(
                    "clause on attribute {:?} allows out-of-range value {v}",
                    domain.attribute(clause.attr).name()
                )));
            }
        }
        Ok(())
    }
}

/// Flattened clause with precomputed one-hot offsets and a membership table,
/// used by the evaluation hot loops.
#[derive(Debug, Clone)]
struct CompiledClause {
    offset: usize,
    attr: usize,
    allowed: Vec<u32>,
    mask: Vec<bool>,
}

#[derive(Debug, Clone)]
struct CompiledQuery {
    clauses: Vec<CompiledClause>,
}

/// An ordered list of CNF queries over one domain. The order is fixed at
/// construction and defines answer-vector indexing.
#[derive(Debug, Clone)]
pub struct QueryWorkload {
    domain: Arc<Domain>,
    queries: Vec<CnfQuery>,
    compiled: Vec<CompiledQuery>,
}

impl QueryWorkload {
    pub fn new(domain: Arc<Domain>, queries: Vec<CnfQuery>) -> Result<Self> {
        let mut compiled = Vec::with_capacity(queries.len());
        for query in &queries {
            query.validate(&domain)?;
            compiled.push(CompiledQuery {
                clauses: query
                    .clauses
                    .iter()
                    .map(|c| {
                        let card = domain.cardinality(c.attr);
                        let mut mask = vec![false; card];
                        for &v in &c.allowed {
                            mask[v as usize] = true;
                        }
                        CompiledClause {
                            offset: domain.offset(c.attr),
                            attr: c.attr,
                            allowed: c.allowed.clone(),
                            mask,
                        }
                    })
                    .collect(),
            });
        }
        Ok(QueryWorkload {
            domain,
            queries,
            compiled,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    /// Number of queries (`m`).
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn queries(&self) -> &[CnfQuery] {
        &self.queries
    }

    /// Maximum clause count across queries.
    pub fn max_k(&self) -> usize {
        self.queries.iter().map(|q| q.k()).max().unwrap_or(0)
    }
}

/// Whether an answer vector came from exact evaluation or the relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Relaxed,
}

/// A length-m vector of query answers as fractions in [0, 1].
#[derive(Debug, Clone)]
pub struct AnswerVector {
    values: Vec<f64>,
    provenance: Provenance,
}

impl AnswerVector {
    pub fn new(values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Query(format!(
                    "answer {i} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(AnswerVector { values, provenance })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// Fraction of row instances of `dataset` satisfying every clause of `query`.
pub fn eval_query(query: &CnfQuery, dataset: &Dataset) -> Result<f64> {
    query.validate(dataset.domain())?;
    let hits = dataset.rows().iter().filter(|r| query.matches(r)).count();
    Ok(hits as f64 / dataset.len() as f64)
}

/// Evaluate the whole workload exactly. Distinct rows are evaluated once and
/// weighted by multiplicity.
pub fn eval_workload(workload: &QueryWorkload, dataset: &Dataset) -> Result<AnswerVector> {
    if workload.domain().as_ref() != dataset.domain().as_ref() {
        return Err(Error::Query(
            "workload and dataset domains differ".into(),
        ));
    }
    let counts: Vec<(&Row, u64)> = dataset.counts().into_iter().collect();
    let n = dataset.len() as f64;
    let values: Vec<f64> = workload
        .compiled
        .par_iter()
        .map(|cq| {
            let mut hits = 0u64;
            for (row, count) in &counts {
                if cq
                    .clauses
                    .iter()
                    .all(|c| c.mask[row.values()[c.attr] as usize])
                {
                    hits += count;
                }
            }
            hits as f64 / n
        })
        .collect();
    AnswerVector::new(values, Provenance::Exact)
}

/// All k-way marginal queries: one per (size-k attribute subset, value
/// tuple). Subsets in lexicographic order, value tuples in odometer order
/// (last subset attribute fastest).
pub fn all_k_way_marginals(domain: Arc<Domain>, k: usize) -> Result<QueryWorkload> {
    let d = domain.attr_count();
    if k < 1 || k > d {
        return Err(Error::Query(format!(
            "marginal arity {k} out of range for a {d}-attribute domain"
        )));
    }
    let mut queries = Vec::new();
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let mut values = vec![0u32; k];
        loop {
            let pairs: Vec<(usize, u32)> =
                subset.iter().copied().zip(values.iter().copied()).collect();
            queries.push(CnfQuery::marginal(&pairs)?);
            // Odometer increment over the subset's value tuple.
            let mut pos = k;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                values[pos] += 1;
                if (values[pos] as usize) < domain.cardinality(subset[pos]) {
                    break;
                }
                values[pos] = 0;
                if pos == 0 {
                    pos = usize::MAX;
                    break;
                }
            }
            if pos == usize::MAX {
                break;
            }
        }
        // Next lexicographic size-k subset.
        let mut i = k;
        loop {
            if i == 0 {
                return QueryWorkload::new(domain, queries);
            }
            i -= 1;
            if subset[i] < d - (k - i) {
                subset[i] += 1;
                for j in i + 1..k {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn validate_relaxed(domain: &Domain, probs: &ArrayView2<f64>) -> Result<()> {
    if probs.ncols() != domain.onehot_width() {
        return Err(Error::Query(format!(
            "relaxed dataset has width {}, domain has {}",
            probs.ncols(),
            domain.onehot_width()
        )));
    }
    if probs.nrows() == 0 {
        return Err(Error::Query("relaxed dataset has no rows".into()));
    }
    for (i, row) in probs.axis_iter(Axis(0)).enumerate() {
        for a in 0..domain.attr_count() {
            let off = domain.offset(a);
            let card = domain.cardinality(a);
            let mut sum = 0.0;
            for j in off..off + card {
                let p = row[j];
                if p < 0.0 {
                    return Err(Error::Query(format!(
                        "relaxed row {i} has negative mass {p} in attribute {:?}",
                        domain.attribute(a).name()
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > BLOCK_NORMALIZATION_TOL {
                return Err(Error::Query(format!(
                    "relaxed row {i}, attribute {:?}: block sums to {sum}, not 1",
                    domain.attribute(a).name()
                )));
            }
        }
    }
    Ok(())
}

/// Work-size threshold below which the evaluation loops run sequentially;
/// tiny instances lose more to parallel dispatch than they gain. Sequential
/// and parallel paths produce bitwise-identical results (the summation
/// order per query is row-major either way, and gradient writes are
/// per-row disjoint), so the switch never affects determinism.
const PAR_WORK_THRESHOLD: usize = 1 << 15;

/// Per-query mean over relaxed rows of the product of clause masses.
/// `subset` selects a query subset (answer order follows `subset`).
///
/// Summation order is fixed: within each query, relaxed rows accumulate in
/// row-major order, so results are bitwise-stable across thread counts.
pub(crate) fn relaxed_answers_subset(
    workload: &QueryWorkload,
    probs: &ArrayView2<f64>,
    subset: &[usize],
) -> Vec<f64> {
    let n = probs.nrows() as f64;
    let one_query = |&qi: &usize| -> f64 {
        let cq = &workload.compiled[qi];
        let mut total = 0.0;
        for row in probs.axis_iter(Axis(0)) {
            let row = row.as_slice().expect("contiguous relaxed row");
            let mut score = 1.0;
            for clause in &cq.clauses {
                let mut mass = 0.0;
                for &v in &clause.allowed {
                    mass += row[clause.offset + v as usize];
                }
                score *= mass;
            }
            total += score;
        }
        total / n
    };
    if subset.len() * probs.nrows() < PAR_WORK_THRESHOLD {
        subset.iter().map(one_query).collect()
    } else {
        subset.par_iter().map(one_query).collect()
    }
}

/// Accumulate d(Σ_j residual_j · answer_j)/d(probs) for a query subset into
/// `grad`. Each relaxed row's gradient block is independent, so rows are
/// processed in parallel with disjoint writes (deterministic output).
pub(crate) fn accumulate_relaxed_gradient_subset(
    workload: &QueryWorkload,
    probs: &ArrayView2<f64>,
    subset: &[usize],
    residual: &[f64],
    grad: &mut Array2<f64>,
) {
    debug_assert_eq!(subset.len(), residual.len());
    let inv_n = 1.0 / probs.nrows() as f64;
    let max_k = workload.max_k();
    // Clause-product scratch, reused across queries (and across rows on the
    // sequential path).
    struct Scratch {
        sums: Vec<f64>,
        prefix: Vec<f64>,
        suffix: Vec<f64>,
    }
    impl Scratch {
        fn new(max_k: usize) -> Self {
            Scratch {
                sums: vec![0.0; max_k],
                prefix: vec![1.0; max_k + 1],
                suffix: vec![1.0; max_k + 1],
            }
        }
    }
    let one_row = |scratch: &mut Scratch,
                   mut grow: ndarray::ArrayViewMut1<f64>,
                   prow: ndarray::ArrayView1<f64>| {
        let prow = prow.as_slice().expect("contiguous relaxed row");
        let grow = grow.as_slice_mut().expect("contiguous gradient row");
        for (pos, &qi) in subset.iter().enumerate() {
            let clauses = &workload.compiled[qi].clauses;
            let k = clauses.len();
            if k == 0 {
                continue; // constant query, zero gradient
            }
            for (c, clause) in clauses.iter().enumerate() {
                let mut mass = 0.0;
                for &v in &clause.allowed {
                    mass += prow[clause.offset + v as usize];
                }
                scratch.sums[c] = mass;
            }
            scratch.prefix[0] = 1.0;
            for c in 0..k {
                scratch.prefix[c + 1] = scratch.prefix[c] * scratch.sums[c];
            }
            scratch.suffix[k] = 1.0;
            for c in (0..k).rev() {
                scratch.suffix[c] = scratch.suffix[c + 1] * scratch.sums[c];
            }
            let weight = residual[pos] * inv_n;
            for (c, clause) in clauses.iter().enumerate() {
                let coeff = weight * scratch.prefix[c] * scratch.suffix[c + 1];
                if coeff == 0.0 {
                    continue;
                }
                for &v in &clause.allowed {
                    grow[clause.offset + v as usize] += coeff;
                }
            }
        }
    };
    let zip = Zip::from(grad.axis_iter_mut(Axis(0))).and(probs.axis_iter(Axis(0)));
    if subset.len() * probs.nrows() < PAR_WORK_THRESHOLD {
        let mut scratch = Scratch::new(max_k);
        zip.for_each(|grow, prow| one_row(&mut scratch, grow, prow));
    } else {
        zip.par_for_each(|grow, prow| one_row(&mut Scratch::new(max_k), grow, prow));
    }
}

/// Differentiable workload evaluation on a relaxed dataset given as an
/// N' x onehot_width probability matrix. On one-hot rows this equals exact
/// evaluation. Answers are clamped into [0, 1] to absorb float excursions
/// on the order of the normalization tolerance.
pub fn relaxed_eval(workload: &QueryWorkload, probs: ArrayView2<f64>) -> Result<AnswerVector> {
    validate_relaxed(workload.domain(), &probs)?;
    let subset: Vec<usize> = (0..workload.len()).collect();
    let values = relaxed_answers_subset(workload, &probs, &subset)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    AnswerVector::new(values, Provenance::Relaxed)
}

/// Gradient of `Σ_j residual[j] · answer_j(probs)` with respect to the
/// probability matrix. Linear in `residual`.
pub fn relaxed_gradient(
    workload: &QueryWorkload,
    probs: ArrayView2<f64>,
    residual: &[f64],
) -> Result<Array2<f64>> {
    validate_relaxed(workload.domain(), &probs)?;
    if residual.len() != workload.len() {
        return Err(Error::Query(format!(
            "residual has length {}, workload has {} queries",
            residual.len(),
            workload.len()
        )));
    }
    let subset: Vec<usize> = (0..workload.len()).collect();
    let mut grad = Array2::zeros(probs.raw_dim());
    accumulate_relaxed_gradient_subset(workload, &probs, &subset, residual, &mut grad);
    Ok(grad)
}

// ---------------------------------------------------------------------------
// Workload configs
// ---------------------------------------------------------------------------

/// Workload config as read from JSON: either all k-way marginals or an
/// explicit list of census-table-style cells.
#[derive(Debug, Clone, Deserialize)]
pub struct WorkloadConfig {
    #[serde(default)]
    pub marginals: Option<MarginalsSpec>,
    #[serde(default)]
    pub cells: Option<Vec<CellSpec>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MarginalsSpec {
    pub k: usize,
}

/// One table cell. Accepts `{"name": ..., "clauses": [...]}`, a bare clause
/// array, or a single clause object for one-clause cells.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CellSpec {
    Named {
        #[serde(default)]
        name: Option<String>,
        clauses: Vec<ClauseSpec>,
    },
    Bare(Vec<ClauseSpec>),
    Single(ClauseSpec),
}

impl CellSpec {
    fn clauses(&self) -> &[ClauseSpec] {
        match self {
            CellSpec::Named { clauses, .. } => clauses,
            CellSpec::Bare(clauses) => clauses,
            CellSpec::Single(clause) => std::slice::from_ref(clause),
        }
    }

    fn describe(&self, index: usize) -> String {
        match self {
            CellSpec::Named {
                name: Some(name), ..
            } => format!("cell {index} ({name:?})"),
            _ => format!("cell {index}"),
        }
    }
}

/// One clause of a cell: a column name plus allowed labels. An entry of the
/// form `"lo..hi"` expands to the numeric labels lo through hi inclusive.
#[derive(Debug, Clone, Deserialize)]
pub struct ClauseSpec {
    pub col: String,
    #[serde(rename = "in")]
    pub allowed: Vec<String>,
}

fn expand_allowed(
    domain: &Domain,
    attr: usize,
    entries: &[String],
    cell: &str,
) -> Result<Vec<u32>> {
    let attribute = domain.attribute(attr);
    let mut out = Vec::new();
    for entry in entries {
        if let Some((lo, hi)) = entry.split_once("..") {
            let (lo, hi): (i64, i64) = match (lo.trim().parse(), hi.trim().parse()) {
                (Ok(lo), Ok(hi)) => (lo, hi),
                _ => {
                    return Err(Error::Config(format!(
                        "{cell}: range {entry:?} on column {:?} is not numeric",
                        attribute.name()
                    )))
                }
            };
            let before = out.len();
            for v in lo..=hi {
                if let Some(idx) = attribute.label_index(&v.to_string()) {
                    out.push(idx as u32);
                }
            }
            if out.len() == before {
                return Err(Error::Config(format!(
                    "{cell}: range {entry:?} matches no labels of column {:?}",
                    attribute.name()
                )));
            }
        } else {
            match attribute.label_index(entry) {
                Some(idx) => out.push(idx as u32),
                None => {
                    return Err(Error::Config(format!(
                        "{cell}: unknown label {entry:?} for column {:?}",
                        attribute.name()
                    )))
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!(
            "{cell}: empty allowed set for column {:?}",
            attribute.name()
        )));
    }
    Ok(out)
}

/// Build a workload from a parsed config.
pub fn build_workload(config: &WorkloadConfig, domain: Arc<Domain>) -> Result<QueryWorkload> {
    match (&config.marginals, &config.cells) {
        (Some(spec), None) => all_k_way_marginals(domain, spec.k),
        (None, Some(cells)) => {
            let mut queries = Vec::with_capacity(cells.len());
            for (i, cell) in cells.iter().enumerate() {
                let label = cell.describe(i);
                let mut clauses = Vec::new();
                for clause in cell.clauses() {
                    let attr = domain.attr_index(&clause.col).ok_or_else(|| {
                        Error::Config(format!(
                            "{label}: unknown column {:?}",
                            clause.col
                        ))
                    })?;
                    let allowed = expand_allowed(&domain, attr, &clause.allowed, &label)?;
                    clauses.push(Clause::new(attr, allowed)?);
                }
                queries.push(CnfQuery::new(clauses).map_err(|e| {
                    Error::Config(format!("{label}: {e}"))
                })?);
            }
            QueryWorkload::new(domain, queries)
        }
        _ => Err(Error::Config(
            "workload config must define exactly one of `marginals` or `cells`".into(),
        )),
    }
}

/// Load a workload config from a JSON file.
pub fn load_workload(path: &Path, domain: Arc<Domain>) -> Result<QueryWorkload> {
    let text = std::fs::read_to_string(path)?;
    let config: WorkloadConfig = serde_json::from_str(&text)?;
    build_workload(&config, domain)
}

/// Write answers as `query_id,value` CSV.
pub fn answers_to_csv(answers: &AnswerVector, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut writer = csv::Writer::from_writer(&mut buf);
        writer.write_record(["query_id", "value"])?;
        for (i, v) in answers.values().iter().enumerate() {
            writer.write_record([i.to_string(), crate::util::fmt_sig10(*v)])?;
        }
        writer.flush()?;
    }
    crate::util::atomic_write(path, &buf)?;
    Ok(())
}

/// Read raw answer values from a `query_id,value` CSV, in query_id order.
/// Values are not required to be fractions (they may be counts awaiting
/// normalization).
pub fn raw_answers_from_csv(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record?;
        let id: usize = record
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Config("answers CSV: bad query_id".into()))?;
        let value: f64 = record
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Config(format!("answers CSV: bad value for query {id}")))?;
        pairs.push((id, value));
    }
    pairs.sort_by_key(|&(id, _)| id);
    for (expect, &(id, _)) in pairs.iter().enumerate() {
        if id != expect {
            return Err(Error::Config(format!(
                "answers CSV: query ids must be 0..m-1, found {id} at position {expect}"
            )));
        }
    }
    Ok(pairs.into_iter().map(|(_, v)| v).collect())
}
