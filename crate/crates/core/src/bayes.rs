//! Exhaustive-enumeration verification on tiny domains: exact posteriors
//! over dataset space, the identity between the two membership expectations
//! that justifies frequency ranking, and an exact posterior-membership
//! reference ranker.
//!
//! Everything here enumerates the full space of size-n multisets, so a guard
//! refuses instances where the underlying tuple space exceeds [`ENUMERATION_GUARD`].

use crate::attack::ConfidenceRanking;
use crate::domain::{Dataset, Domain, Row};
use crate::error::{Error, Result};
use crate::queries::{eval_workload, AnswerVector, QueryWorkload};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

/// Maximum |X|^n for which enumeration is permitted.
pub const ENUMERATION_GUARD: f64 = 1e6;

/// Scale used to express membership probabilities as integer frequencies in
/// reference rankings.
const PROBABILITY_SCALE: f64 = 1e12;

/// A probability distribution over all size-n multisets of rows.
#[derive(Debug, Clone)]
pub struct DatasetPrior {
    domain: Arc<Domain>,
    n: usize,
    support: Vec<(Dataset, f64)>,
}

impl DatasetPrior {
    /// Uniform distribution over all size-n *tuples*, collapsed to
    /// multisets: each multiset is weighted by its multinomial coefficient
    /// over |X|^n. All intermediate counts stay below 2^53, so weights are
    /// exact rationals in doubles.
    pub fn uniform(domain: Arc<Domain>, n: usize) -> Result<Self> {
        check_guard(&domain, n)?;
        let rows = domain.enumerate_rows();
        let tuple_space = domain.row_space_size().powi(n as i32);
        let mut support = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        enumerate_multisets(rows.len(), n, &mut counts, &mut |counts| {
            let weight = multinomial(n, counts) / tuple_space;
            let mut multiset = Vec::with_capacity(n);
            for (row_idx, &c) in counts.iter().enumerate() {
                for _ in 0..c {
                    multiset.push(rows[row_idx].clone());
                }
            }
            support.push((
                Dataset::new(domain.clone(), multiset).expect("non-empty multiset"),
                weight,
            ));
        });
        Ok(DatasetPrior { domain, n, support })
    }

    /// A prior from explicit (dataset, probability) pairs. Probabilities
    /// must be nonnegative and sum to 1 within 1e-12.
    pub fn from_weights(domain: Arc<Domain>, support: Vec<(Dataset, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Domain("prior has empty support".into()));
        }
        let n = support[0].0.len();
        let mut total = 0.0;
        for (dataset, p) in &support {
            if dataset.domain().as_ref() != domain.as_ref() {
                return Err(Error::Domain("prior dataset has a different domain".into()));
            }
            if dataset.len() != n {
                return Err(Error::Domain("prior datasets must share one size".into()));
            }
            if *p < 0.0 {
                return Err(Error::Domain("prior probability is negative".into()));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("prior probabilities sum to {total}, not 1")));
        }
        Ok(DatasetPrior { domain, n, support })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn dataset_size(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> &[(Dataset, f64)] {
        &self.support
    }
}

fn check_guard(domain: &Domain, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("dataset size must be positive".into()));
    }
    let tuples = domain.row_space_size().powi(n as i32);
    if tuples > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard(format!(
            "|X|^n = {tuples:.3e} exceeds {ENUMERATION_GUARD:.0e}"
        )));
    }
    Ok(())
}

/// Visit occupancy vectors of every size-n multiset over `k` row types.
fn enumerate_multisets(
    k: usize,
    remaining: usize,
    counts: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if counts.len() == k - 1 {
        counts.push(remaining);
        visit(counts);
        counts.pop();
        return;
    }
    for c in 0..=remaining {
        counts.push(c);
        enumerate_multisets(k, remaining - c, counts, visit);
        counts.pop();
    }
}

/// Multinomial coefficient n! / Π counts!, as a product of binomials so
/// every intermediate is an exact integer in a double.
fn multinomial(n: usize, counts: &[usize]) -> f64 {
    let mut remaining = n;
    let mut result = 1.0;
    for &c in counts {
        // result *= C(remaining, c)
        let mut binom = 1.0;
        for j in 1..=c {
            binom = binom * (remaining - c + j) as f64 / j as f64;
        }
        result *= binom;
        remaining -= c;
    }
    result
}

fn answer_key(answers: &AnswerVector) -> Vec<u64> {
    answers.values().iter().map(|v| v.to_bits()).collect()
}

/// The exact posterior: the prior restricted to datasets whose workload
/// answers equal `observed` (within 1e-12 per entry), renormalized.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub support: Vec<(Dataset, f64)>,
}

pub fn exact_posterior(
    prior: &DatasetPrior,
    workload: &QueryWorkload,
    observed: &AnswerVector,
) -> Result<Posterior> {
    if observed.len() != workload.len() {
        return Err(Error::Query(format!(
            "observed answers have length {}, workload has {} queries",
            observed.len(),
            workload.len()
        )));
    }
    let mut support = Vec::new();
    let mut mass = 0.0;
    for (dataset, p) in &prior.support {
        let answers = eval_workload(workload, dataset)?;
        let consistent = answers
            .values()
            .iter()
            .zip(observed.values())
            .all(|(a, o)| (a - o).abs() <= 1e-12);
        if consistent {
            support.push((dataset.clone(), *p));
            mass += p;
        }
    }
    if support.is_empty() || mass <= 0.0 {
        return Err(Error::Domain(
            "no dataset in the prior's support is consistent with the observed answers".into(),
        ));
    }
    for (_, p) in &mut support {
        *p /= mass;
    }
    Ok(Posterior { support })
}

/// Result of checking the two-expectation identity by exhaustive summation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Exhaustively compute both membership expectations and their gap.
///
/// lhs draws the true dataset from the prior and its reconstruction from
/// the posterior given the true answers; rhs replaces the true dataset by a
/// second independent posterior draw. The two are equal because the true
/// dataset and the reconstruction are conditionally independent given the
/// answer vector; this routine verifies the equality numerically on a
/// concrete instance.
pub fn verify_identity(
    prior: &DatasetPrior,
    workload: &QueryWorkload,
    chi: impl Fn(&Dataset, &Dataset) -> f64,
) -> Result<IdentityReport> {
    let answers: Vec<AnswerVector> = prior
        .support
        .par_iter()
        .map(|(dataset, _)| eval_workload(workload, dataset))
        .collect::<Result<_>>()?;

    // Partition the support into answer-equivalence classes.
    let mut classes: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for (idx, ans) in answers.iter().enumerate() {
        classes.entry(answer_key(ans)).or_default().push(idx);
    }

    // lhs: loop over true datasets directly.
    let mut lhs = 0.0;
    for (idx, (dataset, p)) in prior.support.iter().enumerate() {
        let class = &classes[&answer_key(&answers[idx])];
        let class_mass: f64 = class.iter().map(|&j| prior.support[j].1).sum();
        let mut inner = 0.0;
        for &j in class {
            let (recon, pj) = &prior.support[j];
            inner += (pj / class_mass) * chi(dataset, recon);
        }
        lhs += p * inner;
    }

    // rhs: loop over classes; both arguments are posterior draws.
    let mut rhs = 0.0;
    for class in classes.values() {
        let class_mass: f64 = class.iter().map(|&j| prior.support[j].1).sum();
        let mut inner = 0.0;
        for &a in class {
            for &b in class {
                let pa = prior.support[a].1 / class_mass;
                let pb = prior.support[b].1 / class_mass;
                inner += pa * pb * chi(&prior.support[a].0, &prior.support[b].0);
            }
        }
        rhs += class_mass * inner;
    }

    Ok(IdentityReport { lhs, rhs, gap: (lhs - rhs).abs() })
}

/// The canonical predicate: 1 when both datasets contain `row`.
pub fn both_contain(row: Row) -> impl Fn(&Dataset, &Dataset) -> f64 {
    move |a, b| {
        if a.contains(&row) && b.contains(&row) {
            1.0
        } else {
            0.0
        }
    }
}

/// Rank rows by their posterior probability of appearing in the true
/// dataset. Frequencies carry the probability scaled to an integer; the
/// rank order is the contract.
pub fn posterior_membership_ranking(
    prior: &DatasetPrior,
    workload: &QueryWorkload,
    observed: &AnswerVector,
) -> Result<ConfidenceRanking> {
    let posterior = exact_posterior(prior, workload, observed)?;
    let mut membership: HashMap<Row, f64> = HashMap::new();
    for (dataset, p) in &posterior.support {
        for row in dataset.row_set() {
            *membership.entry(row.clone()).or_insert(0.0) += p;
        }
    }
    let counts: HashMap<Row, u64> = membership
        .into_iter()
        .map(|(row, p)| (row, (p * PROBABILITY_SCALE).round() as u64))
        .collect();
    Ok(ConfidenceRanking::from_counts(prior.domain.clone(), counts, None))
}
