//! Distributional baselines: rankings built from auxiliary datasets rather
//! than from the released statistics.

use crate::attack::{rank_by_frequency, ConfidenceRanking};
use crate::domain::{Attribute, Dataset, Domain, Row};
use crate::error::{Error, Result};
use rand::Rng;
use std::sync::Arc;

/// Rank the unique rows of an auxiliary dataset by empirical frequency:
/// the best guess available to an attacker who can only sample from a
/// population, with the same tie rule as the attack rankings.
pub fn baseline_ranking(d_aux: &Dataset) -> ConfidenceRanking {
    rank_by_frequency(d_aux)
}

/// Sub-datasets of `d_full` at each level of a geographic-style hierarchy,
/// coarse to fine. `hierarchy` names the hierarchy columns coarse→fine and
/// `target_path` gives the target unit's label at each of them.
///
/// Level 0 ("national") keeps every row; level i keeps rows matching the
/// target's first i hierarchy values. Enclosing-unit levels retain the
/// target's own rows. The target unit itself (the full path) is excluded:
/// its sampling baseline is the holdout split, which is disjoint from the
/// attacked half by construction.
pub fn hierarchy_baselines(
    d_full: &Dataset,
    hierarchy: &[String],
    target_path: &[String],
) -> Result<Vec<(String, Dataset)>> {
    if hierarchy.is_empty() {
        return Err(Error::Baseline("hierarchy has no columns".into()));
    }
    if hierarchy.len() != target_path.len() {
        return Err(Error::Baseline(format!(
            "hierarchy has {} columns but the target path has {}",
            hierarchy.len(),
            target_path.len()
        )));
    }
    let domain = d_full.domain();
    let mut filters: Vec<(usize, u32)> = Vec::with_capacity(hierarchy.len());
    for (col, label) in hierarchy.iter().zip(target_path) {
        let attr = domain
            .attr_index(col)
            .ok_or_else(|| Error::Baseline(format!("unknown hierarchy column {col:?}")))?;
        let value = domain.attribute(attr).label_index(label).ok_or_else(|| {
            Error::Baseline(format!("unknown label {label:?} for hierarchy column {col:?}"))
        })?;
        filters.push((attr, value as u32));
    }

    let mut out = Vec::with_capacity(hierarchy.len());
    for level in 0..hierarchy.len() {
        let name = if level == 0 {
            "national".to_string()
        } else {
            hierarchy[level - 1].clone()
        };
        let rows: Vec<Row> = d_full
            .rows()
            .iter()
            .filter(|row| {
                filters[..level]
                    .iter()
                    .all(|&(attr, value)| row.values()[attr] == value)
            })
            .cloned()
            .collect();
        if rows.is_empty() {
            return Err(Error::Baseline(format!(
                "level {name:?}: no rows match the target prefix"
            )));
        }
        out.push((name, Dataset::new(domain.clone(), rows)?));
    }
    Ok(out)
}

/// Strengthen an auxiliary dataset by resampling one attribute i.i.d. from
/// its empirical distribution in the target dataset. All other attributes
/// are untouched; the attribute's correlations with them are destroyed by
/// construction.
pub fn augment_attribute<R: Rng + ?Sized>(
    d_aux: &Dataset,
    d_target: &Dataset,
    attr: &str,
    rng: &mut R,
) -> Result<Dataset> {
    if d_aux.domain().as_ref() != d_target.domain().as_ref() {
        return Err(Error::Baseline(
            "auxiliary and target datasets have different domains".into(),
        ));
    }
    let domain = d_aux.domain();
    let attr_idx = domain
        .attr_index(attr)
        .ok_or_else(|| Error::Baseline(format!("unknown attribute {attr:?}")))?;
    // Empirical distribution of the attribute in the target.
    let mut counts = vec![0u64; domain.cardinality(attr_idx)];
    for row in d_target.rows() {
        counts[row.values()[attr_idx] as usize] += 1;
    }
    let total = d_target.len() as f64;
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();

    let rows: Vec<Row> = d_aux
        .rows()
        .iter()
        .map(|row| {
            let u: f64 = rng.gen();
            let mut cumulative = 0.0;
            let mut chosen = probs.len() - 1;
            for (j, &p) in probs.iter().enumerate() {
                cumulative += p;
                if u < cumulative {
                    chosen = j;
                    break;
                }
            }
            let mut values = row.values().to_vec();
            values[attr_idx] = chosen as u32;
            Row::new(values)
        })
        .collect();
    Dataset::new(domain.clone(), rows)
}

/// Project an attribute away, producing a dataset over the reduced domain.
/// Multiplicities of newly identical rows merge; the row count is preserved.
pub fn drop_attribute(dataset: &Dataset, attr: &str) -> Result<Dataset> {
    let domain = dataset.domain();
    if domain.attr_count() < 2 {
        return Err(Error::Baseline(
            "cannot drop the only attribute of a domain".into(),
        ));
    }
    let attr_idx = domain
        .attr_index(attr)
        .ok_or_else(|| Error::Baseline(format!("unknown attribute {attr:?}")))?;
    let attributes: Vec<Attribute> = domain
        .attributes()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != attr_idx)
        .map(|(_, a)| a.clone())
        .collect();
    let reduced = Arc::new(Domain::new(attributes)?);
    let rows: Vec<Row> = dataset
        .rows()
        .iter()
        .map(|row| {
            let values: Vec<u32> = row
                .values()
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != attr_idx)
                .map(|(_, &v)| v)
                .collect();
            Row::new(values)
        })
        .collect();
    Dataset::new(reduced, rows)
}
