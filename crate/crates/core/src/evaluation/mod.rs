//! Top-k match-rate curves and cross-dataset curve averaging.
//!
//! The match rate at k is the fraction of the k highest-ranked candidate
//! rows that appear in the target dataset; membership ignores multiplicity.

mod report;

pub use report::emit_report;

use crate::attack::ConfidenceRanking;
use crate::domain::Dataset;
use crate::error::{Error, Result};

/// One point of a match-rate curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    pub k_over_u: f64,
    pub match_rate: f64,
}

/// Match rate as a function of rank k, for k = 1..min(|R|, u), where u is
/// the target's unique-row count (or an override under the holdout rule).
#[derive(Debug, Clone)]
pub struct MatchRateCurve {
    pub method: String,
    pub dataset_id: String,
    pub u: usize,
    pub points: Vec<CurvePoint>,
}

impl MatchRateCurve {
    /// Step lookup of the match rate at a rank fraction g of u: the value
    /// at k = ceil(g·u), clamped to the curve's available ranks.
    pub fn value_at_fraction(&self, g: f64) -> f64 {
        let k = (g * self.u as f64).ceil() as usize;
        let k = k.clamp(1, self.points.len());
        self.points[k - 1].match_rate
    }
}

/// Match rate of a ranking's top k against a target dataset (Eq. form:
/// (1/k)·Σ_{i≤k} 1{R_i ∈ D}).
pub fn match_rate(ranking: &ConfidenceRanking, target: &Dataset, k: usize) -> Result<f64> {
    if ranking.domain().as_ref() != target.domain().as_ref() {
        return Err(Error::Evaluation(
            "ranking and target domains differ".into(),
        ));
    }
    if k < 1 || k > ranking.len() {
        return Err(Error::Evaluation(format!(
            "rank {k} out of range for a {}-entry ranking",
            ranking.len()
        )));
    }
    let members = target.row_set();
    let hits = ranking.entries()[..k]
        .iter()
        .filter(|e| members.contains(&e.row))
        .count();
    Ok(hits as f64 / k as f64)
}

/// The full match-rate curve of a ranking against a target dataset.
/// `u_override` implements the holdout rule: when the comparison includes a
/// holdout baseline with fewer unique rows than the target, u is set to the
/// holdout's unique count so the baseline is not penalized for its shorter
/// candidate list.
pub fn match_rate_curve(
    ranking: &ConfidenceRanking,
    target: &Dataset,
    u_override: Option<usize>,
    method: impl Into<String>,
    dataset_id: impl Into<String>,
) -> Result<MatchRateCurve> {
    if ranking.domain().as_ref() != target.domain().as_ref() {
        return Err(Error::Evaluation(
            "ranking and target domains differ".into(),
        ));
    }
    if ranking.is_empty() {
        return Err(Error::Evaluation("ranking is empty".into()));
    }
    let u = u_override.unwrap_or_else(|| target.unique_count());
    if u == 0 {
        return Err(Error::Evaluation("u must be positive".into()));
    }
    let members = target.row_set();
    let max_k = ranking.len().min(u);
    let mut points = Vec::with_capacity(max_k);
    let mut hits = 0usize;
    for (i, entry) in ranking.entries()[..max_k].iter().enumerate() {
        if members.contains(&entry.row) {
            hits += 1;
        }
        let k = i + 1;
        points.push(CurvePoint {
            k,
            k_over_u: k as f64 / u as f64,
            match_rate: hits as f64 / k as f64,
        });
    }
    Ok(MatchRateCurve {
        method: method.into(),
        dataset_id: dataset_id.into(),
        u,
        points,
    })
}

/// A curve averaged over datasets, defined on a common k/u grid.
#[derive(Debug, Clone)]
pub struct AveragedCurve {
    pub method: String,
    /// (k/u grid point, mean match rate) pairs.
    pub points: Vec<(f64, f64)>,
}

/// The default averaging grid: 100 evenly spaced points in (0, 1].
pub fn default_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

/// Pointwise mean of step-interpolated curves on a k/u grid. Each curve is
/// read at k = ceil(g·u) clamped to its available ranks; match rate is a
/// step function of k, so no values are fabricated between ranks.
pub fn average_curves(curves: &[MatchRateCurve], grid: &[f64]) -> Result<AveragedCurve> {
    if curves.is_empty() {
        return Err(Error::Evaluation("no curves to average".into()));
    }
    if grid.is_empty() || grid.iter().any(|&g| !(0.0 < g && g <= 1.0)) {
        return Err(Error::Evaluation("grid points must lie in (0, 1]".into()));
    }
    for curve in curves {
        if curve.points.is_empty() {
            return Err(Error::Evaluation(format!(
                "curve {:?}/{:?} is empty",
                curve.method, curve.dataset_id
            )));
        }
    }
    let points = grid
        .iter()
        .map(|&g| {
            let mean = curves.iter().map(|c| c.value_at_fraction(g)).sum::<f64>()
                / curves.len() as f64;
            (g, mean)
        })
        .collect();
    Ok(AveragedCurve {
        method: curves[0].method.clone(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::rank_by_frequency;
    use crate::domain::{Attribute, Domain, Row};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn domain(cards: &[usize]) -> Arc<Domain> {
        let attrs = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                Attribute::new(format!("a{i}"), (0..c).map(|v| v.to_string()).collect()).unwrap()
            })
            .collect();
        Arc::new(Domain::new(attrs).unwrap())
    }

    fn dataset(domain: &Arc<Domain>, rows: &[&[u32]]) -> Dataset {
        Dataset::new(
            domain.clone(),
            rows.iter().map(|r| Row::new(r.to_vec())).collect(),
        )
        .unwrap()
    }

    /// Build a ranking with the given row order by assigning strictly
    /// decreasing frequencies.
    fn ranking_of(domain: &Arc<Domain>, rows: &[&[u32]]) -> ConfidenceRanking {
        let mut all = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for _ in 0..(rows.len() - i) {
                all.push(*r);
            }
        }
        let ds = dataset(domain, &all);
        rank_by_frequency(&ds)
    }

    #[test]
    fn match_rate_direct_application() {
        // D = {a, b}, R = (a, c, b) → rates (1, 0.5, 2/3).
        let dom = domain(&[3]);
        let target = dataset(&dom, &[&[0], &[1]]);
        let ranking = ranking_of(&dom, &[&[0], &[2], &[1]]);
        assert_eq!(match_rate(&ranking, &target, 1).unwrap(), 1.0);
        assert_eq!(match_rate(&ranking, &target, 2).unwrap(), 0.5);
        assert!((match_rate(&ranking, &target, 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn curve_all_hits_and_all_misses() {
        let dom = domain(&[4]);
        let target = dataset(&dom, &[&[0], &[1], &[2]]);
        let hit_ranking = ranking_of(&dom, &[&[2], &[0], &[1]]);
        let curve = match_rate_curve(&hit_ranking, &target, None, "m", "d").unwrap();
        assert!(curve.points.iter().all(|p| p.match_rate == 1.0));
        assert_eq!(curve.points.len(), 3);

        let miss_ranking = ranking_of(&dom, &[&[3]]);
        let curve = match_rate_curve(&miss_ranking, &target, None, "m", "d").unwrap();
        assert!(curve.points.iter().all(|p| p.match_rate == 0.0));
    }

    #[test]
    fn curve_truncates_at_u_and_honors_override() {
        let dom = domain(&[4]);
        let target = dataset(&dom, &[&[0], &[1]]);
        let ranking = ranking_of(&dom, &[&[0], &[2], &[1], &[3]]);
        let curve = match_rate_curve(&ranking, &target, None, "m", "d").unwrap();
        assert_eq!(curve.u, 2);
        assert_eq!(curve.points.len(), 2);
        let overridden = match_rate_curve(&ranking, &target, Some(4), "m", "d").unwrap();
        assert_eq!(overridden.points.len(), 4);
        assert_eq!(overridden.points[3].k_over_u, 1.0);
    }

    #[test]
    fn curve_matches_naive_reference_on_random_instances() {
        let dom = domain(&[5, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.gen_range(1..=30);
            let rows: Vec<Vec<u32>> = (0..n)
                .map(|_| vec![rng.gen_range(0..5), rng.gen_range(0..3)])
                .collect();
            let refs: Vec<&[u32]> = rows.iter().map(|r| r.as_slice()).collect();
            let target = dataset(&dom, &refs);

            let r_rows: Vec<Vec<u32>> = (0..rng.gen_range(1..=30))
                .map(|_| vec![rng.gen_range(0..5), rng.gen_range(0..3)])
                .collect();
            let refs: Vec<&[u32]> = r_rows.iter().map(|r| r.as_slice()).collect();
            let ranking = rank_by_frequency(&dataset(&dom, &refs));

            let curve = match_rate_curve(&ranking, &target, None, "m", "d").unwrap();
            // Naive reference: recount hits from scratch at every k.
            for point in &curve.points {
                let mut hits = 0;
                for entry in &ranking.entries()[..point.k] {
                    if target.rows().iter().any(|r| r == &entry.row) {
                        hits += 1;
                    }
                }
                assert_eq!(point.match_rate, hits as f64 / point.k as f64);
            }
            // Prefix identity.
            for pair in curve.points.windows(2) {
                let k = pair[1].k as f64;
                let prev = pair[0].match_rate * (k - 1.0) / k;
                let hit = pair[1].match_rate * k - pair[0].match_rate * (k - 1.0);
                assert!(hit > -1e-12 && hit < 1.0 + 1e-12);
                assert!((pair[1].match_rate - (prev + hit / k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn averaging_identity_and_midpoint() {
        let dom = domain(&[4]);
        let target = dataset(&dom, &[&[0], &[1], &[2]]);
        let curve = match_rate_curve(
            &ranking_of(&dom, &[&[0], &[1], &[2]]),
            &target,
            None,
            "m",
            "d",
        )
        .unwrap();
        let grid = default_grid();
        let avg = average_curves(&[curve.clone(), curve.clone()], &grid).unwrap();
        for (g, v) in &avg.points {
            assert_eq!(*v, curve.value_at_fraction(*g));
        }

        // Constant 1.0 and constant 0.0 average to 0.5.
        let ones = match_rate_curve(&ranking_of(&dom, &[&[0]]), &target, None, "m", "d").unwrap();
        let zeros = match_rate_curve(&ranking_of(&dom, &[&[3]]), &target, None, "m", "d").unwrap();
        let avg = average_curves(&[ones, zeros], &grid).unwrap();
        assert!(avg.points.iter().all(|&(_, v)| v == 0.5));
    }

    #[test]
    fn grid_endpoint_reads_last_rank() {
        let dom = domain(&[4]);
        let rows: Vec<Vec<u32>> = (0..4).map(|v| vec![v as u32]).collect();
        let refs: Vec<&[u32]> = rows.iter().map(|r| r.as_slice()).collect();
        let target = dataset(&dom, &refs);
        let ranking = ranking_of(&dom, &[&[0], &[3], &[1], &[2]]);
        let curve = match_rate_curve(&ranking, &target, None, "m", "d").unwrap();
        assert_eq!(curve.value_at_fraction(1.0), curve.points.last().unwrap().match_rate);
    }

    #[test]
    fn averaged_values_stay_within_input_bounds() {
        let dom = domain(&[6]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<u32>> = (0..12).map(|_| vec![rng.gen_range(0..6)]).collect();
        let refs: Vec<&[u32]> = rows.iter().map(|r| r.as_slice()).collect();
        let target = dataset(&dom, &refs);
        let mut curves = Vec::new();
        for _ in 0..4 {
            let r_rows: Vec<Vec<u32>> = (0..10).map(|_| vec![rng.gen_range(0..6)]).collect();
            let refs: Vec<&[u32]> = r_rows.iter().map(|r| r.as_slice()).collect();
            let ranking = rank_by_frequency(&dataset(&dom, &refs));
            curves.push(match_rate_curve(&ranking, &target, None, "m", "d").unwrap());
        }
        let grid = default_grid();
        let avg = average_curves(&curves, &grid).unwrap();
        for (i, &(g, v)) in avg.points.iter().enumerate() {
            let values: Vec<f64> = curves.iter().map(|c| c.value_at_fraction(g)).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "point {i}");
        }
    }

    #[test]
    fn domain_mismatch_is_rejected() {
        let a = domain(&[2]);
        let b = domain(&[3]);
        let target = dataset(&b, &[&[0]]);
        let ranking = ranking_of(&a, &[&[0]]);
        assert!(match_rate_curve(&ranking, &target, None, "m", "d").is_err());
    }
}
