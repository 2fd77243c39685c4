//! The relaxed-projection solver: Adam descent on the squared gap between
//! relaxed workload answers and a released answer vector.
//!
//! Relaxed rows are parameterized by unconstrained scores; a per-attribute
//! softmax maps each row's block of scores to a probability distribution, so
//! iterates stay feasible without projection steps and rounding
//! probabilities are immediate.

use crate::domain::{Dataset, Domain, Row};
use crate::error::{Error, Result};
use crate::queries::{
    accumulate_relaxed_gradient_subset, relaxed_answers_subset, AnswerVector, QueryWorkload,
};
use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rand::SeedableRng;
use serde::Serialize;
use std::sync::Arc;
use std::time::Instant;

/// Default score placed on the observed category when seeding from a dataset.
pub const DEFAULT_INIT_GAP: f64 = 3.0;
/// Default Gaussian noise scale used to break ties in dataset seeding.
pub const DEFAULT_INIT_NOISE: f64 = 0.1;

/// Epochs between full-batch loss checkpoints.
const CHECK_INTERVAL: usize = 50;

/// A continuous surrogate dataset: `n_rows` rows of free scores over the
/// one-hot layout. The derived view maps each row's per-attribute score
/// block through a softmax.
#[derive(Debug, Clone)]
pub struct RelaxedDataset {
    domain: Arc<Domain>,
    scores: Array2<f64>,
}

impl RelaxedDataset {
    pub fn from_scores(domain: Arc<Domain>, scores: Array2<f64>) -> Result<Self> {
        if scores.nrows() == 0 {
            return Err(Error::Optimizer("relaxed dataset needs at least one row".into()));
        }
        if scores.ncols() != domain.onehot_width() {
            return Err(Error::Optimizer(format!(
                "scores have width {}, domain has {}",
                scores.ncols(),
                domain.onehot_width()
            )));
        }
        Ok(RelaxedDataset { domain, scores })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn n_rows(&self) -> usize {
        self.scores.nrows()
    }

    pub fn scores(&self) -> ArrayView2<'_, f64> {
        self.scores.view()
    }

    /// Softmax of every attribute block of every row. Blocks are strictly
    /// positive and sum to 1.
    pub fn probabilities(&self) -> Array2<f64> {
        let mut probs = Array2::zeros(self.scores.raw_dim());
        softmax_into(&self.domain, &self.scores.view(), &mut probs);
        probs
    }
}

/// Work-size threshold below which the softmax passes run sequentially.
/// Both paths write per-row disjoint outputs, so results are identical.
const PAR_WORK_THRESHOLD: usize = 1 << 15;

/// Per-attribute softmax of each row's score block, written into `out`.
fn softmax_into(domain: &Domain, scores: &ArrayView2<f64>, out: &mut Array2<f64>) {
    let blocks: Vec<(usize, usize)> = (0..domain.attr_count())
        .map(|a| (domain.offset(a), domain.cardinality(a)))
        .collect();
    let one_row = |mut orow: ndarray::ArrayViewMut1<f64>, srow: ndarray::ArrayView1<f64>| {
        let srow = srow.as_slice().expect("contiguous score row");
        let orow = orow.as_slice_mut().expect("contiguous output row");
        for &(off, card) in &blocks {
            let block = &srow[off..off + card];
            let max = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (j, &s) in block.iter().enumerate() {
                let e = (s - max).exp();
                orow[off + j] = e;
                total += e;
            }
            for x in &mut orow[off..off + card] {
                *x /= total;
            }
        }
    };
    let zip = Zip::from(out.axis_iter_mut(Axis(0))).and(scores.axis_iter(Axis(0)));
    if scores.len() < PAR_WORK_THRESHOLD {
        zip.for_each(one_row);
    } else {
        zip.par_for_each(one_row);
    }
}

/// Back-propagate a gradient with respect to probabilities through the
/// blockwise softmax: for each block, g_score = p ⊙ (g_p − <p, g_p>).
fn softmax_backward_into(
    domain: &Domain,
    probs: &ArrayView2<f64>,
    grad_probs: &ArrayView2<f64>,
    out: &mut Array2<f64>,
) {
    let blocks: Vec<(usize, usize)> = (0..domain.attr_count())
        .map(|a| (domain.offset(a), domain.cardinality(a)))
        .collect();
    let one_row = |mut orow: ndarray::ArrayViewMut1<f64>,
                   prow: ndarray::ArrayView1<f64>,
                   grow: ndarray::ArrayView1<f64>| {
        let prow = prow.as_slice().expect("contiguous probability row");
        let grow = grow.as_slice().expect("contiguous gradient row");
        let orow = orow.as_slice_mut().expect("contiguous output row");
        for &(off, card) in &blocks {
            let mut dot = 0.0;
            for j in off..off + card {
                dot += prow[j] * grow[j];
            }
            for j in off..off + card {
                orow[j] = prow[j] * (grow[j] - dot);
            }
        }
    };
    let zip = Zip::from(out.axis_iter_mut(Axis(0)))
        .and(probs.axis_iter(Axis(0)))
        .and(grad_probs.axis_iter(Axis(0)));
    if probs.len() < PAR_WORK_THRESHOLD {
        zip.for_each(one_row);
    } else {
        zip.par_for_each(one_row);
    }
}

/// Adam with bias correction over a flat parameter array.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: usize,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Solver configuration. `batch_size == 0` means full-batch gradients;
/// `stop_tol == 0` disables early stopping (the run uses every epoch).
#[derive(Debug, Clone, Serialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub stop_tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 1000,
            batch_size: 0,
            stop_tol: 1e-8,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    /// Default batching policy: full batch up to 20k queries, 4096 beyond.
    pub fn for_workload_size(m: usize) -> Self {
        OptimizerConfig {
            batch_size: if m <= 20_000 { 0 } else { 4096 },
            ..OptimizerConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Optimizer("learning rate must be positive".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::Optimizer("max epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Uniform random initialization: i.i.d. standard normal scores, giving
/// near-uniform derived blocks in expectation.
pub fn init_uniform<R: Rng + ?Sized>(
    domain: Arc<Domain>,
    n_rows: usize,
    rng: &mut R,
) -> Result<RelaxedDataset> {
    if n_rows == 0 {
        return Err(Error::Optimizer("relaxed dataset needs at least one row".into()));
    }
    let width = domain.onehot_width();
    let data: Vec<f64> = (0..n_rows * width)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let scores = Array2::from_shape_vec((n_rows, width), data).expect("shape matches data");
    RelaxedDataset::from_scores(domain, scores)
}

/// Seed the relaxation at a dataset: each relaxed row gets score `gap` at
/// the observed category of one seed row and 0 elsewhere, plus Gaussian
/// noise of scale `noise_scale` to break ties. When `n_rows` differs from
/// the seed size, rows are sampled with replacement; when equal (or left
/// unset) every seed row is used exactly once.
pub fn init_from_dataset<R: Rng + ?Sized>(
    seed_data: &Dataset,
    n_rows: Option<usize>,
    gap: f64,
    noise_scale: f64,
    rng: &mut R,
) -> Result<RelaxedDataset> {
    let n_rows = n_rows.unwrap_or_else(|| seed_data.len());
    if n_rows == 0 {
        return Err(Error::Optimizer("relaxed dataset needs at least one row".into()));
    }
    let domain = seed_data.domain().clone();
    let width = domain.onehot_width();
    let rows: Vec<&Row> = if n_rows == seed_data.len() {
        seed_data.rows().iter().collect()
    } else {
        (0..n_rows)
            .map(|_| &seed_data.rows()[rng.gen_range(0..seed_data.len())])
            .collect()
    };
    let mut scores = Array2::zeros((n_rows, width));
    for (i, row) in rows.iter().enumerate() {
        for (a, &v) in row.values().iter().enumerate() {
            scores[[i, domain.offset(a) + v as usize]] = gap;
        }
        if noise_scale > 0.0 {
            for j in 0..width {
                let noise: f64 = StandardNormal.sample(rng);
                scores[[i, j]] += noise_scale * noise;
            }
        }
    }
    RelaxedDataset::from_scores(domain, scores)
}

/// Squared-distance loss and its gradient with respect to the scores,
/// assembled from the relaxed query gradient chained through the softmax.
pub fn loss_gradient(
    workload: &QueryWorkload,
    relaxed: &RelaxedDataset,
    target: &AnswerVector,
) -> Result<(f64, Array2<f64>)> {
    if target.len() != workload.len() {
        return Err(Error::Optimizer(format!(
            "target has length {}, workload has {} queries",
            target.len(),
            workload.len()
        )));
    }
    let probs = relaxed.probabilities();
    let subset: Vec<usize> = (0..workload.len()).collect();
    let answers = relaxed_answers_subset(workload, &probs.view(), &subset);
    let mut loss = 0.0;
    let mut residual = Vec::with_capacity(answers.len());
    for (a, t) in answers.iter().zip(target.values()) {
        let diff = a - t;
        loss += diff * diff;
        residual.push(2.0 * diff);
    }
    let mut grad_probs = Array2::zeros(probs.raw_dim());
    accumulate_relaxed_gradient_subset(workload, &probs.view(), &subset, &residual, &mut grad_probs);
    let mut grad_scores = Array2::zeros(probs.raw_dim());
    softmax_backward_into(relaxed.domain(), &probs.view(), &grad_probs.view(), &mut grad_scores);
    Ok((loss, grad_scores))
}

/// Why a projection run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    AlreadyOptimal,
    Converged,
    ZeroLoss,
    MaxEpochs,
}

/// Full-batch loss recorded at a checkpoint.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub loss: f64,
}

/// Run metadata emitted alongside every projection.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub n_rows: usize,
    pub onehot_width: usize,
    pub n_queries: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub stop_tol: f64,
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    /// True if a full-batch checkpoint loss increased beyond 1e-9; the run
    /// is still returned (best iterate) but flagged.
    pub descent_violation: bool,
    pub checkpoints: Vec<Checkpoint>,
    pub wall_time_secs: f64,
}

/// Result of one projection run.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub relaxed: RelaxedDataset,
    pub metadata: RunMetadata,
}

/// Minimize `Σ_j (relaxed_answer_j − target_j)²` over the relaxed dataset
/// with Adam, processing queries in shuffled batches each epoch. Returns the
/// iterate with the lowest full-batch checkpoint loss, so the final loss
/// never exceeds the initial loss.
pub fn project(
    workload: &QueryWorkload,
    target: &AnswerVector,
    init: RelaxedDataset,
    cfg: &OptimizerConfig,
) -> Result<ProjectionResult> {
    cfg.validate()?;
    let m = workload.len();
    if target.len() != m {
        return Err(Error::Optimizer(format!(
            "target has length {}, workload has {} queries",
            target.len(),
            m
        )));
    }
    if init.domain().as_ref() != workload.domain().as_ref() {
        return Err(Error::Optimizer("init and workload domains differ".into()));
    }
    let start = Instant::now();
    let domain = init.domain().clone();
    let n_rows = init.n_rows();
    let width = domain.onehot_width();
    let batch = if cfg.batch_size == 0 { m } else { cfg.batch_size.min(m) };
    let full_batch = batch == m;
    let all: Vec<usize> = (0..m).collect();

    let mut theta = init.scores.clone();
    let mut probs = Array2::zeros(theta.raw_dim());
    let full_loss = |theta: &Array2<f64>, probs: &mut Array2<f64>| -> f64 {
        softmax_into(&domain, &theta.view(), probs);
        relaxed_answers_subset(workload, &probs.view(), &all)
            .iter()
            .zip(target.values())
            .map(|(a, t)| (a - t) * (a - t))
            .sum()
    };

    let initial_loss = full_loss(&theta, &mut probs);
    if !initial_loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0 });
    }
    let mut metadata = RunMetadata {
        n_rows,
        onehot_width: width,
        n_queries: m,
        learning_rate: cfg.learning_rate,
        batch_size: batch,
        max_epochs: cfg.max_epochs,
        stop_tol: cfg.stop_tol,
        seed: cfg.seed,
        initial_loss,
        final_loss: initial_loss,
        epochs_run: 0,
        stop_reason: StopReason::MaxEpochs,
        descent_violation: false,
        checkpoints: vec![Checkpoint { epoch: 0, loss: initial_loss }],
        wall_time_secs: 0.0,
    };
    if initial_loss == 0.0 || (cfg.stop_tol > 0.0 && initial_loss <= cfg.stop_tol) {
        metadata.stop_reason = StopReason::AlreadyOptimal;
        metadata.wall_time_secs = start.elapsed().as_secs_f64();
        return Ok(ProjectionResult { relaxed: init, metadata });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(n_rows * width, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut order: Vec<usize> = (0..m).collect();
    let mut grad_probs = Array2::zeros(theta.raw_dim());
    let mut grad_theta = Array2::zeros(theta.raw_dim());

    let mut best_loss = initial_loss;
    let mut best_theta = theta.clone();
    let mut prev_check = initial_loss;

    for epoch in 1..=cfg.max_epochs {
        metadata.epochs_run = epoch;
        // Shuffle the query order for this epoch's batches.
        for i in (1..m).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch) {
            softmax_into(&domain, &theta.view(), &mut probs);
            let answers = relaxed_answers_subset(workload, &probs.view(), chunk);
            let mut residual = Vec::with_capacity(chunk.len());
            for (&qi, a) in chunk.iter().zip(&answers) {
                if !a.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch });
                }
                residual.push(2.0 * (a - target.values()[qi]));
            }
            grad_probs.fill(0.0);
            accumulate_relaxed_gradient_subset(
                workload,
                &probs.view(),
                chunk,
                &residual,
                &mut grad_probs,
            );
            softmax_backward_into(&domain, &probs.view(), &grad_probs.view(), &mut grad_theta);
            adam.step(
                theta.as_slice_mut().expect("contiguous parameters"),
                grad_theta.as_slice().expect("contiguous gradient"),
            );
        }

        if epoch % CHECK_INTERVAL == 0 || epoch == cfg.max_epochs {
            let loss = full_loss(&theta, &mut probs);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            metadata.checkpoints.push(Checkpoint { epoch, loss });
            if loss < best_loss {
                best_loss = loss;
                best_theta.assign(&theta);
            }
            if full_batch && loss > prev_check + 1e-9 {
                metadata.descent_violation = true;
            }
            if loss == 0.0 {
                metadata.stop_reason = StopReason::ZeroLoss;
                break;
            }
            if cfg.stop_tol > 0.0 {
                if loss <= cfg.stop_tol {
                    metadata.stop_reason = StopReason::Converged;
                    break;
                }
                if prev_check - loss < cfg.stop_tol {
                    metadata.stop_reason = StopReason::Converged;
                    break;
                }
            }
            prev_check = loss;
        }
    }

    metadata.final_loss = best_loss;
    metadata.wall_time_secs = start.elapsed().as_secs_f64();
    let relaxed = RelaxedDataset::from_scores(domain, best_theta)?;
    Ok(ProjectionResult { relaxed, metadata })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Attribute;
    use crate::queries::{all_k_way_marginals, eval_workload, relaxed_eval};
    use rand::SeedableRng;

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

    fn assert_blocks_normalized(domain: &Domain, probs: &Array2<f64>) {
        for row in probs.axis_iter(Axis(0)) {
            for a in 0..domain.attr_count() {
                let off = domain.offset(a);
                let card = domain.cardinality(a);
                let sum: f64 = (off..off + card).map(|j| row[j]).sum();
                assert!((sum - 1.0).abs() < 1e-9, "block sum {sum}");
                assert!((off..off + card).all(|j| row[j] > 0.0));
            }
        }
    }

    #[test]
    fn uniform_init_blocks_are_near_uniform_in_expectation() {
        let dom = domain(&[2, 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let relaxed = init_uniform(dom.clone(), 10_000, &mut rng).unwrap();
        let probs = relaxed.probabilities();
        assert_blocks_normalized(&dom, &probs);
        let mean = probs.mean_axis(Axis(0)).unwrap();
        for a in 0..dom.attr_count() {
            let card = dom.cardinality(a);
            for j in 0..card {
                let dev = (mean[dom.offset(a) + j] - 1.0 / card as f64).abs();
                assert!(dev < 0.02, "deviation {dev}");
            }
        }
    }

    #[test]
    fn uniform_init_is_seed_deterministic() {
        let dom = domain(&[3, 2]);
        let a = init_uniform(dom.clone(), 7, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = init_uniform(dom.clone(), 7, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.scores(), b.scores());
        let c = init_uniform(dom, 1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(c.n_rows(), 1);
    }

    #[test]
    fn dataset_init_gap_dominates() {
        // With gap 10 and no noise, rounding reproduces each seed row with
        // probability > 0.999: each block puts 1/(1+(c-1)e^-10) on the
        // observed category.
        let dom = domain(&[4, 4, 4]);
        let ds = dataset(&dom, &[&[1, 2, 3], &[0, 0, 0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let relaxed = init_from_dataset(&ds, None, 10.0, 0.0, &mut rng).unwrap();
        assert_eq!(relaxed.n_rows(), 2);
        let probs = relaxed.probabilities();
        for (i, row) in ds.rows().iter().enumerate() {
            let mut exact = 1.0;
            for (a, &v) in row.values().iter().enumerate() {
                exact *= probs[[i, dom.offset(a) + v as usize]];
            }
            assert!(exact > 0.999, "row {i} reproduction probability {exact}");
        }
    }

    #[test]
    fn dataset_init_zero_gap_is_uniform() {
        let dom = domain(&[3]);
        let ds = dataset(&dom, &[&[1]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let relaxed = init_from_dataset(&ds, None, 0.0, 0.0, &mut rng).unwrap();
        let probs = relaxed.probabilities();
        for j in 0..3 {
            assert!((probs[[0, j]] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dataset_init_resamples_when_sizes_differ() {
        let dom = domain(&[2]);
        let ds = dataset(&dom, &[&[0], &[1]]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let relaxed = init_from_dataset(&ds, Some(5), 3.0, 0.1, &mut rng).unwrap();
        assert_eq!(relaxed.n_rows(), 5);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let dom = domain(&[3, 2, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let workload = all_k_way_marginals(dom.clone(), 2).unwrap();
        let target_ds = dataset(&dom, &[&[0, 1, 2], &[1, 0, 0], &[2, 1, 1], &[0, 0, 2]]);
        let target = eval_workload(&workload, &target_ds).unwrap();
        let relaxed = init_uniform(dom.clone(), 3, &mut rng).unwrap();
        let (loss, grad) = loss_gradient(&workload, &relaxed, &target).unwrap();
        assert!(loss > 0.0);

        let h = 1e-5;
        for i in 0..relaxed.n_rows() {
            for j in 0..dom.onehot_width() {
                let mut plus = relaxed.scores.clone();
                plus[[i, j]] += h;
                let mut minus = relaxed.scores.clone();
                minus[[i, j]] -= h;
                let lp = {
                    let r = RelaxedDataset::from_scores(dom.clone(), plus).unwrap();
                    let a = relaxed_eval(&workload, r.probabilities().view()).unwrap();
                    a.values()
                        .iter()
                        .zip(target.values())
                        .map(|(a, t)| (a - t) * (a - t))
                        .sum::<f64>()
                };
                let lm = {
                    let r = RelaxedDataset::from_scores(dom.clone(), minus).unwrap();
                    let a = relaxed_eval(&workload, r.probabilities().view()).unwrap();
                    a.values()
                        .iter()
                        .zip(target.values())
                        .map(|(a, t)| (a - t) * (a - t))
                        .sum::<f64>()
                };
                let fd = (lp - lm) / (2.0 * h);
                let an = grad[[i, j]];
                let scale = an.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (an - fd).abs() / scale < 1e-4,
                    "({i},{j}): analytic {an} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn project_returns_init_when_already_optimal() {
        let dom = domain(&[2, 2]);
        let workload = all_k_way_marginals(dom.clone(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let init = init_uniform(dom, 6, &mut rng).unwrap();
        let target = relaxed_eval(&workload, init.probabilities().view()).unwrap();
        let init_scores = init.scores.clone();
        let result = project(&workload, &target, init, &OptimizerConfig::default()).unwrap();
        assert_eq!(result.metadata.epochs_run, 0);
        assert_eq!(result.metadata.stop_reason, StopReason::AlreadyOptimal);
        assert_eq!(result.relaxed.scores, init_scores);
    }

    #[test]
    fn project_tiny_instance_converges() {
        let dom = domain(&[2, 2]);
        let workload = all_k_way_marginals(dom.clone(), 2).unwrap();
        let ds = dataset(&dom, &[&[0, 0], &[0, 1], &[1, 0], &[1, 1]]);
        let target = eval_workload(&workload, &ds).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let init = init_uniform(dom.clone(), 4, &mut rng).unwrap();
        let result = project(&workload, &target, init, &OptimizerConfig::default()).unwrap();
        assert!(
            result.metadata.final_loss < 1e-4,
            "final loss {}",
            result.metadata.final_loss
        );
        assert!(result.metadata.final_loss <= result.metadata.initial_loss);
        assert_blocks_normalized(&dom, &result.relaxed.probabilities());
    }

    #[test]
    fn project_checkpoint_losses_descend_in_full_batch_mode() {
        let dom = domain(&[3, 3, 2]);
        let workload = all_k_way_marginals(dom.clone(), 2).unwrap();
        let ds = dataset(&dom, &[&[0, 1, 0], &[2, 2, 1], &[1, 0, 1], &[0, 0, 0], &[2, 1, 1]]);
        let target = eval_workload(&workload, &ds).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let init = init_uniform(dom, 5, &mut rng).unwrap();
        let cfg = OptimizerConfig { max_epochs: 400, ..OptimizerConfig::default() };
        let result = project(&workload, &target, init, &cfg).unwrap();
        assert!(!result.metadata.descent_violation);
        for pair in result.metadata.checkpoints.windows(2) {
            assert!(pair[1].loss <= pair[0].loss + 1e-9);
        }
    }

    #[test]
    fn project_is_seed_deterministic_and_seed_sensitive() {
        let dom = domain(&[2, 3]);
        let workload = all_k_way_marginals(dom.clone(), 1).unwrap();
        let ds = dataset(&dom, &[&[0, 2], &[1, 1], &[1, 0]]);
        let target = eval_workload(&workload, &ds).unwrap();
        let cfg = OptimizerConfig { max_epochs: 120, ..OptimizerConfig::default() };

        let run = |init_seed: u64| {
            let init = init_uniform(dom.clone(), 3, &mut ChaCha8Rng::seed_from_u64(init_seed))
                .unwrap();
            project(&workload, &target, init, &cfg).unwrap()
        };
        let a = run(1);
        let b = run(1);
        assert_eq!(a.relaxed.scores, b.relaxed.scores);
        let c = run(2);
        assert_ne!(a.relaxed.scores, c.relaxed.scores);
    }

    #[test]
    fn project_aborts_on_non_finite_loss_with_epoch() {
        let dom = domain(&[2, 2]);
        let workload = all_k_way_marginals(dom.clone(), 1).unwrap();
        let ds = dataset(&dom, &[&[0, 1], &[1, 0]]);
        let target = eval_workload(&workload, &ds).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let init = init_uniform(dom, 2, &mut rng).unwrap();
        // A learning rate at the float ceiling overflows the scores within
        // two steps; the run must abort rather than round garbage.
        let cfg = OptimizerConfig {
            learning_rate: 1e308,
            max_epochs: 10,
            ..OptimizerConfig::default()
        };
        match project(&workload, &target, init, &cfg) {
            Err(crate::error::Error::NonFiniteLoss { epoch }) => assert!(epoch >= 1),
            other => panic!("expected a non-finite loss abort, got {other:?}"),
        }
    }

    #[test]
    fn project_with_batches_still_reduces_loss() {
        let dom = domain(&[3, 2, 2]);
        let workload = all_k_way_marginals(dom.clone(), 2).unwrap();
        let ds = dataset(&dom, &[&[0, 0, 1], &[1, 1, 0], &[2, 0, 0], &[1, 0, 1]]);
        let target = eval_workload(&workload, &ds).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let init = init_uniform(dom, 4, &mut rng).unwrap();
        let cfg = OptimizerConfig {
            batch_size: 3,
            max_epochs: 300,
            ..OptimizerConfig::default()
        };
        let result = project(&workload, &target, init, &cfg).unwrap();
        assert!(result.metadata.final_loss < 0.1 * result.metadata.initial_loss);
    }
}
