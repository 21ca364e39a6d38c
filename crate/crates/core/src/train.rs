//! Pairwise BPR training with RMSProp.
//!
//! Each epoch draws `ceil(#train edges / batch_size)` batches of
//! `(user, positive, negative)` triples, backpropagates the BPR loss plus the
//! l2 penalty through the whole model and applies one RMSProp step per batch.
//! Validation NDCG@10 is tracked after every epoch and the best parameters are
//! returned.

use std::path::Path;

use log::{info, warn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalSplit, Partition, DEFAULT_K};
use crate::graph::{BipartiteGraph, Dataset, Graphs};
use crate::model::{backward, ParameterSet, SceneRec, Tensor, Variant};
use crate::rng::{stream, STREAM_INIT, STREAM_SAMPLING};
use crate::tsv::write_lines;

pub const LR_GRID: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];
pub const LAMBDA_GRID: [f64; 4] = [0.0, 1e-6, 1e-4, 1e-2];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub lr: f64,
    pub lambda: f64,
    pub rms_decay: f64,
    pub rms_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 64,
            lr: 1e-3,
            lambda: 0.0,
            rms_decay: 0.9,
            rms_eps: 1e-8,
            batch_size: 256,
            epochs: 30,
            patience: 5,
            seed: 0,
            variant: Variant::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.dim == 0 {
            return fail("d must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(self.rms_decay > 0.0 && self.rms_decay < 1.0) {
            return fail(format!("rms_decay must be in (0, 1), got {}", self.rms_decay));
        }
        if !(self.rms_eps > 0.0) {
            return fail(format!("rms_eps must be positive, got {}", self.rms_eps));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        Ok(())
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sum of `-ln sigmoid(pos - neg)` over pairs, without regularization.
pub fn bpr_data_loss(pos_scores: &[f64], neg_scores: &[f64]) -> f64 {
    assert_eq!(pos_scores.len(), neg_scores.len());
    pos_scores
        .iter()
        .zip(neg_scores)
        .map(|(p, n)| softplus(-(p - n)))
        .sum()
}

/// BPR loss plus `lambda` times the squared norm of every parameter.
pub fn bpr_loss(pos_scores: &[f64], neg_scores: &[f64], params: &ParameterSet, lambda: f64) -> f64 {
    bpr_data_loss(pos_scores, neg_scores) + lambda * params.sum_squares()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleBatch {
    pub triples: Vec<Triple>,
}

impl TripleBatch {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Users twice, positives then negatives, in one forward-pass layout.
    fn layout(&self) -> (Vec<usize>, Vec<usize>) {
        let mut users: Vec<usize> = self.triples.iter().map(|t| t.user).collect();
        users.extend(self.triples.iter().map(|t| t.user));
        let mut items: Vec<usize> = self.triples.iter().map(|t| t.pos).collect();
        items.extend(self.triples.iter().map(|t| t.neg));
        (users, items)
    }
}

/// Full loss of a batch, as used by the finite-difference check.
pub fn batch_loss(model: &SceneRec<'_>, batch: &TripleBatch, lambda: f64) -> f64 {
    let (users, items) = batch.layout();
    let (scores, _) = model.forward_batch(&users, &items);
    let n = batch.len();
    bpr_loss(&scores[..n], &scores[n..], model.params, lambda)
}

/// Loss gradients of one batch.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    /// BPR term only.
    pub data_loss: f64,
    /// BPR term plus regularization.
    pub loss: f64,
    pub grads: ParameterSet,
}

/// Exact gradient of [`batch_loss`] with respect to every parameter.
pub fn gradients(model: &SceneRec<'_>, batch: &TripleBatch, lambda: f64) -> BatchGradients {
    let (users, items) = batch.layout();
    let (scores, trace) = model.forward_batch(&users, &items);
    let n = batch.len();
    let mut dscores = vec![0.0; 2 * n];
    let mut data_loss = 0.0;
    for k in 0..n {
        let z = scores[k] - scores[n + k];
        data_loss += softplus(-z);
        // d softplus(-z) / dz = sigmoid(z) - 1 = -sigmoid(-z)
        let g = -sigmoid(-z);
        dscores[k] = g;
        dscores[n + k] = -g;
    }
    let params = model.params;
    let mut grads = ParameterSet::zeros(params.dim, params.counts());
    backward(model, &trace, &dscores, &mut grads);
    if lambda != 0.0 {
        for (g, p) in grads.tensors_mut().into_iter().zip(params.tensors()) {
            for (gv, pv) in g.as_mut_slice().iter_mut().zip(p.as_slice()) {
                *gv += 2.0 * lambda * pv;
            }
        }
    }
    BatchGradients {
        data_loss,
        loss: data_loss + lambda * params.sum_squares(),
        grads,
    }
}

/// Per-parameter squared-gradient accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub acc: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(params: &ParameterSet) -> Self {
        OptimizerState {
            acc: params
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }
}

/// One elementwise RMSProp update of `params` and `state`.
pub fn rmsprop_step(
    params: &mut ParameterSet,
    grads: &ParameterSet,
    state: &mut OptimizerState,
    lr: f64,
    rms_decay: f64,
    rms_eps: f64,
) {
    for ((p, g), acc) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.acc.iter_mut())
    {
        assert_eq!(p.shape(), g.shape());
        assert_eq!(p.shape(), acc.shape());
        for ((pv, &gv), av) in p
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(acc.as_mut_slice())
        {
            *av = rms_decay * *av + (1.0 - rms_decay) * gv * gv;
            *pv -= lr * gv / (av.sqrt() + rms_eps);
        }
    }
}

/// Uniform sampler over training edges with rejection-sampled negatives.
#[derive(Debug, Clone)]
pub struct TripleSampler<'a> {
    full: &'a BipartiteGraph,
    edges: Vec<(usize, usize)>,
}

impl<'a> TripleSampler<'a> {
    /// Users whose positives cover the whole catalog are skipped with a warning.
    pub fn new(train: &BipartiteGraph, full: &'a BipartiteGraph) -> Result<Self> {
        let n_items = full.n_items();
        let mut edges = Vec::with_capacity(train.n_edges());
        for u in 0..train.n_users() {
            let items = train.user_items(u);
            if items.is_empty() {
                continue;
            }
            if full.user_items(u).len() >= n_items {
                warn!("user {} interacted with every item; no negatives, skipped", u);
                continue;
            }
            edges.extend(items.iter().map(|&i| (u, i)));
        }
        if edges.is_empty() {
            return Err(Error::Validation("no training edges to sample from".into()));
        }
        Ok(TripleSampler { full, edges })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> TripleBatch {
        let n_items = self.full.n_items();
        let triples = (0..n)
            .map(|_| {
                let (user, pos) = self.edges[rng.gen_range(0..self.edges.len())];
                let neg = loop {
                    let j = rng.gen_range(0..n_items);
                    if !self.full.contains(user, j) {
                        break j;
                    }
                };
                Triple { user, pos, neg }
            })
            .collect();
        TripleBatch { triples }
    }
}

/// Draws `n` triples; a thin wrapper over [`TripleSampler`].
pub fn sample_triples<R: Rng>(
    train: &BipartiteGraph,
    full: &BipartiteGraph,
    n: usize,
    rng: &mut R,
) -> Result<TripleBatch> {
    Ok(TripleSampler::new(train, full)?.sample(n, rng))
}

/// Tracks the best validation score and counts stale epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records an epoch's score; returns true if it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        match self.best {
            Some((_, best)) if score <= best => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((epoch, score));
                self.stale = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.patience > 0 && self.stale >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean BPR term per triple, excluding regularization.
    pub train_loss: f64,
    pub val_ndcg: f64,
    pub val_hr: f64,
}

pub fn history_lines(history: &[EpochRecord]) -> Vec<String> {
    history
        .iter()
        .map(|r| format!("{}\t{}\t{}\t{}", r.epoch, r.train_loss, r.val_ndcg, r.val_hr))
        .collect()
}

/// Writes `epoch\ttrain_loss\tval_ndcg10\tval_hr10` lines.
pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    write_lines(path, history_lines(history))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterSet,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_ndcg: f64,
}

/// Graphs the model trains on: the split's training interactions plus the
/// dataset's scene graph.
pub fn training_graphs(ds: &Dataset, split: &EvalSplit) -> Result<Graphs> {
    Graphs::new(split.train_graph(ds.bipartite.n_items())?, ds.scene.clone())
}

/// Trains from a seeded initialization and returns the best-validation parameters.
///
/// `graphs` must hold the training interactions only; `full` is the complete
/// interaction set, used to keep sampled negatives truly unobserved.
pub fn train(
    graphs: &Graphs,
    full: &BipartiteGraph,
    split: &EvalSplit,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let counts = crate::graph::EntityCounts {
        users: graphs.n_users(),
        items: graphs.n_items(),
        categories: graphs.n_categories(),
        scenes: graphs.n_scenes(),
    };
    let mut init_rng = stream(cfg.seed, STREAM_INIT);
    let mut params = ParameterSet::init(cfg.dim, counts, &mut init_rng);
    let mut state = OptimizerState::new(&params);
    let sampler = TripleSampler::new(&graphs.bipartite, full)?;
    let mut rng = stream(cfg.seed, STREAM_SAMPLING);
    let n_batches = sampler.n_edges().div_ceil(cfg.batch_size);

    let mut best = params.clone();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs {
        let mut total = 0.0;
        for b in 1..=n_batches {
            let batch = sampler.sample(cfg.batch_size, &mut rng);
            let model = SceneRec::new(&params, graphs, cfg.variant);
            let step = gradients(&model, &batch, cfg.lambda);
            if !step.loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    value: step.loss,
                });
            }
            total += step.data_loss;
            rmsprop_step(
                &mut params,
                &step.grads,
                &mut state,
                cfg.lr,
                cfg.rms_decay,
                cfg.rms_eps,
            );
        }
        let model = SceneRec::new(&params, graphs, cfg.variant);
        let report = evaluate(&model, split, DEFAULT_K, Partition::Validation)?;
        let record = EpochRecord {
            epoch,
            train_loss: total / (n_batches * cfg.batch_size) as f64,
            val_ndcg: report.ndcg,
            val_hr: report.hr,
        };
        info!(
            "epoch {}: loss {:.6} val ndcg@10 {:.4} hr@10 {:.4}",
            epoch, record.train_loss, record.val_ndcg, record.val_hr
        );
        history.push(record);
        if stopper.observe(epoch, report.ndcg) {
            best.clone_from(&params);
        }
        if stopper.should_stop() {
            info!("early stop after epoch {}", epoch);
            break;
        }
    }
    let (best_epoch, best_val_ndcg) = stopper.best().unwrap_or((0, f64::NAN));
    Ok(TrainOutcome {
        params: best,
        history,
        best_epoch,
        best_val_ndcg,
    })
}

/// One grid point and its best validation NDCG@10.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub lr: f64,
    pub lambda: f64,
    pub best_val_ndcg: f64,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub points: Vec<GridPoint>,
    /// Index into `points` of the selected configuration.
    pub best: usize,
    pub outcome: TrainOutcome,
}

/// Trains every `lr x lambda` combination and keeps the best by validation
/// NDCG@10; ties go to the earlier grid point.
pub fn grid_search(
    graphs: &Graphs,
    full: &BipartiteGraph,
    split: &EvalSplit,
    base: &TrainConfig,
    lrs: &[f64],
    lambdas: &[f64],
) -> Result<GridResult> {
    let mut points = Vec::new();
    let mut best: Option<(usize, TrainOutcome)> = None;
    for &lr in lrs {
        for &lambda in lambdas {
            let cfg = TrainConfig {
                lr,
                lambda,
                ..base.clone()
            };
            let outcome = train(graphs, full, split, &cfg)?;
            info!("grid lr={} lambda={}: val ndcg@10 {:.4}", lr, lambda, outcome.best_val_ndcg);
            points.push(GridPoint {
                lr,
                lambda,
                best_val_ndcg: outcome.best_val_ndcg,
            });
            let better = match &best {
                None => true,
                Some((_, b)) => outcome.best_val_ndcg > b.best_val_ndcg,
            };
            if better {
                best = Some((points.len() - 1, outcome));
            }
        }
    }
    let (best, outcome) = best.ok_or_else(|| Error::Config("empty hyper-parameter grid".into()))?;
    Ok(GridResult {
        points,
        best,
        outcome,
    })
}

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Compares [`gradients`] with central differences at step `h` for every
/// parameter coordinate.
///
/// The relative error is `|a - n| / max(|a|, |n|, floor)`. Coordinates whose
/// perturbation brings any relu input within `kink` of zero, or flips its
/// sign, are skipped.
pub fn gradient_check(
    params: &ParameterSet,
    graphs: &Graphs,
    variant: Variant,
    batch: &TripleBatch,
    lambda: f64,
    h: f64,
    kink: f64,
    floor: f64,
) -> GradCheck {
    let analytic = gradients(&SceneRec::new(params, graphs, variant), batch, lambda).grads;
    let (users, items) = batch.layout();
    let probe = |p: &ParameterSet| -> (f64, Vec<f64>) {
        let model = SceneRec::new(p, graphs, variant);
        let (scores, trace) = model.forward_batch(&users, &items);
        let n = batch.len();
        (
            bpr_loss(&scores[..n], &scores[n..], p, lambda),
            trace.relu_inputs(),
        )
    };
    let (_, base_inputs) = probe(params);
    let near_kink = |xs: &[f64]| xs.iter().any(|x| x.abs() < kink);
    let mut out = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    if near_kink(&base_inputs) {
        warn!("base point has a relu input within {} of zero", kink);
    }
    let mut work = params.clone();
    for t in 0..analytic.tensors().len() {
        for k in 0..analytic.tensors()[t].len() {
            let orig = work.tensors()[t].as_slice()[k];
            work.tensors_mut()[t].as_mut_slice()[k] = orig + h;
            let (plus, plus_inputs) = probe(&work);
            work.tensors_mut()[t].as_mut_slice()[k] = orig - h;
            let (minus, minus_inputs) = probe(&work);
            work.tensors_mut()[t].as_mut_slice()[k] = orig;

            let crosses = base_inputs
                .iter()
                .zip(&plus_inputs)
                .zip(&minus_inputs)
                .any(|((&b, &p), &m)| {
                    b.abs() < kink
                        || p.abs() < kink
                        || m.abs() < kink
                        || (p > 0.0) != (m > 0.0)
                });
            if crosses {
                out.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.tensors()[t].as_slice()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            out.max_rel_error = out.max_rel_error.max(rel);
            out.checked += 1;
        }
    }
    out
}
