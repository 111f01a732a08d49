//! Training loops: the from-scratch Adam optimizer, fixed-sampler training,
//! warm-start retraining, and the exhaustive grid-search baseline.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricKind, MetricsReport};
use crate::model::{
    bpr_grad_with, propagate_with, softplus, GradAccumulator, ModelKind, ModelParams,
    NormAdjacency, PropagatedEmbeddings, Scorer, WeightedTriple,
};
use crate::rng::Seeds;
use crate::samplers::{make_sampler, SamplerSpec};

/// Knobs shared by every training entry point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rate for the embedding tables.
    pub lr_w: f64,
    /// Learning rate for the sampler-selection logits.
    pub lr_theta: f64,
    pub l2: f64,
    /// Negatives drawn per positive.
    pub negatives: usize,
    pub dim: usize,
    /// Validate every this many epochs.
    pub eval_every: usize,
    /// Metric that picks the best snapshot.
    pub metric: MetricKind,
    pub eval_k: usize,
    /// Evaluations without improvement before training stops early.
    pub patience: usize,
    /// Dense Adam decays every row's moments on every step; the default lazy
    /// mode only touches rows that received gradient.
    pub dense_adam: bool,
    /// Refresh the propagated embeddings once per epoch instead of per batch
    /// (graph models only; a documented approximation).
    pub stale_propagation: bool,
    pub search: SearchConfig,
}

/// Schedule and mode switches for the sampler-selection stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub tau0: f64,
    pub tau_min: f64,
    pub tau_decay: f64,
    /// Draw one perturbation per epoch instead of per batch.
    pub gumbel_per_epoch: bool,
    /// Weight the loss with the hard one-hot selection instead of the soft
    /// relaxation (straight-through style); the logit gradient is unchanged.
    pub hard_selection: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            tau0: 1.0,
            tau_min: 0.1,
            tau_decay: 0.95,
            gumbel_per_epoch: false,
            hard_selection: false,
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 30,
            batch_size: 1024,
            lr_w: 1e-3,
            lr_theta: 3e-3,
            l2: 0.0,
            negatives: 1,
            dim: 64,
            eval_every: 1,
            metric: MetricKind::Recall,
            eval_k: 20,
            patience: 10,
            dense_adam: false,
            stale_propagation: false,
            search: SearchConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.dim == 0 || self.eval_every == 0 {
            return Err(Error::config(
                "epochs, batch_size, dim and eval_every must all be >= 1",
            ));
        }
        if self.negatives == 0 {
            return Err(Error::config("negatives per positive must be >= 1"));
        }
        if !(self.lr_w > 0.0) || !(self.lr_theta > 0.0) {
            return Err(Error::config("learning rates must be > 0"));
        }
        if self.l2 < 0.0 {
            return Err(Error::config("l2 must be >= 0"));
        }
        if self.eval_k == 0 {
            return Err(Error::config("eval_k must be >= 1"));
        }
        let s = &self.search;
        if !(s.tau_min > 0.0) || !(s.tau0 >= s.tau_min) {
            return Err(Error::config("need tau0 >= tau_min > 0"));
        }
        if !(s.tau_decay > 0.0 && s.tau_decay <= 1.0) {
            return Err(Error::config("tau_decay must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Bias-corrected adaptive-moment state for one table of rows.
///
/// Lazy mode keeps a per-row step counter and only decays moments when the
/// row actually receives gradient; dense mode decays everything every step.
#[derive(Debug, Clone)]
pub struct AdamState {
    rows: usize,
    dim: usize,
    m: Vec<f64>,
    v: Vec<f64>,
    step: Vec<u64>,
    global_step: u64,
    dense: bool,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    pub fn new(rows: usize, dim: usize, dense: bool) -> Self {
        AdamState {
            rows,
            dim,
            m: vec![0.0; rows * dim],
            v: vec![0.0; rows * dim],
            step: vec![0; rows],
            global_step: 0,
            dense,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Apply one update to the rows present in `grads`. `table` is the flat
    /// row-major parameter table this state was sized for.
    pub fn step_rows(&mut self, table: &mut [f64], grads: &BTreeMap<u32, Vec<f64>>, lr: f64) {
        debug_assert_eq!(table.len(), self.rows * self.dim);
        if self.dense {
            self.global_step += 1;
            let t = self.global_step;
            let zero = vec![0.0; self.dim];
            for row in 0..self.rows as u32 {
                let grad = grads.get(&row).map(|g| g.as_slice()).unwrap_or(&zero);
                self.update_row(table, row as usize, grad, lr, t);
            }
        } else {
            for (&row, grad) in grads {
                self.step[row as usize] += 1;
                let t = self.step[row as usize];
                self.update_row(table, row as usize, grad, lr, t);
            }
        }
    }

    fn update_row(&mut self, table: &mut [f64], row: usize, grad: &[f64], lr: f64, t: u64) {
        let base = row * self.dim;
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        for d in 0..self.dim {
            let g = grad[d];
            let m = &mut self.m[base + d];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            let v = &mut self.v[base + d];
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            table[base + d] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Adam over both embedding tables.
pub struct ModelOptimizer {
    user: AdamState,
    item: AdamState,
}

impl ModelOptimizer {
    pub fn new(params: &ModelParams, dense: bool) -> Self {
        ModelOptimizer {
            user: AdamState::new(params.num_users(), params.dim(), dense),
            item: AdamState::new(params.num_items(), params.dim(), dense),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grad: &GradAccumulator, lr: f64) {
        self.user.step_rows(params.user_table_mut(), &grad.user, lr);
        self.item.step_rows(params.item_table_mut(), &grad.item, lr);
    }
}

/// Outcome of one training run. `params` is the snapshot with the best
/// validation metric; `test` is that snapshot's test-split report.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: ModelParams,
    pub best_valid: MetricsReport,
    pub test: MetricsReport,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Best-so-far validation metric after each evaluation.
    pub best_metric_history: Vec<f64>,
    pub elapsed_ms: u64,
}

/// Standard pairwise training with one fixed negative sampler.
pub fn train_fixed(
    split: &DataSplit,
    spec: &SamplerSpec,
    init: &ModelParams,
    cfg: &TrainingConfig,
    seeds: &Seeds,
) -> Result<TrainResult> {
    cfg.validate()?;
    spec.validate()?;
    let start = Instant::now();

    let train = &split.train;
    let mut params = init.clone();
    params.set_l2(cfg.l2);
    let sampler = make_sampler(spec, train)?;
    let adj = NormAdjacency::from_dataset(train);
    let mut opt = ModelOptimizer::new(&params, cfg.dense_adam);
    let stale_mode =
        cfg.stale_propagation && matches!(params.kind(), ModelKind::LightGcn { layers } if layers > 0);

    let mut shuffle_rng = seeds.rng("shuffle");
    let mut sampler_rng = seeds.rng(&format!("sampler.{}", sampler.name()));

    let mut pairs: Vec<(u32, u32)> = train.positives().to_vec();
    let mut best: Option<(f64, usize, ModelParams, MetricsReport)> = None;
    let mut best_metric_history = Vec::new();
    let mut evals_since_best = 0usize;
    let mut epochs_run = 0usize;

    'epochs: for epoch in 0..cfg.epochs {
        epochs_run = epoch + 1;
        pairs.shuffle(&mut shuffle_rng);
        let stale: Option<PropagatedEmbeddings> =
            stale_mode.then(|| propagate_with(&params, &adj, params.kind().layers()));

        for (batch_idx, batch) in pairs.chunks(cfg.batch_size).enumerate() {
            let grad;
            let batch_loss;
            {
                let scorer = match &stale {
                    Some(emb) => Scorer::PropagatedRef { emb },
                    None => params.scorer_with(&adj),
                };
                let neg =
                    sampler.draw_batch(0, train, &scorer, batch, cfg.negatives, &mut sampler_rng)?;
                let triples: Vec<WeightedTriple> = neg
                    .triples
                    .iter()
                    .map(|&(u, i, j)| WeightedTriple::new(u, i, j, 1.0))
                    .collect();
                batch_loss = mean_triple_loss(&scorer, &neg.triples);
                grad = bpr_grad_with(&params, &adj, &scorer, &triples);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    losses: vec![batch_loss],
                });
            }
            opt.step(&mut params, &grad, cfg.lr_w);
        }

        if (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
            let report = evaluate(&params, train, &split.valid, None, cfg.eval_k)?;
            let value = report.get(cfg.metric);
            let improved = best.as_ref().map_or(true, |(b, ..)| value > *b);
            if improved {
                best = Some((value, epoch, params.clone(), report));
                evals_since_best = 0;
            } else {
                evals_since_best += 1;
            }
            best_metric_history.push(best.as_ref().map(|(b, ..)| *b).expect("set above"));
            if evals_since_best >= cfg.patience {
                break 'epochs;
            }
        }
    }

    let (_, best_epoch, best_params, best_valid) = best.expect("at least one evaluation ran");
    let test = evaluate(&best_params, train, &split.test, Some(&split.valid), cfg.eval_k)?;

    Ok(TrainResult {
        params: best_params,
        best_valid,
        test,
        best_epoch,
        epochs_run,
        best_metric_history,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

pub(crate) fn mean_triple_loss(scorer: &Scorer<'_>, triples: &[(u32, u32, u32)]) -> f64 {
    if triples.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for &(u, i, j) in triples {
        let x = scorer.score(u as usize, i as usize) - scorer.score(u as usize, j as usize);
        sum += softplus(-x);
    }
    sum / triples.len() as f64
}

/// Pick the sampler with the largest mixture weight (ties go to the lowest
/// index) and retrain from the warm-start tables.
pub fn retrain(
    split: &DataSplit,
    alpha_star: &[f64],
    specs: &[SamplerSpec],
    w_prime: &ModelParams,
    cfg: &TrainingConfig,
    seeds: &Seeds,
) -> Result<(TrainResult, usize)> {
    if alpha_star.len() != specs.len() || specs.is_empty() {
        return Err(Error::domain(format!(
            "alpha length {} does not match {} sampler specs",
            alpha_star.len(),
            specs.len()
        )));
    }
    if alpha_star.iter().any(|&a| !a.is_finite() || a < 0.0) {
        return Err(Error::domain("mixture weights must be finite and >= 0"));
    }
    let sum: f64 = alpha_star.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!(
            "mixture weights must sum to 1, got {sum}"
        )));
    }
    if !w_prime.shape_matches(split.num_users(), split.num_items(), cfg.dim) {
        return Err(Error::domain(format!(
            "warm-start tables are {}x{} dim {}, expected {}x{} dim {}",
            w_prime.num_users(),
            w_prime.num_items(),
            w_prime.dim(),
            split.num_users(),
            split.num_items(),
            cfg.dim
        )));
    }

    let selected = select_sampler(alpha_star);
    if alpha_star
        .iter()
        .enumerate()
        .any(|(t, &a)| t != selected && a == alpha_star[selected])
    {
        log::warn!(
            "mixture weights tie at {}; keeping the lowest index {selected} ({})",
            alpha_star[selected],
            specs[selected]
        );
    }
    let result = train_fixed(split, &specs[selected], w_prime, cfg, seeds)?;
    Ok((result, selected))
}

/// Index of the largest mixture weight, lowest index on ties.
pub fn select_sampler(alpha: &[f64]) -> usize {
    let mut best = 0;
    for (t, &a) in alpha.iter().enumerate() {
        if a > alpha[best] {
            best = t;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub spec: SamplerSpec,
    pub result: TrainResult,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub cells: Vec<GridCell>,
    pub total_elapsed_ms: u64,
}

/// Train one model per candidate sampler from the same initialization and
/// report per-cell metrics plus summed wall-clock.
///
/// Cells are independent; `jobs` bounds how many run concurrently. Results do
/// not depend on `jobs` because every cell draws from its own seed streams.
pub fn grid_search(
    split: &DataSplit,
    specs: &[SamplerSpec],
    init: &ModelParams,
    cfg: &TrainingConfig,
    seeds: &Seeds,
    jobs: usize,
) -> Result<GridOutcome> {
    if specs.is_empty() {
        return Err(Error::domain("grid search needs at least one sampler"));
    }
    let start = Instant::now();
    let run_cell = |(idx, spec): (usize, &SamplerSpec)| -> Result<GridCell> {
        let cell_seeds = seeds.scoped(&format!("cell.{idx}.{spec}"));
        let result = train_fixed(split, spec, init, cfg, &cell_seeds)?;
        Ok(GridCell {
            spec: spec.clone(),
            result,
        })
    };

    let cells: Vec<GridCell> = if jobs <= 1 {
        specs
            .iter()
            .enumerate()
            .map(run_cell)
            .collect::<Result<_>>()?
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.min(specs.len()))
            .build()
            .map_err(|e| Error::domain(format!("failed to build worker pool: {e}")))?;
        pool.install(|| {
            specs
                .par_iter()
                .enumerate()
                .map(run_cell)
                .collect::<Result<_>>()
        })?
    };

    Ok(GridOutcome {
        cells,
        total_elapsed_ms: start.elapsed().as_millis() as u64,
    })
}
