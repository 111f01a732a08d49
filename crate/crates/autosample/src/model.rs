//! Scoring models (matrix factorization and light graph convolution), the
//! pairwise ranking loss, and analytic gradients.

use std::collections::{BTreeMap, BTreeSet};


use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::InteractionDataset;
use crate::error::{Error, Result};

/// Which scoring function the embedding tables feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Plain inner product of user and item embeddings.
    Mf,
    /// Layer-averaged neighborhood aggregation over the interaction graph
    /// before the inner product.
    LightGcn { layers: usize },
}

impl ModelKind {
    pub fn layers(&self) -> usize {
        match self {
            ModelKind::Mf => 0,
            ModelKind::LightGcn { layers } => *layers,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Mf => write!(f, "mf"),
            ModelKind::LightGcn { layers } => write!(f, "lightgcn:{layers}"),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mf" => Ok(ModelKind::Mf),
            "lightgcn" => Ok(ModelKind::LightGcn { layers: 3 }),
            other => {
                if let Some(rest) = other.strip_prefix("lightgcn:") {
                    let layers = rest.parse::<usize>().map_err(|_| {
                        Error::config(format!("invalid lightgcn layer count {rest:?}"))
                    })?;
                    Ok(ModelKind::LightGcn { layers })
                } else {
                    Err(Error::config(format!(
                        "unknown model kind {s:?}; expected mf, lightgcn or lightgcn:<layers>"
                    )))
                }
            }
        }
    }
}

/// Embedding tables plus the scoring-function tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    num_users: usize,
    num_items: usize,
    dim: usize,
    kind: ModelKind,
    l2: f64,
    user_emb: Vec<f64>,
    item_emb: Vec<f64>,
}

impl ModelParams {
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn set_l2(&mut self, l2: f64) {
        self.l2 = l2;
    }

    pub fn user_row(&self, u: usize) -> &[f64] {
        &self.user_emb[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item_row(&self, i: usize) -> &[f64] {
        &self.item_emb[i * self.dim..(i + 1) * self.dim]
    }

    pub fn user_row_mut(&mut self, u: usize) -> &mut [f64] {
        &mut self.user_emb[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.item_emb[i * self.dim..(i + 1) * self.dim]
    }

    pub fn user_table(&self) -> &[f64] {
        &self.user_emb
    }

    pub fn item_table(&self) -> &[f64] {
        &self.item_emb
    }

    pub fn user_table_mut(&mut self) -> &mut [f64] {
        &mut self.user_emb
    }

    pub fn item_table_mut(&mut self) -> &mut [f64] {
        &mut self.item_emb
    }

    pub(crate) fn from_parts(
        num_users: usize,
        num_items: usize,
        dim: usize,
        kind: ModelKind,
        l2: f64,
        user_emb: Vec<f64>,
        item_emb: Vec<f64>,
    ) -> Result<Self> {
        if user_emb.len() != num_users * dim || item_emb.len() != num_items * dim {
            return Err(Error::domain("embedding table shape mismatch"));
        }
        if user_emb.iter().chain(item_emb.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("embedding tables contain non-finite entries"));
        }
        Ok(ModelParams {
            num_users,
            num_items,
            dim,
            kind,
            l2,
            user_emb,
            item_emb,
        })
    }

    pub fn shape_matches(&self, num_users: usize, num_items: usize, dim: usize) -> bool {
        self.num_users == num_users && self.num_items == num_items && self.dim == dim
    }

    /// A scorer over the current tables. For graph models this propagates the
    /// embeddings, so build it once per batch or evaluation, not per score.
    pub fn scorer(&self, graph: &InteractionDataset) -> Scorer<'_> {
        match self.kind {
            ModelKind::Mf => Scorer::Direct { params: self },
            ModelKind::LightGcn { layers } => {
                let adj = NormAdjacency::from_dataset(graph);
                Scorer::Propagated {
                    emb: propagate_with(self, &adj, layers),
                }
            }
        }
    }

    /// Like [`scorer`](Self::scorer) but reusing a prebuilt adjacency.
    pub fn scorer_with(&self, adj: &NormAdjacency) -> Scorer<'_> {
        match self.kind {
            ModelKind::Mf => Scorer::Direct { params: self },
            ModelKind::LightGcn { layers } => Scorer::Propagated {
                emb: propagate_with(self, adj, layers),
            },
        }
    }
}

/// Gaussian-initialized embedding tables (mean 0, standard deviation 0.1).
pub fn init_params(
    num_users: usize,
    num_items: usize,
    dim: usize,
    kind: ModelKind,
    seed: u64,
) -> Result<ModelParams> {
    if num_users == 0 || num_items == 0 || dim == 0 {
        return Err(Error::domain("init_params needs users, items and dim >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.1).expect("valid normal");
    let user_emb: Vec<f64> = (0..num_users * dim).map(|_| normal.sample(&mut rng)).collect();
    let item_emb: Vec<f64> = (0..num_items * dim).map(|_| normal.sample(&mut rng)).collect();
    ModelParams::from_parts(num_users, num_items, dim, kind, 0.0, user_emb, item_emb)
}

/// Symmetric-normalized bipartite adjacency over the (users + items) node
/// set: the weight of edge (u, i) is `1 / sqrt(deg(u) * deg(i))`. Degree-0
/// nodes simply have no edges.
#[derive(Debug, Clone)]
pub struct NormAdjacency {
    num_users: usize,
    num_items: usize,
    /// Per user: (item, weight) neighbors.
    user_adj: Vec<Vec<(u32, f64)>>,
    /// Per item: (user, weight) neighbors.
    item_adj: Vec<Vec<(u32, f64)>>,
}

impl NormAdjacency {
    pub fn from_dataset(ds: &InteractionDataset) -> Self {
        let num_users = ds.num_users();
        let num_items = ds.num_items();
        let mut user_adj = vec![Vec::new(); num_users];
        let mut item_adj = vec![Vec::new(); num_items];
        for &(u, i) in ds.positives() {
            let du = ds.user_items(u).len() as f64;
            let di = ds.item_popularity()[i as usize] as f64;
            let w = 1.0 / (du * di).sqrt();
            user_adj[u as usize].push((i, w));
            item_adj[i as usize].push((u, w));
        }
        NormAdjacency {
            num_users,
            num_items,
            user_adj,
            item_adj,
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// One propagation step over dense tables: users gather from item
    /// neighbors and items gather from user neighbors.
    fn step_dense(&self, user_in: &[f64], item_in: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut user_out = vec![0.0; user_in.len()];
        let mut item_out = vec![0.0; item_in.len()];
        for (u, nbrs) in self.user_adj.iter().enumerate() {
            let row = &mut user_out[u * dim..(u + 1) * dim];
            for &(i, w) in nbrs {
                let src = &item_in[i as usize * dim..(i as usize + 1) * dim];
                for (r, s) in row.iter_mut().zip(src) {
                    *r += w * s;
                }
            }
        }
        for (i, nbrs) in self.item_adj.iter().enumerate() {
            let row = &mut item_out[i * dim..(i + 1) * dim];
            for &(u, w) in nbrs {
                let src = &user_in[u as usize * dim..(u as usize + 1) * dim];
                for (r, s) in row.iter_mut().zip(src) {
                    *r += w * s;
                }
            }
        }
        (user_out, item_out)
    }

    /// One propagation step over sparse row maps, used for backpropagation.
    fn step_sparse(
        &self,
        user_in: &BTreeMap<u32, Vec<f64>>,
        item_in: &BTreeMap<u32, Vec<f64>>,
        dim: usize,
    ) -> (BTreeMap<u32, Vec<f64>>, BTreeMap<u32, Vec<f64>>) {
        let mut user_out: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let mut item_out: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for (&i, vec) in item_in {
            for &(u, w) in &self.item_adj[i as usize] {
                let row = user_out.entry(u).or_insert_with(|| vec![0.0; dim]);
                for (r, s) in row.iter_mut().zip(vec) {
                    *r += w * s;
                }
            }
        }
        for (&u, vec) in user_in {
            for &(i, w) in &self.user_adj[u as usize] {
                let row = item_out.entry(i).or_insert_with(|| vec![0.0; dim]);
                for (r, s) in row.iter_mut().zip(vec) {
                    *r += w * s;
                }
            }
        }
        (user_out, item_out)
    }
}

/// Layer-averaged propagated embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedEmbeddings {
    pub dim: usize,
    pub user_out: Vec<f64>,
    pub item_out: Vec<f64>,
}

impl PropagatedEmbeddings {
    pub fn user_row(&self, u: usize) -> &[f64] {
        &self.user_out[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item_row(&self, i: usize) -> &[f64] {
        &self.item_out[i * self.dim..(i + 1) * self.dim]
    }
}

/// Mean of the layer embeddings `E^(0), Â E^(0), ..., Â^L E^(0)`.
pub fn propagate_lightgcn(
    params: &ModelParams,
    graph: &InteractionDataset,
    layers: usize,
) -> PropagatedEmbeddings {
    propagate_with(params, &NormAdjacency::from_dataset(graph), layers)
}

pub fn propagate_with(
    params: &ModelParams,
    adj: &NormAdjacency,
    layers: usize,
) -> PropagatedEmbeddings {
    let dim = params.dim();
    if layers == 0 {
        // Identity pass-through, bit-exact.
        return PropagatedEmbeddings {
            dim,
            user_out: params.user_table().to_vec(),
            item_out: params.item_table().to_vec(),
        };
    }
    let mut user_acc = params.user_table().to_vec();
    let mut item_acc = params.item_table().to_vec();
    let mut user_cur = params.user_table().to_vec();
    let mut item_cur = params.item_table().to_vec();
    for _ in 0..layers {
        let (u_next, i_next) = adj.step_dense(&user_cur, &item_cur, dim);
        user_cur = u_next;
        item_cur = i_next;
        for (a, c) in user_acc.iter_mut().zip(&user_cur) {
            *a += c;
        }
        for (a, c) in item_acc.iter_mut().zip(&item_cur) {
            *a += c;
        }
    }
    let scale = 1.0 / (layers as f64 + 1.0);
    for a in user_acc.iter_mut() {
        *a *= scale;
    }
    for a in item_acc.iter_mut() {
        *a *= scale;
    }
    PropagatedEmbeddings {
        dim,
        user_out: user_acc,
        item_out: item_acc,
    }
}

/// Relevance scores for one embedding state. Cheap for MF; owns the
/// propagated tables for graph models.
pub enum Scorer<'a> {
    Direct { params: &'a ModelParams },
    Propagated { emb: PropagatedEmbeddings },
    /// Borrowed propagated tables, e.g. an epoch-stale cache.
    PropagatedRef { emb: &'a PropagatedEmbeddings },
}

impl<'a> Scorer<'a> {
    #[inline]
    pub fn score(&self, u: usize, i: usize) -> f64 {
        let (user_row, item_row) = self.rows(u, i);
        dot(user_row, item_row)
    }

    #[inline]
    pub(crate) fn rows(&self, u: usize, i: usize) -> (&[f64], &[f64]) {
        match self {
            Scorer::Direct { params } => (params.user_row(u), params.item_row(i)),
            Scorer::Propagated { emb } => (emb.user_row(u), emb.item_row(i)),
            Scorer::PropagatedRef { emb } => (emb.user_row(u), emb.item_row(i)),
        }
    }
}

/// Bounds-checked relevance score `S(u, i)`.
pub fn score(params: &ModelParams, graph: &InteractionDataset, u: u32, i: u32) -> Result<f64> {
    if u as usize >= params.num_users() || i as usize >= params.num_items() {
        return Err(Error::domain(format!(
            "score ids ({u}, {i}) out of range for {} users x {} items",
            params.num_users(),
            params.num_items()
        )));
    }
    Ok(params.scorer(graph).score(u as usize, i as usize))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln(1 + e^y)` without overflow on either tail.
#[inline]
pub fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pairwise ranking loss `-ln sigma(pos - neg)`.
#[inline]
pub fn bpr_loss(pos_score: f64, neg_score: f64) -> f64 {
    softplus(neg_score - pos_score)
}

/// One (user, positive, negative) comparison with a loss weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTriple {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
    pub weight: f64,
}

impl WeightedTriple {
    pub fn new(user: u32, pos: u32, neg: u32, weight: f64) -> Self {
        WeightedTriple {
            user,
            pos,
            neg,
            weight,
        }
    }
}

/// Sparse per-row gradients for both embedding tables. Absent rows carry
/// exactly zero gradient.
#[derive(Debug, Clone, Default)]
pub struct GradAccumulator {
    pub user: BTreeMap<u32, Vec<f64>>,
    pub item: BTreeMap<u32, Vec<f64>>,
}

impl GradAccumulator {
    fn add_user(&mut self, row: u32, dim: usize, scale: f64, src: &[f64]) {
        let dst = self.user.entry(row).or_insert_with(|| vec![0.0; dim]);
        for (d, s) in dst.iter_mut().zip(src) {
            *d += scale * s;
        }
    }

    fn add_item(&mut self, row: u32, dim: usize, scale: f64, src: &[f64]) {
        let dst = self.item.entry(row).or_insert_with(|| vec![0.0; dim]);
        for (d, s) in dst.iter_mut().zip(src) {
            *d += scale * s;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.user.values().chain(self.item.values()).all(|v| v.iter().all(|&x| x == 0.0))
    }
}

fn touched_rows(triples: &[WeightedTriple]) -> (BTreeSet<u32>, BTreeSet<u32>) {
    let mut users = BTreeSet::new();
    let mut items = BTreeSet::new();
    for t in triples {
        if t.weight == 0.0 {
            continue;
        }
        users.insert(t.user);
        items.insert(t.pos);
        items.insert(t.neg);
    }
    (users, items)
}

/// The scalar objective that [`bpr_grad`] differentiates: the weighted mean
/// of per-triple ranking losses plus `l2/2 * ||row||^2` over every embedding
/// row used by a non-zero-weight triple.
pub fn bpr_batch_loss(
    params: &ModelParams,
    graph: &InteractionDataset,
    triples: &[WeightedTriple],
) -> f64 {
    if triples.is_empty() {
        return 0.0;
    }
    let scorer = params.scorer(graph);
    let n = triples.len() as f64;
    let mut loss = 0.0;
    for t in triples {
        if t.weight == 0.0 {
            continue;
        }
        let x = scorer.score(t.user as usize, t.pos as usize)
            - scorer.score(t.user as usize, t.neg as usize);
        loss += t.weight * softplus(-x);
    }
    loss /= n;

    if params.l2() > 0.0 {
        let (users, items) = touched_rows(triples);
        let mut reg = 0.0;
        for u in users {
            reg += dot(params.user_row(u as usize), params.user_row(u as usize));
        }
        for i in items {
            reg += dot(params.item_row(i as usize), params.item_row(i as usize));
        }
        loss += 0.5 * params.l2() * reg;
    }
    loss
}

/// Analytic gradient of [`bpr_batch_loss`] with respect to the embedding
/// tables, mean-reduced over the batch.
pub fn bpr_grad(
    params: &ModelParams,
    graph: &InteractionDataset,
    triples: &[WeightedTriple],
) -> GradAccumulator {
    let adj = NormAdjacency::from_dataset(graph);
    let scorer = params.scorer_with(&adj);
    bpr_grad_with(params, &adj, &scorer, triples)
}

/// [`bpr_grad`] with a caller-supplied adjacency and scorer, so training
/// loops can reuse both across a batch.
///
/// For the graph model the chain rule runs back through the layer-averaged
/// propagation; the propagation operator is symmetric, so its transpose is
/// itself. Passing a stale scorer yields the documented cached-propagation
/// approximation: partials are taken at the stale propagated values.
pub fn bpr_grad_with(
    params: &ModelParams,
    adj: &NormAdjacency,
    scorer: &Scorer<'_>,
    triples: &[WeightedTriple],
) -> GradAccumulator {
    let mut grad = GradAccumulator::default();
    if triples.is_empty() {
        return grad;
    }
    let dim = params.dim();
    let n = triples.len() as f64;

    // Gradient with respect to the scorer's (possibly propagated) tables.
    for t in triples {
        if t.weight == 0.0 {
            continue;
        }
        let (u, i, j) = (t.user as usize, t.pos as usize, t.neg as usize);
        let x = scorer.score(u, i) - scorer.score(u, j);
        let c = t.weight * (sigmoid(x) - 1.0) / n;
        let (user_row, pos_row) = scorer.rows(u, i);
        let (_, neg_row) = scorer.rows(u, j);
        let diff: Vec<f64> = pos_row.iter().zip(neg_row).map(|(p, q)| p - q).collect();
        grad.add_user(t.user, dim, c, &diff);
        grad.add_item(t.pos, dim, c, user_row);
        grad.add_item(t.neg, dim, -c, user_row);
    }

    // Back-propagate through the propagation: grad_base = mean_k A^k grad_out.
    if let ModelKind::LightGcn { layers } = params.kind() {
        if layers > 0 {
            let mut user_acc = grad.user.clone();
            let mut item_acc = grad.item.clone();
            let mut user_cur = grad.user;
            let mut item_cur = grad.item;
            for _ in 0..layers {
                let (u_next, i_next) = adj.step_sparse(&user_cur, &item_cur, dim);
                user_cur = u_next;
                item_cur = i_next;
                for (row, vec) in &user_cur {
                    let dst = user_acc.entry(*row).or_insert_with(|| vec![0.0; dim]);
                    for (d, s) in dst.iter_mut().zip(vec) {
                        *d += s;
                    }
                }
                for (row, vec) in &item_cur {
                    let dst = item_acc.entry(*row).or_insert_with(|| vec![0.0; dim]);
                    for (d, s) in dst.iter_mut().zip(vec) {
                        *d += s;
                    }
                }
            }
            let scale = 1.0 / (layers as f64 + 1.0);
            for vec in user_acc.values_mut() {
                for v in vec.iter_mut() {
                    *v *= scale;
                }
            }
            for vec in item_acc.values_mut() {
                for v in vec.iter_mut() {
                    *v *= scale;
                }
            }
            grad = GradAccumulator {
                user: user_acc,
                item: item_acc,
            };
        }
    }

    if params.l2() > 0.0 {
        let (users, items) = touched_rows(triples);
        for u in users {
            grad.add_user(u, dim, params.l2(), params.user_row(u as usize));
        }
        for i in items {
            grad.add_item(i, dim, params.l2(), params.item_row(i as usize));
        }
    }
    grad
}
