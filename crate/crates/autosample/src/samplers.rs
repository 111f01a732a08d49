//! Candidate negative samplers.
//!
//! Every sampler draws `k` i.i.d. items the user has never interacted with:
//!
//! * `rns`   — uniform over the candidates
//! * `pns`   — proportional to `popularity^beta`
//! * `dns`   — hardest (highest-scored) of `c` uniform candidates
//! * `aobpr` — rank-based, `p(rank) ∝ exp(-rank / lambda)` over the full
//!   score-sorted candidate list
//!
//! The hard samplers read the current model through a [`Scorer`], so their
//! distributions move as training progresses.

use rand::Rng;

use crate::alias::AliasTable;
use crate::data::InteractionDataset;
use crate::error::{Error, Result};
use crate::model::{ModelParams, Scorer};

/// Parsed description of one candidate sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerSpec {
    Rns,
    Pns {
        beta: f64,
    },
    Dns {
        candidates: usize,
        /// Optional temperature for the softened variant: instead of the hard
        /// argmax, draw the local rank with `p(rank) ∝ exp(-rank / lambda)`.
        lambda: Option<f64>,
    },
    Aobpr {
        /// Rank temperature; defaults to `num_items / 100` when omitted.
        lambda: Option<f64>,
    },
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerSpec::Rns => Ok(()),
            SamplerSpec::Pns { beta } => {
                if beta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config("pns beta must be finite"))
                }
            }
            SamplerSpec::Dns { candidates, lambda } => {
                if *candidates < 1 {
                    return Err(Error::config("dns candidate count must be >= 1"));
                }
                if let Some(l) = lambda {
                    if !(*l > 0.0) {
                        return Err(Error::config("dns lambda must be > 0"));
                    }
                }
                Ok(())
            }
            SamplerSpec::Aobpr { lambda } => {
                if let Some(l) = lambda {
                    if !(*l > 0.0) {
                        return Err(Error::config("aobpr lambda must be > 0"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Parse a comma-separated list of sampler specs.
    pub fn parse_list(text: &str) -> Result<Vec<SamplerSpec>> {
        let specs: Vec<SamplerSpec> = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse())
            .collect::<Result<_>>()?;
        if specs.is_empty() {
            return Err(Error::config("empty sampler list"));
        }
        Ok(specs)
    }
}

impl std::fmt::Display for SamplerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SamplerSpec::Rns => write!(f, "rns"),
            SamplerSpec::Pns { beta } => write!(f, "pns:beta={beta}"),
            SamplerSpec::Dns { candidates, lambda } => {
                write!(f, "dns:c={candidates}")?;
                if let Some(l) = lambda {
                    write!(f, ";lambda={l}")?;
                }
                Ok(())
            }
            SamplerSpec::Aobpr { lambda } => match lambda {
                Some(l) => write!(f, "aobpr:lambda={l}"),
                None => write!(f, "aobpr"),
            },
        }
    }
}

impl std::str::FromStr for SamplerSpec {
    type Err = Error;

    /// Accepts `rns`, `pns:beta=0.75`, `dns:c=10`, `dns:c=10;lambda=2`,
    /// `aobpr`, `aobpr:lambda=64`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let parse_args = |args: &str| -> Result<Vec<(String, f64)>> {
            args.split(';')
                .map(|kv| {
                    let (key, val) = kv.split_once('=').ok_or_else(|| {
                        Error::config(format!("sampler argument {kv:?} is not key=value"))
                    })?;
                    let val: f64 = val.parse().map_err(|_| {
                        Error::config(format!("sampler argument {key}={val:?} is not a number"))
                    })?;
                    Ok((key.to_string(), val))
                })
                .collect()
        };
        let spec = match kind {
            "rns" => {
                if args.is_some() {
                    return Err(Error::config("rns takes no arguments"));
                }
                SamplerSpec::Rns
            }
            "pns" => {
                let mut beta = 0.75;
                for (key, val) in args.map(parse_args).transpose()?.unwrap_or_default() {
                    match key.as_str() {
                        "beta" => beta = val,
                        other => {
                            return Err(Error::config(format!("pns has no argument {other:?}")))
                        }
                    }
                }
                SamplerSpec::Pns { beta }
            }
            "dns" => {
                let mut candidates = 10usize;
                let mut lambda = None;
                for (key, val) in args.map(parse_args).transpose()?.unwrap_or_default() {
                    match key.as_str() {
                        "c" => candidates = val as usize,
                        "lambda" => lambda = Some(val),
                        other => {
                            return Err(Error::config(format!("dns has no argument {other:?}")))
                        }
                    }
                }
                SamplerSpec::Dns { candidates, lambda }
            }
            "aobpr" => {
                let mut lambda = None;
                for (key, val) in args.map(parse_args).transpose()?.unwrap_or_default() {
                    match key.as_str() {
                        "lambda" => lambda = Some(val),
                        other => {
                            return Err(Error::config(format!("aobpr has no argument {other:?}")))
                        }
                    }
                }
                SamplerSpec::Aobpr { lambda }
            }
            other => {
                return Err(Error::config(format!(
                    "unknown sampler kind {other:?}; expected rns, pns, dns or aobpr"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Negative triples aligned with a positive batch.
#[derive(Debug, Clone)]
pub struct NegativeBatch {
    pub sampler_id: usize,
    /// (user, positive item, negative item).
    pub triples: Vec<(u32, u32, u32)>,
}

/// A sampler bound to a training dataset. PNS precomputes its alias table
/// here; the hard samplers only keep their hyperparameters.
pub struct Sampler {
    spec: SamplerSpec,
    name: String,
    pns: Option<PnsTables>,
    aobpr_lambda: f64,
}

struct PnsTables {
    alias: AliasTable,
    /// Per-item `pop^beta` weights behind the alias table.
    weights: Vec<f64>,
    /// How many items have non-zero popularity; used to detect users whose
    /// interactions cover every weighted item.
    positive_pop: usize,
}

/// Build the uniform-interface sampler handle for `spec` over `train`.
pub fn make_sampler(spec: &SamplerSpec, train: &InteractionDataset) -> Result<Sampler> {
    spec.validate()?;
    let pns = match spec {
        SamplerSpec::Pns { beta } => {
            let weights: Vec<f64> = train
                .item_popularity()
                .iter()
                .map(|&p| if p == 0 { 0.0 } else { (p as f64).powf(*beta) })
                .collect();
            let positive_pop = weights.iter().filter(|&&w| w > 0.0).count();
            Some(PnsTables {
                alias: AliasTable::new(&weights)?,
                weights,
                positive_pop,
            })
        }
        _ => None,
    };
    let aobpr_lambda = match spec {
        SamplerSpec::Aobpr { lambda } => {
            lambda.unwrap_or_else(|| (train.num_items() as f64 / 100.0).max(1e-6))
        }
        _ => 0.0,
    };
    Ok(Sampler {
        spec: spec.clone(),
        name: spec.to_string(),
        pns,
        aobpr_lambda,
    })
}

impl Sampler {
    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Draw `k` negatives for `user`. The scorer must reflect the model state
    /// the hard samplers should see.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        ds: &InteractionDataset,
        scorer: &Scorer<'_>,
        user: u32,
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<u32>> {
        match &self.spec {
            SamplerSpec::Rns => rns_draw(ds, user, k, rng),
            SamplerSpec::Pns { .. } => {
                let tables = self.pns.as_ref().expect("pns tables built in make_sampler");
                pns_draw(ds, tables, user, k, rng)
            }
            SamplerSpec::Dns { candidates, lambda } => {
                dns_draw(ds, scorer, user, k, *candidates, *lambda, rng)
            }
            SamplerSpec::Aobpr { .. } => aobpr_draw(ds, scorer, user, k, self.aobpr_lambda, rng),
        }
    }

    /// Draw `k` negatives per positive, producing aligned triples.
    pub fn draw_batch<R: Rng + ?Sized>(
        &self,
        sampler_id: usize,
        ds: &InteractionDataset,
        scorer: &Scorer<'_>,
        positives: &[(u32, u32)],
        k: usize,
        rng: &mut R,
    ) -> Result<NegativeBatch> {
        let mut triples = Vec::with_capacity(positives.len() * k);
        for &(u, i) in positives {
            for j in self.draw(ds, scorer, u, k, rng)? {
                triples.push((u, i, j));
            }
        }
        Ok(NegativeBatch {
            sampler_id,
            triples,
        })
    }
}

fn check_pool(ds: &InteractionDataset, user: u32) -> Result<usize> {
    let pool = ds.num_items() - ds.user_items(user).len();
    if pool == 0 {
        return Err(Error::domain(format!(
            "user {user} interacted with every item; no negative candidates"
        )));
    }
    Ok(pool)
}

/// All items the user has not interacted with, ascending.
fn candidate_pool(ds: &InteractionDataset, user: u32) -> Vec<u32> {
    let interacted = ds.user_items(user);
    let mut pool = Vec::with_capacity(ds.num_items() - interacted.len());
    let mut it = interacted.iter().peekable();
    for item in 0..ds.num_items() as u32 {
        if it.peek() == Some(&&item) {
            it.next();
        } else {
            pool.push(item);
        }
    }
    pool
}

/// Uniform sampling over the candidates.
pub fn sample_rns<R: Rng + ?Sized>(
    ds: &InteractionDataset,
    user: u32,
    k: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    rns_draw(ds, user, k, rng)
}

fn rns_draw<R: Rng + ?Sized>(
    ds: &InteractionDataset,
    user: u32,
    k: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    check_pool(ds, user)?;
    let n = ds.num_items() as u32;
    let cap = 100 * ds.num_items().max(1);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let mut attempts = 0;
        let j = loop {
            let j = rng.gen_range(0..n);
            if !ds.has(user, j) {
                break j;
            }
            attempts += 1;
            if attempts >= cap {
                // Degenerate user; fall back to an explicit pool draw.
                let pool = candidate_pool(ds, user);
                break pool[rng.gen_range(0..pool.len())];
            }
        };
        out.push(j);
    }
    Ok(out)
}

/// Popularity-weighted sampling, `p ∝ pop^beta` restricted to the candidates.
pub fn sample_pns<R: Rng + ?Sized>(
    ds: &InteractionDataset,
    user: u32,
    k: usize,
    beta: f64,
    rng: &mut R,
) -> Result<Vec<u32>> {
    let sampler = make_sampler(&SamplerSpec::Pns { beta }, ds)?;
    let tables = sampler.pns.as_ref().expect("pns tables");
    pns_draw(ds, tables, user, k, rng)
}

fn pns_draw<R: Rng + ?Sized>(
    ds: &InteractionDataset,
    tables: &PnsTables,
    user: u32,
    k: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    check_pool(ds, user)?;
    // If every item with weight lives in the user's history, the restricted
    // distribution is undefined; fall back to uniform sampling.
    let interacted_with_pop = ds
        .user_items(user)
        .iter()
        .filter(|&&i| ds.item_popularity()[i as usize] > 0)
        .count();
    if interacted_with_pop == tables.positive_pop {
        log::warn!(
            "pns: user {user} covers all positively-weighted items; falling back to uniform"
        );
        return rns_draw(ds, user, k, rng);
    }

    // Rejection against the global alias table: resample on positives.
    let cap = 100 * ds.num_items().max(1);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let mut attempts = 0;
        let j = loop {
            let j = tables.alias.sample(rng) as u32;
            if !ds.has(user, j) {
                break j;
            }
            attempts += 1;
            if attempts >= cap {
                break exact_weighted_candidate(ds, tables, user, rng);
            }
        };
        out.push(j);
    }
    Ok(out)
}

/// O(N) exact draw from the restricted renormalized distribution; only used
/// when rejection sampling hits its retry cap.
fn exact_weighted_candidate<R: Rng + ?Sized>(
    ds: &InteractionDataset,
    tables: &PnsTables,
    user: u32,
    rng: &mut R,
) -> u32 {
    let pool = candidate_pool(ds, user);
    let weights: Vec<f64> = pool
        .iter()
        .map(|&i| tables.weights[i as usize])
        .collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    let mut last_weighted = None;
    for (idx, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        last_weighted = Some(pool[idx]);
        target -= w;
        if target <= 0.0 {
            return pool[idx];
        }
    }
    last_weighted.expect("caller checked a weighted candidate exists")
}

/// Hardest-of-`c`: draw `c` distinct uniform candidates, return the one the
/// model scores highest (ties to the lowest item id).
pub fn sample_dns<R: Rng + ?Sized>(
    ds: &InteractionDataset,
    params: &ModelParams,
    graph: &InteractionDataset,
    user: u32,
    k: usize,
    candidates: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    let scorer = params.scorer(graph);
    dns_draw(ds, &scorer, user, k, candidates, None, rng)
}

fn dns_draw<R: Rng + ?Sized>(
    ds: &InteractionDataset,
    scorer: &Scorer<'_>,
    user: u32,
    k: usize,
    candidates: usize,
    lambda: Option<f64>,
    rng: &mut R,
) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let (cands, chosen) = dns_draw_traced(ds, scorer, user, candidates, lambda, rng)?;
        debug_assert!(!cands.is_empty());
        out.push(chosen);
    }
    Ok(out)
}

/// One hardest-of-`c` draw, returning the candidate set alongside the chosen
/// item so callers can audit the argmax.
pub fn dns_draw_traced<R: Rng + ?Sized>(
    ds: &InteractionDataset,
    scorer: &Scorer<'_>,
    user: u32,
    candidates: usize,
    lambda: Option<f64>,
    rng: &mut R,
) -> Result<(Vec<u32>, u32)> {
    let pool_size = check_pool(ds, user)?;
    let take = candidates.min(pool_size);

    // Distinct candidates; when `c` covers the pool this is the whole pool.
    let cands: Vec<u32> = if take == pool_size {
        candidate_pool(ds, user)
    } else {
        let n = ds.num_items() as u32;
        let mut seen = std::collections::HashSet::with_capacity(take * 2);
        let mut cands = Vec::with_capacity(take);
        while cands.len() < take {
            let j = rng.gen_range(0..n);
            if !ds.has(user, j) && seen.insert(j) {
                cands.push(j);
            }
        }
        cands
    };

    let chosen = match lambda {
        None => {
            let mut best = cands[0];
            let mut best_score = scorer.score(user as usize, best as usize);
            for &j in &cands[1..] {
                let s = scorer.score(user as usize, j as usize);
                if s > best_score || (s == best_score && j < best) {
                    best = j;
                    best_score = s;
                }
            }
            best
        }
        Some(lambda) => {
            // Softened variant: sample the local rank.
            let mut ranked = cands.clone();
            sort_by_score_desc(&mut ranked, scorer, user);
            let rank = draw_exp_rank(ranked.len(), lambda, rng);
            ranked[rank - 1]
        }
    };
    Ok((cands, chosen))
}

/// Rank-based sampling: score-sort the whole candidate pool and draw the rank
/// from `p(rank) ∝ exp(-rank / lambda)`, rank 1 being the hardest item.
pub fn sample_aobpr<R: Rng + ?Sized>(
    ds: &InteractionDataset,
    params: &ModelParams,
    graph: &InteractionDataset,
    user: u32,
    k: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<Vec<u32>> {
    let scorer = params.scorer(graph);
    aobpr_draw(ds, &scorer, user, k, lambda, rng)
}

fn aobpr_draw<R: Rng + ?Sized>(
    ds: &InteractionDataset,
    scorer: &Scorer<'_>,
    user: u32,
    k: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<Vec<u32>> {
    if !(lambda > 0.0) {
        return Err(Error::domain("aobpr lambda must be > 0"));
    }
    check_pool(ds, user)?;
    // Exact ranking, refreshed per draw call; scores move during training.
    let mut pool = candidate_pool(ds, user);
    sort_by_score_desc(&mut pool, scorer, user);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let rank = draw_exp_rank(pool.len(), lambda, rng);
        out.push(pool[rank - 1]);
    }
    Ok(out)
}

fn sort_by_score_desc(items: &mut [u32], scorer: &Scorer<'_>, user: u32) {
    let mut keyed: Vec<(f64, u32)> = items
        .iter()
        .map(|&j| (scorer.score(user as usize, j as usize), j))
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    for (dst, (_, j)) in items.iter_mut().zip(keyed) {
        *dst = j;
    }
}

/// Draw a 1-based rank from the truncated distribution `p(r) ∝ exp(-r/lambda)`
/// on `1..=n` by closed-form CDF inversion.
fn draw_exp_rank<R: Rng + ?Sized>(n: usize, lambda: f64, rng: &mut R) -> usize {
    debug_assert!(n >= 1 && lambda > 0.0);
    let u: f64 = rng.gen();
    // 1 - q^n with q = exp(-1/lambda), computed without cancellation.
    let one_minus_qn = -(-(n as f64) / lambda).exp_m1();
    let r = (-lambda * (-u * one_minus_qn).ln_1p()).ceil() as usize;
    r.clamp(1, n)
}
