//! Full-ranking evaluation: Recall@K, NDCG@K, Precision@K and Hit Ratio@K
//! averaged over users with a non-empty truth set.

use serde::{Deserialize, Serialize};

use crate::data::{kahan_sum, InteractionDataset};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Scorer};

/// Which metric drives model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    Recall,
    Ndcg,
    Precision,
    HitRatio,
}

impl MetricKind {
    /// Parse `recall@20`-style strings into the kind and cutoff.
    pub fn parse_with_k(s: &str) -> Result<(MetricKind, usize)> {
        let (name, k) = s
            .split_once('@')
            .ok_or_else(|| Error::config(format!("metric {s:?} is not of the form name@K")))?;
        let k: usize = k
            .parse()
            .map_err(|_| Error::config(format!("invalid metric cutoff {k:?}")))?;
        if k == 0 {
            return Err(Error::config("metric cutoff must be >= 1"));
        }
        let kind = match name {
            "recall" => MetricKind::Recall,
            "ndcg" => MetricKind::Ndcg,
            "precision" => MetricKind::Precision,
            "hr" | "hit_ratio" => MetricKind::HitRatio,
            other => {
                return Err(Error::config(format!(
                    "unknown metric {other:?}; expected recall, ndcg, precision or hr"
                )))
            }
        };
        Ok((kind, k))
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MetricKind::Recall => "recall",
            MetricKind::Ndcg => "ndcg",
            MetricKind::Precision => "precision",
            MetricKind::HitRatio => "hr",
        };
        write!(f, "{name}")
    }
}

/// Averaged metrics over the evaluated users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub precision: f64,
    pub hit_ratio: f64,
    pub users_evaluated: usize,
}

impl MetricsReport {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Recall => self.recall,
            MetricKind::Ndcg => self.ndcg,
            MetricKind::Precision => self.precision,
            MetricKind::HitRatio => self.hit_ratio,
        }
    }
}

/// Top-K items for `user` by score over all items not in `exclude`,
/// ties broken toward the lower item id. Returns fewer than K only when the
/// candidate pool is smaller than K.
pub fn rank_topk(
    params: &ModelParams,
    graph: &InteractionDataset,
    user: u32,
    exclude: &[u32],
    k: usize,
) -> Result<Vec<u32>> {
    let scorer = params.scorer(graph);
    let mut mask = vec![false; params.num_items()];
    for &i in exclude {
        if (i as usize) < mask.len() {
            mask[i as usize] = true;
        }
    }
    rank_topk_masked(&scorer, user, &mask, k)
}

pub(crate) fn rank_topk_masked(
    scorer: &Scorer<'_>,
    user: u32,
    exclude: &[bool],
    k: usize,
) -> Result<Vec<u32>> {
    let mut cands: Vec<(f64, u32)> = Vec::with_capacity(exclude.len());
    for (i, &skip) in exclude.iter().enumerate() {
        if !skip {
            cands.push((scorer.score(user as usize, i), i as u32));
        }
    }
    if cands.is_empty() {
        return Err(Error::domain(format!(
            "user {user}: every item is excluded from ranking"
        )));
    }
    let cmp = |a: &(f64, u32), b: &(f64, u32)| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    };
    let k = k.min(cands.len());
    if k < cands.len() {
        cands.select_nth_unstable_by(k - 1, cmp);
        cands.truncate(k);
    }
    cands.sort_by(cmp);
    Ok(cands.into_iter().map(|(_, i)| i).collect())
}

/// Per-user metrics for one ranked list against a sorted truth set.
///
/// NDCG uses binary relevance with a log2 discount; the ideal DCG is
/// truncated at `min(K, |truth|)`.
pub fn metrics_for_user(topk: &[u32], truth: &[u32], k: usize) -> (f64, f64, f64, f64) {
    debug_assert!(!truth.is_empty(), "caller must skip users without truth");
    let mut hits = 0usize;
    let mut dcg = 0.0;
    for (rank, item) in topk.iter().enumerate() {
        if truth.binary_search(item).is_ok() {
            hits += 1;
            dcg += 1.0 / ((rank as f64 + 2.0).log2());
        }
    }
    let ideal = k.min(truth.len());
    let idcg: f64 = (0..ideal).map(|r| 1.0 / ((r as f64 + 2.0).log2())).sum();
    let recall = hits as f64 / truth.len() as f64;
    let precision = hits as f64 / k as f64;
    let hr = if hits > 0 { 1.0 } else { 0.0 };
    let ndcg = if idcg > 0.0 { dcg / idcg } else { 0.0 };
    (recall, ndcg, precision, hr)
}

/// Evaluate `params` on `split`, ranking every item the user has not seen in
/// `graph` (the training interactions) or `also_exclude` (typically the
/// validation split when scoring the test split).
pub fn evaluate(
    params: &ModelParams,
    graph: &InteractionDataset,
    split: &InteractionDataset,
    also_exclude: Option<&InteractionDataset>,
    k: usize,
) -> Result<MetricsReport> {
    if graph.num_users() != split.num_users() || graph.num_items() != split.num_items() {
        return Err(Error::domain("evaluate: split and graph shapes differ"));
    }
    if k == 0 {
        return Err(Error::domain("evaluate: k must be >= 1"));
    }
    let scorer = params.scorer(graph);
    let num_items = graph.num_items();

    let mut recalls = Vec::new();
    let mut ndcgs = Vec::new();
    let mut precisions = Vec::new();
    let mut hrs = Vec::new();
    let mut mask = vec![false; num_items];

    for user in 0..graph.num_users() as u32 {
        let truth = split.user_items(user);
        if truth.is_empty() {
            continue;
        }
        mask.iter_mut().for_each(|m| *m = false);
        for &i in graph.user_items(user) {
            mask[i as usize] = true;
        }
        if let Some(extra) = also_exclude {
            for &i in extra.user_items(user) {
                mask[i as usize] = true;
            }
        }
        let topk = rank_topk_masked(&scorer, user, &mask, k)?;
        let (r, n, p, h) = metrics_for_user(&topk, truth, k);
        recalls.push(r);
        ndcgs.push(n);
        precisions.push(p);
        hrs.push(h);
    }

    let count = recalls.len();
    if count == 0 {
        return Err(Error::domain("evaluate: no users with a non-empty truth set"));
    }
    let mean = |xs: &[f64]| kahan_sum(xs) / count as f64;
    Ok(MetricsReport {
        k,
        recall: mean(&recalls),
        ndcg: mean(&ndcgs),
        precision: mean(&precisions),
        hit_ratio: mean(&hrs),
        users_evaluated: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixed_scores_params(scores: &[f64]) -> (ModelParams, InteractionDataset) {
        let n = scores.len();
        let ds = InteractionDataset::from_pairs(1, n, vec![(0, 0)]).unwrap();
        let mut p = init_params(1, n, 1, ModelKind::Mf, 0).unwrap();
        p.user_row_mut(0)[0] = 1.0;
        for (i, &s) in scores.iter().enumerate() {
            p.item_row_mut(i)[0] = s;
        }
        (p, ds)
    }

    #[test]
    fn rank_topk_sorts_and_excludes() {
        let (p, ds) = fixed_scores_params(&[5.0, 1.0, 9.0, 2.0]);
        let top = rank_topk(&p, &ds, 0, &[2], 2).unwrap();
        assert_eq!(top, vec![0, 3]);
    }

    #[test]
    fn rank_topk_tie_breaks_by_id() {
        let (p, ds) = fixed_scores_params(&[1.0, 1.0, 1.0, 1.0]);
        let top = rank_topk(&p, &ds, 0, &[], 3).unwrap();
        assert_eq!(top, vec![0, 1, 2]);
    }

    #[test]
    fn rank_topk_short_pool_returns_all() {
        let (p, ds) = fixed_scores_params(&[1.0, 2.0]);
        let top = rank_topk(&p, &ds, 0, &[], 10).unwrap();
        assert_eq!(top, vec![1, 0]);
    }

    #[test]
    fn rank_topk_empty_pool_errors() {
        let (p, ds) = fixed_scores_params(&[1.0, 2.0]);
        assert!(rank_topk(&p, &ds, 0, &[0, 1], 3).is_err());
    }

    #[test]
    fn rank_topk_matches_brute_force_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(5..50);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (p, ds) = fixed_scores_params(&scores);
            let exclude: Vec<u32> = (0..n as u32).filter(|_| rng.gen_bool(0.2)).collect();
            let k = rng.gen_range(1..12);

            let mut full: Vec<u32> = (0..n as u32).filter(|i| !exclude.contains(i)).collect();
            if full.is_empty() {
                continue;
            }
            full.sort_by(|&a, &b| {
                scores[b as usize]
                    .partial_cmp(&scores[a as usize])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            full.truncate(k);

            let got = rank_topk(&p, &ds, 0, &exclude, k).unwrap();
            assert_eq!(got, full);
            for i in &got {
                assert!(!exclude.contains(i));
            }
        }
    }

    #[test]
    fn metrics_perfect_single_hit() {
        let (r, n, p, h) = metrics_for_user(&[4, 1, 2], &[4], 3);
        assert_eq!(r, 1.0);
        assert_eq!(n, 1.0);
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(h, 1.0);
    }

    #[test]
    fn metrics_hand_case() {
        // truth {a, b}, topk [a, c], K = 2: recall .5, precision .5, hr 1,
        // ndcg = 1 / (1 + 1/log2(3)).
        let (r, n, p, h) = metrics_for_user(&[0, 9], &[0, 5], 2);
        assert_eq!(r, 0.5);
        assert_eq!(p, 0.5);
        assert_eq!(h, 1.0);
        let want = 1.0 / (1.0 + 1.0 / 3f64.log2());
        assert!((n - want).abs() < 1e-12);
        assert!((n - 0.6131).abs() < 1e-4);
    }

    #[test]
    fn metrics_no_overlap_all_zero() {
        let (r, n, p, h) = metrics_for_user(&[1, 2, 3], &[7, 8], 3);
        assert_eq!((r, n, p, h), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn metrics_monotone_when_a_hit_replaces_a_miss() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let k = rng.gen_range(2..8);
            let truth: Vec<u32> = {
                let mut t: Vec<u32> = (0..30u32).filter(|_| rng.gen_bool(0.3)).collect();
                if t.is_empty() {
                    t.push(0);
                }
                t.sort_unstable();
                t
            };
            let mut topk: Vec<u32> = (100..100 + k as u32).collect(); // all misses
            let mut shuffled = truth.clone();
            for idx in (1..shuffled.len()).rev() {
                shuffled.swap(idx, rng.gen_range(0..=idx));
            }
            let hits = rng.gen_range(0..k.min(shuffled.len()));
            topk[..hits].copy_from_slice(&shuffled[..hits]);
            let before = metrics_for_user(&topk, &truth, k);
            // Replace the first miss with an unused relevant item, if any.
            let unused: Vec<u32> = truth
                .iter()
                .copied()
                .filter(|t| !topk.contains(t))
                .collect();
            let miss = topk.iter().position(|i| truth.binary_search(i).is_err());
            if let (Some(slot), Some(&item)) = (miss, unused.first()) {
                let mut improved = topk.clone();
                improved[slot] = item;
                let after = metrics_for_user(&improved, &truth, k);
                assert!(after.0 >= before.0, "recall dropped");
                assert!(after.1 >= before.1 - 1e-12, "ndcg dropped");
                assert!(after.2 >= before.2, "precision dropped");
                assert!(after.3 >= before.3, "hr dropped");
            }
        }
    }

    #[test]
    fn evaluate_means_over_users() {
        // 2 users, 4 items. Scores come from an indicator model.
        let train = InteractionDataset::from_pairs(2, 4, vec![(0, 3), (1, 2)]).unwrap();
        let split = InteractionDataset::from_pairs(2, 4, vec![(0, 0), (0, 1), (1, 1)]).unwrap();
        let mut p = init_params(2, 4, 4, ModelKind::Mf, 0).unwrap();
        // User 0 scores: item0 > item1 > rest; user 1: item3 > item1.
        for u in 0..2 {
            for d in 0..4 {
                p.user_row_mut(u)[d] = 0.0;
            }
        }
        for i in 0..4 {
            for d in 0..4 {
                p.item_row_mut(i)[d] = 0.0;
            }
            p.item_row_mut(i)[i] = 1.0;
        }
        p.user_row_mut(0)[0] = 2.0;
        p.user_row_mut(0)[1] = 1.0;
        p.user_row_mut(1)[3] = 2.0;
        p.user_row_mut(1)[1] = 1.0;

        // K=2. User 0 pool excludes item 3: top2 = [0, 1], truth {0, 1}:
        // recall 1, precision 1, hr 1, ndcg 1.
        // User 1 pool excludes item 2: top2 = [3, 1], truth {1}: recall 1,
        // precision .5, hr 1, ndcg = (1/log2(3)) / 1.
        let report = evaluate(&p, &train, &split, None, 2).unwrap();
        assert_eq!(report.users_evaluated, 2);
        assert!((report.recall - 1.0).abs() < 1e-12);
        assert!((report.precision - 0.75).abs() < 1e-12);
        assert!((report.hit_ratio - 1.0).abs() < 1e-12);
        let u1_ndcg = 1.0 / 3f64.log2();
        assert!((report.ndcg - (1.0 + u1_ndcg) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_skips_users_without_truth() {
        let train = InteractionDataset::from_pairs(3, 4, vec![(0, 0), (1, 0), (2, 0)]).unwrap();
        let split = InteractionDataset::from_pairs(3, 4, vec![(0, 1)]).unwrap();
        let p = init_params(3, 4, 2, ModelKind::Mf, 1).unwrap();
        let report = evaluate(&p, &train, &split, None, 2).unwrap();
        assert_eq!(report.users_evaluated, 1);
    }

    #[test]
    fn evaluate_errors_with_zero_evaluable_users() {
        let train = InteractionDataset::from_pairs(2, 3, vec![(0, 0), (1, 1)]).unwrap();
        let split = InteractionDataset::from_pairs(2, 3, Vec::new()).unwrap();
        let p = init_params(2, 3, 2, ModelKind::Mf, 1).unwrap();
        assert!(evaluate(&p, &train, &split, None, 2).is_err());
    }

    #[test]
    fn evaluate_sanity_fixture_recall_one() {
        // Truth equals the graph's own positives with exclusion off: a model
        // that scores positives above everything else must reach recall 1.
        let pairs = vec![(0u32, 1u32), (0, 3), (1, 0), (1, 2), (2, 4)];
        let split = InteractionDataset::from_pairs(3, 5, pairs.clone()).unwrap();
        let empty = InteractionDataset::from_pairs(3, 5, Vec::new()).unwrap();
        let mut p = init_params(3, 5, 5, ModelKind::Mf, 0).unwrap();
        for u in 0..3 {
            for d in 0..5 {
                p.user_row_mut(u)[d] = 0.0;
            }
        }
        for i in 0..5 {
            for d in 0..5 {
                p.item_row_mut(i)[d] = 0.0;
            }
            p.item_row_mut(i)[i] = 1.0;
        }
        for &(u, i) in &pairs {
            p.user_row_mut(u as usize)[i as usize] = 1.0;
        }
        let report = evaluate(&p, &empty, &split, None, 5).unwrap();
        assert_eq!(report.recall, 1.0);
        assert_eq!(report.hit_ratio, 1.0);
    }

    #[test]
    fn metric_kind_parses() {
        assert_eq!(
            MetricKind::parse_with_k("recall@20").unwrap(),
            (MetricKind::Recall, 20)
        );
        assert_eq!(
            MetricKind::parse_with_k("hr@5").unwrap(),
            (MetricKind::HitRatio, 5)
        );
        assert!(MetricKind::parse_with_k("recall").is_err());
        assert!(MetricKind::parse_with_k("auc@20").is_err());
        assert!(MetricKind::parse_with_k("recall@0").is_err());
    }
}
