//! Interaction datasets: ingestion, splitting, popularity statistics, and
//! synthetic fixtures with planted block structure.


use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An immutable set of positive user-item interactions, densely indexed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionDataset {
    num_users: usize,
    num_items: usize,
    /// Sorted, duplicate-free (user, item) pairs.
    positives: Vec<(u32, u32)>,
    /// Per-user sorted interacted item lists.
    user_items: Vec<Vec<u32>>,
    /// Per-item interaction counts.
    item_popularity: Vec<u32>,
}

impl InteractionDataset {
    /// Build a dataset from raw pairs. Duplicates are collapsed; ids must be
    /// in range.
    pub fn from_pairs(
        num_users: usize,
        num_items: usize,
        mut pairs: Vec<(u32, u32)>,
    ) -> Result<Self> {
        for &(u, i) in &pairs {
            if (u as usize) >= num_users || (i as usize) >= num_items {
                return Err(Error::domain(format!(
                    "pair ({u}, {i}) out of range for {num_users} users x {num_items} items"
                )));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut user_items = vec![Vec::new(); num_users];
        let mut item_popularity = vec![0u32; num_items];
        for &(u, i) in &pairs {
            user_items[u as usize].push(i);
            item_popularity[i as usize] += 1;
        }

        Ok(InteractionDataset {
            num_users,
            num_items,
            positives: pairs,
            user_items,
            item_popularity,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Number of positive pairs.
    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn positives(&self) -> &[(u32, u32)] {
        &self.positives
    }

    /// Sorted item ids the user has interacted with.
    pub fn user_items(&self, user: u32) -> &[u32] {
        &self.user_items[user as usize]
    }

    pub fn item_popularity(&self) -> &[u32] {
        &self.item_popularity
    }

    pub fn has(&self, user: u32, item: u32) -> bool {
        self.user_items[user as usize].binary_search(&item).is_ok()
    }

    /// Write as two-column TSV, one pair per line.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.positives.len() * 8);
        out.push_str("# user\titem\n");
        for &(u, i) in &self.positives {
            out.push_str(&format!("{u}\t{i}\n"));
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Train/valid/test partition of one dataset. All three share user/item ids.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: InteractionDataset,
    pub valid: InteractionDataset,
    pub test: InteractionDataset,
}

impl DataSplit {
    pub fn num_users(&self) -> usize {
        self.train.num_users()
    }

    pub fn num_items(&self) -> usize {
        self.train.num_items()
    }
}

/// A loaded interaction file: the dense dataset plus the original ids, so
/// that row `k` of `user_ids` is the raw id behind dense user `k`.
#[derive(Debug, Clone)]
pub struct LoadedInteractions {
    pub data: InteractionDataset,
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

/// Read a `user<TAB>item` file, drop low-degree nodes, and re-index densely.
///
/// Lines starting with `#` and blank lines are ignored. Duplicate pairs are
/// collapsed. Users and items with fewer than `min_count` interactions are
/// removed iteratively until the filter is stable, since dropping a user can
/// push an item below the threshold and vice versa.
pub fn load_interactions(path: &Path, min_count: usize) -> Result<LoadedInteractions> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let path_str = path.display().to_string();

    let mut pairs: Vec<(u64, u64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (Some(u), Some(i)) = (tokens.next(), tokens.next()) else {
            return Err(Error::Parse {
                path: path_str,
                line: idx + 1,
                msg: format!("expected two integer columns, got {trimmed:?}"),
            });
        };
        if tokens.next().is_some() {
            return Err(Error::Parse {
                path: path_str,
                line: idx + 1,
                msg: "expected exactly two columns".into(),
            });
        }
        let parse = |tok: &str, what: &str| -> Result<u64> {
            tok.parse::<u64>().map_err(|_| Error::Parse {
                path: path_str.clone(),
                line: idx + 1,
                msg: format!("invalid {what} id {tok:?}"),
            })
        };
        pairs.push((parse(u, "user")?, parse(i, "item")?));
    }

    pairs.sort_unstable();
    pairs.dedup();

    // Iterative min-count filter to the fixpoint.
    loop {
        let mut user_deg: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
        let mut item_deg: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
        for &(u, i) in &pairs {
            *user_deg.entry(u).or_insert(0) += 1;
            *item_deg.entry(i).or_insert(0) += 1;
        }
        let before = pairs.len();
        pairs.retain(|&(u, i)| user_deg[&u] >= min_count && item_deg[&i] >= min_count);
        if pairs.len() == before {
            break;
        }
    }

    if pairs.is_empty() {
        return Err(Error::domain(format!(
            "no interactions left after min_count={min_count} filtering of {path_str}"
        )));
    }

    // Dense re-indexing in sorted raw-id order, so already-dense files map to
    // themselves.
    let mut user_ids: Vec<u64> = pairs.iter().map(|&(u, _)| u).collect();
    let mut item_ids: Vec<u64> = pairs.iter().map(|&(_, i)| i).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    item_ids.sort_unstable();
    item_ids.dedup();

    let dense: Vec<(u32, u32)> = pairs
        .iter()
        .map(|&(u, i)| {
            let du = user_ids.binary_search(&u).expect("id present") as u32;
            let di = item_ids.binary_search(&i).expect("id present") as u32;
            (du, di)
        })
        .collect();

    let data = InteractionDataset::from_pairs(user_ids.len(), item_ids.len(), dense)?;
    Ok(LoadedInteractions {
        data,
        user_ids,
        item_ids,
    })
}

/// Randomly partition pairs into train/valid/test by the given ratios.
///
/// Sizes are `floor(n * r / sum)` for valid and test; train receives the
/// rounding remainder. Deterministic for a given seed.
pub fn split_dataset(
    ds: &InteractionDataset,
    ratios: (u32, u32, u32),
    seed: u64,
) -> Result<DataSplit> {
    let n = ds.len();
    if n < 5 {
        return Err(Error::domain(format!(
            "need at least 5 interactions to split, got {n}"
        )));
    }
    let (rt, rv, rs) = ratios;
    let total = rt + rv + rs;
    if rt == 0 || rv == 0 || rs == 0 {
        return Err(Error::domain("split ratios must be positive"));
    }

    let mut pairs: Vec<(u32, u32)> = ds.positives().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);

    let n_valid = n * rv as usize / total as usize;
    let n_test = n * rs as usize / total as usize;
    let n_train = n - n_valid - n_test;

    let train = pairs[..n_train].to_vec();
    let valid = pairs[n_train..n_train + n_valid].to_vec();
    let test = pairs[n_train + n_valid..].to_vec();

    Ok(DataSplit {
        train: InteractionDataset::from_pairs(ds.num_users(), ds.num_items(), train)?,
        valid: InteractionDataset::from_pairs(ds.num_users(), ds.num_items(), valid)?,
        test: InteractionDataset::from_pairs(ds.num_users(), ds.num_items(), test)?,
    })
}

/// Generate a dataset with planted block structure: users and items are
/// partitioned into `num_blocks` aligned groups; a user interacts with each
/// in-block item with probability `density` and with each out-of-block item
/// with probability `density * noise`.
pub fn generate_synthetic(
    num_users: usize,
    num_items: usize,
    num_blocks: usize,
    density: f64,
    noise: f64,
    seed: u64,
) -> Result<InteractionDataset> {
    if num_blocks == 0 || num_users % num_blocks != 0 || num_items % num_blocks != 0 {
        return Err(Error::domain(format!(
            "num_blocks={num_blocks} must divide both num_users={num_users} and num_items={num_items}"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::domain(format!(
            "density must be in (0, 1], got {density}"
        )));
    }
    if !(0.0..1.0).contains(&noise) {
        return Err(Error::domain(format!(
            "noise must be in [0, 1), got {noise}"
        )));
    }

    let users_per_block = num_users / num_blocks;
    let items_per_block = num_items / num_blocks;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for u in 0..num_users {
        let block = u / users_per_block;
        for i in 0..num_items {
            let in_block = i / items_per_block == block;
            let rate = if in_block { density } else { density * noise };
            if rng.gen::<f64>() < rate {
                pairs.push((u as u32, i as u32));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::domain(
            "synthetic generation produced no interactions; raise density",
        ));
    }
    InteractionDataset::from_pairs(num_users, num_items, pairs)
}

/// Popularity distribution `p_j = pop_j^beta / sum_s pop_s^beta`.
///
/// Items that were never interacted with get probability 0 regardless of
/// `beta`.
pub fn popularity_distribution(ds: &InteractionDataset, beta: f64) -> Result<Vec<f64>> {
    let weights: Vec<f64> = ds
        .item_popularity()
        .iter()
        .map(|&pop| {
            if pop == 0 {
                0.0
            } else {
                (pop as f64).powf(beta)
            }
        })
        .collect();
    let total = kahan_sum(&weights);
    if total <= 0.0 {
        return Err(Error::domain("all items have zero popularity"));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

pub(crate) fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Sidecar written next to split TSVs: everything needed to reproduce and
/// re-attach the split to the raw id space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: (u32, u32, u32),
    pub num_users: usize,
    pub num_items: usize,
    pub counts: (usize, usize, usize),
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

/// Write `train.tsv`, `valid.tsv`, `test.tsv` and `split.json` into `dir`.
pub fn write_split(
    dir: &Path,
    split: &DataSplit,
    manifest: &SplitManifest,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    split.train.write_tsv(&dir.join("train.tsv"))?;
    split.valid.write_tsv(&dir.join("valid.tsv"))?;
    split.test.write_tsv(&dir.join("test.tsv"))?;
    let mut file = fs::File::create(dir.join("split.json"))?;
    serde_json::to_writer_pretty(&mut file, manifest)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Read a directory produced by [`write_split`].
pub fn read_split(dir: &Path) -> Result<DataSplit> {
    let manifest: SplitManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("split.json"))?)?;
    let read_part = |name: &str| -> Result<InteractionDataset> {
        let loaded = raw_pairs(&dir.join(name))?;
        InteractionDataset::from_pairs(manifest.num_users, manifest.num_items, loaded)
    };
    Ok(DataSplit {
        train: read_part("train.tsv")?,
        valid: read_part("valid.tsv")?,
        test: read_part("test.tsv")?,
    })
}

/// Read pairs without filtering or re-indexing (split parts are already dense).
fn raw_pairs(path: &Path) -> Result<Vec<(u32, u32)>> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let path_str = path.display().to_string();
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (Some(u), Some(i)) = (tokens.next(), tokens.next()) else {
            return Err(Error::Parse {
                path: path_str,
                line: idx + 1,
                msg: "expected two integer columns".into(),
            });
        };
        let u: u32 = u.parse().map_err(|_| Error::Parse {
            path: path_str.clone(),
            line: idx + 1,
            msg: format!("invalid user id {u:?}"),
        })?;
        let i: u32 = i.parse().map_err(|_| Error::Parse {
            path: path_str.clone(),
            line: idx + 1,
            msg: format!("invalid item id {i:?}"),
        })?;
        pairs.push((u, i));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::io::Write as _;

    fn write_tmp(lines: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn load_basic() {
        let f = write_tmp("0\t0\n0\t1\n1\t0\n");
        let loaded = load_interactions(f.path(), 1).unwrap();
        assert_eq!(loaded.data.num_users(), 2);
        assert_eq!(loaded.data.num_items(), 2);
        assert_eq!(loaded.data.len(), 3);
    }

    #[test]
    fn load_dedups() {
        let f = write_tmp("0\t0\n0\t0\n");
        let loaded = load_interactions(f.path(), 1).unwrap();
        assert_eq!(loaded.data.len(), 1);
    }

    #[test]
    fn load_skips_comments_and_blank_lines() {
        let f = write_tmp("# header\n\n3 7\n");
        let loaded = load_interactions(f.path(), 1).unwrap();
        assert_eq!(loaded.data.len(), 1);
        assert_eq!(loaded.user_ids, vec![3]);
        assert_eq!(loaded.item_ids, vec![7]);
    }

    #[test]
    fn load_reports_line_numbers() {
        let f = write_tmp("0\t0\nnot-a-pair\n");
        let err = load_interactions(f.path(), 1).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn star_graph_filters_to_empty() {
        // User 0 with 10 degree-1 items: min_count=2 removes every item, then
        // the user, leaving nothing.
        let mut text = String::new();
        for i in 0..10 {
            text.push_str(&format!("0\t{i}\n"));
        }
        let f = write_tmp(&text);
        let err = load_interactions(f.path(), 2).unwrap_err();
        assert!(matches!(err, Error::Domain(_)), "got {err:?}");
    }

    #[test]
    fn sparse_ids_densify() {
        let f = write_tmp("100\t500\n100\t700\n200\t500\n200\t700\n");
        let loaded = load_interactions(f.path(), 1).unwrap();
        assert_eq!(loaded.data.num_users(), 2);
        assert_eq!(loaded.data.num_items(), 2);
        assert_eq!(loaded.user_ids, vec![100, 200]);
        assert_eq!(loaded.item_ids, vec![500, 700]);
        assert!(loaded.data.has(0, 0));
    }

    #[test]
    fn roundtrip_through_tsv() {
        let ds = generate_synthetic(20, 40, 2, 0.5, 0.1, 9).unwrap();
        // Drop isolated nodes first: a TSV cannot represent them.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.tsv");
        ds.write_tsv(&path).unwrap();
        let loaded = load_interactions(&path, 1).unwrap();
        let reloaded_path = dir.path().join("ds2.tsv");
        loaded.data.write_tsv(&reloaded_path).unwrap();
        let again = load_interactions(&reloaded_path, 1).unwrap();
        assert_eq!(loaded.data, again.data);
    }

    #[test]
    fn split_sizes_exact_division() {
        let ds = InteractionDataset::from_pairs(
            25,
            20,
            (0..500u32).map(|k| (k / 20, k % 20)).collect(),
        )
        .unwrap();
        assert_eq!(ds.len(), 500);
        let split = split_dataset(&ds, (3, 1, 1), 1).unwrap();
        assert_eq!(split.train.len(), 300);
        assert_eq!(split.valid.len(), 100);
        assert_eq!(split.test.len(), 100);
    }

    #[test]
    fn split_rounding_remainder_goes_to_train() {
        let ds =
            InteractionDataset::from_pairs(7, 7, (0..7u32).map(|k| (k, k)).collect()).unwrap();
        let split = split_dataset(&ds, (3, 1, 1), 1).unwrap();
        assert_eq!(
            (split.train.len(), split.valid.len(), split.test.len()),
            (5, 1, 1)
        );
    }

    #[test]
    fn split_determinism_and_seed_sensitivity() {
        let ds = generate_synthetic(20, 40, 2, 0.5, 0.1, 3).unwrap();
        let a = split_dataset(&ds, (3, 1, 1), 11).unwrap();
        let b = split_dataset(&ds, (3, 1, 1), 11).unwrap();
        let c = split_dataset(&ds, (3, 1, 1), 12).unwrap();
        assert_eq!(a.train.positives(), b.train.positives());
        assert_ne!(a.train.positives(), c.train.positives());
    }

    #[test]
    fn split_partition_property_over_many_seeds() {
        // Disjointness and union, checked exhaustively on a 100-pair dataset
        // for 1000 seeds.
        let pairs: Vec<(u32, u32)> = (0..100u32).map(|k| (k % 10, k / 10 + (k % 10))).collect();
        let ds = InteractionDataset::from_pairs(10, 20, pairs).unwrap();
        let source: HashSet<(u32, u32)> = ds.positives().iter().copied().collect();
        assert_eq!(source.len(), 100);
        for seed in 0..1000u64 {
            let split = split_dataset(&ds, (3, 1, 1), seed).unwrap();
            let mut seen: HashSet<(u32, u32)> = HashSet::new();
            for part in [&split.train, &split.valid, &split.test] {
                for &p in part.positives() {
                    assert!(seen.insert(p), "pair {p:?} appears in two parts (seed {seed})");
                }
            }
            assert_eq!(seen, source, "parts must union to the source (seed {seed})");
        }
    }

    #[test]
    fn split_requires_five_pairs() {
        let ds =
            InteractionDataset::from_pairs(4, 4, vec![(0, 0), (1, 1), (2, 2), (3, 3)]).unwrap();
        assert!(split_dataset(&ds, (3, 1, 1), 0).is_err());
    }

    #[test]
    fn synthetic_noise_zero_is_block_diagonal() {
        let ds = generate_synthetic(60, 120, 3, 0.3, 0.0, 5).unwrap();
        for &(u, i) in ds.positives() {
            assert_eq!(u / 20, i / 40, "positive ({u},{i}) crosses blocks");
        }
    }

    #[test]
    fn synthetic_rejects_bad_fractions() {
        assert!(generate_synthetic(60, 120, 3, 0.3, 1.0, 5).is_err());
        assert!(generate_synthetic(60, 120, 3, 0.0, 0.1, 5).is_err());
        assert!(generate_synthetic(60, 120, 3, 1.5, 0.1, 5).is_err());
        assert!(generate_synthetic(60, 120, 7, 0.3, 0.1, 5).is_err());
    }

    #[test]
    fn synthetic_pair_count_matches_binomial_expectation() {
        // E = 60 * (40*0.3 + 80*0.3*0.05) = 792,
        // Var = 60 * (40*0.3*0.7 + 80*0.015*0.985) ~= 574.9, sigma ~= 24.
        let expected = 792.0;
        let sigma = (60.0f64 * (40.0 * 0.3 * 0.7 + 80.0 * 0.015 * 0.985)).sqrt();
        for seed in [1u64, 2, 3] {
            let ds = generate_synthetic(60, 120, 3, 0.3, 0.05, seed).unwrap();
            let got = ds.len() as f64;
            assert!(
                (got - expected).abs() < 3.0 * sigma,
                "|{got} - {expected}| exceeds 3 sigma = {:.1}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn popularity_uniform_when_counts_equal() {
        let ds = InteractionDataset::from_pairs(
            4,
            4,
            vec![(0, 0), (1, 1), (2, 2), (3, 3)],
        )
        .unwrap();
        let p = popularity_distribution(&ds, 0.75).unwrap();
        for &v in &p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn popularity_formula_direct() {
        // pops [1, 2, 4], beta = 0.75: weights [1, 2^0.75, 4^0.75],
        // normalized = [0.18148.., 0.30521.., 0.51329..].
        let mut pairs = vec![(0u32, 0u32)];
        for u in 0..2 {
            pairs.push((u, 1));
        }
        for u in 0..4 {
            pairs.push((u, 2));
        }
        let ds = InteractionDataset::from_pairs(4, 3, pairs).unwrap();
        assert_eq!(ds.item_popularity(), &[1, 2, 4]);
        let p = popularity_distribution(&ds, 0.75).unwrap();
        let w = [1.0f64, 2f64.powf(0.75), 4f64.powf(0.75)];
        let total: f64 = w.iter().sum();
        for (got, want) in p.iter().zip(w.iter().map(|x| x / total)) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((p[0] - 0.1815).abs() < 5e-4);
        assert!((p[1] - 0.3052).abs() < 5e-4);
        assert!((p[2] - 0.5133).abs() < 5e-4);
    }

    #[test]
    fn popularity_zero_count_items_get_zero() {
        let ds = InteractionDataset::from_pairs(
            5,
            2,
            (0..5u32).map(|u| (u, 1)).collect(),
        )
        .unwrap();
        let p = popularity_distribution(&ds, 2.5).unwrap();
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn popularity_sums_to_one_for_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n_items = rng.gen_range(2..64);
            let mut pairs = Vec::new();
            let mut next_user = 0u32;
            for i in 0..n_items {
                let count = rng.gen_range(0..12);
                for _ in 0..count {
                    pairs.push((next_user % 32, i as u32));
                    next_user += 1;
                }
            }
            if pairs.is_empty() {
                continue;
            }
            let ds = InteractionDataset::from_pairs(32, n_items, pairs).unwrap();
            let beta = rng.gen_range(0.0..2.0);
            let p = popularity_distribution(&ds, beta).unwrap();
            assert!(p.iter().all(|&v| v >= 0.0));
            let total = kahan_sum(&p);
            assert!((total - 1.0).abs() < 1e-12, "sum = {total}");
        }
    }

    #[test]
    fn split_files_roundtrip() {
        let ds = generate_synthetic(20, 40, 2, 0.4, 0.1, 17).unwrap();
        let split = split_dataset(&ds, (3, 1, 1), 5).unwrap();
        let manifest = SplitManifest {
            seed: 5,
            ratios: (3, 1, 1),
            num_users: ds.num_users(),
            num_items: ds.num_items(),
            counts: (split.train.len(), split.valid.len(), split.test.len()),
            user_ids: (0..ds.num_users() as u64).collect(),
            item_ids: (0..ds.num_items() as u64).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), &split, &manifest).unwrap();
        let back = read_split(dir.path()).unwrap();
        assert_eq!(back.train, split.train);
        assert_eq!(back.valid, split.valid);
        assert_eq!(back.test, split.test);
    }
}
