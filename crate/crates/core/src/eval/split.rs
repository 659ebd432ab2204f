//! Grouped, class-stratified holdout and fold construction.
//!
//! Every example carries a group key (player and game); a group's examples
//! always land on the same side. A subset `S` drawn from a set with positive
//! ratio `r` is accepted when `|pos(S) − r·|S|| ≤ 1`, i.e. its ratio deviates
//! by at most `1/|S|`. The complement then satisfies the same bound.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::sha256_hex;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitItem {
    pub group: String,
    pub label: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    /// Each fold draws its own dev set from the full remainder; dev sets may overlap.
    Resample,
    /// Dev sets partition the remainder.
    Partition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holdout {
    pub rest: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
}

/// Derives an independent seed for a named sub-task.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let digest = sha256_hex(format!("{seed}/{tag}").as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

struct Group {
    members: Vec<usize>,
    size: i64,
    pos: i64,
}

fn groups_of(items: &[SplitItem], pool: &[usize]) -> Vec<Group> {
    let mut by_key: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in pool {
        by_key.entry(items[i].group.as_str()).or_default().push(i);
    }
    by_key
        .into_values()
        .map(|members| Group {
            size: members.len() as i64,
            pos: members.iter().filter(|&&i| items[i].label == 1).count() as i64,
            members,
        })
        .collect()
}

/// Deviation of a subset from the target ratio, scaled by its size.
fn deviation(size: i64, pos: i64, ratio: f64) -> f64 {
    (pos as f64 - ratio * size as f64).abs()
}

const TOL: f64 = 1.0 + 1e-9;
const EPS: f64 = 1e-9;

/// Allowed range of the signed excess `pos − ratio·size` of a subset.
#[derive(Clone, Copy, Debug)]
struct Band {
    lo: f64,
    hi: f64,
}

impl Band {
    const UNIT: Band = Band { lo: -1.0, hi: 1.0 };

    /// Distance of a subset's excess from the band.
    fn miss(self, size: i64, pos: i64, ratio: f64) -> f64 {
        let d = pos as f64 - ratio * size as f64;
        (self.lo - d).max(d - self.hi).max(0.0)
    }
}

/// Picks whole groups totalling about `target` examples whose positive count
/// is within one of `ratio` times their size.
fn select(groups: &[Group], target: i64, ratio: f64, band: Band, rng: &mut ChaCha8Rng) -> Result<Vec<bool>> {
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(rng);
    let want_pos = (ratio * target as f64).round() as i64;
    let want_neg = target - want_pos;
    let mut chosen = vec![false; groups.len()];
    let (mut size, mut pos) = (0i64, 0i64);

    for &g in &order {
        let gr = &groups[g];
        if size + gr.size <= target && pos + gr.pos <= want_pos && (size - pos) + (gr.size - gr.pos) <= want_neg {
            chosen[g] = true;
            size += gr.size;
            pos += gr.pos;
        }
    }
    for &g in &order {
        let gr = &groups[g];
        if !chosen[g] && size + gr.size <= target {
            chosen[g] = true;
            size += gr.size;
            pos += gr.pos;
        }
    }
    if size == 0 {
        return Err(Error::Stratification(format!(
            "no group fits a subset of {target} examples"
        )));
    }

    // swap repair: exchange one chosen and one free group while it lowers the
    // deviation, keeping the size near the target
    let slack = groups.iter().map(|g| g.size).max().unwrap_or(1);
    while band.miss(size, pos, ratio) > EPS {
        let mut best: Option<(usize, usize, f64)> = None;
        let current = band.miss(size, pos, ratio);
        for &a in order.iter().filter(|&&a| chosen[a]) {
            for &b in order.iter().filter(|&&b| !chosen[b]) {
                let (ns, np) = (
                    size - groups[a].size + groups[b].size,
                    pos - groups[a].pos + groups[b].pos,
                );
                if ns <= 0 || (ns - target).abs() >= slack {
                    continue;
                }
                let d = band.miss(ns, np, ratio);
                if d < current - 1e-12 && best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((a, b, d));
                }
            }
        }
        let Some((a, b, _)) = best else {
            return Err(Error::Stratification(format!(
                "cannot balance a subset of {size} examples ({pos} positive) to ratio {ratio:.4}"
            )));
        };
        chosen[a] = false;
        chosen[b] = true;
        size += groups[b].size - groups[a].size;
        pos += groups[b].pos - groups[a].pos;
    }
    Ok(chosen)
}

fn class_counts(items: &[SplitItem], pool: &[usize]) -> (usize, usize) {
    let pos = pool.iter().filter(|&&i| items[i].label == 1).count();
    (pos, pool.len() - pos)
}

/// Splits `pool` into (subset, remainder) with the subset sized `ceil(fraction·|pool|)`.
fn split_pool(
    items: &[SplitItem],
    pool: &[usize],
    fraction: f64,
    ratio: f64,
    band: Band,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction {fraction} must lie in (0, 1)"
        )));
    }
    let (pos, neg) = class_counts(items, pool);
    if pos < 2 || neg < 2 {
        return Err(Error::Stratification(format!(
            "need at least two examples of each class, have {pos} positive and {neg} negative"
        )));
    }
    let groups = groups_of(items, pool);
    if groups.len() < 2 {
        return Err(Error::Stratification("need at least two groups".into()));
    }
    let target = (fraction * pool.len() as f64).ceil() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = select(&groups, target, ratio, band, &mut rng)?;
    let (mut sub, mut rest) = (Vec::new(), Vec::new());
    for (g, c) in groups.iter().zip(chosen) {
        if c { &mut sub } else { &mut rest }.extend_from_slice(&g.members);
    }
    sub.sort_unstable();
    rest.sort_unstable();
    if rest.is_empty() {
        return Err(Error::Stratification("split left nothing on one side".into()));
    }
    Ok((sub, rest))
}

fn ratio_of(items: &[SplitItem], pool: &[usize]) -> f64 {
    class_counts(items, pool).0 as f64 / pool.len() as f64
}

/// Holds out `ceil(fraction·N)` examples at group granularity.
pub fn stratified_holdout(items: &[SplitItem], fraction: f64, seed: u64) -> Result<Holdout> {
    let all: Vec<usize> = (0..items.len()).collect();
    if all.is_empty() {
        return Err(Error::Insufficient("no examples to split".into()));
    }
    let (test, rest) = split_pool(
        items,
        &all,
        fraction,
        ratio_of(items, &all),
        Band::UNIT,
        derive_seed(seed, "holdout"),
    )?;
    Ok(Holdout { rest, test })
}

/// Folds over `pool` (indices into `items`); each dev set is stratified
/// against the ratio of the whole pool.
pub fn stratified_kfold(items: &[SplitItem], pool: &[usize], k: usize, mode: FoldMode, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least two folds, got {k}")));
    }
    let mut pool = pool.to_vec();
    pool.sort_unstable();
    let ratio = ratio_of(items, &pool);
    let fold_seed = |i: usize| derive_seed(seed, &format!("fold{i}"));
    let complement = |dev: &[usize]| pool.iter().copied().filter(|i| dev.binary_search(i).is_err()).collect();
    match mode {
        FoldMode::Resample => (0..k)
            .map(|i| {
                let (dev, train) = split_pool(items, &pool, 1.0 / k as f64, ratio, Band::UNIT, fold_seed(i))?;
                Ok(Fold { train, dev })
            })
            .collect(),
        FoldMode::Partition => {
            let mut remaining = pool.clone();
            let mut devs = Vec::with_capacity(k);
            // the running excess stays within one so the leftover final fold does too
            let mut excess: f64 = 0.0;
            for i in 0..k - 1 {
                let band = Band {
                    lo: -1.0 - excess.min(0.0),
                    hi: 1.0 - excess.max(0.0),
                };
                let (dev, left) = split_pool(items, &remaining, 1.0 / (k - i) as f64, ratio, band, fold_seed(i))?;
                let (pos, _) = class_counts(items, &dev);
                excess += pos as f64 - ratio * dev.len() as f64;
                devs.push(dev);
                remaining = left;
            }
            let (pos, _) = class_counts(items, &remaining);
            if deviation(remaining.len() as i64, pos as i64, ratio) > TOL {
                return Err(Error::Stratification(format!(
                    "final fold of {} examples ({pos} positive) misses ratio {ratio:.4}",
                    remaining.len()
                )));
            }
            devs.push(remaining);
            Ok(devs
                .into_iter()
                .map(|dev| Fold {
                    train: complement(&dev),
                    dev,
                })
                .collect())
        }
    }
}

/// True when `subset`'s positive ratio is within `1/|subset|` of `ratio`.
pub fn is_stratified(items: &[SplitItem], subset: &[usize], ratio: f64) -> bool {
    let (pos, _) = class_counts(items, subset);
    !subset.is_empty() && deviation(subset.len() as i64, pos as i64, ratio) <= TOL
}
