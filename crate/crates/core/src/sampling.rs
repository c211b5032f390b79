//! Class-balanced undersampling, uniform-provenance multilingual sampling
//! and train/test splitting.
//!
//! All randomness comes from ChaCha8 streams seeded through [`derive_seed`],
//! so a (seed, input) pair reproduces the same selection on every platform.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generation::{Dataset, SubDataset};
use crate::record::{SnippetRecord, Target};

/// Name of the generator behind every sampling decision.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Mixes a base seed with a label into an independent stream seed.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub fn rng_for(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Picks `n` human and `n` AI records without replacement. Selected records
/// keep their original relative order.
pub fn undersample_subdataset(sd: &SubDataset, n: usize, seed: u64) -> Result<SubDataset> {
    let label = sd.id.label();
    let mut keep = vec![false; sd.records.len()];
    for target in [Target::Human, Target::Ai] {
        let mut idx: Vec<usize> = (0..sd.records.len())
            .filter(|&i| sd.records[i].target == target)
            .collect();
        if idx.len() < n {
            return Err(Error::InsufficientRecords {
                class: format!("{label} {target}"),
                needed: n,
                available: idx.len(),
            });
        }
        let mut rng = rng_for(seed, &format!("undersample/{label}/{target}"));
        idx.shuffle(&mut rng);
        for &i in &idx[..n] {
            keep[i] = true;
        }
    }
    Ok(SubDataset {
        id: sd.id.clone(),
        records: sd
            .records
            .iter()
            .zip(keep)
            .filter_map(|(r, k)| k.then(|| r.clone()))
            .collect(),
    })
}

/// Splits `n` slots across `srcs` as evenly as possible; the `n mod k`
/// extra slots go to sources in seeded-shuffled order.
pub fn provenance_quotas(n: usize, srcs: &[String], rng: &mut ChaCha8Rng) -> BTreeMap<String, usize> {
    let mut order: Vec<&String> = srcs.iter().collect();
    order.sort();
    order.dedup();
    if order.is_empty() {
        return BTreeMap::new();
    }
    let base = n / order.len();
    let extra = n % order.len();
    order.shuffle(rng);
    order
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), base + usize::from(i < extra)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub per_class_count: usize,
    pub seed: u64,
    pub rng: String,
    /// dst language -> (src language -> number of AI records)
    pub provenance_quota: BTreeMap<String, BTreeMap<String, usize>>,
}

impl SamplePlan {
    /// Plans quotas for every language of the dataset against all its other
    /// languages.
    pub fn for_dataset(dataset: &Dataset, per_class_count: usize, seed: u64) -> Self {
        let languages: Vec<String> = dataset.languages().into_iter().collect();
        Self::for_languages(&languages, per_class_count, seed)
    }

    pub fn for_languages(languages: &[String], per_class_count: usize, seed: u64) -> Self {
        let mut provenance_quota = BTreeMap::new();
        for dst in languages {
            let srcs: Vec<String> = languages.iter().filter(|l| *l != dst).cloned().collect();
            let mut rng = rng_for(seed, &format!("quota/{dst}"));
            provenance_quota.insert(dst.clone(), provenance_quotas(per_class_count, &srcs, &mut rng));
        }
        Self {
            per_class_count,
            seed,
            rng: RNG_ALGORITHM.to_string(),
            provenance_quota,
        }
    }
}

/// Assigns each slot a distinct task by augmenting paths (Kuhn's algorithm).
/// `adj[g]` lists the candidate tasks for slot group `g`; returns
/// `matched_task_to_slot`.
fn match_slots(slot_group: &[usize], adj: &[Vec<usize>], n_tasks: usize) -> Vec<Option<usize>> {
    fn augment(
        slot: usize,
        slot_group: &[usize],
        adj: &[Vec<usize>],
        owner: &mut [Option<usize>],
        visited: &mut [bool],
    ) -> bool {
        for &t in &adj[slot_group[slot]] {
            if visited[t] {
                continue;
            }
            visited[t] = true;
            let free = match owner[t] {
                None => true,
                Some(other) => augment(other, slot_group, adj, owner, visited),
            };
            if free {
                owner[t] = Some(slot);
                return true;
            }
        }
        false
    }

    let mut owner = vec![None; n_tasks];
    let mut visited = vec![false; n_tasks];
    for slot in 0..slot_group.len() {
        visited.iter_mut().for_each(|v| *v = false);
        augment(slot, slot_group, adj, &mut owner, &mut visited);
    }
    owner
}

fn record_order(a: &SnippetRecord, b: &SnippetRecord) -> std::cmp::Ordering {
    (&a.language_name, a.target, &a.set, &a.task_name).cmp(&(&b.language_name, b.target, &b.set, &b.task_name))
}

/// Builds the multilingual training pool: for each language, exactly
/// `per_class_count` human records with distinct tasks and
/// `per_class_count` AI records with distinct tasks, the AI ones drawn from
/// each provenance according to the plan's quotas.
pub fn sample_multilingual(dataset: &Dataset, plan: &SamplePlan) -> Result<Dataset> {
    let n = plan.per_class_count;
    let mut out = Vec::new();
    for (dst, quotas) in &plan.provenance_quota {
        let in_dst: Vec<&SnippetRecord> = dataset
            .records
            .iter()
            .filter(|r| &r.language_name == dst)
            .collect();

        // Human side: one record per task.
        let mut humans: BTreeMap<&str, &SnippetRecord> = BTreeMap::new();
        for r in in_dst.iter().filter(|r| r.target == Target::Human) {
            humans
                .entry(r.task_name.as_str())
                .and_modify(|cur| {
                    if r.set < cur.set {
                        *cur = r
                    }
                })
                .or_insert(r);
        }
        if humans.len() < n {
            return Err(Error::InsufficientRecords {
                class: format!("{dst} human (distinct tasks)"),
                needed: n,
                available: humans.len(),
            });
        }
        let mut human_pool: Vec<&SnippetRecord> = humans.into_values().collect();
        human_pool.shuffle(&mut rng_for(plan.seed, &format!("multilingual/{dst}/human")));
        out.extend(human_pool[..n].iter().map(|r| (*r).clone()));

        // AI side: distinct tasks, exact quota per provenance.
        let srcs: Vec<&String> = quotas.keys().collect();
        let mut task_ids: BTreeMap<&str, usize> = BTreeMap::new();
        let mut by_cell: BTreeMap<(&str, &str), &SnippetRecord> = BTreeMap::new();
        for r in in_dst.iter().filter(|r| r.target == Target::Ai) {
            if let Some(src) = r.src() {
                let next = task_ids.len();
                task_ids.entry(r.task_name.as_str()).or_insert(next);
                by_cell.entry((src, r.task_name.as_str())).or_insert(r);
            }
        }
        let task_names: Vec<&str> = {
            let mut v = vec![""; task_ids.len()];
            for (name, &i) in &task_ids {
                v[i] = name;
            }
            v
        };
        let mut rng = rng_for(plan.seed, &format!("multilingual/{dst}/ai"));
        let mut adj: Vec<Vec<usize>> = Vec::with_capacity(srcs.len());
        for src in &srcs {
            let mut cands: Vec<usize> = by_cell
                .range((src.as_str(), "")..)
                .take_while(|((s, _), _)| s == src)
                .map(|((_, t), _)| task_ids[t])
                .collect();
            cands.sort_unstable();
            cands.shuffle(&mut rng);
            adj.push(cands);
        }
        let mut slot_group: Vec<usize> = Vec::new();
        for (g, src) in srcs.iter().enumerate() {
            slot_group.extend(std::iter::repeat(g).take(quotas[*src]));
        }
        slot_group.shuffle(&mut rng);
        let owner = match_slots(&slot_group, &adj, task_names.len());

        let mut filled = vec![0usize; srcs.len()];
        let mut picked = Vec::new();
        for (t, slot) in owner.iter().enumerate() {
            if let Some(slot) = slot {
                let g = slot_group[*slot];
                filled[g] += 1;
                picked.push(by_cell[&(srcs[g].as_str(), task_names[t])]);
            }
        }
        for (g, src) in srcs.iter().enumerate() {
            if filled[g] < quotas[*src] {
                return Err(Error::QuotaInfeasible {
                    dst: dst.clone(),
                    src: (*src).clone(),
                    needed: quotas[*src],
                    filled: filled[g],
                });
            }
        }
        out.extend(picked.into_iter().cloned());
    }
    out.sort_by(record_order);
    Ok(Dataset { records: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    RandomStratified,
    TaskGrouped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<SnippetRecord>,
    pub test: Vec<SnippetRecord>,
    pub ratio: f64,
    pub mode: SplitMode,
}

/// Splits records into train/test. In stratified mode the overall train
/// size is `round(ratio * n)` (clamped so both sides are non-empty),
/// distributed across classes by largest remainder. In task-grouped mode
/// whole tasks are assigned to one side.
pub fn split_train_test(records: &[SnippetRecord], ratio: f64, mode: SplitMode, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio {ratio} not in (0, 1)")));
    }
    let n = records.len();
    if n < 2 {
        return Err(Error::InsufficientRecords {
            class: "split (any class)".into(),
            needed: 2,
            available: n,
        });
    }
    let target_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut in_train = vec![false; n];
    match mode {
        SplitMode::RandomStratified => {
            let classes: Vec<Vec<usize>> = [Target::Human, Target::Ai]
                .iter()
                .map(|t| (0..n).filter(|&i| records[i].target == *t).collect())
                .collect();
            // Largest-remainder apportionment of target_train over classes.
            let exact: Vec<f64> = classes
                .iter()
                .map(|c| target_train as f64 * c.len() as f64 / n as f64)
                .collect();
            let mut alloc: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
            let mut left = target_train - alloc.iter().sum::<usize>();
            let mut order: Vec<usize> = (0..classes.len()).collect();
            order.sort_by(|&a, &b| {
                let ra = exact[a] - exact[a].floor();
                let rb = exact[b] - exact[b].floor();
                rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
            });
            for &c in &order {
                if left == 0 {
                    break;
                }
                if alloc[c] < classes[c].len() {
                    alloc[c] += 1;
                    left -= 1;
                }
            }
            for (c, members) in classes.into_iter().enumerate() {
                let mut members = members;
                members.shuffle(&mut rng_for(seed, &format!("split/class{c}")));
                for &i in &members[..alloc[c]] {
                    in_train[i] = true;
                }
            }
        }
        SplitMode::TaskGrouped => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, r) in records.iter().enumerate() {
                groups.entry(r.task_name.as_str()).or_default().push(i);
            }
            if groups.len() < 2 {
                return Err(Error::InsufficientRecords {
                    class: "split (distinct tasks)".into(),
                    needed: 2,
                    available: groups.len(),
                });
            }
            let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
            groups.shuffle(&mut rng_for(seed, "split/tasks"));
            let mut count = 0;
            let last = groups.len() - 1;
            for (gi, g) in groups.iter().enumerate() {
                // The final group always goes to test so that side is non-empty.
                let room = count < target_train && gi < last;
                if room || count == 0 {
                    count += g.len();
                    for &i in g {
                        in_train[i] = true;
                    }
                }
            }
        }
    }
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
        ratio,
        mode,
    };
    for (r, t) in records.iter().zip(in_train) {
        if t {
            split.train.push(r.clone());
        } else {
            split.test.push(r.clone());
        }
    }
    Ok(split)
}

/// One line of a sampling manifest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifestRow {
    pub set: String,
    pub task: String,
    pub target: Target,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub side: Option<String>,
}

pub fn sample_manifest(records: &[SnippetRecord]) -> Vec<ManifestRow> {
    records
        .iter()
        .map(|r| ManifestRow {
            set: r.set.clone(),
            task: r.task_name.clone(),
            target: r.target,
            side: None,
        })
        .collect()
}

pub fn split_manifest(split: &Split) -> Vec<ManifestRow> {
    let mut rows = Vec::new();
    for (side, recs) in [("train", &split.train), ("test", &split.test)] {
        rows.extend(recs.iter().map(|r| ManifestRow {
            set: r.set.clone(),
            task: r.task_name.clone(),
            target: r.target,
            side: Some(side.to_string()),
        }));
    }
    rows
}

/// Tasks appearing on both sides of a split.
pub fn leaked_tasks(split: &Split) -> BTreeSet<String> {
    let train: BTreeSet<&str> = split.train.iter().map(|r| r.task_name.as_str()).collect();
    split
        .test
        .iter()
        .filter(|r| train.contains(r.task_name.as_str()))
        .map(|r| r.task_name.clone())
        .collect()
}
