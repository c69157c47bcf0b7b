//! Near-duplicate removal, ratio-targeted sampling and worker sharding.
//!
//! All three steps are pure functions of their inputs and seeds:
//!
//! - [`dedup`] keeps the first of any group of records whose normalized
//!   queries have word-shingle Jaccard similarity at or above a threshold,
//! - [`plan_mixture`] samples each source pool down to its target share,
//! - [`shard`] partitions records across workers by a stable hash of the
//!   trajectory id, shuffles each shard with a worker-specific seed and
//!   interleaves sources in fixed-size blocks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::Trajectory;
use crate::rng::{fnv1a64, mix, SplitMix64};

pub const DEFAULT_JACCARD_THRESHOLD: f64 = 0.9;
pub const DEFAULT_SHINGLE_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    AgentCleaned,
    SyntheticFc,
    GeneralInstruct,
}

impl SourceTag {
    pub const ALL: [SourceTag; 3] = [
        SourceTag::AgentCleaned,
        SourceTag::SyntheticFc,
        SourceTag::GeneralInstruct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::AgentCleaned => "agent_cleaned",
            SourceTag::SyntheticFc => "synthetic_fc",
            SourceTag::GeneralInstruct => "general_instruct",
        }
    }
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SourceTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown source tag {s:?}"))
    }
}

/// A trajectory with the source it was drawn from. This is the shard file
/// record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedRecord {
    pub source: SourceTag,
    pub record: Trajectory,
}

impl TaggedRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// What dedup and sharding need to know about a record.
pub trait CorpusRecord {
    fn id(&self) -> &str;
    fn query(&self) -> &str;
}

impl CorpusRecord for Trajectory {
    fn id(&self) -> &str {
        &self.unique_trajectory_id
    }

    fn query(&self) -> &str {
        &self.query
    }
}

impl CorpusRecord for TaggedRecord {
    fn id(&self) -> &str {
        &self.record.unique_trajectory_id
    }

    fn query(&self) -> &str {
        &self.record.query
    }
}

/// Lower-cases, drops every character that is neither alphanumeric nor
/// whitespace, and splits into words.
pub fn normalize_query(q: &str) -> Vec<String> {
    q.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Word `n`-shingles of the normalized query. A query shorter than `n`
/// words yields one shingle of all its words; an empty query yields none.
pub fn shingles(q: &str, n: usize) -> BTreeSet<String> {
    let words = normalize_query(q);
    if words.is_empty() {
        return BTreeSet::new();
    }
    if words.len() < n {
        return BTreeSet::from([words.join(" ")]);
    }
    words.windows(n).map(|w| w.join(" ")).collect()
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counting as identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    ratio(inter, a.len() + b.len() - inter)
}

fn ratio(inter: usize, union: usize) -> f64 {
    inter as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub dropped_id: String,
    pub kept_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MixtureError {
    #[error("jaccard threshold must be in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error("shingle length must be at least 1")]
    BadShingleLen,
    #[error("target fraction for {tag} is {fraction}, outside [0, 1]")]
    BadFraction { tag: SourceTag, fraction: f64 },
    #[error("target fractions sum to {0}, not 1")]
    BadSum(f64),
    #[error("pool {tag} has {have} record(s), {need} needed")]
    InsufficientPool { tag: SourceTag, have: usize, need: usize },
    #[error("shard spec needs at least one worker and a positive interleave block")]
    BadShardSpec,
}

/// Greedy first-wins near-duplicate removal in corpus order. A record is
/// dropped when its shingle set is at least `threshold`-similar to some
/// kept record; the report names the most similar kept record (the
/// earliest on ties).
pub fn dedup<R: CorpusRecord + Clone>(
    corpus: &[R],
    threshold: f64,
    shingle_len: usize,
) -> Result<(Vec<R>, Vec<DropRecord>), MixtureError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(MixtureError::BadThreshold(threshold));
    }
    if shingle_len == 0 {
        return Err(MixtureError::BadShingleLen);
    }
    let mut kept: Vec<R> = Vec::new();
    let mut kept_sizes: Vec<usize> = Vec::new();
    let mut index: HashMap<String, Vec<usize>> = HashMap::new();
    let mut empty_kept: Option<usize> = None;
    let mut drops = Vec::new();

    for rec in corpus {
        let set = shingles(rec.query(), shingle_len);
        let mut best: Option<(usize, f64)> = None;
        if set.is_empty() {
            best = empty_kept.map(|k| (k, 1.0));
        } else {
            let mut inter: HashMap<usize, usize> = HashMap::new();
            for s in &set {
                for &k in index.get(s).into_iter().flatten() {
                    *inter.entry(k).or_default() += 1;
                }
            }
            for (k, n) in inter {
                let sim = ratio(n, set.len() + kept_sizes[k] - n);
                let better = match best {
                    None => true,
                    Some((bk, bs)) => sim > bs || (sim == bs && k < bk),
                };
                if better {
                    best = Some((k, sim));
                }
            }
        }
        match best {
            Some((k, sim)) if sim >= threshold => drops.push(DropRecord {
                dropped_id: rec.id().to_string(),
                kept_id: kept[k].id().to_string(),
                similarity: sim,
            }),
            _ => {
                let k = kept.len();
                if set.is_empty() {
                    empty_kept.get_or_insert(k);
                }
                for s in &set {
                    index.entry(s.clone()).or_default().push(k);
                }
                kept_sizes.push(set.len());
                kept.push(rec.clone());
            }
        }
    }
    Ok((kept, drops))
}

/// Drops records whose source is in `excluded` (e.g. sources whose
/// license does not permit the intended use). Order is kept.
pub fn exclude_sources(records: Vec<TaggedRecord>, excluded: &[SourceTag]) -> Vec<TaggedRecord> {
    records.into_iter().filter(|r| !excluded.contains(&r.source)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixturePlan {
    pub targets: BTreeMap<SourceTag, f64>,
    pub total: usize,
    #[serde(default)]
    pub seed: u64,
}

impl MixturePlan {
    /// Per-tag counts: `round(total * fraction)`, with the difference to
    /// `total` added to the tag with the largest fraction (the first such
    /// tag on ties).
    pub fn counts(&self) -> Result<BTreeMap<SourceTag, usize>, MixtureError> {
        let mut sum = 0.0;
        for (&tag, &fraction) in &self.targets {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(MixtureError::BadFraction { tag, fraction });
            }
            sum += fraction;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MixtureError::BadSum(sum));
        }
        let mut counts: BTreeMap<SourceTag, i64> = self
            .targets
            .iter()
            .map(|(&t, &f)| (t, (self.total as f64 * f).round() as i64))
            .collect();
        let residue = self.total as i64 - counts.values().sum::<i64>();
        let largest = self
            .targets
            .iter()
            .fold(None::<(SourceTag, f64)>, |best, (&t, &f)| match best {
                Some((_, bf)) if bf >= f => best,
                _ => Some((t, f)),
            });
        if let Some((t, _)) = largest {
            *counts.get_mut(&t).expect("tag present") += residue;
        }
        Ok(counts.into_iter().map(|(t, c)| (t, c.max(0) as usize)).collect())
    }
}

/// Samples each pool without replacement: the pool is shuffled with a
/// tag-specific seed and the first `count` records are taken. Output is
/// grouped by tag in tag order.
pub fn plan_mixture(
    pools: &BTreeMap<SourceTag, Vec<Trajectory>>,
    plan: &MixturePlan,
) -> Result<Vec<TaggedRecord>, MixtureError> {
    let counts = plan.counts()?;
    let mut out = Vec::with_capacity(plan.total);
    for (&tag, &need) in &counts {
        let pool = pools.get(&tag).map(Vec::as_slice).unwrap_or(&[]);
        if pool.len() < need {
            return Err(MixtureError::InsufficientPool {
                tag,
                have: pool.len(),
                need,
            });
        }
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        SplitMix64::new(mix(plan.seed, fnv1a64(tag.as_str().as_bytes()))).shuffle(&mut idx);
        out.extend(idx[..need].iter().map(|&i| TaggedRecord {
            source: tag,
            record: pool[i].clone(),
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShardSpec {
    pub num_workers: usize,
    pub base_seed: u64,
    pub interleave_block: usize,
}

impl Default for ShardSpec {
    fn default() -> Self {
        Self {
            num_workers: 1,
            base_seed: 0,
            interleave_block: 1,
        }
    }
}

impl ShardSpec {
    pub fn worker_of(&self, id: &str) -> usize {
        (fnv1a64(id.as_bytes()) % self.num_workers as u64) as usize
    }

    pub fn worker_seed(&self, worker: usize) -> u64 {
        mix(self.base_seed, worker as u64)
    }
}

/// Round-robin over sources (in tag order), taking up to `block` records
/// from each in turn. Order within a source is kept.
pub fn interleave(records: Vec<TaggedRecord>, block: usize) -> Vec<TaggedRecord> {
    let total = records.len();
    let mut queues: BTreeMap<SourceTag, std::collections::VecDeque<TaggedRecord>> = BTreeMap::new();
    for r in records {
        queues.entry(r.source).or_default().push_back(r);
    }
    let mut out = Vec::with_capacity(total);
    while out.len() < total {
        for q in queues.values_mut() {
            for _ in 0..block {
                match q.pop_front() {
                    Some(r) => out.push(r),
                    None => break,
                }
            }
        }
    }
    out
}

/// Splits `corpus` into `num_workers` shards.
pub fn shard(corpus: &[TaggedRecord], spec: &ShardSpec) -> Result<Vec<Vec<TaggedRecord>>, MixtureError> {
    if spec.num_workers == 0 || spec.interleave_block == 0 {
        return Err(MixtureError::BadShardSpec);
    }
    let mut shards: Vec<Vec<TaggedRecord>> = vec![Vec::new(); spec.num_workers];
    for r in corpus {
        shards[spec.worker_of(r.id())].push(r.clone());
    }
    Ok(shards
        .into_iter()
        .enumerate()
        .map(|(w, mut s)| {
            SplitMix64::new(spec.worker_seed(w)).shuffle(&mut s);
            interleave(s, spec.interleave_block)
        })
        .collect())
}

pub fn shard_file_name(worker: usize) -> String {
    format!("shard-{worker:05}.jsonl")
}

/// Writes one JSON-lines file per shard into `dir` and returns the paths.
pub fn write_shards(dir: &Path, shards: &[Vec<TaggedRecord>]) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    shards
        .iter()
        .enumerate()
        .map(|(w, s)| {
            let path = dir.join(shard_file_name(w));
            let mut text = String::new();
            for r in s {
                text.push_str(&r.to_json_line());
                text.push('\n');
            }
            std::fs::write(&path, text)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(id: &str, query: &str) -> Trajectory {
        Trajectory::new(id, query)
    }

    fn tagged(n: usize) -> Vec<TaggedRecord> {
        (0..n)
            .map(|i| TaggedRecord {
                source: SourceTag::ALL[i % 3],
                record: traj(&format!("r{i}"), "q"),
            })
            .collect()
    }

    fn ids(rs: &[TaggedRecord]) -> Vec<String> {
        rs.iter().map(|r| r.id().to_string()).collect()
    }

    #[test]
    fn exclusion_keeps_order() {
        let kept = exclude_sources(tagged(6), &[SourceTag::SyntheticFc]);
        assert_eq!(ids(&kept), ["r0", "r2", "r3", "r5"]);
    }

    #[test]
    fn shingles_and_jaccard() {
        let a = shingles("What is the weather in Palo Alto today?", 3);
        let b = shingles("What's the weather in Palo Alto right now?", 3);
        assert_eq!(a.len(), 6);
        assert_eq!(b.len(), 6);
        assert_eq!(jaccard(&a, &b), 3.0 / 9.0);
        assert_eq!(shingles("Hi there", 3), BTreeSet::from(["hi there".to_string()]));
        assert!(shingles("?!", 3).is_empty());
    }

    #[test]
    fn dedup_examples() {
        let corpus = vec![
            traj("a", "What is the weather in Palo Alto today?"),
            traj("b", "What is the weather in Palo Alto today?"),
            traj("c", "What's the weather in Palo Alto right now?"),
        ];
        let (kept, drops) = dedup(&corpus, 0.9, 3).unwrap();
        assert_eq!(kept.iter().map(|t| t.id()).collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(
            drops,
            [DropRecord {
                dropped_id: "b".into(),
                kept_id: "a".into(),
                similarity: 1.0
            }]
        );
        assert!(dedup(&corpus, 0.0, 3).is_err());
        assert!(dedup(&corpus, 0.5, 0).is_err());
    }

    #[test]
    fn dedup_empty_queries() {
        let corpus = vec![traj("a", "!!"), traj("b", ""), traj("c", "hello")];
        let (kept, drops) = dedup(&corpus, 0.9, 3).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(drops[0].kept_id, "a");
    }

    #[test]
    fn counts_follow_rounding_rule() {
        let plan = |targets: &[(SourceTag, f64)], total| MixturePlan {
            targets: targets.iter().copied().collect(),
            total,
            seed: 0,
        };
        use SourceTag::*;
        let c = plan(&[(GeneralInstruct, 0.25), (SyntheticFc, 0.5), (AgentCleaned, 0.25)], 10_000)
            .counts()
            .unwrap();
        assert_eq!((c[&GeneralInstruct], c[&SyntheticFc], c[&AgentCleaned]), (2500, 5000, 2500));
        let third = 1.0 / 3.0;
        let c = plan(&[(AgentCleaned, third), (SyntheticFc, third), (GeneralInstruct, third)], 3)
            .counts()
            .unwrap();
        assert!(c.values().all(|&n| n == 1));
        let c = plan(&[(AgentCleaned, 0.33), (SyntheticFc, 0.33), (GeneralInstruct, 0.34)], 10)
            .counts()
            .unwrap();
        assert_eq!((c[&AgentCleaned], c[&SyntheticFc], c[&GeneralInstruct]), (3, 3, 4));
        assert!(plan(&[(AgentCleaned, 0.5)], 10).counts().is_err());
        assert!(plan(&[(AgentCleaned, 1.5), (SyntheticFc, -0.5)], 10).counts().is_err());
    }

    #[test]
    fn mixture_samples_deterministically() {
        let pool = |tag: &str, n: usize| (0..n).map(|i| traj(&format!("{tag}{i}"), "q")).collect::<Vec<_>>();
        let pools = BTreeMap::from([
            (SourceTag::AgentCleaned, pool("a", 50)),
            (SourceTag::SyntheticFc, pool("s", 50)),
        ]);
        let plan = MixturePlan {
            targets: BTreeMap::from([(SourceTag::AgentCleaned, 0.4), (SourceTag::SyntheticFc, 0.6)]),
            total: 50,
            seed: 3,
        };
        let a = plan_mixture(&pools, &plan).unwrap();
        assert_eq!(a, plan_mixture(&pools, &plan).unwrap());
        assert_eq!(a.iter().filter(|r| r.source == SourceTag::AgentCleaned).count(), 20);
        let unique: BTreeSet<_> = ids(&a).into_iter().collect();
        assert_eq!(unique.len(), 50);
        let too_many = MixturePlan { total: 100, ..plan };
        assert!(matches!(
            plan_mixture(&pools, &too_many),
            Err(MixtureError::InsufficientPool { need: 60, .. })
        ));
    }

    #[test]
    fn single_worker_is_a_seeded_shuffle() {
        let corpus: Vec<_> = tagged(30).into_iter().filter(|r| r.source == SourceTag::SyntheticFc).collect();
        let spec = ShardSpec {
            num_workers: 1,
            base_seed: 9,
            interleave_block: 4,
        };
        let shards = shard(&corpus, &spec).unwrap();
        let mut expected = corpus.clone();
        SplitMix64::new(mix(9, 0)).shuffle(&mut expected);
        assert_eq!(shards, [expected]);
    }

    #[test]
    fn interleave_blocks() {
        let mut rs = tagged(9);
        rs.sort_by_key(|r| r.source);
        let out = interleave(rs, 2);
        let tags: Vec<_> = out.iter().map(|r| r.source as u8).collect();
        assert_eq!(tags, [0, 0, 1, 1, 2, 2, 0, 1, 2]);
    }

    #[test]
    fn shards_partition_and_diverge() {
        let corpus = tagged(400);
        let spec = ShardSpec {
            num_workers: 4,
            base_seed: 1,
            interleave_block: 3,
        };
        let shards = shard(&corpus, &spec).unwrap();
        assert_eq!(shards, shard(&corpus, &spec).unwrap());
        let mut all: Vec<String> = shards.iter().flat_map(|s| ids(s)).collect();
        let mut input = ids(&corpus);
        all.sort();
        input.sort();
        assert_eq!(all, input);
        assert!(shard(&corpus, &ShardSpec { num_workers: 0, ..spec }).is_err());
    }
}
