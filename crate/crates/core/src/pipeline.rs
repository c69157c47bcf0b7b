//! End-to-end corpus build: ingest, verify, dedup, filter, mix, render,
//! shard. A run is a pure function of the configuration and the input
//! files; the output tree carries a manifest with digests of both.
//!
//! Output tree under `output`:
//!
//! ```text
//! ingest-report.json   one IngestReport per input
//! verify-report.jsonl  one DiagnosticReport per ingested trajectory
//! dedup-report.jsonl   one DropRecord per dropped near-duplicate
//! corpus.jsonl         the mixed corpus, {"source", "record"} per line
//! rendered.jsonl       rendered training examples of the mixed corpus
//! shards/shard-NNNNN.jsonl
//! stats.json
//! manifest.json
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ingest::{ingest_corpus, IngestError, IngestReport, SourceAdapterId};
use crate::judge::{JudgeClient, JudgeError, TransportConfig};
use crate::manifest::Manifest;
use crate::mixture::{
    dedup, exclude_sources, plan_mixture, shard, write_shards, DropRecord, MixtureError, MixturePlan, ShardSpec,
    SourceTag, TaggedRecord, DEFAULT_JACCARD_THRESHOLD, DEFAULT_SHINGLE_LEN,
};
use crate::render::{render_corpus_parallel, PlanError, RenderPlan};
use crate::stats::CorpusStats;
use crate::verify::{verify_corpus, RegistryError, SandboxRegistry, Verifier, VerifyPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub adapter: SourceAdapterId,
    pub source: SourceTag,
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupSpec {
    pub enabled: bool,
    pub threshold: f64,
    pub shingle_len: usize,
}

impl Default for DedupSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            threshold: DEFAULT_JACCARD_THRESHOLD,
            shingle_len: DEFAULT_SHINGLE_LEN,
        }
    }
}

/// Everything a pipeline run depends on besides the input files. Relative
/// paths are resolved against the directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output: PathBuf,
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub verify: VerifyPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sandbox: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge: Option<TransportConfig>,
    #[serde(default)]
    pub dedup: DedupSpec,
    #[serde(default)]
    pub exclude_sources: Vec<SourceTag>,
    /// Without a plan every surviving record is kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixturePlan>,
    #[serde(default)]
    pub render: RenderPlan,
    #[serde(default)]
    pub shard: ShardSpec,
    /// Threads for verification and rendering. Does not affect output.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    4
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Sandbox(#[from] RegistryError),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
    #[error(transparent)]
    Render(#[from] PlanError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a TOML config; returns it with the directory that relative
    /// paths are resolved against.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::ReadConfig {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_toml(&text)?, base))
    }

    /// Canonical serialization, used for the manifest digest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Counts that decide the exit status of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub output: PathBuf,
    pub ingest_rejected: usize,
    pub verify_failed: usize,
    pub deduplicated: usize,
    pub excluded: usize,
    pub stats: CorpusStats,
    pub manifest: Manifest,
}

impl PipelineOutcome {
    /// True when records were dropped for ingest or verification reasons.
    pub fn partial(&self) -> bool {
        self.ingest_rejected > 0 || self.verify_failed > 0
    }
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|source| PipelineError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn lines<T>(items: impl IntoIterator<Item = T>, f: impl Fn(&T) -> String) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&f(&item));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct InputReport<'a> {
    input: String,
    source: SourceTag,
    report: &'a IngestReport,
}

pub fn run_pipeline(config: &PipelineConfig, base: &Path) -> Result<PipelineOutcome, PipelineError> {
    let out_dir = resolve(base, &config.output);
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Write { path, source }
    };
    std::fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let mut manifest = Manifest::new("pipeline", &config.canonical_json());

    // ingest
    let mut tagged = Vec::new();
    let mut reports = Vec::new();
    for input in &config.inputs {
        let path = resolve(base, &input.path);
        let (corpus, report) = ingest_corpus(&path, input.adapter, input.strict)?;
        manifest.add_input(&input.path, &path).map_err(io_err(&path))?;
        log::info!(
            "ingested {}: {} accepted, {} rejected",
            input.path.display(),
            report.accepted,
            report.rejected
        );
        tagged.extend(corpus.into_iter().map(|record| TaggedRecord {
            source: input.source,
            record,
        }));
        reports.push((input, report));
    }
    let ingest_rejected = reports.iter().map(|(_, r)| r.rejected).sum();
    let report_rows: Vec<InputReport> = reports
        .iter()
        .map(|(i, r)| InputReport {
            input: i.path.to_string_lossy().into_owned(),
            source: i.source,
            report: r,
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&report_rows).expect("reports serialize");
    text.push('\n');
    write(&out_dir.join("ingest-report.json"), &text)?;

    // verify
    let sandbox = match &config.sandbox {
        Some(p) => {
            let path = resolve(base, p);
            let reg = SandboxRegistry::load(&path)?;
            manifest.add_input(p, &path).map_err(io_err(&path))?;
            Some(reg)
        }
        None => None,
    };
    let judge = match &config.judge {
        Some(TransportConfig::Mock { recordings }) => {
            let path = resolve(base, recordings);
            manifest.add_input(recordings, &path).map_err(io_err(&path))?;
            Some(JudgeClient::from_config(&TransportConfig::Mock { recordings: path })?)
        }
        Some(other) => Some(JudgeClient::from_config(other)?),
        None => None,
    };
    let verifier = Verifier {
        policy: config.verify.clone(),
        sandbox: sandbox.as_ref(),
        judge: judge.as_ref(),
    };
    let trajectories: Vec<_> = tagged.iter().map(|r| r.record.clone()).collect();
    let verified = verify_corpus(&trajectories, &verifier, config.workers)?;
    write(
        &out_dir.join("verify-report.jsonl"),
        &lines(&verified, |v| v.report.to_json_line()),
    )?;
    let mut verify_failed = 0;
    let mut passed = Vec::with_capacity(tagged.len());
    for (rec, v) in tagged.into_iter().zip(verified) {
        if config.verify.fail_on.fails(&v.report) {
            verify_failed += 1;
            continue;
        }
        let record = if config.verify.apply_repairs { v.repaired } else { rec.record };
        passed.push(TaggedRecord { source: rec.source, record });
    }

    // dedup and filter
    let (kept, drops): (Vec<TaggedRecord>, Vec<DropRecord>) = if config.dedup.enabled {
        dedup(&passed, config.dedup.threshold, config.dedup.shingle_len)?
    } else {
        (passed, Vec::new())
    };
    write(
        &out_dir.join("dedup-report.jsonl"),
        &lines(&drops, |d| serde_json::to_string(d).expect("drop serializes")),
    )?;
    let before = kept.len();
    let kept = exclude_sources(kept, &config.exclude_sources);
    let excluded = before - kept.len();

    // mix
    let mixed = match &config.mixture {
        Some(plan) => {
            let mut pools: BTreeMap<SourceTag, Vec<_>> = BTreeMap::new();
            for r in kept {
                pools.entry(r.source).or_default().push(r.record);
            }
            plan_mixture(&pools, plan)?
        }
        None => kept,
    };
    write(&out_dir.join("corpus.jsonl"), &lines(&mixed, |r| r.to_json_line()))?;

    // render
    let records: Vec<_> = mixed.iter().map(|r| r.record.clone()).collect();
    let rendered = render_corpus_parallel(&records, &config.render, config.workers)?;
    write(&out_dir.join("rendered.jsonl"), &lines(&rendered, |e| e.to_json_line()))?;

    // shard
    let shard_dir = out_dir.join("shards");
    if shard_dir.exists() {
        std::fs::remove_dir_all(&shard_dir).map_err(io_err(&shard_dir))?;
    }
    let shards = shard(&mixed, &config.shard)?;
    write_shards(&shard_dir, &shards).map_err(io_err(&shard_dir))?;

    let stats = CorpusStats::of_tagged(&mixed);
    write(&out_dir.join("stats.json"), &(stats.to_json_pretty() + "\n"))?;

    for name in ["ingest-report.json", "verify-report.jsonl", "dedup-report.jsonl", "corpus.jsonl", "rendered.jsonl"] {
        let p = out_dir.join(name);
        manifest.add_output(&out_dir, &p).map_err(io_err(&p))?;
    }
    manifest.add_output_tree(&out_dir, &shard_dir).map_err(io_err(&shard_dir))?;
    let p = out_dir.join("stats.json");
    manifest.add_output(&out_dir, &p).map_err(io_err(&p))?;
    let p = out_dir.join("manifest.json");
    manifest.write(&p).map_err(io_err(&p))?;

    Ok(PipelineOutcome {
        output: out_dir,
        ingest_rejected,
        verify_failed,
        deduplicated: drops.len(),
        excluded,
        stats,
        manifest,
    })
}
