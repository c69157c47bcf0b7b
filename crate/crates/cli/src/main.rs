//! `toolcorpus` command-line tool.
//!
//! Settings precedence, lowest first: built-in defaults, the settings file
//! (`--policy`, `--plan`, `--config`), explicit flags.
//!
//! Exit codes: 0 success, 1 findings or partial results, 2 fatal error or
//! bad usage.

mod io;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;

use toolcorpus::augment::{augment_trajectory, AugmentSpec, FormatId};
use toolcorpus::fc_match::{score_corpus, Expectation, MatchPolicy, Prediction};
use toolcorpus::ingest::{ingest_corpus, write_corpus, IngestError, SourceAdapterId};
use toolcorpus::judge::{JudgeClient, TransportConfig};
use toolcorpus::manifest::{manifest_path_for, Manifest};
use toolcorpus::mixture::{
    dedup, exclude_sources, plan_mixture, shard, write_shards, MixturePlan, ShardSpec, SourceTag, TaggedRecord,
    DEFAULT_JACCARD_THRESHOLD, DEFAULT_SHINGLE_LEN,
};
use toolcorpus::pipeline::{run_pipeline, PipelineConfig};
use toolcorpus::render::{render_corpus_parallel, ConcatStyle, RenderPlan};
use toolcorpus::stats::CorpusStats;
use toolcorpus::verify::{verify_corpus, FailOn, SandboxRegistry, Verifier, VerifyPolicy};

use crate::io::{load_settings, read_any_corpus, read_jsonl, read_unified, write_lines, write_text};

#[derive(Parser)]
#[command(name = "toolcorpus", version, about = "Build, verify, augment, render and shard function-calling corpora")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert source records into a unified corpus.
    Ingest(IngestArgs),
    /// Check a unified corpus and report findings.
    Verify(VerifyArgs),
    /// Write shuffled, format-tagged copies of a corpus.
    Augment(AugmentArgs),
    /// Render training prompts and targets.
    Render(RenderArgs),
    /// Deduplicate, sample to target ratios and shard.
    Mix(MixArgs),
    /// Score predictions against expected calls.
    Score(ScoreArgs),
    /// Print corpus statistics.
    Stats(StatsArgs),
    /// Run the whole build from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct IngestArgs {
    input: PathBuf,
    /// unified, flat_call_pairs or chat_transcript.
    #[arg(long, default_value = "unified")]
    adapter: SourceAdapterId,
    /// Abort on the first bad record.
    #[arg(long)]
    strict: bool,
    #[arg(short, long)]
    output: PathBuf,
    /// Report file; defaults to <output>.report.json.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    input: PathBuf,
    /// Policy file (TOML or JSON).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Apply type repairs before the remaining checks.
    #[arg(long)]
    repair: bool,
    /// Sandbox registry file (JSON).
    #[arg(long)]
    sandbox: Option<PathBuf>,
    #[arg(long)]
    fail_on: Option<FailOn>,
    /// Judge transport file; escalates ungrounded values.
    #[arg(long)]
    judge: Option<PathBuf>,
    /// Report file, one line per trajectory.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the repaired corpus here.
    #[arg(long)]
    repaired: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    workers: usize,
}

#[derive(Args)]
struct AugmentArgs {
    input: PathBuf,
    /// Augment settings file (TOML or JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma list of tools, fields, params, calls, sections, all.
    #[arg(long, value_delimiter = ',')]
    shuffle: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    formats: Vec<FormatId>,
    #[arg(long)]
    variants_per_input: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    input: PathBuf,
    /// Render plan file (TOML or JSON).
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    style: Vec<ConcatStyle>,
    #[arg(long, value_delimiter = ',')]
    format: Vec<FormatId>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    variants: Option<usize>,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MixArgs {
    /// Source corpus as TAG=PATH; repeatable.
    #[arg(long = "input", required = true)]
    inputs: Vec<String>,
    /// Mixture plan file (TOML or JSON). Without one every record is kept.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    dedup_threshold: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SHINGLE_LEN)]
    shingle_len: usize,
    #[arg(long)]
    no_dedup: bool,
    /// Source tags to drop; repeatable.
    #[arg(long)]
    exclude: Vec<SourceTag>,
    /// Number of shards.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long, default_value_t = 1)]
    interleave_block: usize,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    expectations: PathBuf,
    /// Match policy file (TOML or JSON).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Per-example reasons file.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the summary here; it always goes to stdout.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides `render.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `shard.base_seed`.
    #[arg(long)]
    base_seed: Option<u64>,
    /// Overrides `workers`.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok,
    Partial,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<Status> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Verify(a) => verify(a),
        Command::Augment(a) => augment(a),
        Command::Render(a) => render(a),
        Command::Mix(a) => mix(a),
        Command::Score(a) => score(a),
        Command::Stats(a) => stats(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("settings serialize")
}

fn finish_manifest(mut m: Manifest, outputs: &[&Path], at: &Path) -> Result<()> {
    let root = at.parent().unwrap_or(Path::new(""));
    for o in outputs {
        m.add_output(root, o).with_context(|| format!("reading {}", o.display()))?;
    }
    m.write(at).with_context(|| format!("writing {}", at.display()))
}

fn ingest(a: IngestArgs) -> Result<Status> {
    let (corpus, report) = match ingest_corpus(&a.input, a.adapter, a.strict) {
        Ok(r) => r,
        Err(e @ IngestError::Aborted { .. }) => bail!("{}: {e}", a.input.display()),
        Err(e) => return Err(e.into()),
    };
    write_corpus(&a.output, &corpus).with_context(|| format!("writing {}", a.output.display()))?;
    let report_path = a.report.unwrap_or_else(|| {
        let mut name = a.output.file_name().unwrap_or_default().to_os_string();
        name.push(".report.json");
        a.output.with_file_name(name)
    });
    write_text(&report_path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    log::info!("{} accepted, {} rejected", report.accepted, report.rejected);

    let mut m = Manifest::new("ingest", &to_json(&(a.adapter, a.strict)));
    m.add_input(&a.input, &a.input)?;
    finish_manifest(m, &[&a.output, &report_path], &manifest_path_for(&a.output))?;
    Ok(if report.rejected > 0 { Status::Partial } else { Status::Ok })
}

fn verify(a: VerifyArgs) -> Result<Status> {
    let mut policy: VerifyPolicy = match &a.policy {
        Some(p) => load_settings(p)?,
        None => VerifyPolicy::default(),
    };
    if a.repair {
        policy.apply_repairs = true;
    }
    if let Some(f) = a.fail_on {
        policy.fail_on = f;
    }
    let corpus = read_unified(&a.input)?;
    let sandbox = a.sandbox.as_deref().map(SandboxRegistry::load).transpose()?;
    let judge = match &a.judge {
        Some(p) => {
            let cfg: TransportConfig = load_settings(p)?;
            Some(JudgeClient::from_config(&cfg)?)
        }
        None => None,
    };
    let verifier = Verifier {
        policy: policy.clone(),
        sandbox: sandbox.as_ref(),
        judge: judge.as_ref(),
    };
    let verified = verify_corpus(&corpus, &verifier, a.workers)?;
    write_lines(&a.output, verified.iter().map(|v| v.report.to_json_line()))?;
    let failed = verified.iter().filter(|v| policy.fail_on.fails(&v.report)).count();
    log::info!("{failed} of {} trajectories fail", verified.len());

    let mut outputs = vec![a.output.as_path()];
    if let Some(p) = &a.repaired {
        let repaired: Vec<_> = verified.into_iter().map(|v| v.repaired).collect();
        write_corpus(p, &repaired).with_context(|| format!("writing {}", p.display()))?;
        outputs.push(p);
    }
    let mut m = Manifest::new("verify", &to_json(&policy));
    m.add_input(&a.input, &a.input)?;
    for p in [&a.sandbox, &a.judge].into_iter().flatten() {
        m.add_input(p, p)?;
    }
    finish_manifest(m, &outputs, &manifest_path_for(&a.output))?;
    Ok(if failed > 0 { Status::Partial } else { Status::Ok })
}

fn augment(a: AugmentArgs) -> Result<Status> {
    let mut spec: AugmentSpec = match &a.config {
        Some(p) => load_settings(p)?,
        None => AugmentSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    for level in &a.shuffle {
        spec.shuffle.enable(level).map_err(anyhow::Error::msg)?;
    }
    if !a.formats.is_empty() {
        spec.formats = a.formats;
    }
    if let Some(n) = a.variants_per_input {
        spec.variants_per_input = n;
    }
    if spec.formats.is_empty() {
        bail!("no output formats given");
    }
    let corpus = read_unified(&a.input)?;
    write_lines(
        &a.output,
        corpus
            .iter()
            .flat_map(|t| augment_trajectory(t, &spec))
            .map(|r| r.to_json_line()),
    )?;
    let mut m = Manifest::new("augment", &to_json(&spec));
    m.add_input(&a.input, &a.input)?;
    finish_manifest(m, &[&a.output], &manifest_path_for(&a.output))?;
    Ok(Status::Ok)
}

fn render(a: RenderArgs) -> Result<Status> {
    let mut plan: RenderPlan = match &a.plan {
        Some(p) => load_settings(p)?,
        None => RenderPlan::default(),
    };
    if !a.style.is_empty() {
        plan.styles = a.style;
    }
    if !a.format.is_empty() {
        plan.formats = a.format;
    }
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if let Some(v) = a.variants {
        plan.variants = v;
    }
    let corpus = read_unified(&a.input)?;
    let examples = render_corpus_parallel(&corpus, &plan, a.workers)?;
    write_lines(&a.output, examples.iter().map(|e| e.to_json_line()))?;
    let mut m = Manifest::new("render", &to_json(&plan));
    m.add_input(&a.input, &a.input)?;
    finish_manifest(m, &[&a.output], &manifest_path_for(&a.output))?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct MixSettings<'a> {
    inputs: &'a [String],
    plan: Option<&'a MixturePlan>,
    dedup_threshold: Option<f64>,
    shingle_len: usize,
    exclude: &'a [SourceTag],
    shard: ShardSpec,
}

fn mix(a: MixArgs) -> Result<Status> {
    let plan: Option<MixturePlan> = a.plan.as_deref().map(load_settings).transpose()?;
    let threshold = (!a.no_dedup).then(|| a.dedup_threshold.unwrap_or(DEFAULT_JACCARD_THRESHOLD));
    let spec = ShardSpec {
        num_workers: a.workers,
        base_seed: a.base_seed,
        interleave_block: a.interleave_block,
    };
    let mut m = Manifest::new(
        "mix",
        &to_json(&MixSettings {
            inputs: &a.inputs,
            plan: plan.as_ref(),
            dedup_threshold: threshold,
            shingle_len: a.shingle_len,
            exclude: &a.exclude,
            shard: spec,
        }),
    );

    let mut records = Vec::new();
    for input in &a.inputs {
        let (tag, path) = input
            .split_once('=')
            .with_context(|| format!("--input {input:?} is not TAG=PATH"))?;
        let source: SourceTag = tag.parse().map_err(anyhow::Error::msg)?;
        let path = Path::new(path);
        records.extend(read_unified(path)?.into_iter().map(|record| TaggedRecord { source, record }));
        m.add_input(path, path)?;
    }

    std::fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;
    let (kept, drops) = match threshold {
        Some(t) => dedup(&records, t, a.shingle_len)?,
        None => (records, Vec::new()),
    };
    let dedup_path = a.output.join("dedup-report.jsonl");
    write_lines(&dedup_path, drops.iter().map(|d| serde_json::to_string(d).expect("drop serializes")))?;
    let kept = exclude_sources(kept, &a.exclude);
    let mixed = match &plan {
        Some(plan) => {
            let mut pools: BTreeMap<SourceTag, Vec<_>> = BTreeMap::new();
            for r in kept {
                pools.entry(r.source).or_default().push(r.record);
            }
            plan_mixture(&pools, plan)?
        }
        None => kept,
    };
    let shard_dir = a.output.join("shards");
    if shard_dir.exists() {
        std::fs::remove_dir_all(&shard_dir)?;
    }
    write_shards(&shard_dir, &shard(&mixed, &spec)?)?;
    log::info!("{} records in {} shards, {} near-duplicates dropped", mixed.len(), a.workers, drops.len());

    m.add_output(&a.output, &dedup_path)?;
    m.add_output_tree(&a.output, &shard_dir)?;
    m.write(&a.output.join("manifest.json"))?;
    Ok(Status::Ok)
}

fn score(a: ScoreArgs) -> Result<Status> {
    let policy: MatchPolicy = match &a.policy {
        Some(p) => load_settings(p)?,
        None => MatchPolicy::default(),
    };
    let preds: Vec<Prediction> = read_jsonl(&a.predictions)?;
    let exps: Vec<Expectation> = read_jsonl(&a.expectations)?;
    let (scores, summary) = score_corpus(&preds, &exps, &policy);
    write_lines(&a.output, scores.iter().map(|s| serde_json::to_string(s).expect("score serializes")))?;
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    print!("{text}");
    let mut outputs = vec![a.output.as_path()];
    if let Some(p) = &a.summary {
        write_text(p, &text)?;
        outputs.push(p);
    }
    let mut m = Manifest::new("score", &to_json(&policy));
    m.add_input(&a.predictions, &a.predictions)?;
    m.add_input(&a.expectations, &a.expectations)?;
    finish_manifest(m, &outputs, &manifest_path_for(&a.output))?;
    Ok(Status::Ok)
}

fn stats(a: StatsArgs) -> Result<Status> {
    let mut stats = CorpusStats::default();
    for (source, t) in read_any_corpus(&a.input)? {
        stats.add(source, &t);
    }
    let text = stats.to_json_pretty() + "\n";
    match &a.output {
        Some(p) => {
            write_text(p, &text)?;
            let mut m = Manifest::new("stats", "{}");
            m.add_input(&a.input, &a.input)?;
            finish_manifest(m, &[p], &manifest_path_for(p))?;
        }
        None => print!("{text}"),
    }
    Ok(Status::Ok)
}

fn pipeline(a: PipelineArgs) -> Result<Status> {
    let (mut config, base) = PipelineConfig::load(&a.config)?;
    if let Some(o) = a.output {
        config.output = std::path::absolute(o)?;
    }
    if let Some(s) = a.seed {
        config.render.seed = s;
    }
    if let Some(s) = a.base_seed {
        config.shard.base_seed = s;
    }
    if let Some(w) = a.workers {
        config.workers = w;
    }
    let outcome = run_pipeline(&config, &base)?;
    log::info!(
        "{} records written to {} ({} rejected at ingest, {} failed verification, {} near-duplicates)",
        outcome.stats.trajectories,
        outcome.output.display(),
        outcome.ingest_rejected,
        outcome.verify_failed,
        outcome.deduplicated
    );
    Ok(if outcome.partial() { Status::Partial } else { Status::Ok })
}
