//! Every output sample in docs/samples/ is regenerated here from the input
//! samples next to it. Set UPDATE_GOLDEN=1 to rewrite them.

use std::path::{Path, PathBuf};
use std::process::Command;

const INPUTS: &[&str] = &[
    "unified.jsonl",
    "faulty.jsonl",
    "flat_call_pairs.jsonl",
    "chat_transcript.jsonl",
    "predictions.jsonl",
    "expectations.jsonl",
    "pipeline.toml",
];

// (sample name, file produced in the work dir)
const OUTPUTS: &[(&str, &str)] = &[
    ("flat_call_pairs.corpus.jsonl", "flat.jsonl"),
    ("ingest-report.json", "flat.jsonl.report.json"),
    ("verify-report.jsonl", "verify.jsonl"),
    ("rendered.jsonl", "rendered.jsonl"),
    ("rendered.manifest.json", "rendered.jsonl.manifest.json"),
    ("stats.json", "stats.json"),
    ("score-reasons.jsonl", "reasons.jsonl"),
    ("score-summary.json", "summary.json"),
    ("shard-00000.jsonl", "mixed/shards/shard-00000.jsonl"),
];

fn samples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/samples")
}

fn run(dir: &Path, args: &[&str], expected: i32) {
    let o = Command::new(env!("CARGO_BIN_EXE_toolcorpus"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(expected), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn samples_are_current() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for f in INPUTS {
        std::fs::copy(samples().join(f), d.join(f)).unwrap();
    }
    run(d, &["ingest", "flat_call_pairs.jsonl", "--adapter", "flat_call_pairs", "-o", "flat.jsonl"], 1);
    run(d, &["ingest", "chat_transcript.jsonl", "--adapter", "chat_transcript", "-o", "chat.jsonl"], 0);
    run(d, &["verify", "faulty.jsonl", "-o", "verify.jsonl"], 1);
    run(d, &["render", "unified.jsonl", "--format", "xml", "--variants", "2", "--seed", "1", "-o", "rendered.jsonl"], 0);
    run(d, &["stats", "chat.jsonl", "-o", "stats.json"], 0);
    run(
        d,
        &["score", "--predictions", "predictions.jsonl", "--expectations", "expectations.jsonl", "-o", "reasons.jsonl", "--summary", "summary.json"],
        0,
    );
    run(d, &["mix", "--input", "agent_cleaned=unified.jsonl", "--input", "synthetic_fc=chat.jsonl", "-o", "mixed"], 0);
    run(d, &["pipeline", "--config", "pipeline.toml"], 0);

    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (sample, produced) in OUTPUTS {
        let got = std::fs::read_to_string(d.join(produced)).unwrap();
        let path = samples().join(sample);
        if update {
            std::fs::write(&path, &got).unwrap();
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(got, want, "{sample} is stale");
    }
}
