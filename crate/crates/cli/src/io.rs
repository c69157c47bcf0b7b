use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde_json::Value as Json;

use toolcorpus::ingest::{ingest_corpus, SourceAdapterId};
use toolcorpus::mixture::SourceTag;
use toolcorpus::model::Trajectory;

/// Reads a settings file: JSON when the extension is `.json`, TOML
/// otherwise.
pub fn load_settings<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(anyhow::Error::from)
    } else {
        toml::from_str(&text).map_err(anyhow::Error::from)
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

/// Reads a unified corpus; any bad record is fatal.
pub fn read_unified(path: &Path) -> Result<Vec<Trajectory>> {
    let (corpus, _) = ingest_corpus(path, SourceAdapterId::Unified, true)?;
    Ok(corpus)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}: line {}", path.display(), i + 1)))
        .collect()
}

/// Reads a unified corpus, a shard file or augment output: any line with a
/// `record` field is taken as a wrapped trajectory.
pub fn read_any_corpus(path: &Path) -> Result<Vec<(Option<SourceTag>, Trajectory)>> {
    let mut out = Vec::new();
    for (i, line) in read_jsonl::<Json>(path)?.into_iter().enumerate() {
        if line.get("corpus_header").is_some() {
            continue;
        }
        let ctx = || format!("{}: record {}", path.display(), i + 1);
        let source = line.get("source").and_then(Json::as_str).and_then(|s| s.parse().ok());
        let t = match line.get("record") {
            Some(r) => serde_json::from_value(r.clone()),
            None => serde_json::from_value(line),
        };
        out.push((source, t.with_context(ctx)?));
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    write_text(path, &text)
}
