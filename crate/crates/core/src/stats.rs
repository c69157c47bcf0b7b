//! Corpus statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mixture::{SourceTag, TaggedRecord};
use crate::model::Trajectory;

/// Counts over a corpus. Distributions map a count (tools offered, calls
/// made) to the number of trajectories with that count.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub trajectories: usize,
    pub steps: usize,
    pub tool_calls: usize,
    pub per_source: BTreeMap<String, usize>,
    pub tool_count_distribution: BTreeMap<usize, usize>,
    pub call_count_distribution: BTreeMap<usize, usize>,
    /// Distinct tools offered per trajectory, averaged.
    pub mean_tools: f64,
    pub mean_steps: f64,
    pub mean_calls: f64,
}

impl CorpusStats {
    pub fn add(&mut self, source: Option<SourceTag>, t: &Trajectory) {
        let calls: usize = t.steps.iter().map(|s| s.tool_calls.len()).sum();
        self.trajectories += 1;
        self.steps += t.steps.len();
        self.tool_calls += calls;
        let source = source.map_or("untagged", SourceTag::as_str);
        *self.per_source.entry(source.to_string()).or_default() += 1;
        *self.tool_count_distribution.entry(t.tools.len()).or_default() += 1;
        *self.call_count_distribution.entry(calls).or_default() += 1;

        let n = self.trajectories as f64;
        let tools: usize = self.tool_count_distribution.iter().map(|(k, v)| k * v).sum();
        self.mean_tools = tools as f64 / n;
        self.mean_steps = self.steps as f64 / n;
        self.mean_calls = self.tool_calls as f64 / n;
    }

    pub fn of_trajectories(corpus: &[Trajectory]) -> Self {
        let mut s = Self::default();
        for t in corpus {
            s.add(None, t);
        }
        s
    }

    pub fn of_tagged(corpus: &[TaggedRecord]) -> Self {
        let mut s = Self::default();
        for r in corpus {
            s.add(Some(r.source), &r.record);
        }
        s
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}
