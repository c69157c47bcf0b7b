//! Diversity transforms: order shuffling, the output-format catalog and the
//! instruction-rephrasing hook.

pub mod formats;
mod rephrase;

pub use formats::{
    convert_output, format_instruction, parse_output, FormatError, FormatId, StepOutput,
};
pub use rephrase::rephrase_hook;

use serde::{Deserialize, Serialize};

use crate::model::Trajectory;
use crate::render::SectionOrder;
use crate::rng::{fnv1a64, mix, SplitMix64};

/// Which collections to permute, and the seed that fixes every permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ShuffleSpec {
    pub shuffle_tools: bool,
    pub shuffle_tool_fields: bool,
    pub shuffle_params: bool,
    pub shuffle_tool_calls: bool,
    pub shuffle_sections: bool,
    pub seed: u64,
}

impl ShuffleSpec {
    pub fn none(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Turns on one level by name: `tools`, `fields`, `params`, `calls`,
    /// `sections` or `all`.
    pub fn enable(&mut self, level: &str) -> Result<(), String> {
        match level {
            "tools" => self.shuffle_tools = true,
            "fields" => self.shuffle_tool_fields = true,
            "params" => self.shuffle_params = true,
            "calls" => self.shuffle_tool_calls = true,
            "sections" => self.shuffle_sections = true,
            "all" => *self = Self::all(self.seed),
            other => return Err(format!("unknown shuffle level {other:?}")),
        }
        Ok(())
    }

    pub fn all(seed: u64) -> Self {
        Self {
            shuffle_tools: true,
            shuffle_tool_fields: true,
            shuffle_params: true,
            shuffle_tool_calls: true,
            shuffle_sections: true,
            seed,
        }
    }
}

// Stream tags: each shuffled level draws from its own generator so that
// enabling one level never changes the permutation chosen for another.
const STREAM_SECTIONS: u64 = 1;
const STREAM_TOOLS: u64 = 2;
const STREAM_TOOL_FIELDS: u64 = 3;
const STREAM_PARAMS: u64 = 4;
const STREAM_CALLS: u64 = 5;

fn stream(seed: u64, tag: u64) -> SplitMix64 {
    SplitMix64::new(mix(seed, tag))
}

/// Seed for one trajectory under a run-wide base seed.
pub fn trajectory_seed(base_seed: u64, trajectory_id: &str) -> u64 {
    mix(base_seed, fnv1a64(trajectory_id.as_bytes()))
}

/// Applies the enabled permutations. Only orders change; every tool,
/// parameter, call and section is kept exactly once.
pub fn shuffle(t: &Trajectory, spec: &ShuffleSpec) -> (Trajectory, SectionOrder) {
    let mut out = t.clone();
    let mut order = SectionOrder::default();

    if spec.shuffle_sections {
        stream(spec.seed, STREAM_SECTIONS).shuffle(&mut order.0);
    }

    let mut tool_lists: Vec<&mut Vec<crate::model::ToolSpec>> = vec![&mut out.tools];
    for ex in &mut out.few_shot_examples {
        tool_lists.push(&mut ex.tools);
    }
    let mut tools_rng = stream(spec.seed, STREAM_TOOLS);
    let mut fields_rng = stream(spec.seed, STREAM_TOOL_FIELDS);
    let mut params_rng = stream(spec.seed, STREAM_PARAMS);
    for tools in tool_lists {
        if spec.shuffle_tools {
            tools_rng.shuffle(tools);
        }
        for tool in tools.iter_mut() {
            if spec.shuffle_tool_fields {
                fields_rng.shuffle(&mut tool.field_order);
            }
            if spec.shuffle_params {
                params_rng.shuffle(&mut tool.parameters);
            }
        }
    }

    if spec.shuffle_tool_calls {
        let mut calls_rng = stream(spec.seed, STREAM_CALLS);
        let steps = out
            .steps
            .iter_mut()
            .chain(out.few_shot_examples.iter_mut().flat_map(|ex| ex.steps.iter_mut()));
        for step in steps {
            calls_rng.shuffle(&mut step.tool_calls);
        }
    }

    (out, order)
}

/// Settings for producing augmented copies of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSpec {
    pub seed: u64,
    /// Levels to shuffle. Its own `seed` is ignored; every variant gets a
    /// derived one.
    pub shuffle: ShuffleSpec,
    /// Output formats to draw from, uniformly per variant.
    pub formats: Vec<FormatId>,
    pub variants_per_input: usize,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            shuffle: ShuffleSpec::none(0),
            formats: vec![FormatId::JsonCompact],
            variants_per_input: 1,
        }
    }
}

/// One augmented copy: the shuffled trajectory with the format and section
/// order it should be rendered in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub source_id: String,
    pub variant: usize,
    pub seed: u64,
    pub format: FormatId,
    pub section_order: SectionOrder,
    /// Id is `{source_id}~{variant}`.
    pub record: Trajectory,
}

impl AugmentedRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// `spec.variants_per_input` copies of `t`. Variant `v` uses seed
/// `mix(trajectory_seed(spec.seed, id), v)` for both the format draw and
/// the shuffles. Panics if `spec.formats` is empty.
pub fn augment_trajectory(t: &Trajectory, spec: &AugmentSpec) -> Vec<AugmentedRecord> {
    assert!(!spec.formats.is_empty(), "augment spec needs at least one format");
    let base = trajectory_seed(spec.seed, &t.unique_trajectory_id);
    (0..spec.variants_per_input)
        .map(|v| {
            let seed = mix(base, v as u64);
            let format = spec.formats[SplitMix64::new(seed).below(spec.formats.len() as u64) as usize];
            let (mut record, section_order) = shuffle(t, &ShuffleSpec { seed, ..spec.shuffle });
            record.unique_trajectory_id = format!("{}~{v}", t.unique_trajectory_id);
            AugmentedRecord {
                source_id: t.unique_trajectory_id.clone(),
                variant: v,
                seed,
                format,
                section_order,
                record,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParamSpec, ParamType, Step, ToolCall, ToolSpec};

    fn ten_tools() -> Trajectory {
        let mut t = Trajectory::new("t", "q");
        for i in 0..10 {
            t.tools.push(
                ToolSpec::new(format!("tool_{i}"), "d")
                    .with_param(ParamSpec::new("a", ParamType::String, true))
                    .with_param(ParamSpec::new("b", ParamType::Integer, false))
                    .with_param(ParamSpec::new("c", ParamType::Boolean, false)),
            );
        }
        let mut step = Step::new(1);
        step.tool_calls = (0..4).map(|i| ToolCall::new(format!("tool_{i}"))).collect();
        t.steps.push(step);
        t
    }

    fn names(t: &Trajectory) -> Vec<String> {
        t.tools.iter().map(|x| x.name.clone()).collect()
    }

    #[test]
    fn enable_by_name() {
        let mut spec = ShuffleSpec::none(1);
        spec.enable("params").unwrap();
        assert!(spec.shuffle_params && !spec.shuffle_tools);
        spec.enable("all").unwrap();
        assert_eq!(spec, ShuffleSpec::all(1));
        assert!(spec.enable("rows").is_err());
    }

    #[test]
    fn augmented_variants() {
        let t = ten_tools();
        let spec = AugmentSpec {
            seed: 4,
            shuffle: ShuffleSpec::all(0),
            formats: FormatId::ALL.to_vec(),
            variants_per_input: 3,
        };
        let out = augment_trajectory(&t, &spec);
        assert_eq!(out, augment_trajectory(&t, &spec));
        assert_eq!(out.len(), 3);
        assert_eq!(out[2].record.unique_trajectory_id, "t~2");
        assert_ne!(out[0].seed, out[1].seed);
        assert_ne!(names(&out[0].record), names(&out[1].record));
    }

    #[test]
    fn disabled_spec_is_identity() {
        let t = ten_tools();
        let (out, order) = shuffle(&t, &ShuffleSpec::none(5));
        assert_eq!(out, t);
        assert_eq!(order, SectionOrder::default());
    }

    #[test]
    fn same_seed_same_permutation() {
        let t = ten_tools();
        let a = shuffle(&t, &ShuffleSpec::all(11));
        let b = shuffle(&t, &ShuffleSpec::all(11));
        assert_eq!(a, b);
        assert_eq!(a.0.to_json_line(), b.0.to_json_line());
    }

    #[test]
    fn multisets_are_preserved() {
        let t = ten_tools();
        let (out, order) = shuffle(&t, &ShuffleSpec::all(3));
        let mut before = names(&t);
        let mut after = names(&out);
        before.sort();
        after.sort();
        assert_eq!(before, after);
        for tool in &out.tools {
            let mut fields = tool.field_order.to_vec();
            fields.sort();
            assert_eq!(fields, crate::model::ToolField::DECLARED_ORDER.to_vec());
            let mut params: Vec<_> = tool.parameters.iter().map(|p| p.name.as_str()).collect();
            params.sort();
            assert_eq!(params, ["a", "b", "c"]);
        }
        let mut calls: Vec<_> = out.steps[0].tool_calls.iter().map(|c| c.name.clone()).collect();
        calls.sort();
        assert_eq!(calls, ["tool_0", "tool_1", "tool_2", "tool_3"]);
        let mut sections = order.0.to_vec();
        sections.sort();
        let mut default = SectionOrder::default().0.to_vec();
        default.sort();
        assert_eq!(sections, default);
    }

    #[test]
    fn levels_draw_from_independent_streams() {
        let t = ten_tools();
        let tools_only = ShuffleSpec {
            shuffle_tools: true,
            ..ShuffleSpec::none(8)
        };
        let (a, _) = shuffle(&t, &tools_only);
        let (b, _) = shuffle(&t, &ShuffleSpec::all(8));
        assert_eq!(names(&a), names(&b));
    }

    #[test]
    fn adjacent_seeds_rarely_collide() {
        let t = ten_tools();
        let spec = |seed| ShuffleSpec {
            shuffle_tools: true,
            ..ShuffleSpec::none(seed)
        };
        let collisions = (0..1000u64)
            .filter(|&s| names(&shuffle(&t, &spec(s)).0) == names(&shuffle(&t, &spec(s + 1)).0))
            .count();
        assert!(collisions <= 50, "{collisions} collisions in 1000 seed pairs");
    }
}
