//! Prompt/target rendering.
//!
//! A training pair is built from one step of a trajectory: the prompt holds
//! the sections of the trajectory (instruction, tools, format instruction,
//! few-shot examples, query and the steps before the target step), the
//! target is the target step's thought and calls in one output format.
//!
//! Layout rules:
//!
//! - sections appear in the given [`SectionOrder`]; empty sections are
//!   left out entirely,
//! - each section is wrapped in its boundary lines for the chosen
//!   [`ConcatStyle`],
//! - exactly one blank line separates sections and the prompt ends with a
//!   newline,
//! - tools, few-shot examples and history steps are indented JSON in the
//!   unified record shape, whatever the output format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::{self, convert_output, format_instruction, FormatId, ShuffleSpec, StepOutput};
use crate::literal;
use crate::model::{FewShotExample, Step, ToolSpec, Trajectory};
use crate::rng::{mix, SplitMix64};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    TaskInstruction,
    AvailableTools,
    FormatInstruction,
    FewShotExamples,
    Query,
    HistorySteps,
}

impl Section {
    pub const ALL: [Section; 6] = [
        Section::TaskInstruction,
        Section::AvailableTools,
        Section::FormatInstruction,
        Section::FewShotExamples,
        Section::Query,
        Section::HistorySteps,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::TaskInstruction => "task_instruction",
            Section::AvailableTools => "available_tools",
            Section::FormatInstruction => "format_instruction",
            Section::FewShotExamples => "few_shot_examples",
            Section::Query => "query",
            Section::HistorySteps => "history_steps",
        }
    }

    /// Upper-case title used by the bracket style.
    pub fn title(self) -> &'static str {
        match self {
            Section::TaskInstruction => "TASK INSTRUCTION",
            Section::AvailableTools => "AVAILABLE TOOLS",
            Section::FormatInstruction => "FORMAT INSTRUCTION",
            Section::FewShotExamples => "FEW SHOT EXAMPLES",
            Section::Query => "QUERY",
            Section::HistorySteps => "HISTORY STEPS",
        }
    }

    /// Heading line used by the plain-text style.
    pub fn heading(self) -> &'static str {
        match self {
            Section::TaskInstruction => "Task instruction:",
            Section::AvailableTools => "Available tools:",
            Section::FormatInstruction => "Format instruction:",
            Section::FewShotExamples => "Few-shot examples:",
            Section::Query => "Query:",
            Section::HistorySteps => "History steps:",
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Order of prompt sections. Always a permutation of [`Section::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SectionOrder(pub [Section; 6]);

impl Default for SectionOrder {
    fn default() -> Self {
        SectionOrder(Section::ALL)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("section order must list each of the six sections once")]
pub struct BadSectionOrder;

impl SectionOrder {
    pub fn from_slice(sections: &[Section]) -> Result<Self, BadSectionOrder> {
        let arr: [Section; 6] = sections.try_into().map_err(|_| BadSectionOrder)?;
        let mut sorted = arr;
        sorted.sort();
        if sorted != Section::ALL {
            return Err(BadSectionOrder);
        }
        Ok(SectionOrder(arr))
    }
}

impl Serialize for SectionOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SectionOrder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<Section>::deserialize(d)?;
        SectionOrder::from_slice(&v).map_err(serde::de::Error::custom)
    }
}

/// Section boundary style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcatStyle {
    /// `[BEGIN OF QUERY]` ... `[END OF QUERY]`
    #[default]
    BracketCaps,
    /// `<query>` ... `</query>`
    XmlTags,
    /// A `Query:` heading line.
    PlainText,
}

impl ConcatStyle {
    pub const ALL: [ConcatStyle; 3] = [
        ConcatStyle::BracketCaps,
        ConcatStyle::XmlTags,
        ConcatStyle::PlainText,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConcatStyle::BracketCaps => "bracket_caps",
            ConcatStyle::XmlTags => "xml_tags",
            ConcatStyle::PlainText => "plain_text",
        }
    }

    pub fn open(self, s: Section) -> String {
        match self {
            ConcatStyle::BracketCaps => format!("[BEGIN OF {}]", s.title()),
            ConcatStyle::XmlTags => format!("<{}>", s.as_str()),
            ConcatStyle::PlainText => s.heading().to_string(),
        }
    }

    /// Closing line, if the style has one.
    pub fn close(self, s: Section) -> Option<String> {
        match self {
            ConcatStyle::BracketCaps => Some(format!("[END OF {}]", s.title())),
            ConcatStyle::XmlTags => Some(format!("</{}>", s.as_str())),
            ConcatStyle::PlainText => None,
        }
    }
}

impl fmt::Display for ConcatStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown concatenation style {0:?} (expected bracket_caps, xml_tags or plain_text)")]
pub struct UnknownStyle(pub String);

impl FromStr for ConcatStyle {
    type Err = UnknownStyle;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConcatStyle::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownStyle(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("step_index {step_index} out of range for trajectory {trajectory_id:?} with {steps} step(s)")]
    StepOutOfRange {
        trajectory_id: String,
        step_index: usize,
        steps: usize,
    },
}

/// One training pair with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedExample {
    pub prompt: String,
    pub target: String,
    pub trajectory_id: String,
    /// 1-based index of the target step.
    pub step_index: usize,
    pub style: ConcatStyle,
    pub format: FormatId,
    pub seed: u64,
    pub section_order: SectionOrder,
}

impl RenderedExample {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("rendered example serializes")
    }
}

/// Body text of one section, or `None` when the section is empty.
pub fn section_body(t: &Trajectory, step_index: usize, f: FormatId, s: Section) -> Option<String> {
    let body = match s {
        Section::TaskInstruction => t.task_instruction.clone(),
        Section::AvailableTools if t.tools.is_empty() => return None,
        Section::AvailableTools => literal::pretty(&Value::Array(
            t.tools.iter().map(ToolSpec::to_value).collect(),
        )),
        Section::FormatInstruction => format_instruction(f),
        Section::FewShotExamples if t.few_shot_examples.is_empty() => return None,
        Section::FewShotExamples => literal::pretty(&Value::Array(
            t.few_shot_examples.iter().map(FewShotExample::to_value).collect(),
        )),
        Section::Query => t.query.clone(),
        Section::HistorySteps if step_index <= 1 => return None,
        Section::HistorySteps => literal::pretty(&Value::Array(
            t.steps[..step_index - 1].iter().map(Step::to_value).collect(),
        )),
    };
    (!body.is_empty()).then_some(body)
}

/// Renders the prompt for step `step_index` (1-based) and its target.
pub fn render_example(
    t: &Trajectory,
    step_index: usize,
    style: ConcatStyle,
    f: FormatId,
    order: SectionOrder,
) -> Result<RenderedExample, RenderError> {
    if step_index == 0 || step_index > t.steps.len() {
        return Err(RenderError::StepOutOfRange {
            trajectory_id: t.unique_trajectory_id.clone(),
            step_index,
            steps: t.steps.len(),
        });
    }
    let mut blocks = Vec::new();
    for s in order.0 {
        let Some(body) = section_body(t, step_index, f, s) else {
            continue;
        };
        let mut block = style.open(s);
        block.push('\n');
        block.push_str(&body);
        if let Some(close) = style.close(s) {
            block.push('\n');
            block.push_str(&close);
        }
        blocks.push(block);
    }
    let mut prompt = blocks.join("\n\n");
    prompt.push('\n');

    let step = &t.steps[step_index - 1];
    let target = convert_output(
        &StepOutput::new(step.thought.clone(), step.tool_calls.clone()),
        f,
    );
    Ok(RenderedExample {
        prompt,
        target,
        trajectory_id: t.unique_trajectory_id.clone(),
        step_index,
        style,
        format: f,
        seed: 0,
        section_order: order,
    })
}

/// Sampling policy for corpus rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderPlan {
    /// Styles to sample from, uniformly.
    pub styles: Vec<ConcatStyle>,
    /// Formats to sample from, uniformly.
    pub formats: Vec<FormatId>,
    /// Independent renderings of every trajectory.
    pub variants: usize,
    pub seed: u64,
    /// Which levels to shuffle per variant. The `seed` field here is
    /// ignored; each variant gets its own derived seed.
    pub shuffle: ShuffleSpec,
    /// Render only the last step of each trajectory instead of every step.
    pub last_step_only: bool,
}

impl Default for RenderPlan {
    fn default() -> Self {
        Self {
            styles: vec![ConcatStyle::BracketCaps],
            formats: vec![FormatId::JsonCompact],
            variants: 1,
            seed: 0,
            shuffle: ShuffleSpec::none(0),
            last_step_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("render plan needs at least one style")]
    NoStyles,
    #[error("render plan needs at least one format")]
    NoFormats,
}

impl RenderPlan {
    pub fn check(&self) -> Result<(), PlanError> {
        if self.styles.is_empty() {
            return Err(PlanError::NoStyles);
        }
        if self.formats.is_empty() {
            return Err(PlanError::NoFormats);
        }
        Ok(())
    }

    /// Seed of variant `v` of a trajectory.
    pub fn variant_seed(&self, trajectory_id: &str, v: usize) -> u64 {
        mix(augment::trajectory_seed(self.seed, trajectory_id), v as u64)
    }

    /// All examples of one trajectory, in (variant, step) order.
    pub fn render_trajectory(&self, t: &Trajectory) -> Vec<RenderedExample> {
        let mut out = Vec::new();
        for v in 0..self.variants {
            let seed = self.variant_seed(&t.unique_trajectory_id, v);
            let mut rng = SplitMix64::new(seed);
            let style = self.styles[rng.below(self.styles.len() as u64) as usize];
            let format = self.formats[rng.below(self.formats.len() as u64) as usize];
            let spec = ShuffleSpec { seed, ..self.shuffle };
            let (shuffled, order) = augment::shuffle(t, &spec);
            let first = if self.last_step_only { t.steps.len().max(1) } else { 1 };
            for i in first..=t.steps.len() {
                let mut ex = render_example(&shuffled, i, style, format, order)
                    .expect("step index in range");
                ex.seed = seed;
                out.push(ex);
            }
        }
        out
    }
}

/// Renders every trajectory under `plan`, in corpus order.
pub fn render_corpus<'a>(
    corpus: &'a [Trajectory],
    plan: &'a RenderPlan,
) -> Result<impl Iterator<Item = RenderedExample> + 'a, PlanError> {
    plan.check()?;
    Ok(corpus.iter().flat_map(move |t| plan.render_trajectory(t)))
}

/// Like [`render_corpus`], spread over `workers` threads. The result is
/// identical to the sequential one.
pub fn render_corpus_parallel(
    corpus: &[Trajectory],
    plan: &RenderPlan,
    workers: usize,
) -> Result<Vec<RenderedExample>, PlanError> {
    plan.check()?;
    let chunk = corpus.len().div_ceil(workers.max(1)).max(1);
    let parts: Vec<Vec<RenderedExample>> = std::thread::scope(|scope| {
        let handles: Vec<_> = corpus
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || part.iter().flat_map(|t| plan.render_trajectory(t)).collect())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("render worker panicked"))
            .collect()
    });
    Ok(parts.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::parse_output;
    use crate::model::{ParamSpec, ParamType, ToolCall};

    fn wildfire() -> Trajectory {
        let mut t = Trajectory::new(
            "wildfire",
            "Can you give me the latest information on the wildfires occurring in California?",
        );
        t.task_instruction = "Based on the previous context and API request history, generate an API request or a response as an AI assistant.".into();
        t.tools.push(
            ToolSpec::new("get_fire_info", "Query the latest wildfire information")
                .with_param(
                    ParamSpec::new("location", ParamType::String, true)
                        .with_description("Location of the wildfire."),
                )
                .with_param(
                    ParamSpec::new("radius", ParamType::Number, false)
                        .with_description("The radius (in miles) around the location."),
                ),
        );
        let mut s1 = Step::new(1);
        s1.thought = "Sure, what is the radius (in miles) around the location of the wildfire?".into();
        s1.user_input = "User: Let me think... 50 miles.".into();
        let mut s2 = Step::new(2);
        s2.tool_calls
            .push(ToolCall::new("get_fire_info").arg("location", "California").arg("radius", 50i64));
        t.steps = vec![s1, s2];
        t
    }

    fn strip_boundaries(prompt: &str, style: ConcatStyle) -> String {
        let markers: Vec<String> = Section::ALL
            .iter()
            .flat_map(|&s| [Some(style.open(s)), style.close(s)])
            .flatten()
            .collect();
        prompt
            .lines()
            .filter(|l| !markers.iter().any(|m| m == l))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn first_step_has_no_history() {
        let t = wildfire();
        let ex = render_example(&t, 1, ConcatStyle::BracketCaps, FormatId::JsonCompact, SectionOrder::default()).unwrap();
        assert!(!ex.prompt.contains("HISTORY STEPS"));
        assert!(!ex.prompt.contains("FEW SHOT"));
        assert!(ex.prompt.ends_with("[END OF QUERY]\n"));
        assert!(!ex.prompt.contains("\n\n\n"));
    }

    #[test]
    fn out_of_range_steps_are_rejected() {
        let t = wildfire();
        for i in [0, 3] {
            assert!(render_example(&t, i, ConcatStyle::XmlTags, FormatId::Xml, SectionOrder::default()).is_err());
        }
    }

    #[test]
    fn styles_differ_only_in_boundaries() {
        let t = wildfire();
        let bodies: Vec<String> = ConcatStyle::ALL
            .iter()
            .map(|&style| {
                let ex = render_example(&t, 2, style, FormatId::Yaml, SectionOrder::default()).unwrap();
                strip_boundaries(&ex.prompt, style)
            })
            .collect();
        assert_eq!(bodies[0], bodies[1]);
        assert_eq!(bodies[1], bodies[2]);
    }

    #[test]
    fn section_order_is_followed() {
        let t = wildfire();
        let mut order = SectionOrder::default();
        order.0.reverse();
        let ex = render_example(&t, 2, ConcatStyle::XmlTags, FormatId::JsonCompact, order).unwrap();
        assert!(ex.prompt.starts_with("<history_steps>\n"));
        assert!(ex.prompt.ends_with("</task_instruction>\n"));
    }

    #[test]
    fn section_order_serde_rejects_non_permutations() {
        let json = serde_json::to_string(&SectionOrder::default()).unwrap();
        assert_eq!(serde_json::from_str::<SectionOrder>(&json).unwrap(), SectionOrder::default());
        assert!(serde_json::from_str::<SectionOrder>(r#"["query","query","query","query","query","query"]"#).is_err());
        assert!(serde_json::from_str::<SectionOrder>(r#"["query"]"#).is_err());
    }

    #[test]
    fn corpus_render_is_deterministic_and_parses_back() {
        let corpus: Vec<Trajectory> = (0..20)
            .map(|i| {
                let mut t = wildfire();
                t.unique_trajectory_id = format!("t{i}");
                t
            })
            .collect();
        let plan = RenderPlan {
            styles: ConcatStyle::ALL.to_vec(),
            formats: FormatId::ALL.to_vec(),
            variants: 2,
            seed: 99,
            shuffle: ShuffleSpec::all(0),
            last_step_only: false,
        };
        let a: Vec<_> = render_corpus(&corpus, &plan).unwrap().collect();
        let b = render_corpus_parallel(&corpus, &plan, 4).unwrap();
        assert_eq!(a.len(), 20 * 2 * 2);
        assert_eq!(a, b);
        for ex in &a {
            let parsed = parse_output(&ex.target, ex.format).unwrap();
            let src = &wildfire().steps[ex.step_index - 1];
            assert_eq!(parsed.thought, src.thought);
            assert_eq!(parsed.tool_calls, src.tool_calls);
        }
    }
}
