use std::collections::HashMap;

use super::{Finding, FindingCode};
use crate::model::Trajectory;

pub const DEFAULT_MAX_NGRAM_REPEAT: usize = 3;
pub const DEFAULT_MAX_DUP_STEPS: usize = 2;

const NGRAM: usize = 4;

/// Highest occurrence count of any word 4-gram in `text` (case-folded).
pub fn max_ngram_count(text: &str) -> usize {
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    for w in words.windows(NGRAM) {
        *counts.entry(w).or_default() += 1;
    }
    counts.into_values().max().unwrap_or(0)
}

/// Flags thoughts with a 4-gram repeated more than `max_ngram_repeat`
/// times, and runs of more than `max_dup_steps` consecutive steps with the
/// same thought and calls. Steps with neither thought nor calls never
/// count as duplicates.
pub fn check_repetition(t: &Trajectory, max_ngram_repeat: usize, max_dup_steps: usize) -> Vec<Finding> {
    let mut findings = Vec::new();
    for (i, step) in t.steps.iter().enumerate() {
        let n = max_ngram_count(&step.thought);
        if n > max_ngram_repeat {
            findings.push(
                Finding::new(
                    FindingCode::RepetitiveContent,
                    format!("steps[{i}].thought"),
                    format!("a word 4-gram occurs {n} times (limit {max_ngram_repeat})"),
                )
                .at_step(step.step_id),
            );
        }
    }

    let mut run = 1;
    for i in 1..t.steps.len() {
        let (a, b) = (&t.steps[i - 1], &t.steps[i]);
        let substantive = !b.thought.is_empty() || !b.tool_calls.is_empty();
        if substantive && a.thought == b.thought && a.tool_calls == b.tool_calls {
            run += 1;
            if run == max_dup_steps + 1 {
                findings.push(
                    Finding::new(
                        FindingCode::RepetitiveContent,
                        format!("steps[{i}]"),
                        format!("more than {max_dup_steps} consecutive identical steps"),
                    )
                    .at_step(b.step_id),
                );
            }
        } else {
            run = 1;
        }
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Step, ToolCall};

    fn with_thoughts(thoughts: &[&str]) -> Trajectory {
        let mut t = Trajectory::new("r", "q");
        for (i, th) in thoughts.iter().enumerate() {
            let mut s = Step::new(i as i64 + 1);
            s.thought = th.to_string();
            t.steps.push(s);
        }
        t
    }

    #[test]
    fn repeated_words() {
        // nine words give six windows, all "go go go go"
        assert_eq!(max_ngram_count("go go go go go go go go go"), 6);
        let t = with_thoughts(&["go go go go go go go go go"]);
        assert_eq!(check_repetition(&t, 3, 2).len(), 1);
        assert!(check_repetition(&t, 6, 2).is_empty());
    }

    #[test]
    fn varied_steps_are_fine() {
        let t = with_thoughts(&["look up the weather", "now book the flight", "done"]);
        assert!(check_repetition(&t, 3, 2).is_empty());
    }

    #[test]
    fn duplicate_runs() {
        let mut t = with_thoughts(&["retry", "retry", "retry"]);
        for s in &mut t.steps {
            s.tool_calls.push(ToolCall::new("f"));
        }
        let f = check_repetition(&t, 3, 2);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].path, "steps[2]");
        assert_eq!(f[0].step_id, 3);
        assert!(check_repetition(&t, 3, 3).is_empty());
        let four = with_thoughts(&["x", "x", "x", "x"]);
        assert_eq!(check_repetition(&four, 3, 2).len(), 1);
    }

    #[test]
    fn empty_steps_do_not_count() {
        let mut t = with_thoughts(&["", "", ""]);
        for s in &mut t.steps {
            s.user_input = "more".into();
        }
        assert!(check_repetition(&t, 3, 2).is_empty());
    }
}
