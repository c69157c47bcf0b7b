//! Random corpus generators and independent oracles shared by the
//! integration tests. Generation uses the crate's SplitMix64 only as a
//! source of bits; no oracle here calls the code it checks.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use toolcorpus::augment::StepOutput;
use toolcorpus::model::{ParamSpec, ParamType, Step, ToolCall, ToolSpec, Trajectory};
use toolcorpus::rng::SplitMix64;
use toolcorpus::value::{OrderedMap, Value};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn wildfire() -> Trajectory {
    let text = std::fs::read_to_string(fixture("wildfire.jsonl")).unwrap();
    Trajectory::from_json(text.trim_end()).unwrap()
}

pub struct Gen(pub SplitMix64);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(SplitMix64::new(seed))
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.0.below(n as u64) as usize
    }

    pub fn chance(&mut self, num: usize, den: usize) -> bool {
        self.below(den) < num
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }

    pub fn token(&mut self, len: usize) -> String {
        const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
        (0..len).map(|_| *self.pick(ALNUM) as char).collect()
    }

    /// Text drawn from characters that stress every format's escaping.
    pub fn nasty_string(&mut self) -> String {
        const PIECES: &[&str] = &[
            "a", "Z", "0", "7", " ", "  ", "\t", "\n", "\r", "\r\n", "\"", "'", "\\", "/", "<", ">", "&", "&amp;",
            "{", "}", "[", "]", "(", ")", ",", ":", ";", "=", "#", "-", "- ", "* ", "1. ", "|", "`", "```",
            "\"\"\"", "\u{0}", "\u{1b}", "\u{7f}", "é", "ß", "中", "😀", "\u{200b}", "true", "null", "None",
            "-1", "1e5", "NaN", "</thought>", "<call>", "name", "arguments", "%", "$",
        ];
        let n = self.below(9);
        (0..n).map(|_| *self.pick(PIECES)).collect()
    }

    pub fn number(&mut self) -> f64 {
        match self.below(6) {
            0 => 0.5 * (self.below(2001) as f64 - 1000.0),
            1 => f64::INFINITY,
            2 => f64::NEG_INFINITY,
            3 => 1e300,
            4 => -2.5e-300,
            _ => loop {
                let x = f64::from_bits(self.0.next_u64());
                if x.is_finite() {
                    break x;
                }
            },
        }
    }

    pub fn value(&mut self, depth: usize) -> Value {
        let kinds = if depth == 0 { 4 } else { 6 };
        match self.below(kinds) {
            0 => Value::String(self.nasty_string()),
            1 => Value::Integer(match self.below(4) {
                0 => i64::MIN,
                1 => i64::MAX,
                _ => self.below(2001) as i64 - 1000,
            }),
            2 => Value::Number(self.number()),
            3 => Value::Boolean(self.chance(1, 2)),
            4 => Value::Array((0..self.below(4)).map(|_| self.value(depth - 1)).collect()),
            _ => Value::Object(self.object(depth - 1)),
        }
    }

    pub fn object(&mut self, depth: usize) -> OrderedMap<Value> {
        let mut map = OrderedMap::new();
        for _ in 0..self.below(4) {
            let key = self.key();
            if !map.contains_key(&key) {
                let v = self.value(depth);
                map.push(key, v);
            }
        }
        map
    }

    pub fn key(&mut self) -> String {
        if self.chance(2, 3) {
            format!("{}_{}", self.pick(&["location", "radius", "q", "n", "x"]), self.below(10))
        } else {
            self.nasty_string()
        }
    }

    pub fn step_output(&mut self) -> StepOutput {
        let calls = (0..self.below(4))
            .map(|_| {
                let name = if self.chance(3, 4) {
                    format!("{}_{}", self.pick(&["get_weather", "search", "book.flight", "a-b"]), self.below(5))
                } else {
                    self.nasty_string()
                };
                ToolCall {
                    name,
                    arguments: self.object(2),
                }
            })
            .collect();
        StepOutput::new(self.nasty_string(), calls)
    }
}

pub const WORDS: &[&str] = &[
    "paris", "rome", "tokyo", "berlin", "lima", "oslo", "cairo", "delhi", "quito", "seoul", "sunny", "rainy",
    "hotel", "train", "flight", "museum", "pizza", "sushi", "coffee", "books",
];

const TYPES: [ParamType; 5] = [
    ParamType::String,
    ParamType::Integer,
    ParamType::Number,
    ParamType::Boolean,
    ParamType::Array,
];

/// Values a clean trajectory may use; all of them appear in its query.
pub struct Pool {
    pub words: Vec<&'static str>,
    pub ints: Vec<i64>,
    pub floats: Vec<f64>,
}

impl Pool {
    fn draw(&self, g: &mut Gen, t: ParamType) -> Value {
        match t {
            ParamType::String => Value::from(*g.pick(&self.words)),
            ParamType::Integer => Value::Integer(*g.pick(&self.ints)),
            ParamType::Number => Value::Number(*g.pick(&self.floats)),
            ParamType::Boolean => Value::Boolean(g.chance(1, 2)),
            ParamType::Array => Value::Array((0..1 + g.below(3)).map(|_| Value::from(*g.pick(&self.words))).collect()),
            ParamType::Object => unreachable!("not generated"),
        }
    }
}

/// A trajectory the rule-based checks accept: every call names a declared
/// tool, passes every required parameter with the declared type, and takes
/// its values from the query.
pub fn clean_trajectory(g: &mut Gen, id: &str) -> Trajectory {
    let mut words: Vec<&'static str> = WORDS.to_vec();
    g.0.shuffle(&mut words);
    words.truncate(5);
    let pool = Pool {
        words,
        ints: (0..3).map(|_| 1 + g.below(999) as i64).collect(),
        floats: (0..2).map(|_| g.below(1000) as f64 + 0.5).collect(),
    };
    let query = format!(
        "Find {} for {} and {}",
        pool.words.join(" "),
        pool.ints.iter().map(i64::to_string).collect::<Vec<_>>().join(" "),
        pool.floats.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
    );
    let mut t = Trajectory::new(id, query);
    t.task_instruction = "Answer with tool calls.".into();

    for k in 0..1 + g.below(4) {
        let mut tool = ToolSpec::new(format!("tool{k}_{}", g.pick(WORDS)), format!("Tool number {k}"));
        for j in 0..1 + g.below(4) {
            let ty = *g.pick(&TYPES);
            let required = j == 0 || g.chance(1, 2);
            tool.parameters.push(ParamSpec::new(format!("p{j}_{}", ty.as_str()), ty, required));
        }
        t.tools.push(tool);
    }

    let steps = 1 + g.below(3);
    for i in 0..steps {
        let mut step = Step::new(i as i64 + 1);
        step.thought = format!("Step {} looks at {}", i + 1, g.pick(&pool.words));
        let calls = if i + 1 == steps { 1 + g.below(2) } else { g.below(3) };
        for _ in 0..calls {
            let tool = g.pick(&t.tools).clone();
            let mut call = ToolCall::new(tool.name.clone());
            for p in &tool.parameters {
                if p.required || g.chance(1, 2) {
                    call.arguments.push(p.name.clone(), pool.draw(g, p.value_type));
                }
            }
            step.tool_calls.push(call);
        }
        step.next_observation = format!("observation {}", i + 1);
        t.steps.push(step);
    }
    t
}

/// (step index, call index) of every call.
pub fn call_sites(t: &Trajectory) -> Vec<(usize, usize)> {
    t.steps
        .iter()
        .enumerate()
        .flat_map(|(s, step)| (0..step.tool_calls.len()).map(move |c| (s, c)))
        .collect()
}

pub fn call_path(s: usize, c: usize) -> String {
    format!("steps[{s}].tool_calls[{c}]")
}

pub fn spec_of<'a>(t: &'a Trajectory, call: &ToolCall) -> &'a ToolSpec {
    t.tools.iter().find(|x| x.name == call.name).unwrap()
}

// ---------------------------------------------------------------- oracles

/// Case-fold, keep alphanumerics and whitespace, split on whitespace.
pub fn oracle_words(q: &str) -> Vec<String> {
    let mut cleaned = String::new();
    for ch in q.chars() {
        for lower in ch.to_lowercase() {
            if lower.is_alphanumeric() || lower.is_whitespace() {
                cleaned.push(lower);
            }
        }
    }
    cleaned.split_whitespace().map(String::from).collect()
}

/// Word n-shingles as a plain vector without duplicates. A query shorter
/// than n words is one shingle; an empty query has none.
pub fn oracle_shingles(q: &str, n: usize) -> Vec<Vec<String>> {
    let words = oracle_words(q);
    let mut out: Vec<Vec<String>> = Vec::new();
    let mut add = |s: Vec<String>| {
        if !out.contains(&s) {
            out.push(s);
        }
    };
    if words.is_empty() {
    } else if words.len() < n {
        add(words);
    } else {
        for i in 0..=words.len() - n {
            add(words[i..i + n].to_vec());
        }
    }
    out
}

/// |A ∩ B| / |A ∪ B| by pairwise comparison; two empty sets count as equal.
pub fn oracle_jaccard(a: &[Vec<String>], b: &[Vec<String>]) -> f64 {
    let inter = a.iter().filter(|x| b.contains(x)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Structural call equality for calls with exact-typed values.
pub fn oracle_same_call(a: &ToolCall, b: &ToolCall) -> bool {
    let norm = |c: &ToolCall| -> BTreeMap<String, String> {
        c.arguments
            .iter()
            .map(|(k, v)| (k.to_string(), serde_json::to_string(v).unwrap()))
            .collect()
    };
    a.name == b.name && a.arguments.len() == b.arguments.len() && norm(a) == norm(b)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// True when some ordering of `preds` matches `exps` call by call.
pub fn oracle_set_match(preds: &[ToolCall], exps: &[ToolCall]) -> bool {
    preds.len() == exps.len()
        && permutations(preds.len())
            .iter()
            .any(|p| p.iter().enumerate().all(|(i, &j)| oracle_same_call(&preds[j], &exps[i])))
}
