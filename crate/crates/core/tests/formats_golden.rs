//! The sample files under docs/formats/ must be exactly what the writers
//! produce. Set UPDATE_GOLDEN=1 to regenerate them.

use std::path::PathBuf;

use toolcorpus::augment::{convert_output, parse_output, FormatId, StepOutput};
use toolcorpus::model::ToolCall;
use toolcorpus::value::Value;

fn docs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs")
}

fn sample() -> StepOutput {
    StepOutput::new(
        "Two lookups: weather first, then \"fire\" news.",
        vec![
            ToolCall::new("get_weather")
                .arg("location", "San Francisco, CA")
                .arg("days", Value::Integer(3))
                .arg("metric", Value::Boolean(true)),
            ToolCall::new("search_news")
                .arg("query", "wildfire\nupdates")
                .arg("radius", Value::Number(2.5))
                .arg("tags", Value::Array(vec![Value::from("fire"), Value::from("local")])),
        ],
    )
}

#[test]
fn samples_match_writers() {
    let x = sample();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(docs().join("formats")).unwrap();
        for f in FormatId::ALL {
            std::fs::write(docs().join("formats").join(format!("{f}.txt")), convert_output(&x, f)).unwrap();
        }
    }
    let guide = std::fs::read_to_string(docs().join("formats.md")).unwrap();
    for f in FormatId::ALL {
        let path = docs().join("formats").join(format!("{f}.txt"));
        let text = convert_output(&x, f);
        let golden = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(text, golden, "{f} sample is stale");
        assert_eq!(parse_output(&golden, f).unwrap(), x, "{f}");
        assert!(guide.contains(&format!("## `{f}`")), "formats.md lacks a section for {f}");
        assert!(guide.contains(&format!("formats/{f}.txt")), "formats.md does not include {f}.txt");
    }
}
