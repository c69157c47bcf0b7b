use crate::judge::{templates, Decision, JudgeClient, JudgeError, JudgeKind, JudgeRequest};

/// Asks the judge for rephrasings of `task_instruction`, then keeps only
/// the candidates the judge accepts on a second, independent check.
///
/// Transport and response errors are returned as-is; there is no fallback
/// to the original text.
pub fn rephrase_hook(task_instruction: &str, client: &JudgeClient) -> Result<Vec<String>, JudgeError> {
    let gen = JudgeRequest::new(
        JudgeKind::RephraseGenerate,
        templates::rephrase_generate(task_instruction),
    );
    let candidates = client.candidates(&gen)?;
    let mut kept = Vec::new();
    for candidate in candidates {
        let check = JudgeRequest::new(
            JudgeKind::RephraseAccept,
            templates::rephrase_accept(task_instruction, &candidate),
        );
        if client.judge(&check)?.decision == Decision::Accept {
            kept.push(candidate);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::{RecordingTransport, TransportConfig};
    use serde_json::json;

    const INSTRUCTION: &str = "Answer the question using the tools.";

    fn mock(second: &str) -> JudgeClient {
        let a = "Use the tools to answer the question.";
        let b = "Reply to the question with the help of the tools.";
        let t = RecordingTransport::new()
            .record(&templates::rephrase_generate(INSTRUCTION), json!({"candidates": [a, b]}))
            .record(&templates::rephrase_accept(INSTRUCTION, a), json!({"decision": "accept"}))
            .record(&templates::rephrase_accept(INSTRUCTION, b), json!({"decision": second}));
        JudgeClient::new(Box::new(t))
    }

    #[test]
    fn accepted_candidates_pass_through() {
        assert_eq!(rephrase_hook(INSTRUCTION, &mock("accept")).unwrap().len(), 2);
    }

    #[test]
    fn rejected_candidates_are_dropped() {
        let kept = rephrase_hook(INSTRUCTION, &mock("reject")).unwrap();
        assert_eq!(kept, ["Use the tools to answer the question."]);
    }

    #[test]
    fn unconfigured_real_client_is_an_error() {
        if std::env::var(crate::judge::ENDPOINT_ENV).is_err() {
            assert!(matches!(
                JudgeClient::from_config(&TransportConfig::Http),
                Err(JudgeError::Configuration(_))
            ));
        }
    }

    #[test]
    fn missing_recording_surfaces() {
        let client = JudgeClient::new(Box::new(RecordingTransport::new()));
        assert!(matches!(
            rephrase_hook(INSTRUCTION, &client),
            Err(JudgeError::MissingRecording { .. })
        ));
    }
}
