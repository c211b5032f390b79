//! Scripted completion client for running the pipeline without a model.
//!
//! The "translation" is a fixed text transform of the source snippet:
//! trailing whitespace removed, tabs expanded, blank-line runs collapsed,
//! and a header comment naming the target language. Individual snippets can
//! be scripted to fail by listing a substring of their code as a fault.

use super::client::{CompletionClient, CompletionRequest, CompletionResponse, TransportFailure};
use super::{count_whitespace_tokens, parse_prompt};
use crate::lang::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Completion with no closing delimiter.
    Unterminated,
    /// Empty completion.
    Empty,
    /// Every call fails at the transport level.
    Transport,
}

#[derive(Debug, Clone, Default)]
pub struct FakeCompletionClient {
    registry: Registry,
    faults: Vec<(String, Fault)>,
}

impl FakeCompletionClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// Any prompt whose code contains `needle` triggers `fault`.
    pub fn with_fault(mut self, needle: impl Into<String>, fault: Fault) -> Self {
        self.faults.push((needle.into(), fault));
        self
    }

    pub fn transform(&self, code: &str, src: &str, dst: &str) -> String {
        let comment = self
            .registry
            .info(dst)
            .and_then(|i| i.line_comments.first().copied())
            .unwrap_or("//");
        let mut out = vec![format!("{comment} {dst} translation of a {src} program")];
        let mut blank_run = false;
        for line in code.lines() {
            let line = line.trim_end().replace('\t', "    ");
            if line.is_empty() {
                if !blank_run {
                    out.push(String::new());
                }
                blank_run = true;
            } else {
                blank_run = false;
                out.push(line);
            }
        }
        out.join("\n")
    }
}

impl CompletionClient for FakeCompletionClient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, TransportFailure> {
        let prompt_tokens = count_whitespace_tokens(&request.prompt);
        let Some((code, src, dst)) = parse_prompt(&request.prompt) else {
            return Ok(CompletionResponse {
                text: String::new(),
                prompt_tokens,
                completion_tokens: 0,
            });
        };
        let fault = self
            .faults
            .iter()
            .find(|(needle, _)| code.contains(needle.as_str()))
            .map(|(_, f)| *f);
        let text = match fault {
            Some(Fault::Transport) => return Err(TransportFailure("scripted transport fault".into())),
            Some(Fault::Empty) => String::new(),
            Some(Fault::Unterminated) => self.transform(code, src, dst),
            None => format!("{}\n```\n", self.transform(code, src, dst)),
        };
        let completion_tokens = count_whitespace_tokens(&text).min(request.max_new_tokens);
        Ok(CompletionResponse {
            text,
            prompt_tokens,
            completion_tokens,
        })
    }

    fn model_id(&self) -> &str {
        "fake-template-v1"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_is_deterministic_and_normalizes() {
        let c = FakeCompletionClient::new();
        let out = c.transform("def f():\n\treturn 1   \n\n\n\nprint(f())", "Python", "Ruby");
        assert_eq!(
            out,
            "# Ruby translation of a Python program\ndef f():\n    return 1\n\nprint(f())"
        );
        assert_eq!(out, c.transform("def f():\n\treturn 1   \n\n\n\nprint(f())", "Python", "Ruby"));
    }
}
