//! Transports for tests and offline runs.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::llm::{ChatRequest, ChatResponse, ChatTransport, TokenLogprob, TopLogprob};
use crate::metrics::Label;

/// Answers every request with a closure.
pub struct FnTransport<F>(pub F);

impl<F> ChatTransport for FnTransport<F>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        (self.0)(request)
    }
}

/// Counts requests reaching the wrapped transport.
pub struct CountingTransport<T> {
    inner: T,
    calls: AtomicUsize,
}

impl<T> CountingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<T: ChatTransport> ChatTransport for CountingTransport<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

/// A deterministic stand-in for a chat model that recognises each prompt
/// this crate sends and answers from lookup tables.
///
/// * Decomposition splits the paragraph into sentences, one atom each.
/// * Revision returns the statement unchanged, or a configured rewrite.
/// * Relation prompts look up `(premise, hypothesis)`; unknown pairs are
///   neutral. With log-probabilities requested, the label token carries the
///   configured confidence and the other two labels share the rest.
/// * Single-prompt assessors look up the statement's label; unknown
///   statements are undecided (false for the True/False prompt).
#[derive(Debug, Clone, Default)]
pub struct ScriptedLlm {
    pub relations: BTreeMap<(String, String), (String, f64)>,
    pub revisions: BTreeMap<String, String>,
    pub verdicts: BTreeMap<String, Label>,
}

fn tail_after<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    text.rfind(marker).map(|i| &text[i + marker.len()..])
}

/// Splits on sentence-final periods, keeping them.
pub fn sentences(paragraph: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = paragraph.chars().collect();
    for (i, &ch) in chars.iter().enumerate() {
        current.push(ch);
        let ends = matches!(ch, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|c| c.is_whitespace());
        if ends {
            let s = current.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            current.clear();
        }
    }
    let s = current.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

impl ScriptedLlm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn relation(mut self, premise: &str, hypothesis: &str, label: &str, p: f64) -> Self {
        self.relations
            .insert((premise.to_string(), hypothesis.to_string()), (label.to_string(), p));
        self
    }

    pub fn revision(mut self, statement: &str, revised: &str) -> Self {
        self.revisions.insert(statement.to_string(), revised.to_string());
        self
    }

    pub fn verdict(mut self, statement: &str, label: Label) -> Self {
        self.verdicts.insert(statement.to_string(), label);
        self
    }

    fn nli(&self, prompt: &str, logprobs: bool) -> Result<ChatResponse> {
        let tail = tail_after(prompt, "\nPremise: ").ok_or_else(|| Error::Transport("bad NLI prompt".into()))?;
        let (premise, rest) = tail
            .split_once("\nHypothesis: ")
            .ok_or_else(|| Error::Transport("bad NLI prompt".into()))?;
        let (hypothesis, _) = rest
            .rsplit_once("\nContext: ")
            .ok_or_else(|| Error::Transport("bad NLI prompt".into()))?;
        let (label, p) = self
            .relations
            .get(&(premise.to_string(), hypothesis.to_string()))
            .cloned()
            .unwrap_or(("neutral".into(), 0.9));
        let mut response = ChatResponse::text(label.clone());
        if logprobs {
            let rest = (1.0 - p) / 2.0;
            let mut alts = vec![TopLogprob {
                token: label.clone(),
                logprob: p.ln(),
            }];
            for other in ["entailment", "contradiction", "neutral"] {
                if other != label {
                    alts.push(TopLogprob {
                        token: other.into(),
                        logprob: rest.ln(),
                    });
                }
            }
            response.logprobs = Some(vec![TokenLogprob {
                token: label,
                logprob: p.ln(),
                top_logprobs: alts,
            }]);
        }
        Ok(response)
    }

    fn label_of(&self, statement: &str) -> Label {
        self.verdicts.get(statement.trim()).copied().unwrap_or(Label::Undecided)
    }
}

impl ChatTransport for ScriptedLlm {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let prompt = request.prompt();
        if let Some(paragraph) = tail_after(prompt, "into independent statements: ") {
            let lines: Vec<String> = sentences(paragraph).into_iter().map(|s| format!("- {s}")).collect();
            return Ok(ChatResponse::text(lines.join("\n")));
        }
        if prompt.ends_with("Standalone:\n") {
            let statement = tail_after(prompt, "\nStatement: ")
                .and_then(|t| t.strip_suffix("\nStandalone:\n"))
                .unwrap_or("");
            let revised = self.revisions.get(statement).map(String::as_str).unwrap_or(statement);
            return Ok(ChatResponse::text(format!("####{revised}####")));
        }
        if prompt.ends_with("Output:") && prompt.contains("\nPremise: ") {
            return self.nli(prompt, request.logprobs);
        }
        if let Some(t) = tail_after(prompt, "\nInput: ") {
            let statement = t.strip_suffix(" True or False?\nOutput:").unwrap_or(t);
            let word = if self.label_of(statement) == Label::Supported {
                "True"
            } else {
                "False"
            };
            return Ok(ChatResponse::text(word));
        }
        let word = |l: Label| match l {
            Label::Supported => "Supported",
            Label::Contradicted => "Contradicted",
            Label::Undecided => "Undecided",
        };
        if let Some(t) = tail_after(prompt, "Your task:\nClaim: ") {
            let statement = t.split("\n\n").next().unwrap_or("");
            return Ok(ChatResponse::text(format!("###{}###", word(self.label_of(statement)))));
        }
        if let Some(t) = tail_after(prompt, "\nSTATEMENT:\n") {
            return Ok(ChatResponse::text(format!("[{}]", word(self.label_of(t)))));
        }
        Err(Error::Transport("scripted model does not recognise the prompt".into()))
    }
}
