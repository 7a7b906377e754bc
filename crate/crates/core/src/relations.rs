//! Relation extraction between utterances with an LLM used as an NLI
//! classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{LlmClient, TokenLogprob};
use crate::model_builder::{clamp_p_star, Relation, RelationEdge};
use crate::prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliLabel {
    Entailment,
    Contradiction,
    Neutral,
}

impl NliLabel {
    const ALL: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Contradiction, NliLabel::Neutral];

    pub fn word(self) -> &'static str {
        match self {
            NliLabel::Entailment => "entailment",
            NliLabel::Contradiction => "contradiction",
            NliLabel::Neutral => "neutral",
        }
    }

    fn stem(self) -> &'static str {
        match self {
            NliLabel::Entailment => "entail",
            NliLabel::Contradiction => "contradict",
            NliLabel::Neutral => "neutral",
        }
    }

    pub fn relation(self) -> Relation {
        match self {
            NliLabel::Entailment => Relation::Entail,
            NliLabel::Contradiction => Relation::Contradict,
            NliLabel::Neutral => Relation::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationModelConfig {
    /// Ask for token log-probabilities to derive confidences.
    pub logprobs: bool,
    pub top_logprobs: u8,
    /// Confidence used when the reply carries no usable log-probabilities.
    pub fallback_p_star: f64,
}

impl Default for RelationModelConfig {
    fn default() -> Self {
        Self {
            logprobs: true,
            top_logprobs: 5,
            fallback_p_star: 0.95,
        }
    }
}

impl RelationModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fallback_p_star > 0.5 && self.fallback_p_star < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fallback confidence {} is outside (0.5, 1)",
                self.fallback_p_star
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliJudgment {
    pub label: NliLabel,
    /// Confidence of the label; absent for neutral judgments.
    pub p_star: Option<f64>,
    pub raw_reply: String,
}

/// Finds the label whose keyword occurs first in the reply, ignoring case.
pub fn parse_label(reply: &str) -> Result<NliLabel> {
    let lower = reply.to_lowercase();
    NliLabel::ALL
        .into_iter()
        .filter_map(|l| lower.find(l.stem()).map(|i| (i, l)))
        .min_by_key(|&(i, _)| i)
        .map(|(_, l)| l)
        .ok_or_else(|| Error::UnparseableReply(reply.to_string()))
}

/// The label a token could be the start of, if any.
fn token_label(token: &str) -> Option<NliLabel> {
    let t = token.trim().to_lowercase();
    if t.is_empty() {
        return None;
    }
    NliLabel::ALL
        .into_iter()
        .find(|l| l.word().starts_with(&t) || t.starts_with(l.word()))
}

/// Confidence of `label` from the first reply token that starts a label
/// word: the probability of the label's token divided by the total
/// probability of label tokens among that position's alternatives. The
/// result is clamped to `[0.5, 1 - 1e-6]`.
pub fn probability_from_logprobs(tokens: &[TokenLogprob], label: NliLabel) -> Result<f64> {
    let position = tokens
        .iter()
        .find(|t| token_label(&t.token).is_some())
        .ok_or(Error::MissingLogprobs)?;
    let mut alternatives: Vec<(&str, f64)> = position
        .top_logprobs
        .iter()
        .map(|a| (a.token.as_str(), a.logprob))
        .collect();
    if !alternatives.iter().any(|(t, _)| *t == position.token) {
        alternatives.push((&position.token, position.logprob));
    }
    let mut mass = [0.0f64; 3];
    for (token, lp) in alternatives {
        if let Some(l) = token_label(token) {
            let i = NliLabel::ALL.iter().position(|&x| x == l).unwrap();
            mass[i] += lp.exp();
        }
    }
    let total: f64 = mass.iter().sum();
    let own = mass[NliLabel::ALL.iter().position(|&x| x == label).unwrap()];
    if total.is_nan() || total <= 0.0 || own <= 0.0 || !own.is_finite() {
        return Err(Error::MissingLogprobs);
    }
    Ok(clamp_p_star(own / total))
}

/// Asks whether `premise` entails, contradicts or is neutral toward
/// `hypothesis`. An empty `context_text` is replaced by the premise.
pub fn classify_relation(
    client: &LlmClient,
    config: &RelationModelConfig,
    premise: &str,
    hypothesis: &str,
    context_text: &str,
) -> Result<NliJudgment> {
    if premise.trim().is_empty() || hypothesis.trim().is_empty() {
        return Err(Error::InvalidArgument(
            "premise and hypothesis must be non-empty".into(),
        ));
    }
    let context = if context_text.trim().is_empty() {
        premise
    } else {
        context_text
    };
    let prompt = prompts::nli(premise, hypothesis, context);
    let reply = if config.logprobs {
        client.chat_with_logprobs(&prompt, config.top_logprobs)?
    } else {
        client.chat(&prompt)?
    };
    let label = parse_label(&reply.text)?;
    let p_star = match label {
        NliLabel::Neutral => None,
        _ => Some(
            reply
                .logprobs
                .as_deref()
                .map(|lp| probability_from_logprobs(lp, label))
                .and_then(|r| r.ok())
                .unwrap_or(config.fallback_p_star),
        ),
    };
    Ok(NliJudgment {
        label,
        p_star,
        raw_reply: reply.text,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Premise is a context, hypothesis an atom.
    ContextAtom,
    /// Two contexts, judged in both orders.
    ContextContext,
}

/// An utterance and the id of its variable.
#[derive(Debug, Clone, Copy)]
pub struct Utterance<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

fn edge_from(j: &NliJudgment, source: &str, target: &str) -> Result<Option<RelationEdge>> {
    match (j.label.relation(), j.p_star) {
        (Relation::None, _) => Ok(None),
        (r, Some(p)) => RelationEdge::new(source, target, r, p).map(Some),
        (_, None) => Err(Error::MissingLogprobs),
    }
}

/// Judges one pair and turns the outcome into at most one edge.
///
/// Context-to-atom pairs take a single judgment with the context as
/// premise. Context pairs are judged in both orders: entailment both ways is
/// an equivalence with the smaller confidence; a single non-neutral order
/// gives that relation in that direction; two conflicting non-neutral
/// judgments, or two neutral ones, give no edge.
pub fn extract_pair_relation(
    client: &LlmClient,
    config: &RelationModelConfig,
    a: Utterance<'_>,
    b: Utterance<'_>,
    kind: PairKind,
) -> Result<Option<RelationEdge>> {
    let ab = classify_relation(client, config, a.text, b.text, "")?;
    if kind == PairKind::ContextAtom {
        return edge_from(&ab, a.id, b.id);
    }
    let ba = classify_relation(client, config, b.text, a.text, "")?;
    combine_orderings(&ab, &ba, a.id, b.id)
}

/// Combines the judgments of `a → b` and `b → a`.
pub fn combine_orderings(ab: &NliJudgment, ba: &NliJudgment, a: &str, b: &str) -> Result<Option<RelationEdge>> {
    use NliLabel::*;
    match (ab.label, ba.label) {
        (Entailment, Entailment) => {
            let p = ab
                .p_star
                .zip(ba.p_star)
                .map(|(x, y)| x.min(y))
                .ok_or(Error::MissingLogprobs)?;
            RelationEdge::new(a, b, Relation::Equivalence, p).map(Some)
        }
        (Neutral, Neutral) => Ok(None),
        (_, Neutral) => edge_from(ab, a, b),
        (Neutral, _) => edge_from(ba, b, a),
        _ => Ok(None),
    }
}
