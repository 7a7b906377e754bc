//! Single-prompt assessors that label each atom directly from its contexts.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::LlmClient;
use crate::metrics::Label;
use crate::model_builder::{AtomRecord, ContextRecord};
use crate::prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// True/False question over numbered passages.
    FactScore,
    /// Bracketed verdict over a knowledge list.
    FactVerify,
    /// `###`-marked verdict over search-result blocks.
    VeriScore,
    /// Bracketed verdict over evidence, allowing internal knowledge.
    DeepSeek,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::FactScore => "fs",
            BaselineKind::FactVerify => "fv",
            BaselineKind::VeriScore => "vs",
            BaselineKind::DeepSeek => "deepseek",
        }
    }

    pub fn prompt(self, atom: &str, contexts: &[ContextRecord]) -> String {
        match self {
            BaselineKind::FactScore => prompts::factscore(atom, contexts),
            BaselineKind::FactVerify => prompts::factverify(atom, contexts),
            BaselineKind::VeriScore => prompts::veriscore(atom, contexts),
            BaselineKind::DeepSeek => prompts::deepseek(atom, contexts),
        }
    }

    pub fn parse(self, reply: &str) -> Result<Label> {
        match self {
            BaselineKind::FactScore => parse_true_false(reply),
            BaselineKind::FactVerify | BaselineKind::DeepSeek => parse_bracketed(reply),
            BaselineKind::VeriScore => parse_hash_marked(reply),
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineVerdict {
    pub atom_id: String,
    pub label: Label,
    pub raw_reply: String,
}

fn regex(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid pattern"))
}

fn label_word(word: &str) -> Label {
    match word.to_ascii_lowercase().as_str() {
        "supported" => Label::Supported,
        "contradicted" => Label::Contradicted,
        _ => Label::Undecided,
    }
}

/// First standalone `true` or `false`, ignoring case. There is no undecided
/// outcome.
pub fn parse_true_false(reply: &str) -> Result<Label> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let m = regex(&RE, r"(?i)\b(true|false)\b")
        .find(reply)
        .ok_or_else(|| Error::UnparseableReply(reply.to_string()))?;
    Ok(if m.as_str().eq_ignore_ascii_case("true") {
        Label::Supported
    } else {
        Label::Contradicted
    })
}

/// Last of `[Supported]`, `[Contradicted]`, `[Undecided]`.
pub fn parse_bracketed(reply: &str) -> Result<Label> {
    static RE: OnceLock<Regex> = OnceLock::new();
    regex(&RE, r"(?i)\[\s*(supported|contradicted|undecided)\s*\]")
        .captures_iter(reply)
        .last()
        .map(|c| label_word(&c[1]))
        .ok_or_else(|| Error::UnparseableReply(reply.to_string()))
}

/// Last of `###Supported###`, `###Contradicted###`, `###Undecided###`.
pub fn parse_hash_marked(reply: &str) -> Result<Label> {
    static RE: OnceLock<Regex> = OnceLock::new();
    regex(&RE, r"(?i)###\s*(supported|contradicted|undecided)\s*###")
        .captures_iter(reply)
        .last()
        .map(|c| label_word(&c[1]))
        .ok_or_else(|| Error::UnparseableReply(reply.to_string()))
}

/// One LLM call for one atom.
pub fn assess_atom(
    kind: BaselineKind,
    client: &LlmClient,
    atom: &AtomRecord,
    contexts: &[ContextRecord],
) -> Result<BaselineVerdict> {
    if contexts.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "atom `{}` has no contexts",
            atom.atom_id
        )));
    }
    let reply = client.chat(&kind.prompt(&atom.text, contexts))?;
    let label = kind.parse(&reply.text)?;
    Ok(BaselineVerdict {
        atom_id: atom.atom_id.clone(),
        label,
        raw_reply: reply.text,
    })
}

pub fn fs_assess(atom: &AtomRecord, contexts: &[ContextRecord], client: &LlmClient) -> Result<BaselineVerdict> {
    assess_atom(BaselineKind::FactScore, client, atom, contexts)
}

pub fn fv_assess(atom: &AtomRecord, contexts: &[ContextRecord], client: &LlmClient) -> Result<BaselineVerdict> {
    assess_atom(BaselineKind::FactVerify, client, atom, contexts)
}

pub fn vs_assess(atom: &AtomRecord, contexts: &[ContextRecord], client: &LlmClient) -> Result<BaselineVerdict> {
    assess_atom(BaselineKind::VeriScore, client, atom, contexts)
}

pub fn deepseek_assess(atom: &AtomRecord, contexts: &[ContextRecord], client: &LlmClient) -> Result<BaselineVerdict> {
    assess_atom(BaselineKind::DeepSeek, client, atom, contexts)
}
