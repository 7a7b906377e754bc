//! Atoms, contexts and relation edges, and their translation into a binary
//! graphical model.
//!
//! Each atom and each context becomes one boolean variable ("the utterance
//! is true"). Variables carry a unary prior; relations between a context and
//! an atom, or between two contexts, become pairwise factors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use factreason_pgm::{Factor, GraphicalModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_ATOM_PRIOR: f64 = 0.5;
pub const DEFAULT_CONTEXT_PRIOR: f64 = 0.99;
/// Maximum context content length in characters.
pub const CONTENT_CAP: usize = 4000;
/// Upper clamp for relation confidences; keeps every factor entry positive.
pub const MAX_P_STAR: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub atom_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_span: Option<(usize, usize)>,
    /// Text before revision, kept when the reviser changed it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_text: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub revision_failed: bool,
}

impl AtomRecord {
    pub fn new(atom_id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let atom_id = atom_id.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidArgument(format!("atom `{atom_id}` has empty text")));
        }
        Ok(Self {
            atom_id,
            text,
            source_span: None,
            original_text: None,
            revision_failed: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextSource {
    Wikipedia,
    WebSearch,
    Inline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub context_id: String,
    pub title: String,
    pub link: String,
    pub snippet: String,
    pub content: String,
    pub source: ContextSource,
    pub prior_true: f64,
    /// Atoms this context was retrieved for, with its zero-based rank in
    /// each atom's result list.
    pub retrieved_for: BTreeMap<String, usize>,
}

impl ContextRecord {
    /// A context given directly with the input rather than retrieved.
    pub fn inline(context_id: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            context_id: context_id.into(),
            title: String::new(),
            link: String::new(),
            snippet: String::new(),
            content: truncate_chars(&content.into(), CONTENT_CAP),
            source: ContextSource::Inline,
            prior_true: DEFAULT_CONTEXT_PRIOR,
            retrieved_for: BTreeMap::new(),
        }
    }

    /// The utterance used for this context: its content, else its snippet,
    /// else its title.
    pub fn text(&self) -> &str {
        [&self.content, &self.snippet, &self.title]
            .into_iter()
            .find(|s| !s.trim().is_empty())
            .map(|s| s.as_str())
            .unwrap_or("")
    }

    pub fn validate(&self) -> Result<()> {
        if self.content.chars().count() > CONTENT_CAP {
            return Err(Error::InvalidArgument(format!(
                "context `{}` content exceeds {CONTENT_CAP} characters",
                self.context_id
            )));
        }
        if !(self.prior_true > 0.0 && self.prior_true <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "context `{}` prior {} is outside (0, 1]",
                self.context_id, self.prior_true
            )));
        }
        Ok(())
    }
}

/// Cuts `s` to at most `cap` characters.
pub fn truncate_chars(s: &str, cap: usize) -> String {
    match s.char_indices().nth(cap) {
        Some((i, _)) => s[..i].to_string(),
        None => s.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Entail,
    Contradict,
    Equivalence,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub source_id: String,
    pub target_id: String,
    pub relation: Relation,
    pub p_star: f64,
}

impl RelationEdge {
    /// Builds an edge, clamping `p_star` into `[0.5, 1 - 1e-6]`. Neutral
    /// relations and self-loops are rejected.
    pub fn new(
        source_id: impl Into<String>,
        target_id: impl Into<String>,
        relation: Relation,
        p_star: f64,
    ) -> Result<Self> {
        let (source_id, target_id) = (source_id.into(), target_id.into());
        if relation == Relation::None {
            return Err(Error::InvalidArgument(
                "neutral relations are not stored as edges".into(),
            ));
        }
        if source_id == target_id {
            return Err(Error::InvalidArgument(format!("edge from `{source_id}` to itself")));
        }
        if !p_star.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "relation confidence {p_star} is not finite"
            )));
        }
        Ok(Self {
            source_id,
            target_id,
            relation,
            p_star: clamp_p_star(p_star),
        })
    }
}

pub fn clamp_p_star(p: f64) -> f64 {
    p.clamp(0.5, MAX_P_STAR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum FrVariant {
    /// Each atom is linked only to its own top `k_per_atom` contexts.
    Fr1 { k_per_atom: usize },
    /// Each atom is linked to every (deduplicated) context.
    Fr2,
    /// As `Fr2`, plus relations between pairs of contexts.
    Fr3,
}

impl FrVariant {
    pub fn validate(&self) -> Result<()> {
        match self {
            FrVariant::Fr1 { k_per_atom: 0 } => Err(Error::InvalidArgument("k_per_atom must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FrVariant::Fr1 { .. } => "fr1",
            FrVariant::Fr2 => "fr2",
            FrVariant::Fr3 => "fr3",
        }
    }

    pub fn dedups(&self) -> bool {
        !matches!(self, FrVariant::Fr1 { .. })
    }
}

impl fmt::Display for FrVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} {p} is outside [0, 1]")))
    }
}

/// Unary prior: `(1 - prob_true, prob_true)`.
pub fn prior_factor(variable: usize, prob_true: f64) -> Result<Factor> {
    check_prob(prob_true, "prior")?;
    Ok(Factor::unary(variable, 1.0 - prob_true, prob_true)?)
}

/// Factor values in the row order `(x,y), (x,¬y), (¬x,y), (¬x,¬y)`, where
/// `x` is the edge source and `y` its target.
pub fn relation_rows(relation: Relation, p: f64) -> Result<[f64; 4]> {
    let q = 1.0 - p;
    match relation {
        Relation::Entail => Ok([p, q, p, p]),
        Relation::Contradict => Ok([q, p, p, p]),
        Relation::Equivalence => Ok([p, q, q, p]),
        Relation::None => Err(Error::InvalidArgument("neutral relations have no factor".into())),
    }
}

/// Pairwise factor over `(source_var, target_var)` for a relation edge.
pub fn relation_factor(edge: &RelationEdge, source_var: usize, target_var: usize) -> Result<Factor> {
    if !(0.5..1.0).contains(&edge.p_star) {
        return Err(Error::InvalidArgument(format!(
            "relation confidence {} is outside [0.5, 1)",
            edge.p_star
        )));
    }
    let [tt, tf, ft, ff] = relation_rows(edge.relation, edge.p_star)?;
    // storage is (0,0), (0,1), (1,0), (1,1) with 1 = true
    Ok(Factor::pairwise(source_var, target_var, [ff, ft, tf, tt])?)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum DedupKey {
    Link(String),
    Content(u64),
}

/// Lowercases the scheme and host and drops the scheme, a leading `www.`,
/// any fragment and trailing slashes.
pub fn normalize_link(link: &str) -> String {
    let mut s = link.trim();
    if let Some(i) = s.find('#') {
        s = &s[..i];
    }
    let lower = s.to_ascii_lowercase();
    let mut rest = s;
    for scheme in ["https://", "http://"] {
        if lower.starts_with(scheme) {
            rest = &s[scheme.len()..];
            break;
        }
    }
    let (host, path) = match rest.find('/') {
        Some(i) => (&rest[..i], &rest[i..]),
        None => (rest, ""),
    };
    let host = host.to_ascii_lowercase();
    let host = host.strip_prefix("www.").unwrap_or(&host);
    format!("{host}{}", path.trim_end_matches('/'))
}

/// Case-folds and collapses runs of whitespace to single spaces.
pub fn normalize_content(content: &str) -> String {
    content
        .split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// 64-bit hash that does not depend on the platform or toolchain.
pub fn stable_hash64(s: &str) -> u64 {
    let digest = Sha256::digest(s.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn dedup_key(c: &ContextRecord) -> DedupKey {
    if c.link.trim().is_empty() {
        DedupKey::Content(stable_hash64(&normalize_content(&c.content)))
    } else {
        DedupKey::Link(normalize_link(&c.link))
    }
}

/// Merges contexts with the same normalized link (or, without a link, the
/// same normalized content). The first occurrence is kept in place and
/// absorbs the `retrieved_for` entries of later duplicates, keeping the best
/// rank per atom.
pub fn dedup_contexts(contexts: Vec<ContextRecord>) -> Vec<ContextRecord> {
    let mut out: Vec<ContextRecord> = Vec::with_capacity(contexts.len());
    let mut seen: HashMap<DedupKey, usize> = HashMap::new();
    for c in contexts {
        match seen.get(&dedup_key(&c)) {
            Some(&i) => {
                for (atom, rank) in c.retrieved_for {
                    let slot = out[i].retrieved_for.entry(atom).or_insert(rank);
                    *slot = (*slot).min(rank);
                }
            }
            None => {
                seen.insert(dedup_key(&c), out.len());
                out.push(c);
            }
        }
    }
    out
}

/// A built model and the variable assigned to each atom and context id.
#[derive(Debug, Clone)]
pub struct FrModel {
    pub model: GraphicalModel,
    pub bindings: BTreeMap<String, usize>,
    /// Edges that became factors, in factor order.
    pub used_edges: Vec<RelationEdge>,
}

/// Assembles the model for one variant.
///
/// Atoms get variables first, in input order, followed by contexts. Every
/// variable gets a prior (`atom_prior` for atoms; the record's own prior for
/// contexts unless `context_prior_override` is set). Pairwise factors follow
/// the variant: FR1 keeps context-to-atom edges where the context was
/// retrieved for that atom within the first `k_per_atom` results; FR2 keeps
/// every context-to-atom edge; FR3 also keeps context-to-context edges.
/// Deduplication, where wanted, is the caller's job.
pub fn build_fr_model(
    atoms: &[AtomRecord],
    contexts: &[ContextRecord],
    edges: &[RelationEdge],
    variant: FrVariant,
    atom_prior: f64,
    context_prior_override: Option<f64>,
) -> Result<FrModel> {
    variant.validate()?;
    check_prob(atom_prior, "atom prior")?;
    if let Some(p) = context_prior_override {
        check_prob(p, "context prior")?;
    }

    let mut model = GraphicalModel::new();
    model.metadata.insert("variant".into(), variant.name().into());
    let mut bindings = BTreeMap::new();
    let mut is_atom = BTreeMap::new();
    for (id, atom) in atoms
        .iter()
        .map(|a| (&a.atom_id, true))
        .chain(contexts.iter().map(|c| (&c.context_id, false)))
    {
        if bindings.contains_key(id) {
            return Err(Error::DuplicateVariable(id.clone()));
        }
        let var = model.add_variable(id.clone());
        bindings.insert(id.clone(), var);
        is_atom.insert(id.clone(), atom);
    }
    for a in atoms {
        model.add_factor(prior_factor(bindings[&a.atom_id], atom_prior)?);
    }
    let context_by_id: BTreeMap<&str, &ContextRecord> = contexts.iter().map(|c| (c.context_id.as_str(), c)).collect();
    for c in contexts {
        let p = context_prior_override.unwrap_or(c.prior_true);
        model.add_factor(prior_factor(bindings[&c.context_id], p)?);
    }

    let mut used_edges = Vec::new();
    let mut context_pairs = BTreeSet::new();
    for e in edges {
        let src = *bindings
            .get(&e.source_id)
            .ok_or_else(|| Error::UnknownId(e.source_id.clone()))?;
        let dst = *bindings
            .get(&e.target_id)
            .ok_or_else(|| Error::UnknownId(e.target_id.clone()))?;
        if is_atom[&e.source_id] {
            return Err(Error::InvalidArgument(format!(
                "edge source `{}` is an atom; relations start at a context",
                e.source_id
            )));
        }
        let keep = if is_atom[&e.target_id] {
            match variant {
                FrVariant::Fr1 { k_per_atom } => context_by_id[e.source_id.as_str()]
                    .retrieved_for
                    .get(&e.target_id)
                    .is_some_and(|&rank| rank < k_per_atom),
                FrVariant::Fr2 | FrVariant::Fr3 => true,
            }
        } else {
            let pair = if src < dst { (src, dst) } else { (dst, src) };
            if !context_pairs.insert(pair) {
                return Err(Error::InvalidArgument(format!(
                    "more than one edge between `{}` and `{}`",
                    e.source_id, e.target_id
                )));
            }
            variant == FrVariant::Fr3
        };
        if keep {
            model.add_factor(relation_factor(e, src, dst)?);
            used_edges.push(e.clone());
        }
    }
    Ok(FrModel {
        model,
        bindings,
        used_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use factreason_pgm::{enumerate_joint, min_fill_order, ve_marginals};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn retrieved(id: &str, content: &str, atom: &str, rank: usize) -> ContextRecord {
        let mut c = ContextRecord::inline(id, content);
        c.source = ContextSource::Wikipedia;
        c.retrieved_for.insert(atom.into(), rank);
        c
    }

    fn fig2_inputs() -> (Vec<AtomRecord>, Vec<ContextRecord>, Vec<RelationEdge>) {
        let atoms = vec![AtomRecord::new("a1", "The atom.").unwrap()];
        let contexts = vec![retrieved("c1", "first", "a1", 0), retrieved("c2", "second", "a1", 1)];
        let edges = vec![
            RelationEdge::new("c1", "a1", Relation::Entail, 0.8).unwrap(),
            RelationEdge::new("c2", "a1", Relation::Contradict, 0.9).unwrap(),
        ];
        (atoms, contexts, edges)
    }

    fn p_true(m: &FrModel, id: &str) -> f64 {
        let (marg, _) = enumerate_joint(&m.model).unwrap();
        marg.p_true(m.bindings[id])
    }

    #[test]
    fn priors() {
        assert_eq!(prior_factor(0, 0.5).unwrap().values(), &[0.5, 0.5]);
        let f = prior_factor(3, 0.99).unwrap();
        assert!(close(f.values()[0], 0.01, 1e-15) && f.values()[1] == 0.99);
        assert_eq!(prior_factor(0, 1.0).unwrap().values(), &[0.0, 1.0]);
        assert!(prior_factor(0, 1.5).is_err());
        assert!(prior_factor(0, -0.1).is_err());
    }

    #[test]
    fn relation_factor_rows() {
        let rows = |r, p| {
            let e = RelationEdge::new("s", "t", r, p).unwrap();
            let f = relation_factor(&e, 0, 1).unwrap();
            // back to (x,y), (x,¬y), (¬x,y), (¬x,¬y)
            [
                f.value_at(&[true, true]),
                f.value_at(&[true, false]),
                f.value_at(&[false, true]),
                f.value_at(&[false, false]),
            ]
        };
        let e = rows(Relation::Entail, 0.8);
        assert!(e.iter().zip([0.8, 0.2, 0.8, 0.8]).all(|(a, b)| close(*a, b, 1e-15)));
        let c = rows(Relation::Contradict, 0.9);
        assert!(c.iter().zip([0.1, 0.9, 0.9, 0.9]).all(|(a, b)| close(*a, b, 1e-15)));
        assert_eq!(rows(Relation::Equivalence, 0.5), [0.5; 4]);
    }

    #[test]
    fn edges_clamp_and_reject() {
        assert_eq!(RelationEdge::new("s", "t", Relation::Entail, 0.3).unwrap().p_star, 0.5);
        assert_eq!(
            RelationEdge::new("s", "t", Relation::Entail, 1.0).unwrap().p_star,
            MAX_P_STAR
        );
        assert!(RelationEdge::new("s", "t", Relation::None, 0.9).is_err());
        assert!(RelationEdge::new("s", "s", Relation::Entail, 0.9).is_err());
        assert!(RelationEdge::new("s", "t", Relation::Entail, f64::NAN).is_err());
    }

    #[test]
    fn fig2_model_marginal() {
        let (atoms, contexts, edges) = fig2_inputs();
        let m = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr2, 0.5, None).unwrap();
        assert_eq!(m.model.num_variables(), 3);
        assert_eq!(m.model.factors.len(), 5);
        assert!(close(p_true(&m, "a1"), 0.0432 / (0.0432 + 0.0927), 1e-3));
        assert!(close(p_true(&m, "a1"), 0.3179, 1e-3));
    }

    #[test]
    fn no_edges_leaves_atoms_at_prior() {
        let (atoms, contexts, _) = fig2_inputs();
        let m = build_fr_model(&atoms, &contexts, &[], FrVariant::Fr2, 0.5, None).unwrap();
        assert!(close(p_true(&m, "a1"), 0.5, 1e-15));
    }

    #[test]
    fn fig3_raises_the_atom() {
        let (atoms, mut contexts, mut edges) = fig2_inputs();
        let base = p_true(
            &build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr3, 0.5, None).unwrap(),
            "a1",
        );
        contexts.push(ContextRecord::inline("c3", "third"));
        edges.push(RelationEdge::new("c3", "c2", Relation::Contradict, 0.9).unwrap());
        for p in [0.6, 0.7, 0.8, 0.9, 0.99] {
            edges[2].p_star = p;
            let m = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr3, 0.5, None).unwrap();
            assert_eq!(m.model.num_variables(), 4);
            assert_eq!(m.model.factors.len(), 7);
            let v = p_true(&m, "a1");
            assert!(v > base, "p={p}: {v} <= {base}");
            if p == 0.9 {
                assert!(close(v, 0.4116, 1e-3), "{v}");
            }
        }
        // FR2 ignores the context pair
        let m = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr2, 0.5, None).unwrap();
        assert_eq!(m.model.factors.len(), 6);
        assert!(close(p_true(&m, "a1"), base, 1e-12));
    }

    #[test]
    fn fr1_respects_rank_budget() {
        let atoms = vec![AtomRecord::new("a1", "x").unwrap(), AtomRecord::new("a2", "y").unwrap()];
        let contexts = vec![
            retrieved("a1:0", "p", "a1", 0),
            retrieved("a1:1", "q", "a1", 1),
            retrieved("a2:0", "r", "a2", 0),
        ];
        let edges = vec![
            RelationEdge::new("a1:0", "a1", Relation::Entail, 0.9).unwrap(),
            RelationEdge::new("a1:1", "a1", Relation::Entail, 0.9).unwrap(),
            // a2:0 was not retrieved for a1
            RelationEdge::new("a2:0", "a1", Relation::Contradict, 0.9).unwrap(),
            RelationEdge::new("a2:0", "a2", Relation::Entail, 0.7).unwrap(),
        ];
        let m = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr1 { k_per_atom: 1 }, 0.5, None).unwrap();
        let used: Vec<(&str, &str)> = m
            .used_edges
            .iter()
            .map(|e| (e.source_id.as_str(), e.target_id.as_str()))
            .collect();
        assert_eq!(used, [("a1:0", "a1"), ("a2:0", "a2")]);
        let m2 = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr2, 0.5, None).unwrap();
        assert_eq!(m2.used_edges.len(), 4);
        assert_eq!(m2.model.factors.len(), 5 + 4);
        assert!(FrVariant::Fr1 { k_per_atom: 0 }.validate().is_err());
    }

    #[test]
    fn build_errors() {
        let (atoms, contexts, mut edges) = fig2_inputs();
        edges.push(RelationEdge::new("c9", "a1", Relation::Entail, 0.9).unwrap());
        assert!(matches!(
            build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr2, 0.5, None),
            Err(Error::UnknownId(id)) if id == "c9"
        ));
        let mut dup = contexts.clone();
        dup.push(contexts[0].clone());
        assert!(matches!(
            build_fr_model(&atoms, &dup, &[], FrVariant::Fr2, 0.5, None),
            Err(Error::DuplicateVariable(_))
        ));
        let backwards = [RelationEdge::new("a1", "c1", Relation::Entail, 0.9).unwrap()];
        assert!(build_fr_model(&atoms, &contexts, &backwards, FrVariant::Fr2, 0.5, None).is_err());
        let twice = [
            RelationEdge::new("c1", "c2", Relation::Entail, 0.9).unwrap(),
            RelationEdge::new("c2", "c1", Relation::Entail, 0.9).unwrap(),
        ];
        assert!(build_fr_model(&atoms, &contexts, &twice, FrVariant::Fr3, 0.5, None).is_err());
    }

    #[test]
    fn context_prior_override() {
        let (atoms, contexts, edges) = fig2_inputs();
        let m = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr2, 0.5, Some(0.6)).unwrap();
        assert_eq!(m.model.factors[1].values()[1], 0.6);
        assert!(build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr2, 1.2, None).is_err());
    }

    #[test]
    fn dedup_merges_by_link_and_content() {
        let mut a = retrieved("a1:0", "one", "a1", 0);
        a.link = "https://En.Wikipedia.org/wiki/Foo/".into();
        let mut b = retrieved("a2:2", "different text", "a2", 2);
        b.link = "http://en.wikipedia.org/wiki/Foo#History".into();
        let c = retrieved("a1:1", "  Some   Text\n here ", "a1", 1);
        let d = retrieved("a2:0", "some text here", "a2", 0);
        let e = retrieved("a2:1", "unrelated", "a2", 1);
        let out = dedup_contexts(vec![a, b, c, d, e]);
        let ids: Vec<&str> = out.iter().map(|c| c.context_id.as_str()).collect();
        assert_eq!(ids, ["a1:0", "a1:1", "a2:1"]);
        assert_eq!(
            out[0].retrieved_for,
            BTreeMap::from([("a1".into(), 0), ("a2".into(), 2)])
        );
        assert_eq!(
            out[1].retrieved_for,
            BTreeMap::from([("a1".into(), 1), ("a2".into(), 0)])
        );
        assert!(dedup_contexts(Vec::new()).is_empty());
    }

    #[test]
    fn normalization_by_hand() {
        assert_eq!(normalize_content("  Some   Text\n here "), "some text here");
        assert_eq!(normalize_content("Tab\tSeparated"), "tab separated");
        assert_eq!(normalize_link("https://www.Example.com/Path/"), "example.com/Path");
        assert_eq!(normalize_link("example.com/Path#x"), "example.com/Path");
        assert_eq!(stable_hash64("abc"), 0xba7816bf8f01cfea);
    }

    #[test]
    fn truncation_is_by_character() {
        let s = "é".repeat(5000);
        let t = truncate_chars(&s, CONTENT_CAP);
        assert_eq!(t.chars().count(), CONTENT_CAP);
        assert_eq!(truncate_chars("abc", 10), "abc");
        let c = ContextRecord::inline("c", s);
        assert_eq!(c.content.chars().count(), CONTENT_CAP);
        assert!(c.validate().is_ok());
    }

    /// Posterior odds of the atom in a star model, one factor per context.
    fn star_odds(prior: f64, spokes: &[(Relation, f64, f64)]) -> f64 {
        let mut odds = prior / (1.0 - prior);
        for &(r, p, q) in spokes {
            let [tt, tf, ft, ff] = relation_rows(r, p).unwrap();
            // g(context, atom)
            odds *= (q * tt + (1.0 - q) * ft) / (q * tf + (1.0 - q) * ff);
        }
        odds
    }

    fn star(atom_prior: f64, spokes: &[(Relation, f64, f64)]) -> (FrModel, f64) {
        let atoms = vec![AtomRecord::new("a", "atom").unwrap()];
        let mut contexts = Vec::new();
        let mut edges = Vec::new();
        for (i, &(r, p, q)) in spokes.iter().enumerate() {
            let id = format!("c{i}");
            let mut c = retrieved(&id, &id, "a", i);
            c.prior_true = q;
            contexts.push(c);
            edges.push(RelationEdge::new(id, "a", r, p).unwrap());
        }
        let k = spokes.len().max(1);
        let m = build_fr_model(
            &atoms,
            &contexts,
            &edges,
            FrVariant::Fr1 { k_per_atom: k },
            atom_prior,
            None,
        )
        .unwrap();
        let order = min_fill_order(&m.model);
        let r = ve_marginals(&m.model, &order).unwrap();
        let p = r.marginals.p_true(m.bindings["a"]);
        (m, p)
    }

    #[test]
    fn star_closed_form_fig2() {
        let spokes = [(Relation::Entail, 0.8, 0.99), (Relation::Contradict, 0.9, 0.99)];
        let odds = star_odds(0.5, &spokes);
        assert!(close(odds, (0.8 / 0.206) * (0.108 / 0.9), 1e-12));
        assert!(close(odds, 0.4661, 1e-4));
        let (_, p) = star(0.5, &spokes);
        assert!(close(p, odds / (1.0 + odds), 1e-12));
    }

    fn spoke() -> impl Strategy<Value = (Relation, f64, f64)> {
        (
            prop_oneof![Just(Relation::Entail), Just(Relation::Contradict)],
            0.5..0.999f64,
            0.01..1.0f64,
        )
    }

    proptest! {
        #[test]
        fn star_matches_closed_form(prior in 0.05..0.95f64, spokes in prop::collection::vec(spoke(), 0..6)) {
            let odds = star_odds(prior, &spokes);
            let (_, p) = star(prior, &spokes);
            prop_assert!(close(p, odds / (1.0 + odds), 1e-12));
        }

        #[test]
        fn adding_edges_moves_the_atom(p in 0.51..0.999f64, q in 0.01..1.0f64, base in prop::collection::vec(spoke(), 0..4)) {
            let (_, before) = star(0.5, &base);
            let mut more = base.clone();
            more.push((Relation::Entail, p, q));
            prop_assert!(star(0.5, &more).1 > before);
            let mut more = base.clone();
            more.push((Relation::Contradict, p, q));
            prop_assert!(star(0.5, &more).1 < before);
        }

        #[test]
        fn half_confidence_edges_are_inert(r in prop_oneof![Just(Relation::Entail), Just(Relation::Contradict), Just(Relation::Equivalence)]) {
            let (atoms, mut contexts, mut edges) = fig2_inputs();
            let base = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr3, 0.5, None).unwrap();
            contexts.push(ContextRecord::inline("c3", "third"));
            edges.push(RelationEdge::new("c3", "a1", r, 0.5).unwrap());
            edges.push(RelationEdge::new("c3", "c1", r, 0.5).unwrap());
            let more = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr3, 0.5, None).unwrap();
            let (mb, _) = enumerate_joint(&base.model).unwrap();
            let (mm, _) = enumerate_joint(&more.model).unwrap();
            for id in ["a1", "c1", "c2"] {
                prop_assert!(close(mb.p_true(base.bindings[id]), mm.p_true(more.bindings[id]), 1e-12));
            }
        }

        #[test]
        fn relation_entries_stay_in_band(p in 0.5..1.0f64) {
            for r in [Relation::Entail, Relation::Contradict, Relation::Equivalence] {
                let e = RelationEdge::new("s", "t", r, p).unwrap();
                let f = relation_factor(&e, 0, 1).unwrap();
                for &v in f.values() {
                    prop_assert!(v >= 1.0 - e.p_star - 1e-15 && v <= e.p_star + 1e-15 && v > 0.0);
                }
            }
        }
    }
}
