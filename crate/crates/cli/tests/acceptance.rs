//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.
//!
//! Reference probabilities come from brute-force enumeration written here,
//! independent of the library's factor tables.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use factreason_cli::dataset::{parse_dataset, DatasetFormat};
use factreason_cli::experiment::{run_experiment, Assessor, RunConfig};
use factreason_cli::report::{render, ReportFormat};
use factreason_core::baselines::{parse_bracketed, parse_hash_marked, parse_true_false};
use factreason_core::llm::{LlmClient, LlmConfig};
use factreason_core::metrics::{brier, e_measure, f1_at_k, mae, precision, recall_at_k, AtomVerdict, Label, E_EPSILON};
use factreason_core::mock::ScriptedLlm;
use factreason_core::model_builder::{
    build_fr_model, relation_factor, AtomRecord, ContextRecord, FrVariant, Relation, RelationEdge,
};
use factreason_core::pipeline::{parse_atoms, parse_revision, PipelineConfig, Services};
use factreason_core::prompts;
use factreason_core::relations::{parse_label, NliLabel};
use factreason_core::retrieval::{FixtureRetriever, RetrieverConfig, RetrieverSource, SearchHit};
use factreason_pgm::generate::random_model;
use factreason_pgm::{
    enumerate_joint, min_fill_order, read_uai, ve_marginals, wmb_marginals, write_uai, GraphicalModel, WmbConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

// ---- reference model -------------------------------------------------------

/// Pairwise table indexed `[source][target]`, 1 = true.
type Table = [[f64; 2]; 2];

fn entail(p: f64) -> Table {
    // (x,y)=p (x,¬y)=1-p (¬x,y)=p (¬x,¬y)=p
    [[p, p], [1.0 - p, p]]
}

fn contradict(p: f64) -> Table {
    [[p, p], [p, 1.0 - p]]
}

fn equivalent(p: f64) -> Table {
    [[p, 1.0 - p], [1.0 - p, p]]
}

fn table_for(relation: Relation, p: f64) -> Table {
    match relation {
        Relation::Entail => entail(p),
        Relation::Contradict => contradict(p),
        Relation::Equivalence => equivalent(p),
        Relation::None => unreachable!(),
    }
}

/// P(var = true) for every variable of a model given as unary priors and
/// pairwise tables.
fn reference_marginals(priors: &[f64], pairs: &[(usize, usize, Table)]) -> Vec<f64> {
    let n = priors.len();
    let mut z = 0.0;
    let mut mass = vec![0.0; n];
    for bits in 0..1u32 << n {
        let x = |i: usize| bits >> i & 1 == 1;
        let mut w: f64 = (0..n).map(|i| if x(i) { priors[i] } else { 1.0 - priors[i] }).product();
        for &(s, t, table) in pairs {
            w *= table[x(s) as usize][x(t) as usize];
        }
        z += w;
        for (i, m) in mass.iter_mut().enumerate() {
            if x(i) {
                *m += w;
            }
        }
    }
    mass.into_iter().map(|m| m / z).collect()
}

fn exact_p_true(model: &GraphicalModel, var: usize) -> f64 {
    ve_marginals(model, &min_fill_order(model))
        .unwrap()
        .marginals
        .p_true(var)
}

fn context(id: &str, text: &str, prior: f64) -> ContextRecord {
    let mut c = ContextRecord::inline(id, text);
    c.prior_true = prior;
    c
}

fn edge(src: &str, dst: &str, relation: Relation, p: f64) -> RelationEdge {
    RelationEdge::new(src, dst, relation, p).unwrap()
}

/// One atom, two contexts: the first entails the atom with 0.8, the second
/// contradicts it with 0.9; context priors 0.99.
fn two_context_parts() -> (Vec<AtomRecord>, Vec<ContextRecord>, Vec<RelationEdge>) {
    (
        vec![AtomRecord::new("a1", "The atom.").unwrap()],
        vec![
            context("c1", "First context.", 0.99),
            context("c2", "Second context.", 0.99),
        ],
        vec![
            edge("c1", "a1", Relation::Entail, 0.8),
            edge("c2", "a1", Relation::Contradict, 0.9),
        ],
    )
}

fn two_context_reference() -> f64 {
    reference_marginals(&[0.5, 0.99, 0.99], &[(1, 0, entail(0.8)), (2, 0, contradict(0.9))])[0]
}

// ---- criteria ---------------------------------------------------------------

fn c1_two_context_golden() -> Outcome {
    let start = Instant::now();
    let (atoms, contexts, edges) = two_context_parts();
    let built = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr2, 0.5, None).map_err(|e| e.to_string())?;
    let p = exact_p_true(&built.model, built.bindings["a1"]);
    let elapsed = start.elapsed();
    let reference = two_context_reference();
    ensure!((p - 0.3179).abs() <= 1e-3, "P(a1) = {p:.6}, expected 0.3179 ± 0.001");
    ensure!(
        (p - reference).abs() < 1e-12,
        "P(a1) = {p} but enumeration gives {reference}"
    );
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("P(a1) = {p:.6}, P(not a1) = {:.6}, {elapsed:?}", 1.0 - p))
}

/// Seeded corpus: up to 12 variables, up to 20 factors with entries in (0, 1].
fn corpus(count: u64) -> Vec<GraphicalModel> {
    (0..count)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=12);
            let f = rng.random_range(1..=20);
            random_model(&mut rng, n, f)
        })
        .collect()
}

fn c2_oracle_equivalence() -> Outcome {
    let (mut worst_m, mut worst_z) = (0.0f64, 0.0f64);
    for (i, m) in corpus(200).iter().enumerate() {
        let ve = ve_marginals(m, &min_fill_order(m)).map_err(|e| format!("model {i}: {e}"))?;
        let (marg, log_z) = enumerate_joint(m).map_err(|e| format!("model {i}: {e}"))?;
        let dm = ve.marginals.max_abs_diff(&marg);
        let dz = (ve.log_z - log_z).abs();
        ensure!(
            dm < 1e-9 && dz < 1e-9,
            "model {i}: marginal diff {dm:e}, log Z diff {dz:e}"
        );
        worst_m = worst_m.max(dm);
        worst_z = worst_z.max(dz);
    }
    Ok(format!(
        "200 models, max marginal diff {worst_m:.2e}, max |Δ log Z| {worst_z:.2e}"
    ))
}

/// The row of a relation table for source value `x` and target value `y`.
fn g(table: &Table, x: bool, y: bool) -> f64 {
    table[x as usize][y as usize]
}

fn c3_star_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for inst in 0..100 {
        let m = rng.random_range(1..=8);
        let atom_prior = rng.random_range(0.05..0.95);
        let atoms = vec![AtomRecord::new("a", "Atom.").unwrap()];
        let mut contexts = Vec::new();
        let mut edges = Vec::new();
        let mut odds = atom_prior / (1.0 - atom_prior);
        // one extra context ranked past the cut-off, which must be ignored
        for rank in 0..=m {
            let id = format!("c{rank}");
            let q = rng.random_range(0.5..0.999);
            let p = rng.random_range(0.5..0.999);
            let relation = if rng.random_bool(0.5) {
                Relation::Entail
            } else {
                Relation::Contradict
            };
            let mut c = context(&id, "Context.", q);
            c.retrieved_for = BTreeMap::from([("a".to_string(), rank)]);
            contexts.push(c);
            edges.push(edge(&id, "a", relation, p));
            if rank < m {
                let t = table_for(relation, p);
                let num = q * g(&t, true, true) + (1.0 - q) * g(&t, false, true);
                let den = q * g(&t, true, false) + (1.0 - q) * g(&t, false, false);
                odds *= num / den;
            }
        }
        let built = build_fr_model(
            &atoms,
            &contexts,
            &edges,
            FrVariant::Fr1 { k_per_atom: m },
            atom_prior,
            None,
        )
        .map_err(|e| e.to_string())?;
        let closed = odds / (1.0 + odds);
        let p = exact_p_true(&built.model, built.bindings["a"]);
        let d = (p - closed).abs();
        ensure!(d <= 1e-12, "instance {inst}: elimination {p} vs closed form {closed}");
        worst = worst.max(d);
    }
    Ok(format!("100 star models, max diff {worst:.2e}"))
}

fn c4_wmb_contract() -> Outcome {
    let models = corpus(200);
    let (mut exact_worst, mut checks) = (0.0f64, 0usize);
    for (i, m) in models.iter().enumerate() {
        let order = min_fill_order(m);
        let width = order.induced_width();
        let (truth, log_z) = enumerate_joint(m).map_err(|e| e.to_string())?;
        let mut prev = f64::INFINITY;
        for ib in 1..=width.max(2) + 1 {
            let r = wmb_marginals(m, &order, WmbConfig::with_i_bound(ib)).map_err(|e| format!("model {i}: {e}"))?;
            let ub = r.upper_bound();
            ensure!(
                ub <= prev + 1e-12,
                "model {i}: bound rose from {prev} to {ub} at i-bound {ib}"
            );
            if ib == 2 {
                ensure!(
                    ub >= log_z - 1e-9,
                    "model {i}: i-bound 2 bound {ub} below log Z {log_z}"
                );
            }
            if ib > width {
                let d = r.marginals.max_abs_diff(&truth);
                ensure!(
                    d < 1e-6,
                    "model {i}: i-bound {ib} > width {width} but marginals differ by {d:e}"
                );
                exact_worst = exact_worst.max(d);
            }
            prev = ub;
            checks += 1;
        }
    }
    Ok(format!(
        "{} models, {checks} runs; wide-enough i-bound max marginal diff {exact_worst:.2e}; bounds valid and non-increasing",
        models.len()
    ))
}

fn c5_monotonicity() -> Outcome {
    let atoms = vec![AtomRecord::new("a", "Atom.").unwrap()];
    // a base model with evidence pulling both ways
    let base_ctx = vec![context("b0", "Base one.", 0.9), context("b1", "Base two.", 0.8)];
    let base_edges = vec![
        edge("b0", "a", Relation::Contradict, 0.7),
        edge("b1", "a", Relation::Entail, 0.6),
    ];
    let base_pairs = vec![(1, 0, contradict(0.7)), (2, 0, entail(0.6))];
    let p_of = |contexts: &[ContextRecord], edges: &[RelationEdge]| -> Result<f64, String> {
        let built = build_fr_model(&atoms, contexts, edges, FrVariant::Fr2, 0.5, None).map_err(|e| e.to_string())?;
        Ok(exact_p_true(&built.model, built.bindings["a"]))
    };
    let base = p_of(&base_ctx, &base_edges)?;
    let base_ref = reference_marginals(&[0.5, 0.9, 0.8], &base_pairs)[0];
    ensure!((base - base_ref).abs() < 1e-12, "base {base} vs reference {base_ref}");
    let mut cells = 0;
    for p in [0.55, 0.7, 0.9, 0.99] {
        for q in [0.6, 0.9, 0.99] {
            for relation in [Relation::Entail, Relation::Contradict] {
                let mut ctx = base_ctx.clone();
                ctx.push(context("n", "New.", q));
                let mut edges = base_edges.clone();
                edges.push(edge("n", "a", relation, p));
                let with = p_of(&ctx, &edges)?;
                let mut pairs = base_pairs.clone();
                pairs.push((3, 0, table_for(relation, p)));
                let reference = reference_marginals(&[0.5, 0.9, 0.8, q], &pairs)[0];
                ensure!(
                    (with - reference).abs() < 1e-12,
                    "p*={p} q={q}: {with} vs reference {reference}"
                );
                match relation {
                    Relation::Entail => ensure!(with > base, "entail p*={p} q={q}: {with} not above {base}"),
                    _ => ensure!(with < base, "contradict p*={p} q={q}: {with} not below {base}"),
                }
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells; base P(a) = {base:.6}"))
}

fn c6_context_contradiction() -> Outcome {
    let baseline = two_context_reference();
    let mut shown = Vec::new();
    for p in [0.6, 0.7, 0.8, 0.9, 0.99] {
        let (atoms, mut contexts, mut edges) = two_context_parts();
        contexts.push(context("c3", "Third context.", 0.99));
        edges.push(edge("c3", "c2", Relation::Contradict, p));
        let built = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr3, 0.5, None).map_err(|e| e.to_string())?;
        let got = exact_p_true(&built.model, built.bindings["a1"]);
        let reference = reference_marginals(
            &[0.5, 0.99, 0.99, 0.99],
            &[(1, 0, entail(0.8)), (2, 0, contradict(0.9)), (3, 2, contradict(p))],
        )[0];
        ensure!(
            (got - reference).abs() < 1e-12,
            "p*={p}: {got} vs reference {reference}"
        );
        ensure!(got > baseline, "p*={p}: P(a1) = {got} not above {baseline}");
        shown.push(format!("{p}:{got:.4}"));
    }
    Ok(format!(
        "P(a1) by p* = {} (two-context value {baseline:.4})",
        shown.join(" ")
    ))
}

fn c7_e_measure() -> Outcome {
    for n in 1..=20 {
        let e = e_measure(&vec![0.5; n], E_EPSILON).map_err(|e| e.to_string())?;
        ensure!((e - 0.150515).abs() <= 1e-6, "n={n}: E = {e}");
        let zero = e_measure(&vec![1.0; n], E_EPSILON).map_err(|e| e.to_string())?;
        ensure!(zero == 0.0, "n={n}: all-true E = {zero}");
    }
    let e = e_measure(&[0.5], E_EPSILON).unwrap();
    Ok(format!("all 0.5 -> {e:.6}, all 1.0 -> 0"))
}

fn verdicts(labels: &[Label]) -> Vec<AtomVerdict> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| AtomVerdict::from_label(format!("a{i}"), l))
        .collect()
}

fn c8_metric_formulas() -> Outcome {
    use Label::*;
    let err = |e: factreason_core::Error| e.to_string();
    for k in [1, 5, 22] {
        let none = verdicts(&[Contradicted, Undecided, Contradicted]);
        ensure!(f1_at_k(&none, k).map_err(err)? == 0.0, "F1@{k} with S = 0 is not 0");
    }
    // S=3 of n=5, K=4
    let v = verdicts(&[Supported, Contradicted, Supported, Undecided, Supported]);
    let (pr, rk) = (3.0 / 5.0, 3.0 / 4.0);
    let f1 = 2.0 * pr * rk / (pr + rk);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    ensure!(close(precision(&v).map_err(err)?, pr), "precision");
    ensure!(close(recall_at_k(&v, 4).map_err(err)?, rk), "recall@4");
    ensure!(close(recall_at_k(&v, 2).map_err(err)?, 1.0), "recall saturates at K");
    ensure!(close(f1_at_k(&v, 4).map_err(err)?, f1), "F1@4");
    ensure!(close(mae(&[0.5, 1.0], &[0.62, 0.9]).map_err(err)?, 0.11), "MAE");
    ensure!(close(mae(&[0.6], &[0.62]).map_err(err)?, 0.02), "single MAE");
    ensure!(close(brier(&[0.8, 0.3], &[true, false]).map_err(err)?, 0.065), "Brier");
    ensure!(
        close(brier(&[0.5, 0.5], &[true, false]).map_err(err)?, 0.25),
        "constant Brier"
    );
    ensure!(brier(&[1.0, 0.0], &[true, false]).map_err(err)? == 0.0, "perfect Brier");
    Ok(format!("Pr {pr}, R_4 {rk}, F1@4 {f1:.6}, MAE 0.11, Brier 0.065"))
}

fn c9_relation_tables() -> Outcome {
    for p in [0.5, 0.8, 0.9] {
        for relation in [Relation::Entail, Relation::Contradict, Relation::Equivalence] {
            let f = relation_factor(&edge("s", "t", relation, p), 0, 1).map_err(|e| e.to_string())?;
            let want = table_for(relation, p);
            for x in [true, false] {
                for y in [true, false] {
                    let got = f.value_at(&[x, y]);
                    ensure!(
                        got == g(&want, x, y),
                        "{relation:?} p*={p} at ({x},{y}): {got} vs {}",
                        g(&want, x, y)
                    );
                }
            }
        }
    }
    Ok("entail, contradict and equivalence rows match for p* in {0.5, 0.8, 0.9}".into())
}

fn c10_prompt_fixtures() -> Outcome {
    let atomizer_reply = "- Glenn Allen Anzalone was born on June 23, 1955.\n\
        - Glenn Allen Anzalone is better known by his stage name Glenn Danzig.\n\
        - Glenn Danzig is an American singer, songwriter, musician, and record producer.\n\
        - Glenn Danzig is the founder of several rock bands, including Misfits, Samhain, and Danzig.\n\
        - Glenn Danzig owns the Evilive record label.\n\
        - Glenn Danzig owns Verotik, which is an adult-oriented comic book publishing company.";
    let atoms = parse_atoms(atomizer_reply);
    ensure!(atoms.len() == 6, "atomizer exemplar gave {} atoms", atoms.len());
    ensure!(
        atoms[4] == "Glenn Danzig owns the Evilive record label.",
        "atom 4 = {:?}",
        atoms[4]
    );
    for line in atomizer_reply.lines() {
        ensure!(
            prompts::ATOMIZER.contains(line.trim()),
            "exemplar line missing from template: {line}"
        );
    }

    for (reply, want) in [
        ("####John bought some apples.####", "John bought some apples."),
        (
            "####Sea level rise was a key part of the discussion.####",
            "Sea level rise was a key part of the discussion.",
        ),
        (
            "####Maria Sanchez presented her findings at the conference last year.####",
            "Maria Sanchez presented her findings at the conference last year.",
        ),
    ] {
        ensure!(
            parse_revision(reply).as_deref() == Some(want),
            "reviser reply {reply:?}"
        );
        ensure!(
            prompts::REVISER.contains(reply),
            "reviser exemplar missing from template"
        );
    }

    for (reply, want) in [
        ("Output: Contradiction", NliLabel::Contradiction),
        ("Contradiction", NliLabel::Contradiction),
        ("Neutral", NliLabel::Neutral),
        ("Entailment", NliLabel::Entailment),
    ] {
        let got = parse_label(reply).map_err(|e| e.to_string())?;
        ensure!(got == want, "NLI reply {reply:?} gave {got:?}");
    }
    ensure!(
        prompts::NLI.contains("Output: Contradiction"),
        "NLI exemplar missing from template"
    );

    for (reply, want) in [
        ("[Supported]", Label::Supported),
        ("[Contradicted]", Label::Contradicted),
        ("[Undecided]", Label::Undecided),
    ] {
        ensure!(
            parse_bracketed(reply).map_err(|e| e.to_string())? == want,
            "bracketed reply {reply:?}"
        );
        ensure!(
            prompts::FACTVERIFY.contains(reply) && prompts::DEEPSEEK.contains(reply),
            "{reply} missing from template"
        );
    }
    for (reply, want) in [
        ("Your decision: ###Undecided###", Label::Undecided),
        ("Your decision: ###Supported###", Label::Supported),
        ("Your decision: ###Contradicted###", Label::Contradicted),
    ] {
        ensure!(
            parse_hash_marked(reply).map_err(|e| e.to_string())? == want,
            "hash reply {reply:?}"
        );
        ensure!(prompts::VERISCORE.contains(reply), "{reply} missing from template");
    }
    ensure!(parse_true_false("True").ok() == Some(Label::Supported), "True");
    ensure!(
        parse_true_false("Output: False.").ok() == Some(Label::Contradicted),
        "False"
    );
    Ok("atomizer, reviser, NLI, bracketed, ###-marked and True/False exemplars parse as documented".into())
}

fn hit(title: &str, content: &str) -> SearchHit {
    SearchHit {
        title: title.into(),
        link: format!("https://example.org/{}", title.replace(' ', "_")),
        snippet: String::new(),
        content: content.into(),
    }
}

fn c11_end_to_end_determinism() -> Outcome {
    let dataset = [
        r#"{"id":"r3","prompt":"Who is Ana?","response":"Ana is a painter. She lives in Rome."}"#,
        r#"{"id":"r1","prompt":"Who is Ben?","response":"Ben is a chemist. Ben was born in 1970. Ben won a prize."}"#,
        r#"{"id":"r2","prompt":"Who is Cy?","response":"Cy plays chess."}"#,
    ]
    .join("\n");
    let entries = parse_dataset(&dataset, DatasetFormat::Unlabeled).map_err(|e| e.to_string())?;
    let llm = ScriptedLlm::new()
        .revision("She lives in Rome.", "Ana lives in Rome.")
        .relation("Ana paints landscapes.", "Ana is a painter.", "entailment", 0.92)
        .relation("Ana moved to Milan.", "Ana lives in Rome.", "contradiction", 0.85)
        .relation("Ben is an organic chemist.", "Ben is a chemist.", "entailment", 0.97)
        .relation("Ben was born in 1971.", "Ben was born in 1970.", "contradiction", 0.8)
        .relation("Ben is an organic chemist.", "Ben was born in 1971.", "entailment", 0.6)
        .relation("Cy is a grandmaster.", "Cy plays chess.", "entailment", 0.99);
    let fixture = FixtureRetriever::new(BTreeMap::from([
        (
            "Ana is a painter.".to_string(),
            vec![
                hit("Ana", "Ana paints landscapes."),
                hit("Milan", "Ana moved to Milan."),
            ],
        ),
        (
            "Ana lives in Rome.".to_string(),
            vec![hit("Milan", "Ana moved to Milan.")],
        ),
        (
            "Ben is a chemist.".to_string(),
            vec![hit("Ben", "Ben is an organic chemist.")],
        ),
        (
            "Ben was born in 1970.".to_string(),
            vec![
                hit("Ben born", "Ben was born in 1971."),
                hit("Ben", "Ben is an organic chemist."),
            ],
        ),
        ("Cy plays chess.".to_string(), vec![hit("Cy", "Cy is a grandmaster.")]),
    ]));
    let services = Services::shared(
        LlmClient::new(Arc::new(llm), LlmConfig::new("scripted")),
        Arc::new(fixture),
    );
    let mut outputs = Vec::new();
    for limit in [1, 8, 1, 8] {
        let retriever = RetrieverConfig::new(RetrieverSource::CachedFixture, 5).map_err(|e| e.to_string())?;
        let mut pipeline = PipelineConfig::new(FrVariant::Fr3, retriever);
        pipeline.concurrency = limit;
        let config = RunConfig::new(Assessor::Fr3, "mini", 3, pipeline);
        let report = run_experiment(&entries, &config, &services).map_err(|e| e.to_string())?;
        ensure!(
            report.aggregate.failed == 0,
            "failed entries: {:?}",
            report.aggregate.failed_ids
        );
        outputs.push(render(&[report], ReportFormat::Json).map_err(|e| e.to_string())?);
    }
    ensure!(
        outputs.windows(2).all(|w| w[0] == w[1]),
        "reports differ across runs or concurrency limits"
    );
    Ok(format!(
        "4 runs (limits 1, 8, 1, 8) gave identical {}-byte reports",
        outputs[0].len()
    ))
}

fn c12_conflicting_contexts() -> Outcome {
    let claim = "The bridge opened in 1932.";
    let (support, conflict) = ("The bridge was opened in 1932.", "The bridge opened in 1935.");
    let line = format!(
        r#"{{"id":"k","claim":"{claim}","contexts":[{{"text":"{support}","stance":"support"}},{{"text":"{conflict}","stance":"conflict"}}]}}"#
    );
    let entries = parse_dataset(&line, DatasetFormat::Conflicts).map_err(|e| e.to_string())?;
    let mut shown = Vec::new();
    for (p_support, p_conflict, want) in [(0.9, 0.8, Label::Supported), (0.9, 0.9, Label::Undecided)] {
        let llm = ScriptedLlm::new()
            .relation(support, claim, "entailment", p_support)
            .relation(conflict, claim, "contradiction", p_conflict);
        let services = Services::shared(
            LlmClient::new(Arc::new(llm), LlmConfig::new("scripted")),
            Arc::new(FixtureRetriever::default()),
        );
        let retriever = RetrieverConfig::new(RetrieverSource::CachedFixture, 5).map_err(|e| e.to_string())?;
        let config = RunConfig::new(
            Assessor::Fr2,
            "conflicts",
            1,
            PipelineConfig::new(FrVariant::Fr2, retriever),
        );
        let report = run_experiment(&entries, &config, &services).map_err(|e| e.to_string())?;
        let verdict = &report.entries[0].report.as_ref().ok_or("entry failed")?.verdicts[0];
        let p = verdict.p_true.ok_or("no posterior")?;
        let reference = reference_marginals(
            &[0.5, 0.99, 0.99],
            &[(1, 0, entail(p_support)), (2, 0, contradict(p_conflict))],
        )[0];
        ensure!(
            (p - reference).abs() < 1e-12,
            "support {p_support}/conflict {p_conflict}: {p} vs reference {reference}"
        );
        ensure!(
            verdict.label == want,
            "support {p_support}/conflict {p_conflict}: label {:?}",
            verdict.label
        );
        shown.push(format!("{p_support}/{p_conflict} -> {p:.4} {:?}", verdict.label));
    }
    Ok(shown.join("; "))
}

fn c13_uai_round_trip() -> Outcome {
    let (atoms, contexts, edges) = two_context_parts();
    let built = build_fr_model(&atoms, &contexts, &edges, FrVariant::Fr2, 0.5, None).map_err(|e| e.to_string())?;
    let text = write_uai(&built.model);
    let back = read_uai(&text).map_err(|e| e.to_string())?;
    ensure!(
        back.num_variables() == 3 && back.factors.len() == 5,
        "structure changed"
    );
    let reference = reference_marginals(&[0.5, 0.99, 0.99], &[(1, 0, entail(0.8)), (2, 0, contradict(0.9))]);
    let r = ve_marginals(&back, &min_fill_order(&back)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (var, want) in reference.iter().enumerate() {
        worst = worst.max((r.marginals.p_true(var) - want).abs());
    }
    ensure!(worst < 1e-12, "marginals differ by {worst:e} after the round trip");
    ensure!(write_uai(&back) == text, "second write differs");
    Ok(format!("max marginal diff {worst:.2e}"))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("two-context golden marginal", c1_two_context_golden),
        ("elimination vs enumeration", c2_oracle_equivalence),
        ("star-model closed form", c3_star_closed_form),
        ("weighted mini-bucket contract", c4_wmb_contract),
        ("monotonicity sweep", c5_monotonicity),
        ("contradicting a contradicting context", c6_context_contradiction),
        ("E-measure constants", c7_e_measure),
        ("metric formulas", c8_metric_formulas),
        ("relation factor tables", c9_relation_tables),
        ("prompt reply fixtures", c10_prompt_fixtures),
        ("end-to-end determinism", c11_end_to_end_determinism),
        ("conflicting contexts", c12_conflicting_contexts),
        ("UAI round trip", c13_uai_round_trip),
    ];
    let suite = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} ({ms} ms)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} ({ms} ms)", i + 1);
            }
        }
    }
    let total = suite.elapsed();
    println!(
        "acceptance: {} passed, {failed} failed in {total:.2?}",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
