//! Seeded generators and reference oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use crts::eval::TruthValue;
use crts::index::{normalize, Conjunct, Facet, IndexKey, LabConstraint, Query};
use crts::model::{
    BlockId, Comparator, Demographics, DictionaryRef, Disorder, ExprNode, ExprTree, ExprType, GeneralOutcome,
    Intervention, LabCriterion, NumericConstraint, Outcome, Population, Quantity, Recommendation, SectionKind, Source,
    Suggestion, TimePeriod,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn corpus_dir() -> PathBuf {
    manifest_dir().join("corpus")
}

/// Sorted corpus file paths.
pub fn corpus_files() -> Vec<PathBuf> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    files.sort();
    files
}

const WORDS: &[&str] = &[
    "heart", "failure", "Chagas", "amiodarone", "beta", "blocker", "LVEF", "ICD", "diet", "sodium", "renal",
    "x", "&", "<tag>", "a>b", "\"quoted\"", "it's", "ß", "µg", "→", "≤", "日本", "]]>", "&amp;", "--",
];

/// Non-blank text with markup-significant characters and odd whitespace.
pub fn text(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(1..=4);
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            s.push_str(match rng.gen_range(0..10) {
                0 => "  ",
                1 => "\t",
                2 => "\n",
                3 => "\r\n",
                _ => " ",
            });
        }
        s.push_str(WORDS.choose(rng).unwrap());
    }
    if rng.gen_bool(0.1) {
        s.insert(0, ' ');
    }
    if rng.gen_bool(0.1) {
        s.push('\n');
    }
    s
}

pub fn maybe_text(rng: &mut impl Rng) -> Option<String> {
    rng.gen_bool(0.5).then(|| text(rng))
}

/// Whitespace-free token.
pub fn token(rng: &mut impl Rng) -> String {
    const CHARS: &[u8] = b"abcXYZ019-_.&<>\"'";
    let n = rng.gen_range(1..=6);
    (0..n).map(|_| *CHARS.choose(rng).unwrap() as char).collect()
}

pub fn number(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..5) {
        0 => rng.gen_range(0..200) as f64,
        1 => rng.gen_range(-100.0..100.0),
        2 => rng.gen_range(0..1000) as f64 / 10.0,
        3 => rng.gen::<f64>() * 1e-6,
        _ => rng.gen_range(-1e12..1e12),
    }
}

pub fn quantity(rng: &mut impl Rng) -> (Comparator, Quantity) {
    let op = *Comparator::ALL.choose(rng).unwrap();
    if op == Comparator::InRange {
        let a = number(rng);
        let b = number(rng);
        (op, Quantity::Range { low: a.min(b), high: a.max(b) })
    } else {
        (op, Quantity::Scalar(number(rng)))
    }
}

fn period(rng: &mut impl Rng) -> TimePeriod {
    *[TimePeriod::Current, TimePeriod::Past, TimePeriod::Unspecified].choose(rng).unwrap()
}

fn concept(rng: &mut impl Rng) -> Option<DictionaryRef> {
    match rng.gen_range(0..4) {
        0 => None,
        1 => Some(DictionaryRef::new(*["MeSH", "SNOMED CT", "local & co"].choose(rng).unwrap(), token(rng))),
        _ => Some(DictionaryRef::umls(format!("C{:07}", rng.gen_range(0..10_000_000)))),
    }
}

/// Hands out ids unique within one document.
pub struct Ids {
    prefix: String,
    next: usize,
}

impl Ids {
    pub fn new(rng: &mut impl Rng) -> Self {
        let prefix = if rng.gen_bool(0.5) { String::new() } else { token(rng) };
        Ids { prefix, next: 1 }
    }

    pub fn fresh(&mut self) -> BlockId {
        let id = BlockId::new(format!("{}{}", self.prefix, self.next));
        self.next += 1;
        id
    }
}

pub fn demographics(rng: &mut impl Rng, ids: &mut Ids) -> Demographics {
    let mut d = Demographics { id: ids.fresh(), ..Default::default() };
    loop {
        if rng.gen_bool(0.5) {
            let value = if rng.gen_bool(0.3) {
                let a = rng.gen_range(0..90) as f64;
                NumericConstraint { operator: Comparator::InRange, value: Quantity::Range { low: a, high: a + 10.0 } }
            } else {
                let op = *[Comparator::Lt, Comparator::Le, Comparator::Gt, Comparator::Ge, Comparator::Eq, Comparator::Ne]
                    .choose(rng)
                    .unwrap();
                NumericConstraint { operator: op, value: Quantity::Scalar(rng.gen_range(0..100) as f64) }
            };
            d.age = Some(value);
        }
        d.gender = maybe_text(rng);
        d.ethnicity = maybe_text(rng);
        d.country = maybe_text(rng);
        if d.age.is_some() || d.gender.is_some() || d.ethnicity.is_some() || d.country.is_some() {
            return d;
        }
    }
}

pub fn disorder(rng: &mut impl Rng, ids: &mut Ids) -> Disorder {
    Disorder {
        id: ids.fresh(),
        name: text(rng),
        concept: concept(rng),
        time_period: period(rng),
        negation: rng.gen_bool(0.3),
    }
}

pub fn intervention(rng: &mut impl Rng, ids: &mut Ids) -> Intervention {
    Intervention {
        id: ids.fresh(),
        name: text(rng),
        intervention_type: maybe_text(rng),
        concept: concept(rng),
        time_period: period(rng),
        modifier_text: maybe_text(rng),
        grade: rng.gen_bool(0.5).then(|| token(rng)),
    }
}

pub fn lab(rng: &mut impl Rng, ids: &mut Ids) -> LabCriterion {
    let (operator, value) = quantity(rng);
    LabCriterion {
        id: ids.fresh(),
        key: text(rng),
        value,
        unit: maybe_text(rng),
        operator,
        temporal: maybe_text(rng),
    }
}

/// Random DAG of expressions over `leaves`; outputs come from `ids`.
pub fn exprs(rng: &mut impl Rng, leaves: &[BlockId], ids: &mut Ids, comparisons: bool) -> Vec<ExprNode> {
    if leaves.len() < 2 {
        return Vec::new();
    }
    let mut pool: Vec<BlockId> = leaves.to_vec();
    let count = rng.gen_range(0..=leaves.len());
    let mut out = Vec::new();
    for _ in 0..count {
        let arity = if comparisons && rng.gen_bool(0.2) { 2 } else { rng.gen_range(2..=3.min(pool.len())) };
        let inputs: Vec<BlockId> = pool.choose_multiple(rng, arity).cloned().collect();
        let expr_type = if arity == 2 && comparisons && rng.gen_bool(0.2) {
            ExprType::ComparedTo
        } else if rng.gen_bool(0.5) {
            ExprType::And
        } else {
            ExprType::Or
        };
        let output = ids.fresh();
        pool.push(output.clone());
        out.push(ExprNode { expr_type, inputs, output });
    }
    out.shuffle(rng);
    out
}

pub fn recommendation(rng: &mut impl Rng, doc_id: String) -> Recommendation {
    let mut ids = Ids::new(rng);
    let mut population = Population::default();
    loop {
        for _ in 0..rng.gen_range(0..=1) {
            population.demographics.push(demographics(rng, &mut ids));
        }
        for _ in 0..rng.gen_range(0..=3) {
            population.disorders.push(disorder(rng, &mut ids));
        }
        for _ in 0..rng.gen_range(0..=2) {
            population.interventions.push(intervention(rng, &mut ids));
        }
        for _ in 0..rng.gen_range(0..=2) {
            population.lab_criteria.push(lab(rng, &mut ids));
        }
        if rng.gen_bool(0.8) || !population_is_empty(&population) {
            break;
        }
    }
    let mut suggestion = Suggestion::default();
    for _ in 0..rng.gen_range(usize::from(population_is_empty(&population))..=3) {
        suggestion.interventions.push(intervention(rng, &mut ids));
    }
    let pop_ids = block_ids(&population);
    population.exprs = exprs(rng, &pop_ids, &mut ids, false);
    let sug_ids: Vec<BlockId> = suggestion.interventions.iter().map(|i| i.id.clone()).collect();
    suggestion.exprs = exprs(rng, &sug_ids, &mut ids, true);

    let mut outcome = Outcome::default();
    for _ in 0..rng.gen_range(0..=2) {
        outcome.general.push(GeneralOutcome { id: ids.fresh(), outcome_text: text(rng) });
    }
    for _ in 0..rng.gen_range(0..=1) {
        outcome.lab_criteria.push(lab(rng, &mut ids));
    }
    let source = rng.gen_bool(0.5).then(|| Source {
        origin: maybe_text(rng),
        citations: (0..rng.gen_range(0..=2)).map(|_| text(rng)).collect(),
    });
    Recommendation { doc_id, source_text: maybe_text(rng), source, population, suggestion, outcome }
}

fn population_is_empty(p: &Population) -> bool {
    p.demographics.is_empty() && p.disorders.is_empty() && p.interventions.is_empty() && p.lab_criteria.is_empty()
}

pub fn block_ids(p: &Population) -> Vec<BlockId> {
    p.demographics
        .iter()
        .map(|b| b.id.clone())
        .chain(p.disorders.iter().map(|b| b.id.clone()))
        .chain(p.interventions.iter().map(|b| b.id.clone()))
        .chain(p.lab_criteria.iter().map(|b| b.id.clone()))
        .collect()
}

/// A population of `n` plain disorders ("1".."n") wired by random expressions.
pub fn population_with_leaves(rng: &mut impl Rng, n: usize) -> Population {
    let mut ids = Ids { prefix: String::new(), next: 1 };
    let disorders: Vec<Disorder> = (0..n)
        .map(|_| Disorder { id: ids.fresh(), name: "d".into(), ..Default::default() })
        .collect();
    let leaves: Vec<BlockId> = disorders.iter().map(|d| d.id.clone()).collect();
    let exprs = exprs(rng, &leaves, &mut ids, false);
    Population { disorders, exprs, ..Default::default() }
}

// Three-valued tables written out in full, independent of the library's min/max.
pub fn kleene_and(a: TruthValue, b: TruthValue) -> TruthValue {
    use TruthValue::*;
    match (a, b) {
        (False, _) | (_, False) => False,
        (True, True) => True,
        _ => Unknown,
    }
}

pub fn kleene_or(a: TruthValue, b: TruthValue) -> TruthValue {
    use TruthValue::*;
    match (a, b) {
        (True, _) | (_, True) => True,
        (False, False) => False,
        _ => Unknown,
    }
}

/// Recursive reference evaluator over a tree.
pub fn reference_eval(tree: &ExprTree, value: &dyn Fn(&BlockId) -> TruthValue) -> TruthValue {
    match tree {
        ExprTree::Leaf(id) => value(id),
        ExprTree::Op(ExprType::And, children) => {
            children.iter().fold(TruthValue::True, |acc, c| kleene_and(acc, reference_eval(c, value)))
        }
        ExprTree::Op(ExprType::Or, children) => {
            children.iter().fold(TruthValue::False, |acc, c| kleene_or(acc, reference_eval(c, value)))
        }
        ExprTree::Op(ExprType::ComparedTo, _) => panic!("comparison in a population graph"),
    }
}

/// Every assignment of `values` to `n` positions, in lexicographic order.
pub fn assignments<T: Copy>(values: &[T], n: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

// ---- index corpus and queries ----

pub const VOCAB_CUIS: &[&str] = &["C0018801", "C0007930", "C0012798", "C0001645", "C0002598", "C0004238"];
pub const VOCAB_NAMES: &[&str] = &["Heart failure", "Diuretics", "Amiodarone", "heart FAILURE ", "ICD", "Diabetes"];
pub const VOCAB_TYPES: &[&str] = &["drug", "Devices", "Procedure", "therapy"];
pub const VOCAB_LABS: &[&str] = &["LVEF", "Rassi score", "lvef", "BNP"];
pub const VOCAB_OUTCOMES: &[&str] = &["reduce shocks", "survival", "Reduce shocks"];

fn small_concept(rng: &mut impl Rng) -> Option<DictionaryRef> {
    rng.gen_bool(0.8).then(|| DictionaryRef::umls(*VOCAB_CUIS.choose(rng).unwrap()))
}

/// A document drawn from a small vocabulary so queries hit often.
pub fn index_document(rng: &mut impl Rng, doc_id: String) -> Recommendation {
    let mut ids = Ids { prefix: String::new(), next: 1 };
    let mut population = Population::default();
    for _ in 0..rng.gen_range(1..=3) {
        population.disorders.push(Disorder {
            id: ids.fresh(),
            name: VOCAB_NAMES.choose(rng).unwrap().to_string(),
            concept: small_concept(rng),
            time_period: TimePeriod::Current,
            negation: rng.gen_bool(0.2),
        });
    }
    for _ in 0..rng.gen_range(0..=1) {
        population.interventions.push(small_intervention(rng, &mut ids));
    }
    for _ in 0..rng.gen_range(0..=2) {
        let (operator, value) = small_lab_value(rng);
        population.lab_criteria.push(LabCriterion {
            id: ids.fresh(),
            key: VOCAB_LABS.choose(rng).unwrap().to_string(),
            value,
            unit: None,
            operator,
            temporal: None,
        });
    }
    let suggestion = Suggestion {
        interventions: (0..rng.gen_range(1..=2)).map(|_| small_intervention(rng, &mut ids)).collect(),
        exprs: Vec::new(),
    };
    let mut outcome = Outcome::default();
    if rng.gen_bool(0.5) {
        outcome.general.push(GeneralOutcome { id: ids.fresh(), outcome_text: VOCAB_OUTCOMES.choose(rng).unwrap().to_string() });
    }
    if rng.gen_bool(0.3) {
        outcome.lab_criteria.push(LabCriterion {
            id: ids.fresh(),
            key: VOCAB_LABS.choose(rng).unwrap().to_string(),
            value: Quantity::Scalar(rng.gen_range(0..100) as f64),
            unit: None,
            operator: Comparator::Ge,
            temporal: None,
        });
    }
    Recommendation { doc_id, population, suggestion, outcome, ..Default::default() }
}

fn small_intervention(rng: &mut impl Rng, ids: &mut Ids) -> Intervention {
    Intervention {
        id: ids.fresh(),
        name: VOCAB_NAMES.choose(rng).unwrap().to_string(),
        intervention_type: rng.gen_bool(0.7).then(|| VOCAB_TYPES.choose(rng).unwrap().to_string()),
        concept: small_concept(rng),
        ..Default::default()
    }
}

fn small_lab_value(rng: &mut impl Rng) -> (Comparator, Quantity) {
    let op = *Comparator::ALL.choose(rng).unwrap();
    let a = rng.gen_range(0..=8) as f64 * 5.0;
    if op == Comparator::InRange {
        (op, Quantity::Range { low: a, high: a + rng.gen_range(0..=3) as f64 * 5.0 })
    } else {
        (op, Quantity::Scalar(a))
    }
}

/// A random conjunct in its textual query form.
pub fn query_conjunct_text(rng: &mut impl Rng) -> String {
    let quote = |s: &str| format!("\"{s}\"");
    match rng.gen_range(0..10) {
        0 => format!("population.disorder.cui={}", VOCAB_CUIS.choose(rng).unwrap()),
        1 => format!("population.disorder.name={}", quote(VOCAB_NAMES.choose(rng).unwrap())),
        2 => format!("population.disorder.negated={}", VOCAB_CUIS.choose(rng).unwrap()),
        3 => format!("population.intervention.cui={}", VOCAB_CUIS.choose(rng).unwrap()),
        4 => format!("suggestion.intervention.name={}", quote(VOCAB_NAMES.choose(rng).unwrap())),
        5 => format!("suggestion.intervention.type={}", VOCAB_TYPES.choose(rng).unwrap()),
        6 => format!("population.lab.key={}", quote(VOCAB_LABS.choose(rng).unwrap())),
        7 => format!("outcome.outcome.name={}", quote(VOCAB_OUTCOMES.choose(rng).unwrap())),
        8 => format!("outcome.lab.key={}", quote(VOCAB_LABS.choose(rng).unwrap())),
        _ => {
            let op = ["<", "<=", ">", ">=", "="].choose(rng).unwrap();
            format!("population.lab.{}{op}{}", VOCAB_LABS.choose(rng).unwrap(), rng.gen_range(0..=9) * 5)
        }
    }
}

/// Satisfiability of `x <crit_op> crit_value` and `x <op> c` by probing every
/// point that can separate the two solution sets.
pub fn satisfiable_by_probing(crit_op: Comparator, crit_value: &Quantity, c: &LabConstraint) -> bool {
    let mut points: Vec<f64> = vec![c.value];
    match *crit_value {
        Quantity::Scalar(v) => points.push(v),
        Quantity::Range { low, high } => points.extend([low, high]),
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut probes = points.clone();
    probes.push(points[0] - 1.0);
    probes.push(points[points.len() - 1] + 1.0);
    for w in points.windows(2) {
        probes.push((w[0] + w[1]) / 2.0);
    }
    probes.into_iter().any(|x| {
        crit_op.holds(x, crit_value) == Some(true) && c.operator.holds(x, &Quantity::Scalar(c.value)) == Some(true)
    })
}

/// Linear-scan evaluation of one conjunct against one document.
pub fn scan_conjunct(rec: &Recommendation, c: &Conjunct) -> bool {
    let key = &c.key;
    let eq = |s: &str| normalize(s) == key.value;
    let cui_eq = |d: &Option<DictionaryRef>| d.as_ref().is_some_and(|d| eq(&d.dict_id));
    let hit = match (key.section, key.facet) {
        (SectionKind::Population, Facet::ConceptId) => {
            rec.population.disorders.iter().any(|d| !d.negation && cui_eq(&d.concept))
                || rec.population.interventions.iter().any(|i| cui_eq(&i.concept))
        }
        (SectionKind::Population, Facet::ConceptName) => {
            rec.population.disorders.iter().any(|d| !d.negation && eq(&d.name))
                || rec.population.interventions.iter().any(|i| eq(&i.name))
        }
        (SectionKind::Population, Facet::DisorderNegated) => {
            rec.population.disorders.iter().any(|d| d.negation && (cui_eq(&d.concept) || eq(&d.name)))
        }
        (SectionKind::Population, Facet::InterventionType) => {
            rec.population.interventions.iter().any(|i| i.intervention_type.as_deref().is_some_and(eq))
        }
        (SectionKind::Population, Facet::LabKey) => rec.population.lab_criteria.iter().any(|l| {
            eq(&l.key) && c.lab.as_ref().is_none_or(|lc| satisfiable_by_probing(l.operator, &l.value, lc))
        }),
        (SectionKind::Suggestion, Facet::ConceptId) => rec.suggestion.interventions.iter().any(|i| cui_eq(&i.concept)),
        (SectionKind::Suggestion, Facet::ConceptName) => rec.suggestion.interventions.iter().any(|i| eq(&i.name)),
        (SectionKind::Suggestion, Facet::InterventionType) => {
            rec.suggestion.interventions.iter().any(|i| i.intervention_type.as_deref().is_some_and(eq))
        }
        (SectionKind::Outcome, Facet::ConceptName) => rec.outcome.general.iter().any(|g| eq(&g.outcome_text)),
        (SectionKind::Outcome, Facet::LabKey) => rec.outcome.lab_criteria.iter().any(|l| eq(&l.key)),
        _ => false,
    };
    hit
}

pub fn scan(corpus: &[Recommendation], q: &Query) -> Vec<String> {
    let ids: BTreeSet<String> = corpus
        .iter()
        .filter(|r| q.conjuncts.iter().all(|c| scan_conjunct(r, c)))
        .map(|r| r.doc_id.clone())
        .collect();
    ids.into_iter().collect()
}

pub fn key(section: SectionKind, facet: Facet, value: &str) -> IndexKey {
    IndexKey::new(section, facet, value)
}

/// Evaluates a population straight from its expression list: every id that no
/// expression consumes is a root, and the roots are conjoined.
pub struct ReferenceEvaluator<'a> {
    /// Blocks first, in `block_ids` order, then expression outputs.
    ids: Vec<&'a BlockId>,
    ops: Vec<Option<(ExprType, Vec<usize>)>>,
    roots: Vec<usize>,
}

impl<'a> ReferenceEvaluator<'a> {
    pub fn new(p: &'a Population) -> Self {
        let blocks = p
            .demographics
            .iter()
            .map(|b| &b.id)
            .chain(p.disorders.iter().map(|b| &b.id))
            .chain(p.interventions.iter().map(|b| &b.id))
            .chain(p.lab_criteria.iter().map(|b| &b.id));
        let ids: Vec<&BlockId> = blocks.chain(p.exprs.iter().map(|e| &e.output)).collect();
        let pos = |id: &BlockId| ids.iter().position(|x| *x == id).expect("dangling reference");
        let mut ops: Vec<Option<(ExprType, Vec<usize>)>> = vec![None; ids.len() - p.exprs.len()];
        ops.extend(p.exprs.iter().map(|e| Some((e.expr_type, e.inputs.iter().map(pos).collect()))));
        let consumed: BTreeSet<usize> = ops.iter().flatten().flat_map(|(_, c)| c.iter().copied()).collect();
        let roots = (0..ids.len()).filter(|i| !consumed.contains(i)).collect();
        ReferenceEvaluator { ids, ops, roots }
    }

    fn eval_at(&self, i: usize, leaves: &[TruthValue], memo: &mut [Option<TruthValue>]) -> TruthValue {
        if let Some(v) = memo[i] {
            return v;
        }
        let v = match &self.ops[i] {
            None => leaves[i],
            Some((op, inputs)) => {
                let mut acc = if *op == ExprType::And { TruthValue::True } else { TruthValue::False };
                for &c in inputs {
                    let x = self.eval_at(c, leaves, memo);
                    acc = match op {
                        ExprType::And => kleene_and(acc, x),
                        ExprType::Or => kleene_or(acc, x),
                        ExprType::ComparedTo => panic!("comparison in a population"),
                    };
                }
                acc
            }
        };
        memo[i] = Some(v);
        v
    }

    /// `leaves` holds one value per block, in `block_ids` order.
    pub fn eval_values(&self, leaves: &[TruthValue]) -> TruthValue {
        let mut memo = vec![None; self.ids.len()];
        self.roots.iter().fold(TruthValue::True, |acc, &r| kleene_and(acc, self.eval_at(r, leaves, &mut memo)))
    }

    pub fn eval(&self, value: &dyn Fn(&BlockId) -> TruthValue) -> TruthValue {
        let leaves: Vec<TruthValue> =
            self.ids.iter().zip(&self.ops).map(|(id, op)| if op.is_none() { value(id) } else { TruthValue::Unknown }).collect();
        self.eval_values(&leaves)
    }
}

pub fn reference_population_eval(p: &Population, value: &dyn Fn(&BlockId) -> TruthValue) -> TruthValue {
    ReferenceEvaluator::new(p).eval(value)
}

// ---- single-element corruptions of canonical corpus files ----

pub struct Mutation {
    pub file: String,
    pub kind: &'static str,
    pub text: String,
    pub expected: &'static str,
}

const REQUIRED_TAGS: &[&str] = &["id", "name", "key", "value", "inputConceptId", "outputConceptId"];
const BAD_OPERATORS: &[&str] = &["=&gt;", "lte", "=&lt;", "~", "&lt;&gt;", ""];
const BAD_EXPR_TYPES: &[&str] = &["XOR", "NOT", "AND OR", ""];

fn tag_of(line: &str) -> Option<&str> {
    let t = line.trim_start().strip_prefix('<')?;
    let end = t.find(['>', ' ', '/'])?;
    Some(&t[..end])
}

fn inner(line: &str) -> Option<&str> {
    let start = line.find('>')? + 1;
    let end = line.rfind("</")?;
    Some(&line[start..end])
}

fn replace_line(lines: &[&str], at: usize, with: Option<String>) -> String {
    let mut out: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
    match with {
        Some(l) => out[at] = l,
        None => {
            out.remove(at);
        }
    }
    out.join("\n") + "\n"
}

/// Every candidate corruption of one canonical document.
pub fn candidate_mutations(file: &str, canon: &str) -> Vec<Mutation> {
    let lines: Vec<&str> = canon.lines().collect();
    let ids: Vec<&str> = lines.iter().filter(|l| tag_of(l) == Some("id")).filter_map(|l| inner(l)).collect();
    let mut out = Vec::new();
    let mut push = |kind, text, expected| out.push(Mutation { file: file.to_owned(), kind, text, expected });
    for (i, line) in lines.iter().enumerate() {
        let indent = &line[..line.len() - line.trim_start().len()];
        match tag_of(line) {
            Some(tag) if REQUIRED_TAGS.contains(&tag) => {
                push("deleted element", replace_line(&lines, i, None), "SCHEMA_VIOLATION");
                if tag == "id" {
                    let own = inner(line).unwrap();
                    if let Some(other) = ids.iter().find(|&&o| o != own) {
                        push("duplicated id", replace_line(&lines, i, Some(format!("{indent}<id>{other}</id>"))), "DUPLICATE_ID");
                    }
                }
                if tag == "inputConceptId" {
                    let refs: Vec<&str> = inner(line).unwrap().split(' ').collect();
                    for k in 0..refs.len() {
                        let mut r = refs.clone();
                        r[k] = "missing-block";
                        let l = format!("{indent}<inputConceptId>{}</inputConceptId>", r.join(" "));
                        push("dangling reference", replace_line(&lines, i, Some(l)), "DANGLING_REF");
                    }
                }
            }
            Some("operator") => {
                for bad in BAD_OPERATORS {
                    let l = format!("{indent}<operator>{bad}</operator>");
                    push("bad operator token", replace_line(&lines, i, Some(l)), "VALUE_PARSE");
                }
            }
            Some("expr") => {
                for bad in BAD_EXPR_TYPES {
                    let l = format!("{indent}<expr type=\"{bad}\">");
                    push("bad operator token", replace_line(&lines, i, Some(l)), "VALUE_PARSE");
                }
            }
            _ => {}
        }
    }
    out
}

/// `n` corruptions spread evenly over the four kinds.
pub fn mutations(seed: u64, n: usize) -> Vec<Mutation> {
    let mut by_kind: std::collections::BTreeMap<&'static str, Vec<Mutation>> = Default::default();
    for path in corpus_files() {
        let canon = std::fs::read_to_string(&path).unwrap();
        let file = path.file_name().unwrap().to_string_lossy().into_owned();
        for m in candidate_mutations(&file, &canon) {
            by_kind.entry(m.kind).or_default().push(m);
        }
    }
    let mut rng = rng(seed);
    for list in by_kind.values_mut() {
        list.shuffle(&mut rng);
    }
    let mut lists: Vec<_> = by_kind.into_values().map(Vec::into_iter).collect();
    let mut out = Vec::new();
    while out.len() < n {
        let before = out.len();
        for l in &mut lists {
            if out.len() < n {
                out.extend(l.next());
            }
        }
        assert!(out.len() > before, "ran out of mutations");
    }
    out
}

/// Codes produced by strict parsing followed by validation.
pub fn rejection_codes(text: &str) -> Vec<String> {
    match crts::serial::parse_xml(text.as_bytes(), crts::serial::ParseMode::Strict) {
        Err(e) => vec![e.code().to_owned()],
        Ok(doc) => crts::model::validate(&doc.recommendation).errors.iter().map(|i| i.code.as_str().to_owned()).collect(),
    }
}

// ---- shipped corpus ----

/// (document, section, block id, label, concept id) for every criterion block.
pub const CUI_TABLE: &[(&str, &str, &str, &str, &str)] = &[
    ("ccc-arrest-icd", "population", "1", "Chagas Cardiomyopathy", "C0007930"),
    ("ccc-arrest-icd", "population", "2", "Sudden cardiac arrest", "C1720824"),
    ("ccc-arrest-icd", "population", "3", "Sustained ventricular tachycardia", "C0750194"),
    ("ccc-arrest-icd", "population", "4", "Amiodarone", "C0002598"),
    ("ccc-arrest-icd", "population", "5", "Beta blocker", "C0001645"),
    ("ccc-arrest-icd", "suggestion", "6", "ICD", "C0002598"),
    ("hf-lvsd-ace", "population", "1", "Heart failure", "C0018801"),
    ("hf-lvsd-ace", "population", "2", "Left ventricular systolic dysfunction", "C1277187"),
    ("hf-lvsd-ace", "population", "3", "Left ventricular ejection fraction", ""),
    ("hf-lvsd-ace", "suggestion", "4", "angiotensin converting enzyme (ACE) inhibitor therapy", "C0003015"),
    ("ccc-rassi-amiodarone", "population", "1", "Chagas Cardiomyopathy", "C0007930"),
    ("ccc-rassi-amiodarone", "population", "2", "Ventricular tachycardia on Holter", "C0042514"),
    ("ccc-rassi-amiodarone", "population", "3", "Rassi score", ""),
    ("ccc-rassi-amiodarone", "suggestion", "4", "beta blocker therapy", "C0001645"),
    ("ccc-rassi-amiodarone", "suggestion", "5", "Amiodarone", "C0002598"),
    ("hf-beta-blockers", "population", "1", "Heart failure", "C0018801"),
    ("hf-beta-blockers", "population", "2", "Left ventricular ejection fraction (LVEF)", "C0428772"),
    ("hf-beta-blockers", "population", "3", "Myocardial infarction", "C0027051"),
    ("hf-beta-blockers", "population", "4", "Hypertension", "C0004238"),
    ("hf-beta-blockers", "population", "5", "Atrial fibrillation", "C0004238"),
    ("hf-beta-blockers", "suggestion", "6", "Beta blockers", "C0001645"),
    ("hf-bp-monitoring", "population", "1", "Heart failure", "C0018801"),
    ("hf-bp-monitoring", "population", "2", "Left ventricular ejection fraction (LVEF)", "C0428772"),
    ("hf-bp-monitoring", "suggestion", "3", "Blood pressure monitoring", "C0242876"),
    ("hf-arb-or-ace", "population", "1", "Heart failure", "C0018801"),
    ("hf-arb-or-ace", "population", "2", "Left ventricular ejection fraction (LVEF)", "C0428772"),
    ("hf-arb-or-ace", "suggestion", "3", "Angiotensin receptor blockers (ARBs)", "C0003015"),
    ("hf-arb-or-ace", "suggestion", "4", "Angiotensin-converting enzyme (ACE) inhibitors", "C0521942"),
    ("hf-low-sodium", "population", "1", "Heart failure", "C0018801"),
    ("hf-low-sodium", "population", "2", "Left ventricular ejection fraction (LVEF)", "C0428772"),
    ("hf-low-sodium", "suggestion", "3", "Low-sodium diet", "C0012169"),
    ("hf-ascvd-arb-ace", "population", "1", "Heart failure", "C0018801"),
    ("hf-ascvd-arb-ace", "population", "2", "Left ventricular ejection fraction (LVEF)", "C0428772"),
    ("hf-ascvd-arb-ace", "population", "3", "Atherosclerotic cardiovascular disease", "C0004153"),
    ("hf-ascvd-arb-ace", "population", "4", "Diabetes", "C0011847"),
    ("hf-ascvd-arb-ace", "suggestion", "5", "Angiotensin receptor blockers (ARBs)", "C0003015"),
    ("hf-ascvd-arb-ace", "suggestion", "6", "Angiotensin-converting enzyme (ACE) inhibitors", "C0521942"),
    ("hf-diuretics", "population", "1", "Systolic heart failure", "C1135191"),
    ("hf-diuretics", "population", "2", "Volume overload", "C0546817"),
    ("hf-diuretics", "suggestion", "3", "Diuretics", "C0012798"),
    ("ccc-icd-shocks", "population", "1", "Chagas Cardiomyopathy", "C0007930"),
    ("ccc-icd-shocks", "population", "2", "Implantable cardioverter defibrillator", "C0162589"),
    ("ccc-icd-shocks", "suggestion", "4", "Amiodarone", "C0002598"),
    ("ccc-icd-shocks", "suggestion", "5", "Beta blocker therapy", "C0001645"),
    ("ccc-icd-shocks", "outcome", "7", "reduce shocks", ""),
];

/// Expression wiring per document, as `TYPE(inputs)->output`.
pub const EXPR_TABLE: &[(&str, &[&str])] = &[
    ("ccc-arrest-icd", &["OR(2 3)->e1", "OR(4 5)->e2", "AND(1 e1 e2)->e3"]),
    ("hf-lvsd-ace", &["AND(1 2 3)->e1"]),
    ("ccc-rassi-amiodarone", &["AND(1 3 2)->e1", "OR(4 5)->e2"]),
    ("hf-beta-blockers", &["AND(1 4 2 5 3)->e1"]),
    ("hf-bp-monitoring", &["AND(1 2)->e1"]),
    ("hf-arb-or-ace", &["AND(1 2)->e1", "OR(3 4)->e2"]),
    ("hf-low-sodium", &["AND(1 2)->e1"]),
    ("hf-ascvd-arb-ace", &["OR(3 4)->e1", "AND(1 2 e1)->e2", "OR(5 6)->e3"]),
    ("hf-diuretics", &["AND(1 2)->e1"]),
    ("ccc-icd-shocks", &["AND(1 2)->3", "AND(4 5)->6"]),
];
