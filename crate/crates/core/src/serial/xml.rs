//! CRTS-XML.
//!
//! Canonical form: UTF-8 without BOM, LF newlines, two-space indentation,
//! leaf elements on one line, attributes sorted by name, and a fixed element
//! order (`population`, `suggestion`, `outcome`; within a section
//! `demographics`, `disorder`, `intervention`, `labResults`, `expr`).
//! Defaults such as `<negation>false</negation>` are always written out.

use std::collections::HashMap;
use std::fmt::Write as _;

use roxmltree::{Node, NodeType};

use super::{ensure_nonempty, ensure_valid, ParseMode, ParseWarning, ParsedDocument, SerialError};
use crate::model::{
    BlockId, Comparator, Demographics, DictionaryRef, Disorder, ExprNode, ExprSection, ExprType, GeneralOutcome, Intervention,
    LabCriterion, NumericConstraint, Outcome, Population, Quantity, Recommendation, Source, Suggestion, TimePeriod,
    UMLS,
};

type Result<T> = std::result::Result<T, SerialError>;

pub fn parse_xml(input: &[u8], mode: ParseMode) -> Result<ParsedDocument> {
    let text = std::str::from_utf8(input).map_err(|e| SerialError::XmlMalformed(format!("not UTF-8: {e}")))?;
    let text = text.strip_prefix('\u{FEFF}').unwrap_or(text);
    let doc = roxmltree::Document::parse(text).map_err(|e| SerialError::XmlMalformed(e.to_string()))?;
    let mut parser = Parser { mode, warnings: Vec::new() };
    let recommendation = parser.recommendation(doc.root_element())?;
    Ok(ParsedDocument { recommendation, warnings: parser.warnings })
}

struct Parser {
    mode: ParseMode,
    warnings: Vec<ParseWarning>,
}

/// Child elements of one element, keyed by name, with their paths.
struct Children<'a, 'input> {
    path: String,
    items: Vec<(&'a str, String, Node<'a, 'input>)>,
}

impl<'a, 'input> Children<'a, 'input> {
    fn all(&self, name: &str) -> impl Iterator<Item = (&str, Node<'a, 'input>)> + '_ {
        let name = name.to_owned();
        self.items.iter().filter(move |(n, _, _)| *n == name).map(|(_, p, node)| (p.as_str(), *node))
    }

    /// The single child named `name`; a repeat is a schema violation.
    fn one(&self, name: &str) -> Result<Option<(&str, Node<'a, 'input>)>> {
        let mut it = self.all(name);
        let first = it.next();
        if let Some((path, _)) = it.next() {
            return Err(SerialError::schema(path, format!("<{name}> may appear only once")));
        }
        Ok(first)
    }

    fn required(&self, name: &str) -> Result<(&str, Node<'a, 'input>)> {
        self.one(name)?
            .ok_or_else(|| SerialError::schema(&self.path, format!("missing required <{name}>")))
    }
}

fn element_name<'a>(node: &Node<'a, '_>) -> &'a str {
    node.tag_name().name()
}

impl Parser {
    fn unknown(&mut self, path: &str, message: String) -> Result<()> {
        match self.mode {
            ParseMode::Strict => Err(SerialError::schema(path, message)),
            ParseMode::Lenient => {
                self.warnings.push(ParseWarning { path: path.to_owned(), message });
                Ok(())
            }
        }
    }

    fn attributes(&mut self, node: Node, path: &str, allowed: &[&str]) -> Result<()> {
        for attr in node.attributes() {
            if !allowed.contains(&attr.name()) || attr.namespace().is_some() {
                self.unknown(path, format!("unexpected attribute {:?}", attr.name()))?;
            }
        }
        Ok(())
    }

    /// Collects child elements, rejecting (or, leniently, skipping) names outside `allowed`.
    fn children<'a, 'input>(
        &mut self,
        node: Node<'a, 'input>,
        path: &str,
        allowed: &[&str],
    ) -> Result<Children<'a, 'input>> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut items = Vec::new();
        for child in node.children() {
            match child.node_type() {
                NodeType::Element => {
                    let name = element_name(&child);
                    let n = counts.entry(name).or_default();
                    *n += 1;
                    let child_path = format!("{path}/{name}[{n}]");
                    if allowed.contains(&name) && child.tag_name().namespace().is_none() {
                        items.push((name, child_path, child));
                    } else {
                        self.unknown(&child_path, format!("<{name}> is not allowed inside <{}>", element_name(&node)))?;
                    }
                }
                NodeType::Text if !child.text().unwrap_or_default().trim().is_empty() => {
                    self.unknown(path, "unexpected text content".to_owned())?;
                }
                _ => {}
            }
        }
        Ok(Children { path: path.to_owned(), items })
    }

    fn recommendation(&mut self, root: Node) -> Result<Recommendation> {
        let path = "/recommendation";
        if element_name(&root) != "recommendation" || root.tag_name().namespace().is_some() {
            return Err(SerialError::schema(
                format!("/{}", element_name(&root)),
                "root element must be <recommendation>",
            ));
        }
        self.attributes(root, path, &["id"])?;
        let kids = self.children(root, path, &["sourceText", "source", "population", "suggestion", "outcome"])?;

        let population = match kids.one("population")? {
            Some((p, n)) => self.population(n, p)?,
            None => Population::default(),
        };
        let suggestion = match kids.one("suggestion")? {
            Some((p, n)) => self.suggestion(n, p)?,
            None => Suggestion::default(),
        };
        let outcome = match kids.one("outcome")? {
            Some((p, n)) => self.outcome(n, p)?,
            None => Outcome::default(),
        };
        ensure_nonempty(&population, &suggestion, path)?;

        let doc_id = root
            .attribute("id")
            .ok_or_else(|| SerialError::schema(path, "missing required attribute \"id\""))?
            .to_owned();
        let source_text = match kids.one("sourceText")? {
            Some((p, n)) => Some(self.text(n, p)?),
            None => None,
        };
        let source = match kids.one("source")? {
            Some((p, n)) => Some(self.source(n, p)?),
            None => None,
        };
        Ok(Recommendation { doc_id, source_text, source, population, suggestion, outcome })
    }

    fn source(&mut self, node: Node, path: &str) -> Result<Source> {
        self.attributes(node, path, &[])?;
        let kids = self.children(node, path, &["origin", "citation"])?;
        let origin = self.opt_text(&kids, "origin")?;
        let citations = kids.all("citation").map(|(p, n)| self.text(n, p)).collect::<Result<_>>()?;
        Ok(Source { origin, citations })
    }

    fn population(&mut self, node: Node, path: &str) -> Result<Population> {
        self.attributes(node, path, &[])?;
        let kids = self.children(node, path, &["demographics", "disorder", "intervention", "labResults", "expr"])?;
        Ok(Population {
            demographics: kids.all("demographics").map(|(p, n)| self.demographics(n, p)).collect::<Result<_>>()?,
            disorders: kids.all("disorder").map(|(p, n)| self.disorder(n, p)).collect::<Result<_>>()?,
            interventions: kids.all("intervention").map(|(p, n)| self.intervention(n, p)).collect::<Result<_>>()?,
            lab_criteria: kids.all("labResults").map(|(p, n)| self.lab(n, p)).collect::<Result<_>>()?,
            exprs: kids.all("expr").map(|(p, n)| self.expr(n, p)).collect::<Result<_>>()?,
        })
    }

    fn suggestion(&mut self, node: Node, path: &str) -> Result<Suggestion> {
        self.attributes(node, path, &[])?;
        let kids = self.children(node, path, &["intervention", "expr"])?;
        Ok(Suggestion {
            interventions: kids.all("intervention").map(|(p, n)| self.intervention(n, p)).collect::<Result<_>>()?,
            exprs: kids.all("expr").map(|(p, n)| self.expr(n, p)).collect::<Result<_>>()?,
        })
    }

    fn outcome(&mut self, node: Node, path: &str) -> Result<Outcome> {
        self.attributes(node, path, &[])?;
        let kids = self.children(node, path, &["generalOutcome", "labResults"])?;
        Ok(Outcome {
            general: kids.all("generalOutcome").map(|(p, n)| self.general(n, p)).collect::<Result<_>>()?,
            lab_criteria: kids.all("labResults").map(|(p, n)| self.lab(n, p)).collect::<Result<_>>()?,
        })
    }

    /// Text of a leaf element, verbatim. Child elements are not allowed.
    fn text(&mut self, node: Node, path: &str) -> Result<String> {
        self.attributes(node, path, &[])?;
        self.leaf_text(node, path)
    }

    fn leaf_text(&mut self, node: Node, path: &str) -> Result<String> {
        let mut out = String::new();
        for child in node.children() {
            match child.node_type() {
                NodeType::Element => {
                    return Err(SerialError::schema(
                        path,
                        format!("<{}> must not contain elements", element_name(&node)),
                    ))
                }
                NodeType::Text => out.push_str(child.text().unwrap_or_default()),
                _ => {}
            }
        }
        Ok(out)
    }

    fn opt_text(&mut self, kids: &Children, name: &str) -> Result<Option<String>> {
        match kids.one(name)? {
            Some((p, n)) => Ok(Some(self.text(n, p)?)),
            None => Ok(None),
        }
    }

    fn req_text(&mut self, kids: &Children, name: &str) -> Result<String> {
        let (p, n) = kids.required(name)?;
        self.text(n, p)
    }

    fn parsed<T>(&mut self, kids: &Children, name: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match kids.one(name)? {
            Some((p, n)) => {
                let raw = self.text(n, p)?;
                f(&raw).map(Some).map_err(|m| SerialError::value(p, m))
            }
            None => Ok(None),
        }
    }

    fn id(&mut self, kids: &Children) -> Result<BlockId> {
        Ok(BlockId::new(self.req_text(kids, "id")?))
    }

    fn time_period(&mut self, kids: &Children) -> Result<TimePeriod> {
        Ok(self.parsed(kids, "timeperiod", |s| s.parse::<TimePeriod>())?.unwrap_or_default())
    }

    /// `<UMLSDictId>` or the `<dictionary>`/`<dictId>` pair.
    fn concept(&mut self, kids: &Children) -> Result<Option<DictionaryRef>> {
        let umls = self.opt_text(kids, "UMLSDictId")?;
        let dictionary = self.opt_text(kids, "dictionary")?;
        let dict_id = self.opt_text(kids, "dictId")?;
        match (umls, dictionary, dict_id) {
            (None, None, None) => Ok(None),
            (Some(cui), None, None) => Ok(Some(DictionaryRef::umls(cui))),
            (Some(cui), Some(d), None) if d == UMLS => Ok(Some(DictionaryRef::umls(cui))),
            (None, Some(d), Some(id)) => Ok(Some(DictionaryRef::new(d, id))),
            (Some(_), _, _) => Err(SerialError::schema(
                &kids.path,
                "<UMLSDictId> cannot be combined with another dictionary",
            )),
            (None, Some(_), None) => Err(SerialError::schema(&kids.path, "<dictionary> without <dictId>")),
            (None, None, Some(_)) => Err(SerialError::schema(&kids.path, "<dictId> without <dictionary>")),
        }
    }

    fn demographics(&mut self, node: Node, path: &str) -> Result<Demographics> {
        self.attributes(node, path, &[])?;
        let kids = self.children(node, path, &["id", "age", "gender", "ethnicity", "country"])?;
        let age = match kids.one("age")? {
            Some((p, n)) => {
                self.attributes(n, p, &["operator"])?;
                let raw = self.leaf_text(n, p)?;
                let value: Quantity = raw.parse().map_err(|m| SerialError::value(p, m))?;
                let operator = match n.attribute("operator") {
                    Some(tok) => Comparator::parse_token(tok)
                        .ok_or_else(|| SerialError::value(format!("{p}/@operator"), format!("unknown operator {tok:?}")))?,
                    None if value.is_range() => Comparator::InRange,
                    None => Comparator::Eq,
                };
                Some(NumericConstraint { operator, value })
            }
            None => None,
        };
        Ok(Demographics {
            id: self.id(&kids)?,
            age,
            gender: self.opt_text(&kids, "gender")?,
            ethnicity: self.opt_text(&kids, "ethnicity")?,
            country: self.opt_text(&kids, "country")?,
        })
    }

    fn disorder(&mut self, node: Node, path: &str) -> Result<Disorder> {
        self.attributes(node, path, &[])?;
        let kids = self.children(
            node,
            path,
            &["id", "name", "UMLSDictId", "dictionary", "dictId", "timeperiod", "negation"],
        )?;
        Ok(Disorder {
            id: self.id(&kids)?,
            name: self.req_text(&kids, "name")?,
            concept: self.concept(&kids)?,
            time_period: self.time_period(&kids)?,
            negation: self.parsed(&kids, "negation", parse_bool)?.unwrap_or(false),
        })
    }

    fn intervention(&mut self, node: Node, path: &str) -> Result<Intervention> {
        self.attributes(node, path, &[])?;
        let kids = self.children(
            node,
            path,
            &["id", "name", "type", "dictionary", "dictId", "UMLSDictId", "timeperiod", "modifierText", "grade"],
        )?;
        Ok(Intervention {
            id: self.id(&kids)?,
            name: self.req_text(&kids, "name")?,
            intervention_type: self.opt_text(&kids, "type")?,
            concept: self.concept(&kids)?,
            time_period: self.time_period(&kids)?,
            modifier_text: self.opt_text(&kids, "modifierText")?,
            grade: self.opt_text(&kids, "grade")?,
        })
    }

    fn lab(&mut self, node: Node, path: &str) -> Result<LabCriterion> {
        self.attributes(node, path, &[])?;
        let kids = self.children(node, path, &["id", "key", "value", "unit", "operator", "temporal"])?;
        let id = self.id(&kids)?;
        let key = self.req_text(&kids, "key")?;
        let (vp, vn) = kids.required("value")?;
        let raw_value = self.text(vn, vp)?;
        let value: Quantity = raw_value.parse().map_err(|m| SerialError::value(vp, m))?;
        let (op_path, op_node) = kids.required("operator")?;
        let raw_op = self.text(op_node, op_path)?;
        let operator = Comparator::parse_token(&raw_op)
            .ok_or_else(|| SerialError::value(op_path, format!("unknown operator {raw_op:?}")))?;
        Ok(LabCriterion {
            id,
            key,
            value,
            unit: self.opt_text(&kids, "unit")?,
            operator,
            temporal: self.opt_text(&kids, "temporal")?,
        })
    }

    fn general(&mut self, node: Node, path: &str) -> Result<GeneralOutcome> {
        self.attributes(node, path, &[])?;
        let kids = self.children(node, path, &["id", "outcomeText"])?;
        Ok(GeneralOutcome { id: self.id(&kids)?, outcome_text: self.req_text(&kids, "outcomeText")? })
    }

    fn expr(&mut self, node: Node, path: &str) -> Result<ExprNode> {
        self.attributes(node, path, &["type"])?;
        let raw_type = node
            .attribute("type")
            .ok_or_else(|| SerialError::schema(path, "<expr> needs a type attribute"))?;
        let expr_type: ExprType = raw_type.parse().map_err(|m| SerialError::value(format!("{path}/@type"), m))?;
        let kids = self.children(node, path, &["inputConceptId", "outputConceptId"])?;
        let inputs = self.req_text(&kids, "inputConceptId")?.split_whitespace().map(BlockId::from).collect();
        let output = BlockId::new(self.req_text(&kids, "outputConceptId")?);
        Ok(ExprNode { expr_type, inputs, output })
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, found {s:?}")),
    }
}

/// Serializes a valid document to canonical CRTS-XML.
pub fn write_xml(rec: &Recommendation) -> Result<String> {
    ensure_valid(rec)?;
    let mut w = Writer::default();
    w.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    w.open("recommendation", &[("id", &rec.doc_id)]);
    if let Some(text) = &rec.source_text {
        w.leaf("sourceText", text);
    }
    if let Some(source) = &rec.source {
        if source.origin.is_none() && source.citations.is_empty() {
            w.empty("source");
        } else {
            w.open("source", &[]);
            w.opt_leaf("origin", source.origin.as_deref());
            for c in &source.citations {
                w.leaf("citation", c);
            }
            w.close("source");
        }
    }

    let pop = &rec.population;
    w.section("population", ExprSection::is_empty(pop), |w| {
        for d in &pop.demographics {
            w.demographics(d);
        }
        for d in &pop.disorders {
            w.disorder(d);
        }
        for i in &pop.interventions {
            w.intervention(i);
        }
        for l in &pop.lab_criteria {
            w.lab(l);
        }
        for e in &pop.exprs {
            w.expr(e);
        }
    });
    let sug = &rec.suggestion;
    w.section("suggestion", ExprSection::is_empty(sug), |w| {
        for i in &sug.interventions {
            w.intervention(i);
        }
        for e in &sug.exprs {
            w.expr(e);
        }
    });
    let out = &rec.outcome;
    w.section("outcome", out.is_empty(), |w| {
        for g in &out.general {
            w.open("generalOutcome", &[]);
            w.leaf("id", g.id.as_str());
            w.leaf("outcomeText", &g.outcome_text);
            w.close("generalOutcome");
        }
        for l in &out.lab_criteria {
            w.lab(l);
        }
    });
    w.close("recommendation");
    Ok(w.out)
}

#[derive(Default)]
struct Writer {
    out: String,
    depth: usize,
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}

impl Writer {
    fn indent(&mut self) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
    }

    fn start_tag(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.out.push('<');
        self.out.push_str(name);
        let mut attrs = attrs.to_vec();
        attrs.sort_by(|a, b| a.0.cmp(b.0));
        for (k, v) in attrs {
            let _ = write!(self.out, " {k}=\"");
            escape_attr(v, &mut self.out);
            self.out.push('"');
        }
    }

    fn open(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.indent();
        self.start_tag(name, attrs);
        self.out.push_str(">\n");
        self.depth += 1;
    }

    fn close(&mut self, name: &str) {
        self.depth -= 1;
        self.indent();
        let _ = writeln!(self.out, "</{name}>");
    }

    fn empty(&mut self, name: &str) {
        self.indent();
        let _ = writeln!(self.out, "<{name}/>");
    }

    fn leaf_with(&mut self, name: &str, attrs: &[(&str, &str)], text: &str) {
        self.indent();
        self.start_tag(name, attrs);
        self.out.push('>');
        escape_text(text, &mut self.out);
        let _ = writeln!(self.out, "</{name}>");
    }

    fn leaf(&mut self, name: &str, text: &str) {
        self.leaf_with(name, &[], text);
    }

    fn opt_leaf(&mut self, name: &str, text: Option<&str>) {
        if let Some(t) = text {
            self.leaf(name, t);
        }
    }

    fn section(&mut self, name: &str, empty: bool, body: impl FnOnce(&mut Self)) {
        if empty {
            self.empty(name);
        } else {
            self.open(name, &[]);
            body(self);
            self.close(name);
        }
    }

    fn demographics(&mut self, d: &Demographics) {
        self.open("demographics", &[]);
        self.leaf("id", d.id.as_str());
        if let Some(age) = &d.age {
            self.leaf_with("age", &[("operator", age.operator.token())], &age.value.to_string());
        }
        self.opt_leaf("gender", d.gender.as_deref());
        self.opt_leaf("ethnicity", d.ethnicity.as_deref());
        self.opt_leaf("country", d.country.as_deref());
        self.close("demographics");
    }

    fn disorder(&mut self, d: &Disorder) {
        self.open("disorder", &[]);
        self.leaf("id", d.id.as_str());
        self.leaf("name", &d.name);
        match &d.concept {
            Some(c) if c.is_umls() => self.leaf("UMLSDictId", &c.dict_id),
            Some(c) => {
                self.leaf("dictionary", &c.dictionary);
                self.leaf("dictId", &c.dict_id);
            }
            None => {}
        }
        self.leaf("timeperiod", d.time_period.as_str());
        self.leaf("negation", if d.negation { "true" } else { "false" });
        self.close("disorder");
    }

    fn intervention(&mut self, i: &Intervention) {
        self.open("intervention", &[]);
        self.leaf("id", i.id.as_str());
        self.leaf("name", &i.name);
        self.opt_leaf("type", i.intervention_type.as_deref());
        if let Some(c) = &i.concept {
            self.leaf("dictionary", &c.dictionary);
            self.leaf("dictId", &c.dict_id);
        }
        self.leaf("timeperiod", i.time_period.as_str());
        self.opt_leaf("modifierText", i.modifier_text.as_deref());
        self.opt_leaf("grade", i.grade.as_deref());
        self.close("intervention");
    }

    fn lab(&mut self, l: &LabCriterion) {
        self.open("labResults", &[]);
        self.leaf("id", l.id.as_str());
        self.leaf("key", &l.key);
        self.leaf("value", &l.value.to_string());
        self.opt_leaf("unit", l.unit.as_deref());
        self.leaf("operator", l.operator.token());
        self.opt_leaf("temporal", l.temporal.as_deref());
        self.close("labResults");
    }

    fn expr(&mut self, e: &ExprNode) {
        self.open("expr", &[("type", e.expr_type.as_str())]);
        let inputs = e.inputs.iter().map(BlockId::as_str).collect::<Vec<_>>().join(" ");
        self.leaf("inputConceptId", &inputs);
        self.leaf("outputConceptId", e.output.as_str());
        self.close("expr");
    }
}
