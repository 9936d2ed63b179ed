//! Expression graphs over concept blocks.
//!
//! A section's `<expr>` elements form a DAG whose leaves are block ids and
//! whose interior nodes are AND / OR / COMPARED_TO combinators. Blocks or
//! expression outputs that nothing consumes are conjoined under a synthesized
//! AND root, so a section without expressions reads as "all criteria apply".

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::types::{BlockId, ExprSection, ExprType};

/// Upper bound on the number of disjuncts produced by [`normalize_to_dnf`].
pub const MAX_DNF_DISJUNCTS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("expression outputs form a cycle through {0}")]
    CycleDetected(BlockId),
    #[error("expression {output} references undefined id {input}")]
    DanglingRef { output: BlockId, input: BlockId },
    #[error("normal form would need more than {limit} disjuncts")]
    DnfBlowup { limit: usize },
    #[error("COMPARED_TO node {0} has no truth semantics")]
    ComparisonNode(String),
}

impl ExprError {
    pub fn code(&self) -> &'static str {
        match self {
            ExprError::CycleDetected(_) => "CYCLE_DETECTED",
            ExprError::DanglingRef { .. } => "DANGLING_REF",
            ExprError::DnfBlowup { .. } => "DNF_BLOWUP",
            ExprError::ComparisonNode(_) => "COMPARISON_NODE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Leaf,
    Op { op: ExprType, children: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    /// Block id for leaves, output id for document expressions, `None` for synthesized nodes.
    pub label: Option<BlockId>,
    pub kind: NodeKind,
}

/// Rooted DAG; nodes are stored so that every child precedes its parents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExprGraph {
    nodes: Vec<Node>,
    root: Option<usize>,
}

/// Tree view of a graph, ignoring node labels and sharing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExprTree {
    Leaf(BlockId),
    Op(ExprType, Vec<ExprTree>),
}

impl ExprTree {
    pub fn leaf(id: impl Into<BlockId>) -> Self {
        ExprTree::Leaf(id.into())
    }

    pub fn and(children: Vec<ExprTree>) -> Self {
        ExprTree::Op(ExprType::And, children)
    }

    pub fn or(children: Vec<ExprTree>) -> Self {
        ExprTree::Op(ExprType::Or, children)
    }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprTree::Leaf(id) => write!(f, "{id}"),
            ExprTree::Op(op, children) => {
                write!(f, "{op}(")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl ExprGraph {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    /// Leaf block ids in node order.
    pub fn leaves(&self) -> impl Iterator<Item = &BlockId> + '_ {
        self.nodes.iter().filter_map(|n| match n.kind {
            NodeKind::Leaf => n.label.as_ref(),
            NodeKind::Op { .. } => None,
        })
    }

    /// Number of leaf nodes.
    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Expression nesting depth; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let NodeKind::Op { children, .. } = &node.kind {
                depth[i] = 1 + children.iter().map(|&c| depth[c]).max().unwrap_or(0);
            }
        }
        self.root.map_or(0, |r| depth[r])
    }

    pub fn contains_comparison(&self) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n.kind, NodeKind::Op { op: ExprType::ComparedTo, .. }))
    }

    pub fn to_tree(&self) -> Option<ExprTree> {
        fn go(g: &ExprGraph, i: usize) -> ExprTree {
            let node = &g.nodes[i];
            match &node.kind {
                NodeKind::Leaf => ExprTree::Leaf(node.label.clone().unwrap_or_default()),
                NodeKind::Op { op, children } => ExprTree::Op(*op, children.iter().map(|&c| go(g, c)).collect()),
            }
        }
        self.root.map(|r| go(self, r))
    }

    /// Builds a graph from a tree, sharing one leaf node per distinct block id.
    pub fn from_tree(tree: &ExprTree) -> ExprGraph {
        fn go(g: &mut ExprGraph, leaves: &mut HashMap<BlockId, usize>, t: &ExprTree) -> usize {
            match t {
                ExprTree::Leaf(id) => *leaves.entry(id.clone()).or_insert_with(|| {
                    g.nodes.push(Node { label: Some(id.clone()), kind: NodeKind::Leaf });
                    g.nodes.len() - 1
                }),
                ExprTree::Op(op, children) => {
                    let children = children.iter().map(|c| go(g, leaves, c)).collect();
                    g.nodes.push(Node { label: None, kind: NodeKind::Op { op: *op, children } });
                    g.nodes.len() - 1
                }
            }
        }
        let mut g = ExprGraph::default();
        let root = go(&mut g, &mut HashMap::new(), tree);
        g.root = Some(root);
        g
    }
}

/// Formula rendering of the root, `TRUE` for an empty graph.
impl fmt::Display for ExprGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_tree() {
            Some(t) => write!(f, "{t}"),
            None => f.write_str("TRUE"),
        }
    }
}

/// Orders a section's expressions so every expression follows the
/// expressions it consumes. Inputs naming neither a block nor an expression
/// output of the section are reported as dangling.
pub(crate) fn topo_order<S: ExprSection>(section: &S) -> Result<Vec<usize>, ExprError> {
    let exprs = section.exprs();
    let blocks: HashSet<&str> = section.blocks().iter().map(|b| b.id().as_str()).collect();
    let by_output: HashMap<&str, usize> =
        exprs.iter().enumerate().map(|(i, e)| (e.output.as_str(), i)).collect();

    let mut indegree = vec![0usize; exprs.len()];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); exprs.len()];
    for (i, e) in exprs.iter().enumerate() {
        for input in &e.inputs {
            if let Some(&j) = by_output.get(input.as_str()) {
                indegree[i] += 1;
                consumers[j].push(i);
            } else if !blocks.contains(input.as_str()) {
                return Err(ExprError::DanglingRef { output: e.output.clone(), input: input.clone() });
            }
        }
    }

    let mut ready: Vec<usize> = (0..exprs.len()).rev().filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(exprs.len());
    while let Some(i) = ready.pop() {
        order.push(i);
        for &c in consumers[i].iter().rev() {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }
    if order.len() < exprs.len() {
        let stuck = (0..exprs.len()).find(|&i| indegree[i] > 0).unwrap_or(0);
        return Err(ExprError::CycleDetected(exprs[stuck].output.clone()));
    }
    Ok(order)
}

/// Builds the expression DAG of a population or suggestion section.
pub fn build_expr_graph<S: ExprSection>(section: &S) -> Result<ExprGraph, ExprError> {
    let order = topo_order(section)?;
    let exprs = section.exprs();

    let mut g = ExprGraph::default();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for block in section.blocks() {
        g.nodes.push(Node { label: Some(block.id().clone()), kind: NodeKind::Leaf });
        index.insert(block.id().as_str(), g.nodes.len() - 1);
    }
    let mut expr_node = vec![0usize; exprs.len()];
    for &i in &order {
        let e = &exprs[i];
        let children = e.inputs.iter().map(|id| index[id.as_str()]).collect();
        g.nodes.push(Node { label: Some(e.output.clone()), kind: NodeKind::Op { op: e.expr_type, children } });
        expr_node[i] = g.nodes.len() - 1;
        index.insert(e.output.as_str(), expr_node[i]);
    }

    let mut consumed = vec![false; g.nodes.len()];
    for node in &g.nodes {
        if let NodeKind::Op { children, .. } = &node.kind {
            for &c in children {
                consumed[c] = true;
            }
        }
    }
    // Unconsumed blocks first, then unconsumed expressions in document order.
    let leaf_count = g.nodes.len() - exprs.len();
    let tops: Vec<usize> = (0..leaf_count)
        .chain(expr_node.iter().copied())
        .filter(|&i| !consumed[i])
        .collect();

    g.root = match tops.len() {
        0 => None,
        1 => Some(tops[0]),
        _ => {
            g.nodes.push(Node { label: None, kind: NodeKind::Op { op: ExprType::And, children: tops } });
            Some(g.nodes.len() - 1)
        }
    };
    Ok(g)
}

/// One conjunct: leaf node indices in first-occurrence order, no repeats.
type Conjunct = Vec<usize>;

fn conjunct_key(c: &Conjunct) -> Vec<usize> {
    let mut k = c.clone();
    k.sort_unstable();
    k
}

struct Disjunction {
    terms: Vec<Conjunct>,
    seen: HashSet<Vec<usize>>,
}

impl Disjunction {
    fn new() -> Self {
        Disjunction { terms: Vec::new(), seen: HashSet::new() }
    }

    fn push(&mut self, c: Conjunct) -> Result<(), ExprError> {
        if self.seen.insert(conjunct_key(&c)) {
            self.terms.push(c);
            if self.terms.len() > MAX_DNF_DISJUNCTS {
                return Err(ExprError::DnfBlowup { limit: MAX_DNF_DISJUNCTS });
            }
        }
        Ok(())
    }
}

/// Rewrites an AND/OR graph as an OR of ANDs of leaves.
///
/// Leaf nodes are shared between conjuncts rather than copied. Single-leaf
/// conjuncts stay bare leaves and a single disjunct is not wrapped in an OR,
/// so a graph already in DNF comes back with the same shape.
pub fn normalize_to_dnf(graph: &ExprGraph) -> Result<ExprGraph, ExprError> {
    let Some(root) = graph.root else {
        return Ok(ExprGraph::default());
    };

    let mut forms: Vec<Vec<Conjunct>> = Vec::with_capacity(graph.nodes.len());
    for (i, node) in graph.nodes.iter().enumerate() {
        let form = match &node.kind {
            NodeKind::Leaf => vec![vec![i]],
            NodeKind::Op { op: ExprType::ComparedTo, .. } => {
                let name = node.label.as_ref().map_or_else(|| "(synthesized)".to_owned(), |l| l.to_string());
                return Err(ExprError::ComparisonNode(name));
            }
            NodeKind::Op { op: ExprType::Or, children } => {
                let mut acc = Disjunction::new();
                for &c in children {
                    for conj in &forms[c] {
                        acc.push(conj.clone())?;
                    }
                }
                acc.terms
            }
            NodeKind::Op { op: ExprType::And, children } => {
                let mut acc: Vec<Conjunct> = vec![Vec::new()];
                for &c in children {
                    let mut next = Disjunction::new();
                    for left in &acc {
                        for right in &forms[c] {
                            let mut conj = left.clone();
                            for &leaf in right {
                                if !conj.contains(&leaf) {
                                    conj.push(leaf);
                                }
                            }
                            next.push(conj)?;
                        }
                    }
                    acc = next.terms;
                }
                acc
            }
        };
        forms.push(form);
    }

    let mut out = ExprGraph::default();
    let mut remap: HashMap<usize, usize> = HashMap::new();
    for (i, node) in graph.nodes.iter().enumerate() {
        if node.kind == NodeKind::Leaf {
            out.nodes.push(node.clone());
            remap.insert(i, out.nodes.len() - 1);
        }
    }
    let mut disjuncts = Vec::new();
    for conj in &forms[root] {
        if let [single] = conj.as_slice() {
            disjuncts.push(remap[single]);
        } else {
            let children = conj.iter().map(|l| remap[l]).collect();
            out.nodes.push(Node { label: None, kind: NodeKind::Op { op: ExprType::And, children } });
            disjuncts.push(out.nodes.len() - 1);
        }
    }
    out.root = Some(if let [single] = disjuncts.as_slice() {
        *single
    } else {
        out.nodes.push(Node { label: None, kind: NodeKind::Op { op: ExprType::Or, children: disjuncts } });
        out.nodes.len() - 1
    });
    Ok(out)
}
