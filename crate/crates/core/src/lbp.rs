//! Linear branching programs: conversion from ResLin refutations and
//! parity decision trees, Pre/Post spans, read-once checks and tracing.
//!
//! Node `i` of a converted proof is step `i`; the source is the last step.
//! A query on `f` goes to `child0` when `<f, x> = 0`. Labels may be larger
//! than the restricted parent space (`A_child ⊇ A_v ∩ {f = c}`), which is
//! what the resolution rule gives.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formulas::{clause_falsified, CnfFormula};
use crate::gf2blocks::{AffineSpace, BlockStructure, GF2Matrix, GF2Vector};
use crate::proofs::{derive_clauses, AxiomSource, CheckError, LinearClause, LinearForm, Mode, ProofStep, ProofTrace};

#[derive(Debug, Error)]
pub enum LbpError {
    #[error("proof rejected: {0}")]
    Rejected(#[from] CheckError),
    #[error("proof does not derive the empty clause")]
    NotARefutation,
    #[error("decision tree has an error leaf")]
    ErrorLeaf,
    #[error("input has {found} bits, program has {expected} variables")]
    InputLength { expected: usize, found: usize },
    #[error("node {}: {reason}", .node + 1)]
    InvalidLabel { node: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Query { form: LinearForm, child0: usize, child1: usize },
    Forget { child: usize },
    /// Output: a clause id of the formula.
    Sink { clause: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LbpNode {
    pub kind: NodeKind,
    pub label: AffineSpace,
}

impl LbpNode {
    pub fn children(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match self.kind {
            NodeKind::Query { child0, child1, .. } => (Some(child0), Some(child1)),
            NodeKind::Forget { child } => (Some(child), None),
            NodeKind::Sink { .. } => (None, None),
        };
        a.into_iter().chain(b)
    }

    pub fn query(&self) -> Option<&LinearForm> {
        match &self.kind {
            NodeKind::Query { form, .. } => Some(form),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearBranchingProgram {
    pub nvars: usize,
    pub nodes: Vec<LbpNode>,
    pub source: usize,
}

/// Falsifying space of `c` over `blocks`.
fn negation(c: &LinearClause, blocks: BlockStructure) -> AffineSpace {
    let n = blocks.len();
    let forms: Vec<(GF2Vector, bool)> = c
        .equations()
        .map(|e| (LinearForm::new(e.form.iter().copied()).expect("canonical").to_vector(n), !e.rhs))
        .collect();
    AffineSpace::from_equations(blocks, forms.iter().map(|(f, b)| (f, *b))).expect("forms fit")
}

/// Flip the edges of an accepted ResLin refutation and negate its clauses.
pub fn proof_to_lbp<F: AxiomSource + ?Sized>(f: &F, p: &ProofTrace) -> Result<LinearBranchingProgram, LbpError> {
    proof_to_lbp_blocks(f, p, 1)
}

/// As `proof_to_lbp`, with labels over blocks of `b` variables.
pub fn proof_to_lbp_blocks<F: AxiomSource + ?Sized>(
    f: &F,
    p: &ProofTrace,
    b: usize,
) -> Result<LinearBranchingProgram, LbpError> {
    let (stats, clauses) = derive_clauses(f, p, Mode::ResLin)?;
    if !stats.refutation {
        return Err(LbpError::NotARefutation);
    }
    let nvars = f.nvars();
    let blocks = BlockStructure::new(nvars / b.max(1), b.max(1));
    let nodes = p
        .steps
        .iter()
        .zip(&clauses)
        .map(|(s, c)| {
            let kind = match s {
                ProofStep::Axiom(id) => NodeKind::Sink { clause: *id },
                // the left premise holds `form = 0`, so it is falsified when the answer is 1
                ProofStep::Resolve { left, right, pivot } => NodeKind::Query {
                    form: pivot.clone(),
                    child0: *right,
                    child1: *left,
                },
                ProofStep::Weaken { premise, .. } => NodeKind::Forget { child: *premise },
            };
            LbpNode {
                kind,
                label: negation(c, blocks),
            }
        })
        .collect();
    Ok(LinearBranchingProgram {
        nvars,
        nodes,
        source: p.len() - 1,
    })
}

/// Incrementally built span with a reduced echelon basis.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Span {
    rows: Vec<GF2Vector>,
    pivots: Vec<usize>,
}

impl Span {
    /// `v` with every pivot coordinate of the span cleared.
    pub fn reduce(&self, v: &GF2Vector) -> GF2Vector {
        let mut v = v.clone();
        for (r, &p) in self.rows.iter().zip(&self.pivots) {
            if v.get(p) {
                v.xor_assign(r);
            }
        }
        v
    }

    /// Add `v`; false when it was already in the span.
    pub fn insert(&mut self, v: &GF2Vector) -> bool {
        let v = self.reduce(v);
        let Some(p) = v.first_one() else {
            return false;
        };
        for r in self.rows.iter_mut() {
            if r.get(p) {
                r.xor_assign(&v);
            }
        }
        self.rows.push(v);
        self.pivots.push(p);
        true
    }

    pub fn contains(&self, v: &GF2Vector) -> bool {
        self.reduce(v).is_zero()
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn basis(&self) -> &[GF2Vector] {
        &self.rows
    }

    pub fn extend(&mut self, other: &Span) {
        for r in &other.rows {
            self.insert(r);
        }
    }

    pub fn to_matrix(&self, ncols: usize) -> GF2Matrix {
        GF2Matrix::from_rows(self.rows.clone(), ncols).expect("rows have ncols entries")
    }

    /// A nonzero vector in both spans, if there is one.
    pub fn common_vector(&self, other: &Span) -> Option<GF2Vector> {
        // rows carry (value, part of the value coming from self)
        let mut basis: Vec<(GF2Vector, GF2Vector, usize)> = Vec::new();
        let mut add = |v: GF2Vector, mine: GF2Vector| -> Option<GF2Vector> {
            let (mut v, mut mine) = (v, mine);
            for (r, m, p) in &basis {
                if v.get(*p) {
                    v.xor_assign(r);
                    mine.xor_assign(m);
                }
            }
            match v.first_one() {
                Some(p) => {
                    basis.push((v, mine, p));
                    None
                }
                None => Some(mine),
            }
        };
        for r in &self.rows {
            add(r.clone(), r.clone());
        }
        for r in &other.rows {
            let zero = GF2Vector::zeros(r.len());
            if let Some(m) = add(r.clone(), zero) {
                return Some(m);
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spans {
    pub pre: Vec<Span>,
    pub post: Vec<Span>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Query edge `(node, child)` whose form lies in `Post(child)`.
    Bottom { node: usize, child: usize, form: LinearForm },
    /// Query node whose form lies in `Pre(node)`.
    Top { node: usize, form: LinearForm },
    /// Node where `Pre` and `Post` share `form`.
    Strong { node: usize, form: LinearForm },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Regularity {
    pub bottom_read_once: bool,
    pub top_read_once: bool,
    pub strongly_read_once: bool,
    /// First violation of each kind, in node order.
    pub violations: Vec<Violation>,
}

impl LinearBranchingProgram {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn blocks(&self) -> BlockStructure {
        self.nodes.first().map_or(BlockStructure::new(self.nvars, 1), |n| n.label.blocks())
    }

    pub fn parents(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (v, n) in self.nodes.iter().enumerate() {
            for c in n.children() {
                out[c].push(v);
            }
        }
        out
    }

    /// Nodes reachable from the source, parents before children.
    pub fn topological_order(&self) -> Vec<usize> {
        let parents = self.parents();
        let mut reach = vec![false; self.nodes.len()];
        let mut stack = vec![self.source];
        reach[self.source] = true;
        while let Some(v) = stack.pop() {
            for c in self.nodes[v].children() {
                if !reach[c] {
                    reach[c] = true;
                    stack.push(c);
                }
            }
        }
        let mut indeg: Vec<usize> =
            (0..self.nodes.len()).map(|v| parents[v].iter().filter(|&&p| reach[p]).count()).collect();
        let mut queue = VecDeque::from([self.source]);
        let mut out = Vec::new();
        while let Some(v) = queue.pop_front() {
            out.push(v);
            for c in self.nodes[v].children() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        out
    }

    /// Pre by a forward pass, Post by a backward pass, over reachable nodes;
    /// unreachable nodes get empty spans.
    pub fn pre_post_spans(&self) -> Spans {
        let n = self.nodes.len();
        let order = self.topological_order();
        let mut pre = vec![Span::default(); n];
        for &v in &order {
            let mut out = pre[v].clone();
            if let Some(f) = self.nodes[v].query() {
                out.insert(&f.to_vector(self.nvars));
            }
            for c in self.nodes[v].children() {
                pre[c].extend(&out);
            }
        }
        let mut post = vec![Span::default(); n];
        for &v in order.iter().rev() {
            let mut s = Span::default();
            if let Some(f) = self.nodes[v].query() {
                s.insert(&f.to_vector(self.nvars));
            }
            for c in self.nodes[v].children() {
                s.extend(&post[c]);
            }
            post[v] = s;
        }
        Spans { pre, post }
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity_with(&self.pre_post_spans())
    }

    pub fn regularity_with(&self, spans: &Spans) -> Regularity {
        let order = self.topological_order();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        let (mut bottom, mut top, mut strong) = (None, None, None);
        for &v in &sorted {
            if let Some(f) = self.nodes[v].query() {
                let fv = f.to_vector(self.nvars);
                if top.is_none() && spans.pre[v].contains(&fv) {
                    top = Some(Violation::Top { node: v, form: f.clone() });
                }
                if bottom.is_none() {
                    if let Some(c) = self.nodes[v].children().find(|&c| spans.post[c].contains(&fv)) {
                        bottom = Some(Violation::Bottom {
                            node: v,
                            child: c,
                            form: f.clone(),
                        });
                    }
                }
            }
            if strong.is_none() {
                if let Some(x) = spans.pre[v].common_vector(&spans.post[v]) {
                    strong = Some(Violation::Strong {
                        node: v,
                        form: LinearForm::from_vector(&x).expect("nonzero"),
                    });
                }
            }
        }
        Regularity {
            bottom_read_once: bottom.is_none(),
            top_read_once: top.is_none(),
            strongly_read_once: strong.is_none(),
            violations: [bottom, top, strong].into_iter().flatten().collect(),
        }
    }

    /// Follow `beta` from the source for `t` query answers, passing forget
    /// nodes for free; stops early at a sink.
    pub fn trace(&self, beta: &GF2Vector, t: usize) -> Result<usize, LbpError> {
        Ok(self.trace_path(beta, t)?.last().copied().expect("source"))
    }

    /// Every node visited by `trace`, starting with the source.
    pub fn trace_path(&self, beta: &GF2Vector, t: usize) -> Result<Vec<usize>, LbpError> {
        if beta.len() != self.nvars {
            return Err(LbpError::InputLength {
                expected: self.nvars,
                found: beta.len(),
            });
        }
        let mut v = self.source;
        let mut path = vec![v];
        let mut answers = 0;
        while answers < t {
            v = match &self.nodes[v].kind {
                NodeKind::Sink { .. } => break,
                NodeKind::Forget { child } => *child,
                NodeKind::Query { form, child0, child1 } => {
                    answers += 1;
                    if form.vars().iter().fold(false, |acc, &x| acc ^ beta.get(x as usize - 1)) {
                        *child1
                    } else {
                        *child0
                    }
                }
            };
            path.push(v);
        }
        Ok(path)
    }

    /// Sink output reached by `beta`.
    pub fn output(&self, beta: &GF2Vector) -> Result<Option<usize>, LbpError> {
        let v = self.trace(beta, usize::MAX)?;
        Ok(match self.nodes[v].kind {
            NodeKind::Sink { clause } => Some(clause),
            _ => None,
        })
    }

    /// Maximum number of query nodes on a path from the source to each
    /// node, not counting the node itself; `None` when unreachable.
    pub fn query_depths(&self) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.nodes.len()];
        let order = self.topological_order();
        if let Some(&s) = order.first() {
            depth[s] = Some(0);
        }
        for &v in &order {
            let d = depth[v].expect("parents first");
            let step = usize::from(self.nodes[v].query().is_some());
            for c in self.nodes[v].children() {
                depth[c] = Some(depth[c].map_or(d + step, |x: usize| x.max(d + step)));
            }
        }
        depth
    }

    /// Label invariants: full source, children containing the restricted
    /// parent space, monochromatic sinks.
    pub fn validate<F: AxiomSource + ?Sized>(&self, f: &F) -> Result<(), LbpError> {
        let bad = |node: usize, reason: String| Err(LbpError::InvalidLabel { node, reason });
        let full = AffineSpace::full(self.blocks());
        if !self.nodes[self.source].label.contains_space(&full) {
            return bad(self.source, "source is not labeled by the full space".into());
        }
        for (v, node) in self.nodes.iter().enumerate() {
            match &node.kind {
                NodeKind::Query { form, child0, child1 } => {
                    let fv = form.to_vector(self.nvars);
                    for (c, bit) in [(*child0, false), (*child1, true)] {
                        if !self.nodes[c].label.contains_space(&node.label.with_equation(&fv, bit)) {
                            return bad(v, format!("child {} misses part of the {form}={} half", c + 1, bit as u8));
                        }
                    }
                }
                NodeKind::Forget { child } => {
                    if !self.nodes[*child].label.contains_space(&node.label) {
                        return bad(v, format!("child {} does not contain the label", child + 1));
                    }
                }
                NodeKind::Sink { clause } => {
                    let Some(c) = f.axiom_clause(*clause) else {
                        return bad(v, format!("no clause {}", clause + 1));
                    };
                    if !negation(&c, self.blocks()).contains_space(&node.label) {
                        return bad(v, format!("label not inside the falsifying space of clause {}", clause + 1));
                    }
                }
            }
        }
        Ok(())
    }

    /// Dump with 1-based node and clause ids.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "p lbp {} {} {}", self.nvars, self.nodes.len(), self.source + 1)?;
        for n in &self.nodes {
            match &n.kind {
                NodeKind::Query { form, child0, child1 } => writeln!(w, "q {form} {} {}", child0 + 1, child1 + 1)?,
                NodeKind::Forget { child } => writeln!(w, "f {}", child + 1)?,
                NodeKind::Sink { clause } => writeln!(w, "s {}", clause + 1)?,
            }
        }
        Ok(())
    }

    pub fn to_dump(&self) -> String {
        let mut out = Vec::new();
        self.write_dump(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("ascii")
    }
}

impl Regularity {
    /// One line per flag, then the violations.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "bottom_read_once {}", self.bottom_read_once);
        let _ = writeln!(s, "top_read_once {}", self.top_read_once);
        let _ = writeln!(s, "strongly_read_once {}", self.strongly_read_once);
        for v in &self.violations {
            let _ = match v {
                Violation::Bottom { node, child, form } => {
                    writeln!(s, "bottom violation: edge {} -> {} queries {form}", node + 1, child + 1)
                }
                Violation::Top { node, form } => writeln!(s, "top violation: node {} queries {form}", node + 1),
                Violation::Strong { node, form } => {
                    writeln!(s, "strong violation: node {} has {form} in Pre and Post", node + 1)
                }
            };
        }
        s
    }
}

/// Parity decision tree; a leaf outputs a clause id or `None` for the
/// error symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pdt {
    Leaf(Option<usize>),
    Query { form: LinearForm, zero: Box<Pdt>, one: Box<Pdt> },
}

impl Pdt {
    pub fn height(&self) -> usize {
        match self {
            Pdt::Leaf(_) => 0,
            Pdt::Query { zero, one, .. } => 1 + zero.height().max(one.height()),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Pdt::Leaf(_) => 1,
            Pdt::Query { zero, one, .. } => 1 + zero.size() + one.size(),
        }
    }

    /// Every query is a single variable.
    pub fn is_decision_tree(&self) -> bool {
        match self {
            Pdt::Leaf(_) => true,
            Pdt::Query { form, zero, one } => form.vars().len() == 1 && zero.is_decision_tree() && one.is_decision_tree(),
        }
    }

    /// Output on `x` (indexed by variable − 1).
    pub fn eval(&self, x: &[bool]) -> Option<usize> {
        let mut t = self;
        loop {
            match t {
                Pdt::Leaf(o) => return *o,
                Pdt::Query { form, zero, one } => t = if form.eval(x) { one } else { zero },
            }
        }
    }

    /// Program with one node per tree node, labeled by the path constraints.
    pub fn to_lbp(&self, nvars: usize) -> Result<LinearBranchingProgram, LbpError> {
        fn build(t: &Pdt, space: AffineSpace, nvars: usize, nodes: &mut Vec<LbpNode>) -> Result<usize, LbpError> {
            let kind = match t {
                Pdt::Leaf(None) => return Err(LbpError::ErrorLeaf),
                Pdt::Leaf(Some(c)) => NodeKind::Sink { clause: *c },
                Pdt::Query { form, zero, one } => {
                    let fv = form.to_vector(nvars);
                    let child0 = build(zero, space.with_equation(&fv, false), nvars, nodes)?;
                    let child1 = build(one, space.with_equation(&fv, true), nvars, nodes)?;
                    NodeKind::Query {
                        form: form.clone(),
                        child0,
                        child1,
                    }
                }
            };
            nodes.push(LbpNode { kind, label: space });
            Ok(nodes.len() - 1)
        }
        let mut nodes = Vec::new();
        let source = build(self, AffineSpace::full(BlockStructure::new(nvars, 1)), nvars, &mut nodes)?;
        Ok(LinearBranchingProgram { nvars, nodes, source })
    }
}

impl Pdt {
    /// Strongly read-once program computing the same search function.
    ///
    /// Each query is reduced against the echelon basis of the queries above
    /// it, so it vanishes on every pivot of its `Pre`; descendants only see
    /// larger pivot sets, hence `Pre(v) ∩ Post(v) = 0`. Queries already fixed
    /// by the path are skipped.
    pub fn to_read_once_lbp(&self, nvars: usize) -> Result<LinearBranchingProgram, LbpError> {
        fn build(t: &Pdt, space: AffineSpace, path: &Span, nvars: usize, nodes: &mut Vec<LbpNode>) -> Result<usize, LbpError> {
            let kind = match t {
                Pdt::Leaf(None) => return Err(LbpError::ErrorLeaf),
                Pdt::Leaf(Some(c)) => NodeKind::Sink { clause: *c },
                Pdt::Query { form, zero, one } => {
                    let fv = form.to_vector(nvars);
                    let reduced = path.reduce(&fv);
                    let offset = space.implied_value(&fv.xor(&reduced)).unwrap_or(false);
                    let (low, high) = if offset { (one, zero) } else { (zero, one) };
                    let Some(form) = LinearForm::from_vector(&reduced) else {
                        return build(low, space, path, nvars, nodes);
                    };
                    let mut below = path.clone();
                    below.insert(&reduced);
                    let child0 = build(low, space.with_equation(&reduced, false), &below, nvars, nodes)?;
                    let child1 = build(high, space.with_equation(&reduced, true), &below, nvars, nodes)?;
                    NodeKind::Query { form, child0, child1 }
                }
            };
            nodes.push(LbpNode { kind, label: space });
            Ok(nodes.len() - 1)
        }
        let mut nodes = Vec::new();
        let full = AffineSpace::full(BlockStructure::new(nvars, 1));
        let source = build(self, full, &Span::default(), nvars, &mut nodes)?;
        Ok(LinearBranchingProgram { nvars, nodes, source })
    }
}

/// Random parity decision tree solving the search problem of `f`: each
/// node queries a random form independent of the path so far, and stops
/// once some clause is falsified on the whole path space.
pub fn random_search_pdt(f: &CnfFormula, max_form_vars: usize, seed: u64) -> Pdt {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = f.nvars;
    let clauses: Vec<AffineSpace> = f
        .clauses
        .iter()
        .map(|c| negation(&LinearClause::from_literals(c), BlockStructure::new(n, 1)))
        .collect();
    fn grow(
        space: AffineSpace,
        path: &mut Span,
        clauses: &[AffineSpace],
        n: usize,
        max_form_vars: usize,
        rng: &mut ChaCha8Rng,
        f: &CnfFormula,
    ) -> Pdt {
        if let Some(c) = clauses.iter().position(|c| c.contains_space(&space)) {
            return Pdt::Leaf(Some(c));
        }
        if path.dim() == n {
            // a point: some clause is falsified unless f is satisfiable
            let x = space.point().map(|p| p.to_bits()).unwrap_or_else(|| vec![false; n]);
            return Pdt::Leaf(f.clauses.iter().position(|c| clause_falsified(c, &x)));
        }
        let fv = loop {
            let k = rng.gen_range(1..=max_form_vars.min(n));
            let v = GF2Vector::from_ones(n, (0..k).map(|_| rng.gen_range(0..n)));
            if !v.is_zero() && !path.contains(&v) {
                break v;
            }
        };
        path.insert(&fv);
        let zero = grow(space.with_equation(&fv, false), &mut path.clone(), clauses, n, max_form_vars, rng, f);
        let one = grow(space.with_equation(&fv, true), &mut path.clone(), clauses, n, max_form_vars, rng, f);
        Pdt::Query {
            form: LinearForm::from_vector(&fv).expect("nonzero"),
            zero: Box::new(zero),
            one: Box::new(one),
        }
    }
    let full = AffineSpace::full(BlockStructure::new(n, 1));
    grow(full, &mut Span::default(), &clauses, n, max_form_vars, &mut rng, f)
}

/// Random program shape over `nvars` variables with `nnodes` nodes; every
/// label is the full space, so only the structure is meaningful.
pub fn random_program(nvars: usize, nnodes: usize, seed: u64) -> LinearBranchingProgram {
    assert!(nnodes >= 1 && nvars >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = AffineSpace::full(BlockStructure::new(nvars, 1));
    // node i only points at larger ids; the last node is a sink
    let nodes = (0..nnodes)
        .map(|i| {
            let later = nnodes - i - 1;
            let kind = if later == 0 || rng.gen_bool(0.15) {
                NodeKind::Sink { clause: 0 }
            } else if rng.gen_bool(0.15) {
                NodeKind::Forget {
                    child: rng.gen_range(i + 1..nnodes),
                }
            } else {
                let k = rng.gen_range(1..=2.min(nvars));
                let form = LinearForm::new((0..k).map(|_| rng.gen_range(1..=nvars as u32))).unwrap_or(LinearForm::var(1));
                NodeKind::Query {
                    form,
                    child0: rng.gen_range(i + 1..nnodes),
                    child1: rng.gen_range(i + 1..nnodes),
                }
            };
            LbpNode {
                kind,
                label: full.clone(),
            }
        })
        .collect();
    LinearBranchingProgram { nvars, nodes, source: 0 }
}
