//! Pyramid graphs, stone formulas with an obfuscation map, gadget lifting
//! of CNFs and DIMACS input/output.
//!
//! Vertices and stones are 0-based in the API; variable ids are DIMACS
//! style, starting at 1. With `N` vertices the stone variables are laid
//! out as `P(v,j) = vN + j + 1`, `R(j) = N² + j + 1` and
//! `Z(v,j) = N² + N + v(N-1) + j + 1`. Lifting maps base variable `x` and
//! bit `k` to `(x-1)b + k + 1`.
//!
//! Clauses are stored sorted by variable (negative literal first) without
//! repeated literals. Tautologies are kept.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadgets::{Gadget, GadgetError};

pub type Clause = Vec<i32>;

#[derive(Debug, Error)]
pub enum FormulaError {
    #[error("pyramid needs at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("malformed graph: {0}")]
    MalformedGraph(String),
    #[error("obfuscation map is for {found} stones, graph has {expected} vertices")]
    RhoSize { expected: usize, found: usize },
    #[error("obfuscation map entry {value} outside 1..={max}")]
    RhoRange { value: u32, max: u32 },
    #[error("cannot lift with a constant gadget")]
    ConstantGadget,
    #[error("assignment has {found} values, formula has {expected} variables")]
    AssignmentLength { expected: usize, found: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn canonical(mut c: Clause) -> Clause {
    c.sort_by_key(|&l| (l.unsigned_abs(), l > 0));
    c.dedup();
    c
}

pub fn is_tautology(c: &[i32]) -> bool {
    c.windows(2).any(|w| w[0] == -w[1])
}

/// Directed acyclic graph with one root where every vertex has zero or
/// two ordered out-neighbours.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    children: Vec<Option<(usize, usize)>>,
    root: usize,
    sinks: Vec<usize>,
    positions: Vec<(usize, usize)>,
}

impl Dag {
    /// Builds a graph from `(parent, child)` pairs; a vertex's first edge
    /// gives its first child.
    pub fn new(n_vertices: usize, edges: &[(usize, usize)]) -> Result<Self, FormulaError> {
        let bad = |m: String| Err(FormulaError::MalformedGraph(m));
        if n_vertices == 0 {
            return bad("no vertices".into());
        }
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n_vertices];
        let mut indeg = vec![0usize; n_vertices];
        for &(a, c) in edges {
            if a >= n_vertices || c >= n_vertices {
                return bad(format!("edge ({a},{c}) out of range"));
            }
            out[a].push(c);
            indeg[c] += 1;
        }
        let mut children = Vec::with_capacity(n_vertices);
        for (v, o) in out.iter().enumerate() {
            match o.as_slice() {
                [] => children.push(None),
                [u, w] if u != w => children.push(Some((*u, *w))),
                _ => return bad(format!("vertex {v} must have 0 or 2 distinct out-neighbours")),
            }
        }
        let roots: Vec<usize> = (0..n_vertices).filter(|&v| indeg[v] == 0).collect();
        if roots.len() != 1 {
            return bad(format!("expected one root, found {}", roots.len()));
        }
        let dag = Dag {
            sinks: (0..n_vertices).filter(|&v| children[v].is_none()).collect(),
            children,
            root: roots[0],
            positions: Vec::new(),
        };
        if dag.topological_order().len() != n_vertices {
            return bad("graph has a cycle".into());
        }
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    pub fn children(&self, v: usize) -> Option<(usize, usize)> {
        self.children[v]
    }

    pub fn internal(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&v| self.children[v].is_some())
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.internal()
            .flat_map(|v| {
                let (u, w) = self.children[v].expect("internal");
                [(v, u), (v, w)]
            })
            .collect()
    }

    /// Pyramid coordinates `(level, index)`, 1-based, when known.
    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    /// Parents before children.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut indeg = vec![0usize; n];
        for (u, w) in self.children.iter().flatten() {
            indeg[*u] += 1;
            indeg[*w] += 1;
        }
        let mut stack: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = stack.pop() {
            order.push(v);
            if let Some((u, w)) = self.children[v] {
                for c in [w, u] {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        stack.push(c);
                    }
                }
            }
        }
        order
    }
}

/// Pyramid with `n` levels; vertex `(i, j)` (1-based) has row-major id
/// `i(i-1)/2 + j - 1` and children `(i+1, j)`, `(i+1, j+1)`.
pub fn pyramid(n: usize) -> Result<Dag, FormulaError> {
    if n < 2 {
        return Err(FormulaError::TooFewLevels(n));
    }
    let id = |i: usize, j: usize| i * (i - 1) / 2 + j - 1;
    let total = n * (n + 1) / 2;
    let mut edges = Vec::new();
    let mut positions = Vec::with_capacity(total);
    for i in 1..=n {
        for j in 1..=i {
            positions.push((i, j));
            if i < n {
                edges.push((id(i, j), id(i + 1, j)));
                edges.push((id(i, j), id(i + 1, j + 1)));
            }
        }
    }
    let mut dag = Dag::new(total, &edges)?;
    dag.positions = positions;
    Ok(dag)
}

/// Pyramid vertex id of `(level, index)`, both 1-based.
pub fn pyramid_id(level: usize, index: usize) -> usize {
    level * (level - 1) / 2 + index - 1
}

/// Variable layout of a stone formula over `n` vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoneVars {
    pub n: usize,
}

impl StoneVars {
    pub fn count(&self) -> usize {
        2 * self.n * self.n
    }

    pub fn p(&self, v: usize, j: usize) -> i32 {
        (v * self.n + j + 1) as i32
    }

    pub fn r(&self, j: usize) -> i32 {
        (self.n * self.n + j + 1) as i32
    }

    pub fn z(&self, v: usize, j: usize) -> i32 {
        debug_assert!(j + 1 < self.n);
        (self.n * self.n + self.n + v * (self.n - 1) + j + 1) as i32
    }

    pub fn name(&self, var: u32) -> VarName {
        let n = self.n;
        let x = var as usize - 1;
        if x < n * n {
            VarName::P { v: x / n, j: x % n }
        } else if x < n * n + n {
            VarName::R { j: x - n * n }
        } else {
            let y = x - n * n - n;
            VarName::Z {
                v: y / (n - 1),
                j: y % (n - 1),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarName {
    P { v: usize, j: usize },
    R { j: usize },
    Z { v: usize, j: usize },
    Y { base: u32, bit: usize },
    Plain(u32),
}

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarName::P { v, j } => write!(f, "P({},{})", v + 1, j + 1),
            VarName::R { j } => write!(f, "R({})", j + 1),
            VarName::Z { v, j } => write!(f, "Z({},{})", v + 1, j + 1),
            VarName::Y { base, bit } => write!(f, "Y({},{})", base, bit + 1),
            VarName::Plain(x) => write!(f, "x{x}"),
        }
    }
}

/// Bijection between variable names and ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VariableTable {
    Plain { nvars: usize },
    Stone(StoneVars),
    Lifted { base: Box<VariableTable>, b: usize },
}

impl VariableTable {
    pub fn nvars(&self) -> usize {
        match self {
            VariableTable::Plain { nvars } => *nvars,
            VariableTable::Stone(s) => s.count(),
            VariableTable::Lifted { base, b } => base.nvars() * b,
        }
    }

    pub fn name(&self, var: u32) -> VarName {
        match self {
            VariableTable::Plain { .. } => VarName::Plain(var),
            VariableTable::Stone(s) => s.name(var),
            VariableTable::Lifted { b, .. } => {
                let x = var as usize - 1;
                VarName::Y {
                    base: (x / b + 1) as u32,
                    bit: x % b,
                }
            }
        }
    }

    pub fn id(&self, name: VarName) -> Option<u32> {
        let id = match (self, name) {
            (VariableTable::Plain { .. }, VarName::Plain(x)) => x,
            (VariableTable::Stone(s), VarName::P { v, j }) if v < s.n && j < s.n => s.p(v, j) as u32,
            (VariableTable::Stone(s), VarName::R { j }) if j < s.n => s.r(j) as u32,
            (VariableTable::Stone(s), VarName::Z { v, j }) if v < s.n && j + 1 < s.n => s.z(v, j) as u32,
            (VariableTable::Lifted { b, .. }, VarName::Y { base, bit }) if bit < *b && base >= 1 => {
                (base - 1) * *b as u32 + bit as u32 + 1
            }
            _ => return None,
        };
        (id >= 1 && id as usize <= self.nvars()).then_some(id)
    }
}

/// Map from stone triples to variable ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObfuscationMap {
    n: usize,
    table: Vec<u32>,
}

impl ObfuscationMap {
    pub fn from_table(n: usize, table: Vec<u32>) -> Result<Self, FormulaError> {
        if table.len() != n * n * n {
            return Err(FormulaError::RhoSize {
                expected: n,
                found: (table.len() as f64).cbrt().round() as usize,
            });
        }
        let max = (2 * n * n) as u32;
        if let Some(&value) = table.iter().find(|&&x| x == 0 || x > max) {
            return Err(FormulaError::RhoRange { value, max });
        }
        Ok(ObfuscationMap { n, table })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> u32 {
        self.table[(i * self.n + j) * self.n + k]
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }
}

/// Every triple drawn independently and uniformly from the `2N²` ids, in
/// lexicographic triple order.
pub fn random_obfuscation(n: usize, seed: u64) -> ObfuscationMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = (2 * n * n) as u32;
    ObfuscationMap {
        n,
        table: (0..n * n * n).map(|_| rng.gen_range(1..=max)).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObfuscationReport {
    pub n: usize,
    pub q: usize,
    pub trials: usize,
    /// Pairs (Q, X) with a witness triple, out of `trials * 2N²`.
    pub witnessed: u64,
    pub pairs: u64,
    /// Trials where every variable had a witness.
    pub full_trials: usize,
}

impl ObfuscationReport {
    pub fn fraction(&self) -> f64 {
        self.witnessed as f64 / self.pairs as f64
    }
}

/// For random forbidden sets Q of size q, the share of variables X hit by
/// some `ρ(i,j,k)` with `i < j < k` outside Q.
pub fn check_obfuscation(rho: &ObfuscationMap, q: usize, trials: usize, seed: u64) -> ObfuscationReport {
    let n = rho.n();
    let m = 2 * n * n;
    let mut witnesses: Vec<Vec<[usize; 3]>> = vec![Vec::new(); m + 1];
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                witnesses[rho.get(i, j, k) as usize].push([i, j, k]);
            }
        }
    }
    let trials = if q == 0 { 1 } else { trials };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut witnessed = 0u64;
    let mut full_trials = 0;
    for _ in 0..trials {
        let mut stones: Vec<usize> = (0..n).collect();
        let mut forbidden = vec![false; n];
        for t in 0..q.min(n) {
            let pick = rng.gen_range(t..n);
            stones.swap(t, pick);
            forbidden[stones[t]] = true;
        }
        let hit = (1..=m)
            .filter(|&x| witnesses[x].iter().any(|t| t.iter().all(|&s| !forbidden[s])))
            .count();
        witnessed += hit as u64;
        if hit == m {
            full_trials += 1;
        }
    }
    ObfuscationReport {
        n,
        q,
        trials,
        witnessed,
        pairs: (trials * m) as u64,
        full_trials,
    }
}

/// Generator parameters recorded next to a DIMACS file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: String,
    pub levels: Option<usize>,
    pub vertices: usize,
    pub seed: Option<u64>,
    /// `(parent, child)` pairs, 1-based, first child first.
    pub edges: Vec<(usize, usize)>,
    /// Pyramid coordinates per vertex id, when the graph is a pyramid.
    pub positions: Vec<(usize, usize)>,
    /// `ρ(i,j,k)` for all triples in lexicographic order.
    pub rho: Vec<u32>,
    pub gadget_arity: Option<usize>,
    pub gadget_table: Option<String>,
}

impl Metadata {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metadata serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, FormulaError> {
        toml::from_str(text).map_err(|e| FormulaError::Metadata(e.to_string()))
    }

    pub fn dag(&self) -> Result<Dag, FormulaError> {
        if let Some(n) = self.levels {
            let d = pyramid(n)?;
            if d.len() != self.vertices {
                return Err(FormulaError::Metadata("vertex count disagrees with levels".into()));
            }
            return Ok(d);
        }
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, c)| (a.wrapping_sub(1), c.wrapping_sub(1)))
            .collect();
        Dag::new(self.vertices, &edges)
    }

    pub fn rho(&self) -> Result<ObfuscationMap, FormulaError> {
        ObfuscationMap::from_table(self.vertices, self.rho.clone())
    }

    pub fn gadget(&self) -> Result<Option<Gadget>, FormulaError> {
        match (self.gadget_arity, &self.gadget_table) {
            (Some(b), Some(t)) => Ok(Some(Gadget::parse_file(&format!("arity={b}\n{t}\n"))?)),
            (None, None) => Ok(None),
            _ => Err(FormulaError::Metadata("gadget needs both arity and table".into())),
        }
    }

    /// Regenerates the base stone formula.
    pub fn stone_formula(&self) -> Result<CnfFormula, FormulaError> {
        let mut f = stone_formula(&self.dag()?, &self.rho()?)?;
        if let Some(meta) = f.metadata.as_mut() {
            meta.seed = self.seed;
        }
        Ok(f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnfFormula {
    pub nvars: usize,
    pub clauses: Vec<Clause>,
    pub vartable: VariableTable,
    pub metadata: Option<Metadata>,
}

impl CnfFormula {
    /// A formula over plain variables; clauses are normalized.
    pub fn new(nvars: usize, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        for c in &clauses {
            if let Some(&l) = c.iter().find(|&&l| l == 0 || l.unsigned_abs() as usize > nvars) {
                return Err(FormulaError::Parse {
                    line: 0,
                    msg: format!("literal {l} outside 1..={nvars}"),
                });
            }
        }
        Ok(CnfFormula {
            nvars,
            clauses: clauses.into_iter().map(canonical).collect(),
            vartable: VariableTable::Plain { nvars },
            metadata: None,
        })
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Ids of all clauses falsified by a total assignment (`x[v-1]` is
    /// the value of variable `v`), ascending.
    pub fn falsified_clauses(&self, x: &[bool]) -> Result<Vec<usize>, FormulaError> {
        if x.len() != self.nvars {
            return Err(FormulaError::AssignmentLength {
                expected: self.nvars,
                found: x.len(),
            });
        }
        Ok(self
            .clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| clause_falsified(c, x))
            .map(|(i, _)| i)
            .collect())
    }

    pub fn write_dimacs<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "p cnf {} {}", self.nvars, self.clauses.len())?;
        for c in &self.clauses {
            write_clause(&mut w, c)?;
        }
        Ok(())
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = Vec::new();
        self.write_dimacs(&mut out).expect("write to memory");
        String::from_utf8(out).expect("ascii")
    }

    /// Parses DIMACS CNF. Comment lines start with `c`; a clause may span
    /// lines and ends at `0`.
    pub fn parse_dimacs<R: BufRead>(reader: R) -> Result<Self, FormulaError> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current: Clause = Vec::new();
        let mut last_line = 0;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            last_line = lineno;
            let t = line.trim();
            if t.is_empty() || t.starts_with('c') {
                continue;
            }
            let err = |msg: String| FormulaError::Parse { line: lineno, msg };
            if t.starts_with('p') {
                let parts: Vec<&str> = t.split_whitespace().collect();
                if header.is_some() {
                    return Err(err("duplicate header".into()));
                }
                match parts.as_slice() {
                    ["p", "cnf", v, c] => {
                        let v = v.parse().map_err(|_| err(format!("bad variable count {v:?}")))?;
                        let c = c.parse().map_err(|_| err(format!("bad clause count {c:?}")))?;
                        header = Some((v, c));
                    }
                    _ => return Err(err(format!("malformed header {t:?}"))),
                }
                continue;
            }
            let Some((nvars, _)) = header else {
                return Err(err("clause before header".into()));
            };
            for tok in t.split_whitespace() {
                let lit: i32 = tok.parse().map_err(|_| err(format!("bad literal {tok:?}")))?;
                if lit == 0 {
                    clauses.push(canonical(std::mem::take(&mut current)));
                } else if lit.unsigned_abs() as usize > nvars {
                    return Err(err(format!("literal {lit} exceeds variable count {nvars}")));
                } else {
                    current.push(lit);
                }
            }
        }
        let Some((nvars, nclauses)) = header else {
            return Err(FormulaError::Parse {
                line: 1,
                msg: "missing header".into(),
            });
        };
        if !current.is_empty() {
            return Err(FormulaError::Parse {
                line: last_line,
                msg: "unterminated clause".into(),
            });
        }
        if clauses.len() != nclauses {
            return Err(FormulaError::Parse {
                line: last_line,
                msg: format!("header promises {nclauses} clauses, found {}", clauses.len()),
            });
        }
        Ok(CnfFormula {
            nvars,
            clauses,
            vartable: VariableTable::Plain { nvars },
            metadata: None,
        })
    }

    /// Restores the variable table recorded in the metadata.
    pub fn with_metadata(mut self, meta: Metadata) -> Result<Self, FormulaError> {
        let stone = VariableTable::Stone(StoneVars { n: meta.vertices });
        let table = match meta.gadget_arity {
            Some(b) => VariableTable::Lifted {
                base: Box::new(stone),
                b,
            },
            None => stone,
        };
        if table.nvars() != self.nvars {
            return Err(FormulaError::Metadata(format!(
                "metadata describes {} variables, formula has {}",
                table.nvars(),
                self.nvars
            )));
        }
        self.vartable = table;
        self.metadata = Some(meta);
        Ok(self)
    }
}

fn write_clause<W: Write>(w: &mut W, c: &[i32]) -> io::Result<()> {
    for l in c {
        write!(w, "{l} ")?;
    }
    writeln!(w, "0")
}

pub fn clause_falsified(c: &[i32], x: &[bool]) -> bool {
    c.iter().all(|&l| x[l.unsigned_abs() as usize - 1] != (l > 0))
}

/// Clause id ranges of a stone formula, in emission order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoneLayout {
    pub n: usize,
    pub sinks: Vec<usize>,
    pub internal: Vec<usize>,
    internal_index: Vec<Option<usize>>,
}

impl StoneLayout {
    pub fn new(dag: &Dag) -> Self {
        let internal: Vec<usize> = dag.internal().collect();
        let mut internal_index = vec![None; dag.len()];
        for (k, &v) in internal.iter().enumerate() {
            internal_index[v] = Some(k);
        }
        StoneLayout {
            n: dag.len(),
            sinks: dag.sinks().to_vec(),
            internal,
            internal_index,
        }
    }

    pub fn root(&self, j: usize) -> usize {
        j
    }

    /// `sink` is the position in the sink list.
    pub fn sink(&self, sink: usize, j: usize) -> usize {
        self.n + sink * self.n + j
    }

    fn induction_base(&self) -> usize {
        self.n + self.sinks.len() * self.n
    }

    pub fn induction(&self, v: usize, i: usize, j: usize, k: usize, positive: bool) -> usize {
        let n = self.n;
        let slot = self.internal_index[v].expect("internal vertex");
        self.induction_base() + 2 * (slot * n * n * n + (i * n + j) * n + k) + (!positive) as usize
    }

    pub fn placement(&self, v: usize, idx: usize) -> usize {
        let n = self.n;
        self.induction_base() + 2 * self.internal.len() * n * n * n + v * n + idx
    }

    pub fn total(&self) -> usize {
        self.placement(self.n - 1, self.n - 1) + 1
    }
}

/// The stone formula of `dag` obfuscated by `rho`.
pub fn stone_formula(dag: &Dag, rho: &ObfuscationMap) -> Result<CnfFormula, FormulaError> {
    let n = dag.len();
    if rho.n() != n {
        return Err(FormulaError::RhoSize {
            expected: n,
            found: rho.n(),
        });
    }
    let sv = StoneVars { n };
    let layout = StoneLayout::new(dag);
    let mut clauses: Vec<Clause> = Vec::with_capacity(layout.total());
    let r = dag.root();
    for j in 0..n {
        clauses.push(vec![-sv.p(r, j), -sv.r(j)]);
    }
    for &s in dag.sinks() {
        for j in 0..n {
            clauses.push(vec![-sv.p(s, j), sv.r(j)]);
        }
    }
    for &v in &layout.internal {
        let (u, w) = dag.children(v).expect("internal");
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let base = [-sv.p(u, i), -sv.r(i), -sv.p(w, j), -sv.r(j), -sv.p(v, k), sv.r(k)];
                    let x = rho.get(i, j, k) as i32;
                    for lit in [x, -x] {
                        let mut c = base.to_vec();
                        c.push(lit);
                        clauses.push(c);
                    }
                }
            }
        }
    }
    for v in 0..n {
        clauses.extend(placement_chain(sv, v));
    }
    let clauses = clauses.into_iter().map(canonical).collect();
    Ok(CnfFormula {
        nvars: sv.count(),
        clauses,
        vartable: VariableTable::Stone(sv),
        metadata: Some(Metadata {
            kind: "stone".into(),
            levels: (!dag.positions().is_empty()).then(|| dag.positions().last().expect("nonempty").0),
            vertices: n,
            seed: None,
            edges: dag.edges().into_iter().map(|(a, c)| (a + 1, c + 1)).collect(),
            positions: dag.positions().to_vec(),
            rho: rho.table().to_vec(),
            gadget_arity: None,
            gadget_table: None,
        }),
    })
}

fn placement_chain(sv: StoneVars, v: usize) -> Vec<Clause> {
    let n = sv.n;
    if n == 1 {
        return vec![vec![sv.p(v, 0)]];
    }
    let mut out = vec![vec![sv.p(v, 0), -sv.z(v, 0)]];
    for j in 1..n - 1 {
        out.push(vec![sv.z(v, j - 1), sv.p(v, j), -sv.z(v, j)]);
    }
    out.push(vec![sv.z(v, n - 2), sv.p(v, n - 1)]);
    out
}

/// A lifted formula kept implicit: clause ids are enumerated on demand.
///
/// Lifted clauses of base clause `C` come in mixed-radix order over the
/// preimage choices for its literals, first literal outermost.
#[derive(Clone, Debug)]
pub struct LiftedFormula<'a> {
    base: &'a CnfFormula,
    gadget: &'a Gadget,
    offsets: Vec<u64>,
}

impl<'a> LiftedFormula<'a> {
    pub fn new(base: &'a CnfFormula, gadget: &'a Gadget) -> Result<Self, FormulaError> {
        if gadget.is_constant() {
            return Err(FormulaError::ConstantGadget);
        }
        let mut offsets = Vec::with_capacity(base.len() + 1);
        let mut acc = 0u64;
        offsets.push(0);
        for c in &base.clauses {
            acc += c.iter().map(|&l| gadget.preimages(l < 0).len() as u64).product::<u64>();
            offsets.push(acc);
        }
        Ok(LiftedFormula {
            base,
            gadget,
            offsets,
        })
    }

    pub fn base(&self) -> &CnfFormula {
        self.base
    }

    pub fn gadget(&self) -> &Gadget {
        self.gadget
    }

    pub fn nvars(&self) -> usize {
        self.base.nvars * self.gadget.arity()
    }

    pub fn num_clauses(&self) -> u64 {
        *self.offsets.last().expect("offsets")
    }

    /// First lifted clause id of base clause `cid`.
    pub fn offset(&self, cid: usize) -> u64 {
        self.offsets[cid]
    }

    pub fn count_for(&self, cid: usize) -> u64 {
        self.offsets[cid + 1] - self.offsets[cid]
    }

    /// Base clause id and mixed-radix index of a lifted clause id.
    pub fn locate(&self, id: u64) -> (usize, u64) {
        let cid = self.offsets.partition_point(|&o| o <= id) - 1;
        (cid, id - self.offsets[cid])
    }

    /// Preimage choice per literal of base clause `cid` for a mixed-radix index.
    pub fn choices(&self, cid: usize, mut index: u64) -> Vec<u32> {
        let c = &self.base.clauses[cid];
        let mut out = vec![0u32; c.len()];
        for (pos, &l) in c.iter().enumerate().rev() {
            let pre = self.gadget.preimages(l < 0);
            out[pos] = pre[(index % pre.len() as u64) as usize];
            index /= pre.len() as u64;
        }
        out
    }

    pub fn clause(&self, id: u64) -> Clause {
        let mut out = Vec::new();
        self.clause_into(id, &mut out);
        out
    }

    /// `clause(id)` written into `out`.
    pub fn clause_into(&self, id: u64, out: &mut Clause) {
        let (cid, mut index) = self.locate(id);
        let c = &self.base.clauses[cid];
        let b = self.gadget.arity();
        let mut stack = [0u32; 32];
        let mut heap = Vec::new();
        let digits: &mut [u32] = if c.len() <= stack.len() {
            &mut stack[..c.len()]
        } else {
            heap.resize(c.len(), 0);
            &mut heap
        };
        for (pos, &l) in c.iter().enumerate().rev() {
            let pre = self.gadget.preimages(l < 0);
            let r = pre.len() as u64;
            digits[pos] = pre[(index % r) as usize];
            index /= r;
        }
        out.clear();
        out.reserve(c.len() * b);
        let mut pos = 0;
        while pos < c.len() {
            let x = c[pos].unsigned_abs() as usize;
            let d = digits[pos];
            let first = ((x - 1) * b + 1) as i32;
            // a tautological base clause lists -x right before x; the two
            // blocks are merged position by position
            if pos + 1 < c.len() && c[pos] == -c[pos + 1] {
                let e = digits[pos + 1];
                for k in 0..b {
                    let var = first + k as i32;
                    let shift = b - 1 - k;
                    match ((d >> shift) & 1, (e >> shift) & 1) {
                        (1, 1) => out.push(-var),
                        (0, 0) => out.push(var),
                        _ => out.extend([-var, var]),
                    }
                }
                pos += 2;
            } else {
                out.extend((0..b).map(|k| {
                    let var = first + k as i32;
                    if (d >> (b - 1 - k)) & 1 == 1 {
                        -var
                    } else {
                        var
                    }
                }));
                pos += 1;
            }
        }
    }

    /// Lifted clauses falsified by `beta`, found per base clause from the
    /// single preimage choice that can match `beta`.
    pub fn falsified_clauses(&self, beta: &[bool]) -> Result<Vec<u64>, FormulaError> {
        let b = self.gadget.arity();
        if beta.len() != self.nvars() {
            return Err(FormulaError::AssignmentLength {
                expected: self.nvars(),
                found: beta.len(),
            });
        }
        let block = |x: u32| -> u32 {
            let start = (x as usize - 1) * b;
            beta[start..start + b].iter().fold(0, |acc, &bit| (acc << 1) | bit as u32)
        };
        let mut out = Vec::new();
        'clauses: for (cid, c) in self.base.clauses.iter().enumerate() {
            let mut index = 0u64;
            for &l in c {
                let pre = self.gadget.preimages(l < 0);
                let Ok(pos) = pre.binary_search(&block(l.unsigned_abs())) else {
                    continue 'clauses;
                };
                index = index * pre.len() as u64 + pos as u64;
            }
            out.push(self.offsets[cid] + index);
        }
        Ok(out)
    }

    pub fn write_dimacs<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "p cnf {} {}", self.nvars(), self.num_clauses())?;
        for id in 0..self.num_clauses() {
            write_clause(&mut w, &self.clause(id))?;
        }
        Ok(())
    }

    pub fn materialize(&self) -> CnfFormula {
        let clauses = (0..self.num_clauses()).map(|id| self.clause(id)).collect();
        CnfFormula {
            nvars: self.nvars(),
            clauses,
            vartable: VariableTable::Lifted {
                base: Box::new(self.base.vartable.clone()),
                b: self.gadget.arity(),
            },
            metadata: self.base.metadata.clone().map(|mut m| {
                m.kind = "lifted".into();
                m.gadget_arity = Some(self.gadget.arity());
                m.gadget_table = Some(self.gadget.table_string());
                m
            }),
        }
    }
}

/// `[Y^x = d]` negated for every literal: the clause that is false exactly
/// when every block `x` equals its choice `d`.
pub fn lifted_clause(base: &[i32], choices: &[u32], b: usize) -> Clause {
    let mut out = Vec::with_capacity(base.len() * b);
    for (&l, &d) in base.iter().zip(choices) {
        let x = l.unsigned_abs() as usize;
        for k in 0..b {
            let var = ((x - 1) * b + k + 1) as i32;
            let bit = (d >> (b - 1 - k)) & 1 == 1;
            out.push(if bit { -var } else { var });
        }
    }
    canonical(out)
}

/// Materialized lift of `f` by `g`.
pub fn lift_formula(f: &CnfFormula, g: &Gadget) -> Result<CnfFormula, FormulaError> {
    Ok(LiftedFormula::new(f, g)?.materialize())
}

/// Variables of the block of base variable `x` under arity `b`.
pub fn block_vars(x: u32, b: usize) -> impl Iterator<Item = u32> {
    let start = (x - 1) * b as u32 + 1;
    start..start + b as u32
}

/// Set of base variables a lifted clause touches.
pub fn touched_blocks(c: &[i32], b: usize) -> BTreeSet<u32> {
    c.iter().map(|&l| (l.unsigned_abs() - 1) / b as u32 + 1).collect()
}
