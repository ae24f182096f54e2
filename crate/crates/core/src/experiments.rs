//! Desk-scale experiments around the hard distribution on stone
//! assignments of the pyramid: the blue random-walk sampler and its lift,
//! exact walk probabilities, canonical decision trees, useful cubes,
//! fooling extensions, foolable spaces and rank fooling.
//!
//! Stone `s` always sits on vertex `s` (row-major pyramid ids, 0-based).
//! Monte-Carlo trial `i` draws from a generator seeded with `seed ^ i`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formulas::{clause_falsified, pyramid, Clause, CnfFormula, Dag, FormulaError, ObfuscationMap, StoneLayout, StoneVars, VarName};
use crate::gadgets::{sample_lifted_preimage_with, Gadget, GadgetError};
use crate::gf2blocks::{closure, stifling_extension, AffineSpace, GF2Matrix, GF2Vector, Gf2Error};
use crate::lbp::{LbpError, LinearBranchingProgram, Pdt};
use crate::proofs::LinearForm;

/// Enumeration budget for exact searches.
pub const ENUMERATION_LIMIT: u64 = 1 << 24;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error(transparent)]
    Lbp(#[from] LbpError),
    #[error("no sample out of {samples} satisfied the conditioning event")]
    Unestimable { samples: u64 },
    #[error("tree queries {name}, which is not a colour variable")]
    NonColourQuery { name: String },
    #[error("{name} mentions the endpoint or one of its children")]
    NotFoolable { name: String },
    #[error("stone {} is marked", .0 + 1)]
    MarkedStone(usize),
    #[error("stones i, j, k must be distinct and below {stones}")]
    BadStones { stones: usize },
    #[error("{marked} of {stones} stones are marked, need fewer than half")]
    TooManyMarked { marked: usize, stones: usize },
    #[error("fewer than two spare stones")]
    NoSpareStones,
    #[error("matrix has rank {rank} but {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("expected length {expected}, found {found}")]
    Length { expected: usize, found: usize },
    #[error("search space too large to enumerate")]
    TooLarge,
    #[error("invalid walk: {0}")]
    Walk(String),
}

/// Runs `f(i)` for every trial index on up to `jobs` threads and returns
/// the results in index order.
pub fn run_trials<T, F>(count: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.clamp(1, count.max(1));
    if jobs == 1 {
        return (0..count).map(f).collect();
    }
    let chunk = count.div_ceil(jobs);
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = (0..jobs)
            .map(|t| scope.spawn(move || (t * chunk..((t + 1) * chunk).min(count)).map(f).collect::<Vec<T>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("trial thread panicked"))
            .collect()
    })
}

pub fn trial_rng(seed: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ i as u64)
}

/// Bernoulli estimate: `hits` successes out of `samples`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Estimate {
    pub hits: u64,
    pub samples: u64,
}

impl Estimate {
    pub fn value(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        self.hits as f64 / self.samples as f64
    }

    pub fn stderr(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        let p = self.value();
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }

    fn from_flags(flags: impl IntoIterator<Item = bool>) -> Self {
        let mut e = Estimate { hits: 0, samples: 0 };
        for f in flags {
            e.samples += 1;
            e.hits += f as u64;
        }
        e
    }
}

/// The pyramid with its stone formula layout.
#[derive(Clone, Debug)]
pub struct Pyramid {
    pub levels: usize,
    pub dag: Dag,
    pub layout: StoneLayout,
    pub vars: StoneVars,
}

impl Pyramid {
    pub fn new(levels: usize) -> Result<Self, ExperimentError> {
        let dag = pyramid(levels)?;
        let layout = StoneLayout::new(&dag);
        let vars = StoneVars { n: dag.len() };
        Ok(Pyramid {
            levels,
            dag,
            layout,
            vars,
        })
    }

    pub fn stones(&self) -> usize {
        self.dag.len()
    }

    pub fn id(&self, level: usize, index: usize) -> usize {
        level * (level - 1) / 2 + index - 1
    }

    /// `(level, index)`, both 1-based.
    pub fn position(&self, v: usize) -> (usize, usize) {
        self.dag.positions()[v]
    }

    /// Id of the induction clause at `v` whose stones are those of `v` and
    /// its children. `positive` selects the copy with `+ρ`.
    pub fn endpoint_clause(&self, v: usize, positive: bool) -> usize {
        let (u, w) = self.dag.children(v).expect("internal vertex");
        self.layout.induction(v, u, w, v, positive)
    }

    /// The vertex whose `D₀/D₁` clause has this id.
    pub fn endpoint_of_clause(&self, cid: usize) -> Option<(usize, bool)> {
        self.dag
            .internal()
            .find_map(|v| [true, false].into_iter().find(|&pos| self.endpoint_clause(v, pos) == cid).map(|pos| (v, pos)))
    }

    /// Variables mentioning vertex `x`: all `P_{x,*}` and `Z_{x,*}`.
    pub fn vertex_vars(&self, x: usize) -> Vec<u32> {
        let n = self.stones();
        let mut out: Vec<u32> = (0..n).map(|s| self.vars.p(x, s) as u32).collect();
        out.extend((0..n - 1).map(|j| self.vars.z(x, j) as u32));
        out
    }

    /// Value of a placement variable under every assignment in the
    /// support; `None` for colour variables.
    pub fn fixed_value(&self, var: u32) -> Option<bool> {
        match self.vars.name(var) {
            VarName::P { v, j } => Some(v == j),
            VarName::Z { v, j } => Some(j >= v),
            _ => None,
        }
    }
}

/// Read access to an obfuscation map.
pub trait Obfuscation: Sync {
    fn get(&self, i: usize, j: usize, k: usize) -> u32;
}

impl Obfuscation for ObfuscationMap {
    fn get(&self, i: usize, j: usize, k: usize) -> u32 {
        ObfuscationMap::get(self, i, j, k)
    }
}

/// Obfuscation map evaluated on demand: triple `(i, j, k)` reads its own
/// ChaCha stream under `seed`. For pyramids too large to tabulate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashedObfuscation {
    pub stones: usize,
    pub seed: u64,
}

impl Obfuscation for HashedObfuscation {
    fn get(&self, i: usize, j: usize, k: usize) -> u32 {
        let n = self.stones;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((i * n + j) * n + k) as u64);
        rng.gen_range(1..=(2 * n * n) as u32)
    }
}

/// An assignment in the support of the hard distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoneAssignment {
    pub levels: usize,
    /// `X_1, …, X_{n-1}`: the 1-based index of the blue vertex per level.
    pub path: Vec<usize>,
    /// Indexed by variable − 1.
    pub bits: Vec<bool>,
}

impl StoneAssignment {
    pub fn from_path(levels: usize, path: Vec<usize>) -> Result<Self, ExperimentError> {
        if levels < 2 {
            return Err(FormulaError::TooFewLevels(levels).into());
        }
        if path.len() != levels - 1 {
            return Err(ExperimentError::Length {
                expected: levels - 1,
                found: path.len(),
            });
        }
        if path[0] != 1 || path.windows(2).any(|w| w[1] != w[0] && w[1] != w[0] + 1) {
            return Err(ExperimentError::Walk(format!("{path:?} is not a monotone unit-step walk from 1")));
        }
        let n = levels * (levels + 1) / 2;
        let sv = StoneVars { n };
        let mut bits = vec![false; sv.count()];
        for v in 0..n {
            bits[sv.p(v, v) as usize - 1] = true;
            for j in 0..n - 1 {
                bits[sv.z(v, j) as usize - 1] = j >= v;
            }
            bits[sv.r(v) as usize - 1] = true;
        }
        for (l, &x) in path.iter().enumerate() {
            let v = (l + 1) * l / 2 + x - 1;
            bits[sv.r(v) as usize - 1] = false;
        }
        Ok(StoneAssignment { levels, path, bits })
    }

    pub fn stones(&self) -> usize {
        self.levels * (self.levels + 1) / 2
    }

    pub fn path_vertices(&self) -> BTreeSet<usize> {
        self.path.iter().enumerate().map(|(l, &x)| (l + 1) * l / 2 + x - 1).collect()
    }

    /// Last vertex of the blue path, on level `n − 1`.
    pub fn endpoint(&self) -> usize {
        let l = self.levels - 1;
        l * (l - 1) / 2 + self.path[l - 1] - 1
    }

    pub fn is_blue(&self, stone: usize) -> bool {
        !self.bits[StoneVars { n: self.stones() }.r(stone) as usize - 1]
    }

    /// Id of the one clause this assignment falsifies.
    pub fn falsified_clause(&self, p: &Pyramid, rho: &impl Obfuscation) -> usize {
        let v = self.endpoint();
        let (u, w) = p.dag.children(v).expect("internal");
        let x = rho.get(u, w, v);
        p.endpoint_clause(v, !self.bits[x as usize - 1])
    }
}

/// One draw: `B_2, …, B_{n-1}` are taken from `rng` in order.
pub fn sample_mu_with<R: Rng>(levels: usize, rng: &mut R) -> Result<StoneAssignment, ExperimentError> {
    StoneAssignment::from_path(levels, sample_path_with(levels, rng)?)
}

/// The blue path `X_1, …, X_{n-1}` of one draw, without the assignment.
pub fn sample_path_with<R: Rng>(levels: usize, rng: &mut R) -> Result<Vec<usize>, ExperimentError> {
    if levels < 2 {
        return Err(FormulaError::TooFewLevels(levels).into());
    }
    let mut path = vec![1];
    for _ in 2..levels {
        let step = rng.gen::<bool>() as usize;
        path.push(path.last().expect("nonempty") + step);
    }
    Ok(path)
}

/// Value of variable `var` under the assignment with blue path `path`.
pub fn path_value(p: &Pyramid, path: &[usize], var: u32) -> bool {
    match p.vars.name(var) {
        VarName::R { j } => {
            let (l, i) = p.position(j);
            !(l <= path.len() && path[l - 1] == i)
        }
        _ => p.fixed_value(var).expect("stone variable"),
    }
}

/// The clause falsified by the assignment with blue path `path`.
pub fn path_falsified_clause(p: &Pyramid, rho: &impl Obfuscation, path: &[usize]) -> usize {
    let l = path.len();
    let v = p.id(l, path[l - 1]);
    let (u, w) = p.dag.children(v).expect("internal");
    p.endpoint_clause(v, !path_value(p, path, rho.get(u, w, v)))
}

/// `t.eval` with variable values supplied on demand.
pub fn eval_with(t: &Pdt, value: impl Fn(u32) -> bool) -> Option<usize> {
    let mut t = t;
    loop {
        match t {
            Pdt::Leaf(o) => return *o,
            Pdt::Query { form, zero, one } => {
                let bit = form.vars().iter().fold(false, |acc, &x| acc ^ value(x));
                t = if bit { one } else { zero };
            }
        }
    }
}

pub fn sample_mu(levels: usize, seed: u64) -> Result<StoneAssignment, ExperimentError> {
    sample_mu_with(levels, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// A base draw followed by a uniform gadget preimage, both from `seed`.
pub fn sample_mu_lifted(levels: usize, g: &Gadget, seed: u64) -> Result<(StoneAssignment, GF2Vector), ExperimentError> {
    if g.is_constant() {
        return Err(GadgetError::Constant.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = sample_mu_with(levels, &mut rng)?;
    let beta = sample_lifted_preimage_with(g, &alpha.bits, &mut rng);
    Ok((alpha, beta))
}

/// Finds every falsified clause of a formula without scanning all of them:
/// each clause is filed under its first literal and only inspected when
/// that literal is false.
#[derive(Clone, Debug)]
pub struct FalsifiedIndex<'a> {
    f: &'a CnfFormula,
    by_literal: Vec<Vec<usize>>,
    empty: Vec<usize>,
}

impl<'a> FalsifiedIndex<'a> {
    pub fn new(f: &'a CnfFormula) -> Self {
        let mut by_literal = vec![Vec::new(); 2 * f.nvars];
        let mut empty = Vec::new();
        for (cid, c) in f.clauses.iter().enumerate() {
            match c.first() {
                Some(&l) => by_literal[literal_slot(l)].push(cid),
                None => empty.push(cid),
            }
        }
        FalsifiedIndex { f, by_literal, empty }
    }

    /// Same result as `CnfFormula::falsified_clauses`.
    pub fn falsified(&self, x: &[bool]) -> Vec<usize> {
        let mut out = self.empty.clone();
        for (v, &value) in x.iter().enumerate() {
            let false_lit = if value { -(v as i32 + 1) } else { v as i32 + 1 };
            out.extend(
                self.by_literal[literal_slot(false_lit)]
                    .iter()
                    .copied()
                    .filter(|&cid| clause_falsified(&self.f.clauses[cid], x)),
            );
        }
        out.sort_unstable();
        out
    }
}

fn literal_slot(l: i32) -> usize {
    2 * (l.unsigned_abs() as usize - 1) + (l < 0) as usize
}

// ---------------------------------------------------------------------------
// Random walk

/// `Pr[Y_t = q + offset]` for the walk started at `q`: `C(t−1, offset) / 2^{t−1}`.
pub fn walk_pmf(t: usize, offset: usize) -> BigRational {
    if t == 0 || offset >= t {
        return BigRational::zero();
    }
    BigRational::new(binomial(t - 1, offset).into(), (BigUint::one() << (t - 1)).into())
}

/// The whole distribution of `Y_t − q`, built by Pascal's rule.
pub fn walk_pmf_row(t: usize) -> Vec<BigRational> {
    if t == 0 {
        return Vec::new();
    }
    let mut row = vec![BigUint::one()];
    for _ in 1..t {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(BigUint::one());
        for w in row.windows(2) {
            next.push(&w[0] + &w[1]);
        }
        next.push(BigUint::one());
        row = next;
    }
    let denom: num_bigint::BigInt = (BigUint::one() << (t - 1)).into();
    row.into_iter().map(|c| BigRational::new(c.into(), denom.clone())).collect()
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// First `(t, offset)` with `t ≤ t_max` and `Pr[Y_t = q + offset] > c₁/√t`
/// for `c₁ = 1`, or `None`.
///
/// For each `t` the integer ratios `C(t−1,p+1)/C(t−1,p) = (t−1−p)/(p+1)`
/// show the row peaks at `⌊(t−1)/2⌋`; the peak is then compared exactly via
/// `C² · t ≤ 4^{t−1}`.
pub fn anti_concentration_violation(t_max: usize) -> Option<(usize, usize)> {
    let mut central = BigUint::one();
    for t in 1..=t_max {
        let n = t - 1;
        if n >= 1 {
            // C(n, ⌊n/2⌋) from C(n−1, ⌊(n−1)/2⌋)
            if n % 2 == 0 {
                central *= 2u32;
            } else {
                central *= n;
                central /= n.div_ceil(2);
            }
        }
        let peak = n / 2;
        for p in 0..n {
            let rising = n - p > p + 1;
            let falling = n - p < p + 1;
            if (p < peak && !(rising || n - p == p + 1)) || (p >= peak && !(falling || n - p == p + 1)) {
                return Some((t, p));
            }
        }
        if &central * &central * t > BigUint::one() << (2 * n) {
            return Some((t, peak));
        }
    }
    None
}

/// Constraints on walk positions: `(t, offset)` with `t` 1-based and the
/// offset relative to the start.
pub type WalkPoints = [(usize, usize)];

fn walk_ok(walk: &[usize], forbidden: &WalkPoints, visit: &WalkPoints) -> bool {
    let at = |t: usize| walk.get(t.wrapping_sub(1)).copied();
    forbidden.iter().all(|&(t, y)| at(t) != Some(y)) && visit.iter().all(|&(t, y)| at(t) == Some(y))
}

/// Exact `Pr[Y_k = q + target | avoid forbidden, pass through visit]` by
/// dynamic programming; `None` if the event is empty.
pub fn conditioned_walk_exact(k: usize, forbidden: &WalkPoints, visit: &WalkPoints, target: usize) -> Option<BigRational> {
    if k == 0 {
        return None;
    }
    let mut counts = vec![BigUint::zero(); k];
    counts[0] = BigUint::one();
    let filter = |t: usize, counts: &mut Vec<BigUint>| {
        for &(ft, y) in forbidden {
            if ft == t && y < counts.len() {
                counts[y] = BigUint::zero();
            }
        }
        let required: Vec<usize> = visit.iter().filter(|p| p.0 == t).map(|p| p.1).collect();
        if let Some(&y) = required.first() {
            for (pos, c) in counts.iter_mut().enumerate() {
                if pos != y || required.iter().any(|&r| r != y) {
                    *c = BigUint::zero();
                }
            }
        }
    };
    filter(1, &mut counts);
    for t in 2..=k {
        for y in (1..t).rev() {
            let prev = counts[y - 1].clone();
            counts[y] += prev;
        }
        filter(t, &mut counts);
    }
    let total: BigUint = counts.iter().sum();
    if total.is_zero() {
        return None;
    }
    let hit = counts.get(target).cloned().unwrap_or_default();
    Some(BigRational::new(hit.into(), total.into()))
}

/// Rejection-sampling estimate of the conditioned probability: `hits`
/// counts accepted walks ending at `target`, `samples` the accepted ones.
pub fn conditioned_walk_estimate(
    k: usize,
    forbidden: &WalkPoints,
    visit: &WalkPoints,
    target: usize,
    samples: usize,
    seed: u64,
    jobs: usize,
) -> Result<Estimate, ExperimentError> {
    let outcomes = run_trials(samples, jobs, |i| {
        let mut rng = trial_rng(seed, i);
        let mut walk = Vec::with_capacity(k);
        let mut y = 0;
        walk.push(y);
        for _ in 1..k {
            y += rng.gen::<bool>() as usize;
            walk.push(y);
        }
        walk_ok(&walk, forbidden, visit).then(|| walk.last() == Some(&target))
    });
    let e = Estimate::from_flags(outcomes.into_iter().flatten());
    if e.samples == 0 {
        return Err(ExperimentError::Unestimable { samples: samples as u64 });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Decision trees

/// Adds a root-colour query, guards each endpoint-clause leaf by the
/// colour of its vertex, and turns every other output into the error
/// symbol.
pub fn canonicalize_dt(t: &Pdt, p: &Pyramid) -> Result<Pdt, ExperimentError> {
    fn walk(t: &Pdt, p: &Pyramid) -> Result<Pdt, ExperimentError> {
        Ok(match t {
            Pdt::Query { form, zero, one } => {
                let var = form.vars()[0];
                if form.vars().len() != 1 || !matches!(p.vars.name(var), VarName::R { .. }) {
                    return Err(ExperimentError::NonColourQuery {
                        name: form.vars().iter().map(|&x| p.vars.name(x).to_string()).collect::<Vec<_>>().join("+"),
                    });
                }
                Pdt::Query {
                    form: form.clone(),
                    zero: Box::new(walk(zero, p)?),
                    one: Box::new(walk(one, p)?),
                }
            }
            Pdt::Leaf(Some(c)) => match p.endpoint_of_clause(*c) {
                Some((v, _)) => Pdt::Query {
                    form: LinearForm::var(p.vars.r(v) as u32),
                    zero: Box::new(Pdt::Leaf(Some(*c))),
                    one: Box::new(Pdt::Leaf(None)),
                },
                None => Pdt::Leaf(None),
            },
            Pdt::Leaf(None) => Pdt::Leaf(None),
        })
    }
    let inner = walk(t, p)?;
    let root = LinearForm::var(p.vars.r(p.dag.root()) as u32);
    Ok(Pdt::Query {
        form: root,
        zero: Box::new(inner.clone()),
        one: Box::new(inner),
    })
}

/// Fraction of draws on which the tree does not output a falsified clause.
pub fn dt_error_rate(
    t: &Pdt,
    p: &Pyramid,
    rho: &impl Obfuscation,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<Estimate, ExperimentError> {
    let errors = run_trials(trials, jobs, |i| {
        let path = sample_path_with(p.levels, &mut trial_rng(seed, i)).expect("levels checked");
        eval_with(t, |x| path_value(p, &path, x)) != Some(path_falsified_clause(p, rho, &path))
    });
    Ok(Estimate::from_flags(errors))
}

/// Leaf answering `D₀(v)/D₁(v)`, querying the obfuscation variable when
/// it is a colour.
fn endpoint_answer(p: &Pyramid, rho: &impl Obfuscation, v: usize, known: &BTreeMap<u32, bool>) -> Pdt {
    let (u, w) = p.dag.children(v).expect("internal");
    let x = rho.get(u, w, v);
    let value = p.fixed_value(x).or_else(|| known.get(&x).copied());
    match value {
        Some(bit) => Pdt::Leaf(Some(p.endpoint_clause(v, !bit))),
        None => Pdt::Query {
            form: LinearForm::var(x),
            zero: Box::new(Pdt::Leaf(Some(p.endpoint_clause(v, true)))),
            one: Box::new(Pdt::Leaf(Some(p.endpoint_clause(v, false)))),
        },
    }
}

/// Queries the colours of level `n − 1` vertices within `radius` of the
/// middle, one after another, and answers at the first blue one.
pub fn simple_strategy_dt(p: &Pyramid, rho: &impl Obfuscation, radius: usize) -> Pdt {
    let l = p.levels - 1;
    let centre = (p.levels / 2).clamp(1, l);
    let mut order = vec![centre];
    for d in 1..=radius {
        if centre > d {
            order.push(centre - d);
        }
        if centre + d <= l {
            order.push(centre + d);
        }
    }
    fn build<O: Obfuscation>(p: &Pyramid, rho: &O, l: usize, rest: &[usize]) -> Pdt {
        match rest.split_first() {
            None => Pdt::Leaf(None),
            Some((&idx, tail)) => {
                let v = p.id(l, idx);
                let r = p.vars.r(v) as u32;
                let known = BTreeMap::from([(r, false)]);
                Pdt::Query {
                    form: LinearForm::var(r),
                    zero: Box::new(endpoint_answer(p, rho, v, &known)),
                    one: Box::new(build(p, rho, l, tail)),
                }
            }
        }
    }
    build(p, rho, l, &order)
}

/// Random colour queries to the given height; a leaf answers for a
/// level-`(n − 1)` vertex seen blue, or guesses one.
pub fn random_dt(p: &Pyramid, rho: &impl Obfuscation, height: usize, seed: u64) -> Pdt {
    fn build<O: Obfuscation>(p: &Pyramid, rho: &O, h: usize, known: &mut BTreeMap<u32, bool>, rng: &mut ChaCha8Rng) -> Pdt {
        let l = p.levels - 1;
        if h == 0 {
            let blue = (1..=l).map(|i| p.id(l, i)).find(|&v| known.get(&(p.vars.r(v) as u32)) == Some(&false));
            let v = blue.unwrap_or_else(|| p.id(l, rng.gen_range(1..=l)));
            return match endpoint_answer(p, rho, v, known) {
                Pdt::Query { zero, one, .. } => {
                    if rng.gen() {
                        *zero
                    } else {
                        *one
                    }
                }
                leaf => leaf,
            };
        }
        let stones = p.stones();
        let candidates: Vec<u32> = (0..stones)
            .map(|s| p.vars.r(s) as u32)
            .filter(|r| !known.contains_key(r))
            .collect();
        if candidates.is_empty() {
            return build(p, rho, 0, known, rng);
        }
        let r = candidates[rng.gen_range(0..candidates.len())];
        let mut children = [false, true].map(|bit| {
            known.insert(r, bit);
            let t = build(p, rho, h - 1, known, rng);
            known.remove(&r);
            t
        });
        let [zero, one] = std::mem::replace(&mut children, [Pdt::Leaf(None), Pdt::Leaf(None)]);
        Pdt::Query {
            form: LinearForm::var(r),
            zero: Box::new(zero),
            one: Box::new(one),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build(p, rho, height, &mut BTreeMap::new(), &mut rng)
}

// ---------------------------------------------------------------------------
// Cubes

/// Partial assignment over stone variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cube {
    pub fixed: BTreeMap<u32, bool>,
}

impl Cube {
    pub fn new() -> Self {
        Cube::default()
    }

    pub fn fix(mut self, var: u32, value: bool) -> Self {
        self.fixed.insert(var, value);
        self
    }

    /// Fixes the colour of the stone on vertex `v`; `true` is red.
    pub fn colour(self, p: &Pyramid, v: usize, red: bool) -> Self {
        self.fix(p.vars.r(v) as u32, red)
    }
}

/// Levels `L₁ ≤ L₂ ≤ L₃ ≤ L₄` of a useful cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UsefulWitness {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
    pub l4: usize,
}

/// Blue fixes at levels `L₁` and `L₄`, no colour fixed on levels
/// `L₂..=L₃`, and `L₃ − L₂ ≥ n / 2h`.
pub fn is_useful_cube(c: &Cube, h: usize, p: &Pyramid) -> Option<UsefulWitness> {
    let n = p.levels;
    let mut fixed_levels = BTreeSet::new();
    let mut blue_levels = BTreeSet::new();
    for (&var, &value) in &c.fixed {
        if let VarName::R { j } = p.vars.name(var) {
            let level = p.position(j).0;
            fixed_levels.insert(level);
            if !value {
                blue_levels.insert(level);
            }
        }
    }
    if h == 0 {
        return None;
    }
    let long_enough = |l2: usize, l3: usize| 2 * h * (l3 - l2) >= n;
    let blue: Vec<usize> = blue_levels.into_iter().collect();
    for (a, &l1) in blue.iter().enumerate() {
        for &l4 in &blue[a + 1..] {
            // maximal unfixed runs strictly between l1 and l4
            let mut l = l1 + 1;
            while l < l4 {
                if fixed_levels.contains(&l) {
                    l += 1;
                    continue;
                }
                let start = l;
                while l + 1 < l4 && !fixed_levels.contains(&(l + 1)) {
                    l += 1;
                }
                if long_enough(start, l) {
                    return Some(UsefulWitness {
                        l1,
                        l2: start,
                        l3: l,
                        l4,
                    });
                }
                l += 1;
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Fooling

/// Stones mentioned by a variable set: `R_s` and `P_{*,s}` mention `s`,
/// and `P_{x,*}`, `Z_{x,*}` mention the stone on `x`.
pub fn marked_stones(p: &Pyramid, t: &BTreeSet<u32>) -> BTreeSet<usize> {
    let mut q = BTreeSet::new();
    for &var in t {
        match p.vars.name(var) {
            VarName::R { j } => {
                q.insert(j);
            }
            VarName::P { v, j } => {
                q.insert(j);
                q.insert(v);
            }
            VarName::Z { v, .. } => {
                q.insert(v);
            }
            _ => {}
        }
    }
    q
}

/// Result of `fooling_extension`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoolingExtension {
    /// Stone placed on each vertex.
    pub stone: Vec<usize>,
    /// Colour per stone, `true` for red.
    pub red: Vec<bool>,
    pub bits: Vec<bool>,
    /// The two copies of the induction clause at the endpoint with stones
    /// `j`, `k` on its children and `i` on it, `+ρ` copy first.
    pub clauses: [usize; 2],
}

/// Extends `alpha` restricted to `t` to an assignment falsifying exactly
/// one clause: stone `i` (blue) on the endpoint, `j` and `k` (red) on its
/// children, marked stones kept in place, other path vertices holding a
/// blue spare stone and the rest a red one.
pub fn fooling_extension(
    p: &Pyramid,
    alpha: &StoneAssignment,
    t: &BTreeSet<u32>,
    i: usize,
    j: usize,
    k: usize,
) -> Result<FoolingExtension, ExperimentError> {
    let n = p.stones();
    let v = alpha.endpoint();
    let (u, w) = p.dag.children(v).expect("internal");
    for x in [v, u, w] {
        if let Some(&var) = p.vertex_vars(x).iter().find(|var| t.contains(var)) {
            return Err(ExperimentError::NotFoolable {
                name: p.vars.name(var).to_string(),
            });
        }
    }
    if i >= n || j >= n || k >= n || i == j || j == k || i == k {
        return Err(ExperimentError::BadStones { stones: n });
    }
    let q = marked_stones(p, t);
    if 2 * q.len() >= n {
        return Err(ExperimentError::TooManyMarked {
            marked: q.len(),
            stones: n,
        });
    }
    if let Some(&s) = [i, j, k].iter().find(|s| q.contains(s)) {
        return Err(ExperimentError::MarkedStone(s));
    }
    let path = alpha.path_vertices();
    let spare: Vec<usize> = (0..n)
        .filter(|s| !q.contains(s) && !path.contains(s) && ![i, j, k].contains(s))
        .take(2)
        .collect();
    let [l1, l2] = spare[..] else {
        return Err(ExperimentError::NoSpareStones);
    };

    let stone: Vec<usize> = (0..n)
        .map(|x| match x {
            _ if x == v => i,
            _ if x == u => j,
            _ if x == w => k,
            _ if q.contains(&x) => x,
            _ if path.contains(&x) => l1,
            _ => l2,
        })
        .collect();
    let red: Vec<bool> = (0..n)
        .map(|s| match s {
            _ if q.contains(&s) => !path.contains(&s),
            _ if s == i || s == l1 => false,
            _ if s == j || s == k || s == l2 => true,
            _ => false,
        })
        .collect();
    let sv = p.vars;
    let mut bits = vec![false; sv.count()];
    for x in 0..n {
        bits[sv.p(x, stone[x]) as usize - 1] = true;
        for z in 0..n - 1 {
            bits[sv.z(x, z) as usize - 1] = z >= stone[x];
        }
    }
    for s in 0..n {
        bits[sv.r(s) as usize - 1] = red[s];
    }
    debug_assert!(t.iter().all(|&var| bits[var as usize - 1] == alpha.bits[var as usize - 1]));
    Ok(FoolingExtension {
        stone,
        red,
        bits,
        clauses: [p.layout.induction(v, j, k, i, true), p.layout.induction(v, j, k, i, false)],
    })
}

/// Whether `A` is foolable for `alpha`: its closure avoids the variables
/// of the endpoint and its children, and some point of `A` lifts `alpha`.
pub fn is_foolable(a: &AffineSpace, alpha: &StoneAssignment, g: &Gadget, p: &Pyramid) -> Result<bool, ExperimentError> {
    let s = a.blocks();
    if s.m != p.vars.count() || s.b != g.arity() {
        return Err(ExperimentError::Length {
            expected: p.vars.count() * g.arity(),
            found: s.len(),
        });
    }
    if a.is_empty() {
        return Ok(false);
    }
    let cl = closure(a)?.blockset;
    let v = alpha.endpoint();
    let (u, w) = p.dag.children(v).expect("internal");
    for x in [v, u, w] {
        if p.vertex_vars(x).iter().any(|&var| cl.contains(&(var as usize - 1))) {
            return Ok(false);
        }
    }
    Ok(lifted_point(a, &alpha.bits, g)?.is_some())
}

/// A point `β ∈ A` with `g⃗(β) = alpha`, or `None`.
///
/// With a stifled gadget only the closure blocks are searched and the
/// rest is filled in by `stifling_extension`; otherwise every block is.
pub fn lifted_point(a: &AffineSpace, alpha: &[bool], g: &Gadget) -> Result<Option<GF2Vector>, ExperimentError> {
    let s = a.blocks();
    if alpha.len() != s.m {
        return Err(ExperimentError::Length {
            expected: s.m,
            found: alpha.len(),
        });
    }
    if a.is_empty() {
        return Ok(None);
    }
    let stifled = g.is_stifled();
    let blocks: Vec<usize> = if stifled {
        closure(a)?.blockset.into_iter().collect()
    } else {
        (0..s.m).collect()
    };
    let mut budget = ENUMERATION_LIMIT;
    let Some(space) = search_blocks(a.clone(), &blocks, alpha, g, &mut budget)? else {
        return Ok(None);
    };
    let beta = space.point().expect("nonempty");
    if stifled {
        Ok(Some(stifling_extension(a, &beta, alpha, g)?))
    } else {
        Ok(Some(beta))
    }
}

fn search_blocks(
    space: AffineSpace,
    blocks: &[usize],
    alpha: &[bool],
    g: &Gadget,
    budget: &mut u64,
) -> Result<Option<AffineSpace>, ExperimentError> {
    let Some((&j, rest)) = blocks.split_first() else {
        return Ok(Some(space));
    };
    let s = space.blocks();
    for &x in g.preimages(alpha[j]) {
        if *budget == 0 {
            return Err(ExperimentError::TooLarge);
        }
        *budget -= 1;
        let mut next = space.clone();
        for (bit, coord) in s.block_range(j).enumerate() {
            next = next.with_equation(&GF2Vector::unit(s.len(), coord), x & g.bit_mask(bit) != 0);
            if next.is_empty() {
                break;
            }
        }
        if next.is_empty() {
            continue;
        }
        if let Some(found) = search_blocks(next, rest, alpha, g, budget)? {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

/// Foolability of `P(β, t)` along traces of a program under the lifted
/// distribution, for every `t ≤ t_max`: entry `t` counts foolable nodes.
pub fn foolability_along_traces(
    program: &LinearBranchingProgram,
    p: &Pyramid,
    g: &Gadget,
    t_max: usize,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<Vec<Estimate>, ExperimentError> {
    let rows = run_trials(trials, jobs, |i| -> Result<Vec<bool>, ExperimentError> {
        let mut rng = trial_rng(seed, i);
        let alpha = sample_mu_with(p.levels, &mut rng)?;
        let beta = sample_lifted_preimage_with(g, &alpha.bits, &mut rng);
        (0..=t_max)
            .map(|t| {
                let node = program.trace(&beta, t)?;
                is_foolable(&program.nodes[node].label, &alpha, g, p)
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok((0..=t_max)
        .map(|t| Estimate::from_flags(rows.iter().map(|r| r[t])))
        .collect())
}

// ---------------------------------------------------------------------------
// Rank fooling

#[derive(Clone, Debug, PartialEq)]
pub struct RankFooling {
    pub r: usize,
    pub b: usize,
    pub epsilon: Ratio<u64>,
    /// `(1 − ε/2)^{⌊r/b⌋}`.
    pub bound: f64,
    pub estimate: Estimate,
}

impl RankFooling {
    pub fn within_bound(&self) -> bool {
        self.estimate.value() <= self.bound + 3.0 * self.estimate.stderr()
    }
}

pub fn rank_fooling_bound(epsilon: Ratio<u64>, r: usize, b: usize) -> f64 {
    let e = *epsilon.numer() as f64 / *epsilon.denom() as f64;
    (1.0 - e / 2.0).powi((r / b) as i32)
}

fn check_rank_fooling_input(m: &GF2Matrix, gamma: &GF2Vector, z: &[bool], g: &Gadget) -> Result<(), ExperimentError> {
    if m.ncols() != z.len() * g.arity() {
        return Err(ExperimentError::Length {
            expected: z.len() * g.arity(),
            found: m.ncols(),
        });
    }
    if gamma.len() != m.nrows() {
        return Err(ExperimentError::Length {
            expected: m.nrows(),
            found: gamma.len(),
        });
    }
    let rank = m.rank();
    if rank != m.nrows() {
        return Err(ExperimentError::RankDeficient { rank, rows: m.nrows() });
    }
    Ok(())
}

/// Monte-Carlo estimate of `Pr[Mβ = γ]` over `β` uniform in `g⃗⁻¹(z)`.
pub fn rank_fooling_estimate(
    m: &GF2Matrix,
    gamma: &GF2Vector,
    z: &[bool],
    g: &Gadget,
    samples: usize,
    seed: u64,
    jobs: usize,
) -> Result<RankFooling, ExperimentError> {
    check_rank_fooling_input(m, gamma, z, g)?;
    let epsilon = g.balanced_stifled_epsilon()?.min;
    let hits = run_trials(samples, jobs, |i| {
        let beta = sample_lifted_preimage_with(g, z, &mut trial_rng(seed, i));
        m.mul_vec(&beta) == *gamma
    });
    Ok(RankFooling {
        r: m.nrows(),
        b: g.arity(),
        epsilon,
        bound: rank_fooling_bound(epsilon, m.nrows(), g.arity()),
        estimate: Estimate::from_flags(hits),
    })
}

/// Exact `Pr[Mβ = γ]` by enumerating preimages on the blocks M touches.
pub fn rank_fooling_exact(m: &GF2Matrix, gamma: &GF2Vector, z: &[bool], g: &Gadget) -> Result<Ratio<u64>, ExperimentError> {
    check_rank_fooling_input(m, gamma, z, g)?;
    let s = crate::gf2blocks::BlockStructure::new(z.len(), g.arity());
    let touched: BTreeSet<usize> = m.rows().iter().flat_map(|r| s.touched_blocks(r)).collect();
    let touched: Vec<usize> = touched.into_iter().collect();
    let mut total: u64 = 1;
    for &j in &touched {
        total = total
            .checked_mul(g.preimages(z[j]).len() as u64)
            .filter(|&t| t <= ENUMERATION_LIMIT)
            .ok_or(ExperimentError::TooLarge)?;
    }
    let mut hits = 0u64;
    let mut beta = GF2Vector::zeros(s.len());
    for mut index in 0..total {
        for &j in &touched {
            let pre = g.preimages(z[j]);
            s.set_block_value(&mut beta, j, pre[(index % pre.len() as u64) as usize]);
            index /= pre.len() as u64;
        }
        hits += (m.mul_vec(&beta) == *gamma) as u64;
    }
    Ok(Ratio::new(hits, total))
}

// ---------------------------------------------------------------------------
// CSV

/// A CSV table preceded by `# key=value` lines describing the run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Csv {
    pub config: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            config: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn config(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

impl fmt::Display for Csv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.config {
            writeln!(f, "# {k}={v}")?;
        }
        writeln!(f, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(f, "{}", r.join(","))?;
        }
        Ok(())
    }
}

fn fmt_f64(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x:.6}").expect("write to string");
    s
}

/// Distribution sanity per `n`: how many draws falsify exactly the
/// endpoint clause, and the base rate of the first walk step.
pub fn experiment_mu(levels: &[usize], samples: usize, seed: u64, jobs: usize) -> Result<Csv, ExperimentError> {
    let mut csv = Csv::new(&["n", "samples", "seed", "exactly_one_endpoint", "step_up_fraction", "stderr"])
        .config("experiment", "mu")
        .config("samples", samples)
        .config("seed", seed);
    for &n in levels {
        let p = Pyramid::new(n)?;
        let rho = crate::formulas::random_obfuscation(p.stones(), seed);
        let f = crate::formulas::stone_formula(&p.dag, &rho)?;
        let index = FalsifiedIndex::new(&f);
        let flags = run_trials(samples, jobs, |i| {
            let alpha = sample_mu_with(n, &mut trial_rng(seed, i)).expect("levels checked");
            let ok = index.falsified(&alpha.bits) == [alpha.falsified_clause(&p, &rho)];
            (ok, alpha.path.get(1).is_some_and(|&x| x == 2))
        });
        let good = flags.iter().filter(|f| f.0).count();
        let up = Estimate::from_flags(flags.iter().map(|f| f.1));
        csv.push(vec![
            n.to_string(),
            samples.to_string(),
            seed.to_string(),
            good.to_string(),
            fmt_f64(up.value()),
            fmt_f64(up.stderr()),
        ]);
    }
    Ok(csv)
}

/// Conditioned walk with `t` forbidden points placed near the walk's mean
/// outside a gap of `c·t²` steps, `c = 4c₂²`, ending at step `k`.
pub fn experiment_walk(k: usize, t: usize, c2: f64, samples: usize, seed: u64, jobs: usize) -> Result<Csv, ExperimentError> {
    let c = 4.0 * c2 * c2;
    let gap = (c * (t * t) as f64).ceil() as usize;
    if gap + t > k {
        return Err(ExperimentError::Walk(format!("gap {gap} with {t} points does not fit in {k} steps")));
    }
    let forbidden = gap_forbidden_points(k, t, gap);
    let bound = 1.0 / (c2 * t as f64);
    let mut csv = Csv::new(&["k", "t", "c2", "gap", "target", "exact", "estimate", "stderr", "bound", "within"])
        .config("experiment", "walk")
        .config("samples", samples)
        .config("seed", seed);
    let target = (k - 1) / 2;
    let exact = conditioned_walk_exact(k, &forbidden, &[], target);
    let est = conditioned_walk_estimate(k, &forbidden, &[], target, samples, seed, jobs)?;
    let exact_f = exact.as_ref().and_then(ratio_to_f64).unwrap_or(f64::NAN);
    csv.push(vec![
        k.to_string(),
        t.to_string(),
        c2.to_string(),
        gap.to_string(),
        target.to_string(),
        fmt_f64(exact_f),
        fmt_f64(est.value()),
        fmt_f64(est.stderr()),
        fmt_f64(bound),
        (est.value() <= bound + 3.0 * est.stderr()).to_string(),
    ]);
    Ok(csv)
}

/// `t` points at the walk's mean, half before and half after the steps
/// `2..=gap+1` which are left free.
pub fn gap_forbidden_points(k: usize, t: usize, gap: usize) -> Vec<(usize, usize)> {
    let before = t / 2;
    let mut pts: Vec<(usize, usize)> = (0..before).map(|i| (gap + 2 + i, (gap + 1 + i) / 2)).collect();
    let after: Vec<(usize, usize)> = (0..t - before).map(|i| (k - i, (k - 1 - i) / 2 + 1)).collect();
    pts.extend(after);
    pts.sort_unstable();
    pts.dedup();
    pts.retain(|&(s, _)| s > gap + 1);
    pts
}

pub fn ratio_to_f64(r: &BigRational) -> Option<f64> {
    r.to_f64()
}

/// Error rates of the middle-scan strategy and of random colour trees,
/// both after canonicalisation.
pub fn experiment_dt(
    levels: usize,
    height: usize,
    trees: usize,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<Csv, ExperimentError> {
    let p = Pyramid::new(levels)?;
    let rho = HashedObfuscation {
        stones: p.stones(),
        seed,
    };
    let mut csv = Csv::new(&["n", "strategy", "height", "error", "stderr"])
        .config("experiment", "dt")
        .config("trials", trials)
        .config("seed", seed);
    let radius = (levels as f64).sqrt().ceil() as usize;
    let simple = canonicalize_dt(&simple_strategy_dt(&p, &rho, radius), &p);
    // the scan may query the obfuscation bit, which is not always a colour
    let simple = simple.unwrap_or_else(|_| simple_strategy_dt(&p, &rho, radius));
    let e = dt_error_rate(&simple, &p, &rho, trials, seed, jobs)?;
    csv.push(vec![levels.to_string(), "middle-scan".into(), simple.height().to_string(), fmt_f64(e.value()), fmt_f64(e.stderr())]);
    let mut best: Option<(Estimate, usize)> = None;
    for tree in 0..trees {
        let t = canonicalize_dt(&random_dt(&p, &rho, height, seed ^ (tree as u64) << 32), &p)?;
        let e = dt_error_rate(&t, &p, &rho, trials, seed, jobs)?;
        if best.is_none_or(|(b, _)| e.value() < b.value()) {
            best = Some((e, t.height()));
        }
    }
    if let Some((e, h)) = best {
        csv.push(vec![levels.to_string(), "best-random".into(), h.to_string(), fmt_f64(e.value()), fmt_f64(e.stderr())]);
    }
    Ok(csv)
}

/// The rank-fooling bound on a system with `r` rows over `r/b` whole
/// blocks of an `ip<b>` lift, with a uniformly random right-hand side.
pub fn experiment_rank_fooling(r: usize, b: usize, samples: usize, seed: u64, jobs: usize) -> Result<Csv, ExperimentError> {
    let g = Gadget::ip(b)?;
    let blocks = r.div_ceil(b).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<bool> = (0..blocks).map(|_| rng.gen()).collect();
    let m = random_full_rank(r, blocks * b, &mut rng);
    let gamma = GF2Vector::from_bits(&(0..r).map(|_| rng.gen()).collect::<Vec<bool>>());
    let rf = rank_fooling_estimate(&m, &gamma, &z, &g, samples, seed, jobs)?;
    let mut csv = Csv::new(&["r", "b", "seed", "samples", "epsilon", "estimate", "stderr", "bound", "within"])
        .config("experiment", "rank-fooling")
        .config("gadget", format!("ip{b}"));
    csv.push(vec![
        r.to_string(),
        b.to_string(),
        seed.to_string(),
        samples.to_string(),
        rf.epsilon.to_string(),
        fmt_f64(rf.estimate.value()),
        fmt_f64(rf.estimate.stderr()),
        fmt_f64(rf.bound),
        rf.within_bound().to_string(),
    ]);
    Ok(csv)
}

/// Random `r × ncols` matrix of full row rank (`r ≤ ncols`).
pub fn random_full_rank<R: Rng>(r: usize, ncols: usize, rng: &mut R) -> GF2Matrix {
    assert!(r <= ncols, "rank {r} exceeds {ncols} columns");
    loop {
        let rows: Vec<GF2Vector> = (0..r)
            .map(|_| GF2Vector::from_bits(&(0..ncols).map(|_| rng.gen()).collect::<Vec<bool>>()))
            .collect();
        let m = GF2Matrix::from_rows(rows, ncols).expect("equal lengths");
        if m.rank() == r {
            return m;
        }
    }
}

/// Foolability frequency along traces of the converted lifted refutation.
pub fn experiment_foolability(
    levels: usize,
    gadget: &str,
    t_max: usize,
    trials: usize,
    seed: u64,
    jobs: usize,
) -> Result<Csv, ExperimentError> {
    let p = Pyramid::new(levels)?;
    let g = Gadget::named(gadget)?;
    let rho = crate::formulas::random_obfuscation(p.stones(), seed);
    let f = crate::formulas::stone_formula(&p.dag, &rho)?;
    let base = crate::proofs::refute_stone(&p.dag, &rho).map_err(|e| ExperimentError::Walk(e.to_string()))?;
    let lifted = crate::formulas::LiftedFormula::new(&f, &g)?;
    let proof = crate::proofs::refute_lifted(&f, &base, &g).map_err(|e| ExperimentError::Walk(e.to_string()))?;
    let program = crate::lbp::proof_to_lbp_blocks(&lifted, &proof, g.arity())?;
    let rows = foolability_along_traces(&program, &p, &g, t_max, trials, seed, jobs)?;
    let mut csv = Csv::new(&["n", "b", "seed", "t", "trials", "foolable", "fraction"])
        .config("experiment", "foolability")
        .config("gadget", gadget)
        .config("program_nodes", program.len());
    for (t, e) in rows.iter().enumerate() {
        csv.push(vec![
            levels.to_string(),
            g.arity().to_string(),
            seed.to_string(),
            t.to_string(),
            e.samples.to_string(),
            e.hits.to_string(),
            fmt_f64(e.value()),
        ]);
    }
    Ok(csv)
}

/// Clause from a cube's fixed literals, for display.
pub fn cube_clause(c: &Cube) -> Clause {
    c.fixed.iter().map(|(&v, &b)| if b { -(v as i32) } else { v as i32 }).collect()
}
