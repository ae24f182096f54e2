//! Lifting a resolution refutation of `F` to one of `F ∘ g`.
//!
//! Every base step with a non-tautological clause `X` gets one lifted step
//! per clause of `X ∘ g`, indexed by the mixed-radix preimage choice over
//! the literals of `X` (first literal outermost). A lifted step may derive
//! a subclause of its target; all lifted steps of one base step derive
//! lifts of the same base subclause, tracked as `actual`.
//!
//! For a base resolution of `P1 = A ∨ ¬x` and `P2 = B ∨ x` the lifted
//! target `D ∈ X ∘ g` is derived as the decision tree of the semantic
//! derivation would do it: the premises are the lifted steps of `P1` and
//! `P2` agreeing with `D` on the blocks of `X`; if the block of `x` is not
//! among them, its bits are queried in order and each leaf `y` is a step
//! of `P1` (when `g(y) = 1`) or `P2` (when `g(y) = 0`). Premises whose
//! actual clause does not mention the block are used directly instead.
//! Lifted axioms are emitted when first used.

use std::collections::HashMap;

use super::check::{derive_clauses, Mode};
use super::clause::LinearForm;
use super::{ProofError, ProofSink, ProofStep, ProofTrace};
use crate::formulas::{is_tautology, Clause, CnfFormula, LiftedFormula};
use crate::gadgets::Gadget;

pub const MAX_LIFT_ARITY: usize = 8;
pub const MAX_LIFT_BASE_WIDTH: usize = 8;

const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftStats {
    pub base_length: usize,
    pub base_width: usize,
    pub length: usize,
    /// Index of the step deriving the empty clause.
    pub last: usize,
}

#[derive(Clone, Copy, Debug)]
enum Src {
    /// Digit of this literal of the target.
    Target(usize),
    /// The block of the resolved variable.
    Pivot,
}

struct Base {
    clause: Clause,
    /// Axiom base steps: clause id, for lazy emission.
    axiom: Option<usize>,
    map: Vec<usize>,
    actual: Clause,
    owner: usize,
}

struct Lifter<'a, S: ProofSink + ?Sized> {
    g: &'a Gadget,
    lifted: LiftedFormula<'a>,
    sink: &'a mut S,
    steps: Vec<Option<Base>>,
    last_use: Vec<Option<usize>>,
    /// Live base steps whose maps point at steps owned by the index.
    holders: Vec<usize>,
    count: usize,
    last: usize,
}

fn radix_of(g: &Gadget, c: &[i32]) -> Vec<usize> {
    c.iter().map(|&l| g.preimages(l < 0).len()).collect()
}

fn decode(mut index: usize, radix: &[usize], digits: &mut [usize]) {
    for (d, &r) in digits.iter_mut().zip(radix).rev() {
        *d = index % r;
        index /= r;
    }
}

impl<'a, S: ProofSink + ?Sized> Lifter<'a, S> {
    fn push(&mut self, step: ProofStep) -> Result<usize, ProofError> {
        let id = self.sink.push_step(step)?;
        self.count += 1;
        self.last = id;
        Ok(id)
    }

    /// Lifted step of base step `i` at mixed-radix `index`.
    fn get(&mut self, i: usize, index: usize) -> Result<usize, ProofError> {
        let b = self.steps[i].as_ref().expect("live base step");
        let id = b.map[index];
        if id != NONE {
            return Ok(id);
        }
        let cid = b.axiom.expect("derived steps are filled eagerly");
        let lifted_id = self.lifted.offset(cid) as usize + index;
        let id = self.push(ProofStep::Axiom(lifted_id))?;
        self.steps[i].as_mut().expect("live").map[index] = id;
        Ok(id)
    }

    /// Source of every literal of premise `p` in terms of target `x`.
    fn sources(&self, premise: &[i32], target: &[i32], pivot_lit: i32) -> Vec<Src> {
        premise
            .iter()
            .map(|&l| match target.iter().position(|&t| t == l) {
                Some(k) => Src::Target(k),
                None => {
                    debug_assert_eq!(l, pivot_lit);
                    Src::Pivot
                }
            })
            .collect()
    }

    fn index(srcs: &[Src], radix: &[usize], digits: &[usize], pivot_digit: usize) -> usize {
        srcs.iter().zip(radix).fold(0, |acc, (s, &r)| {
            acc * r
                + match s {
                    Src::Target(k) => digits[*k],
                    Src::Pivot => pivot_digit,
                }
        })
    }

    fn lift_resolution(&mut self, i: usize, left: usize, right: usize, var: u32, clause: Clause) -> Result<Base, ProofError> {
        let radix = radix_of(self.g, &clause);
        let count: usize = radix.iter().product();
        let x = var as i32;
        let mut map = vec![NONE; count];
        let mut digits = vec![0usize; clause.len()];
        let (p1, p2) = (
            self.steps[left].as_ref().map(|b| (b.clause.clone(), b.actual.clone(), b.owner)),
            self.steps[right].as_ref().map(|b| (b.clause.clone(), b.actual.clone(), b.owner)),
        );
        let fixed = clause.iter().any(|l| l.unsigned_abs() == var);
        // a single premise step stands for every target
        let alias = if fixed {
            Some(if clause.contains(&-x) { (left, -x, 0) } else { (right, x, 0) })
        } else {
            let (_, a1, _) = p1.as_ref().expect("non-tautological premise");
            let (_, a2, _) = p2.as_ref().expect("non-tautological premise");
            if !a1.contains(&-x) {
                Some((left, -x, 0))
            } else if !a2.contains(&x) {
                Some((right, x, 0))
            } else {
                None
            }
        };
        if let Some((src, lit, pivot_digit)) = alias {
            let (pc, actual, owner) = if src == left { p1 } else { p2 }.expect("premise lifted");
            let srcs = self.sources(&pc, &clause, lit);
            let pr = radix_of(self.g, &pc);
            for (t, slot) in map.iter_mut().enumerate() {
                decode(t, &radix, &mut digits);
                *slot = Self::index(&srcs, &pr, &digits, pivot_digit);
            }
            for slot in map.iter_mut() {
                let idx = *slot;
                *slot = self.get(src, idx)?;
            }
            return Ok(Base {
                clause,
                axiom: None,
                map,
                actual,
                owner,
            });
        }
        let (c1, a1, _) = p1.expect("checked");
        let (c2, a2, _) = p2.expect("checked");
        let s1 = self.sources(&c1, &clause, -x);
        let s2 = self.sources(&c2, &clause, x);
        let (r1, r2) = (radix_of(self.g, &c1), radix_of(self.g, &c2));
        let b = self.g.arity();
        let block_start = (var - 1) * b as u32 + 1;
        // leaf y: base step, and the digit of y in its preimage list
        let leaf: Vec<(bool, usize)> = (0..1u32 << b)
            .map(|y| {
                let one = self.g.eval(y);
                let pos = self.g.preimages(one).binary_search(&y).expect("preimage");
                (one, pos)
            })
            .collect();
        let mut uses1 = self.use_counters(left, right, i, &s1, &r1, &radix);
        let mut uses2 = self.use_counters(right, left, i, &s2, &r2, &radix);
        let mut inner = Vec::with_capacity(1 << b);
        let mut spent: Vec<(usize, usize)> = Vec::new();
        for (t, slot) in map.iter_mut().enumerate() {
            decode(t, &radix, &mut digits);
            inner.clear();
            let root = self.tree(0, 0, b, block_start, &leaf, &mut inner, &mut |this, one, pos| {
                let (p, idx, uses) = if one {
                    (left, Self::index(&s1, &r1, &digits, pos), &mut uses1)
                } else {
                    (right, Self::index(&s2, &r2, &digits, pos), &mut uses2)
                };
                let id = this.get(p, idx)?;
                if let Some(u) = uses {
                    u[idx] -= 1;
                    if u[idx] == 0 {
                        spent.push((p, idx));
                    }
                }
                Ok(id)
            })?;
            inner.pop();
            for &s in &inner {
                self.sink.release(s);
            }
            for (p, idx) in spent.drain(..) {
                let slot = &mut self.steps[p].as_mut().expect("live").map[idx];
                self.sink.release(*slot);
                *slot = NONE;
            }
            *slot = root;
        }
        let mut actual: Clause = a1.iter().copied().filter(|&l| l != -x).chain(a2.iter().copied().filter(|&l| l != x)).collect();
        actual.sort_unstable_by_key(|&l| (l.unsigned_abs(), l > 0));
        actual.dedup();
        Ok(Base {
            clause,
            axiom: None,
            map,
            actual,
            owner: i,
        })
    }

    /// Remaining uses of every lifted step of premise `p`, when this base
    /// step is the last to refer to them.
    fn use_counters(
        &self,
        p: usize,
        other: usize,
        i: usize,
        srcs: &[Src],
        pradix: &[usize],
        radix: &[usize],
    ) -> Option<Vec<u32>> {
        if p == other || self.last_use[p] != Some(i) || self.holders[p] != 1 {
            return None;
        }
        let b = self.steps[p].as_ref()?;
        if b.owner != p {
            return None;
        }
        let mut used = vec![false; radix.len()];
        for s in srcs {
            if let Src::Target(k) = s {
                used[*k] = true;
            }
        }
        let m: usize = radix.iter().zip(&used).filter(|(_, u)| !**u).map(|(r, _)| *r).product();
        Some(vec![m as u32; pradix.iter().product()])
    }

    /// Depth-first: the zero subtree, the one subtree, then the cut on bit
    /// `depth` of the block.
    #[allow(clippy::too_many_arguments)]
    fn tree(
        &mut self,
        depth: usize,
        prefix: u32,
        b: usize,
        block_start: u32,
        leaf: &[(bool, usize)],
        inner: &mut Vec<usize>,
        get: &mut dyn FnMut(&mut Self, bool, usize) -> Result<usize, ProofError>,
    ) -> Result<usize, ProofError> {
        if depth == b {
            let (one, pos) = leaf[prefix as usize];
            return get(self, one, pos);
        }
        let zero = self.tree(depth + 1, prefix << 1, b, block_start, leaf, inner, get)?;
        let one = self.tree(depth + 1, (prefix << 1) | 1, b, block_start, leaf, inner, get)?;
        let id = self.push(ProofStep::Resolve {
            left: one,
            right: zero,
            pivot: LinearForm::var(block_start + depth as u32),
        })?;
        inner.push(id);
        Ok(id)
    }
}

/// Emit a refutation of `base ∘ g` into `sink`, following `base_proof`.
/// Release hints are sent for lifted steps no longer needed.
pub fn refute_lifted_into<S: ProofSink + ?Sized>(
    base: &CnfFormula,
    base_proof: &ProofTrace,
    g: &Gadget,
    sink: &mut S,
) -> Result<LiftStats, ProofError> {
    let (stats, clauses) = derive_clauses(base, base_proof, Mode::Resolution).map_err(ProofError::BaseRejected)?;
    if !stats.refutation {
        return Err(ProofError::NotARefutation);
    }
    if stats.width > MAX_LIFT_BASE_WIDTH || g.arity() > MAX_LIFT_ARITY {
        return Err(ProofError::WidthCap {
            width: stats.width,
            arity: g.arity(),
        });
    }
    let lifted = LiftedFormula::new(base, g)?;
    let clauses: Vec<Clause> = clauses.iter().map(|c| c.to_literals().expect("ordinary")).collect();
    let last_use = base_proof.last_uses();
    let n = base_proof.len();
    let mut lf = Lifter {
        g,
        lifted,
        sink,
        steps: (0..n).map(|_| None).collect(),
        last_use: last_use.clone(),
        holders: vec![0; n],
        count: 0,
        last: NONE,
    };
    // an owner's steps are released once no live base step refers to them
    let mut parked: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut dying: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, l) in last_use.iter().enumerate() {
        if let Some(l) = l {
            dying[*l].push(i);
        }
    }
    for (i, step) in base_proof.steps.iter().enumerate() {
        let clause = clauses[i].clone();
        if !is_tautology(&clause) {
            let b = match step {
                ProofStep::Axiom(cid) => {
                    let count = radix_of(g, &clause).iter().product();
                    Base {
                        actual: clause.clone(),
                        clause,
                        axiom: Some(*cid),
                        map: vec![NONE; count],
                        owner: i,
                    }
                }
                ProofStep::Resolve { left, right, pivot } => {
                    lf.lift_resolution(i, *left, *right, pivot.vars()[0], clause)?
                }
                ProofStep::Weaken { .. } => unreachable!("resolution mode checked"),
            };
            lf.holders[b.owner] += 1;
            lf.steps[i] = Some(b);
        }
        for &d in &dying[i] {
            let Some(b) = lf.steps[d].take() else {
                continue;
            };
            lf.holders[b.owner] -= 1;
            let owned = if b.owner == d {
                if lf.holders[d] > 0 {
                    parked.insert(d, b.map);
                    continue;
                }
                b.map
            } else if lf.holders[b.owner] == 0 {
                parked.remove(&b.owner).unwrap_or_default()
            } else {
                continue;
            };
            for id in owned.into_iter().filter(|&id| id != NONE) {
                lf.sink.release(id);
            }
        }
    }
    Ok(LiftStats {
        base_length: stats.length,
        base_width: stats.width,
        length: lf.count,
        last: lf.last,
    })
}

pub fn refute_lifted(base: &CnfFormula, base_proof: &ProofTrace, g: &Gadget) -> Result<ProofTrace, ProofError> {
    let mut p = ProofTrace::new(base.nvars * g.arity());
    refute_lifted_into(base, base_proof, g, &mut p)?;
    Ok(p)
}
