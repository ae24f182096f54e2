//! Tree-like resolution derivations of an implied clause from a decision
//! tree that queries the target's variables first and then the remaining
//! premise variables in ascending order.

use thiserror::Error;

use super::clause::LinearForm;
use super::trace::{ProofStep, ProofTrace};
use crate::formulas::Clause;

pub const MAX_SEMANTIC_VARS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticError {
    #[error("{0} variables exceed the limit of {MAX_SEMANTIC_VARS}")]
    TooManyVariables(usize),
    #[error("target clause is a tautology")]
    TautologicalTarget,
    #[error("premises do not imply the target")]
    NotImplied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FragmentStep {
    /// Index into the premise list.
    Premise(usize),
    /// Indices of earlier fragment steps; `left` contains `¬var`.
    Resolve { left: usize, right: usize, var: u32 },
}

/// A derivation whose last step is the root.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fragment {
    pub steps: Vec<FragmentStep>,
}

impl Fragment {
    pub fn resolutions(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, FragmentStep::Resolve { .. })).count()
    }

    /// Stand-alone trace over the premises as axioms, one fresh axiom step
    /// per leaf occurrence so the result is tree-like.
    pub fn to_trace(&self, nvars: usize) -> ProofTrace {
        let mut p = ProofTrace::new(nvars);
        let mut map = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            let id = match *s {
                FragmentStep::Premise(i) => p.push(ProofStep::Axiom(i)),
                FragmentStep::Resolve { left, right, var } => p.push(ProofStep::Resolve {
                    left: map[left],
                    right: map[right],
                    pivot: LinearForm::var(var),
                }),
            };
            map.push(id);
        }
        p
    }
}

struct Node {
    step: usize,
    /// Clause of the node as sorted literals.
    clause: Clause,
}

struct Builder<'a> {
    premises: &'a [Clause],
    order: Vec<u32>,
    /// Falsifying value per variable in `order`, when fixed by the target.
    target_value: Vec<Option<bool>>,
    assign: Vec<Option<bool>>,
    out: Fragment,
}

impl Builder<'_> {
    fn value(&self, var: u32) -> Option<bool> {
        let k = self.order.iter().position(|&v| v == var).expect("known variable");
        self.assign[k]
    }

    fn falsified_premise(&self) -> Option<usize> {
        self.premises
            .iter()
            .position(|c| c.iter().all(|&l| self.value(l.unsigned_abs()) == Some(l < 0)))
    }

    fn build(&mut self, depth: usize) -> Result<Node, SemanticError> {
        if let Some(i) = self.falsified_premise() {
            self.out.steps.push(FragmentStep::Premise(i));
            return Ok(Node {
                step: self.out.steps.len() - 1,
                clause: self.premises[i].clone(),
            });
        }
        if depth == self.order.len() {
            return Err(SemanticError::NotImplied);
        }
        if let Some(v) = self.target_value[depth] {
            self.assign[depth] = Some(v);
            let r = self.build(depth + 1);
            self.assign[depth] = None;
            return r;
        }
        let x = self.order[depth] as i32;
        self.assign[depth] = Some(false);
        let zero = self.build(depth + 1)?;
        self.assign[depth] = None;
        if !zero.clause.contains(&x) {
            return Ok(zero);
        }
        self.assign[depth] = Some(true);
        let one = self.build(depth + 1)?;
        self.assign[depth] = None;
        if !one.clause.contains(&-x) {
            return Ok(one);
        }
        let mut clause: Clause = one
            .clause
            .iter()
            .copied()
            .filter(|&l| l != -x)
            .chain(zero.clause.iter().copied().filter(|&l| l != x))
            .collect();
        clause.sort_unstable_by_key(|&l| (l.unsigned_abs(), l > 0));
        clause.dedup();
        self.out.steps.push(FragmentStep::Resolve {
            left: one.step,
            right: zero.step,
            var: x as u32,
        });
        Ok(Node {
            step: self.out.steps.len() - 1,
            clause,
        })
    }
}

/// Derivation of a subclause of `target` from `premises`. The root is the
/// last step; its clause is contained in `target`.
pub fn derive_fragment(premises: &[Clause], target: &[i32]) -> Result<Fragment, SemanticError> {
    let mut order: Vec<u32> = Vec::new();
    let mut target_value = Vec::new();
    for &l in target {
        let x = l.unsigned_abs();
        match order.iter().position(|&v| v == x) {
            Some(k) if target_value[k] != Some(l < 0) => return Err(SemanticError::TautologicalTarget),
            Some(_) => {}
            None => {
                order.push(x);
                target_value.push(Some(l < 0));
            }
        }
    }
    let mut rest: Vec<u32> = premises
        .iter()
        .flatten()
        .map(|l| l.unsigned_abs())
        .filter(|x| !order.contains(x))
        .collect();
    rest.sort_unstable();
    rest.dedup();
    target_value.extend(rest.iter().map(|_| None));
    order.extend(rest);
    if order.len() > MAX_SEMANTIC_VARS {
        return Err(SemanticError::TooManyVariables(order.len()));
    }
    let n = order.len();
    let mut b = Builder {
        premises,
        order,
        target_value,
        assign: vec![None; n],
        out: Fragment::default(),
    };
    b.build(0)?;
    Ok(b.out)
}

/// Tree-like derivation of a subclause of `target` whose axioms are the
/// premises (clause `i` of the trace's formula is `premises[i]`).
pub fn derive_semantic(premises: &[Clause], target: &[i32]) -> Result<ProofTrace, SemanticError> {
    let nvars = premises.iter().flatten().chain(target).map(|l| l.unsigned_abs() as usize).max().unwrap_or(0);
    Ok(derive_fragment(premises, target)?.to_trace(nvars))
}
