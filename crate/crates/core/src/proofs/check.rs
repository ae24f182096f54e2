//! Step-by-step verification of resolution and ResLin traces.

use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashMap;
use thiserror::Error;

use super::clause::{entails, LinearClause};
use super::trace::{AxiomSource, ProofStep, ProofTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Single-variable pivots, syntactic weakening, ordinary clauses.
    Resolution,
    /// Linear pivots and semantic weakening.
    ResLin,
    /// ResLin where every derived clause is used at most once.
    TreeLike,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "resolution" => Ok(Mode::Resolution),
            "reslin" => Ok(Mode::ResLin),
            "tree-like" => Ok(Mode::TreeLike),
            _ => Err(format!("unknown mode {s:?} (resolution, reslin, tree-like)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Resolution => "resolution",
            Mode::ResLin => "reslin",
            Mode::TreeLike => "tree-like",
        })
    }
}

/// Step numbers in messages are 1-based, as in RLIN files.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("step {}: bad reference to step {}", .step + 1, .reference + 1)]
    BadReference { step: usize, reference: usize },
    #[error("step {}: formula has no clause {}", .step + 1, .id + 1)]
    AxiomMismatch { step: usize, id: usize },
    #[error("step {}: invalid resolvent: {reason}", .step + 1)]
    InvalidResolvent { step: usize, reason: String },
    #[error("step {}: weakened clause is not implied by its premise", .step + 1)]
    UnsoundWeakening { step: usize },
    #[error("step {}: {reason}", .step + 1)]
    ModeViolation { step: usize, reason: String },
}

impl CheckError {
    pub fn step(&self) -> usize {
        match self {
            CheckError::BadReference { step, .. }
            | CheckError::AxiomMismatch { step, .. }
            | CheckError::InvalidResolvent { step, .. }
            | CheckError::UnsoundWeakening { step }
            | CheckError::ModeViolation { step, .. } => *step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckStats {
    pub length: usize,
    pub width: usize,
    /// The last step derives the empty clause.
    pub refutation: bool,
    /// Resolution mode only: no variable is resolved twice on a path.
    pub regular: Option<bool>,
}

/// Online checker. Steps are validated as they arrive; clauses of released
/// steps are dropped, so a proof can be streamed in bounded memory.
pub struct Checker<'f, F: AxiomSource + ?Sized> {
    formula: &'f F,
    mode: Mode,
    live: FxHashMap<usize, LinearClause>,
    consumed: Vec<u64>,
    axiom_steps: Vec<u64>,
    next: usize,
    width: usize,
    last_empty: bool,
    peak_live: usize,
}

fn bit_get(v: &[u64], i: usize) -> bool {
    v.get(i / 64).is_some_and(|w| (w >> (i % 64)) & 1 == 1)
}

fn bit_set(v: &mut Vec<u64>, i: usize) {
    if v.len() <= i / 64 {
        v.resize(i / 64 + 1, 0);
    }
    v[i / 64] |= 1 << (i % 64);
}

impl<'f, F: AxiomSource + ?Sized> Checker<'f, F> {
    pub fn new(formula: &'f F, mode: Mode) -> Self {
        Checker {
            formula,
            mode,
            live: FxHashMap::default(),
            consumed: Vec::new(),
            axiom_steps: Vec::new(),
            next: 0,
            width: 0,
            last_empty: false,
            peak_live: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.next
    }

    pub fn is_empty(&self) -> bool {
        self.next == 0
    }

    pub fn clause(&self, step: usize) -> Option<&LinearClause> {
        self.live.get(&step)
    }

    /// Forget the clause of `step`; later references to it are rejected.
    pub fn release(&mut self, step: usize) {
        self.live.remove(&step);
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    /// Largest number of clauses held at once.
    pub fn peak_live(&self) -> usize {
        self.peak_live
    }

    fn premise(&self, step: usize, reference: usize) -> Result<&LinearClause, CheckError> {
        if reference >= step {
            return Err(CheckError::BadReference { step, reference });
        }
        self.live.get(&reference).ok_or(CheckError::BadReference { step, reference })
    }

    fn consume(&mut self, step: usize, reference: usize) -> Result<(), CheckError> {
        if self.mode != Mode::TreeLike || bit_get(&self.axiom_steps, reference) {
            return Ok(());
        }
        if bit_get(&self.consumed, reference) {
            return Err(CheckError::ModeViolation {
                step,
                reason: format!("step {} is used twice in a tree-like proof", reference + 1),
            });
        }
        bit_set(&mut self.consumed, reference);
        Ok(())
    }

    /// Validate the next step and return its index.
    pub fn push(&mut self, s: &ProofStep) -> Result<usize, CheckError> {
        let step = self.next;
        let clause = match s {
            ProofStep::Axiom(id) => {
                let c = self.formula.axiom_clause(*id).ok_or(CheckError::AxiomMismatch { step, id: *id })?;
                if self.mode == Mode::TreeLike {
                    bit_set(&mut self.axiom_steps, step);
                }
                c
            }
            ProofStep::Resolve { left, right, pivot } => {
                if self.mode == Mode::Resolution && pivot.vars().len() != 1 {
                    return Err(CheckError::ModeViolation {
                        step,
                        reason: format!("resolution on the linear form {pivot}"),
                    });
                }
                let l = self.premise(step, *left)?;
                let r = self.premise(step, *right)?;
                let out = LinearClause::resolve(l, r, pivot.vars()).ok_or_else(|| {
                    let side = if !l.contains(pivot.vars(), false) {
                        format!("step {} lacks {pivot}=0", left + 1)
                    } else {
                        format!("step {} lacks {pivot}=1", right + 1)
                    };
                    CheckError::InvalidResolvent { step, reason: side }
                })?;
                self.consume(step, *left)?;
                self.consume(step, *right)?;
                out
            }
            ProofStep::Weaken { premise, clause } => {
                let p = self.premise(step, *premise)?;
                let ok = match self.mode {
                    Mode::Resolution => {
                        if !clause.is_ordinary() {
                            return Err(CheckError::ModeViolation {
                                step,
                                reason: "weakening to a non-ordinary clause".into(),
                            });
                        }
                        p.is_subclause_of(clause)
                    }
                    Mode::ResLin | Mode::TreeLike => entails(p, clause),
                };
                if !ok {
                    return Err(CheckError::UnsoundWeakening { step });
                }
                self.consume(step, *premise)?;
                clause.clone()
            }
        };
        self.width = self.width.max(clause.width());
        self.last_empty = clause.is_empty();
        self.live.insert(step, clause);
        self.peak_live = self.peak_live.max(self.live.len());
        self.next += 1;
        Ok(step)
    }

    pub fn stats(&self) -> CheckStats {
        CheckStats {
            length: self.next,
            width: self.width,
            refutation: self.last_empty,
            regular: None,
        }
    }
}

/// Check a whole trace, releasing each clause after its last use.
pub fn check_proof<F: AxiomSource + ?Sized>(f: &F, p: &ProofTrace, mode: Mode) -> Result<CheckStats, CheckError> {
    let last = p.last_uses();
    let mut releases: Vec<Vec<usize>> = vec![Vec::new(); p.len()];
    for (s, l) in last.iter().enumerate() {
        if let Some(l) = l {
            releases[*l].push(s);
        }
    }
    let mut c = Checker::new(f, mode);
    for (i, s) in p.steps.iter().enumerate() {
        c.push(s)?;
        for &r in &releases[i] {
            c.release(r);
        }
    }
    let mut stats = c.stats();
    if mode == Mode::Resolution {
        stats.regular = Some(is_regular(p));
    }
    Ok(stats)
}

/// Check a trace and return the clause of every step.
pub fn derive_clauses<F: AxiomSource + ?Sized>(
    f: &F,
    p: &ProofTrace,
    mode: Mode,
) -> Result<(CheckStats, Vec<LinearClause>), CheckError> {
    let mut c = Checker::new(f, mode);
    for s in &p.steps {
        c.push(s)?;
    }
    let stats = c.stats();
    let clauses = (0..p.len()).map(|i| c.live.remove(&i).expect("kept")).collect();
    Ok((stats, clauses))
}

/// No pivot variable occurs twice on a path, computed by pushing the
/// pivot sets seen above each step down the reversed DAG. Assumes a
/// trace with single-variable pivots and valid references.
pub fn is_regular(p: &ProofTrace) -> bool {
    let words = p.nvars / 64 + 1;
    let mut above: Vec<Option<Vec<u64>>> = vec![None; p.len()];
    for i in (0..p.len()).rev() {
        let mut set = above[i].take().unwrap_or_else(|| vec![0; words]);
        if let ProofStep::Resolve { pivot, .. } = &p.steps[i] {
            let x = pivot.vars()[0] as usize;
            if bit_get(&set, x) {
                return false;
            }
            bit_set(&mut set, x);
        }
        for q in p.steps[i].premises() {
            match &mut above[q] {
                Some(t) => {
                    for (a, b) in t.iter_mut().zip(&set) {
                        *a |= b;
                    }
                }
                slot @ None => *slot = Some(set.clone()),
            }
        }
    }
    true
}
