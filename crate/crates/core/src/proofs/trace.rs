//! Proof steps, traces and the RLIN v1 text format.
//!
//! Steps and clause ids are 0-based in memory and 1-based in RLIN text.

use std::cell::RefCell;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::clause::{LinearClause, LinearForm};
use crate::formulas::{Clause, CnfFormula, LiftedFormula};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ProofStep {
    /// Clause `id` of the formula.
    Axiom(usize),
    /// `left` contains `pivot=0`, `right` contains `pivot=1`.
    Resolve { left: usize, right: usize, pivot: LinearForm },
    Weaken { premise: usize, clause: LinearClause },
}

impl ProofStep {
    pub fn premises(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match self {
            ProofStep::Axiom(_) => (None, None),
            ProofStep::Resolve { left, right, .. } => (Some(*left), Some(*right)),
            ProofStep::Weaken { premise, .. } => (Some(*premise), None),
        };
        a.into_iter().chain(b)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProofTrace {
    pub nvars: usize,
    pub steps: Vec<ProofStep>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ProofTrace {
    pub fn new(nvars: usize) -> Self {
        ProofTrace {
            nvars,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, step: ProofStep) -> usize {
        self.steps.push(step);
        self.steps.len() - 1
    }

    /// Index of the last step using each step as a premise.
    pub fn last_uses(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.steps.len()];
        for (i, s) in self.steps.iter().enumerate() {
            for p in s.premises() {
                if p < out.len() {
                    out[p] = Some(i);
                }
            }
        }
        out
    }

    pub fn write_rlin<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "p rlin {} {}", self.nvars, self.steps.len())?;
        for s in &self.steps {
            write_step(&mut w, s)?;
        }
        Ok(())
    }

    pub fn to_rlin(&self) -> String {
        let mut out = Vec::new();
        self.write_rlin(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("ascii")
    }

    pub fn parse_rlin<R: BufRead>(reader: R) -> Result<Self, TraceError> {
        let mut header: Option<(usize, usize)> = None;
        let mut steps = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let err = |msg: String| TraceError::Parse { line: lineno, msg };
            let t = line.trim();
            if t.is_empty() || t.starts_with('c') {
                continue;
            }
            let mut parts = t.splitn(4, ' ');
            let tag = parts.next().unwrap_or("");
            if header.is_none() {
                let f: Vec<&str> = t.split_whitespace().collect();
                if f.len() != 4 || f[0] != "p" || f[1] != "rlin" {
                    return Err(err(format!("expected 'p rlin <nvars> <nsteps>', got {t:?}")));
                }
                let nvars = f[2].parse().map_err(|_| err(format!("bad variable count {:?}", f[2])))?;
                let nsteps = f[3].parse().map_err(|_| err(format!("bad step count {:?}", f[3])))?;
                header = Some((nvars, nsteps));
                continue;
            }
            let index = |s: Option<&str>| -> Result<usize, TraceError> {
                let s = s.ok_or_else(|| err("missing field".into()))?;
                match s.trim().parse::<usize>() {
                    Ok(v) if v > 0 => Ok(v - 1),
                    _ => Err(err(format!("bad index {s:?}"))),
                }
            };
            let step = match tag {
                "a" => ProofStep::Axiom(index(parts.next())?),
                "r" => {
                    let left = index(parts.next())?;
                    let right = index(parts.next())?;
                    let form = parts.next().ok_or_else(|| err("missing form".into()))?;
                    let pivot = form.parse().map_err(|e| err(format!("{e}")))?;
                    ProofStep::Resolve { left, right, pivot }
                }
                "w" => {
                    let premise = index(parts.next())?;
                    let rest = [parts.next(), parts.next()].into_iter().flatten().collect::<Vec<_>>().join(" ");
                    let clause = rest.parse().map_err(|e| err(format!("{e}")))?;
                    ProofStep::Weaken { premise, clause }
                }
                _ => return Err(err(format!("unknown step kind {tag:?}"))),
            };
            steps.push(step);
        }
        let (nvars, nsteps) = header.ok_or(TraceError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        if steps.len() != nsteps {
            return Err(TraceError::Parse {
                line: 1,
                msg: format!("header announces {nsteps} steps, found {}", steps.len()),
            });
        }
        Ok(ProofTrace { nvars, steps })
    }
}

pub fn write_step<W: Write>(w: &mut W, s: &ProofStep) -> io::Result<()> {
    match s {
        ProofStep::Axiom(c) => writeln!(w, "a {}", c + 1),
        ProofStep::Resolve { left, right, pivot } => writeln!(w, "r {} {} {}", left + 1, right + 1, pivot),
        ProofStep::Weaken { premise, clause } if clause.is_empty() => writeln!(w, "w {}", premise + 1),
        ProofStep::Weaken { premise, clause } => writeln!(w, "w {} {}", premise + 1, clause),
    }
}

/// Anything that can hand out axiom clauses by id.
pub trait AxiomSource {
    fn nvars(&self) -> usize;
    fn num_axioms(&self) -> usize;
    /// Clause `id`, or `None` when out of range.
    fn axiom(&self, id: usize) -> Option<Clause>;

    fn axiom_clause(&self, id: usize) -> Option<LinearClause> {
        self.axiom(id).map(|c| LinearClause::from_literals(&c))
    }
}

impl AxiomSource for CnfFormula {
    fn nvars(&self) -> usize {
        self.nvars
    }

    fn num_axioms(&self) -> usize {
        self.clauses.len()
    }

    fn axiom(&self, id: usize) -> Option<Clause> {
        self.clauses.get(id).cloned()
    }
}

impl AxiomSource for LiftedFormula<'_> {
    fn nvars(&self) -> usize {
        LiftedFormula::nvars(self)
    }

    fn num_axioms(&self) -> usize {
        self.num_clauses() as usize
    }

    fn axiom(&self, id: usize) -> Option<Clause> {
        ((id as u64) < self.num_clauses()).then(|| self.clause(id as u64))
    }

    fn axiom_clause(&self, id: usize) -> Option<LinearClause> {
        if id as u64 >= self.num_clauses() {
            return None;
        }
        thread_local! {
            static BUF: RefCell<Clause> = const { RefCell::new(Vec::new()) };
        }
        BUF.with_borrow_mut(|buf| {
            self.clause_into(id as u64, buf);
            Some(LinearClause::from_sorted_literals(buf))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rlin_round_trip() {
        let mut p = ProofTrace::new(3);
        p.push(ProofStep::Axiom(0));
        p.push(ProofStep::Axiom(1));
        p.push(ProofStep::Resolve {
            left: 0,
            right: 1,
            pivot: LinearForm::new([2, 1]).unwrap(),
        });
        p.push(ProofStep::Weaken {
            premise: 2,
            clause: "1=1;2+3=0".parse().unwrap(),
        });
        p.push(ProofStep::Weaken {
            premise: 2,
            clause: LinearClause::empty(),
        });
        let text = p.to_rlin();
        assert_eq!(text, "p rlin 3 5\na 1\na 2\nr 1 2 1+2\nw 3 1=1;2+3=0\nw 3\n");
        assert_eq!(ProofTrace::parse_rlin(text.as_bytes()).unwrap(), p);
    }

    #[test]
    fn rlin_errors_name_the_line() {
        let e = ProofTrace::parse_rlin("p rlin 2 1\nr 1 0 1\n".as_bytes()).unwrap_err();
        assert!(matches!(e, TraceError::Parse { line: 2, .. }), "{e}");
        let e = ProofTrace::parse_rlin("p cnf 2 1\n".as_bytes()).unwrap_err();
        assert!(matches!(e, TraceError::Parse { line: 1, .. }));
        let e = ProofTrace::parse_rlin("p rlin 2 2\na 1\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("announces 2"));
    }

    #[test]
    fn last_uses() {
        let mut p = ProofTrace::new(1);
        p.push(ProofStep::Axiom(0));
        p.push(ProofStep::Axiom(1));
        p.push(ProofStep::Resolve {
            left: 0,
            right: 1,
            pivot: LinearForm::var(1),
        });
        assert_eq!(p.last_uses(), vec![Some(2), Some(2), None]);
    }
}
