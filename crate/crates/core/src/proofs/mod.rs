//! Linear clauses, proof traces, the checker and the refutation engine for
//! stone formulas and their lifts.

mod check;
mod clause;
mod lifted;
mod semantic;
mod stone;
mod trace;

use thiserror::Error;

pub use check::{check_proof, derive_clauses, is_regular, CheckError, CheckStats, Checker, Mode};
pub use clause::{entails, ClauseError, Equation, LinearClause, LinearForm};
pub use lifted::{refute_lifted, refute_lifted_into, LiftStats, MAX_LIFT_ARITY, MAX_LIFT_BASE_WIDTH};
pub use semantic::{derive_fragment, derive_semantic, Fragment, FragmentStep, SemanticError, MAX_SEMANTIC_VARS};
pub use stone::{refute_stone, refute_stone_into};
pub use trace::{write_step, AxiomSource, ProofStep, ProofTrace, TraceError};

use crate::formulas::FormulaError;

#[derive(Debug, Error)]
pub enum ProofError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("base proof rejected: {0}")]
    BaseRejected(CheckError),
    #[error("base proof does not derive the empty clause")]
    NotARefutation,
    #[error("lifting needs base width <= {MAX_LIFT_BASE_WIDTH} and arity <= {MAX_LIFT_ARITY}, got width {width} and arity {arity}")]
    WidthCap { width: usize, arity: usize },
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// Destination of generated steps.
pub trait ProofSink {
    fn push_step(&mut self, step: ProofStep) -> Result<usize, CheckError>;

    /// Hint that `step` is not referenced again.
    fn release(&mut self, _step: usize) {}
}

impl ProofSink for ProofTrace {
    fn push_step(&mut self, step: ProofStep) -> Result<usize, CheckError> {
        Ok(self.push(step))
    }
}

impl<F: AxiomSource + ?Sized> ProofSink for Checker<'_, F> {
    fn push_step(&mut self, step: ProofStep) -> Result<usize, CheckError> {
        self.push(&step)
    }

    fn release(&mut self, step: usize) {
        Checker::release(self, step);
    }
}
