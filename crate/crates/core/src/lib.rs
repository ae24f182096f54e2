//! Stone formulas over pyramid graphs, gadget lifting, resolution and
//! ResLin refutations with a checker, linear branching programs, and the
//! GF(2) block linear algebra behind closures and safe bases.

pub mod experiments;
pub mod formulas;
pub mod gadgets;
pub mod gf2blocks;
pub mod lbp;
pub mod proofs;
