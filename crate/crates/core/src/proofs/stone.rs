//! Polynomial-size constant-width resolution refutations of stone formulas.
//!
//! Notation: `S(v)_j = ¬P(v,j) ∨ R(j)` says a stone `j` on `v` is red.
//! Sinks have it as an axiom. For an internal `v` with children `u`, `w`
//! every `S(v)_j` is derived from `S(u)` and `S(w)` in three stages:
//!
//! 1. for each `(i, k)` the obfuscated pair of induction clauses is
//!    resolved on its appended variable, then the result is resolved with
//!    `S(u)_i` on `R(i)` and (when `k ≠ i`) with `S(w)_k` on `R(k)`, giving
//!    `¬P(v,j) ∨ ¬P(u,i) ∨ ¬P(w,k) ∨ R(j)`;
//! 2. the stone choice on `w` is eliminated with the placement chain of `w`;
//! 3. the stone choice on `u` is eliminated with the placement chain of `u`.
//!
//! At the root each `S(r)_j` is cut against the root clause, and the root's
//! own placement chain finishes with the empty clause.

use std::collections::HashMap;

use super::clause::LinearForm;
use super::{ProofError, ProofSink, ProofStep, ProofTrace};
use crate::formulas::{Dag, ObfuscationMap, StoneLayout, StoneVars};

struct Gen<'s, S: ProofSink + ?Sized> {
    sink: &'s mut S,
    sv: StoneVars,
    layout: StoneLayout,
    axioms: HashMap<usize, usize>,
}

impl<S: ProofSink + ?Sized> Gen<'_, S> {
    fn axiom(&mut self, cid: usize) -> Result<usize, ProofError> {
        if let Some(&s) = self.axioms.get(&cid) {
            return Ok(s);
        }
        let s = self.sink.push_step(ProofStep::Axiom(cid))?;
        self.axioms.insert(cid, s);
        Ok(s)
    }

    fn resolve(&mut self, left: usize, right: usize, var: i32) -> Result<usize, ProofError> {
        Ok(self.sink.push_step(ProofStep::Resolve {
            left,
            right,
            pivot: LinearForm::var(var as u32),
        })?)
    }

    /// From `d[j] = C ∨ ¬P(x,j)` for every `j`, derive `C` along the
    /// placement chain of `x` in `2N − 1` resolutions.
    fn collapse(&mut self, x: usize, d: &[usize]) -> Result<usize, ProofError> {
        let n = self.sv.n;
        let first = self.axiom(self.layout.placement(x, 0))?;
        if n == 1 {
            return self.resolve(d[0], first, self.sv.p(x, 0));
        }
        let mut e = self.resolve(d[0], first, self.sv.p(x, 0))?;
        for (j, &dj) in d.iter().enumerate().take(n).skip(1) {
            let link = self.axiom(self.layout.placement(x, j))?;
            let t = self.resolve(e, link, self.sv.z(x, j - 1))?;
            e = self.resolve(dj, t, self.sv.p(x, j))?;
        }
        Ok(e)
    }
}

/// Emit the refutation of `stone_formula(dag, rho)` into `sink` and return
/// the index of the final step.
pub fn refute_stone_into<S: ProofSink + ?Sized>(
    dag: &Dag,
    rho: &ObfuscationMap,
    sink: &mut S,
) -> Result<usize, ProofError> {
    let n = dag.len();
    if rho.n() != n {
        return Err(crate::formulas::FormulaError::RhoSize {
            expected: n,
            found: rho.n(),
        }
        .into());
    }
    let sv = StoneVars { n };
    let mut g = Gen {
        sink,
        sv,
        layout: StoneLayout::new(dag),
        axioms: HashMap::new(),
    };
    let mut red: Vec<Option<Vec<usize>>> = vec![None; n];
    for (pos, &s) in dag.sinks().iter().enumerate() {
        let ids = (0..n).map(|j| g.axiom(g.layout.sink(pos, j))).collect::<Result<_, _>>()?;
        red[s] = Some(ids);
    }
    for &v in dag.topological_order().iter().rev() {
        let Some((u, w)) = dag.children(v) else {
            continue;
        };
        let su = red[u].clone().expect("children first");
        let sw = red[w].clone().expect("children first");
        let mut sv_ids = Vec::with_capacity(n);
        for j in 0..n {
            let mut f = Vec::with_capacity(n);
            for (i, &ui) in su.iter().enumerate() {
                let mut e = Vec::with_capacity(n);
                for (k, &wk) in sw.iter().enumerate() {
                    let plus = g.axiom(g.layout.induction(v, i, k, j, true))?;
                    let minus = g.axiom(g.layout.induction(v, i, k, j, false))?;
                    let c = g.resolve(minus, plus, rho.get(i, k, j) as i32)?;
                    let mut x = g.resolve(c, ui, sv.r(i))?;
                    if k != i {
                        x = g.resolve(x, wk, sv.r(k))?;
                    }
                    e.push(x);
                }
                f.push(g.collapse(w, &e)?);
            }
            sv_ids.push(g.collapse(u, &f)?);
        }
        red[v] = Some(sv_ids);
    }
    let r = dag.root();
    let sr = red[r].clone().expect("root reached");
    let mut d = Vec::with_capacity(n);
    for (j, &s) in sr.iter().enumerate() {
        let root = g.axiom(g.layout.root(j))?;
        d.push(g.resolve(root, s, sv.r(j))?);
    }
    g.collapse(r, &d)
}

pub fn refute_stone(dag: &Dag, rho: &ObfuscationMap) -> Result<ProofTrace, ProofError> {
    let mut p = ProofTrace::new(StoneVars { n: dag.len() }.count());
    refute_stone_into(dag, rho, &mut p)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::{pyramid, random_obfuscation, stone_formula};
    use crate::proofs::{check_proof, Mode};

    #[test]
    fn pyramid_two_is_refuted() {
        let dag = pyramid(2).unwrap();
        for seed in 0..5 {
            let rho = random_obfuscation(3, seed);
            let f = stone_formula(&dag, &rho).unwrap();
            let p = refute_stone(&dag, &rho).unwrap();
            let s = check_proof(&f, &p, Mode::Resolution).unwrap();
            assert!(s.refutation);
            assert!(s.width <= 7, "{}", s.width);
        }
    }

    #[test]
    fn wrong_rho_size() {
        let dag = pyramid(2).unwrap();
        assert!(refute_stone(&dag, &random_obfuscation(4, 0)).is_err());
    }
}
