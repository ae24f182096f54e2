//! Brute-force oracles shared by the integration and acceptance tests.
//! Everything here works on plain `u64` bitmasks and enumeration, apart
//! from the library types used to feed inputs in and read answers out.
#![allow(dead_code)]

use rand::Rng;
use reslin::gf2blocks::{BlockStructure, GF2Matrix, GF2Vector};

pub fn to_mask(v: &GF2Vector) -> u64 {
    assert!(v.len() <= 64);
    v.ones().fold(0, |acc, i| acc | (1 << i))
}

pub fn from_mask(mask: u64, len: usize) -> GF2Vector {
    GF2Vector::from_ones(len, (0..len).filter(|i| (mask >> i) & 1 == 1))
}

/// Basis of the span of `rows` by plain elimination on the lowest set bit.
pub fn basis(rows: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for &r in rows {
        let mut r = r;
        for &b in &out {
            let low = b & b.wrapping_neg();
            if r & low != 0 {
                r ^= b;
            }
        }
        if r != 0 {
            let low = r & r.wrapping_neg();
            for b in out.iter_mut() {
                if *b & low != 0 {
                    *b ^= r;
                }
            }
            out.push(r);
        }
    }
    out
}

pub fn span(rows: &[u64]) -> Vec<u64> {
    let b = basis(rows);
    (0..1u64 << b.len())
        .map(|c| (0..b.len()).filter(|i| (c >> i) & 1 == 1).fold(0, |acc, i| acc ^ b[i]))
        .collect()
}

pub fn touched(v: u64, s: BlockStructure) -> u64 {
    (0..s.m)
        .filter(|&j| (v >> (j * s.b)) & ((1 << s.b) - 1) != 0)
        .fold(0, |acc, j| acc | (1 << j))
}

/// Every subspace of the span of `b` (given as an independent list), via
/// reduced echelon coefficient matrices.
pub fn subspaces(b: &[u64], mut visit: impl FnMut(&[u64])) {
    let d = b.len();
    for pivots in 0u32..(1 << d) {
        let piv: Vec<usize> = (0..d).filter(|i| (pivots >> i) & 1 == 1).collect();
        let k = piv.len();
        // free slots: (row r, column c) with c > piv[r], c not a pivot
        let slots: Vec<(usize, usize)> = (0..k)
            .flat_map(|r| (piv[r] + 1..d).filter(|c| !piv.contains(c)).map(move |c| (r, c)))
            .collect();
        for fill in 0u64..(1 << slots.len()) {
            let mut coef: Vec<u64> = piv.iter().map(|&p| 1 << p).collect();
            for (t, &(r, c)) in slots.iter().enumerate() {
                if (fill >> t) & 1 == 1 {
                    coef[r] |= 1 << c;
                }
            }
            let vecs: Vec<u64> = coef
                .iter()
                .map(|&cf| (0..d).filter(|i| (cf >> i) & 1 == 1).fold(0, |acc, i| acc ^ b[i]))
                .collect();
            visit(&vecs);
        }
    }
}

/// Every k-dimensional subspace touches at least k blocks.
pub fn spread_oracle(rows: &[u64], s: BlockStructure) -> bool {
    let b = basis(rows);
    let mut ok = true;
    subspaces(&b, |v| {
        let t = v.iter().fold(0, |acc, &x| acc | touched(x, s));
        if (t.count_ones() as usize) < v.len() {
            ok = false;
        }
    });
    ok
}

pub fn zero_blocks_mask(rows: &[u64], t: u64, s: BlockStructure) -> Vec<u64> {
    let keep: u64 = (0..s.m)
        .filter(|j| (t >> j) & 1 == 0)
        .fold(0, |acc, j| acc | (((1u64 << s.b) - 1) << (j * s.b)));
    rows.iter().map(|r| r & keep).collect()
}

/// All obstructions T (as block masks): the projection away from T is spread.
pub fn obstructions(rows: &[u64], s: BlockStructure) -> Vec<u64> {
    (0..1u64 << s.m)
        .filter(|&t| spread_oracle(&zero_blocks_mask(rows, t, s), s))
        .collect()
}

pub fn minimal_obstructions(rows: &[u64], s: BlockStructure) -> Vec<u64> {
    let all = obstructions(rows, s);
    all.iter()
        .copied()
        .filter(|&t| !all.iter().any(|&o| o != t && o & t == o))
        .collect()
}

fn rank_cols(rows: &[u64], cols: &[usize]) -> usize {
    let sub: Vec<u64> = rows
        .iter()
        .map(|r| cols.iter().enumerate().fold(0, |acc, (k, &c)| acc | (((r >> c) & 1) << k)))
        .collect();
    basis(&sub).len()
}

/// Lexicographically smallest sorted pivot tuple: distinct blocks and an
/// invertible square submatrix of a basis.
pub fn smallest_safe_tuple(rows: &[u64], s: BlockStructure) -> Option<Vec<usize>> {
    let b = basis(rows);
    let d = b.len();
    let n = s.len();
    let mut tuple = Vec::new();
    fn rec(
        start: usize,
        d: usize,
        n: usize,
        s: BlockStructure,
        b: &[u64],
        tuple: &mut Vec<usize>,
    ) -> bool {
        if tuple.len() == d {
            return rank_cols(b, tuple) == d;
        }
        for c in start..n {
            if tuple.iter().any(|&p| p / s.b == c / s.b) {
                continue;
            }
            tuple.push(c);
            if rec(c + 1, d, n, s, b, tuple) {
                return true;
            }
            tuple.pop();
        }
        false
    }
    rec(0, d, n, s, &b, &mut tuple).then_some(tuple)
}

pub fn random_matrix<R: Rng>(rng: &mut R, nrows: usize, s: BlockStructure, density: f64) -> GF2Matrix {
    let n = s.len();
    let rows = (0..nrows)
        .map(|_| GF2Vector::from_ones(n, (0..n).filter(|_| rng.gen_bool(density))))
        .collect();
    GF2Matrix::from_rows(rows, n).unwrap()
}

/// Rows that are mostly confined to a few blocks, so obstructions are common.
pub fn random_clustered<R: Rng>(rng: &mut R, nrows: usize, s: BlockStructure) -> GF2Matrix {
    let n = s.len();
    let rows = (0..nrows)
        .map(|_| {
            let k = rng.gen_range(1..=2.min(s.m));
            let blocks: Vec<usize> = (0..k).map(|_| rng.gen_range(0..s.m)).collect();
            let mut v = GF2Vector::zeros(n);
            for &j in &blocks {
                for i in s.block_range(j) {
                    if rng.gen_bool(0.5) {
                        v.set(i, true);
                    }
                }
            }
            v
        })
        .collect();
    GF2Matrix::from_rows(rows, n).unwrap()
}

pub fn masks(m: &GF2Matrix) -> Vec<u64> {
    m.rows().iter().map(to_mask).collect()
}

/// Satisfiability of a DIMACS-style clause list by trying every assignment.
pub fn brute_force_sat(nvars: usize, clauses: &[Vec<i32>]) -> bool {
    assert!(nvars <= 26);
    (0u64..1 << nvars).any(|x| {
        clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let bit = (x >> (l.unsigned_abs() - 1)) & 1 == 1;
                bit == (l > 0)
            })
        })
    })
}

/// Plain DPLL with unit propagation; returns a satisfying assignment.
pub fn dpll(nvars: usize, clauses: &[Vec<i32>]) -> Option<Vec<bool>> {
    fn value(assign: &[Option<bool>], l: i32) -> Option<bool> {
        assign[l.unsigned_abs() as usize - 1].map(|v| v == (l > 0))
    }
    fn solve(assign: &mut Vec<Option<bool>>, clauses: &[Vec<i32>]) -> bool {
        let mut trail = Vec::new();
        loop {
            let mut unit = None;
            for c in clauses {
                let mut open = None;
                let mut n_open = 0;
                let mut sat = false;
                for &l in c {
                    match value(assign, l) {
                        Some(true) => {
                            sat = true;
                            break;
                        }
                        Some(false) => {}
                        None => {
                            n_open += 1;
                            open = Some(l);
                        }
                    }
                }
                if sat {
                    continue;
                }
                if n_open == 0 {
                    for v in trail {
                        assign[v] = None;
                    }
                    return false;
                }
                if n_open == 1 {
                    unit = open;
                    break;
                }
            }
            match unit {
                Some(l) => {
                    let v = l.unsigned_abs() as usize - 1;
                    assign[v] = Some(l > 0);
                    trail.push(v);
                }
                None => break,
            }
        }
        // branch on a variable of a shortest open clause
        let mut best: Option<(usize, i32)> = None;
        for c in clauses {
            if c.iter().any(|&l| value(assign, l) == Some(true)) {
                continue;
            }
            let open: Vec<i32> = c.iter().copied().filter(|&l| value(assign, l).is_none()).collect();
            if best.is_none_or(|(n, _)| open.len() < n) {
                best = Some((open.len(), open[0]));
            }
        }
        let Some((_, lit)) = best else {
            return true;
        };
        let v = lit.unsigned_abs() as usize - 1;
        for val in [lit > 0, lit < 0] {
            assign[v] = Some(val);
            if solve(assign, clauses) {
                return true;
            }
        }
        assign[v] = None;
        for v in trail {
            assign[v] = None;
        }
        false
    }
    let mut assign = vec![None; nvars];
    solve(&mut assign, clauses).then(|| assign.into_iter().map(|a| a.unwrap_or(false)).collect())
}

pub fn chi_square(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

/// |X² − df| within `k` standard deviations of the chi-square law.
pub fn chi_square_ok(counts: &[u64], k: f64) -> bool {
    let df = (counts.len() - 1) as f64;
    (chi_square(counts) - df).abs() <= k * (2.0 * df).sqrt()
}

/// A copy of `p` with one resolved form or weakening equation altered, and
/// the index of the altered step. Resolved forms either get another
/// variable in place of the pivot or grow by one variable; a weakening
/// target gets the bit of one equation flipped.
pub fn mutate<R: Rng>(p: &reslin::proofs::ProofTrace, rng: &mut R) -> Option<(reslin::proofs::ProofTrace, usize)> {
    use reslin::proofs::{LinearClause, LinearForm, ProofStep};
    let candidates: Vec<usize> = (0..p.len())
        .filter(|&i| match &p.steps[i] {
            ProofStep::Resolve { .. } => true,
            ProofStep::Weaken { clause, .. } => !clause.is_empty(),
            ProofStep::Axiom(_) => false,
        })
        .collect();
    if candidates.is_empty() || p.nvars < 2 {
        return None;
    }
    let i = candidates[rng.gen_range(0..candidates.len())];
    let mut q = p.clone();
    match &mut q.steps[i] {
        ProofStep::Resolve { pivot, .. } => {
            let mut y = rng.gen_range(1..=p.nvars as u32);
            while pivot.vars().contains(&y) {
                y = rng.gen_range(1..=p.nvars as u32);
            }
            *pivot = if rng.gen_bool(0.5) {
                LinearForm::var(y)
            } else {
                LinearForm::new(pivot.vars().iter().copied().chain([y])).unwrap()
            };
        }
        ProofStep::Weaken { clause, .. } => {
            let eqs: Vec<(LinearForm, bool)> = clause
                .equations()
                .map(|e| (LinearForm::new(e.form.iter().copied()).unwrap(), e.rhs))
                .collect();
            let k = rng.gen_range(0..eqs.len());
            *clause = LinearClause::from_equations(
                eqs.into_iter().enumerate().map(|(j, (f, b))| (f, if j == k { !b } else { b })),
            );
        }
        ProofStep::Axiom(_) => unreachable!(),
    }
    Some((q, i))
}

/// Clause over at most `nvars` variables with up to `max_eqs` random
/// equations; forms have one to three variables.
pub fn random_linear_clause<R: Rng>(rng: &mut R, nvars: u32, max_eqs: usize) -> reslin::proofs::LinearClause {
    use reslin::proofs::{LinearClause, LinearForm};
    let k = rng.gen_range(0..=max_eqs);
    LinearClause::from_equations((0..k).map(|_| {
        let w = rng.gen_range(1..=3.min(nvars));
        let mut vars: Vec<u32> = (0..w).map(|_| rng.gen_range(1..=nvars)).collect();
        vars.sort_unstable();
        vars.dedup();
        (LinearForm::new(vars).unwrap(), rng.gen_bool(0.5))
    }))
}

/// Every assignment over `nvars` variables satisfying `a` satisfies `b`.
pub fn entails_oracle(a: &reslin::proofs::LinearClause, b: &reslin::proofs::LinearClause, nvars: usize) -> bool {
    (0u64..1 << nvars).all(|x| {
        let bits: Vec<bool> = (0..nvars).map(|i| (x >> i) & 1 == 1).collect();
        !a.eval(&bits) || b.eval(&bits)
    })
}

/// Every clause over `k` variables.
pub fn complete_formula(k: usize) -> reslin::formulas::CnfFormula {
    let clauses = (0..1u32 << k)
        .map(|m| (0..k).map(|i| if m >> i & 1 == 1 { i as i32 + 1 } else { -(i as i32 + 1) }).collect())
        .collect();
    reslin::formulas::CnfFormula::new(k, clauses).unwrap()
}

/// Random unsatisfiable 3-CNF over `n` variables, checked by enumeration.
pub fn random_unsat<R: Rng>(n: usize, rng: &mut R) -> reslin::formulas::CnfFormula {
    loop {
        let clauses: Vec<Vec<i32>> = (0..6 * n)
            .map(|_| {
                let mut c: Vec<i32> = Vec::new();
                while c.len() < 3.min(n) {
                    let x = rng.gen_range(1..=n as i32);
                    if !c.iter().any(|l| l.abs() == x) {
                        c.push(if rng.gen() { x } else { -x });
                    }
                }
                c
            })
            .collect();
        let unsat = (0..1u32 << n).all(|m| {
            let x: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
            clauses.iter().any(|c| reslin::formulas::clause_falsified(c, &x))
        });
        if unsat {
            return reslin::formulas::CnfFormula::new(n, clauses).unwrap();
        }
    }
}

/// A node whose `Post` dimension plus its query depth exceeds the number
/// of variables.
pub fn post_dimension_violation(prog: &reslin::lbp::LinearBranchingProgram) -> Option<String> {
    let spans = prog.pre_post_spans();
    prog.query_depths().into_iter().enumerate().find_map(|(v, d)| {
        let t = d?;
        let dim = spans.post[v].dim();
        (dim + t > prog.nvars).then(|| format!("node {}: dim Post {dim} with {t} queries above", v + 1))
    })
}

/// Along the path of `beta`, the first pair `u` before `v` (or edge, unless
/// `all_pairs`) where `A_u` cut by the answered queries in between is not
/// contained in `A_v`.
pub fn path_containment_violation(
    prog: &reslin::lbp::LinearBranchingProgram,
    beta: &GF2Vector,
    all_pairs: bool,
) -> Option<String> {
    let path = prog.trace_path(beta, usize::MAX).ok()?;
    for i in 0..path.len() {
        let mut a = prog.nodes[path[i]].label.clone();
        let last = if all_pairs { path.len() } else { (i + 2).min(path.len()) };
        for j in i + 1..last {
            if let Some(f) = prog.nodes[path[j - 1]].query() {
                let fv = f.to_vector(prog.nvars);
                a = a.with_equation(&fv, fv.dot(beta));
            }
            if !prog.nodes[path[j]].label.contains_space(&a) {
                return Some(format!("nodes {} -> {}", path[i] + 1, path[j] + 1));
            }
        }
    }
    None
}
