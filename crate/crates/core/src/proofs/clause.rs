//! Linear clauses: disjunctions of GF(2) equations over variables `1..=n`.
//!
//! A clause is stored flat. Each equation is a header word
//! `(form length << 1) | rhs` followed by its variables in ascending order.
//! Equations are kept sorted by `(form, rhs)` with duplicates removed, so
//! equal clauses have equal encodings. An ordinary literal `x` is the
//! equation `x=1` and `¬x` is `x=0`; a sorted DIMACS clause is then already
//! in canonical order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::formulas::Clause;
use crate::gf2blocks::{AffineSpace, BlockStructure, GF2Vector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClauseError {
    #[error("linear form is empty")]
    EmptyForm,
    #[error("variable index 0 is not allowed")]
    ZeroVariable,
    #[error("cannot parse {0:?}")]
    Syntax(String),
}

/// Sum of distinct variables, ascending.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct LinearForm(Vec<u32>);

impl LinearForm {
    /// Sum of `vars`; repeated variables cancel in pairs.
    pub fn new(vars: impl IntoIterator<Item = u32>) -> Result<Self, ClauseError> {
        let mut v: Vec<u32> = vars.into_iter().collect();
        if v.contains(&0) {
            return Err(ClauseError::ZeroVariable);
        }
        v.sort_unstable();
        let mut out: Vec<u32> = Vec::with_capacity(v.len());
        for x in v {
            if out.last() == Some(&x) {
                out.pop();
            } else {
                out.push(x);
            }
        }
        if out.is_empty() {
            return Err(ClauseError::EmptyForm);
        }
        Ok(LinearForm(out))
    }

    pub fn var(x: u32) -> Self {
        assert!(x > 0, "variables start at 1");
        LinearForm(vec![x])
    }

    pub fn vars(&self) -> &[u32] {
        &self.0
    }

    pub fn eval(&self, x: &[bool]) -> bool {
        eval_form(&self.0, x)
    }

    /// Coordinate vector with variable `x` at position `x - 1`.
    pub fn to_vector(&self, nvars: usize) -> GF2Vector {
        form_vector(&self.0, nvars)
    }

    pub fn from_vector(v: &GF2Vector) -> Option<Self> {
        let vars: Vec<u32> = v.ones().map(|i| i as u32 + 1).collect();
        (!vars.is_empty()).then_some(LinearForm(vars))
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_form(f, &self.0)
    }
}

impl FromStr for LinearForm {
    type Err = ClauseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let vars = s
            .trim()
            .split('+')
            .map(|t| t.trim().parse::<u32>().map_err(|_| ClauseError::Syntax(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let form = LinearForm::new(vars.iter().copied())?;
        if form.0 != vars {
            return Err(ClauseError::Syntax(format!("{s} is not strictly ascending")));
        }
        Ok(form)
    }
}

fn write_form(f: &mut fmt::Formatter<'_>, vars: &[u32]) -> fmt::Result {
    for (i, x) in vars.iter().enumerate() {
        if i > 0 {
            f.write_str("+")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

fn eval_form(vars: &[u32], x: &[bool]) -> bool {
    vars.iter().fold(false, |acc, &v| acc ^ x[v as usize - 1])
}

fn form_vector(vars: &[u32], nvars: usize) -> GF2Vector {
    GF2Vector::from_ones(nvars, vars.iter().map(|&v| v as usize - 1))
}

/// Borrowed equation `form = rhs`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Equation<'a> {
    pub form: &'a [u32],
    pub rhs: bool,
}

impl Ord for Equation<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.form.cmp(other.form).then(self.rhs.cmp(&other.rhs))
    }
}

impl PartialOrd for Equation<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Equation<'_> {
    fn encode_into(&self, out: &mut Vec<u32>) {
        out.push(((self.form.len() as u32) << 1) | self.rhs as u32);
        out.extend_from_slice(self.form);
    }
}

pub struct Equations<'a> {
    data: &'a [u32],
}

impl<'a> Iterator for Equations<'a> {
    type Item = Equation<'a>;

    fn next(&mut self) -> Option<Equation<'a>> {
        let (&h, rest) = self.data.split_first()?;
        let k = (h >> 1) as usize;
        let (form, rest) = rest.split_at(k);
        self.data = rest;
        Some(Equation { form, rhs: h & 1 == 1 })
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LinearClause {
    data: Vec<u32>,
    width: u32,
}

impl LinearClause {
    pub fn empty() -> Self {
        LinearClause::default()
    }

    /// Ordinary clause from DIMACS literals.
    pub fn from_literals(c: &[i32]) -> Self {
        let sorted = c
            .windows(2)
            .all(|w| (w[0].unsigned_abs(), w[0] > 0) < (w[1].unsigned_abs(), w[1] > 0));
        let mut data = Vec::with_capacity(2 * c.len());
        if sorted {
            for &l in c {
                data.push(2 | (l > 0) as u32);
                data.push(l.unsigned_abs());
            }
            return LinearClause {
                data,
                width: c.len() as u32,
            };
        }
        let mut lits = c.to_vec();
        lits.sort_unstable_by_key(|&l| (l.unsigned_abs(), l > 0));
        lits.dedup();
        LinearClause::from_literals(&lits)
    }

    /// Like `from_literals` for input already sorted by variable, with
    /// no repeats; the order is not checked.
    pub fn from_sorted_literals(c: &[i32]) -> Self {
        LinearClause {
            data: c.iter().flat_map(|&l| [2 | (l > 0) as u32, l.unsigned_abs()]).collect(),
            width: c.len() as u32,
        }
    }

    pub fn from_equations<I>(eqs: I) -> Self
    where
        I: IntoIterator<Item = (LinearForm, bool)>,
    {
        let mut v: Vec<(LinearForm, bool)> = eqs.into_iter().collect();
        v.sort();
        v.dedup();
        let mut data = Vec::new();
        for (f, rhs) in &v {
            Equation { form: &f.0, rhs: *rhs }.encode_into(&mut data);
        }
        LinearClause {
            data,
            width: v.len() as u32,
        }
    }

    pub fn equations(&self) -> Equations<'_> {
        Equations { data: &self.data }
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0
    }

    pub fn contains(&self, form: &[u32], rhs: bool) -> bool {
        let target = Equation { form, rhs };
        self.equations().any(|e| e == target)
    }

    pub fn is_ordinary(&self) -> bool {
        self.equations().all(|e| e.form.len() == 1)
    }

    /// DIMACS literals, if every form is a single variable.
    pub fn to_literals(&self) -> Option<Clause> {
        self.equations()
            .map(|e| match e.form {
                [x] => Some(if e.rhs { *x as i32 } else { -(*x as i32) }),
                _ => None,
            })
            .collect()
    }

    pub fn max_var(&self) -> u32 {
        self.equations().filter_map(|e| e.form.last().copied()).max().unwrap_or(0)
    }

    /// Every variable the clause mentions, ascending and distinct.
    pub fn vars(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.equations().flat_map(|e| e.form.iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// True under `x` (indexed by variable − 1).
    pub fn eval(&self, x: &[bool]) -> bool {
        self.equations().any(|e| eval_form(e.form, x) == e.rhs)
    }

    /// The assignments falsifying every equation, as an affine space over
    /// `nvars` coordinates with blocks of size 1.
    pub fn falsifying_space(&self, nvars: usize) -> AffineSpace {
        let forms: Vec<(GF2Vector, bool)> =
            self.equations().map(|e| (form_vector(e.form, nvars), !e.rhs)).collect();
        AffineSpace::from_equations(BlockStructure::new(nvars, 1), forms.iter().map(|(f, b)| (f, *b)))
            .expect("forms have nvars coordinates")
    }

    pub fn is_tautology(&self) -> bool {
        if self.is_ordinary() {
            let eqs: Vec<Equation> = self.equations().collect();
            return eqs.windows(2).any(|w| w[0].form == w[1].form);
        }
        self.falsifying_space(self.max_var() as usize).is_empty()
    }

    /// Every equation of `self` also occurs in `other`.
    pub fn is_subclause_of(&self, other: &LinearClause) -> bool {
        let mut theirs = other.equations().peekable();
        'outer: for e in self.equations() {
            while let Some(t) = theirs.peek() {
                match t.cmp(&e) {
                    Ordering::Less => {
                        theirs.next();
                    }
                    Ordering::Equal => {
                        theirs.next();
                        continue 'outer;
                    }
                    Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    /// `(left − {pivot=0}) ∪ (right − {pivot=1})`, or `None` when `left`
    /// lacks `pivot=0` or `right` lacks `pivot=1`.
    pub fn resolve(left: &LinearClause, right: &LinearClause, pivot: &[u32]) -> Option<LinearClause> {
        if let [x] = pivot {
            if left.data.len() == 2 * left.width() && right.data.len() == 2 * right.width() {
                return resolve_ordinary(&left.data, &right.data, *x);
            }
        }
        let drop_l = Equation { form: pivot, rhs: false };
        let drop_r = Equation { form: pivot, rhs: true };
        if !left.contains(pivot, false) || !right.contains(pivot, true) {
            return None;
        }
        let mut data = Vec::with_capacity(left.data.len() + right.data.len());
        let mut width = 0u32;
        let mut a = left.equations().filter(|e| *e != drop_l).peekable();
        let mut b = right.equations().filter(|e| *e != drop_r).peekable();
        loop {
            let next = match (a.peek(), b.peek()) {
                (None, None) => break,
                (Some(_), None) => a.next(),
                (None, Some(_)) => b.next(),
                (Some(x), Some(y)) => match x.cmp(y) {
                    Ordering::Less => a.next(),
                    Ordering::Greater => b.next(),
                    Ordering::Equal => {
                        b.next();
                        a.next()
                    }
                },
            }
            .expect("peeked");
            next.encode_into(&mut data);
            width += 1;
        }
        Some(LinearClause { data, width })
    }
}

/// Both clauses ordinary: merge on the key `2·var + rhs`.
fn resolve_ordinary(a: &[u32], b: &[u32], x: u32) -> Option<LinearClause> {
    #[inline]
    fn key(d: &[u32], k: usize) -> u64 {
        (u64::from(d[k + 1]) << 1) | u64::from(d[k] & 1)
    }
    let drop_a = u64::from(x) << 1;
    let drop_b = drop_a | 1;
    let mut data = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let (mut found_a, mut found_b) = (false, false);
    // a literal present on both sides is kept once, even the pivot
    while i < a.len() && j < b.len() {
        let (p, q) = (key(a, i), key(b, j));
        if p < q {
            if p == drop_a {
                found_a = true;
            } else {
                data.extend([a[i], a[i + 1]]);
            }
            i += 2;
        } else if q < p {
            if q == drop_b {
                found_b = true;
            } else {
                data.extend([b[j], b[j + 1]]);
            }
            j += 2;
        } else {
            found_a |= p == drop_a;
            found_b |= p == drop_b;
            data.extend([a[i], a[i + 1]]);
            i += 2;
            j += 2;
        }
    }
    for (k, rest, drop, found) in [(i, a, drop_a, &mut found_a), (j, b, drop_b, &mut found_b)] {
        for t in (k..rest.len()).step_by(2) {
            if key(rest, t) == drop {
                *found = true;
            } else {
                data.extend([rest[t], rest[t + 1]]);
            }
        }
    }
    if !(found_a && found_b) {
        return None;
    }
    let width = (data.len() / 2) as u32;
    Some(LinearClause { data, width })
}

/// `falsify(b) ⊆ falsify(a)`: every assignment satisfying `a` satisfies `b`.
pub fn entails(a: &LinearClause, b: &LinearClause) -> bool {
    let n = a.max_var().max(b.max_var()) as usize;
    a.falsifying_space(n).contains_space(&b.falsifying_space(n))
}

impl fmt::Display for LinearClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.equations().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write_form(f, e.form)?;
            write!(f, "={}", e.rhs as u8)?;
        }
        Ok(())
    }
}

impl fmt::Debug for LinearClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}

impl FromStr for LinearClause {
    type Err = ClauseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(LinearClause::empty());
        }
        let eqs = s
            .split(';')
            .map(|part| {
                let (form, bit) = part.split_once('=').ok_or_else(|| ClauseError::Syntax(part.to_string()))?;
                let rhs = match bit.trim() {
                    "0" => false,
                    "1" => true,
                    _ => return Err(ClauseError::Syntax(part.to_string())),
                };
                Ok((form.parse::<LinearForm>()?, rhs))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LinearClause::from_equations(eqs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lc(s: &str) -> LinearClause {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_order_and_literals() {
        let c = LinearClause::from_literals(&[3, -1, 1, -2]);
        assert_eq!(c.to_string(), "1=0;1=1;2=0;3=1");
        assert!(c.is_tautology());
        assert_eq!(c.to_literals(), Some(vec![-1, 1, -2, 3]));
        assert_eq!(lc("1+2=1;1=0").to_string(), "1=0;1+2=1");
        assert_eq!(lc("1=0;1=0").width(), 1);
        assert!(lc("").is_empty());
        assert!("2+1=1".parse::<LinearForm>().is_err());
        assert!("1+1=1".parse::<LinearClause>().is_err());
    }

    #[test]
    fn entailment_examples() {
        assert!(entails(&lc("1=1"), &lc("1=1;2=0")));
        assert!(!entails(&lc("1=1"), &lc("2=1")));
        assert!(entails(&lc("3=1"), &lc("1+2=0;1+2=1")));
        assert!(lc("1+2=0;1+2=1").is_tautology());
        assert!(!lc("1+2=0;1=1").is_tautology());
    }

    #[test]
    fn resolution_rule() {
        let a = lc("1=0;2=1");
        let b = lc("1=1;3=0");
        assert_eq!(LinearClause::resolve(&a, &b, &[1]).unwrap().to_string(), "2=1;3=0");
        assert!(LinearClause::resolve(&b, &a, &[1]).is_none());
        let x = lc("1+2=0;3=1");
        let y = lc("1+2=1;3=1");
        assert_eq!(LinearClause::resolve(&x, &y, &[1, 2]).unwrap().to_string(), "3=1");
        // a tautological premise keeps its other copy of the pivot
        let t = lc("1=0;1=1");
        assert_eq!(LinearClause::resolve(&t, &t, &[1]).unwrap().to_string(), "1=0;1=1");
        assert_eq!(LinearClause::resolve(&lc("1=0"), &lc("1=1"), &[1]).unwrap(), LinearClause::empty());
    }

    #[test]
    fn subclause() {
        assert!(lc("2=1").is_subclause_of(&lc("1=0;2=1;3=1")));
        assert!(!lc("2=0").is_subclause_of(&lc("1=0;2=1;3=1")));
        assert!(LinearClause::empty().is_subclause_of(&lc("1=1")));
    }
}
