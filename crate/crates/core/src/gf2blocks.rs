//! GF(2) vectors and matrices with a block structure: rank, affine
//! spaces, restriction and projection onto block sets, the spread test,
//! closures, safe bases and the stifling extension.
//!
//! Blocks and coordinates are 0-based throughout the API. Block `j` under
//! `(m, b)` covers coordinates `j*b .. (j+1)*b`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::gadgets::Gadget;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("block {block} out of range for {m} blocks")]
    BlockOutOfRange { block: usize, m: usize },
    #[error("inconsistent linear system")]
    Inconsistent,
    #[error("subspace is not spread: {dim} independent vectors live inside blocks {blocks:?}")]
    NotSpread { blocks: Vec<usize>, dim: usize },
    #[error("vector is not a member of the affine space")]
    NotInSpace,
    #[error("base assignment disagrees with the gadget value on closure block {block}")]
    AlphaConflict { block: usize },
    #[error("gadget is not stifled")]
    NotStifled,
    #[error("gadget arity {arity} does not match block size {b}")]
    ArityMismatch { arity: usize, b: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A packed bit vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GF2Vector {
    words: Vec<u64>,
    len: usize,
}

impl GF2Vector {
    pub fn zeros(len: usize) -> Self {
        GF2Vector {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn unit(len: usize, i: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(i, true);
        v
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &bit) in bits.iter().enumerate() {
            if bit {
                v.set(i, true);
            }
        }
        v
    }

    pub fn from_ones(len: usize, ones: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(len);
        for i in ones {
            v.flip(i);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &GF2Vector) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    #[must_use]
    pub fn xor(&self, other: &GF2Vector) -> GF2Vector {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// Parity of the coordinatewise product.
    pub fn dot(&self, other: &GF2Vector) -> bool {
        debug_assert_eq!(self.len, other.len);
        let mut acc = 0u32;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= (a & b).count_ones();
        }
        acc & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn first_one(&self) -> Option<usize> {
        for (k, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(k * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(k * 64 + t)
                }
            })
        })
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Coordinates `range` as a new vector.
    #[must_use]
    pub fn slice(&self, start: usize, end: usize) -> GF2Vector {
        GF2Vector::from_ones(end - start, self.ones().filter(|&i| i >= start && i < end).map(|i| i - start))
    }

    /// Keep only the coordinates where `mask` is set.
    #[must_use]
    pub fn and(&self, mask: &GF2Vector) -> GF2Vector {
        let mut out = self.clone();
        for (a, b) in out.words.iter_mut().zip(&mask.words) {
            *a &= b;
        }
        out
    }

    pub fn intersects(&self, mask: &GF2Vector) -> bool {
        self.words.iter().zip(&mask.words).any(|(a, b)| a & b != 0)
    }

    #[must_use]
    pub fn concat(&self, other: &GF2Vector) -> GF2Vector {
        let mut out = GF2Vector::zeros(self.len + other.len);
        for i in self.ones() {
            out.set(i, true);
        }
        for i in other.ones() {
            out.set(self.len + i, true);
        }
        out
    }
}

impl fmt::Debug for GF2Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF2Vector({self})")
    }
}

impl fmt::Display for GF2Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for GF2Vector {
    type Err = Gf2Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut v = GF2Vector::zeros(s.len());
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => v.set(i, true),
                other => {
                    return Err(Gf2Error::Parse {
                        line: 1,
                        msg: format!("unexpected character {other:?}"),
                    })
                }
            }
        }
        Ok(v)
    }
}

/// Number of blocks `m` and bits per block `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockStructure {
    pub m: usize,
    pub b: usize,
}

impl BlockStructure {
    pub fn new(m: usize, b: usize) -> Self {
        BlockStructure { m, b }
    }

    pub fn len(&self) -> usize {
        self.m * self.b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block_of(&self, coord: usize) -> usize {
        coord / self.b
    }

    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        j * self.b..(j + 1) * self.b
    }

    /// Mask with every coordinate of the given blocks set.
    pub fn mask(&self, blocks: impl IntoIterator<Item = usize>) -> GF2Vector {
        let mut v = GF2Vector::zeros(self.len());
        for j in blocks {
            for i in self.block_range(j) {
                v.set(i, true);
            }
        }
        v
    }

    pub fn touched_blocks(&self, v: &GF2Vector) -> BTreeSet<usize> {
        v.ones().map(|i| self.block_of(i)).collect()
    }

    /// The b-bit value of block `j`, first bit most significant.
    pub fn block_value(&self, v: &GF2Vector, j: usize) -> u32 {
        let mut out = 0u32;
        for i in self.block_range(j) {
            out = (out << 1) | v.get(i) as u32;
        }
        out
    }

    pub fn set_block_value(&self, v: &mut GF2Vector, j: usize, value: u32) {
        for (k, i) in self.block_range(j).enumerate() {
            v.set(i, (value >> (self.b - 1 - k)) & 1 == 1);
        }
    }

    fn check_blocks(&self, blocks: &BTreeSet<usize>) -> Result<(), Gf2Error> {
        match blocks.iter().find(|&&j| j >= self.m) {
            Some(&block) => Err(Gf2Error::BlockOutOfRange { block, m: self.m }),
            None => Ok(()),
        }
    }
}

/// Rows over GF(2) of a common length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GF2Matrix {
    rows: Vec<GF2Vector>,
    ncols: usize,
}

impl GF2Matrix {
    pub fn new(ncols: usize) -> Self {
        GF2Matrix {
            rows: Vec::new(),
            ncols,
        }
    }

    pub fn from_rows(rows: Vec<GF2Vector>, ncols: usize) -> Result<Self, Gf2Error> {
        if let Some(r) = rows.iter().find(|r| r.len() != ncols) {
            return Err(Gf2Error::LengthMismatch {
                expected: ncols,
                found: r.len(),
            });
        }
        Ok(GF2Matrix { rows, ncols })
    }

    pub fn identity(n: usize) -> Self {
        GF2Matrix {
            rows: (0..n).map(|i| GF2Vector::unit(n, i)).collect(),
            ncols: n,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        GF2Matrix {
            rows: vec![GF2Vector::zeros(ncols); nrows],
            ncols,
        }
    }

    pub fn push_row(&mut self, row: GF2Vector) -> Result<(), Gf2Error> {
        if row.len() != self.ncols {
            return Err(Gf2Error::LengthMismatch {
                expected: self.ncols,
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[GF2Vector] {
        &self.rows
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        rref_in_place(&mut rows, self.ncols).len()
    }

    /// Reduced row echelon form with zero rows dropped, and the pivot columns.
    pub fn rref(&self) -> (GF2Matrix, Vec<usize>) {
        let mut rows = self.rows.clone();
        let pivots = rref_in_place(&mut rows, self.ncols);
        rows.truncate(pivots.len());
        (
            GF2Matrix {
                rows,
                ncols: self.ncols,
            },
            pivots,
        )
    }

    /// Canonical basis of the row space.
    pub fn row_basis(&self) -> GF2Matrix {
        self.rref().0
    }

    pub fn mul_vec(&self, v: &GF2Vector) -> GF2Vector {
        GF2Vector::from_bits(&self.rows.iter().map(|r| r.dot(v)).collect::<Vec<_>>())
    }

    pub fn in_row_space(&self, v: &GF2Vector) -> bool {
        let (basis, pivots) = self.rref();
        reduce(&basis.rows, &pivots, v).is_zero()
    }

    /// Parse the fixture format: header `m=<m> b=<b> rows=<r>` then one 0/1 row per line.
    pub fn parse_fixture(text: &str) -> Result<(GF2Matrix, BlockStructure), Gf2Error> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Gf2Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let mut m = None;
        let mut b = None;
        let mut r = None;
        for tok in header.split_whitespace() {
            let (key, val) = tok.split_once('=').ok_or_else(|| Gf2Error::Parse {
                line: 1,
                msg: format!("bad header token {tok:?}"),
            })?;
            let val: usize = val.parse().map_err(|_| Gf2Error::Parse {
                line: 1,
                msg: format!("bad number in {tok:?}"),
            })?;
            match key {
                "m" => m = Some(val),
                "b" => b = Some(val),
                "rows" => r = Some(val),
                _ => {
                    return Err(Gf2Error::Parse {
                        line: 1,
                        msg: format!("unknown header key {key:?}"),
                    })
                }
            }
        }
        let (Some(m), Some(b), Some(r)) = (m, b, r) else {
            return Err(Gf2Error::Parse {
                line: 1,
                msg: "header needs m, b and rows".into(),
            });
        };
        let s = BlockStructure::new(m, b);
        let mut mat = GF2Matrix::new(s.len());
        for (idx, line) in lines {
            let row: GF2Vector = line.parse().map_err(|e| match e {
                Gf2Error::Parse { msg, .. } => Gf2Error::Parse { line: idx + 1, msg },
                other => other,
            })?;
            if row.len() != s.len() {
                return Err(Gf2Error::Parse {
                    line: idx + 1,
                    msg: format!("row has {} bits, expected {}", row.len(), s.len()),
                });
            }
            mat.rows.push(row);
        }
        if mat.nrows() != r {
            return Err(Gf2Error::Parse {
                line: 1,
                msg: format!("header promises {r} rows, found {}", mat.nrows()),
            });
        }
        Ok((mat, s))
    }

    pub fn to_fixture(&self, s: BlockStructure) -> String {
        let mut out = format!("m={} b={} rows={}\n", s.m, s.b, self.nrows());
        for r in &self.rows {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

/// Gauss-Jordan elimination in place; returns pivot columns. Nonzero rows
/// end up first, in pivot order.
fn rref_in_place(rows: &mut [GF2Vector], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| rows[i].get(col)) else {
            continue;
        };
        rows.swap(r, p);
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row.get(col) {
                row.xor_assign(&pivot);
            }
        }
        pivots.push(col);
        r += 1;
    }
    pivots
}

fn reduce(basis: &[GF2Vector], pivots: &[usize], v: &GF2Vector) -> GF2Vector {
    let mut v = v.clone();
    for (row, &p) in basis.iter().zip(pivots) {
        if v.get(p) {
            v.xor_assign(row);
        }
    }
    v
}

/// Solution set of `M x = c`, kept with independent rows in reduced form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSpace {
    matrix: GF2Matrix,
    rhs: GF2Vector,
    pivots: Vec<usize>,
    blocks: BlockStructure,
    empty: bool,
}

impl AffineSpace {
    pub fn new(matrix: GF2Matrix, rhs: GF2Vector, blocks: BlockStructure) -> Result<Self, Gf2Error> {
        if matrix.ncols() != blocks.len() {
            return Err(Gf2Error::LengthMismatch {
                expected: blocks.len(),
                found: matrix.ncols(),
            });
        }
        if rhs.len() != matrix.nrows() {
            return Err(Gf2Error::LengthMismatch {
                expected: matrix.nrows(),
                found: rhs.len(),
            });
        }
        let n = blocks.len();
        let mut aug: Vec<GF2Vector> = matrix
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut a = GF2Vector::zeros(n + 1);
                for k in r.ones() {
                    a.set(k, true);
                }
                a.set(n, rhs.get(i));
                a
            })
            .collect();
        let pivots = rref_in_place(&mut aug, n + 1);
        let empty = pivots.last() == Some(&n);
        let pivots: Vec<usize> = pivots.into_iter().filter(|&p| p < n).collect();
        let rows: Vec<GF2Vector> = aug[..pivots.len()].iter().map(|a| a.slice(0, n)).collect();
        let rhs = GF2Vector::from_bits(&aug[..pivots.len()].iter().map(|a| a.get(n)).collect::<Vec<_>>());
        Ok(AffineSpace {
            matrix: GF2Matrix { rows, ncols: n },
            rhs,
            pivots,
            blocks,
            empty,
        })
    }

    pub fn full(blocks: BlockStructure) -> Self {
        AffineSpace {
            matrix: GF2Matrix::new(blocks.len()),
            rhs: GF2Vector::zeros(0),
            pivots: Vec::new(),
            blocks,
            empty: false,
        }
    }

    /// Space defined by the equations `<form, x> = bit`.
    pub fn from_equations<'a>(
        blocks: BlockStructure,
        eqs: impl IntoIterator<Item = (&'a GF2Vector, bool)>,
    ) -> Result<Self, Gf2Error> {
        let mut m = GF2Matrix::new(blocks.len());
        let mut c = Vec::new();
        for (f, bit) in eqs {
            m.push_row(f.clone())?;
            c.push(bit);
        }
        AffineSpace::new(m, GF2Vector::from_bits(&c), blocks)
    }

    pub fn matrix(&self) -> &GF2Matrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &GF2Vector {
        &self.rhs
    }

    pub fn blocks(&self) -> BlockStructure {
        self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn codim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.blocks.len() - self.codim()
    }

    pub fn contains(&self, v: &GF2Vector) -> bool {
        !self.empty && v.len() == self.blocks.len() && self.matrix.mul_vec(v) == self.rhs
    }

    /// Value `<form, x>` takes on the space, if it is constant there.
    pub fn implied_value(&self, form: &GF2Vector) -> Option<bool> {
        let mut v = form.clone();
        let mut bit = false;
        for (i, (row, &p)) in self.matrix.rows.iter().zip(&self.pivots).enumerate() {
            if v.get(p) {
                v.xor_assign(row);
                bit ^= self.rhs.get(i);
            }
        }
        v.is_zero().then_some(bit)
    }

    /// `other ⊆ self`.
    pub fn contains_space(&self, other: &AffineSpace) -> bool {
        if other.empty {
            return true;
        }
        if self.empty {
            return false;
        }
        self.matrix
            .rows
            .iter()
            .enumerate()
            .all(|(i, row)| other.implied_value(row) == Some(self.rhs.get(i)))
    }

    #[must_use]
    pub fn with_equation(&self, form: &GF2Vector, bit: bool) -> AffineSpace {
        let mut m = self.matrix.clone();
        m.rows.push(form.clone());
        let mut c = self.rhs.to_bits();
        c.push(bit);
        let mut out = AffineSpace::new(m, GF2Vector::from_bits(&c), self.blocks).expect("lengths agree");
        out.empty |= self.empty;
        out
    }

    /// Some point of the space, free coordinates set to zero.
    pub fn point(&self) -> Option<GF2Vector> {
        if self.empty {
            return None;
        }
        let mut x = GF2Vector::zeros(self.blocks.len());
        for (i, &p) in self.pivots.iter().enumerate() {
            x.set(p, self.rhs.get(i));
        }
        Some(x)
    }

    /// Every point; only for small dimensions.
    pub fn points(&self) -> Vec<GF2Vector> {
        let Some(base) = self.point() else {
            return Vec::new();
        };
        let n = self.blocks.len();
        let free: Vec<usize> = (0..n).filter(|c| !self.pivots.contains(c)).collect();
        assert!(free.len() < 28, "affine space too large to enumerate");
        let mut out = Vec::with_capacity(1 << free.len());
        for mask in 0u64..(1u64 << free.len()) {
            let mut x = base.clone();
            for (k, &c) in free.iter().enumerate() {
                if (mask >> k) & 1 == 1 {
                    x.set(c, true);
                    for (i, &p) in self.pivots.iter().enumerate() {
                        if self.matrix.rows[i].get(c) {
                            x.flip(p);
                        }
                    }
                }
            }
            out.push(x);
        }
        out
    }
}

/// Basis of `{u ∈ U : u vanishes outside the blocks of T}`.
pub fn restrict_to_blocks(
    u: &GF2Matrix,
    t: &BTreeSet<usize>,
    s: BlockStructure,
) -> Result<GF2Matrix, Gf2Error> {
    s.check_blocks(t)?;
    check_width(u, s)?;
    let outside = s.mask((0..s.m).filter(|j| !t.contains(j)));
    Ok(restrict_with_mask(&u.row_basis(), &outside))
}

// `basis` must have independent rows.
fn restrict_with_mask(basis: &GF2Matrix, outside: &GF2Vector) -> GF2Matrix {
    // Eliminate on the outside coordinates, tracking full rows.
    let mut rows: Vec<(GF2Vector, GF2Vector)> = basis.rows.iter().map(|r| (r.and(outside), r.clone())).collect();
    let mut kept = Vec::new();
    while let Some((proj, full)) = rows.pop() {
        match proj.first_one() {
            None => kept.push(full),
            Some(p) => {
                for (op, of) in rows.iter_mut() {
                    if op.get(p) {
                        op.xor_assign(&proj);
                        of.xor_assign(&full);
                    }
                }
            }
        }
    }
    GF2Matrix::from_rows(kept, basis.ncols).expect("widths agree").row_basis()
}

fn restricted_dim(basis: &GF2Matrix, outside: &GF2Vector) -> usize {
    let mut rows: Vec<GF2Vector> = basis.rows.iter().map(|r| r.and(outside)).collect();
    basis.nrows() - rref_in_place(&mut rows, basis.ncols).len()
}

fn check_width(u: &GF2Matrix, s: BlockStructure) -> Result<(), Gf2Error> {
    if u.ncols() != s.len() {
        return Err(Gf2Error::LengthMismatch {
            expected: s.len(),
            found: u.ncols(),
        });
    }
    Ok(())
}

/// Basis of the projection of U onto the blocks outside T, in reduced
/// coordinates: the result has `m - |T|` blocks of `b` bits, in the
/// original block order.
pub fn project_away(
    u: &GF2Matrix,
    t: &BTreeSet<usize>,
    s: BlockStructure,
) -> Result<(GF2Matrix, BlockStructure), Gf2Error> {
    s.check_blocks(t)?;
    check_width(u, s)?;
    let keep: Vec<usize> = (0..s.m).filter(|j| !t.contains(j)).collect();
    let rs = BlockStructure::new(keep.len(), s.b);
    let mut out = GF2Matrix::new(rs.len());
    for row in u.rows() {
        let mut r = GF2Vector::zeros(rs.len());
        for (nj, &j) in keep.iter().enumerate() {
            for k in 0..s.b {
                if row.get(j * s.b + k) {
                    r.set(nj * s.b + k, true);
                }
            }
        }
        out.rows.push(r);
    }
    Ok((out.row_basis(), rs))
}

/// Projection of U with the coordinates of T zeroed, in the original coordinates.
pub fn zero_blocks(u: &GF2Matrix, t: &BTreeSet<usize>, s: BlockStructure) -> GF2Matrix {
    let keep = s.mask((0..s.m).filter(|j| !t.contains(j)));
    GF2Matrix {
        rows: u.rows.iter().map(|r| r.and(&keep)).collect(),
        ncols: u.ncols,
    }
    .row_basis()
}

fn union_touched(basis: &GF2Matrix, s: BlockStructure) -> Vec<usize> {
    let mut t = BTreeSet::new();
    for r in basis.rows() {
        t.extend(s.touched_blocks(r));
    }
    t.into_iter().collect()
}

/// Calls `visit` on every `k`-subset of `items` in lexicographic order
/// until it returns true.
fn find_subset(items: &[usize], k: usize, mut visit: impl FnMut(&[usize]) -> bool) -> Option<Vec<usize>> {
    let n = items.len();
    if k > n {
        return None;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut cur: Vec<usize> = Vec::with_capacity(k);
    'outer: loop {
        cur.clear();
        cur.extend(idx.iter().map(|&i| items[i]));
        if visit(&cur) {
            return Some(cur);
        }
        let mut i = k;
        while i > 0 {
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                continue 'outer;
            }
        }
        return None;
    }
}

/// Spread test: every block set T satisfies `dim(U_T) ≤ |T|`.
///
/// Exhaustive over subsets of touched blocks smaller than `dim U`, so
/// exponential in the number of touched blocks.
pub fn is_spread(u: &GF2Matrix, s: BlockStructure) -> bool {
    spread_violation(&u.row_basis(), s).is_none()
}

fn spread_violation(basis: &GF2Matrix, s: BlockStructure) -> Option<(Vec<usize>, usize)> {
    let d = basis.nrows();
    let touched = union_touched(basis, s);
    let full = s.mask(0..s.m);
    for k in 1..d {
        let mut found_dim = 0;
        let hit = find_subset(&touched, k, |t| {
            let outside = full.xor(&s.mask(t.iter().copied()));
            found_dim = restricted_dim(basis, &outside);
            found_dim > k
        });
        if let Some(t) = hit {
            return Some((t, found_dim));
        }
    }
    None
}

/// Block set of the unique minimal obstruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obstruction {
    pub blockset: BTreeSet<usize>,
}

impl Obstruction {
    /// Coordinates covered by the obstruction blocks.
    pub fn coordinates(&self, s: BlockStructure) -> Vec<usize> {
        self.blockset.iter().flat_map(|&j| s.block_range(j)).collect()
    }
}

/// Minimal block set T whose removal leaves a spread projection of the
/// row space of A.
///
/// Grows T from the empty set by repeatedly adding a smallest block set
/// T' outside T with `dim(U_{T∪T'}) - dim(U_T) > |T'|`.
pub fn closure(a: &AffineSpace) -> Result<Obstruction, Gf2Error> {
    if a.is_empty() {
        return Err(Gf2Error::Inconsistent);
    }
    Ok(Obstruction {
        blockset: closure_of(a.matrix(), a.blocks()),
    })
}

/// Closure of a linear subspace given by any spanning matrix.
pub fn closure_of(u: &GF2Matrix, s: BlockStructure) -> BTreeSet<usize> {
    let basis = u.row_basis();
    let d = basis.nrows();
    let touched = union_touched(&basis, s);
    let full = s.mask(0..s.m);
    let mut t: BTreeSet<usize> = BTreeSet::new();
    let mut dim_t = 0;
    'grow: loop {
        let rest: Vec<usize> = touched.iter().copied().filter(|j| !t.contains(j)).collect();
        for k in 1..=rest.len() {
            if k >= d - dim_t {
                break;
            }
            let mut new_dim = 0;
            let hit = find_subset(&rest, k, |extra| {
                let inside = s.mask(t.iter().chain(extra).copied());
                new_dim = restricted_dim(&basis, &full.xor(&inside));
                new_dim - dim_t > k
            });
            if let Some(extra) = hit {
                t.extend(extra);
                dim_t = new_dim;
                continue 'grow;
            }
        }
        return t;
    }
}

/// Echelon basis whose pivots sit in pairwise distinct blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafeBasis {
    pub vectors: Vec<GF2Vector>,
    pub pivots: Vec<usize>,
}

impl SafeBasis {
    pub fn as_matrix(&self) -> GF2Matrix {
        GF2Matrix {
            ncols: self.vectors.first().map_or(0, |v| v.len()),
            rows: self.vectors.clone(),
        }
    }
}

/// Safe basis with the lexicographically smallest sorted pivot tuple.
pub fn safe_basis(u: &GF2Matrix, s: BlockStructure) -> Result<SafeBasis, Gf2Error> {
    check_width(u, s)?;
    let basis = u.row_basis();
    if let Some((blocks, dim)) = spread_violation(&basis, s) {
        return Err(Gf2Error::NotSpread { blocks, dim });
    }
    let d = basis.nrows();
    let n = s.len();
    // column c of the basis as a vector in GF(2)^d
    let cols: Vec<GF2Vector> = (0..n)
        .map(|c| GF2Vector::from_bits(&basis.rows().iter().map(|r| r.get(c)).collect::<Vec<_>>()))
        .collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(d);
    for _ in 0..d {
        let start = chosen.last().map_or(0, |&p| p + 1);
        let next = (start..n).find(|&c| {
            if cols[c].is_zero() || chosen.iter().any(|&p| s.block_of(p) == s.block_of(c)) {
                return false;
            }
            let mut trial = chosen.clone();
            trial.push(c);
            completes(&cols, &trial, d, c + 1, s)
        });
        match next {
            Some(c) => chosen.push(c),
            // unreachable for spread inputs
            None => {
                return Err(Gf2Error::NotSpread {
                    blocks: union_touched(&basis, s),
                    dim: d,
                })
            }
        }
    }
    Ok(SafeBasis {
        vectors: reduce_on_pivots(&basis, &chosen),
        pivots: chosen,
    })
}

/// Rows of `B_P^{-1} B`, ordered by pivot.
fn reduce_on_pivots(basis: &GF2Matrix, pivots: &[usize]) -> Vec<GF2Vector> {
    let mut rows = basis.rows.clone();
    for (r, &p) in pivots.iter().enumerate() {
        let q = (r..rows.len()).find(|&i| rows[i].get(p)).expect("pivot columns independent");
        rows.swap(r, q);
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row.get(p) {
                row.xor_assign(&pivot);
            }
        }
    }
    rows
}

fn independent(vectors: &[&GF2Vector], d: usize) -> bool {
    let mut rows: Vec<GF2Vector> = vectors.iter().map(|v| (*v).clone()).collect();
    rref_in_place(&mut rows, d).len() == vectors.len()
}

/// Whether `prefix` extends to `d` independent columns, one per block,
/// using only columns `>= from` for the extension. Matroid intersection
/// of the column matroid with the block partition matroid.
fn completes(cols: &[GF2Vector], prefix: &[usize], d: usize, from: usize, s: BlockStructure) -> bool {
    let prefix_vecs: Vec<&GF2Vector> = prefix.iter().map(|&c| &cols[c]).collect();
    if !independent(&prefix_vecs, d) {
        return false;
    }
    let need = d - prefix.len();
    if need == 0 {
        return true;
    }
    let used: BTreeSet<usize> = prefix.iter().map(|&c| s.block_of(c)).collect();
    let ground: Vec<usize> = (from..cols.len())
        .filter(|&c| !cols[c].is_zero() && !used.contains(&s.block_of(c)))
        .collect();
    let lin_indep = |set: &[usize]| -> bool {
        let mut v = prefix_vecs.clone();
        v.extend(set.iter().map(|&c| &cols[c]));
        independent(&v, d)
    };
    let part_indep = |set: &[usize]| -> bool {
        let mut seen = BTreeSet::new();
        set.iter().all(|&c| seen.insert(s.block_of(c)))
    };
    let mut current: Vec<usize> = Vec::new();
    loop {
        if current.len() >= need {
            return true;
        }
        let outside: Vec<usize> = ground.iter().copied().filter(|c| !current.contains(c)).collect();
        let with = |y: usize| {
            let mut v = current.clone();
            v.push(y);
            v
        };
        let swap = |x: usize, y: usize| {
            let mut v: Vec<usize> = current.iter().copied().filter(|&z| z != x).collect();
            v.push(y);
            v
        };
        let sources: Vec<usize> = outside.iter().copied().filter(|&y| lin_indep(&with(y))).collect();
        let sinks: BTreeSet<usize> = outside.iter().copied().filter(|&y| part_indep(&with(y))).collect();
        // BFS over the exchange graph
        let mut parent: std::collections::BTreeMap<usize, Option<usize>> = Default::default();
        let mut queue = std::collections::VecDeque::new();
        for &y in &sources {
            parent.insert(y, None);
            queue.push_back(y);
        }
        let mut end = None;
        while let Some(z) = queue.pop_front() {
            if !current.contains(&z) && sinks.contains(&z) {
                end = Some(z);
                break;
            }
            if current.contains(&z) {
                // z in I: edge z -> y when I - z + y is independent in the column matroid
                for &y in &outside {
                    if !parent.contains_key(&y) && lin_indep(&swap(z, y)) {
                        parent.insert(y, Some(z));
                        queue.push_back(y);
                    }
                }
            } else {
                // y outside I: edge y -> x when I - x + y is a partial transversal
                for &x in &current {
                    if !parent.contains_key(&x) && part_indep(&swap(x, z)) {
                        parent.insert(x, Some(z));
                        queue.push_back(x);
                    }
                }
            }
        }
        let Some(mut z) = end else {
            return false;
        };
        let mut path = vec![z];
        while let Some(Some(p)) = parent.get(&z) {
            path.push(*p);
            z = *p;
        }
        for z in path {
            if let Some(pos) = current.iter().position(|&c| c == z) {
                current.remove(pos);
            } else {
                current.push(z);
            }
        }
    }
}

/// A point `γ ∈ A` whose gadget image is `alpha`, agreeing with `beta` on
/// the closure blocks of A.
///
/// `alpha[j]` must equal `g(beta^j)` for every closure block `j`.
pub fn stifling_extension(
    a: &AffineSpace,
    beta: &GF2Vector,
    alpha: &[bool],
    g: &Gadget,
) -> Result<GF2Vector, Gf2Error> {
    let s = a.blocks();
    if g.arity() != s.b {
        return Err(Gf2Error::ArityMismatch { arity: g.arity(), b: s.b });
    }
    if alpha.len() != s.m {
        return Err(Gf2Error::LengthMismatch {
            expected: s.m,
            found: alpha.len(),
        });
    }
    if !a.contains(beta) {
        return Err(Gf2Error::NotInSpace);
    }
    if !g.is_stifled() {
        return Err(Gf2Error::NotStifled);
    }
    let cl = closure(a)?.blockset;
    if let Some(&block) = cl.iter().find(|&&j| g.eval(s.block_value(beta, j)) != alpha[j]) {
        return Err(Gf2Error::AlphaConflict { block });
    }

    // Safe basis w'_1..w'_t of the projection away from the closure. Each
    // w'_j lifts to a row u_j of A's row space, and A is cut out by the
    // rows of U_T together with the u_j. On points that agree with beta on
    // T the constraint from u_j reads <w'_j, x> = <w'_j, beta>.
    let projected = zero_blocks(a.matrix(), &cl, s);
    let safe = safe_basis(&projected, s)?;
    let pivot_block: std::collections::BTreeMap<usize, usize> =
        safe.pivots.iter().map(|&p| (s.block_of(p), p)).collect();

    let mut gamma = beta.clone();
    for j in (0..s.m).filter(|j| !cl.contains(j)) {
        let value = match pivot_block.get(&j) {
            Some(&p) => g
                .stifling_assignment(p - j * s.b, alpha[j])
                .ok_or(Gf2Error::NotStifled)?,
            None => g.preimages(alpha[j])[0],
        };
        s.set_block_value(&mut gamma, j, value);
    }
    for (w, &p) in safe.vectors.iter().zip(&safe.pivots) {
        if w.dot(&gamma) != w.dot(beta) {
            gamma.flip(p);
        }
    }
    if !a.contains(&gamma) {
        return Err(Gf2Error::Inconsistent);
    }
    debug_assert!((0..s.m).all(|j| g.eval(s.block_value(&gamma, j)) == alpha[j]));
    Ok(gamma)
}
