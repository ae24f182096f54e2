//! Boolean gadgets stored as truth tables.
//!
//! An input `(β_1, …, β_b)` has index `Σ β_k 2^{b-k}`, so the first bit is
//! the most significant one. The same convention maps a block of a lifted
//! vector to a table index.

use std::fmt;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gf2blocks::{BlockStructure, GF2Vector};

pub const MAX_ARITY: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GadgetError {
    #[error("arity {0} outside 1..={MAX_ARITY}")]
    BadArity(usize),
    #[error("inner product needs an even number of bits, got {0}")]
    OddArity(usize),
    #[error("truth table has {found} entries, expected {expected}")]
    TableLength { expected: usize, found: usize },
    #[error("gadget is constant")]
    Constant,
    #[error("gadget arity {arity} does not match block size {b}")]
    ArityMismatch { arity: usize, b: usize },
    #[error("expected {expected} blocks, found {found}")]
    BlockCount { expected: usize, found: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gadget {
    arity: usize,
    table: Vec<bool>,
    preimages: [Vec<u32>; 2],
}

impl fmt::Debug for Gadget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gadget(arity={}, {})", self.arity, self.table_string())
    }
}

impl Gadget {
    pub fn from_table(arity: usize, table: Vec<bool>) -> Result<Self, GadgetError> {
        if arity == 0 || arity > MAX_ARITY {
            return Err(GadgetError::BadArity(arity));
        }
        if table.len() != 1 << arity {
            return Err(GadgetError::TableLength {
                expected: 1 << arity,
                found: table.len(),
            });
        }
        let mut preimages = [Vec::new(), Vec::new()];
        for (x, &out) in table.iter().enumerate() {
            preimages[out as usize].push(x as u32);
        }
        Ok(Gadget {
            arity,
            table,
            preimages,
        })
    }

    pub fn from_fn(arity: usize, f: impl Fn(u32) -> bool) -> Result<Self, GadgetError> {
        if arity == 0 || arity > MAX_ARITY {
            return Err(GadgetError::BadArity(arity));
        }
        Gadget::from_table(arity, (0..1u32 << arity).map(f).collect())
    }

    /// Inner product of the first half of the bits with the second half.
    pub fn ip(total_bits: usize) -> Result<Self, GadgetError> {
        if total_bits % 2 == 1 || total_bits == 0 {
            return Err(GadgetError::OddArity(total_bits));
        }
        let t = total_bits / 2;
        let mask = (1u32 << t) - 1;
        Gadget::from_fn(total_bits, |x| ((x >> t) & x & mask).count_ones() % 2 == 1)
    }

    pub fn xor(arity: usize) -> Result<Self, GadgetError> {
        Gadget::from_fn(arity, |x| x.count_ones() % 2 == 1)
    }

    pub fn and(arity: usize) -> Result<Self, GadgetError> {
        Gadget::from_fn(arity, move |x| x.count_ones() as usize == arity)
    }

    /// Identity on one bit; lifting by it leaves a formula unchanged.
    pub fn identity() -> Self {
        Gadget::from_table(1, vec![false, true]).expect("valid")
    }

    /// Parses names like `ip4`, `xor2`, `and2`.
    pub fn named(name: &str) -> Result<Self, GadgetError> {
        let bad = || GadgetError::Parse {
            line: 1,
            msg: format!("unknown gadget {name:?}"),
        };
        let split = name.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
        let bits: usize = name[split..].parse().map_err(|_| bad())?;
        match &name[..split] {
            "ip" => Gadget::ip(bits),
            "xor" => Gadget::xor(bits),
            "and" => Gadget::and(bits),
            _ => Err(bad()),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    #[inline]
    pub fn eval(&self, x: u32) -> bool {
        self.table[x as usize]
    }

    pub fn eval_bits(&self, bits: &[bool]) -> bool {
        self.eval(bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32))
    }

    /// Inputs mapped to `a`, ascending.
    pub fn preimages(&self, a: bool) -> &[u32] {
        &self.preimages[a as usize]
    }

    pub fn is_constant(&self) -> bool {
        self.preimages[0].is_empty() || self.preimages[1].is_empty()
    }

    /// Table index mask of bit `i`, counted from the most significant bit.
    #[inline]
    pub fn bit_mask(&self, i: usize) -> u32 {
        1 << (self.arity - 1 - i)
    }

    /// First `δ` with `g(δ) = g(δ ⊕ e_i) = a`.
    pub fn stifling_assignment(&self, i: usize, a: bool) -> Option<u32> {
        let mask = self.bit_mask(i);
        self.preimages(a).iter().copied().find(|&x| self.eval(x ^ mask) == a)
    }

    pub fn is_stifled(&self) -> bool {
        (0..self.arity).all(|i| [false, true].into_iter().all(|a| self.stifling_assignment(i, a).is_some()))
    }

    /// Exact fraction of `g⁻¹(a)` whose projection away from bit `i`
    /// stifles the output to `a`, for every `(i, a)`.
    pub fn balanced_stifled_epsilon(&self) -> Result<StifleTable, GadgetError> {
        if self.is_constant() {
            return Err(GadgetError::Constant);
        }
        let mut entries = Vec::with_capacity(2 * self.arity);
        for i in 0..self.arity {
            let mask = self.bit_mask(i);
            for a in [false, true] {
                let pre = self.preimages(a);
                let good = pre.iter().filter(|&&x| self.eval(x ^ mask) == a).count();
                entries.push((i, a, Ratio::new(good as u64, pre.len() as u64)));
            }
        }
        let min = entries.iter().map(|e| e.2).min().expect("arity >= 1");
        Ok(StifleTable { entries, min })
    }

    pub fn table_string(&self) -> String {
        self.table.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Two-line file format: `arity=<b>` then the truth table.
    pub fn to_file_string(&self) -> String {
        format!("arity={}\n{}\n", self.arity, self.table_string())
    }

    pub fn parse_file(text: &str) -> Result<Self, GadgetError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let arity: usize = header
            .trim()
            .strip_prefix("arity=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| GadgetError::Parse {
                line: 1,
                msg: format!("expected arity=<b>, got {header:?}"),
            })?;
        if arity == 0 || arity > MAX_ARITY {
            return Err(GadgetError::BadArity(arity));
        }
        let body = lines.next().unwrap_or("").trim();
        let table = body
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(GadgetError::Parse {
                    line: 2,
                    msg: format!("unexpected character {other:?}"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Gadget::from_table(arity, table)
    }
}

/// Per-(bit, output) stifling probabilities and their minimum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StifleTable {
    pub entries: Vec<(usize, bool, Ratio<u64>)>,
    pub min: Ratio<u64>,
}

impl StifleTable {
    pub fn get(&self, i: usize, a: bool) -> Option<Ratio<u64>> {
        self.entries.iter().find(|e| e.0 == i && e.1 == a).map(|e| e.2)
    }
}

/// Block-respecting partial assignment: each block holds a full b-bit
/// value or nothing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockAssignment {
    pub blocks: BlockStructure,
    pub values: Vec<Option<u32>>,
}

impl BlockAssignment {
    pub fn unassigned(blocks: BlockStructure) -> Self {
        BlockAssignment {
            blocks,
            values: vec![None; blocks.m],
        }
    }

    pub fn total(blocks: BlockStructure, v: &GF2Vector) -> Self {
        BlockAssignment {
            blocks,
            values: (0..blocks.m).map(|j| Some(blocks.block_value(v, j))).collect(),
        }
    }
}

/// The gadget applied to every assigned block; `None` for unassigned ones.
pub fn lift_eval(g: &Gadget, beta: &BlockAssignment) -> Result<Vec<Option<bool>>, GadgetError> {
    if beta.blocks.b != g.arity() {
        return Err(GadgetError::ArityMismatch {
            arity: g.arity(),
            b: beta.blocks.b,
        });
    }
    if beta.values.len() != beta.blocks.m {
        return Err(GadgetError::BlockCount {
            expected: beta.blocks.m,
            found: beta.values.len(),
        });
    }
    Ok(beta.values.iter().map(|v| v.map(|x| g.eval(x))).collect())
}

/// Gadget value of every block of a total assignment.
pub fn lift_eval_total(g: &Gadget, beta: &GF2Vector) -> Vec<bool> {
    let s = BlockStructure::new(beta.len() / g.arity(), g.arity());
    (0..s.m).map(|j| g.eval(s.block_value(beta, j))).collect()
}

/// Draws each block uniformly from `g⁻¹(z_j)`, consuming one draw per
/// block in block order.
pub fn sample_lifted_preimage_with<R: Rng>(g: &Gadget, z: &[bool], rng: &mut R) -> GF2Vector {
    let s = BlockStructure::new(z.len(), g.arity());
    let mut out = GF2Vector::zeros(s.len());
    for (j, &zj) in z.iter().enumerate() {
        let pre = g.preimages(zj);
        let x = pre[rng.gen_range(0..pre.len())];
        s.set_block_value(&mut out, j, x);
    }
    out
}

pub fn sample_lifted_preimage(g: &Gadget, z: &[bool], seed: u64) -> Result<GF2Vector, GadgetError> {
    if g.is_constant() {
        return Err(GadgetError::Constant);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_lifted_preimage_with(g, z, &mut rng))
}
