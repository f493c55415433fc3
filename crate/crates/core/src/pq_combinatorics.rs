//! Reduction of words in two involutions p, q and the string classes built on it.
//!
//! A bit string x_1 x_2 ... x_n maps to the word r^{x_n} ... p^{x_2} q^{x_1}, where
//! odd positions carry q and even positions carry p. Deleting pp and qq leaves a
//! unique alternating word p^u (qp)^k q^v.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ElfError, Result};

/// Longest string the brute-force enumerators accept.
pub const MAX_ENUMERATION_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReducedWord {
    pub u: u8,
    pub k: usize,
    pub v: u8,
}

impl ReducedWord {
    pub fn len(&self) -> usize {
        self.u as usize + 2 * self.k + self.v as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Class index l = k + v.
    pub fn class(&self) -> usize {
        self.k + self.v as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Letter {
    P,
    Q,
}

impl Letter {
    /// Letter carried by 1-based position `i`.
    pub fn at_position(i: usize) -> Letter {
        if i % 2 == 1 {
            Letter::Q
        } else {
            Letter::P
        }
    }

    fn other(self) -> Letter {
        match self {
            Letter::P => Letter::Q,
            Letter::Q => Letter::P,
        }
    }
}

/// Stack reducer for words fed left to right.
///
/// The stack is always alternating, so it is stored as its first letter and length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordReducer {
    first: Letter,
    len: usize,
}

impl Default for WordReducer {
    fn default() -> Self {
        Self::new()
    }
}

impl WordReducer {
    pub const fn new() -> Self {
        Self { first: Letter::P, len: 0 }
    }

    fn top(&self) -> Option<Letter> {
        match self.len {
            0 => None,
            n if n % 2 == 1 => Some(self.first),
            _ => Some(self.first.other()),
        }
    }

    #[must_use]
    pub fn push(self, letter: Letter) -> Self {
        if self.top() == Some(letter) {
            Self { first: self.first, len: self.len - 1 }
        } else if self.len == 0 {
            Self { first: letter, len: 1 }
        } else {
            Self { first: self.first, len: self.len + 1 }
        }
    }

    pub fn finish(&self) -> ReducedWord {
        if self.len == 0 {
            return ReducedWord { u: 0, k: 0, v: 0 };
        }
        let u = u8::from(self.first == Letter::P);
        let v = u8::from(self.top() == Some(Letter::Q));
        ReducedWord { u, k: (self.len - u as usize - v as usize) / 2, v }
    }
}

/// Bits x_1 ... x_n, stored in that order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self::new(vec![true; n])
    }

    /// Bit i of `mask` (least significant first) becomes x_{i+1}.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self::new((0..n).map(|i| (mask >> i) & 1 == 1).collect())
    }

    pub fn to_mask(&self) -> Result<u64> {
        if self.bits.len() > 64 {
            return Err(ElfError::Capacity { what: "bit string as u64 mask".into(), limit: 64 });
        }
        Ok(self
            .bits
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &b)| m | (u64::from(b) << i)))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.bits.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &BitString) -> Self {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        Self::new(bits)
    }

    /// Word letters in left-to-right order (position n first).
    pub fn letters(&self) -> Vec<Letter> {
        (1..=self.len())
            .rev()
            .filter(|&i| self.bits[i - 1])
            .map(Letter::at_position)
            .collect()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = ElfError;

    /// Parses characters in the order x_1 x_2 ... x_n.
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(invalid(format!("bad bit character `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

pub fn reduce_word(x: &BitString) -> ReducedWord {
    x.letters()
        .into_iter()
        .fold(WordReducer::new(), WordReducer::push)
        .finish()
}

/// `reduce_word` on a mask of length `n <= 64`.
pub fn reduce_mask(mask: u64, n: usize) -> ReducedWord {
    let mut r = WordReducer::new();
    for i in (1..=n).rev() {
        if (mask >> (i - 1)) & 1 == 1 {
            r = r.push(Letter::at_position(i));
        }
    }
    r.finish()
}

/// The unique l with x ∈ Ξ^n_l.
pub fn xi_class(x: &BitString) -> usize {
    reduce_word(x).class()
}

/// Largest nonempty class index ⌈α/2⌉.
pub fn max_class(alpha: usize) -> usize {
    alpha.div_ceil(2)
}

/// Binomial coefficient, zero for negative `k` or `k > n`.
pub fn binomial(n: i64, k: i64) -> u64 {
    if n < 0 || k < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc as u64
}

/// |Θ^n_{ukv}|.
pub fn theta_cardinality(n: usize, u: u8, k: usize, _v: u8) -> u64 {
    let (n, u, k) = (n as i64, i64::from(u), k as i64);
    let m = n / 2;
    if n % 2 == 0 {
        binomial(2 * m - 1, m - 1 - k)
    } else {
        binomial(2 * m, m - u - k)
    }
}

/// |Ξ^α_l|.
///
/// For odd α and l ≥ 1 the count is C(2m+2, m+1−l) with no factor 2; only this
/// form partitions the 2^α strings.
pub fn xi_cardinality(alpha: usize, l: usize) -> u64 {
    if alpha == 0 || l > max_class(alpha) {
        return 0;
    }
    let m = (alpha / 2) as i64;
    let l = l as i64;
    if alpha.is_multiple_of(2) {
        if l == 0 {
            2 * binomial(2 * m - 1, m - 1)
        } else {
            2 * binomial(2 * m, m - l)
        }
    } else if l == 0 {
        binomial(2 * m + 1, m)
    } else {
        binomial(2 * m + 2, m + 1 - l)
    }
}

fn check_enumeration_len(n: usize) -> Result<()> {
    if n > MAX_ENUMERATION_LEN {
        return Err(ElfError::Capacity {
            what: format!("enumeration over 2^{n} strings"),
            limit: MAX_ENUMERATION_LEN,
        });
    }
    Ok(())
}

/// All x ∈ {0,1}^n with reduce_word(x) = (u, k, v), ordered by mask.
pub fn enumerate_theta(n: usize, u: u8, k: usize, v: u8) -> Result<Vec<BitString>> {
    check_enumeration_len(n)?;
    let target = ReducedWord { u, k, v };
    Ok((0..1u64 << n)
        .filter(|&m| reduce_mask(m, n) == target)
        .map(|m| BitString::from_mask(m, n))
        .collect())
}

/// All x ∈ {0,1}^α in class l, ordered by mask.
pub fn enumerate_xi(alpha: usize, l: usize) -> Result<Vec<BitString>> {
    check_enumeration_len(alpha)?;
    Ok((0..1u64 << alpha)
        .filter(|&m| reduce_mask(m, alpha).class() == l)
        .map(|m| BitString::from_mask(m, alpha))
        .collect())
}

/// Compares the classes of a·1·c^R and c·1·a^R.
pub fn reversal_closure_check(a: &BitString, c: &BitString) -> Result<bool> {
    if a.len() != c.len() || a.is_empty() || !a.len().is_multiple_of(2) {
        return Err(invalid(format!(
            "reversal closure needs equal even lengths, got {} and {}",
            a.len(),
            c.len()
        )));
    }
    let one = BitString::ones(1);
    let left = a.concat(&one).concat(&c.reversed());
    let right = c.concat(&one).concat(&a.reversed());
    Ok(xi_class(&left) == xi_class(&right))
}
