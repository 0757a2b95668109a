//! Exact noncommutative polynomials in the symbols `D` (Δ) and `N`, the 2×2 operator
//! matrix recursion, and an evaluation hook into the jet-based operators.
//!
//! Words are read as operator products: the leftmost symbol is applied last, so
//! `DN φ = Δ(Nφ)`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::domains::{n_jet, Domain, WeightSpec};
use crate::error::{Error, Result};
use crate::jets::MAX_ORDER;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    D,
    N,
}

impl Symbol {
    /// Differential order of the operator the symbol stands for.
    pub fn order(self) -> usize {
        match self {
            Symbol::D => 2,
            Symbol::N => 1,
        }
    }

    fn letter(self) -> char {
        match self {
            Symbol::D => 'D',
            Symbol::N => 'N',
        }
    }
}

/// A word over `{D, N}`, ordered graded-lexicographically (length first).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Word(pub Vec<Symbol>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|s| s.order()).sum()
    }

    fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    /// Runs of a repeated symbol are written as powers: `NNN` → `N³`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let mut i = 0;
        while i < self.0.len() {
            let s = self.0[i];
            let mut j = i;
            while j < self.0.len() && self.0[j] == s {
                j += 1;
            }
            write!(f, "{}", s.letter())?;
            if j - i > 1 {
                write!(f, "{}", superscript(j - i))?;
            }
            i = j;
        }
        Ok(())
    }
}

fn superscript(n: usize) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    n.to_string()
        .chars()
        .map(|c| DIGITS[c.to_digit(10).expect("decimal digit") as usize])
        .collect()
}

/// Linear combination of words with exact rational coefficients; zero terms are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct OpPoly {
    terms: BTreeMap<Word, BigRational>,
}

impl OpPoly {
    pub fn zero() -> Self {
        OpPoly::default()
    }

    pub fn one() -> Self {
        OpPoly::word(Word::default())
    }

    pub fn word(w: Word) -> Self {
        OpPoly::term(w, BigRational::one())
    }

    pub fn symbol(s: Symbol) -> Self {
        OpPoly::word(Word(vec![s]))
    }

    pub fn d() -> Self {
        OpPoly::symbol(Symbol::D)
    }

    pub fn n() -> Self {
        OpPoly::symbol(Symbol::N)
    }

    pub fn term(w: Word, c: BigRational) -> Self {
        let mut p = OpPoly::zero();
        p.add_term(w, c);
        p
    }

    fn add_term(&mut self, w: Word, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(w).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, w: &Word) -> BigRational {
        self.terms.get(w).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn max_word_len(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &BigRational) -> OpPoly {
        let mut out = OpPoly::zero();
        for (w, v) in &self.terms {
            out.add_term(w.clone(), v * c);
        }
        out
    }

    pub fn scale_int(&self, c: i64) -> OpPoly {
        self.scale(&BigRational::from_integer(BigInt::from(c)))
    }

    /// Applies the operator to `φ` at `x`, composing Δ and N on jets (rightmost symbol first).
    pub fn evaluate(&self, dom: &Domain, phi: &WeightSpec, x: &[f64]) -> Result<f64> {
        let m = dom.model();
        let needed = self.terms.keys().map(Word::order).max().unwrap_or(0);
        if needed > MAX_ORDER - 1 {
            return Err(Error::OrderTooHigh {
                requested: needed + 1,
                max: MAX_ORDER,
            });
        }
        let uses_n = self.terms.keys().any(|w| w.0.contains(&Symbol::N));
        let delta = if uses_n {
            dom.check_band(x)?;
            Some(dom.delta_jet(x, needed + 1)?)
        } else {
            None
        };
        let base = phi.field().jet(x, needed)?;
        let mut total = 0.0;
        for (w, c) in &self.terms {
            let mut jet = base.clone();
            for s in w.0.iter().rev() {
                jet = match s {
                    Symbol::D => m.sublaplacian_jet(&jet)?,
                    Symbol::N => n_jet(m, delta.as_ref().expect("δ jet computed"), &jet)?,
                };
            }
            total += c.to_f64().unwrap_or(f64::NAN) * jet.value();
        }
        Ok(total)
    }
}

impl Add for &OpPoly {
    type Output = OpPoly;
    fn add(self, rhs: &OpPoly) -> OpPoly {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }
}

impl Sub for &OpPoly {
    type Output = OpPoly;
    fn sub(self, rhs: &OpPoly) -> OpPoly {
        self + &(-rhs)
    }
}

impl Neg for &OpPoly {
    type Output = OpPoly;
    fn neg(self) -> OpPoly {
        self.scale_int(-1)
    }
}

impl Mul for &OpPoly {
    type Output = OpPoly;
    /// Concatenation product: `(a·b) φ = a(b φ)`.
    fn mul(self, rhs: &OpPoly) -> OpPoly {
        let mut out = OpPoly::zero();
        for (wa, ca) in &self.terms {
            for (wb, cb) in &rhs.terms {
                out.add_term(wa.concat(wb), ca * cb);
            }
        }
        out
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for OpPoly {
            type Output = OpPoly;
            fn $m(self, rhs: OpPoly) -> OpPoly {
                (&self).$m(&rhs)
            }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for OpPoly {
    type Output = OpPoly;
    fn neg(self) -> OpPoly {
        -&self
    }
}

impl fmt::Display for OpPoly {
    /// Canonical text, e.g. `−2·DN + 6·ND − N³`, terms in graded-lexicographic word order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            match (i, neg) {
                (0, true) => f.write_str("−")?,
                (0, false) => {}
                (_, true) => f.write_str(" − ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let a = c.abs();
            let word = w.to_string();
            if a.is_one() {
                f.write_str(&word)?;
            } else if w.is_empty() {
                write!(f, "{a}")?;
            } else {
                write!(f, "{a}·{word}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for OpPoly {
    type Err = Error;

    /// Parses the canonical form (also accepting `-`, `*`, `^k` and `Δ` for `D`).
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .replace('−', "-")
            .replace('·', "*")
            .replace('Δ', "D")
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect();
        if norm.is_empty() {
            return Err(Error::Config("empty operator polynomial".into()));
        }
        if norm == "0" {
            return Ok(OpPoly::zero());
        }
        let chars: Vec<char> = norm.chars().collect();
        let mut out = OpPoly::zero();
        let mut i = 0;
        while i < chars.len() {
            let mut sign = 1i64;
            if chars[i] == '+' || chars[i] == '-' {
                if chars[i] == '-' {
                    sign = -1;
                }
                i += 1;
            } else if i > 0 {
                return Err(Error::Config(format!("expected '+' or '-' at position {i} in '{s}'")));
            }
            let mut coef = BigRational::from_integer(BigInt::from(sign));
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '/') {
                i += 1;
            }
            if i > start {
                let text: String = chars[start..i].iter().collect();
                let value: BigRational = match text.split_once('/') {
                    Some((n, d)) => {
                        let n: BigInt = n.parse().map_err(|_| Error::Config(format!("bad coefficient '{text}'")))?;
                        let d: BigInt = d.parse().map_err(|_| Error::Config(format!("bad coefficient '{text}'")))?;
                        if d.is_zero() {
                            return Err(Error::Config("zero denominator".into()));
                        }
                        BigRational::new(n, d)
                    }
                    None => BigRational::from_integer(
                        text.parse().map_err(|_| Error::Config(format!("bad coefficient '{text}'")))?,
                    ),
                };
                coef *= value;
                if i < chars.len() && chars[i] == '*' {
                    i += 1;
                }
            }
            let mut word = Vec::new();
            while i < chars.len() && (chars[i] == 'D' || chars[i] == 'N') {
                let sym = if chars[i] == 'D' { Symbol::D } else { Symbol::N };
                i += 1;
                let mut power = String::new();
                if i < chars.len() && chars[i] == '^' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        power.push(chars[i]);
                        i += 1;
                    }
                } else {
                    while i < chars.len() {
                        let d = "⁰¹²³⁴⁵⁶⁷⁸⁹".chars().position(|c| c == chars[i]);
                        match d {
                            Some(d) => {
                                power.push(char::from_digit(d as u32, 10).expect("digit"));
                                i += 1;
                            }
                            None => break,
                        }
                    }
                }
                let k: usize = if power.is_empty() {
                    1
                } else {
                    power.parse().map_err(|_| Error::Config(format!("bad power in '{s}'")))?
                };
                word.extend(std::iter::repeat(sym).take(k));
            }
            if word.is_empty() && i == start {
                return Err(Error::Config(format!("expected a term at position {i} in '{s}'")));
            }
            out.add_term(Word(word), coef);
        }
        Ok(out)
    }
}

/// 2×2 matrix of operator polynomials `[[Q, S], [P, R]]`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct OpMatrix(pub [[OpPoly; 2]; 2]);

impl OpMatrix {
    pub fn zero() -> Self {
        OpMatrix::default()
    }

    pub fn entry(&self, row: usize, col: usize) -> &OpPoly {
        &self.0[row][col]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(OpPoly::is_zero)
    }

    pub fn max_word_len(&self) -> usize {
        self.0.iter().flatten().map(OpPoly::max_word_len).max().unwrap_or(0)
    }
}

impl Add for &OpMatrix {
    type Output = OpMatrix;
    fn add(self, rhs: &OpMatrix) -> OpMatrix {
        let mut out = OpMatrix::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = &self.0[i][j] + &rhs.0[i][j];
            }
        }
        out
    }
}

impl Mul for &OpMatrix {
    type Output = OpMatrix;
    /// Entry products keep left–right order.
    fn mul(self, rhs: &OpMatrix) -> OpMatrix {
        let mut out = OpMatrix::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = &(&self.0[i][0] * &rhs.0[0][j]) + &(&self.0[i][1] * &rhs.0[1][j]);
            }
        }
        out
    }
}

impl fmt::Display for OpMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[ {} , {} ]", self.0[0][0], self.0[0][1])?;
        write!(f, "[ {} , {} ]", self.0[1][0], self.0[1][1])
    }
}

/// `M₁₀ = [[D, DN], [−N, −N² + D]]` and `M₁₁ = [[0, −N], [0, 0]]`.
pub fn seed_matrices() -> (OpMatrix, OpMatrix) {
    let (d, n) = (OpPoly::d(), OpPoly::n());
    let m10 = OpMatrix([
        [d.clone(), &d * &n],
        [-&n, &(-&(&n * &n)) + &d],
    ]);
    let m11 = OpMatrix([[OpPoly::zero(), -&n], [OpPoly::zero(), OpPoly::zero()]]);
    (m10, m11)
}

/// Default cap on the recursion depth.
pub const MAX_RECURSION: usize = 6;

/// `M_kj = M₁₀ M_{k−1,j} + M₁₁ M_{k−1,j−1}` for `j = 0..=k`, with `M₀₀ = I`.
pub fn recursion(k: usize) -> Result<Vec<OpMatrix>> {
    recursion_with_cap(k, MAX_RECURSION)
}

pub fn recursion_with_cap(k: usize, cap: usize) -> Result<Vec<OpMatrix>> {
    if k == 0 {
        return Err(Error::invalid("recursion depth must be at least 1"));
    }
    if k > cap {
        return Err(Error::invalid(format!("recursion depth {k} exceeds the cap {cap}")));
    }
    let (m10, m11) = seed_matrices();
    let identity = OpMatrix([
        [OpPoly::one(), OpPoly::zero()],
        [OpPoly::zero(), OpPoly::one()],
    ]);
    let mut prev = vec![identity];
    for level in 1..=k {
        let mut next = Vec::with_capacity(level + 1);
        for j in 0..=level {
            let mut m = OpMatrix::zero();
            if j < prev.len() {
                m = &m + &(&m10 * &prev[j]);
            }
            if j >= 1 && j - 1 < prev.len() {
                m = &m + &(&m11 * &prev[j - 1]);
            }
            next.push(m);
        }
        prev = next;
    }
    Ok(prev)
}

/// Named operator combinations used by the expansion coefficients, assembled from
/// recursion entries (`D = Q₁₀`, `N = −P₁₀`).
pub fn expansion_coefficient_operators() -> Result<Vec<(&'static str, OpPoly)>> {
    let first = recursion(1)?;
    let d = first[0].entry(0, 0).clone();
    let n = -first[0].entry(1, 0);
    let second = recursion(2)?;
    // P₂₀ = −ND + N³ − DN
    let p20 = second[0].entry(1, 0).clone();
    let n2 = &n * &n;
    let n3 = &n2 * &n;
    let nd = &n * &d;
    let dn = &d * &n;
    // 6NΔ − N³ − 2ΔN = 6·ND − N³ − 2·DN = P₂₀ + 7·ND − DN − 2·N³
    let a8 = &(&(&p20 + &nd.scale_int(7)) - &dn) - &n3.scale_int(2);
    Ok(vec![
        ("N", n.clone()),
        ("N^2", n2.clone()),
        ("N^3", n3),
        ("4D - N^2", &d.scale_int(4) - &n2),
        ("4D + N^2", &d.scale_int(4) + &n2),
        ("6ND - N^3 - 2DN", a8),
    ])
}
