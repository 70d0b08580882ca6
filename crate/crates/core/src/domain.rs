//! Alphabets, validated sequences, labelled datasets and the single-site
//! perturbation move used by simulated annealing.

use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of distinct printable ASCII symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Alphabet {
    symbols: Vec<u8>,
}

impl Alphabet {
    pub fn new<I: IntoIterator<Item = char>>(symbols: I) -> Result<Self> {
        let mut out = Vec::new();
        for c in symbols {
            if !c.is_ascii_graphic() {
                return Err(Error::UnsupportedSymbol(c));
            }
            let b = c as u8;
            if out.contains(&b) {
                return Err(Error::DuplicateSymbol(c));
            }
            out.push(b);
        }
        if out.len() < 2 {
            return Err(Error::AlphabetTooSmall(out.len()));
        }
        Ok(Self { symbols: out })
    }

    /// `{0, 1}`
    pub fn binary() -> Self {
        Self { symbols: b"01".to_vec() }
    }

    /// `{A, C, G, T}`
    pub fn dna() -> Self {
        Self { symbols: b"ACGT".to_vec() }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = char> + '_ {
        self.symbols.iter().map(|&b| b as char)
    }

    pub fn contains(&self, c: char) -> bool {
        c.is_ascii() && self.symbols.contains(&(c as u8))
    }

    fn index_of(&self, b: u8) -> Option<usize> {
        self.symbols.iter().position(|&s| s == b)
    }

    /// Checks every character of `raw` against the alphabet.
    pub fn validate(&self, raw: &str) -> Result<Sequence> {
        for (position, ch) in raw.chars().enumerate() {
            if !self.contains(ch) {
                return Err(Error::InvalidCharacter { position, ch });
            }
        }
        Ok(Sequence(Arc::from(raw)))
    }

    pub fn validates(&self, seq: &Sequence) -> bool {
        seq.as_bytes().iter().all(|b| self.symbols.contains(b))
    }
}

impl TryFrom<String> for Alphabet {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Alphabet::new(value.chars())
    }
}

impl From<Alphabet> for String {
    fn from(a: Alphabet) -> String {
        a.symbols().collect()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.symbols().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

/// An immutable string over some [`Alphabet`]. Cloning is cheap.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence(Arc<str>);

impl Sequence {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of positions equal to `c`.
    pub fn char_count(&self, c: char) -> usize {
        if !c.is_ascii() {
            return 0;
        }
        let b = c as u8;
        self.as_bytes().iter().filter(|&&x| x == b).count()
    }

    /// Hamming distance, `None` when the lengths differ.
    pub fn hamming(&self, other: &Sequence) -> Option<usize> {
        if self.len() != other.len() {
            return None;
        }
        Some(
            self.as_bytes()
                .iter()
                .zip(other.as_bytes())
                .filter(|(a, b)| a != b)
                .count(),
        )
    }

    fn from_bytes(bytes: Vec<u8>) -> Self {
        // only ever called with bytes drawn from an ASCII alphabet
        Sequence(Arc::from(String::from_utf8(bytes).expect("ASCII symbols")))
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Sequence {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Number of positions of `seq` equal to `c`.
pub fn char_count(seq: &Sequence, c: char) -> usize {
    seq.char_count(c)
}

/// Changes exactly `n_chars` distinct positions of `seq`.
///
/// Positions are drawn uniformly without replacement and each replacement is
/// drawn uniformly from the alphabet minus the current symbol, so the result
/// is always at Hamming distance `n_chars` from the input.
pub fn perturb<R: Rng + ?Sized>(
    seq: &Sequence,
    alphabet: &Alphabet,
    n_chars: usize,
    rng: &mut R,
) -> Result<Sequence> {
    let len = seq.len();
    if n_chars == 0 {
        return Err(Error::InvalidParameter("n_chars must be at least 1".into()));
    }
    if len < n_chars {
        return Err(Error::SequenceTooShort { len, n_chars });
    }
    let mut bytes = seq.as_bytes().to_vec();
    let k = alphabet.len();
    for pos in index::sample(rng, len, n_chars) {
        let current = alphabet.index_of(bytes[pos]).ok_or(Error::InvalidCharacter {
            position: pos,
            ch: bytes[pos] as char,
        })?;
        let mut draw = rng.random_range(0..k - 1);
        if draw >= current {
            draw += 1;
        }
        bytes[pos] = alphabet.symbols[draw];
    }
    Ok(Sequence::from_bytes(bytes))
}

/// Targets attached to a [`Dataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Targets {
    Real(Vec<f64>),
    Binary(Vec<bool>),
    Counts(Vec<u64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Real,
    Binary,
    Counts,
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(v) => v.len(),
            Targets::Binary(v) => v.len(),
            Targets::Counts(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> TargetKind {
        match self {
            Targets::Real(_) => TargetKind::Real,
            Targets::Binary(_) => TargetKind::Binary,
            Targets::Counts(_) => TargetKind::Counts,
        }
    }

    pub fn empty(kind: TargetKind) -> Self {
        match kind {
            TargetKind::Real => Targets::Real(Vec::new()),
            TargetKind::Binary => Targets::Binary(Vec::new()),
            TargetKind::Counts => Targets::Counts(Vec::new()),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Targets::Real(v) => v.clone(),
            Targets::Binary(v) => v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            Targets::Counts(v) => v.iter().map(|&c| c as f64).collect(),
        }
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        match self {
            Targets::Real(v) => Targets::Real(idx.iter().map(|&i| v[i]).collect()),
            Targets::Binary(v) => Targets::Binary(idx.iter().map(|&i| v[i]).collect()),
            Targets::Counts(v) => Targets::Counts(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Inputs and targets over a shared alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    alphabet: Alphabet,
    inputs: Vec<Sequence>,
    targets: Targets,
}

impl Dataset {
    pub fn new(alphabet: Alphabet, inputs: Vec<Sequence>, targets: Targets) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::LengthMismatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        for seq in &inputs {
            alphabet.validate(seq.as_str())?;
        }
        Ok(Self {
            alphabet,
            inputs,
            targets,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn inputs(&self) -> &[Sequence] {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn y(&self) -> Vec<f64> {
        self.targets.to_f64()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            alphabet: self.alphabet.clone(),
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: self.targets.select(idx),
        }
    }

    pub fn with_targets(&self, targets: Targets) -> Result<Self> {
        Self::new(self.alphabet.clone(), self.inputs.clone(), targets)
    }
}
