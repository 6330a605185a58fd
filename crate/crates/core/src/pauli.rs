//! Pauli words and their action on computational-basis amplitudes.
//!
//! Letter `k` of a word acts on qubit `k`, and qubit 0 is the most
//! significant bit of a basis label, so `"YIZI"` is `Y_0 Z_2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(ch: char) -> Option<Self> {
        match ch.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    fn phases(self) -> bool {
        matches!(self, Pauli::Y | Pauli::Z)
    }
}

/// A tensor product of single-qubit Paulis on an `n`-qubit register.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self { letters }
    }

    pub fn identity(n: usize) -> Self {
        Self { letters: vec![Pauli::I; n] }
    }

    /// Places `letters` on the given qubits of an otherwise identity word.
    pub fn from_sparse(n: usize, terms: &[(usize, Pauli)]) -> Result<Self> {
        let mut letters = vec![Pauli::I; n];
        for &(q, p) in terms {
            if q >= n {
                return Err(Error::QubitIndex { index: q, n_qubits: n });
            }
            letters[q] = p;
        }
        Ok(Self { letters })
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// Qubits on which the word acts non-trivially, in ascending order.
    pub fn support(&self) -> Vec<usize> {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(q, _)| q)
            .collect()
    }

    pub fn weight(&self) -> usize {
        self.support().len()
    }

    /// Bit masks `(x, z, n_y)` such that the word equals `i^{n_y} X^x Z^z`.
    pub(crate) fn masks(&self) -> (usize, usize, usize) {
        let n = self.letters.len();
        let mut x = 0usize;
        let mut z = 0usize;
        let mut ny = 0usize;
        for (q, &p) in self.letters.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            if p.flips() {
                x |= bit;
            }
            if p.phases() {
                z |= bit;
            }
            if p == Pauli::Y {
                ny += 1;
            }
        }
        (x, z, ny)
    }

    /// Writes `P * input` into `out`. Both slices must have length `2^n`.
    pub fn apply_into<T: Real>(&self, input: &[C<T>], out: &mut [C<T>]) {
        debug_assert_eq!(input.len(), 1 << self.n_qubits());
        debug_assert_eq!(out.len(), input.len());
        let (x, z, ny) = self.masks();
        let base = i_pow::<T>(ny);
        for (b, &amp) in input.iter().enumerate() {
            let v = if (b & z).count_ones() % 2 == 1 { -amp } else { amp };
            out[b ^ x] = base * v;
        }
    }

    pub fn apply<T: Real>(&self, input: &[C<T>]) -> Vec<C<T>> {
        let mut out = vec![C::<T>::new(T::zero(), T::zero()); input.len()];
        self.apply_into(input, &mut out);
        out
    }

    /// All `4^n - 1` non-identity words in lexicographic order `I < X < Y < Z`.
    pub fn pool(n: usize) -> Vec<PauliString> {
        let total = 1usize << (2 * n);
        (1..total)
            .map(|idx| {
                let letters = (0..n)
                    .map(|q| Pauli::ALL[(idx >> (2 * (n - 1 - q))) & 3])
                    .collect();
                PauliString { letters }
            })
            .collect()
    }
}

fn i_pow<T: Real>(k: usize) -> C<T> {
    match k % 4 {
        0 => c(T::one(), T::zero()),
        1 => c(T::zero(), T::one()),
        2 => c(-T::one(), T::zero()),
        _ => c(T::zero(), -T::one()),
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidPauli(s.to_string()));
        }
        let letters = s
            .chars()
            .map(|ch| Pauli::from_char(ch).ok_or_else(|| Error::InvalidPauli(s.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { letters })
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
