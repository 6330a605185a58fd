//! Dense statevector simulation.
//!
//! Qubit 0 is the most significant bit of a basis index. Registers are
//! capped at [`MAX_QUBITS`].

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gates::{Gate, Instruction};
use crate::linalg::DenseOperator;
use crate::pauli::PauliString;
use crate::scalar::{c, cr, Real, C};

pub const MAX_QUBITS: usize = 12;

/// Eigenvalues below this are dropped from entropy sums.
pub const ENTROPY_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    n: usize,
    amps: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    fn check_size(n: usize) -> Result<()> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "register size {n} outside 1..={MAX_QUBITS}"
            )));
        }
        Ok(())
    }

    /// Computational basis state `|index>`.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        Self::check_size(n)?;
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, got: index });
        }
        let mut amps = vec![cr(T::zero()); dim];
        amps[index] = cr(T::one());
        Ok(Self { n, amps })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    /// `|+>^n`.
    pub fn plus(n: usize) -> Result<Self> {
        Self::check_size(n)?;
        let dim = 1usize << n;
        let a = T::one() / T::lit(dim as f64).sqrt();
        Ok(Self { n, amps: vec![cr(a); dim] })
    }

    /// Wraps amplitudes after normalizing them. Fails on a zero vector or a
    /// length that is not a power of two.
    pub fn from_amplitudes(amps: Vec<C<T>>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("amplitude count {dim} is not 2^n")));
        }
        let n = dim.trailing_zeros() as usize;
        Self::check_size(n)?;
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm <= T::zero() || !norm.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize amplitudes".into()));
        }
        Ok(Self { n, amps: amps.into_iter().map(|z| z / norm).collect() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn norm(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(cr(T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    /// In place `e^{i theta P}`: `cos(theta) |s> + i sin(theta) P|s>`.
    pub fn rotate_pauli(&mut self, p: &PauliString, theta: T) -> Result<()> {
        if p.n_qubits() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: p.n_qubits() });
        }
        let (s, co) = theta.sin_cos();
        let pv = p.apply(&self.amps);
        let is = c(T::zero(), s);
        for (a, b) in self.amps.iter_mut().zip(pv) {
            *a = *a * co + is * b;
        }
        Ok(())
    }

    pub fn apply_pauli_rotation(&self, p: &PauliString, theta: T) -> Result<Self> {
        let mut out = self.clone();
        out.rotate_pauli(p, theta)?;
        Ok(out)
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<()> {
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n {
                return Err(Error::QubitIndex { index: q, n_qubits: self.n });
            }
            if qubits[..i].contains(&q) {
                return Err(Error::InvalidArgument(format!("qubit {q} repeated")));
            }
        }
        Ok(())
    }

    /// Applies a `2^k x 2^k` matrix (row-major) to the listed qubits; the
    /// first listed qubit is the most significant within the block.
    pub fn apply_matrix(&mut self, m: &[C<T>], qubits: &[usize]) -> Result<()> {
        self.check_qubits(qubits)?;
        let k = qubits.len();
        let bd = 1usize << k;
        if m.len() != bd * bd {
            return Err(Error::DimensionMismatch { expected: bd * bd, got: m.len() });
        }
        let masks: Vec<usize> = qubits.iter().map(|&q| 1usize << (self.n - 1 - q)).collect();
        let all: usize = masks.iter().fold(0, |a, &b| a | b);
        let offsets: Vec<usize> = (0..bd)
            .map(|local| {
                masks.iter().enumerate().fold(0usize, |acc, (j, &mask)| {
                    if (local >> (k - 1 - j)) & 1 == 1 {
                        acc | mask
                    } else {
                        acc
                    }
                })
            })
            .collect();
        let mut buf = vec![cr(T::zero()); bd];
        for base in 0..self.amps.len() {
            if base & all != 0 {
                continue;
            }
            for (j, &off) in offsets.iter().enumerate() {
                buf[j] = self.amps[base | off];
            }
            for (i, &off) in offsets.iter().enumerate() {
                let row = &m[i * bd..(i + 1) * bd];
                self.amps[base | off] =
                    row.iter().zip(&buf).fold(cr(T::zero()), |acc, (&a, &b)| acc + a * b);
            }
        }
        Ok(())
    }

    pub fn apply_operator_on(&mut self, op: &DenseOperator<T>, qubits: &[usize]) -> Result<()> {
        self.apply_matrix(op.data(), qubits)
    }

    pub fn apply_gate(&mut self, gate: &Gate<T>, qubits: &[usize]) -> Result<()> {
        if qubits.len() != gate.arity() {
            return Err(Error::InvalidArgument(format!(
                "{} expects {} qubit(s), got {}",
                gate.qasm_name(),
                gate.arity(),
                qubits.len()
            )));
        }
        self.apply_matrix(&gate.matrix(), qubits)
    }

    pub fn apply_instruction(&mut self, ins: &Instruction<T>) -> Result<()> {
        self.apply_gate(&ins.gate, &ins.qubits)
    }

    /// `Re <s|M|s>` for a Hermitian `M`.
    pub fn expectation(&self, m: &DenseOperator<T>) -> Result<T> {
        if !m.is_hermitian() {
            return Err(Error::NotHermitian(m.hermitian_deviation().to_f64_lossy()));
        }
        if m.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: m.dim() });
        }
        let mv = m.apply(&self.amps);
        let z = self
            .amps
            .iter()
            .zip(&mv)
            .fold(cr(T::zero()), |acc, (a, b)| acc + a.conj() * b);
        debug_assert!(
            z.im.abs() < T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) * m.max_abs().max(T::one()),
            "imaginary residue {:?}",
            z.im
        );
        Ok(z.re)
    }

    /// Draws `shots` basis indices from the Born distribution.
    pub fn sample_indices<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Vec<usize> {
        let cdf = cumulative(&self.probabilities());
        (0..shots).map(|_| draw(&cdf, rng)).collect()
    }

    /// Histogram of measured bitstrings (qubit 0 leftmost).
    pub fn sample<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Result<BTreeMap<String, usize>> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shots must be >= 1".into()));
        }
        let mut hist = BTreeMap::new();
        for idx in self.sample_indices(shots, rng) {
            *hist.entry(bitstring(idx, self.n)).or_insert(0) += 1;
        }
        Ok(hist)
    }

    /// Reduced density matrix on `keep` (ordered as given).
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DenseOperator<T>> {
        self.check_qubits(keep)?;
        let rest: Vec<usize> = (0..self.n).filter(|q| !keep.contains(q)).collect();
        let da = 1usize << keep.len();
        let db = 1usize << rest.len();
        let index = |a: usize, b: usize| -> usize {
            let mut idx = 0usize;
            for (j, &q) in keep.iter().enumerate() {
                if (a >> (keep.len() - 1 - j)) & 1 == 1 {
                    idx |= 1 << (self.n - 1 - q);
                }
            }
            for (j, &q) in rest.iter().enumerate() {
                if (b >> (rest.len() - 1 - j)) & 1 == 1 {
                    idx |= 1 << (self.n - 1 - q);
                }
            }
            idx
        };
        let mut psi = vec![cr(T::zero()); da * db];
        for a in 0..da {
            for b in 0..db {
                psi[a * db + b] = self.amps[index(a, b)];
            }
        }
        let mut rho = vec![cr(T::zero()); da * da];
        for i in 0..da {
            for j in i..da {
                let v = (0..db).fold(cr(T::zero()), |acc, b| acc + psi[i * db + b] * psi[j * db + b].conj());
                rho[i * da + j] = v;
                rho[j * da + i] = v.conj();
            }
        }
        let mut m = DenseOperator::from_rows(da, rho)?;
        m.symmetrize();
        Ok(m)
    }

    /// `S(A) + S(B) - S(AB)` in bits. The joint state is pure, so `S(AB) = 0`.
    pub fn mutual_information(&self, part_a: &[usize], part_b: &[usize]) -> Result<T> {
        let mut all: Vec<usize> = part_a.iter().chain(part_b).copied().collect();
        all.sort_unstable();
        all.dedup();
        if all.len() != part_a.len() + part_b.len() || all != (0..self.n).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument(
                "partition must cover every qubit exactly once".into(),
            ));
        }
        let sa = von_neumann_entropy(&self.reduced_density(part_a)?)?;
        let sb = von_neumann_entropy(&self.reduced_density(part_b)?)?;
        Ok(sa + sb)
    }
}

/// Base-2 von Neumann entropy, with `0 log 0 := 0`.
pub fn von_neumann_entropy<T: Real>(rho: &DenseOperator<T>) -> Result<T> {
    let floor = T::lit(ENTROPY_FLOOR).max(T::epsilon() * T::lit(16.0));
    Ok(rho
        .hermitian_eigenvalues()?
        .into_iter()
        .filter(|&l| l > floor)
        .map(|l| -l * l.log2())
        .sum())
}

pub(crate) fn cumulative<T: Real>(p: &[T]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = p
        .iter()
        .map(|&x| {
            acc += x.to_f64_lossy();
            acc
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        // Normalization residue goes to the final bin.
        *last = f64::INFINITY;
    }
    cdf
}

pub(crate) fn draw<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    cdf.partition_point(|&x| x <= u).min(cdf.len() - 1)
}

pub fn bitstring(index: usize, n: usize) -> String {
    (0..n)
        .map(|q| if (index >> (n - 1 - q)) & 1 == 1 { '1' } else { '0' })
        .collect()
}
