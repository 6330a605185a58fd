//! Gate set for measurement layers, compiled ansatz rotations and noise.
//!
//! Conventions: `Ry(a) = exp(-i a Y / 2)`, `Rz(a) = exp(-i a Z / 2)`,
//! `Rx(a) = exp(-i a X / 2)` and
//! `U3(t, p, l) = [[cos(t/2), -e^{il} sin(t/2)], [e^{ip} sin(t/2), e^{i(p+l)} cos(t/2)]]`.

use crate::pauli::Pauli;
use crate::scalar::{c, cis, cr, Real, C};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate<T: Real> {
    H,
    S,
    Sdg,
    Pauli(Pauli),
    Rx(T),
    Ry(T),
    Rz(T),
    U3(T, T, T),
    /// Control is the first qubit of the instruction, target the second.
    Cnot,
}

impl<T: Real> Gate<T> {
    pub fn arity(&self) -> usize {
        match self {
            Gate::Cnot => 2,
            _ => 1,
        }
    }

    /// Number of continuous parameters.
    pub fn n_params(&self) -> usize {
        match self {
            Gate::Rx(_) | Gate::Ry(_) | Gate::Rz(_) => 1,
            Gate::U3(..) => 3,
            _ => 0,
        }
    }

    /// Row-major matrix, 2x2 or 4x4 (first qubit most significant).
    pub fn matrix(&self) -> Vec<C<T>> {
        let z = cr(T::zero());
        let one = cr(T::one());
        let half = T::lit(0.5);
        match *self {
            Gate::H => {
                let r = cr(T::FRAC_1_SQRT_2());
                vec![r, r, r, -r]
            }
            Gate::S => vec![one, z, z, c(T::zero(), T::one())],
            Gate::Sdg => vec![one, z, z, c(T::zero(), -T::one())],
            Gate::Pauli(Pauli::I) => vec![one, z, z, one],
            Gate::Pauli(Pauli::X) => vec![z, one, one, z],
            Gate::Pauli(Pauli::Y) => vec![z, c(T::zero(), -T::one()), c(T::zero(), T::one()), z],
            Gate::Pauli(Pauli::Z) => vec![one, z, z, -one],
            Gate::Rx(a) => {
                let (s, co) = (a * half).sin_cos();
                vec![cr(co), c(T::zero(), -s), c(T::zero(), -s), cr(co)]
            }
            Gate::Ry(a) => {
                let (s, co) = (a * half).sin_cos();
                vec![cr(co), cr(-s), cr(s), cr(co)]
            }
            Gate::Rz(a) => vec![cis(-a * half), z, z, cis(a * half)],
            Gate::U3(t, p, l) => {
                let (s, co) = (t * half).sin_cos();
                vec![cr(co), -cis(l) * s, cis(p) * s, cis(p + l) * co]
            }
            Gate::Cnot => {
                let mut m = vec![z; 16];
                m[0] = one;
                m[5] = one;
                m[11] = one;
                m[14] = one;
                m
            }
        }
    }

    /// Derivative of [`Gate::matrix`] with respect to parameter `k`.
    pub fn derivative(&self, k: usize) -> Option<Vec<C<T>>> {
        let z = cr(T::zero());
        let half = T::lit(0.5);
        let i = c(T::zero(), T::one());
        match (*self, k) {
            (Gate::Ry(a), 0) => {
                let (s, co) = (a * half).sin_cos();
                Some(vec![cr(-s * half), cr(-co * half), cr(co * half), cr(-s * half)])
            }
            (Gate::Rz(a), 0) => Some(vec![cis(-a * half) * (-i * half), z, z, cis(a * half) * (i * half)]),
            (Gate::Rx(a), 0) => {
                let (s, co) = (a * half).sin_cos();
                Some(vec![cr(-s * half), c(T::zero(), -co * half), c(T::zero(), -co * half), cr(-s * half)])
            }
            (Gate::U3(t, p, l), 0) => {
                let (s, co) = (t * half).sin_cos();
                Some(vec![cr(-s * half), -cis(l) * (co * half), cis(p) * (co * half), -cis(p + l) * (s * half)])
            }
            (Gate::U3(t, p, l), 1) => {
                let (s, co) = (t * half).sin_cos();
                Some(vec![z, z, i * cis(p) * s, i * cis(p + l) * co])
            }
            (Gate::U3(t, p, l), 2) => {
                let (s, co) = (t * half).sin_cos();
                Some(vec![z, -i * cis(l) * s, z, i * cis(p + l) * co])
            }
            _ => None,
        }
    }

    /// Gate whose matrix is the entrywise conjugate of this one.
    pub fn conj(&self) -> Self {
        match *self {
            Gate::S => Gate::Sdg,
            Gate::Sdg => Gate::S,
            // Rx* = Rx(-a); Ry and Rz handled by their real/diagonal structure.
            Gate::Rx(a) => Gate::Rx(-a),
            Gate::Rz(a) => Gate::Rz(-a),
            Gate::U3(t, p, l) => Gate::U3(t, -p, -l),
            // Y* = -Y; the sign is a global phase on the gate.
            g => g,
        }
    }

    /// Returns the gate with parameter `k` shifted by `delta`.
    pub fn shifted(&self, k: usize, delta: T) -> Self {
        match (*self, k) {
            (Gate::Rx(a), 0) => Gate::Rx(a + delta),
            (Gate::Ry(a), 0) => Gate::Ry(a + delta),
            (Gate::Rz(a), 0) => Gate::Rz(a + delta),
            (Gate::U3(t, p, l), 0) => Gate::U3(t + delta, p, l),
            (Gate::U3(t, p, l), 1) => Gate::U3(t, p + delta, l),
            (Gate::U3(t, p, l), 2) => Gate::U3(t, p, l + delta),
            (g, _) => g,
        }
    }

    pub fn params(&self) -> Vec<T> {
        match *self {
            Gate::Rx(a) | Gate::Ry(a) | Gate::Rz(a) => vec![a],
            Gate::U3(t, p, l) => vec![t, p, l],
            _ => Vec::new(),
        }
    }

    /// Lower-case OpenQASM 2 mnemonic.
    pub fn qasm_name(&self) -> &'static str {
        match self {
            Gate::H => "h",
            Gate::S => "s",
            Gate::Sdg => "sdg",
            Gate::Pauli(Pauli::I) => "id",
            Gate::Pauli(Pauli::X) => "x",
            Gate::Pauli(Pauli::Y) => "y",
            Gate::Pauli(Pauli::Z) => "z",
            Gate::Rx(_) => "rx",
            Gate::Ry(_) => "ry",
            Gate::Rz(_) => "rz",
            Gate::U3(..) => "u3",
            Gate::Cnot => "cx",
        }
    }
}

/// A gate bound to qubit indices of some register.
#[derive(Clone, Debug, PartialEq)]
pub struct Instruction<T: Real> {
    pub gate: Gate<T>,
    pub qubits: Vec<usize>,
}

impl<T: Real> Instruction<T> {
    pub fn new(gate: Gate<T>, qubits: Vec<usize>) -> Self {
        Self { gate, qubits }
    }

    pub fn offset(&self, by: usize) -> Self {
        Self { gate: self.gate, qubits: self.qubits.iter().map(|q| q + by).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_close(a: &[C<f64>], b: &[C<f64>], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn u3_zero_is_identity() {
        let m = Gate::<f64>::U3(0.0, 0.0, 0.0).matrix();
        assert!(mat_close(&m, &Gate::Pauli(Pauli::I).matrix(), 1e-15));
    }

    #[test]
    fn ry_is_u3_special_case() {
        let a = 0.7;
        assert!(mat_close(&Gate::<f64>::Ry(a).matrix(), &Gate::U3(a, 0.0, 0.0).matrix(), 1e-15));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        let gates = [Gate::<f64>::Ry(0.3), Gate::Rz(-1.1), Gate::Rx(2.0), Gate::U3(0.4, -0.9, 1.7)];
        for g in gates {
            for k in 0..g.n_params() {
                let d = g.derivative(k).unwrap();
                let p = g.shifted(k, h).matrix();
                let m = g.shifted(k, -h).matrix();
                let fd: Vec<_> = p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                assert!(mat_close(&d, &fd, 1e-8), "{g:?} param {k}");
            }
        }
    }

    #[test]
    fn conj_gate_matches_entrywise_conjugate() {
        let gates = [Gate::<f64>::U3(0.4, -0.9, 1.7), Gate::Rz(0.3), Gate::Rx(1.2), Gate::S, Gate::Ry(0.5)];
        for g in gates {
            let conj: Vec<_> = g.matrix().iter().map(|z| z.conj()).collect();
            assert!(mat_close(&g.conj().matrix(), &conj, 1e-15), "{g:?}");
        }
    }
}
