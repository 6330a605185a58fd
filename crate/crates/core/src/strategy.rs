//! Quantum strategies: a shared state built from Pauli rotations on a
//! product reference, plus a measurement layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{Gate, Instruction};
use crate::measurement::MeasurementLayer;
use crate::pauli::{Pauli, PauliString};
use crate::state::StateVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceState {
    AllZero,
    AllPlus,
}

impl ReferenceState {
    pub fn prepare(self, n: usize) -> Result<StateVector<f64>> {
        match self {
            ReferenceState::AllZero => StateVector::zero(n),
            ReferenceState::AllPlus => StateVector::plus(n),
        }
    }

    pub fn instructions(self, n: usize) -> Vec<Instruction<f64>> {
        match self {
            ReferenceState::AllZero => Vec::new(),
            ReferenceState::AllPlus => (0..n).map(|q| Instruction::new(Gate::H, vec![q])).collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReferenceState::AllZero => "all_zero",
            ReferenceState::AllPlus => "all_plus",
        }
    }
}

impl std::str::FromStr for ReferenceState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_zero" | "zero" => Ok(ReferenceState::AllZero),
            "all_plus" | "plus" => Ok(ReferenceState::AllPlus),
            other => Err(Error::InvalidArgument(format!("unknown reference state {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    pub reference: ReferenceState,
    /// Rotations `e^{i theta P}`, applied in list order.
    pub ansatz: Vec<(PauliString, f64)>,
    pub layer: MeasurementLayer<f64>,
}

impl Strategy {
    pub fn n_qubits(&self) -> usize {
        self.layer.n_players() * self.layer.qubits_per_player()
    }

    pub fn prepare_state(&self) -> Result<StateVector<f64>> {
        let mut s = self.reference.prepare(self.n_qubits())?;
        for (p, theta) in &self.ansatz {
            s.rotate_pauli(p, *theta)?;
        }
        Ok(s)
    }

    /// Shared-state preparation as gates: reference, then each rotation
    /// compiled to basis changes around a CNOT ladder.
    pub fn preparation_instructions(&self) -> Vec<Instruction<f64>> {
        let mut out = self.reference.instructions(self.n_qubits());
        for (p, theta) in &self.ansatz {
            out.extend(compile_pauli_rotation(p, *theta));
        }
        out
    }

    /// Measurement-layer gates for a joint question on the full register.
    pub fn measurement_instructions(&self, question: &[usize]) -> Result<Vec<Instruction<f64>>> {
        if question.len() != self.layer.n_players() {
            return Err(Error::DimensionMismatch { expected: self.layer.n_players(), got: question.len() });
        }
        let nb = self.layer.qubits_per_player();
        let mut out = Vec::new();
        for (p, &q) in question.iter().enumerate() {
            out.extend(self.layer.player_instructions(p, q, p * nb)?);
        }
        Ok(out)
    }
}

/// Decomposes `e^{i theta P}` into `V^dag . ladder^dag . Rz(-2 theta) . ladder . V`
/// where `V` rotates each support letter onto `Z`.
pub fn compile_pauli_rotation(p: &PauliString, theta: f64) -> Vec<Instruction<f64>> {
    let support = p.support();
    let Some(&last) = support.last() else { return Vec::new() };
    let letters = p.letters();
    let mut out = Vec::new();
    for &q in &support {
        match letters[q] {
            Pauli::X => out.push(Instruction::new(Gate::H, vec![q])),
            Pauli::Y => {
                out.push(Instruction::new(Gate::Sdg, vec![q]));
                out.push(Instruction::new(Gate::H, vec![q]));
            }
            _ => {}
        }
    }
    let ladder: Vec<Instruction<f64>> = support
        .windows(2)
        .map(|w| Instruction::new(Gate::Cnot, vec![w[0], w[1]]))
        .collect();
    out.extend(ladder.iter().cloned());
    out.push(Instruction::new(Gate::Rz(-2.0 * theta), vec![last]));
    out.extend(ladder.into_iter().rev());
    for &q in support.iter().rev() {
        match letters[q] {
            Pauli::X => out.push(Instruction::new(Gate::H, vec![q])),
            Pauli::Y => {
                out.push(Instruction::new(Gate::H, vec![q]));
                out.push(Instruction::new(Gate::S, vec![q]));
            }
            _ => {}
        }
    }
    out
}

/// Drops rotations with `|theta| < threshold`.
pub fn prune_gates(strategy: &Strategy, threshold: f64) -> Strategy {
    Strategy {
        reference: strategy.reference,
        ansatz: strategy.ansatz.iter().filter(|(_, t)| t.abs() >= threshold).cloned().collect(),
        layer: strategy.layer.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::LayerKind;

    #[test]
    fn compiled_rotation_matches_dense() {
        for word in ["YX", "YIZI", "YZYY", "XZ", "IIY", "ZZZ", "X"] {
            let p: PauliString = word.parse().unwrap();
            let n = p.n_qubits();
            let mut start = StateVector::<f64>::plus(n).unwrap();
            start.apply_gate(&Gate::Ry(0.3), &[0]).unwrap();
            start.apply_gate(&Gate::S, &[n - 1]).unwrap();
            let theta = 0.41;
            let dense = start.apply_pauli_rotation(&p, theta).unwrap();
            let mut gated = start.clone();
            for ins in compile_pauli_rotation(&p, theta) {
                gated.apply_instruction(&ins).unwrap();
            }
            for (a, b) in dense.amplitudes().iter().zip(gated.amplitudes()) {
                assert!((a - b).norm() < 1e-12, "{word}");
            }
        }
    }

    #[test]
    fn prune_removes_small_angles() {
        let layer = MeasurementLayer::new(LayerKind::Ry, 2, 2, 1).unwrap();
        let s = Strategy {
            reference: ReferenceState::AllZero,
            ansatz: vec![("YX".parse().unwrap(), std::f64::consts::FRAC_PI_4), ("ZZ".parse().unwrap(), 1e-6)],
            layer,
        };
        assert_eq!(prune_gates(&s, 1e-4).ansatz.len(), 1);
        let untouched = prune_gates(&prune_gates(&s, 1e-4), 1e-4);
        assert_eq!(untouched, prune_gates(&s, 1e-4));
    }
}
