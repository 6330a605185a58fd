//! Parameterized measurement layers.
//!
//! Each player applies a question-dependent unitary to their own register
//! before a computational-basis readout. The angles live in a tensor of
//! shape `(stored players, questions, qubits, params per qubit)`; players
//! bound by a conjugate constraint reuse a partner's slice and apply the
//! entrywise conjugate of the partner's unitary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{Gate, Instruction};
use crate::linalg::DenseOperator;
use crate::scalar::{cr, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    /// One `Ry` per qubit.
    Ry,
    /// `U3` per qubit, a CNOT ladder from qubit 0, then `Ry` per qubit.
    U3Ry,
    /// `U3` per qubit only; no entangling gates inside a player.
    U3,
}

impl LayerKind {
    pub fn params_per_qubit(self) -> usize {
        match self {
            LayerKind::Ry => 1,
            LayerKind::U3Ry => 4,
            LayerKind::U3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Ry => "ry",
            LayerKind::U3Ry => "u3ry",
            LayerKind::U3 => "u3",
        }
    }
}

impl std::str::FromStr for LayerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ry" => Ok(LayerKind::Ry),
            "u3ry" => Ok(LayerKind::U3Ry),
            "u3" => Ok(LayerKind::U3),
            other => Err(Error::InvalidLayer(format!("unknown layer kind {other:?}"))),
        }
    }
}

/// Where a player's angles come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerSource {
    /// Owns slice `slot` of the tensor.
    Own(usize),
    /// Entrywise conjugate of `player`'s unitary.
    ConjugateOf(usize),
}

/// A gate in a player's local circuit with the flat tensor index of each
/// of its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGate<T: Real> {
    pub gate: Gate<T>,
    pub qubits: Vec<usize>,
    pub params: Vec<usize>,
}

/// `(flat parameter index, dU/dphi)`.
pub type Derivative<T> = (usize, DenseOperator<T>);

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementLayer<T: Real> {
    kind: LayerKind,
    qubits_per_player: usize,
    n_questions: usize,
    sources: Vec<PlayerSource>,
    n_slots: usize,
    phi: Vec<T>,
}

impl<T: Real> MeasurementLayer<T> {
    /// Zero-angle layer where every player owns their angles.
    pub fn new(kind: LayerKind, n_players: usize, n_questions: usize, qubits_per_player: usize) -> Result<Self> {
        let sources = (0..n_players).map(PlayerSource::Own).collect();
        Self::with_sources(kind, sources, n_questions, qubits_per_player)
    }

    /// Two-player layer in which player 1 conjugates player 0.
    pub fn conjugate_pair(kind: LayerKind, n_questions: usize, qubits_per_player: usize) -> Result<Self> {
        Self::with_sources(
            kind,
            vec![PlayerSource::Own(0), PlayerSource::ConjugateOf(0)],
            n_questions,
            qubits_per_player,
        )
    }

    pub fn with_sources(
        kind: LayerKind,
        sources: Vec<PlayerSource>,
        n_questions: usize,
        qubits_per_player: usize,
    ) -> Result<Self> {
        if sources.is_empty() || n_questions == 0 || qubits_per_player == 0 {
            return Err(Error::InvalidLayer("empty layer".into()));
        }
        let mut n_slots = 0;
        for (i, s) in sources.iter().enumerate() {
            match *s {
                PlayerSource::Own(slot) => {
                    if slot != n_slots {
                        return Err(Error::InvalidLayer(format!(
                            "player {i} owns slot {slot}; slots must be numbered in order"
                        )));
                    }
                    n_slots += 1;
                }
                PlayerSource::ConjugateOf(j) => {
                    if j >= sources.len() || !matches!(sources[j], PlayerSource::Own(_)) {
                        return Err(Error::InvalidLayer(format!(
                            "player {i} conjugates {j}, which does not own angles"
                        )));
                    }
                }
            }
        }
        let len = n_slots * n_questions * qubits_per_player * kind.params_per_qubit();
        Ok(Self { kind, qubits_per_player, n_questions, sources, n_slots, phi: vec![T::zero(); len] })
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn n_players(&self) -> usize {
        self.sources.len()
    }

    pub fn n_questions(&self) -> usize {
        self.n_questions
    }

    pub fn qubits_per_player(&self) -> usize {
        self.qubits_per_player
    }

    pub fn sources(&self) -> &[PlayerSource] {
        &self.sources
    }

    pub fn has_conjugates(&self) -> bool {
        self.sources.iter().any(|s| matches!(s, PlayerSource::ConjugateOf(_)))
    }

    /// `[stored players, questions, qubits, params per qubit]`.
    pub fn shape(&self) -> [usize; 4] {
        [self.n_slots, self.n_questions, self.qubits_per_player, self.kind.params_per_qubit()]
    }

    pub fn n_params(&self) -> usize {
        self.phi.len()
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn phi_mut(&mut self) -> &mut [T] {
        &mut self.phi
    }

    pub fn set_phi(&mut self, phi: &[T]) -> Result<()> {
        if phi.len() != self.phi.len() {
            return Err(Error::DimensionMismatch { expected: self.phi.len(), got: phi.len() });
        }
        self.phi.copy_from_slice(phi);
        Ok(())
    }

    pub fn param_index(&self, slot: usize, question: usize, qubit: usize, k: usize) -> usize {
        let [_, nq, nb, np] = self.shape();
        ((slot * nq + question) * nb + qubit) * np + k
    }

    fn check(&self, player: usize, question: usize) -> Result<()> {
        if player >= self.sources.len() {
            return Err(Error::InvalidLayer(format!("player {player} out of range")));
        }
        if question >= self.n_questions {
            return Err(Error::InvalidLayer(format!("question {question} out of range")));
        }
        Ok(())
    }

    /// Owning slot and whether the player's unitary is conjugated.
    pub fn resolve(&self, player: usize) -> (usize, bool) {
        match self.sources[player] {
            PlayerSource::Own(s) => (s, false),
            PlayerSource::ConjugateOf(j) => match self.sources[j] {
                PlayerSource::Own(s) => (s, true),
                PlayerSource::ConjugateOf(_) => unreachable!("validated at construction"),
            },
        }
    }

    /// Local circuit (qubits relative to the player's register) for one
    /// player and question label.
    pub fn player_gates(&self, player: usize, question: usize) -> Result<Vec<LayerGate<T>>> {
        self.check(player, question)?;
        let (slot, conj) = self.resolve(player);
        let nb = self.qubits_per_player;
        let idx = |q: usize, k: usize| self.param_index(slot, question, q, k);
        let mut out = Vec::new();
        let u3 = |q: usize| {
            let p = [idx(q, 0), idx(q, 1), idx(q, 2)];
            LayerGate {
                gate: Gate::U3(self.phi[p[0]], self.phi[p[1]], self.phi[p[2]]),
                qubits: vec![q],
                params: p.to_vec(),
            }
        };
        match self.kind {
            LayerKind::Ry => {
                for q in 0..nb {
                    let p = idx(q, 0);
                    out.push(LayerGate { gate: Gate::Ry(self.phi[p]), qubits: vec![q], params: vec![p] });
                }
            }
            LayerKind::U3 => out.extend((0..nb).map(u3)),
            LayerKind::U3Ry => {
                out.extend((0..nb).map(u3));
                for q in 0..nb.saturating_sub(1) {
                    out.push(LayerGate { gate: Gate::Cnot, qubits: vec![q, q + 1], params: vec![] });
                }
                for q in 0..nb {
                    let p = idx(q, 3);
                    out.push(LayerGate { gate: Gate::Ry(self.phi[p]), qubits: vec![q], params: vec![p] });
                }
            }
        }
        if conj {
            for g in &mut out {
                g.gate = g.gate.conj();
            }
        }
        Ok(out)
    }

    /// Gate-level instructions on the full register, offset to the player's
    /// first qubit.
    pub fn player_instructions(&self, player: usize, question: usize, offset: usize) -> Result<Vec<Instruction<T>>> {
        Ok(self
            .player_gates(player, question)?
            .into_iter()
            .map(|g| Instruction::new(g.gate, g.qubits).offset(offset))
            .collect())
    }

    /// Dense unitary on the player's register.
    pub fn unitary(&self, player: usize, question: usize) -> Result<DenseOperator<T>> {
        let gates = self.player_gates(player, question)?;
        let nb = self.qubits_per_player;
        let mut u = DenseOperator::identity(1 << nb);
        for g in &gates {
            u = embed(&g.gate.matrix(), &g.qubits, nb).matmul(&u);
        }
        Ok(u)
    }

    /// Unitary plus a [`Derivative`] for each gate
    /// parameter it depends on. The conjugated partner's derivative is the
    /// conjugate of the owner's, which [`Gate::conj`] already encodes
    /// except for the sign of `U3` phase angles, handled here.
    pub fn unitary_with_derivatives(
        &self,
        player: usize,
        question: usize,
    ) -> Result<(DenseOperator<T>, Vec<Derivative<T>>)> {
        let (_, conj) = self.resolve(player);
        let gates = self.player_gates(player, question)?;
        let nb = self.qubits_per_player;
        let dim = 1 << nb;
        let mats: Vec<DenseOperator<T>> = gates.iter().map(|g| embed(&g.gate.matrix(), &g.qubits, nb)).collect();
        // prefix[i] = G_{i-1} ... G_0 ; suffix[i] = G_last ... G_{i+1}
        let mut prefix = Vec::with_capacity(mats.len() + 1);
        prefix.push(DenseOperator::identity(dim));
        for m in &mats {
            let next = m.matmul(prefix.last().unwrap());
            prefix.push(next);
        }
        let mut suffix = vec![DenseOperator::identity(dim); mats.len()];
        for i in (0..mats.len().saturating_sub(1)).rev() {
            suffix[i] = suffix[i + 1].matmul(&mats[i + 1]);
        }
        let mut derivs = Vec::new();
        for (i, g) in gates.iter().enumerate() {
            for (k, &p) in g.params.iter().enumerate() {
                let d = g.gate.derivative(k).expect("parameterized gate has a derivative");
                // The stored angle enters a conjugated U3 negated in slots 1 and 2.
                let sign = if conj && matches!(g.gate, Gate::U3(..)) && k > 0 { -T::one() } else { T::one() };
                let dm = embed(&d, &g.qubits, nb).scale(sign);
                derivs.push((p, suffix[i].matmul(&dm).matmul(&prefix[i])));
            }
        }
        Ok((prefix.pop().unwrap(), derivs))
    }

    /// Copy with one tensor entry shifted, used for parameter-shift rules.
    pub fn shifted(&self, index: usize, delta: T) -> Self {
        let mut out = self.clone();
        out.phi[index] += delta;
        out
    }
}

/// Embeds a gate matrix acting on `qubits` into a `2^n` register.
pub(crate) fn embed<T: Real>(m: &[C<T>], qubits: &[usize], n: usize) -> DenseOperator<T> {
    let dim = 1usize << n;
    let k = qubits.len();
    let bd = 1usize << k;
    let mut data = vec![cr(T::zero()); dim * dim];
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    let local = |idx: usize| qubits.iter().fold(0usize, |acc, &q| (acc << 1) | bit(idx, q));
    let mask: usize = qubits.iter().fold(0, |acc, &q| acc | (1 << (n - 1 - q)));
    for row in 0..dim {
        for col in 0..dim {
            if row & !mask != col & !mask {
                continue;
            }
            data[row * dim + col] = m[local(row) * bd + local(col)];
        }
    }
    DenseOperator::from_rows(dim, data).expect("square by construction")
}
