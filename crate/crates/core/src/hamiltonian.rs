//! Game value operators, game Hamiltonians and Bell-inequality operators.
//!
//! Every operator here has the form
//! `c I + sum_k w_k U_k^dag D_k U_k`, where `U_k` is a tensor product of
//! per-player measurement unitaries (identity for players the term does not
//! involve) and `D_k` is diagonal in the computational basis. The same
//! term list yields the dense matrix, the energy at fixed state, and
//! analytic or parameter-shift gradients with respect to the angles.

use crate::error::{Error, Result};
use crate::game::{GameKind, GameSpec};
use crate::linalg::DenseOperator;
use crate::measurement::MeasurementLayer;
use crate::scalar::{cr, Real, C};
use crate::state::StateVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Beta,
    ValueHamiltonian,
    ViolationHamiltonian,
    Inequality,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Beta => "beta",
            OperatorKind::ValueHamiltonian => "value_hamiltonian",
            OperatorKind::ViolationHamiltonian => "violation_hamiltonian",
            OperatorKind::Inequality => "inequality",
        }
    }
}

/// Which Hamiltonian to derive from `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamiltonianForm {
    /// `H = -beta`
    Value,
    /// `H = I - beta`
    Violation,
}

/// One measured term `w U^dag D U`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementTerm<T: Real> {
    /// Question label per player; `None` leaves that player unmeasured.
    pub labels: Vec<Option<usize>>,
    /// Diagonal of `D` over the full register.
    pub diag: Vec<T>,
    pub weight: T,
}

/// Term-list representation of a game operator, independent of the angles.
#[derive(Clone, Debug, PartialEq)]
pub struct GameObjective<T: Real> {
    kind: OperatorKind,
    qubits_per_player: usize,
    n_players: usize,
    constant: T,
    terms: Vec<MeasurementTerm<T>>,
}

/// Dense game operator tagged with its role.
#[derive(Clone, Debug, PartialEq)]
pub struct GameOperator<T: Real> {
    pub matrix: DenseOperator<T>,
    pub kind: OperatorKind,
}

fn uniform_qubits(game: &GameSpec) -> Result<usize> {
    let q = game.qubits_per_player();
    if q.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::InvalidGame("players must have equal register sizes".into()));
    }
    Ok(q[0])
}

/// `Z_i Z_j ...` eigenvalues for the listed single-qubit players.
fn z_product<T: Real>(n_qubits: usize, qubits: &[usize]) -> Vec<T> {
    (0..1usize << n_qubits)
        .map(|b| {
            let ones = qubits.iter().filter(|&&q| (b >> (n_qubits - 1 - q)) & 1 == 1).count();
            if ones % 2 == 0 { T::one() } else { -T::one() }
        })
        .collect()
}

impl<T: Real> GameObjective<T> {
    /// Value operator `beta = sum_q p(q) U_q^dag (sum_a lambda(a|q) P_a) U_q`.
    ///
    /// Coloring games whose palette fills the register use the equal-color
    /// projector form instead of enumerating the rule.
    pub fn beta(game: &GameSpec) -> Result<Self> {
        if !game.has_rule() {
            return Err(Error::InvalidGame(format!("{} is inequality-only; it has no value operator", game.name)));
        }
        let nb = uniform_qubits(game)?;
        if let GameKind::Coloring { colors, .. } = &game.kind {
            if *colors == 1 << nb {
                return Self::coloring_beta(game, nb);
            }
        }
        Self::beta_from_rule(game)
    }

    /// Generic construction straight from the rule function.
    pub fn beta_from_rule(game: &GameSpec) -> Result<Self> {
        if !game.has_rule() {
            return Err(Error::InvalidGame(format!("{} is inequality-only; it has no value operator", game.name)));
        }
        let nb = uniform_qubits(game)?;
        let dim = 1usize << game.total_qubits();
        let terms = game
            .questions()
            .iter()
            .zip(game.q_dist())
            .map(|(q, &p)| MeasurementTerm {
                labels: q.iter().map(|&l| Some(l)).collect(),
                diag: (0..dim)
                    .map(|b| if game.wins_outcome(b, q) == Some(true) { T::one() } else { T::zero() })
                    .collect(),
                weight: T::lit(p),
            })
            .collect();
        Ok(Self { kind: OperatorKind::Beta, qubits_per_player: nb, n_players: game.n_players(), constant: T::zero(), terms })
    }

    /// `beta = (1/|Q|)[sum_v U_v^dag P_cc U_v - sum_e U_e^dag P_cc U_e + |E|]`
    /// with `|E|` counting both edge orientations.
    fn coloring_beta(game: &GameSpec, nb: usize) -> Result<Self> {
        let dim = 1usize << (2 * nb);
        let p_cc: Vec<T> = (0..dim)
            .map(|b| if b >> nb == b & ((1 << nb) - 1) { T::one() } else { T::zero() })
            .collect();
        let nq = game.questions().len();
        let w = T::one() / T::lit(nq as f64);
        let mut n_edges = 0usize;
        let terms = game
            .questions()
            .iter()
            .map(|q| {
                let vertex = q[0] == q[1];
                if !vertex {
                    n_edges += 1;
                }
                MeasurementTerm {
                    labels: vec![Some(q[0]), Some(q[1])],
                    diag: p_cc.clone(),
                    weight: if vertex { w } else { -w },
                }
            })
            .collect();
        Ok(Self {
            kind: OperatorKind::Beta,
            qubits_per_player: nb,
            n_players: 2,
            constant: T::lit(n_edges as f64) * w,
            terms,
        })
    }

    /// `I = A0 B0 + A1 B0 + A0 B1 - A1 B1` with `A_q = U_q^dag Z U_q`.
    pub fn chsh_inequality() -> Self {
        let zz = z_product(2, &[0, 1]);
        let terms = [(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0), (1, 1, -1.0)]
            .into_iter()
            .map(|(a, b, s)| MeasurementTerm { labels: vec![Some(a), Some(b)], diag: zz.clone(), weight: T::lit(s) })
            .collect();
        Self { kind: OperatorKind::Inequality, qubits_per_player: 1, n_players: 2, constant: T::zero(), terms }
    }

    /// `I = -2 S_0 + S_00 / 2 - S_01 + S_11 / 2 + 2N`, classical bound `I >= 0`.
    pub fn nps_inequality(n: usize) -> Result<Self> {
        if !(2..=crate::state::MAX_QUBITS).contains(&n) {
            return Err(Error::InvalidGame(format!("NPS size {n} unsupported")));
        }
        let mut terms = Vec::new();
        let single = |i: usize, q: usize| {
            let mut labels = vec![None; n];
            labels[i] = Some(q);
            labels
        };
        for i in 0..n {
            terms.push(MeasurementTerm { labels: single(i, 0), diag: z_product(n, &[i]), weight: T::lit(-2.0) });
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let zz = z_product(n, &[i, j]);
                let mut l01 = vec![None; n];
                l01[i] = Some(0);
                l01[j] = Some(1);
                terms.push(MeasurementTerm { labels: l01, diag: zz.clone(), weight: -T::one() });
                if i < j {
                    // Ordered pairs (i,j) and (j,i) coincide for S_00 and S_11.
                    for q in [0, 1] {
                        let mut l = vec![None; n];
                        l[i] = Some(q);
                        l[j] = Some(q);
                        terms.push(MeasurementTerm { labels: l, diag: zz.clone(), weight: T::one() });
                    }
                }
            }
        }
        Ok(Self {
            kind: OperatorKind::Inequality,
            qubits_per_player: 1,
            n_players: n,
            constant: T::lit(2.0 * n as f64),
            terms,
        })
    }

    /// Objective for the chosen Hamiltonian form. Only valid on `beta`.
    pub fn into_hamiltonian(self, form: HamiltonianForm) -> Result<Self> {
        if self.kind != OperatorKind::Beta {
            return Err(Error::WrongKind { expected: "beta", got: self.kind.name() });
        }
        let (constant, kind) = match form {
            HamiltonianForm::Value => (-self.constant, OperatorKind::ValueHamiltonian),
            HamiltonianForm::Violation => (T::one() - self.constant, OperatorKind::ViolationHamiltonian),
        };
        let terms = self
            .terms
            .into_iter()
            .map(|t| MeasurementTerm { weight: -t.weight, ..t })
            .collect();
        Ok(Self { kind, constant, terms, ..self })
    }

    /// Multiplies every term and the constant by `k`; used to turn a
    /// maximization target into a minimization one.
    pub fn scaled(mut self, k: T) -> Self {
        self.constant *= k;
        for t in &mut self.terms {
            t.weight *= k;
        }
        self
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn terms(&self) -> &[MeasurementTerm<T>] {
        &self.terms
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn qubits_per_player(&self) -> usize {
        self.qubits_per_player
    }

    pub fn total_qubits(&self) -> usize {
        self.n_players * self.qubits_per_player
    }

    fn check_layer(&self, layer: &MeasurementLayer<T>) -> Result<()> {
        if layer.n_players() != self.n_players || layer.qubits_per_player() != self.qubits_per_player {
            return Err(Error::InvalidLayer(format!(
                "layer is {} players x {} qubits, operator needs {} x {}",
                layer.n_players(),
                layer.qubits_per_player(),
                self.n_players,
                self.qubits_per_player
            )));
        }
        let needed = self
            .terms
            .iter()
            .flat_map(|t| t.labels.iter().flatten())
            .map(|&l| l + 1)
            .max()
            .unwrap_or(0);
        if layer.n_questions() < needed {
            return Err(Error::InvalidLayer(format!(
                "layer has {} question slots, operator needs {needed}",
                layer.n_questions()
            )));
        }
        Ok(())
    }

    fn local_unitaries(&self, layer: &MeasurementLayer<T>) -> Result<Vec<Vec<DenseOperator<T>>>> {
        (0..self.n_players)
            .map(|p| (0..layer.n_questions()).map(|q| layer.unitary(p, q)).collect())
            .collect()
    }

    fn term_unitary(&self, t: &MeasurementTerm<T>, local: &[Vec<DenseOperator<T>>]) -> DenseOperator<T> {
        let id = DenseOperator::identity(1 << self.qubits_per_player);
        let mut u: Option<DenseOperator<T>> = None;
        for (p, l) in t.labels.iter().enumerate() {
            let f = l.map_or(&id, |q| &local[p][q]);
            u = Some(match u {
                None => f.clone(),
                Some(acc) => acc.kron(f),
            });
        }
        u.expect("at least one player")
    }

    /// Dense operator for the given angles.
    pub fn operator(&self, layer: &MeasurementLayer<T>) -> Result<GameOperator<T>> {
        self.check_layer(layer)?;
        let local = self.local_unitaries(layer)?;
        let dim = 1usize << self.total_qubits();
        let mut m = DenseOperator::identity(dim).scale(self.constant);
        for t in &self.terms {
            let u = self.term_unitary(t, &local);
            let part = DenseOperator::conjugate_diagonal(&u, &t.diag).scale(t.weight);
            m = &m + &part;
        }
        m.symmetrize();
        Ok(GameOperator { matrix: m, kind: self.kind })
    }

    fn apply_term(&self, t: &MeasurementTerm<T>, local: &[Vec<DenseOperator<T>>], psi: &StateVector<T>) -> Result<StateVector<T>> {
        let mut chi = psi.clone();
        let nb = self.qubits_per_player;
        for (p, l) in t.labels.iter().enumerate() {
            if let Some(q) = l {
                let qubits: Vec<usize> = (p * nb..(p + 1) * nb).collect();
                chi.apply_operator_on(&local[p][*q], &qubits)?;
            }
        }
        Ok(chi)
    }

    fn check_state(&self, psi: &StateVector<T>) -> Result<()> {
        if psi.n_qubits() != self.total_qubits() {
            return Err(Error::DimensionMismatch { expected: self.total_qubits(), got: psi.n_qubits() });
        }
        Ok(())
    }

    /// `<psi|O(phi)|psi>` evaluated term by term without forming `O`.
    pub fn energy(&self, layer: &MeasurementLayer<T>, psi: &StateVector<T>) -> Result<T> {
        self.check_layer(layer)?;
        self.check_state(psi)?;
        let local = self.local_unitaries(layer)?;
        self.energy_with(&local, psi)
    }

    fn energy_with(&self, local: &[Vec<DenseOperator<T>>], psi: &StateVector<T>) -> Result<T> {
        let mut e = self.constant;
        for t in &self.terms {
            let chi = self.apply_term(t, local, psi)?;
            let s: T = chi.amplitudes().iter().zip(&t.diag).map(|(a, &d)| a.norm_sqr() * d).sum();
            e += t.weight * s;
        }
        Ok(e)
    }

    /// Per-player, per-question local unitaries for `layer`.
    pub(crate) fn checked_locals(&self, layer: &MeasurementLayer<T>, psi: &StateVector<T>) -> Result<Vec<Vec<DenseOperator<T>>>> {
        self.check_layer(layer)?;
        self.check_state(psi)?;
        self.local_unitaries(layer)
    }

    pub(crate) fn distributions_with(&self, local: &[Vec<DenseOperator<T>>], psi: &StateVector<T>) -> Result<Vec<Vec<T>>> {
        self.terms
            .iter()
            .map(|t| Ok(self.apply_term(t, local, psi)?.probabilities()))
            .collect()
    }

    /// Per-term Born distributions `|<a|U_k psi>|^2`.
    pub fn term_distributions(&self, layer: &MeasurementLayer<T>, psi: &StateVector<T>) -> Result<Vec<Vec<T>>> {
        self.check_layer(layer)?;
        self.check_state(psi)?;
        let local = self.local_unitaries(layer)?;
        self.terms
            .iter()
            .map(|t| Ok(self.apply_term(t, &local, psi)?.probabilities()))
            .collect()
    }

    /// Analytic gradient of [`GameObjective::energy`] with respect to the
    /// flat angle tensor.
    pub fn gradient(&self, layer: &MeasurementLayer<T>, psi: &StateVector<T>) -> Result<Vec<T>> {
        self.check_layer(layer)?;
        self.check_state(psi)?;
        let np = self.n_players;
        let nb = self.qubits_per_player;
        let mut local = Vec::with_capacity(np);
        let mut dlocal = Vec::with_capacity(np);
        for p in 0..np {
            let mut us = Vec::new();
            let mut ds = Vec::new();
            for q in 0..layer.n_questions() {
                let (u, d) = layer.unitary_with_derivatives(p, q)?;
                us.push(u);
                ds.push(d);
            }
            local.push(us);
            dlocal.push(ds);
        }
        let mut grad = vec![T::zero(); layer.n_params()];
        for t in &self.terms {
            let chi = self.apply_term(t, &local, psi)?;
            // dE/dphi = 2 w Re sum_a D_a conj(chi_a) (dchi)_a
            let weighted: Vec<C<T>> = chi.amplitudes().iter().zip(&t.diag).map(|(a, &d)| a.conj() * d).collect();
            for (p, l) in t.labels.iter().enumerate() {
                let Some(q) = *l else { continue };
                // State with every other measured player's unitary applied.
                let mut rest = psi.clone();
                for (p2, l2) in t.labels.iter().enumerate() {
                    if p2 == p {
                        continue;
                    }
                    if let Some(q2) = l2 {
                        let qubits: Vec<usize> = (p2 * nb..(p2 + 1) * nb).collect();
                        rest.apply_operator_on(&local[p2][*q2], &qubits)?;
                    }
                }
                let qubits: Vec<usize> = (p * nb..(p + 1) * nb).collect();
                for (idx, du) in &dlocal[p][q] {
                    let mut dchi = rest.clone();
                    dchi.apply_operator_on(du, &qubits)?;
                    let s = weighted
                        .iter()
                        .zip(dchi.amplitudes())
                        .fold(cr(T::zero()), |acc, (a, b)| acc + *a * *b);
                    grad[*idx] += T::lit(2.0) * t.weight * s.re;
                }
            }
        }
        Ok(grad)
    }

    /// Gradient by the two-point shift rule `[f(x + pi/2) - f(x - pi/2)] / 2`,
    /// applied separately to every player that reads a given angle so the
    /// rule stays exact when an angle appears twice in one circuit.
    pub fn parameter_shift_gradient(&self, layer: &MeasurementLayer<T>, psi: &StateVector<T>) -> Result<Vec<T>> {
        self.check_layer(layer)?;
        self.check_state(psi)?;
        let base = self.local_unitaries(layer)?;
        let shift = T::FRAC_PI_2();
        let mut grad = vec![T::zero(); layer.n_params()];
        for (idx, g) in grad.iter_mut().enumerate() {
            for (player, question) in readers(layer, idx)? {
                let mut acc = T::zero();
                for sign in [T::one(), -T::one()] {
                    let shifted = layer.shifted(idx, shift * sign);
                    let mut local = base.clone();
                    local[player][question] = shifted.unitary(player, question)?;
                    acc += sign * self.energy_with(&local, psi)?;
                }
                *g += acc * T::lit(0.5);
            }
        }
        Ok(grad)
    }
}

/// `(player, question)` pairs whose unitary reads tensor entry `idx`.
pub fn readers<T: Real>(layer: &MeasurementLayer<T>, idx: usize) -> Result<Vec<(usize, usize)>> {
    let [_, nq, nb, npp] = layer.shape();
    let slot = idx / (nq * nb * npp);
    let question = (idx / (nb * npp)) % nq;
    Ok((0..layer.n_players())
        .filter(|&p| layer.resolve(p).0 == slot)
        .map(|p| (p, question))
        .collect())
}

/// Measurement unitary of one player for one question.
pub fn measurement_unitary<T: Real>(layer: &MeasurementLayer<T>, player: usize, question: usize) -> Result<DenseOperator<T>> {
    layer.unitary(player, question)
}

pub fn build_beta<T: Real>(game: &GameSpec, layer: &MeasurementLayer<T>) -> Result<GameOperator<T>> {
    GameObjective::beta(game)?.operator(layer)
}

/// `H = -beta` or `H = I - beta`.
pub fn build_hamiltonian<T: Real>(beta: &GameOperator<T>, form: HamiltonianForm) -> Result<GameOperator<T>> {
    if beta.kind != OperatorKind::Beta {
        return Err(Error::WrongKind { expected: "beta", got: beta.kind.name() });
    }
    let dim = beta.matrix.dim();
    let (matrix, kind) = match form {
        HamiltonianForm::Value => (beta.matrix.scale(-T::one()), OperatorKind::ValueHamiltonian),
        HamiltonianForm::Violation => (&DenseOperator::identity(dim) - &beta.matrix, OperatorKind::ViolationHamiltonian),
    };
    Ok(GameOperator { matrix, kind })
}

pub fn chsh_inequality_operator<T: Real>(layer: &MeasurementLayer<T>) -> Result<GameOperator<T>> {
    GameObjective::chsh_inequality().operator(layer)
}

pub fn nps_inequality_operator<T: Real>(n: usize, layer: &MeasurementLayer<T>) -> Result<GameOperator<T>> {
    GameObjective::nps_inequality(n)?.operator(layer)
}

/// `sum_a U_q^dag P_a U_q` over every answer of the joint register; equals
/// the identity for any unitary layer.
pub fn povm_sum<T: Real>(layer: &MeasurementLayer<T>, question: &[usize]) -> Result<DenseOperator<T>> {
    let nb = layer.qubits_per_player();
    let mut u: Option<DenseOperator<T>> = None;
    for (p, &q) in question.iter().enumerate() {
        let f = layer.unitary(p, q)?;
        u = Some(match u {
            None => f,
            Some(acc) => acc.kron(&f),
        });
    }
    let u = u.ok_or_else(|| Error::InvalidArgument("empty question".into()))?;
    let dim = 1usize << (nb * question.len());
    let mut total = DenseOperator::zeros(dim);
    for a in 0..dim {
        let mut diag = vec![T::zero(); dim];
        diag[a] = T::one();
        total = &total + &DenseOperator::conjugate_diagonal(&u, &diag);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{chsh_game, coloring_game, Graph};
    use crate::measurement::LayerKind;

    fn random_layer(kind: LayerKind, players: usize, questions: usize, nb: usize, seed: u64) -> MeasurementLayer<f64> {
        let mut l = MeasurementLayer::new(kind, players, questions, nb).unwrap();
        let mut x = seed as f64 + 0.5;
        for p in l.phi_mut() {
            x = (x * 7.13 + 0.917).fract() * 6.0 + 1.0;
            *p = x.sin() * 3.0;
        }
        l
    }

    #[test]
    fn chsh_identity_eight_beta_minus_four() {
        let game = chsh_game();
        for seed in 0..5 {
            let l = random_layer(LayerKind::Ry, 2, 2, 1, seed);
            let beta = build_beta(&game, &l).unwrap();
            let ineq = chsh_inequality_operator(&l).unwrap();
            let rhs = &beta.matrix.scale(8.0) - &DenseOperator::identity(4).scale(4.0);
            assert!(ineq.matrix.max_abs_diff(&rhs) < 1e-12);
        }
    }

    #[test]
    fn coloring_projector_form_matches_rule_form() {
        let game = coloring_game(&Graph::cycle(5), 4, 2).unwrap();
        let mut l = MeasurementLayer::conjugate_pair(LayerKind::U3Ry, 5, 2).unwrap();
        for (i, p) in l.phi_mut().iter_mut().enumerate() {
            *p = (i as f64 * 1.7).cos();
        }
        let a = GameObjective::<f64>::beta(&game).unwrap().operator(&l).unwrap();
        let b = GameObjective::<f64>::beta_from_rule(&game).unwrap().operator(&l).unwrap();
        assert!(a.matrix.max_abs_diff(&b.matrix) < 1e-12);
    }

    #[test]
    fn energy_matches_dense_expectation() {
        let game = chsh_game();
        let l = random_layer(LayerKind::Ry, 2, 2, 1, 11);
        let psi = StateVector::from_amplitudes(vec![cr(0.3), C::new(0.1, 0.4), cr(-0.2), C::new(0.0, 0.5)]).unwrap();
        let obj = GameObjective::beta(&game).unwrap();
        let e1 = obj.energy(&l, &psi).unwrap();
        let e2 = psi.expectation(&obj.operator(&l).unwrap().matrix).unwrap();
        assert!((e1 - e2).abs() < 1e-13);
    }

    #[test]
    fn hamiltonian_forms() {
        let game = chsh_game();
        let l = random_layer(LayerKind::Ry, 2, 2, 1, 2);
        let beta = build_beta(&game, &l).unwrap();
        let hv = build_hamiltonian(&beta, HamiltonianForm::Value).unwrap();
        let hx = build_hamiltonian(&beta, HamiltonianForm::Violation).unwrap();
        assert_eq!(hv.kind, OperatorKind::ValueHamiltonian);
        assert!(build_hamiltonian(&hv, HamiltonianForm::Value).is_err());
        let obj = GameObjective::<f64>::beta(&game).unwrap().into_hamiltonian(HamiltonianForm::Violation).unwrap();
        assert!(obj.operator(&l).unwrap().matrix.max_abs_diff(&hx.matrix) < 1e-12);
    }

    #[test]
    fn zero_angle_chsh_on_00_is_two() {
        let l = MeasurementLayer::<f64>::new(LayerKind::Ry, 2, 2, 1).unwrap();
        let op = chsh_inequality_operator(&l).unwrap();
        let e = StateVector::zero(2).unwrap().expectation(&op.matrix).unwrap();
        assert!((e - 2.0).abs() < 1e-14);
    }

    #[test]
    fn nps_rejects_inequality_only_beta() {
        let g = crate::game::nps_game(3).unwrap();
        assert!(GameObjective::<f64>::beta(&g).is_err());
    }
}
