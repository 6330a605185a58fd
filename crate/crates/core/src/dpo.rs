//! Dual-phase optimization.
//!
//! Each outer iteration builds the game Hamiltonian for the current
//! measurement angles, grows and re-optimizes the shared state with an
//! adaptive Pauli-rotation ansatz, then tunes the angles with BFGS at fixed
//! state. Both phases warm-start, so the recorded energies never increase.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{GameKind, GameSpec};
use crate::hamiltonian::{readers, GameObjective, HamiltonianForm};
use crate::linalg::DenseOperator;
use crate::measurement::{LayerKind, MeasurementLayer};
use crate::optim::{self, inf_norm, BfgsOptions};
use crate::pauli::PauliString;
use crate::scalar::C;
use crate::state::{cumulative, draw, StateVector};
use crate::strategy::{ReferenceState, Strategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientMethod {
    Analytic,
    ParameterShift,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpoConfig {
    /// ADAPT stops once the largest pool gradient is below this.
    pub eps_theta: f64,
    /// BFGS stops once the largest gradient component is below this.
    pub eps_phi: f64,
    /// Outer loop stops when an iteration lowers the energy by less than this.
    pub delta_e: f64,
    pub max_outer_iters: usize,
    pub max_adapt_ops: usize,
    pub max_bfgs_iters: usize,
    pub reference: ReferenceState,
    pub rng_seed: u64,
    /// Bind player 1's measurements to the conjugate of player 0's.
    pub conjugate: bool,
    /// Flat angle indices held at zero.
    pub pinned_phi: Vec<usize>,
    pub form: HamiltonianForm,
    pub gradient: GradientMethod,
}

impl Default for DpoConfig {
    fn default() -> Self {
        Self::chsh()
    }
}

impl DpoConfig {
    /// CHSH settings: `eps_theta = 1e-3`, `eps_phi = 1e-5`, `delta_e = 1e-3`,
    /// with Alice's first angle pinned to zero.
    pub fn chsh() -> Self {
        Self {
            eps_theta: 1e-3,
            eps_phi: 1e-5,
            delta_e: 1e-3,
            max_outer_iters: 100,
            max_adapt_ops: 100,
            max_bfgs_iters: 1000,
            reference: ReferenceState::AllZero,
            rng_seed: 0,
            conjugate: false,
            pinned_phi: vec![0],
            form: HamiltonianForm::Value,
            gradient: GradientMethod::Analytic,
        }
    }

    /// Same tolerances as CHSH, without the pinned angle.
    pub fn nps() -> Self {
        Self { pinned_phi: Vec::new(), ..Self::chsh() }
    }

    /// Coloring-game settings: `eps_theta = 1e-6`, `eps_phi = 1e-5`,
    /// `delta_e = 1e-6`, `|+>` reference and conjugated measurements.
    pub fn coloring() -> Self {
        Self {
            eps_theta: 1e-6,
            eps_phi: 1e-5,
            delta_e: 1e-6,
            reference: ReferenceState::AllPlus,
            conjugate: true,
            ..Self::nps()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_theta > 0.0 && self.eps_phi > 0.0 && self.delta_e > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidArgument("max_outer_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub seed: u64,
    /// Energy after each outer iteration.
    pub energies: Vec<f64>,
    pub strategy: Strategy,
    pub final_energy: f64,
    pub converged: bool,
    pub adapt_ops_used: usize,
}

/// What DPO minimizes for a game, plus the layer shape it needs.
#[derive(Clone, Debug)]
pub struct Problem {
    pub objective: GameObjective<f64>,
    pub template: MeasurementLayer<f64>,
    pub pool: Vec<PauliString>,
}

impl Problem {
    /// Rule-based games minimize the chosen Hamiltonian of `beta`;
    /// inequality-only games minimize their inequality operator.
    pub fn new(game: &GameSpec, kind: LayerKind, config: &DpoConfig) -> Result<Self> {
        let objective = match &game.kind {
            GameKind::Nps { n } => GameObjective::nps_inequality(*n)?,
            _ => GameObjective::beta(game)?.into_hamiltonian(config.form)?,
        };
        let nb = game.qubits_per_player()[0];
        let nq = game.max_labels();
        let template = if config.conjugate {
            if game.n_players() != 2 {
                return Err(Error::InvalidLayer("conjugate constraint needs two players".into()));
            }
            MeasurementLayer::conjugate_pair(kind, nq, nb)?
        } else {
            MeasurementLayer::new(kind, game.n_players(), nq, nb)?
        };
        if let Some(&bad) = config.pinned_phi.iter().find(|&&i| i >= template.n_params()) {
            return Err(Error::InvalidArgument(format!("pinned index {bad} out of range")));
        }
        Ok(Self { objective, template, pool: PauliString::pool(game.total_qubits()) })
    }
}

/// `|<s|[H, P]|s>|` for every pool word, which equals `|dE/dtheta|` at
/// `theta = 0` for an appended `e^{i theta P}`.
pub fn pool_gradients(h: &DenseOperator<f64>, s: &StateVector<f64>, pool: &[PauliString]) -> Result<Vec<f64>> {
    if h.dim() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), got: h.dim() });
    }
    let hs = h.apply(s.amplitudes());
    let mut ps = vec![C::new(0.0, 0.0); s.dim()];
    pool.iter()
        .map(|p| {
            if p.n_qubits() != s.n_qubits() {
                return Err(Error::DimensionMismatch { expected: s.n_qubits(), got: p.n_qubits() });
            }
            p.apply_into(s.amplitudes(), &mut ps);
            let z = hs.iter().zip(&ps).fold(C::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b);
            Ok(2.0 * z.im.abs())
        })
        .collect()
}

fn ansatz_state(reference: &StateVector<f64>, ops: &[PauliString], thetas: &[f64]) -> Result<StateVector<f64>> {
    let mut s = reference.clone();
    for (p, &t) in ops.iter().zip(thetas) {
        s.rotate_pauli(p, t)?;
    }
    Ok(s)
}

/// Energy and gradient of `<psi(theta)|H|psi(theta)>` by a reverse sweep.
pub fn ansatz_energy_gradient(
    h: &DenseOperator<f64>,
    reference: &StateVector<f64>,
    ops: &[PauliString],
    thetas: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let mut states = Vec::with_capacity(ops.len() + 1);
    states.push(reference.clone());
    for (p, &t) in ops.iter().zip(thetas) {
        let next = states.last().unwrap().apply_pauli_rotation(p, t)?;
        states.push(next);
    }
    let last = states.last().unwrap();
    let hpsi = h.apply(last.amplitudes());
    let energy = last
        .amplitudes()
        .iter()
        .zip(&hpsi)
        .map(|(a, b)| (a.conj() * b).re)
        .sum::<f64>();
    // Adjoint vector H|psi>, pulled back through each rotation.
    let mut lambda_raw = hpsi;
    let mut grad = vec![0.0; ops.len()];
    let mut pbuf = vec![C::new(0.0, 0.0); reference.dim()];
    for j in (0..ops.len()).rev() {
        ops[j].apply_into(states[j + 1].amplitudes(), &mut pbuf);
        // d/dtheta = 2 Re <lambda| i P psi_j>
        let z = lambda_raw.iter().zip(&pbuf).fold(C::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b);
        grad[j] = -2.0 * z.im;
        // lambda <- e^{-i theta P} lambda
        let (s, c) = thetas[j].sin_cos();
        ops[j].apply_into(&lambda_raw, &mut pbuf);
        for (l, pl) in lambda_raw.iter_mut().zip(&pbuf) {
            *l = *l * c - C::new(0.0, s) * pl;
        }
    }
    Ok((energy, grad))
}

#[derive(Clone, Debug)]
pub struct AdaptOutcome {
    pub ops: Vec<PauliString>,
    pub thetas: Vec<f64>,
    pub energy: f64,
    /// Energy after the warm start and after each appended operator.
    pub energies: Vec<f64>,
    /// True when the pool gradient dropped below `eps_theta`.
    pub converged: bool,
}

/// ADAPT-VQE from an existing ansatz (possibly empty): re-optimize, then
/// repeatedly append the largest-gradient pool word (ties to the lowest
/// index) at angle zero and re-optimize every angle.
pub fn adapt_vqe(
    h: &DenseOperator<f64>,
    reference: &StateVector<f64>,
    pool: &[PauliString],
    mut ops: Vec<PauliString>,
    mut thetas: Vec<f64>,
    config: &DpoConfig,
) -> Result<AdaptOutcome> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian(h.hermitian_deviation()));
    }
    if pool.is_empty() {
        return Err(Error::InvalidArgument("empty operator pool".into()));
    }
    // The appended angle starts with gradient >= eps_theta, so the inner
    // tolerance must sit below it or the new angle never moves.
    let tol = 0.1 * config.eps_theta.min(config.eps_phi);
    let bfgs = BfgsOptions { grad_tol: tol, max_iters: config.max_bfgs_iters, ..Default::default() };
    let optimize = |ops: &[PauliString], thetas: &[f64]| -> Result<(Vec<f64>, f64)> {
        let r = optim::minimize(|t| ansatz_energy_gradient(h, reference, ops, t), thetas, &bfgs)?;
        Ok((r.x, r.f))
    };
    let (t, mut energy) = if ops.is_empty() {
        (Vec::new(), ansatz_energy_gradient(h, reference, &ops, &thetas)?.0)
    } else {
        optimize(&ops, &thetas)?
    };
    thetas = t;
    let mut energies = vec![energy];
    let mut converged = false;
    loop {
        let state = ansatz_state(reference, &ops, &thetas)?;
        let grads = pool_gradients(h, &state, pool)?;
        let (best, gmax) = grads
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc });
        if gmax < config.eps_theta {
            converged = true;
            break;
        }
        if ops.len() >= config.max_adapt_ops {
            break;
        }
        ops.push(pool[best].clone());
        thetas.push(0.0);
        let (t, e) = optimize(&ops, &thetas)?;
        let stalled = !(e < energy);
        thetas = t;
        energy = energy.min(e);
        energies.push(energy);
        if stalled {
            break;
        }
    }
    Ok(AdaptOutcome { ops, thetas, energy, energies, converged })
}

fn free_indices(n: usize, pinned: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !pinned.contains(i)).collect()
}

/// Gradient of the objective with respect to the angles.
pub fn phi_gradient(
    objective: &GameObjective<f64>,
    layer: &MeasurementLayer<f64>,
    psi: &StateVector<f64>,
    method: GradientMethod,
) -> Result<Vec<f64>> {
    match method {
        GradientMethod::Analytic => objective.gradient(layer, psi),
        GradientMethod::ParameterShift => objective.parameter_shift_gradient(layer, psi),
    }
}

/// BFGS over the free angles at fixed state. Returns the updated layer,
/// the final energy and the optimizer report.
pub fn optimize_phi(
    objective: &GameObjective<f64>,
    layer: &MeasurementLayer<f64>,
    psi: &StateVector<f64>,
    config: &DpoConfig,
) -> Result<(MeasurementLayer<f64>, f64, optim::BfgsResult)> {
    let free = free_indices(layer.n_params(), &config.pinned_phi);
    let mut work = layer.clone();
    let x0: Vec<f64> = free.iter().map(|&i| layer.phi()[i]).collect();
    let bfgs = BfgsOptions { grad_tol: config.eps_phi, max_iters: config.max_bfgs_iters, ..Default::default() };
    let result = optim::minimize(
        |x| {
            for (&i, &v) in free.iter().zip(x) {
                work.phi_mut()[i] = v;
            }
            let e = objective.energy(&work, psi)?;
            if !e.is_finite() {
                return Err(Error::NonFinite);
            }
            let g = phi_gradient(objective, &work, psi, config.gradient)?;
            Ok((e, free.iter().map(|&i| g[i]).collect()))
        },
        &x0,
        &bfgs,
    )?;
    let mut out = layer.clone();
    for (&i, &v) in free.iter().zip(&result.x) {
        out.phi_mut()[i] = v;
    }
    Ok((out, result.f, result))
}

/// Runs one DPO trial with angles drawn uniformly from `[-pi, pi)`.
pub fn dpo(game: &GameSpec, kind: LayerKind, config: &DpoConfig) -> Result<TrialResult> {
    config.validate()?;
    let problem = Problem::new(game, kind, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut layer = problem.template.clone();
    for (i, p) in layer.phi_mut().iter_mut().enumerate() {
        *p = if config.pinned_phi.contains(&i) { 0.0 } else { rng.gen_range(-PI..PI) };
    }
    dpo_from(&problem, layer, config)
}

/// DPO from given starting angles.
pub fn dpo_from(problem: &Problem, mut layer: MeasurementLayer<f64>, config: &DpoConfig) -> Result<TrialResult> {
    config.validate()?;
    let n = problem.objective.total_qubits();
    let reference = config.reference.prepare(n)?;
    let mut ops: Vec<PauliString> = Vec::new();
    let mut thetas: Vec<f64> = Vec::new();
    let mut energies = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_outer_iters {
        let h = problem.objective.operator(&layer)?;
        // Fresh ground-state search for the current angles; the previous
        // ansatz is only continued when the fresh one ends higher.
        let mut adapt = adapt_vqe(&h.matrix, &reference, &problem.pool, Vec::new(), Vec::new(), config)?;
        if !ops.is_empty() {
            let (warm_e, _) = ansatz_energy_gradient(&h.matrix, &reference, &ops, &thetas)?;
            if adapt.energy > warm_e {
                adapt = adapt_vqe(&h.matrix, &reference, &problem.pool, ops, thetas, config)?;
            }
        }
        ops = adapt.ops;
        thetas = adapt.thetas;
        let psi = ansatz_state(&reference, &ops, &thetas)?;
        let (new_layer, energy, _) = optimize_phi(&problem.objective, &layer, &psi, config)?;
        layer = new_layer;
        let prev = energies.last().copied();
        energies.push(energy);
        if let Some(prev) = prev {
            if prev - energy < config.delta_e {
                converged = true;
                break;
            }
        }
    }
    let final_energy = *energies.last().expect("at least one outer iteration");
    let adapt_ops_used = ops.len();
    Ok(TrialResult {
        seed: config.rng_seed,
        energies,
        strategy: Strategy { reference: config.reference, ansatz: ops.into_iter().zip(thetas).collect(), layer },
        final_energy,
        converged,
        adapt_ops_used,
    })
}

/// Joint BFGS over the ansatz angles and the free measurement angles of a
/// finished strategy, with the operator list held fixed.
pub fn refine(problem: &Problem, strategy: &Strategy, config: &DpoConfig, grad_tol: f64) -> Result<(Strategy, f64)> {
    let n = problem.objective.total_qubits();
    if strategy.n_qubits() != n || strategy.layer.shape() != problem.template.shape() {
        return Err(Error::InvalidLayer("strategy does not match the problem".into()));
    }
    let reference = strategy.reference.prepare(n)?;
    let ops: Vec<PauliString> = strategy.ansatz.iter().map(|(p, _)| p.clone()).collect();
    let free = free_indices(strategy.layer.n_params(), &config.pinned_phi);
    let k = ops.len();
    let mut x0: Vec<f64> = strategy.ansatz.iter().map(|(_, t)| *t).collect();
    x0.extend(free.iter().map(|&i| strategy.layer.phi()[i]));
    let mut work = strategy.layer.clone();
    let opts = BfgsOptions { grad_tol, max_iters: config.max_bfgs_iters, ..Default::default() };
    let r = optim::minimize(
        |x| {
            for (&i, &v) in free.iter().zip(&x[k..]) {
                work.phi_mut()[i] = v;
            }
            let h = problem.objective.operator(&work)?;
            let (e, mut g) = ansatz_energy_gradient(&h.matrix, &reference, &ops, &x[..k])?;
            let psi = ansatz_state(&reference, &ops, &x[..k])?;
            let gphi = phi_gradient(&problem.objective, &work, &psi, config.gradient)?;
            g.extend(free.iter().map(|&i| gphi[i]));
            Ok((e, g))
        },
        &x0,
        &opts,
    )?;
    let mut layer = strategy.layer.clone();
    for (&i, &v) in free.iter().zip(&r.x[k..]) {
        layer.phi_mut()[i] = v;
    }
    let ansatz = ops.into_iter().zip(r.x[..k].iter().copied()).collect();
    Ok((Strategy { reference: strategy.reference, ansatz, layer }, r.f))
}

/// Seed for trial `index` derived from a base seed (SplitMix64 step).
pub fn trial_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent trials, run in parallel, each seeded from `config.rng_seed`.
pub fn run_trials(game: &GameSpec, kind: LayerKind, config: &DpoConfig, n_trials: usize) -> Result<Vec<TrialResult>> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be >= 1".into()));
    }
    (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let cfg = DpoConfig { rng_seed: trial_seed(config.rng_seed, i), ..config.clone() };
            dpo(game, kind, &cfg)
        })
        .collect()
}

/// Unbiased shot estimate of `c + sum_k w_k <U_k^dag D_k U_k>`: each shot
/// picks a term with probability `|w_k| / W`, samples an outcome `a` and
/// scores `sign(w_k) W D_k[a]`.
fn sampled_energy<R: Rng>(
    objective: &GameObjective<f64>,
    dists: &[Vec<f64>],
    shots: usize,
    rng: &mut R,
) -> f64 {
    let terms = objective.terms();
    let abs_w: Vec<f64> = terms.iter().map(|t| t.weight.abs()).collect();
    let total: f64 = abs_w.iter().sum();
    if total == 0.0 {
        return objective.constant();
    }
    let term_cdf = cumulative(&abs_w);
    let cdfs: Vec<Vec<f64>> = dists.iter().map(|d| cumulative(d)).collect();
    let mut acc = 0.0;
    for _ in 0..shots {
        let k = draw(&term_cdf, rng);
        let a = draw(&cdfs[k], rng);
        acc += terms[k].weight.signum() * total * terms[k].diag[a];
    }
    objective.constant() + acc / shots as f64
}

/// Parameter-shift gradient with every shifted expectation estimated from
/// `shots` samples. Returns the estimate and the number of circuit
/// executions, `2 x shots` per (angle, reading player) pair, i.e.
/// `2 n_params shots` when no angle is shared between players.
pub fn shot_gradient(
    objective: &GameObjective<f64>,
    layer: &MeasurementLayer<f64>,
    psi: &StateVector<f64>,
    shots: usize,
    rng_seed: u64,
) -> Result<(Vec<f64>, usize)> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    let base = objective.checked_locals(layer, psi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut grad = vec![0.0; layer.n_params()];
    let mut executions = 0usize;
    for (idx, g) in grad.iter_mut().enumerate() {
        for (player, question) in readers(layer, idx)? {
            let mut diff = 0.0;
            for sign in [1.0, -1.0] {
                let shifted = layer.shifted(idx, sign * std::f64::consts::FRAC_PI_2);
                let mut local = base.clone();
                local[player][question] = shifted.unitary(player, question)?;
                let dists = objective.distributions_with(&local, psi)?;
                diff += sign * sampled_energy(objective, &dists, shots, &mut rng);
                executions += shots;
            }
            *g += 0.5 * diff;
        }
    }
    Ok((grad, executions))
}

/// Largest gradient component; exposed for convergence reporting.
pub fn max_abs(v: &[f64]) -> f64 {
    inf_norm(v)
}
