//! Win-rate evaluation of fixed strategies: exact, sampled, and under a
//! two-qubit Pauli noise model applied after every CNOT.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dpo::trial_seed;
use crate::error::{Error, Result};
use crate::game::{classical_brute_force, min_monochromatic_edges, GameKind, GameSpec, DEFAULT_BRUTE_FORCE_BUDGET};
use crate::gates::{Gate, Instruction};
use crate::hamiltonian::GameObjective;
use crate::pauli::{Pauli, PauliString};
use crate::state::{cumulative, draw, StateVector};
use crate::strategy::Strategy;

/// Node cap for the exact coloring search behind [`classical_threshold`].
pub const DEFAULT_COLORING_NODE_BUDGET: u64 = 50_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuestionRate {
    pub question: String,
    pub category: Option<String>,
    pub win_rate: f64,
    /// Zero for exact evaluation.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub game: String,
    pub per_question: Vec<QuestionRate>,
    /// `sum_q p(q) win_rate(q)`.
    pub overall_value: f64,
    pub overall_stderr: f64,
    /// Bell-inequality value where the game defines one.
    pub inequality_value: Option<f64>,
    /// `None` for exact evaluation.
    pub shots: Option<usize>,
    pub vertex_rate: Option<f64>,
    pub vertex_stderr: Option<f64>,
    pub edge_rate: Option<f64>,
    pub edge_stderr: Option<f64>,
}

/// Two-qubit Pauli channel applied after each CNOT: with probability
/// `p_err` one of `paulis` (chosen uniformly) hits the CNOT's qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub p_err: f64,
    pub paulis: Vec<PauliString>,
}

impl NoiseModel {
    /// The 15 non-identity two-qubit Paulis, uniformly weighted.
    pub fn uniform(p_err: f64) -> Result<Self> {
        Self::with_paulis(p_err, PauliString::pool(2))
    }

    pub fn with_paulis(p_err: f64, paulis: Vec<PauliString>) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_err) {
            return Err(Error::InvalidArgument(format!("p_err {p_err} outside [0, 1]")));
        }
        if paulis.is_empty() || paulis.iter().any(|p| p.n_qubits() != 2) {
            return Err(Error::InvalidArgument("noise channel needs two-qubit Paulis".into()));
        }
        Ok(Self { p_err, paulis })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseOptions {
    pub model: NoiseModel,
    pub shots: usize,
    pub seed: u64,
    /// Run the shared-state preparation as gates too, so its CNOTs are noisy.
    pub compile_ansatz: bool,
}

fn check_playable(game: &GameSpec, strategy: &Strategy) -> Result<()> {
    if !game.has_rule() {
        return Err(Error::InvalidGame(format!("{} has no rule function to score", game.name)));
    }
    let layer = &strategy.layer;
    if layer.n_players() != game.n_players() {
        return Err(Error::DimensionMismatch { expected: game.n_players(), got: layer.n_players() });
    }
    if game.qubits_per_player().iter().any(|&q| q != layer.qubits_per_player()) {
        return Err(Error::InvalidLayer("layer register size differs from the game's".into()));
    }
    if layer.n_questions() < game.max_labels() {
        return Err(Error::InvalidLayer(format!(
            "layer covers {} questions, game needs {}",
            layer.n_questions(),
            game.max_labels()
        )));
    }
    Ok(())
}

/// Outcome distribution for one joint question, simulated gate by gate.
fn question_distribution(strategy: &Strategy, psi: &StateVector<f64>, q: &[usize]) -> Result<Vec<f64>> {
    let mut s = psi.clone();
    for ins in strategy.measurement_instructions(q)? {
        s.apply_instruction(&ins)?;
    }
    Ok(s.probabilities())
}

fn win_mask(game: &GameSpec, q: &[usize]) -> Vec<bool> {
    (0..1usize << game.total_qubits()).map(|b| game.wins_outcome(b, q) == Some(true)).collect()
}

/// Exact per-question win rates.
pub fn evaluate_exact(game: &GameSpec, strategy: &Strategy) -> Result<EvaluationReport> {
    check_playable(game, strategy)?;
    let psi = strategy.prepare_state()?;
    let rates = game
        .questions()
        .iter()
        .map(|q| {
            let probs = question_distribution(strategy, &psi, q)?;
            Ok(probs.iter().zip(win_mask(game, q)).filter(|(_, w)| *w).map(|(p, _)| p).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    let errs = vec![0.0; rates.len()];
    assemble(game, strategy, rates, errs, None)
}

/// Win rates estimated from `shots` measurements per question.
pub fn evaluate_sampled(game: &GameSpec, strategy: &Strategy, shots: usize, seed: u64) -> Result<EvaluationReport> {
    check_playable(game, strategy)?;
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    let psi = strategy.prepare_state()?;
    let rates = game
        .questions()
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let probs = question_distribution(strategy, &psi, q)?;
            let mask = win_mask(game, q);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, i));
            let wins = psi_samples(&probs, shots, &mut rng).filter(|&b| mask[b]).count();
            Ok(wins as f64 / shots as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let errs = binomial_errors(&rates, shots);
    assemble(game, strategy, rates, errs, Some(shots))
}

fn psi_samples<'a, R: Rng>(probs: &[f64], shots: usize, rng: &'a mut R) -> impl Iterator<Item = usize> + 'a {
    let cdf = cumulative(probs);
    (0..shots).map(move |_| draw(&cdf, rng))
}

fn binomial_errors(rates: &[f64], shots: usize) -> Vec<f64> {
    rates.iter().map(|p| (p * (1.0 - p) / shots as f64).sqrt()).collect()
}

/// Applies `ins`, then the noise channel if it is a CNOT.
fn noisy_step<R: Rng>(s: &mut StateVector<f64>, ins: &Instruction<f64>, model: &NoiseModel, rng: &mut R) -> Result<()> {
    s.apply_instruction(ins)?;
    if matches!(ins.gate, Gate::Cnot) && model.p_err > 0.0 && rng.gen::<f64>() < model.p_err {
        let p = &model.paulis[rng.gen_range(0..model.paulis.len())];
        for (&q, &letter) in ins.qubits.iter().zip(p.letters()) {
            if letter != Pauli::I {
                s.apply_gate(&Gate::Pauli(letter), &[q])?;
            }
        }
    }
    Ok(())
}

/// Monte Carlo trajectories: every shot re-runs the circuit with fresh
/// noise draws and records one measurement outcome.
pub fn evaluate_noisy(game: &GameSpec, strategy: &Strategy, opts: &NoiseOptions) -> Result<EvaluationReport> {
    check_playable(game, strategy)?;
    if opts.shots == 0 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    let n = strategy.n_qubits();
    let (start, prep) = if opts.compile_ansatz {
        (StateVector::zero(n)?, strategy.preparation_instructions())
    } else {
        (strategy.prepare_state()?, Vec::new())
    };
    let rates = game
        .questions()
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let meas = strategy.measurement_instructions(q)?;
            let mask = win_mask(game, q);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(opts.seed, i));
            let mut wins = 0usize;
            for _ in 0..opts.shots {
                let mut s = start.clone();
                for ins in prep.iter().chain(&meas) {
                    noisy_step(&mut s, ins, &opts.model, &mut rng)?;
                }
                let cdf = cumulative(&s.probabilities());
                if mask[draw(&cdf, &mut rng)] {
                    wins += 1;
                }
            }
            Ok(wins as f64 / opts.shots as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let errs = binomial_errors(&rates, opts.shots);
    assemble(game, strategy, rates, errs, Some(opts.shots))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub p_err: f64,
    pub vertex_rate: f64,
    pub vertex_stderr: f64,
    pub edge_rate: f64,
    pub edge_stderr: f64,
    pub overall_value: f64,
    pub overall_stderr: f64,
}

/// Noisy evaluation of a coloring strategy at each error rate.
pub fn noise_sweep(
    game: &GameSpec,
    strategy: &Strategy,
    p_errs: &[f64],
    shots: usize,
    seed: u64,
    compile_ansatz: bool,
) -> Result<Vec<SweepRow>> {
    if !matches!(game.kind, GameKind::Coloring { .. }) {
        return Err(Error::WrongKind { expected: "coloring", got: kind_name(&game.kind) });
    }
    p_errs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let opts = NoiseOptions { model: NoiseModel::uniform(p)?, shots, seed: trial_seed(seed, i), compile_ansatz };
            let r = evaluate_noisy(game, strategy, &opts)?;
            Ok(SweepRow {
                p_err: p,
                vertex_rate: r.vertex_rate.unwrap_or(f64::NAN),
                vertex_stderr: r.vertex_stderr.unwrap_or(f64::NAN),
                edge_rate: r.edge_rate.unwrap_or(f64::NAN),
                edge_stderr: r.edge_stderr.unwrap_or(f64::NAN),
                overall_value: r.overall_value,
                overall_stderr: r.overall_stderr,
            })
        })
        .collect()
}

pub fn kind_name(kind: &GameKind) -> &'static str {
    match kind {
        GameKind::Chsh => "chsh",
        GameKind::Nps { .. } => "nps",
        GameKind::Coloring { .. } => "coloring",
        GameKind::Custom => "custom",
    }
}

fn assemble(
    game: &GameSpec,
    strategy: &Strategy,
    rates: Vec<f64>,
    errs: Vec<f64>,
    shots: Option<usize>,
) -> Result<EvaluationReport> {
    let dist = game.q_dist();
    let overall_value = rates.iter().zip(dist).map(|(r, p)| r * p).sum();
    let overall_stderr = errs.iter().zip(dist).map(|(e, p)| (e * p).powi(2)).sum::<f64>().sqrt();
    let per_question: Vec<QuestionRate> = rates
        .iter()
        .zip(&errs)
        .enumerate()
        .map(|(i, (&r, &e))| QuestionRate {
            question: game.question_label(i),
            category: game.question_category(i).map(str::to_string),
            win_rate: r,
            stderr: e,
        })
        .collect();
    let category = |name: &str| -> (Option<f64>, Option<f64>) {
        let (mut w, mut v, mut var) = (0.0, 0.0, 0.0);
        for (i, q) in per_question.iter().enumerate() {
            if q.category.as_deref() == Some(name) {
                w += dist[i];
                v += dist[i] * q.win_rate;
                var += (dist[i] * q.stderr).powi(2);
            }
        }
        if w > 0.0 { (Some(v / w), Some(var.sqrt() / w)) } else { (None, None) }
    };
    let (vertex_rate, vertex_stderr) = category("vertex");
    let (edge_rate, edge_stderr) = category("edge");
    Ok(EvaluationReport {
        game: game.name.clone(),
        per_question,
        overall_value,
        overall_stderr,
        inequality_value: inequality_value(game, strategy)?,
        shots,
        vertex_rate,
        vertex_stderr,
        edge_rate,
        edge_stderr,
    })
}

/// Exact Bell-inequality value for CHSH and NPS strategies.
pub fn inequality_value(game: &GameSpec, strategy: &Strategy) -> Result<Option<f64>> {
    let objective = match game.kind {
        GameKind::Chsh => GameObjective::chsh_inequality(),
        GameKind::Nps { n } => GameObjective::nps_inequality(n)?,
        _ => return Ok(None),
    };
    let psi = strategy.prepare_state()?;
    objective.energy(&strategy.layer, &psi).map(Some)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalBaseline {
    pub game: String,
    /// Best deterministic game value; `None` when enumeration is over budget
    /// or the game has no rule.
    pub value: Option<f64>,
    /// Coloring games: best edge win rate with every vertex question won,
    /// `1 - (fewest monochromatic edges) / |E|`.
    pub edge_rate: Option<f64>,
    pub monochromatic_edges: Option<usize>,
    /// Inequality bound for CHSH and NPS.
    pub inequality_bound: Option<f64>,
}

/// Classical reference numbers for a game.
pub fn classical_threshold(game: &GameSpec) -> Result<ClassicalBaseline> {
    match &game.kind {
        GameKind::Coloring { graph, colors } => {
            let (mono, _) = min_monochromatic_edges(graph, *colors, DEFAULT_COLORING_NODE_BUDGET)?;
            let n_edges = graph.edges().len();
            let edge_rate = if n_edges == 0 { 1.0 } else { 1.0 - mono as f64 / n_edges as f64 };
            let value = match classical_brute_force(game, DEFAULT_BRUTE_FORCE_BUDGET) {
                Ok(b) => Some(b.best_value),
                Err(Error::BudgetExceeded { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(ClassicalBaseline {
                game: game.name.clone(),
                value,
                edge_rate: Some(edge_rate),
                monochromatic_edges: Some(mono),
                inequality_bound: None,
            })
        }
        GameKind::Nps { .. } => Ok(ClassicalBaseline {
            game: game.name.clone(),
            value: None,
            edge_rate: None,
            monochromatic_edges: None,
            inequality_bound: Some(0.0),
        }),
        kind => {
            let b = classical_brute_force(game, DEFAULT_BRUTE_FORCE_BUDGET)?;
            let bound = matches!(kind, GameKind::Chsh).then(|| 8.0 * b.best_value - 4.0);
            Ok(ClassicalBaseline {
                game: game.name.clone(),
                value: Some(b.best_value),
                edge_rate: None,
                monochromatic_edges: None,
                inequality_bound: bound,
            })
        }
    }
}
