//! Variational construction and evaluation of strategies for nonlocal games.
//!
//! A strategy is a shared state prepared by Pauli-string rotations plus one
//! parameterized measurement unitary per player and question. The solver
//! alternates between growing the state with an adaptive ansatz and tuning
//! the measurement angles with BFGS.

// `!(a < b)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dpo;
pub mod error;
pub mod eval;
pub mod game;
pub mod gates;
pub mod hamiltonian;
pub mod linalg;
pub mod measurement;
pub mod optim;
pub mod pauli;
pub mod scalar;
pub mod state;
pub mod strategy;

pub use dpo::{dpo, run_trials, DpoConfig, TrialResult};
pub use error::{Error, Result};
pub use eval::{evaluate_exact, evaluate_noisy, evaluate_sampled, EvaluationReport, NoiseModel, NoiseOptions};
pub use game::{chsh_game, classical_brute_force, coloring_game, load_graph, nps_game, GameKind, GameSpec, Graph};
pub use gates::{Gate, Instruction};
pub use hamiltonian::{GameObjective, GameOperator, HamiltonianForm, OperatorKind};
pub use linalg::DenseOperator;
pub use measurement::{LayerKind, MeasurementLayer, PlayerSource};
pub use pauli::{Pauli, PauliString};
pub use scalar::{Real, C};
pub use state::StateVector;
pub use strategy::{ReferenceState, Strategy};

pub type StateVector64 = StateVector<f64>;
pub type StateVector32 = StateVector<f32>;
pub type DenseOperator64 = DenseOperator<f64>;
pub type DenseOperator32 = DenseOperator<f32>;
pub type MeasurementLayer64 = MeasurementLayer<f64>;
pub type MeasurementLayer32 = MeasurementLayer<f32>;
pub type GameOperator64 = GameOperator<f64>;
pub type GameObjective64 = GameObjective<f64>;
