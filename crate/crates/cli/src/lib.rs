//! Command-line driver for the nlgame solver.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nlgame::dpo::{self, Problem};
use nlgame::eval::{self, NoiseModel, NoiseOptions};
use nlgame::hamiltonian::HamiltonianForm;
use nlgame::strategy::prune_gates;
use nlgame::{chsh_game, coloring_game, load_graph, nps_game, DpoConfig, GameKind, GameSpec, LayerKind, ReferenceState};
use serde::Serialize;

pub mod files;

use files::{export_qasm, report_csv, Outputs, StrategyFile};

#[derive(Parser, Debug)]
#[command(name = "nlgame", version, about = "Variational strategies for nonlocal games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run DPO trials and keep the lowest-energy strategy.
    Solve(SolveArgs),
    /// Score a saved strategy exactly, by sampling, or under noise.
    Eval(EvalArgs),
    /// Noisy win rates of a coloring strategy across error rates.
    SweepNoise(SweepArgs),
    /// Write the circuit for one question as OpenQASM 2.
    ExportCircuit(ExportArgs),
    /// Best deterministic strategy value.
    Classical(ClassicalArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GameName {
    Chsh,
    Nps,
    Coloring,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LayerArg {
    Ry,
    U3ry,
    U3,
}

impl From<LayerArg> for LayerKind {
    fn from(l: LayerArg) -> Self {
        match l {
            LayerArg::Ry => LayerKind::Ry,
            LayerArg::U3ry => LayerKind::U3Ry,
            LayerArg::U3 => LayerKind::U3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReferenceArg {
    Zero,
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Value,
    Violation,
}

#[derive(Args, Debug, Clone)]
pub struct GameArgs {
    pub game: GameName,
    /// Number of NPS players.
    #[arg(short = 'N', long = "players", default_value_t = 6)]
    pub players: usize,
    /// Edge-list file for coloring games.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Add a vertex adjacent to every vertex of the graph.
    #[arg(long)]
    pub apex: bool,
    #[arg(long, default_value_t = 4)]
    pub colors: usize,
    /// Qubits per player; defaults to the fewest that hold every color.
    #[arg(long)]
    pub qubits: Option<usize>,
}

impl GameArgs {
    pub fn build(&self) -> Result<(GameSpec, Option<String>)> {
        Ok(match self.game {
            GameName::Chsh => (chsh_game(), None),
            GameName::Nps => (nps_game(self.players)?, None),
            GameName::Coloring => {
                let path = self.graph.as_ref().context("coloring games need --graph")?;
                let graph = load_graph(path, self.apex).with_context(|| format!("loading {}", path.display()))?;
                if self.colors < 2 {
                    bail!("--colors must be at least 2");
                }
                let qubits = self.qubits.unwrap_or_else(|| self.colors.next_power_of_two().trailing_zeros() as usize);
                (coloring_game(&graph, self.colors, qubits)?, Some(path.display().to_string()))
            }
        })
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Measurement layer; defaults to ry, or u3ry for coloring games.
    #[arg(long, value_enum)]
    pub layer: Option<LayerArg>,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// ADAPT gradient threshold.
    #[arg(long)]
    pub eps_theta: Option<f64>,
    /// BFGS gradient threshold for the measurement angles.
    #[arg(long)]
    pub eps_phi: Option<f64>,
    /// Outer-loop energy-change threshold.
    #[arg(long)]
    pub delta_e: Option<f64>,
    #[arg(long)]
    pub max_adapt_ops: Option<usize>,
    #[arg(long)]
    pub max_outer_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub reference: Option<ReferenceArg>,
    #[arg(long, value_enum, default_value = "value")]
    pub form: FormArg,
    /// Give every player independent angles in a coloring game.
    #[arg(long)]
    pub no_conjugate: bool,
    /// Flat angle indices held at zero; replaces the game default.
    #[arg(long, value_delimiter = ',')]
    pub pin: Option<Vec<usize>>,
    /// Drop ansatz rotations below this angle from the saved strategy.
    #[arg(long, default_value_t = 1e-4)]
    pub prune: f64,
    /// Finish with a joint BFGS over all angles to this gradient tolerance.
    #[arg(long)]
    pub refine: Option<f64>,
    /// Directory for strategy.json, summary.json and trajectories.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// What to print: the summary (json) or the trajectories (csv).
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Exact,
    Shots,
    Noisy,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub strategy: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: EvalMode,
    /// Shots (or noise trajectories) per question.
    #[arg(long, default_value_t = 1024)]
    pub shots: usize,
    #[arg(long, default_value_t = 0.0)]
    pub p_err: f64,
    /// Run the ansatz as gates so its CNOTs are noisy too.
    #[arg(long)]
    pub compile_ansatz: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report.json and report.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub strategy: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.02,0.05,0.1")]
    pub p_err: Vec<f64>,
    /// Trajectories per question and error rate.
    #[arg(long, default_value_t = 1024)]
    pub shots: usize,
    /// Keep the ansatz noiseless and inject noise only in the measurement layer.
    #[arg(long)]
    pub no_compile_ansatz: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub strategy: PathBuf,
    /// Joint question label, e.g. `0,1`.
    #[arg(long)]
    pub question: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassicalArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

/// Result of a command: text for stdout plus files to write.
pub struct Output {
    pub stdout: String,
    pub files: Outputs,
}

pub fn run(cli: Cli) -> Result<Output> {
    match cli.command {
        Command::Solve(a) => solve(&a),
        Command::Eval(a) => evaluate(&a),
        Command::SweepNoise(a) => sweep(&a),
        Command::ExportCircuit(a) => export(&a),
        Command::Classical(a) => classical(&a),
    }
}

#[derive(Serialize, Debug)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub final_energy: f64,
    pub outer_iterations: usize,
    pub adapt_ops: usize,
    pub converged: bool,
}

#[derive(Serialize, Debug)]
pub struct BestSummary {
    pub trial: usize,
    pub energy: f64,
    /// Game value of the saved strategy, for games with a rule.
    pub value: Option<f64>,
    pub inequality_value: Option<f64>,
    pub ansatz: Vec<String>,
    /// Between the first player's qubits and the rest.
    pub mutual_information: f64,
}

#[derive(Serialize, Debug)]
pub struct SolveSummary {
    pub game: String,
    pub layer: LayerKind,
    pub trials: usize,
    pub seed: u64,
    pub eps_theta: f64,
    pub eps_phi: f64,
    pub delta_e: f64,
    pub best: BestSummary,
    pub min_energy: f64,
    pub median_energy: f64,
    pub max_energy: f64,
    /// Trials ending below zero energy.
    pub negative: usize,
    pub results: Vec<TrialSummary>,
}

fn config_for(args: &SolveArgs, game: &GameSpec) -> DpoConfig {
    let mut c = match game.kind {
        GameKind::Chsh => DpoConfig::chsh(),
        GameKind::Coloring { .. } => DpoConfig::coloring(),
        _ => DpoConfig::nps(),
    };
    if let Some(v) = args.eps_theta {
        c.eps_theta = v;
    }
    if let Some(v) = args.eps_phi {
        c.eps_phi = v;
    }
    if let Some(v) = args.delta_e {
        c.delta_e = v;
    }
    if let Some(v) = args.max_adapt_ops {
        c.max_adapt_ops = v;
    }
    if let Some(v) = args.max_outer_iters {
        c.max_outer_iters = v;
    }
    if let Some(r) = args.reference {
        c.reference = match r {
            ReferenceArg::Zero => ReferenceState::AllZero,
            ReferenceArg::Plus => ReferenceState::AllPlus,
        };
    }
    if args.no_conjugate {
        c.conjugate = false;
    }
    if let Some(p) = &args.pin {
        c.pinned_phi = p.clone();
    }
    c.form = match args.form {
        FormArg::Value => HamiltonianForm::Value,
        FormArg::Violation => HamiltonianForm::Violation,
    };
    c.rng_seed = args.seed;
    c
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

pub fn solve(args: &SolveArgs) -> Result<Output> {
    let (game, source) = args.game.build()?;
    let kind: LayerKind = args
        .layer
        .map(Into::into)
        .unwrap_or(if matches!(game.kind, GameKind::Coloring { .. }) { LayerKind::U3Ry } else { LayerKind::Ry });
    let config = config_for(args, &game);
    let results = dpo::run_trials(&game, kind, &config, args.trials)?;
    let (best_idx, best) = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.final_energy.total_cmp(&b.1.final_energy))
        .expect("at least one trial");
    let mut strategy = prune_gates(&best.strategy, args.prune);
    let problem = Problem::new(&game, kind, &config)?;
    let mut energy = problem.objective.energy(&strategy.layer, &strategy.prepare_state()?)?;
    if let Some(tol) = args.refine {
        let (s, e) = dpo::refine(&problem, &strategy, &config, tol)?;
        strategy = s;
        energy = e;
    }
    let value = if game.has_rule() { Some(eval::evaluate_exact(&game, &strategy)?.overall_value) } else { None };
    let nb = game.qubits_per_player()[0];
    let n = game.total_qubits();
    let (alice, rest): (Vec<usize>, Vec<usize>) = (0..n).partition(|&q| q < nb);
    let best_summary = BestSummary {
        trial: best_idx,
        energy,
        value,
        inequality_value: eval::inequality_value(&game, &strategy)?,
        ansatz: strategy.ansatz.iter().map(|(p, _)| p.to_string()).collect(),
        mutual_information: strategy.prepare_state()?.mutual_information(&alice, &rest)?,
    };
    let mut finals: Vec<f64> = results.iter().map(|r| r.final_energy).collect();
    finals.sort_by(f64::total_cmp);
    let summary = SolveSummary {
        game: game.name.clone(),
        layer: kind,
        trials: args.trials,
        seed: args.seed,
        eps_theta: config.eps_theta,
        eps_phi: config.eps_phi,
        delta_e: config.delta_e,
        best: best_summary,
        min_energy: finals[0],
        median_energy: finals[finals.len() / 2],
        max_energy: finals[finals.len() - 1],
        negative: finals.iter().filter(|&&e| e < 0.0).count(),
        results: results
            .iter()
            .enumerate()
            .map(|(i, r)| TrialSummary {
                trial: i,
                seed: r.seed,
                final_energy: r.final_energy,
                outer_iterations: r.energies.len(),
                adapt_ops: r.adapt_ops_used,
                converged: r.converged,
            })
            .collect(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trial", "iteration", "energy"])?;
    for (i, r) in results.iter().enumerate() {
        for (k, e) in r.energies.iter().enumerate() {
            w.write_record([i.to_string(), k.to_string(), e.to_string()])?;
        }
    }
    let trajectories = String::from_utf8(w.into_inner()?)?;
    let summary_json = json(&summary)?;
    let mut files = Outputs::default();
    if let Some(dir) = &args.out {
        files.add(dir.join("strategy.json"), StrategyFile::new(&game, source, &strategy)?.to_json()?);
        files.add(dir.join("summary.json"), summary_json.clone());
        files.add(dir.join("trajectories.csv"), trajectories.clone());
    }
    let stdout = match args.format {
        Format::Json => summary_json,
        Format::Csv => trajectories,
    };
    Ok(Output { stdout, files })
}

pub fn evaluate(args: &EvalArgs) -> Result<Output> {
    let (game, strategy) = StrategyFile::load(&args.strategy)?.resolve()?;
    let report = match args.mode {
        EvalMode::Exact => eval::evaluate_exact(&game, &strategy)?,
        EvalMode::Shots => eval::evaluate_sampled(&game, &strategy, args.shots, args.seed)?,
        EvalMode::Noisy => {
            let opts = NoiseOptions {
                model: NoiseModel::uniform(args.p_err)?,
                shots: args.shots,
                seed: args.seed,
                compile_ansatz: args.compile_ansatz,
            };
            eval::evaluate_noisy(&game, &strategy, &opts)?
        }
    };
    let report_json = json(&report)?;
    let report_rows = report_csv(&report)?;
    let mut files = Outputs::default();
    if let Some(dir) = &args.out {
        files.add(dir.join("report.json"), report_json.clone());
        files.add(dir.join("report.csv"), report_rows.clone());
    }
    let stdout = match args.format {
        Format::Json => report_json,
        Format::Csv => report_rows,
    };
    Ok(Output { stdout, files })
}

pub fn sweep(args: &SweepArgs) -> Result<Output> {
    let (game, strategy) = StrategyFile::load(&args.strategy)?.resolve()?;
    let rows = eval::noise_sweep(&game, &strategy, &args.p_err, args.shots, args.seed, !args.no_compile_ansatz)?;
    let text = match args.format {
        Format::Json => json(&rows)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "p_err",
                "vertex_rate",
                "edge_rate",
                "stderr",
                "vertex_stderr",
                "edge_stderr",
                "mean_rate",
                "mean_stderr",
            ])?;
            for r in &rows {
                w.write_record([
                    r.p_err.to_string(),
                    r.vertex_rate.to_string(),
                    r.edge_rate.to_string(),
                    r.vertex_stderr.max(r.edge_stderr).to_string(),
                    r.vertex_stderr.to_string(),
                    r.edge_stderr.to_string(),
                    r.overall_value.to_string(),
                    r.overall_stderr.to_string(),
                ])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
    };
    single_file(text, &args.out)
}

pub fn export(args: &ExportArgs) -> Result<Output> {
    let (game, strategy) = StrategyFile::load(&args.strategy)?.resolve()?;
    let q = game
        .find_question(&args.question)
        .with_context(|| format!("game {} has no question {:?}", game.name, args.question))?;
    single_file(export_qasm(&game, &strategy, q)?, &args.out)
}

pub fn classical(args: &ClassicalArgs) -> Result<Output> {
    let (game, _) = args.game.build()?;
    let b = eval::classical_threshold(&game)?;
    let text = match args.format {
        Format::Json => json(&b)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["game", "value", "edge_rate", "monochromatic_edges", "inequality_bound"])?;
            let opt = |v: Option<String>| v.unwrap_or_default();
            w.write_record([
                b.game.clone(),
                opt(b.value.map(|v| v.to_string())),
                opt(b.edge_rate.map(|v| v.to_string())),
                opt(b.monochromatic_edges.map(|v| v.to_string())),
                opt(b.inequality_bound.map(|v| v.to_string())),
            ])?;
            String::from_utf8(w.into_inner()?)?
        }
    };
    single_file(text, &args.out)
}

/// With `--out` the text goes to the file only; otherwise to stdout.
fn single_file(text: String, out: &Option<PathBuf>) -> Result<Output> {
    let mut files = Outputs::default();
    match out {
        Some(path) => {
            files.add(path.clone(), text);
            Ok(Output { stdout: String::new(), files })
        }
        None => Ok(Output { stdout: text, files }),
    }
}
