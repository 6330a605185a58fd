//! Strategy files, reports and circuit text.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use nlgame::eval::EvaluationReport;
use nlgame::{
    chsh_game, coloring_game, nps_game, GameKind, GameSpec, Gate, Graph, LayerKind, MeasurementLayer, PauliString,
    ReferenceState, Strategy,
};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphData {
    pub n_vertices: usize,
    pub edges: Vec<[usize; 2]>,
}

/// Enough to rebuild the game a strategy was solved for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameDescriptor {
    Chsh,
    Nps {
        n: usize,
    },
    Coloring {
        colors: usize,
        qubits_per_player: usize,
        graph: GraphData,
        /// File the graph was read from, kept for reference only.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source: Option<String>,
    },
}

impl GameDescriptor {
    pub fn from_game(game: &GameSpec, source: Option<String>) -> Result<Self> {
        Ok(match &game.kind {
            GameKind::Chsh => GameDescriptor::Chsh,
            GameKind::Nps { n } => GameDescriptor::Nps { n: *n },
            GameKind::Coloring { graph, colors } => GameDescriptor::Coloring {
                colors: *colors,
                qubits_per_player: game.qubits_per_player()[0],
                graph: GraphData {
                    n_vertices: graph.n_vertices(),
                    edges: graph.edges().iter().map(|&(u, v)| [u, v]).collect(),
                },
                source,
            },
            GameKind::Custom => bail!("custom games cannot be written to a strategy file"),
        })
    }

    pub fn build(&self) -> Result<GameSpec> {
        Ok(match self {
            GameDescriptor::Chsh => chsh_game(),
            GameDescriptor::Nps { n } => nps_game(*n)?,
            GameDescriptor::Coloring { colors, qubits_per_player, graph, .. } => {
                let g = Graph::new(graph.n_vertices, graph.edges.iter().map(|e| (e[0], e[1])))?;
                coloring_game(&g, *colors, *qubits_per_player)?
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzTerm {
    pub pauli: PauliString,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerData {
    pub kind: LayerKind,
    /// `[angle owners, questions, qubits per player, angles per qubit]`.
    pub shape: [usize; 4],
    /// Row-major over `shape`.
    pub phi: Vec<f64>,
    /// Player 1 uses the complex conjugate of player 0's unitaries and
    /// stores no angles of its own.
    pub conjugate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyFile {
    pub format_version: u32,
    pub game: GameDescriptor,
    pub reference: ReferenceState,
    pub ansatz: Vec<AnsatzTerm>,
    pub layer: LayerData,
}

impl StrategyFile {
    pub fn new(game: &GameSpec, source: Option<String>, strategy: &Strategy) -> Result<Self> {
        let layer = &strategy.layer;
        Ok(Self {
            format_version: FORMAT_VERSION,
            game: GameDescriptor::from_game(game, source)?,
            reference: strategy.reference,
            ansatz: strategy.ansatz.iter().map(|(p, t)| AnsatzTerm { pauli: p.clone(), theta: *t }).collect(),
            layer: LayerData {
                kind: layer.kind(),
                shape: layer.shape(),
                phi: layer.phi().to_vec(),
                conjugate: layer.has_conjugates(),
            },
        })
    }

    /// Rebuilds the game and strategy, checking the layer against the game.
    pub fn resolve(&self) -> Result<(GameSpec, Strategy)> {
        ensure!(
            self.format_version == FORMAT_VERSION,
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            self.format_version
        );
        let game = self.game.build()?;
        let l = &self.layer;
        let expected_len: usize = l.shape.iter().product();
        ensure!(
            l.phi.len() == expected_len,
            "phi has {} entries but shape {:?} needs {expected_len}",
            l.phi.len(),
            l.shape
        );
        let nb = game.qubits_per_player()[0];
        let nq = game.max_labels();
        let mut layer = if l.conjugate {
            ensure!(game.n_players() == 2, "conjugate layers need a two-player game");
            MeasurementLayer::conjugate_pair(l.kind, nq, nb)?
        } else {
            MeasurementLayer::new(l.kind, game.n_players(), nq, nb)?
        };
        ensure!(
            layer.shape() == l.shape,
            "declared shape {:?} does not fit game {} (expected {:?})",
            l.shape,
            game.name,
            layer.shape()
        );
        layer.set_phi(&l.phi)?;
        let n = game.total_qubits();
        let mut ansatz = Vec::with_capacity(self.ansatz.len());
        for t in &self.ansatz {
            ensure!(t.pauli.n_qubits() == n, "ansatz word {} does not act on {n} qubits", t.pauli);
            ensure!(t.theta.is_finite(), "non-finite ansatz angle");
            ansatz.push((t.pauli.clone(), t.theta));
        }
        ensure!(l.phi.iter().all(|x| x.is_finite()), "non-finite measurement angle");
        Ok((game, Strategy { reference: self.reference, ansatz, layer }))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// One CSV row per question.
pub fn report_csv(report: &EvaluationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["question", "category", "win_rate", "stderr"])?;
    for q in &report.per_question {
        w.write_record([
            q.question.clone(),
            q.category.clone().unwrap_or_default(),
            q.win_rate.to_string(),
            q.stderr.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// OpenQASM 2 text: reference preparation, compiled ansatz, the question's
/// measurement layer, then a measurement of every qubit.
pub fn export_qasm(game: &GameSpec, strategy: &Strategy, question: usize) -> Result<String> {
    let q = &game.questions()[question];
    let n = strategy.n_qubits();
    let mut out = String::new();
    writeln!(out, "OPENQASM 2.0;")?;
    writeln!(out, "include \"qelib1.inc\";")?;
    writeln!(out, "// game {} question ({})", game.name, game.question_label(question))?;
    writeln!(out, "qreg q[{n}];")?;
    writeln!(out, "creg c[{n}];")?;
    let gates = strategy.preparation_instructions().into_iter().chain(strategy.measurement_instructions(q)?);
    for ins in gates {
        let params = ins.gate.params();
        let args = if params.is_empty() {
            String::new()
        } else {
            format!("({})", params.iter().map(|p| format!("{p:?}")).collect::<Vec<_>>().join(","))
        };
        let qubits = ins.qubits.iter().map(|q| format!("q[{q}]")).collect::<Vec<_>>().join(",");
        let name = match ins.gate {
            Gate::Pauli(nlgame::Pauli::I) => continue,
            ref g => g.qasm_name(),
        };
        writeln!(out, "{name}{args} {qubits};")?;
    }
    for i in 0..n {
        writeln!(out, "measure q[{i}] -> c[{i}];")?;
    }
    Ok(out)
}

/// Files to write once every output has been computed, so a failing
/// command leaves nothing behind.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, contents: String) {
        self.files.push((path, contents));
    }

    pub fn commit(self) -> Result<()> {
        let mut staged = Vec::new();
        for (path, contents) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let tmp = path.with_extension("partial");
            if let Err(e) = fs::write(&tmp, contents) {
                for t in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(e).with_context(|| format!("writing {}", tmp.display()));
            }
            staged.push(tmp);
        }
        for ((path, _), tmp) in self.files.iter().zip(&staged) {
            fs::rename(tmp, path).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}
