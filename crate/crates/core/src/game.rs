//! Games as data: joint questions, answer alphabets, rules and the
//! question distribution, plus classical baselines.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of deterministic strategy tables enumerated.
pub const DEFAULT_BRUTE_FORCE_BUDGET: f64 = 1e7;

/// Rule function `lambda(answers | questions)`.
pub type Rule = Arc<dyn Fn(&[usize], &[usize]) -> bool + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a simple graph; edges are stored with `u < v` in input order.
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (u, v) in edges {
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::InvalidGame(format!(
                    "edge ({u}, {v}) out of range for {n_vertices} vertices"
                )));
            }
            if u == v {
                return Err(Error::InvalidGame(format!("self-loop at vertex {u}")));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(Error::InvalidGame(format!("duplicate edge ({u}, {v})")));
            }
            out.push(e);
        }
        Ok(Self { n_vertices, edges: out })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v)));
        Self::new(n, edges).expect("complete graph is simple")
    }

    pub fn cycle(n: usize) -> Self {
        Self::new(n, (0..n).map(|u| (u, (u + 1) % n))).expect("cycle graph is simple")
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Adds a vertex adjacent to every existing vertex.
    pub fn with_apex(&self) -> Self {
        let apex = self.n_vertices;
        let mut edges = self.edges.clone();
        edges.extend((0..apex).map(|u| (u, apex)));
        Self { n_vertices: apex + 1, edges }
    }

    /// Parses the edge-list format: a header `n m`, then `m` lines `u v`.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or(Error::GraphParse { line: 0, msg: "empty file".into() })?;
        let (n, m) = parse_pair(hline, header)?;
        let mut edges = Vec::with_capacity(m);
        let mut seen = BTreeSet::new();
        for (ln, l) in lines {
            let (u, v) = parse_pair(ln, l)?;
            if u >= n || v >= n {
                return Err(Error::GraphParse { line: ln, msg: format!("vertex out of range 0..{n}") });
            }
            if u == v {
                return Err(Error::GraphParse { line: ln, msg: format!("self-loop at {u}") });
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::GraphParse { line: ln, msg: format!("duplicate edge {u} {v}") });
            }
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::GraphParse {
                line: hline,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        Self::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.n_vertices, self.edges.len());
        for (u, v) in &self.edges {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }
}

fn parse_pair(line: usize, s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(Error::GraphParse { line, msg: format!("expected two integers, got {s:?}") });
    }
    let p = |x: &str| {
        x.parse::<usize>()
            .map_err(|_| Error::GraphParse { line, msg: format!("not a vertex index: {x:?}") })
    };
    Ok((p(parts[0])?, p(parts[1])?))
}

/// Reads a graph file, optionally adding an apex vertex.
pub fn load_graph(path: impl AsRef<Path>, add_apex: bool) -> Result<Graph> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let g = Graph::parse(&text)?;
    Ok(if add_apex { g.with_apex() } else { g })
}

/// Which built-in family a game belongs to.
#[derive(Clone, Debug, PartialEq)]
pub enum GameKind {
    Chsh,
    /// Defined only through its correlator inequality.
    Nps { n: usize },
    Coloring { graph: Graph, colors: usize },
    Custom,
}

#[derive(Clone)]
pub struct GameSpec {
    pub name: String,
    pub kind: GameKind,
    n_players: usize,
    /// Joint questions; entry `i` of each tuple is player `i`'s label.
    questions: Vec<Vec<usize>>,
    q_dist: Vec<f64>,
    answers_per_player: Vec<usize>,
    qubits_per_player: Vec<usize>,
    rule: Option<Rule>,
    /// Whether all players draw labels from one common question set.
    shared_questions: bool,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("n_players", &self.n_players)
            .field("n_questions", &self.questions.len())
            .field("answers_per_player", &self.answers_per_player)
            .field("qubits_per_player", &self.qubits_per_player)
            .field("has_rule", &self.rule.is_some())
            .finish()
    }
}

impl GameSpec {
    /// Validates and assembles a game.
    pub fn new(
        name: impl Into<String>,
        kind: GameKind,
        questions: Vec<Vec<usize>>,
        q_dist: Vec<f64>,
        answers_per_player: Vec<usize>,
        qubits_per_player: Vec<usize>,
        rule: Option<Rule>,
    ) -> Result<Self> {
        let n_players = answers_per_player.len();
        if n_players == 0 || qubits_per_player.len() != n_players {
            return Err(Error::InvalidGame("player counts disagree".into()));
        }
        if questions.is_empty() || questions.len() != q_dist.len() {
            return Err(Error::InvalidGame("question list and distribution disagree".into()));
        }
        if questions.iter().any(|q| q.len() != n_players) {
            return Err(Error::InvalidGame("joint question of wrong arity".into()));
        }
        if q_dist.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidGame("negative or non-finite question weight".into()));
        }
        let total: f64 = q_dist.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidGame(format!("question distribution sums to {total}")));
        }
        for (i, (&a, &nq)) in answers_per_player.iter().zip(&qubits_per_player).enumerate() {
            if nq == 0 || nq >= usize::BITS as usize || a == 0 || a > (1usize << nq) {
                return Err(Error::InvalidGame(format!(
                    "player {i}: {a} answers do not fit {nq} qubit(s)"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            kind,
            n_players,
            questions,
            q_dist,
            answers_per_player,
            qubits_per_player,
            rule,
            shared_questions: true,
        })
    }

    /// Marks the players' question sets as distinct (e.g. CHSH, where
    /// Alice's and Bob's observables are unrelated), which makes the
    /// synchronous condition vacuous.
    pub fn with_distinct_question_sets(mut self) -> Self {
        self.shared_questions = false;
        self
    }

    pub fn shares_question_set(&self) -> bool {
        self.shared_questions
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn questions(&self) -> &[Vec<usize>] {
        &self.questions
    }

    pub fn q_dist(&self) -> &[f64] {
        &self.q_dist
    }

    pub fn answers_per_player(&self) -> &[usize] {
        &self.answers_per_player
    }

    pub fn qubits_per_player(&self) -> &[usize] {
        &self.qubits_per_player
    }

    pub fn total_qubits(&self) -> usize {
        self.qubits_per_player.iter().sum()
    }

    /// Index of the first qubit owned by `player`.
    pub fn qubit_offset(&self, player: usize) -> usize {
        self.qubits_per_player[..player].iter().sum()
    }

    /// Number of distinct question labels player `i` can receive.
    pub fn labels_per_player(&self, player: usize) -> usize {
        self.questions.iter().map(|q| q[player] + 1).max().unwrap_or(0)
    }

    pub fn max_labels(&self) -> usize {
        (0..self.n_players).map(|i| self.labels_per_player(i)).max().unwrap_or(0)
    }

    pub fn has_rule(&self) -> bool {
        self.rule.is_some()
    }

    /// `lambda(answers | question)`; `None` for inequality-only games.
    pub fn rule(&self, answers: &[usize], question: &[usize]) -> Option<bool> {
        self.rule.as_ref().map(|r| r(answers, question))
    }

    /// Splits a register basis index into per-player answers using the
    /// big-endian encoding of each player's qubits.
    pub fn decode_answers(&self, basis_index: usize) -> Vec<usize> {
        let n = self.total_qubits();
        let mut out = Vec::with_capacity(self.n_players);
        let mut shift = n;
        for &nq in &self.qubits_per_player {
            shift -= nq;
            out.push((basis_index >> shift) & ((1 << nq) - 1));
        }
        out
    }

    /// Rule value for a register outcome; answers outside an alphabet lose.
    pub fn wins_outcome(&self, basis_index: usize, question: &[usize]) -> Option<bool> {
        let a = self.decode_answers(basis_index);
        if a.iter().zip(&self.answers_per_player).any(|(&x, &m)| x >= m) {
            return self.rule.as_ref().map(|_| false);
        }
        self.rule(&a, question)
    }

    /// Coloring games label questions `vertex` or `edge`.
    pub fn question_category(&self, q: usize) -> Option<&'static str> {
        match self.kind {
            GameKind::Coloring { .. } => {
                let qq = &self.questions[q];
                Some(if qq[0] == qq[1] { "vertex" } else { "edge" })
            }
            _ => None,
        }
    }

    pub fn question_label(&self, q: usize) -> String {
        self.questions[q].iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    }

    /// Finds a joint question from its comma-separated label.
    pub fn find_question(&self, label: &str) -> Option<usize> {
        let parsed: Vec<usize> = label
            .split(',')
            .map(|s| s.trim().parse().ok())
            .collect::<Option<Vec<_>>>()?;
        self.questions.iter().position(|q| *q == parsed)
    }

    /// Checks that the rule rejects disagreeing answers on every joint
    /// question whose players all receive the same label.
    pub fn validate_synchronous(&self) -> bool {
        let Some(rule) = &self.rule else { return false };
        if !self.shared_questions {
            return true;
        }
        for q in &self.questions {
            if !q.windows(2).all(|w| w[0] == w[1]) {
                continue;
            }
            for answers in joint_answers(&self.answers_per_player) {
                if answers.windows(2).any(|w| w[0] != w[1]) && rule(&answers, q) {
                    return false;
                }
            }
        }
        true
    }

    /// Game value of a deterministic strategy given as one lookup table per
    /// player (`tables[i][label] = answer`).
    pub fn deterministic_value(&self, tables: &[Vec<usize>]) -> Option<f64> {
        let rule = self.rule.as_ref()?;
        let mut v = 0.0;
        let mut a = vec![0; self.n_players];
        for (q, &p) in self.questions.iter().zip(&self.q_dist) {
            for i in 0..self.n_players {
                a[i] = tables[i][q[i]];
            }
            if rule(&a, q) {
                v += p;
            }
        }
        Some(v)
    }
}

fn joint_answers(sizes: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = sizes.iter().product();
    (0..total).map(move |mut idx| {
        let mut a = vec![0; sizes.len()];
        for i in (0..sizes.len()).rev() {
            a[i] = idx % sizes[i];
            idx /= sizes[i];
        }
        a
    })
}

/// Two players, one bit each; players must disagree only on `(1, 1)`.
pub fn chsh_game() -> GameSpec {
    let questions = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
    let rule: Rule = Arc::new(|a: &[usize], q: &[usize]| {
        if q[0] == 1 && q[1] == 1 {
            a[0] != a[1]
        } else {
            a[0] == a[1]
        }
    });
    GameSpec::new("chsh", GameKind::Chsh, questions, vec![0.25; 4], vec![2, 2], vec![1, 1], Some(rule))
        .expect("CHSH is well formed")
        .with_distinct_question_sets()
}

/// N-partite symmetric game with binary questions and dichotomic answers.
pub fn nps_game(n: usize) -> Result<GameSpec> {
    if n < 2 {
        return Err(Error::InvalidGame(format!("NPS needs at least 2 players, got {n}")));
    }
    if n > crate::state::MAX_QUBITS {
        return Err(Error::InvalidGame(format!("NPS with {n} players exceeds the register cap")));
    }
    let total = 1usize << n;
    let questions = (0..total)
        .map(|idx| (0..n).map(|i| (idx >> (n - 1 - i)) & 1).collect())
        .collect();
    GameSpec::new(
        format!("nps{n}"),
        GameKind::Nps { n },
        questions,
        vec![1.0 / total as f64; total],
        vec![2; n],
        vec![1; n],
        None,
    )
}

/// Two-player coloring game: vertex questions `(v, v)` followed by every
/// edge in both orientations, uniformly weighted.
pub fn coloring_game(graph: &Graph, colors: usize, qubits_per_player: usize) -> Result<GameSpec> {
    if qubits_per_player == 0 || colors == 0 || colors > (1usize << qubits_per_player) {
        return Err(Error::InvalidGame(format!(
            "{colors} colors do not fit {qubits_per_player} qubit(s) per player"
        )));
    }
    if 2 * qubits_per_player > crate::state::MAX_QUBITS {
        return Err(Error::InvalidGame("register too large".into()));
    }
    let mut questions: Vec<Vec<usize>> = (0..graph.n_vertices()).map(|v| vec![v, v]).collect();
    for &(u, v) in graph.edges() {
        questions.push(vec![u, v]);
        questions.push(vec![v, u]);
    }
    let nq = questions.len();
    let rule: Rule = Arc::new(|a: &[usize], q: &[usize]| (q[0] == q[1]) == (a[0] == a[1]));
    GameSpec::new(
        format!("coloring(n={}, m={}, c={colors})", graph.n_vertices(), graph.edges().len()),
        GameKind::Coloring { graph: graph.clone(), colors },
        questions,
        vec![1.0 / nq as f64; nq],
        vec![colors, colors],
        vec![qubits_per_player, qubits_per_player],
        Some(rule),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalOptimum {
    pub best_value: f64,
    /// `tables[player][label] = answer`.
    pub tables: Vec<Vec<usize>>,
}

/// Exact best deterministic strategy, enumerating every player's table
/// except the last, which plays a best response question by question.
pub fn classical_brute_force(game: &GameSpec, budget: f64) -> Result<ClassicalOptimum> {
    let rule = game
        .rule
        .as_ref()
        .ok_or_else(|| Error::InvalidGame(format!("{} has no rule function", game.name)))?;
    let np = game.n_players;
    let labels: Vec<usize> = (0..np).map(|i| game.labels_per_player(i)).collect();
    let needed: f64 = (0..np)
        .map(|i| (game.answers_per_player[i] as f64).powi(labels[i] as i32))
        .product();
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let last = np - 1;
    let head_sizes: Vec<usize> = (0..last)
        .flat_map(|i| std::iter::repeat_n(game.answers_per_player[i], labels[i]))
        .collect();
    let mut best = ClassicalOptimum { best_value: f64::NEG_INFINITY, tables: Vec::new() };
    let mut answers = vec![0usize; np];
    let n_ans_last = game.answers_per_player[last];
    for flat in joint_answers(&head_sizes) {
        let mut tables: Vec<Vec<usize>> = Vec::with_capacity(np);
        let mut pos = 0;
        for &n_labels in labels.iter().take(last) {
            tables.push(flat[pos..pos + n_labels].to_vec());
            pos += n_labels;
        }
        // Score per (last-player label, answer).
        let mut score = vec![vec![0.0; n_ans_last]; labels[last]];
        for (q, &p) in game.questions.iter().zip(&game.q_dist) {
            for i in 0..last {
                answers[i] = tables[i][q[i]];
            }
            for (b, s) in score[q[last]].iter_mut().enumerate() {
                answers[last] = b;
                if rule(&answers, q) {
                    *s += p;
                }
            }
        }
        let mut value = 0.0;
        let mut resp = Vec::with_capacity(labels[last]);
        for row in &score {
            let (arg, &m) = row
                .iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
            value += m;
            resp.push(arg);
        }
        if value > best.best_value + 1e-15 {
            tables.push(resp);
            best = ClassicalOptimum { best_value: value, tables };
        }
    }
    Ok(best)
}

/// Fewest monochromatic edges over all `colors`-colorings of `graph`, by
/// depth-first branch and bound with color-symmetry breaking. Returns the
/// count and one optimal coloring.
pub fn min_monochromatic_edges(graph: &Graph, colors: usize, node_budget: u64) -> Result<(usize, Vec<usize>)> {
    let n = graph.n_vertices();
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in graph.edges() {
        adj[u].push(v);
        adj[v].push(u);
    }
    // Visit high-degree vertices first for earlier conflicts.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(adj[v].len()));
    struct Search<'a> {
        adj: &'a [Vec<usize>],
        order: &'a [usize],
        colors: usize,
        assign: Vec<Option<usize>>,
        best: usize,
        best_assign: Vec<usize>,
        nodes: u64,
        budget: u64,
    }
    impl Search<'_> {
        fn go(&mut self, depth: usize, conflicts: usize, used: usize) -> bool {
            self.nodes += 1;
            if self.nodes > self.budget {
                return false;
            }
            if conflicts >= self.best {
                return true;
            }
            if depth == self.order.len() {
                self.best = conflicts;
                self.best_assign = self.assign.iter().map(|c| c.unwrap_or(0)).collect();
                return true;
            }
            let v = self.order[depth];
            // Colors beyond the first unused one are symmetric.
            let limit = (used + 1).min(self.colors);
            for col in 0..limit {
                let added = self.adj[v].iter().filter(|&&u| self.assign[u] == Some(col)).count();
                self.assign[v] = Some(col);
                let ok = self.go(depth + 1, conflicts + added, used.max(col + 1));
                self.assign[v] = None;
                if !ok {
                    return false;
                }
            }
            true
        }
    }
    let mut s = Search {
        adj: &adj,
        order: &order,
        colors,
        assign: vec![None; n],
        best: usize::MAX,
        best_assign: vec![0; n],
        nodes: 0,
        budget: node_budget,
    };
    if !s.go(0, 0, 0) {
        return Err(Error::BudgetExceeded { needed: s.nodes as f64, budget: node_budget as f64 });
    }
    Ok((s.best, s.best_assign))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chsh_rule_examples() {
        let g = chsh_game();
        assert_eq!(g.rule(&[0, 0], &[0, 0]), Some(true));
        assert_eq!(g.rule(&[0, 1], &[1, 1]), Some(true));
        assert_eq!(g.rule(&[0, 1], &[0, 1]), Some(false));
        assert_eq!(g.questions().len(), 4);
    }

    #[test]
    fn nps_shapes() {
        assert_eq!(nps_game(6).unwrap().questions().len(), 64);
        assert_eq!(nps_game(2).unwrap().questions().len(), 4);
        let g3 = nps_game(3).unwrap();
        assert_eq!(g3.questions().len(), 8);
        assert_eq!(g3.questions()[5], vec![1, 0, 1]);
        assert!(!g3.has_rule());
        assert!(nps_game(1).is_err());
    }

    #[test]
    fn coloring_shapes_and_rule() {
        let k3 = coloring_game(&Graph::complete(3), 3, 2).unwrap();
        assert_eq!(k3.questions().len(), 9);
        assert_eq!(k3.rule(&[2, 2], &[1, 1]), Some(true));
        assert_eq!(k3.rule(&[2, 2], &[0, 1]), Some(false));
        assert!(coloring_game(&Graph::complete(3), 5, 2).is_err());
    }

    #[test]
    fn graph_parsing() {
        let g = Graph::parse("3 2\n0 1\n1 2").unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(Graph::parse("2 1\n0 0").is_err());
        assert!(Graph::parse("2 1\n0 2").is_err());
        assert!(Graph::parse("3 2\n0 1\n1 0").is_err());
        assert!(Graph::parse("3 2\n0 1").is_err());
        assert!(Graph::parse("3 1\n0 x").is_err());
        let g = Graph::parse("# comment\n3 1\n\n# another\n2 0\n").unwrap();
        assert_eq!(g.edges(), &[(0, 2)]);
        let apex = g.with_apex();
        assert_eq!(apex.n_vertices(), 4);
        assert_eq!(apex.edges().len(), 4);
    }

    #[test]
    fn brute_force_values() {
        let chsh = classical_brute_force(&chsh_game(), DEFAULT_BRUTE_FORCE_BUDGET).unwrap();
        assert!((chsh.best_value - 0.75).abs() < 1e-15);
        let k3 = coloring_game(&Graph::complete(3), 3, 2).unwrap();
        let r = classical_brute_force(&k3, DEFAULT_BRUTE_FORCE_BUDGET).unwrap();
        assert!((r.best_value - 1.0).abs() < 1e-12);
        let v = k3.deterministic_value(&r.tables).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_budget_and_rule_errors() {
        let big = coloring_game(&Graph::complete(12), 4, 2).unwrap();
        assert!(matches!(
            classical_brute_force(&big, DEFAULT_BRUTE_FORCE_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(classical_brute_force(&nps_game(2).unwrap(), 1e7).is_err());
    }

    #[test]
    fn synchronous_checks() {
        assert!(chsh_game().validate_synchronous());
        assert!(coloring_game(&Graph::cycle(5), 2, 1).unwrap().validate_synchronous());
        let bad: Rule = Arc::new(|a: &[usize], _q: &[usize]| a[0] == 0 && a[1] == 1);
        let g = GameSpec::new(
            "bad",
            GameKind::Custom,
            vec![vec![0, 0]],
            vec![1.0],
            vec![2, 2],
            vec![1, 1],
            Some(bad),
        )
        .unwrap();
        assert!(!g.validate_synchronous());
    }

    #[test]
    fn distribution_must_normalize() {
        let r = GameSpec::new("x", GameKind::Custom, vec![vec![0]], vec![0.9], vec![2], vec![1], None);
        assert!(r.is_err());
    }

    #[test]
    fn c5_two_colors() {
        let (mono, _) = min_monochromatic_edges(&Graph::cycle(5), 2, 1_000_000).unwrap();
        assert_eq!(mono, 1);
    }

    #[test]
    fn decode_answers_big_endian() {
        let g = coloring_game(&Graph::complete(2), 4, 2).unwrap();
        assert_eq!(g.decode_answers(0b10_01), vec![2, 1]);
    }
}
