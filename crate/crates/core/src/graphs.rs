//! Undirected graphs, Laplacians, connectivity, persistent-edge extraction and
//! the stochastic graph processes that drive the solvers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, Matrix, Vector};
use crate::seed::StreamRng;
use rand::SeedableRng;

/// Undirected simple graph on nodes `0..n`. Edges are stored as `(i, j)` with
/// `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(n);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        Self { n, edges }
    }

    pub fn path(n: usize) -> Self {
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        Self { n, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<bool> {
        if i == j {
            return Err(Error::InvalidInput(format!("self-loop at node {i}")));
        }
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidInput(format!(
                "edge ({i}, {j}) outside {} nodes",
                self.n
            )));
        }
        Ok(self.edges.insert((i.min(j), i.max(j))))
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }
}

pub fn laplacian(g: &Graph) -> Matrix {
    let mut l = Matrix::zeros(g.n(), g.n());
    for (i, j) in g.edges() {
        l[(i, j)] = -1.0;
        l[(j, i)] = -1.0;
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
    }
    l
}

/// Breadth-first reachability from node 0.
pub fn is_connected(g: &Graph) -> bool {
    if g.n() <= 1 {
        return true;
    }
    let adj = g.neighbors();
    let mut seen = vec![false; g.n()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == g.n()
}

pub fn union_graph(gs: &[Graph]) -> Result<Graph> {
    let Some(first) = gs.first() else {
        return Err(Error::InvalidInput("union of no graphs".into()));
    };
    let mut out = Graph::empty(first.n());
    for g in gs {
        if g.n() != first.n() {
            return Err(Error::Shape(format!(
                "graphs on {} and {} nodes",
                first.n(),
                g.n()
            )));
        }
        out.edges.extend(g.edges());
    }
    Ok(out)
}

/// Kinds of random graph process.
#[derive(Debug, Clone)]
pub enum ProcessKind {
    Fixed(Graph),
    /// Uniform i.i.d. draws from a finite sample space.
    IidUniform {
        space: Vec<Graph>,
    },
    /// Each base edge kept independently with probability `q` at every step.
    IidBernoulli {
        base: Graph,
        q: f64,
    },
    /// Finite Markov chain over a sample space.
    Markov {
        space: Vec<Graph>,
        transition: Matrix,
        initial: Vec<f64>,
    },
    /// Graph selected with probability proportional to `p(t) = max(C v(t) + e2, 0)`
    /// where `v(t+1) = A v(t) + e1`.
    Temporal {
        space: Vec<Graph>,
        a: Matrix,
        c: Matrix,
        v0: Vector,
    },
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::Fixed(_) => "fixed",
            ProcessKind::IidUniform { .. } => "iid-uniform",
            ProcessKind::IidBernoulli { .. } => "iid-bernoulli",
            ProcessKind::Markov { .. } => "markov",
            ProcessKind::Temporal { .. } => "temporal",
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            ProcessKind::Fixed(g) => g.n(),
            ProcessKind::IidBernoulli { base, .. } => base.n(),
            ProcessKind::IidUniform { space }
            | ProcessKind::Markov { space, .. }
            | ProcessKind::Temporal { space, .. } => space[0].n(),
        }
    }

    /// The finite sample space, when the process draws from one.
    pub fn space(&self) -> Option<&[Graph]> {
        match self {
            ProcessKind::IidUniform { space }
            | ProcessKind::Markov { space, .. }
            | ProcessKind::Temporal { space, .. } => Some(space),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let check_space = |space: &[Graph]| -> Result<()> {
            let Some(first) = space.first() else {
                return Err(Error::Parameter("empty sample space".into()));
            };
            if space.iter().any(|g| g.n() != first.n()) {
                return Err(Error::Parameter(
                    "sample-space graphs differ in size".into(),
                ));
            }
            Ok(())
        };
        match self {
            ProcessKind::Fixed(_) => Ok(()),
            ProcessKind::IidUniform { space } => check_space(space),
            ProcessKind::IidBernoulli { q, .. } => {
                if (0.0..=1.0).contains(q) {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!(
                        "edge probability {q} outside [0, 1]"
                    )))
                }
            }
            ProcessKind::Markov {
                space,
                transition,
                initial,
            } => {
                check_space(space)?;
                let k = space.len();
                if transition.nrows() != k || transition.ncols() != k || initial.len() != k {
                    return Err(Error::Parameter(format!(
                        "transition matrix and initial distribution must match {k} states"
                    )));
                }
                for (r, row) in transition.row_iter().enumerate() {
                    let s: f64 = row.iter().sum();
                    if row.iter().any(|p| *p < 0.0 || !p.is_finite()) || (s - 1.0).abs() > 1e-12 {
                        return Err(Error::Parameter(format!(
                            "transition row {r} is not a probability vector"
                        )));
                    }
                }
                let s: f64 = initial.iter().sum();
                if initial.iter().any(|p| *p < 0.0) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::Parameter("initial distribution invalid".into()));
                }
                Ok(())
            }
            ProcessKind::Temporal { space, a, c, v0 } => {
                check_space(space)?;
                let d = v0.len();
                if a.nrows() != d || a.ncols() != d || c.nrows() != space.len() || c.ncols() != d {
                    return Err(Error::Parameter(format!(
                        "temporal dynamics need A {d}x{d} and C {}x{d}",
                        space.len()
                    )));
                }
                if c.iter().any(|v| *v <= 0.0) {
                    return Err(Error::Parameter("C must be entrywise positive".into()));
                }
                let sr = spectral_radius(a, 1e-12)?;
                if sr >= 1.0 {
                    return Err(Error::Parameter(format!("sr(A) = {sr} is not below 1")));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone)]
enum State {
    Start,
    Markov(usize),
    Temporal(Vector),
}

/// A seeded generator of graphs. Each instance owns its RNG; give every
/// worker its own instance via [`GraphProcess::reseeded`].
#[derive(Debug, Clone)]
pub struct GraphProcess {
    kind: ProcessKind,
    rng: StreamRng,
    state: State,
    current: Graph,
    current_index: Option<usize>,
}

impl GraphProcess {
    pub fn new(kind: ProcessKind, seed: u64) -> Result<Self> {
        kind.validate()?;
        let n = kind.n_nodes();
        Ok(Self {
            kind,
            rng: StreamRng::seed_from_u64(seed),
            state: State::Start,
            current: Graph::empty(n),
            current_index: None,
        })
    }

    /// Fresh copy of the process (state reset) driven by a different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self {
            kind: self.kind.clone(),
            rng: StreamRng::seed_from_u64(seed),
            state: State::Start,
            current: Graph::empty(self.kind.n_nodes()),
            current_index: None,
        }
    }

    pub fn kind(&self) -> &ProcessKind {
        &self.kind
    }

    pub fn n_nodes(&self) -> usize {
        self.kind.n_nodes()
    }

    /// Advances and returns the next graph.
    pub fn sample_next(&mut self) -> Graph {
        self.advance();
        self.current.clone()
    }

    /// Advances the process. Returns the sample-space index of the new graph
    /// when the process draws from a finite space.
    pub fn advance(&mut self) -> Option<usize> {
        let idx = match &self.kind {
            ProcessKind::Fixed(g) => {
                if matches!(self.state, State::Start) {
                    self.current = g.clone();
                    self.state = State::Markov(0);
                }
                None
            }
            ProcessKind::IidUniform { space } => Some(self.rng.random_range(0..space.len())),
            ProcessKind::IidBernoulli { base, q } => {
                let mut g = Graph::empty(base.n());
                for (i, j) in base.edges() {
                    if self.rng.random::<f64>() < *q {
                        g.edges.insert((i, j));
                    }
                }
                self.current = g;
                None
            }
            ProcessKind::Markov {
                transition,
                initial,
                ..
            } => {
                let next = match self.state {
                    State::Markov(s) => {
                        let row: Vec<f64> = transition.row(s).iter().copied().collect();
                        sample_categorical(&row, &mut self.rng)
                    }
                    _ => sample_categorical(initial, &mut self.rng),
                };
                self.state = State::Markov(next);
                Some(next)
            }
            ProcessKind::Temporal { space, a, c, v0 } => {
                let v = match &self.state {
                    State::Temporal(v) => v.clone(),
                    _ => v0.clone(),
                };
                let mut weights = c * &v;
                for w in weights.iter_mut() {
                    *w = (*w + self.rng.random_range(0.0..=2.0)).max(0.0);
                }
                let k = if weights.iter().all(|w| *w == 0.0) {
                    self.rng.random_range(0..space.len())
                } else {
                    sample_categorical(weights.as_slice(), &mut self.rng)
                };
                let noise = Vector::from_fn(v.len(), |_, _| self.rng.sample(StandardNormal));
                self.state = State::Temporal(a * v + noise);
                Some(k)
            }
        };
        if let (Some(k), Some(space)) = (idx, self.kind.space()) {
            self.current = space[k].clone();
        }
        self.current_index = idx;
        idx
    }

    /// Graph produced by the last [`advance`](Self::advance).
    pub fn current(&self) -> &Graph {
        &self.current
    }

    pub fn current_index(&self) -> Option<usize> {
        self.current_index
    }
}

fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    // rounding: last positive weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Stationary distribution `π = π T` of a row-stochastic matrix, normalised
/// to sum to one.
pub fn stationary_distribution(transition: &Matrix) -> Result<Vec<f64>> {
    let k = transition.nrows();
    if k == 0 || transition.ncols() != k {
        return Err(Error::Shape("transition matrix must be square".into()));
    }
    // (T^T - I) π = 0 with the last equation replaced by Σ π = 1
    let mut a = transition.transpose() - Matrix::identity(k, k);
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = Vector::zeros(k);
    b[k - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Domain("transition matrix has no unique stationary law".into()))?;
    Ok(pi.iter().map(|p| p.max(0.0)).collect())
}

/// Per-step inclusion probability of each edge, for process kinds whose
/// marginals are time-invariant in closed form.
pub fn edge_probabilities(proc: &ProcessKind) -> Result<BTreeMap<(usize, usize), f64>> {
    let mut probs = BTreeMap::new();
    let mut add_weighted = |space: &[Graph], weights: &[f64]| {
        for (g, w) in space.iter().zip(weights) {
            for e in g.edges() {
                *probs.entry(e).or_insert(0.0) += w;
            }
        }
    };
    match proc {
        ProcessKind::Fixed(g) => {
            add_weighted(std::slice::from_ref(g), &[1.0]);
        }
        ProcessKind::IidUniform { space } => {
            let w = vec![1.0 / space.len() as f64; space.len()];
            add_weighted(space, &w);
        }
        ProcessKind::IidBernoulli { base, q } => {
            for e in base.edges() {
                probs.insert(e, *q);
            }
        }
        ProcessKind::Markov {
            space, transition, ..
        } => {
            let pi = stationary_distribution(transition)?;
            add_weighted(space, &pi);
        }
        ProcessKind::Temporal { .. } => {
            return Err(Error::UnsupportedProcess(
                "temporal process has no closed-form edge marginals".into(),
            ))
        }
    }
    Ok(probs)
}

/// Graph of edges present with probability at least `p` at every step.
///
/// Markov processes are assumed to start from their stationary law.
pub fn persistent_graph(proc: &ProcessKind, p: f64) -> Result<Graph> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Parameter(format!(
            "persistence level {p} outside (0, 1]"
        )));
    }
    let probs = edge_probabilities(proc)?;
    let mut g = Graph::empty(proc.n_nodes());
    for (&(i, j), &q) in &probs {
        if q >= p - 1e-12 {
            g.edges.insert((i, j));
        }
    }
    Ok(g)
}

/// Erdős–Rényi graph with edge probability `p`, redrawn until connected.
pub fn random_connected_graph<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Graph> {
    for _ in 0..10_000 {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    g.edges.insert((i, j));
                }
            }
        }
        if is_connected(&g) {
            return Ok(g);
        }
    }
    Err(Error::Connectivity(format!(
        "no connected G({n}, {p}) after 10000 draws"
    )))
}

/// Sample space of `size` spanning subgraphs of a random connected base
/// graph, each base edge kept with probability `keep`, redrawn until the union
/// of the space is connected.
pub fn random_sample_space<R: Rng + ?Sized>(
    n: usize,
    size: usize,
    keep: f64,
    base_p: f64,
    rng: &mut R,
) -> Result<Vec<Graph>> {
    if size == 0 {
        return Err(Error::Parameter("sample space must be nonempty".into()));
    }
    let base = random_connected_graph(n, base_p, rng)?;
    for _ in 0..10_000 {
        let space: Vec<Graph> = (0..size)
            .map(|_| {
                let mut g = Graph::empty(n);
                for e in base.edges() {
                    if rng.random::<f64>() < keep {
                        g.edges.insert(e);
                    }
                }
                g
            })
            .collect();
        if is_connected(&union_graph(&space)?) {
            return Ok(space);
        }
    }
    Err(Error::Connectivity(
        "sample space union stayed disconnected".into(),
    ))
}

/// Row-stochastic matrix with entries uniform on (0, 1] before normalisation.
/// Strict positivity makes the chain irreducible and aperiodic.
pub fn random_transition_matrix<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Matrix {
    let mut t = Matrix::from_fn(k, k, |_, _| 1.0 - rng.random::<f64>());
    for mut row in t.row_iter_mut() {
        let s: f64 = row.sum();
        row /= s;
    }
    t
}

/// Temporal dynamics parameters: `A = radius · G / sr(G)` for Gaussian `G`,
/// `C` uniform on (0, 1], `v(0)` Gaussian.
pub fn random_temporal_dynamics<R: Rng + ?Sized>(
    n_graphs: usize,
    dim: usize,
    radius: f64,
    rng: &mut R,
) -> Result<(Matrix, Matrix, Vector)> {
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::Parameter(format!("radius {radius} outside (0, 1)")));
    }
    let g = Matrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sr = spectral_radius(&g, 1e-12)?;
    let a = if sr > 0.0 { g * (radius / sr) } else { g };
    let c = Matrix::from_fn(n_graphs, dim, |_, _| 1.0 - rng.random::<f64>());
    let v0 = Vector::from_fn(dim, |_, _| rng.sample(StandardNormal));
    Ok((a, c, v0))
}

pub fn format_graph(g: &Graph) -> String {
    let mut out = format!("{} {}\n", g.n(), g.edge_count());
    for (i, j) in g.edges() {
        let _ = writeln!(out, "{} {}", i + 1, j + 1);
    }
    out
}

/// Parses one or more concatenated graph blocks (`n e` then `e` lines `i j`,
/// 1-based).
pub fn parse_graphs(text: &str) -> Result<Vec<Graph>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let pair = |no: usize, l: &str| -> Result<(usize, usize)> {
        let v: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: no,
                msg: e.to_string(),
            })?;
        match v.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(Error::Parse {
                line: no,
                msg: "expected two integers".into(),
            }),
        }
    };
    let mut graphs = Vec::new();
    while let Some((no, header)) = lines.next() {
        let (n, e) = pair(no, header)?;
        let mut g = Graph::empty(n);
        for _ in 0..e {
            let (lno, l) = lines.next().ok_or(Error::Parse {
                line: no,
                msg: format!("graph declares {e} edges but input ended"),
            })?;
            let (i, j) = pair(lno, l)?;
            if i == 0 || j == 0 {
                return Err(Error::Parse {
                    line: lno,
                    msg: "node indices are 1-based".into(),
                });
            }
            g.add_edge(i - 1, j - 1).map_err(|e| Error::Parse {
                line: lno,
                msg: e.to_string(),
            })?;
        }
        graphs.push(g);
    }
    if graphs.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no graphs".into(),
        });
    }
    Ok(graphs)
}

pub fn read_graphs(path: &Path) -> Result<Vec<Graph>> {
    parse_graphs(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_graphs(path: &Path, gs: &[Graph]) -> Result<()> {
    let text: String = gs.iter().map(format_graph).collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    #[test]
    fn laplacian_examples() {
        let l = laplacian(&Graph::path(3));
        #[rustfmt::skip]
        let expected = Matrix::from_row_slice(3, 3, &[
            1.0, -1.0, 0.0,
            -1.0, 2.0, -1.0,
            0.0, -1.0, 1.0,
        ]);
        assert_eq!(l, expected);
        assert_eq!(laplacian(&Graph::empty(4)), Matrix::zeros(4, 4));

        let l = laplacian(&Graph::complete(3));
        let mut ev: Vec<f64> = SymmetricEigen::new(l).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([0.0, 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn connectivity_examples() {
        assert!(is_connected(&Graph::path(3)));
        assert!(!is_connected(&Graph::empty(2)));
        assert!(is_connected(&Graph::from_edges(2, [(0, 1)]).unwrap()));
    }

    #[test]
    fn union_examples() {
        let a = Graph::from_edges(3, [(0, 1)]).unwrap();
        let b = Graph::from_edges(3, [(1, 2)]).unwrap();
        assert_eq!(union_graph(&[a.clone(), b]).unwrap(), Graph::path(3));
        assert_eq!(union_graph(&[a.clone(), Graph::empty(3)]).unwrap(), a);
        assert!(union_graph(&[a, Graph::empty(4)]).is_err());
    }

    #[test]
    fn generated_space_matches_example_shape() {
        let mut rng = StreamRng::seed_from_u64(42);
        let space = random_sample_space(20, 30, 0.3, 0.3, &mut rng).unwrap();
        assert_eq!(space.len(), 30);
        assert!(is_connected(&union_graph(&space).unwrap()));
        let disconnected = space.iter().filter(|g| !is_connected(g)).count();
        assert!(disconnected > 15, "{disconnected} of 30 disconnected");
    }

    #[test]
    fn persistent_graph_examples() {
        let k4 = Graph::complete(4);
        for p in [0.1, 0.5, 1.0] {
            assert_eq!(
                persistent_graph(&ProcessKind::Fixed(k4.clone()), p).unwrap(),
                k4
            );
        }
        let space = vec![k4.clone(), Graph::empty(4)];
        let g = persistent_graph(
            &ProcessKind::IidUniform {
                space: space.clone(),
            },
            0.5,
        )
        .unwrap();
        assert_eq!(g, k4);
        let g = persistent_graph(&ProcessKind::IidUniform { space }, 0.6).unwrap();
        assert_eq!(g, Graph::empty(4));

        let base = Graph::path(5);
        let proc = ProcessKind::IidBernoulli {
            base: base.clone(),
            q: 0.4,
        };
        assert_eq!(persistent_graph(&proc, 0.4).unwrap(), base);
        assert_eq!(persistent_graph(&proc, 0.41).unwrap(), Graph::empty(5));

        let temporal = ProcessKind::Temporal {
            space: vec![k4],
            a: Matrix::zeros(1, 1),
            c: Matrix::from_element(1, 1, 1.0),
            v0: Vector::zeros(1),
        };
        assert!(matches!(
            persistent_graph(&temporal, 0.5),
            Err(Error::UnsupportedProcess(_))
        ));
    }

    #[test]
    fn markov_marginals_use_stationary_law() {
        let a = Graph::from_edges(3, [(0, 1)]).unwrap();
        let b = Graph::from_edges(3, [(1, 2)]).unwrap();
        // stationary law (1/3, 2/3)
        let t = Matrix::from_row_slice(2, 2, &[0.5, 0.5, 0.25, 0.75]);
        let pi = stationary_distribution(&t).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-12 && (pi[1] - 2.0 / 3.0).abs() < 1e-12);
        let proc = ProcessKind::Markov {
            space: vec![a, b.clone()],
            transition: t,
            initial: pi,
        };
        assert_eq!(persistent_graph(&proc, 0.5).unwrap(), b);
        assert_eq!(persistent_graph(&proc, 0.3).unwrap(), Graph::path(3));
    }

    #[test]
    fn fixed_and_absorbing_processes() {
        let mut p = GraphProcess::new(ProcessKind::Fixed(Graph::complete(3)), 1).unwrap();
        for _ in 0..5 {
            assert_eq!(p.sample_next(), Graph::complete(3));
        }
        let space = vec![Graph::empty(3), Graph::path(3), Graph::complete(3)];
        let kind = ProcessKind::Markov {
            space,
            transition: Matrix::identity(3, 3),
            initial: vec![0.0, 1.0, 0.0],
        };
        let mut p = GraphProcess::new(kind, 9).unwrap();
        for _ in 0..20 {
            assert_eq!(p.sample_next(), Graph::path(3));
        }
    }

    #[test]
    fn markov_rejects_non_stochastic_rows() {
        let kind = ProcessKind::Markov {
            space: vec![Graph::empty(2), Graph::complete(2)],
            transition: Matrix::from_row_slice(2, 2, &[0.5, 0.6, 0.5, 0.5]),
            initial: vec![0.5, 0.5],
        };
        assert!(matches!(
            GraphProcess::new(kind, 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn temporal_rejects_unstable_a() {
        let kind = ProcessKind::Temporal {
            space: vec![Graph::empty(2)],
            a: Matrix::from_element(1, 1, 1.0),
            c: Matrix::from_element(1, 1, 1.0),
            v0: Vector::zeros(1),
        };
        assert!(matches!(
            GraphProcess::new(kind, 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn uniform_draw_frequencies_concentrate() {
        let mut rng = StreamRng::seed_from_u64(3);
        let space = random_sample_space(10, 30, 0.3, 0.4, &mut rng).unwrap();
        let mut p = GraphProcess::new(ProcessKind::IidUniform { space }, 77).unwrap();
        let draws = 100_000;
        let mut counts = [0usize; 30];
        for _ in 0..draws {
            counts[p.advance().unwrap()] += 1;
        }
        let q = 1.0 / 30.0;
        let sigma = (draws as f64 * q * (1.0 - q)).sqrt();
        for c in counts {
            assert!(
                (c as f64 - draws as f64 * q).abs() <= 3.0 * sigma,
                "count {c}"
            );
        }
    }

    #[test]
    fn temporal_process_runs_and_uses_space() {
        let mut rng = StreamRng::seed_from_u64(8);
        let space = random_sample_space(6, 5, 0.4, 0.5, &mut rng).unwrap();
        let (a, c, v0) = random_temporal_dynamics(5, 12, 0.9, &mut rng).unwrap();
        assert!((spectral_radius(&a, 1e-12).unwrap() - 0.9).abs() < 1e-9);
        let kind = ProcessKind::Temporal {
            space: space.clone(),
            a,
            c,
            v0,
        };
        let mut p = GraphProcess::new(kind, 5).unwrap();
        let mut seen = BTreeSet::new();
        for _ in 0..500 {
            let k = p.advance().unwrap();
            assert_eq!(p.current(), &space[k]);
            seen.insert(k);
        }
        assert!(seen.len() > 1);
    }

    #[test]
    fn graph_file_round_trip() {
        let gs = vec![Graph::path(4), Graph::empty(4), Graph::complete(4)];
        let text: String = gs.iter().map(format_graph).collect();
        assert!(text.starts_with("4 3\n1 2\n"));
        assert_eq!(parse_graphs(&text).unwrap(), gs);
        assert!(matches!(
            parse_graphs("3 1\n0 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_graphs("3 2\n1 2\n").is_err());
    }

    fn component_count(g: &Graph) -> usize {
        // union-find oracle
        let mut parent: Vec<usize> = (0..g.n()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for (i, j) in g.edges() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            parent[a] = b;
        }
        (0..g.n()).filter(|&x| find(&mut parent, x) == x).count()
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..9).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            prop::collection::vec(any::<bool>(), pairs.len()).prop_map(move |keep| {
                let edges = pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| *e);
                Graph::from_edges(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn laplacian_spectrum_counts_components(g in arb_graph()) {
            let l = laplacian(&g);
            for row in l.row_iter() {
                prop_assert_eq!(row.sum(), 0.0);
            }
            let ev = SymmetricEigen::new(l).eigenvalues;
            prop_assert!(ev.iter().all(|v| *v > -1e-9));
            let zeros = ev.iter().filter(|v| v.abs() < 1e-8).count();
            prop_assert_eq!(zeros, component_count(&g));
            prop_assert_eq!(is_connected(&g), component_count(&g) == 1);
        }

        #[test]
        fn persistent_graph_is_monotone(seed in any::<u64>(), p1 in 0.01..1.0f64, p2 in 0.01..1.0f64) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let mut rng = StreamRng::seed_from_u64(seed);
            let space = random_sample_space(6, 4, 0.5, 0.6, &mut rng).unwrap();
            let kind = ProcessKind::Markov {
                transition: random_transition_matrix(4, &mut rng),
                initial: vec![0.25; 4],
                space,
            };
            let big = persistent_graph(&kind, lo).unwrap();
            let small = persistent_graph(&kind, hi).unwrap();
            prop_assert!(small.edges().all(|(i, j)| big.has_edge(i, j)));
        }

        #[test]
        fn equal_seeds_give_equal_sequences(seed in any::<u64>()) {
            let mut rng = StreamRng::seed_from_u64(1);
            let space = random_sample_space(5, 6, 0.5, 0.6, &mut rng).unwrap();
            let kind = ProcessKind::Markov {
                transition: random_transition_matrix(6, &mut rng),
                initial: vec![1.0 / 6.0; 6],
                space,
            };
            let mut a = GraphProcess::new(kind.clone(), seed).unwrap();
            let mut b = GraphProcess::new(kind, seed).unwrap();
            for _ in 0..50 {
                prop_assert_eq!(a.sample_next(), b.sample_next());
            }
        }
    }
}
