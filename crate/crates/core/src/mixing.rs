//! Doubly stochastic symmetric mixing weights built from graphs.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graphs::{laplacian, Graph, ProcessKind};
use crate::linalg::Matrix;

/// Largest number of base edges for which Bernoulli expectations are
/// enumerated over every edge subset.
pub const BERNOULLI_ENUMERATION_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRule {
    /// `W = I - h L`; `None` picks `h = 1 / (2 · max degree)` per graph.
    Laplacian { h: Option<f64> },
    /// `W_ij = 1 / (1 + max(d_i, d_j))` on edges, remainder on the diagonal.
    Metropolis,
}

impl Default for WeightRule {
    fn default() -> Self {
        WeightRule::Laplacian { h: None }
    }
}

impl fmt::Display for WeightRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightRule::Laplacian { h: None } => write!(f, "laplacian"),
            WeightRule::Laplacian { h: Some(h) } => write!(f, "laplacian:{h}"),
            WeightRule::Metropolis => write!(f, "metropolis"),
        }
    }
}

impl FromStr for WeightRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "laplacian" => Ok(WeightRule::Laplacian { h: None }),
            None if s == "metropolis" => Ok(WeightRule::Metropolis),
            Some(("laplacian", h)) => {
                let h: f64 = h
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad laplacian step {h:?}")))?;
                Ok(WeightRule::Laplacian { h: Some(h) })
            }
            _ => Err(Error::Config(format!(
                "unknown weight rule {s:?} (expected laplacian, laplacian:<h> or metropolis)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingWeight {
    pub w: Matrix,
    /// Smallest positive entry of `w`.
    pub eta: f64,
}

impl MixingWeight {
    fn from_matrix(w: Matrix) -> Self {
        let eta = w
            .iter()
            .copied()
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min);
        Self { w, eta }
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Checks symmetry, double stochasticity and that the sparsity pattern
    /// matches `g`.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        validate_weight(&self.w, Some(g))
    }
}

pub fn validate_weight(w: &Matrix, g: Option<&Graph>) -> Result<()> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::Shape("weight matrix must be square".into()));
    }
    for i in 0..n {
        let row: f64 = w.row(i).sum();
        let col: f64 = w.column(i).sum();
        if (row - 1.0).abs() > 1e-12 || (col - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "row/column {i} sums to {row}/{col}"
            )));
        }
        if w[(i, i)] <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "diagonal entry {i} not positive"
            )));
        }
        for j in 0..n {
            if w[(i, j)] != w[(j, i)] {
                return Err(Error::InvalidInput(format!("asymmetric at ({i}, {j})")));
            }
            if w[(i, j)] < 0.0 {
                return Err(Error::InvalidInput(format!("negative entry at ({i}, {j})")));
            }
            if let Some(g) = g {
                if i != j && (w[(i, j)] > 0.0) != g.has_edge(i, j) {
                    return Err(Error::InvalidInput(format!(
                        "sparsity mismatch at ({i}, {j})"
                    )));
                }
            }
        }
    }
    Ok(())
}

pub fn weight_from_graph(g: &Graph, rule: WeightRule) -> Result<MixingWeight> {
    let n = g.n();
    let w = match rule {
        WeightRule::Laplacian { h } => {
            let dmax = g.max_degree();
            let h = match h {
                Some(h) => {
                    let limit = if dmax == 0 {
                        f64::INFINITY
                    } else {
                        1.0 / dmax as f64
                    };
                    if !(h > 0.0 && h < limit) {
                        return Err(Error::InvalidStep(format!("h = {h} outside (0, 1/{dmax})")));
                    }
                    h
                }
                None if dmax == 0 => return Ok(MixingWeight::from_matrix(Matrix::identity(n, n))),
                None => 1.0 / (2.0 * dmax as f64),
            };
            Matrix::identity(n, n) - laplacian(g) * h
        }
        WeightRule::Metropolis => {
            let d = g.degrees();
            let mut w = Matrix::zeros(n, n);
            for (i, j) in g.edges() {
                let v = 1.0 / (1.0 + d[i].max(d[j]) as f64);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
            for i in 0..n {
                let off: f64 = w.row(i).sum();
                w[(i, i)] = 1.0 - off;
            }
            w
        }
    };
    Ok(MixingWeight::from_matrix(w))
}

/// Exact law of `W(t)` for i.i.d. processes as `(probability, W)` pairs.
///
/// Bernoulli processes are enumerated over all subsets of base edges, which is
/// only attempted up to [`BERNOULLI_ENUMERATION_CAP`] edges.
pub fn weight_distribution(proc: &ProcessKind, rule: WeightRule) -> Result<Vec<(f64, Matrix)>> {
    match proc {
        ProcessKind::Fixed(g) => Ok(vec![(1.0, weight_from_graph(g, rule)?.w)]),
        ProcessKind::IidUniform { space } => {
            let p = 1.0 / space.len() as f64;
            space
                .iter()
                .map(|g| Ok((p, weight_from_graph(g, rule)?.w)))
                .collect()
        }
        ProcessKind::IidBernoulli { base, q } => {
            let edges: Vec<(usize, usize)> = base.edges().collect();
            if edges.len() > BERNOULLI_ENUMERATION_CAP {
                return Err(Error::Size(format!(
                    "{} base edges exceed the enumeration cap of {BERNOULLI_ENUMERATION_CAP}",
                    edges.len()
                )));
            }
            let mut out = Vec::with_capacity(1 << edges.len());
            for mask in 0u32..(1u32 << edges.len()) {
                let kept = edges
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask & (1 << b) != 0)
                    .map(|(_, e)| *e);
                let g = Graph::from_edges(base.n(), kept)?;
                let k = mask.count_ones() as i32;
                let prob = q.powi(k) * (1.0 - q).powi(edges.len() as i32 - k);
                if prob > 0.0 {
                    out.push((prob, weight_from_graph(&g, rule)?.w));
                }
            }
            Ok(out)
        }
        other => Err(Error::UnsupportedProcess(format!(
            "{} process has no closed-form weight law",
            other.name()
        ))),
    }
}

/// `E[W(t)]` for i.i.d. processes.
pub fn mean_weight(proc: &ProcessKind, rule: WeightRule) -> Result<Matrix> {
    // W = I - h L is affine in the edge indicators when h is fixed
    if let (ProcessKind::IidBernoulli { base, q }, WeightRule::Laplacian { h: Some(h) }) =
        (proc, rule)
    {
        weight_from_graph(base, rule)?;
        let n = base.n();
        return Ok(Matrix::identity(n, n) - laplacian(base) * (h * q));
    }
    let dist = weight_distribution(proc, rule)?;
    let n = proc.n_nodes();
    Ok(dist
        .iter()
        .fold(Matrix::zeros(n, n), |acc, (p, w)| acc + w * *p))
}
