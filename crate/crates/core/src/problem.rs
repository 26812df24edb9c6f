//! The network linear equation `z = H y`, its contiguous row-block split
//! across nodes, and closed-form reference solutions.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    affine_projection, ensure_finite_matrix, ensure_finite_vector, kernel_projector, pseudoinverse,
    rank, Matrix, Vector, PINV_TOL,
};

/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Data held by one node, plus quantities every solver step reuses.
#[derive(Debug, Clone)]
pub struct NodeBlock {
    pub h: Matrix,
    pub z: Vector,
    /// Orthogonal projector onto `kernel(H_i)`.
    pub projector: Matrix,
    /// `H_i^+ z_i`, so that `Π_{A_i}(x) = P_i x + offset`.
    pub offset: Vector,
    /// `H_i^T H_i`.
    pub gram: Matrix,
    /// `H_i^T z_i`.
    pub hz: Vector,
    pub row_norms_sq: Vec<f64>,
    pub frobenius_sq: f64,
}

impl NodeBlock {
    fn new(h: Matrix, z: Vector) -> Result<Self> {
        let projector = kernel_projector(&h, PINV_TOL)?;
        let offset = pseudoinverse(&h, PINV_TOL)? * &z;
        let gram = h.transpose() * &h;
        let hz = h.transpose() * &z;
        let row_norms_sq: Vec<f64> = h.row_iter().map(|r| r.norm_squared()).collect();
        let frobenius_sq = row_norms_sq.iter().sum();
        Ok(Self {
            h,
            z,
            projector,
            offset,
            gram,
            hz,
            row_norms_sq,
            frobenius_sq,
        })
    }

    pub fn rows(&self) -> usize {
        self.h.nrows()
    }

    /// `Π_{A_i}(x)` through the cached affine form.
    pub fn project(&self, x: &Vector) -> Vector {
        &self.projector * x + &self.offset
    }
}

#[derive(Debug, Clone)]
pub struct NetworkProblem {
    h: Matrix,
    z: Vector,
    sizes: Vec<usize>,
    nodes: Vec<NodeBlock>,
}

impl NetworkProblem {
    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn z(&self) -> &Vector {
        &self.z
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn nodes(&self) -> &[NodeBlock] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &NodeBlock {
        &self.nodes[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Dimension of the unknown.
    pub fn dim(&self) -> usize {
        self.h.ncols()
    }

    /// Block-diagonal `diag(P_1, ..., P_N)`.
    pub fn lifted_projector(&self) -> Matrix {
        let blocks: Vec<Matrix> = self.nodes.iter().map(|n| n.projector.clone()).collect();
        crate::linalg::block_diag(&blocks)
    }

    pub fn check_stacked(&self, x: &Vector) -> Result<()> {
        let expected = self.n_nodes() * self.dim();
        if x.len() != expected {
            return Err(Error::Shape(format!(
                "stacked state has {} entries, expected {expected}",
                x.len()
            )));
        }
        Ok(())
    }
}

/// Splits `(H, z)` into contiguous row blocks of the given sizes.
pub fn partition_problem(h: Matrix, z: Vector, sizes: &[usize]) -> Result<NetworkProblem> {
    ensure_finite_matrix(&h, "H")?;
    ensure_finite_vector(&z, "z")?;
    if z.len() != h.nrows() {
        return Err(Error::Partition(format!(
            "z has {} entries but H has {} rows",
            z.len(),
            h.nrows()
        )));
    }
    if sizes.is_empty() {
        return Err(Error::Partition("no nodes".into()));
    }
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Partition(format!("node {} has no rows", i + 1)));
    }
    let total: usize = sizes.iter().sum();
    if total != h.nrows() {
        return Err(Error::Partition(format!(
            "block sizes sum to {total} but H has {} rows",
            h.nrows()
        )));
    }

    let m = h.ncols();
    let mut nodes = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for (i, &len) in sizes.iter().enumerate() {
        let hi = h.rows(start, len).clone_owned();
        let zi = z.rows(start, len).clone_owned();
        for (r, row) in hi.row_iter().enumerate() {
            if row.iter().all(|v| *v == 0.0) {
                return Err(Error::DegenerateRow { node: i, row: r });
            }
        }
        debug_assert_eq!(hi.ncols(), m);
        nodes.push(NodeBlock::new(hi, zi)?);
        start += len;
    }
    Ok(NetworkProblem {
        h,
        z,
        sizes: sizes.to_vec(),
        nodes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionKind {
    UniqueExact,
    MultipleExact,
    LeastSquaresOnly,
}

#[derive(Debug, Clone)]
pub struct SolutionInfo {
    pub kind: SolutionKind,
    pub rank: usize,
    pub x_star: Option<Vector>,
    pub x_ls: Option<Vector>,
}

impl SolutionInfo {
    pub fn has_exact(&self) -> bool {
        self.kind != SolutionKind::LeastSquaresOnly
    }
}

pub fn classify_solutions(p: &NetworkProblem, tol: f64) -> Result<SolutionInfo> {
    let h = p.h();
    let z = p.z();
    let r = rank(h, RANK_TOL)?;
    let pinv = pseudoinverse(h, RANK_TOL)?;
    let x_min_norm = &pinv * z;
    let residual = (h * &x_min_norm - z).norm();
    let consistent = residual <= tol * (1.0 + z.norm());
    let full_rank = r == p.dim();

    let kind = match (consistent, full_rank) {
        (true, true) => SolutionKind::UniqueExact,
        (true, false) => SolutionKind::MultipleExact,
        (false, _) => SolutionKind::LeastSquaresOnly,
    };
    Ok(SolutionInfo {
        kind,
        rank: r,
        x_star: (kind == SolutionKind::UniqueExact).then(|| x_min_norm.clone()),
        x_ls: full_rank.then_some(x_min_norm),
    })
}

/// `y*(x(0)) = (1/N) Σ_i Π_{A*}(x_i(0))`.
pub fn projection_average(p: &NetworkProblem, x0: &Vector) -> Result<Vector> {
    p.check_stacked(x0)?;
    let m = p.dim();
    let n = p.n_nodes();
    let mut acc = Vector::zeros(m);
    for i in 0..n {
        let xi = x0.rows(i * m, m).clone_owned();
        acc += affine_projection(p.h(), p.z(), &xi, 1e-8)?;
    }
    Ok(acc / n as f64)
}

/// How many rows each node receives in a synthetic problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowSizes {
    Fixed(usize),
    /// Uniform integer in `[lo, hi]`.
    Uniform {
        lo: usize,
        hi: usize,
    },
    Explicit(Vec<usize>),
}

impl RowSizes {
    pub fn draw<R: Rng + ?Sized>(&self, n_nodes: usize, rng: &mut R) -> Result<Vec<usize>> {
        let sizes = match self {
            RowSizes::Fixed(l) => vec![*l; n_nodes],
            RowSizes::Uniform { lo, hi } => {
                if lo > hi || *lo == 0 {
                    return Err(Error::Parameter(format!("bad row range [{lo}, {hi}]")));
                }
                (0..n_nodes).map(|_| rng.random_range(*lo..=*hi)).collect()
            }
            RowSizes::Explicit(v) => {
                if v.len() != n_nodes {
                    return Err(Error::Parameter(format!(
                        "{} explicit row sizes for {n_nodes} nodes",
                        v.len()
                    )));
                }
                v.clone()
            }
        };
        if sizes.contains(&0) {
            return Err(Error::Parameter("row sizes must be positive".into()));
        }
        Ok(sizes)
    }
}

/// Recipe for a random problem with prescribed rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n_nodes: usize,
    pub dim: usize,
    pub rank: usize,
    pub rows: RowSizes,
    /// Norm of a component orthogonal to `range(H)` added to `z`. Zero gives
    /// a consistent system.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub h: Matrix,
    pub z: Vector,
    pub sizes: Vec<usize>,
    pub y_true: Vector,
}

/// `H = A Q` with Gaussian `A` (l×r) and `Q` (r×m) having orthonormal rows
/// spanning a uniformly random subspace, `z = H y + r⊥`. For full column rank
/// this is an i.i.d. Gaussian `H`.
pub fn generate_synthetic<R: Rng + ?Sized>(
    params: &SyntheticParams,
    rng: &mut R,
) -> Result<SyntheticProblem> {
    if params.n_nodes == 0 || params.dim == 0 {
        return Err(Error::Parameter(
            "need at least one node and one column".into(),
        ));
    }
    let sizes = params.rows.draw(params.n_nodes, rng)?;
    let l: usize = sizes.iter().sum();
    if params.rank == 0 || params.rank > params.dim.min(l) {
        return Err(Error::Parameter(format!(
            "rank {} impossible for a {l}x{} matrix",
            params.rank, params.dim
        )));
    }
    if !(params.residual >= 0.0 && params.residual.is_finite()) {
        return Err(Error::Parameter(
            "residual must be a nonnegative number".into(),
        ));
    }
    let mut gauss = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal));
    let a = gauss(l, params.rank);
    let q = gauss(params.dim, params.rank).qr().q();
    let h = a * q.transpose();
    let y_true = Vector::from_fn(params.dim, |_, _| rng.sample(StandardNormal));
    let mut z = &h * &y_true;
    if params.residual > 0.0 {
        let g = Vector::from_fn(l, |_, _| rng.sample(StandardNormal));
        let range_part = &h * (pseudoinverse(&h, RANK_TOL)? * &g);
        let orth = g - range_part;
        let nrm = orth.norm();
        if nrm > 1e-9 {
            z += orth * (params.residual / nrm);
        }
    }
    Ok(SyntheticProblem {
        h,
        z,
        sizes,
        y_true,
    })
}

fn parse_header(line: Option<(usize, &str)>, expect: usize) -> Result<Vec<usize>> {
    let (no, text) = line.ok_or(Error::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let parts: Vec<usize> = text
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: no,
            msg: format!("bad header: {e}"),
        })?;
    if parts.len() != expect {
        return Err(Error::Parse {
            line: no,
            msg: format!("header needs {expect} integers"),
        });
    }
    Ok(parts)
}

fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("not a number: {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value {tok:?}"),
        });
    }
    Ok(v)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = numbered_lines(text);
    let hdr = parse_header(lines.next(), 2)?;
    let (rows, cols) = (hdr[0], hdr[1]);
    if rows == 0 || cols == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "matrix dimensions must be positive".into(),
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (no, line) in lines {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_f64(t, no))
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::Parse {
                line: no,
                msg: format!("expected {cols} values, found {}", row.len()),
            });
        }
        seen += 1;
        if seen > rows {
            return Err(Error::Parse {
                line: no,
                msg: format!("more than {rows} rows"),
            });
        }
        data.extend(row);
    }
    if seen != rows {
        return Err(Error::Dimension(format!(
            "expected {rows} rows, found {seen}"
        )));
    }
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

pub fn parse_vector(text: &str) -> Result<Vector> {
    let mut lines = numbered_lines(text);
    let dim = parse_header(lines.next(), 1)?[0];
    if dim == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "vector dimension must be positive".into(),
        });
    }
    let mut data = Vec::with_capacity(dim);
    for (no, line) in lines {
        for tok in line.split_whitespace() {
            data.push(parse_f64(tok, no)?);
        }
    }
    if data.len() != dim {
        return Err(Error::Dimension(format!(
            "expected {dim} entries, found {}",
            data.len()
        )));
    }
    Ok(Vector::from_vec(data))
}

pub fn format_matrix(a: &Matrix) -> String {
    let mut out = format!("{} {}\n", a.nrows(), a.ncols());
    for row in a.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn format_vector(v: &Vector) -> String {
    let mut out = format!("{}\n", v.len());
    for x in v.iter() {
        let _ = writeln!(out, "{x:e}");
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(&read_text(path)?)
}

pub fn read_vector(path: &Path) -> Result<Vector> {
    parse_vector(&read_text(path)?)
}

pub fn write_matrix(path: &Path, a: &Matrix) -> Result<()> {
    write_text(path, &format_matrix(a))
}

pub fn write_vector(path: &Path, v: &Vector) -> Result<()> {
    write_text(path, &format_vector(v))
}

/// Reads `H` and `z` from the whitespace text formats.
pub fn load_problem(matrix_path: &Path, vector_path: &Path) -> Result<(Matrix, Vector)> {
    let h = read_matrix(matrix_path)?;
    let z = read_vector(vector_path)?;
    if z.len() != h.nrows() {
        return Err(Error::Dimension(format!(
            "H has {} rows but z has {} entries",
            h.nrows(),
            z.len()
        )));
    }
    Ok((h, z))
}

/// Parses libsvm lines `label idx:val ...` (1-based indices) into a dense
/// `(H, z)`. With `n_features = None` the width is the largest index seen.
pub fn parse_libsvm(text: &str, n_features: Option<usize>) -> Result<(Matrix, Vector)> {
    let mut labels = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut width = 0usize;
    for (no, line) in numbered_lines(text) {
        let mut toks = line.split_whitespace();
        let label = parse_f64(toks.next().unwrap_or_default(), no)?;
        let mut row = Vec::new();
        for tok in toks {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: no,
                msg: format!("expected idx:val, found {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: no,
                msg: format!("bad feature index {idx:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: no,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if let Some(n) = n_features {
                if idx > n {
                    return Err(Error::Dimension(format!(
                        "line {no}: feature index {idx} exceeds declared {n}"
                    )));
                }
            }
            width = width.max(idx);
            row.push((idx - 1, parse_f64(val, no)?));
        }
        labels.push(label);
        entries.push(row);
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no examples".into(),
        });
    }
    let cols = n_features.unwrap_or(width).max(1);
    let mut h = Matrix::zeros(labels.len(), cols);
    for (r, row) in entries.iter().enumerate() {
        for &(c, v) in row {
            h[(r, c)] = v;
        }
    }
    Ok((h, Vector::from_vec(labels)))
}

pub fn load_libsvm(path: &Path, n_features: Option<usize>) -> Result<(Matrix, Vector)> {
    parse_libsvm(&read_text(path)?, n_features)
}

/// Parses a comma separated list of block sizes, e.g. `"2,2"`.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parameter(format!("bad block size {t:?}")))
        })
        .collect()
}
