//! The four distributed iterations. Each advances the stacked node state
//! `x = (x_1, ..., x_N)` by one step given the graph sampled for that step.
//!
//! The stacked vector is viewed as an `m × N` matrix whose column `i` is
//! `x_i`, so neighbour averaging is a single product with the weight matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::graphs::{laplacian, Graph};
use crate::linalg::{kron_identity, Matrix, Vector};
use crate::mixing::MixingWeight;
use crate::problem::{NetworkProblem, NodeBlock};
use crate::seed::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Projection,
    RandomizedProjection,
    GradientDescent,
    RandomizedGd,
}

impl SolverKind {
    pub fn is_projection(self) -> bool {
        matches!(
            self,
            SolverKind::Projection | SolverKind::RandomizedProjection
        )
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Projection => "projection",
            SolverKind::RandomizedProjection => "randomized-projection",
            SolverKind::GradientDescent => "gd",
            SolverKind::RandomizedGd => "randomized-gd",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "projection" => Ok(SolverKind::Projection),
            "randomized-projection" => Ok(SolverKind::RandomizedProjection),
            "gd" => Ok(SolverKind::GradientDescent),
            "randomized-gd" => Ok(SolverKind::RandomizedGd),
            other => Err(Error::Config(format!("unknown solver {other:?}"))),
        }
    }
}

/// Step size `α(t)` for the gradient iterations.
///
/// `scale` multiplies the textbook sequences; it leaves the summability
/// conditions intact and lets `α(t) ≤ h` hold from `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `scale / (t+1)^(1/2 + delta1)` with `delta1 ∈ (0, 1/2]`.
    Power {
        delta1: f64,
        scale: f64,
    },
    /// `scale / (t+1)`.
    Harmonic {
        scale: f64,
    },
    Constant {
        alpha: f64,
    },
}

impl StepSchedule {
    pub fn power(delta1: f64, scale: f64) -> Result<Self> {
        if !(delta1 > 0.0 && delta1 <= 0.5) {
            return Err(Error::Parameter(format!(
                "delta1 = {delta1} outside (0, 0.5]"
            )));
        }
        check_positive(scale, "scale")?;
        Ok(StepSchedule::Power { delta1, scale })
    }

    pub fn harmonic(scale: f64) -> Result<Self> {
        check_positive(scale, "scale")?;
        Ok(StepSchedule::Harmonic { scale })
    }

    pub fn constant(alpha: f64) -> Result<Self> {
        check_positive(alpha, "alpha")?;
        Ok(StepSchedule::Constant { alpha })
    }

    pub fn alpha(&self, t: u64) -> f64 {
        let t1 = t as f64 + 1.0;
        match *self {
            StepSchedule::Power { delta1, scale } => scale / t1.powf(0.5 + delta1),
            StepSchedule::Harmonic { scale } => scale / t1,
            StepSchedule::Constant { alpha } => alpha,
        }
    }
}

fn check_positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "{what} must be positive, got {v}"
        )))
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSchedule::Power { delta1, scale } => write!(f, "power:{delta1}:{scale}"),
            StepSchedule::Harmonic { scale } => write!(f, "harmonic:{scale}"),
            StepSchedule::Constant { alpha } => write!(f, "constant:{alpha}"),
        }
    }
}

/// Parses `power:<delta1>[:<scale>]`, `harmonic[:<scale>]` or
/// `constant:<alpha>`.
impl FromStr for StepSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts[i]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number {:?} in schedule", parts[i])))
        };
        match (parts[0], parts.len()) {
            ("power", 2) => StepSchedule::power(num(1)?, 1.0),
            ("power", 3) => StepSchedule::power(num(1)?, num(2)?),
            ("harmonic", 1) => StepSchedule::harmonic(1.0),
            ("harmonic", 2) => StepSchedule::harmonic(num(1)?),
            ("constant", 2) => StepSchedule::constant(num(1)?),
            _ => Err(Error::Config(format!("unknown schedule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: u64,
    pub x: Vector,
    rng: StreamRng,
}

impl SolverState {
    /// `rows_seed` drives the randomized row selection only.
    pub fn new(x: Vector, rows_seed: u64) -> Self {
        Self {
            t: 0,
            x,
            rng: StreamRng::seed_from_u64(rows_seed),
        }
    }

    pub fn node(&self, i: usize, m: usize) -> Vector {
        self.x.rows(i * m, m).clone_owned()
    }
}

fn as_columns(x: &Vector, m: usize) -> Matrix {
    DMatrix::from_column_slice(m, x.len() / m, x.as_slice())
}

fn check_dims(p: &NetworkProblem, n_graph: usize, s: &SolverState) -> Result<()> {
    p.check_stacked(&s.x)?;
    if n_graph != p.n_nodes() {
        return Err(Error::Shape(format!(
            "graph on {n_graph} nodes for a {}-node problem",
            p.n_nodes()
        )));
    }
    Ok(())
}

/// Row sampling law `|H_i^(s)|² / |H_i|_F²`.
pub fn row_probabilities(node: &NodeBlock) -> Vec<f64> {
    node.row_norms_sq
        .iter()
        .map(|r| r / node.frobenius_sq)
        .collect()
}

fn sample_row(node: &NodeBlock, index: usize, rng: &mut StreamRng) -> Result<usize> {
    if node.frobenius_sq <= 0.0 {
        return Err(Error::DegenerateRow {
            node: index,
            row: 0,
        });
    }
    let mut u = rng.random::<f64>() * node.frobenius_sq;
    let mut chosen = node.rows() - 1;
    for (r, &w) in node.row_norms_sq.iter().enumerate() {
        if u < w {
            chosen = r;
            break;
        }
        u -= w;
    }
    if node.row_norms_sq[chosen] <= 0.0 {
        return Err(Error::DegenerateRow {
            node: index,
            row: chosen,
        });
    }
    Ok(chosen)
}

/// `x_i(t+1) = Π_{A_i}(Σ_j W_ij x_j(t))`.
pub fn step_projection_consensus(
    p: &NetworkProblem,
    w: &MixingWeight,
    s: &mut SolverState,
) -> Result<()> {
    check_dims(p, w.n(), s)?;
    let m = p.dim();
    let mixed = as_columns(&s.x, m) * &w.w;
    for (i, node) in p.nodes().iter().enumerate() {
        let xi = node.project(&mixed.column(i).clone_owned());
        s.x.rows_mut(i * m, m).copy_from(&xi);
    }
    s.t += 1;
    Ok(())
}

/// Projection onto the hyperplane of a single row sampled per node.
pub fn step_randomized_projection(
    p: &NetworkProblem,
    w: &MixingWeight,
    s: &mut SolverState,
) -> Result<()> {
    check_dims(p, w.n(), s)?;
    let m = p.dim();
    let mixed = as_columns(&s.x, m) * &w.w;
    for (i, node) in p.nodes().iter().enumerate() {
        let r = sample_row(node, i, &mut s.rng)?;
        let row = node.h.row(r);
        let v = mixed.column(i);
        let resid = (row * v)[0] - node.z[r];
        let scale = resid / node.row_norms_sq[r];
        let mut xi = s.x.rows_mut(i * m, m);
        for k in 0..m {
            xi[k] = v[k] - scale * row[k];
        }
    }
    s.t += 1;
    Ok(())
}

fn checked_alpha(sched: &StepSchedule, h: f64, t: u64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidStep(format!("h must be positive, got {h}")));
    }
    let alpha = sched.alpha(t);
    if alpha > h {
        return Err(Error::StepOrder { t, alpha, h });
    }
    Ok(alpha)
}

/// `x(t+1) = (I - h L ⊗ I_m) x(t) - α(t) (H_d x(t) - z_H)`.
pub fn step_gradient_descent(
    p: &NetworkProblem,
    g: &Graph,
    h: f64,
    sched: &StepSchedule,
    s: &mut SolverState,
) -> Result<()> {
    check_dims(p, g.n(), s)?;
    let alpha = checked_alpha(sched, h, s.t)?;
    let m = p.dim();
    let cols = as_columns(&s.x, m);
    let consensus = &cols - (&cols * laplacian(g)) * h;
    for (i, node) in p.nodes().iter().enumerate() {
        let xi = cols.column(i);
        let grad = &node.gram * xi - &node.hz;
        let next = consensus.column(i) - grad * alpha;
        s.x.rows_mut(i * m, m).copy_from(&next);
    }
    s.t += 1;
    Ok(())
}

/// Gradient iteration using one sampled row per node.
pub fn step_randomized_gd(
    p: &NetworkProblem,
    g: &Graph,
    h: f64,
    sched: &StepSchedule,
    s: &mut SolverState,
) -> Result<()> {
    check_dims(p, g.n(), s)?;
    let alpha = checked_alpha(sched, h, s.t)?;
    let m = p.dim();
    let cols = as_columns(&s.x, m);
    let consensus = &cols - (&cols * laplacian(g)) * h;
    for (i, node) in p.nodes().iter().enumerate() {
        let r = sample_row(node, i, &mut s.rng)?;
        let row = node.h.row(r);
        let xi = cols.column(i);
        let resid = (row * xi)[0] - node.z[r];
        let next = consensus.column(i) - row.transpose() * (alpha * resid);
        s.x.rows_mut(i * m, m).copy_from(&next);
    }
    s.t += 1;
    Ok(())
}

/// Lifted error map `P (W ⊗ I_m) P` of the projection iteration.
pub fn error_map(p: &NetworkProblem, w: &Matrix) -> Result<Matrix> {
    let proj = p.lifted_projector();
    Ok(&proj * kron_identity(w, p.dim())? * &proj)
}
