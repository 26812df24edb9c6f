//! Computable theory quantities: rate bounds for i.i.d. graphs, error
//! metrics, log-linear rate fits and the mixed-norm contraction witness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{is_connected, laplacian, union_graph, Graph, GraphProcess, ProcessKind};
use crate::linalg::{
    kron_identity, mixed_matrix_norm, spectral_radius, symmetrize, Matrix, Vector,
};
use crate::mixing::{mean_weight, weight_distribution, weight_from_graph, WeightRule};
use crate::problem::NetworkProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub theta1: f64,
    pub theta2: f64,
    pub lifted_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub max_lifted_dim: usize,
    /// Draws for the Monte Carlo second-moment estimate, used only when a
    /// Bernoulli process is too large to enumerate.
    pub mc_draws: usize,
    pub mc_seed: u64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            max_lifted_dim: 1024,
            mc_draws: 4000,
            mc_seed: 0,
        }
    }
}

/// `E[(W ⊗ I) P (W ⊗ I)]` and `E[W]` for an i.i.d. weight process.
pub fn lifted_moments(
    p: &NetworkProblem,
    proc: &ProcessKind,
    rule: WeightRule,
    opts: &BoundOptions,
) -> Result<(Matrix, Matrix)> {
    let m = p.dim();
    let n = p.n_nodes();
    if proc.n_nodes() != n {
        return Err(Error::Shape(format!(
            "process on {} nodes for a {n}-node problem",
            proc.n_nodes()
        )));
    }
    let d = n * m;
    let proj = p.lifted_projector();
    let sandwich = |w: &Matrix| -> Result<Matrix> {
        let lifted = kron_identity(w, m)?;
        Ok(&lifted * &proj * &lifted)
    };

    match proc {
        ProcessKind::Fixed(_) | ProcessKind::IidUniform { .. } => {}
        ProcessKind::IidBernoulli { base, q } => {
            if let WeightRule::Laplacian { h: Some(h) } = rule {
                // independent edges: the cross terms factor, only per-edge
                // variances survive
                let wbar = mean_weight(proc, rule)?;
                let mut second = sandwich(&wbar)?;
                let var = h * h * q * (1.0 - q);
                for (i, j) in base.edges() {
                    let le = laplacian(&Graph::from_edges(n, [(i, j)])?);
                    second += sandwich(&le)? * var;
                }
                return Ok((second, wbar));
            }
            if weight_distribution(proc, rule).is_err() {
                let mut sampler = GraphProcess::new(proc.clone(), opts.mc_seed)?;
                let mut second = Matrix::zeros(d, d);
                let mut wbar = Matrix::zeros(n, n);
                for _ in 0..opts.mc_draws {
                    sampler.advance();
                    let w = weight_from_graph(sampler.current(), rule)?.w;
                    second += sandwich(&w)?;
                    wbar += w;
                }
                let k = opts.mc_draws.max(1) as f64;
                return Ok((second / k, wbar / k));
            }
        }
        other => {
            return Err(Error::UnsupportedProcess(format!(
                "rate bounds need an i.i.d. process, got {}",
                other.name()
            )))
        }
    }
    let dist = weight_distribution(proc, rule)?;
    let mut second = Matrix::zeros(d, d);
    let mut wbar = Matrix::zeros(n, n);
    for (prob, w) in &dist {
        second += sandwich(w)? * *prob;
        wbar += w * *prob;
    }
    Ok((second, wbar))
}

/// Lower/upper bounds `θ₁ ≤ r ≤ θ₂` on the mean-squared exponential rate of
/// the projection iteration over i.i.d. graphs.
pub fn rate_bounds_iid(
    p: &NetworkProblem,
    proc: &ProcessKind,
    rule: WeightRule,
    opts: &BoundOptions,
) -> Result<RateBounds> {
    let d = p.n_nodes() * p.dim();
    if d > opts.max_lifted_dim {
        return Err(Error::Size(format!(
            "lifted dimension {d} exceeds cap {}",
            opts.max_lifted_dim
        )));
    }
    let (second, wbar) = lifted_moments(p, proc, rule, opts)?;
    bounds_from_moments(p, &second, &wbar)
}

/// `θ₁ = sr(P (W̄⊗I) P)²` and `θ₂ = sr(P S P)` for a precomputed second
/// moment `S = E[(W⊗I) P (W⊗I)]`.
pub fn bounds_from_moments(
    p: &NetworkProblem,
    second: &Matrix,
    wbar: &Matrix,
) -> Result<RateBounds> {
    let proj = p.lifted_projector();
    let mean_map = symmetrize(&(&proj * kron_identity(wbar, p.dim())? * &proj));
    let second_map = symmetrize(&(&proj * second * &proj));
    let theta1 = spectral_radius(&mean_map, 1e-12)?.powi(2);
    let theta2 = spectral_radius(&second_map, 1e-12)?;
    Ok(RateBounds {
        theta1,
        theta2,
        lifted_dim: proj.nrows(),
    })
}

/// `‖(P W̄⊗I P)^t e(0)‖²` for `t = 0..=t_max`: the Jensen lower bound on
/// `E‖e(t)‖²`.
pub fn mean_error_curve(
    p: &NetworkProblem,
    wbar: &Matrix,
    e0: &Vector,
    t_max: usize,
) -> Result<Vec<f64>> {
    p.check_stacked(e0)?;
    let proj = p.lifted_projector();
    let map = &proj * kron_identity(wbar, p.dim())? * &proj;
    let mut e = e0.clone();
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(e.norm_squared());
    for _ in 0..t_max {
        e = &map * e;
        out.push(e.norm_squared());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `(1/N) Σ |x_i - target|²`
    pub e1: f64,
    /// `(1/N) Σ |x_i - x̄|²`
    pub e2: f64,
    /// `max_i |x_i - target|`
    pub max_node_err: f64,
}

pub fn metrics(p: &NetworkProblem, x: &Vector, target: &Vector) -> Result<Metrics> {
    p.check_stacked(x)?;
    let m = p.dim();
    if target.len() != m {
        return Err(Error::Shape(format!(
            "target has {} entries, expected {m}",
            target.len()
        )));
    }
    let n = p.n_nodes();
    let mut mean = Vector::zeros(m);
    for i in 0..n {
        mean += x.rows(i * m, m);
    }
    mean /= n as f64;
    let (mut e1, mut e2, mut worst) = (0.0, 0.0, 0.0_f64);
    for i in 0..n {
        let xi = x.rows(i * m, m);
        let d = (xi - target).norm_squared();
        e1 += d;
        worst = worst.max(d);
        e2 += (xi - &mean).norm_squared();
    }
    Ok(Metrics {
        e1: e1 / n as f64,
        e2: e2 / n as f64,
        max_node_err: worst.sqrt(),
    })
}

/// Per-iteration metrics of one trajectory, `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub solver: String,
    pub iterations: usize,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub max_node_err: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn new(seed: u64, solver: String, iterations: usize) -> Self {
        Self {
            seed,
            solver,
            iterations,
            e1: Vec::with_capacity(iterations + 1),
            e2: Vec::with_capacity(iterations + 1),
            max_node_err: Vec::with_capacity(iterations + 1),
        }
    }

    pub fn push(&mut self, m: Metrics) {
        self.e1.push(m.e1);
        self.e2.push(m.e2);
        self.max_node_err.push(m.max_node_err);
    }
}

/// Middle 60% of `0..len`.
pub fn default_window(len: usize) -> (usize, usize) {
    let last = len.saturating_sub(1);
    let lo = (last as f64 * 0.2).floor() as usize;
    let hi = (last as f64 * 0.8).ceil() as usize;
    (lo, hi.min(last))
}

/// Relative level below which a decaying series is treated as round-off.
pub const FIT_FLOOR: f64 = 1e-24;

/// Middle 60% of the prefix that stays above `FIT_FLOOR · series[0]`.
/// `None` when that prefix is too short to fit.
pub fn auto_window(series: &[f64]) -> Option<(usize, usize)> {
    let first = *series.first()?;
    if !(first > 0.0 && first.is_finite()) {
        return None;
    }
    let floor = first * FIT_FLOOR;
    let len = series
        .iter()
        .position(|v| !(*v > floor && v.is_finite()))
        .unwrap_or(series.len());
    let (lo, hi) = default_window(len);
    (hi > lo + 1).then_some((lo, hi))
}

fn window_slice(series: &[f64], window: (usize, usize)) -> Result<&[f64]> {
    let (lo, hi) = window;
    if hi <= lo + 1 || hi >= series.len() {
        return Err(Error::Domain(format!(
            "window ({lo}, {hi}) invalid for {} points",
            series.len()
        )));
    }
    let slice = &series[lo..=hi];
    if let Some(bad) = slice.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!(
            "nonpositive value {} at t={}",
            slice[bad],
            lo + bad
        )));
    }
    Ok(slice)
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Per-iteration geometric factor from a least-squares fit of `ln(series)`
/// against `t` over the inclusive window.
pub fn fit_exponential_rate(series: &[f64], window: (usize, usize)) -> Result<f64> {
    let slice = window_slice(series, window)?;
    let ts: Vec<f64> = (window.0..=window.1).map(|t| t as f64).collect();
    let logs: Vec<f64> = slice.iter().map(|v| v.ln()).collect();
    Ok(ls_slope(&ts, &logs).exp())
}

/// Power-law exponent from a fit of `ln(series)` against `ln(t+1)`.
pub fn fit_power_rate(series: &[f64], window: (usize, usize)) -> Result<f64> {
    let slice = window_slice(series, window)?;
    let ts: Vec<f64> = (window.0..=window.1)
        .map(|t| (t as f64 + 1.0).ln())
        .collect();
    let logs: Vec<f64> = slice.iter().map(|v| v.ln()).collect();
    Ok(ls_slope(&ts, &logs))
}

/// Mixed norm of `P (W_k ⊗ I) P ··· P (W_1 ⊗ I) P` over the graph sequence.
///
/// With `strict`, a sequence whose union graph is disconnected is rejected.
pub fn contraction_check(
    p: &NetworkProblem,
    graph_seq: &[Graph],
    rule: WeightRule,
    strict: bool,
) -> Result<f64> {
    let m = p.dim();
    let proj = p.lifted_projector();
    if strict && !graph_seq.is_empty() && !is_connected(&union_graph(graph_seq)?) {
        return Err(Error::Connectivity(
            "union of the graph sequence is disconnected".into(),
        ));
    }
    let mut product = proj.clone();
    for g in graph_seq {
        if g.n() != p.n_nodes() {
            return Err(Error::Shape(format!(
                "graph on {} nodes for a {}-node problem",
                g.n(),
                p.n_nodes()
            )));
        }
        let w = weight_from_graph(g, rule)?;
        product = &proj * (kron_identity(&w.w, m)? * product);
    }
    mixed_matrix_norm(&product, m)
}

/// Repeats a window `N(N-1)/2` times, the horizon of the contraction lemma.
pub fn repeat_window(window: &[Graph], n_nodes: usize) -> Vec<Graph> {
    let rho = n_nodes * n_nodes.saturating_sub(1) / 2;
    let mut out = Vec::with_capacity(window.len() * rho.max(1));
    for _ in 0..rho.max(1) {
        out.extend_from_slice(window);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::partition_problem;
    use crate::seed::StreamRng;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};

    fn mat(r: usize, c: usize, d: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, d)
    }

    #[test]
    fn bounds_single_node_kernel_survives() {
        let p =
            partition_problem(mat(1, 2, &[1.0, 0.0]), Vector::from_element(1, 1.0), &[1]).unwrap();
        let proc = ProcessKind::Fixed(Graph::empty(1));
        let b =
            rate_bounds_iid(&p, &proc, WeightRule::default(), &BoundOptions::default()).unwrap();
        assert_abs_diff_eq!(b.theta1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.theta2, 1.0, epsilon = 1e-12);
        assert_eq!(b.lifted_dim, 2);
    }

    #[test]
    fn bounds_zero_projectors() {
        let p = partition_problem(
            mat(2, 1, &[1.0, 1.0]),
            Vector::from_element(2, 1.0),
            &[1, 1],
        )
        .unwrap();
        let proc = ProcessKind::IidUniform {
            space: vec![Graph::complete(2), Graph::empty(2)],
        };
        let b =
            rate_bounds_iid(&p, &proc, WeightRule::default(), &BoundOptions::default()).unwrap();
        assert_eq!(b.theta1, 0.0);
        assert_eq!(b.theta2, 0.0);
    }

    #[test]
    fn singleton_space_bounds_coincide() {
        let h = mat(3, 2, &[1.0, 0.5, -0.3, 1.0, 0.8, 0.2]);
        let z = &h * Vector::from_row_slice(&[1.0, 2.0]);
        let p = partition_problem(h, z, &[1, 1, 1]).unwrap();
        let g = Graph::path(3);
        let proc = ProcessKind::IidUniform {
            space: vec![g.clone()],
        };
        let b =
            rate_bounds_iid(&p, &proc, WeightRule::default(), &BoundOptions::default()).unwrap();
        // oracle: eigendecomposition of the fixed lifted matrix
        let w = weight_from_graph(&g, WeightRule::default()).unwrap().w;
        let proj = p.lifted_projector();
        let a = &proj * kron_identity(&w, 2).unwrap() * &proj;
        let sr = SymmetricEigen::new(symmetrize(&a))
            .eigenvalues
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        assert_abs_diff_eq!(b.theta1, sr * sr, epsilon = 1e-12);
        assert_abs_diff_eq!(b.theta2, sr * sr, epsilon = 1e-12);
        assert!(b.theta2 < 1.0);
    }

    #[test]
    fn unsupported_process_for_bounds() {
        let p = partition_problem(Matrix::identity(2, 2), Vector::zeros(2), &[1, 1]).unwrap();
        let proc = ProcessKind::Markov {
            space: vec![Graph::complete(2)],
            transition: Matrix::identity(1, 1),
            initial: vec![1.0],
        };
        assert!(matches!(
            rate_bounds_iid(&p, &proc, WeightRule::default(), &BoundOptions::default()),
            Err(Error::UnsupportedProcess(_))
        ));
        let opts = BoundOptions {
            max_lifted_dim: 3,
            ..BoundOptions::default()
        };
        let fixed = ProcessKind::Fixed(Graph::complete(2));
        assert!(matches!(
            rate_bounds_iid(&p, &fixed, WeightRule::default(), &opts),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn bernoulli_closed_form_second_moment_matches_enumeration() {
        let h = mat(
            4,
            3,
            &[1.0, 0.2, 0.0, 0.0, 1.0, -0.4, 0.3, 0.0, 1.0, 1.0, 1.0, 1.0],
        );
        let z = Vector::zeros(4);
        let p = partition_problem(h, z, &[1, 1, 1, 1]).unwrap();
        let base = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 2)]).unwrap();
        let proc = ProcessKind::IidBernoulli { base, q: 0.6 };
        let rule = WeightRule::Laplacian { h: Some(0.2) };
        let opts = BoundOptions::default();
        let (closed, wbar) = lifted_moments(&p, &proc, rule, &opts).unwrap();
        let dist = weight_distribution(&proc, rule).unwrap();
        let proj = p.lifted_projector();
        let mut enumerated = Matrix::zeros(12, 12);
        for (prob, w) in dist {
            let l = kron_identity(&w, 3).unwrap();
            enumerated += &l * &proj * &l * prob;
        }
        assert!((closed - enumerated).amax() < 1e-12);
        validate_doubly_stochastic(&wbar);
    }

    fn validate_doubly_stochastic(w: &Matrix) {
        for i in 0..w.nrows() {
            assert_abs_diff_eq!(w.row(i).sum(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(w.column(i).sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn metrics_examples() {
        let p = partition_problem(Matrix::identity(2, 2), Vector::zeros(2), &[1, 1]).unwrap();
        let target = Vector::from_row_slice(&[1.0, -1.0]);
        let u = Vector::from_row_slice(&[0.3, 0.4]);
        let stack =
            |a: &Vector, b: &Vector| Vector::from_iterator(4, a.iter().chain(b.iter()).copied());

        let m = metrics(&p, &stack(&target, &target), &target).unwrap();
        assert_eq!((m.e1, m.e2), (0.0, 0.0));

        let m = metrics(&p, &stack(&(&target + &u), &(&target - &u)), &target).unwrap();
        assert_abs_diff_eq!(m.e1, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.e2, 0.25, epsilon = 1e-15);

        let shifted = &target + &u;
        let m = metrics(&p, &stack(&shifted, &shifted), &target).unwrap();
        assert_abs_diff_eq!(m.e1, 0.25, epsilon = 1e-15);
        assert_eq!(m.e2, 0.0);
        assert_abs_diff_eq!(m.max_node_err, 0.5, epsilon = 1e-15);

        assert!(matches!(
            metrics(&p, &Vector::zeros(3), &target),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn exponential_fit_examples() {
        let s: Vec<f64> = (0..200).map(|t| 3.0 * 0.9f64.powi(t)).collect();
        assert_abs_diff_eq!(
            fit_exponential_rate(&s, (10, 150)).unwrap(),
            0.9,
            epsilon = 1e-12
        );
        let c = vec![2.5; 50];
        assert_abs_diff_eq!(
            fit_exponential_rate(&c, default_window(50)).unwrap(),
            1.0,
            epsilon = 1e-12
        );

        let mut rng = StreamRng::seed_from_u64(17);
        let noisy: Vec<f64> = (0..300)
            .map(|t| 3.0 * 0.9f64.powi(t) * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        assert_abs_diff_eq!(
            fit_exponential_rate(&noisy, (20, 280)).unwrap(),
            0.9,
            epsilon = 1e-2
        );

        let mut bad = s.clone();
        bad[40] = 0.0;
        assert!(matches!(
            fit_exponential_rate(&bad, (10, 150)),
            Err(Error::Domain(_))
        ));
        assert!(fit_exponential_rate(&s, (10, 11)).is_err());
    }

    #[test]
    fn power_fit_examples() {
        let s: Vec<f64> = (0..100).map(|t| 1.0 / (t as f64 + 1.0)).collect();
        assert_abs_diff_eq!(fit_power_rate(&s, (1, 99)).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            fit_power_rate(&[4.0; 30], (0, 29)).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let s: Vec<f64> = (0..=10_000)
            .map(|t| 7.0 * (t as f64 + 1.0).powf(-0.4))
            .collect();
        assert_abs_diff_eq!(
            fit_power_rate(&s, (1000, 10_000)).unwrap(),
            -0.4,
            epsilon = 2e-2
        );
    }

    #[test]
    fn window_is_middle_sixty_percent() {
        assert_eq!(default_window(101), (20, 80));
        assert_eq!(default_window(2001), (400, 1600));
    }

    #[test]
    fn auto_window_stops_at_round_off() {
        let mut s: Vec<f64> = (0..101).map(|t| 0.8f64.powi(t)).collect();
        assert_eq!(auto_window(&s), Some((20, 80)));
        for v in s.iter_mut().skip(51) {
            *v = 0.0;
        }
        assert_eq!(auto_window(&s), Some((10, 40)));
        assert_eq!(auto_window(&[0.0, 1.0, 1.0, 1.0]), None);
        assert_eq!(auto_window(&[1.0, 1.0]), None);
    }

    fn unique_pair_problem() -> NetworkProblem {
        partition_problem(
            Matrix::identity(2, 2),
            Vector::from_row_slice(&[1.0, 2.0]),
            &[1, 1],
        )
        .unwrap()
    }

    #[test]
    fn contraction_examples() {
        let p = unique_pair_problem();
        let proj = p.lifted_projector();
        let empty = contraction_check(&p, &[], WeightRule::default(), true).unwrap();
        assert_abs_diff_eq!(empty, mixed_matrix_norm(&proj, 2).unwrap(), epsilon = 1e-15);

        let seq = repeat_window(&[Graph::complete(2)], 2);
        assert_eq!(seq.len(), 1);
        let v = contraction_check(&p, &seq, WeightRule::default(), true).unwrap();
        assert!(v < 1.0, "{v}");

        assert!(matches!(
            contraction_check(&p, &[Graph::empty(2)], WeightRule::default(), true),
            Err(Error::Connectivity(_))
        ));
        assert!(contraction_check(&p, &[Graph::empty(2)], WeightRule::default(), false).is_ok());
    }

    #[test]
    fn contraction_respects_submultiplicative_bound() {
        let h = mat(3, 2, &[1.0, 0.5, -0.3, 1.0, 0.8, 0.2]);
        let p = partition_problem(h, Vector::zeros(3), &[1, 1, 1]).unwrap();
        let seq = vec![Graph::path(3), Graph::empty(3), Graph::complete(3)];
        let v = contraction_check(&p, &seq, WeightRule::default(), false).unwrap();
        let pn = mixed_matrix_norm(&p.lifted_projector(), 2).unwrap();
        let mut bound = pn * pn;
        for g in &seq {
            let w = weight_from_graph(g, WeightRule::default()).unwrap().w;
            bound *= mixed_matrix_norm(&kron_identity(&w, 2).unwrap(), 2).unwrap();
        }
        assert!(v <= bound + 1e-12);
    }
}
