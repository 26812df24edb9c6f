//! Experiment assembly, parallel trajectory execution and aggregation.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{even_partition, ExperimentConfig, InitKind, ProblemSource, ProcessChoice};
use crate::analysis::{
    auto_window, bounds_from_moments, fit_exponential_rate, fit_power_rate, lifted_moments,
    mean_error_curve, metrics, BoundOptions, RateBounds, TrajectoryRecord,
};
use crate::error::{Error, Result};
use crate::graphs::{
    random_connected_graph, random_sample_space, random_temporal_dynamics,
    random_transition_matrix, read_graphs, stationary_distribution, Graph, GraphProcess,
    ProcessKind,
};
use crate::linalg::{pseudoinverse, Matrix, Vector};
use crate::mixing::{weight_from_graph, MixingWeight, WeightRule};
use crate::problem::{
    classify_solutions, generate_synthetic, load_libsvm, load_problem, parse_sizes,
    partition_problem, projection_average, NetworkProblem, SolutionInfo, SolutionKind,
    SyntheticParams, RANK_TOL,
};
use crate::seed::{derive_seed, stream_rng, Stream};
use crate::solvers::{
    step_gradient_descent, step_projection_consensus, step_randomized_gd,
    step_randomized_projection, SolverKind, SolverState, StepSchedule,
};

/// Worker-count override for the trajectory pool.
pub const WORKERS_ENV: &str = "NETLIN_WORKERS";

/// Relative residual tolerance for deciding that `z` is in `range(H)`.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// Everything a set of trajectories shares.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub problem: NetworkProblem,
    pub info: SolutionInfo,
    pub process: ProcessKind,
    pub solver: SolverKind,
    pub rule: WeightRule,
    pub gd: Option<(f64, StepSchedule)>,
    /// Weights for each sample-space graph (or the single fixed graph).
    weights: Vec<MixingWeight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub seed: u64,
    pub solver: String,
    pub runs: usize,
    pub iterations: usize,
    pub solution: SolutionKind,
    pub rank: usize,
    pub e1: Vec<f64>,
    pub e1_stderr: Vec<f64>,
    pub e2: Vec<f64>,
    pub e2_stderr: Vec<f64>,
    /// Mean over runs of `max_i |x_i(t) - target|`.
    pub max_node_err: Vec<f64>,
    /// Worst run of `max_i |x_i(t) - target|`.
    pub max_node_err_worst: Vec<f64>,
    pub exp_rate: Option<f64>,
    pub power_rate: Option<f64>,
    pub bounds: Option<RateBounds>,
    /// Why bounds are absent when they were requested.
    pub bounds_note: Option<String>,
    /// `(1/N) |(P W̄⊗I P)^t e(0)|²`, available with bounds and a shared
    /// initial state.
    pub mean_map_curve: Option<Vec<f64>>,
    #[serde(skip)]
    pub records: Vec<TrajectoryRecord>,
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<NetworkProblem> {
    let partition = |rows: usize| -> Result<Vec<usize>> {
        match &cfg.partition {
            Some(s) => parse_sizes(s),
            None => even_partition(rows, cfg.nodes),
        }
    };
    match cfg.problem {
        ProblemSource::Synthetic => {
            let params = SyntheticParams {
                n_nodes: cfg.nodes,
                dim: cfg.dim,
                rank: cfg.rank.unwrap_or(cfg.dim),
                rows: cfg.synthetic_rows()?,
                residual: cfg.residual,
            };
            let mut rng = stream_rng(cfg.seed, 0, Stream::Problem);
            let s = generate_synthetic(&params, &mut rng)?;
            partition_problem(s.h, s.z, &s.sizes)
        }
        ProblemSource::Files => {
            let (Some(mp), Some(vp)) = (&cfg.matrix, &cfg.vector) else {
                return Err(Error::Config("file problems need matrix and vector".into()));
            };
            let (h, z) = load_problem(mp, vp)?;
            let sizes = partition(h.nrows())?;
            partition_problem(h, z, &sizes)
        }
        ProblemSource::Libsvm => {
            let Some(path) = &cfg.libsvm else {
                return Err(Error::Config("libsvm problems need a libsvm path".into()));
            };
            let (h, z) = load_libsvm(path, cfg.libsvm_features)?;
            let sizes = partition(h.nrows())?;
            partition_problem(h, z, &sizes)
        }
    }
}

pub fn build_process(cfg: &ExperimentConfig, n: usize) -> Result<ProcessKind> {
    let mut rng = stream_rng(cfg.seed, 0, Stream::Space);
    let from_file = match &cfg.graphs {
        Some(path) => {
            let gs = read_graphs(path)?;
            if let Some(g) = gs.iter().find(|g| g.n() != n) {
                return Err(Error::Config(format!(
                    "graph file has a {}-node graph for {n} nodes",
                    g.n()
                )));
            }
            Some(gs)
        }
        None => None,
    };
    let single = |rng: &mut _| -> Result<Graph> {
        match &from_file {
            Some(gs) => gs
                .first()
                .cloned()
                .ok_or_else(|| Error::Config("graph file is empty".into())),
            None => random_connected_graph(n, cfg.base_p, rng),
        }
    };
    let space = |rng: &mut _| -> Result<Vec<Graph>> {
        match &from_file {
            Some(gs) => Ok(gs.clone()),
            None => random_sample_space(n, cfg.space_size, cfg.keep, cfg.base_p, rng),
        }
    };
    Ok(match cfg.process {
        ProcessChoice::Fixed => ProcessKind::Fixed(single(&mut rng)?),
        ProcessChoice::IidBernoulli => ProcessKind::IidBernoulli {
            base: single(&mut rng)?,
            q: cfg.q,
        },
        ProcessChoice::IidUniform => ProcessKind::IidUniform {
            space: space(&mut rng)?,
        },
        ProcessChoice::Markov => {
            let space = space(&mut rng)?;
            let transition = random_transition_matrix(space.len(), &mut rng);
            let initial = stationary_distribution(&transition)?;
            ProcessKind::Markov {
                space,
                transition,
                initial,
            }
        }
        ProcessChoice::Temporal => {
            let space = space(&mut rng)?;
            let (a, c, v0) = random_temporal_dynamics(
                space.len(),
                cfg.temporal_dim,
                cfg.temporal_radius,
                &mut rng,
            )?;
            ProcessKind::Temporal { space, a, c, v0 }
        }
    })
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let problem = build_problem(cfg)?;
        let process = build_process(cfg, problem.n_nodes())?;
        Self::new(problem, process, cfg)
    }

    pub fn new(
        problem: NetworkProblem,
        process: ProcessKind,
        cfg: &ExperimentConfig,
    ) -> Result<Self> {
        if process.n_nodes() != problem.n_nodes() {
            return Err(Error::Config(format!(
                "process on {} nodes for a {}-node problem",
                process.n_nodes(),
                problem.n_nodes()
            )));
        }
        let solver = cfg.solver_kind()?;
        let rule = cfg.rule()?;
        let info = classify_solutions(&problem, CONSISTENCY_TOL)?;
        if solver.is_projection() && !info.has_exact() {
            return Err(Error::Config(format!(
                "{solver} needs an exactly solvable system; use a gradient solver"
            )));
        }
        let gd = if solver.is_projection() {
            None
        } else {
            let h = cfg.h.unwrap_or(0.25 / problem.n_nodes() as f64);
            let sched = match &cfg.schedule {
                Some(s) => s.parse()?,
                None => StepSchedule::power(0.1, h)?,
            };
            Some((h, sched))
        };
        let weights = match &process {
            ProcessKind::Fixed(g) => vec![weight_from_graph(g, rule)?],
            ProcessKind::IidBernoulli { .. } => Vec::new(),
            other => other
                .space()
                .unwrap_or_default()
                .iter()
                .map(|g| weight_from_graph(g, rule))
                .collect::<Result<_>>()?,
        };
        Ok(Self {
            problem,
            info,
            process,
            solver,
            rule,
            gd,
            weights,
        })
    }

    /// Initial stacked state for `run` (shared across runs unless
    /// `init_per_run`).
    pub fn initial_state(&self, cfg: &ExperimentConfig, run: usize) -> Result<Vector> {
        let (n, m) = (self.problem.n_nodes(), self.problem.dim());
        let index = if cfg.init_per_run { run as u64 } else { 0 };
        let mut rng = stream_rng(cfg.seed, index, Stream::Init);
        let mut x = match cfg.init {
            InitKind::Zero => Vector::zeros(n * m),
            InitKind::Gaussian | InitKind::Projected => Vector::from_fn(n * m, |_, _| {
                cfg.init_scale * rng.sample::<f64, _>(StandardNormal)
            }),
        };
        if cfg.init == InitKind::Projected {
            for (i, node) in self.problem.nodes().iter().enumerate() {
                let xi = node.project(&x.rows(i * m, m).clone_owned());
                x.rows_mut(i * m, m).copy_from(&xi);
            }
        }
        Ok(x)
    }

    /// Limit point of the iteration from `x0`: `y*(x(0))` for the projection
    /// solvers, and for the gradient solvers the least-squares point whose
    /// kernel component matches the initial node average, which the
    /// iteration preserves.
    pub fn target(&self, x0: &Vector) -> Result<Vector> {
        if self.solver.is_projection() {
            return projection_average(&self.problem, x0);
        }
        if let Some(x) = self.info.x_ls.as_ref().or(self.info.x_star.as_ref()) {
            return Ok(x.clone());
        }
        let (n, m) = (self.problem.n_nodes(), self.problem.dim());
        let h = self.problem.h();
        let pinv = pseudoinverse(h, RANK_TOL)?;
        let mut mean = Vector::zeros(m);
        for i in 0..n {
            mean += x0.rows(i * m, m);
        }
        mean /= n as f64;
        let kernel = Matrix::identity(m, m) - &pinv * h;
        Ok(&pinv * self.problem.z() + kernel * mean)
    }

    /// One trajectory of `iterations` steps.
    pub fn run_trajectory(&self, cfg: &ExperimentConfig, run: usize) -> Result<TrajectoryRecord> {
        let x0 = self.initial_state(cfg, run)?;
        let target = self.target(&x0)?;
        let graph_seed = derive_seed(cfg.seed, run as u64, Stream::Graph);
        let mut proc = GraphProcess::new(self.process.clone(), graph_seed)?;
        let mut state = SolverState::new(x0, derive_seed(cfg.seed, run as u64, Stream::Rows));
        let mut rec = TrajectoryRecord::new(run as u64, self.solver.to_string(), cfg.iterations);
        let p = &self.problem;
        rec.push(metrics(p, &state.x, &target)?);
        let mut scratch;
        for _ in 0..cfg.iterations {
            let idx = proc.advance();
            match (self.solver, &self.gd) {
                (SolverKind::GradientDescent, Some((h, sched))) => {
                    step_gradient_descent(p, proc.current(), *h, sched, &mut state)?
                }
                (SolverKind::RandomizedGd, Some((h, sched))) => {
                    step_randomized_gd(p, proc.current(), *h, sched, &mut state)?
                }
                (solver, _) => {
                    let w = match (idx, &self.process) {
                        (Some(k), _) => &self.weights[k],
                        (None, ProcessKind::Fixed(_)) => &self.weights[0],
                        (None, _) => {
                            scratch = weight_from_graph(proc.current(), self.rule)?;
                            &scratch
                        }
                    };
                    if solver == SolverKind::Projection {
                        step_projection_consensus(p, w, &mut state)?
                    } else {
                        step_randomized_projection(p, w, &mut state)?
                    }
                }
            }
            rec.push(metrics(p, &state.x, &target)?);
        }
        Ok(rec)
    }

    fn bounds(
        &self,
        cfg: &ExperimentConfig,
    ) -> std::result::Result<(RateBounds, Option<Vec<f64>>), String> {
        if self.solver != SolverKind::Projection {
            return Err(format!(
                "rate bounds describe the projection iteration, not {}",
                self.solver
            ));
        }
        let d = self.problem.n_nodes() * self.problem.dim();
        if d > cfg.bound_cap {
            return Err(format!(
                "lifted dimension {d} exceeds cap {}",
                cfg.bound_cap
            ));
        }
        let opts = BoundOptions {
            max_lifted_dim: cfg.bound_cap,
            mc_draws: cfg.bound_mc_draws,
            mc_seed: derive_seed(cfg.seed, 0, Stream::Space),
        };
        let (second, wbar) = lifted_moments(&self.problem, &self.process, self.rule, &opts)
            .map_err(|e| e.to_string())?;
        let b = bounds_from_moments(&self.problem, &second, &wbar).map_err(|e| e.to_string())?;
        let curve = if cfg.init_per_run {
            None
        } else {
            let x0 = self.initial_state(cfg, 0).map_err(|e| e.to_string())?;
            let target = self.target(&x0).map_err(|e| e.to_string())?;
            let m = self.problem.dim();
            let e0 = Vector::from_fn(x0.len(), |r, _| x0[r] - target[r % m]);
            let n = self.problem.n_nodes() as f64;
            mean_error_curve(&self.problem, &wbar, &e0, cfg.iterations)
                .map(|c| c.into_iter().map(|v| v / n).collect())
                .ok()
        };
        Ok((b, curve))
    }
}

fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v:?} is not a count"))),
        // 0 lets rayon use the available parallelism
        Err(_) => Ok(0),
    }
}

/// Mean and standard error of the mean per column, summed in run order.
fn column_stats(series: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let r = series.len() as f64;
    let len = series[0].len();
    let mut mean = vec![0.0; len];
    for s in series {
        for (acc, v) in mean.iter_mut().zip(s.iter()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= r);
    let mut se = vec![0.0; len];
    if series.len() > 1 {
        for s in series {
            for ((acc, v), mu) in se.iter_mut().zip(s.iter()).zip(&mean) {
                *acc += (v - mu).powi(2);
            }
        }
        se.iter_mut()
            .for_each(|v| *v = (*v / (r - 1.0)).sqrt() / r.sqrt());
    }
    (mean, se)
}

pub fn aggregate(
    cfg: &ExperimentConfig,
    exp: &Experiment,
    records: Vec<TrajectoryRecord>,
) -> Result<AggregateResult> {
    if records.is_empty() {
        return Err(Error::Config("no trajectories to aggregate".into()));
    }
    let e1s: Vec<&[f64]> = records.iter().map(|r| r.e1.as_slice()).collect();
    let e2s: Vec<&[f64]> = records.iter().map(|r| r.e2.as_slice()).collect();
    let mx: Vec<&[f64]> = records.iter().map(|r| r.max_node_err.as_slice()).collect();
    let (e1, e1_stderr) = column_stats(&e1s);
    let (e2, e2_stderr) = column_stats(&e2s);
    let (max_node_err, _) = column_stats(&mx);
    let max_node_err_worst = (0..e1.len())
        .map(|t| mx.iter().map(|s| s[t]).fold(0.0, f64::max))
        .collect();
    let window = auto_window(&e1);
    let exp_rate = window.and_then(|w| fit_exponential_rate(&e1, w).ok());
    let power_rate = window.and_then(|w| fit_power_rate(&e1, w).ok());

    let (bounds, bounds_note, mean_map_curve) = if cfg.compute_bounds {
        match exp.bounds(cfg) {
            Ok((b, c)) => (Some(b), None, c),
            Err(note) => (None, Some(note), None),
        }
    } else {
        (None, None, None)
    };
    Ok(AggregateResult {
        seed: cfg.seed,
        solver: exp.solver.to_string(),
        runs: records.len(),
        iterations: cfg.iterations,
        solution: exp.info.kind,
        rank: exp.info.rank,
        e1,
        e1_stderr,
        e2,
        e2_stderr,
        max_node_err,
        max_node_err_worst,
        exp_rate,
        power_rate,
        bounds,
        bounds_note,
        mean_map_curve,
        records,
    })
}

/// Runs `runs` trajectories in parallel and aggregates them in run order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateResult> {
    let exp = Experiment::from_config(cfg)?;
    run_prepared(cfg, &exp)
}

pub fn run_prepared(cfg: &ExperimentConfig, exp: &Experiment) -> Result<AggregateResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
    let records: Vec<TrajectoryRecord> = pool.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| exp.run_trajectory(cfg, r))
            .collect::<Result<_>>()
    })?;
    aggregate(cfg, exp, records)
}
