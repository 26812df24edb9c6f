//! `netlin` command line. Exit codes: 0 success, 1 usage or config error,
//! 2 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::analysis::{
    auto_window, fit_exponential_rate, fit_power_rate, rate_bounds_iid, BoundOptions,
};
use crate::error::{Error, Result};
use crate::graphs::{is_connected, random_sample_space, union_graph, write_graphs};
use crate::harness::config::{parse_row_sizes, ExperimentConfig};
use crate::harness::output::{emit_csv, emit_plot_data, emit_summary, read_csv};
use crate::harness::run::{build_problem, build_process, run_experiment};
use crate::problem::{
    classify_solutions, generate_synthetic, write_matrix, write_vector, SyntheticParams,
};
use crate::seed::{derive_seed, stream_rng, Stream};

#[derive(Debug, Parser)]
#[command(
    name = "netlin",
    version,
    about = "Distributed network linear equation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a random (H, z) with prescribed rank.
    GenProblem {
        #[arg(long, default_value_t = 20)]
        nodes: usize,
        #[arg(long, default_value_t = 10)]
        m: usize,
        /// Defaults to m.
        #[arg(long)]
        rank: Option<usize>,
        /// Rows per node: "l", "lo-hi" or a comma list.
        #[arg(long, default_value = "1-20")]
        rows: String,
        /// Norm of the component of z outside range(H).
        #[arg(long, default_value_t = 0.0)]
        residual: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "H.txt")]
        matrix: PathBuf,
        #[arg(long, default_value = "z.txt")]
        vector: PathBuf,
    },
    /// Draw a sample space of graphs with connected union and save it.
    GenGraphs {
        #[arg(long, default_value_t = 20)]
        nodes: usize,
        #[arg(long, default_value_t = 30)]
        size: usize,
        #[arg(long, default_value_t = 0.3)]
        keep: f64,
        #[arg(long, default_value_t = 0.3)]
        base_p: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "graphs.txt")]
        out: PathBuf,
    },
    /// Run an experiment from a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        plot_data: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the i.i.d. rate bounds for the problem and process of a config.
    Bounds { config: PathBuf },
    /// Fit exponential and power rates to a CSV column.
    Fit {
        csv: PathBuf,
        #[arg(long, default_value = "e1")]
        column: String,
        /// Inclusive window start; defaults to the automatic window.
        #[arg(long, requires = "hi")]
        lo: Option<usize>,
        #[arg(long, requires = "lo")]
        hi: Option<usize>,
    },
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    cli_main_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn cli_main_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<()> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| Error::io(std::path::Path::new("<stdout>"), e))
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::GenProblem {
            nodes,
            m,
            rank,
            rows,
            residual,
            seed,
            matrix,
            vector,
        } => {
            let params = SyntheticParams {
                n_nodes: nodes,
                dim: m,
                rank: rank.unwrap_or(m),
                rows: parse_row_sizes(&rows)?,
                residual,
            };
            let mut rng = stream_rng(seed, 0, Stream::Problem);
            let s = generate_synthetic(&params, &mut rng)?;
            write_matrix(&matrix, &s.h)?;
            write_vector(&vector, &s.z)?;
            let sizes: Vec<String> = s.sizes.iter().map(|l| l.to_string()).collect();
            let p = crate::problem::partition_problem(s.h, s.z, &s.sizes)?;
            let info = classify_solutions(&p, crate::harness::run::CONSISTENCY_TOL)?;
            say(out, format_args!("rows = {}", p.h().nrows()))?;
            say(out, format_args!("rank = {}", info.rank))?;
            say(out, format_args!("kind = {}", kind_name(info.kind)))?;
            say(out, format_args!("partition = {}", sizes.join(",")))
        }
        Command::GenGraphs {
            nodes,
            size,
            keep,
            base_p,
            seed,
            out: path,
        } => {
            let mut rng = stream_rng(seed, 0, Stream::Space);
            let space = random_sample_space(nodes, size, keep, base_p, &mut rng)?;
            write_graphs(&path, &space)?;
            let disconnected = space.iter().filter(|g| !is_connected(g)).count();
            say(out, format_args!("graphs = {}", space.len()))?;
            say(out, format_args!("disconnected = {disconnected}"))?;
            say(
                out,
                format_args!("union_connected = {}", is_connected(&union_graph(&space)?)),
            )
        }
        Command::Run {
            config,
            csv,
            plot_data,
            summary,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.csv = csv.or(cfg.csv);
            cfg.plot_data = plot_data.or(cfg.plot_data);
            cfg.summary = summary.or(cfg.summary);
            let res = run_experiment(&cfg)?;
            if let Some(p) = &cfg.csv {
                emit_csv(&res, p)?;
            }
            if let Some(p) = &cfg.plot_data {
                emit_plot_data(&res, p)?;
            }
            if let Some(p) = &cfg.summary {
                emit_summary(&res, p)?;
            }
            let last = res.e1.len() - 1;
            say(out, format_args!("solution = {}", kind_name(res.solution)))?;
            say(out, format_args!("e1_final = {}", res.e1[last]))?;
            say(out, format_args!("e2_final = {}", res.e2[last]))?;
            if let Some(r) = res.exp_rate {
                say(out, format_args!("exp_rate = {r}"))?;
            }
            if let Some(r) = res.power_rate {
                say(out, format_args!("power_rate = {r}"))?;
            }
            if let Some(b) = res.bounds {
                say(out, format_args!("theta1 = {}", b.theta1))?;
                say(out, format_args!("theta2 = {}", b.theta2))?;
            }
            if let Some(note) = &res.bounds_note {
                say(out, format_args!("bounds = absent ({note})"))?;
            }
            Ok(())
        }
        Command::Bounds { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let p = build_problem(&cfg)?;
            let proc = build_process(&cfg, p.n_nodes())?;
            let opts = BoundOptions {
                max_lifted_dim: cfg.bound_cap,
                mc_draws: cfg.bound_mc_draws,
                mc_seed: derive_seed(cfg.seed, 0, Stream::Space),
            };
            let b = rate_bounds_iid(&p, &proc, cfg.rule()?, &opts)?;
            say(out, format_args!("theta1 = {}", b.theta1))?;
            say(out, format_args!("theta2 = {}", b.theta2))?;
            say(out, format_args!("lifted_dim = {}", b.lifted_dim))
        }
        Command::Fit {
            csv,
            column,
            lo,
            hi,
        } => {
            let cols = read_csv(&csv)?;
            let series = cols.get(&column).ok_or_else(|| {
                Error::Config(format!("no column {column:?} in {}", csv.display()))
            })?;
            let window = match (lo, hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => auto_window(series).ok_or_else(|| {
                    Error::Domain(format!("column {column:?} has no usable fit window"))
                })?,
            };
            say(out, format_args!("window = {},{}", window.0, window.1))?;
            say(
                out,
                format_args!("exp_rate = {}", fit_exponential_rate(series, window)?),
            )?;
            say(
                out,
                format_args!("power_rate = {}", fit_power_rate(series, window)?),
            )
        }
    }
}

fn kind_name(k: crate::problem::SolutionKind) -> &'static str {
    use crate::problem::SolutionKind::*;
    match k {
        UniqueExact => "unique-exact",
        MultipleExact => "multiple-exact",
        LeastSquaresOnly => "least-squares-only",
    }
}
