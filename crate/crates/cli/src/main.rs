use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use topolearn::dissim::{mean_dissimilarity, ForgettingSchedule};
use topolearn::experiment::{
    reference_solution, run_grid, run_learner, run_experiment, Algo, ExperimentConfig,
    ReferenceTrack, RunOptions, SolverConfig,
};
use topolearn::graph::degree;
use topolearn::io::{create, open, read_signals, write_edge_list, write_signals, write_trace};
use topolearn::padmm::{batch_solve, Hyperparams};
use topolearn::report::{emit_report, write_records};
use topolearn::synth::{generate_stream, ChangePoint, GraphModel, GraphModelSpec, StreamSpec};
use topolearn::EdgeIndexing;

/// Learn graph topology from smooth signals, in batch or as a stream.
#[derive(Parser, Debug)]
#[command(name = "topolearn", version)]
struct Cli {
    /// Seed for every random draw; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory [default: config `output_dir`, else `out`].
    #[arg(long, global = true, env = "TOPOLEARN_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a graph and a stream of smooth signals on it.
    Generate(GenerateArgs),
    /// Solve the batch problem on a signal file.
    Batch(BatchArgs),
    /// Stream signals through an online learner and log its tracking error.
    Online(OnlineArgs),
    /// Run the hyperparameter grids of a config file.
    Grid(ConfigArg),
    /// Run every solver of a config file and write CSVs, a summary and a plot.
    Report(ConfigArg),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModelArg {
    Gaussian,
    Er,
    Pa,
}

#[derive(Args, Debug, Clone)]
struct StreamArgs {
    /// Graph model; ignored when a config file is given.
    #[arg(long, value_enum, default_value = "gaussian")]
    model: ModelArg,
    /// Number of nodes.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Number of signals.
    #[arg(long, default_value_t = 1000)]
    p: usize,
    /// Variance of the additive noise.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Sample index at which edges get resampled (repeatable).
    #[arg(long = "change-at")]
    change_at: Vec<usize>,
    /// Fraction of edges resampled at each change point.
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
}

impl StreamArgs {
    fn specs(&self, seed: u64) -> (GraphModelSpec, StreamSpec) {
        let model = match self.model {
            ModelArg::Gaussian => GraphModel::gaussian(),
            ModelArg::Er => GraphModel::er(),
            ModelArg::Pa => GraphModel::pa(),
        };
        let stream = StreamSpec {
            p: self.p,
            noise_variance: self.noise,
            change_points: self
                .change_at
                .iter()
                .map(|&at| ChangePoint { at, fraction: self.fraction })
                .collect(),
        };
        (GraphModelSpec::new(model, self.n, seed), stream)
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Take graph and stream specs from this experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    stream: StreamArgs,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
}

impl SolverArgs {
    fn config(&self, algo: Algo, schedule: ForgettingSchedule) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            tau1: self.tau1,
            tau2: self.tau2,
            ..SolverConfig::new(algo, self.alpha, self.beta, schedule)
        }
    }
}

#[derive(Args, Debug)]
struct BatchArgs {
    /// Signal CSV, one signal per row.
    signals: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum AlgoArg {
    Opadmm,
    Pg,
}

#[derive(Args, Debug)]
struct OnlineArgs {
    /// Signal CSV; without it a stream is generated from the model options.
    #[arg(long)]
    signals: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "opadmm")]
    algo: AlgoArg,
    /// `stationary` or `fixed:<gamma>`.
    #[arg(long, default_value = "stationary")]
    gamma: ForgettingSchedule,
    #[command(flatten)]
    solver: SolverArgs,
    /// Evaluate static regret every this many steps.
    #[arg(long)]
    regret_stride: Option<usize>,
    /// Write 0 instead of measured step times.
    #[arg(long)]
    no_wall_time: bool,
    #[command(flatten)]
    stream: StreamArgs,
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// Experiment config (JSON).
    config: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(args) => generate(&cli, args),
        Command::Batch(args) => batch(&cli, args),
        Command::Online(args) => online(&cli, args),
        Command::Grid(args) => grid(&cli, args),
        Command::Report(args) => report(&cli, args),
    }
}

fn out_dir(cli: &Cli, config: Option<&ExperimentConfig>) -> Result<PathBuf> {
    let dir = cli
        .out_dir
        .clone()
        .or_else(|| config.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn load_config(cli: &Cli, path: &Path) -> Result<ExperimentConfig> {
    let file = open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut config: ExperimentConfig = serde_json::from_reader(std::io::BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))?;
    if let Some(seed) = cli.seed {
        config.graph.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn load_signals(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_signals(std::io::BufReader::new(file))?)
}

fn generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let config = args.config.as_deref().map(|p| load_config(cli, p)).transpose()?;
    let (graph, stream_spec) = match &config {
        Some(c) => (c.graph.clone(), c.stream.clone()),
        None => args.stream.specs(cli.seed.unwrap_or(0)),
    };
    let dir = out_dir(cli, config.as_ref())?;
    let stream = generate_stream(&graph, &stream_spec)?;

    write_signals(&stream.signals, create(&dir.join("signals.csv"))?)?;
    let mut truths = Vec::new();
    for (i, seg) in stream.segments.iter().enumerate() {
        let name = format!("truth_segment_{i}.csv");
        write_edge_list(&seg.graph, create(&dir.join(&name))?)?;
        truths.push(json!({
            "file": name,
            "start": seg.start,
            "end": seg.end,
            "edges": seg.graph.edge_count(),
        }));
    }
    let manifest = json!({
        "graph": graph,
        "stream": stream_spec,
        "seed": graph.seed,
        "signals": "signals.csv",
        "segments": truths,
    });
    serde_json::to_writer_pretty(create(&dir.join("manifest.json"))?, &manifest)?;
    println!(
        "wrote {} signals on {} nodes ({} segment(s)) to {}",
        stream.signals.len(),
        graph.n,
        stream.segments.len(),
        dir.display()
    );
    Ok(())
}

fn nodes_of(signals: &[Vec<f64>]) -> Result<usize> {
    match signals.first() {
        Some(x) => Ok(x.len()),
        None => bail!("signal file is empty"),
    }
}

fn batch(cli: &Cli, args: &BatchArgs) -> Result<()> {
    let signals = load_signals(&args.signals)?;
    let n = nodes_of(&signals)?;
    let hp = args
        .solver
        .config(Algo::Opadmm, ForgettingSchedule::Stationary)
        .hyperparams(n);
    let z = mean_dissimilarity(&signals)?;
    let sol = batch_solve(&z, &hp, args.tol, args.max_iter)?;
    let dir = out_dir(cli, None)?;
    let w = sol.weights();
    write_edge_list(&w, create(&dir.join("weights.csv"))?)?;
    write_trace(&sol.trace, create(&dir.join("trace.csv"))?)?;

    let d = degree(&w);
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{} after {} iterations; {} edges; degree min {min:.6e} max {max:.6e}",
        if sol.converged { "converged" } else { "NOT converged" },
        sol.iterations,
        w.edge_count()
    );
    Ok(())
}

fn online(cli: &Cli, args: &OnlineArgs) -> Result<()> {
    let algo = match args.algo {
        AlgoArg::Opadmm => Algo::Opadmm,
        AlgoArg::Pg => Algo::Pg,
    };
    let solver = args.solver.config(algo, args.gamma);
    let (signals, bounds) = match &args.signals {
        Some(path) => {
            let s = load_signals(path)?;
            let len = s.len();
            (s, vec![(0, len)])
        }
        None => {
            let (g, s) = args.stream.specs(cli.seed.unwrap_or(0));
            let stream = generate_stream(&g, &s)?;
            let bounds = stream.segments.iter().map(|s| (s.start, s.end)).collect();
            (stream.signals, bounds)
        }
    };
    let n = nodes_of(&signals)?;
    EdgeIndexing::new(n)?;
    let hp = solver.hyperparams(n);
    hp.validate(n)?;

    let ref_hp = Hyperparams::with_defaults(n, hp.alpha, hp.beta);
    let refs = if bounds.len() == 1 {
        ReferenceTrack::single(reference_solution(&signals, &ref_hp)?)
    } else {
        ReferenceTrack::from_segments(&signals, &bounds, &ref_hp)?
    };
    if args.regret_stride == Some(0) {
        bail!("--regret-stride must be at least 1");
    }
    let opts = RunOptions {
        regret: args.regret_stride.map(|s| (s, hp)),
        record_wall_time: !args.no_wall_time,
    };
    let mut learner = solver.build(n)?;
    let records = run_learner(learner.as_mut(), &signals, &refs, opts)?;

    let dir = out_dir(cli, None)?;
    let name = format!("online_{}.csv", algo.name());
    write_records(&records, create(&dir.join(&name))?)?;
    let estimate = topolearn::EdgeVector::new(n, learner.current_estimate().to_vec())?;
    write_edge_list(&estimate, create(&dir.join(format!("online_{}_weights.csv", algo.name())))?)?;
    let last = records.last().expect("at least one signal");
    println!(
        "{}: {} steps, final suboptimality {:.6e}{}",
        solver.label(),
        records.len(),
        last.suboptimality,
        last.regret_partial
            .map(|r| format!(", regret {r:.6e}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn grid(cli: &Cli, args: &ConfigArg) -> Result<()> {
    let config = load_config(cli, &args.config)?;
    let outcome = run_grid(&config)?;
    let dir = out_dir(cli, Some(&config))?;
    let out = json!({
        "regularizers": outcome.regularizers,
        "solver": outcome.solver,
    });
    serde_json::to_writer_pretty(create(&dir.join("grid.json"))?, &out)?;
    if let Some(r) = &outcome.regularizers {
        println!("alpha {} beta {} (F-score {:.4})", r.alpha, r.beta, r.fscore);
    }
    if let Some(s) = &outcome.solver {
        println!(
            "rho {} tau1 {} tau2 {} (tail suboptimality {:.6e}; {} cell(s) skipped)",
            s.best.rho,
            s.best.tau1,
            s.best.tau2,
            s.score,
            s.skipped.len()
        );
    }
    Ok(())
}

fn report(cli: &Cli, args: &ConfigArg) -> Result<()> {
    let config = load_config(cli, &args.config)?;
    let outcome = run_experiment(&config)?;
    let dir = out_dir(cli, Some(&config))?;
    let paths = emit_report(&outcome.runs, &dir)?;
    for run in &outcome.runs {
        match &run.records {
            Ok(r) => println!(
                "{}: final suboptimality {:.6e}",
                run.label,
                r.last().map(|x| x.suboptimality).unwrap_or(f64::NAN)
            ),
            Err(e) => println!("{}: failed: {e}", run.label),
        }
    }
    println!("summary: {}", paths.summary.display());
    Ok(())
}
