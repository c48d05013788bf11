use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use jamgame::bench::{
    self, emit_plot, parse_lambda_grid, ExperimentSpec, PlotSpec, Profile, ResultRow,
};
use jamgame::bilp::{SolveOptions, SolveStatus};
use jamgame::dynamics::{fictitious_play_with, write_trace_csv, PlayConfig};
use jamgame::game::{JammerStrategy, KnowledgeMode};
use jamgame::model::{generate_scenario, AckModel, GenConfig, Layout, LinkOptions, Scenario};
use jamgame::stackelberg::{
    build_ilp_se, game_coefficients, solve_with_coefficients, verify_equilibrium,
    EquilibriumDocument,
};
use jamgame::{Error, Result};

#[derive(Parser)]
#[command(name = "jamgame", version, about = "Jamming-aware sensor association game")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Trials per grid point (profile default when omitted).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Lambda grid as `a:b:n`.
    #[arg(long, global = true)]
    lambda_grid: Option<String>,
    #[arg(long, global = true, default_value = "learned")]
    mode: KnowledgeMode,
    /// `full` or `quick`.
    #[arg(long, global = true, default_value = "full")]
    profile: Profile,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Do not cap jammed success at the clear one.
    #[arg(long, global = true)]
    no_clamp: bool,
    /// Assume the jammer hears every acknowledgement.
    #[arg(long, global = true)]
    ack_always: bool,
    /// Fill the wall_ms column.
    #[arg(long, global = true)]
    timing: bool,
}

impl Global {
    fn link(&self) -> LinkOptions {
        LinkOptions {
            clamp: !self.no_clamp,
            ack: if self.ack_always {
                AckModel::Always
            } else {
                AckModel::Distance
            },
        }
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        spec.master_seed = self.seed;
        spec.mode = self.mode;
        spec.link = self.link();
        spec.timing = self.timing;
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(g) = &self.lambda_grid {
            spec.lambda_grid = parse_lambda_grid(g)?;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random scenario.
    Gen(GenArgs),
    /// Solve for the equilibrium of a scenario.
    Solve(SolveArgs),
    /// Mean payoff against lambda for several sensor counts.
    Sweep(SweepArgs),
    /// Relative payoff drop over the lambda grid per sensor count.
    Scaling(SweepArgs),
    /// Compare gateway layouts at 20 sensors.
    Gateways,
    /// Alternating best responses.
    Fictitious(FictitiousArgs),
    /// Render a CSV as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "two-gn")]
    layout: Layout,
    #[arg(long, default_value_t = 20)]
    sensors: usize,
    #[arg(long, default_value_t = 0.75)]
    lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    budget: f64,
    #[arg(long, default_value_t = 1.0)]
    jam_power: f64,
}

impl GenArgs {
    fn scenario(&self, seed: u64) -> Result<Scenario> {
        generate_scenario(
            &GenConfig {
                layout: self.layout.clone(),
                sensors: self.sensors,
                budget: self.budget,
                jam_power: self.jam_power,
                lambda: self.lambda,
                ..GenConfig::default()
            },
            seed,
        )
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Also write the equilibrium program in LP-like text.
    #[arg(long)]
    lp_dump: Option<PathBuf>,
    #[arg(long)]
    node_limit: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated sensor counts (profile default when omitted).
    #[arg(long, value_delimiter = ',')]
    sensors: Option<Vec<usize>>,
}

#[derive(Args)]
struct FictitiousArgs {
    /// Scenario file; a fresh one is drawn from the seed when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    rounds: usize,
    /// Initial victim set as comma-separated 0/1 flags.
    #[arg(long)]
    init: Option<String>,
    /// Stop at the first repeated state instead of playing every round.
    #[arg(long)]
    stop_early: bool,
    #[command(flatten)]
    gen: GenArgs,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    /// sweep, scaling, gateways or fictitious.
    #[arg(long, default_value = "sweep")]
    kind: String,
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text)
}

fn parse_init(text: &str, sensors: usize) -> Result<JammerStrategy> {
    let v = text
        .split(',')
        .map(|t| match t.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::InvalidInput(format!("victim flag `{other}` is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if v.len() != sensors {
        return Err(Error::InvalidInput(format!(
            "--init has {} flags, scenario has {sensors} sensors",
            v.len()
        )));
    }
    Ok(JammerStrategy { v })
}

fn print_summary<T: Serialize>(summary: &T) -> Result<()> {
    eprintln!("{}", serde_json::to_string(summary)?);
    Ok(())
}

fn finish_rows(g: &Global, rows: &[ResultRow]) -> Result<()> {
    let mut out = g.output()?;
    bench::write_rows(rows, &mut out)?;
    out.flush()?;
    let failed = rows.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        return Err(Error::Solver {
            status: SolveStatus::NodeLimit,
            nodes: rows.iter().filter(|r| r.failed()).map(|r| r.solver_nodes).sum(),
        });
    }
    Ok(())
}

fn sweep_spec(g: &Global, args: &SweepArgs, mut spec: ExperimentSpec) -> Result<ExperimentSpec> {
    g.apply(&mut spec)?;
    if let Some(sensors) = &args.sensors {
        spec.sensor_counts = sensors.clone();
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Gen(args) => {
            let s = args.scenario(g.seed)?;
            let mut out = g.output()?;
            writeln!(out, "{}", s.to_json()?)?;
            out.flush()?;
        }
        Command::Solve(args) => {
            let s = read_scenario(&args.scenario)?;
            let gc = game_coefficients(&s, g.mode, g.link())?;
            if let Some(path) = &args.lp_dump {
                std::fs::write(path, build_ilp_se(&gc, &s)?.to_lp_string())?;
            }
            let mut solver = SolveOptions::exact();
            if let Some(limit) = args.node_limit {
                solver.node_limit = limit;
            }
            let eq = solve_with_coefficients(&gc, &s, &solver)?;
            let doc = EquilibriumDocument::new(&eq, verify_equilibrium(&eq, &gc, &s));
            let mut out = g.output()?;
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
            out.flush()?;
            if !doc.verification.passed() {
                return Err(Error::Inconsistent("verification failed".into()));
            }
        }
        Command::Sweep(args) => {
            let spec = sweep_spec(g, &args, ExperimentSpec::sweep(g.profile))?;
            let rows = bench::run_sweep(&spec)?;
            print_summary(&bench::mean_payoffs(&rows, |r| r.n))?;
            finish_rows(g, &rows)?;
        }
        Command::Scaling(args) => {
            let spec = sweep_spec(g, &args, ExperimentSpec::scaling(g.profile))?;
            let (rows, summary) = bench::run_sensor_scaling(&spec)?;
            print_summary(&summary)?;
            finish_rows(g, &rows)?;
        }
        Command::Gateways => {
            let mut spec = ExperimentSpec::gateways(g.profile);
            g.apply(&mut spec)?;
            let (rows, summary) = bench::run_gateway_comparison(&spec)?;
            print_summary(&summary.max_gain)?;
            finish_rows(g, &rows)?;
        }
        Command::Fictitious(args) => {
            let s = match &args.scenario {
                Some(path) => read_scenario(path)?,
                None => args.gen.scenario(g.seed)?,
            };
            let cfg = PlayConfig {
                init: args
                    .init
                    .as_deref()
                    .map(|t| parse_init(t, s.num_sensors()))
                    .transpose()?,
                stop_early: args.stop_early,
                link: g.link(),
                ..PlayConfig::new(args.rounds)
            };
            let trace = fictitious_play_with(&s, g.mode, &cfg)?;
            let mut out = g.output()?;
            write_trace_csv(&trace, &mut out)?;
            out.flush()?;
        }
        Command::Plot(args) => {
            let Some(out) = &g.out else {
                return Err(Error::InvalidInput("plot needs --out".into()));
            };
            emit_plot(&args.csv, &PlotSpec::preset(&args.kind)?, out)?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Solver { .. } => 3,
        Error::Inconsistent(_) => 1,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
