//! Experiment harness: lambda sweeps, sensor scaling, gateway layouts and
//! best-response traces, written as CSV.

mod plot;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilp::SolveOptions;
use crate::dynamics::{check_fixed_point, play, FixedPointCheck, PlayConfig, PlayTrace};
use crate::error::{Error, Result};
use crate::game::{coefficients, KnowledgeMode};
use crate::model::{
    compute_link_probabilities_with, generate_scenario, trial_seed, GenConfig, Layout, LinkOptions,
    Scenario,
};
use crate::stackelberg::{jam_free_optimum, solve_with_coefficients};

pub use plot::{emit_plot, render_svg, PlotSpec, XTransform};

pub const CSV_HEADER: &str =
    "experiment,trial,seed,lambda,M,N,leader_payoff,jamfree_payoff,n_victims,solver_nodes,wall_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Sweep,
    Scaling,
    Gateways,
    Fictitious,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Sweep => "sweep",
            Experiment::Scaling => "scaling",
            Experiment::Gateways => "gateways",
            Experiment::Fictitious => "fictitious",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Full,
    Quick,
}

impl Profile {
    pub fn trials(self) -> usize {
        match self {
            Profile::Full => 100,
            Profile::Quick => 25,
        }
    }

    pub fn sensor_counts(self) -> Vec<usize> {
        match self {
            Profile::Full => vec![20, 40, 60],
            Profile::Quick => vec![10, 20, 30],
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "quick" => Ok(Profile::Quick),
            other => Err(Error::invalid(format!("unknown profile `{other}`"))),
        }
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn lambda_grid(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
        return Err(Error::invalid(format!(
            "lambda grid {a}:{b}:{n} needs n >= 1 and finite values >= 0"
        )));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let last = (n - 1) as f64;
    Ok((0..n).map(|i| a + (b - a) * (i as f64) / last).collect())
}

/// Parses `a:b:n`.
pub fn parse_lambda_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::invalid(format!("lambda grid `{text}` is not of the form a:b:n"));
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    lambda_grid(
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
        n.trim().parse().map_err(|_| bad())?,
    )
}

pub fn default_lambda_grid() -> Vec<f64> {
    lambda_grid(0.0, 1.0, 21).expect("static grid")
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub layouts: Vec<Layout>,
    pub sensor_counts: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub mode: KnowledgeMode,
    pub budget: f64,
    pub link: LinkOptions,
    /// Fill the `wall_ms` column (makes the CSV run-dependent).
    pub timing: bool,
}

impl ExperimentSpec {
    fn base(experiment: Experiment, profile: Profile) -> Self {
        Self {
            experiment,
            layouts: vec![Layout::TwoGn],
            sensor_counts: profile.sensor_counts(),
            lambda_grid: default_lambda_grid(),
            trials: profile.trials(),
            master_seed: 0,
            mode: KnowledgeMode::Learned,
            budget: GenConfig::default().budget,
            link: LinkOptions::default(),
            timing: false,
        }
    }

    pub fn sweep(profile: Profile) -> Self {
        Self::base(Experiment::Sweep, profile)
    }

    pub fn scaling(profile: Profile) -> Self {
        Self::base(Experiment::Scaling, profile)
    }

    pub fn gateways(profile: Profile) -> Self {
        Self {
            layouts: Layout::NAMED.to_vec(),
            sensor_counts: vec![20],
            ..Self::base(Experiment::Gateways, profile)
        }
    }

    pub fn fictitious(profile: Profile) -> Self {
        Self {
            sensor_counts: vec![20],
            lambda_grid: vec![0.75],
            trials: 50,
            ..Self::base(Experiment::Fictitious, profile)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::invalid("lambda grid is empty"));
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::invalid(format!("lambda {l} must be finite and >= 0")));
        }
        if self.layouts.is_empty() || self.sensor_counts.is_empty() {
            return Err(Error::invalid("need at least one layout and one sensor count"));
        }
        if self.sensor_counts.contains(&0) {
            return Err(Error::invalid("sensor counts must be positive"));
        }
        Ok(())
    }

    fn scenario(&self, layout: &Layout, sensors: usize, seed: u64) -> Result<Scenario> {
        generate_scenario(
            &GenConfig {
                layout: layout.clone(),
                sensors,
                budget: self.budget,
                lambda: self.lambda_grid[0],
                ..GenConfig::default()
            },
            seed,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub trial: usize,
    pub seed: u64,
    pub lambda: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Empty when the trial failed.
    pub leader_payoff: Option<f64>,
    pub jamfree_payoff: Option<f64>,
    pub n_victims: Option<usize>,
    pub solver_nodes: u64,
    pub wall_ms: Option<f64>,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.leader_payoff.is_none()
    }
}

/// All lambda values for one drawn scenario; coefficients are the only part
/// that depends on lambda.
fn run_item(
    spec: &ExperimentSpec,
    layout: &Layout,
    sensors: usize,
    trial: usize,
) -> Vec<ResultRow> {
    let seed = trial_seed(spec.master_seed, trial as u64);
    let solver = SolveOptions::exact();
    let m = layout.positions().len();
    let blank = |lambda: f64| ResultRow {
        experiment: spec.experiment.to_string(),
        trial,
        seed,
        lambda,
        m,
        n: sensors,
        leader_payoff: None,
        jamfree_payoff: None,
        n_victims: None,
        solver_nodes: 0,
        wall_ms: None,
    };

    let prepared = spec.scenario(layout, sensors, seed).and_then(|s| {
        let lp = compute_link_probabilities_with(&s, spec.link)?;
        let gc0 = coefficients(&lp, spec.mode, 0.0, s.jam_power)?;
        let free = jam_free_optimum(&gc0, &s, &solver)?;
        Ok((s, lp, free))
    });
    let Ok((s, lp, free)) = prepared else {
        return spec.lambda_grid.iter().map(|&l| blank(l)).collect();
    };

    spec.lambda_grid
        .iter()
        .map(|&lambda| {
            let started = Instant::now();
            let mut row = blank(lambda);
            let solved = coefficients(&lp, spec.mode, lambda, s.jam_power)
                .and_then(|gc| solve_with_coefficients(&gc, &s.with_lambda(lambda), &solver));
            match solved {
                Ok(eq) => {
                    row.leader_payoff = Some(eq.leader_payoff);
                    row.jamfree_payoff = Some(free);
                    row.n_victims = Some(eq.v_star.num_victims());
                    row.solver_nodes = eq.solver_stats.nodes + eq.solver_stats.tiebreak_nodes;
                }
                Err(Error::Solver { nodes, .. }) => row.solver_nodes = nodes,
                Err(_) => {}
            }
            if spec.timing {
                row.wall_ms = Some(started.elapsed().as_secs_f64() * 1e3);
            }
            row
        })
        .collect()
}

/// Runs every (layout, N, trial) item; rows come back ordered by layout, N,
/// lambda, then trial, whatever the thread schedule.
pub fn run_rows(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut items = Vec::new();
    for (li, layout) in spec.layouts.iter().enumerate() {
        for (ni, &sensors) in spec.sensor_counts.iter().enumerate() {
            for trial in 0..spec.trials {
                items.push((li, ni, layout, sensors, trial));
            }
        }
    }
    let mut tagged: Vec<((usize, usize, usize, usize), ResultRow)> = items
        .par_iter()
        .flat_map_iter(|&(li, ni, layout, sensors, trial)| {
            run_item(spec, layout, sensors, trial)
                .into_iter()
                .enumerate()
                .map(move |(k, row)| ((li, ni, k, trial), row))
        })
        .collect();
    tagged.sort_by_key(|(key, _)| *key);
    Ok(tagged.into_iter().map(|(_, row)| row).collect())
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    run_rows(spec)
}

/// Mean payoff of one group (a sensor count or a gateway count) at one lambda.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub group: usize,
    pub lambda: f64,
    pub mean_payoff: f64,
    pub trials: usize,
}

/// Means per (group, lambda), sorted by group then lambda. Failed rows are
/// skipped.
pub fn mean_payoffs(rows: &[ResultRow], group: impl Fn(&ResultRow) -> usize) -> Vec<SeriesPoint> {
    let mut acc: BTreeMap<(usize, u64), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let Some(p) = r.leader_payoff else { continue };
        // non-negative floats order like their bit patterns
        let e = acc.entry((group(r), r.lambda.to_bits())).or_default();
        e.0 += p;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|((g, bits), (sum, count))| SeriesPoint {
            group: g,
            lambda: f64::from_bits(bits),
            mean_payoff: sum / count as f64,
            trials: count,
        })
        .collect()
}

fn groups(points: &[SeriesPoint]) -> BTreeMap<usize, Vec<&SeriesPoint>> {
    let mut out: BTreeMap<usize, Vec<&SeriesPoint>> = BTreeMap::new();
    for p in points {
        out.entry(p.group).or_default().push(p);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingSummary {
    /// `(N, (max - min) / max)` of the mean payoff over the lambda grid.
    pub drops: Vec<(usize, f64)>,
}

impl ScalingSummary {
    pub fn from_rows(rows: &[ResultRow]) -> Self {
        let points = mean_payoffs(rows, |r| r.n);
        let drops = groups(&points)
            .into_iter()
            .map(|(n, pts)| {
                let max = pts.iter().map(|p| p.mean_payoff).fold(f64::NEG_INFINITY, f64::max);
                let min = pts.iter().map(|p| p.mean_payoff).fold(f64::INFINITY, f64::min);
                let drop = if max > 0.0 { (max - min) / max } else { 0.0 };
                (n, drop)
            })
            .collect();
        Self { drops }
    }

    /// Drops shrink strictly as N grows.
    pub fn strictly_decreasing(&self) -> bool {
        self.drops.windows(2).all(|w| w[0].1 > w[1].1)
    }
}

pub fn run_sensor_scaling(spec: &ExperimentSpec) -> Result<(Vec<ResultRow>, ScalingSummary)> {
    let rows = run_rows(spec)?;
    let summary = ScalingSummary::from_rows(&rows);
    Ok((rows, summary))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GatewaySummary {
    /// Mean payoff per gateway count and lambda.
    pub points: Vec<SeriesPoint>,
    /// `(M, max over lambda of mean(M) / mean(M=1) - 1)`.
    pub max_gain: Vec<(usize, f64)>,
}

impl GatewaySummary {
    pub fn from_rows(rows: &[ResultRow]) -> Self {
        let points = mean_payoffs(rows, |r| r.m);
        let by_group = groups(&points);
        let base: BTreeMap<u64, f64> = by_group
            .get(&1)
            .map(|pts| pts.iter().map(|p| (p.lambda.to_bits(), p.mean_payoff)).collect())
            .unwrap_or_default();
        let max_gain = by_group
            .iter()
            .filter(|(&m, _)| m != 1)
            .map(|(&m, pts)| {
                let gain = pts
                    .iter()
                    .filter_map(|p| {
                        let b = *base.get(&p.lambda.to_bits())?;
                        (b > 0.0).then(|| p.mean_payoff / b - 1.0)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                (m, gain)
            })
            .collect();
        Self { points, max_gain }
    }

    pub fn gain(&self, m: usize) -> Option<f64> {
        self.max_gain.iter().find(|(g, _)| *g == m).map(|(_, v)| *v)
    }

    /// Grid points where `chain` (gateway counts, weakest first) is out of
    /// order by more than `tol` somewhere along it.
    pub fn inversions(&self, chain: &[usize], tol: f64) -> usize {
        let by_group = groups(&self.points);
        let Some(first) = chain.first().and_then(|g| by_group.get(g)) else {
            return 0;
        };
        first
            .iter()
            .filter(|p| {
                let at = |g: &usize| {
                    by_group
                        .get(g)
                        .and_then(|pts| pts.iter().find(|q| q.lambda == p.lambda))
                        .map(|q| q.mean_payoff)
                };
                chain
                    .windows(2)
                    .any(|w| matches!((at(&w[0]), at(&w[1])), (Some(lo), Some(hi)) if hi + tol < lo))
            })
            .count()
    }
}

pub fn run_gateway_comparison(spec: &ExperimentSpec) -> Result<(Vec<ResultRow>, GatewaySummary)> {
    let rows = run_rows(spec)?;
    let summary = GatewaySummary::from_rows(&rows);
    Ok((rows, summary))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FictitiousOutcome {
    pub trial: usize,
    pub seed: u64,
    pub trace: PlayTrace,
    pub fixed_point: Option<FixedPointCheck>,
    /// Equilibrium payoff of the same scenario, for comparison only.
    pub equilibrium_payoff: f64,
}

/// One best-response trace per trial, using the first layout, sensor count
/// and lambda of the spec. Traces run the full `rounds`.
pub fn run_fictitious(spec: &ExperimentSpec, rounds: usize) -> Result<Vec<FictitiousOutcome>> {
    spec.validate()?;
    let layout = &spec.layouts[0];
    let sensors = spec.sensor_counts[0];
    let lambda = spec.lambda_grid[0];
    let solver = SolveOptions::exact();
    (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(spec.master_seed, trial as u64);
            let s = spec.scenario(layout, sensors, seed)?.with_lambda(lambda);
            let lp = compute_link_probabilities_with(&s, spec.link)?;
            let gc = coefficients(&lp, spec.mode, lambda, s.jam_power)?;
            let cfg = PlayConfig {
                stop_early: false,
                link: spec.link,
                ..PlayConfig::new(rounds)
            };
            let trace = play(&gc, &s, &cfg)?;
            let fixed_point = check_fixed_point(&trace, &gc, &s, &solver)?;
            let equilibrium_payoff = solve_with_coefficients(&gc, &s, &solver)?.leader_payoff;
            Ok(FictitiousOutcome {
                trial,
                seed,
                trace,
                fixed_point,
                equilibrium_payoff,
            })
        })
        .collect()
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Format(format!("unexpected header `{}`", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
