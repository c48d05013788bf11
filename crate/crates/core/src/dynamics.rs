//! Alternating best responses: the network re-associates against the last
//! victim set, the jammer answers, repeat.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bilp::SolveOptions;
use crate::error::{Error, Result};
use crate::game::{
    jammer_best_response, leader_payoff, AssociationStrategy, GameCoefficients, JammerStrategy,
    KnowledgeMode,
};
use crate::model::{LinkOptions, Scenario};
use crate::stackelberg::{best_association, game_coefficients, PAYOFF_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayRound {
    pub x: AssociationStrategy,
    pub v: JammerStrategy,
    /// Payoff after the jammer's reply.
    pub leader_payoff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayTrace {
    pub rounds: Vec<PlayRound>,
    pub converged: bool,
    /// Period of a detected cycle longer than one round.
    pub cycle_length: Option<usize>,
    pub rounds_run: usize,
}

#[derive(Clone, Debug)]
pub struct PlayConfig {
    pub max_rounds: usize,
    /// Victim set the network first responds to; silent when `None`.
    pub init: Option<JammerStrategy>,
    /// Stop at the first repeated state.
    pub stop_early: bool,
    pub link: LinkOptions,
    pub solver: SolveOptions,
}

impl PlayConfig {
    pub fn new(max_rounds: usize) -> Self {
        Self {
            max_rounds,
            init: None,
            stop_early: true,
            link: LinkOptions::default(),
            solver: SolveOptions::exact(),
        }
    }
}

pub fn fictitious_play(s: &Scenario, mode: KnowledgeMode, max_rounds: usize) -> Result<PlayTrace> {
    fictitious_play_with(s, mode, &PlayConfig::new(max_rounds))
}

pub fn fictitious_play_with(s: &Scenario, mode: KnowledgeMode, cfg: &PlayConfig) -> Result<PlayTrace> {
    let gc = game_coefficients(s, mode, cfg.link)?;
    play(&gc, s, cfg)
}

/// Runs the dynamics on precomputed coefficients.
pub fn play(gc: &GameCoefficients, s: &Scenario, cfg: &PlayConfig) -> Result<PlayTrace> {
    if cfg.max_rounds == 0 {
        return Err(Error::invalid("max_rounds must be at least 1"));
    }
    let n = s.num_sensors();
    let mut v = match &cfg.init {
        Some(init) if init.v.len() != n => {
            return Err(Error::invalid(format!(
                "initial victim set has {} entries, expected {n}",
                init.v.len()
            )))
        }
        Some(init) => init.clone(),
        None => JammerStrategy::silent(n),
    };

    let mut rounds = Vec::with_capacity(cfg.max_rounds);
    let mut seen: HashMap<(AssociationStrategy, JammerStrategy), usize> = HashMap::new();
    for r in 0..cfg.max_rounds {
        let (x, _) = best_association(gc, &v, s, &cfg.solver)?;
        v = jammer_best_response(&x, gc);
        let payoff = leader_payoff(&x, &v, gc);
        rounds.push(PlayRound {
            x: x.clone(),
            v: v.clone(),
            leader_payoff: payoff,
        });
        let repeated = seen.insert((x, v.clone()), r).is_some();
        if repeated && cfg.stop_early {
            break;
        }
    }

    let cycle = detect_cycle(&rounds);
    Ok(PlayTrace {
        converged: cycle.is_some_and(|c| c.period == 1),
        cycle_length: cycle.map(|c| c.period).filter(|&p| p >= 2),
        rounds_run: rounds.len(),
        rounds,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub period: usize,
    /// First index from which the trace is periodic.
    pub start: usize,
}

/// Smallest period with which the trace ends, based on the last state.
pub fn detect_period<T: PartialEq>(states: &[T]) -> Option<Cycle> {
    let last = states.len().checked_sub(1)?;
    let period = (1..=last).find(|&p| states[last - p] == states[last])?;
    let mut start = last - period;
    while start > 0 && states[start - 1] == states[start - 1 + period] {
        start -= 1;
    }
    Some(Cycle { period, start })
}

pub fn detect_cycle(rounds: &[PlayRound]) -> Option<Cycle> {
    let states: Vec<_> = rounds.iter().map(|r| (&r.x, &r.v)).collect();
    detect_period(&states)
}

/// Outcome of re-checking the final pair of a converged trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCheck {
    /// The association is optimal against the final victim set.
    pub leader_optimal: bool,
    pub leader_gap: f64,
    /// The victim set is the threshold response to the association.
    pub jammer_optimal: bool,
}

impl FixedPointCheck {
    pub fn passed(&self) -> bool {
        self.leader_optimal && self.jammer_optimal
    }
}

pub fn check_fixed_point(
    trace: &PlayTrace,
    gc: &GameCoefficients,
    s: &Scenario,
    solver: &SolveOptions,
) -> Result<Option<FixedPointCheck>> {
    if !trace.converged {
        return Ok(None);
    }
    let last = trace.rounds.last().expect("converged traces are non-empty");
    let (_, best) = best_association(gc, &last.v, s, solver)?;
    let own = leader_payoff(&last.x, &last.v, gc);
    let gap = (best - own).abs();
    Ok(Some(FixedPointCheck {
        leader_optimal: gap <= PAYOFF_TOL,
        leader_gap: gap,
        jammer_optimal: jammer_best_response(&last.x, gc) == last.v,
    }))
}

/// Writes `round,leader_payoff,n_victims,converged,cycle_length`, one line per
/// round; the last two columns describe the whole trace.
pub fn write_trace_csv<W: Write>(trace: &PlayTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "leader_payoff", "n_victims", "converged", "cycle_length"])?;
    let cycle = trace.cycle_length.map(|c| c.to_string()).unwrap_or_default();
    for (i, r) in trace.rounds.iter().enumerate() {
        w.write_record([
            i.to_string(),
            r.leader_payoff.to_string(),
            r.v.num_victims().to_string(),
            trace.converged.to_string(),
            cycle.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
