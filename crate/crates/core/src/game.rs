//! Payoffs and the jammer's best response.
//!
//! The sensor network picks an association `x` (and gateway states `y`); the
//! jammer then picks a victim set `v`. A link `(n, m)` delivers a packet with
//! probability `a[n][m] * v[n] + b[n][m]`, where `b` is the clear success and
//! `a = p_detect * (p_jam - p_clear)` is the expected loss when the jammer
//! targets sensor `n` (it only hurts the transmissions it actually detects).
//!
//! The jammer ranks victims by `w[n] = sum_m delta[n][m] * x[n][m]`, its own
//! estimate of the damage, and pays `lambda * rho[n]` in power to attack.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LinkProbabilities;

/// What the jammer knows about link quality.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeMode {
    /// Jammed packets always fail, clear packets always succeed.
    Naive,
    /// The jammer has learned the link statistics it can observe.
    #[default]
    Learned,
}

impl fmt::Display for KnowledgeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KnowledgeMode::Naive => "naive",
            KnowledgeMode::Learned => "learned",
        })
    }
}

impl FromStr for KnowledgeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(KnowledgeMode::Naive),
            "learned" => Ok(KnowledgeMode::Learned),
            other => Err(Error::invalid(format!("unknown knowledge mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameCoefficients {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    /// Jammer-perceived change in success when attacking, `[sensor][gateway]`.
    pub delta_tilde: Vec<Vec<f64>>,
    /// Expected jamming power spent per victim.
    pub rho: Vec<f64>,
    pub lambda: f64,
    pub knowledge_mode: KnowledgeMode,
}

impl GameCoefficients {
    pub fn num_sensors(&self) -> usize {
        self.rho.len()
    }

    pub fn num_gateways(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    /// First `(n, m)` with a positive association penalty, if any.
    pub fn positive_penalty(&self) -> Option<(usize, usize, f64)> {
        self.a.iter().enumerate().find_map(|(n, row)| {
            row.iter()
                .position(|&v| v > 0.0)
                .map(|m| (n, m, row[m]))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JammerStrategy {
    pub v: Vec<bool>,
}

impl JammerStrategy {
    pub fn silent(n: usize) -> Self {
        Self { v: vec![false; n] }
    }

    pub fn num_victims(&self) -> usize {
        self.v.iter().filter(|&&b| b).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssociationStrategy {
    pub x: Vec<Vec<bool>>,
    pub y: Vec<bool>,
}

impl AssociationStrategy {
    pub fn idle(n: usize, m: usize) -> Self {
        Self {
            x: vec![vec![false; m]; n],
            y: vec![false; m],
        }
    }

    pub fn num_associated(&self) -> usize {
        self.x.iter().filter(|row| row.iter().any(|&b| b)).count()
    }

    /// The gateway sensor `n` is associated with, if any.
    pub fn gateway_of(&self, n: usize) -> Option<usize> {
        self.x[n].iter().position(|&b| b)
    }

    /// Checks one-gateway-per-sensor and that associations only use powered
    /// gateways. Capacity and budget live in the scenario.
    pub fn is_well_formed(&self) -> bool {
        self.x.iter().all(|row| {
            row.len() == self.y.len()
                && row.iter().filter(|&&b| b).count() <= 1
                && row.iter().zip(&self.y).all(|(&x, &y)| !x || y)
        })
    }
}

pub fn coefficients(
    lp: &LinkProbabilities,
    mode: KnowledgeMode,
    lambda: f64,
    omega: f64,
) -> Result<GameCoefficients> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda = {lambda} must be >= 0")));
    }
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::invalid(format!("jam power = {omega} must be >= 0")));
    }
    let n_sensors = lp.num_sensors();
    if lp.p_clear.len() != n_sensors || lp.p_jam.len() != n_sensors {
        return Err(Error::invalid("link probability matrices disagree on sensor count"));
    }

    let mut a = Vec::with_capacity(n_sensors);
    let mut delta_tilde = Vec::with_capacity(n_sensors);
    for (n, (clear_row, jam_row)) in lp.p_clear.iter().zip(&lp.p_jam).enumerate() {
        let pn = lp.p_detect[n];
        let a_row: Vec<f64> = clear_row
            .iter()
            .zip(jam_row)
            .map(|(&p0, &p1)| pn * (p1 - p0))
            .collect();
        if let Some(m) = a_row.iter().position(|&v| v > 0.0) {
            return Err(Error::PositivePenalty {
                sensor: n,
                gateway: m,
                value: a_row[m],
            });
        }
        let d_row = match mode {
            KnowledgeMode::Naive => vec![-1.0; clear_row.len()],
            KnowledgeMode::Learned => clear_row
                .iter()
                .zip(jam_row)
                .zip(&lp.p_ack)
                .map(|((&p0, &p1), &ack)| pn * ack * (p1 - p0))
                .collect(),
        };
        a.push(a_row);
        delta_tilde.push(d_row);
    }

    Ok(GameCoefficients {
        a,
        b: lp.p_clear.clone(),
        delta_tilde,
        rho: lp.p_detect.iter().map(|&pn| pn * omega).collect(),
        lambda,
        knowledge_mode: mode,
    })
}

/// The jammer's damage estimate for every sensor under association `x`.
pub fn jammer_weight(x: &AssociationStrategy, gc: &GameCoefficients) -> Vec<f64> {
    x.x.iter()
        .zip(&gc.delta_tilde)
        .map(|(row, deltas)| {
            row.iter()
                .zip(deltas)
                .filter(|(&on, _)| on)
                .map(|(_, &d)| d)
                .sum()
        })
        .collect()
}

/// Jam sensor `n` exactly when `w[n] + lambda * rho[n] <= 0`; ties jam.
pub fn jammer_best_response(x: &AssociationStrategy, gc: &GameCoefficients) -> JammerStrategy {
    let w = jammer_weight(x, gc);
    JammerStrategy {
        v: w
            .iter()
            .zip(&gc.rho)
            .map(|(&wn, &rho)| wn + gc.lambda * rho <= 0.0)
            .collect(),
    }
}

/// Whether associating sensor `n` with gateway `m` (and nothing else) makes
/// the jammer attack it. Agrees bit for bit with [`jammer_best_response`].
pub fn link_draws_jamming(gc: &GameCoefficients, n: usize, m: usize) -> bool {
    gc.delta_tilde[n][m] + gc.lambda * gc.rho[n] <= 0.0
}

/// Expected number of packets delivered per round.
pub fn leader_payoff(
    x: &AssociationStrategy,
    v: &JammerStrategy,
    gc: &GameCoefficients,
) -> f64 {
    let mut total = 0.0;
    for (n, row) in x.x.iter().enumerate() {
        for (m, &on) in row.iter().enumerate() {
            if on {
                total += if v.v[n] {
                    gc.a[n][m] + gc.b[n][m]
                } else {
                    gc.b[n][m]
                };
            }
        }
    }
    total
}

/// The jammer's cost, to be minimised.
pub fn jammer_objective(
    v: &JammerStrategy,
    x: &AssociationStrategy,
    gc: &GameCoefficients,
) -> f64 {
    let w = jammer_weight(x, gc);
    v.v.iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .map(|(n, _)| w[n] + gc.lambda * gc.rho[n])
        .sum()
}
