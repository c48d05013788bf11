//! Network geometry and the distance-based link model.
//!
//! Every success or detection probability has the form `p_ref^((dist/ref)^alpha)`:
//! the probability observed at a reference distance, raised to the power of
//! the normalised distance. Sensor-to-gateway links use it with the clear and
//! jammed reference probabilities, and the jammer uses it to detect sensor
//! uplinks and gateway acknowledgements.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the unit square.
pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub alpha: f64,
    /// Unjammed success probability at distance `d0`.
    pub p0_clear: f64,
    pub d0: f64,
    /// Jammed success probability at distance ratio `r0`.
    pub p0_jam: f64,
    pub r0: f64,
    /// Probability that the jammer detects a transmitter at distance `D0`.
    pub p0_detect: f64,
    #[serde(rename = "D0")]
    pub detect_d0: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            alpha: 4.0,
            p0_clear: 0.7,
            d0: 0.5,
            p0_jam: 0.1,
            r0: 1.0,
            p0_detect: 0.5,
            detect_d0: 0.5,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p0_clear", self.p0_clear),
            ("p0_jam", self.p0_jam),
            ("p0_detect", self.p0_detect),
        ];
        for (name, p) in probs {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::invalid(format!("{name} = {p} must lie in (0, 1]")));
            }
        }
        let positive = [
            ("alpha", self.alpha),
            ("d0", self.d0),
            ("r0", self.r0),
            ("D0", self.detect_d0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

fn reference_power_law(p_ref: f64, ratio: f64, alpha: f64) -> f64 {
    p_ref.powf(ratio.powf(alpha))
}

fn check_distance(what: &str, d: f64) -> Result<()> {
    if d.is_finite() && d >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} = {d} must be finite and non-negative")))
    }
}

/// Success probability of an unjammed sensor-to-gateway link of length `d`.
pub fn unjammed_success(d: f64, cp: &ChannelParams) -> Result<f64> {
    check_distance("distance", d)?;
    Ok(reference_power_law(cp.p0_clear, d / cp.d0, cp.alpha))
}

/// Success probability of a jammed link, before clamping against the clear
/// probability. `r` is the link length over the sensor-to-jammer distance;
/// an infinite ratio (sensor on top of the jammer) never gets through.
pub fn jammed_success(r: f64, cp: &ChannelParams) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::invalid(format!("distance ratio = {r} must be non-negative")));
    }
    if r.is_infinite() {
        return Ok(0.0);
    }
    Ok(reference_power_law(cp.p0_jam, r / cp.r0, cp.alpha))
}

/// Probability that the jammer hears a transmitter at distance `d`.
pub fn detection_prob(d: f64, cp: &ChannelParams) -> Result<f64> {
    check_distance("detection distance", d)?;
    Ok(reference_power_law(cp.p0_detect, d / cp.detect_d0, cp.alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub sn_pos: Vec<Point>,
    pub gn_pos: Vec<Point>,
    pub jam_pos: Point,
    pub channel: ChannelParams,
    pub gn_cost: Vec<f64>,
    pub gn_capacity: Vec<u32>,
    pub budget: f64,
    pub jam_power: f64,
    pub lambda: f64,
}

impl Scenario {
    pub fn num_sensors(&self) -> usize {
        self.sn_pos.len()
    }

    pub fn num_gateways(&self) -> usize {
        self.gn_pos.len()
    }

    /// Copy of this scenario with a different jammer weight.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// Checks dimensions, finiteness and parameter ranges; positions may lie
    /// anywhere in the plane.
    pub fn validate_shape(&self) -> Result<()> {
        let n = self.num_sensors();
        let m = self.num_gateways();
        if n == 0 {
            return Err(Error::invalid("scenario needs at least one sensor"));
        }
        if m == 0 {
            return Err(Error::invalid("scenario needs at least one gateway"));
        }
        if self.gn_cost.len() != m || self.gn_capacity.len() != m {
            return Err(Error::invalid(format!(
                "gn_cost has {} entries and gn_capacity {}, expected {m}",
                self.gn_cost.len(),
                self.gn_capacity.len()
            )));
        }
        let all_points = self
            .sn_pos
            .iter()
            .chain(self.gn_pos.iter())
            .chain(std::iter::once(&self.jam_pos));
        for p in all_points {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::invalid(format!("non-finite position {p:?}")));
            }
        }
        for (i, &c) in self.gn_cost.iter().enumerate() {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("gn_cost[{i}] = {c} must be >= 0")));
            }
        }
        for (name, v) in [
            ("budget", self.budget),
            ("jam_power", self.jam_power),
            ("lambda", self.lambda),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        self.channel.validate()
    }

    /// Full validation: shape plus every node inside the unit square.
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        let inside = |p: &Point| (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]);
        let all_points = self
            .sn_pos
            .iter()
            .chain(self.gn_pos.iter())
            .chain(std::iter::once(&self.jam_pos));
        for p in all_points {
            if !inside(p) {
                return Err(Error::invalid(format!("position {p:?} outside the unit square")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// How the jammer's chance of hearing gateway acknowledgements is modelled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AckModel {
    /// Same detection law as for sensors, on the gateway-to-jammer distance.
    #[default]
    Distance,
    /// The jammer always hears every acknowledgement.
    Always,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkOptions {
    /// Cap the jammed success probability at the clear one.
    pub clamp: bool,
    pub ack: AckModel,
}

impl Default for LinkOptions {
    fn default() -> Self {
        Self {
            clamp: true,
            ack: AckModel::Distance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkProbabilities {
    /// Unjammed success, `[sensor][gateway]`.
    pub p_clear: Vec<Vec<f64>>,
    /// Jammed success, `[sensor][gateway]`.
    pub p_jam: Vec<Vec<f64>>,
    /// Jammer detects sensor uplink.
    pub p_detect: Vec<f64>,
    /// Jammer detects gateway acknowledgement.
    pub p_ack: Vec<f64>,
}

impl LinkProbabilities {
    pub fn num_sensors(&self) -> usize {
        self.p_detect.len()
    }

    pub fn num_gateways(&self) -> usize {
        self.p_ack.len()
    }
}

pub fn compute_link_probabilities(s: &Scenario) -> Result<LinkProbabilities> {
    compute_link_probabilities_with(s, LinkOptions::default())
}

pub fn compute_link_probabilities_with(
    s: &Scenario,
    opts: LinkOptions,
) -> Result<LinkProbabilities> {
    s.validate_shape()?;
    let cp = &s.channel;

    let p_detect = s
        .sn_pos
        .iter()
        .map(|&sn| detection_prob(distance(sn, s.jam_pos), cp))
        .collect::<Result<Vec<_>>>()?;
    let p_ack = match opts.ack {
        AckModel::Distance => s
            .gn_pos
            .iter()
            .map(|&gn| detection_prob(distance(gn, s.jam_pos), cp))
            .collect::<Result<Vec<_>>>()?,
        AckModel::Always => vec![1.0; s.num_gateways()],
    };

    let mut p_clear = Vec::with_capacity(s.num_sensors());
    let mut p_jam = Vec::with_capacity(s.num_sensors());
    for &sn in &s.sn_pos {
        let to_jammer = distance(sn, s.jam_pos);
        let mut clear_row = Vec::with_capacity(s.num_gateways());
        let mut jam_row = Vec::with_capacity(s.num_gateways());
        for &gn in &s.gn_pos {
            let d = distance(sn, gn);
            let clear = unjammed_success(d, cp)?;
            let jammed = if to_jammer == 0.0 {
                0.0
            } else {
                jammed_success(d / to_jammer, cp)?
            };
            clear_row.push(clear);
            jam_row.push(if opts.clamp { jammed.min(clear) } else { jammed });
        }
        p_clear.push(clear_row);
        p_jam.push(jam_row);
    }

    Ok(LinkProbabilities {
        p_clear,
        p_jam,
        p_detect,
        p_ack,
    })
}

/// Named gateway placements used by the experiments.
#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    /// One gateway in the centre serving up to 20 sensors.
    SingleCenter,
    TwoGn,
    ThreeGn,
    /// One gateway per quadrant centre.
    FourGn,
    Explicit {
        positions: Vec<Point>,
        capacity: Vec<u32>,
        cost: Vec<f64>,
    },
}

impl Layout {
    pub const NAMED: [Layout; 4] = [
        Layout::SingleCenter,
        Layout::TwoGn,
        Layout::ThreeGn,
        Layout::FourGn,
    ];

    pub fn positions(&self) -> Vec<Point> {
        match self {
            Layout::SingleCenter => vec![[0.5, 0.5]],
            Layout::TwoGn => vec![[0.25, 0.5], [0.75, 0.5]],
            Layout::ThreeGn => vec![[0.25, 0.25], [0.25, 0.75], [0.75, 0.5]],
            Layout::FourGn => vec![[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]],
            Layout::Explicit { positions, .. } => positions.clone(),
        }
    }

    pub fn capacities(&self) -> Vec<u32> {
        match self {
            Layout::SingleCenter => vec![20],
            Layout::Explicit { capacity, .. } => capacity.clone(),
            named => vec![10; named.positions().len()],
        }
    }

    pub fn costs(&self) -> Vec<f64> {
        match self {
            Layout::Explicit { cost, .. } => cost.clone(),
            named => vec![1.0; named.positions().len()],
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Layout::SingleCenter => "single-center",
            Layout::TwoGn => "two-gn",
            Layout::ThreeGn => "three-gn",
            Layout::FourGn => "four-gn",
            Layout::Explicit { .. } => "explicit",
        };
        f.write_str(name)
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-center" => Ok(Layout::SingleCenter),
            "two-gn" => Ok(Layout::TwoGn),
            "three-gn" => Ok(Layout::ThreeGn),
            "four-gn" => Ok(Layout::FourGn),
            other => Err(Error::UnknownLayout(other.to_string())),
        }
    }
}

/// Settings for random scenario generation. Defaults reproduce the
/// reference simulation setup.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub layout: Layout,
    pub sensors: usize,
    pub channel: ChannelParams,
    pub budget: f64,
    pub jam_power: f64,
    pub lambda: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            layout: Layout::TwoGn,
            sensors: 20,
            channel: ChannelParams::default(),
            budget: 2.0,
            jam_power: 1.0,
            lambda: 0.75,
        }
    }
}

/// Draws a scenario: the jammer first, then every sensor, each coordinate
/// uniform on `[0, 1)` from a ChaCha8 stream seeded with `seed`. Drawing the
/// jammer first keeps it fixed when only the sensor count changes, and the
/// first `k` sensors are shared by every scenario with at least `k` sensors.
pub fn generate_scenario(cfg: &GenConfig, seed: u64) -> Result<Scenario> {
    if cfg.sensors == 0 {
        return Err(Error::invalid("need at least one sensor"));
    }
    let gn_pos = cfg.layout.positions();
    let gn_capacity = cfg.layout.capacities();
    let gn_cost = cfg.layout.costs();
    if gn_pos.is_empty() || gn_capacity.len() != gn_pos.len() || gn_cost.len() != gn_pos.len() {
        return Err(Error::invalid("layout positions, capacities and costs disagree"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Point { [rng.gen::<f64>(), rng.gen::<f64>()] };
    let jam_pos = draw();
    let sn_pos = (0..cfg.sensors).map(|_| draw()).collect();

    let s = Scenario {
        sn_pos,
        gn_pos,
        jam_pos,
        channel: cfg.channel,
        gn_cost,
        gn_capacity,
        budget: cfg.budget,
        jam_power: cfg.jam_power,
        lambda: cfg.lambda,
    };
    s.validate()?;
    Ok(s)
}

/// Seed for one trial of an experiment: stream `trial` of a ChaCha8 generator
/// keyed by the master seed.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng.next_u64()
}
