//! Stackelberg equilibrium of the association game.
//!
//! Substituting the jammer's threshold response into the network's problem
//! gives a single-level program with a step-function constraint and bilinear
//! `v * x` terms. Both are linearised exactly for binary variables:
//!
//! * the step becomes `v[n] >= -lambda * rho[n] - sum_m delta[n][m] * x[n][m]`;
//!   it forces `v = 1` when the jammer strictly prefers to attack and leaves
//!   `v` free otherwise, where the objective (all `a <= 0`) drives it to 0;
//! * each product becomes `z[n][m]` with `2z <= x + v` and `z >= x + v - 1`.
//!
//! Variables are ordered `[x (n-major), y, v, z (n-major)]`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bilp::{self, BinaryProgram, SolveOptions, SolveStatus};
use crate::error::{Error, Result};
use crate::game::{
    coefficients, jammer_best_response, jammer_objective, leader_payoff, link_draws_jamming,
    AssociationStrategy,
    GameCoefficients, JammerStrategy, KnowledgeMode,
};
use crate::model::{compute_link_probabilities_with, LinkOptions, Scenario};

/// Tolerance for comparing recomputed payoffs against solver objectives.
pub const PAYOFF_TOL: f64 = 1e-9;

/// Largest leader vector (`N*M + M`) the exhaustive oracle accepts.
pub const BRUTE_FORCE_LEADER_LIMIT: usize = 22;

#[derive(Clone, Copy, Debug)]
struct VarIndex {
    n: usize,
    m: usize,
}

impl VarIndex {
    fn x(&self, n: usize, m: usize) -> usize {
        n * self.m + m
    }
    fn y(&self, m: usize) -> usize {
        self.n * self.m + m
    }
    fn v(&self, n: usize) -> usize {
        self.n * self.m + self.m + n
    }
    fn z(&self, n: usize, m: usize) -> usize {
        self.n * self.m + self.m + self.n + n * self.m + m
    }
    fn leader_len(&self) -> usize {
        self.n * self.m + self.m
    }
    fn ilp_len(&self) -> usize {
        2 * self.n * self.m + self.n + self.m
    }

    fn names(&self, with_follower: bool) -> Vec<String> {
        let mut names = Vec::with_capacity(self.ilp_len());
        for n in 0..self.n {
            for m in 0..self.m {
                names.push(format!("x_{n}_{m}"));
            }
        }
        names.extend((0..self.m).map(|m| format!("y_{m}")));
        if with_follower {
            names.extend((0..self.n).map(|n| format!("v_{n}")));
            for n in 0..self.n {
                for m in 0..self.m {
                    names.push(format!("z_{n}_{m}"));
                }
            }
        }
        names
    }

    fn decode_leader(&self, assignment: &[bool]) -> AssociationStrategy {
        AssociationStrategy {
            x: (0..self.n)
                .map(|n| (0..self.m).map(|m| assignment[self.x(n, m)]).collect())
                .collect(),
            y: (0..self.m).map(|m| assignment[self.y(m)]).collect(),
        }
    }

    fn encode_leader(&self, a: &AssociationStrategy) -> Vec<bool> {
        let mut out: Vec<bool> = a.x.iter().flatten().copied().collect();
        out.extend(a.y.iter().copied());
        out
    }
}

fn check_dims(gc: &GameCoefficients, s: &Scenario) -> Result<VarIndex> {
    let (n, m) = (s.num_sensors(), s.num_gateways());
    if gc.num_sensors() != n || gc.num_gateways() != m || gc.b.len() != n || gc.delta_tilde.len() != n
    {
        return Err(Error::invalid(format!(
            "coefficients are {}x{}, scenario is {n}x{m}",
            gc.num_sensors(),
            gc.num_gateways()
        )));
    }
    if s.gn_cost.len() != m || s.gn_capacity.len() != m {
        return Err(Error::invalid("gateway cost/capacity lengths differ from gateway count"));
    }
    Ok(VarIndex { n, m })
}

/// Constraints shared by the plain association problem and the equilibrium
/// program: one gateway per sensor, capacities, budget, powered gateways.
fn add_association_rows(p: &mut BinaryProgram, ix: VarIndex, s: &Scenario) {
    for n in 0..ix.n {
        p.add((0..ix.m).map(|m| (ix.x(n, m), 1.0)).collect(), bilp::Sense::Le, 1.0);
    }
    for m in 0..ix.m {
        p.add(
            (0..ix.n).map(|n| (ix.x(n, m), 1.0)).collect(),
            bilp::Sense::Le,
            f64::from(s.gn_capacity[m]),
        );
    }
    p.add(
        (0..ix.m).map(|m| (ix.y(m), s.gn_cost[m])).collect(),
        bilp::Sense::Le,
        s.budget,
    );
    for n in 0..ix.n {
        for m in 0..ix.m {
            p.add(vec![(ix.x(n, m), 1.0), (ix.y(m), -1.0)], bilp::Sense::Le, 0.0);
        }
    }
}

/// The network's association problem against a fixed victim set.
pub fn build_p1(gc: &GameCoefficients, v: &JammerStrategy, s: &Scenario) -> Result<BinaryProgram> {
    let ix = check_dims(gc, s)?;
    if v.v.len() != ix.n {
        return Err(Error::invalid("victim vector length differs from sensor count"));
    }
    let mut objective = vec![0.0; ix.leader_len()];
    for n in 0..ix.n {
        for m in 0..ix.m {
            objective[ix.x(n, m)] = if v.v[n] {
                gc.a[n][m] + gc.b[n][m]
            } else {
                gc.b[n][m]
            };
        }
    }
    let mut p = BinaryProgram::new(objective);
    p.var_names = Some(ix.names(false));
    add_association_rows(&mut p, ix, s);
    Ok(p)
}

/// The single-level equilibrium program.
pub fn build_ilp_se(gc: &GameCoefficients, s: &Scenario) -> Result<BinaryProgram> {
    let ix = check_dims(gc, s)?;
    if let Some((sensor, gateway, value)) = gc.positive_penalty() {
        return Err(Error::PositivePenalty {
            sensor,
            gateway,
            value,
        });
    }

    let mut objective = vec![0.0; ix.ilp_len()];
    for n in 0..ix.n {
        for m in 0..ix.m {
            objective[ix.x(n, m)] = gc.b[n][m];
            objective[ix.z(n, m)] = gc.a[n][m];
        }
    }
    let mut p = BinaryProgram::new(objective);
    p.var_names = Some(ix.names(true));
    add_association_rows(&mut p, ix, s);

    for n in 0..ix.n {
        let mut coeffs: Vec<(usize, f64)> =
            (0..ix.m).map(|m| (ix.x(n, m), gc.delta_tilde[n][m])).collect();
        coeffs.push((ix.v(n), 1.0));
        p.add(coeffs, bilp::Sense::Ge, -(gc.lambda * gc.rho[n]));
    }
    // z <= (x + v) / 2, scaled by two
    for n in 0..ix.n {
        for m in 0..ix.m {
            p.add(
                vec![(ix.x(n, m), -1.0), (ix.v(n), -1.0), (ix.z(n, m), 2.0)],
                bilp::Sense::Le,
                0.0,
            );
        }
    }
    for n in 0..ix.n {
        for m in 0..ix.m {
            p.add(
                vec![(ix.x(n, m), -1.0), (ix.v(n), -1.0), (ix.z(n, m), 1.0)],
                bilp::Sense::Ge,
                -1.0,
            );
        }
    }
    Ok(p)
}

/// Adds `z[n][m] >= x[n][m]` for every link that draws the jammer on its own.
/// Valid for all binary points that follow the threshold rule (a sensor has
/// at most one link) and much tighter than the product rows in relaxation.
pub fn add_implied_rows(p: &mut BinaryProgram, gc: &GameCoefficients, s: &Scenario) -> Result<usize> {
    let ix = check_dims(gc, s)?;
    if p.num_vars != ix.ilp_len() {
        return Err(Error::invalid("program does not have the equilibrium layout"));
    }
    let mut added = 0;
    for n in 0..ix.n {
        for m in 0..ix.m {
            if link_draws_jamming(gc, n, m) {
                p.add(vec![(ix.z(n, m), 1.0), (ix.x(n, m), -1.0)], bilp::Sense::Ge, 0.0);
                added += 1;
            }
        }
    }
    Ok(added)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub nodes: u64,
    pub tiebreak_nodes: u64,
    pub wall_ms: f64,
    /// Objective reported by the program solve, before any tie correction.
    pub ilp_objective: f64,
    /// Sensors whose solved victim flag disagreed with the threshold rule
    /// (only possible at exact ties, with no payoff effect).
    pub tie_corrections: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub x_star: AssociationStrategy,
    pub v_star: JammerStrategy,
    pub z_star: Vec<Vec<bool>>,
    pub leader_payoff: f64,
    pub jammer_objective: f64,
    pub solver_stats: SolverStats,
}

impl Equilibrium {
    fn from_leader(x: AssociationStrategy, gc: &GameCoefficients, stats: SolverStats) -> Self {
        let v = jammer_best_response(&x, gc);
        let z = x
            .x
            .iter()
            .zip(&v.v)
            .map(|(row, &jam)| row.iter().map(|&on| on && jam).collect())
            .collect();
        Self {
            leader_payoff: leader_payoff(&x, &v, gc),
            jammer_objective: jammer_objective(&v, &x, gc),
            x_star: x,
            v_star: v,
            z_star: z,
            solver_stats: stats,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EquilibriumOptions {
    pub link: LinkOptions,
    pub solver: SolveOptions,
}

impl EquilibriumOptions {
    pub fn new() -> Self {
        Self {
            link: LinkOptions::default(),
            solver: SolveOptions::exact(),
        }
    }
}

pub fn game_coefficients(
    s: &Scenario,
    mode: KnowledgeMode,
    link: LinkOptions,
) -> Result<GameCoefficients> {
    let lp = compute_link_probabilities_with(s, link)?;
    coefficients(&lp, mode, s.lambda, s.jam_power)
}

pub fn solve_equilibrium(s: &Scenario, mode: KnowledgeMode) -> Result<Equilibrium> {
    solve_equilibrium_with(s, mode, &EquilibriumOptions::new())
}

pub fn solve_equilibrium_with(
    s: &Scenario,
    mode: KnowledgeMode,
    opts: &EquilibriumOptions,
) -> Result<Equilibrium> {
    let gc = game_coefficients(s, mode, opts.link)?;
    solve_with_coefficients(&gc, s, &opts.solver)
}

fn check_solution(sol: &bilp::BilpSolution) -> Result<()> {
    match sol.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::Infeasible => Err(Error::Inconsistent(
            "program reported infeasible although the all-zero assignment is feasible".into(),
        )),
        status => Err(Error::Solver {
            status,
            nodes: sol.nodes_explored + sol.tiebreak_nodes,
        }),
    }
}

/// Solves the equilibrium program for precomputed coefficients. The victim
/// set is re-derived from the threshold rule and the payoff recomputed from
/// the game definitions; a disagreement with the solver objective is an error.
pub fn solve_with_coefficients(
    gc: &GameCoefficients,
    s: &Scenario,
    solver: &SolveOptions,
) -> Result<Equilibrium> {
    let started = Instant::now();
    let ix = check_dims(gc, s)?;
    let mut program = build_ilp_se(gc, s)?;
    add_implied_rows(&mut program, gc, s)?;
    // v and z are re-derived below, so only the leader block needs a
    // canonical choice.
    let opts = SolveOptions {
        canonical_prefix: Some(ix.leader_len()),
        ..*solver
    };
    let sol = bilp::solve(&program, &opts)?;
    check_solution(&sol)?;

    let x = ix.decode_leader(&sol.assignment);
    let solved_v: Vec<bool> = (0..ix.n).map(|n| sol.assignment[ix.v(n)]).collect();
    let mut eq = Equilibrium::from_leader(x, gc, SolverStats::default());
    let tie_corrections = solved_v
        .iter()
        .zip(&eq.v_star.v)
        .filter(|(a, b)| a != b)
        .count();
    eq.solver_stats = SolverStats {
        nodes: sol.nodes_explored,
        tiebreak_nodes: sol.tiebreak_nodes,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        ilp_objective: sol.objective_value,
        tie_corrections,
    };
    if (eq.leader_payoff - sol.objective_value).abs() > PAYOFF_TOL {
        return Err(Error::Inconsistent(format!(
            "recomputed payoff {} differs from program objective {}",
            eq.leader_payoff, sol.objective_value
        )));
    }
    Ok(eq)
}

/// Best association against a fixed victim set.
pub fn best_association(
    gc: &GameCoefficients,
    v: &JammerStrategy,
    s: &Scenario,
    solver: &SolveOptions,
) -> Result<(AssociationStrategy, f64)> {
    let ix = check_dims(gc, s)?;
    let p = build_p1(gc, v, s)?;
    let sol = bilp::solve(&p, solver)?;
    check_solution(&sol)?;
    Ok((ix.decode_leader(&sol.assignment), sol.objective_value))
}

/// Optimal payoff when the jammer stays silent.
pub fn jam_free_optimum(gc: &GameCoefficients, s: &Scenario, solver: &SolveOptions) -> Result<f64> {
    best_association(gc, &JammerStrategy::silent(s.num_sensors()), s, solver).map(|(_, v)| v)
}

/// Solves the bilevel problem literally: every feasible leader move, each
/// answered by the threshold response. Ties go to the lexicographically
/// greatest leader vector.
pub fn brute_force_stackelberg(gc: &GameCoefficients, s: &Scenario) -> Result<Equilibrium> {
    let started = Instant::now();
    let ix = check_dims(gc, s)?;
    let len = ix.leader_len();
    if len > BRUTE_FORCE_LEADER_LIMIT {
        return Err(Error::TooLarge {
            vars: len,
            limit: BRUTE_FORCE_LEADER_LIMIT,
        });
    }

    let feasible = |x: &AssociationStrategy| -> bool {
        let cost = (0..ix.m)
            .filter(|&m| x.y[m])
            .fold(0.0, |acc, m| acc + s.gn_cost[m]);
        if cost > s.budget {
            return false;
        }
        for m in 0..ix.m {
            let load = (0..ix.n).filter(|&n| x.x[n][m]).count();
            if load as u64 > u64::from(s.gn_capacity[m]) {
                return false;
            }
        }
        x.is_well_formed()
    };

    let decode = |mask: u32| -> AssociationStrategy {
        let bits: Vec<bool> = (0..len).map(|j| mask >> (len - 1 - j) & 1 == 1).collect();
        ix.decode_leader(&bits)
    };

    let total = 1u32 << len;
    let mut best = f64::NEG_INFINITY;
    let mut payoffs = Vec::with_capacity(total as usize);
    for mask in 0..total {
        let x = decode(mask);
        let value = if feasible(&x) {
            let v = jammer_best_response(&x, gc);
            leader_payoff(&x, &v, gc)
        } else {
            f64::NEG_INFINITY
        };
        best = best.max(value);
        payoffs.push(value);
    }
    let chosen = (0..total)
        .rev()
        .find(|&mask| payoffs[mask as usize] >= best - PAYOFF_TOL)
        .expect("the idle association is always feasible");

    let stats = SolverStats {
        nodes: u64::from(total),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        ilp_objective: payoffs[chosen as usize],
        ..Default::default()
    };
    Ok(Equilibrium::from_leader(decode(chosen), gc, stats))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_CONSTRAINTS: &str = "association_constraints";
pub const CHECK_PRODUCTS: &str = "z_equals_v_times_x";
pub const CHECK_BEST_RESPONSE: &str = "jammer_best_response";
pub const CHECK_PAYOFF: &str = "payoff_recomputation";

/// Re-checks an equilibrium from first principles. Never fails; problems are
/// reported as failed checks.
pub fn verify_equilibrium(eq: &Equilibrium, gc: &GameCoefficients, s: &Scenario) -> VerificationReport {
    let mut checks = Vec::with_capacity(4);
    let n = s.num_sensors();
    let m = s.num_gateways();
    let shape_ok = eq.x_star.x.len() == n
        && eq.x_star.x.iter().all(|r| r.len() == m)
        && eq.x_star.y.len() == m
        && eq.v_star.v.len() == n
        && eq.z_star.len() == n
        && eq.z_star.iter().all(|r| r.len() == m);
    if !shape_ok {
        for name in [CHECK_CONSTRAINTS, CHECK_PRODUCTS, CHECK_BEST_RESPONSE, CHECK_PAYOFF] {
            checks.push(CheckResult {
                name: name.into(),
                passed: false,
                residual: f64::INFINITY,
            });
        }
        return VerificationReport { checks };
    }
    let ix = VarIndex { n, m };

    let constraint_residual = match build_p1(gc, &eq.v_star, s) {
        Ok(p) => p.max_violation(&ix.encode_leader(&eq.x_star)),
        Err(_) => f64::INFINITY,
    };
    checks.push(CheckResult {
        name: CHECK_CONSTRAINTS.into(),
        passed: constraint_residual <= PAYOFF_TOL,
        residual: constraint_residual,
    });

    let product_mismatches = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .filter(|&(i, j)| eq.z_star[i][j] != (eq.v_star.v[i] && eq.x_star.x[i][j]))
        .count();
    checks.push(CheckResult {
        name: CHECK_PRODUCTS.into(),
        passed: product_mismatches == 0,
        residual: product_mismatches as f64,
    });

    let response = jammer_best_response(&eq.x_star, gc);
    let response_mismatches = response
        .v
        .iter()
        .zip(&eq.v_star.v)
        .filter(|(a, b)| a != b)
        .count();
    checks.push(CheckResult {
        name: CHECK_BEST_RESPONSE.into(),
        passed: response_mismatches == 0,
        residual: response_mismatches as f64,
    });

    let payoff_gap = (leader_payoff(&eq.x_star, &eq.v_star, gc) - eq.leader_payoff).abs();
    let jammer_gap = (jammer_objective(&eq.v_star, &eq.x_star, gc) - eq.jammer_objective).abs();
    let gap = payoff_gap.max(jammer_gap);
    checks.push(CheckResult {
        name: CHECK_PAYOFF.into(),
        passed: gap <= PAYOFF_TOL,
        residual: gap,
    });

    VerificationReport { checks }
}

/// Output document of the `solve` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumDocument {
    pub x: Vec<Vec<u8>>,
    pub y: Vec<u8>,
    pub v: Vec<u8>,
    pub z: Vec<Vec<u8>>,
    pub leader_payoff: f64,
    pub jammer_objective: f64,
    pub verification: VerificationReport,
    pub solver_stats: SolverStats,
}

impl EquilibriumDocument {
    pub fn new(eq: &Equilibrium, verification: VerificationReport) -> Self {
        let bits = |row: &[bool]| row.iter().map(|&b| u8::from(b)).collect::<Vec<_>>();
        Self {
            x: eq.x_star.x.iter().map(|r| bits(r)).collect(),
            y: bits(&eq.x_star.y),
            v: bits(&eq.v_star.v),
            z: eq.z_star.iter().map(|r| bits(r)).collect(),
            leader_payoff: eq.leader_payoff,
            jammer_objective: eq.jammer_objective,
            verification,
            solver_stats: eq.solver_stats.clone(),
        }
    }
}
