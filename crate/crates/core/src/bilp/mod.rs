//! Exact solver for pure 0-1 linear programs.
//!
//! [`solve`] runs best-bound branch-and-bound over LP relaxations and then
//! canonicalises the answer: among all assignments within `tie_tol` of the
//! optimum it returns the lexicographically greatest one, i.e. variable 0 is
//! set to 1 whenever some optimal assignment allows it, then variable 1, and
//! so on. [`solve_brute_force`] applies the same rule by enumeration, so the
//! two agree on assignments, not just objective values.

mod search;
mod simplex;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use search::TraceEvent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// Sparse `(variable, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { coeffs, sense, rhs }
    }

    pub fn activity(&self, assignment: &[bool]) -> f64 {
        self.coeffs
            .iter()
            .filter(|&&(j, _)| assignment[j])
            .fold(0.0, |acc, &(_, a)| acc + a)
    }

    /// How far the assignment is from satisfying this row (0 when satisfied).
    pub fn violation(&self, assignment: &[bool]) -> f64 {
        let lhs = self.activity(assignment);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Maximise `objective . x` subject to `constraints`, `x` binary.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BinaryProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub var_names: Option<Vec<String>>,
}

impl BinaryProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            num_vars: objective.len(),
            objective,
            constraints: Vec::new(),
            var_names: None,
        }
    }

    pub fn add(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint::new(coeffs, sense, rhs));
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::invalid(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                self.num_vars
            )));
        }
        if let Some(names) = &self.var_names {
            if names.len() != self.num_vars {
                return Err(Error::invalid("var_names length differs from num_vars"));
            }
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("objective coefficient {j} is not finite")));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(Error::invalid(format!("constraint {i} has non-finite rhs")));
            }
            if c.coeffs.len() > self.num_vars {
                return Err(Error::invalid(format!("constraint {i} has too many terms")));
            }
            for &(j, a) in &c.coeffs {
                if j >= self.num_vars {
                    return Err(Error::invalid(format!(
                        "constraint {i} references variable {j} of {}",
                        self.num_vars
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::invalid(format!("constraint {i} has non-finite coefficient")));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, assignment: &[bool]) -> f64 {
        self.objective
            .iter()
            .zip(assignment)
            .filter(|(_, &on)| on)
            .fold(0.0, |acc, (&c, _)| acc + c)
    }

    pub fn max_violation(&self, assignment: &[bool]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.violation(assignment))
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, assignment: &[bool], tol: f64) -> bool {
        assignment.len() == self.num_vars
            && self.constraints.iter().all(|c| c.violation(assignment) <= tol)
    }

    fn name(&self, j: usize) -> String {
        match &self.var_names {
            Some(names) => names[j].clone(),
            None => format!("x{j}"),
        }
    }

    /// Plain-text dump in CPLEX LP style, for cross-checking elsewhere.
    pub fn to_lp_string(&self) -> String {
        fn terms(p: &BinaryProgram, coeffs: impl Iterator<Item = (usize, f64)>) -> String {
            let mut s = String::new();
            for (j, a) in coeffs {
                if a == 0.0 {
                    continue;
                }
                let sign = if a < 0.0 { "-" } else { "+" };
                let _ = write!(s, " {sign} {} {}", a.abs(), p.name(j));
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        }
        let mut out = String::from("Maximize\n obj:");
        out.push_str(&terms(self, self.objective.iter().copied().enumerate()));
        out.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(
                out,
                " c{i}:{} {op} {}",
                terms(self, c.coeffs.iter().copied()),
                c.rhs
            );
        }
        out.push_str("Binary\n");
        for j in 0..self.num_vars {
            let _ = writeln!(out, " {}", self.name(j));
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NodeLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilpSolution {
    /// Empty when infeasible.
    pub assignment: Vec<bool>,
    pub objective_value: f64,
    pub status: SolveStatus,
    /// Nodes of the optimisation tree.
    pub nodes_explored: u64,
    /// Extra nodes spent pinning the canonical optimum.
    pub tiebreak_nodes: u64,
}

impl BilpSolution {
    fn infeasible(nodes: u64) -> Self {
        Self {
            assignment: Vec::new(),
            objective_value: f64::NEG_INFINITY,
            status: SolveStatus::Infeasible,
            nodes_explored: nodes,
            tiebreak_nodes: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub node_limit: u64,
    /// LP values closer than this to 0 or 1 count as integral.
    pub integrality_tol: f64,
    /// A node is pruned when its bound cannot beat the incumbent by more than this.
    pub prune_tol: f64,
    /// Maximum row violation accepted for a binary assignment.
    pub feasibility_tol: f64,
    /// Assignments within this of the optimum count as tied.
    pub tie_tol: f64,
    /// Resolve ties to the lexicographically greatest optimum.
    pub canonical: bool,
    /// Only canonicalise the first `k` variables; the rest come from some
    /// optimum agreeing on that prefix. `None` covers all variables.
    pub canonical_prefix: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            node_limit: 10_000_000,
            integrality_tol: 1e-6,
            prune_tol: 1e-9,
            feasibility_tol: 1e-9,
            tie_tol: 1e-9,
            canonical: true,
            canonical_prefix: None,
        }
    }
}

impl SolveOptions {
    /// Rows are checked without slack. Used for programs whose rows encode
    /// sign decisions that must match a direct evaluation bit for bit.
    pub fn exact() -> Self {
        Self {
            feasibility_tol: 0.0,
            ..Self::default()
        }
    }
}

pub fn solve(p: &BinaryProgram, opts: &SolveOptions) -> Result<BilpSolution> {
    solve_traced(p, opts, |_| {})
}

/// [`solve`], reporting every evaluated node of the optimisation tree.
pub fn solve_traced(
    p: &BinaryProgram,
    opts: &SolveOptions,
    trace: impl FnMut(&TraceEvent),
) -> Result<BilpSolution> {
    p.validate()?;
    Ok(search::branch_and_bound(p, opts, trace))
}

pub const BRUTE_FORCE_LIMIT: usize = 25;

pub fn solve_brute_force(p: &BinaryProgram) -> Result<BilpSolution> {
    solve_brute_force_with(p, &SolveOptions::default())
}

/// Enumerates every assignment. Only `feasibility_tol` and `tie_tol` of
/// `opts` are used.
pub fn solve_brute_force_with(p: &BinaryProgram, opts: &SolveOptions) -> Result<BilpSolution> {
    p.validate()?;
    let n = p.num_vars;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            vars: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    // Variable 0 is the most significant bit, so numeric order on masks is
    // lexicographic order on assignments.
    let decode = |mask: u32, buf: &mut Vec<bool>| {
        buf.clear();
        buf.extend((0..n).map(|j| mask >> (n - 1 - j) & 1 == 1));
    };
    let total: u64 = 1u64 << n;
    let mut buf = Vec::with_capacity(n);
    let mut best = f64::NEG_INFINITY;
    for mask in 0..total {
        decode(mask as u32, &mut buf);
        if p.is_feasible(&buf, opts.feasibility_tol) {
            best = best.max(p.objective_value(&buf));
        }
    }
    if best == f64::NEG_INFINITY {
        return Ok(BilpSolution::infeasible(total));
    }
    for mask in (0..total).rev() {
        decode(mask as u32, &mut buf);
        if p.is_feasible(&buf, opts.feasibility_tol) {
            let value = p.objective_value(&buf);
            if value >= best - opts.tie_tol {
                return Ok(BilpSolution {
                    assignment: buf,
                    objective_value: value,
                    status: SolveStatus::Optimal,
                    nodes_explored: total,
                    tiebreak_nodes: 0,
                });
            }
        }
    }
    unreachable!("the optimum itself passes the tie test")
}

/// Optimal value of the continuous relaxation over `[0, 1]^n`; `None` when
/// even the relaxation is infeasible.
pub fn lp_relaxation_bound(p: &BinaryProgram) -> Result<Option<f64>> {
    p.validate()?;
    let free = vec![None; p.num_vars];
    match simplex::solve_relaxation(p.num_vars, &p.objective, &p.constraints, &free) {
        simplex::LpOutcome::Optimal { objective, .. } => Ok(Some(objective)),
        simplex::LpOutcome::Infeasible => Ok(None),
        simplex::LpOutcome::Stalled => Err(Error::Inconsistent(
            "simplex exceeded its pivot budget".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> BinaryProgram {
        let mut p = BinaryProgram::new(vec![1.0, 1.0]);
        p.add(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
        p
    }

    #[test]
    fn two_variable_toy() {
        let s = solve(&toy(), &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective_value, 1.0);
        assert_eq!(s.assignment, vec![true, false]);
        let b = solve_brute_force(&toy()).unwrap();
        assert_eq!(b.assignment, s.assignment);
    }

    #[test]
    fn infeasible_system() {
        let mut p = BinaryProgram::new(vec![1.0]);
        p.add(vec![(0, 1.0)], Sense::Ge, 1.0);
        p.add(vec![(0, 1.0)], Sense::Le, 0.0);
        assert_eq!(solve(&p, &SolveOptions::default()).unwrap().status, SolveStatus::Infeasible);
        assert_eq!(solve_brute_force(&p).unwrap().status, SolveStatus::Infeasible);
        assert_eq!(lp_relaxation_bound(&p).unwrap(), None);
    }

    #[test]
    fn negative_objective_prefers_zeros() {
        let p = BinaryProgram::new(vec![-1.0; 5]);
        let b = solve_brute_force(&p).unwrap();
        assert_eq!(b.assignment, vec![false; 5]);
        assert_eq!(b.objective_value, 0.0);
        let s = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(s.assignment, b.assignment);
    }

    #[test]
    fn cardinality_counts() {
        let mut p = BinaryProgram::new(vec![1.0; 6]);
        p.add((0..6).map(|j| (j, 1.0)).collect(), Sense::Le, 4.0);
        let b = solve_brute_force(&p).unwrap();
        assert_eq!(b.objective_value, 4.0);
        assert_eq!(b.assignment, vec![true, true, true, true, false, false]);
        assert_eq!(solve(&p, &SolveOptions::default()).unwrap().assignment, b.assignment);
    }

    #[test]
    fn half_bound() {
        let mut p = BinaryProgram::new(vec![1.0]);
        p.add(vec![(0, 2.0)], Sense::Le, 1.0);
        assert!((lp_relaxation_bound(&p).unwrap().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(solve(&p, &SolveOptions::default()).unwrap().objective_value, 0.0);
    }

    #[test]
    fn integral_root_stops_at_root() {
        let s = solve(&toy(), &SolveOptions::default()).unwrap();
        assert_eq!(s.nodes_explored, 1);
    }

    #[test]
    fn brute_force_refuses_large() {
        let p = BinaryProgram::new(vec![0.0; 26]);
        assert!(matches!(solve_brute_force(&p), Err(Error::TooLarge { vars: 26, .. })));
    }

    #[test]
    fn malformed_rejected() {
        let mut p = BinaryProgram::new(vec![1.0]);
        p.add(vec![(3, 1.0)], Sense::Le, 1.0);
        assert!(matches!(solve(&p, &SolveOptions::default()), Err(Error::InvalidInput(_))));
        let p = BinaryProgram::new(vec![f64::NAN]);
        assert!(solve(&p, &SolveOptions::default()).is_err());
    }

    #[test]
    fn node_limit_reported() {
        // a knapsack whose relaxation is fractional at the root
        let mut p = BinaryProgram::new(vec![5.0, 4.0, 3.0, 2.0, 7.0, 1.5]);
        p.add(
            vec![(0, 4.0), (1, 3.0), (2, 2.5), (3, 1.2), (4, 5.5), (5, 1.1)],
            Sense::Le,
            7.3,
        );
        let opts = SolveOptions {
            node_limit: 1,
            ..Default::default()
        };
        let s = solve(&p, &opts).unwrap();
        assert_eq!(s.status, SolveStatus::NodeLimit);
    }

    #[test]
    fn lp_dump_mentions_every_row() {
        let mut p = toy();
        p.var_names = Some(vec!["a".into(), "b".into()]);
        let text = p.to_lp_string();
        assert!(text.starts_with("Maximize\n obj: + 1 a + 1 b\n"));
        assert!(text.contains(" c0: + 1 a + 1 b <= 1\n"));
        assert!(text.ends_with("Binary\n a\n b\nEnd\n"));
    }
}
