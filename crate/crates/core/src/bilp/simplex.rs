//! Dense bounded-variable primal simplex for the continuous relaxation.
//!
//! Structural variables live in `[0, 1]` and may be fixed by the caller; fixed
//! columns are substituted out before the tableau is built. Rows get a slack
//! (or surplus) column, rows whose slack cannot start basic get an artificial
//! column, and a phase-one pass drives the artificials to zero. Entering and
//! leaving choices both follow Bland's smallest-index rule.

use super::{Constraint, Sense};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal {
        objective: f64,
        values: Vec<f64>,
        /// Per structural variable: the reduced cost when the column sits
        /// at its lower bound, 0 otherwise. Raising such a variable to 1
        /// cannot lift the relaxation above `objective + reduced_costs[j]`.
        reduced_costs: Vec<f64>,
    },
    Infeasible,
    /// Pivot budget exhausted; never observed on bounded 0-1 relaxations but
    /// reported rather than looped on.
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced costs of the current phase objective.
    cost_row: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    upper: Vec<f64>,
}

impl Tableau {
    fn column_value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::AtLower => 0.0,
            Status::AtUpper => self.upper[j],
            Status::Basic => {
                let i = self.basis.iter().position(|&b| b == j).expect("basic column");
                self.beta[i]
            }
        }
    }

    fn reset_costs(&mut self, costs: &[f64]) {
        let ncol = costs.len();
        let mut row = costs.to_vec();
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = costs[bj];
            if cb != 0.0 {
                for (r, t) in row.iter_mut().zip(&self.rows[i]) {
                    *r -= cb * t;
                }
            }
        }
        debug_assert_eq!(row.len(), ncol);
        self.cost_row = row;
    }

    /// Maximises the objective whose reduced costs sit in `cost_row`.
    fn optimize(&mut self) -> bool {
        for _ in 0..MAX_ITERATIONS {
            let entering = self.cost_row.iter().enumerate().position(|(j, &d)| {
                match self.status[j] {
                    Status::AtLower => d > COST_TOL && self.upper[j] > 0.0,
                    Status::AtUpper => d < -COST_TOL,
                    Status::Basic => false,
                }
            });
            let Some(j) = entering else {
                return true;
            };
            let dir = if self.status[j] == Status::AtLower { 1.0 } else { -1.0 };

            let mut step = self.upper[j];
            let mut leave: Option<(usize, Status)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let coef = dir * row[j];
                let (limit, to) = if coef > PIVOT_TOL {
                    (self.beta[i].max(0.0) / coef, Status::AtLower)
                } else if coef < -PIVOT_TOL && self.upper[self.basis[i]].is_finite() {
                    let room = (self.upper[self.basis[i]] - self.beta[i]).max(0.0);
                    (room / -coef, Status::AtUpper)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < step || (limit == step && step.is_finite()),
                    Some((r, _)) => {
                        limit < step || (limit == step && self.basis[i] < self.basis[r])
                    }
                };
                if better {
                    step = limit;
                    leave = Some((i, to));
                }
            }
            if !step.is_finite() {
                // unbounded direction; cannot happen with bounded columns
                return false;
            }

            for (b, row) in self.beta.iter_mut().zip(&self.rows) {
                *b -= dir * step * row[j];
            }
            match leave {
                None => {
                    self.status[j] = if dir > 0.0 {
                        Status::AtUpper
                    } else {
                        Status::AtLower
                    };
                }
                Some((r, to)) => {
                    let start = if dir > 0.0 { 0.0 } else { self.upper[j] };
                    let leaving = self.basis[r];
                    self.status[leaving] = to;
                    self.status[j] = Status::Basic;
                    self.basis[r] = j;
                    self.beta[r] = start + dir * step;
                    self.pivot(r, j);
                }
            }
        }
        false
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for t in self.rows[r].iter_mut() {
            *t /= p;
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (t, &pr) in row.iter_mut().zip(&pivot_row) {
                    *t -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        let f = self.cost_row[j];
        if f != 0.0 {
            for (t, &pr) in self.cost_row.iter_mut().zip(&pivot_row) {
                *t -= f * pr;
            }
            self.cost_row[j] = 0.0;
        }
        self.rows[r] = pivot_row;
    }
}

/// Maximises `objective . x` over `constraints` with `x` in `[0, 1]`, where
/// `fixed[j] = Some(v)` pins column `j` to `v`.
pub(crate) fn solve_relaxation(
    num_vars: usize,
    objective: &[f64],
    constraints: &[Constraint],
    fixed: &[Option<bool>],
) -> LpOutcome {
    // Map free structural columns to tableau columns.
    let mut col_of = vec![usize::MAX; num_vars];
    let mut free = Vec::new();
    for j in 0..num_vars {
        if fixed[j].is_none() {
            col_of[j] = free.len();
            free.push(j);
        }
    }
    let fixed_value = |j: usize| -> f64 {
        match fixed[j] {
            Some(true) => 1.0,
            _ => 0.0,
        }
    };
    let fixed_objective: f64 = (0..num_vars)
        .filter(|&j| fixed[j] == Some(true))
        .map(|j| objective[j])
        .sum();

    // Reduce rows; rows with no free column are checked directly.
    struct Row {
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    }
    let mut rows = Vec::with_capacity(constraints.len());
    for c in constraints {
        let mut rhs = c.rhs;
        let mut coeffs = Vec::new();
        for &(j, a) in &c.coeffs {
            if fixed[j].is_some() {
                rhs -= a * fixed_value(j);
            } else if a != 0.0 {
                coeffs.push((col_of[j], a));
            }
        }
        if coeffs.is_empty() {
            let ok = match c.sense {
                Sense::Le => 0.0 <= rhs + FEAS_TOL,
                Sense::Ge => 0.0 >= rhs - FEAS_TOL,
                Sense::Eq => rhs.abs() <= FEAS_TOL,
            };
            if !ok {
                return LpOutcome::Infeasible;
            }
            continue;
        }
        rows.push(Row {
            coeffs,
            sense: c.sense,
            rhs,
        });
    }

    let n = free.len();
    let m = rows.len();
    if m == 0 {
        // Every free column is unconstrained: take it iff it pays.
        let mut values: Vec<f64> = (0..num_vars).map(fixed_value).collect();
        let mut obj = fixed_objective;
        for &j in &free {
            if objective[j] > 0.0 {
                values[j] = 1.0;
                obj += objective[j];
            }
        }
        if m == 0 {
            let reduced_costs = (0..num_vars)
                .map(|j| {
                    if fixed[j].is_none() && objective[j] <= 0.0 {
                        objective[j]
                    } else {
                        0.0
                    }
                })
                .collect();
            return LpOutcome::Optimal {
                objective: obj,
                values,
                reduced_costs,
            };
        }
    }

    let n_slack = rows.iter().filter(|r| r.sense != Sense::Eq).count();
    // Decide artificials: a row needs one unless its slack enters with +1 after
    // sign normalisation.
    let mut needs_art = Vec::with_capacity(m);
    for r in &rows {
        let flip = r.rhs < 0.0;
        let slack_sign = match r.sense {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => 0.0,
        };
        let effective = if flip { -slack_sign } else { slack_sign };
        needs_art.push(effective <= 0.0);
    }
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let ncol = n + n_slack + n_art;

    let mut t_rows = vec![vec![0.0; ncol]; m];
    let mut beta = vec![0.0; m];
    let mut basis = vec![0; m];
    let mut status = vec![Status::AtLower; ncol];
    let mut upper = vec![1.0; ncol];
    for u in upper.iter_mut().skip(n) {
        *u = f64::INFINITY;
    }

    let mut slack_col = n;
    let mut art_col = n + n_slack;
    for (i, r) in rows.iter().enumerate() {
        let sign = if r.rhs < 0.0 { -1.0 } else { 1.0 };
        for &(c, a) in &r.coeffs {
            t_rows[i][c] += sign * a;
        }
        beta[i] = sign * r.rhs;
        let slack = match r.sense {
            Sense::Le => Some(1.0),
            Sense::Ge => Some(-1.0),
            Sense::Eq => None,
        };
        if let Some(s) = slack {
            t_rows[i][slack_col] = sign * s;
            if !needs_art[i] {
                basis[i] = slack_col;
                status[slack_col] = Status::Basic;
            }
            slack_col += 1;
        }
        if needs_art[i] {
            t_rows[i][art_col] = 1.0;
            basis[i] = art_col;
            status[art_col] = Status::Basic;
            art_col += 1;
        }
    }

    let mut tab = Tableau {
        rows: t_rows,
        cost_row: Vec::new(),
        beta,
        basis,
        status,
        upper,
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; ncol];
        for c in phase1.iter_mut().skip(n + n_slack) {
            *c = -1.0;
        }
        tab.reset_costs(&phase1);
        if !tab.optimize() {
            return LpOutcome::Stalled;
        }
        let infeasibility: f64 = (n + n_slack..ncol).map(|j| tab.column_value(j)).sum();
        if infeasibility > FEAS_TOL {
            return LpOutcome::Infeasible;
        }
        for j in n + n_slack..ncol {
            tab.upper[j] = 0.0;
            if tab.status[j] == Status::AtUpper {
                tab.status[j] = Status::AtLower;
            }
        }
    }

    let mut phase2 = vec![0.0; ncol];
    for (c, &j) in free.iter().enumerate() {
        phase2[c] = objective[j];
    }
    tab.reset_costs(&phase2);
    if !tab.optimize() {
        return LpOutcome::Stalled;
    }

    let mut col_values: Vec<f64> = (0..ncol)
        .map(|j| if tab.status[j] == Status::AtUpper { tab.upper[j] } else { 0.0 })
        .collect();
    for (i, &bj) in tab.basis.iter().enumerate() {
        col_values[bj] = tab.beta[i];
    }

    let mut values: Vec<f64> = (0..num_vars).map(fixed_value).collect();
    let mut reduced_costs = vec![0.0; num_vars];
    let mut obj = fixed_objective;
    for (c, &j) in free.iter().enumerate() {
        let v = col_values[c].clamp(0.0, 1.0);
        values[j] = v;
        obj += objective[j] * v;
        if tab.status[c] == Status::AtLower {
            reduced_costs[j] = tab.cost_row[c];
        }
    }
    LpOutcome::Optimal {
        objective: obj,
        values,
        reduced_costs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> Constraint {
        Constraint {
            coeffs: coeffs.to_vec(),
            sense,
            rhs,
        }
    }

    fn optimum(out: LpOutcome) -> (f64, Vec<f64>) {
        match out {
            LpOutcome::Optimal { objective, values, .. } => (objective, values),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn half_unit() {
        let (obj, x) = optimum(solve_relaxation(
            1,
            &[1.0],
            &[row(&[(0, 2.0)], Sense::Le, 1.0)],
            &[None],
        ));
        assert!((obj - 0.5).abs() < 1e-12);
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bound_flips_and_fixings() {
        // max x0 + 2 x1 + 3 x2, x0 + x1 + x2 <= 2, x2 fixed to 0
        let c = [row(&[(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 2.0)];
        let (obj, _) = optimum(solve_relaxation(3, &[1.0, 2.0, 3.0], &c, &[None, None, None]));
        assert!((obj - 5.0).abs() < 1e-12);
        let (obj, x) = optimum(solve_relaxation(
            3,
            &[1.0, 2.0, 3.0],
            &c,
            &[None, None, Some(false)],
        ));
        assert!((obj - 3.0).abs() < 1e-12);
        assert_eq!(x[2], 0.0);
    }

    #[test]
    fn ge_and_eq_rows_need_phase_one() {
        // max -x0 - x1, x0 + x1 >= 1.5, x0 - x1 = 0
        let c = [
            row(&[(0, 1.0), (1, 1.0)], Sense::Ge, 1.5),
            row(&[(0, 1.0), (1, -1.0)], Sense::Eq, 0.0),
        ];
        let (obj, x) = optimum(solve_relaxation(2, &[-1.0, -1.0], &c, &[None, None]));
        assert!((obj + 1.5).abs() < 1e-12);
        assert!((x[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn infeasible_rows() {
        let c = [
            row(&[(0, 1.0)], Sense::Ge, 1.0),
            row(&[(0, 1.0)], Sense::Le, 0.0),
        ];
        assert_eq!(solve_relaxation(1, &[1.0], &c, &[None]), LpOutcome::Infeasible);
        let c = [row(&[(0, 1.0), (1, 1.0)], Sense::Ge, 3.0)];
        assert_eq!(
            solve_relaxation(2, &[1.0, 1.0], &c, &[None, None]),
            LpOutcome::Infeasible
        );
        let c = [row(&[(0, 1.0)], Sense::Ge, 1.0)];
        assert_eq!(
            solve_relaxation(1, &[1.0], &c, &[Some(false)]),
            LpOutcome::Infeasible
        );
    }

    #[test]
    fn negative_rhs_le_row() {
        // max x0 + x1, -x0 - x1 <= -1.2, x0 <= 0.3
        let c = [
            row(&[(0, -1.0), (1, -1.0)], Sense::Le, -1.2),
            row(&[(0, 1.0)], Sense::Le, 0.3),
        ];
        let (obj, x) = optimum(solve_relaxation(2, &[1.0, 1.0], &c, &[None, None]));
        assert!((obj - 1.3).abs() < 1e-12);
        assert!((x[0] - 0.3).abs() < 1e-12);
    }
}
