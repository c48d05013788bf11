use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{solve_relaxation, LpOutcome};
use super::{BilpSolution, BinaryProgram, SolveOptions, SolveStatus};

/// One evaluated node of the optimisation tree.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub node: u64,
    pub depth: usize,
    /// LP bound at this node; `None` when the relaxation was infeasible.
    pub lp_bound: Option<f64>,
    /// Best objective known when the node was evaluated.
    pub incumbent: Option<f64>,
}

struct Node {
    fixed: Vec<Option<bool>>,
    bound: f64,
    depth: usize,
    seq: u64,
}

// Best bound first, then deeper, then most recently created.
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

#[derive(Clone, Copy)]
enum Goal {
    /// Find the best assignment.
    Maximize,
    /// Stop at the first assignment worth at least this much.
    Reach(f64),
}

struct LimitHit;

struct Explorer<'a> {
    p: &'a BinaryProgram,
    opts: &'a SolveOptions,
    nodes: u64,
}

type Incumbent = Option<(Vec<bool>, f64)>;

impl<'a> Explorer<'a> {
    fn fractionality(v: f64) -> f64 {
        v.min(1.0 - v).max(0.0)
    }

    fn prunable(&self, goal: Goal, bound: f64, incumbent: &Incumbent) -> bool {
        match goal {
            Goal::Maximize => incumbent
                .as_ref()
                .is_some_and(|(_, best)| bound <= best + self.opts.prune_tol),
            Goal::Reach(target) => bound < target - self.opts.prune_tol,
        }
    }

    /// Free variable to branch on: largest fractionality among `candidates`,
    /// ties to the lowest index.
    fn pick(values: &[f64], candidates: impl Iterator<Item = usize>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in candidates {
            let f = Self::fractionality(values[j]);
            if best.is_none_or(|(bj, bf)| f > bf || (f == bf && j < bj)) {
                best = Some((j, f));
            }
        }
        best.map(|(j, _)| j)
    }

    fn run(
        &mut self,
        root: Vec<Option<bool>>,
        goal: Goal,
        trace: &mut dyn FnMut(&TraceEvent),
        mut incumbent: Incumbent,
    ) -> Result<Incumbent, (LimitHit, Incumbent)> {
        let p = self.p;
        let n = p.num_vars;
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        heap.push(Node {
            fixed: root,
            bound: f64::INFINITY,
            depth: 0,
            seq,
        });

        while let Some(node) = heap.pop() {
            if self.prunable(goal, node.bound, &incumbent) {
                continue;
            }
            if self.nodes >= self.opts.node_limit {
                return Err((LimitHit, incumbent));
            }
            self.nodes += 1;

            let (bound, values) =
                match solve_relaxation(n, &p.objective, &p.constraints, &node.fixed) {
                    LpOutcome::Optimal {
                        objective, values, ..
                    } => (objective, Some(values)),
                    LpOutcome::Infeasible => {
                        trace(&TraceEvent {
                            node: self.nodes,
                            depth: node.depth,
                            lp_bound: None,
                            incumbent: incumbent.as_ref().map(|(_, v)| *v),
                        });
                        continue;
                    }
                    // No bound available: keep the parent's and split.
                    LpOutcome::Stalled => (node.bound, None),
                };
            trace(&TraceEvent {
                node: self.nodes,
                depth: node.depth,
                lp_bound: Some(bound),
                incumbent: incumbent.as_ref().map(|(_, v)| *v),
            });
            if self.prunable(goal, bound, &incumbent) {
                continue;
            }

            let free = || (0..n).filter(|&j| node.fixed[j].is_none());
            let branch_var = match &values {
                None => free().next(),
                Some(values) => {
                    let fractional = Self::pick(
                        values,
                        free().filter(|&j| {
                            Self::fractionality(values[j]) > self.opts.integrality_tol
                        }),
                    );
                    if fractional.is_some() {
                        fractional
                    } else {
                        let candidate: Vec<bool> = (0..n)
                            .map(|j| node.fixed[j].unwrap_or(values[j] >= 0.5))
                            .collect();
                        let violated: Vec<_> = p
                            .constraints
                            .iter()
                            .filter(|c| c.violation(&candidate) > self.opts.feasibility_tol)
                            .collect();
                        if violated.is_empty() {
                            let value = p.objective_value(&candidate);
                            let settled = match goal {
                                Goal::Reach(target) if value >= target => {
                                    return Ok(Some((candidate, value)));
                                }
                                Goal::Reach(_) => false,
                                Goal::Maximize => bound <= value + self.opts.prune_tol,
                            };
                            let next = if settled {
                                None
                            } else {
                                Self::pick(
                                    values,
                                    free().filter(|&j| values[j] != f64::from(u8::from(candidate[j]))),
                                )
                            };
                            if matches!(goal, Goal::Maximize)
                                && incumbent.as_ref().is_none_or(|(_, best)| value > *best)
                            {
                                incumbent = Some((candidate, value));
                            }
                            next
                        } else {
                            // The relaxation accepted a point the exact rows reject;
                            // split on a free variable those rows depend on.
                            let mut involved = vec![false; n];
                            for c in &violated {
                                for &(j, a) in &c.coeffs {
                                    if a != 0.0 && node.fixed[j].is_none() {
                                        involved[j] = true;
                                    }
                                }
                            }
                            Self::pick(values, (0..n).filter(|&j| involved[j]))
                        }
                    }
                }
            };

            let Some(j) = branch_var else {
                continue;
            };
            for value in [false, true] {
                let mut fixed = node.fixed.clone();
                fixed[j] = Some(value);
                seq += 1;
                heap.push(Node {
                    fixed,
                    bound,
                    depth: node.depth + 1,
                    seq,
                });
            }
        }
        Ok(incumbent)
    }
}

/// Slack on reduced-cost screening, well above simplex round-off.
const SCREEN_MARGIN: f64 = 1e-6;

pub(super) fn branch_and_bound(
    p: &BinaryProgram,
    opts: &SolveOptions,
    mut trace: impl FnMut(&TraceEvent),
) -> BilpSolution {
    let n = p.num_vars;
    let mut explorer = Explorer { p, opts, nodes: 0 };

    let found = explorer.run(vec![None; n], Goal::Maximize, &mut trace, None);
    let main_nodes = explorer.nodes;
    let (mut witness, best) = match found {
        Ok(Some(inc)) => inc,
        Ok(None) => return BilpSolution::infeasible(main_nodes),
        Err((LimitHit, inc)) => {
            return limited(p, inc, main_nodes, 0);
        }
    };

    if opts.canonical {
        let target = best - opts.tie_tol;
        let prefix = opts.canonical_prefix.map_or(n, |k| k.min(n));
        // Raising a variable that sits at 0 in the root relaxation costs at
        // least its reduced cost, which rules most candidates out at once.
        let screen = match solve_relaxation(n, &p.objective, &p.constraints, &vec![None; n]) {
            LpOutcome::Optimal {
                objective,
                reduced_costs,
                ..
            } => Some((objective, reduced_costs)),
            _ => None,
        };
        let mut fixed = vec![None; n];
        let mut quiet = |_: &TraceEvent| {};
        for j in 0..prefix {
            fixed[j] = Some(true);
            if witness[j] {
                continue;
            }
            if let Some((root, rc)) = &screen {
                if root + rc[j] < target - SCREEN_MARGIN {
                    fixed[j] = Some(false);
                    continue;
                }
            }
            match explorer.run(fixed.clone(), Goal::Reach(target), &mut quiet, None) {
                Ok(Some((better, _))) => witness = better,
                Ok(None) => fixed[j] = Some(false),
                Err(_) => {
                    let tiebreak = explorer.nodes - main_nodes;
                    return limited(p, Some((witness, best)), main_nodes, tiebreak);
                }
            }
        }
    }

    BilpSolution {
        objective_value: p.objective_value(&witness),
        assignment: witness,
        status: SolveStatus::Optimal,
        nodes_explored: main_nodes,
        tiebreak_nodes: explorer.nodes - main_nodes,
    }
}

fn limited(p: &BinaryProgram, incumbent: Incumbent, nodes: u64, tiebreak: u64) -> BilpSolution {
    let (assignment, objective_value) = match incumbent {
        Some((a, _)) => {
            let v = p.objective_value(&a);
            (a, v)
        }
        None => (Vec::new(), f64::NEG_INFINITY),
    };
    BilpSolution {
        assignment,
        objective_value,
        status: SolveStatus::NodeLimit,
        nodes_explored: nodes,
        tiebreak_nodes: tiebreak,
    }
}
