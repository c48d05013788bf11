use jamgame::bilp::{
    lp_relaxation_bound, solve, solve_brute_force, BinaryProgram, Constraint, Sense, SolveOptions,
    SolveStatus,
};
use jamgame::dynamics::detect_period;
use jamgame::game::{
    jammer_best_response, jammer_objective, AssociationStrategy, JammerStrategy, KnowledgeMode,
};
use jamgame::model::{generate_scenario, GenConfig, Layout, LinkOptions, Scenario};
use jamgame::stackelberg::{
    brute_force_stackelberg, game_coefficients, jam_free_optimum, solve_with_coefficients,
    verify_equilibrium,
};
use proptest::prelude::*;

fn program() -> impl Strategy<Value = BinaryProgram> {
    (1usize..=12).prop_flat_map(|n| {
        let coef = prop_oneof![(-4i32..=4).prop_map(f64::from), -3.0f64..3.0];
        let row = (
            prop::collection::vec((0..n, (-3i32..=3).prop_map(f64::from)), 1..=n),
            prop_oneof![Just(Sense::Le), Just(Sense::Ge), Just(Sense::Eq)],
            (-3i32..=4).prop_map(f64::from),
        )
            .prop_map(|(coeffs, sense, rhs)| Constraint { coeffs, sense, rhs });
        (
            prop::collection::vec(coef, n),
            prop::collection::vec(row, 0..6),
        )
            .prop_map(move |(objective, constraints)| {
                let mut p = BinaryProgram::new(objective);
                for c in constraints {
                    p.add(c.coeffs, c.sense, c.rhs);
                }
                p
            })
    })
}

fn small_scenario() -> impl Strategy<Value = (Scenario, KnowledgeMode)> {
    (
        1usize..=4,
        prop_oneof![Just(1usize), Just(2)],
        any::<u64>(),
        0.0f64..1.2,
        prop_oneof![Just(0.0), Just(1.0), Just(2.0)],
        prop_oneof![Just(KnowledgeMode::Learned), Just(KnowledgeMode::Naive)],
    )
        .prop_map(|(n, m, seed, lambda, budget, mode)| {
            let layout = if m == 1 {
                Layout::Explicit {
                    positions: vec![[0.5, 0.5]],
                    capacity: vec![2],
                    cost: vec![1.0],
                }
            } else {
                Layout::Explicit {
                    positions: vec![[0.25, 0.5], [0.75, 0.5]],
                    capacity: vec![2, 1],
                    cost: vec![1.0, 1.0],
                }
            };
            let s = generate_scenario(
                &GenConfig {
                    layout,
                    sensors: n,
                    budget,
                    lambda,
                    ..GenConfig::default()
                },
                seed,
            )
            .unwrap();
            (s, mode)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solver_agrees_with_enumeration(p in program()) {
        let fast = solve(&p, &SolveOptions::default()).unwrap();
        let slow = solve_brute_force(&p).unwrap();
        prop_assert_eq!(fast.status, slow.status);
        if slow.status == SolveStatus::Optimal {
            prop_assert_eq!(fast.objective_value, slow.objective_value);
            prop_assert_eq!(&fast.assignment, &slow.assignment);
            prop_assert!(p.max_violation(&fast.assignment) <= 1e-9);
            let bound = lp_relaxation_bound(&p).unwrap().expect("feasible relaxation");
            prop_assert!(bound >= fast.objective_value - 1e-9);
        }
    }

    #[test]
    fn solver_is_deterministic(p in program()) {
        prop_assert_eq!(
            solve(&p, &SolveOptions::default()).unwrap(),
            solve(&p, &SolveOptions::default()).unwrap()
        );
    }

    #[test]
    fn equilibrium_matches_bilevel_oracle((s, mode) in small_scenario()) {
        let gc = game_coefficients(&s, mode, LinkOptions::default()).unwrap();
        let eq = solve_with_coefficients(&gc, &s, &SolveOptions::exact()).unwrap();
        let bf = brute_force_stackelberg(&gc, &s).unwrap();
        prop_assert!((eq.leader_payoff - bf.leader_payoff).abs() <= 1e-9,
            "{} vs {}", eq.leader_payoff, bf.leader_payoff);
        prop_assert!(verify_equilibrium(&eq, &gc, &s).passed());
        let free = jam_free_optimum(&gc, &s, &SolveOptions::exact()).unwrap();
        prop_assert!(eq.leader_payoff <= free + 1e-9);
    }

    #[test]
    fn best_response_minimises_jammer_cost((s, mode) in small_scenario(), mask in any::<u32>()) {
        let gc = game_coefficients(&s, mode, LinkOptions::default()).unwrap();
        let (n, m) = (s.num_sensors(), s.num_gateways());
        // any association, feasible or not, is a legal thing to respond to
        let mut x = AssociationStrategy::idle(n, m);
        for i in 0..n {
            let pick = (mask >> (2 * i)) as usize % (m + 1);
            if pick < m {
                x.x[i][pick] = true;
                x.y[pick] = true;
            }
        }
        let br = jammer_best_response(&x, &gc);
        let best = jammer_objective(&br, &x, &gc);
        for vm in 0u32..(1 << n) {
            let v = JammerStrategy { v: (0..n).map(|i| vm >> i & 1 == 1).collect() };
            prop_assert!(best <= jammer_objective(&v, &x, &gc));
        }
    }

    #[test]
    fn period_matches_functional_graph(
        map in prop::collection::vec(0usize..6, 6),
        start in 0usize..6,
        extra in 0usize..8,
    ) {
        // Iterate a random map until the first repeat, optionally further.
        let mut states = vec![start];
        let mut seen = std::collections::HashSet::from([start]);
        loop {
            let next = map[*states.last().unwrap()];
            states.push(next);
            if !seen.insert(next) {
                break;
            }
        }
        for _ in 0..extra {
            states.push(map[*states.last().unwrap()]);
        }
        // cycle length by walking from a state known to be on the cycle
        let on_cycle = *states.last().unwrap();
        let mut len = 1;
        let mut s = map[on_cycle];
        while s != on_cycle {
            s = map[s];
            len += 1;
        }
        let found = detect_period(&states).unwrap();
        prop_assert_eq!(found.period, len);
        for j in found.start..states.len() - found.period {
            prop_assert_eq!(states[j], states[j + found.period]);
        }
    }

    #[test]
    fn scenario_json_round_trips(seed in any::<u64>(), n in 1usize..30) {
        let s = generate_scenario(&GenConfig { sensors: n, ..GenConfig::default() }, seed).unwrap();
        prop_assert_eq!(Scenario::from_json(&s.to_json().unwrap()).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn payoff_monotone_in_lambda_and_budget(seed in any::<u64>()) {
        let base = generate_scenario(&GenConfig { sensors: 12, ..GenConfig::default() }, seed).unwrap();
        let solve_at = |s: &Scenario| {
            let gc = game_coefficients(s, KnowledgeMode::Learned, LinkOptions::default()).unwrap();
            solve_with_coefficients(&gc, s, &SolveOptions::exact()).unwrap().leader_payoff
        };
        let mut prev = f64::NEG_INFINITY;
        for lambda in [0.0, 0.1, 0.3, 0.6, 1.0] {
            let p = solve_at(&base.with_lambda(lambda));
            prop_assert!(p >= prev - 1e-9);
            prev = p;
        }
        let mut prev = f64::NEG_INFINITY;
        for budget in [0.0, 1.0, 2.0] {
            let s = Scenario { budget, ..base.with_lambda(0.2) };
            let p = solve_at(&s);
            prop_assert!(p >= prev - 1e-9);
            prev = p;
        }
    }
}
