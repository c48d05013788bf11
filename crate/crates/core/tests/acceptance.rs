//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jamgame::bench::{
    run_fictitious, run_gateway_comparison, run_sensor_scaling, ExperimentSpec, Profile,
};
use jamgame::bilp::{solve, solve_brute_force, BinaryProgram, Sense, SolveOptions};
use jamgame::dynamics::{fictitious_play, PlayTrace};
use jamgame::game::{GameCoefficients, KnowledgeMode};
use jamgame::model::{
    detection_prob, generate_scenario, jammed_success, trial_seed, unjammed_success,
    ChannelParams, GenConfig, Layout, LinkOptions, Scenario,
};
use jamgame::stackelberg::{
    brute_force_stackelberg, game_coefficients, jam_free_optimum, solve_with_coefficients,
    verify_equilibrium, Equilibrium,
};

const TOL: f64 = 1e-9;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn coeffs(s: &Scenario) -> GameCoefficients {
    game_coefficients(s, KnowledgeMode::Learned, LinkOptions::default()).unwrap()
}

fn equilibrium(gc: &GameCoefficients, s: &Scenario) -> Equilibrium {
    solve_with_coefficients(gc, s, &SolveOptions::exact()).unwrap()
}

/// Instances of the oracle comparison: N in 2..=4, M in 1..=2.
fn oracle_instances() -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    (0..200)
        .map(|_| {
            let n = rng.gen_range(2..=4);
            let layout = if rng.gen_bool(0.5) {
                Layout::SingleCenter
            } else {
                Layout::TwoGn
            };
            let cfg = GenConfig {
                layout,
                sensors: n,
                lambda: rng.gen_range(0.0..1.0),
                budget: f64::from(rng.gen_range(0..=2u8)),
                ..GenConfig::default()
            };
            generate_scenario(&cfg, rng.gen()).unwrap()
        })
        .collect()
}

fn random_program(rng: &mut ChaCha8Rng) -> BinaryProgram {
    let n = rng.gen_range(1..=20);
    let mut p = BinaryProgram::new((0..n).map(|_| rng.gen_range(-5.0..5.0)).collect());
    for _ in 0..rng.gen_range(0..=8) {
        let k = rng.gen_range(1..=n);
        let coeffs = (0..k)
            .map(|_| (rng.gen_range(0..n), f64::from(rng.gen_range(-3i8..=3))))
            .collect();
        let sense = [Sense::Le, Sense::Ge, Sense::Eq][rng.gen_range(0..3)];
        p.add(coeffs, sense, f64::from(rng.gen_range(-2i8..=5)));
    }
    p
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for s in oracle_instances() {
        let gc = coeffs(&s);
        let eq = equilibrium(&gc, &s);
        let bf = brute_force_stackelberg(&gc, &s).unwrap();
        let gap = (eq.leader_payoff - bf.leader_payoff).abs();
        worst = worst.max(gap);
        if gap > TOL {
            mismatches += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut program_mismatches = 0;
    for _ in 0..200 {
        let p = random_program(&mut rng);
        let fast = solve(&p, &SolveOptions::default()).unwrap();
        let slow = solve_brute_force(&p).unwrap();
        let same = fast.status == slow.status
            && (fast.objective_value == slow.objective_value
                || (fast.objective_value - slow.objective_value).abs() <= TOL)
            && fast.assignment == slow.assignment;
        if !same {
            program_mismatches += 1;
        }
    }
    outcome(
        mismatches == 0 && program_mismatches == 0,
        format!(
            "equilibria vs bilevel oracle: {mismatches}/200 off (max gap {worst:.1e}); \
             programs vs enumeration: {program_mismatches}/200 off"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut failures = 0;
    let mut total = 0;
    let large = (0..50).map(|t| {
        generate_scenario(&GenConfig::default(), trial_seed(2, t)).unwrap()
    });
    for s in oracle_instances().into_iter().chain(large) {
        let gc = coeffs(&s);
        let eq = equilibrium(&gc, &s);
        total += 1;
        if !verify_equilibrium(&eq, &gc, &s).passed() {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{}/{total} instances pass all four checks", total - failures))
}

fn criterion_3() -> Outcome {
    let cp = ChannelParams::default();
    let values = [
        ("unjammed_success(0.5)", unjammed_success(0.5, &cp).unwrap(), 0.7),
        ("detection_prob(0.5)", detection_prob(0.5, &cp).unwrap(), 0.5),
        ("jammed_success(1)", jammed_success(1.0, &cp).unwrap(), 0.1),
        ("unjammed_success(0)", unjammed_success(0.0, &cp).unwrap(), 1.0),
        ("detection_prob(0)", detection_prob(0.0, &cp).unwrap(), 1.0),
        ("jammed_success(0)", jammed_success(0.0, &cp).unwrap(), 1.0),
    ];
    let wrong: Vec<_> = values
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(name, got, want)| format!("{name} = {got} (want {want})"))
        .collect();
    outcome(
        wrong.is_empty(),
        if wrong.is_empty() {
            "reference points exact".to_owned()
        } else {
            wrong.join("; ")
        },
    )
}

fn criterion_4() -> Outcome {
    let lambdas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut lambda_breaks = 0;
    let mut bound_breaks = 0;
    let mut budget_breaks = 0;
    for t in 0..50 {
        let base = generate_scenario(&GenConfig::default(), trial_seed(4, t)).unwrap();
        let free = jam_free_optimum(&coeffs(&base), &base, &SolveOptions::exact()).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for &l in &lambdas {
            let s = base.with_lambda(l);
            let p = equilibrium(&coeffs(&s), &s).leader_payoff;
            if p < prev - TOL {
                lambda_breaks += 1;
            }
            if p > free + TOL {
                bound_breaks += 1;
            }
            prev = p;
        }
        if t < 20 {
            let mut prev = f64::NEG_INFINITY;
            for budget in [0.0, 1.0, 2.0] {
                let s = Scenario {
                    budget,
                    ..base.with_lambda(0.25)
                };
                let p = equilibrium(&coeffs(&s), &s).leader_payoff;
                if p < prev - TOL {
                    budget_breaks += 1;
                }
                prev = p;
            }
        }
    }
    outcome(
        lambda_breaks + bound_breaks + budget_breaks == 0,
        format!(
            "lambda violations {lambda_breaks}, jam-free bound violations {bound_breaks}, \
             budget violations {budget_breaks}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let (_, quick) = run_sensor_scaling(&ExperimentSpec::scaling(Profile::Quick)).unwrap();
    let quick_ok = quick.strictly_decreasing();
    let started = Instant::now();
    let (_, full) = run_sensor_scaling(&ExperimentSpec::scaling(Profile::Full)).unwrap();
    let minutes = started.elapsed().as_secs_f64() / 60.0;
    let targets = [(20, 0.27), (40, 0.14), (60, 0.10)];
    let full_ok = full.drops.len() == 3
        && full
            .drops
            .iter()
            .zip(targets)
            .all(|((n, d), (tn, td))| *n == tn && (d - td).abs() <= 0.10);
    let fmt = |drops: &[(usize, f64)]| {
        drops
            .iter()
            .map(|(n, d)| format!("N={n}: {:.1}%", d * 100.0))
            .collect::<Vec<_>>()
            .join(", ")
    };
    outcome(
        quick_ok && (full_ok || minutes > 30.0),
        format!(
            "quick drops [{}] ordered: {quick_ok}; full drops [{}] within 10pp of 27/14/10: \
             {full_ok} ({minutes:.1} min)",
            fmt(&quick.drops),
            fmt(&full.drops)
        ),
    )
}

fn criterion_6() -> Outcome {
    let (_, summary) = run_gateway_comparison(&ExperimentSpec::gateways(Profile::Full)).unwrap();
    let inversions = summary.inversions(&[1, 2, 4], 0.0);
    let g2 = summary.gain(2).unwrap_or(f64::NAN);
    let g4 = summary.gain(4).unwrap_or(f64::NAN);
    let ok = inversions <= 2 && (g2 - 0.26).abs() <= 0.15 && (g4 - 0.60).abs() <= 0.15;
    outcome(
        ok,
        format!(
            "ordering inversions {inversions} (max 2); gain two-gn {:.1}% (26 +/- 15), \
             four-gn {:.1}% (60 +/- 15)",
            g2 * 100.0,
            g4 * 100.0
        ),
    )
}

fn criterion_7() -> Outcome {
    let spec = ExperimentSpec::fictitious(Profile::Full);
    let outcomes = run_fictitious(&spec, 20).unwrap();
    let converged: Vec<_> = outcomes.iter().filter(|o| o.trace.converged).collect();
    let fixed_ok = converged
        .iter()
        .all(|o| o.fixed_point.as_ref().is_some_and(|c| c.passed()));
    let non_converged = outcomes.len() - converged.len();
    let rerun = |seed: u64| -> PlayTrace {
        let s = generate_scenario(&GenConfig::default(), seed).unwrap();
        fictitious_play(&s, KnowledgeMode::Learned, 20).unwrap()
    };
    let deterministic = outcomes.iter().all(|o| rerun(o.seed) == rerun(o.seed))
        && run_fictitious(&spec, 20).unwrap() == outcomes;
    let at_equilibrium = converged
        .iter()
        .filter(|o| {
            (o.trace.rounds.last().unwrap().leader_payoff - o.equilibrium_payoff).abs() <= TOL
        })
        .count();
    outcome(
        fixed_ok && non_converged >= 1 && deterministic,
        format!(
            "{} converged (all mutual best responses: {fixed_ok}; {at_equilibrium} at the \
             equilibrium payoff), {non_converged} did not; deterministic: {deterministic}",
            converged.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_jamgame"))
            .args(["sweep", "--seed", "7", "--profile", "quick", "--out"])
            .arg(&path)
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        (status.success(), std::fs::read(&path).unwrap_or_default())
    };
    let (ok_a, a) = run("a.csv");
    let (ok_b, b) = run("b.csv");
    outcome(
        ok_a && ok_b && !a.is_empty() && a == b,
        format!("two runs, {} and {} bytes, identical: {}", a.len(), b.len(), a == b),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", criterion_1),
        ("equilibrium verification", criterion_2),
        ("channel formulas", criterion_3),
        ("monotonicity", criterion_4),
        ("sensor scaling", criterion_5),
        ("gateway comparison", criterion_6),
        ("best-response dynamics", criterion_7),
        ("end-to-end determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} - {} [{:.1}s]",
            i + 1,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
