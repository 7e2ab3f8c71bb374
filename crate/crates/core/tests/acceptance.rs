//! One line per acceptance criterion. Exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use nlrobot_core::bench::{frozen_tasks, run_benchmark, run_coffee, BenchOptions, FeedbackPolicy};
use nlrobot_core::dmp::{fit, DemonstrationTrajectory, DmpModel, Gains};
use nlrobot_core::engine::{run_fsm, run_sequence, run_tree};
use nlrobot_core::env::SimEnv;
use nlrobot_core::gateway::{Backend, GatewayConfig, TranscriptEntry};
use nlrobot_core::parser::serialize::{fenced, fsm_json, script, sequence_json, tree_xml};
use nlrobot_core::parser::{parse_response, FenceTag, OutputMode};
use nlrobot_core::session::{LatencyConfig, Session, SessionConfig, SimClock};
use nlrobot_core::sim::{Location, PerturbationEvent, Zone};
use nlrobot_core::dmp::SkillStore;
use nlrobot_core::{compute_return, ActionLibrary, Behavior, Flag, Scenario, SequenceSteps};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RETURN_TOL: f64 = 1e-12;
const RETURN_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_BENCH_BUDGET: Duration = Duration::from_secs(10);
const PARSER_BUDGET: Duration = Duration::from_secs(5);
const PARSER_CASES: usize = 1000;
const EXECUTOR_PLANS: usize = 200;
const FEEDBACK_GATEWAY: &str = "corrupting:1";
const FEEDBACK_MIN_IMPERFECT_SIZES: usize = 5;
const DMP_DEMOS: usize = 20;
const DMP_BASIS: usize = 50;
const DMP_RMSE_FRAC: f64 = 0.02;
const DMP_GOAL_TOL: f64 = 1e-2;
const DMP_CONST_WEIGHT_TOL: f64 = 1e-9;
const LATENCY_COMMANDS: usize = 100;
const LATENCY_RANGE: (f64, f64) = (2.25, 2.75);

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn brute_return(flags: &[u8], beta: f64) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for &f in flags {
        total -= weight * (1.0 + f as f64);
        weight *= beta;
    }
    total
}

fn return_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        // include beta = 1 exactly now and then
        let beta = if i % 10 == 0 { 1.0 } else { 1.0 - rng.random_range(0.0..1.0) };
        let len = rng.random_range(0..=50);
        let flags: Vec<u8> = (0..len).map(|_| rng.random_range(0..=1)).collect();
        worst = worst.max((compute_return(&flags, beta).unwrap() - brute_return(&flags, beta)).abs());
    }
    let fixed = compute_return(&[0, 0], 1.0) == Ok(-2.0) && compute_return(&[0, 1], 0.5) == Ok(-2.0);
    let took = start.elapsed();
    outcome(
        worst <= RETURN_TOL && fixed && took < RETURN_BUDGET,
        format!("max |diff| {worst:.1e}, fixed cases {fixed}, {took:?}"),
    )
}

fn oracle_benchmark() -> Outcome {
    let tasks = frozen_tasks();
    let start = Instant::now();
    let mut per_mode = Vec::new();
    let mut ok = tasks.len() == 35;
    for mode in OutputMode::ALL {
        let s = run_benchmark(&tasks, &BenchOptions::new(GatewayConfig::oracle(), FeedbackPolicy::None, mode)).unwrap();
        ok &= s.total_successes() == tasks.len();
        per_mode.push(format!("{mode} {}/{}", s.total_successes(), tasks.len()));
    }
    let took = start.elapsed();
    outcome(ok && took < ORACLE_BENCH_BUDGET, format!("{}, {took:?}", per_mode.join(", ")))
}

fn feedback_property() -> Outcome {
    let tasks = frozen_tasks();
    let gw: GatewayConfig = FEEDBACK_GATEWAY.parse().unwrap();
    let s = run_benchmark(&tasks, &BenchOptions::new(gw, FeedbackPolicy::Scripted, OutputMode::Sequence)).unwrap();
    let imperfect = s.per_size.values().filter(|z| z.no_feedback_rate() < 1.0).count();
    let rows: Vec<String> = s
        .per_size
        .iter()
        .map(|(n, z)| format!("{n}:{}->{}", z.no_feedback_successes, z.with_feedback_successes.unwrap_or(0)))
        .collect();
    outcome(
        s.per_size.len() == 7 && s.feedback_monotone() && imperfect >= FEEDBACK_MIN_IMPERFECT_SIZES,
        format!("{FEEDBACK_GATEWAY}, without->with per size [{}], {imperfect} sizes below 100% without", rows.join(" ")),
    )
}

fn coffee() -> Outcome {
    let r = run_coffee(OutputMode::Sequence).unwrap();
    outcome(
        r.passed() && r.steps.len() == 12 && r.failure == Flag::Success,
        format!(
            "{} steps, machine_on {}, mug inserted {}, door closed {}, cover closed {}",
            r.steps.len(),
            r.machine_on,
            r.mug_inserted,
            r.cabinet_door_closed,
            r.cover_closed
        ),
    )
}

fn parser_round_trips() -> Outcome {
    let start = Instant::now();
    let mut counts = Vec::new();
    let mut ok = true;
    let texts = sample((prose(), prose()), PARSER_CASES * 4, 3);
    let mut check = |label: &str, cases: Vec<(String, Behavior)>| {
        let good = cases
            .iter()
            .zip(&texts)
            .filter(|((block, b), (pre, post))| parse_response(&embed(pre, block, post)).as_ref() == Ok(b))
            .count();
        ok &= good == cases.len();
        counts.push(format!("{label} {good}/{}", cases.len()));
    };
    check(
        "sequence",
        sample(steps(12), PARSER_CASES, 4)
            .into_iter()
            .map(|s| {
                let seq = SequenceSteps::new(s);
                (fenced(FenceTag::Json, &sequence_json(&seq)), Behavior::sequence(seq.steps))
            })
            .collect(),
    );
    check(
        "tree",
        sample(tree(), PARSER_CASES, 5)
            .into_iter()
            .map(|t| (fenced(FenceTag::Xml, &tree_xml(&t)), Behavior::tree(t)))
            .collect(),
    );
    check(
        "fsm",
        sample(fsm(), PARSER_CASES, 6)
            .into_iter()
            .map(|g| (fenced(FenceTag::Json, &fsm_json(&g)), Behavior::fsm(g)))
            .collect(),
    );
    check(
        "script",
        sample(steps(12), PARSER_CASES, 7)
            .into_iter()
            .map(|s| {
                let seq = SequenceSteps::new(s);
                (fenced(FenceTag::Python, &script(&seq)), Behavior::sequence(seq.steps))
            })
            .collect(),
    );
    let took = start.elapsed();
    outcome(ok && took < PARSER_BUDGET, format!("{}, {took:?}", counts.join(", ")))
}

fn executor_equivalence() -> Outcome {
    let lib = ActionLibrary::builtin_default();
    let plans = sample(tabletop_plan(), EXECUTOR_PLANS, 8);
    let mut agree = 0;
    let mut failing = 0;
    for (scenario, plan) in &plans {
        let env = || SimEnv::new(world_of(scenario), lib.clone(), SkillStore::default());
        let s = run_sequence(&Behavior::sequence(plan.steps.clone()), &lib, &mut env()).unwrap();
        let t = run_tree(&Behavior::tree(plan.to_tree().unwrap()), &lib, &mut env()).unwrap();
        let m = run_fsm(&Behavior::fsm(plan.to_fsm()), &lib, &mut env()).unwrap();
        if s.effects() == t.effects()
            && s.effects() == m.effects()
            && s.behavior_failure == t.behavior_failure
            && s.behavior_failure == m.behavior_failure
        {
            agree += 1;
        }
        failing += usize::from(s.behavior_failure.is_failure());
    }
    outcome(
        agree == plans.len(),
        format!("{agree}/{} plans agree ({failing} of them fail part-way)", plans.len()),
    )
}

fn continual_learning() -> Outcome {
    let scenario = Scenario::tabletop(3, 7);
    let world = scenario.reset().unwrap();
    let task = format!("put the {} in the sink", world.descriptor("box1"));
    let zone = world.root_zone("box1").unwrap();
    let elsewhere = Zone::TABLE.into_iter().find(|z| *z != zone).unwrap();
    // the cube is moved just before every grasp
    let mut cfg = SessionConfig::new(scenario.clone(), GatewayConfig::oracle());
    cfg.reset_each_episode = true;
    cfg.perturb_each_episode = vec![PerturbationEvent::at(1, "box1", Location::Zone(elsewhere))];
    let feedback = "The cube may have moved; check its proximity before you grasp it.";

    let mut s = Session::create(cfg.clone()).unwrap();
    let first = s.submit_message(&task).unwrap();
    let second = s.submit_message(feedback).unwrap();

    let mut fresh_cfg = cfg;
    fresh_cfg.carryover_feedback = vec![feedback.to_string()];
    let mut fresh = Session::create(fresh_cfg).unwrap();
    let carried = fresh.submit_message(&task).unwrap();

    let ok = first.failure == Flag::Failure
        && first.perturbations.len() == 1
        && second.failure == Flag::Success
        && second.goal_satisfied == Some(true)
        && carried.failure == Flag::Success
        && carried.goal_satisfied == Some(true)
        && fresh.episodes().len() == 1;
    outcome(
        ok,
        format!(
            "attempt 1 f={}, attempt 2 f={}, fresh session with carryover f={} after {} message",
            first.failure.as_u8(),
            second.failure.as_u8(),
            carried.failure.as_u8(),
            fresh.episodes().len()
        ),
    )
}

fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5)
}

/// Classic RK4 on the same transformation system with the phase taken in
/// closed form, on a grid 10x finer than the engine's.
fn rk4_terminal(m: &DmpModel, horizon: f64, steps: usize) -> Vec<f64> {
    let tau = m.duration;
    let g = m.gains;
    let forcing = |d: usize, x: f64| {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..m.n_basis {
            let psi = (-m.widths[i] * (x - m.centers[i]).powi(2)).exp();
            num += psi * m.weights[d][i];
            den += psi;
        }
        if den > 0.0 {
            x * num / den
        } else {
            0.0
        }
    };
    let phase = |t: f64| (-g.alpha_x * t / tau).exp();
    let h = horizon / steps as f64;
    (0..m.dims())
        .map(|d| {
            let rhs = |t: f64, y: f64, v: f64| {
                (v / tau, (g.alpha_z * (g.beta_z * (m.goal[d] - y) - v) + forcing(d, phase(t))) / tau)
            };
            let (mut y, mut v) = (m.y0[d], 0.0);
            for k in 0..steps {
                let t = k as f64 * h;
                let (a1, b1) = rhs(t, y, v);
                let (a2, b2) = rhs(t + h / 2.0, y + h / 2.0 * a1, v + h / 2.0 * b1);
                let (a3, b3) = rhs(t + h / 2.0, y + h / 2.0 * a2, v + h / 2.0 * b2);
                let (a4, b4) = rhs(t + h, y + h * a3, v + h * b3);
                y += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
                v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
            }
            y
        })
        .collect()
}

fn dmp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst_rmse: f64 = 0.0;
    let mut worst_goal: f64 = 0.0;
    for i in 0..DMP_DEMOS {
        let dims = 1 + i % 3;
        let duration = rng.random_range(0.5..3.0);
        let from: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let to: Vec<f64> = (0..dims)
            .map(|d| from[d] + rng.random_range(0.2..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let demo = DemonstrationTrajectory::sample(200, duration, "reach", |t| {
            (0..dims).map(|d| from[d] + (to[d] - from[d]) * min_jerk(t / duration)).collect()
        })
        .unwrap();
        let model = fit(&demo, DMP_BASIS, Gains::default()).unwrap();
        let dt = duration / 1000.0;
        let roll = model.rollout(dt, 1.0).unwrap();
        for d in 0..dims {
            let range = (to[d] - from[d]).abs();
            let se: f64 = roll
                .times
                .iter()
                .zip(&roll.positions)
                .map(|(t, p)| (p[d] - (from[d] + (to[d] - from[d]) * min_jerk(t / duration))).powi(2))
                .sum();
            worst_rmse = worst_rmse.max((se / roll.times.len() as f64).sqrt() / range);
        }
        let long = model.rollout(dt, 1.5).unwrap();
        let oracle = rk4_terminal(&model, 1.5 * duration, 15_000);
        for d in 0..dims {
            let range = (to[d] - from[d]).abs();
            let err = (long.last_position()[d] - oracle[d]).abs().max((oracle[d] - to[d]).abs()) / range;
            worst_goal = worst_goal.max(err);
        }
    }
    let flat = DemonstrationTrajectory::sample(100, 1.0, "hold", |_| vec![0.4, -0.2]).unwrap();
    let flat_w = fit(&flat, DMP_BASIS, Gains::default())
        .unwrap()
        .weights
        .iter()
        .flatten()
        .fold(0.0f64, |m, w| m.max(w.abs()));
    outcome(
        worst_rmse <= DMP_RMSE_FRAC && worst_goal <= DMP_GOAL_TOL && flat_w <= DMP_CONST_WEIGHT_TOL,
        format!(
            "worst rmse {:.3}% of range, worst terminal error {worst_goal:.1e}, constant-demo max |w| {flat_w:.1e}",
            100.0 * worst_rmse
        ),
    )
}

fn latency() -> Outcome {
    let mut cfg = SessionConfig::new(Scenario::Supervisory { seed: 0 }, GatewayConfig::new(Backend::Scripted));
    cfg.supervisory = Some(LatencyConfig {
        latency_mean_s: 2.5,
        latency_jitter_s: 0.5,
        seed: 5,
    });
    let mut s = Session::create(cfg).unwrap().with_clock(Box::new(SimClock::default()));
    let commands = ["move left", "move right", "move forward", "move backward"];
    let t0 = s.clock_now_s();
    for i in 0..LATENCY_COMMANDS {
        s.supervisory_step(commands[i % commands.len()]).unwrap();
    }
    let mean = (s.clock_now_s() - t0) / LATENCY_COMMANDS as f64;
    outcome(
        (LATENCY_RANGE.0..=LATENCY_RANGE.1).contains(&mean),
        format!("{LATENCY_COMMANDS} commands, mean delay {mean:.3} s"),
    )
}

fn crash_replay() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Scenario::tabletop(4, 3);
    let world = scenario.reset().unwrap();
    let messages = [
        format!("put the {} on the {}", world.descriptor("box1"), world.descriptor("box2")),
        "now do it again more carefully".to_string(),
        "check every cube before grasping".to_string(),
        "thanks, one more time".to_string(),
    ];
    // record what the model says
    let mut rec = Session::create_with_id("replayed", SessionConfig::new(scenario.clone(), GatewayConfig::oracle())).unwrap();
    for m in &messages {
        rec.submit_message(m).unwrap();
    }
    let transcript = dir.path().join("transcript.jsonl");
    let body: String = rec
        .transcript()
        .iter()
        .map(|e: &TranscriptEntry| serde_json::to_string(e).unwrap() + "\n")
        .collect();
    std::fs::write(&transcript, body).unwrap();
    let cfg = SessionConfig::new(
        scenario,
        GatewayConfig::new(Backend::Replay {
            transcript_path: transcript,
        }),
    );

    let mut straight = Session::create_with_id("replayed", cfg.clone()).unwrap();
    for m in &messages {
        straight.submit_message(m).unwrap();
    }

    let log = dir.path().join("session.jsonl");
    let mut first = Session::create_with_id("replayed", cfg).unwrap().attach_log(&log).unwrap();
    for m in &messages[..2] {
        first.submit_message(m).unwrap();
    }
    drop(first);
    let mut restarted = Session::recover(&log).unwrap();
    let after_restart = restarted.episodes().len();
    for m in &messages[2..] {
        restarted.submit_message(m).unwrap();
    }
    let again = Session::recover(&log).unwrap();
    let ok = after_restart == 2
        && restarted.state_hash() == straight.state_hash()
        && again.state_hash() == straight.state_hash()
        && straight.episodes().iter().all(|e| e.gateway_error.is_none());
    outcome(
        ok,
        format!(
            "{after_restart} episodes after restart, hash {} vs uninterrupted {}",
            &restarted.state_hash()[..12],
            &straight.state_hash()[..12]
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("return oracle", return_oracle),
        ("oracle benchmark", oracle_benchmark),
        ("feedback property", feedback_property),
        ("coffee long-horizon", coffee),
        ("parser round-trips", parser_round_trips),
        ("executor equivalence", executor_equivalence),
        ("continual learning", continual_learning),
        ("dmp", dmp),
        ("latency injector", latency),
        ("crash replay", crash_replay),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let r = f();
        println!("{} {name}: {}", if r.ok { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.ok);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
