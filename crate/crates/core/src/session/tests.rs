use super::*;
use crate::engine::compute_return;
use crate::sim::{GoalClause, WorldFlag};

fn tabletop(n: usize, seed: u64) -> SessionConfig {
    SessionConfig::new(Scenario::tabletop(n, seed), GatewayConfig::oracle())
}

fn stack_task(world: &WorldState) -> String {
    format!(
        "put the {} on the {}",
        world.descriptor("box1"),
        world.descriptor("box2")
    )
}

#[test]
fn create_rules() {
    let s = Session::create(tabletop(4, 1)).unwrap();
    assert_eq!(s.status(), SessionStatus::AwaitingTask);
    assert!(s.task().is_none());
    let mut cfg = tabletop(4, 1);
    cfg.carryover_feedback = vec!["ensure the box's proximity before grasping".into()];
    assert_eq!(Session::create(cfg).unwrap().feedback().len(), 1);
    let mut cfg = tabletop(4, 1);
    cfg.beta = 0.0;
    assert!(matches!(Session::create(cfg), Err(SessionError::BadConfig(_))));
}

#[test]
fn coffee_with_oracle() {
    let mut s = Session::create(SessionConfig::new(Scenario::Coffee, GatewayConfig::oracle())).unwrap();
    let ep = s.submit_message("can you make me a coffee").unwrap();
    let trace = ep.trace.unwrap();
    assert_eq!(trace.steps.len(), 12);
    assert_eq!(ep.failure, Flag::Success);
    assert_eq!(s.ledger().value, -1.0);
    assert_eq!(ep.goal_satisfied, Some(true));
    let w = s.world();
    assert!(w.machine_on && !w.cabinet_door_open && !w.machine_cover_open);
    assert!(GoalClause::Flag {
        flag: WorldFlag::MachineHasCoffee,
        value: true
    }
    .holds(w));
    assert_eq!(s.status(), SessionStatus::AwaitingFeedback);
}

#[test]
fn corrupting_then_feedback_succeeds() {
    let mut found = false;
    for seed in 0..10 {
        let world = Scenario::tabletop(4, 2).reset().unwrap();
        let cfg = SessionConfig::new(Scenario::tabletop(4, 2), format!("corrupting:{seed}").parse().unwrap());
        let mut s = Session::create(cfg).unwrap();
        let first = s.submit_message(&stack_task(&world)).unwrap();
        if first.failure == Flag::Success && first.goal_satisfied == Some(true) {
            continue;
        }
        found = true;
        let second = s
            .submit_message("Pick up the blue cube first, then place it on the green cube.")
            .unwrap();
        assert_eq!(second.failure, Flag::Success);
        assert_eq!(second.goal_satisfied, Some(true));
        assert_eq!(s.ledger().entries.len(), 2);
    }
    assert!(found);
}

#[test]
fn closed_and_empty_messages() {
    let mut s = Session::create(tabletop(2, 0)).unwrap();
    assert_eq!(s.submit_message("   ").unwrap_err(), SessionError::EmptyMessage);
    s.close().unwrap();
    assert_eq!(s.submit_message("hi").unwrap_err(), SessionError::SessionClosed);
}

#[test]
fn perturbation_at_grasp_fails_the_behavior() {
    let world = Scenario::tabletop(3, 7).reset().unwrap();
    let zone = world.root_zone("box1").unwrap();
    let other = Zone::TABLE.into_iter().find(|z| *z != zone).unwrap();
    let mut s = Session::create(tabletop(3, 7)).unwrap();
    s.inject_perturbation(PerturbationEvent::at(1, "box1", Location::Zone(other))).unwrap();
    let ep = s
        .submit_message(&format!("put the {} in the sink", world.descriptor("box1")))
        .unwrap();
    assert_eq!(ep.failure, Flag::Failure);
    assert_eq!(ep.perturbations.len(), 1);
    assert_eq!(ep.trace.unwrap().steps[1].action, "pick_up");
    assert_eq!(
        s.inject_perturbation(PerturbationEvent::now("box9", Location::Zone(other))),
        Err(SessionError::UnknownObject("box9".into()))
    );
}

#[test]
fn idle_perturbation_shows_in_next_observation() {
    let mut s = Session::create(tabletop(2, 3)).unwrap();
    let desc = s.world().descriptor("box2");
    s.inject_perturbation(PerturbationEvent::now("box2", Location::Zone(Zone::Sink))).unwrap();
    assert!(s.observe().lines.contains(&format!("the {desc} is in zone sink")));
    assert_eq!(s.events().last().unwrap().kind.name(), "perturbation");
}

#[test]
fn ledger_matches_compute_return() {
    let mut cfg = SessionConfig::new(Scenario::tabletop(3, 4), "corrupting:2".parse().unwrap());
    cfg.beta = 0.7;
    let world = Scenario::tabletop(3, 4).reset().unwrap();
    let mut s = Session::create(cfg).unwrap();
    s.submit_message(&stack_task(&world)).unwrap();
    for fb in ["no", "still wrong", "try again"] {
        s.submit_message(fb).unwrap();
    }
    let flags: Vec<u8> = s.episodes().iter().map(|e| e.failure.as_u8()).collect();
    assert_eq!(s.ledger().value, compute_return(&flags, 0.7).unwrap());
    assert_eq!(s.ledger().entries.len(), 4);
}

#[test]
fn feedback_accumulates_in_prompts() {
    let mut s = Session::create(tabletop(2, 5)).unwrap();
    s.submit_message("put the cubes away").unwrap();
    s.submit_message("first fix").unwrap();
    s.submit_message("second fix").unwrap();
    let eps = s.episodes();
    for w in eps.windows(2) {
        let before = w[0].prompt.section("Feedback").unwrap();
        let after = w[1].prompt.section("Feedback").unwrap();
        let n_before = if before == "(none)" { 0 } else { before.lines().count() };
        if n_before > 0 {
            assert!(after.starts_with(before));
        }
        assert_eq!(after.lines().count(), n_before + 1);
    }
    assert!(eps[2].prompt.section("Feedback").unwrap().contains("FEEDBACK[2]: second fix"));
}

#[test]
fn event_order_follows_pipeline() {
    let mut s = Session::create(tabletop(2, 6)).unwrap();
    let world = s.world().clone();
    s.submit_message(&format!("put the {} in the bowl", world.descriptor("box1")))
        .unwrap();
    let names: Vec<&str> = s.events().iter().map(|e| e.kind.name()).collect();
    assert_eq!(names[..4], ["task_set", "prompt_built", "llm_response", "behavior_parsed"]);
    assert_eq!(*names.last().unwrap(), "episode_done");
    assert!(names[4..names.len() - 1].iter().all(|n| *n == "step_executed"));
    let ids: Vec<u64> = s.events().iter().map(|e| e.id).collect();
    assert_eq!(ids, (1..=ids.len() as u64).collect::<Vec<_>>());
    assert_eq!(s.events_after(3).first().unwrap().id, 4);
}

#[test]
fn scripted_supervisory_commands() {
    let mut cfg = SessionConfig::new(Scenario::Supervisory { seed: 0 }, "scripted".parse().unwrap());
    cfg.supervisory = Some(LatencyConfig {
        latency_mean_s: 2.5,
        latency_jitter_s: 0.5,
        seed: 1,
    });
    let mut s = Session::create(cfg).unwrap();
    let ep = s.supervisory_step("go left twice and close the gripper").unwrap();
    let names: Vec<String> = ep.behavior.unwrap().action_names().into_iter().map(String::from).collect();
    assert_eq!(names, ["move_left", "move_left", "close_gripper"]);
    assert!((2.0..=3.0).contains(&ep.delivery_delay_s.unwrap()));

    let before = s.world().clone();
    let bad = s.supervisory_step("go but avoid the water").unwrap();
    assert_eq!(bad.failure, Flag::Failure);
    assert_eq!(bad.parse_error, Some(ParseError::NoFence));
    assert!(bad.trace.is_none());
    assert_eq!(s.world(), &before);

    let mut tabletop = Session::create(tabletop(2, 0)).unwrap();
    assert_eq!(tabletop.supervisory_step("left").unwrap_err(), SessionError::NotSupervisory);
}

#[test]
fn unknown_action_is_not_executed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let mut s = Session::create(tabletop(2, 0)).unwrap();
    let p = build_prompt(
        &PromptTemplate::builtin_default(),
        &s.library().render_description(),
        &s.observe(),
        "fly",
        &[],
        OutputMode::Sequence,
    )
    .unwrap();
    let entry = crate::gateway::TranscriptEntry {
        prompt_hash: prompt_hash(&p.rendered),
        response: "```json\n{\"actions\": [{\"name\": \"fly_away\", \"input\": \"\"}]}\n```".into(),
    };
    std::fs::write(&path, serde_json::to_string(&entry).unwrap() + "\n").unwrap();
    let mut cfg = tabletop(2, 0);
    cfg.gateway = GatewayConfig::new(crate::gateway::Backend::Replay {
        transcript_path: path.clone(),
    });
    s = Session::create(cfg).unwrap();
    let before = s.world().clone();
    let ep = s.submit_message("fly").unwrap();
    assert_eq!(ep.validation.unknown, vec!["fly_away".to_string()]);
    assert_eq!(ep.failure, Flag::Failure);
    assert!(ep.trace.is_none());
    assert_eq!(s.world(), &before);
}

#[test]
fn missing_transcript_entry_is_an_episode_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    std::fs::write(&path, "").unwrap();
    let mut cfg = tabletop(2, 0);
    cfg.gateway = GatewayConfig::new(crate::gateway::Backend::Replay { transcript_path: path });
    let mut s = Session::create(cfg).unwrap();
    let ep = s.submit_message("anything").unwrap();
    assert!(matches!(ep.gateway_error, Some(GatewayError::NoTranscriptEntry(_))));
    assert_eq!(ep.failure, Flag::Failure);
}

#[test]
fn log_recovery_reproduces_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let world = Scenario::tabletop(3, 8).reset().unwrap();
    let cfg = SessionConfig::new(Scenario::tabletop(3, 8), "corrupting:1".parse().unwrap());
    let mut s = Session::create_with_id("abc", cfg).unwrap().attach_log(&path).unwrap();
    s.submit_message(&stack_task(&world)).unwrap();
    s.inject_perturbation(PerturbationEvent::now("box3", Location::Zone(Zone::Sink))).unwrap();
    s.submit_message("stack them properly").unwrap();
    let hash = s.state_hash();
    drop(s);
    // a torn write at the end is discarded
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"kind\":\"mess");
    std::fs::write(&path, text).unwrap();
    let mut r = Session::recover(&path).unwrap();
    assert_eq!(r.state_hash(), hash);
    r.close().unwrap();
    let again = Session::recover(&path).unwrap();
    assert_eq!(again.status(), SessionStatus::Closed);
}
