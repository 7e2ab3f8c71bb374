//! Generators shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nlrobot_core::behavior::{FsmGraph, FsmState, TerminalKind};
use nlrobot_core::sim::Zone;
use nlrobot_core::{Behavior, Scenario, SequenceSteps, Step, TreeNode, WorldState};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRng, TestRunner};

pub fn name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,11}"
}

/// Opaque action inputs, including characters every grammar has to escape.
pub fn input() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 _'\"<>&\\\\.,:{}()\\[\\]-]{0,16}"
}

pub fn step() -> impl Strategy<Value = Step> {
    (name(), input()).prop_map(|(n, i)| Step::new(n, i))
}

pub fn steps(max: usize) -> impl Strategy<Value = Vec<Step>> {
    prop::collection::vec(step(), 0..=max)
}

pub fn tree() -> impl Strategy<Value = TreeNode> {
    let leaf = prop_oneof![
        (name(), input()).prop_map(|(name, input)| TreeNode::Action { name, input }),
        (name(), input()).prop_map(|(name, input)| TreeNode::Condition { name, input }),
    ];
    leaf.prop_recursive(4, 48, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(|children| TreeNode::Sequence { children }),
            prop::collection::vec(inner.clone(), 1..4).prop_map(|children| TreeNode::Fallback { children }),
            prop::collection::vec(inner.clone(), 1..4)
                .prop_flat_map(|children| (1..=children.len(), Just(children)))
                .prop_map(|(threshold, children)| TreeNode::Parallel { threshold, children }),
            inner.clone().prop_map(|c| TreeNode::Inverter { child: Box::new(c) }),
            (1u32..5, inner).prop_map(|(attempts, c)| TreeNode::Retry {
                attempts,
                child: Box::new(c)
            }),
        ]
    })
}

/// Valid state machines with arbitrary branching. Success edges only point
/// forward, and the last state succeeds into `done`, so a success terminal is
/// always reachable.
pub fn fsm() -> impl Strategy<Value = FsmGraph> {
    (1usize..8)
        .prop_flat_map(|n| {
            let edges = prop::collection::vec((step(), any::<prop::sample::Index>(), any::<prop::sample::Index>()), n);
            (Just(n), edges, any::<bool>())
        })
        .prop_map(|(n, edges, extra_failure)| {
            let mut terminals = BTreeMap::from([
                ("done".to_string(), TerminalKind::Success),
                ("failed".to_string(), TerminalKind::Failure),
            ]);
            if extra_failure {
                terminals.insert("aborted".into(), TerminalKind::Failure);
            }
            let mut all: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            all.extend(terminals.keys().cloned());
            let mut states = BTreeMap::new();
            for (i, (st, succ, fail)) in edges.into_iter().enumerate() {
                let on_success = if i + 1 == n {
                    "done".to_string()
                } else {
                    format!("s{}", i + 1 + succ.index(n - i - 1))
                };
                states.insert(
                    format!("s{i}"),
                    FsmState {
                        action: st.name,
                        input: st.input,
                        on_success,
                        on_failure: fail.get(&all).clone(),
                    },
                );
            }
            FsmGraph {
                initial: "s0".into(),
                states,
                terminals,
            }
        })
}

/// Prose lines that never open a fence.
pub fn prose() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-zA-Z0-9 ,.!?:;'\"()-]{0,50}( `[a-z_]{1,8}`)?", 0..4).prop_map(|l| l.join("\n"))
}

/// `prose`, the block, more prose (which may quote another fence).
pub fn embed(before: &str, block: &str, after: &str) -> String {
    let mut out = String::new();
    if !before.is_empty() {
        out.push_str(before);
        out.push('\n');
    }
    out.push_str(block);
    out.push('\n');
    out.push_str(after);
    out
}

const PLAN_ACTIONS: &[&str] = &[
    "home_arm",
    "locate_object",
    "check_proximity",
    "pick_up",
    "place_on",
    "place_in",
    "drop_in_sink",
    "open_gripper",
    "close_gripper",
];

/// A straight-line plan over the tabletop builtins. Most of it is made of
/// locate/pick/place chunks over real objects and zones, with stray steps
/// mixed in, so plans run a while before (possibly) failing.
pub fn tabletop_plan() -> impl Strategy<Value = (Scenario, SequenceSteps)> {
    (2usize..=6, 0u64..1000, any::<bool>()).prop_flat_map(|(n, seed, occlusion)| {
        let scenario = Scenario::Tabletop {
            n_boxes: n,
            seed,
            occlusion,
        };
        let world = scenario.reset().expect("tabletop resets");
        let objects: Vec<String> = world.objects.keys().map(|id| world.descriptor(id)).collect();
        let zones: Vec<String> = Zone::ALL.iter().map(|z| z.as_str().to_string()).collect();
        let mut args = objects.clone();
        args.extend(zones.iter().cloned());
        args.push(String::new());
        let stray = (prop::sample::select(PLAN_ACTIONS), prop::sample::select(args))
            .prop_map(|(a, i)| vec![Step::new(a, i)]);
        let to_zone = (prop::sample::select(objects.clone()), prop::sample::select(zones)).prop_map(|(o, z)| {
            vec![
                Step::new("home_arm", ""),
                Step::new("locate_object", o.clone()),
                Step::new("pick_up", o),
                Step::new("place_in", z),
            ]
        });
        let stack = (prop::sample::select(objects.clone()), prop::sample::select(objects)).prop_map(|(o, t)| {
            vec![
                Step::new("home_arm", ""),
                Step::new("locate_object", o.clone()),
                Step::new("pick_up", o),
                Step::new("locate_object", t.clone()),
                Step::new("place_on", t),
            ]
        });
        let chunk = prop_oneof![2 => stray, 3 => to_zone, 3 => stack];
        (
            Just(scenario),
            prop::collection::vec(chunk, 1..5).prop_map(|c| SequenceSteps::new(c.concat())),
        )
    })
}

pub fn world_of(s: &Scenario) -> WorldState {
    s.reset().unwrap()
}

/// Draws `n` values from `strategy` with a fixed-seed runner.
pub fn sample<S: Strategy>(strategy: S, n: usize, seed: u8) -> Vec<S::Value> {
    let mut runner = TestRunner::new_with_rng(
        Config::default(),
        TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &[seed; 32]),
    );
    (0..n)
        .map(|_| strategy.new_tree(&mut runner).expect("strategy produces values").current())
        .collect()
}

pub fn seq_behavior(steps: Vec<Step>) -> Behavior {
    Behavior::sequence(steps)
}
