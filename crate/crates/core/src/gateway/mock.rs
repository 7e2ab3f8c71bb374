//! Mock backends. None of them reads the prompt text; they answer from the
//! task, the world and the feedback so results are deterministic.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CompletionContext;
use crate::behavior::{SequenceSteps, Step};
use crate::parser::serialize::{fenced_plan, OutputMode};
use crate::sim::{oracle_plan_from, tokenize, Direction, PlanOptions, WorldState};

/// One edit of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    Drop { index: usize },
    /// Swaps steps `index` and `index + 1`.
    Swap { index: usize },
    /// Points step `index` at a different object.
    Rename { index: usize, to: String },
}

/// Every single mutation of `plan`, in a fixed order: drops, then adjacent
/// swaps of distinct steps, then target renames.
pub fn mutations(plan: &SequenceSteps, world: &WorldState) -> Vec<Mutation> {
    let steps = &plan.steps;
    let mut out: Vec<Mutation> = (0..steps.len()).map(|index| Mutation::Drop { index }).collect();
    out.extend(
        (0..steps.len().saturating_sub(1))
            .filter(|&i| steps[i] != steps[i + 1])
            .map(|index| Mutation::Swap { index }),
    );
    let ids: Vec<&String> = world.objects.keys().collect();
    for (index, step) in steps.iter().enumerate() {
        let Some(id) = world.resolve(&step.input) else {
            continue;
        };
        let at = ids.iter().position(|i| **i == id).expect("resolved ids exist");
        let next = ids[(at + 1) % ids.len()];
        if *next != id {
            out.push(Mutation::Rename {
                index,
                to: world.descriptor(next),
            });
        }
    }
    out
}

pub fn apply_mutation(plan: &SequenceSteps, m: &Mutation) -> SequenceSteps {
    let mut steps = plan.steps.clone();
    match m {
        Mutation::Drop { index } => {
            steps.remove(*index);
        }
        Mutation::Swap { index } => steps.swap(*index, index + 1),
        Mutation::Rename { index, to } => steps[*index].input = to.clone(),
    }
    SequenceSteps { steps }
}

/// Applies mutation number `(seed + salt) mod count`. An empty plan has no
/// mutations and comes back unchanged.
pub fn corrupt(plan: &SequenceSteps, world: &WorldState, seed: u64, salt: u64) -> (SequenceSteps, Option<Mutation>) {
    let all = mutations(plan, world);
    if all.is_empty() {
        return (plan.clone(), None);
    }
    let m = all[(seed.wrapping_add(salt) % all.len() as u64) as usize].clone();
    (apply_mutation(plan, &m), Some(m))
}

fn salt_for(task_id: &str) -> u64 {
    let digest = Sha256::digest(task_id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn plan_reply(plan: &SequenceSteps, mode: OutputMode) -> String {
    format!(
        "I will carry out the task with these steps.\n{}\n",
        fenced_plan(plan, mode)
    )
}

fn oracle_plan_for(ctx: &CompletionContext<'_>) -> Result<SequenceSteps, String> {
    let task = ctx.task.ok_or("I do not know the task yet.")?;
    let opts = PlanOptions {
        verify_before_grasp: ctx.feedback.iter().any(|f| f.to_lowercase().contains("proximity")),
    };
    oracle_plan_from(ctx.world, task, opts).map_err(|e| format!("I could not find a plan: {e}"))
}

pub(super) fn oracle_reply(mode: OutputMode, ctx: &CompletionContext<'_>) -> String {
    match oracle_plan_for(ctx) {
        Ok(plan) => plan_reply(&plan, mode),
        Err(text) => text,
    }
}

/// Corrective feedback heals: once any is present the oracle answer is given.
pub(super) fn corrupting_reply(seed: u64, mode: OutputMode, ctx: &CompletionContext<'_>) -> String {
    let plan = match oracle_plan_for(ctx) {
        Ok(p) => p,
        Err(text) => return text,
    };
    if !ctx.feedback.is_empty() {
        return plan_reply(&plan, mode);
    }
    let salt = ctx.task.map_or(0, |t| salt_for(&t.id));
    let (bad, _) = corrupt(&plan, ctx.world, seed, salt);
    plan_reply(&bad, mode)
}

fn count_word(w: &str) -> Option<usize> {
    Some(match w {
        "once" | "one" => 1,
        "twice" | "two" => 2,
        "thrice" | "three" => 3,
        "four" => 4,
        "five" => 5,
        _ => return w.parse().ok().filter(|n| (1..=9).contains(n)),
    })
}

const FILLER: [&str; 16] = [
    "go", "move", "step", "steps", "cell", "cells", "the", "gripper", "please", "time", "times", "it", "a", "by",
    "now", "hand",
];

fn clause_steps(clause: &str) -> Option<Vec<Step>> {
    let mut dir = None;
    let mut grip = None;
    let mut count = None;
    for w in clause.split_whitespace() {
        if let Some(d) = Direction::from_word(w) {
            if dir.replace(d).is_some() {
                return None;
            }
        } else if let Some(n) = count_word(w) {
            if count.replace(n).is_some() {
                return None;
            }
        } else if matches!(w, "close" | "grasp" | "grab" | "grip") {
            grip = grip.or(Some("close_gripper"));
        } else if matches!(w, "open" | "release" | "drop") {
            grip = grip.or(Some("open_gripper"));
        } else if !FILLER.contains(&w) {
            return None;
        }
    }
    match (dir, grip) {
        (Some(d), None) => Some(vec![Step::bare(d.action_name()); count.unwrap_or(1)]),
        (None, Some(g)) if count.is_none() => Some(vec![Step::bare(g)]),
        _ => None,
    }
}

/// The command table: clauses joined by "and", "then" or commas, each either
/// a direction with an optional count or a gripper verb. `None` when any
/// clause falls outside the table.
pub fn scripted_command(text: &str) -> Option<SequenceSteps> {
    let norm = tokenize(&text.replace(',', " and "));
    let mut steps = Vec::new();
    let mut clause = Vec::new();
    let flush = |clause: &mut Vec<&str>, steps: &mut Vec<Step>| -> Option<()> {
        if !clause.is_empty() {
            steps.extend(clause_steps(&clause.join(" "))?);
            clause.clear();
        }
        Some(())
    };
    for w in norm.split_whitespace() {
        if matches!(w, "and" | "then") {
            flush(&mut clause, &mut steps)?;
        } else {
            clause.push(w);
        }
    }
    flush(&mut clause, &mut steps)?;
    (!steps.is_empty()).then_some(SequenceSteps { steps })
}

pub(super) fn scripted_reply(mode: OutputMode, message: &str) -> String {
    match scripted_command(message) {
        Some(plan) => plan_reply(&plan, mode),
        None => format!("I am not sure how to turn \"{message}\" into gripper movements."),
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::observation::Observation;
    use crate::parser::{parse_response, ParseError};
    use crate::prompt::{build_prompt, PromptTemplate};
    use crate::sim::{ground_truth_plan, GoalClause, Scenario, Zone};

    fn three_steps() -> SequenceSteps {
        SequenceSteps::new(vec![
            Step::new("locate_object", "red cube"),
            Step::new("pick_up", "red cube"),
            Step::new("drop_in_sink", ""),
        ])
    }

    #[test]
    fn seed_three_on_three_steps_swaps_first_pair() {
        let world = Scenario::tabletop(2, 0).reset().unwrap();
        let (bad, m) = corrupt(&three_steps(), &world, 3, 0);
        assert_eq!(m, Some(Mutation::Swap { index: 0 }));
        let p = three_steps().steps;
        assert_eq!(bad.steps, vec![p[1].clone(), p[0].clone(), p[2].clone()]);
    }

    #[test]
    fn every_mutation_changes_the_plan_once() {
        let world = Scenario::tabletop(3, 5).reset().unwrap();
        let desc = world.descriptor("box1");
        let plan = SequenceSteps::new(vec![
            Step::new("locate_object", &desc),
            Step::new("pick_up", &desc),
            Step::new("place_in", "sink"),
        ]);
        let all = mutations(&plan, &world);
        assert_eq!(all.len(), 3 + 2 + 2);
        for m in &all {
            let bad = apply_mutation(&plan, m);
            assert_ne!(bad, plan);
        }
    }

    fn prompt(mode: OutputMode) -> crate::prompt::Prompt {
        let obs = Observation {
            lines: vec![],
            world_version: 0,
        };
        build_prompt(&PromptTemplate::builtin_default(), "", &obs, "task", &[], mode).unwrap()
    }

    fn sink_task() -> TaskSpec {
        TaskSpec {
            id: "sink".into(),
            scenario: Scenario::tabletop(3, 2),
            instruction: "put box1 in the sink".into(),
            goals: vec![GoalClause::InZone {
                object: "box1".into(),
                zone: Zone::Sink,
            }],
            ordered: false,
        }
    }

    #[test]
    fn oracle_reply_parses_to_ground_truth_in_every_mode() {
        let task = sink_task();
        let world = task.scenario.reset().unwrap();
        let gw = Gateway::new(GatewayConfig::oracle()).unwrap();
        let ctx = CompletionContext {
            task: Some(&task),
            world: &world,
            feedback: &[],
            message: &task.instruction,
        };
        let truth = ground_truth_plan(&task).unwrap();
        for mode in OutputMode::ALL {
            let r = gw.complete(&prompt(mode), &ctx).unwrap();
            let b = parse_response(&r.text).unwrap();
            assert_eq!(b.as_linear_sequence().unwrap(), truth, "{mode}");
        }
    }

    #[test]
    fn corrupting_heals_after_feedback() {
        let task = sink_task();
        let world = task.scenario.reset().unwrap();
        let gw = Gateway::new("corrupting:1".parse().unwrap()).unwrap();
        let mut ctx = CompletionContext {
            task: Some(&task),
            world: &world,
            feedback: &[],
            message: &task.instruction,
        };
        let p = prompt(OutputMode::Sequence);
        let truth = ground_truth_plan(&task).unwrap();
        let bad = parse_response(&gw.complete(&p, &ctx).unwrap().text).unwrap();
        assert_ne!(bad.as_linear_sequence().unwrap(), truth);
        let fb = vec!["locate the cube first".to_string()];
        ctx.feedback = &fb;
        let good = parse_response(&gw.complete(&p, &ctx).unwrap().text).unwrap();
        assert_eq!(good.as_linear_sequence().unwrap(), truth);
    }

    #[test]
    fn command_table() {
        let names = |t: &str| -> Vec<String> {
            scripted_command(t)
                .unwrap()
                .steps
                .into_iter()
                .map(|s| s.name)
                .collect()
        };
        assert_eq!(
            names("go left twice and close the gripper"),
            ["move_left", "move_left", "close_gripper"]
        );
        assert_eq!(names("Move up, then forward 3 times"), ["move_up", "move_forward", "move_forward", "move_forward"]);
        assert_eq!(names("release"), ["open_gripper"]);
        assert!(scripted_command("go but avoid the water").is_none());
        assert!(scripted_command("").is_none());
        assert!(scripted_command("left right").is_none());
    }

    #[test]
    fn out_of_table_reply_has_no_fence() {
        let text = scripted_reply(OutputMode::Sequence, "go but avoid the water");
        assert_eq!(parse_response(&text), Err(ParseError::NoFence));
    }
}
