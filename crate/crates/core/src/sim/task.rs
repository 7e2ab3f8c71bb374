//! Task goals and the ground-truth planner used as the oracle.

use serde::{Deserialize, Serialize};

use super::grid::Direction;
use super::scenario::Scenario;
use super::world::{tokenize, Location, WorldState, Zone};
use super::SimError;
use crate::behavior::{SequenceSteps, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldFlag {
    MachineOn,
    CabinetDoorOpen,
    MachineCoverOpen,
    MachineHasCoffee,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "pred", rename_all = "snake_case")]
pub enum GoalClause {
    InZone { object: String, zone: Zone },
    On { object: String, target: String },
    Flag { flag: WorldFlag, value: bool },
    /// A learned skill was played at least once.
    Performed { action: String },
}

impl GoalClause {
    pub fn holds(&self, world: &WorldState) -> bool {
        match self {
            GoalClause::InZone { object, zone } => world.root_zone(object) == Some(*zone),
            GoalClause::On { object, target } => world
                .object(object)
                .is_some_and(|o| o.location == Location::OnTopOf(target.clone())),
            GoalClause::Flag { flag, value } => {
                let actual = match flag {
                    WorldFlag::MachineOn => world.machine_on,
                    WorldFlag::CabinetDoorOpen => world.cabinet_door_open,
                    WorldFlag::MachineCoverOpen => world.machine_cover_open,
                    WorldFlag::MachineHasCoffee => world.coffee.machine_has_coffee,
                };
                actual == *value
            }
            GoalClause::Performed { action } => world.performed_skills.iter().any(|s| s == action),
        }
    }

    fn object(&self) -> Option<&str> {
        match self {
            GoalClause::InZone { object, .. } | GoalClause::On { object, .. } => Some(object),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub scenario: Scenario,
    pub instruction: String,
    pub goals: Vec<GoalClause>,
    /// Success also requires the executed action names to follow the oracle order.
    #[serde(default)]
    pub ordered: bool,
}

impl TaskSpec {
    pub fn n_boxes(&self) -> Option<usize> {
        match self.scenario {
            Scenario::Tabletop { n_boxes, .. } => Some(n_boxes),
            _ => None,
        }
    }

    pub fn is_satisfied(&self, world: &WorldState) -> bool {
        self.goals.iter().all(|g| g.holds(world))
    }

    pub fn coffee() -> Self {
        let flag = |flag, value| GoalClause::Flag { flag, value };
        TaskSpec {
            id: "coffee".into(),
            scenario: Scenario::Coffee,
            instruction: "can you make me a coffee".into(),
            goals: vec![
                GoalClause::InZone {
                    object: "mug".into(),
                    zone: Zone::Machine,
                },
                GoalClause::InZone {
                    object: "bowl".into(),
                    zone: Zone::Cabinet,
                },
                flag(WorldFlag::MachineHasCoffee, true),
                flag(WorldFlag::MachineOn, true),
                flag(WorldFlag::CabinetDoorOpen, false),
                flag(WorldFlag::MachineCoverOpen, false),
            ],
            ordered: false,
        }
    }

    /// Requires the five demonstrated cooking skills to be in the library.
    pub fn pasta() -> Self {
        TaskSpec {
            id: "pasta".into(),
            scenario: Scenario::Pasta,
            instruction: "make me pasta".into(),
            goals: PASTA_SKILLS
                .iter()
                .map(|s| GoalClause::Performed { action: s.to_string() })
                .collect(),
            ordered: true,
        }
    }

    /// Blue cube into the bowl, avoiding the wall.
    pub fn supervisory(seed: u64) -> Self {
        TaskSpec {
            id: format!("supervisory-{seed}"),
            scenario: Scenario::Supervisory { seed },
            instruction: "put the blue cube in the bowl".into(),
            goals: vec![GoalClause::InZone {
                object: "box1".into(),
                zone: Zone::Bowl,
            }],
            ordered: false,
        }
    }
}

/// Reads tabletop goals from text such as "put the red cube in the sink and
/// stack the blue cube on the red cube". Clauses are joined by "and", "then"
/// or commas; each must name a known object and a zone or a second object.
pub fn parse_instruction(world: &WorldState, text: &str) -> Option<Vec<GoalClause>> {
    let norm = tokenize(&text.replace(',', " and "));
    let mut goals = Vec::new();
    let mut clause: Vec<&str> = Vec::new();
    let mut words = norm.split_whitespace().peekable();
    loop {
        let w = words.next();
        if w.is_none() || matches!(w, Some("and" | "then")) {
            if !clause.is_empty() {
                goals.push(parse_clause(world, &clause)?);
                clause.clear();
            }
            if w.is_none() {
                break;
            }
        } else if let Some(w) = w {
            clause.push(w);
        }
    }
    (!goals.is_empty()).then_some(goals)
}

fn parse_clause(world: &WorldState, words: &[&str]) -> Option<GoalClause> {
    let verbs = ["put", "place", "move", "stack", "drop", "set"];
    let rest = match words.first() {
        Some(v) if verbs.contains(v) => &words[1..],
        _ => words,
    };
    let split = rest.iter().position(|w| matches!(*w, "in" | "into" | "to" | "on" | "onto"))?;
    let object = world.resolve(&rest[..split].join(" "))?;
    let mut target: Vec<&str> = rest[split + 1..].to_vec();
    let mut on = matches!(rest[split], "on" | "onto");
    if target.starts_with(&["top", "of"]) {
        target.drain(..2);
        on = true;
    }
    let target = target.join(" ");
    if let Ok(zone) = target.parse::<Zone>() {
        return Some(GoalClause::InZone { object, zone });
    }
    if !on {
        return None;
    }
    let target = world.resolve(&target)?;
    (target != object).then_some(GoalClause::On { object, target })
}

pub const PASTA_SKILLS: [&str; 5] = [
    "grating_cheese",
    "pouring_sauce",
    "stirring_ingredients",
    "tossing_the_contents_in_the_wok",
    "adding_seasoning",
];

pub fn goal_satisfied(world: &WorldState, task: &TaskSpec) -> bool {
    task.is_satisfied(world)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Re-check an object's position right before grasping it.
    pub verify_before_grasp: bool,
}

pub fn ground_truth_plan(task: &TaskSpec) -> Result<SequenceSteps, SimError> {
    oracle_plan(task, PlanOptions::default())
}

pub fn oracle_plan(task: &TaskSpec, opts: PlanOptions) -> Result<SequenceSteps, SimError> {
    oracle_plan_from(&task.scenario.reset()?, task, opts)
}

/// Plans from `world` instead of the reset state. Coffee and pasta plans do
/// not depend on the state.
pub fn oracle_plan_from(world: &WorldState, task: &TaskSpec, opts: PlanOptions) -> Result<SequenceSteps, SimError> {
    let steps = match task.scenario {
        Scenario::Coffee => coffee_plan(),
        Scenario::Pasta => task
            .goals
            .iter()
            .filter_map(|g| match g {
                GoalClause::Performed { action } => Some(Step::bare(action.clone())),
                _ => None,
            })
            .collect(),
        Scenario::Tabletop { .. } => tabletop_plan(world.clone(), task, opts)?,
        Scenario::Supervisory { .. } => grid_plan(world.clone(), task)?,
    };
    Ok(SequenceSteps { steps })
}

fn coffee_plan() -> Vec<Step> {
    [
        ("pick_up", "mug"),
        ("insert_mug", ""),
        ("open_cover", ""),
        ("open_door", ""),
        ("take_out_of_cabinet", "bowl"),
        ("pick_up", "spoon"),
        ("scoop_from_bowl", ""),
        ("pour_into_machine", ""),
        ("close_cover", ""),
        ("put_in_cabinet", "bowl"),
        ("close_door", ""),
        ("switch_on", ""),
    ]
    .into_iter()
    .map(|(n, i)| Step::new(n, i))
    .collect()
}

/// Orders clauses so a stacking target is settled before anything is put on it.
fn dependency_order<'a>(task: &'a TaskSpec) -> Result<Vec<&'a GoalClause>, SimError> {
    let goals = &task.goals;
    let deps: Vec<Vec<usize>> = goals
        .iter()
        .map(|g| match g {
            GoalClause::On { target, .. } => goals
                .iter()
                .enumerate()
                .filter(|(_, h)| h.object() == Some(target.as_str()))
                .map(|(j, _)| j)
                .collect(),
            _ => Vec::new(),
        })
        .collect();
    let mut done = vec![false; goals.len()];
    let mut order = Vec::with_capacity(goals.len());
    while order.len() < goals.len() {
        let next = (0..goals.len())
            .find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]))
            .ok_or_else(|| SimError::UnknownTask(format!("{}: cyclic stacking goals", task.id)))?;
        done[next] = true;
        order.push(&goals[next]);
    }
    Ok(order)
}

fn tabletop_plan(mut world: WorldState, task: &TaskSpec, opts: PlanOptions) -> Result<Vec<Step>, SimError> {
    let mut plan = Vec::new();
    let mut push = |world: &mut WorldState, step: Step| -> Result<(), SimError> {
        let r = world.execute_atomic(&step.name, &step.input, "")?;
        if r.failure.is_failure() {
            return Err(SimError::UnknownTask(format!(
                "{}: oracle step {} {} failed: {}",
                task.id, step.name, step.input, r.output
            )));
        }
        *world = r.state_after;
        plan.push(step);
        Ok(())
    };
    if world.held_object().is_some() {
        push(&mut world, Step::new("place_in", Zone::TableCenter.as_str()))?;
    }
    for goal in dependency_order(task)? {
        if goal.holds(&world) {
            continue;
        }
        let object = goal
            .object()
            .ok_or_else(|| SimError::UnknownTask(format!("{}: unsupported goal on the table", task.id)))?;
        if !world.objects.contains_key(object) {
            return Err(SimError::UnknownObject(object.to_string()));
        }
        let desc = world.descriptor(object);
        if world.occlusion_rule && world.arm_zone != Zone::Home {
            push(&mut world, Step::bare("home_arm"))?;
        }
        push(&mut world, Step::new("locate_object", &desc))?;
        if opts.verify_before_grasp {
            push(&mut world, Step::new("check_proximity", &desc))?;
        }
        push(&mut world, Step::new("pick_up", &desc))?;
        let place = match goal {
            GoalClause::InZone { zone: Zone::Sink, .. } => Step::bare("drop_in_sink"),
            GoalClause::InZone { zone, .. } => Step::new("place_in", zone.as_str()),
            GoalClause::On { target, .. } => Step::new("place_on", world.descriptor(target)),
            _ => unreachable!("object() is only set for placement goals"),
        };
        push(&mut world, place)?;
    }
    Ok(plan)
}

fn grid_plan(mut world: WorldState, task: &TaskSpec) -> Result<Vec<Step>, SimError> {
    let mut plan = Vec::new();
    if world.held_object().is_some() {
        let r = world.execute_atomic("open_gripper", "", "")?;
        if r.failure.is_failure() {
            return Err(SimError::UnknownTask(format!("{}: cannot release the held cube", task.id)));
        }
        world = r.state_after;
        plan.push(Step::bare("open_gripper"));
    }
    let grid = world.grid.as_ref().expect("supervisory world has a grid");
    let mut at = grid.gripper;
    let unreachable = || SimError::UnknownTask(format!("{}: target unreachable", task.id));
    let walk = |plan: &mut Vec<Step>, moves: Vec<Direction>| {
        plan.extend(moves.into_iter().map(|d| Step::bare(d.action_name())));
    };
    for goal in &task.goals {
        let GoalClause::InZone { object, zone } = goal else {
            return Err(SimError::UnknownTask(format!("{}: grid tasks only move cubes", task.id)));
        };
        let from = *grid
            .object_cells
            .get(object)
            .ok_or_else(|| SimError::UnknownObject(object.clone()))?;
        let to = match zone {
            Zone::Bowl => grid.bowl_cell,
            Zone::TableRight => grid.white_cell,
            _ => return Err(unreachable()),
        };
        walk(&mut plan, grid.path(at, from).ok_or_else(unreachable)?);
        plan.push(Step::bare("close_gripper"));
        walk(&mut plan, grid.path(from, to).ok_or_else(unreachable)?);
        plan.push(Step::bare("open_gripper"));
        at = to;
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Flag;

    fn run(world: WorldState, plan: &SequenceSteps) -> WorldState {
        let mut w = world;
        let mut prev = String::new();
        for s in &plan.steps {
            let r = w.execute_atomic(&s.name, &s.input, &prev).unwrap();
            assert_eq!(r.failure, Flag::Success, "{} {}: {}", s.name, s.input, r.output);
            prev = r.output;
            w = r.state_after;
            w.check_invariants().unwrap();
        }
        w
    }

    fn blue_in_sink() -> TaskSpec {
        let w = Scenario::tabletop(2, 11).reset().unwrap();
        let blue = w.resolve("blue cube");
        let id = blue.unwrap_or_else(|| "box1".into());
        TaskSpec {
            id: "t".into(),
            scenario: Scenario::tabletop(2, 11),
            instruction: format!("put the {} in the sink", w.descriptor(&id)),
            goals: vec![GoalClause::InZone {
                object: id,
                zone: Zone::Sink,
            }],
            ordered: false,
        }
    }

    #[test]
    fn tabletop_sink_plan() {
        let task = blue_in_sink();
        let plan = ground_truth_plan(&task).unwrap();
        let desc = task.scenario.reset().unwrap().descriptor(task.goals[0].object().unwrap());
        assert_eq!(
            plan.steps,
            vec![
                Step::new("locate_object", &desc),
                Step::new("pick_up", &desc),
                Step::bare("drop_in_sink")
            ]
        );
        let end = run(task.scenario.reset().unwrap(), &plan);
        assert!(goal_satisfied(&end, &task));
        assert!(!goal_satisfied(&task.scenario.reset().unwrap(), &task));
    }

    #[test]
    fn coffee_plan_reaches_goal() {
        let task = TaskSpec::coffee();
        let plan = ground_truth_plan(&task).unwrap();
        assert_eq!(plan.steps.len(), 12);
        assert_eq!(plan.steps.last().unwrap().name, "switch_on");
        let end = run(task.scenario.reset().unwrap(), &plan);
        assert!(goal_satisfied(&end, &task));
    }

    #[test]
    fn supervisory_plan_reaches_bowl() {
        for seed in 0..5 {
            let task = TaskSpec::supervisory(seed);
            let plan = ground_truth_plan(&task).unwrap();
            let end = run(task.scenario.reset().unwrap(), &plan);
            assert!(goal_satisfied(&end, &task), "seed {seed}");
        }
    }

    #[test]
    fn empty_task() {
        let task = TaskSpec {
            id: "empty".into(),
            scenario: Scenario::tabletop(3, 0),
            instruction: "do nothing".into(),
            goals: vec![],
            ordered: false,
        };
        assert!(ground_truth_plan(&task).unwrap().steps.is_empty());
        assert!(goal_satisfied(&task.scenario.reset().unwrap(), &task));
    }

    #[test]
    fn stacking_chain_is_ordered_bottom_up() {
        let scenario = Scenario::tabletop(3, 5);
        let task = TaskSpec {
            id: "chain".into(),
            scenario: scenario.clone(),
            instruction: "stack".into(),
            goals: vec![
                GoalClause::On {
                    object: "box1".into(),
                    target: "box2".into(),
                },
                GoalClause::On {
                    object: "box2".into(),
                    target: "box3".into(),
                },
            ],
            ordered: true,
        };
        let plan = ground_truth_plan(&task).unwrap();
        let end = run(scenario.reset().unwrap(), &plan);
        assert!(goal_satisfied(&end, &task));
    }

    #[test]
    fn instruction_parsing() {
        let w = Scenario::tabletop(3, 4).reset().unwrap();
        let (a, b) = (w.descriptor("box1"), w.descriptor("box2"));
        let goals = parse_instruction(&w, &format!("Put the {a} in the sink, then stack the {b} on top of the {a}.")).unwrap();
        assert_eq!(
            goals,
            vec![
                GoalClause::InZone {
                    object: "box1".into(),
                    zone: Zone::Sink
                },
                GoalClause::On {
                    object: "box2".into(),
                    target: "box1".into()
                },
            ]
        );
        assert!(parse_instruction(&w, "make me a sandwich").is_none());
        assert!(parse_instruction(&w, &format!("put the {a} on the {a}")).is_none());
    }
}
