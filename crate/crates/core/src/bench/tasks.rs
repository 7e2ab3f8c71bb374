//! Seeded generation of tabletop tasks.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sim::{oracle_plan, GoalClause, Scenario, TaskSpec, WorldState, Zone};

/// Tries per task before giving up on a template that the oracle cannot solve.
const MAX_DRAWS: usize = 64;

#[derive(Debug, Clone, Copy)]
enum Template {
    Sink,
    Bowl,
    Stack,
    Chain,
    SinkAndBowl,
}

const TEMPLATES: [Template; 5] = [
    Template::Sink,
    Template::Bowl,
    Template::Stack,
    Template::Chain,
    Template::SinkAndBowl,
];

fn place(world: &WorldState, object: &str, zone: Zone) -> (GoalClause, String) {
    (
        GoalClause::InZone {
            object: object.to_string(),
            zone,
        },
        format!("put the {} in the {}", world.descriptor(object), zone),
    )
}

fn stack(world: &WorldState, object: &str, target: &str) -> (GoalClause, String) {
    (
        GoalClause::On {
            object: object.to_string(),
            target: target.to_string(),
        },
        format!("put the {} on the {}", world.descriptor(object), world.descriptor(target)),
    )
}

fn draw(rng: &mut ChaCha8Rng, n: usize, id: String) -> Option<TaskSpec> {
    let occlusion = rng.random_bool(0.3);
    let scenario = Scenario::Tabletop {
        n_boxes: n,
        seed: rng.random_range(0..1_000_000),
        occlusion,
    };
    let world = scenario.reset().ok()?;
    let mut ids: Vec<String> = world.objects.keys().cloned().collect();
    ids.shuffle(rng);
    let template = TEMPLATES[rng.random_range(0..TEMPLATES.len())];
    let (parts, ordered): (Vec<(GoalClause, String)>, bool) = match template {
        Template::Sink => (vec![place(&world, &ids[0], Zone::Sink)], false),
        Template::Bowl => (vec![place(&world, &ids[0], Zone::Bowl)], false),
        Template::Stack => (vec![stack(&world, &ids[0], &ids[1])], false),
        Template::Chain => {
            let len = rng.random_range(2..=n.min(4));
            let parts = (1..len).map(|i| stack(&world, &ids[i], &ids[i - 1])).collect();
            (parts, true)
        }
        Template::SinkAndBowl => (
            vec![place(&world, &ids[0], Zone::Sink), place(&world, &ids[1], Zone::Bowl)],
            false,
        ),
    };
    let (goals, clauses): (Vec<GoalClause>, Vec<String>) = parts.into_iter().unzip();
    let task = TaskSpec {
        id,
        scenario,
        instruction: clauses.join(", then "),
        goals,
        ordered,
    };
    // the goal must be reachable and not already true
    let solvable = oracle_plan(&task, Default::default()).is_ok_and(|p| !p.is_empty());
    solvable.then_some(task)
}

/// `per_size` tasks for each box count, ids `n{size}-t{k}`. Deterministic in
/// `master_seed`; every task is checked against the oracle.
pub fn generate_tasks(sizes: RangeInclusive<usize>, per_size: usize, master_seed: u64) -> Vec<TaskSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let mut tasks = Vec::new();
    for n in sizes {
        for k in 0..per_size {
            let id = format!("n{n}-t{k}");
            let task = (0..MAX_DRAWS)
                .find_map(|_| draw(&mut rng, n, id.clone()))
                .expect("some template is solvable for every size");
            tasks.push(task);
        }
    }
    tasks
}
