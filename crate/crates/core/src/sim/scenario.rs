use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Cell, GridState};
use super::world::{
    CoffeeState, Color, GripperState, Location, ObjectKind, ScenarioKind, SceneObject, WorldState, Zone,
};
use super::SimError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Tabletop {
        n_boxes: usize,
        seed: u64,
        /// Camera is blocked unless the arm is at home.
        #[serde(default)]
        occlusion: bool,
    },
    Coffee,
    Pasta,
    Supervisory {
        seed: u64,
    },
}

impl Scenario {
    pub fn tabletop(n_boxes: usize, seed: u64) -> Self {
        Scenario::Tabletop {
            n_boxes,
            seed,
            occlusion: false,
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::Tabletop { .. } => ScenarioKind::Tabletop,
            Scenario::Coffee => ScenarioKind::Coffee,
            Scenario::Pasta => ScenarioKind::Pasta,
            Scenario::Supervisory { .. } => ScenarioKind::Supervisory,
        }
    }

    pub fn reset(&self) -> Result<WorldState, SimError> {
        match *self {
            Scenario::Tabletop {
                n_boxes,
                seed,
                occlusion,
            } => tabletop(n_boxes, seed, occlusion),
            Scenario::Coffee => Ok(kitchen(
                ScenarioKind::Coffee,
                &[
                    ("mug", ObjectKind::Mug, Zone::TableCenter),
                    ("spoon", ObjectKind::Spoon, Zone::TableRight),
                    ("bowl", ObjectKind::BowlItem, Zone::Cabinet),
                ],
            )),
            Scenario::Pasta => Ok(kitchen(
                ScenarioKind::Pasta,
                &[
                    ("sauce", ObjectKind::Sauce, Zone::TableLeft),
                    ("cheese", ObjectKind::Cheese, Zone::TableRight),
                ],
            )),
            Scenario::Supervisory { seed } => Ok(supervisory(seed)),
        }
    }
}

fn empty_world(scenario: ScenarioKind, seed: u64) -> WorldState {
    WorldState {
        scenario,
        objects: BTreeMap::new(),
        gripper: GripperState::default(),
        arm_zone: Zone::Home,
        machine_on: false,
        cabinet_door_open: false,
        machine_cover_open: false,
        occlusion_rule: false,
        beliefs: BTreeMap::new(),
        coffee: CoffeeState::default(),
        grid: None,
        performed_skills: Vec::new(),
        rng_seed: seed,
        step_count: 0,
    }
}

fn tabletop(n_boxes: usize, seed: u64, occlusion: bool) -> Result<WorldState, SimError> {
    if !(2..=8).contains(&n_boxes) {
        return Err(SimError::InvalidBoxCount(n_boxes));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut colors = Color::CUBE_COLORS;
    colors.shuffle(&mut rng);
    let mut world = empty_world(ScenarioKind::Tabletop, seed);
    world.occlusion_rule = occlusion;
    for (i, color) in colors.into_iter().take(n_boxes).enumerate() {
        let id = format!("box{}", i + 1);
        let zone = Zone::TABLE[rng.random_range(0..Zone::TABLE.len())];
        world.objects.insert(
            id.clone(),
            SceneObject {
                id,
                kind: ObjectKind::Cube,
                color,
                location: Location::Zone(zone),
            },
        );
    }
    Ok(world)
}

/// Kitchen scenes: everything starts where the robot was told it is.
fn kitchen(kind: ScenarioKind, items: &[(&str, ObjectKind, Zone)]) -> WorldState {
    let mut world = empty_world(kind, 0);
    for (id, kind, zone) in items {
        world.objects.insert(
            id.to_string(),
            SceneObject {
                id: id.to_string(),
                kind: *kind,
                color: Color::None,
                location: Location::Zone(*zone),
            },
        );
        world.beliefs.insert(id.to_string(), Location::Zone(*zone));
    }
    world.coffee.bowl_has_grounds = kind == ScenarioKind::Coffee;
    world
}

fn supervisory(seed: u64) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = empty_world(ScenarioKind::Supervisory, seed);
    // a 2-high wall splits the table; cubes start on the left, targets sit on the right
    let obstacles = (1..=3)
        .flat_map(|y| (0..=1).map(move |z| Cell::new(2, y, z)))
        .collect();
    let mut starts: Vec<Cell> = (0..=1)
        .flat_map(|x| (0..5).map(move |y| Cell::new(x, y, 0)))
        .collect();
    starts.shuffle(&mut rng);
    let mut grid = GridState {
        gripper: Cell::new(2, 0, 2),
        home: Cell::new(2, 0, 2),
        obstacles,
        object_cells: BTreeMap::new(),
        bowl_cell: Cell::new(4, 2, 0),
        white_cell: Cell::new(4, 4, 0),
    };
    for (i, color) in [Color::Blue, Color::Red].into_iter().enumerate() {
        let id = format!("box{}", i + 1);
        let cell = starts[i];
        let location = Location::Zone(grid.zone_for(cell));
        grid.object_cells.insert(id.clone(), cell);
        world.beliefs.insert(id.clone(), location.clone());
        world.objects.insert(
            id.clone(),
            SceneObject {
                id,
                kind: ObjectKind::Cube,
                color,
                location,
            },
        );
    }
    world.grid = Some(grid);
    world
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn tabletop_six_distinct_colors() {
        let w = Scenario::tabletop(6, 7).reset().unwrap();
        assert_eq!(w.objects.len(), 6);
        let colors: BTreeSet<_> = w.objects.values().map(|o| o.color).collect();
        assert_eq!(colors.len(), 6);
        assert!(w.gripper.open);
        assert_eq!(w.arm_zone, Zone::Home);
        w.check_invariants().unwrap();
    }

    #[test]
    fn box_count_bounds() {
        assert_eq!(Scenario::tabletop(1, 0).reset(), Err(SimError::InvalidBoxCount(1)));
        assert_eq!(Scenario::tabletop(9, 0).reset(), Err(SimError::InvalidBoxCount(9)));
        assert_eq!(Scenario::tabletop(8, 0).reset().unwrap().objects.len(), 8);
    }

    #[test]
    fn coffee_starts_closed_and_off() {
        let w = Scenario::Coffee.reset().unwrap();
        assert!(!w.cabinet_door_open && !w.machine_on && !w.machine_cover_open);
        assert!(w.coffee.bowl_has_grounds);
    }

    #[test]
    fn reset_is_deterministic() {
        for s in [Scenario::tabletop(5, 3), Scenario::Supervisory { seed: 4 }] {
            assert_eq!(s.reset().unwrap(), s.reset().unwrap());
        }
    }

    #[test]
    fn supervisory_layout() {
        let w = Scenario::Supervisory { seed: 0 }.reset().unwrap();
        let grid = w.grid.as_ref().unwrap();
        assert_eq!(w.descriptor("box1"), "blue cube");
        assert_eq!(w.descriptor("box2"), "red cube");
        assert!(!grid.obstacles.is_empty());
        for cell in grid.object_cells.values() {
            assert!(grid.is_free(*cell));
        }
    }
}
