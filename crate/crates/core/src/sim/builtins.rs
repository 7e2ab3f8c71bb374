//! Builtin atomic actions and their failure rules.
//!
//! | builtin | fails when |
//! |---|---|
//! | `home_arm` | never |
//! | `locate_object` | arm not at home while the occlusion rule is active; descriptor unresolvable; object inside the closed cabinet |
//! | `check_proximity` | same as `locate_object`, or the object was never located |
//! | `pick_up` | gripper already holding; target unresolvable, covered, hidden, or not where the robot last saw it (gripper closes to width 0) |
//! | `place_on` | nothing held; target unresolvable, held, covered or hidden |
//! | `place_in` | nothing held; unknown zone; zone `home`/`machine`; cabinet door closed |
//! | `drop_in_sink` | nothing held |
//! | `open_gripper` | holding at `home` (nowhere to release) |
//! | `close_gripper` | nothing ends up in the gripper (width 0) |
//! | `open_door` / `close_door` / `open_cover` / `close_cover` | gripper holding |
//! | `switch_on` | gripper holding; machine cover open |
//! | `switch_off` | never |
//! | `take_out_of_cabinet` / `put_in_cabinet` | door closed; gripper holding; target not in (resp. already in) the cabinet or covered |
//! | `scoop_from_bowl` | spoon not held; bowl hidden or empty |
//! | `pour_into_machine` | cover closed; spoon not held or not loaded |
//! | `insert_mug` | mug not held |
//! | `move_*` | not in the grid scenario; leaving the workspace; entering an obstacle |
//!
//! A failing action leaves the world untouched apart from the step counter and,
//! for a missed grasp, the gripper closing to zero width.

use serde::{Deserialize, Serialize};

use super::grid::Direction;
use super::world::{Location, ScenarioKind, WorldState, Zone, GRIPPER_MAX_WIDTH_MM};
use super::SimError;
use crate::Flag;

pub const BUILTINS: &[&str] = &[
    "home_arm",
    "locate_object",
    "check_proximity",
    "pick_up",
    "place_on",
    "place_in",
    "drop_in_sink",
    "open_gripper",
    "close_gripper",
    "open_door",
    "close_door",
    "open_cover",
    "close_cover",
    "switch_on",
    "switch_off",
    "take_out_of_cabinet",
    "put_in_cabinet",
    "scoop_from_bowl",
    "pour_into_machine",
    "insert_mug",
    "move_left",
    "move_right",
    "move_up",
    "move_down",
    "move_forward",
    "move_backward",
];

/// Builtins available to the remote operator in the supervisory scenario.
pub const SUPERVISORY_BUILTINS: &[&str] = &[
    "move_left",
    "move_right",
    "move_up",
    "move_down",
    "move_forward",
    "move_backward",
    "open_gripper",
    "close_gripper",
];

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResult {
    pub output: String,
    pub failure: Flag,
    pub state_after: WorldState,
}

struct Failed {
    output: String,
    grasp_miss: bool,
}

fn fail(output: impl Into<String>) -> Failed {
    Failed {
        output: output.into(),
        grasp_miss: false,
    }
}

fn miss(output: impl Into<String>) -> Failed {
    Failed {
        output: output.into(),
        grasp_miss: true,
    }
}

type Outcome = Result<String, Failed>;

impl WorldState {
    /// Runs one builtin. Task failures come back in-band (`failure = 1`);
    /// only an unknown builtin name is an error.
    pub fn execute_atomic(&self, name: &str, input: &str, prev_output: &str) -> Result<ActionResult, SimError> {
        if !is_builtin(name) {
            return Err(SimError::UnknownBuiltin(name.to_string()));
        }
        let mut next = self.clone();
        let outcome = next.apply_builtin(name, input.trim(), prev_output);
        Ok(match outcome {
            Ok(output) => {
                next.step_count = self.step_count + 1;
                ActionResult {
                    output,
                    failure: Flag::Success,
                    state_after: next,
                }
            }
            Err(failed) => {
                let mut after = self.clone();
                after.step_count = self.step_count + 1;
                if failed.grasp_miss && after.gripper.held.is_none() {
                    after.gripper.open = false;
                    after.gripper.width_mm = 0.0;
                }
                ActionResult {
                    output: failed.output,
                    failure: Flag::Failure,
                    state_after: after,
                }
            }
        })
    }

    fn apply_builtin(&mut self, name: &str, input: &str, prev: &str) -> Outcome {
        if let Some(dir) = Direction::from_action(name) {
            return self.move_gripper(dir);
        }
        let grid_only = self.scenario == ScenarioKind::Supervisory;
        match name {
            "home_arm" => Ok(self.home_arm()),
            "locate_object" => self.locate(input, prev, false),
            "check_proximity" => self.locate(input, prev, true),
            "open_gripper" if grid_only => self.grid_release(),
            "close_gripper" if grid_only => self.grid_grasp(),
            "open_gripper" => self.open_gripper(),
            "close_gripper" => self.close_gripper(),
            _ if grid_only && !matches!(name, "open_door" | "close_door" | "open_cover" | "close_cover" | "switch_on" | "switch_off") => {
                Err(fail(format!("{name} is not available in supervisory mode")))
            }
            "pick_up" => self.pick_up(input, prev),
            "place_on" => self.place_on(input),
            "place_in" => {
                let zone: Zone = input.parse().map_err(fail)?;
                self.place_in(zone)
            }
            "drop_in_sink" => {
                let desc = self.held_object().map(|o| o.descriptor()).unwrap_or_default();
                self.place_in(Zone::Sink).map(|_| format!("dropped {desc} in sink"))
            }
            "open_door" => self.set_hinge(Hinge::Door, true),
            "close_door" => self.set_hinge(Hinge::Door, false),
            "open_cover" => self.set_hinge(Hinge::Cover, true),
            "close_cover" => self.set_hinge(Hinge::Cover, false),
            "switch_on" => {
                self.require_empty_hand()?;
                if self.machine_cover_open {
                    return Err(fail("cannot switch on: machine cover is open"));
                }
                self.machine_on = true;
                Ok("coffee machine is on".into())
            }
            "switch_off" => {
                self.machine_on = false;
                Ok("coffee machine is off".into())
            }
            "take_out_of_cabinet" => self.cabinet_transfer(input, true),
            "put_in_cabinet" => self.cabinet_transfer(input, false),
            "scoop_from_bowl" => self.scoop(),
            "pour_into_machine" => self.pour(),
            "insert_mug" => self.insert_mug(),
            _ => Err(fail(format!("{name} has no effect here"))),
        }
    }

    fn target(&self, input: &str, prev: &str) -> Result<String, Failed> {
        let text = if input.is_empty() {
            // previous outputs start with the descriptor they talk about
            prev.split(" is ").next().unwrap_or("").trim()
        } else {
            input
        };
        if text.is_empty() {
            return Err(fail("no object given"));
        }
        self.resolve(text)
            .ok_or_else(|| fail(format!("cannot find {text}")))
    }

    fn where_is(&self, id: &str) -> String {
        let desc = self.descriptor(id);
        match &self.objects[id].location {
            Location::Zone(z) => format!("{desc} is in zone {z}"),
            Location::OnTopOf(t) => format!("{desc} is on the {}", self.descriptor(t)),
            Location::Held => format!("{desc} is held"),
        }
    }

    fn home_arm(&mut self) -> String {
        self.arm_zone = Zone::Home;
        if let Some(grid) = self.grid.as_mut() {
            grid.gripper = grid.home;
            if let Some(held) = &self.gripper.held {
                grid.object_cells.insert(held.clone(), grid.home);
            }
        }
        "arm at home".into()
    }

    fn locate(&mut self, input: &str, prev: &str, recheck: bool) -> Outcome {
        if self.occlusion_rule && self.arm_zone != Zone::Home {
            return Err(fail("camera occluded by arm"));
        }
        let id = self.target(input, prev)?;
        if self.is_hidden(&id) {
            return Err(fail(format!("cannot see {}", self.descriptor(&id))));
        }
        let actual = self.objects[&id].location.clone();
        let report = self.where_is(&id);
        if !recheck {
            self.beliefs.insert(id, actual);
            return Ok(report);
        }
        match self.beliefs.get(&id) {
            None => Err(fail(format!("{} has not been located yet", self.descriptor(&id)))),
            Some(seen) if *seen == actual => Ok(format!("{report}; within reach")),
            Some(_) => {
                self.beliefs.insert(id, actual);
                Ok(format!("{report}; it had moved and was re-located"))
            }
        }
    }

    fn require_empty_hand(&self) -> Result<(), Failed> {
        match self.held_object() {
            Some(o) => Err(fail(format!("gripper is holding {}", o.descriptor()))),
            None => Ok(()),
        }
    }

    fn pick_up(&mut self, input: &str, prev: &str) -> Outcome {
        self.require_empty_hand()?;
        let id = self.target(input, prev).map_err(|f| miss(f.output))?;
        let desc = self.descriptor(&id);
        if self.is_hidden(&id) {
            return Err(miss(format!("cannot reach {desc}: cabinet door is closed")));
        }
        if let Some(top) = self.objects_on(&id).next() {
            return Err(miss(format!("{desc} is covered by {}", top.descriptor())));
        }
        let actual = self.objects[&id].location.clone();
        if self.beliefs.get(&id) != Some(&actual) {
            return Err(miss(format!("grasp missed: {desc} is not where it was last seen")));
        }
        let zone = self.root_zone(&id).unwrap_or(self.arm_zone);
        let obj = self.objects.get_mut(&id).expect("resolved id");
        obj.location = Location::Held;
        self.gripper.open = false;
        self.gripper.width_mm = obj.kind.grasp_width_mm();
        self.gripper.held = Some(id.clone());
        self.beliefs.insert(id, Location::Held);
        self.arm_zone = zone;
        Ok(format!("picked {desc}"))
    }

    fn release_to(&mut self, location: Location) -> String {
        let id = self.gripper.held.take().expect("caller checked held");
        self.objects.get_mut(&id).expect("held id").location = location.clone();
        self.beliefs.insert(id.clone(), location);
        self.gripper.open = true;
        self.gripper.width_mm = GRIPPER_MAX_WIDTH_MM;
        id
    }

    fn held_or_fail(&self) -> Result<String, Failed> {
        self.gripper
            .held
            .clone()
            .ok_or_else(|| fail("not holding anything"))
    }

    fn place_on(&mut self, input: &str) -> Outcome {
        let held = self.held_or_fail()?;
        let target = self.target(input, "")?;
        let tdesc = self.descriptor(&target);
        if target == held {
            return Err(fail(format!("cannot place {tdesc} on itself")));
        }
        if self.is_hidden(&target) {
            return Err(fail(format!("cannot reach {tdesc}: cabinet door is closed")));
        }
        if let Some(top) = self.objects_on(&target).next() {
            return Err(fail(format!("{tdesc} is covered by {}", top.descriptor())));
        }
        let zone = self.root_zone(&target);
        let hdesc = self.descriptor(&held);
        self.release_to(Location::OnTopOf(target));
        if let Some(z) = zone {
            self.arm_zone = z;
        }
        Ok(format!("placed {hdesc} on {tdesc}"))
    }

    fn place_in(&mut self, zone: Zone) -> Outcome {
        let held = self.held_or_fail()?;
        match zone {
            Zone::Home | Zone::Machine => return Err(fail(format!("cannot place objects in {zone}"))),
            Zone::Cabinet if !self.cabinet_door_open => {
                return Err(fail("cannot place in cabinet: door is closed"))
            }
            _ => {}
        }
        let desc = self.descriptor(&held);
        self.release_to(Location::Zone(zone));
        self.arm_zone = zone;
        Ok(format!("placed {desc} in {zone}"))
    }

    fn open_gripper(&mut self) -> Outcome {
        match self.gripper.held.clone() {
            None => {
                self.gripper.open = true;
                self.gripper.width_mm = GRIPPER_MAX_WIDTH_MM;
                Ok(format!("gripper open, width {GRIPPER_MAX_WIDTH_MM} mm"))
            }
            Some(_) if self.arm_zone == Zone::Home => Err(fail("nothing below to release onto at home")),
            Some(held) => {
                let desc = self.descriptor(&held);
                let zone = self.arm_zone;
                self.release_to(Location::Zone(zone));
                Ok(format!("released {desc} in {zone}"))
            }
        }
    }

    fn close_gripper(&mut self) -> Outcome {
        if self.held_object().is_some() {
            return Ok(format!("gripper closed, width {} mm", self.gripper.width_mm));
        }
        Err(miss("gripper closed on nothing, width 0 mm"))
    }

    fn set_hinge(&mut self, hinge: Hinge, open: bool) -> Outcome {
        self.require_empty_hand()?;
        let (field, what) = match hinge {
            Hinge::Door => (&mut self.cabinet_door_open, "cabinet door"),
            Hinge::Cover => (&mut self.machine_cover_open, "machine cover"),
        };
        *field = open;
        Ok(format!("{what} is {}", if open { "open" } else { "closed" }))
    }

    fn cabinet_transfer(&mut self, input: &str, take_out: bool) -> Outcome {
        if !self.cabinet_door_open {
            return Err(fail("cabinet door is closed"));
        }
        self.require_empty_hand()?;
        let id = self.target(if input.is_empty() { "bowl" } else { input }, "")?;
        let desc = self.descriptor(&id);
        if !self.has_clear_top(&id) {
            return Err(fail(format!("{desc} is covered")));
        }
        let in_cabinet = self.objects[&id].location == Location::Zone(Zone::Cabinet);
        let (to, verb) = match (take_out, in_cabinet) {
            (true, true) => (Zone::TableCenter, "took {} out of the cabinet"),
            (false, false) => (Zone::Cabinet, "put {} in the cabinet"),
            (true, false) => return Err(fail(format!("{desc} is not in the cabinet"))),
            (false, true) => return Err(fail(format!("{desc} is already in the cabinet"))),
        };
        self.objects.get_mut(&id).expect("resolved").location = Location::Zone(to);
        self.beliefs.insert(id, Location::Zone(to));
        self.arm_zone = to;
        Ok(verb.replace("{}", &desc))
    }

    fn holding_kind(&self, noun: &str) -> bool {
        self.held_object().is_some_and(|o| o.kind.noun() == noun)
    }

    fn scoop(&mut self) -> Outcome {
        if !self.holding_kind("spoon") {
            return Err(fail("spoon is not held"));
        }
        let bowl = self.resolve("bowl").ok_or_else(|| fail("there is no bowl"))?;
        if self.is_hidden(&bowl) {
            return Err(fail("cannot reach the bowl: cabinet door is closed"));
        }
        if !self.coffee.bowl_has_grounds {
            return Err(fail("the bowl is empty"));
        }
        self.coffee.spoon_loaded = true;
        Ok("scooped coffee grounds with the spoon".into())
    }

    fn pour(&mut self) -> Outcome {
        if !self.machine_cover_open {
            return Err(fail("machine cover is closed"));
        }
        if !self.holding_kind("spoon") {
            return Err(fail("spoon is not held"));
        }
        if !self.coffee.spoon_loaded {
            return Err(fail("the spoon is empty"));
        }
        self.coffee.spoon_loaded = false;
        self.coffee.machine_has_coffee = true;
        self.release_to(Location::Zone(Zone::TableRight));
        self.arm_zone = Zone::TableRight;
        Ok("poured coffee into the machine; spoon returned to table_right".into())
    }

    fn insert_mug(&mut self) -> Outcome {
        if !self.holding_kind("mug") {
            return Err(fail("mug is not held"));
        }
        self.release_to(Location::Zone(Zone::Machine));
        self.arm_zone = Zone::Machine;
        Ok("mug inserted in the machine".into())
    }

    fn move_gripper(&mut self, dir: Direction) -> Outcome {
        let held = self.gripper.held.clone();
        let Some(grid) = self.grid.as_mut() else {
            return Err(fail("no movement grid in this scenario"));
        };
        let next = grid.gripper.step(dir);
        if !next.in_bounds() {
            return Err(fail("workspace limit reached"));
        }
        if grid.obstacles.contains(&next) {
            return Err(fail("blocked by obstacle"));
        }
        grid.gripper = next;
        if let Some(id) = held {
            grid.object_cells.insert(id, next);
        }
        self.arm_zone = grid.zone_for(next);
        Ok(format!("gripper at ({}, {}, {})", next.x, next.y, next.z))
    }

    fn grid_grasp(&mut self) -> Outcome {
        if self.gripper.held.is_some() {
            return Ok(format!("gripper closed, width {} mm", self.gripper.width_mm));
        }
        let grid = self.grid.as_ref().expect("supervisory world has a grid");
        let cell = grid.gripper;
        let candidate = (cell.z == 0)
            .then(|| {
                grid.object_cells
                    .iter()
                    .filter(|(_, c)| **c == cell)
                    .map(|(id, _)| id.clone())
                    .find(|id| self.has_clear_top(id))
            })
            .flatten();
        let Some(id) = candidate else {
            return Err(miss("gripper closed on nothing, width 0 mm"));
        };
        let obj = self.objects.get_mut(&id).expect("grid object");
        obj.location = Location::Held;
        self.gripper.open = false;
        self.gripper.width_mm = obj.kind.grasp_width_mm();
        self.gripper.held = Some(id.clone());
        self.beliefs.insert(id.clone(), Location::Held);
        Ok(format!("grasped {}", self.descriptor(&id)))
    }

    fn grid_release(&mut self) -> Outcome {
        let Some(held) = self.gripper.held.clone() else {
            self.gripper.open = true;
            self.gripper.width_mm = GRIPPER_MAX_WIDTH_MM;
            return Ok(format!("gripper open, width {GRIPPER_MAX_WIDTH_MM} mm"));
        };
        let grid = self.grid.as_ref().expect("supervisory world has a grid");
        let floor = grid.gripper.floor();
        let base = grid
            .object_cells
            .iter()
            .filter(|(id, c)| **id != held && c.same_column(floor))
            .map(|(id, _)| id.clone())
            .find(|id| self.has_clear_top(id));
        let location = match base {
            Some(below) => Location::OnTopOf(below),
            None => Location::Zone(grid.zone_for(floor)),
        };
        let desc = self.descriptor(&held);
        self.grid.as_mut().expect("grid").object_cells.insert(held.clone(), floor);
        self.release_to(location);
        Ok(format!("released {desc}"))
    }
}

enum Hinge {
    Door,
    Cover,
}
