use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::GridState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    TableCenter,
    TableLeft,
    TableRight,
    Sink,
    Bowl,
    Cabinet,
    Machine,
    Home,
}

impl Zone {
    pub const ALL: [Zone; 8] = [
        Zone::TableCenter,
        Zone::TableLeft,
        Zone::TableRight,
        Zone::Sink,
        Zone::Bowl,
        Zone::Cabinet,
        Zone::Machine,
        Zone::Home,
    ];

    pub const TABLE: [Zone; 3] = [Zone::TableLeft, Zone::TableCenter, Zone::TableRight];

    pub fn as_str(self) -> &'static str {
        match self {
            Zone::TableCenter => "table_center",
            Zone::TableLeft => "table_left",
            Zone::TableRight => "table_right",
            Zone::Sink => "sink",
            Zone::Bowl => "bowl",
            Zone::Cabinet => "cabinet",
            Zone::Machine => "machine",
            Zone::Home => "home",
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Zone {
    type Err = String;

    /// Accepts `table_left`, `table left`, `the sink`, `Sink`, ...
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = normalize_phrase(s).replace(' ', "_");
        Zone::ALL
            .into_iter()
            .find(|z| z.as_str() == norm)
            .ok_or_else(|| format!("unknown zone `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Cube,
    Mug,
    BowlItem,
    Spoon,
    Sauce,
    Cheese,
}

impl ObjectKind {
    /// The noun used for this kind in descriptors and observations.
    pub fn noun(self) -> &'static str {
        match self {
            ObjectKind::Cube => "cube",
            ObjectKind::Mug => "mug",
            ObjectKind::BowlItem => "bowl",
            ObjectKind::Spoon => "spoon",
            ObjectKind::Sauce => "sauce",
            ObjectKind::Cheese => "cheese",
        }
    }

    /// Gripper opening when holding an object of this kind.
    pub fn grasp_width_mm(self) -> f64 {
        match self {
            ObjectKind::Cube => 50.0,
            ObjectKind::Mug => 70.0,
            ObjectKind::BowlItem => 80.0,
            ObjectKind::Spoon => 10.0,
            ObjectKind::Sauce => 60.0,
            ObjectKind::Cheese => 40.0,
        }
    }

    fn from_noun(word: &str) -> Option<Self> {
        match word {
            "cube" | "box" | "block" => Some(ObjectKind::Cube),
            "mug" | "cup" => Some(ObjectKind::Mug),
            "bowl" => Some(ObjectKind::BowlItem),
            "spoon" => Some(ObjectKind::Spoon),
            "sauce" => Some(ObjectKind::Sauce),
            "cheese" => Some(ObjectKind::Cheese),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Green,
    Blue,
    Orange,
    Yellow,
    Purple,
    White,
    /// Extra cube color so an 8-box scene can still be all-distinct.
    Black,
    None,
}

impl Color {
    pub const CUBE_COLORS: [Color; 8] = [
        Color::Red,
        Color::Green,
        Color::Blue,
        Color::Orange,
        Color::Yellow,
        Color::Purple,
        Color::White,
        Color::Black,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Orange => "orange",
            Color::Yellow => "yellow",
            Color::Purple => "purple",
            Color::White => "white",
            Color::Black => "black",
            Color::None => "none",
        }
    }

    fn from_word(word: &str) -> Option<Self> {
        Color::CUBE_COLORS.into_iter().find(|c| c.as_str() == word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Zone(Zone),
    OnTopOf(String),
    Held,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub kind: ObjectKind,
    pub color: Color,
    pub location: Location,
}

impl SceneObject {
    /// `blue cube`, `mug`, ...
    pub fn descriptor(&self) -> String {
        match self.color {
            Color::None => self.kind.noun().to_string(),
            c => format!("{} {}", c.as_str(), self.kind.noun()),
        }
    }
}

pub const GRIPPER_MAX_WIDTH_MM: f64 = 85.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub open: bool,
    pub width_mm: f64,
    pub held: Option<String>,
}

impl Default for GripperState {
    fn default() -> Self {
        Self {
            open: true,
            width_mm: GRIPPER_MAX_WIDTH_MM,
            held: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Tabletop,
    Coffee,
    Pasta,
    Supervisory,
}

/// Coffee-making progress that is not captured by object locations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoffeeState {
    pub bowl_has_grounds: bool,
    pub spoon_loaded: bool,
    pub machine_has_coffee: bool,
}

/// The simulated scene. A plain value: transitions take a state and return a new one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub scenario: ScenarioKind,
    pub objects: BTreeMap<String, SceneObject>,
    pub gripper: GripperState,
    pub arm_zone: Zone,
    pub machine_on: bool,
    pub cabinet_door_open: bool,
    pub machine_cover_open: bool,
    /// When set, `locate_object` fails unless the arm is at home.
    pub occlusion_rule: bool,
    /// Where the robot last saw each object. Grasping reaches to this
    /// location, so an object moved behind the robot's back is missed.
    pub beliefs: BTreeMap<String, Location>,
    pub coffee: CoffeeState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridState>,
    #[serde(default)]
    pub performed_skills: Vec<String>,
    pub rng_seed: u64,
    pub step_count: u64,
}

/// Lowercase words with punctuation treated as spaces (underscores kept).
pub(crate) fn tokenize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '_' {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn normalize_phrase(s: &str) -> String {
    let lowered = s.trim().to_ascii_lowercase();
    let words: Vec<&str> = lowered
        .split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|w| !w.is_empty())
        .collect();
    let words = match words.first() {
        Some(&"the") | Some(&"a") | Some(&"an") => &words[1..],
        _ => &words[..],
    };
    words.join(" ")
}

impl WorldState {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.get(id)
    }

    pub fn descriptor(&self, id: &str) -> String {
        self.objects
            .get(id)
            .map(SceneObject::descriptor)
            .unwrap_or_else(|| id.to_string())
    }

    /// Resolves an id (`box1`) or descriptor (`the blue cube`, `red box`, `mug`)
    /// to an object id. Ambiguous descriptors resolve to nothing.
    pub fn resolve(&self, text: &str) -> Option<String> {
        let trimmed = text.trim();
        if self.objects.contains_key(trimmed) {
            return Some(trimmed.to_string());
        }
        let norm = normalize_phrase(trimmed);
        let words: Vec<&str> = norm.split(' ').collect();
        let kind = ObjectKind::from_noun(words.last()?)?;
        let color = match words.len() {
            1 => None,
            2 => Some(Color::from_word(words[0])?),
            _ => return None,
        };
        let mut matches = self
            .objects
            .values()
            .filter(|o| o.kind == kind && color.is_none_or(|c| o.color == c));
        let first = matches.next()?;
        if matches.next().is_some() {
            return None;
        }
        Some(first.id.clone())
    }

    /// Objects stacked directly on `id`.
    pub fn objects_on<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a SceneObject> + 'a {
        self.objects
            .values()
            .filter(move |o| matches!(&o.location, Location::OnTopOf(t) if t == id))
    }

    pub fn has_clear_top(&self, id: &str) -> bool {
        self.objects_on(id).next().is_none()
    }

    /// The zone at the bottom of the stack containing `id`; `None` when held
    /// (directly or via the stack).
    pub fn root_zone(&self, id: &str) -> Option<Zone> {
        let mut cursor = id;
        for _ in 0..=self.objects.len() {
            match &self.objects.get(cursor)?.location {
                Location::Zone(z) => return Some(*z),
                Location::OnTopOf(below) => cursor = below,
                Location::Held => return None,
            }
        }
        None
    }

    /// Inside the cabinet while its door is closed.
    pub fn is_hidden(&self, id: &str) -> bool {
        !self.cabinet_door_open && self.root_zone(id) == Some(Zone::Cabinet)
    }

    pub fn held_object(&self) -> Option<&SceneObject> {
        self.gripper.held.as_deref().and_then(|id| self.objects.get(id))
    }

    pub fn objects_in_zone(&self, zone: Zone) -> impl Iterator<Item = &SceneObject> {
        self.objects
            .values()
            .filter(move |o| o.location == Location::Zone(zone))
    }

    /// Checks the structural invariants; returns a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let held: Vec<_> = self
            .objects
            .values()
            .filter(|o| o.location == Location::Held)
            .collect();
        if held.len() > 1 {
            return Err("more than one object held".into());
        }
        match (&self.gripper.held, held.first()) {
            (Some(id), Some(o)) if *id == o.id => {}
            (None, None) => {}
            _ => return Err("gripper.held disagrees with object locations".into()),
        }
        if self.gripper.held.is_some() && (self.gripper.open || self.gripper.width_mm <= 0.0) {
            return Err("held object with open or zero-width gripper".into());
        }
        if !(0.0..=GRIPPER_MAX_WIDTH_MM).contains(&self.gripper.width_mm) {
            return Err(format!("gripper width {} out of range", self.gripper.width_mm));
        }
        for o in self.objects.values() {
            if (o.color == Color::None) == (o.kind == ObjectKind::Cube) {
                return Err(format!("object {} has an invalid color for its kind", o.id));
            }
            if let Location::OnTopOf(t) = &o.location {
                if !self.objects.contains_key(t) {
                    return Err(format!("{} stacked on unknown {t}", o.id));
                }
                if self.objects_on(t).count() > 1 {
                    return Err(format!("more than one object on {t}"));
                }
            }
            if o.location != Location::Held && self.root_zone(&o.id).is_none() && !self.stack_is_held(&o.id) {
                return Err(format!("stacking cycle through {}", o.id));
            }
        }
        Ok(())
    }

    fn stack_is_held(&self, id: &str) -> bool {
        let mut cursor = id;
        for _ in 0..=self.objects.len() {
            match self.objects.get(cursor).map(|o| &o.location) {
                Some(Location::Held) => return true,
                Some(Location::OnTopOf(below)) => cursor = below,
                _ => return false,
            }
        }
        false
    }
}
