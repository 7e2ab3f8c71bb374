use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Binary task outcome: `0` is success, `1` is failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub enum Flag {
    #[default]
    Success,
    Failure,
}

impl Flag {
    pub fn from_failed(failed: bool) -> Self {
        if failed {
            Flag::Failure
        } else {
            Flag::Success
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Flag::Success => 0,
            Flag::Failure => 1,
        }
    }

    pub fn is_failure(self) -> bool {
        self == Flag::Failure
    }

    pub fn is_success(self) -> bool {
        self == Flag::Success
    }
}

impl TryFrom<u8> for Flag {
    type Error = u8;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Flag::Success),
            1 => Ok(Flag::Failure),
            other => Err(other),
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl Serialize for Flag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Flag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = u8::deserialize(deserializer)?;
        Flag::try_from(raw)
            .map_err(|v| serde::de::Error::custom(format!("failure flag must be 0 or 1, got {v}")))
    }
}
