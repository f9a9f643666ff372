//! The three bundled DSLs and their operation registries.

pub mod arith;
pub mod doubleadd;
pub mod grids;

use crate::ops::Registry;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    GridSym,
    Arith24,
    DoubleAdd,
}

impl Domain {
    pub fn registry(self) -> Registry {
        match self {
            Domain::GridSym => grids::registry(),
            Domain::Arith24 => arith::registry(),
            Domain::DoubleAdd => doubleadd::registry(),
        }
    }

    pub const ALL: [Domain; 3] = [Domain::GridSym, Domain::Arith24, Domain::DoubleAdd];
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Domain::GridSym => "grids",
            Domain::Arith24 => "arith24",
            Domain::DoubleAdd => "doubleadd",
        };
        write!(f, "{s}")
    }
}

impl FromStr for Domain {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grids" | "grid-symmetry" | "gridsym" => Ok(Domain::GridSym),
            "arith24" | "24" | "24game" => Ok(Domain::Arith24),
            "doubleadd" | "double-add" => Ok(Domain::DoubleAdd),
            other => Err(format!("unknown domain {other:?} (grids|arith24|doubleadd)")),
        }
    }
}
