use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The four standard screening views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum View {
    #[serde(rename = "LCC")]
    Lcc,
    #[serde(rename = "RCC")]
    Rcc,
    #[serde(rename = "LMLO")]
    Lmlo,
    #[serde(rename = "RMLO")]
    Rmlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Craniocaudal,
    MediolateralOblique,
}

impl View {
    /// Canonical order used everywhere a per-view array appears.
    pub const ALL: [View; 4] = [View::Lcc, View::Rcc, View::Lmlo, View::Rmlo];

    pub fn index(self) -> usize {
        match self {
            View::Lcc => 0,
            View::Rcc => 1,
            View::Lmlo => 2,
            View::Rmlo => 3,
        }
    }

    pub fn side(self) -> Side {
        match self {
            View::Lcc | View::Lmlo => Side::Left,
            View::Rcc | View::Rmlo => Side::Right,
        }
    }

    pub fn projection(self) -> Projection {
        match self {
            View::Lcc | View::Rcc => Projection::Craniocaudal,
            View::Lmlo | View::Rmlo => Projection::MediolateralOblique,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            View::Lcc => "LCC",
            View::Rcc => "RCC",
            View::Lmlo => "LMLO",
            View::Rmlo => "RMLO",
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        View::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown view {s:?}")))
    }
}
