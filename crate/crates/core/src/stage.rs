use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Five-class sleep stage. N4 is folded into N3 at ingestion time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    W,
    N1,
    N2,
    N3,
    #[serde(rename = "REM")]
    Rem,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::W, Stage::N1, Stage::N2, Stage::N3, Stage::Rem];

    /// Column index in a 5-class probability matrix.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Stage> {
        Stage::ALL.get(i).copied()
    }

    pub fn is_sleep(self) -> bool {
        self != Stage::W
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::W => "W",
            Stage::N1 => "N1",
            Stage::N2 => "N2",
            Stage::N3 => "N3",
            Stage::Rem => "REM",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "W" | "WAKE" | "0" => Ok(Stage::W),
            "N1" | "1" => Ok(Stage::N1),
            "N2" | "2" => Ok(Stage::N2),
            "N3" | "N4" | "3" | "4" => Ok(Stage::N3),
            "REM" | "R" | "5" => Ok(Stage::Rem),
            other => Err(format!("unknown sleep stage '{other}'")),
        }
    }
}
