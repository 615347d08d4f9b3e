use std::fmt;
use std::str::FromStr;

use fss_core::adjust::{ComponentKind, Edit};
use serde::{Deserialize, Serialize};

/// The three interface designs participants are assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Treatment {
    /// Opaque: totals only.
    O,
    /// Transparent: read-only decomposition.
    T,
    /// Transparently adjustable: decomposition with component edits.
    TA,
}

pub const ALL_TREATMENTS: [Treatment; 3] = [Treatment::O, Treatment::T, Treatment::TA];

impl Treatment {
    pub fn as_str(self) -> &'static str {
        match self {
            Treatment::O => "O",
            Treatment::T => "T",
            Treatment::TA => "TA",
        }
    }

    /// Label of the selector-bar function.
    pub fn function_label(self) -> &'static str {
        match self {
            Treatment::O => "View Details",
            Treatment::T | Treatment::TA => "Explain Values",
        }
    }

    pub fn shows_decomposition(self) -> bool {
        self != Treatment::O
    }

    pub fn editable(self) -> &'static [ComponentKind] {
        match self {
            Treatment::TA => &[
                ComponentKind::Level,
                ComponentKind::Weekly,
                ComponentKind::Yearly,
                ComponentKind::Values,
            ],
            _ => &[ComponentKind::Values],
        }
    }

    /// Whether this treatment may submit `edit`. A full reset is always
    /// allowed: under O and T it only ever clears pinned values.
    pub fn permits(self, edit: &Edit) -> bool {
        match edit.kind() {
            None => true,
            Some(kind) => self.editable().contains(&kind),
        }
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Treatment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "O" => Ok(Treatment::O),
            "T" => Ok(Treatment::T),
            "TA" => Ok(Treatment::TA),
            other => Err(format!("unknown treatment '{other}' (expected O, T or TA)")),
        }
    }
}
