use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the three concept wheels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Disk {
    /// Theme
    A,
    /// Domain
    B,
    /// Method
    C,
}

impl Disk {
    pub const ALL: [Disk; 3] = [Disk::A, Disk::B, Disk::C];

    pub fn letter(self) -> char {
        match self {
            Disk::A => 'A',
            Disk::B => 'B',
            Disk::C => 'C',
        }
    }

    pub fn role(self) -> &'static str {
        match self {
            Disk::A => "theme",
            Disk::B => "domain",
            Disk::C => "method",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Disk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Disk {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" | "theme" | "Theme" => Ok(Disk::A),
            "B" | "b" | "domain" | "Domain" => Ok(Disk::B),
            "C" | "c" | "method" | "Method" => Ok(Disk::C),
            other => Err(format!("unknown disk {other:?}")),
        }
    }
}
