use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The four-action space. Discriminants are the policy's output indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    MoveAhead = 0,
    RotateRight = 1,
    RotateLeft = 2,
    Done = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [
        Action::MoveAhead,
        Action::RotateRight,
        Action::RotateLeft,
        Action::Done,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::MoveAhead => "MoveAhead",
            Action::RotateRight => "RotateRight",
            Action::RotateLeft => "RotateLeft",
            Action::Done => "Done",
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Action::RotateRight | Action::RotateLeft)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown action {0:?}")]
pub struct ParseActionError(pub String);

impl FromStr for Action {
    type Err = ParseActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| ParseActionError(s.to_string()))
    }
}
