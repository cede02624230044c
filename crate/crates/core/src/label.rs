use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const CLASS_COUNT: usize = 3;

/// Shot-gather quality class. The discriminant is the class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Good = 0,
    Bad = 1,
    Ugly = 2,
}

impl Label {
    pub const ALL: [Label; CLASS_COUNT] = [Label::Good, Label::Bad, Label::Ugly];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Label> {
        Label::ALL.get(index).copied().ok_or(Error::LabelOutOfRange(index))
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Good => "good",
            Label::Bad => "bad",
            Label::Ugly => "ugly",
        }
    }

    /// Single-letter column tag (G, B, U).
    pub fn tag(self) -> char {
        match self {
            Label::Good => 'G',
            Label::Bad => 'B',
            Label::Ugly => 'U',
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "good" => Ok(Label::Good),
            "bad" => Ok(Label::Bad),
            "ugly" => Ok(Label::Ugly),
            other => Err(Error::Dataset(format!("unknown label {other:?}"))),
        }
    }
}
