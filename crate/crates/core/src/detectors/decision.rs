//! Persistence filtering and the fault/attack decision table.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecisionLabel {
    Normal,
    FaultOnly,
    AttackOnly,
    FaultAndAttack,
}

impl DecisionLabel {
    pub const ALL: [DecisionLabel; 4] = [Self::Normal, Self::FaultOnly, Self::AttackOnly, Self::FaultAndAttack];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "Normal",
            Self::FaultOnly => "FaultOnly",
            Self::AttackOnly => "AttackOnly",
            Self::FaultAndAttack => "FaultAndAttack",
        }
    }
}

impl fmt::Display for DecisionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecisionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown decision label `{s}`")))
    }
}

/// Controller-side flag `J > J_th` and plant-side flag `J_u > J_th,u` to label.
pub fn discriminate(j_flag: bool, ju_flag: bool) -> DecisionLabel {
    match (j_flag, ju_flag) {
        (true, true) => DecisionLabel::FaultAndAttack,
        (false, true) => DecisionLabel::AttackOnly,
        (true, false) => DecisionLabel::FaultOnly,
        (false, false) => DecisionLabel::Normal,
    }
}

/// True at `k` iff the raw stream held for the last `window` samples.
pub fn persistence_filter(raw: &[bool], window: usize) -> Vec<bool> {
    let mut filter = PersistenceFilter::new(window);
    raw.iter().map(|&b| filter.push(b)).collect()
}

/// Streaming form of [`persistence_filter`].
#[derive(Debug, Clone)]
pub struct PersistenceFilter {
    window: usize,
    run: usize,
}

impl PersistenceFilter {
    /// A window of 0 is treated as 1.
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            run: 0,
        }
    }

    pub fn push(&mut self, raw: bool) -> bool {
        self.run = if raw { self.run + 1 } else { 0 };
        self.run >= self.window
    }

    pub fn reset(&mut self) {
        self.run = 0;
    }
}
