use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::EnvAction;
use crate::error::{Error, Result};
use crate::state::DiscretizedState;
use crate::testcase::{Step, TestCase};

/// Dense index of a requirement under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveId(pub usize);

impl ObjectiveId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }

    /// All objectives `0..n`.
    pub fn all(n: usize) -> impl Iterator<Item = ObjectiveId> {
        (0..n).map(ObjectiveId)
    }
}

impl fmt::Display for ObjectiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

/// Outcome of offering a candidate to the archive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Offer {
    Inserted,
    Replaced,
    Kept,
}

/// Shortest known violating test case per covered objective.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Archive {
    entries: BTreeMap<ObjectiveId, TestCase>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `candidate` if the objective is uncovered or the candidate is
    /// strictly shorter than the incumbent. Equal lengths keep the incumbent.
    pub fn offer(&mut self, objective: ObjectiveId, candidate: TestCase) -> Offer {
        debug_assert!(!candidate.is_empty(), "archived test cases are non-empty");
        match self.entries.get_mut(&objective) {
            None => {
                self.entries.insert(objective, candidate);
                Offer::Inserted
            }
            Some(existing) if candidate.len() < existing.len() => {
                *existing = candidate;
                Offer::Replaced
            }
            Some(_) => Offer::Kept,
        }
    }

    /// Like [`Archive::offer`] but only materializes the candidate when it
    /// would be stored.
    pub fn offer_with(&mut self, objective: ObjectiveId, len: usize, make: impl FnOnce() -> TestCase) -> Offer {
        match self.entries.get(&objective) {
            Some(existing) if existing.len() <= len => Offer::Kept,
            _ => self.offer(objective, make()),
        }
    }

    pub fn get(&self, objective: ObjectiveId) -> Option<&TestCase> {
        self.entries.get(&objective)
    }

    pub fn covers(&self, objective: ObjectiveId) -> bool {
        self.entries.contains_key(&objective)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn covered(&self) -> impl Iterator<Item = ObjectiveId> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ObjectiveId, &TestCase)> {
        self.entries.iter().map(|(o, t)| (*o, t))
    }
}

/// Search approach that produced a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Approach {
    #[serde(rename = "MORLOT")]
    Morlot,
    #[serde(rename = "RS")]
    RandomSearch,
    #[serde(rename = "MOSA")]
    Mosa,
    #[serde(rename = "FITEST")]
    Fitest,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::Morlot, Approach::RandomSearch, Approach::Mosa, Approach::Fitest];

    pub fn name(self) -> &'static str {
        match self {
            Approach::Morlot => "MORLOT",
            Approach::RandomSearch => "RS",
            Approach::Mosa => "MOSA",
            Approach::Fitest => "FITEST",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown approach `{s}`")))
    }
}

/// On-disk form of one run's archive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveDocument {
    pub run_id: String,
    pub approach: Approach,
    pub env_id: String,
    pub seed: u64,
    pub entries: Vec<ArchiveEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub objective: ObjectiveId,
    pub steps: Vec<StepRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub state: DiscretizedState,
    pub action: EnvAction,
}

impl ArchiveDocument {
    pub fn from_archive(run_id: impl Into<String>, approach: Approach, env_id: impl Into<String>, seed: u64, archive: &Archive) -> Self {
        let entries = archive
            .iter()
            .map(|(objective, tc)| ArchiveEntry {
                objective,
                steps: tc.steps.iter().map(|s| StepRecord { state: s.state, action: s.action }).collect(),
            })
            .collect();
        Self { run_id: run_id.into(), approach, env_id: env_id.into(), seed, entries }
    }

    /// Rebuilds the archive, rejecting duplicate or empty entries.
    pub fn to_archive(&self) -> Result<Archive> {
        let mut archive = Archive::new();
        for e in &self.entries {
            if e.steps.is_empty() {
                return Err(Error::Config(format!("archive entry for {} is empty", e.objective)));
            }
            if archive.covers(e.objective) {
                return Err(Error::Config(format!("duplicate archive entry for {}", e.objective)));
            }
            archive.offer(e.objective, self.test_case(e));
        }
        Ok(archive)
    }

    pub fn test_case(&self, entry: &ArchiveEntry) -> TestCase {
        TestCase {
            steps: entry.steps.iter().map(|s| Step { state: s.state, action: s.action }).collect(),
            seed: self.seed,
            env_id: self.env_id.clone(),
        }
    }

    pub fn entry(&self, objective: ObjectiveId) -> Option<&ArchiveEntry> {
        self.entries.iter().find(|e| e.objective == objective)
    }
}
