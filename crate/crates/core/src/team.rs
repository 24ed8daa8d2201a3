//! Teams, agent allocations, and the undirected collaboration graph.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::eval::MissionEvaluator;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TeamError {
    #[error("team {id} has non-positive weight {weight}")]
    NonPositiveWeight { id: TeamId, weight: f64 },
    #[error("team ids must be exactly 1..=m with no repeats")]
    NonContiguousIds,
    #[error("at least one team is required")]
    NoTeams,
    #[error("graph edge {0}-{0} is a self-loop")]
    SelfLoop(TeamId),
    #[error("graph edge {a}-{b} references a team outside 1..={m}")]
    EdgeOutOfRange { a: TeamId, b: TeamId, m: u32 },
    #[error("allocation has {counts} counts but there are {teams} teams")]
    CountMismatch { counts: usize, teams: usize },
    #[error("total agent count overflows")]
    TotalOverflow,
}

/// 1-based team identifier.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TeamId(pub u32);

impl TeamId {
    /// Position of this team in id-ordered storage.
    pub fn index(self) -> usize {
        debug_assert!(self.0 >= 1);
        (self.0 - 1) as usize
    }

    pub fn from_index(index: usize) -> Self {
        TeamId(index as u32 + 1)
    }
}

impl fmt::Display for TeamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One team: identity, mission weight, and its evaluation function.
#[derive(Clone)]
pub struct TeamSpec {
    pub id: TeamId,
    pub weight: f64,
    pub evaluator: Arc<dyn MissionEvaluator>,
}

impl TeamSpec {
    pub fn new(
        id: TeamId,
        weight: f64,
        evaluator: Arc<dyn MissionEvaluator>,
    ) -> Result<Self, TeamError> {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(TeamError::NonPositiveWeight { id, weight });
        }
        Ok(Self {
            id,
            weight,
            evaluator,
        })
    }
}

impl fmt::Debug for TeamSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TeamSpec")
            .field("id", &self.id)
            .field("weight", &self.weight)
            .finish_non_exhaustive()
    }
}

/// The full roster, with ids validated to be exactly `1..=m`.
#[derive(Debug, Clone)]
pub struct Teams {
    specs: Vec<TeamSpec>,
}

impl Teams {
    pub fn new(mut specs: Vec<TeamSpec>) -> Result<Self, TeamError> {
        if specs.is_empty() {
            return Err(TeamError::NoTeams);
        }
        specs.sort_by_key(|s| s.id);
        let contiguous = specs
            .iter()
            .enumerate()
            .all(|(i, s)| s.id == TeamId::from_index(i));
        if !contiguous {
            return Err(TeamError::NonContiguousIds);
        }
        Ok(Self { specs })
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TeamSpec> {
        self.specs.iter()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.specs.iter().map(|s| s.weight).collect()
    }
}

impl std::ops::Index<TeamId> for Teams {
    type Output = TeamSpec;
    fn index(&self, id: TeamId) -> &TeamSpec {
        &self.specs[id.index()]
    }
}

impl<'a> IntoIterator for &'a Teams {
    type Item = &'a TeamSpec;
    type IntoIter = std::slice::Iter<'a, TeamSpec>;
    fn into_iter(self) -> Self::IntoIter {
        self.specs.iter()
    }
}

/// How many agents each team currently holds. The stored total always equals
/// the sum of the counts, so the system-wide agent count is conserved by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Allocation {
    counts: Vec<u32>,
    total: u32,
}

impl Allocation {
    pub fn new(counts: Vec<u32>) -> Result<Self, TeamError> {
        if counts.is_empty() {
            return Err(TeamError::NoTeams);
        }
        let mut total: u32 = 0;
        for &c in &counts {
            total = total.checked_add(c).ok_or(TeamError::TotalOverflow)?;
        }
        Ok(Self { counts, total })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count(&self, id: TeamId) -> u32 {
        self.counts[id.index()]
    }

    pub fn team_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn min_count(&self) -> u32 {
        *self.counts.iter().min().expect("non-empty")
    }
}

impl TryFrom<Vec<u32>> for Allocation {
    type Error = TeamError;
    fn try_from(counts: Vec<u32>) -> Result<Self, TeamError> {
        Allocation::new(counts)
    }
}

impl From<Allocation> for Vec<u32> {
    fn from(a: Allocation) -> Vec<u32> {
        a.counts
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Undirected graph of potential collaborations. Edges are stored with the
/// lower id first, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamGraph {
    team_count: u32,
    edges: Vec<(TeamId, TeamId)>,
}

impl TeamGraph {
    pub fn complete(team_count: u32) -> Result<Self, TeamError> {
        if team_count == 0 {
            return Err(TeamError::NoTeams);
        }
        let mut edges = Vec::new();
        for a in 1..=team_count {
            for b in a + 1..=team_count {
                edges.push((TeamId(a), TeamId(b)));
            }
        }
        Ok(Self { team_count, edges })
    }

    pub fn from_edges(
        team_count: u32,
        edges: impl IntoIterator<Item = (TeamId, TeamId)>,
    ) -> Result<Self, TeamError> {
        if team_count == 0 {
            return Err(TeamError::NoTeams);
        }
        let mut normed = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(TeamError::SelfLoop(a));
            }
            if a.0 < 1 || b.0 < 1 || a.0 > team_count || b.0 > team_count {
                return Err(TeamError::EdgeOutOfRange {
                    a,
                    b,
                    m: team_count,
                });
            }
            normed.push(if a < b { (a, b) } else { (b, a) });
        }
        normed.sort();
        normed.dedup();
        Ok(Self {
            team_count,
            edges: normed,
        })
    }

    pub fn team_count(&self) -> u32 {
        self.team_count
    }

    pub fn edges(&self) -> &[(TeamId, TeamId)] {
        &self.edges
    }

    pub fn contains(&self, a: TeamId, b: TeamId) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&key).is_ok()
    }

    pub fn is_complete(&self) -> bool {
        let m = u64::from(self.team_count);
        self.edges.len() as u64 == m * (m - 1) / 2
    }
}
