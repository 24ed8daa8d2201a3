//! Hamilton's rule for pairwise agent transfers, and the filtering of the
//! undirected team graph into the directed graph of beneficial transfers.
//!
//! A transfer from donor `i` to recipient `j` is allowed when the weighted
//! marginal benefit exceeds the weighted marginal cost,
//! `w_j * B_j > w_i * C_i`. The comparison is kept in this weight-cleared
//! form (rather than dividing by `w_i`) so it stays exact in floating point
//! and symmetric between the two teams.

use serde::{Deserialize, Serialize};

use crate::eval::{EvalError, MissionEvaluator};
use crate::team::{Allocation, TeamGraph, TeamId, TeamSpec, Teams};

/// `B(n) = F(n+1) - F(n)`: what one more agent is worth.
pub fn marginal_benefit(evaluator: &dyn MissionEvaluator, n: u32) -> Result<f64, EvalError> {
    Ok(evaluator.value(n + 1)? - evaluator.value(n)?)
}

/// `C(n) = F(n) - F(n-1)`: what losing one agent costs.
pub fn marginal_cost(evaluator: &dyn MissionEvaluator, n: u32) -> Result<f64, EvalError> {
    if n == 0 {
        return Err(EvalError::EmptyTeam);
    }
    Ok(evaluator.value(n)? - evaluator.value(n - 1)?)
}

/// Whether Hamilton's rule permits `donor` to hand one agent to `recipient`
/// at the given counts: `w_recipient * B_recipient > w_donor * C_donor`.
pub fn hamilton_allows(
    donor: &TeamSpec,
    donor_count: u32,
    recipient: &TeamSpec,
    recipient_count: u32,
) -> Result<bool, EvalError> {
    let benefit = marginal_benefit(recipient.evaluator.as_ref(), recipient_count)?;
    let cost = marginal_cost(donor.evaluator.as_ref(), donor_count)?;
    Ok(recipient.weight * benefit > donor.weight * cost)
}

/// A directed transfer that passed the Hamilton filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilteredEdge {
    pub donor: TeamId,
    pub recipient: TeamId,
    /// `B` of the recipient at its current count.
    pub benefit: f64,
    /// `C` of the donor at its current count.
    pub cost: f64,
    /// `w_recipient * benefit - w_donor * cost`; strictly positive.
    pub net_gain: f64,
}

/// Directed graph of locally beneficial transfers. For any unordered team
/// pair at most one direction is present.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FilteredGraph {
    edges: Vec<FilteredEdge>,
}

impl FilteredGraph {
    /// Edges sorted by (donor, recipient).
    pub fn edges(&self) -> &[FilteredEdge] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edge(&self, donor: TeamId, recipient: TeamId) -> Option<&FilteredEdge> {
        self.edges
            .iter()
            .find(|e| e.donor == donor && e.recipient == recipient)
    }

    /// The donor's candidate recipients.
    pub fn outgoing(&self, donor: TeamId) -> impl Iterator<Item = &FilteredEdge> {
        self.edges.iter().filter(move |e| e.donor == donor)
    }

    /// The recipient's candidate donors.
    pub fn incoming(&self, recipient: TeamId) -> impl Iterator<Item = &FilteredEdge> {
        self.edges.iter().filter(move |e| e.recipient == recipient)
    }
}

#[cfg(test)]
impl FilteredGraph {
    pub(crate) fn from_edges_for_tests(mut edges: Vec<FilteredEdge>) -> Self {
        edges.sort_by_key(|e| (e.donor, e.recipient));
        Self { edges }
    }
}

/// Everything the filter needs to know about one team this iteration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TeamSnapshot {
    pub weight: f64,
    /// `F` at the current count.
    pub value: f64,
    /// `F` after gaining one agent; `None` if the team cannot receive.
    pub gained: Option<f64>,
    /// `F` after losing one agent; `None` if the team may not donate.
    pub lost: Option<f64>,
}

impl TeamSnapshot {
    fn benefit(&self) -> Option<f64> {
        self.gained.map(|g| g - self.value)
    }

    fn cost(&self) -> Option<f64> {
        self.lost.map(|l| self.value - l)
    }
}

fn directed_edge(snaps: &[TeamSnapshot], donor: TeamId, recipient: TeamId) -> Option<FilteredEdge> {
    let cost = snaps[donor.index()].cost()?;
    let benefit = snaps[recipient.index()].benefit()?;
    let net_gain =
        snaps[recipient.index()].weight * benefit - snaps[donor.index()].weight * cost;
    (net_gain > 0.0).then_some(FilteredEdge {
        donor,
        recipient,
        benefit,
        cost,
        net_gain,
    })
}

/// Applies Hamilton's rule to both directions of every graph edge.
///
/// For evaluators with genuine diminishing returns both directions can never
/// hold at once; if a noisy (tabulated) evaluator makes both pass anyway,
/// the direction with the larger net gain is kept so the one-direction
/// structure of the output is preserved.
pub(crate) fn filter_snapshots(graph: &TeamGraph, snaps: &[TeamSnapshot]) -> FilteredGraph {
    let mut edges = Vec::new();
    for &(a, b) in graph.edges() {
        let fwd = directed_edge(snaps, a, b);
        let rev = directed_edge(snaps, b, a);
        match (fwd, rev) {
            (Some(f), Some(r)) => edges.push(if f.net_gain >= r.net_gain { f } else { r }),
            (Some(f), None) => edges.push(f),
            (None, Some(r)) => edges.push(r),
            (None, None) => {}
        }
    }
    edges.sort_by_key(|e| (e.donor, e.recipient));
    FilteredGraph { edges }
}

pub(crate) fn snapshot_from_evaluator(
    evaluator: &dyn MissionEvaluator,
    weight: f64,
    count: u32,
    min_team_size: u32,
) -> Result<TeamSnapshot, EvalError> {
    let value = evaluator.value(count)?;
    let gained = match evaluator.value(count + 1) {
        Ok(v) => Some(v),
        Err(EvalError::OutOfDomain(_)) => None,
        Err(e) => return Err(e),
    };
    let lost = if count > min_team_size {
        match evaluator.value(count - 1) {
            Ok(v) => Some(v),
            Err(EvalError::OutOfDomain(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(TeamSnapshot {
        weight,
        value,
        gained,
        lost,
    })
}

/// Evaluates Hamilton's rule across the whole graph at the given allocation.
/// Teams holding `min_team_size` agents are never donors (a team that has
/// dropped to the floor is only considered for incoming transfers).
pub fn filter_graph(
    graph: &TeamGraph,
    teams: &Teams,
    alloc: &Allocation,
    min_team_size: u32,
) -> Result<FilteredGraph, EvalError> {
    let snaps: Vec<TeamSnapshot> = teams
        .iter()
        .map(|spec| {
            snapshot_from_evaluator(
                spec.evaluator.as_ref(),
                spec.weight,
                alloc.count(spec.id),
                min_team_size,
            )
        })
        .collect::<Result<_, _>>()?;
    Ok(filter_snapshots(graph, &snaps))
}
