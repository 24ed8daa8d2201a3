//! The iterative collaboration loop: filter the graph, run both bidding
//! rounds, and execute the planned transfers only when they raise the global
//! objective. Repeats until no planned transfer set improves the system.

use serde::{Deserialize, Serialize};

use crate::bidding::{build_plan, CollaborationPlan, PlanError};
use crate::eval::{EvalError, MissionEvaluator};
use crate::hamilton::{filter_snapshots, TeamSnapshot};
use crate::team::{Allocation, TeamError, TeamGraph, TeamId, Teams};

use std::sync::Arc;

/// `G = sum_k w_k F_k(n_k)`: the system-wide mission evaluation.
pub fn global_objective(teams: &Teams, alloc: &Allocation) -> Result<f64, EvalError> {
    if teams.len() != alloc.team_count() {
        // Surface as an out-of-domain query on the first missing team.
        return Err(EvalError::OutOfDomain(alloc.team_count() as u32));
    }
    let mut total = 0.0;
    for spec in teams {
        total += spec.weight * spec.evaluator.value(alloc.count(spec.id))?;
    }
    Ok(total)
}

/// Moves one agent along every planned transfer. The total is conserved;
/// every donor must stay at or above `min_team_size` afterwards. On error
/// the input allocation is untouched (the plan is rejected as a whole).
pub fn apply_plan(
    alloc: &Allocation,
    plan: &CollaborationPlan,
    min_team_size: u32,
) -> Result<Allocation, PlanError> {
    let mut counts = alloc.counts().to_vec();
    for t in plan.transfers() {
        for id in [t.donor, t.recipient] {
            if id.index() >= counts.len() {
                return Err(PlanError::UnknownTeam(id));
            }
        }
        let have = counts[t.donor.index()];
        if have == 0 || have - 1 < min_team_size {
            return Err(PlanError::DonorBelowMinimum {
                team: t.donor,
                count: have,
                min: min_team_size,
            });
        }
        counts[t.donor.index()] -= 1;
        counts[t.recipient.index()] += 1;
    }
    Ok(Allocation::new(counts).expect("plan application preserves the total"))
}

/// What an accepted plan does to one team's roster within an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentChange {
    /// Receive one agent.
    Gain,
    /// Give one agent away.
    Loss,
    /// Give one agent and receive another; the count is unchanged.
    Swap,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MissionError {
    #[error("mission undefined at count {0}")]
    OutOfDomain(u32),
    #[error(transparent)]
    Eval(EvalError),
    #[error("coverage evaluation failed: {0}")]
    Coverage(#[from] crate::coverage::CoverageError),
    #[error("commit of {0:?} without a matching preview")]
    MissingPreview(AgentChange),
}

impl From<EvalError> for MissionError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::OutOfDomain(n) => MissionError::OutOfDomain(n),
            other => MissionError::Eval(other),
        }
    }
}

/// One team's mission state as the collaboration loop sees it.
///
/// `preview` evaluates a hypothetical one-agent change without committing
/// it; `commit` then adopts exactly the previewed state, so the objective
/// the loop accepted is the objective the next iteration starts from.
/// A commit must follow a preview of the same change with no state change
/// in between.
pub trait TeamMission {
    fn count(&self) -> u32;

    /// `F` at the current state.
    fn value(&self) -> f64;

    /// `F` after the hypothetical change.
    fn preview(&mut self, change: AgentChange) -> Result<f64, MissionError>;

    fn commit(&mut self, change: AgentChange) -> Result<(), MissionError>;
}

/// Mission backed by a pure evaluation function of the agent count.
#[derive(Clone)]
pub struct CountMission {
    evaluator: Arc<dyn MissionEvaluator>,
    count: u32,
    value: f64,
}

impl std::fmt::Debug for CountMission {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CountMission")
            .field("count", &self.count)
            .field("value", &self.value)
            .finish_non_exhaustive()
    }
}

impl CountMission {
    pub fn new(evaluator: Arc<dyn MissionEvaluator>, count: u32) -> Result<Self, MissionError> {
        let value = evaluator.value(count)?;
        Ok(Self {
            evaluator,
            count,
            value,
        })
    }
}

impl TeamMission for CountMission {
    fn count(&self) -> u32 {
        self.count
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn preview(&mut self, change: AgentChange) -> Result<f64, MissionError> {
        match change {
            AgentChange::Gain => Ok(self.evaluator.value(self.count + 1)?),
            AgentChange::Loss => {
                if self.count == 0 {
                    return Err(MissionError::OutOfDomain(0));
                }
                Ok(self.evaluator.value(self.count - 1)?)
            }
            // Agents are interchangeable, so a swap leaves F unchanged.
            AgentChange::Swap => Ok(self.value),
        }
    }

    fn commit(&mut self, change: AgentChange) -> Result<(), MissionError> {
        match change {
            AgentChange::Gain => self.count += 1,
            AgentChange::Loss => self.count -= 1,
            AgentChange::Swap => {}
        }
        self.value = self.evaluator.value(self.count)?;
        Ok(())
    }
}

/// Knobs for the collaboration loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollabConfig {
    /// Smallest team size a donor may leave behind. The default of 1 keeps
    /// every team populated; 0 allows teams to empty out entirely (their
    /// evaluator must then define F(0)).
    pub min_team_size: u32,
    /// A plan is accepted only if it beats the current objective by more
    /// than this. Use the default for exact evaluators; coverage-backed
    /// runs should raise it to 1e-6 to absorb solver noise.
    pub epsilon_g: f64,
    /// Safety bound on iterations; `None` means `total_agents * team_count`.
    pub max_iterations: Option<usize>,
}

impl Default for CollabConfig {
    fn default() -> Self {
        Self {
            min_team_size: 1,
            epsilon_g: 1e-9,
            max_iterations: None,
        }
    }
}

/// Objective-improvement slack appropriate for coverage-backed missions.
pub const COVERAGE_EPSILON_G: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// No planned transfer set could improve the objective.
    Converged,
    /// The safety iteration limit was reached first.
    IterationLimit,
}

/// What happened in one iteration. `objective` and `allocation` reflect the
/// state after the iteration (unchanged if the plan was not accepted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub allocation: Allocation,
    pub plan: CollaborationPlan,
    pub accepted: bool,
}

/// The full history of a collaboration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub initial_objective: f64,
    pub initial_allocation: Allocation,
    pub iterations: Vec<IterationRecord>,
    pub final_objective: f64,
    pub final_allocation: Allocation,
    pub termination: Termination,
}

impl RunTrace {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn accepted_count(&self) -> usize {
        self.iterations.iter().filter(|r| r.accepted).count()
    }

    /// Objective values over accepted iterations, starting from the initial
    /// one; strictly increasing for any valid run.
    pub fn objective_history(&self) -> Vec<f64> {
        let mut out = vec![self.initial_objective];
        out.extend(
            self.iterations
                .iter()
                .filter(|r| r.accepted)
                .map(|r| r.objective),
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CollabError {
    #[error(transparent)]
    Team(#[from] TeamError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("the collaboration session has already terminated")]
    Finished,
    #[error("internal invariant breached: {0}")]
    InvariantBreach(String),
}

/// Drives the collaboration loop over a set of team missions.
///
/// [`run_collaboration`] wraps this for pure count-based evaluators; callers
/// that need to observe team state between iterations (live coverage runs)
/// step the session manually.
pub struct CollaborationSession<M: TeamMission> {
    weights: Vec<f64>,
    graph: TeamGraph,
    missions: Vec<M>,
    config: CollabConfig,
    limit: usize,
    objective: f64,
    iteration: usize,
    records: Vec<IterationRecord>,
    initial_objective: f64,
    initial_allocation: Allocation,
    termination: Option<Termination>,
}

impl<M: TeamMission> CollaborationSession<M> {
    pub fn new(
        weights: Vec<f64>,
        graph: TeamGraph,
        missions: Vec<M>,
        config: CollabConfig,
    ) -> Result<Self, CollabError> {
        let m = missions.len();
        if m == 0 {
            return Err(TeamError::NoTeams.into());
        }
        if weights.len() != m || graph.team_count() as usize != m {
            return Err(CollabError::InvariantBreach(format!(
                "{} weights / {}-team graph / {} missions",
                weights.len(),
                graph.team_count(),
                m
            )));
        }
        if let Some(&w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(TeamError::NonPositiveWeight {
                id: TeamId(0),
                weight: w,
            }
            .into());
        }
        let initial_allocation = Allocation::new(missions.iter().map(|t| t.count()).collect())?;
        let objective: f64 = weights
            .iter()
            .zip(&missions)
            .map(|(w, t)| w * t.value())
            .sum();
        let limit = config
            .max_iterations
            .unwrap_or_else(|| (initial_allocation.total() as usize).max(1) * m);
        Ok(Self {
            weights,
            graph,
            missions,
            config,
            limit,
            objective,
            iteration: 0,
            records: Vec::new(),
            initial_objective: objective,
            initial_allocation,
            termination: None,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.termination.is_some()
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn missions(&self) -> &[M] {
        &self.missions
    }

    pub fn allocation(&self) -> Allocation {
        Allocation::new(self.missions.iter().map(|t| t.count()).collect())
            .expect("counts stay valid")
    }

    fn snapshot(&mut self, k: usize) -> Result<TeamSnapshot, CollabError> {
        let mission = &mut self.missions[k];
        let count = mission.count();
        let value = mission.value();
        let gained = match mission.preview(AgentChange::Gain) {
            Ok(v) => Some(v),
            Err(MissionError::OutOfDomain(_)) => None,
            Err(e) => return Err(e.into()),
        };
        let lost = if count > self.config.min_team_size {
            match mission.preview(AgentChange::Loss) {
                Ok(v) => Some(v),
                Err(MissionError::OutOfDomain(_)) => None,
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        Ok(TeamSnapshot {
            weight: self.weights[k],
            value,
            gained,
            lost,
        })
    }

    /// Runs one iteration: filter, bid, plan, and accept the plan if it
    /// strictly improves the objective. Returns the iteration's record.
    pub fn step(&mut self) -> Result<&IterationRecord, CollabError> {
        if self.is_finished() {
            return Err(CollabError::Finished);
        }
        let m = self.missions.len();
        let mut snaps = Vec::with_capacity(m);
        for k in 0..m {
            snaps.push(self.snapshot(k)?);
        }
        let filtered = filter_snapshots(&self.graph, &snaps);
        let plan = build_plan(&filtered);
        self.iteration += 1;

        if plan.is_empty() {
            self.termination = Some(Termination::Converged);
            self.records.push(IterationRecord {
                iteration: self.iteration,
                objective: self.objective,
                allocation: self.allocation(),
                plan,
                accepted: false,
            });
            return Ok(self.records.last().expect("just pushed"));
        }

        let mut changes: Vec<Option<AgentChange>> = vec![None; m];
        for t in plan.transfers() {
            let d = t.donor.index();
            let r = t.recipient.index();
            changes[d] = Some(match changes[d] {
                Some(AgentChange::Gain) => AgentChange::Swap,
                _ => AgentChange::Loss,
            });
            changes[r] = Some(match changes[r] {
                Some(AgentChange::Loss) => AgentChange::Swap,
                _ => AgentChange::Gain,
            });
        }

        let mut hypothetical = 0.0;
        for k in 0..m {
            let value = match changes[k] {
                None => self.missions[k].value(),
                Some(AgentChange::Gain) => snaps[k].gained.ok_or_else(|| {
                    CollabError::InvariantBreach(format!("planned recipient {k} had no gain value"))
                })?,
                Some(AgentChange::Loss) => snaps[k].lost.ok_or_else(|| {
                    CollabError::InvariantBreach(format!("planned donor {k} had no loss value"))
                })?,
                Some(AgentChange::Swap) => self.missions[k].preview(AgentChange::Swap)?,
            };
            hypothetical += self.weights[k] * value;
        }

        let accepted = hypothetical > self.objective + self.config.epsilon_g;
        if accepted {
            for (mission, change) in self.missions.iter_mut().zip(&changes) {
                if let Some(change) = change {
                    mission.commit(*change)?;
                }
            }
            self.objective = hypothetical;
            if self.iteration >= self.limit {
                self.termination = Some(Termination::IterationLimit);
            }
        } else {
            self.termination = Some(Termination::Converged);
        }
        self.records.push(IterationRecord {
            iteration: self.iteration,
            objective: self.objective,
            allocation: self.allocation(),
            plan,
            accepted,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn run_to_end(&mut self) -> Result<(), CollabError> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }

    pub fn into_trace(self) -> RunTrace {
        let final_allocation = self.allocation();
        RunTrace {
            initial_objective: self.initial_objective,
            initial_allocation: self.initial_allocation,
            iterations: self.records,
            final_objective: self.objective,
            final_allocation,
            termination: self.termination.unwrap_or(Termination::IterationLimit),
        }
    }

    pub fn run(mut self) -> Result<RunTrace, CollabError> {
        self.run_to_end()?;
        Ok(self.into_trace())
    }
}

fn count_missions(teams: &Teams, alloc: &Allocation) -> Result<Vec<CountMission>, CollabError> {
    if teams.len() != alloc.team_count() {
        return Err(TeamError::CountMismatch {
            counts: alloc.team_count(),
            teams: teams.len(),
        }
        .into());
    }
    teams
        .iter()
        .map(|spec| {
            CountMission::new(spec.evaluator.clone(), alloc.count(spec.id)).map_err(Into::into)
        })
        .collect()
}

/// One iteration of the loop at the given allocation: returns the updated
/// (or unchanged) allocation, the iteration record, and whether the plan
/// was accepted.
pub fn collaboration_step(
    teams: &Teams,
    graph: &TeamGraph,
    alloc: &Allocation,
    config: &CollabConfig,
) -> Result<(Allocation, IterationRecord, bool), CollabError> {
    let mut session = CollaborationSession::new(
        teams.weights(),
        graph.clone(),
        count_missions(teams, alloc)?,
        *config,
    )?;
    let record = session.step()?.clone();
    let accepted = record.accepted;
    Ok((record.allocation.clone(), record, accepted))
}

/// Runs the full collaboration process from `initial` until no further
/// improvement is possible (or the safety limit trips, which is flagged in
/// the trace).
pub fn run_collaboration(
    teams: &Teams,
    graph: &TeamGraph,
    initial: &Allocation,
    config: &CollabConfig,
) -> Result<RunTrace, CollabError> {
    if initial.min_count() < config.min_team_size {
        return Err(PlanError::DonorBelowMinimum {
            team: TeamId::from_index(
                initial
                    .counts()
                    .iter()
                    .position(|&c| c < config.min_team_size)
                    .expect("min_count checked"),
            ),
            count: initial.min_count(),
            min: config.min_team_size,
        }
        .into());
    }
    CollaborationSession::new(
        teams.weights(),
        graph.clone(),
        count_missions(teams, initial)?,
        *config,
    )?
    .run()
}
