//! Orchestrates one scenario run: builds the per-team missions, drives the
//! collaboration session, and snapshots coverage-team robot positions at
//! every iteration for the emitted artifacts.

use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use hamrule::coverage::{CoverageError, CoverageGrid, CoverageMission, DensityField};
use hamrule::{
    sample_allocation, AgentChange, Allocation, CollabError, CollaborationSession, CountMission,
    MissionError, OracleError, RunTrace, TeamMission,
};

use crate::scenario::{EvaluatorSpec, InitialAllocation, Scenario};

/// RNG stream used to draw a random initial allocation; team missions use
/// streams 1..=m.
const ALLOCATION_STREAM: u64 = 0;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("coverage setup failed: {0}")]
    Coverage(#[from] CoverageError),
    #[error("initial allocation: {0}")]
    Allocation(#[from] OracleError),
    #[error(transparent)]
    Collab(#[from] CollabError),
    #[error(transparent)]
    Mission(#[from] MissionError),
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub grid: Option<(usize, usize)>,
}

/// One team's mission inside a scenario run.
pub enum ScenarioMission {
    Count(CountMission),
    Coverage(CoverageMission),
}

impl ScenarioMission {
    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        match self {
            ScenarioMission::Count(_) => None,
            ScenarioMission::Coverage(c) => Some(c.positions()),
        }
    }
}

impl TeamMission for ScenarioMission {
    fn count(&self) -> u32 {
        match self {
            ScenarioMission::Count(m) => m.count(),
            ScenarioMission::Coverage(m) => m.count(),
        }
    }

    fn value(&self) -> f64 {
        match self {
            ScenarioMission::Count(m) => m.value(),
            ScenarioMission::Coverage(m) => m.value(),
        }
    }

    fn preview(&mut self, change: AgentChange) -> Result<f64, MissionError> {
        match self {
            ScenarioMission::Count(m) => m.preview(change),
            ScenarioMission::Coverage(m) => m.preview(change),
        }
    }

    fn commit(&mut self, change: AgentChange) -> Result<(), MissionError> {
        match self {
            ScenarioMission::Count(m) => m.commit(change),
            ScenarioMission::Coverage(m) => m.commit(change),
        }
    }
}

/// Robot positions of every coverage team after a given iteration
/// (iteration 0 is the initial CVT).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageFrame {
    pub iteration: usize,
    /// Indexed by team; `None` for teams without a coverage mission.
    pub positions: Vec<Option<Vec<[f64; 2]>>>,
}

/// Everything a run produces before emission.
pub struct RunOutcome {
    pub seed: u64,
    pub trace: RunTrace,
    pub frames: Vec<CoverageFrame>,
    /// Per-team coverage grid, for raster emission and plots.
    pub grids: Vec<Option<Arc<CoverageGrid>>>,
    pub weights: Vec<f64>,
}

pub fn initial_counts(
    scenario: &Scenario,
    seed: u64,
) -> Result<Vec<u32>, RunnerError> {
    match &scenario.initial {
        InitialAllocation::Counts(counts) => Ok(counts.clone()),
        InitialAllocation::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ALLOCATION_STREAM);
            let alloc: Allocation = sample_allocation(
                scenario.team_count(),
                scenario.total_agents,
                scenario.collab.min_team_size,
                &mut rng,
            )?;
            Ok(alloc.counts().to_vec())
        }
    }
}

fn apply_overrides(scenario: &Scenario, overrides: &RunOverrides) -> (u64, hamrule::coverage::Domain) {
    let seed = overrides.seed.unwrap_or(scenario.seed);
    let mut domain = scenario.domain;
    if let Some((nx, ny)) = overrides.grid {
        domain.nx = nx;
        domain.ny = ny;
    }
    (seed, domain)
}

/// Builds the per-team coverage grids (shared domain, per-team density).
pub fn team_grids(
    scenario: &Scenario,
    overrides: &RunOverrides,
) -> Result<Vec<Option<Arc<CoverageGrid>>>, RunnerError> {
    let (_, domain) = apply_overrides(scenario, overrides);
    scenario
        .teams
        .iter()
        .map(|team| match &team.evaluator {
            EvaluatorSpec::Coverage { sigma } => Ok(Some(Arc::new(CoverageGrid::new(
                domain,
                &DensityField::Gaussian {
                    sigma_x: sigma[0],
                    sigma_y: sigma[1],
                },
            )?))),
            _ => Ok(None),
        })
        .collect()
}

/// Runs the scenario to termination.
pub fn execute(scenario: &Scenario, overrides: &RunOverrides) -> Result<RunOutcome, RunnerError> {
    let (seed, _) = apply_overrides(scenario, overrides);
    let counts = initial_counts(scenario, seed)?;
    let grids = team_grids(scenario, overrides)?;

    let mut missions = Vec::with_capacity(scenario.teams.len());
    for (team, grid) in scenario.teams.iter().zip(&grids) {
        let count = counts[team.id.index()];
        let mission = match grid {
            Some(grid) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::from(team.id.0));
                ScenarioMission::Coverage(CoverageMission::new(
                    grid.clone(),
                    count,
                    scenario.lloyd,
                    rng,
                )?)
            }
            None => {
                let evaluator = scenario
                    .pure_evaluator(team)
                    .expect("non-coverage team has a pure evaluator");
                ScenarioMission::Count(CountMission::new(evaluator, count)?)
            }
        };
        missions.push(mission);
    }

    let weights: Vec<f64> = scenario.teams.iter().map(|t| t.weight).collect();
    let mut session = CollaborationSession::new(
        weights.clone(),
        scenario.graph.clone(),
        missions,
        scenario.collab,
    )?;

    let snapshot = |session: &CollaborationSession<ScenarioMission>, iteration: usize| {
        CoverageFrame {
            iteration,
            positions: session
                .missions()
                .iter()
                .map(|m| m.positions().map(<[[f64; 2]]>::to_vec))
                .collect(),
        }
    };

    let has_coverage = scenario.has_coverage_teams();
    let mut frames = Vec::new();
    if has_coverage {
        frames.push(snapshot(&session, 0));
    }
    while !session.is_finished() {
        let record = session.step()?;
        let iteration = record.iteration;
        if has_coverage {
            frames.push(snapshot(&session, iteration));
        }
    }

    Ok(RunOutcome {
        seed,
        trace: session.into_trace(),
        frames,
        grids,
        weights,
    })
}
