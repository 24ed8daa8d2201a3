//! A live coverage team: robot positions kept at a CVT, with transfer
//! benefits and costs measured after re-running Lloyd's algorithm.
//!
//! Evaluating a transfer right at the instant of removal or insertion would
//! be lopsided — a robot about to leave carries a converged workload while a
//! robot just added sits wherever it landed. Re-converging to a CVT on both
//! sides is what makes the two marginals comparable.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::lloyd::{lloyd, separate_coincident, CvtResult, LloydParams};
use super::voronoi::region_stats;
use super::{CoverageError, CoverageGrid};
use crate::collab::{AgentChange, MissionError, TeamMission};

use std::sync::Arc;

#[derive(Debug, Clone)]
struct CvtState {
    positions: Vec<[f64; 2]>,
    cost: f64,
}

impl From<CvtResult> for CvtState {
    fn from(r: CvtResult) -> Self {
        CvtState {
            positions: r.positions,
            cost: r.cost,
        }
    }
}

/// Mission state for one coverage team inside a collaboration run.
///
/// Previews run Lloyd's algorithm from the current CVT with a robot added,
/// removed, or both; committing adopts exactly the previewed configuration,
/// so the objective the loop compared is the objective the team now reports.
pub struct CoverageMission {
    grid: Arc<CoverageGrid>,
    params: LloydParams,
    rng: ChaCha8Rng,
    state: CvtState,
    pending_gain: Option<CvtState>,
    pending_loss: Option<CvtState>,
    pending_swap: Option<CvtState>,
}

impl CoverageMission {
    /// Starts a team of `count` robots at seeded-random positions and
    /// converges them to a CVT.
    pub fn new(
        grid: Arc<CoverageGrid>,
        count: u32,
        params: LloydParams,
        mut rng: ChaCha8Rng,
    ) -> Result<Self, CoverageError> {
        let positions: Vec<[f64; 2]> = (0..count)
            .map(|_| random_position(&grid, &mut rng))
            .collect();
        Self::from_positions(grid, positions, params, rng)
    }

    /// Converges the given starting positions to a CVT and adopts it.
    pub fn from_positions(
        grid: Arc<CoverageGrid>,
        positions: Vec<[f64; 2]>,
        params: LloydParams,
        rng: ChaCha8Rng,
    ) -> Result<Self, CoverageError> {
        let state = lloyd(&positions, &grid, &params)?.into();
        Ok(Self {
            grid,
            params,
            rng,
            state,
            pending_gain: None,
            pending_loss: None,
            pending_swap: None,
        })
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.state.positions
    }

    /// Locational cost at the current CVT (the mission value is its negative).
    pub fn cost(&self) -> f64 {
        self.state.cost
    }

    pub fn grid(&self) -> &CoverageGrid {
        &self.grid
    }

    /// The robot a donation would give up: the one with the least density
    /// mass in its region (ties to the lowest index), i.e. the cheapest
    /// single robot to lose.
    fn designated_robot(&self) -> usize {
        let stats = region_stats(&self.state.positions, &self.grid);
        let mut best = 0;
        for (i, &m) in stats.masses.iter().enumerate() {
            if m < stats.masses[best] {
                best = i;
            }
        }
        best
    }

    fn preview_gain(&mut self) -> Result<f64, CoverageError> {
        let mut positions = self.state.positions.clone();
        positions.push(random_position(&self.grid, &mut self.rng));
        separate_coincident(&mut positions, &self.grid)?;
        let state: CvtState = lloyd(&positions, &self.grid, &self.params)?.into();
        let value = -state.cost;
        self.pending_gain = Some(state);
        Ok(value)
    }

    fn preview_loss(&mut self) -> Result<f64, CoverageError> {
        let mut positions = self.state.positions.clone();
        positions.remove(self.designated_robot());
        let state: CvtState = lloyd(&positions, &self.grid, &self.params)?.into();
        let value = -state.cost;
        self.pending_loss = Some(state);
        Ok(value)
    }

    /// Give one robot away and take a fresh one in the same iteration:
    /// evaluated from the post-removal CVT with the incoming robot inserted.
    fn preview_swap(&mut self) -> Result<f64, CoverageError> {
        if self.pending_loss.is_none() {
            self.preview_loss()?;
        }
        let base = self.pending_loss.as_ref().expect("just previewed");
        let mut positions = base.positions.clone();
        positions.push(random_position(&self.grid, &mut self.rng));
        separate_coincident(&mut positions, &self.grid)?;
        let state: CvtState = lloyd(&positions, &self.grid, &self.params)?.into();
        let value = -state.cost;
        self.pending_swap = Some(state);
        Ok(value)
    }

    /// Expected performance improvement from one more robot,
    /// `(-L after insertion and re-convergence) - (-L now)`.
    pub fn transfer_benefit(&mut self) -> Result<f64, CoverageError> {
        let after = self.preview_gain()?;
        Ok(after - (-self.state.cost))
    }

    /// Performance lost by giving the designated robot away,
    /// `(-L now) - (-L after removal and re-convergence)`.
    pub fn transfer_cost(&mut self) -> Result<f64, CoverageError> {
        let after = self.preview_loss()?;
        Ok(-self.state.cost - after)
    }
}

fn random_position(grid: &CoverageGrid, rng: &mut ChaCha8Rng) -> [f64; 2] {
    let d = grid.domain();
    [
        rng.random_range(d.x_min..d.x_max),
        rng.random_range(d.y_min..d.y_max),
    ]
}

impl TeamMission for CoverageMission {
    fn count(&self) -> u32 {
        self.state.positions.len() as u32
    }

    fn value(&self) -> f64 {
        -self.state.cost
    }

    fn preview(&mut self, change: AgentChange) -> Result<f64, MissionError> {
        match change {
            AgentChange::Gain => Ok(self.preview_gain()?),
            AgentChange::Loss => {
                if self.state.positions.is_empty() {
                    return Err(MissionError::OutOfDomain(0));
                }
                Ok(self.preview_loss()?)
            }
            AgentChange::Swap => Ok(self.preview_swap()?),
        }
    }

    fn commit(&mut self, change: AgentChange) -> Result<(), MissionError> {
        let pending = match change {
            AgentChange::Gain => self.pending_gain.take(),
            AgentChange::Loss => self.pending_loss.take(),
            AgentChange::Swap => self.pending_swap.take(),
        };
        self.state = pending.ok_or(MissionError::MissingPreview(change))?;
        self.pending_gain = None;
        self.pending_loss = None;
        self.pending_swap = None;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::{DensityField, Domain};
    use rand_chacha::rand_core::SeedableRng;

    fn grid(s: f64) -> Arc<CoverageGrid> {
        Arc::new(
            CoverageGrid::new(
                Domain::default(),
                &DensityField::Gaussian {
                    sigma_x: s,
                    sigma_y: s,
                },
            )
            .unwrap(),
        )
    }

    fn mission(count: u32, seed: u64) -> CoverageMission {
        CoverageMission::new(
            grid(0.5),
            count,
            LloydParams::default(),
            ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn transfer_benefit_is_positive() {
        for seed in 0..5 {
            let mut team = mission(3, seed);
            assert!(team.transfer_benefit().unwrap() > 0.0, "seed {seed}");
        }
    }

    #[test]
    fn transfer_cost_is_positive() {
        for seed in 0..5 {
            let mut team = mission(4, seed);
            assert!(team.transfer_cost().unwrap() > 0.0, "seed {seed}");
        }
    }

    #[test]
    fn remove_then_reinsert_from_the_same_seed_is_deterministic() {
        let run = |seed| {
            let mut team = mission(5, seed);
            team.preview(AgentChange::Loss).unwrap();
            team.commit(AgentChange::Loss).unwrap();
            let value = team.preview(AgentChange::Gain).unwrap();
            team.commit(AgentChange::Gain).unwrap();
            (value, team.cost())
        };
        let (v1, c1) = run(7);
        let (v2, c2) = run(7);
        assert_eq!(v1.to_bits(), v2.to_bits());
        assert_eq!(c1.to_bits(), c2.to_bits());
    }

    #[test]
    fn remove_then_reinsert_lands_near_the_original_cost() {
        // The replacement robot starts somewhere new, so after Lloyd the
        // team is back at a (possibly different) CVT of the same count.
        let mut team = mission(5, 7);
        let before = team.cost();
        team.preview(AgentChange::Loss).unwrap();
        team.commit(AgentChange::Loss).unwrap();
        team.preview(AgentChange::Gain).unwrap();
        team.commit(AgentChange::Gain).unwrap();
        assert_eq!(team.count(), 5);
        assert!((team.cost() - before).abs() <= 0.05 * before.abs());
    }

    #[test]
    fn commit_adopts_exactly_the_previewed_state() {
        let mut team = mission(3, 11);
        let previewed = team.preview(AgentChange::Gain).unwrap();
        team.commit(AgentChange::Gain).unwrap();
        assert_eq!(team.count(), 4);
        assert_eq!(team.value(), previewed);
    }

    #[test]
    fn commit_without_preview_is_an_error() {
        let mut team = mission(3, 13);
        assert!(matches!(
            team.commit(AgentChange::Loss),
            Err(MissionError::MissingPreview(AgentChange::Loss))
        ));
    }

    #[test]
    fn losing_the_last_robot_lands_on_the_empty_cost() {
        let mut team = mission(1, 3);
        let after = team.preview(AgentChange::Loss).unwrap();
        assert_eq!(after, -team.grid().empty_team_cost());
        team.commit(AgentChange::Loss).unwrap();
        assert_eq!(team.count(), 0);
        // An empty team cannot lose again but can receive.
        assert!(matches!(
            team.preview(AgentChange::Loss),
            Err(MissionError::OutOfDomain(0))
        ));
        let regained = team.preview(AgentChange::Gain).unwrap();
        assert!(regained > team.value());
    }
}
