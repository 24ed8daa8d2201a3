//! Lloyd's algorithm as a discrete fixed-point iteration: assign cells to
//! their nearest robot, move every robot to its region centroid, repeat.
//! Each step is non-increasing in the locational cost, and a fixed point is
//! a centroidal Voronoi tessellation.

use serde::{Deserialize, Serialize};

use super::voronoi::{assign_voronoi, centroids, locational_cost};
use super::{CoverageError, CoverageGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LloydParams {
    /// Convergence threshold on the largest single-robot displacement.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for LloydParams {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 500,
        }
    }
}

/// A converged (or iteration-capped) robot configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvtResult {
    pub positions: Vec<[f64; 2]>,
    /// Locational cost of `positions`, recomputed at the final state.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Robots stacked in the same grid cell starve each other of cells, which
/// makes the centroid update degenerate. Nudge later-indexed duplicates by
/// half a cell (deterministically) until every robot has its own cell.
pub(crate) fn separate_coincident(
    positions: &mut [[f64; 2]],
    grid: &CoverageGrid,
) -> Result<(), CoverageError> {
    let domain = grid.domain();
    let hx = domain.cell_width() / 2.0;
    let hy = domain.cell_height() / 2.0;
    'outer: for attempt in 0..16 {
        let mut seen = std::collections::HashMap::new();
        for (i, &p) in positions.iter().enumerate() {
            let cell = domain.cell_of(p);
            if let Some(&_first) = seen.get(&cell) {
                let step = (attempt + 1) as f64;
                let mut p = positions[i];
                p[0] += if p[0] + step * hx <= domain.x_max {
                    step * hx
                } else {
                    -step * hx
                };
                p[1] += if p[1] + step * hy <= domain.y_max {
                    step * hy
                } else {
                    -step * hy
                };
                positions[i] = domain.clamp(p);
                continue 'outer;
            }
            seen.insert(cell, i);
        }
        return Ok(());
    }
    Err(CoverageError::CoincidentRobots)
}

/// One assignment-and-recenter sweep. Positions must already be separated;
/// a robot left without cells is reported as a degenerate region.
pub fn lloyd_step(
    positions: &[[f64; 2]],
    grid: &CoverageGrid,
) -> Result<Vec<[f64; 2]>, CoverageError> {
    let assignment = assign_voronoi(positions, grid);
    centroids(&assignment, positions.len(), grid)
}

/// Iterates [`lloyd_step`] until the largest displacement drops below
/// `params.tol` or the iteration cap is reached.
pub fn lloyd(
    positions: &[[f64; 2]],
    grid: &CoverageGrid,
    params: &LloydParams,
) -> Result<CvtResult, CoverageError> {
    if positions.is_empty() {
        return Ok(CvtResult {
            positions: Vec::new(),
            cost: grid.empty_team_cost(),
            iterations: 0,
            converged: true,
        });
    }
    let mut current = positions.to_vec();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        separate_coincident(&mut current, grid)?;
        let next = lloyd_step(&current, grid)?;
        iterations += 1;
        let displacement = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0f64, f64::max);
        current = next;
        if displacement < params.tol {
            converged = true;
            break;
        }
    }
    let cost = locational_cost(&current, grid);
    Ok(CvtResult {
        positions: current,
        cost,
        iterations,
        converged,
    })
}
