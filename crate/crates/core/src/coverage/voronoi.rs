//! Nearest-robot partition of the grid and the integrals taken over it:
//! locational cost, region masses, centroids, and the cost gradient.

use super::{CoverageError, CoverageGrid};

fn dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Which robot owns each grid cell. Empty when there are no robots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoronoiAssignment {
    owner: Vec<u32>,
}

impl VoronoiAssignment {
    /// Owner index per cell, in grid order.
    pub fn owner(&self) -> &[u32] {
        &self.owner
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }
}

/// Assigns every grid cell to its nearest robot (squared Euclidean distance
/// to the cell center). Distance ties go to the lowest robot index, which
/// realizes the measure-zero cell overlap deterministically.
pub fn assign_voronoi(positions: &[[f64; 2]], grid: &CoverageGrid) -> VoronoiAssignment {
    if positions.is_empty() {
        return VoronoiAssignment { owner: Vec::new() };
    }
    let owner = grid
        .centers()
        .iter()
        .map(|&q| {
            let mut best = 0u32;
            let mut best_d = dist_sq(positions[0], q);
            for (i, &p) in positions.iter().enumerate().skip(1) {
                let d = dist_sq(p, q);
                if d < best_d {
                    best = i as u32;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    VoronoiAssignment { owner }
}

/// Grid-discretized locational cost: the density-weighted squared distance
/// from every cell center to its nearest robot,
/// `sum_cells min_i |p_i - q|^2 phi(q) dA`.
///
/// With no robots this falls back to pricing every cell at the squared
/// domain diameter, keeping the cost finite for empty teams.
pub fn locational_cost(positions: &[[f64; 2]], grid: &CoverageGrid) -> f64 {
    if positions.is_empty() {
        return grid.empty_team_cost();
    }
    let mut total = 0.0;
    for (&q, &phi) in grid.centers().iter().zip(grid.phi()) {
        let mut best = dist_sq(positions[0], q);
        for &p in &positions[1..] {
            let d = dist_sq(p, q);
            if d < best {
                best = d;
            }
        }
        total += best * phi;
    }
    total * grid.cell_area()
}

/// Per-region density integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionStats {
    /// `m_i = integral of phi over region i`.
    pub masses: Vec<f64>,
    /// `s_i = integral of q phi over region i`.
    pub moments: Vec<[f64; 2]>,
}

impl RegionStats {
    /// Density-weighted centroid of region `i`; `None` if it owns no cells.
    pub fn centroid(&self, i: usize) -> Option<[f64; 2]> {
        (self.masses[i] > 0.0)
            .then(|| [self.moments[i][0] / self.masses[i], self.moments[i][1] / self.masses[i]])
    }
}

/// Accumulates mass and first moment of the density over each robot's cells.
pub fn region_stats(positions: &[[f64; 2]], grid: &CoverageGrid) -> RegionStats {
    let assignment = assign_voronoi(positions, grid);
    let mut masses = vec![0.0; positions.len()];
    let mut moments = vec![[0.0, 0.0]; positions.len()];
    for ((&q, &phi), &owner) in grid
        .centers()
        .iter()
        .zip(grid.phi())
        .zip(assignment.owner())
    {
        let i = owner as usize;
        masses[i] += phi;
        moments[i][0] += q[0] * phi;
        moments[i][1] += q[1] * phi;
    }
    let area = grid.cell_area();
    for i in 0..positions.len() {
        masses[i] *= area;
        moments[i][0] *= area;
        moments[i][1] *= area;
    }
    RegionStats { masses, moments }
}

/// Density-weighted centroid of each robot's region under the given
/// assignment. Errors if any of the `n_robots` regions is empty.
pub fn centroids(
    assignment: &VoronoiAssignment,
    n_robots: usize,
    grid: &CoverageGrid,
) -> Result<Vec<[f64; 2]>, CoverageError> {
    let mut masses = vec![0.0; n_robots];
    let mut moments = vec![[0.0, 0.0]; n_robots];
    for ((&q, &phi), &owner) in grid
        .centers()
        .iter()
        .zip(grid.phi())
        .zip(assignment.owner())
    {
        let i = owner as usize;
        masses[i] += phi;
        moments[i][0] += q[0] * phi;
        moments[i][1] += q[1] * phi;
    }
    (0..n_robots)
        .map(|i| {
            if masses[i] > 0.0 {
                Ok([moments[i][0] / masses[i], moments[i][1] / masses[i]])
            } else {
                Err(CoverageError::DegenerateRegion { robot: i })
            }
        })
        .collect()
}

/// Gradient of the locational cost with respect to each robot position,
/// `2 m_i (p_i - c_i)` with the region mass and centroid taken over the
/// robot's current cells.
pub fn cost_gradient(positions: &[[f64; 2]], grid: &CoverageGrid) -> Vec<[f64; 2]> {
    let stats = region_stats(positions, grid);
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            [
                2.0 * (stats.masses[i] * p[0] - stats.moments[i][0]),
                2.0 * (stats.masses[i] * p[1] - stats.moments[i][1]),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::{DensityField, Domain};
    use approx::assert_relative_eq;

    fn uniform_grid(nx: usize, ny: usize) -> CoverageGrid {
        let d = Domain::new(-1.0, 1.0, -1.0, 1.0, nx, ny).unwrap();
        CoverageGrid::new(
            d,
            &DensityField::Tabulated {
                values: vec![1.0; nx * ny],
            },
        )
        .unwrap()
    }

    fn gaussian_grid(nx: usize, ny: usize, s: f64) -> CoverageGrid {
        let d = Domain::new(-1.0, 1.0, -1.0, 1.0, nx, ny).unwrap();
        CoverageGrid::new(
            d,
            &DensityField::Gaussian {
                sigma_x: s,
                sigma_y: s,
            },
        )
        .unwrap()
    }

    #[test]
    fn single_robot_owns_everything() {
        let g = uniform_grid(10, 10);
        let a = assign_voronoi(&[[0.2, -0.3]], &g);
        assert!(a.owner().iter().all(|&o| o == 0));
    }

    #[test]
    fn two_robots_split_on_the_bisector() {
        // Even column count: no center sits on the bisector, clean 50/50.
        let g = uniform_grid(10, 10);
        let a = assign_voronoi(&[[-0.5, 0.0], [0.5, 0.0]], &g);
        let left = a.owner().iter().filter(|&&o| o == 0).count();
        assert_eq!(left, 50);
        // Odd column count: the middle column is equidistant and the tie
        // goes to the lower-indexed robot.
        let g = uniform_grid(11, 11);
        let a = assign_voronoi(&[[-0.5, 0.0], [0.5, 0.0]], &g);
        let left = a.owner().iter().filter(|&&o| o == 0).count();
        assert_eq!(left, 6 * 11);
    }

    #[test]
    fn assignment_is_nearest() {
        let g = gaussian_grid(20, 20, 0.5);
        let positions = [[-0.4, -0.1], [0.3, 0.6], [0.1, -0.7]];
        let a = assign_voronoi(&positions, &g);
        for (&q, &o) in g.centers().iter().zip(a.owner()) {
            let d_owner = dist_sq(positions[o as usize], q);
            for &p in &positions {
                assert!(d_owner <= dist_sq(p, q) + 1e-18);
            }
        }
    }

    #[test]
    fn every_cell_owned_exactly_once() {
        let g = gaussian_grid(25, 25, 0.8);
        let positions = [[-0.4, -0.1], [0.3, 0.6], [0.1, -0.7], [0.0, 0.0]];
        let a = assign_voronoi(&positions, &g);
        assert_eq!(a.owner().len(), g.cell_count());
        assert!(a.owner().iter().all(|&o| (o as usize) < positions.len()));
    }

    #[test]
    fn cost_matches_direct_summation() {
        // Independent route: accumulate over the explicit assignment rather
        // than the min-form the implementation uses.
        let g = gaussian_grid(30, 30, 0.6);
        let positions = [[-0.5, 0.2], [0.4, -0.4], [0.1, 0.7]];
        let a = assign_voronoi(&positions, &g);
        let mut expected = 0.0;
        for ((&q, &phi), &o) in g.centers().iter().zip(g.phi()).zip(a.owner()) {
            expected += dist_sq(positions[o as usize], q) * phi;
        }
        expected *= g.cell_area();
        assert_relative_eq!(
            locational_cost(&positions, &g),
            expected,
            max_relative = 1e-13
        );
    }

    #[test]
    fn centered_robot_cost_is_the_second_moment() {
        let g = uniform_grid(16, 16);
        // Uniform density, centroid at the origin: the cost is the grid's
        // second moment about the center.
        let moment: f64 = g
            .centers()
            .iter()
            .map(|&q| (q[0] * q[0] + q[1] * q[1]) * g.cell_area())
            .sum();
        assert_relative_eq!(
            locational_cost(&[[0.0, 0.0]], &g),
            moment,
            max_relative = 1e-13
        );
    }

    #[test]
    fn robots_on_every_cell_center_zero_the_cost() {
        let g = uniform_grid(4, 4);
        let positions: Vec<[f64; 2]> = g.centers().to_vec();
        assert_eq!(locational_cost(&positions, &g), 0.0);
    }

    #[test]
    fn adding_a_robot_strictly_lowers_cost() {
        let g = gaussian_grid(40, 40, 0.7);
        let mut positions = vec![[-0.3, 0.3], [0.5, -0.5]];
        let before = locational_cost(&positions, &g);
        positions.push([0.6, 0.6]);
        assert!(locational_cost(&positions, &g) < before);
    }

    #[test]
    fn empty_team_cost_is_the_worst_case() {
        let g = uniform_grid(10, 10);
        assert_relative_eq!(
            locational_cost(&[], &g),
            8.0 * 4.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn centroid_of_symmetric_block_is_its_center() {
        let g = uniform_grid(10, 10);
        // Two robots split the square at x = 0; each owns a 1x2 block.
        let a = assign_voronoi(&[[-0.5, 0.0], [0.5, 0.0]], &g);
        let c = centroids(&a, 2, &g).unwrap();
        assert_relative_eq!(c[0][0], -0.5, epsilon = 1e-12);
        assert_relative_eq!(c[0][1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(c[1][0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_robot_centroid_tracks_the_density_peak() {
        let g = gaussian_grid(100, 100, 0.5);
        let a = assign_voronoi(&[[0.7, -0.7]], &g);
        let c = centroids(&a, 1, &g).unwrap();
        assert!(c[0][0].abs() < g.domain().cell_width());
        assert!(c[0][1].abs() < g.domain().cell_height());
    }

    #[test]
    fn centroids_stay_inside_the_owned_bounding_box() {
        let g = gaussian_grid(30, 30, 0.4);
        let positions = [[-0.6, -0.6], [0.2, 0.1], [0.7, 0.7]];
        let a = assign_voronoi(&positions, &g);
        let c = centroids(&a, 3, &g).unwrap();
        for i in 0..3 {
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for (&q, &o) in g.centers().iter().zip(a.owner()) {
                if o as usize == i {
                    for k in 0..2 {
                        lo[k] = lo[k].min(q[k]);
                        hi[k] = hi[k].max(q[k]);
                    }
                }
            }
            for k in 0..2 {
                assert!(c[i][k] >= lo[k] - 1e-12 && c[i][k] <= hi[k] + 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_region_is_an_error() {
        let g = uniform_grid(6, 6);
        // Robot 1 sits exactly on robot 0: ties all go to robot 0.
        let a = assign_voronoi(&[[0.1, 0.1], [0.1, 0.1]], &g);
        assert!(matches!(
            centroids(&a, 2, &g),
            Err(CoverageError::DegenerateRegion { robot: 1 })
        ));
    }

    #[test]
    fn gradient_vanishes_at_a_centroid() {
        let g = uniform_grid(20, 20);
        let grad = cost_gradient(&[[0.0, 0.0]], &g);
        assert!(grad[0][0].abs() < 1e-12 && grad[0][1].abs() < 1e-12);
    }
}
