//! Voronoi coverage control as a team mission: density fields over a
//! rectangular domain, grid-discretized locational cost, Lloyd's algorithm,
//! and the coverage-backed mission evaluator built from them.
//!
//! Voronoi cells are realized as a nearest-robot assignment over grid cell
//! centers rather than exact polygons; every consumer is an integral over a
//! cell, so midpoint quadrature on the grid is all that is needed.

mod lloyd;
mod mission;
mod tabulate;
mod voronoi;

pub use lloyd::{lloyd, lloyd_step, CvtResult, LloydParams};
pub use mission::CoverageMission;
pub use tabulate::{tabulate_coverage_evaluator, TabulateParams};
pub use voronoi::{
    assign_voronoi, centroids, cost_gradient, locational_cost, region_stats, RegionStats,
    VoronoiAssignment,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoverageError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("density must be positive everywhere; cell {cell} has {value}")]
    NonPositiveDensity { cell: usize, value: f64 },
    #[error("tabulated density has {got} values but the grid has {expected} cells")]
    DensitySize { got: usize, expected: usize },
    #[error("robot {robot} owns no grid cells (degenerate region)")]
    DegenerateRegion { robot: usize },
    #[error("could not separate robots stacked at the same grid position")]
    CoincidentRobots,
    #[error("no pending state for the requested commit")]
    NoPendingState,
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
}

/// Axis-aligned rectangular domain with its integration grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Domain {
    pub fn new(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self, CoverageError> {
        if !(x_min < x_max) || !(y_min < y_max) {
            return Err(CoverageError::InvalidDomain(format!(
                "degenerate bounds [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(CoverageError::InvalidDomain(format!(
                "grid must be at least 2x2, got {nx}x{ny}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        })
    }

    pub fn cell_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn cell_height(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_width() * self.cell_height()
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn diameter_squared(&self) -> f64 {
        let dx = self.x_max - self.x_min;
        let dy = self.y_max - self.y_min;
        dx * dx + dy * dy
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.x_min, self.x_max),
            p[1].clamp(self.y_min, self.y_max),
        ]
    }

    /// Center of grid cell `(ix, iy)`.
    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.x_min + self.cell_width() * (ix as f64 + 0.5),
            self.y_min + self.cell_height() * (iy as f64 + 0.5),
        ]
    }

    /// Grid cell containing the point (clamped to the grid).
    pub fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let ix = ((p[0] - self.x_min) / self.cell_width()).floor() as isize;
        let iy = ((p[1] - self.y_min) / self.cell_height()).floor() as isize;
        (
            ix.clamp(0, self.nx as isize - 1) as usize,
            iy.clamp(0, self.ny as isize - 1) as usize,
        )
    }
}

impl Default for Domain {
    /// `[-1, 1]^2` at 100x100 resolution.
    fn default() -> Self {
        Domain::new(-1.0, 1.0, -1.0, 1.0, 100, 100).expect("valid default domain")
    }
}

/// Importance density over the domain, strictly positive everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityField {
    /// `phi(q) = exp(-(q_x^2 / sigma_x^2 + q_y^2 / sigma_y^2))`
    Gaussian { sigma_x: f64, sigma_y: f64 },
    /// Per-grid-cell values in row-major (y-outer) order.
    Tabulated { values: Vec<f64> },
}

/// `exp(-(q_x^2 / sigma_x^2 + q_y^2 / sigma_y^2))`
pub fn density_gaussian(q: [f64; 2], sigma_x: f64, sigma_y: f64) -> f64 {
    (-(q[0] * q[0] / (sigma_x * sigma_x) + q[1] * q[1] / (sigma_y * sigma_y))).exp()
}

/// A domain with its density evaluated once per grid cell. All coverage
/// computations run against this.
///
/// Cells are indexed `iy * nx + ix` (row-major, y outer).
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    domain: Domain,
    centers: Vec<[f64; 2]>,
    phi: Vec<f64>,
    cell_area: f64,
    /// Integral of the density over the domain.
    mass: f64,
}

impl CoverageGrid {
    pub fn new(domain: Domain, density: &DensityField) -> Result<Self, CoverageError> {
        let n = domain.cell_count();
        let mut centers = Vec::with_capacity(n);
        let mut phi = Vec::with_capacity(n);
        match density {
            DensityField::Gaussian { sigma_x, sigma_y } => {
                if !(*sigma_x > 0.0) || !(*sigma_y > 0.0) {
                    return Err(CoverageError::InvalidDomain(format!(
                        "gaussian widths must be positive, got ({sigma_x}, {sigma_y})"
                    )));
                }
                for iy in 0..domain.ny {
                    for ix in 0..domain.nx {
                        let q = domain.cell_center(ix, iy);
                        centers.push(q);
                        phi.push(density_gaussian(q, *sigma_x, *sigma_y));
                    }
                }
            }
            DensityField::Tabulated { values } => {
                if values.len() != n {
                    return Err(CoverageError::DensitySize {
                        got: values.len(),
                        expected: n,
                    });
                }
                for iy in 0..domain.ny {
                    for ix in 0..domain.nx {
                        centers.push(domain.cell_center(ix, iy));
                    }
                }
                phi.extend_from_slice(values);
            }
        }
        if let Some((cell, &value)) = phi.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(CoverageError::NonPositiveDensity { cell, value });
        }
        let cell_area = domain.cell_area();
        let mass = phi.iter().sum::<f64>() * cell_area;
        Ok(Self {
            domain,
            centers,
            phi,
            cell_area,
            mass,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    pub fn cell_count(&self) -> usize {
        self.centers.len()
    }

    /// The locational cost assigned to an empty team: every point priced at
    /// the squared domain diameter, the worst any robot could do.
    pub fn empty_team_cost(&self) -> f64 {
        self.domain.diameter_squared() * self.mass
    }
}
