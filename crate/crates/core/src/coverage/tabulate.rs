//! Freezes the coverage mission into a pure table `F(n) = -min-cost CVT`
//! so the brute-force oracle (and anything else that needs a deterministic
//! function of the count alone) can consume it.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lloyd::{lloyd, separate_coincident, LloydParams};
use super::{CoverageError, CoverageGrid};
use crate::eval::TabulatedEvaluator;

#[derive(Debug, Clone, PartialEq)]
pub struct TabulateParams {
    pub n_max: u32,
    /// Lloyd initializations tried per count; the cheapest CVT wins.
    pub restarts: u32,
    pub seed: u64,
    pub lloyd: LloydParams,
    /// Free-text note recorded in the table's provenance header.
    pub label: String,
}

/// Tabulates `F(n) = -L(n, c)` at the best CVT found for each `n` in
/// `1..=n_max`.
///
/// One restart per count extends the previous count's best CVT with a robot
/// at the worst-covered cell center; Lloyd descent from that start is
/// guaranteed to beat the previous cost, so the table is strictly
/// increasing by construction and the nested starts keep its increments
/// smooth. The remaining restarts draw uniform seeded positions.
pub fn tabulate_coverage_evaluator(
    grid: &CoverageGrid,
    params: &TabulateParams,
) -> Result<TabulatedEvaluator, CoverageError> {
    if params.n_max < 1 || params.restarts < 1 {
        return Err(CoverageError::InvalidDomain(format!(
            "tabulation needs n_max >= 1 and restarts >= 1, got {} and {}",
            params.n_max, params.restarts
        )));
    }
    let domain = *grid.domain();
    let mut values = Vec::with_capacity(params.n_max as usize);
    let mut previous_best: Option<Vec<[f64; 2]>> = None;
    for n in 1..=params.n_max {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(u64::from(n));
        let mut best: Option<(f64, Vec<[f64; 2]>)> = None;
        let mut randoms = params.restarts;
        if let Some(prev) = &previous_best {
            let mut start = prev.clone();
            start.push(worst_covered_cell(prev, grid));
            separate_coincident(&mut start, grid)?;
            let result = lloyd(&start, grid, &params.lloyd)?;
            best = Some((result.cost, result.positions));
            randoms -= 1;
        }
        for _ in 0..randoms {
            let start: Vec<[f64; 2]> = (0..n)
                .map(|_| {
                    [
                        rng.random_range(domain.x_min..domain.x_max),
                        rng.random_range(domain.y_min..domain.y_max),
                    ]
                })
                .collect();
            let result = lloyd(&start, grid, &params.lloyd)?;
            if best.as_ref().is_none_or(|(c, _)| result.cost < *c) {
                best = Some((result.cost, result.positions));
            }
        }
        let (cost, positions) = best.expect("restarts >= 1");
        values.push(-cost);
        previous_best = Some(positions);
    }
    let provenance = format!(
        "{}\ncoverage cvt table: grid {}x{} on [{}, {}] x [{}, {}], restarts {}, seed {}",
        params.label,
        domain.nx,
        domain.ny,
        domain.x_min,
        domain.x_max,
        domain.y_min,
        domain.y_max,
        params.restarts,
        params.seed,
    );
    Ok(TabulatedEvaluator::new(1, values, provenance.trim())?)
}

/// Center of the grid cell contributing the most residual cost, i.e. the
/// spot an extra robot helps most. Deterministic (ties to the lowest cell
/// index), and strictly away from every existing robot whenever any cell
/// carries residual cost.
fn worst_covered_cell(positions: &[[f64; 2]], grid: &CoverageGrid) -> [f64; 2] {
    let mut best_idx = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (idx, (&q, &phi)) in grid.centers().iter().zip(grid.phi()).enumerate() {
        let mut d = f64::INFINITY;
        for &p in positions {
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            d = d.min(dx * dx + dy * dy);
        }
        let score = d * phi;
        if score > best_score {
            best_score = score;
            best_idx = idx;
        }
    }
    grid.centers()[best_idx]
}
