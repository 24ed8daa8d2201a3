//! Brute-force ground truth: exhaustive enumeration of the allocation
//! simplex and exact maximization of the global objective over it.

pub mod harness;

use rand::Rng;

use crate::collab::global_objective;
use crate::eval::EvalError;
use crate::team::{Allocation, TeamError, Teams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("infeasible space: {total} agents cannot fill {m} teams of at least {min}")]
    Infeasible { m: u32, total: u32, min: u32 },
    #[error(
        "space too large for exhaustive search ({m} teams, {total} agents; limits {max_m}/{max_total})"
    )]
    TooLarge {
        m: u32,
        total: u32,
        max_m: u32,
        max_total: u32,
    },
    #[error("allocation count overflows")]
    CountOverflow,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Team(#[from] TeamError),
}

/// The simplex of integer allocations: `m` parts, each at least
/// `min_per_team`, summing to `total`.
///
/// Construction refuses spaces beyond a small hard bound; the point of the
/// oracle is exhaustive certainty on small instances, not scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllocationSpace {
    m: u32,
    total: u32,
    min_per_team: u32,
}

impl AllocationSpace {
    pub const MAX_TEAMS: u32 = 5;
    pub const MAX_AGENTS: u32 = 20;

    pub fn new(m: u32, total: u32, min_per_team: u32) -> Result<Self, OracleError> {
        if m == 0 || u64::from(total) < u64::from(m) * u64::from(min_per_team) {
            return Err(OracleError::Infeasible {
                m,
                total,
                min: min_per_team,
            });
        }
        if m > Self::MAX_TEAMS || total > Self::MAX_AGENTS {
            return Err(OracleError::TooLarge {
                m,
                total,
                max_m: Self::MAX_TEAMS,
                max_total: Self::MAX_AGENTS,
            });
        }
        Ok(Self {
            m,
            total,
            min_per_team,
        })
    }

    pub fn team_count(&self) -> u32 {
        self.m
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn min_per_team(&self) -> u32 {
        self.min_per_team
    }

    /// Number of allocations: `C(total - m*min + m - 1, m - 1)`.
    pub fn size(&self) -> u64 {
        let free = u64::from(self.total) - u64::from(self.m) * u64::from(self.min_per_team);
        binomial(free + u64::from(self.m) - 1, u64::from(self.m) - 1)
            .expect("within construction limits")
    }

    /// Every allocation exactly once, in lexicographic order.
    pub fn iter(&self) -> Compositions {
        Compositions::new(self.m as usize, self.total, self.min_per_team)
    }
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result.checked_mul(u128::from(n - i))?;
        result /= u128::from(i + 1);
    }
    u64::try_from(result).ok()
}

/// Lexicographic stream over the compositions of `total` into `m` parts,
/// each at least `min`.
pub struct Compositions {
    parts: Vec<u32>,
    min: u32,
    done: bool,
}

impl Compositions {
    fn new(m: usize, total: u32, min: u32) -> Self {
        // First composition: everything not pinned by the floor goes to the
        // last part.
        let mut parts = vec![min; m];
        parts[m - 1] = total - min * (m as u32 - 1);
        Self {
            parts,
            min,
            done: false,
        }
    }

    fn advance(&mut self) {
        let m = self.parts.len();
        // Find the rightmost part (excluding the last) that can take one
        // more from the suffix, then reset the suffix to its smallest
        // lexicographic arrangement.
        for i in (0..m - 1).rev() {
            let suffix: u32 = self.parts[i + 1..].iter().sum();
            let needed = self.min * (m - 1 - i) as u32;
            if suffix > needed {
                self.parts[i] += 1;
                let remaining = suffix - 1;
                for p in &mut self.parts[i + 1..m - 1] {
                    *p = self.min;
                }
                self.parts[m - 1] = remaining - self.min * (m - 2 - i) as u32;
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for Compositions {
    type Item = Allocation;

    fn next(&mut self) -> Option<Allocation> {
        if self.done {
            return None;
        }
        let current = Allocation::new(self.parts.clone()).expect("valid composition");
        self.advance();
        Some(current)
    }
}

/// Exhaustively maximizes the global objective over the space. Among ties
/// the lexicographically smallest allocation is returned.
pub fn brute_force_optimal(
    teams: &Teams,
    space: &AllocationSpace,
) -> Result<(Allocation, f64), OracleError> {
    if teams.len() != space.team_count() as usize {
        return Err(TeamError::CountMismatch {
            counts: space.team_count() as usize,
            teams: teams.len(),
        }
        .into());
    }
    let mut best: Option<(Allocation, f64)> = None;
    for alloc in space.iter() {
        let value = global_objective(teams, &alloc)?;
        match &best {
            Some((_, b)) if value <= *b => {}
            _ => best = Some((alloc, value)),
        }
    }
    best.ok_or(OracleError::Infeasible {
        m: space.team_count(),
        total: space.total(),
        min: space.min_per_team(),
    })
}

/// Draws an allocation uniformly from the compositions of `total` into `m`
/// parts of at least `min`, by unranking a uniform index. Not subject to
/// the exhaustive-search size limits, but still bounded by what fits exact
/// counting arithmetic.
pub fn sample_allocation(
    m: u32,
    total: u32,
    min: u32,
    rng: &mut impl Rng,
) -> Result<Allocation, OracleError> {
    if m == 0 || u64::from(total) < u64::from(m) * u64::from(min) {
        return Err(OracleError::Infeasible { m, total, min });
    }
    let count_from = |teams_left: u64, agents_free: u64| -> Option<u64> {
        binomial(agents_free + teams_left - 1, teams_left - 1)
    };
    let mut free = u64::from(total) - u64::from(m) * u64::from(min);
    let total_count = count_from(u64::from(m), free).ok_or(OracleError::CountOverflow)?;
    let mut rank = rng.random_range(0..total_count);
    let mut counts = Vec::with_capacity(m as usize);
    for team in 0..m {
        let teams_left = u64::from(m - team);
        if teams_left == 1 {
            counts.push(min + u32::try_from(free).map_err(|_| OracleError::CountOverflow)?);
            break;
        }
        let mut extra = 0u64;
        loop {
            let below = count_from(teams_left - 1, free - extra).ok_or(OracleError::CountOverflow)?;
            if rank < below {
                break;
            }
            rank -= below;
            extra += 1;
        }
        counts.push(min + u32::try_from(extra).map_err(|_| OracleError::CountOverflow)?);
        free -= extra;
    }
    Ok(Allocation::new(counts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{make_analytic, AnalyticKind};
    use crate::team::{TeamId, TeamSpec};
    use approx::assert_relative_eq;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn sqrt_teams(weights: &[f64]) -> Teams {
        Teams::new(
            weights
                .iter()
                .enumerate()
                .map(|(i, &w)| {
                    TeamSpec::new(
                        TeamId(i as u32 + 1),
                        w,
                        Arc::new(make_analytic(AnalyticKind::Sqrt).unwrap()),
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn two_team_enumeration_by_hand() {
        let space = AllocationSpace::new(2, 3, 1).unwrap();
        let all: Vec<Vec<u32>> = space.iter().map(|a| a.counts().to_vec()).collect();
        assert_eq!(all, vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(space.size(), 2);
    }

    #[test]
    fn three_team_enumeration_counts_and_order() {
        let space = AllocationSpace::new(3, 6, 1).unwrap();
        let all: Vec<Vec<u32>> = space.iter().map(|a| a.counts().to_vec()).collect();
        assert_eq!(all.len(), 10);
        assert_eq!(space.size(), 10);
        assert_eq!(all.first().unwrap(), &vec![1, 1, 4]);
        assert_eq!(all.last().unwrap(), &vec![4, 1, 1]);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted, "not lexicographic");
        sorted.dedup();
        assert_eq!(sorted.len(), 10, "duplicates yielded");
    }

    #[test]
    fn single_team_space_is_trivial() {
        let space = AllocationSpace::new(1, 6, 1).unwrap();
        let all: Vec<_> = space.iter().collect();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].counts(), &[6]);
    }

    #[test]
    fn zero_floor_enumeration() {
        let space = AllocationSpace::new(3, 2, 0).unwrap();
        assert_eq!(space.size(), 6);
        assert_eq!(space.iter().count(), 6);
        assert_eq!(space.iter().next().unwrap().counts(), &[0, 0, 2]);
    }

    #[test]
    fn space_limits_are_enforced() {
        assert!(matches!(
            AllocationSpace::new(6, 10, 1),
            Err(OracleError::TooLarge { .. })
        ));
        assert!(matches!(
            AllocationSpace::new(3, 21, 1),
            Err(OracleError::TooLarge { .. })
        ));
        assert!(matches!(
            AllocationSpace::new(3, 2, 1),
            Err(OracleError::Infeasible { .. })
        ));
    }

    #[test]
    fn brute_force_balanced_sqrt() {
        let teams = sqrt_teams(&[1.0, 1.0, 1.0]);
        let space = AllocationSpace::new(3, 6, 1).unwrap();
        let (alloc, value) = brute_force_optimal(&teams, &space).unwrap();
        assert_eq!(alloc.counts(), &[2, 2, 2]);
        assert_relative_eq!(value, 3.0 * 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn brute_force_weighted_pair() {
        let teams = sqrt_teams(&[1.0, 4.0]);
        let space = AllocationSpace::new(2, 4, 1).unwrap();
        let (alloc, value) = brute_force_optimal(&teams, &space).unwrap();
        assert_eq!(alloc.counts(), &[1, 3]);
        assert_relative_eq!(value, 1.0 + 4.0 * 3f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn value_ties_resolve_to_the_lexicographically_smallest() {
        // Identical teams with an odd total: (2, 3) and (3, 2) share the
        // optimal value.
        let teams = sqrt_teams(&[1.0, 1.0]);
        let space = AllocationSpace::new(2, 5, 1).unwrap();
        let (alloc, _) = brute_force_optimal(&teams, &space).unwrap();
        assert_eq!(alloc.counts(), &[2, 3]);
    }

    #[test]
    fn equal_split_wins_for_identical_teams() {
        for m in 2..=4u32 {
            let teams = sqrt_teams(&vec![1.0; m as usize]);
            let n = m * 3;
            let space = AllocationSpace::new(m, n, 1).unwrap();
            let (alloc, _) = brute_force_optimal(&teams, &space).unwrap();
            assert!(alloc.counts().iter().all(|&c| c == 3), "m={m}: {alloc}");
        }
    }

    #[test]
    fn sampling_is_uniform_enough_and_respects_the_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let space = AllocationSpace::new(3, 6, 1).unwrap();
        let mut seen = std::collections::HashMap::new();
        for _ in 0..5000 {
            let a = sample_allocation(3, 6, 1, &mut rng).unwrap();
            assert_eq!(a.total(), 6);
            assert!(a.min_count() >= 1);
            *seen.entry(a.counts().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(seen.len() as u64, space.size());
        for (alloc, count) in &seen {
            // Expectation 500 per composition; allow wide slack.
            assert!(*count > 300 && *count < 700, "{alloc:?}: {count}");
        }
    }

    #[test]
    fn sampling_handles_large_totals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = sample_allocation(4, 1000, 1, &mut rng).unwrap();
        assert_eq!(a.total(), 1000);
        assert!(a.min_count() >= 1);
    }
}
