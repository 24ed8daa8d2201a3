//! Randomized invariant suites run as one batch, reporting pass counts and
//! (shrunk) counterexamples. The same suites back the acceptance tests.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collab::{run_collaboration, CollabConfig};
use crate::coverage::{locational_cost, CoverageGrid, DensityField, Domain};
use crate::eval::{make_analytic, AnalyticKind, MissionEvaluator};
use crate::hamilton::{marginal_benefit, marginal_cost};
use crate::oracle::{brute_force_optimal, sample_allocation, AllocationSpace};
use crate::team::{TeamGraph, TeamId, TeamSpec, Teams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarnessConfig {
    /// Randomized team pairs for the transfer-direction suites.
    pub trials: u32,
    /// Randomized robot configurations for the coverage suite.
    pub coverage_trials: u32,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            coverage_trials: 200,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub trials: u64,
    pub failures: u64,
    pub counterexample: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub suites: Vec<SuiteReport>,
}

impl HarnessReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.name == name)
    }
}

impl fmt::Display for HarnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            writeln!(
                f,
                "[{}] {}: {} trials, {} failures",
                if s.passed() { "PASS" } else { "FAIL" },
                s.name,
                s.trials,
                s.failures
            )?;
            if let Some(ce) = &s.counterexample {
                writeln!(f, "       counterexample: {ce}")?;
            }
        }
        Ok(())
    }
}

/// A randomly drawn evaluator plus a printable description and the largest
/// count at which (n-1, n, n+1) are all in its domain.
#[derive(Clone)]
struct RandomEvaluator {
    evaluator: Arc<dyn MissionEvaluator>,
    describe: String,
    max_count: u32,
}

fn random_evaluator(rng: &mut ChaCha8Rng) -> RandomEvaluator {
    let kind = match rng.random_range(0..3) {
        0 => AnalyticKind::Sqrt,
        1 => AnalyticKind::Log1p,
        _ => AnalyticKind::SaturatingExp {
            tau: rng.random_range(0.5..8.0),
        },
    };
    let ev = make_analytic(kind).expect("valid parameters");
    let max_count = ev.domain_max().map_or(50, |cap| cap.saturating_sub(1)).min(50);
    RandomEvaluator {
        evaluator: Arc::new(ev),
        describe: format!("{kind:?}"),
        max_count,
    }
}

#[derive(Clone)]
struct PairCase {
    a: RandomEvaluator,
    b: RandomEvaluator,
    w_a: f64,
    w_b: f64,
    n_a: u32,
    n_b: u32,
}

fn random_pair(rng: &mut ChaCha8Rng) -> PairCase {
    let a = random_evaluator(rng);
    let b = random_evaluator(rng);
    let n_a = rng.random_range(1..=a.max_count);
    let n_b = rng.random_range(1..=b.max_count);
    PairCase {
        a,
        b,
        w_a: rng.random_range(0.1..20.0),
        w_b: rng.random_range(0.1..20.0),
        n_a,
        n_b,
    }
}

impl PairCase {
    /// Whether Hamilton's rule holds in both directions at once, which the
    /// uni-directionality theorem forbids.
    fn violates_unidirectionality(&self) -> bool {
        let allows = |donor: &RandomEvaluator,
                      w_d: f64,
                      n_d: u32,
                      recipient: &RandomEvaluator,
                      w_r: f64,
                      n_r: u32| {
            let b = marginal_benefit(recipient.evaluator.as_ref(), n_r).expect("in domain");
            let c = marginal_cost(donor.evaluator.as_ref(), n_d).expect("in domain");
            w_r * b > w_d * c
        };
        allows(&self.a, self.w_a, self.n_a, &self.b, self.w_b, self.n_b)
            && allows(&self.b, self.w_b, self.n_b, &self.a, self.w_a, self.n_a)
    }

    fn describe(&self) -> String {
        format!(
            "A={} w={:.4} n={}, B={} w={:.4} n={}",
            self.a.describe, self.w_a, self.n_a, self.b.describe, self.w_b, self.n_b
        )
    }

    /// Greedy shrink toward counts of 1 and unit weights while the case
    /// still fails.
    fn shrink(mut self, still_fails: impl Fn(&PairCase) -> bool) -> PairCase {
        loop {
            let mut reduced = false;
            let candidates: [fn(&mut PairCase); 4] = [
                |c| c.n_a = 1.max(c.n_a / 2),
                |c| c.n_b = 1.max(c.n_b / 2),
                |c| c.w_a = 1.0,
                |c| c.w_b = 1.0,
            ];
            for change in candidates {
                let mut candidate = self.clone();
                change(&mut candidate);
                let differs = candidate.n_a != self.n_a
                    || candidate.n_b != self.n_b
                    || candidate.w_a != self.w_a
                    || candidate.w_b != self.w_b;
                if differs && still_fails(&candidate) {
                    self = candidate;
                    reduced = true;
                    break;
                }
            }
            if !reduced {
                return self;
            }
        }
    }
}

fn unidirectionality_suite(trials: u32, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut failures = 0;
    let mut counterexample = None;
    for _ in 0..trials {
        let case = random_pair(&mut rng);
        if case.violates_unidirectionality() {
            failures += 1;
            if counterexample.is_none() {
                let shrunk = case.shrink(PairCase::violates_unidirectionality);
                counterexample = Some(shrunk.describe());
            }
        }
    }
    SuiteReport {
        name: "unidirectionality".into(),
        trials: trials.into(),
        failures,
        counterexample,
    }
}

fn concavity_bound_suite(trials: u32, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut failures = 0;
    let mut counterexample = None;
    for _ in 0..trials {
        let e = random_evaluator(&mut rng);
        let n = rng.random_range(1..=e.max_count);
        let b = marginal_benefit(e.evaluator.as_ref(), n).expect("in domain");
        let c = marginal_cost(e.evaluator.as_ref(), n).expect("in domain");
        if b > c {
            failures += 1;
            counterexample.get_or_insert_with(|| format!("{} at n={n}: B={b} > C={c}", e.describe));
        }
    }
    SuiteReport {
        name: "concavity-bound".into(),
        trials: trials.into(),
        failures,
        counterexample,
    }
}

fn evaluator_mix(mix: usize) -> (Vec<Arc<dyn MissionEvaluator>>, Vec<f64>) {
    let sqrt: Arc<dyn MissionEvaluator> =
        Arc::new(make_analytic(AnalyticKind::Sqrt).expect("valid"));
    let log: Arc<dyn MissionEvaluator> =
        Arc::new(make_analytic(AnalyticKind::Log1p).expect("valid"));
    let sat: Arc<dyn MissionEvaluator> = Arc::new(
        make_analytic(AnalyticKind::SaturatingExp { tau: 3.0 }).expect("valid"),
    );
    match mix {
        0 => (vec![sqrt.clone(), sqrt.clone(), sqrt], vec![1.0, 1.0, 1.0]),
        1 => (vec![log.clone(), log.clone(), log], vec![1.0, 2.0, 0.5]),
        _ => (vec![sqrt, log, sat], vec![2.0, 1.0, 3.0]),
    }
}

/// On complete graphs, the terminal objective of the collaboration loop
/// must equal the brute-force maximum from every starting allocation.
fn oracle_equivalence_suite() -> SuiteReport {
    let mut trials = 0;
    let mut failures = 0;
    let mut counterexample = None;
    let graph = TeamGraph::complete(3).expect("valid");
    let config = CollabConfig::default();
    for mix in 0..3 {
        let (evaluators, weights) = evaluator_mix(mix);
        let teams = Teams::new(
            evaluators
                .iter()
                .zip(&weights)
                .enumerate()
                .map(|(i, (e, &w))| {
                    TeamSpec::new(TeamId(i as u32 + 1), w, e.clone()).expect("valid")
                })
                .collect(),
        )
        .expect("valid roster");
        for total in 6..=9u32 {
            let space = AllocationSpace::new(3, total, 1).expect("within limits");
            let (_, best) = brute_force_optimal(&teams, &space).expect("oracle");
            for start in space.iter() {
                trials += 1;
                let trace =
                    run_collaboration(&teams, &graph, &start, &config).expect("run succeeds");
                if (trace.final_objective - best).abs() > 1e-12 {
                    failures += 1;
                    counterexample.get_or_insert_with(|| {
                        format!(
                            "mix {mix}, start {start}: terminal {} vs optimal {best}",
                            trace.final_objective
                        )
                    });
                }
            }
        }
    }
    SuiteReport {
        name: "oracle-equivalence-complete".into(),
        trials,
        failures,
        counterexample,
    }
}

/// Adding one robot anywhere new strictly lowers the locational cost.
fn coverage_monotonicity_suite(trials: u32, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let mut failures = 0;
    let mut counterexample = None;
    for trial in 0..trials {
        let sigma_x = rng.random_range(0.3..1.0);
        let sigma_y = rng.random_range(0.3..1.0);
        let grid = CoverageGrid::new(
            Domain::default(),
            &DensityField::Gaussian { sigma_x, sigma_y },
        )
        .expect("valid grid");
        let n = rng.random_range(1..=9);
        let mut positions: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let before = locational_cost(&positions, &grid);
        let extra = loop {
            let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if positions.iter().all(|&q| q != p) {
                break p;
            }
        };
        positions.push(extra);
        let after = locational_cost(&positions, &grid);
        if !(after < before) {
            failures += 1;
            counterexample.get_or_insert_with(|| {
                format!("trial {trial}: cost {before} -> {after} with robot at {extra:?}")
            });
        }
    }
    SuiteReport {
        name: "coverage-monotonicity".into(),
        trials: trials.into(),
        failures,
        counterexample,
    }
}

/// Plan degree bounds, agent conservation, strict objective increase, and
/// the run-length bound, over randomized runs on random graphs.
fn run_invariants_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4);
    let mut trials = 0;
    let mut failures = 0;
    let mut counterexample = None;
    let fail = |msg: String, failures: &mut u64, ce: &mut Option<String>| {
        *failures += 1;
        ce.get_or_insert(msg);
    };
    for _ in 0..200 {
        trials += 1;
        let m = rng.random_range(2..=4u32);
        let total = rng.random_range(m..=12u32);
        let teams = Teams::new(
            (1..=m)
                .map(|id| {
                    let e = random_evaluator(&mut rng);
                    TeamSpec::new(TeamId(id), rng.random_range(0.25..4.0), e.evaluator)
                        .expect("valid")
                })
                .collect(),
        )
        .expect("valid roster");
        let graph = if rng.random_bool(0.5) {
            TeamGraph::complete(m).expect("valid")
        } else {
            let mut edges = Vec::new();
            for a in 1..=m {
                for b in a + 1..=m {
                    if rng.random_bool(0.6) {
                        edges.push((TeamId(a), TeamId(b)));
                    }
                }
            }
            TeamGraph::from_edges(m, edges).expect("valid")
        };
        let initial = sample_allocation(m, total, 1, &mut rng).expect("feasible");
        let trace = run_collaboration(&teams, &graph, &initial, &CollabConfig::default())
            .expect("run succeeds");
        for record in &trace.iterations {
            if record.allocation.total() != initial.total() {
                fail(
                    format!("conservation broke at iteration {}", record.iteration),
                    &mut failures,
                    &mut counterexample,
                );
            }
            let transfers = record.plan.transfers();
            for t in transfers {
                let donors = transfers.iter().filter(|u| u.donor == t.donor).count();
                let takers = transfers
                    .iter()
                    .filter(|u| u.recipient == t.recipient)
                    .count();
                if donors > 1 || takers > 1 {
                    fail(
                        format!("plan degree bound broke: {}", record.plan),
                        &mut failures,
                        &mut counterexample,
                    );
                }
            }
        }
        let history = trace.objective_history();
        if history.windows(2).any(|w| w[1] <= w[0]) {
            fail(
                format!("objective not strictly increasing: {history:?}"),
                &mut failures,
                &mut counterexample,
            );
        }
        let omega = AllocationSpace::new(m, total, 1)
            .expect("within limits")
            .size();
        if trace.iterations.len() as u64 > omega {
            fail(
                format!(
                    "{} iterations exceeds |space| = {omega}",
                    trace.iterations.len()
                ),
                &mut failures,
                &mut counterexample,
            );
        }
    }
    SuiteReport {
        name: "run-invariants".into(),
        trials,
        failures,
        counterexample,
    }
}

/// Runs every suite and collects a combined report.
pub fn property_harness(config: &HarnessConfig) -> HarnessReport {
    HarnessReport {
        suites: vec![
            unidirectionality_suite(config.trials, config.seed),
            concavity_bound_suite(config.trials, config.seed),
            oracle_equivalence_suite(),
            coverage_monotonicity_suite(config.coverage_trials, config.seed),
            run_invariants_suite(config.seed),
        ],
    }
}
