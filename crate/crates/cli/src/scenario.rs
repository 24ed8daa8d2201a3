//! Scenario files: a versioned, human-editable TOML schema describing the
//! teams, graph, evaluators and algorithm knobs of one run. Loading fills
//! every default and validates the result, so the echoed config is fully
//! self-describing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hamrule::coverage::{Domain, LloydParams};
use hamrule::{
    make_analytic, validate_assumption2, AnalyticKind, CollabConfig, MissionEvaluator,
    TabulatedEvaluator, TeamGraph, TeamId, COVERAGE_EPSILON_G,
};

use std::sync::Arc;

pub const SCHEMA_VERSION: u32 = 1;

/// Relative slack allowed in the concavity scan of a tabulated evaluator,
/// as a fraction of |F at the first tabulated count|. Tables come out of an
/// iterative solver that only finds local optima, so exact concavity cannot
/// be demanded.
pub const TABLE_CONCAVITY_TOL: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("team {team} evaluator: {message}")]
    Evaluator { team: u32, message: String },
}

fn field_err(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Field {
        field: field.into(),
        message: message.into(),
    }
}

/// The on-disk schema. Unknown fields are rejected so typos surface as
/// errors naming the offending key.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub total_agents: u32,
    pub graph: GraphSpec,
    pub initial_allocation: InitialSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub lloyd: LloydSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(rename = "team")]
    pub teams: Vec<TeamSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    /// `"complete"`
    Named(String),
    /// Explicit undirected edge list, e.g. `[[1, 2], [2, 3]]`.
    Edges(Vec<[u32; 2]>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    /// `"random"`: drawn uniformly from the feasible allocations using the
    /// run seed.
    Named(String),
    /// Explicit per-team counts summing to `total_agents`.
    Counts(Vec<u32>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    #[serde(default = "default_min_team_size")]
    pub min_team_size: u32,
    /// Defaults to 1e-9, or 1e-6 when any team uses a live coverage
    /// evaluator.
    #[serde(default)]
    pub epsilon_g: Option<f64>,
    /// Defaults to `total_agents * team_count`.
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

fn default_min_team_size() -> u32 {
    1
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        Self {
            min_team_size: 1,
            epsilon_g: None,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LloydSection {
    #[serde(default = "default_lloyd_tol")]
    pub tol: f64,
    #[serde(default = "default_lloyd_iters")]
    pub max_iterations: usize,
    /// Lloyd initializations per count when tabulating.
    #[serde(default = "default_restarts")]
    pub restarts: u32,
}

fn default_lloyd_tol() -> f64 {
    1e-6
}

fn default_lloyd_iters() -> usize {
    500
}

fn default_restarts() -> u32 {
    5
}

impl Default for LloydSection {
    fn default() -> Self {
        Self {
            tol: default_lloyd_tol(),
            max_iterations: default_lloyd_iters(),
            restarts: default_restarts(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_grid_n")]
    pub nx: usize,
    #[serde(default = "default_grid_n")]
    pub ny: usize,
    /// `[x_min, x_max, y_min, y_max]`
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 4],
}

fn default_grid_n() -> usize {
    100
}

fn default_bounds() -> [f64; 4] {
    [-1.0, 1.0, -1.0, 1.0]
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            nx: default_grid_n(),
            ny: default_grid_n(),
            bounds: default_bounds(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamSection {
    pub id: u32,
    pub weight: f64,
    pub evaluator: EvaluatorSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorSpec {
    /// e.g. `{ analytic = "sqrt" }` or
    /// `{ analytic = { saturating_exp = { tau = 2.0 } } }`
    Analytic(AnalyticKind),
    /// Live coverage mission with a Gaussian density of the given widths.
    Coverage { sigma: [f64; 2] },
    /// Frozen value table, path relative to the scenario file.
    Tabulated { path: String },
}

impl EvaluatorSpec {
    pub fn is_coverage(&self) -> bool {
        matches!(self, EvaluatorSpec::Coverage { .. })
    }
}

/// A loaded scenario with every default resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub total_agents: u32,
    pub seed: u64,
    pub graph: TeamGraph,
    pub initial: InitialAllocation,
    pub collab: CollabConfig,
    pub lloyd: LloydParams,
    pub restarts: u32,
    pub domain: Domain,
    pub teams: Vec<TeamConfig>,
    /// Normalized file form, used to echo the effective configuration.
    pub file: ScenarioFile,
}

#[derive(Debug, Clone)]
pub enum InitialAllocation {
    Random,
    Counts(Vec<u32>),
}

#[derive(Debug, Clone)]
pub struct TeamConfig {
    pub id: TeamId,
    pub weight: f64,
    pub evaluator: EvaluatorSpec,
    /// Loaded table for `Tabulated` specs.
    pub table: Option<Arc<TabulatedEvaluator>>,
}

impl Scenario {
    pub fn team_count(&self) -> u32 {
        self.teams.len() as u32
    }

    pub fn has_coverage_teams(&self) -> bool {
        self.teams.iter().any(|t| t.evaluator.is_coverage())
    }

    /// The effective configuration as TOML, defaults included.
    pub fn echo_toml(&self) -> String {
        toml::to_string_pretty(&self.file).expect("effective config serializes")
    }

    /// A pure evaluator for each non-coverage team; `None` for live
    /// coverage teams.
    pub fn pure_evaluator(&self, team: &TeamConfig) -> Option<Arc<dyn MissionEvaluator>> {
        match &team.evaluator {
            EvaluatorSpec::Analytic(kind) => {
                Some(Arc::new(make_analytic(*kind).expect("validated at load")))
            }
            EvaluatorSpec::Tabulated { .. } => team
                .table
                .clone()
                .map(|t| t as Arc<dyn MissionEvaluator>),
            EvaluatorSpec::Coverage { .. } => None,
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile =
        toml::from_str(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    resolve(file, path.parent().unwrap_or(Path::new(".")))
}

fn resolve(mut file: ScenarioFile, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    if file.version != SCHEMA_VERSION {
        return Err(field_err(
            "version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", file.version),
        ));
    }
    if file.teams.is_empty() {
        return Err(field_err("team", "at least one [[team]] is required"));
    }
    let m = file.teams.len() as u32;

    let mut teams = Vec::with_capacity(file.teams.len());
    for (index, section) in file.teams.iter().enumerate() {
        let expected = index as u32 + 1;
        if section.id != expected {
            return Err(field_err(
                "team.id",
                format!(
                    "ids must be contiguous and ordered 1..={m}; entry {} has id {}",
                    index + 1,
                    section.id
                ),
            ));
        }
        if !(section.weight > 0.0) || !section.weight.is_finite() {
            return Err(field_err(
                "team.weight",
                format!("team {} weight must be positive, got {}", section.id, section.weight),
            ));
        }
        let table = validate_evaluator(section, base_dir, file.total_agents)?;
        teams.push(TeamConfig {
            id: TeamId(section.id),
            weight: section.weight,
            evaluator: section.evaluator.clone(),
            table,
        });
    }

    let graph = match &file.graph {
        GraphSpec::Named(name) if name == "complete" => {
            TeamGraph::complete(m).expect("team count checked")
        }
        GraphSpec::Named(other) => {
            return Err(field_err(
                "graph",
                format!("expected \"complete\" or an edge list, got \"{other}\""),
            ))
        }
        GraphSpec::Edges(edges) => TeamGraph::from_edges(
            m,
            edges.iter().map(|&[a, b]| (TeamId(a), TeamId(b))),
        )
        .map_err(|e| field_err("graph", e.to_string()))?,
    };

    let min_team_size = file.algorithm.min_team_size;
    let initial = match &file.initial_allocation {
        InitialSpec::Named(name) if name == "random" => InitialAllocation::Random,
        InitialSpec::Named(other) => {
            return Err(field_err(
                "initial_allocation",
                format!("expected \"random\" or a count list, got \"{other}\""),
            ))
        }
        InitialSpec::Counts(counts) => {
            if counts.len() != file.teams.len() {
                return Err(field_err(
                    "initial_allocation",
                    format!("{} counts for {} teams", counts.len(), file.teams.len()),
                ));
            }
            let sum: u32 = counts.iter().sum();
            if sum != file.total_agents {
                return Err(field_err(
                    "initial_allocation",
                    format!("counts sum to {sum}, total_agents is {}", file.total_agents),
                ));
            }
            if let Some((i, &c)) = counts.iter().enumerate().find(|(_, &c)| c < min_team_size)
            {
                return Err(field_err(
                    "initial_allocation",
                    format!("team {} starts at {c}, below min_team_size {min_team_size}", i + 1),
                ));
            }
            InitialAllocation::Counts(counts.clone())
        }
    };
    if u64::from(file.total_agents) < u64::from(m) * u64::from(min_team_size) {
        return Err(field_err(
            "total_agents",
            format!(
                "{} agents cannot satisfy {m} teams of at least {min_team_size}",
                file.total_agents
            ),
        ));
    }

    let has_coverage = file.teams.iter().any(|t| t.evaluator.is_coverage());
    let epsilon_g = file
        .algorithm
        .epsilon_g
        .unwrap_or(if has_coverage { COVERAGE_EPSILON_G } else { 1e-9 });
    if !(epsilon_g >= 0.0) {
        return Err(field_err("algorithm.epsilon_g", "must be non-negative"));
    }
    let max_iterations = file
        .algorithm
        .max_iterations
        .unwrap_or(file.total_agents as usize * file.teams.len());

    let [x_min, x_max, y_min, y_max] = file.grid.bounds;
    let domain = Domain::new(x_min, x_max, y_min, y_max, file.grid.nx, file.grid.ny)
        .map_err(|e| field_err("grid", e.to_string()))?;
    if !(file.lloyd.tol > 0.0) {
        return Err(field_err("lloyd.tol", "must be positive"));
    }
    if file.lloyd.restarts < 1 {
        return Err(field_err("lloyd.restarts", "must be at least 1"));
    }

    // Echo every resolved default back into the file form.
    file.algorithm.epsilon_g = Some(epsilon_g);
    file.algorithm.max_iterations = Some(max_iterations);
    let name = file
        .name
        .clone()
        .unwrap_or_else(|| "scenario".to_string());
    file.name = Some(name.clone());

    Ok(Scenario {
        name,
        total_agents: file.total_agents,
        seed: file.seed,
        graph,
        initial,
        collab: CollabConfig {
            min_team_size,
            epsilon_g,
            max_iterations: Some(max_iterations),
        },
        lloyd: LloydParams {
            tol: file.lloyd.tol,
            max_iterations: file.lloyd.max_iterations,
        },
        restarts: file.lloyd.restarts,
        domain,
        teams,
        file,
    })
}

/// Parameter and table validation per evaluator kind. Tabulated evaluators
/// must pass the increasing/concavity scan; the first violating count is
/// reported on rejection.
fn validate_evaluator(
    section: &TeamSection,
    base_dir: &Path,
    total_agents: u32,
) -> Result<Option<Arc<TabulatedEvaluator>>, ScenarioError> {
    let team = section.id;
    match &section.evaluator {
        EvaluatorSpec::Analytic(kind) => {
            make_analytic(*kind).map_err(|e| ScenarioError::Evaluator {
                team,
                message: e.to_string(),
            })?;
            Ok(None)
        }
        EvaluatorSpec::Coverage { sigma } => {
            if !(sigma[0] > 0.0) || !(sigma[1] > 0.0) {
                return Err(ScenarioError::Evaluator {
                    team,
                    message: format!("gaussian widths must be positive, got {sigma:?}"),
                });
            }
            Ok(None)
        }
        EvaluatorSpec::Tabulated { path } => {
            let resolved = base_dir.join(path);
            let text = std::fs::read_to_string(&resolved).map_err(|source| ScenarioError::Io {
                path: resolved.clone(),
                source,
            })?;
            let table = TabulatedEvaluator::from_text(&text).map_err(|e| {
                ScenarioError::Evaluator {
                    team,
                    message: format!("{}: {e}", resolved.display()),
                }
            })?;
            let first = table
                .value(table.domain_min())
                .expect("table start is in domain");
            let tol = TABLE_CONCAVITY_TOL * first.abs();
            let report =
                validate_assumption2(&table, total_agents, tol).map_err(|e| {
                    ScenarioError::Evaluator {
                        team,
                        message: e.to_string(),
                    }
                })?;
            if !report.ok() {
                let (n, kind) = report.first_violation().expect("a check failed");
                return Err(ScenarioError::Evaluator {
                    team,
                    message: format!(
                        "table {} violates the evaluator requirements ({kind:?} first at n = {n})",
                        resolved.display()
                    ),
                });
            }
            Ok(Some(Arc::new(table)))
        }
    }
}
