//! `hamrule`: scenario-driven runner for multi-team resource allocation.
//!
//! Subcommands: `run` a scenario and emit its artifacts, `validate` a
//! scenario file, `tabulate` coverage evaluators into value tables,
//! `oracle` a scenario by brute force, and `plot` figures from a stored
//! trace.
//!
//! Exit codes: 0 success, 1 configuration error, 2 non-convergence,
//! 3 internal invariant breach.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use hamrule::coverage::{tabulate_coverage_evaluator, TabulateParams};
use hamrule::{
    brute_force_optimal, validate_assumption2, AllocationSpace, MissionEvaluator,
    TabulatedEvaluator, TeamSpec, Teams, Termination,
};

use hamrule_cli::emit::{self, EmitOptions, TraceDoc};
use hamrule_cli::plot;
use hamrule_cli::runner::{execute, team_grids, RunOverrides, RunnerError};
use hamrule_cli::scenario::{load_scenario, EvaluatorSpec, ScenarioError};

#[derive(Parser)]
#[command(name = "hamrule", version, about = "Multi-team resource allocation runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        /// Output directory for traces, tables and plots.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the grid resolution, e.g. `200x200`.
        #[arg(long)]
        grid: Option<String>,
        /// Also write SVG figures.
        #[arg(long)]
        plots: bool,
        /// Skip the per-iteration Voronoi ownership rasters.
        #[arg(long)]
        no_rasters: bool,
    },
    /// Check a scenario file and report the evaluator validation.
    Validate { scenario: PathBuf },
    /// Freeze each coverage evaluator into a value table.
    Tabulate {
        scenario: PathBuf,
        #[arg(long, default_value = "tables")]
        out: PathBuf,
        /// Largest agent count to tabulate (default: total_agents).
        #[arg(long)]
        n_max: Option<u32>,
    },
    /// Brute-force the optimal allocation of a scenario. Coverage teams
    /// need pre-tabulated values (see `tabulate`), passed via --tables.
    Oracle {
        scenario: PathBuf,
        /// Directory holding `team<N>.tab` files for coverage teams.
        #[arg(long)]
        tables: Option<PathBuf>,
    },
    /// Regenerate SVG figures from a stored trace.json.
    Plot {
        trace: PathBuf,
        /// Output directory (default: `plots` next to the trace).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("run did not converge within the iteration limit")]
    NonConvergence,
    #[error("{0}")]
    Internal(String),
}

impl AppError {
    fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            AppError::Config(_) => 1,
            AppError::NonConvergence => 2,
            AppError::Internal(_) => 3,
        })
    }
}

impl From<ScenarioError> for AppError {
    fn from(e: ScenarioError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<RunnerError> for AppError {
    fn from(e: RunnerError) -> Self {
        match e {
            RunnerError::Allocation(inner) => AppError::Config(inner.to_string()),
            other => AppError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), AppError> {
    match command {
        Command::Run {
            scenario,
            out,
            seed,
            grid,
            plots,
            no_rasters,
        } => cmd_run(&scenario, &out, seed, grid.as_deref(), plots, !no_rasters),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Tabulate {
            scenario,
            out,
            n_max,
        } => cmd_tabulate(&scenario, &out, n_max),
        Command::Oracle { scenario, tables } => cmd_oracle(&scenario, tables.as_deref()),
        Command::Plot { trace, out } => cmd_plot(&trace, out.as_deref()),
    }
}

fn parse_grid(arg: &str) -> Result<(usize, usize), AppError> {
    let parts: Vec<&str> = arg.split('x').collect();
    let err = || AppError::Config(format!("--grid expects NXxNY (e.g. 200x200), got `{arg}`"));
    if parts.len() != 2 {
        return Err(err());
    }
    let nx = parts[0].parse().map_err(|_| err())?;
    let ny = parts[1].parse().map_err(|_| err())?;
    Ok((nx, ny))
}

fn cmd_run(
    path: &Path,
    out: &Path,
    seed: Option<u64>,
    grid: Option<&str>,
    plots: bool,
    rasters: bool,
) -> Result<(), AppError> {
    let scenario = load_scenario(path)?;
    let overrides = RunOverrides {
        seed,
        grid: grid.map(parse_grid).transpose()?,
    };
    let outcome = execute(&scenario, &overrides)?;
    let written = emit::write_outputs(&scenario, &outcome, out, &EmitOptions { rasters, plots })?;
    let trace = &outcome.trace;
    println!(
        "{}: {} -> {} in {} iterations ({} accepted), objective {:.6} -> {:.6}",
        scenario.name,
        trace.initial_allocation,
        trace.final_allocation,
        trace.iterations.len(),
        trace.accepted_count(),
        trace.initial_objective,
        trace.final_objective,
    );
    println!("wrote {} files under {}", written.len(), out.display());
    if trace.termination == Termination::IterationLimit {
        return Err(AppError::NonConvergence);
    }
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), AppError> {
    let scenario = load_scenario(path)?;
    println!(
        "{}: {} teams, {} agents, seed {}",
        scenario.name,
        scenario.team_count(),
        scenario.total_agents,
        scenario.seed
    );
    for team in &scenario.teams {
        let status = match &team.evaluator {
            EvaluatorSpec::Analytic(kind) => {
                let ev = hamrule::make_analytic(*kind).expect("validated at load");
                let report = validate_assumption2(&ev, scenario.total_agents + 1, 0.0)
                    .map_err(|e| AppError::Config(e.to_string()))?;
                debug_assert!(report.ok(), "analytic evaluators satisfy the requirements");
                let reach = match ev.domain_max() {
                    Some(cap) if cap < scenario.total_agents + 1 => {
                        format!(" (saturates: domain capped at n = {cap})")
                    }
                    _ => String::new(),
                };
                format!("analytic {kind:?}: increasing and concave on 0..={}{reach}", report.checked_to)
            }
            EvaluatorSpec::Coverage { sigma } => format!(
                "coverage gaussian sigma = ({}, {}): live evaluator; `tabulate` freezes a checkable table",
                sigma[0], sigma[1]
            ),
            EvaluatorSpec::Tabulated { path } => {
                let table = team.table.as_ref().expect("loaded at validation");
                format!(
                    "table {}: increasing and concave on {}..={}",
                    path,
                    table.domain_min(),
                    table.last_n()
                )
            }
        };
        println!("  team {} (w = {}): {status}", team.id, team.weight);
    }
    println!("ok");
    Ok(())
}

fn table_path(dir: &Path, team: u32) -> PathBuf {
    dir.join(format!("team{team}.tab"))
}

fn cmd_tabulate(path: &Path, out: &Path, n_max: Option<u32>) -> Result<(), AppError> {
    let scenario = load_scenario(path)?;
    if !scenario.has_coverage_teams() {
        println!("no coverage teams in {}; nothing to tabulate", scenario.name);
        return Ok(());
    }
    std::fs::create_dir_all(out)?;
    let grids = team_grids(&scenario, &RunOverrides::default())?;
    let n_max = n_max.unwrap_or(scenario.total_agents);
    for (team, grid) in scenario.teams.iter().zip(&grids) {
        let Some(grid) = grid else { continue };
        let EvaluatorSpec::Coverage { sigma } = &team.evaluator else {
            continue;
        };
        let params = TabulateParams {
            n_max,
            restarts: scenario.restarts,
            seed: scenario.seed,
            lloyd: scenario.lloyd,
            label: format!(
                "team {}: gaussian sigma = ({}, {})",
                team.id, sigma[0], sigma[1]
            ),
        };
        let table = tabulate_coverage_evaluator(grid, &params)
            .map_err(|e| AppError::Internal(e.to_string()))?;
        let dest = table_path(out, team.id.0);
        std::fs::write(&dest, table.to_text())?;
        println!("team {}: wrote {}", team.id, dest.display());
    }
    Ok(())
}

fn cmd_oracle(path: &Path, tables: Option<&Path>) -> Result<(), AppError> {
    let scenario = load_scenario(path)?;
    let mut specs = Vec::with_capacity(scenario.teams.len());
    for team in &scenario.teams {
        let evaluator: Arc<dyn MissionEvaluator> = match scenario.pure_evaluator(team) {
            Some(ev) => ev,
            None => {
                let Some(dir) = tables else {
                    return Err(AppError::Config(format!(
                        "team {} uses a live coverage evaluator; run `hamrule tabulate {}` \
                         and pass --tables",
                        team.id,
                        path.display()
                    )));
                };
                let table_file = table_path(dir, team.id.0);
                let text = std::fs::read_to_string(&table_file).map_err(|e| {
                    AppError::Config(format!("cannot read {}: {e}", table_file.display()))
                })?;
                let table = TabulatedEvaluator::from_text(&text)
                    .map_err(|e| AppError::Config(format!("{}: {e}", table_file.display())))?;
                Arc::new(table)
            }
        };
        specs.push(
            TeamSpec::new(team.id, team.weight, evaluator)
                .map_err(|e| AppError::Config(e.to_string()))?,
        );
    }
    let teams = Teams::new(specs).map_err(|e| AppError::Config(e.to_string()))?;
    let space = AllocationSpace::new(
        scenario.team_count(),
        scenario.total_agents,
        scenario.collab.min_team_size,
    )
    .map_err(|e| AppError::Config(e.to_string()))?;
    let (alloc, value) =
        brute_force_optimal(&teams, &space).map_err(|e| AppError::Config(e.to_string()))?;
    println!(
        "optimal allocation over {} candidates: {} with objective {:.16e}",
        space.size(),
        alloc,
        value
    );
    for (i, &c) in alloc.counts().iter().enumerate() {
        println!("  team {} -> {c}", i + 1);
    }
    Ok(())
}

fn cmd_plot(trace: &Path, out: Option<&Path>) -> Result<(), AppError> {
    let text = std::fs::read_to_string(trace)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", trace.display())))?;
    let doc: TraceDoc = serde_json::from_str(&text)
        .map_err(|e| AppError::Config(format!("{} is not a trace document: {e}", trace.display())))?;
    let default_dir = trace
        .parent()
        .unwrap_or(Path::new("."))
        .join("plots");
    let out = out.map(Path::to_path_buf).unwrap_or(default_dir);
    let written = plot::write_plots(&doc, &out)?;
    println!("wrote {} figures under {}", written.len(), out.display());
    Ok(())
}
