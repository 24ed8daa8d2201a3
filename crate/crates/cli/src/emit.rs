//! Run artifacts: iteration CSV, final-allocation table, the JSON trace
//! document, robot position CSVs and Voronoi ownership rasters.
//!
//! All floating-point fields are written with 17 significant digits so the
//! objective sequence can be recomputed from the files bit-exactly, and a
//! fixed seed reproduces every file byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hamrule::coverage::assign_voronoi;
use hamrule::coverage::Domain;
use hamrule::RunTrace;

use crate::runner::{CoverageFrame, RunOutcome};
use crate::scenario::Scenario;

pub const TRACE_VERSION: u32 = 1;

/// Self-contained trace document; everything `plot` needs to regenerate
/// figures without re-running the scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceDoc {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    /// Effective scenario configuration (all defaults resolved), as TOML.
    pub scenario_toml: String,
    pub domain: Domain,
    /// Gaussian density widths per team; `None` for non-coverage teams.
    pub team_sigmas: Vec<Option<[f64; 2]>>,
    pub weights: Vec<f64>,
    pub trace: RunTrace,
    pub frames: Vec<CoverageFrame>,
}

impl TraceDoc {
    pub fn from_outcome(scenario: &Scenario, outcome: &RunOutcome, domain: Domain) -> Self {
        TraceDoc {
            version: TRACE_VERSION,
            name: scenario.name.clone(),
            seed: outcome.seed,
            scenario_toml: scenario.echo_toml(),
            domain,
            team_sigmas: scenario
                .teams
                .iter()
                .map(|t| match &t.evaluator {
                    crate::scenario::EvaluatorSpec::Coverage { sigma } => Some(*sigma),
                    _ => None,
                })
                .collect(),
            weights: outcome.weights.clone(),
            trace: outcome.trace.clone(),
            frames: outcome.frames.clone(),
        }
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// `t, objective, n_1..n_m, accepted, plan` with a commented header echoing
/// the scenario identity. Row 0 is the initial state.
pub fn iterations_csv(name: &str, seed: u64, trace: &RunTrace) -> String {
    let m = trace.initial_allocation.team_count();
    let mut out = String::new();
    out.push_str(&format!("# scenario: {name}\n# seed: {seed}\n"));
    out.push_str("t,objective");
    for k in 1..=m {
        out.push_str(&format!(",n_{k}"));
    }
    out.push_str(",accepted,plan\n");
    out.push_str(&format!("0,{}", fmt_f(trace.initial_objective)));
    for &c in trace.initial_allocation.counts() {
        out.push_str(&format!(",{c}"));
    }
    out.push_str(",,\n");
    for record in &trace.iterations {
        out.push_str(&format!(
            "{},{}",
            record.iteration,
            fmt_f(record.objective)
        ));
        for &c in record.allocation.counts() {
            out.push_str(&format!(",{c}"));
        }
        out.push_str(&format!(",{},{}\n", record.accepted, record.plan));
    }
    out
}

/// Human-readable final allocation summary.
pub fn final_table(doc: &TraceDoc) -> String {
    let trace = &doc.trace;
    let mut out = String::new();
    out.push_str(&format!("scenario: {}\nseed: {}\n", doc.name, doc.seed));
    out.push_str(&format!(
        "termination: {:?} after {} iterations ({} accepted)\n",
        trace.termination,
        trace.iterations.len(),
        trace.accepted_count()
    ));
    out.push_str(&format!(
        "objective: {} -> {}\n\n",
        fmt_f(trace.initial_objective),
        fmt_f(trace.final_objective)
    ));
    out.push_str("team  weight      initial  final\n");
    for (i, w) in doc.weights.iter().enumerate() {
        out.push_str(&format!(
            "{:<5} {:<11} {:<8} {}\n",
            i + 1,
            w,
            trace.initial_allocation.counts()[i],
            trace.final_allocation.counts()[i],
        ));
    }
    out
}

/// `iteration,team,robot,x,y` for every coverage frame.
pub fn positions_csv(frames: &[CoverageFrame]) -> String {
    let mut out = String::from("iteration,team,robot,x,y\n");
    for frame in frames {
        for (team_idx, positions) in frame.positions.iter().enumerate() {
            if let Some(positions) = positions {
                for (robot, p) in positions.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        frame.iteration,
                        team_idx + 1,
                        robot + 1,
                        fmt_f(p[0]),
                        fmt_f(p[1])
                    ));
                }
            }
        }
    }
    out
}

/// Ownership raster for one team at one frame: `ny` lines of `nx` owner
/// indices (1-based; 0 marks an empty team).
pub fn raster_csv(positions: &[[f64; 2]], grid: &hamrule::coverage::CoverageGrid) -> String {
    let domain = grid.domain();
    let assignment = assign_voronoi(positions, grid);
    let mut out = String::new();
    for iy in 0..domain.ny {
        for ix in 0..domain.nx {
            if ix > 0 {
                out.push(',');
            }
            if assignment.is_empty() {
                out.push('0');
            } else {
                let owner = assignment.owner()[iy * domain.nx + ix];
                out.push_str(&(owner + 1).to_string());
            }
        }
        out.push('\n');
    }
    out
}

pub struct EmitOptions {
    pub rasters: bool,
    pub plots: bool,
}

/// Writes every artifact for a finished run into `out_dir` and returns the
/// paths written.
pub fn write_outputs(
    scenario: &Scenario,
    outcome: &RunOutcome,
    out_dir: &Path,
    options: &EmitOptions,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let write_file = |path: PathBuf, contents: &str| -> std::io::Result<PathBuf> {
        let mut f = fs::File::create(&path)?;
        f.write_all(contents.as_bytes())?;
        Ok(path)
    };

    let domain = outcome
        .grids
        .iter()
        .flatten()
        .next()
        .map(|g| *g.domain())
        .unwrap_or(scenario.domain);
    let doc = TraceDoc::from_outcome(scenario, outcome, domain);

    written.push(write_file(
        out_dir.join("scenario_effective.toml"),
        &doc.scenario_toml,
    )?);
    written.push(write_file(
        out_dir.join("iterations.csv"),
        &iterations_csv(&doc.name, doc.seed, &doc.trace),
    )?);
    written.push(write_file(out_dir.join("final.txt"), &final_table(&doc))?);
    written.push(write_file(
        out_dir.join("trace.json"),
        &serde_json::to_string_pretty(&doc).expect("trace serializes"),
    )?);

    if !outcome.frames.is_empty() {
        written.push(write_file(
            out_dir.join("positions.csv"),
            &positions_csv(&outcome.frames),
        )?);
        if options.rasters {
            let raster_dir = out_dir.join("rasters");
            fs::create_dir_all(&raster_dir)?;
            for frame in &outcome.frames {
                for (team_idx, positions) in frame.positions.iter().enumerate() {
                    let (Some(positions), Some(grid)) = (positions, &outcome.grids[team_idx])
                    else {
                        continue;
                    };
                    let path = raster_dir
                        .join(format!("iter{:03}_team{}.csv", frame.iteration, team_idx + 1));
                    written.push(write_file(path, &raster_csv(positions, grid))?);
                }
            }
        }
    }

    if options.plots {
        written.extend(crate::plot::write_plots(&doc, &out_dir.join("plots"))?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hamrule::coverage::{CoverageGrid, DensityField};

    #[test]
    fn raster_is_grid_shaped() {
        let grid = CoverageGrid::new(
            Domain::new(-1.0, 1.0, -1.0, 1.0, 4, 3).unwrap(),
            &DensityField::Gaussian {
                sigma_x: 0.5,
                sigma_y: 0.5,
            },
        )
        .unwrap();
        let text = raster_csv(&[[-0.5, 0.0], [0.5, 0.0]], &grid);
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0], "1,1,2,2");
        let empty = raster_csv(&[], &grid);
        assert!(empty.lines().all(|l| l == "0,0,0,0"));
    }
}
