//! SVG figures regenerated from a trace document: the objective-vs-iteration
//! curve and per-team domain snapshots (robot dots plus Voronoi cell
//! boundaries at the initial and final iterations).

use std::fs;
use std::path::{Path, PathBuf};

use hamrule::coverage::{assign_voronoi, CoverageGrid, DensityField, Domain};

use crate::emit::TraceDoc;

const SIZE: f64 = 440.0;
const MARGIN: f64 = 40.0;

fn svg_open(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<rect width=\"{width}\" height=\"{height}\" \
         fill=\"white\"/>\n"
    )
}

/// Objective value at each iteration (accepted or not), with axes and the
/// iteration count on the x axis.
pub fn objective_curve_svg(doc: &TraceDoc) -> String {
    let mut points = vec![(0usize, doc.trace.initial_objective)];
    points.extend(doc.trace.iterations.iter().map(|r| (r.iteration, r.objective)));
    let (y_min, y_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
            (lo.min(v), hi.max(v))
        });
    let y_pad = ((y_max - y_min) * 0.08).max(1e-12);
    let (y_lo, y_hi) = (y_min - y_pad, y_max + y_pad);
    let x_hi = points.last().map(|&(t, _)| t).unwrap_or(1).max(1) as f64;
    let plot = SIZE - 2.0 * MARGIN;
    let sx = |t: f64| MARGIN + plot * t / x_hi;
    let sy = |v: f64| MARGIN + plot * (1.0 - (v - y_lo) / (y_hi - y_lo));

    let mut svg = svg_open(SIZE, SIZE);
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{e}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = SIZE - MARGIN,
        e = SIZE - MARGIN,
    ));
    let path: Vec<String> = points
        .iter()
        .map(|&(t, v)| format!("{:.2},{:.2}", sx(t as f64), sy(v)))
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.8\"/>\n",
        path.join(" ")
    ));
    for &(t, v) in &points {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"#1f6fb2\"/>\n",
            sx(t as f64),
            sy(v)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">iteration</text>\n",
        SIZE / 2.0,
        SIZE - 8.0
    ));
    svg.push_str(&format!(
        "<text x=\"12\" y=\"{y}\" font-size=\"12\" transform=\"rotate(-90 12 {y})\" \
         text-anchor=\"middle\">objective</text>\n",
        y = SIZE / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{m}\" y=\"{}\" font-size=\"10\">{:.6}</text>\n\
         <text x=\"{m}\" y=\"{}\" font-size=\"10\">{:.6}</text>\n",
        MARGIN - 14.0,
        y_max,
        SIZE - MARGIN + 14.0,
        y_min,
        m = MARGIN
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Boundary segments between grid cells with different owners, merged along
/// runs so the output stays small.
fn boundary_segments(owner: &[u32], domain: &Domain) -> Vec<[f64; 4]> {
    let (nx, ny) = (domain.nx, domain.ny);
    let (dx, dy) = (domain.cell_width(), domain.cell_height());
    let mut segments = Vec::new();
    // Vertical boundaries between horizontal neighbours, merged along y.
    for ix in 0..nx - 1 {
        let x = domain.x_min + dx * (ix as f64 + 1.0);
        let mut run_start: Option<usize> = None;
        for iy in 0..=ny {
            let differs =
                iy < ny && owner[iy * nx + ix] != owner[iy * nx + ix + 1];
            match (differs, run_start) {
                (true, None) => run_start = Some(iy),
                (false, Some(start)) => {
                    segments.push([
                        x,
                        domain.y_min + dy * start as f64,
                        x,
                        domain.y_min + dy * iy as f64,
                    ]);
                    run_start = None;
                }
                _ => {}
            }
        }
    }
    // Horizontal boundaries between vertical neighbours, merged along x.
    for iy in 0..ny - 1 {
        let y = domain.y_min + dy * (iy as f64 + 1.0);
        let mut run_start: Option<usize> = None;
        for ix in 0..=nx {
            let differs =
                ix < nx && owner[iy * nx + ix] != owner[(iy + 1) * nx + ix];
            match (differs, run_start) {
                (true, None) => run_start = Some(ix),
                (false, Some(start)) => {
                    segments.push([
                        domain.x_min + dx * start as f64,
                        y,
                        domain.x_min + dx * ix as f64,
                        y,
                    ]);
                    run_start = None;
                }
                _ => {}
            }
        }
    }
    segments
}

/// One team's domain at one frame: cell boundaries and robot dots.
pub fn domain_snapshot_svg(positions: &[[f64; 2]], grid: &CoverageGrid) -> String {
    let domain = grid.domain();
    let plot = SIZE - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + plot * (x - domain.x_min) / (domain.x_max - domain.x_min);
    let sy = |y: f64| MARGIN + plot * (domain.y_max - y) / (domain.y_max - domain.y_min);

    let mut svg = svg_open(SIZE, SIZE);
    svg.push_str(&format!(
        "<rect x=\"{m}\" y=\"{m}\" width=\"{plot}\" height=\"{plot}\" fill=\"none\" \
         stroke=\"black\"/>\n",
        m = MARGIN
    ));
    if !positions.is_empty() {
        let assignment = assign_voronoi(positions, grid);
        for [x1, y1, x2, y2] in boundary_segments(assignment.owner(), domain) {
            svg.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
                 stroke=\"#777\" stroke-width=\"0.8\"/>\n",
                sx(x1),
                sy(y1),
                sx(x2),
                sy(y2)
            ));
        }
    }
    for p in positions {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"black\"/>\n",
            sx(p[0]),
            sy(p[1])
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Regenerates every figure for a trace document. Pure with respect to the
/// trace: only files under `out_dir` are written.
pub fn write_plots(doc: &TraceDoc, out_dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let curve = out_dir.join("objective.svg");
    fs::write(&curve, objective_curve_svg(doc))?;
    written.push(curve);

    let (Some(first), Some(last)) = (doc.frames.first(), doc.frames.last()) else {
        return Ok(written);
    };
    for (team_idx, sigma) in doc.team_sigmas.iter().enumerate() {
        let Some(sigma) = sigma else { continue };
        let grid = CoverageGrid::new(
            doc.domain,
            &DensityField::Gaussian {
                sigma_x: sigma[0],
                sigma_y: sigma[1],
            },
        )
        .map_err(|e| std::io::Error::other(e.to_string()))?;
        for (frame, tag) in [(first, "initial"), (last, "final")] {
            let Some(positions) = &frame.positions[team_idx] else {
                continue;
            };
            let path = out_dir.join(format!("team{}_{tag}.svg", team_idx + 1));
            fs::write(&path, domain_snapshot_svg(positions, &grid))?;
            written.push(path);
        }
    }
    Ok(written)
}
