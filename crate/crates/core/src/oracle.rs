//! Brute-force ground truth for one-anchor planar problems: exhaustive grid
//! search over the anchor, property verification against the grid optimum,
//! and cost rasters.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{exact_collision_cost, polyline_length, ChompParams, CostParams};
use crate::error::{Error, Result};
use crate::geom::path_collides;
use crate::optimizer::{Landscape, PathModel, Problem, WeightMode};
use crate::scenegen::{generate, Generator};

/// Degree of the one-anchor paths searched by the oracle.
pub const ORACLE_DEGREE: usize = 2;

/// A square lattice of anchor positions: `resolution` points per axis,
/// spanning `[center - half, center + half]` on each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub center: [f64; 2],
    pub half_widths: [f64; 2],
    pub resolution: usize,
}

impl GridSpec {
    /// A grid spanning `[lo, hi]` per axis.
    pub fn from_ranges(x: (f64, f64), y: (f64, f64), resolution: usize) -> Result<Self> {
        let g = GridSpec {
            center: [0.5 * (x.0 + x.1), 0.5 * (y.0 + y.1)],
            half_widths: [0.5 * (x.1 - x.0), 0.5 * (y.1 - y.0)],
            resolution,
        };
        g.validate()?;
        Ok(g)
    }

    /// A grid covering the problem's scene bounds.
    pub fn covering(problem: &Problem, resolution: usize) -> Result<Self> {
        let b = &problem.scene.bounds;
        if b.dim() != 2 {
            return Err(Error::Unsupported(format!("oracle needs a 2D scene, got {}D", b.dim())));
        }
        Self::from_ranges((b.min[0], b.max[0]), (b.min[1], b.max[1]), resolution)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be at least 2, got {}",
                self.resolution
            )));
        }
        let ok = self
            .center
            .iter()
            .chain(&self.half_widths)
            .all(|v| v.is_finite())
            && self.half_widths.iter().all(|&h| h > 0.0);
        if !ok {
            return Err(Error::InvalidArgument(format!("degenerate grid ranges {self:?}")));
        }
        Ok(())
    }

    /// Coordinate of lattice index `i` on `axis`. Indices `i` and
    /// `resolution - 1 - i` are exact mirror images about the center.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let r = (self.resolution - 1) as f64;
        self.center[axis] + self.half_widths[axis] * (2.0 * i as f64 - r) / r
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_widths[axis] / (self.resolution - 1) as f64
    }

    /// Length of one cell's diagonal.
    pub fn cell_diagonal(&self) -> f64 {
        self.spacing(0).hypot(self.spacing(1))
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.coord(0, 0), self.coord(0, self.resolution - 1))
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.coord(1, 0), self.coord(1, self.resolution - 1))
    }

    fn check_within(&self, problem: &Problem) -> Result<()> {
        let b = &problem.scene.bounds;
        let tol = 1e-12 * b.diagonal();
        for axis in 0..2 {
            let (lo, hi) = (self.coord(axis, 0), self.coord(axis, self.resolution - 1));
            if lo < b.min[axis] - tol || hi > b.max[axis] + tol {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {axis} range [{lo}, {hi}] leaves scene bounds [{}, {}]",
                    b.min[axis], b.max[axis]
                )));
            }
        }
        Ok(())
    }
}

/// The loss evaluated at each grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LandscapeCost {
    /// Length plus smooth collision cost.
    Smooth,
    /// Length plus exact indicator collision cost.
    Exact,
    /// Length plus CHOMP obstacle cost.
    Chomp(ChompParams),
}

/// A scalar field over a grid. `values[j][i]` belongs to x index `i` and
/// y index `j`, so row 0 is the lowest y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub min: f64,
    pub max: f64,
    pub values: Vec<Vec<f64>>,
}

impl Raster {
    fn new(grid: &GridSpec, values: Vec<Vec<f64>>) -> Self {
        let (min, max) = values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Raster {
            width: grid.resolution,
            height: grid.resolution,
            x_range: grid.x_range(),
            y_range: grid.y_range(),
            min,
            max,
            values,
        }
    }

    /// Values mapped linearly onto `0..=255`, top row first (highest y).
    pub fn to_gray(&self) -> Vec<u8> {
        let span = self.max - self.min;
        self.values
            .iter()
            .rev()
            .flatten()
            .map(|&v| {
                if span > 0.0 {
                    (255.0 * (v - self.min) / span).round() as u8
                } else {
                    0
                }
            })
            .collect()
    }

    /// Binary 8-bit PGM, highest y at the top.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_gray());
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_pgm())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_file(path, &serde_json::to_vec_pretty(self)?)
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::io(path, e))
}

/// Result of an exhaustive anchor search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BruteForce {
    pub landscape: LandscapeCost,
    pub grid: GridSpec,
    pub best_anchor: Vec<f64>,
    pub best_cost: f64,
    /// `(i, j)`: x and y lattice indices of the optimum.
    pub best_index: (usize, usize),
    /// Path length of the optimum.
    pub best_length: f64,
    /// The optimum is collision-free at the verification step.
    pub best_free: bool,
    pub raster: Raster,
    /// `colliding[j][i]`: the cell's path collides at the sampling step.
    pub colliding: Vec<Vec<bool>>,
    /// Upper bound on how far the grid optimum may exceed the continuous
    /// one: cell diagonal times the largest cost slope towards neighbouring
    /// cells of the same collision status.
    pub slack: f64,
}

struct Cells<'a> {
    model: PathModel<'a>,
    landscape: LandscapeCost,
}

impl<'a> Cells<'a> {
    fn new(problem: &'a Problem, cost: &CostParams, landscape: LandscapeCost) -> Result<Self> {
        problem.validate()?;
        if problem.scene.dim != 2 {
            return Err(Error::Unsupported(format!(
                "oracle needs a 2D scene, got {}D",
                problem.scene.dim
            )));
        }
        let template = problem.straight_line(1, ORACLE_DEGREE)?;
        let l = match landscape {
            LandscapeCost::Smooth | LandscapeCost::Exact => Landscape::Total,
            LandscapeCost::Chomp(c) => Landscape::Chomp(c),
        };
        let model = PathModel::new(&problem.scene, template, WeightMode::Fixed, l, *cost)?;
        Ok(Cells { model, landscape })
    }

    /// Cost, length and sampled collision flag of the path through `anchor`.
    fn eval(&self, anchor: &[f64]) -> (f64, f64, bool) {
        let points = self.model.points::<f64>(anchor);
        let colliding = path_collides(self.model.scene(), &points);
        let length = polyline_length(&points);
        let cost = match self.landscape {
            LandscapeCost::Exact => length + exact_collision_cost(self.model.scene(), &points),
            _ => self.model.loss_of_points(&points),
        };
        (cost, length, colliding)
    }
}

/// Evaluates `landscape` for every anchor on `grid`. The optimum is the
/// lowest cost, ties going to the smallest `(j, i)` in row-major order.
pub fn brute_force_optimum(
    problem: &Problem,
    cost: &CostParams,
    landscape: LandscapeCost,
    grid: &GridSpec,
) -> Result<BruteForce> {
    grid.validate()?;
    let cells = Cells::new(problem, cost, landscape)?;
    grid.check_within(problem)?;
    let r = grid.resolution;
    let rows: Vec<Vec<(f64, f64, bool)>> = (0..r)
        .into_par_iter()
        .map(|j| {
            (0..r)
                .map(|i| cells.eval(&[grid.coord(0, i), grid.coord(1, j)]))
                .collect()
        })
        .collect();
    let mut best: Option<(usize, usize, f64)> = None;
    for (j, row) in rows.iter().enumerate() {
        for (i, &(c, _, _)) in row.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("cost at cell ({i}, {j})")));
            }
            if best.map_or(true, |(_, _, b)| c < b) {
                best = Some((i, j, c));
            }
        }
    }
    let (bi, bj, best_cost) = best.expect("grid has at least 4 cells");
    let best_anchor = vec![grid.coord(0, bi), grid.coord(1, bj)];
    let slack = grid.cell_diagonal() * local_slope(grid, &rows, bi, bj);
    Ok(BruteForce {
        landscape,
        grid: grid.clone(),
        best_free: cells.model.verified_free(&best_anchor),
        best_anchor,
        best_cost,
        best_index: (bi, bj),
        best_length: rows[bj][bi].1,
        raster: Raster::new(grid, rows.iter().map(|row| row.iter().map(|c| c.0).collect()).collect()),
        colliding: rows.iter().map(|row| row.iter().map(|c| c.2).collect()).collect(),
        slack,
    })
}

/// Largest `|Δcost| / distance` from cell `(i, j)` to its eight neighbours
/// that share its collision status; the length slope if there are none.
fn local_slope(grid: &GridSpec, rows: &[Vec<(f64, f64, bool)>], i: usize, j: usize) -> f64 {
    let r = grid.resolution as isize;
    let (c0, l0, s0) = rows[j][i];
    let (hx, hy) = (grid.spacing(0), grid.spacing(1));
    let mut same = 0.0f64;
    let mut length = 0.0f64;
    for dj in -1isize..=1 {
        for di in -1isize..=1 {
            let (ni, nj) = (i as isize + di, j as isize + dj);
            if (di, dj) == (0, 0) || ni < 0 || nj < 0 || ni >= r || nj >= r {
                continue;
            }
            let (c, l, s) = rows[nj as usize][ni as usize];
            let dist = (di as f64 * hx).hypot(dj as f64 * hy);
            length = length.max((l - l0).abs() / dist);
            if s == s0 {
                same = same.max((c - c0).abs() / dist);
            }
        }
    }
    if same > 0.0 {
        same
    } else {
        length
    }
}

/// Cost raster of `landscape` over `grid`.
pub fn cost_heatmap(
    problem: &Problem,
    cost: &CostParams,
    landscape: LandscapeCost,
    grid: &GridSpec,
) -> Result<Raster> {
    Ok(brute_force_optimum(problem, cost, landscape, grid)?.raster)
}

/// Violation counts of the minimum, non-colliding and global optimum
/// properties over random one-anchor paths.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub trials: usize,
    pub mp_violations: usize,
    pub np_violations: usize,
    pub gp_violations: usize,
    /// Largest `l(opt) - l(θ) - c(θ)` seen; GP allows up to `slack`.
    pub max_gp_excess: f64,
    pub slack: f64,
}

impl PropertyReport {
    pub fn violations(&self) -> usize {
        self.mp_violations + self.np_violations + self.gp_violations
    }

    /// Sums counts and takes maxima.
    pub fn merge(&mut self, other: &PropertyReport) {
        self.trials += other.trials;
        self.mp_violations += other.mp_violations;
        self.np_violations += other.np_violations;
        self.gp_violations += other.gp_violations;
        self.max_gp_excess = self.max_gp_excess.max(other.max_gp_excess);
        self.slack = self.slack.max(other.slack);
    }
}

/// Checks, for `trials` paths with anchors uniform over the scene bounds and
/// unit weights, against the exact-cost grid optimum `opt`:
/// - MP: `c(opt) <= c(θ)`;
/// - NP: the path collides iff `c(θ) > 0`;
/// - GP: `l(opt) - l(θ) <= c(θ) + opt.slack`.
pub fn verify_properties(
    problem: &Problem,
    cost: &CostParams,
    opt: &BruteForce,
    trials: usize,
    seed: u64,
) -> Result<PropertyReport> {
    if opt.landscape != LandscapeCost::Exact {
        return Err(Error::InvalidArgument(
            "properties are verified against the exact-cost optimum".into(),
        ));
    }
    let cells = Cells::new(problem, cost, LandscapeCost::Exact)?;
    let scene = cells.model.scene();
    let collision = |anchor: &[f64]| {
        let points = cells.model.points::<f64>(anchor);
        (
            polyline_length(&points),
            exact_collision_cost(scene, &points),
            path_collides(scene, &points),
        )
    };
    let (opt_length, opt_c, _) = collision(&opt.best_anchor);
    let b = &scene.bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PropertyReport {
        trials,
        max_gp_excess: f64::NEG_INFINITY,
        slack: opt.slack,
        ..Default::default()
    };
    for _ in 0..trials {
        let anchor = [rng.gen_range(b.min[0]..=b.max[0]), rng.gen_range(b.min[1]..=b.max[1])];
        let (l, c, collides) = collision(&anchor);
        if opt_c > c {
            report.mp_violations += 1;
        }
        if collides != (c > 0.0) {
            report.np_violations += 1;
        }
        let excess = opt_length - l - c;
        report.max_gp_excess = report.max_gp_excess.max(excess);
        if excess > opt.slack {
            report.gp_violations += 1;
        }
    }
    Ok(report)
}

/// Property report of one simple-2D instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub instance: usize,
    pub optimum_free: bool,
    pub report: PropertyReport,
}

/// Property verification over `instances` generated simple-2D problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub resolution: usize,
    pub total: PropertyReport,
    pub instances: Vec<InstanceReport>,
}

/// Runs [`verify_properties`] with `trials` paths on each of `instances`
/// simple-2D problems drawn from `seed`, against the exact-cost optimum on a
/// `resolution`-point grid over the scene.
pub fn verify_suite(seed: u64, instances: usize, trials: usize, resolution: usize) -> Result<SuiteReport> {
    let generator = Generator::Simple2d;
    let cost = generator.cost_params();
    let problems = generate(generator, seed, instances, 1.0)?;
    let per: Vec<InstanceReport> = problems
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let grid = GridSpec::covering(p, resolution)?;
            let opt = brute_force_optimum(p, &cost, LandscapeCost::Exact, &grid)?;
            let report = verify_properties(p, &cost, &opt, trials, seed.wrapping_add(i as u64))?;
            Ok(InstanceReport {
                instance: i,
                optimum_free: opt.best_free,
                report,
            })
        })
        .collect::<Result<_>>()?;
    let mut total = PropertyReport {
        max_gp_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    for r in &per {
        total.merge(&r.report);
    }
    Ok(SuiteReport {
        seed,
        resolution,
        total,
        instances: per,
    })
}
