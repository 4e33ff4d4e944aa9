//! Seeded problem generators.
//!
//! `simple-2d`: one sphere and one box in the unit square, start and goal
//! chosen so the straight line collides while some one-anchor path does not.
//! `box-world-3d`: ten axis-aligned boxes with sides of 5 or 10 in a cube of
//! extent 20.
//!
//! Instance `i` of a seed draws from its own ChaCha stream, so instances are
//! independent of how many others are generated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::CostParams;
use crate::error::{Error, Result};
use crate::geom::{points_collide, Bounds, Obstacle, Scene};
use crate::optimizer::Problem;
use crate::spline::{SampleBasis, SplinePath};

/// Attempts allowed per generated problem.
pub const REJECTION_BUDGET: usize = 10_000;

/// Minimum signed distance of start and goal to every obstacle.
const ENDPOINT_CLEARANCE_2D: f64 = 0.01;
const ENDPOINT_CLEARANCE_3D: f64 = 0.1;

/// Shortest start-goal distance for simple-2D problems.
const MIN_SEPARATION_2D: f64 = 0.3;

/// Anchor grid per axis for the simple-2D feasibility check.
const FEASIBILITY_GRID: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    #[serde(rename = "simple-2d")]
    Simple2d,
    #[serde(rename = "box-world-3d")]
    BoxWorld3d,
}

impl Generator {
    pub fn dim(self) -> usize {
        match self {
            Generator::Simple2d => 2,
            Generator::BoxWorld3d => 3,
        }
    }

    /// Obstacle slots in the scene descriptor.
    pub fn max_obstacles(self) -> usize {
        match self {
            Generator::Simple2d => 2,
            Generator::BoxWorld3d => 10,
        }
    }

    pub fn bounds(self) -> Bounds {
        match self {
            Generator::Simple2d => Bounds::cube(2, 0.0, 1.0),
            Generator::BoxWorld3d => Bounds::cube(3, -10.0, 10.0),
        }
    }

    /// Sampling step and safe distance used with this distribution.
    pub fn cost_params(self) -> CostParams {
        match self {
            Generator::Simple2d => CostParams {
                step: 0.01,
                safe_distance: 0.0,
            },
            Generator::BoxWorld3d => CostParams {
                step: 0.05,
                safe_distance: 5.0,
            },
        }
    }

    /// Anchor count and degree of planned paths.
    pub fn path_shape(self) -> (usize, usize) {
        match self {
            Generator::Simple2d => (1, 2),
            Generator::BoxWorld3d => (10, 2),
        }
    }

    pub fn sample_scene<R: Rng>(self, rng: &mut R) -> Scene {
        let bounds = self.bounds();
        let obstacles = match self {
            Generator::Simple2d => {
                let mut c = || vec![rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
                let sphere_center = c();
                let box_center = c();
                vec![
                    Obstacle::Sphere {
                        center: sphere_center,
                        radius: rng.gen_range(0.05..0.2),
                    },
                    Obstacle::Box {
                        center: box_center,
                        half_extents: vec![rng.gen_range(0.05..0.2), rng.gen_range(0.05..0.2)],
                    },
                ]
            }
            Generator::BoxWorld3d => (0..10)
                .map(|_| {
                    let center = (0..3).map(|_| rng.gen_range(-10.0..10.0)).collect();
                    let half_extents = (0..3)
                        .map(|_| if rng.gen_bool(0.5) { 2.5 } else { 5.0 })
                        .collect();
                    Obstacle::Box {
                        center,
                        half_extents,
                    }
                })
                .collect(),
        };
        Scene::new(self.dim(), bounds, obstacles).expect("generated obstacles are valid")
    }

    fn sample_endpoint<R: Rng>(self, rng: &mut R, scene: &Scene) -> Option<Vec<f64>> {
        let clearance = match self {
            Generator::Simple2d => ENDPOINT_CLEARANCE_2D,
            Generator::BoxWorld3d => ENDPOINT_CLEARANCE_3D,
        };
        let b = &scene.bounds;
        let x: Vec<f64> = (0..b.dim())
            .map(|j| rng.gen_range(b.min[j]..b.max[j]))
            .collect();
        (scene.min_sdf(&x) > clearance).then_some(x)
    }

    /// A problem whose straight line collides exactly when `collides`.
    pub fn sample_problem<R: Rng>(self, rng: &mut R, collides: bool) -> Result<Problem> {
        let cost = self.cost_params();
        let (anchors, degree) = self.path_shape();
        let mut scene = self.sample_scene(rng);
        for attempt in 0..REJECTION_BUDGET {
            // box worlds can leave little free space; redraw them periodically
            if attempt > 0 && (self == Generator::Simple2d || attempt % 100 == 0) {
                scene = self.sample_scene(rng);
            }
            let (Some(start), Some(goal)) = (
                self.sample_endpoint(rng, &scene),
                self.sample_endpoint(rng, &scene),
            ) else {
                continue;
            };
            let problem = Problem {
                scene: scene.clone(),
                start,
                goal,
            };
            if self == Generator::Simple2d && problem.distance() < MIN_SEPARATION_2D {
                continue;
            }
            if problem.straight_line_collides(anchors, degree, &cost)? != collides {
                continue;
            }
            if collides && self == Generator::Simple2d && !one_anchor_feasible(&problem, &cost)? {
                continue;
            }
            return Ok(problem);
        }
        Err(Error::Generation {
            tries: REJECTION_BUDGET,
            reason: format!("no {self:?} problem with straight_line_collides={collides}"),
        })
    }
}

/// Whether some one-anchor, degree-2 path with its anchor on a coarse grid
/// over the scene bounds is collision-free at the verification step.
pub fn one_anchor_feasible(problem: &Problem, cost: &CostParams) -> Result<bool> {
    let template = problem.straight_line(1, 2)?;
    let basis = SampleBasis::new(&template, cost.verification().step)?;
    let weights = template.control_weights();
    let b = &problem.scene.bounds;
    let n = FEASIBILITY_GRID;
    let mid: Vec<f64> = (0..2).map(|j| 0.5 * (problem.start[j] + problem.goal[j])).collect();
    let mut anchors: Vec<Vec<f64>> = (0..n * n)
        .map(|k| {
            (0..2)
                .map(|j| {
                    let i = if j == 0 { k / n } else { k % n };
                    b.min[j] + (b.max[j] - b.min[j]) * i as f64 / (n - 1) as f64
                })
                .collect()
        })
        .collect();
    // wide detours are the likeliest to be free; the order does not change the answer
    anchors.sort_by(|a, c| dist(c, &mid).total_cmp(&dist(a, &mid)));
    let mut ctrl = vec![problem.start.clone(), Vec::new(), problem.goal.clone()];
    for anchor in anchors {
        ctrl[1] = anchor;
        if !points_collide(&problem.scene, basis.points(&ctrl, &weights)) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Random stream for instance `index` of `seed`.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Deterministic alternation: exactly `round_down((i + 1) f)` of the first
/// `i + 1` flags are set.
pub fn mixture_flag(index: u64, fraction: f64) -> bool {
    let f = fraction.clamp(0.0, 1.0);
    ((index + 1) as f64 * f).floor() > (index as f64 * f).floor()
}

/// `count` simple-2D problems, all with colliding straight lines.
pub fn gen_simple2d(seed: u64, count: usize) -> Result<Vec<Problem>> {
    generate(Generator::Simple2d, seed, count, 1.0)
}

/// `count` box-world problems with a 50/50 straight-line collision mixture.
pub fn gen_boxworld3d(seed: u64, count: usize) -> Result<Vec<Problem>> {
    generate(Generator::BoxWorld3d, seed, count, 0.5)
}

pub fn generate(generator: Generator, seed: u64, count: usize, collide_fraction: f64) -> Result<Vec<Problem>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    (0..count as u64)
        .map(|i| generator.sample_problem(&mut instance_rng(seed, i), mixture_flag(i, collide_fraction)))
        .collect()
}

/// The fixed sphere-blocking instance used to calibrate CHOMP: a sphere
/// straddling the segment from start to goal, with the box off to the side.
pub fn calibration_problem() -> Problem {
    let scene = Scene::new(
        2,
        Generator::Simple2d.bounds(),
        vec![
            Obstacle::sphere(vec![0.5, 0.5], 0.15).expect("valid sphere"),
            Obstacle::cuboid(vec![0.85, 0.15], vec![0.08, 0.06]).expect("valid box"),
        ],
    )
    .expect("valid scene");
    Problem::new(scene, vec![0.15, 0.55], vec![0.85, 0.45]).expect("valid problem")
}

/// The straight-line path of the generator's shape.
pub fn straight_path(generator: Generator, problem: &Problem) -> Result<SplinePath> {
    let (n, p) = generator.path_shape();
    problem.straight_line(n, p)
}
