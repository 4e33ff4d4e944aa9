//! The planning loss and the CHOMP baseline.
//!
//! Exact collision cost charges each obstacle the path enters with the
//! circumference of its bounding sphere. Over samples this is spread evenly:
//! a colliding sample pays `R(o) / count` where `count` is the number of
//! colliding samples selecting the same obstacle. The smooth bound multiplies
//! every such share by `H(sdf) = 2 / (1 + e^(sdf - safe_distance))`, which is
//! at least one inside obstacles, so it never undercuts the exact cost.
//!
//! Shares, counts and the selected obstacle are piecewise constant in the
//! path parameters; they are evaluated on plain values and enter the
//! gradient as constants. Only `H`'s distance argument and the length carry
//! gradient.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::geom::{Obstacle, Scene};
use crate::spline::{SampleSet, SplinePath};

/// `H` saturates beyond this distance from the safe distance.
const STEP_CLAMP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Sampling step in spline parameter units.
    pub step: f64,
    /// Safe distance `delta` in `H`.
    pub safe_distance: f64,
}

impl CostParams {
    pub fn new(step: f64, safe_distance: f64) -> Result<Self> {
        let p = CostParams {
            step,
            safe_distance,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sampling step must be positive, got {}",
                self.step
            )));
        }
        if !(self.safe_distance.is_finite() && self.safe_distance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "safe distance must be non-negative, got {}",
                self.safe_distance
            )));
        }
        Ok(())
    }

    /// Step used to judge success: twice as fine as the optimization step.
    pub fn verification(&self) -> CostParams {
        CostParams {
            step: self.step / 2.0,
            ..*self
        }
    }

    /// Checks that consecutive samples are closer than the smallest obstacle
    /// feature, so no obstacle fits between two samples.
    pub fn check_sampling(&self, scene: &Scene, samples: &SampleSet) -> Result<()> {
        if let Some(feature) = scene.min_feature() {
            let spacing = samples.max_spacing();
            if spacing >= feature {
                return Err(Error::InvalidArgument(format!(
                    "sample spacing {spacing:.4} is not below the smallest obstacle radius {feature:.4}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub length: f64,
    pub exact_collision: f64,
    pub smooth_collision: f64,
    pub total_smooth: f64,
    pub collides: bool,
}

/// CHOMP collision weight and clearance margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChompParams {
    pub lambda: f64,
    pub epsilon: f64,
}

impl ChompParams {
    pub fn new(lambda: f64, epsilon: f64) -> Result<Self> {
        let p = ChompParams { lambda, epsilon };
        p.validate()?;
        Ok(p)
    }

    /// The uncalibrated default, `lambda = epsilon = 1`.
    pub fn default_uncalibrated() -> Self {
        ChompParams {
            lambda: 1.0,
            epsilon: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0)
            || !(self.epsilon.is_finite() && self.epsilon > 0.0)
        {
            return Err(Error::InvalidArgument(format!(
                "CHOMP parameters must be finite and positive, got {self:?}"
            )));
        }
        Ok(())
    }
}

fn distance<S: Real>(a: &[S], b: &[S]) -> S {
    let mut d = [a[0]; 3];
    for j in 0..a.len() {
        d[j] = b[j] - a[j];
    }
    S::norm(&d[..a.len()])
}

/// Polyline length through the samples.
pub fn path_length<P: AsRef<[f64]>>(samples: &[P]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "path length needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    Ok(samples
        .windows(2)
        .map(|w| distance(w[0].as_ref(), w[1].as_ref()))
        .sum())
}

/// Generic polyline length; `points` must hold at least two samples.
pub fn polyline_length<S: Real>(points: &[Vec<S>]) -> S {
    let mut total = distance(&points[0], &points[1]);
    for w in points[1..].windows(2) {
        total = total + distance(&w[0], &w[1]);
    }
    total
}

/// Per-sample object selection and per-object collision counts.
#[derive(Debug, Clone)]
pub struct Classification {
    /// Selected obstacle and its signed distance, `None` for an empty scene.
    pub nearest: Vec<Option<(usize, f64)>>,
    /// Colliding samples selecting each obstacle.
    pub colliding_per_object: Vec<usize>,
}

impl Classification {
    pub fn new<P: AsRef<[f64]>>(scene: &Scene, samples: &[P]) -> Self {
        let mut colliding_per_object = vec![0; scene.obstacles.len()];
        let nearest = samples
            .iter()
            .map(|x| {
                let n = scene.nearest(x.as_ref());
                if let Some((i, d)) = n {
                    if d < 0.0 {
                        colliding_per_object[i] += 1;
                    }
                }
                n
            })
            .collect();
        Classification {
            nearest,
            colliding_per_object,
        }
    }

    pub fn is_colliding(&self, i: usize) -> bool {
        matches!(self.nearest[i], Some((_, d)) if d < 0.0)
    }

    pub fn any_colliding(&self) -> bool {
        self.colliding_per_object.iter().any(|&c| c > 0)
    }

    /// Share `R(o) / count` of a colliding sample; zero otherwise.
    pub fn point_cost(&self, scene: &Scene, i: usize) -> f64 {
        match self.nearest[i] {
            Some((o, d)) if d < 0.0 => {
                scene.obstacles[o].circumference() / self.colliding_per_object[o] as f64
            }
            _ => 0.0,
        }
    }
}

/// Exact collision cost as a sum over obstacles: `R(o)` for every obstacle
/// containing at least one sample.
pub fn exact_collision_cost<P: AsRef<[f64]>>(scene: &Scene, samples: &[P]) -> f64 {
    scene
        .obstacles
        .iter()
        .filter(|o| samples.iter().any(|x| o.sdf_at(x.as_ref()) < 0.0))
        .map(Obstacle::circumference)
        .sum()
}

/// Exact collision cost as a sum of per-sample shares.
///
/// Agrees with [`exact_collision_cost`] unless a sample lies inside two
/// obstacles at once: the selector then charges only the deeper one, and an
/// obstacle hidden entirely behind another goes unpaid.
pub fn pointwise_collision_cost<P: AsRef<[f64]>>(scene: &Scene, samples: &[P]) -> f64 {
    let class = Classification::new(scene, samples);
    (0..samples.len())
        .map(|i| class.point_cost(scene, i))
        .sum()
}

/// Number of colliding samples that select the same obstacle as sample
/// `index`, which must itself be colliding.
pub fn delta_count<P: AsRef<[f64]>>(scene: &Scene, samples: &[P], index: usize) -> Result<usize> {
    check_index(samples.len(), index)?;
    let class = Classification::new(scene, samples);
    match class.nearest[index] {
        Some((o, d)) if d < 0.0 => Ok(class.colliding_per_object[o]),
        _ => Err(Error::ContractViolation(format!(
            "sample {index} does not collide"
        ))),
    }
}

pub fn point_cost<P: AsRef<[f64]>>(scene: &Scene, samples: &[P], index: usize) -> Result<f64> {
    check_index(samples.len(), index)?;
    Ok(Classification::new(scene, samples).point_cost(scene, index))
}

fn check_index(len: usize, index: usize) -> Result<()> {
    if index >= len {
        return Err(Error::InvalidArgument(format!(
            "sample index {index} out of range for {len} samples"
        )));
    }
    Ok(())
}

/// Smooth step `2 / (1 + e^(x - delta))`.
pub fn step_h(x: f64, safe_distance: f64) -> f64 {
    step_h_at(x, safe_distance)
}

pub fn step_h_at<S: Real>(x: S, safe_distance: f64) -> S {
    let z = x - safe_distance;
    if z.value() > STEP_CLAMP {
        x.constant(0.0)
    } else if z.value() < -STEP_CLAMP {
        x.constant(2.0)
    } else {
        (z.exp() + 1.0).constant(2.0) / (z.exp() + 1.0)
    }
}

/// Smooth upper bound of the collision cost.
pub fn smooth_collision_cost<P: AsRef<[f64]>>(
    scene: &Scene,
    samples: &[P],
    params: &CostParams,
) -> f64 {
    let class = Classification::new(scene, samples);
    let pts: Vec<&[f64]> = samples.iter().map(|p| p.as_ref()).collect();
    smooth_collision_at(scene, &pts, &class, params.safe_distance).unwrap_or(0.0)
}

/// Generic smooth collision sum; `None` when no sample collides.
///
/// The distance fed to `H` is the selected obstacle's SDF, equal in value to
/// the minimum over all obstacles with the gradient routed to the selection.
pub fn smooth_collision_at<S: Real, P: AsRef<[S]>>(
    scene: &Scene,
    points: &[P],
    class: &Classification,
    safe_distance: f64,
) -> Option<S> {
    let mut total: Option<S> = None;
    for (i, x) in points.iter().enumerate() {
        let share = class.point_cost(scene, i);
        if share == 0.0 {
            continue;
        }
        let (o, _) = class.nearest[i].expect("colliding samples have a selection");
        let sdf = scene.obstacles[o].sdf_at(x.as_ref());
        let term = step_h_at(sdf, safe_distance) * share;
        total = Some(match total {
            Some(t) => t + term,
            None => term,
        });
    }
    total
}

/// Full breakdown for already-sampled points.
pub fn breakdown_from_samples<P: AsRef<[f64]>>(
    scene: &Scene,
    samples: &[P],
    params: &CostParams,
) -> Result<CostBreakdown> {
    let length = path_length(samples)?;
    let class = Classification::new(scene, samples);
    let pts: Vec<&[f64]> = samples.iter().map(|p| p.as_ref()).collect();
    let smooth = smooth_collision_at(scene, &pts, &class, params.safe_distance).unwrap_or(0.0);
    let exact: f64 = (0..samples.len()).map(|i| class.point_cost(scene, i)).sum();
    Ok(CostBreakdown {
        length,
        exact_collision: exact,
        smooth_collision: smooth,
        total_smooth: length + smooth,
        collides: exact > 0.0,
    })
}

/// Length plus smooth collision cost of `path`, sampled at `params.step`.
pub fn total_loss(scene: &Scene, path: &SplinePath, params: &CostParams) -> Result<CostBreakdown> {
    params.validate()?;
    check_dims(scene, path)?;
    let samples = path.sample(params.step)?;
    breakdown_from_samples(scene, &samples.points, params)
}

pub(crate) fn check_dims(scene: &Scene, path: &SplinePath) -> Result<()> {
    if path.dim() != scene.dim {
        return Err(Error::DimensionMismatch {
            expected: scene.dim,
            got: path.dim(),
        });
    }
    Ok(())
}

/// CHOMP obstacle cost of one sample at signed distance `sdf`.
pub fn chomp_point_cost(sdf: f64, params: &ChompParams) -> f64 {
    chomp_point_cost_at(sdf, params)
}

pub fn chomp_point_cost_at<S: Real>(sdf: S, params: &ChompParams) -> S {
    let eps = params.epsilon;
    let d = sdf.value();
    if d < 0.0 {
        -sdf + 0.5 * eps
    } else if d <= eps {
        (sdf - eps).pow2() / (2.0 * eps)
    } else {
        sdf.constant(0.0)
    }
}

/// Generic `lambda * sum of CHOMP point costs`; `None` when every term is
/// identically zero.
pub fn chomp_collision_at<S: Real, P: AsRef<[S]>>(
    scene: &Scene,
    points: &[P],
    params: &ChompParams,
) -> Option<S> {
    let mut total: Option<S> = None;
    for x in points {
        let x = x.as_ref();
        let values: Vec<f64> = x.iter().map(|v| v.value()).collect();
        let (o, d) = scene.nearest(&values)?;
        if d > params.epsilon {
            continue;
        }
        let term = chomp_point_cost_at(scene.obstacles[o].sdf_at(x), params) * params.lambda;
        total = Some(match total {
            Some(t) => t + term,
            None => term,
        });
    }
    total
}

/// Length plus `lambda`-weighted CHOMP obstacle cost.
pub fn chomp_total_loss(
    scene: &Scene,
    path: &SplinePath,
    cost_params: &CostParams,
    chomp: &ChompParams,
) -> Result<f64> {
    cost_params.validate()?;
    chomp.validate()?;
    check_dims(scene, path)?;
    let samples = path.sample(cost_params.step)?;
    Ok(path_length(&samples.points)? + chomp_collision_at(scene, &samples.points, chomp).unwrap_or(0.0))
}

/// Fingerprint of every discrete decision the losses take at these samples:
/// selected obstacle, collision flags, the CHOMP band, and the active branch
/// of each box distance.
pub fn branch_regime<P: AsRef<[f64]>>(
    scene: &Scene,
    samples: &[P],
    params: &CostParams,
    chomp: Option<&ChompParams>,
) -> u64 {
    let mut h = DefaultHasher::new();
    for x in samples {
        let x = x.as_ref();
        let Some((o, d)) = scene.nearest(x) else {
            continue;
        };
        o.hash(&mut h);
        (d < 0.0).hash(&mut h);
        (d - params.safe_distance > STEP_CLAMP).hash(&mut h);
        (d - params.safe_distance < -STEP_CLAMP).hash(&mut h);
        if let Some(c) = chomp {
            (d <= c.epsilon).hash(&mut h);
        }
        if let Obstacle::Box {
            center,
            half_extents,
        } = &scene.obstacles[o]
        {
            let mut argmax = 0;
            let mut best = f64::NEG_INFINITY;
            for j in 0..x.len() {
                let q = (x[j] - center[j]).abs() - half_extents[j];
                (q > 0.0).hash(&mut h);
                (x[j] < center[j]).hash(&mut h);
                if q > best {
                    best = q;
                    argmax = j;
                }
            }
            argmax.hash(&mut h);
        }
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Bounds;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn unit_sphere_scene() -> Scene {
        Scene::new(
            2,
            Bounds::cube(2, -5.0, 5.0),
            vec![Obstacle::sphere(vec![0.0, 0.0], 1.0).unwrap()],
        )
        .unwrap()
    }

    fn line(from: [f64; 2], to: [f64; 2], n: usize) -> Vec<Vec<f64>> {
        (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                vec![from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])]
            })
            .collect()
    }

    #[test]
    fn length_examples() {
        assert_abs_diff_eq!(path_length(&line([0.0, 0.0], [3.0, 4.0], 17)).unwrap(), 5.0, epsilon = 1e-12);
        assert_eq!(path_length(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap(), 1.0);
        let arc: Vec<Vec<f64>> = (0..)
            .map(|k| 0.05 * k as f64)
            .take_while(|&t| t <= FRAC_PI_2)
            .chain(std::iter::once(FRAC_PI_2))
            .map(|t| vec![t.cos(), t.sin()])
            .collect();
        let l = path_length(&arc).unwrap();
        assert!(l < FRAC_PI_2 && l > 2f64.sqrt());
        assert!(path_length(&[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn exact_cost_examples() {
        let scene = unit_sphere_scene();
        assert_eq!(exact_collision_cost(&scene, &line([-3.0, 5.0], [3.0, 5.0], 60)), 0.0);
        assert_abs_diff_eq!(
            exact_collision_cost(&scene, &line([-3.0, 0.0], [3.0, 0.0], 60)),
            TAU,
            epsilon = 1e-12
        );
        let two = Scene::new(
            2,
            Bounds::cube(2, -10.0, 10.0),
            vec![
                Obstacle::sphere(vec![0.0, 0.0], 1.0).unwrap(),
                Obstacle::cuboid(vec![4.0, 0.0], vec![1.0, 1.0]).unwrap(),
            ],
        )
        .unwrap();
        let through = line([-3.0, 0.0], [7.0, 0.0], 100);
        assert_abs_diff_eq!(exact_collision_cost(&two, &through), 15.1690, epsilon = 1e-4);
        assert_abs_diff_eq!(
            pointwise_collision_cost(&two, &through),
            exact_collision_cost(&two, &through),
            epsilon = 1e-9
        );
    }

    #[test]
    fn masked_obstacle_is_only_charged_by_the_indicator_sum() {
        let scene = Scene::new(
            2,
            Bounds::cube(2, -10.0, 10.0),
            vec![
                Obstacle::sphere(vec![0.0, 0.0], 3.0).unwrap(),
                Obstacle::sphere(vec![0.0, 0.0], 0.5).unwrap(),
            ],
        )
        .unwrap();
        let samples = line([-1.0, 0.0], [1.0, 0.0], 10);
        // every sample selects the big sphere (deeper inside it)
        assert_abs_diff_eq!(pointwise_collision_cost(&scene, &samples), 3.0 * TAU, epsilon = 1e-9);
        assert_abs_diff_eq!(exact_collision_cost(&scene, &samples), 3.5 * TAU, epsilon = 1e-9);
    }

    #[test]
    fn delta_examples() {
        let scene = Scene::new(
            2,
            Bounds::cube(2, -10.0, 10.0),
            vec![
                Obstacle::sphere(vec![0.0, 0.0], 1.0).unwrap(),
                Obstacle::sphere(vec![5.0, 0.0], 1.0).unwrap(),
            ],
        )
        .unwrap();
        let three = vec![vec![-2.0, 0.0], vec![-0.5, 0.0], vec![0.0, 0.0], vec![0.5, 0.0], vec![2.0, 0.0]];
        assert_eq!(delta_count(&scene, &three, 2).unwrap(), 3);
        let graze = vec![vec![-2.0, 0.9], vec![0.0, 0.99], vec![2.0, 0.9]];
        assert_eq!(delta_count(&scene, &graze, 1).unwrap(), 1);
        let mixed = vec![vec![-0.2, 0.0], vec![0.2, 0.0], vec![2.5, 0.0], vec![5.0, 0.0]];
        assert_eq!(delta_count(&scene, &mixed, 3).unwrap(), 1);
        assert_eq!(delta_count(&scene, &mixed, 0).unwrap(), 2);
        assert!(matches!(delta_count(&scene, &mixed, 2), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn point_cost_examples() {
        let scene = unit_sphere_scene();
        let sole = vec![vec![-3.0, 0.0], vec![0.0, 0.0], vec![3.0, 0.0]];
        assert_abs_diff_eq!(point_cost(&scene, &sole, 1).unwrap(), TAU, epsilon = 1e-12);
        let four = vec![
            vec![-3.0, 0.0],
            vec![-0.6, 0.0],
            vec![-0.2, 0.0],
            vec![0.2, 0.0],
            vec![0.6, 0.0],
            vec![3.0, 0.0],
        ];
        assert_abs_diff_eq!(point_cost(&scene, &four, 2).unwrap(), FRAC_PI_2, epsilon = 1e-12);
        assert_eq!(point_cost(&scene, &four, 0).unwrap(), 0.0);
    }

    #[test]
    fn step_examples() {
        assert_eq!(step_h(0.3, 0.3), 1.0);
        assert_abs_diff_eq!(step_h(2.0 + 3f64.ln(), 2.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(step_h(2.0 - 3f64.ln(), 2.0), 1.5, epsilon = 1e-12);
        assert_eq!(step_h(1000.0, 0.0), 0.0);
        assert_eq!(step_h(-1000.0, 0.0), 2.0);
        assert!((step_h(49.0, 0.0) - 2.0 / (1.0 + 49f64.exp())).abs() < 1e-20);
    }

    #[test]
    fn smooth_cost_examples() {
        let scene = unit_sphere_scene();
        assert_eq!(
            smooth_collision_cost(&scene, &line([-3.0, 5.0], [3.0, 5.0], 60), &CostParams::new(0.05, 0.0).unwrap()),
            0.0
        );
        let params = CostParams::new(0.05, 0.0).unwrap();
        let c = smooth_collision_cost(&scene, &line([-3.0, 0.0], [3.0, 0.0], 60), &params);
        assert!(c >= TAU && c < 2.0 * TAU, "{c}");

        // sole collider at sdf = delta - ln 3 has H = 1.5
        let delta = 0.1;
        let sdf = delta - 3f64.ln();
        let scene = Scene::new(
            2,
            Bounds::cube(2, -9.0, 9.0),
            vec![Obstacle::sphere(vec![0.0, 0.0], 2.0).unwrap()],
        )
        .unwrap();
        let samples = vec![vec![-8.0, 0.0], vec![2.0 + sdf, 0.0], vec![8.0, 0.0]];
        let params = CostParams::new(0.05, delta).unwrap();
        assert_abs_diff_eq!(smooth_collision_cost(&scene, &samples, &params), 2.0 * TAU * 1.5, epsilon = 1e-12);
    }

    #[test]
    fn total_loss_examples() {
        let params = CostParams::new(0.05, 0.0).unwrap();
        let empty = Scene::empty(Bounds::cube(2, -10.0, 10.0)).unwrap();
        let free = SplinePath::straight_line(&[0.0, 0.0], &[3.0, 4.0], 3, 2).unwrap();
        let b = total_loss(&empty, &free, &params).unwrap();
        assert_abs_diff_eq!(b.total_smooth, 5.0, epsilon = 1e-9);
        assert!(!b.collides);

        let scene = unit_sphere_scene();
        let through = SplinePath::straight_line(&[-3.0, 0.0], &[3.0, 0.0], 3, 2).unwrap();
        let b = total_loss(&scene, &through, &params).unwrap();
        assert_abs_diff_eq!(b.length, 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.exact_collision, TAU, epsilon = 1e-9);
        assert_abs_diff_eq!(b.total_smooth, 6.0 + b.smooth_collision, epsilon = 1e-12);
        assert!(b.collides);

        let degenerate = SplinePath::straight_line(&[1.0, 1.0], &[1.0, 1.0], 3, 2).unwrap();
        assert_eq!(total_loss(&empty, &degenerate, &params).unwrap().total_smooth, 0.0);
    }

    #[test]
    fn straight_line_length_is_chord() {
        let params = CostParams::new(0.013, 0.0).unwrap();
        let empty = Scene::empty(Bounds::cube(3, -30.0, 30.0)).unwrap();
        for n in 1..8 {
            for p in 1..=3.min(n + 1) {
                let path = SplinePath::straight_line(&[0.0, 1.0, -2.0], &[20.0, 7.0, 3.0], n, p).unwrap();
                let want = (400.0f64 + 36.0 + 25.0).sqrt();
                assert_abs_diff_eq!(total_loss(&empty, &path, &params).unwrap().length, want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn chomp_point_examples() {
        let p = ChompParams::new(1.0, 1.0).unwrap();
        assert_eq!(chomp_point_cost(-1.0, &p), 1.5);
        assert_eq!(chomp_point_cost(0.5, &p), 0.125);
        assert_eq!(chomp_point_cost(2.0, &p), 0.0);
        assert_eq!(chomp_point_cost(0.0, &p), 0.5);
        assert!(ChompParams::new(0.0, 1.0).is_err());
        assert!(ChompParams::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn chomp_total_examples() {
        let scene = unit_sphere_scene();
        let params = CostParams::new(0.05, 0.0).unwrap();
        let free = SplinePath::straight_line(&[-3.0, 4.0], &[3.0, 4.0], 3, 2).unwrap();
        let chomp = ChompParams::new(5.0, 1.0).unwrap();
        assert_abs_diff_eq!(chomp_total_loss(&scene, &free, &params, &chomp).unwrap(), 6.0, epsilon = 1e-9);

        // lambda -> 0 leaves the length
        let tiny = ChompParams::new(1e-300, 1.0).unwrap();
        let through = SplinePath::straight_line(&[-3.0, 0.0], &[3.0, 0.0], 3, 2).unwrap();
        assert_abs_diff_eq!(chomp_total_loss(&scene, &through, &params, &tiny).unwrap(), 6.0, epsilon = 1e-9);

        // one sample at sdf = -1 with lambda = 2, eps = 1
        let pts = vec![vec![-3.0, 0.0], vec![0.0, 0.0], vec![3.0, 0.0]];
        let c = ChompParams::new(2.0, 1.0).unwrap();
        let l = path_length(&pts).unwrap();
        let got = l + chomp_collision_at(&scene, &pts, &c).unwrap();
        assert_abs_diff_eq!(got, l + 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_check_flags_coarse_steps() {
        let scene = unit_sphere_scene();
        let path = SplinePath::straight_line(&[-4.0, 0.0], &[4.0, 0.0], 3, 2).unwrap();
        let params = CostParams::new(0.05, 0.0).unwrap();
        assert!(params.check_sampling(&scene, &path.sample(0.05).unwrap()).is_ok());
        assert!(params.check_sampling(&scene, &path.sample(0.5).unwrap()).is_err());
    }

    #[test]
    fn breakdown_serializes_all_fields() {
        let b = CostBreakdown {
            length: 1.0,
            exact_collision: 0.0,
            smooth_collision: 0.0,
            total_smooth: 1.0,
            collides: false,
        };
        let v = serde_json::to_value(b).unwrap();
        for k in ["length", "exact_collision", "smooth_collision", "total_smooth", "collides"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_obstacle() -> impl Strategy<Value = Obstacle> {
            prop_oneof![
                (-5.0..5.0f64, -5.0..5.0f64, 0.3..2.5f64)
                    .prop_map(|(x, y, r)| Obstacle::sphere(vec![x, y], r).unwrap()),
                (-5.0..5.0f64, -5.0..5.0f64, 0.3..2.5f64, 0.3..2.5f64)
                    .prop_map(|(x, y, a, b)| Obstacle::cuboid(vec![x, y], vec![a, b]).unwrap()),
            ]
        }

        fn arb_scene() -> impl Strategy<Value = Scene> {
            proptest::collection::vec(arb_obstacle(), 0..5)
                .prop_map(|obs| Scene::new(2, Bounds::cube(2, -10.0, 10.0), obs).unwrap())
        }

        fn arb_path() -> impl Strategy<Value = SplinePath> {
            (1usize..5, 1usize..4).prop_flat_map(|(n, p)| {
                let p = p.min(n + 1);
                (
                    proptest::collection::vec(-8.0..8.0f64, 2 * (n + 2)),
                    proptest::collection::vec(0.05..=1.0f64, n),
                )
                    .prop_map(move |(c, w)| {
                        let anchors = (0..n).map(|k| vec![c[2 * k + 4], c[2 * k + 5]]).collect();
                        SplinePath::new(p, vec![c[0], c[1]], vec![c[2], c[3]], anchors, w).unwrap()
                    })
            })
        }

        fn samples_in_two_obstacles(scene: &Scene, samples: &[Vec<f64>]) -> bool {
            samples.iter().any(|x| {
                scene
                    .obstacles
                    .iter()
                    .filter(|o| o.sdf_at(x.as_slice()) < 0.0)
                    .count()
                    > 1
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn smooth_bounds_exact(scene in arb_scene(), path in arb_path(), delta in 0.0..2.0f64) {
                let params = CostParams::new(0.05, delta).unwrap();
                let b = total_loss(&scene, &path, &params).unwrap();
                prop_assert!(b.smooth_collision >= b.exact_collision - 1e-9, "{:?}", b);
                prop_assert_eq!(b.collides, b.exact_collision > 0.0);
                let samples = path.sample(params.step).unwrap().points;
                if !samples_in_two_obstacles(&scene, &samples) {
                    prop_assert!(b.smooth_collision >= exact_collision_cost(&scene, &samples) - 1e-9);
                }
            }

            #[test]
            fn zero_costs_iff_no_collision(scene in arb_scene(), path in arb_path(), delta in 0.0..2.0f64) {
                let params = CostParams::new(0.05, delta).unwrap();
                let samples = path.sample(params.step).unwrap().points;
                let free = !crate::geom::path_collides(&scene, &samples);
                prop_assert_eq!(smooth_collision_cost(&scene, &samples, &params) == 0.0, free);
                prop_assert_eq!(exact_collision_cost(&scene, &samples) == 0.0, free);
                prop_assert_eq!(pointwise_collision_cost(&scene, &samples) == 0.0, free);
            }

            #[test]
            fn indicator_and_share_sums_agree(scene in arb_scene(), path in arb_path()) {
                let samples = path.sample(0.05).unwrap().points;
                prop_assume!(!samples_in_two_obstacles(&scene, &samples));
                let a = exact_collision_cost(&scene, &samples);
                let b = pointwise_collision_cost(&scene, &samples);
                prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
            }

            #[test]
            fn exact_parts_scale_linearly(
                scene in arb_scene(), path in arb_path(), k in prop_oneof![Just(0.1), Just(10.0)]
            ) {
                let params = CostParams::new(0.05, 0.0).unwrap();
                let b = total_loss(&scene, &path, &params).unwrap();
                let bk = total_loss(&scene.scaled(k), &path.scaled(k), &params).unwrap();
                prop_assert!((bk.length - k * b.length).abs() <= 1e-9 * k * b.length.max(1.0));
                prop_assert_eq!(bk.collides, b.collides);
                prop_assert!((bk.exact_collision - k * b.exact_collision).abs() <= 1e-9 * k * b.exact_collision.max(1.0));
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn sampled_length_grows_under_refinement(path in arb_path()) {
                let lengths: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
                    .iter()
                    .map(|&s| path_length(&path.sample(s).unwrap().points).unwrap())
                    .collect();
                for w in lengths.windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-9, "{:?}", lengths);
                }
            }
        }
    }
}
