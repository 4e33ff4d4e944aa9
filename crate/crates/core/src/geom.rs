//! Obstacle primitives, signed distances and the scene container.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};

/// Axis-aligned sphere or box obstacle in 2 or 3 dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Obstacle {
    Sphere { center: Vec<f64>, radius: f64 },
    Box { center: Vec<f64>, half_extents: Vec<f64> },
}

impl Obstacle {
    pub fn sphere(center: Vec<f64>, radius: f64) -> Result<Self> {
        let o = Obstacle::Sphere { center, radius };
        o.validate()?;
        Ok(o)
    }

    pub fn cuboid(center: Vec<f64>, half_extents: Vec<f64>) -> Result<Self> {
        let o = Obstacle::Box {
            center,
            half_extents,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "obstacle dimension must be 2 or 3, got {dim}"
            )));
        }
        if self.center().iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite obstacle center".into()));
        }
        match self {
            Obstacle::Sphere { radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "sphere radius must be positive, got {radius}"
                    )));
                }
            }
            Obstacle::Box { half_extents, .. } => {
                if half_extents.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: half_extents.len(),
                    });
                }
                if half_extents.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                    return Err(Error::InvalidArgument(format!(
                        "box half extents must be positive, got {half_extents:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Obstacle::Sphere { center, .. } | Obstacle::Box { center, .. } => center,
        }
    }

    /// Radius of the bounding sphere centered on the obstacle's own center.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Obstacle::Sphere { radius, .. } => *radius,
            Obstacle::Box { half_extents, .. } => f64::norm(half_extents),
        }
    }

    /// Collision penalty weight: circumference of the bounding sphere.
    pub fn circumference(&self) -> f64 {
        TAU * self.bounding_radius()
    }

    /// Signed distance, checked for dimension.
    pub fn sdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.sdf_at(x))
    }

    /// Signed distance for any scalar type. Negative inside, exact Euclidean
    /// distance outside; inside a box it is minus the distance to the nearest
    /// face. The caller guarantees matching dimensions.
    pub fn sdf_at<S: Real>(&self, x: &[S]) -> S {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            Obstacle::Sphere { center, radius } => {
                let mut d = [x[0]; 3];
                for (i, (&xi, &ci)) in x.iter().zip(center).enumerate() {
                    d[i] = xi - ci;
                }
                S::norm(&d[..x.len()]) - *radius
            }
            Obstacle::Box {
                center,
                half_extents,
            } => {
                let mut q = [x[0]; 3];
                for i in 0..x.len() {
                    q[i] = (x[i] - center[i]).abs() - half_extents[i];
                }
                let q = &q[..x.len()];
                if q.iter().any(|qi| qi.value() > 0.0) {
                    let mut pos = [x[0]; 3];
                    let mut k = 0;
                    for &qi in q.iter().filter(|qi| qi.value() > 0.0) {
                        pos[k] = qi;
                        k += 1;
                    }
                    S::norm(&pos[..k])
                } else {
                    q[1..].iter().fold(q[0], |m, &qi| m.max_select(qi))
                }
            }
        }
    }

    pub(crate) fn scaled(&self, k: f64) -> Obstacle {
        match self {
            Obstacle::Sphere { center, radius } => Obstacle::Sphere {
                center: center.iter().map(|c| c * k).collect(),
                radius: radius * k,
            },
            Obstacle::Box {
                center,
                half_extents,
            } => Obstacle::Box {
                center: center.iter().map(|c| c * k).collect(),
                half_extents: half_extents.iter().map(|h| h * k).collect(),
            },
        }
    }
}

/// Axis-aligned workspace extents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Bounds {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        let b = Bounds { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Bounds {
            min: vec![lo; dim],
            max: vec![hi; dim],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() {
            return Err(Error::DimensionMismatch {
                expected: self.min.len(),
                got: self.max.len(),
            });
        }
        if self
            .min
            .iter()
            .zip(&self.max)
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return Err(Error::InvalidArgument(format!(
                "empty or non-finite bounds {:?}..{:?}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn diagonal(&self) -> f64 {
        let d: Vec<f64> = self.max.iter().zip(&self.min).map(|(a, b)| a - b).collect();
        f64::norm(&d)
    }

    pub fn center(&self) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(a, b)| 0.5 * (b - a))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }
}

/// Obstacles sharing one dimension, plus the workspace bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneRepr")]
pub struct Scene {
    pub dim: usize,
    pub bounds: Bounds,
    pub obstacles: Vec<Obstacle>,
}

#[derive(Deserialize)]
struct SceneRepr {
    dim: usize,
    bounds: Bounds,
    obstacles: Vec<Obstacle>,
}

impl TryFrom<SceneRepr> for Scene {
    type Error = Error;

    fn try_from(r: SceneRepr) -> Result<Self> {
        Scene::new(r.dim, r.bounds, r.obstacles)
    }
}

impl Scene {
    pub fn new(dim: usize, bounds: Bounds, obstacles: Vec<Obstacle>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "scene dimension must be 2 or 3, got {dim}"
            )));
        }
        bounds.validate()?;
        if bounds.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bounds.dim(),
            });
        }
        for o in &obstacles {
            o.validate()?;
            if o.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: o.dim(),
                });
            }
        }
        Ok(Scene {
            dim,
            bounds,
            obstacles,
        })
    }

    pub fn empty(bounds: Bounds) -> Result<Self> {
        Scene::new(bounds.dim(), bounds, Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    /// Object selector: index of the obstacle with the smallest signed
    /// distance at `x` and that distance. Ties go to the lowest index.
    pub fn select_object(&self, x: &[f64]) -> Result<(usize, f64)> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.nearest(x).ok_or(Error::EmptyScene)
    }

    /// Unchecked selector; `None` for an empty scene.
    #[inline]
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, o) in self.obstacles.iter().enumerate() {
            let d = o.sdf_at(x);
            match best {
                Some((_, bd)) if d >= bd => {}
                _ => best = Some((i, d)),
            }
        }
        best
    }

    /// Minimum signed distance over all obstacles (`+inf` when empty).
    pub fn min_sdf(&self, x: &[f64]) -> f64 {
        self.nearest(x).map_or(f64::INFINITY, |(_, d)| d)
    }

    /// Smallest bounding radius among the obstacles.
    pub fn min_feature(&self) -> Option<f64> {
        self.obstacles
            .iter()
            .map(Obstacle::bounding_radius)
            .reduce(f64::min)
    }

    /// The same scene uniformly scaled about the origin.
    pub fn scaled(&self, k: f64) -> Scene {
        Scene {
            dim: self.dim,
            bounds: Bounds {
                min: self.bounds.min.iter().map(|v| v * k).collect(),
                max: self.bounds.max.iter().map(|v| v * k).collect(),
            },
            obstacles: self.obstacles.iter().map(|o| o.scaled(k)).collect(),
        }
    }
}

/// Sampled collision test: true iff some sample lies strictly inside an
/// obstacle. Boundary contact does not count.
pub fn path_collides<P: AsRef<[f64]>>(scene: &Scene, samples: &[P]) -> bool {
    points_collide(scene, samples.iter())
}

/// [`path_collides`] over any sequence of points, stopping at the first hit.
pub fn points_collide<P: AsRef<[f64]>>(scene: &Scene, mut points: impl Iterator<Item = P>) -> bool {
    points.any(|x| scene.min_sdf(x.as_ref()) < 0.0)
}
