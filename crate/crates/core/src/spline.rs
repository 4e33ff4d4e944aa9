//! NURBS paths anchored at a start and a goal configuration.
//!
//! The full control sequence is `[start, anchors.., goal]` with endpoint
//! weights fixed at one. Knots are open-uniform, so the curve interpolates
//! both endpoints. The parameter domain is `[0, n - p]` for `n` anchors and
//! degree `p`; when `n <= p` (e.g. a single anchor) that interval is empty and
//! the domain falls back to one unit per knot span, `[0, n + 2 - p]`.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};

/// Effective weights are clamped into this range before evaluation.
pub const MIN_WEIGHT: f64 = 1e-3;

/// Open-uniform (clamped) knot vector over `[0, domain_max]`.
pub fn open_uniform_knots(count: usize, degree: usize, domain_max: f64) -> Result<Vec<f64>> {
    if degree == 0 || count <= degree {
        return Err(Error::InvalidArgument(format!(
            "open-uniform knots need count > degree >= 1, got count={count}, degree={degree}"
        )));
    }
    if !(domain_max.is_finite() && domain_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "knot domain must be positive, got {domain_max}"
        )));
    }
    let spans = count - degree;
    let mut knots = Vec::with_capacity(count + degree + 1);
    knots.extend(std::iter::repeat(0.0).take(degree + 1));
    for j in 1..spans {
        knots.push(domain_max * j as f64 / spans as f64);
    }
    knots.extend(std::iter::repeat(domain_max).take(degree + 1));
    Ok(knots)
}

/// Upper end of the parameter domain for `anchors` free points.
pub fn domain_max(anchors: usize, degree: usize) -> f64 {
    if anchors > degree {
        (anchors - degree) as f64
    } else {
        (anchors + 2 - degree) as f64
    }
}

/// Non-zero B-spline basis values `(index, N_{i,p}(u))` by the Cox-de Boor
/// recursion. `u` must lie in the knot domain.
pub fn basis_functions(knots: &[f64], degree: usize, u: f64) -> Vec<(usize, f64)> {
    let count = knots.len() - degree - 1;
    let lo = knots[degree];
    let hi = knots[count];
    // degree-0 indicators; the closed right end belongs to the last span
    let mut n: Vec<f64> = (0..knots.len() - 1)
        .map(|i| {
            let inside = knots[i] <= u && u < knots[i + 1];
            let at_end = u >= hi && knots[i] < knots[i + 1] && knots[i + 1] == hi;
            if (inside && u < hi) || at_end {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    debug_assert!(u >= lo && u <= hi);
    for k in 1..=degree {
        for i in 0..knots.len() - 1 - k {
            let mut v = 0.0;
            let dl = knots[i + k] - knots[i];
            if dl > 0.0 && n[i] != 0.0 {
                v += (u - knots[i]) / dl * n[i];
            }
            let dr = knots[i + k + 1] - knots[i + 1];
            if dr > 0.0 && n[i + 1] != 0.0 {
                v += (knots[i + k + 1] - u) / dr * n[i + 1];
            }
            n[i] = v;
        }
    }
    n.truncate(count);
    n.into_iter()
        .enumerate()
        .filter(|&(_, v)| v != 0.0)
        .collect()
}

/// Clamps a weight into `[MIN_WEIGHT, 1]`; clamped weights carry no gradient.
pub fn effective_weight<S: Real>(w: S) -> S {
    let v = w.value();
    if v < MIN_WEIGHT {
        w.constant(MIN_WEIGHT)
    } else if v > 1.0 {
        w.constant(1.0)
    } else {
        w
    }
}

/// Rational combination of control points under precomputed basis values.
pub fn rational_point<S: Real>(row: &[(usize, f64)], ctrl: &[Vec<S>], weights: &[S]) -> Vec<S> {
    let dim = ctrl[0].len();
    let (i0, n0) = row[0];
    let c0 = effective_weight(weights[i0]) * n0;
    let mut den = c0;
    let mut num: Vec<S> = ctrl[i0].iter().map(|&p| p * c0).collect();
    for &(i, ni) in &row[1..] {
        let c = effective_weight(weights[i]) * ni;
        den = den + c;
        for j in 0..dim {
            num[j] = num[j] + ctrl[i][j] * c;
        }
    }
    num.into_iter().map(|x| x / den).collect()
}

/// A NURBS path with `n` free anchors between fixed endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathRepr", into = "PathRepr")]
pub struct SplinePath {
    degree: usize,
    start: Vec<f64>,
    goal: Vec<f64>,
    anchors: Vec<Vec<f64>>,
    weights: Vec<f64>,
    knots: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PathRepr {
    degree: usize,
    start: Vec<f64>,
    goal: Vec<f64>,
    anchors: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<PathRepr> for SplinePath {
    type Error = Error;
    fn try_from(r: PathRepr) -> Result<Self> {
        SplinePath::new(r.degree, r.start, r.goal, r.anchors, r.weights)
    }
}

impl From<SplinePath> for PathRepr {
    fn from(p: SplinePath) -> Self {
        PathRepr {
            degree: p.degree,
            start: p.start,
            goal: p.goal,
            anchors: p.anchors,
            weights: p.weights,
        }
    }
}

impl SplinePath {
    pub fn new(
        degree: usize,
        start: Vec<f64>,
        goal: Vec<f64>,
        anchors: Vec<Vec<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let dim = start.len();
        if goal.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: goal.len(),
            });
        }
        if let Some(a) = anchors.iter().find(|a| a.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: a.len(),
            });
        }
        let n = anchors.len();
        if n == 0 {
            return Err(Error::InvalidArgument("a path needs at least one anchor".into()));
        }
        if degree == 0 || n + 2 <= degree {
            return Err(Error::InvalidArgument(format!(
                "degree {degree} needs more than {degree} control points, have {}",
                n + 2
            )));
        }
        if weights.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {n} anchors",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidArgument(format!(
                "weights must lie in [0, 1], got {weights:?}"
            )));
        }
        if start
            .iter()
            .chain(&goal)
            .chain(anchors.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("path control point".into()));
        }
        let knots = open_uniform_knots(n + 2, degree, domain_max(n, degree))?;
        Ok(SplinePath {
            degree,
            start,
            goal,
            anchors,
            weights,
            knots,
        })
    }

    /// Anchors evenly spaced strictly between `start` and `goal`, unit weights.
    pub fn straight_line(start: &[f64], goal: &[f64], anchors: usize, degree: usize) -> Result<Self> {
        let pts = (1..=anchors)
            .map(|k| {
                let t = k as f64 / (anchors + 1) as f64;
                start
                    .iter()
                    .zip(goal)
                    .map(|(s, g)| s + t * (g - s))
                    .collect()
            })
            .collect();
        SplinePath::new(
            degree,
            start.to_vec(),
            goal.to_vec(),
            pts,
            vec![1.0; anchors],
        )
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn goal(&self) -> &[f64] {
        &self.goal
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors.len()
    }

    pub fn domain_max(&self) -> f64 {
        domain_max(self.anchors.len(), self.degree)
    }

    /// Full control sequence `[start, anchors.., goal]`.
    pub fn control_points(&self) -> Vec<Vec<f64>> {
        let mut v = Vec::with_capacity(self.anchors.len() + 2);
        v.push(self.start.clone());
        v.extend(self.anchors.iter().cloned());
        v.push(self.goal.clone());
        v
    }

    /// Full weight sequence `[1, w_1.., 1]`.
    pub fn control_weights(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.weights.len() + 2);
        v.push(1.0);
        v.extend_from_slice(&self.weights);
        v.push(1.0);
        v
    }

    /// Same endpoints, degree and knots with new anchors and weights.
    pub fn with_anchors(&self, anchors: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        SplinePath::new(
            self.degree,
            self.start.clone(),
            self.goal.clone(),
            anchors,
            weights,
        )
    }

    pub fn eval(&self, u: f64) -> Result<Vec<f64>> {
        let hi = self.domain_max();
        if !(0.0..=hi).contains(&u) {
            return Err(Error::Domain {
                value: u,
                min: 0.0,
                max: hi,
            });
        }
        let row = basis_functions(&self.knots, self.degree, u);
        Ok(rational_point(
            &row,
            &self.control_points(),
            &self.control_weights(),
        ))
    }

    pub fn sample(&self, step: f64) -> Result<SampleSet> {
        let basis = SampleBasis::new(self, step)?;
        let points = basis.evaluate(&self.control_points(), &self.control_weights());
        Ok(SampleSet {
            step,
            params: basis.params,
            points,
        })
    }

    /// Uniformly scaled copy (about the origin).
    pub fn scaled(&self, k: f64) -> SplinePath {
        let s = |v: &Vec<f64>| v.iter().map(|x| x * k).collect::<Vec<f64>>();
        SplinePath {
            degree: self.degree,
            start: s(&self.start),
            goal: s(&self.goal),
            anchors: self.anchors.iter().map(s).collect(),
            weights: self.weights.clone(),
            knots: self.knots.clone(),
        }
    }
}

/// Parameters `{0, s, 2s, ..}` up to `domain_max`, which is always included.
pub fn sample_parameters(domain_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sampling step must be positive, got {step}"
        )));
    }
    let tol = 1e-9 * step;
    let mut params = Vec::with_capacity((domain_max / step) as usize + 2);
    let mut k = 0usize;
    loop {
        let u = k as f64 * step;
        if u > domain_max + tol {
            break;
        }
        params.push(u.min(domain_max));
        k += 1;
    }
    let last = *params.last().expect("0 is always a parameter");
    if domain_max - last > tol {
        params.push(domain_max);
    } else if let Some(l) = params.last_mut() {
        *l = domain_max;
    }
    Ok(params)
}

/// Evaluated samples of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub step: f64,
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest distance between consecutive samples.
    pub fn max_spacing(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Basis rows for a fixed parameter set; knots never change during
/// optimization, so these are computed once and reused for every iterate.
#[derive(Debug, Clone)]
pub struct SampleBasis {
    pub params: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SampleBasis {
    pub fn new(path: &SplinePath, step: f64) -> Result<Self> {
        let params = sample_parameters(path.domain_max(), step)?;
        let rows = params
            .iter()
            .map(|&u| basis_functions(&path.knots, path.degree, u))
            .collect();
        Ok(SampleBasis { params, rows })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// Curve points for the full control sequence and weights.
    pub fn evaluate<S: Real>(&self, ctrl: &[Vec<S>], weights: &[S]) -> Vec<Vec<S>> {
        self.rows
            .iter()
            .map(|row| rational_point(row, ctrl, weights))
            .collect()
    }

    /// Curve points produced lazily, for early-exit scans.
    pub fn points<'a, S: Real>(
        &'a self,
        ctrl: &'a [Vec<S>],
        weights: &'a [S],
    ) -> impl Iterator<Item = Vec<S>> + 'a {
        self.rows.iter().map(move |row| rational_point(row, ctrl, weights))
    }
}
