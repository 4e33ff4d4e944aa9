//! Direct minimization of the planning loss over spline anchors.
//!
//! A run is Adam with exponentially decaying step size, started from the
//! straight line and from Gaussian perturbations of it. Every iterate is
//! scored; the returned path is the best one seen, where a path that is
//! collision-free at the verification step beats any colliding path and
//! ties are broken by loss.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{self, Objective, Real};
use crate::cost::{
    branch_regime, breakdown_from_samples, chomp_collision_at, check_dims, polyline_length,
    smooth_collision_at, ChompParams, Classification, CostBreakdown, CostParams,
};
use crate::error::{Error, Result};
use crate::geom::{points_collide, Scene};
use crate::spline::{SampleBasis, SplinePath, MIN_WEIGHT};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// How anchor weights enter the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Weights stay at the initial path's values (one for straight lines).
    Fixed,
    /// Each weight is the logistic of a free parameter.
    Trainable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub anchors: usize,
    pub degree: usize,
    /// Initial step size as a fraction of the scene diagonal.
    pub learning_rate: f64,
    /// Per-iteration multiplicative step-size decay.
    pub lr_decay: f64,
    pub max_iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub restarts: usize,
    /// Standard deviation of restart perturbations as a fraction of the
    /// scene diagonal.
    pub restart_noise: f64,
    /// Perturbations screened to seed restarts after the first.
    pub candidates: usize,
    /// Smallest best-loss decrease that counts as progress.
    pub convergence_threshold: f64,
    /// Iterations without progress before the step size halves.
    pub patience: usize,
    pub weight_mode: WeightMode,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            anchors: 1,
            degree: 2,
            learning_rate: 0.05,
            lr_decay: 0.995,
            max_iterations: 2000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            restarts: 5,
            restart_noise: 0.25,
            candidates: 1024,
            convergence_threshold: 1e-8,
            patience: 50,
            weight_mode: WeightMode::Fixed,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.anchors == 0 || self.degree == 0 || self.anchors + 2 <= self.degree {
            return bad(format!(
                "need anchors >= 1 and anchors + 2 > degree >= 1, got anchors={} degree={}",
                self.anchors, self.degree
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr decay must lie in (0, 1], got {}", self.lr_decay));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.restarts == 0 {
            return bad("at least one restart is required".into());
        }
        if !(self.restart_noise.is_finite() && self.restart_noise >= 0.0) {
            return bad(format!("restart noise must be non-negative, got {}", self.restart_noise));
        }
        if !(self.convergence_threshold >= 0.0) || self.patience == 0 {
            return bad("convergence threshold must be >= 0 and patience >= 1".into());
        }
        Ok(())
    }
}

/// A planning query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub scene: Scene,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
}

impl Problem {
    pub fn new(scene: Scene, start: Vec<f64>, goal: Vec<f64>) -> Result<Self> {
        let p = Problem { scene, start, goal };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for x in [&self.start, &self.goal] {
            if x.len() != self.scene.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.scene.dim,
                    got: x.len(),
                });
            }
            if !self.scene.bounds.contains(x) {
                return Err(Error::InvalidArgument(format!(
                    "endpoint {x:?} lies outside the scene bounds"
                )));
            }
        }
        Ok(())
    }

    pub fn straight_line(&self, anchors: usize, degree: usize) -> Result<SplinePath> {
        SplinePath::straight_line(&self.start, &self.goal, anchors, degree)
    }

    pub fn distance(&self) -> f64 {
        self.start
            .iter()
            .zip(&self.goal)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Whether the straight-line path collides at the verification step.
    pub fn straight_line_collides(&self, anchors: usize, degree: usize, cost: &CostParams) -> Result<bool> {
        let path = self.straight_line(anchors, degree)?;
        let basis = SampleBasis::new(&path, cost.verification().step)?;
        let ctrl = path.control_points();
        let weights = path.control_weights();
        Ok(points_collide(&self.scene, basis.points(&ctrl, &weights)))
    }

    /// Uniformly scaled copy (about the origin).
    pub fn scaled(&self, k: f64) -> Problem {
        Problem {
            scene: self.scene.scaled(k),
            start: self.start.iter().map(|v| v * k).collect(),
            goal: self.goal.iter().map(|v| v * k).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub path: SplinePath,
    /// Costs at the verification step (half the optimization step).
    pub breakdown: CostBreakdown,
    pub iterations: usize,
    pub restart: usize,
    pub wall_ms: f64,
    pub success: bool,
}

impl PlanResult {
    /// Scores `path` at the verification step.
    pub fn evaluate(path: SplinePath, scene: &Scene, cost: &CostParams) -> Result<Self> {
        check_dims(scene, &path)?;
        let samples = path.sample(cost.verification().step)?;
        let breakdown = breakdown_from_samples(scene, &samples.points, cost)?;
        Ok(PlanResult {
            path,
            success: !breakdown.collides,
            breakdown,
            iterations: 0,
            restart: 0,
            wall_ms: 0.0,
        })
    }
}

/// Which loss a [`PathModel`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Landscape {
    /// Length plus smooth collision cost.
    Total,
    /// Smooth collision cost alone.
    CollisionOnly,
    /// Length plus the CHOMP obstacle cost.
    Chomp(ChompParams),
}

/// The loss as a function of a flat parameter vector: anchor coordinates,
/// followed by weight logits in [`WeightMode::Trainable`].
#[derive(Debug, Clone)]
pub struct PathModel<'a> {
    scene: &'a Scene,
    template: SplinePath,
    mode: WeightMode,
    landscape: Landscape,
    cost: CostParams,
    basis: SampleBasis,
    verify: SampleBasis,
}

impl<'a> PathModel<'a> {
    /// `template` fixes endpoints, degree, anchor count and, in fixed weight
    /// mode, the weights.
    pub fn new(
        scene: &'a Scene,
        template: SplinePath,
        mode: WeightMode,
        landscape: Landscape,
        cost: CostParams,
    ) -> Result<Self> {
        cost.validate()?;
        check_dims(scene, &template)?;
        if let Landscape::Chomp(c) = landscape {
            c.validate()?;
        }
        let basis = SampleBasis::new(&template, cost.step)?;
        let verify = SampleBasis::new(&template, cost.verification().step)?;
        Ok(PathModel {
            scene,
            template,
            mode,
            landscape,
            cost,
            basis,
            verify,
        })
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    pub fn template(&self) -> &SplinePath {
        &self.template
    }

    pub fn cost(&self) -> &CostParams {
        &self.cost
    }

    pub fn anchor_params(&self) -> usize {
        self.template.anchor_count() * self.template.dim()
    }

    pub fn param_count(&self) -> usize {
        match self.mode {
            WeightMode::Fixed => self.anchor_params(),
            WeightMode::Trainable => self.anchor_params() + self.template.anchor_count(),
        }
    }

    /// Parameters reproducing `path`. Trainable weights are kept within
    /// `[0.01, 0.99]` so their logits stay finite.
    pub fn encode(&self, path: &SplinePath) -> Vec<f64> {
        let mut x: Vec<f64> = path.anchors().iter().flatten().copied().collect();
        if self.mode == WeightMode::Trainable {
            x.extend(path.weights().iter().map(|&w| {
                let w = w.clamp(0.01, 0.99);
                (w / (1.0 - w)).ln()
            }));
        }
        x
    }

    pub fn decode(&self, params: &[f64]) -> Result<SplinePath> {
        self.check_len(params.len())?;
        let d = self.template.dim();
        let anchors = params[..self.anchor_params()]
            .chunks(d)
            .map(<[f64]>::to_vec)
            .collect();
        let weights = match self.mode {
            WeightMode::Fixed => self.template.weights().to_vec(),
            WeightMode::Trainable => params[self.anchor_params()..]
                .iter()
                .map(|&z| autodiff::logistic(z))
                .collect(),
        };
        self.template.with_anchors(anchors, weights)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: len,
            });
        }
        Ok(())
    }

    fn control<S: Real>(&self, params: &[S]) -> (Vec<Vec<S>>, Vec<S>) {
        let c = params[0];
        let d = self.template.dim();
        let n = self.template.anchor_count();
        let konst = |v: &[f64]| v.iter().map(|&x| c.constant(x)).collect::<Vec<S>>();
        let mut ctrl = Vec::with_capacity(n + 2);
        ctrl.push(konst(self.template.start()));
        ctrl.extend(params[..n * d].chunks(d).map(<[S]>::to_vec));
        ctrl.push(konst(self.template.goal()));
        let mut weights = Vec::with_capacity(n + 2);
        weights.push(c.constant(1.0));
        match self.mode {
            WeightMode::Fixed => weights.extend(konst(self.template.weights())),
            WeightMode::Trainable => weights.extend(params[n * d..].iter().map(|z| z.logistic())),
        }
        weights.push(c.constant(1.0));
        (ctrl, weights)
    }

    /// Curve samples at the optimization step.
    pub fn points<S: Real>(&self, params: &[S]) -> Vec<Vec<S>> {
        let (ctrl, weights) = self.control(params);
        self.basis.evaluate(&ctrl, &weights)
    }

    /// Curve samples at the verification step.
    pub fn verification_points(&self, params: &[f64]) -> Vec<Vec<f64>> {
        let (ctrl, weights) = self.control(params);
        self.verify.evaluate(&ctrl, &weights)
    }

    /// Loss of already-evaluated samples.
    pub fn loss_of_points<S: Real>(&self, points: &[Vec<S>]) -> S {
        let zero = points[0][0].constant(0.0);
        let values: Vec<Vec<f64>> = points
            .iter()
            .map(|p| p.iter().map(|v| v.value()).collect())
            .collect();
        match self.landscape {
            Landscape::Total => {
                let class = Classification::new(self.scene, &values);
                let c = smooth_collision_at(self.scene, points, &class, self.cost.safe_distance);
                polyline_length(points) + c.unwrap_or(zero)
            }
            Landscape::CollisionOnly => {
                let class = Classification::new(self.scene, &values);
                smooth_collision_at(self.scene, points, &class, self.cost.safe_distance)
                    .unwrap_or(zero)
            }
            Landscape::Chomp(c) => {
                polyline_length(points) + chomp_collision_at(self.scene, points, &c).unwrap_or(zero)
            }
        }
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        self.loss_of_points(&self.points(params))
    }

    pub fn value_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_len(params.len())?;
        Ok(autodiff::gradient(self, params)?)
    }

    /// No verification sample lies inside an obstacle.
    pub fn verified_free(&self, params: &[f64]) -> bool {
        let (ctrl, weights) = self.control(params);
        !points_collide(self.scene, self.verify.points(&ctrl, &weights))
    }
}

impl Objective for PathModel<'_> {
    fn eval<S: Real>(&self, params: &[S]) -> S {
        self.loss_of_points(&self.points(params))
    }

    fn regime(&self, params: &[f64]) -> u64 {
        let chomp = match &self.landscape {
            Landscape::Chomp(c) => Some(c),
            _ => None,
        };
        let mut h = branch_regime(self.scene, &self.points(params), &self.cost, chomp);
        if self.mode == WeightMode::Trainable {
            for (k, &z) in params[self.anchor_params()..].iter().enumerate() {
                if autodiff::logistic(z) < MIN_WEIGHT {
                    h ^= 0x9e37_79b9_7f4a_7c15u64.rotate_left(k as u32);
                }
            }
        }
        h
    }
}

/// Outcome of one descent run.
#[derive(Debug, Clone)]
pub(crate) struct Descent {
    pub params: Vec<f64>,
    pub loss: f64,
    pub free: bool,
    pub iterations: usize,
}

fn better(free: bool, loss: f64, than: &Descent) -> bool {
    (free && !than.free) || (free == than.free && loss < than.loss)
}

/// Halvings of the learning rate allowed on loss plateaus.
pub const PLATEAU_HALVINGS: usize = 10;

/// Adam from `init` for at most `max_iterations` steps, keeping the best
/// iterate. Collision-free iterates are preferred only if `prefer_free`.
/// After `patience` steps without progress the learning rate halves and the
/// descent resumes from the best iterate; the run stops once
/// [`PLATEAU_HALVINGS`] halvings are used up.
pub(crate) fn descend(
    model: &PathModel<'_>,
    init: Vec<f64>,
    config: &OptimizerConfig,
    lr0: f64,
    max_iterations: usize,
    prefer_free: bool,
) -> Result<Descent> {
    let mut x = init;
    let mut adam = Adam::new(x.len(), config.beta1, config.beta2, config.epsilon);
    let mut best: Option<Descent> = None;
    let mut stale = 0;
    let mut halvings = 0;
    let mut lr = lr0;
    let mut it = 0;
    loop {
        let (loss, grad) = match model.value_and_gradient(&x) {
            Ok(v) if v.0.is_finite() => v,
            Ok(v) if it == 0 => {
                return Err(Error::NonFinite(format!("initial loss {}", v.0)));
            }
            Err(e) if it == 0 => return Err(e),
            _ => break,
        };
        let free = prefer_free && model.verified_free(&x);
        let progress = match &best {
            None => true,
            Some(b) => (free && !b.free) || (free == b.free && b.loss - loss > config.convergence_threshold),
        };
        if best.as_ref().map_or(true, |b| better(free, loss, b)) {
            best = Some(Descent {
                params: x.clone(),
                loss,
                free,
                iterations: 0,
            });
        }
        stale = if progress { 0 } else { stale + 1 };
        if it == max_iterations {
            break;
        }
        if stale >= config.patience {
            if halvings == PLATEAU_HALVINGS {
                break;
            }
            halvings += 1;
            stale = 0;
            lr *= 0.5;
            x.clone_from(&best.as_ref().expect("scored above").params);
            adam = Adam::new(x.len(), config.beta1, config.beta2, config.epsilon);
            continue;
        }
        adam.step(&mut x, &grad, lr);
        lr *= config.lr_decay;
        it += 1;
    }
    let mut best = best.expect("the initial iterate is always scored");
    best.iterations = it;
    Ok(best)
}

fn validate_inputs(problem: &Problem, cost: &CostParams, config: &OptimizerConfig) -> Result<()> {
    config.validate()?;
    cost.validate()?;
    problem.validate()
}

/// Minimizes length plus smooth collision cost over the anchors of a
/// `config.anchors`-anchor path, best of `config.restarts` runs.
pub fn optimize_path(problem: &Problem, cost: &CostParams, config: &OptimizerConfig) -> Result<PlanResult> {
    validate_inputs(problem, cost, config)?;
    let t0 = Instant::now();
    let template = problem.straight_line(config.anchors, config.degree)?;
    let model = PathModel::new(&problem.scene, template.clone(), config.weight_mode, Landscape::Total, *cost)?;
    let init = model.encode(&template);
    let diag = problem.scene.bounds.diagonal();
    let noise = Normal::new(0.0, config.restart_noise * diag)
        .map_err(|e| Error::Config(format!("restart noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut starts = vec![init.clone()];
    if config.restarts > 1 {
        let mut scored: Vec<(bool, f64, Vec<f64>)> = (0..config.candidates.max(config.restarts - 1))
            .map(|_| {
                let mut x = init.clone();
                for v in &mut x[..model.anchor_params()] {
                    *v += noise.sample(&mut rng);
                }
                (model.verified_free(&x), model.loss(&x), x)
            })
            .collect();
        // stable: equal keys keep draw order
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)));
        starts.extend(scored.into_iter().take(config.restarts - 1).map(|c| c.2));
    }

    let mut best: Option<(usize, Descent)> = None;
    let mut iterations = 0;
    for (r, x0) in starts.into_iter().enumerate() {
        let run = descend(&model, x0, config, config.learning_rate * diag, config.max_iterations, true)?;
        iterations += run.iterations;
        if best.as_ref().map_or(true, |(_, b)| better(run.free, run.loss, b)) {
            best = Some((r, run));
        }
    }
    let (restart, run) = best.expect("at least one restart");
    log::debug!("best restart {restart}: loss {:.6}, free {}", run.loss, run.free);
    let mut result = PlanResult::evaluate(model.decode(&run.params)?, &problem.scene, cost)?;
    result.iterations = iterations;
    result.restart = restart;
    result.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(result)
}

/// Runs `steps` Adam updates on the smooth collision cost alone, moving only
/// the anchors; weights and endpoints stay fixed. Returns the best iterate,
/// so an already collision-free path comes back unchanged.
pub fn refine_collision_only(
    path: &SplinePath,
    scene: &Scene,
    cost: &CostParams,
    steps: usize,
    config: &OptimizerConfig,
) -> Result<PlanResult> {
    config.validate()?;
    let t0 = Instant::now();
    let model = PathModel::new(scene, path.clone(), WeightMode::Fixed, Landscape::CollisionOnly, *cost)?;
    let init = model.encode(path);
    let run = descend(&model, init, config, config.learning_rate * scene.bounds.diagonal(), steps, true)?;
    let mut result = PlanResult::evaluate(model.decode(&run.params)?, scene, cost)?;
    result.iterations = run.iterations;
    result.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(result)
}

/// Minimizes the CHOMP loss from `init` with a single run, keeping the
/// lowest-loss iterate regardless of collisions.
pub fn optimize_chomp_from(
    init: &SplinePath,
    scene: &Scene,
    cost: &CostParams,
    chomp: &ChompParams,
    config: &OptimizerConfig,
) -> Result<PlanResult> {
    config.validate()?;
    let t0 = Instant::now();
    let model = PathModel::new(scene, init.clone(), config.weight_mode, Landscape::Chomp(*chomp), *cost)?;
    let x0 = model.encode(init);
    let run = descend(&model, x0, config, config.learning_rate * scene.bounds.diagonal(), config.max_iterations, false)?;
    let mut result = PlanResult::evaluate(model.decode(&run.params)?, scene, cost)?;
    result.iterations = run.iterations;
    result.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(result)
}
