//! Path regression: a network maps a scene descriptor and endpoints to the
//! anchors and weights of a spline path, and is trained on the planning loss
//! alone.

mod net;
mod train;

use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use net::{clamp_logit, squash, Dense, Layout, MlpNet, NetConfig, GATE_BIAS_INIT, LOGIT_LIMIT};
pub use train::{load_checkpoint, save_checkpoint, train, Checkpoint, TrainConfig, TrainOutcome, TraceRow};

use crate::autodiff::{self, Objective};
use crate::cost::CostParams;
use crate::error::{Error, Result};
use crate::geom::{Obstacle, Scene};
use crate::optimizer::{Landscape, PathModel, PlanResult, Problem, WeightMode};
use crate::scenegen::{instance_rng, mixture_flag, Generator};
use crate::spline::SplinePath;

/// Descriptor kind flag of a sphere.
pub const KIND_SPHERE: f64 = 1.0;
/// Descriptor kind flag of a box.
pub const KIND_BOX: f64 = -1.0;

/// Flat scene descriptor of `k_max` slots of `1 + 2d` entries each:
/// kind flag, center, sizes. Centers map the scene bounds to `[-1, 1]`;
/// sizes are box half extents, or the sphere radius in the first slot,
/// divided by the bounds' half widths. Unused slots are zero.
pub fn vectorize_scene(scene: &Scene, k_max: usize) -> Result<Vec<f64>> {
    if scene.obstacles.len() > k_max {
        return Err(Error::Capacity {
            count: scene.obstacles.len(),
            capacity: k_max,
        });
    }
    let d = scene.dim;
    let mid = scene.bounds.center();
    let half = scene.bounds.half_widths();
    let mut out = vec![0.0; k_max * (1 + 2 * d)];
    for (slot, o) in out.chunks_mut(1 + 2 * d).zip(&scene.obstacles) {
        let (kind, rest) = slot.split_at_mut(1);
        let (center, sizes) = rest.split_at_mut(d);
        for j in 0..d {
            center[j] = (o.center()[j] - mid[j]) / half[j];
        }
        match o {
            Obstacle::Sphere { radius, .. } => {
                kind[0] = KIND_SPHERE;
                sizes[0] = radius / half[0];
            }
            Obstacle::Box { half_extents, .. } => {
                kind[0] = KIND_BOX;
                for j in 0..d {
                    sizes[j] = half_extents[j] / half[j];
                }
            }
        }
    }
    Ok(out)
}

/// A planning problem with its network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSample {
    pub problem: Problem,
    pub descriptor: Vec<f64>,
    /// The straight line collides at the verification step.
    pub straight_line_collides: bool,
}

impl ProblemSample {
    pub fn new(problem: Problem, k_max: usize, anchors: usize, degree: usize, cost: &CostParams) -> Result<Self> {
        let descriptor = vectorize_scene(&problem.scene, k_max)?;
        let straight_line_collides = problem.straight_line_collides(anchors, degree, cost)?;
        Ok(ProblemSample {
            problem,
            descriptor,
            straight_line_collides,
        })
    }

    /// Descriptor followed by start and goal mapped to `[-1, 1]`.
    pub fn features(&self) -> Vec<f64> {
        let b = &self.problem.scene.bounds;
        let (mid, half) = (b.center(), b.half_widths());
        let norm = |x: &[f64]| -> Vec<f64> { (0..x.len()).map(|j| (x[j] - mid[j]) / half[j]).collect() };
        let mut f = self.descriptor.clone();
        f.extend(norm(&self.problem.start));
        f.extend(norm(&self.problem.goal));
        f
    }
}

/// Samples `indices` of the seeded stream: instance `i` has a colliding
/// straight line exactly when `mixture_flag(i, collide_fraction)`.
pub fn sample_range(
    generator: Generator,
    collide_fraction: f64,
    seed: u64,
    indices: std::ops::Range<u64>,
) -> Result<Vec<ProblemSample>> {
    if !(0.0..=1.0).contains(&collide_fraction) {
        return Err(Error::InvalidArgument(format!(
            "collide fraction must lie in [0, 1], got {collide_fraction}"
        )));
    }
    let cost = generator.cost_params();
    let (anchors, degree) = generator.path_shape();
    indices
        .map(|i| {
            let problem = generator.sample_problem(&mut instance_rng(seed, i), mixture_flag(i, collide_fraction))?;
            ProblemSample::new(problem, generator.max_obstacles(), anchors, degree, &cost)
        })
        .collect()
}

/// The first `count` samples of the seeded stream.
pub fn sample_problems(generator: Generator, collide_fraction: f64, seed: u64, count: usize) -> Result<Vec<ProblemSample>> {
    sample_range(generator, collide_fraction, seed, 0..count as u64)
}

/// Anything that maps a problem to a path.
pub trait PathPredictor {
    fn predict(&self, sample: &ProblemSample) -> Result<SplinePath>;
}

/// Predicts the straight line.
#[derive(Debug, Clone, Copy)]
pub struct StraightLinePredictor {
    pub anchors: usize,
    pub degree: usize,
}

impl PathPredictor for StraightLinePredictor {
    fn predict(&self, sample: &ProblemSample) -> Result<SplinePath> {
        sample.problem.straight_line(self.anchors, self.degree)
    }
}

/// Network outputs of one sample: anchors in bounds and clamped logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub anchors: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

impl Prediction {
    pub fn weights(&self) -> Vec<f64> {
        self.logits.iter().map(|&z| autodiff::logistic(z)).collect()
    }

    /// Anchor coordinates followed by logits, the trainable parameter layout
    /// of a [`PathModel`].
    fn model_params(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.anchors.iter().flatten().copied().collect();
        x.extend(&self.logits);
        x
    }
}

impl MlpNet {
    fn check_sample(&self, sample: &ProblemSample) -> Result<()> {
        let c = &self.config;
        if sample.problem.scene.dim != c.dim || sample.descriptor.len() != c.max_obstacles * c.obstacle_width() {
            return Err(Error::Config(format!(
                "sample of dimension {} with descriptor length {} does not fit a net for {}D, {} obstacles",
                sample.problem.scene.dim,
                sample.descriptor.len(),
                c.dim,
                c.max_obstacles
            )));
        }
        Ok(())
    }

    fn run(&self, batch: &[ProblemSample]) -> Result<(net::Trace, Vec<Prediction>)> {
        for s in batch {
            self.check_sample(s)?;
        }
        let input = net::rows(batch.iter().map(ProblemSample::features).collect(), self.config.input_dim());
        let trace = self.forward(input)?;
        let d = self.config.dim;
        let preds = batch
            .iter()
            .enumerate()
            .map(|(b, s)| {
                let bounds = &s.problem.scene.bounds;
                let (mid, half) = (bounds.center(), bounds.half_widths());
                let mut anchors = Vec::with_capacity(self.config.anchors);
                let mut logits = Vec::with_capacity(self.config.anchors);
                for h in 0..self.config.anchors {
                    let o = trace.head_output(h).row(b);
                    anchors.push((0..d).map(|j| squash(o[j], mid[j], half[j])).collect());
                    logits.push(clamp_logit(o[d]));
                }
                Prediction { anchors, logits }
            })
            .collect();
        Ok((trace, preds))
    }

    /// Network outputs for a batch.
    pub fn predict_batch(&self, batch: &[ProblemSample]) -> Result<Vec<Prediction>> {
        Ok(self.run(batch)?.1)
    }

    fn model<'a>(&self, sample: &'a ProblemSample, cost: &CostParams) -> Result<PathModel<'a>> {
        let template = sample.problem.straight_line(self.config.anchors, self.config.degree)?;
        PathModel::new(&sample.problem.scene, template, WeightMode::Trainable, Landscape::Total, *cost)
    }

    /// Mean total smooth loss over the batch.
    pub fn batch_loss(&self, batch: &[ProblemSample], cost: &CostParams) -> Result<f64> {
        let preds = self.predict_batch(batch)?;
        let mut total = 0.0;
        for (s, p) in batch.iter().zip(&preds) {
            total += self.model(s, cost)?.loss(&p.model_params());
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean loss, its parameter gradient, and the fraction of predictions
    /// collision-free at the sampling step.
    pub fn batch_gradient(&self, batch: &[ProblemSample], cost: &CostParams) -> Result<BatchGradient> {
        self.batch_gradient_by(batch, cost, |model, x| model.value_and_gradient(x))
    }

    /// As [`MlpNet::batch_gradient`], with each problem's loss replaced by
    /// its Gaussian smoothing around the prediction. The reported losses are
    /// unsmoothed.
    pub fn batch_gradient_smoothed<R: Rng>(
        &self,
        batch: &[ProblemSample],
        cost: &CostParams,
        smoothing: &Smoothing,
        rng: &mut R,
    ) -> Result<BatchGradient> {
        let (d, n) = (self.config.dim, self.config.anchors);
        self.batch_gradient_by(batch, cost, |model, x| {
            let diagonal = model.scene().bounds.diagonal();
            let sigma: Vec<f64> = (0..x.len())
                .map(|i| if i < n * d { smoothing.anchor * diagonal } else { smoothing.logit })
                .collect();
            Ok((model.loss(x), smoothed_gradient(|p| model.loss(p), x, &sigma, smoothing.pairs, rng)))
        })
    }

    fn batch_gradient_by(
        &self,
        batch: &[ProblemSample],
        cost: &CostParams,
        mut model_gradient: impl FnMut(&PathModel<'_>, &[f64]) -> Result<(f64, Vec<f64>)>,
    ) -> Result<BatchGradient> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let (trace, preds) = self.run(batch)?;
        let (d, n, m) = (self.config.dim, self.config.anchors, batch.len() as f64);
        let mut d_heads: Vec<Array2<f64>> = (0..n)
            .map(|_| Array2::zeros((batch.len(), self.config.head_outputs())))
            .collect();
        let mut losses = Vec::with_capacity(batch.len());
        let mut free = 0usize;
        for (b, (s, p)) in batch.iter().zip(&preds).enumerate() {
            let model = self.model(s, cost)?;
            let x = p.model_params();
            let (loss, g) = model_gradient(&model, &x)?;
            losses.push(loss);
            if !crate::geom::path_collides(&s.problem.scene, &model.points::<f64>(&x)) {
                free += 1;
            }
            let half = s.problem.scene.bounds.half_widths();
            for h in 0..n {
                let o = trace.head_output(h).row(b);
                for j in 0..d {
                    let t = o[j].tanh();
                    d_heads[h][[b, j]] = g[h * d + j] * half[j] * (1.0 - t * t) / m;
                }
                if o[d].abs() < LOGIT_LIMIT {
                    d_heads[h][[b, d]] = g[n * d + h] / m;
                }
            }
        }
        let grad = self.backward(&trace, &d_heads);
        Ok(BatchGradient {
            loss: losses.iter().sum::<f64>() / m,
            grad,
            losses,
            free_fraction: free as f64 / m,
        })
    }

    /// Combined branch fingerprint of the batch's losses at the current
    /// parameters, for finite-difference checks.
    pub fn batch_regime(&self, batch: &[ProblemSample], cost: &CostParams) -> Result<u64> {
        let preds = self.predict_batch(batch)?;
        let mut h = 0u64;
        for (k, (s, p)) in batch.iter().zip(&preds).enumerate() {
            let r = self.model(s, cost)?.regime(&p.model_params());
            h ^= r.rotate_left((k % 64) as u32);
            for (a, &z) in p.logits.iter().enumerate() {
                if z.abs() >= LOGIT_LIMIT {
                    h ^= 0x517c_c1b7_2722_0a95_u64.rotate_left((k + a) as u32 % 64);
                }
            }
        }
        Ok(h)
    }
}

/// Gaussian smoothing of the training loss in path-parameter space.
///
/// The smooth loss is nearly flat inside small obstacles and drops by the
/// whole penalty when the last sample leaves, so its pointwise gradient does
/// not lead out of collision. The gradient of the smoothed loss sees that
/// drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Smoothing {
    /// Anchor noise standard deviation as a fraction of the scene diagonal.
    pub anchor: f64,
    /// Weight-logit noise standard deviation.
    pub logit: f64,
    /// Antithetic noise pairs per problem and step.
    pub pairs: usize,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing {
            anchor: 0.15,
            logit: 1.0,
            pairs: 8,
        }
    }
}

impl Smoothing {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.anchor) && ok(self.logit)) || self.pairs == 0 {
            return Err(Error::Config(
                "smoothing scales must be positive and finite with at least one noise pair".into(),
            ));
        }
        Ok(())
    }
}

/// Antithetic estimate of the gradient of `E[f(x + sigma * e)]`,
/// `e ~ N(0, I)`, from `pairs` evaluations at `x ± sigma * e`.
pub fn smoothed_gradient<R: Rng>(f: impl Fn(&[f64]) -> f64, x: &[f64], sigma: &[f64], pairs: usize, rng: &mut R) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let (mut plus, mut minus) = (x.to_vec(), x.to_vec());
    let mut e = vec![0.0; x.len()];
    for _ in 0..pairs {
        for i in 0..x.len() {
            e[i] = rng.sample(StandardNormal);
            plus[i] = x[i] + sigma[i] * e[i];
            minus[i] = x[i] - sigma[i] * e[i];
        }
        let diff = f(&plus) - f(&minus);
        for i in 0..x.len() {
            g[i] += diff * e[i] / (2.0 * sigma[i] * pairs as f64);
        }
    }
    g
}

#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub losses: Vec<f64>,
    pub free_fraction: f64,
}

impl PathPredictor for MlpNet {
    fn predict(&self, sample: &ProblemSample) -> Result<SplinePath> {
        let p = self
            .predict_batch(std::slice::from_ref(sample))?
            .pop()
            .expect("one prediction per sample");
        sample
            .problem
            .straight_line(self.config.anchors, self.config.degree)?
            .with_anchors(p.anchors.clone(), p.weights())
    }
}

/// Success, length and timing over a problem set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub problems: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean of path length over start-goal distance, successful paths only.
    pub mean_length_ratio: Option<f64>,
    pub mean_inference_ms: f64,
}

impl EvalMetrics {
    /// The metrics without timing, for reproducible reports.
    pub fn untimed(&self) -> EvalMetrics {
        EvalMetrics {
            mean_inference_ms: 0.0,
            ..self.clone()
        }
    }
}

/// Path length over straight-line distance; 1 for coincident endpoints.
pub fn length_ratio(length: f64, distance: f64) -> f64 {
    if distance > 0.0 {
        length / distance
    } else {
        1.0
    }
}

/// Judges each prediction by the exact collision test at the verification
/// step.
pub fn evaluate<P: PathPredictor + ?Sized>(
    predictor: &P,
    samples: &[ProblemSample],
    cost: &CostParams,
) -> Result<(EvalMetrics, Vec<PlanResult>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no problems to evaluate".into()));
    }
    let mut results = Vec::with_capacity(samples.len());
    let mut ms = 0.0;
    for s in samples {
        let t0 = Instant::now();
        let path = predictor.predict(s)?;
        let elapsed = t0.elapsed().as_secs_f64() * 1e3;
        ms += elapsed;
        let mut r = PlanResult::evaluate(path, &s.problem.scene, cost)?;
        r.wall_ms = elapsed;
        results.push(r);
    }
    let ratios: Vec<f64> = results
        .iter()
        .zip(samples)
        .filter(|(r, _)| r.success)
        .map(|(r, s)| length_ratio(r.breakdown.length, s.problem.distance()))
        .collect();
    let successes = ratios.len();
    Ok((
        EvalMetrics {
            problems: samples.len(),
            successes,
            success_rate: successes as f64 / samples.len() as f64,
            mean_length_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
            mean_inference_ms: ms / samples.len() as f64,
        },
        results,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check_components;
    use crate::geom::Bounds;
    use rand::Rng;

    #[test]
    fn empty_scene_descriptor_is_zero() {
        let scene = Scene::empty(Bounds::cube(2, 0.0, 1.0)).unwrap();
        assert_eq!(vectorize_scene(&scene, 2).unwrap(), vec![0.0; 10]);
    }

    #[test]
    fn unit_sphere_descriptor() {
        let scene = Scene::new(
            2,
            Bounds::cube(2, -2.0, 2.0),
            vec![Obstacle::sphere(vec![0.0, 0.0], 1.0).unwrap()],
        )
        .unwrap();
        let v = vectorize_scene(&scene, 2).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn box_world_descriptor_layout() {
        let p = &crate::scenegen::gen_boxworld3d(0, 1).unwrap()[0];
        let v = vectorize_scene(&p.scene, 10).unwrap();
        assert_eq!(v.len(), 70);
        for slot in v.chunks(7) {
            assert_eq!(slot[0], KIND_BOX);
            assert!(slot[1..4].iter().all(|c| (-1.0..=1.0).contains(c)));
            assert!(slot[4..].iter().all(|&s| s == 0.25 || s == 0.5));
        }
    }

    #[test]
    fn too_many_obstacles_is_a_capacity_error() {
        let p = &crate::scenegen::gen_simple2d(0, 1).unwrap()[0];
        assert!(matches!(
            vectorize_scene(&p.scene, 1),
            Err(Error::Capacity { count: 2, capacity: 1 })
        ));
    }

    #[test]
    fn mixture_flags_follow_the_fraction() {
        let none = sample_problems(Generator::Simple2d, 0.0, 0, 20).unwrap();
        assert!(none.iter().all(|s| !s.straight_line_collides));
        let all = sample_problems(Generator::Simple2d, 1.0, 0, 20).unwrap();
        assert!(all.iter().all(|s| s.straight_line_collides));
        let half = sample_problems(Generator::Simple2d, 0.5, 0, 100).unwrap();
        assert_eq!(half.iter().filter(|s| s.straight_line_collides).count(), 50);
        assert!(sample_problems(Generator::Simple2d, 1.5, 0, 1).is_err());
    }

    #[test]
    fn zero_net_predicts_the_scene_center() {
        let net = MlpNet::zeros(NetConfig::default()).unwrap();
        let s = &sample_problems(Generator::Simple2d, 1.0, 0, 1).unwrap()[0];
        let path = net.predict(s).unwrap();
        assert_eq!(path.anchors(), &[vec![0.5, 0.5]]);
        assert_eq!(path.weights(), &[0.5]);
        assert_eq!(path.start(), s.problem.start.as_slice());
    }

    #[test]
    fn coincident_endpoints_give_a_valid_path() {
        let net = MlpNet::init(NetConfig::default(), &mut instance_rng(1, 0)).unwrap();
        let mut s = sample_problems(Generator::Simple2d, 1.0, 0, 1).unwrap().remove(0);
        s.problem.goal = s.problem.start.clone();
        let path = net.predict(&s).unwrap();
        assert_eq!(path.start(), path.goal());
    }

    #[test]
    fn mismatched_samples_are_rejected() {
        let net = MlpNet::zeros(NetConfig::default()).unwrap();
        let s = &sample_problems(Generator::BoxWorld3d, 0.5, 0, 1).unwrap()[0];
        assert!(matches!(net.predict(s), Err(Error::Config(_))));
    }

    #[test]
    fn outputs_stay_valid_for_random_nets() {
        let cfg = NetConfig {
            input_width: 8,
            highway_layers: 1,
            highway_width: 8,
            head_width: 8,
            ..NetConfig::default()
        };
        let samples = sample_problems(Generator::Simple2d, 0.5, 9, 50).unwrap();
        let mut rng = instance_rng(9, 1 << 40);
        for k in 0..10_000 {
            let mut net = MlpNet::init(cfg.clone(), &mut rng).unwrap();
            // widen the weight scale so the squashing saturates sometimes
            let scale = rng.gen_range(0.1..50.0);
            net.params.iter_mut().for_each(|p| *p *= scale);
            let s = &samples[k % samples.len()];
            let p = &net.predict_batch(std::slice::from_ref(s)).unwrap()[0];
            assert!(s.problem.scene.bounds.contains(&p.anchors[0]));
            let w = p.weights()[0];
            assert!(w > 0.0 && w < 1.0, "weight {w}");
        }
    }

    #[test]
    fn straight_line_predictor_metrics() {
        let free = sample_problems(Generator::Simple2d, 0.0, 2, 20).unwrap();
        let pred = StraightLinePredictor { anchors: 1, degree: 2 };
        let cost = Generator::Simple2d.cost_params();
        let (m, _) = evaluate(&pred, &free, &cost).unwrap();
        assert_eq!(m.success_rate, 1.0);
        assert!((m.mean_length_ratio.unwrap() - 1.0).abs() < 1e-12);
        let blocked = sample_problems(Generator::Simple2d, 1.0, 2, 20).unwrap();
        let (m, _) = evaluate(&pred, &blocked, &cost).unwrap();
        assert_eq!(m.success_rate, 0.0);
        assert_eq!(m.mean_length_ratio, None);
        assert!(evaluate(&pred, &[], &cost).is_err());
    }

    #[test]
    fn composed_gradient_matches_central_differences() {
        let cfg = NetConfig {
            input_width: 16,
            highway_layers: 2,
            highway_width: 16,
            head_width: 16,
            ..NetConfig::default()
        };
        let cost = Generator::Simple2d.cost_params();
        let batch = sample_problems(Generator::Simple2d, 0.5, 4, 4).unwrap();
        for init in 0..3 {
            let net = MlpNet::init(cfg.clone(), &mut instance_rng(40, init)).unwrap();
            let g = net.batch_gradient(&batch, &cost).unwrap();
            assert!((g.loss - net.batch_loss(&batch, &cost).unwrap()).abs() < 1e-12);
            let with = |p: &[f64]| MlpNet {
                params: p.to_vec(),
                ..net.clone()
            };
            let indices: Vec<usize> = (0..net.param_count()).step_by(7).collect();
            let report = grad_check_components(
                &g.grad,
                |p| with(p).batch_loss(&batch, &cost).unwrap(),
                |p| with(p).batch_regime(&batch, &cost).unwrap(),
                &net.params,
                1e-5,
                &indices,
            );
            assert!(report.checked > indices.len() / 2, "{report:?}");
            assert!(report.max_rel_error < 1e-3, "{report:?}");
        }
    }

    #[test]
    fn smoothed_gradient_of_a_quadratic_approaches_the_true_gradient() {
        // smoothing leaves the gradient of a quadratic unchanged
        let a = [1.0, -2.0, 0.5];
        let f = |x: &[f64]| x.iter().zip(&a).map(|(x, a)| a * x * x).sum::<f64>();
        let x = [0.3, -0.7, 1.1];
        let exact: Vec<f64> = x.iter().zip(&a).map(|(x, a)| 2.0 * a * x).collect();
        let mut rng = instance_rng(9, 0);
        let g = smoothed_gradient(f, &x, &[0.4, 0.1, 1.0], 20_000, &mut rng);
        let norm = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = g.iter().zip(&exact).map(|(g, e)| (g - e).powi(2)).sum::<f64>().sqrt();
        assert!(err < 0.05 * norm, "{g:?} vs {exact:?}");
    }

    #[test]
    fn smoothed_gradient_of_a_constant_is_zero() {
        let mut rng = instance_rng(9, 1);
        let g = smoothed_gradient(|_| 4.0, &[1.0, 2.0], &[0.5, 0.5], 4, &mut rng);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn smoothed_batch_gradient_is_seeded_and_reports_unsmoothed_loss() {
        let cfg = NetConfig {
            input_width: 8,
            highway_layers: 1,
            highway_width: 8,
            head_width: 8,
            ..NetConfig::default()
        };
        let cost = Generator::Simple2d.cost_params();
        let batch = sample_problems(Generator::Simple2d, 1.0, 2, 3).unwrap();
        let net = MlpNet::init(cfg, &mut instance_rng(41, 0)).unwrap();
        let s = Smoothing::default();
        let a = net.batch_gradient_smoothed(&batch, &cost, &s, &mut instance_rng(5, 0)).unwrap();
        let b = net.batch_gradient_smoothed(&batch, &cost, &s, &mut instance_rng(5, 0)).unwrap();
        let c = net.batch_gradient_smoothed(&batch, &cost, &s, &mut instance_rng(6, 0)).unwrap();
        assert_eq!(a.grad, b.grad);
        assert_ne!(a.grad, c.grad);
        assert_eq!(a.loss, net.batch_loss(&batch, &cost).unwrap());
    }

    #[test]
    fn smoothing_validation() {
        assert!(Smoothing::default().validate().is_ok());
        assert!(Smoothing { pairs: 0, ..Smoothing::default() }.validate().is_err());
        assert!(Smoothing { anchor: 0.0, ..Smoothing::default() }.validate().is_err());
        assert!(Smoothing { logit: f64::NAN, ..Smoothing::default() }.validate().is_err());
    }
}
