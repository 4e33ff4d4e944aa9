//! Benchmark harness: CHOMP calibration, per-method runs over a generated
//! problem set, and reproducible reports.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost::{ChompParams, CostParams};
use crate::error::{Error, Result};
use crate::optimizer::{optimize_chomp_from, optimize_path, refine_collision_only, OptimizerConfig, PlanResult, Problem};
use crate::oracle::{brute_force_optimum, write_file, GridSpec, LandscapeCost};
use crate::regressor::{evaluate, length_ratio, sample_problems, EvalMetrics, MlpNet, PathPredictor, ProblemSample, TrainOutcome};
use crate::scenegen::{calibration_problem, generate, Generator};

/// Largest relative length gap between the calibrated CHOMP optimum and ours.
pub const CALIBRATION_LENGTH_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ours-direct")]
    OursDirect,
    #[serde(rename = "chomp-calibrated")]
    ChompCalibrated,
    #[serde(rename = "chomp-uncalibrated")]
    ChompUncalibrated,
    #[serde(rename = "ours-network")]
    OursNetwork,
    #[serde(rename = "ours-network+refine")]
    OursNetworkRefine,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::OursDirect => "ours-direct",
            Method::ChompCalibrated => "chomp-calibrated",
            Method::ChompUncalibrated => "chomp-uncalibrated",
            Method::OursNetwork => "ours-network",
            Method::OursNetworkRefine => "ours-network+refine",
        }
    }

    fn needs_network(self) -> bool {
        matches!(self, Method::OursNetwork | Method::OursNetworkRefine)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub lambdas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Anchor grid resolution per axis for the brute-force optima.
    pub resolution: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            lambdas: (0..=10).map(|k| 0.1 * f64::from(1u32 << k)).collect(),
            epsilons: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            resolution: 201,
        }
    }
}

/// One evaluated calibration candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAttempt {
    pub params: ChompParams,
    pub free: bool,
    pub length: f64,
    /// `|length - reference| / reference`.
    pub length_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: ChompParams,
    /// Length of our cost's brute-force optimum on the calibration problem.
    pub reference_length: f64,
    pub attempts: Vec<CalibrationAttempt>,
}

/// Grid-searches CHOMP's `(lambda, epsilon)` so that the brute-force CHOMP
/// optimum on `problem` is collision-free and as long as our cost's optimum,
/// within [`CALIBRATION_LENGTH_TOLERANCE`]. Ties go to the earlier candidate,
/// lambdas outermost.
pub fn calibrate_chomp(problem: &Problem, cost: &CostParams, config: &CalibrationConfig) -> Result<Calibration> {
    if config.lambdas.is_empty() || config.epsilons.is_empty() {
        return Err(Error::Config("calibration grid is empty".into()));
    }
    let grid = GridSpec::covering(problem, config.resolution)?;
    let reference = brute_force_optimum(problem, cost, LandscapeCost::Exact, &grid)?;
    if !reference.best_free {
        return Err(Error::Calibration("our own optimum collides on the calibration problem".into()));
    }
    let reference_length = reference.best_length;
    let mut attempts = Vec::new();
    for &lambda in &config.lambdas {
        for &epsilon in &config.epsilons {
            let params = ChompParams::new(lambda, epsilon)?;
            let opt = brute_force_optimum(problem, cost, LandscapeCost::Chomp(params), &grid)?;
            attempts.push(CalibrationAttempt {
                params,
                free: opt.best_free,
                length: opt.best_length,
                length_gap: (opt.best_length - reference_length).abs() / reference_length,
            });
        }
    }
    let chosen = attempts
        .iter()
        .filter(|a| a.free && a.length_gap <= CALIBRATION_LENGTH_TOLERANCE)
        .fold(None::<&CalibrationAttempt>, |best, a| match best {
            Some(b) if b.length_gap <= a.length_gap => Some(b),
            _ => Some(a),
        });
    match chosen {
        Some(a) => Ok(Calibration {
            params: a.params,
            reference_length,
            attempts: attempts.clone(),
        }),
        None => {
            let best = attempts
                .iter()
                .filter(|a| a.free)
                .min_by(|a, b| a.length_gap.total_cmp(&b.length_gap));
            Err(Error::Calibration(match best {
                Some(a) => format!(
                    "closest collision-free candidate lambda={} epsilon={} misses the reference length {:.6} by {:.2}%",
                    a.params.lambda,
                    a.params.epsilon,
                    reference_length,
                    100.0 * a.length_gap
                ),
                None => "no candidate optimum is collision-free".into(),
            }))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub generator: Generator,
    pub problems: usize,
    /// Fraction of problems whose straight line collides.
    pub collide_fraction: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub optimizer: OptimizerConfig,
    /// Defaults to the generator's sampling step and safe distance.
    pub cost: Option<CostParams>,
    pub calibration: CalibrationConfig,
    /// Anchor grid resolution of the CHOMP global search on one-anchor 2D
    /// problems; the grid optimum is then polished by gradient descent.
    pub chomp_resolution: usize,
    /// Collision-only refinement steps of `ours-network+refine`.
    pub refine_steps: usize,
    /// Network checkpoint for the network methods.
    pub checkpoint: Option<std::path::PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            generator: Generator::Simple2d,
            problems: 150,
            collide_fraction: 1.0,
            seed: 0,
            methods: vec![Method::OursDirect, Method::ChompCalibrated, Method::ChompUncalibrated],
            optimizer: OptimizerConfig::default(),
            cost: None,
            calibration: CalibrationConfig::default(),
            chomp_resolution: 101,
            refine_steps: 6,
            checkpoint: None,
        }
    }
}

impl BenchConfig {
    pub fn cost_params(&self) -> CostParams {
        self.cost.unwrap_or_else(|| self.generator.cost_params())
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no benchmark methods given".into()));
        }
        if self.problems == 0 {
            return Err(Error::Config("problem count must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.collide_fraction) {
            return Err(Error::Config(format!("collide fraction {} outside [0, 1]", self.collide_fraction)));
        }
        if self.chomp_resolution < 2 {
            return Err(Error::Config("chomp_resolution must be at least 2".into()));
        }
        self.optimizer.validate()?;
        self.cost_params().validate()
    }

    /// SHA-256 of the config's JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// One method on one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub method: Method,
    pub problem_id: usize,
    pub success: bool,
    /// Absent when the method failed to return a path.
    pub length: Option<f64>,
    pub length_ratio: Option<f64>,
    pub wall_ms: f64,
    pub seed: u64,
    /// Set when the method failed to return a path.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub problems: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Over successful problems only.
    pub mean_length_ratio: Option<f64>,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config_hash: String,
    pub seed: u64,
    pub generator: Generator,
    /// Present when `chomp-calibrated` ran.
    pub calibrated_chomp: Option<ChompParams>,
    pub summaries: Vec<MethodSummary>,
    /// Sorted by method, then problem id.
    pub records: Vec<ProblemRecord>,
}

pub const CSV_HEADER: &str = "method,problem_id,success,length,length_ratio,wall_ms,seed";

impl BenchmarkReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Records as CSV; lengths of failed methods are empty.
    pub fn to_csv(&self) -> String {
        let num = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{:.3},{}\n",
                r.method.name(),
                r.problem_id,
                r.success,
                num(r.length),
                num(r.length_ratio),
                r.wall_ms,
                r.seed
            ));
        }
        out
    }

    /// The report with every wall-clock field zeroed; identical seeds and
    /// configs give identical bytes.
    pub fn untimed(&self) -> BenchmarkReport {
        let mut r = self.clone();
        for s in &mut r.summaries {
            s.mean_wall_ms = 0.0;
        }
        for rec in &mut r.records {
            rec.wall_ms = 0.0;
        }
        r
    }

    pub fn untimed_json(&self) -> String {
        serde_json::to_string_pretty(&self.untimed()).expect("report serializes")
    }

    /// Writes `report.json` and `records.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("report.json"), &serde_json::to_vec_pretty(self)?)?;
        write_file(&dir.join("records.csv"), self.to_csv().as_bytes())
    }
}

/// Minimizes the CHOMP loss: on one-anchor 2D problems from the best anchor
/// of a brute-force grid, otherwise from the straight line.
pub fn plan_chomp(
    problem: &Problem,
    cost: &CostParams,
    chomp: &ChompParams,
    config: &OptimizerConfig,
    resolution: usize,
) -> Result<PlanResult> {
    let t0 = Instant::now();
    let mut init = problem.straight_line(config.anchors, config.degree)?;
    if problem.scene.dim == 2 && config.anchors == 1 && config.degree == crate::oracle::ORACLE_DEGREE {
        let grid = GridSpec::covering(problem, resolution)?;
        let opt = brute_force_optimum(problem, cost, LandscapeCost::Chomp(*chomp), &grid)?;
        init = init.with_anchors(vec![opt.best_anchor], init.weights().to_vec())?;
    }
    let mut result = optimize_chomp_from(&init, &problem.scene, cost, chomp, config)?;
    result.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(result)
}

struct Context<'a> {
    config: &'a BenchConfig,
    cost: CostParams,
    calibrated: Option<ChompParams>,
    net: Option<&'a MlpNet>,
}

impl Context<'_> {
    fn plan(&self, method: Method, sample: &ProblemSample) -> Result<PlanResult> {
        let p = &sample.problem;
        let opt = &self.config.optimizer;
        match method {
            Method::OursDirect => optimize_path(p, &self.cost, opt),
            Method::ChompCalibrated => {
                let c = self.calibrated.expect("calibrated before planning");
                plan_chomp(p, &self.cost, &c, opt, self.config.chomp_resolution)
            }
            Method::ChompUncalibrated => plan_chomp(
                p,
                &self.cost,
                &ChompParams::default_uncalibrated(),
                opt,
                self.config.chomp_resolution,
            ),
            Method::OursNetwork | Method::OursNetworkRefine => {
                let net = self.net.expect("network loaded before planning");
                let t0 = Instant::now();
                let path = net.predict(sample)?;
                let mut r = if method == Method::OursNetwork {
                    PlanResult::evaluate(path, &p.scene, &self.cost)?
                } else {
                    refine_collision_only(&path, &p.scene, &self.cost, self.config.refine_steps, opt)?
                };
                r.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
                Ok(r)
            }
        }
    }

    fn record(&self, method: Method, id: usize, sample: &ProblemSample) -> ProblemRecord {
        let outcome = catch_unwind(AssertUnwindSafe(|| self.plan(method, sample)))
            .unwrap_or_else(|_| Err(Error::ContractViolation(format!("{} panicked", method.name()))));
        let distance = sample.problem.distance();
        match outcome {
            Ok(r) => ProblemRecord {
                method,
                problem_id: id,
                success: r.success,
                length: Some(r.breakdown.length),
                length_ratio: Some(length_ratio(r.breakdown.length, distance)),
                wall_ms: r.wall_ms,
                seed: self.config.seed,
                error: None,
            },
            Err(e) => {
                log::warn!("{} failed on problem {id}: {e}", method.name());
                ProblemRecord {
                    method,
                    problem_id: id,
                    success: false,
                    length: None,
                    length_ratio: None,
                    wall_ms: 0.0,
                    seed: self.config.seed,
                    error: Some(e.to_string()),
                }
            }
        }
    }
}

fn summarize(method: Method, records: &[ProblemRecord]) -> MethodSummary {
    let ratios: Vec<f64> = records
        .iter()
        .filter(|r| r.success)
        .filter_map(|r| r.length_ratio)
        .collect();
    let n = records.len();
    MethodSummary {
        method,
        problems: n,
        successes: ratios.len(),
        success_rate: ratios.len() as f64 / n as f64,
        mean_length_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        mean_wall_ms: records.iter().map(|r| r.wall_ms).sum::<f64>() / n as f64,
    }
}

/// Runs every configured method on the generated problems. The network
/// methods use `net`, or the configured checkpoint when `net` is `None`.
/// A method failing on a problem counts as an unsuccessful record.
pub fn run_benchmark(config: &BenchConfig, net: Option<&MlpNet>) -> Result<BenchmarkReport> {
    config.validate()?;
    let cost = config.cost_params();
    let loaded;
    let net = match net {
        Some(n) => Some(n),
        None if config.methods.iter().any(|m| m.needs_network()) => {
            let path = config
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::Config("network methods need a checkpoint".into()))?;
            loaded = crate::regressor::load_checkpoint(path)?;
            Some(&loaded)
        }
        None => None,
    };
    let calibrated = if config.methods.contains(&Method::ChompCalibrated) {
        Some(calibrate_chomp(&calibration_problem(), &cost, &config.calibration)?.params)
    } else {
        None
    };
    let (anchors, degree) = (config.optimizer.anchors, config.optimizer.degree);
    let k_max = net.map_or(config.generator.max_obstacles(), |n| n.config.max_obstacles);
    let samples = generate(config.generator, config.seed, config.problems, config.collide_fraction)?
        .into_iter()
        .map(|p| ProblemSample::new(p, k_max, anchors, degree, &cost))
        .collect::<Result<Vec<_>>>()?;
    let ctx = Context {
        config,
        cost,
        calibrated,
        net,
    };
    let mut by_method: BTreeMap<Method, Vec<ProblemRecord>> = BTreeMap::new();
    for &method in &config.methods {
        let mut records: Vec<ProblemRecord> = samples
            .par_iter()
            .enumerate()
            .map(|(id, s)| ctx.record(method, id, s))
            .collect();
        records.sort_by_key(|r| r.problem_id);
        by_method.insert(method, records);
    }
    Ok(BenchmarkReport {
        config_hash: config.hash(),
        seed: config.seed,
        generator: config.generator,
        calibrated_chomp: calibrated,
        summaries: by_method.iter().map(|(&m, r)| summarize(m, r)).collect(),
        records: by_method.into_values().flatten().collect(),
    })
}

/// Largest relative gradient errors against central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientAudit {
    pub seed: u64,
    pub step: f64,
    pub path_configurations: usize,
    pub path_checked: usize,
    pub path_max_rel_error: f64,
    pub net_initializations: usize,
    pub net_checked: usize,
    pub net_max_rel_error: f64,
}

/// Problems per network gradient check.
const AUDIT_BATCH: usize = 4;

/// Network parameters checked per initialization, drawn without replacement.
const AUDIT_COMPONENTS: usize = 64;

/// Checks the tape gradient of the planning loss at `path_configurations`
/// random two-anchor configurations with trainable weights, and the batch
/// loss gradient of `net_initializations` fresh simple-2D networks on
/// [`AUDIT_COMPONENTS`] random parameters. Components whose difference
/// stencil crosses a branch boundary are skipped.
pub fn gradient_audit(seed: u64, path_configurations: usize, net_initializations: usize, h: f64) -> Result<GradientAudit> {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::autodiff::{grad_check, grad_check_components};
    use crate::optimizer::{Landscape, PathModel, WeightMode};
    use crate::regressor::NetConfig;
    use crate::scenegen::instance_rng;

    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("difference step must be positive, got {h}")));
    }
    let generator = Generator::Simple2d;
    let cost = generator.cost_params();
    let mut audit = GradientAudit {
        seed,
        step: h,
        path_configurations,
        path_checked: 0,
        path_max_rel_error: 0.0,
        net_initializations,
        net_checked: 0,
        net_max_rel_error: 0.0,
    };
    let problems = generate(generator, seed, path_configurations, 1.0)?;
    for (i, p) in problems.iter().enumerate() {
        let mut rng = instance_rng(seed ^ 0x6772_6164, i as u64);
        let template = p.straight_line(2, 2)?;
        let model = PathModel::new(&p.scene, template.clone(), WeightMode::Trainable, Landscape::Total, cost)?;
        let mut x = model.encode(&template);
        let b = &p.scene.bounds;
        for (k, v) in x[..model.anchor_params()].iter_mut().enumerate() {
            let axis = k % 2;
            *v = rng.gen_range(b.min[axis]..=b.max[axis]);
        }
        for v in &mut x[model.anchor_params()..] {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        let r = grad_check(&model, &x, h)?;
        audit.path_checked += r.checked;
        audit.path_max_rel_error = audit.path_max_rel_error.max(r.max_rel_error);
    }
    for i in 0..net_initializations {
        let net = MlpNet::init(NetConfig::for_generator(generator), &mut instance_rng(seed ^ 0x006e_6574, i as u64))?;
        let batch = sample_problems(generator, 1.0, seed.wrapping_add(i as u64), AUDIT_BATCH)?;
        let g = net.batch_gradient(&batch, &cost)?;
        let with = |p: &[f64]| MlpNet {
            params: p.to_vec(),
            ..net.clone()
        };
        let mut pick = instance_rng(seed ^ 0x0069_6478, i as u64);
        let mut indices = rand::seq::index::sample(&mut pick, net.param_count(), AUDIT_COMPONENTS.min(net.param_count())).into_vec();
        indices.sort_unstable();
        let r = grad_check_components(
            &g.grad,
            |p| with(p).batch_loss(&batch, &cost).unwrap_or(f64::NAN),
            |p| with(p).batch_regime(&batch, &cost).unwrap_or(u64::MAX),
            &net.params,
            h,
            &indices,
        );
        audit.net_checked += r.checked;
        audit.net_max_rel_error = audit.net_max_rel_error.max(r.max_rel_error);
    }
    Ok(audit)
}

/// Seed offset of held-out evaluation problems relative to the training seed.
pub const HELD_OUT_SEED_OFFSET: u64 = 1_000_003;

/// Problems whose straight line collides, drawn from a seed disjoint from the
/// training stream of `seed`.
pub fn held_out_problems(generator: Generator, seed: u64, count: usize) -> Result<Vec<ProblemSample>> {
    sample_problems(generator, 1.0, seed.wrapping_add(HELD_OUT_SEED_OFFSET), count)
}

/// Loss trend of a training run and its held-out performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub steps: usize,
    pub window: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// `final_loss / initial_loss`.
    pub loss_ratio: f64,
    /// Mean loss over ten consecutive equal slices of the trace.
    pub slice_means: Vec<f64>,
    /// Least-squares slope of mean loss against step.
    pub trend_slope: f64,
    /// Negative slope and a final window below the initial one.
    pub trend_decreasing: bool,
    pub held_out: EvalMetrics,
}

/// Summarizes `outcome` with `window`-step loss means and an untimed
/// evaluation on `held_out`.
pub fn training_report(outcome: &TrainOutcome, window: usize, held_out: &[ProblemSample], cost: &CostParams) -> Result<TrainingReport> {
    let trace = &outcome.trace;
    if trace.is_empty() {
        return Err(Error::InvalidArgument("empty training trace".into()));
    }
    let (initial_loss, final_loss) = outcome.loss_windows(window);
    let slices = 10.min(trace.len());
    let slice_means = (0..slices)
        .map(|k| {
            let rows = &trace[k * trace.len() / slices..(k + 1) * trace.len() / slices];
            rows.iter().map(|r| r.mean_loss).sum::<f64>() / rows.len() as f64
        })
        .collect();
    let n = trace.len() as f64;
    let mean_x = trace.iter().map(|r| r.step as f64).sum::<f64>() / n;
    let mean_y = trace.iter().map(|r| r.mean_loss).sum::<f64>() / n;
    let (sxy, sxx) = trace.iter().fold((0.0, 0.0), |(sxy, sxx), r| {
        let dx = r.step as f64 - mean_x;
        (sxy + dx * (r.mean_loss - mean_y), sxx + dx * dx)
    });
    let trend_slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let (held_out, _) = evaluate(&outcome.net, held_out, cost)?;
    Ok(TrainingReport {
        steps: trace.len(),
        window: window.min(trace.len()).max(1),
        initial_loss,
        final_loss,
        loss_ratio: final_loss / initial_loss,
        slice_means,
        trend_slope,
        trend_decreasing: trend_slope < 0.0 && final_loss < initial_loss,
        held_out: held_out.untimed(),
    })
}

/// Effect of collision-only refinement on predicted paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub steps: usize,
    pub problems: usize,
    pub colliding_before: usize,
    /// Colliding predictions made collision-free.
    pub fixed: usize,
    pub free_before: usize,
    /// Collision-free predictions made colliding.
    pub broken: usize,
    pub success_before: f64,
    pub success_after: f64,
}

/// Runs `steps` collision-only refinement steps on each prediction and
/// compares collision status at the verification step before and after.
pub fn refinement_study<P: PathPredictor + Sync + ?Sized>(
    predictor: &P,
    samples: &[ProblemSample],
    cost: &CostParams,
    steps: usize,
    optimizer: &OptimizerConfig,
) -> Result<RefinementReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no problems to refine".into()));
    }
    let outcomes: Vec<(bool, bool)> = samples
        .par_iter()
        .map(|s| {
            let path = predictor.predict(s)?;
            let before = PlanResult::evaluate(path.clone(), &s.problem.scene, cost)?.success;
            let after = refine_collision_only(&path, &s.problem.scene, cost, steps, optimizer)?.success;
            Ok((before, after))
        })
        .collect::<Result<_>>()?;
    let count = |f: &dyn Fn(&(bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count();
    let free_before = count(&|o| o.0);
    let free_after = count(&|o| o.1);
    Ok(RefinementReport {
        steps,
        problems: samples.len(),
        colliding_before: samples.len() - free_before,
        fixed: count(&|o| !o.0 && o.1),
        free_before,
        broken: count(&|o| o.0 && !o.1),
        success_before: free_before as f64 / samples.len() as f64,
        success_after: free_after as f64 / samples.len() as f64,
    })
}
