//! Acceptance gate: runs every criterion at its stated tolerance and prints
//! one PASS or FAIL line per criterion. Failures are reported, not hidden;
//! with `ACCEPTANCE_STRICT=1` any failure also makes the run exit non-zero.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use splinepath::bench::{
    gradient_audit, held_out_problems, refinement_study, run_benchmark, training_report, BenchConfig, Method,
};
use splinepath::cost::{polyline_length, total_loss};
use splinepath::optimizer::{optimize_path, Landscape, PathModel, WeightMode};
use splinepath::oracle::{brute_force_optimum, verify_suite, GridSpec, LandscapeCost};
use splinepath::regressor::{train, TrainConfig};
use splinepath::scenegen::{generate, Generator};
use splinepath::{CostParams, OptimizerConfig, SplinePath};

const SEED: u64 = 0;

struct Verdict {
    pass: bool,
    detail: String,
    /// Untimed, reproducible content of the run.
    report: Value,
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn property_suite() -> Verdict {
    let t0 = Instant::now();
    let s = verify_suite(SEED, 20, 1000, 201).expect("property suite runs");
    let fast = within(t0.elapsed(), 120);
    let t = &s.total;
    Verdict {
        pass: t.violations() == 0 && t.trials == 20_000 && fast,
        detail: format!(
            "{} trials, MP {} NP {} GP {} violations, max GP excess {:.3e} under slack {:.3e}, {:.1}s",
            t.trials,
            t.mp_violations,
            t.np_violations,
            t.gp_violations,
            t.max_gp_excess,
            t.slack,
            t0.elapsed().as_secs_f64()
        ),
        report: serde_json::to_value(&s).unwrap(),
    }
}

fn benchmark() -> Verdict {
    let t0 = Instant::now();
    let config = BenchConfig {
        seed: SEED,
        ..BenchConfig::default()
    };
    let r = run_benchmark(&config, None).expect("benchmark runs");
    let fast = within(t0.elapsed(), 600);
    let rate = |m: Method| r.summary(m).map_or(0.0, |s| s.success_rate);
    let (ours, cal, uncal) = (
        rate(Method::OursDirect),
        rate(Method::ChompCalibrated),
        rate(Method::ChompUncalibrated),
    );
    let checks = [
        (ours >= 0.95, "ours-direct >= 95%"),
        (cal < ours, "calibrated CHOMP < ours-direct"),
        (uncal < cal, "uncalibrated CHOMP < calibrated CHOMP"),
        (fast, "under 10 min"),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.0).map(|c| c.1).collect();
    Verdict {
        pass: failed.is_empty(),
        detail: format!(
            "ours-direct {:.2}%, calibrated CHOMP {:.2}% ({:?}), uncalibrated CHOMP {:.2}%, {:.1}s{}",
            100.0 * ours,
            100.0 * cal,
            r.calibrated_chomp,
            100.0 * uncal,
            t0.elapsed().as_secs_f64(),
            if failed.is_empty() {
                String::new()
            } else {
                format!("; unmet: {}", failed.join(", "))
            }
        ),
        report: serde_json::from_str(&r.untimed_json()).unwrap(),
    }
}

fn random_path(rng: &mut ChaCha8Rng, start: &[f64], goal: &[f64], anchors: usize) -> SplinePath {
    let pts = (0..anchors)
        .map(|_| start.iter().map(|_| rng.gen_range(-0.2..1.2)).collect())
        .collect();
    let weights = (0..anchors).map(|_| rng.gen_range(0.05..=1.0)).collect();
    SplinePath::new(2, start.to_vec(), goal.to_vec(), pts, weights).expect("valid random path")
}

fn bounds() -> Verdict {
    let t0 = Instant::now();
    let problems = generate(Generator::Simple2d, SEED, 100, 0.5).expect("problems generate");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut upper, mut monotone, mut worst_gap, mut worst_drop) = (0, 0, f64::INFINITY, 0.0f64);
    for k in 0..1000 {
        let p = &problems[k % problems.len()];
        let anchors = rng.gen_range(1..=4);
        let path = random_path(&mut rng, &p.start, &p.goal, anchors);
        let cost = CostParams::new(0.01, rng.gen_range(0.0..0.2)).unwrap();
        let b = total_loss(&p.scene, &path, &cost).expect("loss evaluates");
        let gap = b.smooth_collision - b.exact_collision;
        worst_gap = worst_gap.min(gap);
        if gap >= -1e-9 {
            upper += 1;
        }
        let lengths: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|&s| polyline_length(&path.sample(s).unwrap().points))
            .collect();
        let drop = lengths.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
        worst_drop = worst_drop.max(drop);
        if drop <= 1e-9 {
            monotone += 1;
        }
    }
    Verdict {
        pass: upper == 1000 && monotone == 1000 && within(t0.elapsed(), 60),
        detail: format!(
            "upper bound held on {upper}/1000 (min smooth - exact {worst_gap:.3e}), refinement-monotone length on {monotone}/1000 (max decrease {worst_drop:.3e}), {:.1}s",
            t0.elapsed().as_secs_f64()
        ),
        report: json!({ "upper": upper, "monotone": monotone, "min_gap": worst_gap, "max_drop": worst_drop }),
    }
}

fn gradients() -> Verdict {
    let t0 = Instant::now();
    let a = gradient_audit(SEED, 50, 10, 1e-5).expect("gradient audit runs");
    Verdict {
        pass: a.path_max_rel_error < 1e-4 && a.net_max_rel_error < 1e-3 && within(t0.elapsed(), 60),
        detail: format!(
            "loss {:.3e} over {} components (< 1e-4), network {:.3e} over {} components (< 1e-3), {:.1}s",
            a.path_max_rel_error,
            a.path_checked,
            a.net_max_rel_error,
            a.net_checked,
            t0.elapsed().as_secs_f64()
        ),
        report: serde_json::to_value(&a).unwrap(),
    }
}

fn oracle_agreement() -> Verdict {
    let t0 = Instant::now();
    let cost = Generator::Simple2d.cost_params();
    let config = OptimizerConfig::default();
    let problems = generate(Generator::Simple2d, SEED, 20, 1.0).expect("problems generate");
    let mut rows = Vec::new();
    let mut agree = 0;
    for p in &problems {
        let grid = GridSpec::covering(p, 201).unwrap();
        let bf = brute_force_optimum(p, &cost, LandscapeCost::Smooth, &grid).expect("oracle runs");
        let r = optimize_path(p, &cost, &config).expect("optimizer runs");
        let model = PathModel::new(&p.scene, r.path.clone(), WeightMode::Fixed, Landscape::Total, cost).unwrap();
        let loss = model.loss(&model.encode(&r.path));
        let ok = loss <= bf.best_cost + bf.slack && (!bf.best_free || r.success);
        agree += ok as usize;
        rows.push(json!({
            "optimizer_loss": loss,
            "optimizer_free": r.success,
            "grid_loss": bf.best_cost,
            "grid_free": bf.best_free,
            "slack": bf.slack,
            "agree": ok,
        }));
    }
    Verdict {
        pass: agree == problems.len() && within(t0.elapsed(), 300),
        detail: format!("{agree}/{} instances agree at 201x201, {:.1}s", problems.len(), t0.elapsed().as_secs_f64()),
        report: Value::Array(rows),
    }
}

fn box_world() -> Verdict {
    let t0 = Instant::now();
    let g = Generator::BoxWorld3d;
    let cost = g.cost_params();
    let (anchors, degree) = g.path_shape();
    let config = OptimizerConfig {
        anchors,
        degree,
        restarts: 5,
        seed: SEED,
        ..OptimizerConfig::default()
    };
    let problems = generate(g, SEED, 100, 1.0).expect("problems generate");
    let straight = problems
        .iter()
        .filter(|p| p.straight_line_collides(anchors, degree, &cost).unwrap())
        .count();
    let results: Vec<bool> = problems
        .iter()
        .map(|p| optimize_path(p, &cost, &config).map(|r| r.success).unwrap_or(false))
        .collect();
    let free = results.iter().filter(|&&s| s).count();
    Verdict {
        pass: straight == 100 && free >= 85 && within(t0.elapsed(), 900),
        detail: format!(
            "{free}/100 collision-free (>= 85), straight line collides on {straight}/100, {:.1}s",
            t0.elapsed().as_secs_f64()
        ),
        report: json!({ "success": results }),
    }
}

/// Criteria 7 and 8 share the trained network.
fn training() -> (Verdict, Verdict) {
    let t0 = Instant::now();
    let config = TrainConfig {
        seed: SEED,
        ..TrainConfig::default()
    };
    let outcome = train(&config, None).expect("training runs");
    let train_s = t0.elapsed().as_secs_f64();
    let cost = config.cost_params();
    let held = held_out_problems(config.generator, SEED, 200).expect("held-out problems generate");
    let r = training_report(&outcome, 100, &held, &cost).expect("report builds");
    let loss_ok = r.loss_ratio <= 0.5;
    let success_ok = r.held_out.success_rate >= 0.7;
    let c7 = Verdict {
        pass: loss_ok && success_ok && train_s <= 1800.0,
        detail: format!(
            "{} steps in {train_s:.0}s, final/initial 100-step loss {:.3} (<= 0.5{}), held-out success {:.1}% on 200 (>= 70%{}), loss trend {}",
            r.steps,
            r.loss_ratio,
            if loss_ok { "" } else { ", unmet" },
            100.0 * r.held_out.success_rate,
            if success_ok { "" } else { ", unmet" },
            if r.trend_decreasing { "decreasing" } else { "NOT decreasing" },
        ),
        report: serde_json::to_value(&r).unwrap(),
    };
    let t1 = Instant::now();
    let f = refinement_study(&outcome.net, &held, &cost, 6, &OptimizerConfig::default()).expect("refinement runs");
    let c8 = Verdict {
        pass: f.fixed > 0 && f.broken == 0,
        detail: format!(
            "6 collision-only steps fixed {}/{} colliding predictions, broke {}/{} free ones, success {:.1}% -> {:.1}%, {:.1}s",
            f.fixed,
            f.colliding_before,
            f.broken,
            f.free_before,
            100.0 * f.success_before,
            100.0 * f.success_after,
            t1.elapsed().as_secs_f64()
        ),
        report: serde_json::to_value(&f).unwrap(),
    };
    (c7, c8)
}

fn run_all(only: &[usize], log: bool) -> Vec<(usize, &'static str, Verdict)> {
    let wanted = |id: usize| only.is_empty() || only.contains(&id);
    let mut out = Vec::new();
    let mut push = |id: usize, name: &'static str, v: Verdict| {
        if log {
            print_line(id, name, &v);
        }
        out.push((id, name, v));
    };
    let criteria: [(usize, &'static str, fn() -> Verdict); 6] = [
        (1, "property suite", property_suite),
        (2, "planning benchmark", benchmark),
        (3, "cost bounds", bounds),
        (4, "gradient correctness", gradients),
        (5, "oracle agreement", oracle_agreement),
        (6, "box-world feasibility", box_world),
    ];
    for (id, name, f) in criteria {
        if wanted(id) {
            push(id, name, f());
        }
    }
    if wanted(7) || wanted(8) {
        let (c7, c8) = training();
        push(7, "unsupervised training", c7);
        push(8, "collision-only refinement", c8);
    }
    out
}

fn print_line(id: usize, name: &str, v: &Verdict) {
    println!(
        "criterion {id} ({name}): {} | {}",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail
    );
}

/// `ACCEPTANCE_ONLY=2,5` runs the listed criteria once and skips the
/// determinism repeat.
fn main() {
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .map(|v| v.split(',').filter_map(|c| c.trim().parse().ok()).collect())
        .unwrap_or_default();
    let first = run_all(&only, true);
    let mut failures = first.iter().filter(|c| !c.2.pass).count();
    if only.is_empty() {
        let t0 = Instant::now();
        let second = run_all(&only, false);
        let differing: Vec<usize> = first
            .iter()
            .zip(&second)
            .filter(|(a, b)| serde_json::to_string(&a.2.report).unwrap() != serde_json::to_string(&b.2.report).unwrap())
            .map(|(a, _)| a.0)
            .collect();
        let c9 = Verdict {
            pass: differing.is_empty(),
            detail: if differing.is_empty() {
                format!("criteria 1-8 repeated with identical reports, {:.1}s", t0.elapsed().as_secs_f64())
            } else {
                format!("reports differ for criteria {differing:?}")
            },
            report: Value::Null,
        };
        print_line(9, "determinism", &c9);
        failures += usize::from(!c9.pass);
        println!("acceptance: {}/9 criteria pass", 9 - failures);
    } else {
        println!("acceptance: {}/{} selected criteria pass", first.len() - failures, first.len());
    }
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
