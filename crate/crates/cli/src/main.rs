//! `splinepath` command line: problem generation, planning, training,
//! evaluation, benchmarks, rendering and verification.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use splinepath::bench::{
    gradient_audit, held_out_problems, plan_chomp, refinement_study, run_benchmark, training_report, BenchConfig,
};
use splinepath::optimizer::optimize_path;
use splinepath::oracle::{cost_heatmap, verify_suite, GridSpec, LandscapeCost};
use splinepath::regressor::{evaluate, load_checkpoint, train, TrainConfig};
use splinepath::render::{render_svg, LabeledPath};
use splinepath::scenegen::{generate, Generator};
use splinepath::{ChompParams, OptimizerConfig, Problem};

const USAGE_EXIT: u8 = 1;
const RUNTIME_EXIT: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "splinepath", version, about = "Collision-free shortest paths by gradient descent on NURBS anchors")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Seed for every random draw; overrides the config file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON config for `plan` (optimizer), `train` or `bench`.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", env = "SPLINEPATH_OUT", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate problems and write `problems.json`.
    Gen {
        #[arg(long, value_enum, default_value_t = GeneratorArg::Simple2d)]
        generator: GeneratorArg,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Fraction of problems whose straight line collides.
        #[arg(long, default_value_t = 1.0)]
        collide_fraction: f64,
    },
    /// Optimize one problem and write `plan.json`.
    Plan {
        #[command(flatten)]
        pick: Pick,
    },
    /// Train the path regressor; writes `checkpoint.json`, `trace.csv` and
    /// `train_report.json`.
    Train {
        /// Held-out problems evaluated after training.
        #[arg(long, default_value_t = 200)]
        held_out: usize,
    },
    /// Evaluate a checkpoint on held-out problems and write `eval.json`.
    Eval {
        /// Defaults to `checkpoint.json` in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Collision-only refinement steps applied to the predictions.
        #[arg(long, default_value_t = 6)]
        refine_steps: usize,
    },
    /// Run the planning benchmark; writes `report.json` and `records.csv`.
    Bench {
        /// Network checkpoint for the network methods.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Draw one simple-2D problem with planned paths to `render.svg`.
    Render {
        #[command(flatten)]
        pick: Pick,
        /// Background cost raster, also written as `heatmap.pgm`.
        #[arg(long, value_enum, default_value_t = HeatmapArg::Smooth)]
        heatmap: HeatmapArg,
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        /// Also draw the uncalibrated CHOMP path.
        #[arg(long)]
        chomp: bool,
    },
    /// Check the minimum, non-colliding and global optimum properties on
    /// generated simple-2D instances; writes `verify.json`.
    Verify {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 201)]
        resolution: usize,
    },
    /// Compare analytic gradients with central differences; writes
    /// `gradcheck.json`.
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        configurations: usize,
        #[arg(long, default_value_t = 10)]
        initializations: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        path_tolerance: f64,
        #[arg(long, default_value_t = 1e-3)]
        net_tolerance: f64,
    },
}

#[derive(Debug, clap::Args)]
struct Pick {
    /// Problem list from `gen`; generated from the seed when absent.
    #[arg(long, value_name = "FILE")]
    problems: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    index: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GeneratorArg {
    Simple2d,
    BoxWorld3d,
}

impl From<GeneratorArg> for Generator {
    fn from(g: GeneratorArg) -> Self {
        match g {
            GeneratorArg::Simple2d => Generator::Simple2d,
            GeneratorArg::BoxWorld3d => Generator::BoxWorld3d,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HeatmapArg {
    None,
    Smooth,
    Exact,
    ChompUncalibrated,
}

/// A failure with its exit status.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<splinepath::Error> for Failure {
    fn from(e: splinepath::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE_EXIT),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE_EXIT)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(RUNTIME_EXIT)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let takes_config = matches!(cli.command, Command::Plan { .. } | Command::Train { .. } | Command::Bench { .. } | Command::Render { .. });
    if cli.config.is_some() && !takes_config {
        return Err(Failure::Usage("--config applies to plan, train, bench and render only".into()));
    }
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    let seed = cli.seed;
    match cli.command {
        Command::Gen {
            generator,
            count,
            collide_fraction,
        } => {
            let problems = generate(generator.into(), seed.unwrap_or(0), count, collide_fraction)?;
            write_json(&out.join("problems.json"), &problems)?;
            println!("{}", serde_json::json!({ "problems": problems.len() }));
        }
        Command::Plan { pick } => {
            let config = optimizer_config(cli.config.as_deref(), seed)?;
            let problem = pick_problem(&pick, seed)?;
            let cost = generator_of(&problem).cost_params();
            let result = optimize_path(&problem, &cost, &config)?;
            write_json(&out.join("plan.json"), &serde_json::json!({ "problem": problem, "result": result }))?;
            println!(
                "{}",
                serde_json::json!({ "success": result.success, "length": result.breakdown.length })
            );
        }
        Command::Train { held_out } => {
            let mut config: TrainConfig = load_config(cli.config.as_deref())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let outcome = train(&config, Some(out))?;
            let held = held_out_problems(config.generator, config.seed, held_out)?;
            let report = training_report(&outcome, 100, &held, &config.cost_params())?;
            write_json(&out.join("train_report.json"), &report)?;
            println!("{}", serde_json::to_string(&report).context("encoding report")?);
        }
        Command::Eval {
            checkpoint,
            count,
            refine_steps,
        } => {
            let path = checkpoint.unwrap_or_else(|| out.join("checkpoint.json"));
            let net = load_checkpoint(&path)?;
            let generator = if net.config.dim == 3 {
                Generator::BoxWorld3d
            } else {
                Generator::Simple2d
            };
            let cost = generator.cost_params();
            let samples = held_out_problems(generator, seed.unwrap_or(0), count)?;
            let (metrics, _) = evaluate(&net, &samples, &cost)?;
            let refinement = refinement_study(&net, &samples, &cost, refine_steps, &OptimizerConfig::default())?;
            let report = serde_json::json!({ "metrics": metrics, "refinement": refinement });
            write_json(&out.join("eval.json"), &report)?;
            println!("{report}");
        }
        Command::Bench { checkpoint } => {
            let mut config: BenchConfig = load_config(cli.config.as_deref())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            if checkpoint.is_some() {
                config.checkpoint = checkpoint;
            }
            let report = run_benchmark(&config, None)?;
            report.write(out)?;
            println!("{}", serde_json::to_string(&report.summaries).context("encoding summaries")?);
        }
        Command::Render {
            pick,
            heatmap,
            resolution,
            chomp,
        } => {
            let config = optimizer_config(cli.config.as_deref(), seed)?;
            let problem = pick_problem(&pick, seed)?;
            if problem.scene.dim != 2 {
                return Err(Failure::Usage("render needs a 2D problem".into()));
            }
            let cost = Generator::Simple2d.cost_params();
            let verify_step = cost.verification().step;
            let mut paths = vec![LabeledPath::new(
                "straight line",
                problem.straight_line(config.anchors, config.degree)?.sample(verify_step)?.points,
            )];
            let ours = optimize_path(&problem, &cost, &config)?;
            paths.push(LabeledPath::new("ours", ours.path.sample(verify_step)?.points));
            let uncalibrated = ChompParams::default_uncalibrated();
            if chomp {
                let c = plan_chomp(&problem, &cost, &uncalibrated, &config, resolution)?;
                paths.push(LabeledPath::new("chomp uncalibrated", c.path.sample(verify_step)?.points));
            }
            let landscape = match heatmap {
                HeatmapArg::None => None,
                HeatmapArg::Smooth => Some(LandscapeCost::Smooth),
                HeatmapArg::Exact => Some(LandscapeCost::Exact),
                HeatmapArg::ChompUncalibrated => Some(LandscapeCost::Chomp(uncalibrated)),
            };
            let raster = match landscape {
                Some(l) => {
                    let r = cost_heatmap(&problem, &cost, l, &GridSpec::covering(&problem, resolution)?)?;
                    r.write_pgm(&out.join("heatmap.pgm"))?;
                    Some(r)
                }
                None => None,
            };
            render_svg(&problem, &paths, raster.as_ref(), &out.join("render.svg"))?;
            println!("{}", serde_json::json!({ "paths": paths.len(), "heatmap": raster.is_some() }));
        }
        Command::Verify {
            instances,
            trials,
            resolution,
        } => {
            let report = verify_suite(seed.unwrap_or(0), instances, trials, resolution)?;
            write_json(&out.join("verify.json"), &report)?;
            println!("{}", serde_json::to_string(&report.total).context("encoding report")?);
            if report.total.violations() > 0 {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "{} property violations",
                    report.total.violations()
                )));
            }
        }
        Command::Gradcheck {
            configurations,
            initializations,
            step,
            path_tolerance,
            net_tolerance,
        } => {
            let audit = gradient_audit(seed.unwrap_or(0), configurations, initializations, step)?;
            write_json(&out.join("gradcheck.json"), &audit)?;
            println!("{}", serde_json::to_string(&audit).context("encoding report")?);
            if audit.path_max_rel_error >= path_tolerance || audit.net_max_rel_error >= net_tolerance {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "gradient error above tolerance: path {:.3e}, network {:.3e}",
                    audit.path_max_rel_error,
                    audit.net_max_rel_error
                )));
            }
        }
    }
    Ok(())
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn optimizer_config(path: Option<&Path>, seed: Option<u64>) -> Result<OptimizerConfig> {
    let mut config: OptimizerConfig = load_config(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn pick_problem(pick: &Pick, seed: Option<u64>) -> Result<Problem> {
    let problems: Vec<Problem> = match &pick.problems {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => generate(Generator::Simple2d, seed.unwrap_or(0), pick.index + 1, 1.0)?,
    };
    let Some(problem) = problems.into_iter().nth(pick.index) else {
        bail!("problem index {} out of range", pick.index);
    };
    problem.validate()?;
    Ok(problem)
}

fn generator_of(problem: &Problem) -> Generator {
    if problem.scene.dim == 3 {
        Generator::BoxWorld3d
    } else {
        Generator::Simple2d
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("encoding JSON")?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
