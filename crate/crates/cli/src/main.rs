//! Single executable orchestrating the pipeline: dataset generation, training
//! both evaluators, evaluation suites, single-episode replay, calibration,
//! and SVG rendering.

mod config;
mod svg;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

use config::{describe_keys, Config};
use pushgrasp_core::datagen::{
    calibrate_threshold, collect_grasp_data, collect_push_data, Dataset, DatasetKind,
    CALIBRATION_THRESHOLDS,
};
use pushgrasp_core::nets::{
    train_grasp, train_push, Checkpoint, CheckpointMeta, TrainReport,
};
use pushgrasp_core::policy::{
    evaluate_suite, run_episode, trace_from_text, trace_to_text, Scenario,
};
use pushgrasp_core::sim::{generate_scene, Scene};

#[derive(Parser)]
#[command(
    name = "pushgrasp",
    about = "Geometry-aware push-grasp synergy: simulator, evaluators, policy",
    after_help = describe_keys(),
    version
)]
struct Cli {
    /// TOML configuration file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap the worker thread count.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DataKind {
    Grasp,
    Push,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset (.pgds).
    GenData {
        #[arg(long, value_enum)]
        kind: DataKind,
        /// Sample count; defaults to grasp_samples / push_samples from config.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Trained grasp checkpoint (required for push data).
        #[arg(long)]
        grasp_ckpt: Option<PathBuf>,
        /// Objects per scene (overrides config n_objects).
        #[arg(long)]
        objects: Option<usize>,
        /// Build ablation grasp states without the gripper point cloud.
        #[arg(long)]
        no_gripper_pc: bool,
        /// Suppress per-scene progress records.
        #[arg(long)]
        quiet: bool,
    },
    /// Train an evaluator from a dataset and write a checkpoint (.pgck).
    Train {
        #[arg(long, value_enum)]
        kind: DataKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Expect an ablation dataset and tag the checkpoint accordingly.
        #[arg(long)]
        no_gripper_pc: bool,
    },
    /// Run an evaluation suite and print the summary table plus records.
    Eval {
        #[arg(long)]
        grasp_ckpt: PathBuf,
        #[arg(long)]
        push_ckpt: Option<PathBuf>,
        /// Objects per random scene.
        #[arg(long)]
        objects: Option<usize>,
        /// Number of episodes.
        #[arg(long, default_value_t = 30)]
        scenes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Disable pushing (grasp-only baseline).
        #[arg(long)]
        single_grasp: bool,
        /// Serialized challenge scene, evaluated `--scenes` times.
        #[arg(long)]
        challenge: Option<PathBuf>,
    },
    /// Run one episode; optionally write the trace and an SVG.
    RunEpisode {
        #[arg(long)]
        grasp_ckpt: PathBuf,
        #[arg(long)]
        push_ckpt: Option<PathBuf>,
        /// Load this scene file instead of generating one.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        objects: Option<usize>,
        /// Seed for the generated scene.
        #[arg(long)]
        scene_seed: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        single_grasp: bool,
    },
    /// Render a scene or an episode trace to SVG.
    Render {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep score thresholds against oracle success rates.
    Calibrate {
        #[arg(long)]
        grasp_ckpt: PathBuf,
        /// Number of evaluation scenes.
        #[arg(long, default_value_t = 40)]
        n_eval: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

/// Seed resolution: flag, then the PUSHGRASP_SEED environment variable, then 0.
fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var("PUSHGRASP_SEED").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0)
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn load_grasp_ckpt(path: &Path) -> Result<(pushgrasp_core::nets::GraspNet<f32>, bool)> {
    let ckpt = Checkpoint::load_from_path(path)
        .with_context(|| format!("loading grasp checkpoint {}", path.display()))?;
    let (net, ablated) = ckpt
        .as_grasp()
        .ok_or_else(|| anyhow!("{} is not a grasp checkpoint", path.display()))?;
    Ok((net.clone(), ablated))
}

fn load_push_ckpt(path: &Path) -> Result<pushgrasp_core::nets::PushNet<f32>> {
    let ckpt = Checkpoint::load_from_path(path)
        .with_context(|| format!("loading push checkpoint {}", path.display()))?;
    ckpt.as_push()
        .cloned()
        .ok_or_else(|| anyhow!("{} is not a push checkpoint", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.config)?;
    match cli.command {
        Command::GenData { kind, n, seed, out, grasp_ckpt, objects, no_gripper_pc, quiet } => {
            let seed = resolve_seed(seed);
            let mut dg = cfg.datagen()?;
            if let Some(k) = objects {
                dg.n_objects = k;
            }
            dg.no_gripper_pc = no_gripper_pc || cfg.no_gripper_pc;
            let progress = |i: usize, stats: &pushgrasp_core::datagen::CollectStats| {
                if !quiet {
                    println!("scene={} kept={} skipped={}", i, stats.kept, stats.skipped());
                }
            };
            let (data, stats) = match kind {
                DataKind::Grasp => {
                    let n = n.unwrap_or(cfg.grasp_samples);
                    collect_grasp_data(n, &dg, seed, progress)?
                }
                DataKind::Push => {
                    let Some(ckpt_path) = grasp_ckpt else {
                        eprintln!("usage error: gen-data push requires --grasp-ckpt");
                        std::process::exit(2);
                    };
                    let (net, ablated) = load_grasp_ckpt(&ckpt_path)?;
                    let n = n.unwrap_or(cfg.push_samples);
                    collect_push_data(
                        n,
                        &net,
                        ablated,
                        cfg.push_label_threshold as f32,
                        &dg,
                        seed,
                        progress,
                    )?
                }
            };
            data.write_to_path(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {} samples to {} | positive rate {:.3} | scenes processed {} | skipped {}",
                data.len(),
                out.display(),
                data.positive_rate(),
                stats.scenes_processed,
                stats.skipped()
            );
            let rate = data.positive_rate();
            if !(0.1..0.9).contains(&rate) {
                eprintln!("warning: class balance {rate:.3} is degenerate for training");
            }
            Ok(())
        }

        Command::Train { kind, data, out, epochs, seed, no_gripper_pc } => {
            let seed = resolve_seed(seed);
            let dataset = Dataset::read_from_path(&data)
                .with_context(|| format!("reading dataset {}", data.display()))?;
            let rows = dataset.labeled_rows();
            match kind {
                DataKind::Grasp => {
                    let want = if no_gripper_pc {
                        DatasetKind::GraspNoGripperPc
                    } else {
                        DatasetKind::Grasp
                    };
                    if dataset.kind() != want {
                        bail!(
                            "dataset kind {:?} does not match the requested training ({:?})",
                            dataset.kind(),
                            want
                        );
                    }
                    let mut tc = cfg.grasp_train(seed);
                    if let Some(e) = epochs {
                        tc.epochs = e;
                    }
                    let (net, report) = train_grasp(&rows, &tc, &cfg.loss())?;
                    print_report(&report);
                    let meta = final_meta(&report, seed);
                    Checkpoint::Grasp { net, meta, ablated: no_gripper_pc }
                        .save_to_path(&out)
                        .with_context(|| format!("writing {}", out.display()))?;
                    println!("wrote checkpoint {}", out.display());
                }
                DataKind::Push => {
                    if dataset.kind() != DatasetKind::Push {
                        bail!("dataset kind {:?} is not a push dataset", dataset.kind());
                    }
                    let mut tc = cfg.push_train(seed);
                    if let Some(e) = epochs {
                        tc.epochs = e;
                    }
                    let (net, report) = train_push(&rows, &tc)?;
                    print_report(&report);
                    let meta = final_meta(&report, seed);
                    Checkpoint::Push(net, meta)
                        .save_to_path(&out)
                        .with_context(|| format!("writing {}", out.display()))?;
                    println!("wrote checkpoint {}", out.display());
                }
            }
            Ok(())
        }

        Command::Eval { grasp_ckpt, push_ckpt, objects, scenes, seed, single_grasp, challenge } => {
            let seed = resolve_seed(seed);
            let (grasp_net, ablated) = load_grasp_ckpt(&grasp_ckpt)?;
            let push_net = match (&push_ckpt, single_grasp) {
                (_, true) => None,
                (Some(p), false) => Some(load_push_ckpt(p)?),
                (None, false) => bail!("eval requires --push-ckpt unless --single-grasp is set"),
            };
            let mut ep = cfg.episode();
            ep.no_gripper_pc = ablated;
            ep.allow_pushes = !single_grasp;
            let shapes = cfg.shapes()?;
            let scenario = match challenge {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let scene = Scene::from_text(&text, &shapes)?;
                    Scenario::Challenge(vec![scene; scenes])
                }
                None => Scenario::Random {
                    n_objects: objects.unwrap_or(cfg.n_objects),
                    n_scenes: scenes,
                    shape_library: shapes,
                },
            };
            let summary = evaluate_suite(&scenario, &grasp_net, push_net.as_ref(), &ep, seed)?;
            print!("{}", summary.to_table());
            print!("{}", summary.to_records());
            Ok(())
        }

        Command::RunEpisode {
            grasp_ckpt,
            push_ckpt,
            scene,
            objects,
            scene_seed,
            seed,
            trace,
            svg: svg_out,
            single_grasp,
        } => {
            let seed = resolve_seed(seed);
            let (grasp_net, ablated) = load_grasp_ckpt(&grasp_ckpt)?;
            let push_net = match (&push_ckpt, single_grasp) {
                (_, true) => None,
                (Some(p), false) => Some(load_push_ckpt(p)?),
                (None, false) => {
                    bail!("run-episode requires --push-ckpt unless --single-grasp is set")
                }
            };
            let shapes = cfg.shapes()?;
            let scene = match scene {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    Scene::from_text(&text, &shapes)?
                }
                None => generate_scene(
                    objects.unwrap_or(cfg.n_objects),
                    &shapes,
                    scene_seed.unwrap_or(seed),
                )?,
            };
            let mut ep = cfg.episode();
            ep.no_gripper_pc = ablated;
            ep.allow_pushes = !single_grasp;
            let result = run_episode(&scene, &grasp_net, push_net.as_ref(), &ep, seed);
            println!(
                "completed={} motions={} pushes={} grasp_attempts={} grasp_successes={}",
                result.completed,
                result.motion_number(),
                result.push_count(),
                result.grasp_attempts,
                result.grasp_successes
            );
            if let Some(path) = trace {
                std::fs::write(&path, trace_to_text(&scene, &result))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(path) = svg_out {
                std::fs::write(&path, svg::trace_to_svg(&scene, &result, &cfg.gripper()))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }

        Command::Render { scene, trace, out } => {
            let shapes = cfg.shapes()?;
            let svg_text = match (scene, trace) {
                (Some(path), None) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    svg::scene_to_svg(&Scene::from_text(&text, &shapes)?)
                }
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let (scene, result) = trace_from_text(&text, &shapes)?;
                    svg::trace_to_svg(&scene, &result, &cfg.gripper())
                }
                _ => {
                    eprintln!("usage error: render needs exactly one of --scene or --trace");
                    std::process::exit(2);
                }
            };
            std::fs::write(&out, svg_text)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(())
        }

        Command::Calibrate { grasp_ckpt, n_eval, seed } => {
            let seed = resolve_seed(seed);
            let (net, ablated) = load_grasp_ckpt(&grasp_ckpt)?;
            let dg = cfg.datagen()?;
            let (rows, total) =
                calibrate_threshold(&net, ablated, &CALIBRATION_THRESHOLDS, n_eval, &dg, seed)?;
            println!("candidates evaluated: {total}");
            for r in &rows {
                println!(
                    "threshold={:.1} candidates_above={} success_rate={:.4}",
                    r.threshold,
                    r.candidates_above,
                    r.success_rate()
                );
            }
            Ok(())
        }
    }
}

fn print_report(report: &TrainReport) {
    for m in &report.epochs {
        println!(
            "epoch={} lr={:.1e} train_loss={:.4} train_acc={:.4} val_loss={:.4} val_acc={:.4}",
            m.epoch, m.lr, m.train_loss, m.train_acc, m.val_loss, m.val_acc
        );
    }
}

fn final_meta(report: &TrainReport, seed: u64) -> CheckpointMeta {
    CheckpointMeta {
        epoch: report.epochs.len() as u32,
        loss: report.final_val_loss() as f32,
        seed,
    }
}
