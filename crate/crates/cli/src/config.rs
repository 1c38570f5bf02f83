//! Flat key-value configuration with defaults; unknown keys are rejected and
//! command-line flags override file values.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use pushgrasp_core::datagen::DatagenConfig;
use pushgrasp_core::nets::{LossConfig, OptimizerKind, Schedule, TrainConfig};
use pushgrasp_core::policy::EpisodeConfig;
use pushgrasp_core::sim::{parse_shape_library, GripperSpec, ShapeSpec};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub finger_length: f64,
    pub finger_thickness: f64,
    pub finger_height: f64,
    pub max_opening: f64,
    pub palm_depth: f64,
    pub friction_cone_deg: f64,
    pub noise_sigma: f64,
    pub points_per_object: usize,
    pub grasp_n_max: usize,
    pub pusher_radius: f64,
    pub push_stroke: f64,
    pub n_objects: usize,
    pub grasp_samples: usize,
    pub push_samples: usize,
    pub grasp_threshold: f64,
    pub push_label_threshold: f64,
    pub label_smoothing: f64,
    pub weight_decay: f64,
    pub grasp_batch: usize,
    pub grasp_lr: f64,
    pub grasp_epochs: usize,
    pub push_batch: usize,
    pub push_val_batch: usize,
    pub push_lr: f64,
    pub push_epochs: usize,
    pub max_actions: usize,
    pub shape_library: String,
    pub no_gripper_pc: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            finger_length: 0.04,
            finger_thickness: 0.01,
            finger_height: 0.03,
            max_opening: 0.10,
            palm_depth: 0.02,
            friction_cone_deg: 20.0,
            noise_sigma: 0.002,
            points_per_object: 256,
            grasp_n_max: 64,
            pusher_radius: 0.008,
            push_stroke: 0.125,
            n_objects: 10,
            grasp_samples: 4000,
            push_samples: 4000,
            grasp_threshold: 0.8,
            push_label_threshold: 0.8,
            label_smoothing: 0.1,
            weight_decay: 0.01,
            grasp_batch: 256,
            grasp_lr: 5e-4,
            grasp_epochs: 85,
            push_batch: 128,
            push_val_batch: 64,
            push_lr: 8e-4,
            push_epochs: 100,
            max_actions: 10,
            shape_library: String::new(),
            no_gripper_pc: false,
        }
    }
}

/// Every tunable with a one-line description; `--help` prints this table and
/// a test pins it against the struct fields.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("finger_length", "gripper finger length along the approach axis, m"),
    ("finger_thickness", "gripper finger thickness along the closing axis, m"),
    ("finger_height", "gripper finger extent across the closing axis, m"),
    ("max_opening", "maximum gripper opening, m"),
    ("palm_depth", "palm box depth behind the fingers, m"),
    ("friction_cone_deg", "friction cone half-angle for the grasp oracle, degrees"),
    ("noise_sigma", "Gaussian noise added to rendered clouds, m"),
    ("points_per_object", "surface points rendered per object"),
    ("grasp_n_max", "max grasp candidates kept per target"),
    ("pusher_radius", "pusher disc radius, m"),
    ("push_stroke", "push stroke length, m"),
    ("n_objects", "objects per generated scene"),
    ("grasp_samples", "grasp dataset size for gen-data"),
    ("push_samples", "push dataset size for gen-data"),
    ("grasp_threshold", "policy executes a grasp above this score"),
    ("push_label_threshold", "push label requires post-push best grasp score above this"),
    ("label_smoothing", "epsilon of the smoothed cross-entropy grasp loss"),
    ("weight_decay", "AdamW decoupled weight decay (grasp training)"),
    ("grasp_batch", "grasp training batch size"),
    ("grasp_lr", "grasp training initial learning rate"),
    ("grasp_epochs", "grasp training epochs"),
    ("push_batch", "push training batch size"),
    ("push_val_batch", "push training validation batch size"),
    ("push_lr", "push training initial learning rate"),
    ("push_epochs", "push training epochs"),
    ("max_actions", "action budget per episode"),
    ("shape_library", "path to a custom shape library file (empty = builtin)"),
    ("no_gripper_pc", "ablation: drop the gripper point cloud from grasp states"),
];

pub fn describe_keys() -> String {
    let mut s = String::from("configuration keys (TOML file via --config; flags override):\n");
    for (k, d) in CONFIG_KEYS {
        s.push_str(&format!("  {k:<22} {d}\n"));
    }
    s
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("finger_length", self.finger_length),
            ("finger_thickness", self.finger_thickness),
            ("finger_height", self.finger_height),
            ("max_opening", self.max_opening),
            ("palm_depth", self.palm_depth),
            ("friction_cone_deg", self.friction_cone_deg),
            ("pusher_radius", self.pusher_radius),
            ("push_stroke", self.push_stroke),
            ("grasp_lr", self.grasp_lr),
            ("push_lr", self.push_lr),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                bail!("config: {name} must be > 0, got {v}");
            }
        }
        if self.noise_sigma < 0.0 {
            bail!("config: noise_sigma must be >= 0");
        }
        if self.max_opening <= 2.0 * self.finger_thickness {
            bail!("config: max_opening must exceed twice the finger thickness");
        }
        if !(self.grasp_threshold > 0.0 && self.grasp_threshold < 1.0) {
            bail!("config: grasp_threshold must lie in (0, 1)");
        }
        if !(self.push_label_threshold > 0.0 && self.push_label_threshold < 1.0) {
            bail!("config: push_label_threshold must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            bail!("config: label_smoothing must lie in [0, 1)");
        }
        for (name, v) in [
            ("points_per_object", self.points_per_object),
            ("grasp_n_max", self.grasp_n_max),
            ("n_objects", self.n_objects),
            ("grasp_batch", self.grasp_batch),
            ("grasp_epochs", self.grasp_epochs),
            ("push_batch", self.push_batch),
            ("push_val_batch", self.push_val_batch),
            ("push_epochs", self.push_epochs),
            ("max_actions", self.max_actions),
        ] {
            if v == 0 {
                bail!("config: {name} must be >= 1");
            }
        }
        Ok(())
    }

    pub fn gripper(&self) -> GripperSpec {
        GripperSpec {
            finger_length: self.finger_length,
            finger_thickness: self.finger_thickness,
            finger_height: self.finger_height,
            max_opening: self.max_opening,
            palm_depth: self.palm_depth,
            friction_cone_half_angle: self.friction_cone_deg.to_radians(),
        }
    }

    pub fn shapes(&self) -> Result<Vec<ShapeSpec>> {
        if self.shape_library.is_empty() {
            Ok(pushgrasp_core::sim::builtin_shapes())
        } else {
            let text = std::fs::read_to_string(&self.shape_library)
                .with_context(|| format!("reading shape library {}", self.shape_library))?;
            Ok(parse_shape_library(&text)?)
        }
    }

    pub fn datagen(&self) -> Result<DatagenConfig> {
        Ok(DatagenConfig {
            n_objects: self.n_objects,
            points_per_object: self.points_per_object,
            noise_sigma: self.noise_sigma,
            gripper: self.gripper(),
            n_max_grasps: self.grasp_n_max,
            pusher_radius: self.pusher_radius,
            stroke: self.push_stroke,
            no_gripper_pc: self.no_gripper_pc,
            shape_library: self.shapes()?,
        })
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            max_actions: self.max_actions,
            grasp_threshold: self.grasp_threshold,
            points_per_object: self.points_per_object,
            noise_sigma: self.noise_sigma,
            gripper: self.gripper(),
            n_max_grasps: self.grasp_n_max,
            pusher_radius: self.pusher_radius,
            stroke: self.push_stroke,
            no_gripper_pc: self.no_gripper_pc,
            allow_pushes: true,
        }
    }

    pub fn grasp_train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.grasp_batch,
            val_batch_size: self.grasp_batch,
            lr0: self.grasp_lr,
            schedule: Schedule::StepDecay { milestones: vec![40, 55, 80], factor: 0.1 },
            epochs: self.grasp_epochs,
            optimizer: OptimizerKind::AdamW { weight_decay: self.weight_decay },
            seed,
        }
    }

    pub fn push_train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.push_batch,
            val_batch_size: self.push_val_batch,
            lr0: self.push_lr,
            schedule: Schedule::PlateauDecay { factor: 0.95 },
            epochs: self.push_epochs,
            optimizer: OptimizerKind::Adam,
            seed,
        }
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig { epsilon: self.label_smoothing, classes: 2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_table_matches_struct_fields_exactly() {
        // serialize the default config and compare its keys with the table
        let toml_text = toml::to_string(&Config::default()).unwrap();
        let doc: toml::Table = toml_text.parse().unwrap();
        let mut struct_keys: Vec<String> = doc.keys().cloned().collect();
        struct_keys.sort();
        let mut table_keys: Vec<String> =
            CONFIG_KEYS.iter().map(|(k, _)| k.to_string()).collect();
        table_keys.sort();
        assert_eq!(struct_keys, table_keys, "--help key table out of sync with Config");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "grasp_lr = 0.001\nnot_a_key = 5\n";
        assert!(toml::from_str::<Config>(text).is_err());
    }

    #[test]
    fn defaults_validate_and_match_paper_training_setup() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        let g = cfg.grasp_train(0);
        assert_eq!(g.batch_size, 256);
        assert_eq!(g.epochs, 85);
        assert_eq!(g.lr0, 5e-4);
        assert!(matches!(g.schedule, Schedule::StepDecay { ref milestones, factor }
            if *milestones == vec![40, 55, 80] && factor == 0.1));
        let p = cfg.push_train(0);
        assert_eq!(p.batch_size, 128);
        assert_eq!(p.val_batch_size, 64);
        assert_eq!(p.epochs, 100);
        assert_eq!(p.lr0, 8e-4);
        assert!(matches!(p.schedule, Schedule::PlateauDecay { factor } if factor == 0.95));
        assert_eq!(cfg.grasp_threshold, 0.8);
        assert_eq!(cfg.max_actions, 10);
        assert_eq!(cfg.push_stroke, 0.125);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut cfg = Config::default();
        cfg.grasp_threshold = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = Config::default();
        cfg.max_opening = 0.01;
        assert!(cfg.validate().is_err());
        let mut cfg = Config::default();
        cfg.grasp_epochs = 0;
        assert!(cfg.validate().is_err());
    }
}
