//! `key = value` run configuration with `#` comments and dotted keys.
//! Missing keys keep their defaults; unknown keys are rejected.

use std::fmt::Write as _;

use thiserror::Error;

use crate::pipeline::TrackerConfig;
use crate::postproc::{ClusterConfig, DEFAULT_NMS_IOU};
use crate::sac::{DetectionSampling, FeatureMask, TrainConfig, TrainingSetConfig};
use crate::sim::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: key {key:?} cannot take value {value:?} (expected {expected})")]
    TypeError {
        key: String,
        value: String,
        expected: &'static str,
        line: usize,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Gated,
    Random,
}

/// Options for turning tracker output into classifier training samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingOptions {
    pub gt_iou: f64,
    pub sampling: SamplingMode,
    pub gate_radius: f64,
    pub sample_seed: u64,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        Self {
            gt_iou: 0.6,
            sampling: SamplingMode::Gated,
            gate_radius: 2.0,
            sample_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    /// Apply strict NMS to detections before tracking.
    pub nms: bool,
    pub nms_iou: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            nms: false,
            nms_iou: DEFAULT_NMS_IOU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub train: TrainConfig,
    pub training: TrainingOptions,
    pub cluster: ClusterConfig,
    pub scenario: ScenarioConfig,
    pub preprocess: PreprocessConfig,
}

impl RunConfig {
    pub fn training_set_config(&self) -> TrainingSetConfig {
        TrainingSetConfig {
            history: self.tracker.history,
            gt_iou: self.training.gt_iou,
            sampling: match self.training.sampling {
                SamplingMode::Gated => DetectionSampling::Gated {
                    radius: self.training.gate_radius,
                },
                SamplingMode::Random => DetectionSampling::Random {
                    seed: self.training.sample_seed,
                },
            },
            mask: self.tracker.mask,
        }
    }
}

enum Field<'a> {
    F64(&'a mut f64),
    Usize(&'a mut usize),
    U32(&'a mut u32),
    U64(&'a mut u64),
    Bool(&'a mut bool),
    Mask(&'a mut FeatureMask),
    Sampling(&'a mut SamplingMode),
}

const MASKS: [(&str, FeatureMask); 4] = [
    ("full", FeatureMask::FULL),
    ("no_switcher", FeatureMask::NO_SWITCHER),
    ("short_only", FeatureMask::SHORT_ONLY),
    ("long_only", FeatureMask::LONG_ONLY),
];

pub fn mask_name(m: &FeatureMask) -> Option<&'static str> {
    MASKS.iter().find(|(_, x)| x == m).map(|(n, _)| *n)
}

pub fn parse_mask(s: &str) -> Option<FeatureMask> {
    MASKS.iter().find(|(n, _)| *n == s).map(|(_, m)| *m)
}

impl Field<'_> {
    fn set(&mut self, v: &str) -> Result<(), &'static str> {
        fn num<T: std::str::FromStr>(v: &str) -> Option<T> {
            v.parse().ok()
        }
        match self {
            Field::F64(x) => **x = num::<f64>(v).filter(|f| f.is_finite()).ok_or("a finite number")?,
            Field::Usize(x) => **x = num(v).ok_or("a non-negative integer")?,
            Field::U32(x) => **x = num(v).ok_or("a non-negative integer")?,
            Field::U64(x) => **x = num(v).ok_or("a non-negative integer")?,
            Field::Bool(x) => **x = num(v).ok_or("true or false")?,
            Field::Mask(x) => **x = parse_mask(v).ok_or("full, no_switcher, short_only or long_only")?,
            Field::Sampling(x) => {
                **x = match v {
                    "gated" => SamplingMode::Gated,
                    "random" => SamplingMode::Random,
                    _ => return Err("gated or random"),
                }
            }
        }
        Ok(())
    }

    fn get(&self) -> String {
        match self {
            Field::F64(x) => format!("{:?}", **x),
            Field::Usize(x) => x.to_string(),
            Field::U32(x) => x.to_string(),
            Field::U64(x) => x.to_string(),
            Field::Bool(x) => x.to_string(),
            Field::Mask(x) => mask_name(x).unwrap_or("custom").to_string(),
            Field::Sampling(x) => match **x {
                SamplingMode::Gated => "gated".into(),
                SamplingMode::Random => "random".into(),
            },
        }
    }
}

fn fields(c: &mut RunConfig) -> Vec<(&'static str, Field<'_>)> {
    let t = &mut c.tracker;
    let s = &mut c.scenario;
    vec![
        ("quality.decay", Field::F64(&mut t.quality.decay)),
        ("quality.k", Field::U32(&mut t.quality.k)),
        ("quality.drop_threshold", Field::F64(&mut t.quality.drop_threshold)),
        ("quality.output_threshold", Field::F64(&mut t.quality.output_threshold)),
        ("history.k", Field::Usize(&mut t.history.k)),
        ("history.delta", Field::U32(&mut t.history.delta)),
        ("tracker.zeta_m", Field::F64(&mut t.zeta_m)),
        ("tracker.birth_confidence", Field::F64(&mut t.birth_confidence)),
        ("tracker.birth_max_iou", Field::F64(&mut t.birth_max_iou)),
        ("tracker.features", Field::Mask(&mut t.mask)),
        ("kalman.process_noise", Field::F64(&mut t.kalman.process_noise)),
        ("kalman.measurement_noise", Field::F64(&mut t.kalman.measurement_noise)),
        (
            "kalman.initial_velocity_variance",
            Field::F64(&mut t.kalman.initial_velocity_variance),
        ),
        ("train.trees", Field::Usize(&mut c.train.n_trees)),
        ("train.max_depth", Field::Usize(&mut c.train.max_depth)),
        ("train.learning_rate", Field::F64(&mut c.train.learning_rate)),
        ("train.min_child_weight", Field::F64(&mut c.train.min_child_weight)),
        ("train.lambda", Field::F64(&mut c.train.lambda)),
        ("train.gamma", Field::F64(&mut c.train.gamma)),
        ("train.sketch_eps", Field::F64(&mut c.train.sketch_eps)),
        ("train.gt_iou", Field::F64(&mut c.training.gt_iou)),
        ("train.sampling", Field::Sampling(&mut c.training.sampling)),
        ("train.gate_radius", Field::F64(&mut c.training.gate_radius)),
        ("train.sample_seed", Field::U64(&mut c.training.sample_seed)),
        ("cluster.sim_threshold", Field::F64(&mut c.cluster.sim_threshold)),
        (
            "cluster.merge_feature_threshold",
            Field::F64(&mut c.cluster.merge_feature_threshold),
        ),
        (
            "cluster.merge_max_frame_overlap",
            Field::Usize(&mut c.cluster.merge_max_frame_overlap),
        ),
        ("cluster.merge_max_gap", Field::U32(&mut c.cluster.merge_max_gap)),
        (
            "cluster.merge_max_center_dist",
            Field::F64(&mut c.cluster.merge_max_center_dist),
        ),
        ("preprocess.nms", Field::Bool(&mut c.preprocess.nms)),
        ("preprocess.nms_iou", Field::F64(&mut c.preprocess.nms_iou)),
        ("scenario.targets", Field::Usize(&mut s.n_targets)),
        ("scenario.frames", Field::U32(&mut s.n_frames)),
        ("scenario.width", Field::F64(&mut s.width)),
        ("scenario.height", Field::F64(&mut s.height)),
        ("scenario.speed_min", Field::F64(&mut s.speed_min)),
        ("scenario.speed_max", Field::F64(&mut s.speed_max)),
        ("scenario.crossings", Field::Usize(&mut s.crossings)),
        ("scenario.fn_rate", Field::F64(&mut s.fn_rate)),
        ("scenario.fp_rate", Field::F64(&mut s.fp_rate)),
        ("scenario.jitter", Field::F64(&mut s.jitter)),
        ("scenario.conf_noise", Field::F64(&mut s.conf_noise)),
        ("scenario.embed_dim", Field::Usize(&mut s.embed_dim)),
        ("scenario.appearance_noise", Field::F64(&mut s.appearance_noise)),
        ("scenario.occlusion_mixing", Field::F64(&mut s.occlusion_mixing)),
        ("scenario.seed", Field::U64(&mut s.seed)),
    ]
}

/// Every recognized key.
pub fn known_keys() -> Vec<&'static str> {
    fields(&mut RunConfig::default()).into_iter().map(|(k, _)| k).collect()
}

/// Parse `text` on top of `base`.
pub fn apply_config(base: RunConfig, text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = base;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        let mut fs = fields(&mut cfg);
        let Some((_, field)) = fs.iter_mut().find(|(k, _)| *k == key) else {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line,
            });
        };
        field.set(value).map_err(|expected| ConfigError::TypeError {
            key: key.to_string(),
            value: value.to_string(),
            expected,
            line,
        })?;
    }
    Ok(cfg)
}

pub fn load_config(text: &str) -> Result<RunConfig, ConfigError> {
    apply_config(RunConfig::default(), text)
}

/// Serialize the keys under `prefix` (all keys for `""`).
pub fn write_config(cfg: &RunConfig, prefix: &str) -> String {
    let mut copy = *cfg;
    let mut out = String::new();
    for (k, f) in fields(&mut copy) {
        if k.starts_with(prefix) {
            let _ = writeln!(out, "{k} = {}", f.get());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = load_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.tracker.quality.decay, 0.95);
        assert_eq!(c.tracker.quality.k, 16);
        assert_eq!(c.tracker.zeta_m, 0.05);
        assert_eq!(c.tracker.quality.drop_threshold, 0.1);
        assert_eq!((c.tracker.history.k, c.tracker.history.delta), (3, 15));
        assert_eq!((c.train.n_trees, c.train.max_depth), (410, 5));
        assert_eq!((c.train.learning_rate, c.train.min_child_weight), (0.05, 1.0));
    }

    #[test]
    fn override_and_errors() {
        let c = load_config("# comment\nquality.decay = 0.9  # trailing\n").unwrap();
        assert_eq!(c.tracker.quality.decay, 0.9);
        assert_eq!(c.tracker.quality.k, 16);
        match load_config("quality.decay = fast") {
            Err(ConfigError::TypeError { key, line, .. }) => assert_eq!((key.as_str(), line), ("quality.decay", 1)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_config("\nquality.decy = 1"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            load_config("quality.decay"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(
            load_config("train.trees = -3"),
            Err(ConfigError::TypeError { .. })
        ));
        assert!(matches!(
            load_config("train.lambda = inf"),
            Err(ConfigError::TypeError { .. })
        ));
    }

    #[test]
    fn write_then_load_round_trips() {
        let mut c = RunConfig::default();
        c.scenario.seed = 77;
        c.scenario.jitter = 0.1 + 0.2;
        c.tracker.mask = FeatureMask::SHORT_ONLY;
        c.training.sampling = SamplingMode::Random;
        assert_eq!(load_config(&write_config(&c, "")).unwrap(), c);
        let scen = write_config(&c, "scenario.");
        assert!(scen.lines().all(|l| l.starts_with("scenario.")));
        assert_eq!(load_config(&scen).unwrap().scenario, c.scenario);
    }

    #[test]
    fn mutated_keys_are_rejected() {
        for key in known_keys() {
            for bad in [
                format!("{key}x"),
                key.to_uppercase(),
                key.replace('.', "_"),
                format!("x{key}"),
            ] {
                assert!(
                    matches!(load_config(&format!("{bad} = 1")), Err(ConfigError::UnknownKey { .. })),
                    "{bad}"
                );
            }
        }
    }
}
