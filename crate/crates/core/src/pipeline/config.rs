//! Run configuration: every training hyperparameter plus paths and mode
//! flags, stored as flat `key=value` lines with `#` comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imageproc::{INPUT_HEIGHT, INPUT_WIDTH};
use crate::network::SPATIAL_DIVISOR;
use crate::training::TrainConfig;

/// Epoch count used for desk-scale runs.
pub const DESK_EPOCHS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub manifest: Option<PathBuf>,
    pub weights_dir: PathBuf,
    pub output_dir: PathBuf,
    pub input_height: usize,
    pub input_width: usize,
    /// Also write the ensemble probability map next to each mask.
    pub write_probability_maps: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig {
                epochs: DESK_EPOCHS,
                ..TrainConfig::default()
            },
            manifest: None,
            weights_dir: PathBuf::from("weights"),
            output_dir: PathBuf::from("predictions"),
            input_height: INPUT_HEIGHT,
            input_width: INPUT_WIDTH,
            write_probability_maps: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "batch_size",
    "learning_rate",
    "epochs",
    "dropout_p",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "flip_prob",
    "max_shift_frac",
    "max_rotate_deg",
    "scale_min",
    "scale_max",
    "contrast_gain_min",
    "contrast_gain_max",
    "ensemble_size",
    "seed",
    "manifest",
    "weights_dir",
    "output_dir",
    "input_height",
    "input_width",
    "write_probability_maps",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

impl RunConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let a = &mut t.augment;
        match key {
            "batch_size" => t.batch_size = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "dropout_p" => t.dropout_p = parse(key, value)?,
            "adam_beta1" => t.adam_beta1 = parse(key, value)?,
            "adam_beta2" => t.adam_beta2 = parse(key, value)?,
            "adam_epsilon" => t.adam_epsilon = parse(key, value)?,
            "flip_prob" => a.flip_prob = parse(key, value)?,
            "max_shift_frac" => a.max_shift_frac = parse(key, value)?,
            "max_rotate_deg" => a.max_rotate_deg = parse(key, value)?,
            "scale_min" => a.scale_range.0 = parse(key, value)?,
            "scale_max" => a.scale_range.1 = parse(key, value)?,
            "contrast_gain_min" => a.contrast_gain_range.0 = parse(key, value)?,
            "contrast_gain_max" => a.contrast_gain_range.1 = parse(key, value)?,
            "ensemble_size" => t.ensemble_size = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "weights_dir" => self.weights_dir = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "input_height" => self.input_height = parse(key, value)?,
            "input_width" => self.input_width = parse(key, value)?,
            "write_probability_maps" => self.write_probability_maps = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` assignment.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(k.trim(), v.trim())
    }

    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            cfg.apply(line)
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let keys: Vec<&str> = text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('=').map(|(k, _)| k.trim()))
            .collect();
        if keys.contains(&"manifest") {
            cfg.manifest = cfg.manifest.map(|m| base.join(m));
        }
        if keys.contains(&"weights_dir") {
            cfg.weights_dir = base.join(&cfg.weights_dir);
        }
        if keys.contains(&"output_dir") {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let t = &self.train;
        let a = &t.augment;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").expect("writing to a string");
        kv("batch_size", t.batch_size.to_string());
        kv("learning_rate", t.learning_rate.to_string());
        kv("epochs", t.epochs.to_string());
        kv("dropout_p", t.dropout_p.to_string());
        kv("adam_beta1", t.adam_beta1.to_string());
        kv("adam_beta2", t.adam_beta2.to_string());
        kv("adam_epsilon", t.adam_epsilon.to_string());
        kv("flip_prob", a.flip_prob.to_string());
        kv("max_shift_frac", a.max_shift_frac.to_string());
        kv("max_rotate_deg", a.max_rotate_deg.to_string());
        kv("scale_min", a.scale_range.0.to_string());
        kv("scale_max", a.scale_range.1.to_string());
        kv("contrast_gain_min", a.contrast_gain_range.0.to_string());
        kv("contrast_gain_max", a.contrast_gain_range.1.to_string());
        kv("ensemble_size", t.ensemble_size.to_string());
        kv("seed", t.seed.to_string());
        if let Some(m) = &self.manifest {
            kv("manifest", m.display().to_string());
        }
        kv("weights_dir", self.weights_dir.display().to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("input_height", self.input_height.to_string());
        kv("input_width", self.input_width.to_string());
        kv("write_probability_maps", self.write_probability_maps.to_string());
        s
    }

    /// Hyperparameters and network input size.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        for (name, v) in [("input_height", self.input_height), ("input_width", self.input_width)] {
            if v == 0 || v % SPATIAL_DIVISOR != 0 {
                return Err(Error::Config(format!(
                    "{name} must be a positive multiple of {SPATIAL_DIVISOR}, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// The manifest, which must name an existing file.
    pub fn require_manifest(&self) -> Result<&Path> {
        let m = self
            .manifest
            .as_deref()
            .ok_or_else(|| Error::Config("no manifest given".into()))?;
        if !m.is_file() {
            return Err(Error::Config(format!("manifest {} does not exist", m.display())));
        }
        Ok(m)
    }
}

/// Creates `dir` (and parents) and fails early when that is impossible.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    Ok(())
}
