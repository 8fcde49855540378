//! Flat `key = value` run configuration.
//!
//! Unknown keys are rejected so typos fail at startup. The rendered form is
//! stored inside every checkpoint as a record of how it was produced.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::eval::{InferenceMode, InstanceRule};
use crate::model::AdamConfig;
use crate::sampling::{SamplerConfig, SamplerMode};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub sampler: SamplerConfig,
    pub hidden: usize,
    pub layers: usize,
    pub alpha: f64,
    pub beta: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Teacher checkpoint or representation store, required when alpha > 0.
    pub teacher: Option<PathBuf>,
    pub normalize: bool,
    pub segments: usize,
    pub instance_rule: InstanceRule,
    pub stitched: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            sampler: SamplerConfig::default(),
            hidden: 100,
            layers: 3,
            alpha: 1.0,
            beta: 1.0,
            adam: AdamConfig::default(),
            epochs: 30,
            batch_size: 1,
            seed: None,
            out_dir: None,
            teacher: None,
            normalize: true,
            segments: 10,
            instance_rule: InstanceRule::LastFrame,
            stitched: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "manifest",
    "clip_len",
    "context_window",
    "sampler_mode",
    "sw_stride",
    "hidden",
    "layers",
    "alpha",
    "beta",
    "lr",
    "clip_norm",
    "epochs",
    "batch_size",
    "seed",
    "out_dir",
    "teacher",
    "normalize",
    "segments",
    "instance_rule",
    "inference",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", idx + 1)))?;
        }
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "manifest" => self.manifest = Some(value.into()),
            "clip_len" => self.sampler.clip_len = parse_num(key, value)?,
            "context_window" => self.sampler.context = parse_num(key, value)?,
            "sampler_mode" => self.sampler.mode = value.parse::<SamplerMode>()?,
            "sw_stride" => self.sampler.stride = parse_num(key, value)?,
            "hidden" => self.hidden = parse_num(key, value)?,
            "layers" => self.layers = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "beta" => self.beta = parse_num(key, value)?,
            "lr" => self.adam.lr = parse_num(key, value)?,
            "clip_norm" => self.adam.clip_norm = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "seed" => self.seed = Some(parse_num(key, value)?),
            "out_dir" => self.out_dir = Some(value.into()),
            "teacher" => self.teacher = Some(value.into()),
            "normalize" => self.normalize = parse_bool(key, value)?,
            "segments" => self.segments = parse_num(key, value)?,
            "instance_rule" => self.instance_rule = value.parse()?,
            "inference" => {
                self.stitched = match value {
                    "streaming" => false,
                    "stitched" => true,
                    _ => return Err(Error::Config(format!("unknown inference mode `{value}`"))),
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("`seed` is required".into()))
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        self.sampler.validate()?;
        if self.hidden == 0 || self.layers == 0 || self.batch_size == 0 {
            return Err(Error::Config("hidden, layers and batch_size must be >= 1".into()));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::Config("alpha and beta must be >= 0".into()));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config("lr must be > 0".into()));
        }
        if self.segments < 2 {
            return Err(Error::Config("segments must be >= 2".into()));
        }
        Ok(())
    }

    pub fn inference(&self) -> InferenceMode {
        if self.stitched {
            InferenceMode::Stitched {
                clip_len: self.sampler.clip_len,
            }
        } else {
            InferenceMode::Streaming
        }
    }

    /// Canonical text form; `parse(render())` reproduces the config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(m) = &self.manifest {
            kv("manifest", m.display().to_string());
        }
        kv("clip_len", self.sampler.clip_len.to_string());
        kv("context_window", self.sampler.context.to_string());
        kv("sampler_mode", self.sampler.mode.to_string());
        kv("sw_stride", self.sampler.stride.to_string());
        kv("hidden", self.hidden.to_string());
        kv("layers", self.layers.to_string());
        kv("alpha", self.alpha.to_string());
        kv("beta", self.beta.to_string());
        kv("lr", self.adam.lr.to_string());
        kv("clip_norm", self.adam.clip_norm.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        if let Some(s) = self.seed {
            kv("seed", s.to_string());
        }
        if let Some(o) = &self.out_dir {
            kv("out_dir", o.display().to_string());
        }
        if let Some(t) = &self.teacher {
            kv("teacher", t.display().to_string());
        }
        kv("normalize", self.normalize.to_string());
        kv("segments", self.segments.to_string());
        kv(
            "instance_rule",
            match self.instance_rule {
                InstanceRule::LastFrame => "last",
                InstanceRule::MeanProb => "mean",
            }
            .into(),
        );
        kv("inference", if self.stitched { "stitched" } else { "streaming" }.into());
        out
    }
}
