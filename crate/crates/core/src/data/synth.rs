//! Synthetic untrimmed datasets with learnable, class-specific motion.
//!
//! Every class owns a fixed sinusoidal trajectory per non-root joint and
//! spatial dimension, phase-locked to the instance start. Background frames
//! are Gaussian noise around a rest pose; the root joint never moves, so
//! translation normalization sees the same origin in every clip.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    write_sequence, ActionInstance, DatasetManifest, FrameLayout, SequenceFiles, SkeletonFrame,
    UntrimmedSequence,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub joints: usize,
    pub persons: usize,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub frames: usize,
    pub instances_per_sequence: usize,
    pub min_instance_len: usize,
    pub max_instance_len: usize,
    /// Standard deviation of the per-coordinate noise, in meters.
    pub noise: f64,
    /// Peak displacement of the class trajectories, in meters.
    pub amplitude: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 5,
            joints: 4,
            persons: 1,
            train_sequences: 20,
            test_sequences: 5,
            frames: 600,
            instances_per_sequence: 3,
            min_instance_len: 60,
            max_instance_len: 140,
            noise: 0.02,
            amplitude: 1.0,
        }
    }
}

impl SynthConfig {
    pub const KEYS: &'static [&'static str] = &[
        "classes",
        "joints",
        "persons",
        "train_sequences",
        "test_sequences",
        "frames",
        "instances_per_sequence",
        "min_instance_len",
        "max_instance_len",
        "noise",
        "amplitude",
    ];

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "classes" => self.classes = num(key, value)?,
            "joints" => self.joints = num(key, value)?,
            "persons" => self.persons = num(key, value)?,
            "train_sequences" => self.train_sequences = num(key, value)?,
            "test_sequences" => self.test_sequences = num(key, value)?,
            "frames" => self.frames = num(key, value)?,
            "instances_per_sequence" => self.instances_per_sequence = num(key, value)?,
            "min_instance_len" => self.min_instance_len = num(key, value)?,
            "max_instance_len" => self.max_instance_len = num(key, value)?,
            "noise" => self.noise = num(key, value)?,
            "amplitude" => self.amplitude = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn layout(&self) -> FrameLayout {
        FrameLayout::new(self.joints, 3, self.persons)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.classes == 0 || self.joints < 2 || self.persons == 0 {
            return bad("synthetic data needs classes >= 1, joints >= 2, persons >= 1");
        }
        if self.min_instance_len < 2 || self.min_instance_len > self.max_instance_len {
            return bad("instance length range must satisfy 2 <= min <= max");
        }
        if !(self.noise >= 0.0 && self.amplitude > 0.0) {
            return bad("noise must be >= 0 and amplitude > 0");
        }
        let n = self.instances_per_sequence;
        if n > 0 && n * self.min_instance_len + (n - 1) > self.frames {
            return Err(Error::Packing {
                count: n,
                min_len: self.min_instance_len,
                frames: self.frames,
            });
        }
        Ok(())
    }
}

/// Per-class trajectory parameters for one (joint, dim) coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Wave {
    amplitude: f64,
    /// Cycles per frame.
    frequency: f64,
    phase: f64,
}

/// Generated data: the manifest plus the in-memory train and test splits.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub manifest: DatasetManifest,
    pub train: Vec<UntrimmedSequence>,
    pub test: Vec<UntrimmedSequence>,
    patterns: Vec<Vec<Wave>>,
    layout: FrameLayout,
}

impl SynthDataset {
    /// Noise-free displacement of `class` at `offset` frames after onset.
    pub fn class_displacement(&self, class: usize, offset: usize) -> Vec<f64> {
        let per_person = self.layout.joints * self.layout.dims;
        let waves = &self.patterns[class - 1];
        let mut out = vec![0.0; self.layout.frame_dim()];
        for person in 0..self.layout.persons {
            for (k, w) in waves.iter().enumerate() {
                out[person * per_person + k] =
                    w.amplitude * (TAU * w.frequency * offset as f64 + w.phase).sin();
            }
        }
        out
    }

    /// Writes every sequence plus `manifest.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (files, seq) in self
            .manifest
            .train
            .iter()
            .zip(&self.train)
            .chain(self.manifest.test.iter().zip(&self.test))
        {
            write_sequence(seq, &dir.join(&files.skeleton), &dir.join(&files.labels))?;
        }
        let path = dir.join("manifest.txt");
        fs::write(&path, self.manifest.render()).map_err(|e| Error::io(&path, e))
    }
}

/// Generates a synthetic dataset. The result is a pure function of
/// `(cfg, seed)`.
pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<SynthDataset> {
    cfg.validate()?;
    let layout = cfg.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let per_person = layout.joints * layout.dims;
    let patterns: Vec<Vec<Wave>> = (0..cfg.classes)
        .map(|_| {
            (0..per_person)
                .map(|k| {
                    // The root joint (first `dims` coordinates) stays still.
                    let amplitude = if k < layout.dims {
                        0.0
                    } else {
                        cfg.amplitude * rng.gen_range(0.5..=1.0)
                    };
                    Wave {
                        amplitude,
                        frequency: rng.gen_range(1.0 / 80.0..1.0 / 20.0),
                        phase: rng.gen_range(0.0..TAU),
                    }
                })
                .collect()
        })
        .collect();

    // Rest pose: joints stacked along the vertical axis.
    let rest: Vec<f64> = (0..per_person)
        .map(|k| if k % layout.dims == 1 { 0.25 * (k / layout.dims) as f64 } else { 0.0 })
        .collect();

    let mut dataset = SynthDataset {
        manifest: DatasetManifest::new(cfg.classes, layout),
        train: Vec::new(),
        test: Vec::new(),
        patterns,
        layout,
    };
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    for split in ["train", "test"] {
        let count = if split == "train" {
            cfg.train_sequences
        } else {
            cfg.test_sequences
        };
        for idx in 0..count {
            let instances = pack_instances(cfg, &mut rng)?;
            let offsets: Vec<[f64; 3]> = (0..layout.persons)
                .map(|p| {
                    [
                        rng.gen_range(-1.0..1.0) + p as f64,
                        0.0,
                        rng.gen_range(2.0..4.0),
                    ]
                })
                .collect();
            let mut frames = Vec::with_capacity(cfg.frames);
            let mut cursor = instances.iter().peekable();
            for t in 1..=cfg.frames {
                while cursor.peek().is_some_and(|i| i.end < t) {
                    cursor.next();
                }
                let active = cursor.peek().filter(|i| i.contains(t));
                let motion = active.map(|i| dataset.class_displacement(i.class_id, t - i.start));
                let mut coords = Vec::with_capacity(layout.frame_dim());
                for (p, off) in offsets.iter().enumerate() {
                    for k in 0..per_person {
                        let mut v = rest[k] + off[k % layout.dims];
                        if let Some(m) = &motion {
                            v += m[p * per_person + k];
                        }
                        v += noise.sample(&mut rng);
                        coords.push(v);
                    }
                }
                frames.push(SkeletonFrame::new(coords));
            }
            let seq = UntrimmedSequence::new(frames, instances)?;
            let files = SequenceFiles {
                skeleton: format!("{split}_{idx:03}.skeleton").into(),
                labels: format!("{split}_{idx:03}.labels").into(),
            };
            if split == "train" {
                dataset.manifest.train.push(files);
                dataset.train.push(seq);
            } else {
                dataset.manifest.test.push(files);
                dataset.test.push(seq);
            }
        }
    }
    Ok(dataset)
}

/// Places instances without overlap and with at least one background frame
/// between neighbors.
fn pack_instances(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<ActionInstance>> {
    let n = cfg.instances_per_sequence;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut lengths = Vec::with_capacity(n);
    let mut used = 0;
    for i in 0..n {
        let reserve = (n - i - 1) * cfg.min_instance_len + (n - 1);
        let budget = cfg.frames - used - reserve;
        let hi = cfg.max_instance_len.min(budget);
        let len = rng.gen_range(cfg.min_instance_len..=hi);
        used += len;
        lengths.push(len);
    }
    // Later draws are squeezed by the budget; shuffle so no slot is biased.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        lengths.swap(i, j);
    }
    let free = cfg.frames - used - (n - 1);
    let mut cuts: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=free)).collect();
    cuts.sort_unstable();
    let mut instances = Vec::with_capacity(n);
    let mut prev_cut = 0;
    let mut next_start = 1;
    for (i, (&len, &cut)) in lengths.iter().zip(&cuts).enumerate() {
        let gap = cut - prev_cut + usize::from(i > 0);
        prev_cut = cut;
        let start = next_start + gap;
        let end = start + len - 1;
        let class_id = rng.gen_range(1..=cfg.classes);
        instances.push(ActionInstance::new(start, end, class_id)?);
        next_start = end + 1;
    }
    Ok(instances)
}
