//! Minibatch training loops for the student and teacher networks.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::{normalize_clip, FrameLayout};
use crate::error::{Error, Result};
use crate::losses::{LossBreakdown, LossSpec, TeacherRepStore};
use crate::model::{backward_clip, Adam, AdamConfig, ModelDims, ModelParams};
use crate::rng::derived_rng;
use crate::sampling::{epoch_clips, Clip, LabeledSequence, SamplerConfig};

// Stream purposes under the run seed.
const INIT: u32 = 1;
const SAMPLER: u32 = 2;
const TEACHER_INIT: u32 = 3;
const TEACHER_SHUFFLE: u32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub sampler: SamplerConfig,
    pub hidden: usize,
    pub layers: usize,
    pub alpha: f64,
    pub beta: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Translation normalization per clip; `None` feeds raw coordinates.
    pub normalize: Option<FrameLayout>,
}

impl TrainConfig {
    pub fn from_run(cfg: &crate::config::RunConfig, layout: FrameLayout) -> Result<Self> {
        cfg.validate()?;
        Ok(TrainConfig {
            sampler: cfg.sampler,
            hidden: cfg.hidden,
            layers: cfg.layers,
            alpha: cfg.alpha,
            beta: cfg.beta,
            adam: cfg.adam,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            seed: cfg.seed()?,
            normalize: cfg.normalize.then_some(layout),
        })
    }

    fn dims(&self, input: usize, classes: usize) -> ModelDims {
        ModelDims {
            input,
            hidden: self.hidden,
            layers: self.layers,
            classes,
        }
    }
}

/// Mean losses over one epoch's clips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub losses: LossBreakdown,
    pub clips: usize,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,L_c,L_r,L_n,total";

    pub fn csv_row(&self) -> String {
        let l = &self.losses;
        format!("{},{},{},{},{}", self.epoch, l.classification, l.full_rep, l.actionness, l.total)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Parameters after the epoch with the lowest mean total loss.
    pub best: ModelParams,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

fn prepare(clip: &Clip, normalize: Option<FrameLayout>) -> Clip {
    match normalize {
        Some(layout) => Clip {
            frames: normalize_clip(&clip.frames, layout),
            ..clip.clone()
        },
        None => clip.clone(),
    }
}

/// Runs `epochs` of minibatch Adam. `clips_for` supplies each epoch's
/// clips in order; gradients within a batch are summed in that order.
fn fit<F>(
    mut params: ModelParams,
    cfg: &TrainConfig,
    spec: &LossSpec<'_>,
    mut clips_for: F,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome>
where
    F: FnMut(usize) -> Result<Vec<Clip>>,
{
    spec.validate()?;
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let mut adam = Adam::new(cfg.adam, &params);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0, params.clone());
    for epoch in 0..cfg.epochs {
        let clips = clips_for(epoch)?;
        let mut sum = LossBreakdown::default();
        for batch in clips.chunks(cfg.batch_size) {
            let mut grads = params.zeros_like();
            for clip in batch {
                let (l, g) = backward_clip(&params, &prepare(clip, cfg.normalize), spec)?;
                grads.accumulate(&g);
                sum.classification += l.classification;
                sum.full_rep += l.full_rep;
                sum.actionness += l.actionness;
                sum.total += l.total;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut params, &grads)?;
        }
        let n = clips.len().max(1) as f64;
        let entry = EpochLog {
            epoch: epoch + 1,
            losses: LossBreakdown {
                classification: sum.classification / n,
                full_rep: sum.full_rep / n,
                actionness: sum.actionness / n,
                total: sum.total / n,
            },
            clips: clips.len(),
        };
        on_epoch(&entry);
        if entry.losses.total < best.0 {
            best = (entry.losses.total, entry.epoch, params.clone());
        }
        log.push(entry);
    }
    Ok(TrainOutcome {
        params,
        best: best.2,
        best_epoch: best.1,
        log,
    })
}

/// Trains the anticipation network on untrimmed sequences.
///
/// The run is a pure function of the config (including its seed), the
/// sequences and the teacher store.
pub fn train(
    cfg: &TrainConfig,
    seqs: &[LabeledSequence],
    classes: usize,
    teacher: Option<&TeacherRepStore>,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    let input = seqs
        .first()
        .map(|s| s.sequence.frame_dim())
        .ok_or_else(|| Error::InvalidArgument("no training sequences".into()))?;
    let spec = LossSpec::new(cfg.alpha, cfg.beta, teacher)?;
    if let Some(store) = teacher.filter(|_| cfg.alpha > 0.0) {
        if store.hidden() != cfg.hidden {
            return Err(Error::Config(format!(
                "teacher representations have size {}, model hidden size is {}",
                store.hidden(),
                cfg.hidden
            )));
        }
    }
    let params = ModelParams::init(cfg.dims(input, classes), &mut derived_rng(cfg.seed, INIT, 0))?;
    fit(
        params,
        cfg,
        &spec,
        |epoch| {
            let mut rng: ChaCha8Rng = derived_rng(cfg.seed, SAMPLER, epoch as u32);
            epoch_clips(seqs, &cfg.sampler, epoch, &mut rng)
        },
        on_epoch,
    )
}

/// Trains a same-architecture side network on trimmed instances, labeling
/// every frame with the instance class.
pub fn train_teacher(
    cfg: &TrainConfig,
    seqs: &[LabeledSequence],
    classes: usize,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    let clips = seqs
        .iter()
        .flat_map(|s| (0..s.sequence.instances().len()).map(move |i| Clip::trimmed(s, i)))
        .collect::<Result<Vec<_>>>()?;
    if clips.is_empty() {
        return Err(Error::InvalidArgument("teacher training needs at least one instance".into()));
    }
    let input = clips[0].frames[0].len();
    let params = ModelParams::init(cfg.dims(input, classes), &mut derived_rng(cfg.seed, TEACHER_INIT, 0))?;
    let teacher_cfg = TrainConfig {
        alpha: 0.0,
        beta: 0.0,
        ..cfg.clone()
    };
    fit(
        params,
        &teacher_cfg,
        &LossSpec::classification(),
        |epoch| {
            let mut order = clips.clone();
            order.shuffle(&mut derived_rng(cfg.seed, TEACHER_SHUFFLE, epoch as u32));
            Ok(order)
        },
        on_epoch,
    )
}
