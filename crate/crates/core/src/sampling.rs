//! Training clips: action-centric draws, sliding windows, and the
//! alternating schedule between them.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{ActionInstance, FrameLabelTrack, SkeletonFrame, UntrimmedSequence, BACKGROUND};
use crate::error::{Error, Result};

/// A sequence paired with its label track and an id used to key
/// per-instance side data.
#[derive(Debug, Clone)]
pub struct LabeledSequence {
    pub id: usize,
    pub sequence: UntrimmedSequence,
    pub labels: FrameLabelTrack,
}

impl LabeledSequence {
    pub fn new(id: usize, sequence: UntrimmedSequence, classes: usize) -> Result<Self> {
        let labels = sequence.labels(classes)?;
        Ok(LabeledSequence {
            id,
            sequence,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }
}

/// The part of an instance that falls inside a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoveredInstance {
    /// Index into the source sequence's instance list.
    pub index: usize,
    pub instance: ActionInstance,
    /// First and last covered clip positions, 0-based.
    pub first: usize,
    pub last: usize,
}

impl CoveredInstance {
    pub fn frames(&self) -> usize {
        self.last - self.first + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub sequence_id: usize,
    /// 1-based index of the first frame in the source sequence.
    pub start: usize,
    pub frames: Vec<SkeletonFrame>,
    pub labels: Vec<usize>,
    pub actionness: Vec<u8>,
    pub covered: Vec<CoveredInstance>,
}

impl Clip {
    /// Cuts frames `start..start + len` (1-based start) out of `seq`.
    pub fn cut(seq: &LabeledSequence, start: usize, len: usize) -> Result<Self> {
        let total = seq.len();
        if len == 0 || start == 0 || start + len - 1 > total {
            return Err(Error::InvalidArgument(format!(
                "clip [{start}, {}] outside sequence of {total} frames",
                start + len - 1
            )));
        }
        let end = start + len - 1;
        let frames = seq.sequence.frames()[start - 1..end].to_vec();
        let labels = seq.labels.as_slice()[start - 1..end].to_vec();
        let actionness = labels.iter().map(|&l| u8::from(l != BACKGROUND)).collect();
        let covered = seq
            .sequence
            .instances()
            .iter()
            .enumerate()
            .filter(|(_, i)| i.start <= end && i.end >= start)
            .map(|(index, i)| CoveredInstance {
                index,
                instance: *i,
                first: i.start.max(start) - start,
                last: i.end.min(end) - start,
            })
            .collect();
        Ok(Clip {
            sequence_id: seq.id,
            start,
            frames,
            labels,
            actionness,
            covered,
        })
    }

    /// Single-class clip covering a whole instance, used for teacher training.
    pub fn trimmed(seq: &LabeledSequence, index: usize) -> Result<Self> {
        let inst = *seq
            .sequence
            .instances()
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("no instance {index}")))?;
        Clip::cut(seq, inst.start, inst.frame_count())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// 1-based last frame in the source sequence.
    pub fn end(&self) -> usize {
        self.start + self.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    /// Action-centric.
    Ac,
    /// Sliding window.
    Sw,
    /// Action-centric on even epochs, sliding window on odd ones.
    AcSw,
}

impl std::str::FromStr for SamplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ac" => Ok(SamplerMode::Ac),
            "sw" => Ok(SamplerMode::Sw),
            "ac/sw" | "acsw" | "ac_sw" => Ok(SamplerMode::AcSw),
            other => Err(Error::Config(format!("unknown sampler mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplerMode::Ac => "AC",
            SamplerMode::Sw => "SW",
            SamplerMode::AcSw => "AC/SW",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub clip_len: usize,
    pub context: usize,
    pub mode: SamplerMode,
    pub stride: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            clip_len: 50,
            context: 25,
            mode: SamplerMode::Ac,
            stride: 50,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clip_len == 0 || self.stride == 0 {
            return Err(Error::Config("clip_len and sw_stride must be >= 1".into()));
        }
        if self.mode != SamplerMode::Ac && self.stride > self.clip_len {
            return Err(Error::Config(format!(
                "sw_stride {} exceeds clip_len {}; sliding windows would skip frames",
                self.stride, self.clip_len
            )));
        }
        Ok(())
    }
}

/// The concrete sampler used in a given epoch.
pub fn epoch_schedule(mode: SamplerMode, epoch: usize) -> SamplerMode {
    match mode {
        SamplerMode::AcSw if epoch % 2 == 0 => SamplerMode::Ac,
        SamplerMode::AcSw => SamplerMode::Sw,
        pure => pure,
    }
}

/// Range of admissible 1-based clip starts for an action-centric draw, or
/// the single clamped start when the context interval is shorter than the
/// clip.
pub fn action_centric_starts(
    frames: usize,
    instance: &ActionInstance,
    clip_len: usize,
    context: usize,
) -> Result<std::ops::RangeInclusive<usize>> {
    if clip_len == 0 {
        return Err(Error::InvalidArgument("clip length must be >= 1".into()));
    }
    if clip_len > frames {
        return Err(Error::ClipTooLong { clip_len, frames });
    }
    let lo = instance.start.saturating_sub(context).max(1);
    let hi = (instance.end + context).min(frames);
    if hi + 1 >= lo + clip_len {
        return Ok(lo..=hi + 1 - clip_len);
    }
    let mid = (instance.start + instance.end) / 2;
    let start = (mid as i64 - (clip_len / 2) as i64).clamp(1, (frames - clip_len + 1) as i64) as usize;
    Ok(start..=start)
}

/// Draws one clip uniformly from `[s - w, e + w]` around instance `index`.
pub fn action_centric_sample<R: Rng + ?Sized>(
    seq: &LabeledSequence,
    index: usize,
    clip_len: usize,
    context: usize,
    rng: &mut R,
) -> Result<Clip> {
    let inst = seq
        .sequence
        .instances()
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("no instance {index}")))?;
    let range = action_centric_starts(seq.len(), inst, clip_len, context)?;
    let start = rng.gen_range(range);
    Clip::cut(seq, start, clip_len)
}

/// 1-based window starts; a last window anchored at `T - L + 1` is added when
/// the stride leaves a tail uncovered. A stride longer than the window is
/// rejected because it would leave gaps.
pub fn sliding_window_starts(frames: usize, clip_len: usize, stride: usize) -> Result<Vec<usize>> {
    if clip_len == 0 || stride == 0 {
        return Err(Error::InvalidArgument("clip length and stride must be >= 1".into()));
    }
    if stride > clip_len {
        return Err(Error::InvalidArgument(format!(
            "stride {stride} exceeds clip length {clip_len}; windows would skip frames"
        )));
    }
    if clip_len > frames {
        return Err(Error::ClipTooLong { clip_len, frames });
    }
    let last = frames - clip_len + 1;
    let mut starts: Vec<usize> = (1..=last).step_by(stride).collect();
    if starts.last() != Some(&last) && starts.last().unwrap() + clip_len - 1 < frames {
        starts.push(last);
    }
    Ok(starts)
}

pub fn sliding_window_sample(seq: &LabeledSequence, clip_len: usize, stride: usize) -> Result<Vec<Clip>> {
    sliding_window_starts(seq.len(), clip_len, stride)?
        .into_iter()
        .map(|s| Clip::cut(seq, s, clip_len))
        .collect()
}

/// All training clips for one epoch, shuffled.
///
/// Action-centric epochs draw one clip per instance; sliding-window epochs
/// take every window of every sequence.
pub fn epoch_clips<R: Rng + ?Sized>(
    seqs: &[LabeledSequence],
    cfg: &SamplerConfig,
    epoch: usize,
    rng: &mut R,
) -> Result<Vec<Clip>> {
    cfg.validate()?;
    let mut clips = Vec::new();
    match epoch_schedule(cfg.mode, epoch) {
        SamplerMode::Ac => {
            for seq in seqs {
                for index in 0..seq.sequence.instances().len() {
                    clips.push(action_centric_sample(seq, index, cfg.clip_len, cfg.context, rng)?);
                }
            }
        }
        _ => {
            for seq in seqs {
                clips.extend(sliding_window_sample(seq, cfg.clip_len, cfg.stride)?);
            }
        }
    }
    clips.shuffle(rng);
    Ok(clips)
}
