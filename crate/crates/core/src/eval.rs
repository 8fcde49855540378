//! Streaming evaluation: anticipation accuracy over observation ratios and
//! class-averaged frame accuracies with and without background.

use std::fmt::Write as _;

use crate::data::{normalize_clip, ActionInstance, FrameLabelTrack, FrameLayout, Normalizer, UntrimmedSequence, BACKGROUND};
use crate::error::{Error, Result};
use crate::model::{forward_clip, stream_step, ModelParams, StreamState};
use crate::sampling::sliding_window_starts;

/// Index and value of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Per-frame predictions for one whole sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionStream {
    pub probs: Vec<Vec<f64>>,
    pub actionness: Vec<f64>,
}

impl PredictionStream {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Prediction at a 1-based frame.
    pub fn at(&self, frame: usize) -> &[f64] {
        &self.probs[frame - 1]
    }
}

/// Ground truth of one test sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub instances: Vec<ActionInstance>,
    pub labels: FrameLabelTrack,
}

impl GroundTruth {
    pub fn from_sequence(seq: &UntrimmedSequence, classes: usize) -> Result<Self> {
        Ok(GroundTruth {
            instances: seq.instances().to_vec(),
            labels: seq.labels(classes)?,
        })
    }
}

/// How an instance label is read off the stream at an observation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InstanceRule {
    /// Argmax of `p_t` at the last observed frame.
    #[default]
    LastFrame,
    /// Argmax of the mean of `p` over the observed part of the instance.
    MeanProb,
}

impl std::str::FromStr for InstanceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" | "last_frame" => Ok(InstanceRule::LastFrame),
            "mean" | "mean_prob" => Ok(InstanceRule::MeanProb),
            other => Err(Error::Config(format!("unknown instance rule `{other}`"))),
        }
    }
}

/// Last observed frame at ratio `k / m`: `s + ⌊τ·k/m⌋`.
///
/// ```
/// use anticipation::data::ActionInstance;
/// use anticipation::eval::observation_frame;
///
/// let inst = ActionInstance::new(100, 200, 1).unwrap();
/// assert_eq!(observation_frame(&inst, 5, 10).unwrap(), 150);
/// ```
pub fn observation_frame(instance: &ActionInstance, k: usize, m: usize) -> Result<usize> {
    if m < 2 || k == 0 || k >= m {
        return Err(Error::InvalidArgument(format!("observation step {k} outside 1..{m}")));
    }
    Ok(instance.start + instance.tau() * k / m)
}

fn check_lengths(streams: &[PredictionStream], truths: &[GroundTruth]) -> Result<()> {
    if streams.len() != truths.len() {
        return Err(Error::Dimension {
            expected: truths.len(),
            got: streams.len(),
        });
    }
    for (s, g) in streams.iter().zip(truths) {
        if s.len() != g.labels.len() || s.actionness.len() != s.len() {
            return Err(Error::Dimension {
                expected: g.labels.len(),
                got: s.len(),
            });
        }
    }
    Ok(())
}

fn instance_prediction(stream: &PredictionStream, inst: &ActionInstance, frame: usize, rule: InstanceRule) -> usize {
    match rule {
        InstanceRule::LastFrame => argmax(stream.at(frame)).0,
        InstanceRule::MeanProb => {
            let k = stream.at(frame).len();
            let mut mean = vec![0.0; k];
            for t in inst.start..=frame {
                mean.iter_mut().zip(stream.at(t)).for_each(|(m, p)| *m += p);
            }
            argmax(&mean).0
        }
    }
}

/// Correct-instance counts per observation step `k = 1..m-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnticipationTally {
    pub correct: Vec<usize>,
    pub instances: usize,
}

impl AnticipationTally {
    pub fn merge(&mut self, other: &AnticipationTally) {
        self.correct.iter_mut().zip(&other.correct).for_each(|(a, b)| *a += b);
        self.instances += other.instances;
    }

    /// Accuracies; NaN when there are no instances.
    pub fn accuracies(&self) -> Vec<f64> {
        self.correct
            .iter()
            .map(|&c| if self.instances == 0 { f64::NAN } else { c as f64 / self.instances as f64 })
            .collect()
    }
}

pub fn anticipation_tally(stream: &PredictionStream, truth: &GroundTruth, m: usize, rule: InstanceRule) -> Result<AnticipationTally> {
    let mut tally = AnticipationTally {
        correct: vec![0; m.saturating_sub(1)],
        instances: truth.instances.len(),
    };
    for inst in &truth.instances {
        if inst.end > stream.len() {
            return Err(Error::Dimension {
                expected: inst.end,
                got: stream.len(),
            });
        }
        for k in 1..m {
            let frame = observation_frame(inst, k, m)?;
            if instance_prediction(stream, inst, frame, rule) == inst.class_id {
                tally.correct[k - 1] += 1;
            }
        }
    }
    Ok(tally)
}

/// Fraction of test instances whose class is predicted at each observation
/// ratio `k/m`. A background prediction counts as wrong.
pub fn anticipation_accuracy(streams: &[PredictionStream], truths: &[GroundTruth], m: usize, rule: InstanceRule) -> Result<Vec<f64>> {
    check_lengths(streams, truths)?;
    let mut total = AnticipationTally {
        correct: vec![0; m.saturating_sub(1)],
        instances: 0,
    };
    for (s, g) in streams.iter().zip(truths) {
        total.merge(&anticipation_tally(s, g, m, rule)?);
    }
    Ok(total.accuracies())
}

/// Per-class frame tallies pooled across sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameTally {
    pub correct: Vec<usize>,
    pub total: Vec<usize>,
}

impl FrameTally {
    pub fn new(outputs: usize) -> Self {
        FrameTally {
            correct: vec![0; outputs],
            total: vec![0; outputs],
        }
    }

    pub fn add(&mut self, stream: &PredictionStream, labels: &FrameLabelTrack) -> Result<()> {
        for (p, &y) in stream.probs.iter().zip(labels.as_slice()) {
            if y >= self.total.len() {
                return Err(Error::LabelRange {
                    label: y,
                    max: self.total.len() - 1,
                });
            }
            self.total[y] += 1;
            if argmax(p).0 == y {
                self.correct[y] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &FrameTally) {
        self.correct.iter_mut().zip(&other.correct).for_each(|(a, b)| *a += b);
        self.total.iter_mut().zip(&other.total).for_each(|(a, b)| *a += b);
    }

    /// Unweighted mean of per-class accuracies over populated classes.
    pub fn mean_accuracy(&self, include_background: bool) -> f64 {
        let skip = usize::from(!include_background);
        let accs: Vec<f64> = (skip..self.total.len())
            .filter(|&c| self.total[c] > 0)
            .map(|c| self.correct[c] as f64 / self.total[c] as f64)
            .collect();
        if accs.is_empty() {
            f64::NAN
        } else {
            accs.iter().sum::<f64>() / accs.len() as f64
        }
    }
}

/// Class-averaged frame accuracy, optionally including the background class.
pub fn frame_accuracy(streams: &[PredictionStream], truths: &[GroundTruth], include_background: bool) -> Result<f64> {
    check_lengths(streams, truths)?;
    let outputs = streams.iter().find_map(|s| s.probs.first().map(Vec::len)).unwrap_or(1);
    let mut tally = FrameTally::new(outputs);
    for (s, g) in streams.iter().zip(truths) {
        tally.add(s, &g.labels)?;
    }
    Ok(tally.mean_accuracy(include_background))
}

/// Reassembles per-window predictions into one stream. Where windows
/// overlap, the earlier window wins.
pub fn stitch_predictions(clips: &[PredictionStream], starts: &[usize], frames: usize) -> Result<PredictionStream> {
    if clips.len() != starts.len() {
        return Err(Error::Dimension {
            expected: starts.len(),
            got: clips.len(),
        });
    }
    let mut probs: Vec<Option<Vec<f64>>> = vec![None; frames];
    let mut act = vec![0.0; frames];
    for (clip, &start) in clips.iter().zip(starts) {
        if start == 0 || start + clip.len() - 1 > frames {
            return Err(Error::InvalidArgument(format!("window at {start} exceeds {frames} frames")));
        }
        for (i, p) in clip.probs.iter().enumerate() {
            let slot = &mut probs[start - 1 + i];
            if slot.is_none() {
                *slot = Some(p.clone());
                act[start - 1 + i] = clip.actionness[i];
            }
        }
    }
    let probs = probs
        .into_iter()
        .enumerate()
        .map(|(t, p)| p.ok_or(Error::Uncovered(t + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictionStream {
        probs,
        actionness: act,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMode {
    /// Stateful frame-by-frame inference over the whole sequence.
    Streaming,
    /// Independent windows of the given length with stride equal to the
    /// length, stitched back together.
    Stitched { clip_len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Number of observation segments; ratios are `1/m..(m-1)/m`.
    pub segments: usize,
    pub rule: InstanceRule,
    pub mode: InferenceMode,
    /// Translation normalization layout, or `None` to feed raw frames.
    pub normalize: Option<FrameLayout>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            segments: 10,
            rule: InstanceRule::LastFrame,
            mode: InferenceMode::Streaming,
            normalize: None,
        }
    }
}

/// Streams a whole sequence through the model one frame at a time.
pub fn predict_streaming(params: &ModelParams, seq: &UntrimmedSequence, normalize: Option<FrameLayout>) -> Result<PredictionStream> {
    let mut state = StreamState::new(params.dims());
    let mut norm = normalize.map(Normalizer::new);
    let mut out = PredictionStream {
        probs: Vec::with_capacity(seq.len()),
        actionness: Vec::with_capacity(seq.len()),
    };
    for frame in seq.frames() {
        let step = match norm.as_mut() {
            Some(n) => stream_step(params, &mut state, &n.apply(frame).coords)?,
            None => stream_step(params, &mut state, &frame.coords)?,
        };
        out.probs.push(step.probs);
        out.actionness.push(step.actionness);
    }
    Ok(out)
}

/// Window-and-stitch inference with stride equal to the window length.
pub fn predict_stitched(params: &ModelParams, seq: &UntrimmedSequence, clip_len: usize, normalize: Option<FrameLayout>) -> Result<PredictionStream> {
    let len = clip_len.min(seq.len());
    let starts = sliding_window_starts(seq.len(), len, len)?;
    let clips = starts
        .iter()
        .map(|&s| {
            let raw = &seq.frames()[s - 1..s - 1 + len];
            let frames = match normalize {
                Some(layout) => normalize_clip(raw, layout),
                None => raw.to_vec(),
            };
            let out = forward_clip(params, &frames)?.output();
            Ok(PredictionStream {
                probs: out.probs,
                actionness: out.actionness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    stitch_predictions(&clips, &starts, seq.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassAccuracy {
    pub class: usize,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub segments: usize,
    /// Accuracy at `γ = k/m` for `k = 1..m-1`; NaN without instances.
    pub anticipation: Vec<f64>,
    pub instances: usize,
    pub avg_acc_with_bg: f64,
    pub avg_acc_without_bg: f64,
    pub per_class: Vec<ClassAccuracy>,
}

impl MetricsReport {
    pub fn from_tallies(segments: usize, anticipation: &AnticipationTally, frames: &FrameTally) -> Self {
        MetricsReport {
            segments,
            anticipation: anticipation.accuracies(),
            instances: anticipation.instances,
            avg_acc_with_bg: frames.mean_accuracy(true),
            avg_acc_without_bg: frames.mean_accuracy(false),
            per_class: (0..frames.total.len())
                .map(|class| ClassAccuracy {
                    class,
                    correct: frames.correct[class],
                    total: frames.total[class],
                })
                .collect(),
        }
    }

    pub fn gamma(&self, k: usize) -> f64 {
        k as f64 / self.segments as f64
    }

    /// Accuracy at the ratio closest to `gamma`.
    pub fn accuracy_at(&self, gamma: f64) -> f64 {
        let k = (gamma * self.segments as f64).round() as usize;
        self.anticipation[k.clamp(1, self.segments - 1) - 1]
    }

    /// Three-column CSV: γ rows, then frame-accuracy summaries, then one
    /// row per class keyed `class_<id>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,accuracy,n_instances\n");
        for (k, acc) in self.anticipation.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.gamma(k + 1), acc, self.instances);
        }
        let frames: usize = self.per_class.iter().map(|c| c.total).sum();
        let action_frames: usize = self
            .per_class
            .iter()
            .filter(|c| c.class != BACKGROUND)
            .map(|c| c.total)
            .sum();
        let _ = writeln!(out, "avg_acc_w_bg,{},{}", self.avg_acc_with_bg, frames);
        let _ = writeln!(out, "avg_acc_wo_bg,{},{}", self.avg_acc_without_bg, action_frames);
        for c in &self.per_class {
            let acc = if c.total == 0 { f64::NAN } else { c.correct as f64 / c.total as f64 };
            let _ = writeln!(out, "class_{},{},{}", c.class, acc, c.total);
        }
        out
    }
}

/// Rows of the per-frame dump: `frame,true_label,argmax,p_max,q`.
pub fn frame_dump_csv(stream: &PredictionStream, labels: &FrameLabelTrack) -> String {
    let mut out = String::from("frame,true_label,argmax,p_max,q\n");
    for t in 0..stream.len() {
        let (cls, p) = argmax(&stream.probs[t]);
        let _ = writeln!(out, "{},{},{},{},{}", t + 1, labels.as_slice()[t], cls, p, stream.actionness[t]);
    }
    out
}

/// Evaluates `params` on `sequences`, returning the report and the
/// per-sequence prediction streams.
pub fn evaluate(params: &ModelParams, sequences: &[UntrimmedSequence], classes: usize, cfg: &EvalConfig) -> Result<(MetricsReport, Vec<PredictionStream>)> {
    if params.dims().classes != classes {
        return Err(Error::Config(format!(
            "model predicts {} classes but the dataset has {classes}",
            params.dims().classes
        )));
    }
    if cfg.segments < 2 {
        return Err(Error::Config("observation segments must be >= 2".into()));
    }
    let mut ant = AnticipationTally {
        correct: vec![0; cfg.segments - 1],
        instances: 0,
    };
    let mut frames = FrameTally::new(classes + 1);
    let mut streams = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let stream = match cfg.mode {
            InferenceMode::Streaming => predict_streaming(params, seq, cfg.normalize)?,
            InferenceMode::Stitched { clip_len } => predict_stitched(params, seq, clip_len, cfg.normalize)?,
        };
        let truth = GroundTruth::from_sequence(seq, classes)?;
        ant.merge(&anticipation_tally(&stream, &truth, cfg.segments, cfg.rule)?);
        frames.add(&stream, &truth.labels)?;
        streams.push(stream);
    }
    Ok((MetricsReport::from_tallies(cfg.segments, &ant, &frames), streams))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(s: usize, e: usize, c: usize) -> ActionInstance {
        ActionInstance::new(s, e, c).unwrap()
    }

    fn onehot(k: usize, c: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        v[c] = 1.0;
        v
    }

    fn stream_from(labels: &[usize], k: usize) -> PredictionStream {
        PredictionStream {
            probs: labels.iter().map(|&c| onehot(k, c)).collect(),
            actionness: vec![0.5; labels.len()],
        }
    }

    fn truth(frames: usize, instances: Vec<ActionInstance>) -> GroundTruth {
        let labels = crate::data::derive_frame_labels(frames, &instances, 9).unwrap();
        GroundTruth { instances, labels }
    }

    #[test]
    fn observation_frames() {
        assert_eq!(observation_frame(&inst(100, 200, 1), 5, 10).unwrap(), 150);
        assert_eq!(observation_frame(&inst(100, 200, 1), 1, 10).unwrap(), 110);
        assert_eq!(observation_frame(&inst(7, 10, 1), 1, 10).unwrap(), 7);
        assert!(observation_frame(&inst(7, 10, 1), 10, 10).is_err());
        assert!(observation_frame(&inst(7, 10, 1), 0, 10).is_err());
    }

    #[test]
    fn perfect_anticipation() {
        let g = truth(30, vec![inst(3, 10, 1), inst(15, 25, 2)]);
        let s = stream_from(g.labels.as_slice(), 3);
        let acc = anticipation_accuracy(&[s.clone()], &[g.clone()], 10, InstanceRule::LastFrame).unwrap();
        assert!(acc.iter().all(|&a| a == 1.0));
        assert_eq!(frame_accuracy(&[s.clone()], &[g.clone()], true).unwrap(), 1.0);
        assert_eq!(frame_accuracy(&[s], &[g], false).unwrap(), 1.0);
    }

    #[test]
    fn half_correct_at_midpoint() {
        let g = truth(40, vec![inst(1, 11, 1), inst(20, 30, 2)]);
        let mut labels = g.labels.as_slice().to_vec();
        // Second instance predicted as background throughout.
        labels[19..30].fill(0);
        let s = stream_from(&labels, 3);
        let acc = anticipation_accuracy(&[s], &[g], 10, InstanceRule::LastFrame).unwrap();
        assert_eq!(acc[4], 0.5);
    }

    #[test]
    fn macro_frame_accuracy() {
        // Class 1: 5 of 10 right, class 2: 4 of 4 right.
        let g = truth(16, vec![inst(1, 10, 1), inst(12, 15, 2)]);
        let mut pred = g.labels.as_slice().to_vec();
        pred[..5].fill(2);
        let s = stream_from(&pred, 3);
        assert_eq!(frame_accuracy(&[s], &[g], false).unwrap(), 0.75);
    }

    #[test]
    fn all_background_degenerate() {
        let g = truth(10, vec![]);
        let s = stream_from(&[0; 10], 3);
        assert_eq!(frame_accuracy(&[s.clone()], &[g.clone()], true).unwrap(), 1.0);
        assert!(frame_accuracy(&[s.clone()], &[g.clone()], false).unwrap().is_nan());
        let acc = anticipation_accuracy(&[s], &[g], 10, InstanceRule::LastFrame).unwrap();
        assert!(acc.iter().all(|a| a.is_nan()));
    }

    #[test]
    fn with_and_without_bg_coincide_without_background() {
        let g2 = truth(9, vec![inst(1, 4, 1), inst(5, 9, 2)]);
        let mut pred = g2.labels.as_slice().to_vec();
        pred[0] = 2;
        pred[7] = 0;
        let s = stream_from(&pred, 3);
        let a = frame_accuracy(&[s.clone()], &[g2.clone()], true).unwrap();
        let b = frame_accuracy(&[s], &[g2], false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn length_mismatch() {
        let g = truth(10, vec![inst(1, 4, 1)]);
        let s = stream_from(&[0; 9], 3);
        assert!(anticipation_accuracy(&[s.clone()], &[g.clone()], 10, InstanceRule::LastFrame).is_err());
        assert!(frame_accuracy(&[s], &[g], true).is_err());
    }

    #[test]
    fn stitching() {
        let mk = |v: f64, n: usize| PredictionStream {
            probs: vec![vec![v, 1.0 - v]; n],
            actionness: vec![v; n],
        };
        let s = stitch_predictions(&[mk(0.1, 3), mk(0.2, 3)], &[1, 4], 6).unwrap();
        assert_eq!(s.probs[2][0], 0.1);
        assert_eq!(s.probs[3][0], 0.2);

        let starts = sliding_window_starts(220, 50, 50).unwrap();
        let clips: Vec<_> = starts.iter().map(|&st| mk(st as f64 / 1000.0, 50)).collect();
        let s = stitch_predictions(&clips, &starts, 220).unwrap();
        for t in 171..=200 {
            assert_eq!(s.at(t)[0], 0.151);
        }
        assert_eq!(s.at(201)[0], 0.171);

        let one = mk(0.3, 7);
        assert_eq!(stitch_predictions(&[one.clone()], &[1], 7).unwrap(), one);
        assert!(matches!(stitch_predictions(&[mk(0.1, 3)], &[1], 4), Err(Error::Uncovered(4))));
    }

    #[test]
    fn mean_rule_differs_from_last() {
        let g = truth(20, vec![inst(1, 11, 1)]);
        let mut pred = vec![1; 20];
        pred[5] = 2; // observation frame at k=5 is 1 + 5 = 6
        let s = stream_from(&pred, 3);
        let last = anticipation_accuracy(&[s.clone()], &[g.clone()], 10, InstanceRule::LastFrame).unwrap();
        let mean = anticipation_accuracy(&[s], &[g], 10, InstanceRule::MeanProb).unwrap();
        assert_eq!(last[4], 0.0);
        assert_eq!(mean[4], 1.0);
    }

    #[test]
    fn report_csv_layout() {
        let g = truth(20, vec![inst(2, 12, 1)]);
        let s = stream_from(g.labels.as_slice(), 2);
        let mut a = AnticipationTally { correct: vec![0; 9], instances: 0 };
        a.merge(&anticipation_tally(&s, &g, 10, InstanceRule::LastFrame).unwrap());
        let mut f = FrameTally::new(2);
        f.add(&s, &g.labels).unwrap();
        let csv = MetricsReport::from_tallies(10, &a, &f).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "gamma,accuracy,n_instances");
        assert_eq!(lines[1], "0.1,1,1");
        assert_eq!(lines[9], "0.9,1,1");
        assert_eq!(lines[10], "avg_acc_w_bg,1,20");
        assert_eq!(lines[11], "avg_acc_wo_bg,1,11");
        assert_eq!(lines[12], "class_0,1,9");
    }

    #[test]
    fn dump_csv() {
        let g = truth(3, vec![inst(1, 2, 1)]);
        let s = stream_from(&[1, 1, 0], 2);
        let csv = frame_dump_csv(&s, &g.labels);
        assert_eq!(csv, "frame,true_label,argmax,p_max,q\n1,1,1,1,0.5\n2,1,1,1,0.5\n3,0,0,1,0.5\n");
    }
}
