mod common;

use std::collections::BTreeMap;
use std::path::Path;

use anticipation::data::{
    derive_frame_labels, parse_labels, parse_skeleton, write_labels, write_skeleton, ActionInstance, FrameLayout,
    SkeletonFrame, UntrimmedSequence,
};
use anticipation::eval::{anticipation_accuracy, frame_accuracy, GroundTruth, InstanceRule, PredictionStream};
use anticipation::losses::{loss_full_rep, loss_total, InstanceKey, LossSpec, RepTarget, TeacherRepStore};
use anticipation::model::{forward_clip, stream_step, ModelDims, ModelParams, StreamState};
use anticipation::rng::stream_rng;
use anticipation::sampling::{action_centric_sample, sliding_window_starts, Clip, LabeledSequence};
use common::oracle::{self, Case};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Non-overlapping instances separated by at least one background frame.
fn instances_strategy() -> impl Strategy<Value = (usize, Vec<ActionInstance>, usize)> {
    (1usize..=4, prop::collection::vec((0usize..4, 1usize..8, 1usize..=4), 0..5)).prop_map(|(classes, parts)| {
        let mut t = 1;
        let mut out = Vec::new();
        for (gap, len, class) in parts {
            let start = t + gap;
            let end = start + len;
            out.push(ActionInstance::new(start, end, 1 + (class - 1) % classes).unwrap());
            t = end + 2;
        }
        (t + 2, out, classes)
    })
}

fn runs(labels: &[usize]) -> Vec<ActionInstance> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let mut j = i;
        while j + 1 < labels.len() && labels[j + 1] == labels[i] {
            j += 1;
        }
        if labels[i] != 0 {
            out.push(ActionInstance::new(i + 1, j + 1, labels[i]).unwrap());
        }
        i = j + 1;
    }
    out
}

fn to_library(case: &Case) -> (PredictionStream, GroundTruth) {
    let instances = case
        .instances
        .iter()
        .map(|&(s, e, c)| ActionInstance::new(s, e, c).unwrap())
        .collect();
    let seq = UntrimmedSequence::new(vec![SkeletonFrame::zeros(1); case.frames], instances).unwrap();
    let stream = PredictionStream {
        probs: case.probs.clone(),
        actionness: case.q.clone(),
    };
    (stream, GroundTruth::from_sequence(&seq, case.classes).unwrap())
}

fn random_model(seed: u64, dims: ModelDims) -> ModelParams {
    let mut rng = stream_rng(seed, 7);
    let mut p = ModelParams::init(dims, &mut rng).unwrap();
    for b in p.blocks_mut() {
        b.data.iter_mut().for_each(|v| *v += rng.gen_range(-0.3..0.3));
    }
    p
}

fn random_frames(seed: u64, n: usize, dim: usize) -> Vec<SkeletonFrame> {
    let mut rng = stream_rng(seed, 8);
    (0..n)
        .map(|_| SkeletonFrame::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn labels_survive_a_round_trip_through_runs((frames, instances, classes) in instances_strategy()) {
        let labels = derive_frame_labels(frames, &instances, classes).unwrap();
        let recovered = runs(labels.as_slice());
        prop_assert_eq!(&recovered, &instances);
        prop_assert_eq!(derive_frame_labels(frames, &recovered, classes).unwrap(), labels);
    }

    #[test]
    fn skeleton_text_round_trips(values in prop::collection::vec(prop::num::f64::NORMAL, 12..=48)) {
        let layout = FrameLayout::new(2, 3, 2);
        let frames: Vec<SkeletonFrame> = values.chunks_exact(12).map(|c| SkeletonFrame::new(c.to_vec())).collect();
        let text = write_skeleton(&frames);
        let back = parse_skeleton(&text, layout, Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &frames);
        prop_assert_eq!(write_skeleton(&back), text);
    }

    #[test]
    fn label_text_round_trips((frames, instances, _) in instances_strategy()) {
        let text = write_labels(&instances);
        let back = parse_labels(&text, frames, Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &instances);
        prop_assert_eq!(write_labels(&back), text);
    }

    #[test]
    fn sliding_windows_cover_every_frame(frames in 1usize..300, len in 1usize..60, stride in 1usize..80) {
        let len = len.min(frames);
        let stride = stride.min(len);
        let starts = sliding_window_starts(frames, len, stride).unwrap();
        let mut covered = vec![false; frames];
        for s in starts {
            prop_assert!(s >= 1 && s + len - 1 <= frames);
            covered[s - 1..s - 1 + len].iter_mut().for_each(|c| *c = true);
        }
        prop_assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn action_centric_clips_touch_the_context_interval(
        seed in any::<u64>(), start in 1usize..150, len in 1usize..60, w in 0usize..40, clip_len in 1usize..120,
    ) {
        let frames = 200;
        let end = (start + len).min(frames);
        prop_assume!(start < end);
        let inst = ActionInstance::new(start, end, 1).unwrap();
        let seq = UntrimmedSequence::new(vec![SkeletonFrame::zeros(1); frames], vec![inst]).unwrap();
        let seq = LabeledSequence::new(0, seq, 1).unwrap();
        let clip = action_centric_sample(&seq, 0, clip_len, w, &mut stream_rng(seed, 0)).unwrap();
        let (lo, hi) = (start.saturating_sub(w).max(1), (end + w).min(frames));
        prop_assert_eq!(clip.len(), clip_len);
        prop_assert!(clip.start <= hi && clip.end() >= lo);
    }

    #[test]
    fn total_loss_grows_with_each_weight(seed in any::<u64>(), a1 in 0.0f64..2.0, da in 0.0f64..2.0, b1 in 0.0f64..2.0, db in 0.0f64..2.0) {
        let dims = ModelDims { input: 3, hidden: 4, layers: 2, classes: 2 };
        let params = random_model(seed, dims);
        let frames = random_frames(seed, 20, 3);
        let insts = vec![ActionInstance::new(3, 9, 1).unwrap(), ActionInstance::new(12, 18, 2).unwrap()];
        let seq = LabeledSequence::new(0, UntrimmedSequence::new(frames, insts).unwrap(), 2).unwrap();
        let clip = Clip::cut(&seq, 5, 10).unwrap();
        let mut rng = stream_rng(seed, 9);
        let reps: BTreeMap<_, _> = (0..2)
            .map(|i| (InstanceKey { sequence: 0, instance: i }, (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let store = TeacherRepStore::new(4, String::new(), reps).unwrap();
        let cache = forward_clip(&params, &clip.frames).unwrap();
        let total = |a: f64, b: f64| loss_total(&params, &cache, &clip, &LossSpec::new(a, b, Some(&store)).unwrap()).unwrap().total;
        prop_assert!(total(a1, b1) <= total(a1 + da, b1));
        prop_assert!(total(a1, b1) <= total(a1, b1 + db));
    }

    #[test]
    fn full_rep_loss_ignores_frame_order(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = stream_rng(seed, 1);
        let h = 5;
        let hidden: Vec<Vec<f64>> = (0..n).map(|_| (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let target: Vec<f64> = (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let params = random_model(seed, ModelDims { input: 1, hidden: h, layers: 1, classes: 1 });
        let tgt = [RepTarget { first: 0, last: n - 1, target: &target }];
        let a = loss_full_rep(&hidden, &tgt, params.proj()).unwrap();
        let mut shuffled = hidden.clone();
        shuffled.shuffle(&mut rng);
        let b = loss_full_rep(&shuffled, &tgt, params.proj()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn metrics_ignore_sequence_order(seed in any::<u64>(), classes in 1usize..=3) {
        let mut rng = stream_rng(seed, 2);
        let mut cases: Vec<Case> = (0..6).map(|_| oracle::random_case(&mut rng, classes)).collect();
        let eval = |cases: &[Case]| {
            let (s, g): (Vec<_>, Vec<_>) = cases.iter().map(to_library).unzip();
            (
                anticipation_accuracy(&s, &g, 10, InstanceRule::LastFrame).unwrap(),
                frame_accuracy(&s, &g, true).unwrap(),
                frame_accuracy(&s, &g, false).unwrap(),
            )
        };
        let before = eval(&cases);
        cases.shuffle(&mut rng);
        let after = eval(&cases);
        let same = |a: f64, b: f64| (a.is_nan() && b.is_nan()) || a == b;
        prop_assert!(before.0.iter().zip(&after.0).all(|(a, b)| same(*a, *b)));
        prop_assert!(same(before.1, after.1) && same(before.2, after.2));
    }

    #[test]
    fn finer_grid_agrees_at_shared_ratios(seed in any::<u64>(), classes in 1usize..=3) {
        let mut rng = stream_rng(seed, 3);
        let mut case = oracle::random_case(&mut rng, classes);
        // Instances whose duration is a multiple of 20 in an 80-frame sequence.
        case.frames = 80;
        case.instances = vec![(2, 22, 1), (30, 70, classes)];
        case.probs = (0..80).map(|_| {
            let raw: Vec<f64> = (0..=classes).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        }).collect();
        case.q = vec![0.5; 80];
        let (s, g) = to_library(&case);
        let m10 = anticipation_accuracy(std::slice::from_ref(&s), std::slice::from_ref(&g), 10, InstanceRule::LastFrame).unwrap();
        let m20 = anticipation_accuracy(&[s], &[g], 20, InstanceRule::LastFrame).unwrap();
        for k in 1..10 {
            prop_assert_eq!(m10[k - 1], m20[2 * k - 1]);
        }
    }

    #[test]
    fn streaming_equals_clip_forward(seed in any::<u64>(), layers in 1usize..=3, hidden in 1usize..=6, steps in 1usize..=12) {
        let dims = ModelDims { input: 4, hidden, layers, classes: 3 };
        let params = random_model(seed, dims);
        let frames = random_frames(seed, steps, 4);
        let cache = forward_clip(&params, &frames).unwrap();
        let mut state = StreamState::new(dims);
        for (t, f) in frames.iter().enumerate() {
            let out = stream_step(&params, &mut state, &f.coords).unwrap();
            prop_assert_eq!(out.probs.as_slice(), cache.probs(t));
            prop_assert_eq!(out.actionness, cache.actionness(t));
            prop_assert_eq!(out.hidden.as_slice(), cache.hidden(t));
        }
    }
}
