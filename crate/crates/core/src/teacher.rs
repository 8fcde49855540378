//! Full-instance representations from a frozen teacher network.

use std::collections::BTreeMap;

use crate::checkpoint::{content_hash, model_container};
use crate::data::{normalize_clip, FrameLayout};
use crate::error::Result;
use crate::losses::{InstanceKey, TeacherRepStore};
use crate::model::{stream_step, ModelParams, StreamState};
use crate::sampling::LabeledSequence;

/// Stable identifier of a parameter set.
pub fn params_hash(params: &ModelParams) -> String {
    content_hash(&model_container(params, ""))
}

/// Runs the teacher over each trimmed instance `[s, e]` from a reset state
/// and keeps its top-layer hidden vector at `e`.
pub fn extract_full_reps(teacher: &ModelParams, seqs: &[LabeledSequence], normalize: Option<FrameLayout>) -> Result<TeacherRepStore> {
    let mut reps = BTreeMap::new();
    let mut state = StreamState::new(teacher.dims());
    for seq in seqs {
        for (index, inst) in seq.sequence.instances().iter().enumerate() {
            let raw = seq.sequence.trimmed(inst)?;
            let frames = match normalize {
                Some(layout) => normalize_clip(raw, layout),
                None => raw.to_vec(),
            };
            state.reset();
            let mut last = Vec::new();
            for f in &frames {
                last = stream_step(teacher, &mut state, &f.coords)?.hidden;
            }
            reps.insert(
                InstanceKey {
                    sequence: seq.id,
                    instance: index,
                },
                last,
            );
        }
    }
    TeacherRepStore::new(teacher.dims().hidden, params_hash(teacher), reps)
}

/// Fraction of trimmed instances whose last-frame argmax equals the
/// instance class.
pub fn trimmed_accuracy(params: &ModelParams, seqs: &[LabeledSequence], normalize: Option<FrameLayout>) -> Result<f64> {
    let mut state = StreamState::new(params.dims());
    let (mut correct, mut total) = (0usize, 0usize);
    for seq in seqs {
        for inst in seq.sequence.instances() {
            let raw = seq.sequence.trimmed(inst)?;
            let frames = match normalize {
                Some(layout) => normalize_clip(raw, layout),
                None => raw.to_vec(),
            };
            state.reset();
            let mut last = None;
            for f in &frames {
                last = Some(stream_step(params, &mut state, &f.coords)?);
            }
            total += 1;
            if last.is_some_and(|o| o.argmax().0 == inst.class_id) {
                correct += 1;
            }
        }
    }
    Ok(if total == 0 { f64::NAN } else { correct as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ActionInstance, SkeletonFrame, UntrimmedSequence};
    use crate::model::{forward_clip, ModelDims};
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn one_vector_per_instance() {
        let dims = ModelDims { input: 3, hidden: 5, layers: 2, classes: 2 };
        let teacher = ModelParams::init(dims, &mut stream_rng(2, 0)).unwrap();
        let mut rng = stream_rng(3, 0);
        let frames: Vec<SkeletonFrame> = (0..40)
            .map(|_| SkeletonFrame::new((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let inst = vec![ActionInstance::new(3, 12, 1).unwrap(), ActionInstance::new(20, 33, 2).unwrap()];
        let seq = LabeledSequence::new(7, UntrimmedSequence::new(frames.clone(), inst).unwrap(), 2).unwrap();
        let store = extract_full_reps(&teacher, &[seq.clone()], None).unwrap();
        assert_eq!(store.len(), 2);
        let rep = store.get(InstanceKey { sequence: 7, instance: 1 }).unwrap();
        assert_eq!(rep.len(), 5);
        // Equals the last hidden state of a clip forward over [20, 33].
        let out = forward_clip(&teacher, &frames[19..33]).unwrap();
        assert_eq!(rep, out.hidden(13));
        let again = extract_full_reps(&teacher, &[seq], None).unwrap();
        assert_eq!(store, again);
        assert_eq!(store.teacher_hash(), params_hash(&teacher));
    }
}
