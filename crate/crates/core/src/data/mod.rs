//! Untrimmed skeleton sequences, their annotated action instances, and the
//! per-frame label tracks derived from them.
//!
//! Frame indices are 1-based and inclusive everywhere in the public surface,
//! matching the on-disk label format. Storage is 0-based.

mod io;
mod synth;

pub use io::{load_sequence, parse_frame, parse_labels, parse_skeleton, write_labels, write_sequence, write_skeleton, DatasetManifest, SequenceFiles};
pub use synth::{synth_generate, SynthConfig, SynthDataset};

use crate::error::{Error, Result};

/// Label id reserved for frames outside every action instance.
pub const BACKGROUND: usize = 0;

/// Shape of one skeleton frame: `joints × dims × persons` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub joints: usize,
    pub dims: usize,
    pub persons: usize,
}

impl FrameLayout {
    pub fn new(joints: usize, dims: usize, persons: usize) -> Self {
        FrameLayout {
            joints,
            dims,
            persons,
        }
    }

    /// Number of values in one frame.
    pub fn frame_dim(&self) -> usize {
        self.joints * self.dims * self.persons
    }

    fn person_dim(&self) -> usize {
        self.joints * self.dims
    }
}

/// Joint coordinates of a single frame, laid out person-major, then joint,
/// then spatial dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub coords: Vec<f64>,
}

impl SkeletonFrame {
    pub fn new(coords: Vec<f64>) -> Self {
        SkeletonFrame { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        SkeletonFrame {
            coords: vec![0.0; dim],
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// An annotated action: frames `start..=end` (1-based) carry `class_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionInstance {
    pub start: usize,
    pub end: usize,
    pub class_id: usize,
}

impl ActionInstance {
    pub fn new(start: usize, end: usize, class_id: usize) -> Result<Self> {
        let inst = ActionInstance {
            start,
            end,
            class_id,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        if self.start == 0 {
            return Err(Error::InvalidInstance(format!(
                "{self}: frame indices are 1-based"
            )));
        }
        if self.start >= self.end {
            return Err(Error::InvalidInstance(format!("{self}: start must precede end")));
        }
        if self.class_id == BACKGROUND {
            return Err(Error::InvalidInstance(format!(
                "{self}: class 0 is reserved for background"
            )));
        }
        Ok(())
    }

    /// `end - start`, the length used for observation ratios.
    pub fn tau(&self) -> usize {
        self.end - self.start
    }

    /// Number of frames in `start..=end`.
    pub fn frame_count(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.start <= frame && frame <= self.end
    }
}

impl std::fmt::Display for ActionInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.start, self.end, self.class_id)
    }
}

/// A long skeleton recording containing several non-overlapping actions.
#[derive(Debug, Clone, PartialEq)]
pub struct UntrimmedSequence {
    frames: Vec<SkeletonFrame>,
    instances: Vec<ActionInstance>,
}

impl UntrimmedSequence {
    /// Builds a sequence, sorting instances by start and rejecting overlaps
    /// or instances that run past the last frame.
    pub fn new(frames: Vec<SkeletonFrame>, mut instances: Vec<ActionInstance>) -> Result<Self> {
        if let Some(first) = frames.first() {
            let dim = first.len();
            if let Some(bad) = frames.iter().find(|f| f.len() != dim) {
                return Err(Error::Dimension {
                    expected: dim,
                    got: bad.len(),
                });
            }
        }
        instances.sort_by_key(|i| (i.start, i.end));
        validate_instances(frames.len(), &instances)?;
        Ok(UntrimmedSequence { frames, instances })
    }

    pub fn frames(&self) -> &[SkeletonFrame] {
        &self.frames
    }

    pub fn instances(&self) -> &[ActionInstance] {
        &self.instances
    }

    /// Sequence length `T`.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_dim(&self) -> usize {
        self.frames.first().map_or(0, SkeletonFrame::len)
    }

    /// Frame by 1-based index.
    pub fn frame(&self, index: usize) -> &SkeletonFrame {
        &self.frames[index - 1]
    }

    pub fn labels(&self, classes: usize) -> Result<FrameLabelTrack> {
        derive_frame_labels(self.len(), &self.instances, classes)
    }

    /// The trimmed frames `start..=end` of one instance.
    pub fn trimmed(&self, instance: &ActionInstance) -> Result<&[SkeletonFrame]> {
        if instance.start == 0 || instance.end > self.len() || instance.start > instance.end {
            return Err(Error::InvalidInstance(format!(
                "{instance} exceeds sequence of {} frames",
                self.len()
            )));
        }
        Ok(&self.frames[instance.start - 1..instance.end])
    }
}

/// Per-frame labels over the augmented class set `{0 = background, 1..=C}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLabelTrack {
    labels: Vec<usize>,
}

impl FrameLabelTrack {
    pub fn from_labels(labels: Vec<usize>) -> Self {
        FrameLabelTrack { labels }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Label of a 1-based frame.
    pub fn get(&self, frame: usize) -> usize {
        self.labels[frame - 1]
    }
}

fn validate_instances(frames: usize, instances: &[ActionInstance]) -> Result<()> {
    for inst in instances {
        inst.validate()?;
        if inst.end > frames {
            return Err(Error::InvalidInstance(format!(
                "{inst} ends after last frame {frames}"
            )));
        }
    }
    for pair in instances.windows(2) {
        if pair[0].end >= pair[1].start {
            return Err(Error::Overlap(pair[0].to_string(), pair[1].to_string()));
        }
    }
    Ok(())
}

/// Expands instance annotations into one label per frame.
///
/// ```
/// use anticipation::data::{derive_frame_labels, ActionInstance};
///
/// let inst = ActionInstance::new(3, 5, 7).unwrap();
/// let track = derive_frame_labels(8, &[inst], 7).unwrap();
/// assert_eq!(track.as_slice(), &[0, 0, 7, 7, 7, 0, 0, 0]);
/// ```
pub fn derive_frame_labels(
    frames: usize,
    instances: &[ActionInstance],
    classes: usize,
) -> Result<FrameLabelTrack> {
    let mut sorted = instances.to_vec();
    sorted.sort_by_key(|i| (i.start, i.end));
    validate_instances(frames, &sorted)?;
    let mut labels = vec![BACKGROUND; frames];
    for inst in &sorted {
        if inst.class_id > classes {
            return Err(Error::LabelRange {
                label: inst.class_id,
                max: classes,
            });
        }
        labels[inst.start - 1..inst.end].fill(inst.class_id);
    }
    Ok(FrameLabelTrack { labels })
}

/// Removes global translation by re-expressing every joint relative to the
/// first joint of the first person in the first frame seen.
///
/// Persons whose coordinates are all zero in a frame are treated as absent
/// and left untouched.
#[derive(Debug, Clone)]
pub struct Normalizer {
    layout: FrameLayout,
    origin: Option<Vec<f64>>,
}

impl Normalizer {
    pub fn new(layout: FrameLayout) -> Self {
        Normalizer {
            layout,
            origin: None,
        }
    }

    pub fn reset(&mut self) {
        self.origin = None;
    }

    /// Normalizes one frame, latching the origin on the first call.
    pub fn apply(&mut self, frame: &SkeletonFrame) -> SkeletonFrame {
        let dims = self.layout.dims;
        let origin = self
            .origin
            .get_or_insert_with(|| frame.coords[..dims.min(frame.len())].to_vec());
        let mut out = frame.clone();
        let person_dim = self.layout.person_dim();
        if person_dim == 0 {
            return out;
        }
        for person in out.coords.chunks_mut(person_dim) {
            if person.iter().all(|&v| v == 0.0) {
                continue;
            }
            for joint in person.chunks_mut(dims) {
                for (v, o) in joint.iter_mut().zip(origin.iter()) {
                    *v -= o;
                }
            }
        }
        out
    }
}

/// Applies [`Normalizer`] to a whole clip with a fresh origin.
pub fn normalize_clip(frames: &[SkeletonFrame], layout: FrameLayout) -> Vec<SkeletonFrame> {
    let mut norm = Normalizer::new(layout);
    frames.iter().map(|f| norm.apply(f)).collect()
}
