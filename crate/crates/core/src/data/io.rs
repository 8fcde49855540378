//! Plain-text skeleton, label and manifest files.
//!
//! Skeleton files hold one frame per line as whitespace-separated decimals.
//! Label files hold one `class_id,start,end` line per instance. Manifests are
//! `key = value` lines; `train` and `test` may repeat, each naming a
//! `skeleton, labels` file pair relative to the manifest's directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ActionInstance, FrameLayout, SkeletonFrame, UntrimmedSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceFiles {
    pub skeleton: PathBuf,
    pub labels: PathBuf,
}

/// Column positions of class, start and end in a label line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LabelOrder {
    class: usize,
    start: usize,
    end: usize,
}

impl Default for LabelOrder {
    fn default() -> Self {
        LabelOrder {
            class: 0,
            start: 1,
            end: 2,
        }
    }
}

impl LabelOrder {
    fn parse(s: &str) -> Result<Self> {
        let cols: Vec<&str> = s.split(',').map(str::trim).collect();
        let find = |name: &str| {
            cols.iter()
                .position(|c| *c == name)
                .ok_or_else(|| Error::Config(format!("label_order lacks column `{name}`")))
        };
        Ok(LabelOrder {
            class: find("class")?,
            start: find("start")?,
            end: find("end")?,
        })
    }

    fn width(&self) -> usize {
        self.class.max(self.start).max(self.end) + 1
    }

    fn render(&self) -> String {
        let mut cols = [""; 3];
        cols[self.class] = "class";
        cols[self.start] = "start";
        cols[self.end] = "end";
        cols.join(",")
    }
}

/// Dataset description: frame layout, class count and file lists.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub classes: usize,
    pub layout: FrameLayout,
    pub train: Vec<SequenceFiles>,
    pub test: Vec<SequenceFiles>,
    /// Directory that relative file paths resolve against.
    pub base_dir: PathBuf,
    label_order: LabelOrder,
}

impl DatasetManifest {
    pub fn new(classes: usize, layout: FrameLayout) -> Self {
        DatasetManifest {
            classes,
            layout,
            train: Vec::new(),
            test: Vec::new(),
            base_dir: PathBuf::from("."),
            label_order: LabelOrder::default(),
        }
    }

    pub fn parse(text: &str, base_dir: &Path, origin: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut classes = None;
        let mut joints = None;
        let mut dims = None;
        let mut persons = None;
        let mut label_order = LabelOrder::default();
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(lineno, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let number = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| perr(lineno, format!("`{key}` must be an integer, got `{v}`")))
            };
            match key {
                "classes" => classes = Some(number(value)?),
                "joints" => joints = Some(number(value)?),
                "dims" => dims = Some(number(value)?),
                "persons" => persons = Some(number(value)?),
                "label_order" => {
                    label_order = LabelOrder::parse(value).map_err(|e| perr(lineno, e.to_string()))?
                }
                "train" | "test" => {
                    let (skel, lab) = value.split_once(',').ok_or_else(|| {
                        perr(lineno, format!("`{key}` needs `skeleton, labels`, got `{value}`"))
                    })?;
                    let files = SequenceFiles {
                        skeleton: PathBuf::from(skel.trim()),
                        labels: PathBuf::from(lab.trim()),
                    };
                    if key == "train" {
                        train.push(files);
                    } else {
                        test.push(files);
                    }
                }
                other => return Err(perr(lineno, format!("unknown key `{other}`"))),
            }
        }
        let require = |v: Option<usize>, k: &str| {
            v.ok_or_else(|| perr(0, format!("missing key `{k}`")))
        };
        let classes = require(classes, "classes")?;
        if classes == 0 {
            return Err(perr(0, "classes must be >= 1".into()));
        }
        let layout = FrameLayout::new(
            require(joints, "joints")?,
            require(dims, "dims")?,
            require(persons, "persons")?,
        );
        if layout.frame_dim() == 0 {
            return Err(perr(0, "joints, dims and persons must be >= 1".into()));
        }
        Ok(DatasetManifest {
            classes,
            layout,
            train,
            test,
            base_dir: base_dir.to_path_buf(),
            label_order,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, path)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "classes = {}", self.classes);
        let _ = writeln!(out, "joints = {}", self.layout.joints);
        let _ = writeln!(out, "dims = {}", self.layout.dims);
        let _ = writeln!(out, "persons = {}", self.layout.persons);
        if self.label_order != LabelOrder::default() {
            let _ = writeln!(out, "label_order = {}", self.label_order.render());
        }
        for (key, list) in [("train", &self.train), ("test", &self.test)] {
            for f in list {
                let _ = writeln!(
                    out,
                    "{key} = {}, {}",
                    f.skeleton.display(),
                    f.labels.display()
                );
            }
        }
        out
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_split(&self, files: &[SequenceFiles]) -> Result<Vec<UntrimmedSequence>> {
        files
            .iter()
            .map(|f| load_sequence(&self.resolve(&f.skeleton), &self.resolve(&f.labels), self))
            .collect()
    }

    pub fn load_train(&self) -> Result<Vec<UntrimmedSequence>> {
        self.load_split(&self.train)
    }

    pub fn load_test(&self) -> Result<Vec<UntrimmedSequence>> {
        self.load_split(&self.test)
    }
}

enum FrameError {
    Number(String),
    Count(usize),
}

fn parse_frame_tokens(line: &str, layout: FrameLayout) -> Result<SkeletonFrame, FrameError> {
    let full = layout.frame_dim();
    let per_person = layout.joints * layout.dims;
    let mut coords = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FrameError::Number(tok.to_string()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let n = coords.len();
    if n == 0 || n > full || n % per_person != 0 {
        return Err(FrameError::Count(n));
    }
    coords.resize(full, 0.0);
    Ok(SkeletonFrame::new(coords))
}

/// Parses one skeleton line, zero-filling persons the line omits.
///
/// ```
/// use anticipation::data::{parse_frame, FrameLayout};
///
/// let layout = FrameLayout::new(2, 3, 2);
/// let f = parse_frame("1 2 3 4 5 6", layout).unwrap();
/// assert_eq!(f.coords, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
/// assert!(parse_frame("1 2 3", layout).is_err());
/// ```
pub fn parse_frame(line: &str, layout: FrameLayout) -> Result<SkeletonFrame> {
    parse_frame_tokens(line, layout).map_err(|e| match e {
        FrameError::Number(tok) => Error::InvalidArgument(format!("not a finite number: `{tok}`")),
        FrameError::Count(got) => Error::Dimension {
            expected: layout.frame_dim(),
            got,
        },
    })
}

/// Parses skeleton text. A line may hold fewer persons than the layout
/// declares; the missing persons are zero-filled.
pub fn parse_skeleton(text: &str, layout: FrameLayout, origin: &Path) -> Result<Vec<SkeletonFrame>> {
    let mut frames = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let frame = parse_frame_tokens(line, layout).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            msg: match e {
                FrameError::Number(tok) => format!("not a finite number: `{tok}`"),
                FrameError::Count(n) => format!(
                    "expected {} values ({} joints x {} dims x {} persons), got {n}",
                    layout.frame_dim(),
                    layout.joints,
                    layout.dims,
                    layout.persons
                ),
            },
        })?;
        frames.push(frame);
    }
    Ok(frames)
}

fn parse_labels_with(
    text: &str,
    frames: usize,
    order: LabelOrder,
    origin: &Path,
) -> Result<Vec<ActionInstance>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < order.width() {
            return Err(perr(format!("expected at least {} columns, got `{line}`", order.width())));
        }
        let field = |i: usize| {
            cols[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && *v >= 0.0)
                .map(|v| v as usize)
                .ok_or_else(|| perr(format!("not a non-negative integer: `{}`", cols[i])))
        };
        let (class, start, end) = (field(order.class)?, field(order.start)?, field(order.end)?);
        if start == 0 || end > frames {
            return Err(perr(format!(
                "frame range {start}..{end} outside sequence of {frames} frames"
            )));
        }
        out.push(ActionInstance::new(start, end, class).map_err(|e| perr(e.to_string()))?);
    }
    Ok(out)
}

/// Parses `class_id,start,end` lines against a sequence of `frames` frames.
///
/// ```
/// use anticipation::data::{parse_labels, ActionInstance};
/// use std::path::Path;
///
/// let inst = parse_labels("7,3,5\n", 10, Path::new("labels.txt")).unwrap();
/// assert_eq!(inst, vec![ActionInstance::new(3, 5, 7).unwrap()]);
/// ```
pub fn parse_labels(text: &str, frames: usize, origin: &Path) -> Result<Vec<ActionInstance>> {
    parse_labels_with(text, frames, LabelOrder::default(), origin)
}

pub fn load_sequence(
    skeleton_path: &Path,
    label_path: &Path,
    manifest: &DatasetManifest,
) -> Result<UntrimmedSequence> {
    let skel = fs::read_to_string(skeleton_path).map_err(|e| Error::io(skeleton_path, e))?;
    let frames = parse_skeleton(&skel, manifest.layout, skeleton_path)?;
    let labels = fs::read_to_string(label_path).map_err(|e| Error::io(label_path, e))?;
    let instances = parse_labels_with(&labels, frames.len(), manifest.label_order, label_path)?;
    if let Some(inst) = instances.iter().find(|i| i.class_id > manifest.classes) {
        return Err(Error::LabelRange {
            label: inst.class_id,
            max: manifest.classes,
        });
    }
    UntrimmedSequence::new(frames, instances)
}

pub fn write_skeleton(frames: &[SkeletonFrame]) -> String {
    let mut out = String::new();
    for frame in frames {
        for (i, v) in frame.coords.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            // Display for f64 is the shortest string that parses back exactly.
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_labels(instances: &[ActionInstance]) -> String {
    instances
        .iter()
        .map(|i| format!("{},{},{}\n", i.class_id, i.start, i.end))
        .collect()
}

pub fn write_sequence(seq: &UntrimmedSequence, skeleton_path: &Path, label_path: &Path) -> Result<()> {
    fs::write(skeleton_path, write_skeleton(seq.frames())).map_err(|e| Error::io(skeleton_path, e))?;
    fs::write(label_path, write_labels(seq.instances())).map_err(|e| Error::io(label_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> FrameLayout {
        FrameLayout::new(2, 3, 1)
    }

    #[test]
    fn two_frame_file() {
        let text = "0 1 2 3 4 5\n0.5 1 2 3 4 5.25\n";
        let frames = parse_skeleton(text, layout(), Path::new("s.txt")).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].coords[5], 5.25);
    }

    #[test]
    fn wrong_float_count_reports_line() {
        let text = "0 1 2 3 4 5\n0 1 2 3 4\n";
        match parse_skeleton(text, layout(), Path::new("s.txt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn absent_person_zero_filled() {
        let two = FrameLayout::new(2, 3, 2);
        let frames = parse_skeleton("1 1 1 1 1 1\n", two, Path::new("s")).unwrap();
        assert_eq!(frames[0].coords.len(), 12);
        assert!(frames[0].coords[6..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn label_line_format() {
        let inst = parse_labels("7,3,5\n", 10, Path::new("l")).unwrap();
        assert_eq!(inst, vec![ActionInstance::new(3, 5, 7).unwrap()]);
    }

    #[test]
    fn label_out_of_range_frame() {
        match parse_labels("1,3,5\n2,8,12\n", 10, Path::new("l")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_extra_columns_ignored() {
        // PKU-MMD label files carry a trailing confidence column.
        let inst = parse_labels("4,10,20,1\n", 30, Path::new("l")).unwrap();
        assert_eq!(inst[0], ActionInstance::new(10, 20, 4).unwrap());
    }

    #[test]
    fn manifest_round_trip() {
        let text = "classes = 5\njoints = 4\ndims = 3\npersons = 1\n\
                    train = a.skeleton, a.labels\ntest = b.skeleton, b.labels\n";
        let m = DatasetManifest::parse(text, Path::new("/data"), Path::new("m")).unwrap();
        assert_eq!(m.classes, 5);
        assert_eq!(m.layout.frame_dim(), 12);
        assert_eq!(m.resolve(&m.test[0].labels), PathBuf::from("/data/b.labels"));
        let again = DatasetManifest::parse(&m.render(), Path::new("/data"), Path::new("m")).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn manifest_label_order() {
        let text = "classes = 3\njoints = 1\ndims = 3\npersons = 1\nlabel_order = start,end,class\n";
        let m = DatasetManifest::parse(text, Path::new("."), Path::new("m")).unwrap();
        let inst = parse_labels_with("2,6,3\n", 10, m.label_order, Path::new("l")).unwrap();
        assert_eq!(inst[0], ActionInstance::new(2, 6, 3).unwrap());
        assert!(m.render().contains("label_order = start,end,class"));
    }

    #[test]
    fn manifest_requires_classes() {
        let text = "joints = 4\ndims = 3\npersons = 1\n";
        assert!(DatasetManifest::parse(text, Path::new("."), Path::new("m")).is_err());
        let zero = "classes = 0\njoints = 4\ndims = 3\npersons = 1\n";
        assert!(DatasetManifest::parse(zero, Path::new("."), Path::new("m")).is_err());
    }
}
