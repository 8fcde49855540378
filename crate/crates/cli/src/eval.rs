use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anticipation::config::RunConfig;
use anticipation::data::{parse_frame, DatasetManifest, Normalizer};
use anticipation::eval::{evaluate, frame_dump_csv, EvalConfig, MetricsReport};
use anticipation::model::{stream_step, StreamState};
use anticipation::{Error, Result};
use clap::{Args, ValueEnum};

use crate::{io_err, load_checkpoint, out_err, require_existing, require_path, write_file, LoadedModel, RunFlags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Split {
    Train,
    #[default]
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Clone, Args)]
pub struct StreamArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Skeleton file, one frame per line; standard input when absent or `-`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

/// Name of the per-frame dump for the sequence stored in `skeleton`.
pub fn dump_name(skeleton: &Path) -> String {
    let stem = skeleton.file_stem().map_or_else(|| "sequence".into(), |s| s.to_string_lossy().into_owned());
    format!("{stem}.frames.csv")
}

pub(crate) fn eval_config(cfg: &RunConfig, model: &LoadedModel) -> EvalConfig {
    EvalConfig {
        segments: cfg.segments,
        rule: cfg.instance_rule,
        mode: cfg.inference(),
        normalize: model.normalize,
    }
}

/// Evaluates into `dir`: `report.csv` plus one per-frame dump per sequence
/// under `frames/`.
pub(crate) fn eval_into(cfg: &RunConfig, model: &LoadedModel, manifest: &DatasetManifest, split: Split, dir: &Path) -> Result<MetricsReport> {
    let files = match split {
        Split::Train => &manifest.train,
        Split::Test => &manifest.test,
    };
    let seqs = manifest.load_split(files)?;
    let (report, streams) = evaluate(&model.params, &seqs, manifest.classes, &eval_config(cfg, model))?;
    write_file(&dir.join("report.csv"), &report.to_csv())?;
    for ((f, seq), stream) in files.iter().zip(&seqs).zip(&streams) {
        let labels = seq.labels(manifest.classes)?;
        write_file(&dir.join("frames").join(dump_name(&f.skeleton)), &frame_dump_csv(stream, &labels))?;
    }
    Ok(report)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<MetricsReport> {
    let cfg = args.run.resolve()?;
    let manifest_path = require_existing("manifest", cfg.manifest.as_ref())?;
    let dir = require_path("out_dir", cfg.out_dir.as_ref())?;
    let model = load_checkpoint(&args.checkpoint)?;
    let manifest = DatasetManifest::load(&manifest_path)?;
    let report = eval_into(&cfg, &model, &manifest, args.split, &dir)?;
    write!(out, "{}", report.to_csv()).map_err(out_err)?;
    Ok(report)
}

pub const STREAM_HEADER: &str = "frame,argmax,p_max,q";

/// Reads one frame per line and writes one row per frame, flushing after
/// each row. Input is consumed only as far as the row being produced.
pub fn stream_rows(model: &LoadedModel, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<usize> {
    let dims = model.params.dims();
    let layout = model.normalize;
    let mut state = StreamState::new(dims);
    let mut norm = layout.map(Normalizer::new);
    writeln!(out, "{STREAM_HEADER}").map_err(out_err)?;
    out.flush().map_err(out_err)?;
    let mut line = String::new();
    let mut t = 0;
    loop {
        line.clear();
        if input.read_line(&mut line).map_err(|e| io_err(Path::new("<input>"), e))? == 0 {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let frame = match layout {
            Some(l) => parse_frame(&line, l)?,
            None => {
                let coords = line
                    .split_whitespace()
                    .map(|tok| tok.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| Error::InvalidArgument(format!("frame {}: not a list of finite numbers", t + 1)))?;
                anticipation::data::SkeletonFrame::new(coords)
            }
        };
        let step = match norm.as_mut() {
            Some(n) => stream_step(&model.params, &mut state, &n.apply(&frame).coords)?,
            None => stream_step(&model.params, &mut state, &frame.coords)?,
        };
        t += 1;
        let (cls, p) = step.argmax();
        writeln!(out, "{t},{cls},{p},{}", step.actionness).map_err(out_err)?;
        out.flush().map_err(out_err)?;
    }
    Ok(t)
}

pub fn cmd_stream(args: &StreamArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)?;
    match args.input.as_deref().filter(|p| *p != Path::new("-")) {
        Some(path) => {
            let file = File::open(path).map_err(|e| io_err(path, e))?;
            stream_rows(&model, &mut BufReader::new(file), out)?;
        }
        None => {
            stream_rows(&model, &mut io::stdin().lock(), out)?;
        }
    }
    Ok(())
}
