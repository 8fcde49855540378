//! Command implementations behind the `anticipate` binary.
//!
//! Every subcommand reads a flat `key = value` config file (optional) and
//! applies command-line flags on top of it. Flags always win.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anticipation::checkpoint::{model_container, model_from_container, Container};
use anticipation::config::RunConfig;
use anticipation::data::FrameLayout;
use anticipation::model::ModelParams;
use anticipation::{Error, Result};
use clap::{Args, Parser, Subcommand};

mod eval;
mod synth;
mod sweep;
mod train;

pub use eval::{cmd_eval, cmd_stream, dump_name, stream_rows, EvalArgs, Split, StreamArgs, STREAM_HEADER};
pub use sweep::{cmd_sweep, SweepArgs, SweepAxis};
pub use synth::{cmd_synth, SynthArgs};
pub use train::{cmd_train, cmd_train_teacher};

#[derive(Debug, Parser)]
#[command(name = "anticipate", version, about = "Action anticipation from streaming skeleton sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Train the side network on trimmed instances and export its representations.
    TrainTeacher(RunFlags),
    /// Train the anticipation network.
    Train(RunFlags),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Run a checkpoint over a skeleton stream, one output row per input frame.
    Stream(StreamArgs),
    /// Train and evaluate once per value of a sampler hyperparameter.
    Sweep(SweepArgs),
}

/// Run configuration flags. Each mirrors a config-file key.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// Config file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<String>,
    #[arg(long, alias = "clip_len")]
    pub clip_len: Option<String>,
    #[arg(long, alias = "context_window")]
    pub context_window: Option<String>,
    /// AC, SW or AC/SW.
    #[arg(long, alias = "sampler_mode")]
    pub sampler_mode: Option<String>,
    #[arg(long, alias = "sw_stride")]
    pub sw_stride: Option<String>,
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long, alias = "clip_norm")]
    pub clip_norm: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long, alias = "batch_size")]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long, alias = "out_dir")]
    pub out_dir: Option<String>,
    /// Teacher checkpoint or representation store.
    #[arg(long)]
    pub teacher: Option<String>,
    #[arg(long)]
    pub normalize: Option<String>,
    #[arg(long)]
    pub segments: Option<String>,
    /// `last` or `mean`.
    #[arg(long, alias = "instance_rule")]
    pub instance_rule: Option<String>,
    /// `streaming` or `stitched`.
    #[arg(long)]
    pub inference: Option<String>,
}

impl RunFlags {
    fn overrides(&self) -> [(&'static str, &Option<String>); 20] {
        [
            ("manifest", &self.manifest),
            ("clip_len", &self.clip_len),
            ("context_window", &self.context_window),
            ("sampler_mode", &self.sampler_mode),
            ("sw_stride", &self.sw_stride),
            ("hidden", &self.hidden),
            ("layers", &self.layers),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("lr", &self.lr),
            ("clip_norm", &self.clip_norm),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("teacher", &self.teacher),
            ("normalize", &self.normalize),
            ("segments", &self.segments),
            ("instance_rule", &self.instance_rule),
            ("inference", &self.inference),
        ]
    }

    /// Config file values, then flag overrides. Relative paths inside the
    /// file are taken relative to the file.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = read_text(path)?;
                let mut cfg = RunConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new(""));
                for p in [&mut cfg.manifest, &mut cfg.out_dir, &mut cfg.teacher].into_iter().flatten() {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                cfg
            }
            None => RunConfig::default(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub(crate) fn require_path(what: &str, path: Option<&PathBuf>) -> Result<PathBuf> {
    let path = path.ok_or_else(|| Error::Config(format!("`{what}` is required")))?;
    Ok(path.clone())
}

pub(crate) fn require_existing(what: &str, path: Option<&PathBuf>) -> Result<PathBuf> {
    let path = require_path(what, path)?;
    if !path.exists() {
        return Err(Error::Config(format!("{what} `{}` does not exist", path.display())));
    }
    Ok(path)
}

/// Config text embedded in checkpoints. The output directory is left out so
/// the same run written to two places yields identical bytes.
pub(crate) fn embedded_config(cfg: &RunConfig) -> String {
    RunConfig {
        out_dir: None,
        ..cfg.clone()
    }
    .render()
}

const NORMALIZE_META: &str = "normalize";

pub(crate) fn checkpoint_container(params: &ModelParams, cfg: &RunConfig, layout: FrameLayout) -> Container {
    let mut c = model_container(params, &embedded_config(cfg));
    let norm = if cfg.normalize {
        format!("{},{},{}", layout.joints, layout.dims, layout.persons)
    } else {
        "none".into()
    };
    c.meta.push((NORMALIZE_META.into(), norm));
    c
}

/// A trained model plus the input normalization it was trained with.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub params: ModelParams,
    pub normalize: Option<FrameLayout>,
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedModel> {
    let c = Container::load(path)?;
    let params = model_from_container(&c)?;
    let normalize = match c.meta(NORMALIZE_META) {
        None | Some("none") => None,
        Some(v) => {
            let dims: Vec<usize> = v
                .split(',')
                .map(|x| x.parse().map_err(|_| Error::Checkpoint(format!("bad normalize layout `{v}`"))))
                .collect::<Result<_>>()?;
            let [j, d, p] = dims[..] else {
                return Err(Error::Checkpoint(format!("bad normalize layout `{v}`")));
            };
            Some(FrameLayout::new(j, d, p))
        }
    };
    Ok(LoadedModel { params, normalize })
}

/// Dispatches one parsed command line. Human-readable output goes to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, out),
        Command::TrainTeacher(f) => cmd_train_teacher(&f.resolve()?, out),
        Command::Train(f) => cmd_train(&f.resolve()?, out).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a, out).map(|_| ()),
        Command::Stream(a) => cmd_stream(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
    }
}

/// The one-line error format printed on failure.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace(['\n', '\r'], " ");
    format!("error kind={} msg={msg}", e.kind())
}

pub(crate) fn out_err(e: std::io::Error) -> Error {
    io_err(Path::new("<stdout>"), e)
}
