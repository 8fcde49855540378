use std::fs::{self, File};
use std::io::Write;
use std::path::PathBuf;

use anticipation::eval::MetricsReport;
use anticipation::rng::derived_rng;
use anticipation::{Error, Result};
use clap::{Args, ValueEnum};
use rand::RngCore;

use crate::eval::{eval_into, Split};
use crate::train::{prepare, train_into};
use crate::{io_err, out_err, require_path, LoadedModel, RunFlags};

const SWEEP_SEED: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    #[value(name = "clip_len", alias = "clip-len")]
    ClipLen,
    #[value(name = "context_window", alias = "context-window")]
    ContextWindow,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::ClipLen => "clip_len",
            SweepAxis::ContextWindow => "context_window",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated values, e.g. `10,50,200`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<usize>,
    #[command(flatten)]
    pub run: RunFlags,
}

/// Seed of the run at position `index` in a sweep with base seed `base`.
pub fn sweep_seed(base: u64, index: usize) -> u64 {
    derived_rng(base, SWEEP_SEED, index as u32).next_u64()
}

/// `value,<γ grid>,avg_acc_w_bg,avg_acc_wo_bg`.
pub fn table_header(segments: usize) -> String {
    let mut h = String::from("value");
    for k in 1..segments {
        h += &format!(",{}", k as f64 / segments as f64);
    }
    h + ",avg_acc_w_bg,avg_acc_wo_bg"
}

pub fn table_row(value: usize, report: &MetricsReport) -> String {
    let mut row = value.to_string();
    for a in &report.anticipation {
        row += &format!(",{a}");
    }
    row + &format!(",{},{}", report.avg_acc_with_bg, report.avg_acc_without_bg)
}

/// Runs train and eval per value into `<out_dir>/<axis>_<value>/`. Rows are
/// appended to `<out_dir>/sweep_<axis>.csv` as runs finish, so a failure
/// keeps every completed row.
pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    if args.values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one value".into()));
    }
    let base = args.run.resolve()?;
    let base_seed = base.seed()?;
    let dir = require_path("out_dir", base.out_dir.as_ref())?;
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let table_path: PathBuf = dir.join(format!("sweep_{}.csv", args.axis.key()));
    let mut table = File::create(&table_path).map_err(|e| io_err(&table_path, e))?;
    let header = table_header(base.segments);
    writeln!(table, "{header}").map_err(|e| io_err(&table_path, e))?;
    writeln!(out, "{header}").map_err(out_err)?;
    for (i, &value) in args.values.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.set(args.axis.key(), &value.to_string())?;
        cfg.seed = Some(sweep_seed(base_seed, i));
        let run_dir = dir.join(format!("{}_{value}", args.axis.key()));
        cfg.out_dir = Some(run_dir.clone());
        let prep = prepare(&cfg, true)?;
        let outcome = train_into(&cfg, &prep, &run_dir, &mut std::io::sink())?;
        let model = LoadedModel {
            params: outcome.params,
            normalize: prep.cfg.normalize,
        };
        let report = eval_into(&cfg, &model, &prep.manifest, Split::Test, &run_dir)?;
        let row = table_row(value, &report);
        writeln!(table, "{row}")
            .and_then(|_| table.flush())
            .map_err(|e| io_err(&table_path, e))?;
        writeln!(out, "{row}").map_err(out_err)?;
    }
    Ok(())
}
