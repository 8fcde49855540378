use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use anticipation::checkpoint::{model_from_container, reps_container, reps_from_container, Container};
use anticipation::config::RunConfig;
use anticipation::data::DatasetManifest;
use anticipation::losses::TeacherRepStore;
use anticipation::sampling::LabeledSequence;
use anticipation::teacher::{extract_full_reps, trimmed_accuracy};
use anticipation::train::{train, train_teacher, EpochLog, TrainConfig, TrainOutcome};
use anticipation::{Error, Result};

use crate::{checkpoint_container, io_err, out_err, require_existing, require_path};

/// Loaded inputs of a training run, checked before the first epoch.
pub(crate) struct Prepared {
    pub manifest: DatasetManifest,
    pub train: Vec<LabeledSequence>,
    pub teacher: Option<TeacherRepStore>,
    pub cfg: TrainConfig,
}

pub(crate) fn labeled(seqs: Vec<anticipation::data::UntrimmedSequence>, classes: usize) -> Result<Vec<LabeledSequence>> {
    seqs.into_iter()
        .enumerate()
        .map(|(i, s)| LabeledSequence::new(i, s, classes))
        .collect()
}

/// Validates the config and loads data and teacher targets. Every failure
/// that does not depend on training itself surfaces here.
pub(crate) fn prepare(cfg: &RunConfig, need_teacher: bool) -> Result<Prepared> {
    cfg.validate()?;
    let manifest_path = require_existing("manifest", cfg.manifest.as_ref())?;
    require_path("out_dir", cfg.out_dir.as_ref())?;
    let teacher_path = if need_teacher && cfg.alpha > 0.0 {
        let path = cfg
            .teacher
            .as_ref()
            .ok_or_else(|| Error::MissingTeacherRep("alpha > 0 requires `teacher`".into()))?;
        Some(require_existing("teacher", Some(path))?)
    } else {
        None
    };
    let manifest = DatasetManifest::load(&manifest_path)?;
    let train_cfg = TrainConfig::from_run(cfg, manifest.layout)?;
    let train = labeled(manifest.load_train()?, manifest.classes)?;
    let teacher = match teacher_path {
        Some(path) => {
            let c = Container::load(&path)?;
            Some(match c.meta("kind") {
                Some("teacher_reps") => reps_from_container(&c)?,
                _ => extract_full_reps(&model_from_container(&c)?, &train, train_cfg.normalize)?,
            })
        }
        None => None,
    };
    Ok(Prepared {
        manifest,
        train,
        teacher,
        cfg: train_cfg,
    })
}

struct CsvLog {
    file: File,
    path: std::path::PathBuf,
    error: Option<Error>,
}

impl CsvLog {
    fn create(path: &Path, header: &str) -> Result<Self> {
        let mut file = File::create(path).map_err(|e| io_err(path, e))?;
        writeln!(file, "{header}").map_err(|e| io_err(path, e))?;
        Ok(CsvLog {
            file,
            path: path.to_path_buf(),
            error: None,
        })
    }

    fn row(&mut self, line: &str) {
        if self.error.is_none() {
            if let Err(e) = writeln!(self.file, "{line}").and_then(|_| self.file.flush()) {
                self.error = Some(io_err(&self.path, e));
            }
        }
    }

    fn finish(self) -> Result<()> {
        self.error.map_or(Ok(()), Err)
    }
}

/// Trains into `dir`: `train_log.csv`, `final.ckpt` and `best.ckpt`.
pub(crate) fn train_into(cfg: &RunConfig, prep: &Prepared, dir: &Path, out: &mut dyn Write) -> Result<TrainOutcome> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut log = CsvLog::create(&dir.join("train_log.csv"), EpochLog::CSV_HEADER)?;
    let mut echo_err = None;
    let outcome = train(&prep.cfg, &prep.train, prep.manifest.classes, prep.teacher.as_ref(), &mut |e| {
        let row = e.csv_row();
        log.row(&row);
        if echo_err.is_none() {
            echo_err = writeln!(out, "{row}").err();
        }
    })?;
    log.finish()?;
    if let Some(e) = echo_err {
        return Err(out_err(e));
    }
    let layout = prep.manifest.layout;
    checkpoint_container(&outcome.params, cfg, layout).save(&dir.join("final.ckpt"))?;
    checkpoint_container(&outcome.best, cfg, layout).save(&dir.join("best.ckpt"))?;
    Ok(outcome)
}

pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<TrainOutcome> {
    let prep = prepare(cfg, true)?;
    let dir = require_path("out_dir", cfg.out_dir.as_ref())?;
    writeln!(out, "{}", EpochLog::CSV_HEADER).map_err(out_err)?;
    let outcome = train_into(cfg, &prep, &dir, out)?;
    writeln!(out, "best_epoch={}", outcome.best_epoch).map_err(out_err)?;
    writeln!(out, "checkpoint={}", dir.join("final.ckpt").display()).map_err(out_err)?;
    Ok(outcome)
}

/// Trains the side network on trimmed training instances, then writes
/// `teacher.ckpt`, `teacher_reps.ckpt` and `teacher_log.csv`.
pub fn cmd_train_teacher(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let prep = prepare(cfg, false)?;
    let dir = require_path("out_dir", cfg.out_dir.as_ref())?;
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut log = CsvLog::create(&dir.join("teacher_log.csv"), EpochLog::CSV_HEADER)?;
    let outcome = train_teacher(&prep.cfg, &prep.train, prep.manifest.classes, &mut |e| log.row(&e.csv_row()))?;
    log.finish()?;
    let layout = prep.manifest.layout;
    checkpoint_container(&outcome.params, cfg, layout).save(&dir.join("teacher.ckpt"))?;
    let reps = extract_full_reps(&outcome.params, &prep.train, prep.cfg.normalize)?;
    reps_container(&reps).save(&dir.join("teacher_reps.ckpt"))?;
    let test = labeled(prep.manifest.load_test()?, prep.manifest.classes)?;
    let train_acc = trimmed_accuracy(&outcome.params, &prep.train, prep.cfg.normalize)?;
    let test_acc = trimmed_accuracy(&outcome.params, &test, prep.cfg.normalize)?;
    writeln!(out, "train_trimmed_accuracy={train_acc}").map_err(out_err)?;
    writeln!(out, "test_trimmed_accuracy={test_acc}").map_err(out_err)?;
    writeln!(out, "teacher={}", dir.join("teacher.ckpt").display()).map_err(out_err)?;
    writeln!(out, "teacher_reps={}", dir.join("teacher_reps.ckpt").display()).map_err(out_err)?;
    Ok(())
}
