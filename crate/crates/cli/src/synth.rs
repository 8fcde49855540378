use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anticipation::data::{synth_generate, SynthConfig, UntrimmedSequence};
use anticipation::{Error, Result};
use clap::Args;

use crate::{out_err, read_text};

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    /// Config file with `key = value` lines (generator fields, `seed`, `out_dir`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, alias = "out_dir")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub classes: Option<String>,
    #[arg(long)]
    pub joints: Option<String>,
    #[arg(long)]
    pub persons: Option<String>,
    #[arg(long, alias = "train_sequences")]
    pub train_sequences: Option<String>,
    #[arg(long, alias = "test_sequences")]
    pub test_sequences: Option<String>,
    #[arg(long)]
    pub frames: Option<String>,
    #[arg(long, alias = "instances_per_sequence")]
    pub instances_per_sequence: Option<String>,
    #[arg(long, alias = "min_instance_len")]
    pub min_instance_len: Option<String>,
    #[arg(long, alias = "max_instance_len")]
    pub max_instance_len: Option<String>,
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub amplitude: Option<String>,
}

const HISTOGRAM_BIN: usize = 10;

impl SynthArgs {
    fn resolve(&self) -> Result<(SynthConfig, u64, PathBuf)> {
        let mut cfg = SynthConfig::default();
        let (mut seed, mut out_dir) = (None, None);
        if let Some(path) = &self.config {
            let text = read_text(path)?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let at = |e: Error| Error::Config(format!("{}:{}: {e}", path.display(), idx + 1));
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| at(Error::Config("expected `key = value`".into())))?;
                let (k, v) = (k.trim(), v.trim());
                match k {
                    "seed" => seed = Some(v.parse().map_err(|_| at(Error::Config(format!("invalid seed `{v}`"))))?),
                    "out_dir" => out_dir = Some(path.parent().unwrap_or(path).join(v)),
                    _ => cfg.set(k, v).map_err(at)?,
                }
            }
        }
        let flags = [
            ("classes", &self.classes),
            ("joints", &self.joints),
            ("persons", &self.persons),
            ("train_sequences", &self.train_sequences),
            ("test_sequences", &self.test_sequences),
            ("frames", &self.frames),
            ("instances_per_sequence", &self.instances_per_sequence),
            ("min_instance_len", &self.min_instance_len),
            ("max_instance_len", &self.max_instance_len),
            ("noise", &self.noise),
            ("amplitude", &self.amplitude),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        let seed = self
            .seed
            .or(seed)
            .ok_or_else(|| Error::Config("`seed` is required".into()))?;
        let out_dir = self
            .out_dir
            .clone()
            .or(out_dir)
            .ok_or_else(|| Error::Config("`out_dir` is required".into()))?;
        Ok((cfg, seed, out_dir))
    }
}

/// Summary lines and a length histogram for a set of sequences.
pub fn dataset_stats(train: &[UntrimmedSequence], test: &[UntrimmedSequence]) -> String {
    let all: Vec<&UntrimmedSequence> = train.iter().chain(test).collect();
    let lengths: Vec<usize> = all
        .iter()
        .flat_map(|s| s.instances().iter().map(|i| i.frame_count()))
        .collect();
    let frames: usize = all.iter().map(|s| s.len()).sum();
    let mut per_class = BTreeMap::new();
    for s in &all {
        for i in s.instances() {
            *per_class.entry(i.class_id).or_insert(0usize) += 1;
        }
    }
    let mut out = format!(
        "train_sequences={}\ntest_sequences={}\nframes={frames}\ninstances={}\n",
        train.len(),
        test.len(),
        lengths.len()
    );
    if let (Some(min), Some(max)) = (lengths.iter().min(), lengths.iter().max()) {
        let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
        out += &format!("instance_len_mean={mean:.2}\ninstance_len_min={min}\ninstance_len_max={max}\n");
        for (class, n) in &per_class {
            out += &format!("class_{class}_instances={n}\n");
        }
        out += "len_from,len_to,count,bar\n";
        let mut bins = BTreeMap::new();
        for l in &lengths {
            *bins.entry(l / HISTOGRAM_BIN).or_insert(0usize) += 1;
        }
        for b in min / HISTOGRAM_BIN..=max / HISTOGRAM_BIN {
            let n = bins.get(&b).copied().unwrap_or(0);
            let lo = b * HISTOGRAM_BIN;
            out += &format!("{lo},{},{n},{}\n", lo + HISTOGRAM_BIN - 1, "#".repeat(n));
        }
    }
    out
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let (cfg, seed, dir) = args.resolve()?;
    let data = synth_generate(&cfg, seed)?;
    data.write_to(&dir)?;
    writeln!(out, "manifest={}", dir.join("manifest.txt").display()).map_err(out_err)?;
    write!(out, "{}", dataset_stats(&data.train, &data.test)).map_err(out_err)?;
    Ok(())
}
