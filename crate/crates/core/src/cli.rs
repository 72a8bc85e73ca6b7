//! The `evood` command line: `train`, `eval-ood`, `map` and `selfcheck`.
//!
//! Settings come from three layers, later ones winning: built-in defaults for
//! the chosen architecture, a flat `key = value` file given by `--config`, and
//! command-line flags. Config keys are the long flag names with `-` or `_`.
//!
//! With `--arch mlp2d` the data is the built-in two-Gaussian task generated
//! from the seed; with `--arch gru` it is read from JSONL corpora.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{
    encode_corpus, generate_synthetic_2d, load_jsonl_corpus, uncertainty_grid, write_grid_csv,
    Corpus, GridSpec, LabelSchema, SyntheticData, SyntheticSpec, Vocab,
};
use crate::error::{Error, Result};
use crate::metrics::{
    detection_metrics, subsample_base_rate, summarize_uncertainty, BaseRate, DetectionMetrics,
};
use crate::model::{
    msp_score, predict_reports, Activation, Architecture, Head, Input, Model, ModelSpec,
};
use crate::nn::{Checkpoint, ModelParams};
use crate::selfcheck::{format_report, run_selfcheck, SelfcheckOptions};
use crate::trainer::{
    evaluate_epoch, train, train_softmax_baseline, Trained, TrainingConfig, UpdateMode,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

pub const METRICS_HEADER: &str = "in_dataset,out_dataset,model,score_name,auroc,aupr,fpr90";
pub const SWEEP_HEADER: &str = "delta_off,in_dataset,out_dataset,auroc,aupr,fpr90";

#[derive(Debug, Parser)]
#[command(
    name = "evood",
    version,
    about = "Evidential uncertainty and OOD detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the evidential model and the softmax baseline; write a checkpoint and log.
    Train(Flags),
    /// Score ID and OOD test sets and write detection metrics.
    EvalOod(Flags),
    /// Write the uncertainty grid of a 2-D model.
    Map(Flags),
    /// Run the built-in oracle and gradient checks.
    Selfcheck(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::EvalOod(_) => "eval-ood",
            Command::Map(_) => "map",
            Command::Selfcheck(_) => "selfcheck",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Train(f) | Command::EvalOod(f) | Command::Map(f) | Command::Selfcheck(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchChoice {
    Mlp2d,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreChoice {
    Vacuity,
    Dissonance,
    Entropy,
    Msp,
    All,
}

impl ScoreChoice {
    pub fn expand(self) -> Vec<ScoreChoice> {
        match self {
            ScoreChoice::All => vec![
                ScoreChoice::Vacuity,
                ScoreChoice::Dissonance,
                ScoreChoice::Entropy,
                ScoreChoice::Msp,
            ],
            s => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreChoice::Vacuity => "vacuity",
            ScoreChoice::Dissonance => "dissonance",
            ScoreChoice::Entropy => "entropy",
            ScoreChoice::Msp => "msp",
            ScoreChoice::All => "all",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for data, init, shuffling and sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// In-distribution training corpus (JSONL). Required for gru.
    #[arg(long)]
    pub id_train: Option<PathBuf>,
    /// In-distribution test corpus (JSONL).
    #[arg(long)]
    pub id_test: Option<PathBuf>,
    /// Outlier-exposure corpus (labels ignored).
    #[arg(long)]
    pub oe: Option<PathBuf>,
    /// OOD test corpus; repeat for several.
    #[arg(long)]
    pub ood: Vec<PathBuf>,
    /// Checkpoint path to write (train) or read (eval-ood, map).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Weight of the vacuity penalty on in-distribution data.
    #[arg(long)]
    pub beta_in: Option<f64>,
    /// Weight of the vacuity reward on outlier-exposure data.
    #[arg(long)]
    pub beta_oe: Option<f64>,
    /// Weight of the vacuity reward on off-manifold samples.
    #[arg(long)]
    pub beta_ad: Option<f64>,
    /// l-inf radius of off-manifold samples in embedding space.
    #[arg(long)]
    pub delta_off: Option<f64>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// mlp2d uses the built-in two-Gaussian task; gru reads text corpora.
    #[arg(long, value_enum)]
    pub arch: Option<ArchChoice>,
    /// Uncertainty score(s) to evaluate.
    #[arg(long, value_enum)]
    pub score: Option<ScoreChoice>,
    /// Comma-separated off-manifold radii to sweep, e.g. "0.001,0.01,0.1,1".
    #[arg(long)]
    pub sweep_delta_off: Option<String>,
    /// Generic `key=value` override of any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Constant added to the loss under self-check (mutation testing).
    #[arg(long, hide = true)]
    pub perturb_loss: Option<f64>,
}

/// Every key accepted in config files and `--set`.
pub const CONFIG_KEYS: &[&str] = &[
    "seed",
    "id_train",
    "id_test",
    "oe",
    "ood",
    "checkpoint",
    "out",
    "beta_in",
    "beta_oe",
    "beta_ad",
    "delta_off",
    "lr",
    "batch_size",
    "epochs",
    "arch",
    "score",
    "sweep_delta_off",
    "embed_dim",
    "hidden_dim",
    "layers",
    "activation",
    "mode",
    "min_freq",
    "max_vocab",
    "max_len",
    "grid_min",
    "grid_max",
    "grid_resolution",
    "mc_draws",
    "mc_cases",
];

/// Raw settings keyed by canonical (underscore) names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

fn canonical(key: &str) -> Result<String> {
    let k = key.trim().replace('-', "_");
    if CONFIG_KEYS.contains(&k.as_str()) {
        Ok(k)
    } else {
        Err(Error::Config(format!("unknown setting `{}`", key.trim())))
    }
}

impl Settings {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    i + 1
                ))
            })?;
            let key = canonical(k)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
            let v = v.trim().to_string();
            // Repeated `ood` lines accumulate.
            if key == "ood" {
                if let Some(prev) = s.0.get_mut("ood") {
                    prev.push(',');
                    prev.push_str(&v);
                    continue;
                }
            }
            s.0.insert(key, v);
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> Result<()> {
        self.0.insert(canonical(key)?, value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Layers `other` on top of `self`.
    pub fn merged(mut self, other: Settings) -> Settings {
        self.0.extend(other.0);
        self
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
            })
            .transpose()
    }

    /// Settings given on the command line.
    pub fn from_flags(f: &Flags) -> Result<Self> {
        let mut s = Settings::default();
        macro_rules! put {
            ($($field:ident),*) => {$(
                if let Some(v) = &f.$field {
                    s.set(stringify!($field), v.to_string())?;
                }
            )*};
        }
        put!(
            seed,
            beta_in,
            beta_oe,
            beta_ad,
            delta_off,
            lr,
            batch_size,
            epochs,
            sweep_delta_off
        );
        for (key, path) in [
            ("id_train", &f.id_train),
            ("id_test", &f.id_test),
            ("oe", &f.oe),
            ("checkpoint", &f.checkpoint),
            ("out", &f.out),
        ] {
            if let Some(p) = path {
                s.set(key, p.display())?;
            }
        }
        if !f.ood.is_empty() {
            let joined: Vec<String> = f.ood.iter().map(|p| p.display().to_string()).collect();
            s.set("ood", joined.join(","))?;
        }
        if let Some(a) = f.arch {
            s.set("arch", a.to_possible_value().expect("named").get_name())?;
        }
        if let Some(sc) = f.score {
            s.set("score", sc.name())?;
        }
        for kv in &f.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            s.set(k, v.trim())?;
        }
        Ok(s)
    }
}

/// Text-pipeline options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextOptions {
    pub min_freq: usize,
    pub max_vocab: Option<usize>,
    pub max_len: usize,
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub arch: ArchChoice,
    pub seed: u64,
    pub id_train: Option<PathBuf>,
    pub id_test: Option<PathBuf>,
    pub oe: Option<PathBuf>,
    pub ood: Vec<PathBuf>,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    /// Training settings; the model's vocabulary size is filled in once the corpus is read.
    pub training: TrainingConfig,
    pub text: TextOptions,
    pub scores: Vec<ScoreChoice>,
    pub sweep: Option<Vec<f64>>,
    pub grid: GridSpec,
    pub selfcheck: SelfcheckOptions,
}

impl RunConfig {
    /// Resolves `defaults < file < command line`.
    pub fn resolve(command: &Command) -> Result<Self> {
        let flags = command.flags();
        let file = match &flags.config {
            Some(p) => Settings::read(p)?,
            None => Settings::default(),
        };
        let settings = file.merged(Settings::from_flags(flags)?);
        Self::from_settings(command.name(), &settings, flags.perturb_loss)
    }

    pub fn from_settings(command: &str, s: &Settings, perturb_loss: Option<f64>) -> Result<Self> {
        let arch = match s.get("arch").unwrap_or("mlp2d") {
            "mlp2d" => ArchChoice::Mlp2d,
            "gru" => ArchChoice::Gru,
            other => {
                return Err(Error::Config(format!(
                    "unknown arch `{other}` (expected mlp2d or gru)"
                )))
            }
        };
        let seed = s.parsed("seed")?.unwrap_or(0);
        let mut training = match arch {
            ArchChoice::Mlp2d => TrainingConfig::synthetic_preset(seed),
            ArchChoice::Gru => TrainingConfig::text_preset(0, 2, seed),
        };
        if let Some(v) = s.parsed("beta_in")? {
            training.betas.beta_in = v;
        }
        if let Some(v) = s.parsed("beta_oe")? {
            training.betas.beta_oe = v;
        }
        if let Some(v) = s.parsed("beta_ad")? {
            training.betas.beta_ad = v;
        }
        if let Some(v) = s.parsed("delta_off")? {
            training.delta_off = v;
        }
        if let Some(v) = s.parsed("lr")? {
            training.lr = v;
        }
        if let Some(v) = s.parsed("batch_size")? {
            training.batch_size = v;
        }
        if let Some(v) = s.parsed("epochs")? {
            training.epochs = v;
        }
        training.mode = match s.get("mode").unwrap_or("sequential") {
            "sequential" => UpdateMode::Sequential,
            "fused" => UpdateMode::Fused,
            other => {
                return Err(Error::Config(format!(
                    "unknown mode `{other}` (expected sequential or fused)"
                )))
            }
        };
        if let Some(a) = s.get("activation") {
            training.model.head = Head::Evidential(Activation::parse(a)?);
        }
        let (e, h, l) = (
            s.parsed::<usize>("embed_dim")?,
            s.parsed::<usize>("hidden_dim")?,
            s.parsed::<usize>("layers")?,
        );
        match &mut training.model.arch {
            Architecture::Mlp2d {
                embed_dim,
                hidden_dim,
                ..
            } => {
                *embed_dim = e.unwrap_or(*embed_dim);
                *hidden_dim = h.unwrap_or(*hidden_dim);
            }
            Architecture::Gru {
                embed_dim,
                hidden_dim,
                layers,
                ..
            } => {
                *embed_dim = e.unwrap_or(*embed_dim);
                *hidden_dim = h.unwrap_or(*hidden_dim);
                *layers = l.unwrap_or(*layers);
            }
        }

        let path = |k: &str| s.get(k).filter(|v| !v.is_empty()).map(PathBuf::from);
        let out = path("out").unwrap_or_else(|| PathBuf::from("evood-out"));
        let checkpoint = path("checkpoint").unwrap_or_else(|| out.join("model.ckpt"));
        let ood = s
            .get("ood")
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(PathBuf::from)
                    .collect()
            })
            .unwrap_or_default();
        let scores = match s.get("score").unwrap_or("all") {
            "vacuity" => ScoreChoice::Vacuity,
            "dissonance" => ScoreChoice::Dissonance,
            "entropy" => ScoreChoice::Entropy,
            "msp" => ScoreChoice::Msp,
            "all" => ScoreChoice::All,
            other => return Err(Error::Config(format!("unknown score `{other}`"))),
        }
        .expand();
        let sweep = s.get("sweep_delta_off").map(parse_sweep).transpose()?;
        let grid_default = GridSpec::default();
        let grid = GridSpec {
            min: s.parsed("grid_min")?.unwrap_or(grid_default.min),
            max: s.parsed("grid_max")?.unwrap_or(grid_default.max),
            resolution: s
                .parsed("grid_resolution")?
                .unwrap_or(grid_default.resolution),
        };
        let sc_default = SelfcheckOptions::default();
        let cfg = RunConfig {
            command: command.to_string(),
            arch,
            seed,
            id_train: path("id_train"),
            id_test: path("id_test"),
            oe: path("oe"),
            ood,
            checkpoint,
            out,
            training,
            text: TextOptions {
                min_freq: s.parsed("min_freq")?.unwrap_or(1),
                max_vocab: s.parsed("max_vocab")?,
                max_len: s.parsed("max_len")?.unwrap_or(64),
            },
            scores,
            sweep,
            grid,
            selfcheck: SelfcheckOptions {
                seed,
                mc_cases: s.parsed("mc_cases")?.unwrap_or(sc_default.mc_cases),
                mc_draws: s.parsed("mc_draws")?.unwrap_or(sc_default.mc_draws),
                loss_perturbation: perturb_loss.unwrap_or(0.0),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Per-command requirements, with messages naming the missing flag.
    pub fn validate(&self) -> Result<()> {
        let need = |cond: bool, msg: &str| {
            if cond {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        self.training
            .betas
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        match self.command.as_str() {
            "train" => {
                self.training.validate()?;
                if self.arch == ArchChoice::Gru {
                    need(
                        self.id_train.is_some(),
                        "train --arch gru needs --id-train <file.jsonl>",
                    )?;
                    need(
                        self.oe.is_some() || self.training.betas.beta_oe == 0.0,
                        "beta_oe > 0 needs an outlier corpus: pass --oe <file.jsonl> or set --beta-oe 0",
                    )?;
                    if self.sweep.is_some() {
                        need(
                            self.id_test.is_some() && !self.ood.is_empty(),
                            "--sweep-delta-off needs --id-test and at least one --ood to score each radius",
                        )?;
                    }
                }
            }
            "eval-ood" if self.arch == ArchChoice::Gru => {
                need(
                    self.id_test.is_some(),
                    "eval-ood --arch gru needs --id-test <file.jsonl>",
                )?;
                need(
                    !self.ood.is_empty(),
                    "eval-ood --arch gru needs at least one --ood <file.jsonl>",
                )?;
            }
            "map" => {
                need(
                    self.arch == ArchChoice::Mlp2d,
                    "map needs a 2-D model (--arch mlp2d)",
                )?;
                self.grid.validate()?;
            }
            _ => {}
        }
        Ok(())
    }
}

pub fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|d| d.is_finite() && *d > 0.0)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "invalid radius `{}` in --sweep-delta-off",
                        x.trim()
                    ))
                })
        })
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::Config(
            "--sweep-delta-off needs at least one radius".into(),
        ));
    }
    Ok(v)
}

/// Exit code for an error: validation problems vs runtime failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Usage(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Datasets for one run, whichever architecture they come from.
pub struct Datasets {
    pub id_train: Option<Corpus>,
    pub oe: Option<Corpus>,
    pub id_test: Option<(String, Corpus)>,
    pub ood: Vec<(String, Corpus)>,
    pub vocab: Option<Vocab>,
    pub max_len: usize,
}

fn dataset_name(p: &Path) -> String {
    p.file_stem().map_or_else(
        || p.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn synthetic(cfg: &RunConfig) -> Result<SyntheticData> {
    generate_synthetic_2d(&SyntheticSpec {
        seed: cfg.seed,
        grid: cfg.grid,
        ..SyntheticSpec::default()
    })
}

fn synthetic_datasets(cfg: &RunConfig) -> Result<Datasets> {
    let d = synthetic(cfg)?;
    Ok(Datasets {
        id_train: Some(d.train),
        oe: Some(d.oe),
        id_test: Some(("synthetic".into(), d.test)),
        ood: vec![("far-ood".into(), d.far_ood)],
        vocab: None,
        max_len: 0,
    })
}

/// Reads the text corpora; with `vocab = None` the vocabulary is built from the training split.
fn text_datasets(cfg: &RunConfig, vocab: Option<(Vocab, Vec<String>)>) -> Result<Datasets> {
    let (vocab, classes, id_train) = match vocab {
        Some((v, classes)) => (v, classes, None),
        None => {
            let p = cfg
                .id_train
                .as_ref()
                .ok_or_else(|| Error::Config("missing --id-train".into()))?;
            let text = load_jsonl_corpus(p, &LabelSchema::Infer)?;
            let v = Vocab::build(
                text.texts.iter().map(String::as_str),
                cfg.text.min_freq,
                cfg.text.max_vocab,
            );
            let classes = text.class_names.clone();
            let corpus = encode_corpus(&text, &v, cfg.text.max_len)?;
            (v, classes, Some(corpus))
        }
    };
    let load = |p: &Path, schema: &LabelSchema| -> Result<Corpus> {
        encode_corpus(&load_jsonl_corpus(p, schema)?, &vocab, cfg.text.max_len)
    };
    let oe = cfg
        .oe
        .as_ref()
        .map(|p| load(p, &LabelSchema::Unlabeled))
        .transpose()?;
    let id_test = cfg
        .id_test
        .as_ref()
        .map(|p| {
            Ok::<_, Error>((
                dataset_name(p),
                load(p, &LabelSchema::Fixed(classes.clone()))?,
            ))
        })
        .transpose()?;
    let ood = cfg
        .ood
        .iter()
        .map(|p| Ok((dataset_name(p), load(p, &LabelSchema::Unlabeled)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Datasets {
        id_train,
        oe,
        id_test,
        ood,
        vocab: Some(vocab),
        max_len: cfg.text.max_len,
    })
}

/// The evidential model, the softmax baseline, and what is needed to rebuild their inputs.
pub struct TrainedPair {
    pub enn: Trained,
    pub msp: Trained,
    pub class_names: Vec<String>,
    pub vocab: Option<Vocab>,
    pub max_len: usize,
}

pub fn save_checkpoint(path: &Path, pair: &TrainedPair, data_seed: u64) -> Result<()> {
    let mut ck = Checkpoint::new();
    let spec = pair.enn.model.spec();
    ck.set_meta("arch", spec.arch.name());
    ck.set_meta("num_classes", spec.num_classes);
    ck.set_meta("data_seed", data_seed);
    if let Head::Evidential(a) = spec.head {
        ck.set_meta("activation", a.name());
    }
    match &spec.arch {
        Architecture::Mlp2d {
            input_dim,
            embed_dim,
            hidden_dim,
        } => {
            ck.set_meta("input_dim", input_dim);
            ck.set_meta("embed_dim", embed_dim);
            ck.set_meta("hidden_dim", hidden_dim);
        }
        Architecture::Gru {
            vocab_size,
            embed_dim,
            hidden_dim,
            layers,
        } => {
            ck.set_meta("vocab_size", vocab_size);
            ck.set_meta("embed_dim", embed_dim);
            ck.set_meta("hidden_dim", hidden_dim);
            ck.set_meta("layers", layers);
            ck.set_meta("max_len", pair.max_len);
        }
    }
    if !pair.class_names.is_empty() {
        ck.set_meta("classes", pair.class_names.join(" "));
    }
    if let Some(v) = &pair.vocab {
        if !v.regular_tokens().is_empty() {
            ck.set_meta("vocab", v.regular_tokens().join(" "));
        }
    }
    ck.insert_params("enn", &pair.enn.params);
    ck.insert_params("msp", &pair.msp.params);
    write_file(path, &ck.to_text())
}

/// A checkpoint read back into models.
pub struct Loaded {
    pub enn: (Model, ModelParams),
    pub msp: (Model, ModelParams),
    pub arch: ArchChoice,
    pub data_seed: u64,
    pub class_names: Vec<String>,
    pub vocab: Option<Vocab>,
    pub max_len: usize,
}

pub fn load_checkpoint(path: &Path) -> Result<Loaded> {
    let ck = Checkpoint::read(path)?;
    let get = |k: &str| -> Result<usize> {
        ck.meta(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("checkpoint lacks numeric meta `{k}`"),
            })
    };
    let (arch, choice) = match ck.meta("arch") {
        Some("mlp2d") => (
            Architecture::Mlp2d {
                input_dim: get("input_dim")?,
                embed_dim: get("embed_dim")?,
                hidden_dim: get("hidden_dim")?,
            },
            ArchChoice::Mlp2d,
        ),
        Some("gru") => (
            Architecture::Gru {
                vocab_size: get("vocab_size")?,
                embed_dim: get("embed_dim")?,
                hidden_dim: get("hidden_dim")?,
                layers: get("layers")?,
            },
            ArchChoice::Gru,
        ),
        other => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("unknown arch {other:?}"),
            })
        }
    };
    let activation = Activation::parse(ck.meta("activation").unwrap_or("softplus"))?;
    let num_classes = get("num_classes")?;
    let spec = |head| ModelSpec {
        arch: arch.clone(),
        num_classes,
        head,
    };
    let enn_params = ck.extract_params("enn")?;
    let msp_params = ck.extract_params("msp")?;
    let enn = Model::from_params(spec(Head::Evidential(activation)), &enn_params)?;
    let msp = Model::from_params(spec(Head::Softmax), &msp_params)?;
    let vocab = (choice == ArchChoice::Gru).then(|| {
        Vocab::from_tokens(
            ck.meta("vocab")
                .unwrap_or("")
                .split(' ')
                .filter(|t| !t.is_empty())
                .map(str::to_string),
        )
    });
    Ok(Loaded {
        enn: (enn, enn_params),
        msp: (msp, msp_params),
        arch: choice,
        data_seed: get("data_seed")? as u64,
        class_names: ck
            .meta("classes")
            .map(|c| c.split(' ').map(str::to_string).collect())
            .unwrap_or_default(),
        vocab,
        max_len: if choice == ArchChoice::Gru {
            get("max_len")?
        } else {
            0
        },
    })
}

/// Training settings with class count and vocabulary size taken from `data`.
fn data_training_config(cfg: &RunConfig, data: &Datasets) -> Result<TrainingConfig> {
    let id = data
        .id_train
        .as_ref()
        .ok_or_else(|| Error::Config("no training data".into()))?;
    let mut tc = cfg.training.clone();
    tc.model.num_classes = id.class_names.len().max(2);
    if let (Architecture::Gru { vocab_size, .. }, Some(v)) = (&mut tc.model.arch, &data.vocab) {
        *vocab_size = v.len();
    }
    Ok(tc)
}

fn outliers(data: &Datasets) -> &[crate::model::LabeledExample] {
    data.oe.as_ref().map_or(&[], |c| &c.examples)
}

/// Trains the evidential model and the baseline on `data`.
pub fn train_pair(cfg: &RunConfig, data: &Datasets) -> Result<TrainedPair> {
    let tc = data_training_config(cfg, data)?;
    let id = data.id_train.as_ref().expect("checked above");
    let enn = train(&id.examples, outliers(data), &tc)?;
    let msp = train_softmax_baseline(&id.examples, &tc)?;
    Ok(TrainedPair {
        enn,
        msp,
        class_names: id.class_names.clone(),
        vocab: data.vocab.clone(),
        max_len: data.max_len,
    })
}

/// OOD scores (higher = more OOD) for `inputs` under `score`.
pub fn score_inputs(
    score: ScoreChoice,
    enn: &(Model, ModelParams),
    msp: Option<&(Model, ModelParams)>,
    inputs: &[&Input],
) -> Result<Vec<f64>> {
    Ok(match score {
        ScoreChoice::Msp => {
            let msp =
                msp.ok_or_else(|| Error::Config("the msp score needs a softmax baseline".into()))?;
            msp.0
                .outputs(&msp.1, inputs)?
                .iter()
                .map(|z| msp_score(z))
                .collect()
        }
        s => {
            let reports = predict_reports(&enn.0, &enn.1, inputs)?;
            reports
                .iter()
                .map(|r| match s {
                    ScoreChoice::Vacuity => r.vacuity,
                    ScoreChoice::Dissonance => r.dissonance,
                    _ => r.entropy,
                })
                .collect()
        }
    })
}

/// One metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub in_dataset: String,
    pub out_dataset: String,
    pub model: &'static str,
    pub score: ScoreChoice,
    pub metrics: DetectionMetrics,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.in_dataset,
            r.out_dataset,
            r.model,
            r.score.name(),
            r.metrics.auroc,
            r.metrics.aupr,
            r.metrics.fpr90
        );
    }
    s
}

/// Detection metrics at the 1:5 base rate for every (score, OOD set) pair.
pub fn evaluate_ood(
    enn: &(Model, ModelParams),
    msp: Option<&(Model, ModelParams)>,
    id_test: &(String, Corpus),
    ood: &[(String, Corpus)],
    scores: &[ScoreChoice],
    seed: u64,
) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    let id_inputs = id_test.1.inputs();
    for &score in scores {
        let id_scores = score_inputs(score, enn, msp, &id_inputs)?;
        for (k, (name, set)) in ood.iter().enumerate() {
            let ood_scores = score_inputs(score, enn, msp, &set.inputs())?;
            let mixed = subsample_base_rate(
                &id_scores,
                &ood_scores,
                BaseRate::ONE_TO_FIVE,
                crate::rng::mix(seed, &[k as u64]),
            )?;
            rows.push(MetricsRow {
                in_dataset: id_test.0.clone(),
                out_dataset: name.clone(),
                model: if score == ScoreChoice::Msp {
                    "msp"
                } else {
                    "enn"
                },
                score,
                metrics: detection_metrics(&mixed)?,
            });
        }
    }
    Ok(rows)
}

/// Trains one evidential model per radius and writes FPR90 (with AUROC/AUPR) of the vacuity score.
pub fn delta_sweep(cfg: &RunConfig, data: &Datasets, radii: &[f64]) -> Result<String> {
    let id_test = data
        .id_test
        .as_ref()
        .ok_or_else(|| Error::Config("the sweep needs an ID test set".into()))?;
    let mut s = format!("{SWEEP_HEADER}\n");
    let base = data_training_config(cfg, data)?;
    let id = data.id_train.as_ref().expect("checked above");
    for &delta in radii {
        let tc = TrainingConfig {
            delta_off: delta,
            ..base.clone()
        };
        let t = train(&id.examples, outliers(data), &tc)?;
        let enn = (t.model, t.params);
        let rows = evaluate_ood(
            &enn,
            None,
            id_test,
            &data.ood,
            &[ScoreChoice::Vacuity],
            cfg.seed,
        )?;
        for r in rows {
            let _ = writeln!(
                s,
                "{delta},{},{},{},{},{}",
                r.in_dataset, r.out_dataset, r.metrics.auroc, r.metrics.aupr, r.metrics.fpr90
            );
        }
    }
    Ok(s)
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let data = match cfg.arch {
        ArchChoice::Mlp2d => synthetic_datasets(cfg)?,
        ArchChoice::Gru => text_datasets(cfg, None)?,
    };
    let pair = train_pair(cfg, &data)?;
    save_checkpoint(&cfg.checkpoint, &pair, cfg.seed)?;
    let log_path = cfg.out.join("train_log.csv");
    write_file(&log_path, &pair.enn.log.to_csv())?;
    write_file(&cfg.out.join("baseline_log.csv"), &pair.msp.log.to_csv())?;
    if let Some(last) = pair.enn.log.last() {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        println!(
            "epoch {}: id_loss {:.4} id_vacuity {:.4} oe_vacuity {} ad_vacuity {} id_accuracy {:.4}",
            last.epoch,
            last.id_loss,
            last.id_vacuity,
            fmt(last.oe_vacuity),
            fmt(last.ad_vacuity),
            last.id_accuracy
        );
    }
    if let Some((name, test)) = &data.id_test {
        let e = evaluate_epoch(&pair.enn.model, &pair.enn.params, &test.examples)?;
        println!(
            "{name} test accuracy {:.4}, mean vacuity {:.4}",
            e.accuracy, e.mean_vacuity
        );
    }
    println!("checkpoint: {}", cfg.checkpoint.display());
    println!("log: {}", log_path.display());
    if let Some(radii) = &cfg.sweep {
        let csv = delta_sweep(cfg, &data, radii)?;
        let p = cfg.out.join("delta_sweep.csv");
        write_file(&p, &csv)?;
        print!("{csv}");
        println!("sweep: {}", p.display());
    }
    Ok(())
}

fn eval_datasets(cfg: &RunConfig, loaded: &Loaded) -> Result<Datasets> {
    match loaded.arch {
        ArchChoice::Mlp2d => synthetic_datasets(&RunConfig {
            seed: loaded.data_seed,
            ..cfg.clone()
        }),
        ArchChoice::Gru => {
            let mut c = cfg.clone();
            c.text.max_len = loaded.max_len;
            let v = loaded
                .vocab
                .clone()
                .unwrap_or_else(|| Vocab::from_tokens(Vec::new()));
            text_datasets(&c, Some((v, loaded.class_names.clone())))
        }
    }
}

fn cmd_eval_ood(cfg: &RunConfig) -> Result<()> {
    let loaded = load_checkpoint(&cfg.checkpoint)?;
    if loaded.arch != cfg.arch {
        return Err(Error::Config(format!(
            "checkpoint holds a {:?} model but --arch is {:?}",
            loaded.arch, cfg.arch
        )));
    }
    let data = eval_datasets(cfg, &loaded)?;
    let id_test = data
        .id_test
        .as_ref()
        .ok_or_else(|| Error::Config("missing --id-test".into()))?;
    let rows = evaluate_ood(
        &loaded.enn,
        Some(&loaded.msp),
        id_test,
        &data.ood,
        &cfg.scores,
        cfg.seed,
    )?;
    let csv = metrics_csv(&rows);
    let p = cfg.out.join("ood_metrics.csv");
    write_file(&p, &csv)?;
    print!("{csv}");

    let id_reports = predict_reports(&loaded.enn.0, &loaded.enn.1, &id_test.1.inputs())?;
    let mut ood_reports = Vec::new();
    for (_, set) in &data.ood {
        ood_reports.extend(predict_reports(
            &loaded.enn.0,
            &loaded.enn.1,
            &set.inputs(),
        )?);
    }
    let labels = id_test
        .1
        .labels()
        .ok_or_else(|| Error::domain("ID test set must be labeled"))?;
    let summary = summarize_uncertainty(&id_reports, &labels, &ood_reports)?;
    let sp = cfg.out.join("uncertainty_summary.csv");
    write_file(&sp, &summary.to_csv())?;
    if !summary.omitted.is_empty() {
        println!(
            "summary groups without members: {}",
            summary.omitted.join(", ")
        );
    }
    println!("metrics: {}", p.display());
    println!("summary: {}", sp.display());
    Ok(())
}

fn cmd_map(cfg: &RunConfig) -> Result<()> {
    let loaded = load_checkpoint(&cfg.checkpoint)?;
    if loaded.arch != ArchChoice::Mlp2d {
        return Err(Error::Config("map needs a 2-D (mlp2d) checkpoint".into()));
    }
    let grid = uncertainty_grid(&loaded.enn.0, &loaded.enn.1, &cfg.grid)?;
    let p = cfg.out.join("uncertainty_grid.csv");
    if let Some(dir) = p.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_grid_csv(&p, &grid)?;
    println!("{} grid points written to {}", grid.len(), p.display());
    Ok(())
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cfg = match RunConfig::resolve(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let result = match &cli.command {
        Command::Train(_) => cmd_train(&cfg),
        Command::EvalOod(_) => cmd_eval_ood(&cfg),
        Command::Map(_) => cmd_map(&cfg),
        Command::Selfcheck(_) => match run_selfcheck(&cfg.selfcheck) {
            Ok(results) => {
                print!("{}", format_report(&results));
                return if results.iter().all(|r| r.passed) {
                    EXIT_OK
                } else {
                    EXIT_CHECK_FAILED
                };
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `args` (including the program name) and runs; clap errors map to the validation code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_VALIDATION,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("evood").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn precedence_cli_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        std::fs::write(
            &file,
            "# comment\nlr = 0.5\nepochs=7\nbeta-oe = 0.25\nood = a.jsonl\nood = b.jsonl\n",
        )
        .unwrap();
        let cli = parse(&["train", "--config", file.to_str().unwrap(), "--epochs", "3"]);
        let cfg = RunConfig::resolve(&cli.command).unwrap();
        assert_eq!(cfg.training.epochs, 3);
        assert_eq!(cfg.training.lr, 0.5);
        assert_eq!(cfg.training.betas.beta_oe, 0.25);
        assert_eq!(cfg.training.betas.beta_in, 0.01);
        assert_eq!(
            cfg.ood,
            vec![PathBuf::from("a.jsonl"), PathBuf::from("b.jsonl")]
        );
    }

    #[test]
    fn unknown_keys_and_bad_values_are_validation_errors() {
        let s = Settings::parse("learning_rate = 1\n", Path::new("x.conf"));
        assert!(matches!(&s, Err(Error::Config(m)) if m.contains("x.conf:1")));
        let mut s = Settings::default();
        s.set("lr", "fast").unwrap();
        let e = RunConfig::from_settings("train", &s, None).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_VALIDATION);
    }

    #[test]
    fn missing_outlier_corpus_is_reported() {
        let cli = parse(&["train", "--arch", "gru", "--id-train", "t.jsonl"]);
        match RunConfig::resolve(&cli.command) {
            Err(Error::Config(m)) => assert!(m.contains("--oe")),
            other => panic!("{other:?}"),
        }
        let ok = parse(&[
            "train",
            "--arch",
            "gru",
            "--id-train",
            "t.jsonl",
            "--beta-oe",
            "0",
        ]);
        assert!(RunConfig::resolve(&ok.command).is_ok());
    }

    #[test]
    fn sweep_and_scores_parse() {
        assert_eq!(
            parse_sweep("0.001, 0.01,0.1,1").unwrap(),
            vec![0.001, 0.01, 0.1, 1.0]
        );
        assert!(parse_sweep("0.1,-1").is_err());
        let cli = parse(&["eval-ood", "--score", "msp"]);
        assert_eq!(
            RunConfig::resolve(&cli.command).unwrap().scores,
            vec![ScoreChoice::Msp]
        );
        assert_eq!(ScoreChoice::All.expand().len(), 4);
    }

    #[test]
    fn bad_flags_exit_with_validation_code() {
        assert_eq!(
            main_with_args(["evood", "train", "--arch", "cnn"]),
            EXIT_VALIDATION
        );
        assert_eq!(
            main_with_args(["evood", "map", "--arch", "gru"]),
            EXIT_VALIDATION
        );
    }
}
