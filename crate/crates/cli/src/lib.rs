//! `plurisem` command-line front end: argument parsing, config resolution,
//! run directories and exit codes. The commands themselves live in
//! [`commands`].

pub mod commands;
pub mod config;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use plurisem_core::conceptualizer::Method;
use plurisem_core::isomorphy::StudyMode;

use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Bad flags, config or input data; exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "plurisem", version, about = "Singular/plural semantics from word embeddings and audio")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone, Default)]
pub struct LexiconArgs {
    /// Manifest directory (types.csv, tokens.csv).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Text embedding file.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Embedding dimension (read from the file when omitted).
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cca,
    Fracss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Phone,
    Audio,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract C-FBSF feature vectors for every token of a manifest.
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Predict plural vectors from singulars and report residual norms.
    Conceptualize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        lexicon: LexiconArgs,
        /// Repeat for several methods (default: both).
        #[arg(long, value_enum)]
        method: Vec<MethodArg>,
    },
    /// Cross-validated form-to-meaning mappings against each gold space.
    Cv {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        lexicon: LexiconArgs,
        /// Feature cache written by `extract`.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// Folds to run, numbered from 1 (default: all).
        #[arg(long, value_delimiter = ',')]
        folds: Vec<usize>,
    },
    /// Correlate form distances with semantic distances.
    DistanceStudy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        lexicon: LexiconArgs,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Feature cache (audio mode).
        #[arg(long)]
        features: Option<PathBuf>,
        /// Sampling trials (audio mode).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Generate a synthetic corpus.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Synthetic corpus spec as JSON (as written by a previous run).
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Write per-lexeme shift vectors and class means as CSV.
    ExportShifts {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        lexicon: LexiconArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Extract { .. } => "extract",
            Command::Conceptualize { .. } => "conceptualize",
            Command::Cv { .. } => "cv",
            Command::DistanceStudy { .. } => "distance-study",
            Command::Synth { .. } => "synth",
            Command::ExportShifts { .. } => "export-shifts",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Extract { common, .. }
            | Command::Conceptualize { common, .. }
            | Command::Cv { common, .. }
            | Command::DistanceStudy { common, .. }
            | Command::Synth { common, .. }
            | Command::ExportShifts { common, .. } => common,
        }
    }
}

fn set_path(target: &mut PathBuf, flag: &Option<PathBuf>) {
    if let Some(p) = flag {
        *target = p.clone();
    }
}

fn apply_lexicon(target: &mut config::LexiconInput, args: &LexiconArgs) {
    set_path(&mut target.manifest, &args.manifest);
    set_path(&mut target.embeddings, &args.embeddings);
    if args.dim.is_some() {
        target.embedding_dim = args.dim;
    }
}

/// Merges flags into the config and pushes the master seed down into the
/// command's components.
pub fn resolve(cmd: &Command, mut cfg: RunConfig) -> anyhow::Result<RunConfig> {
    let common = cmd.common();
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    if cfg.run_id.is_empty() {
        cfg.run_id = cmd.name().to_string();
    }
    match cmd {
        Command::Extract { manifest, .. } => {
            set_path(&mut cfg.extract.manifest, manifest);
            if let Some(s) = cfg.seed {
                cfg.extract.cfbsf.seed = s;
            }
        }
        Command::Conceptualize { lexicon, method, .. } => {
            apply_lexicon(&mut cfg.conceptualize.input, lexicon);
            if !method.is_empty() {
                cfg.conceptualize.methods = method
                    .iter()
                    .map(|m| match m {
                        MethodArg::Cca => Method::Cca,
                        MethodArg::Fracss => Method::Fracss,
                    })
                    .collect();
            }
        }
        Command::Cv {
            lexicon,
            features,
            k,
            folds,
            ..
        } => {
            apply_lexicon(&mut cfg.cv.input, lexicon);
            set_path(&mut cfg.cv.features, features);
            if let Some(k) = k {
                cfg.cv.cv.k = *k;
            }
            if !folds.is_empty() {
                if folds.contains(&0) {
                    return Err(UsageError("folds are numbered from 1".into()).into());
                }
                cfg.cv.cv.folds = folds.iter().map(|f| f - 1).collect();
            }
            if let Some(s) = cfg.seed {
                cfg.cv.cv.seed = s;
            }
        }
        Command::DistanceStudy {
            lexicon,
            mode,
            features,
            trials,
            ..
        } => {
            let d = &mut cfg.distance_study;
            apply_lexicon(&mut d.input, lexicon);
            set_path(&mut d.features, features);
            if let Some(m) = mode {
                d.mode = match m {
                    ModeArg::Phone => StudyMode::Phone,
                    ModeArg::Audio => StudyMode::Audio,
                };
            }
            if let Some(t) = trials {
                d.audio.n_trials = *t;
            }
            if let Some(s) = cfg.seed {
                d.phone.seed = s;
                d.audio.seed = s;
            }
        }
        Command::Synth { spec, .. } => {
            if let Some(p) = spec {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("cannot read spec {}: {e}", p.display())))?;
                cfg.synth = serde_json::from_str(&text)
                    .map_err(|e| UsageError(format!("invalid spec {}: {e}", p.display())))?;
            }
            if let Some(s) = cfg.seed {
                cfg.synth.seed = s;
            }
        }
        Command::ExportShifts { lexicon, .. } => apply_lexicon(&mut cfg.export_shifts.input, lexicon),
    }
    Ok(cfg)
}

fn write_provenance(out: &Path, cmd: &Command, cfg: &RunConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(config::CONFIG_FILE), cfg.to_toml()?)?;
    let prov = config::Provenance {
        tool: "plurisem".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: cmd.name().to_string(),
        run_id: cfg.run_id.clone(),
    };
    std::fs::write(
        out.join(config::PROVENANCE_FILE),
        serde_json::to_string_pretty(&prov)? + "\n",
    )?;
    Ok(())
}

/// Resolves the configuration, records it in the run directory and runs the
/// command.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cmd = cli.command;
    let common = cmd.common().clone();
    let base = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = resolve(&cmd, base)?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(UsageError("--threads must be positive".into()).into());
        }
        // Fails only if a pool already exists, e.g. when called twice in-process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    write_provenance(&common.out, &cmd, &cfg)?;
    let out = common.out.as_path();
    match cmd {
        Command::Extract { .. } => commands::extract(&cfg.extract, out),
        Command::Conceptualize { .. } => commands::conceptualize(&cfg.conceptualize, out),
        Command::Cv { .. } => commands::cv(&cfg.cv, out),
        Command::DistanceStudy { .. } => commands::distance_study(&cfg.distance_study, out),
        Command::Synth { .. } => commands::synth(&cfg.synth, out),
        Command::ExportShifts { .. } => commands::export_shifts(&cfg.export_shifts, out),
    }
}

/// Exit code for a failed run: 2 for bad input or configuration, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_INPUT;
        }
        if let Some(e) = cause.downcast_ref::<plurisem_core::Error>() {
            return match e {
                plurisem_core::Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_INPUT,
                e if e.is_input_error() => EXIT_INPUT,
                _ => EXIT_INTERNAL,
            };
        }
    }
    EXIT_INTERNAL
}

/// Short machine-readable name of the error.
pub fn error_kind(err: &anyhow::Error) -> String {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return "InvalidConfig".into();
        }
        if let Some(e) = cause.downcast_ref::<plurisem_core::Error>() {
            let dbg = format!("{e:?}");
            return dbg
                .split(|c: char| !c.is_alphanumeric())
                .next()
                .unwrap_or("Error")
                .to_string();
        }
    }
    "Internal".into()
}

/// One JSON object on a single line, for standard error.
pub fn error_report(err: &anyhow::Error) -> String {
    let mut message: Vec<String> = Vec::new();
    for cause in err.chain() {
        let text = cause.to_string();
        // thiserror messages often embed their source already.
        if !message.last().is_some_and(|m| m.contains(&text)) {
            message.push(text);
        }
    }
    serde_json::json!({
        "error": error_kind(err),
        "message": message.join(": "),
        "exit_code": exit_code(err),
    })
    .to_string()
}
