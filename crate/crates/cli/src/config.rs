//! Declarative run configuration. One TOML file may hold a table per
//! subcommand; flags given on the command line override it.

use std::path::{Path, PathBuf};

use anyhow::Context;
use plurisem_core::cfbsf::CfbsfConfig;
use plurisem_core::conceptualizer::Method;
use plurisem_core::isomorphy::{AudioStudyConfig, PhoneStudyConfig, StudyMode};
use plurisem_core::synth::SynthSpec;
use plurisem_core::xval::{CvConfig, GoldSpaceName};
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const CONFIG_FILE: &str = "config.toml";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    /// Master seed; when set it replaces the seed of every component the
    /// command runs.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub extract: ExtractConfig,
    pub conceptualize: ConceptualizeConfig,
    pub cv: CvCommandConfig,
    pub distance_study: DistanceStudyConfig,
    pub synth: SynthSpec,
    pub export_shifts: ExportShiftsConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub manifest: PathBuf,
    pub cfbsf: CfbsfConfig,
}

/// Where the lexicon and its vectors come from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconInput {
    pub manifest: PathBuf,
    pub embeddings: PathBuf,
    /// Read from the file when unset.
    pub embedding_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConceptualizeConfig {
    pub input: LexiconInput,
    pub methods: Vec<Method>,
    pub fracss_ridge: f64,
}

impl Default for ConceptualizeConfig {
    fn default() -> Self {
        ConceptualizeConfig {
            input: LexiconInput::default(),
            methods: vec![Method::Cca, Method::Fracss],
            fracss_ridge: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvCommandConfig {
    pub input: LexiconInput,
    pub features: PathBuf,
    pub cv: CvConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceStudyConfig {
    pub input: LexiconInput,
    pub mode: StudyMode,
    /// Feature cache; audio mode only.
    pub features: PathBuf,
    pub spaces: Vec<GoldSpaceName>,
    pub fracss_ridge: f64,
    pub phone: PhoneStudyConfig,
    pub audio: AudioStudyConfig,
}

impl Default for DistanceStudyConfig {
    fn default() -> Self {
        DistanceStudyConfig {
            input: LexiconInput::default(),
            mode: StudyMode::Phone,
            features: PathBuf::new(),
            spaces: GoldSpaceName::ALL.to_vec(),
            fracss_ridge: 0.0,
            phone: PhoneStudyConfig::default(),
            audio: AudioStudyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportShiftsConfig {
    pub input: LexiconInput,
}

/// Tool identity written next to every resolved config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub run_id: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        if let Some(s) = self.seed {
            if s > i64::MAX as u64 {
                return Err(UsageError(format!("seed {s} exceeds {}", i64::MAX)).into());
            }
        }
        toml::to_string_pretty(self).context("serializing resolved config")
    }
}

pub fn require_path(p: &Path, what: &str) -> anyhow::Result<()> {
    if p.as_os_str().is_empty() {
        Err(UsageError(format!("no {what} given (flag or config)")).into())
    } else {
        Ok(())
    }
}
