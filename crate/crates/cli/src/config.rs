//! Declarative pipeline configuration. One TOML file, then `VTV_*`
//! environment variables, then flags; later sources win.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tractvar_core::inversion::{ModelConfig, TrainConfig};
use tractvar_core::ratings::MajorityRule;
use tractvar_core::synth::{CorpusSpec, SynthSpec};
use tractvar_core::Target;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationChoice {
    #[default]
    Articulatory,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub pellets: Option<PathBuf>,
    pub palate: Option<PathBuf>,
    /// Tract-variable CSVs of one speaker, for `normalize`.
    pub tv: Vec<PathBuf>,
    /// Directory of `<file_id>.csv` tract-variable files, for `extract`.
    pub tv_dir: Option<PathBuf>,
    /// A fitted range to apply instead of fitting one.
    pub range: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub embeddings: Vec<PathBuf>,
    pub model: Option<PathBuf>,
    pub alignment: Option<PathBuf>,
    /// `file_id,speaker_id,utterance_id`.
    pub files: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub consensus: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub service: Option<PathBuf>,
    pub audio_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub min_count: usize,
    pub alpha: f64,
    pub majority: MajorityRule,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            min_count: 15,
            alpha: 0.05,
            majority: MajorityRule::Strict,
        }
    }
}

/// Named seeds; unset ones fall back to the top-level seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub synth: Option<u64>,
    pub corpus: Option<u64>,
    pub train: Option<u64>,
    pub service: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub spec: SynthSpec,
    pub corpus: CorpusSpec,
    pub training_pairs: usize,
    /// Pool size of the demo rating-service config.
    pub service_pool: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            spec: SynthSpec::default(),
            corpus: CorpusSpec::default(),
            training_pairs: 8,
            service_pool: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub bind: String,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub target: Target,
    pub out: PathBuf,
    pub format: Format,
    pub orientation: OrientationChoice,
    pub paths: Paths,
    pub thresholds: Thresholds,
    pub seeds: Seeds,
    pub train: TrainConfig,
    /// Network shape; the full network sized to the embeddings when unset.
    pub model: Option<ModelConfig>,
    pub synth: SynthSection,
    pub serve: ServeSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            target: Target::R,
            out: PathBuf::from("out"),
            format: Format::Csv,
            orientation: OrientationChoice::Articulatory,
            paths: Paths::default(),
            thresholds: Thresholds::default(),
            seeds: Seeds::default(),
            train: TrainConfig::default(),
            model: None,
            synth: SynthSection::default(),
            serve: ServeSection::default(),
        }
    }
}

/// Values given on the command line or through `VTV_*`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub target: Option<Target>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl PipelineConfig {
    /// Reads the file (if any), resolves its relative paths against the
    /// file's directory and applies overrides.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            None => PipelineConfig::default(),
            Some(p) => {
                exists(p)?;
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                let mut cfg: PipelineConfig = toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new("."));
                cfg.resolve(base);
                cfg
            }
        };
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if let Some(t) = ov.target {
            cfg.target = t;
        }
        if let Some(o) = &ov.out {
            cfg.out = o.clone();
        }
        if let Some(f) = ov.format {
            cfg.format = f;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        let p = &mut self.paths;
        for opt in [
            &mut p.pellets,
            &mut p.palate,
            &mut p.tv_dir,
            &mut p.range,
            &mut p.manifest,
            &mut p.model,
            &mut p.alignment,
            &mut p.files,
            &mut p.ratings,
            &mut p.consensus,
            &mut p.observations,
            &mut p.service,
            &mut p.audio_dir,
        ] {
            if let Some(x) = opt.as_mut() {
                fix(x);
            }
        }
        p.tv.iter_mut().for_each(fix);
        p.embeddings.iter_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.thresholds;
        if t.min_count == 0 {
            return Err(CliError::Config(
                "thresholds.min_count must be positive".into(),
            ));
        }
        if !(t.alpha > 0.0 && t.alpha < 1.0) {
            return Err(CliError::Config(format!(
                "thresholds.alpha {} outside (0, 1)",
                t.alpha
            )));
        }
        self.train
            .validate()
            .map_err(|e| CliError::Config(format!("train: {e}")))?;
        if let Some(m) = &self.model {
            m.validate()
                .map_err(|e| CliError::Config(format!("model: {e}")))?;
        }
        self.synth
            .spec
            .validate()
            .map_err(|e| CliError::Config(format!("synth.spec: {e}")))?;
        Ok(())
    }

    pub fn synth_seed(&self) -> u64 {
        self.seeds.synth.unwrap_or(self.seed)
    }

    pub fn corpus_seed(&self) -> u64 {
        self.seeds.corpus.unwrap_or(self.seed)
    }

    pub fn train_seed(&self) -> u64 {
        self.seeds.train.unwrap_or(self.seed)
    }

    pub fn service_seed(&self) -> u64 {
        self.seeds.service.unwrap_or(self.seed)
    }
}

/// Returns the path of a required input, checking that it exists.
pub fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    let p = p
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("paths.{key} is required")))?;
    exists(p)?;
    Ok(p)
}

pub fn exists(p: &Path) -> Result<(), CliError> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(p.to_path_buf()))
    }
}
