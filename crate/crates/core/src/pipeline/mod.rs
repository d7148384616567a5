//! End-to-end orchestration: configuration, stage graph, manifests and
//! the artifacts each stage leaves in the work directory.

mod manifest;
mod stages;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::KMeansConfig;
use crate::coherence::CoherenceConfig;
use crate::corpus::FieldMap;
use crate::embed::EmbedConfig;
use crate::eval::SourceModel;
use crate::lda::LdaConfig;
use crate::project::ProjectionConfig;
use crate::synthgen::PlantedSpec;

pub use manifest::{sha256_file, Manifest};
pub use stages::{synth, Runner, StageOutcome};

/// Failure of a pipeline command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage {stage} needs the output of {needed}; run `topicflow {needed}` first")]
    MissingDependency { stage: Stage, needed: Stage },

    #[error(transparent)]
    Runtime(#[from] crate::Error),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::MissingDependency { .. } => 2,
            PipelineError::Runtime(_) => 3,
        }
    }
}

pub type PipelineResult<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Sweep,
    Lda,
    Embed,
    Cluster,
    Project,
    Label,
    TrainClf,
    Eval,
    Engagement,
    Plot,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Sweep,
        Stage::Lda,
        Stage::Embed,
        Stage::Cluster,
        Stage::Project,
        Stage::Label,
        Stage::TrainClf,
        Stage::Eval,
        Stage::Engagement,
        Stage::Plot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Sweep => "sweep",
            Stage::Lda => "lda",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Project => "project",
            Stage::Label => "label",
            Stage::TrainClf => "train-clf",
            Stage::Eval => "eval",
            Stage::Engagement => "engagement",
            Stage::Plot => "plot",
        }
    }

    /// Stages run by `all`, in order, for one pipeline.
    pub fn sequence(pipeline: SourceModel) -> Vec<Stage> {
        let model: &[Stage] = match pipeline {
            SourceModel::Lda => &[Stage::Lda, Stage::Sweep],
            SourceModel::EmbedKMeans => &[Stage::Embed, Stage::Cluster],
        };
        let mut out = vec![Stage::Ingest];
        out.extend_from_slice(model);
        out.extend([
            Stage::Project,
            Stage::Label,
            Stage::TrainClf,
            Stage::Eval,
            Stage::Engagement,
            Stage::Plot,
        ]);
        out
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

pub fn parse_pipeline(s: &str) -> Result<SourceModel, String> {
    match s {
        "lda" => Ok(SourceModel::Lda),
        "embed" => Ok(SourceModel::EmbedKMeans),
        other => Err(format!("unknown pipeline {other:?}; expected lda or embed")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub work_dir: PathBuf,
    pub lemma_table: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: None,
            work_dir: PathBuf::from("work"),
            lemma_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub min_token_len: usize,
    pub keep_emoji: bool,
    pub min_df: u64,
    /// Run replies through the same normalisation as news posts; otherwise
    /// they are only lowercased and split on whitespace.
    pub replies: bool,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            min_token_len: 2,
            keep_emoji: false,
            min_df: 1,
            replies: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub k_min: usize,
    pub k_max: usize,
    pub k_step: usize,
    pub runs: usize,
    pub top_n: usize,
    pub window: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        let c = CoherenceConfig::default();
        SweepSection {
            k_min: 2,
            k_max: 12,
            k_step: 1,
            runs: 5,
            top_n: c.top_n,
            window: c.window,
        }
    }
}

impl SweepSection {
    pub fn candidates(&self) -> Vec<usize> {
        (self.k_min..=self.k_max).step_by(self.k_step.max(1)).collect()
    }

    pub fn coherence(&self) -> CoherenceConfig {
        CoherenceConfig {
            top_n: self.top_n,
            window: self.window,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectSection {
    /// LDA: minimum top-topic probability of a representative post.
    pub lda_threshold: f64,
    /// k-means: per-cluster distance quantile of representative posts.
    pub rep_percentile: f64,
}

impl Default for SelectSection {
    fn default() -> Self {
        SelectSection {
            lda_threshold: 0.8,
            rep_percentile: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub test_fraction: f64,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            test_fraction: 0.2,
            k_max: 10,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSection {
    pub width: f64,
    pub height: f64,
}

impl Default for PlotSection {
    fn default() -> Self {
        PlotSection {
            width: 800.0,
            height: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub pipeline: SourceModel,
    /// Upper bound on worker threads for every stage.
    pub threads: usize,
    pub paths: Paths,
    pub fields: FieldMap,
    pub preprocess: PreprocessSection,
    pub lda: LdaConfig,
    pub sweep: SweepSection,
    pub embed: EmbedConfig,
    pub kmeans: KMeansConfig,
    pub select: SelectSection,
    pub projection: ProjectionConfig,
    /// Supervised reply classifier.
    pub classifier: EmbedConfig,
    pub eval: EvalSection,
    pub plot: PlotSection,
    pub synth: PlantedSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pipeline: SourceModel::Lda,
            threads: 1,
            paths: Paths::default(),
            fields: FieldMap::default(),
            preprocess: PreprocessSection::default(),
            lda: LdaConfig::default(),
            sweep: SweepSection::default(),
            embed: EmbedConfig::default(),
            kmeans: KMeansConfig::default(),
            select: SelectSection::default(),
            projection: ProjectionConfig::default(),
            classifier: EmbedConfig::default(),
            eval: EvalSection::default(),
            plot: PlotSection::default(),
            synth: PlantedSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> PipelineResult<Self> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> PipelineResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Sets the seed of every randomised stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.lda.seed = seed;
        self.embed.seed = seed;
        self.kmeans.seed = seed;
        self.projection.seed = seed;
        self.classifier.seed = seed;
        self.eval.seed = seed;
    }

    pub fn validate(&self) -> PipelineResult<()> {
        let bad = |section: &str, e: crate::Error| PipelineError::Config(format!("[{section}] {e}"));
        if self.threads == 0 {
            return Err(PipelineError::Config("threads must be >= 1".into()));
        }
        if self.preprocess.min_token_len == 0 || self.preprocess.min_df == 0 {
            return Err(PipelineError::Config(
                "[preprocess] min_token_len and min_df must be >= 1".into(),
            ));
        }
        self.lda.validate().map_err(|e| bad("lda", e))?;
        self.embed.validate().map_err(|e| bad("embed", e))?;
        self.classifier.validate().map_err(|e| bad("classifier", e))?;
        self.kmeans.validate().map_err(|e| bad("kmeans", e))?;
        self.projection.validate().map_err(|e| bad("projection", e))?;
        self.sweep.coherence().validate().map_err(|e| bad("sweep", e))?;
        if self.sweep.runs == 0 || self.sweep.k_step == 0 || self.sweep.k_min < 2 || self.sweep.k_min > self.sweep.k_max
        {
            return Err(PipelineError::Config(
                "[sweep] needs runs >= 1, k_step >= 1 and 2 <= k_min <= k_max".into(),
            ));
        }
        let s = &self.select;
        if !(s.lda_threshold > 0.0 && s.lda_threshold <= 1.0) || !(s.rep_percentile > 0.0 && s.rep_percentile <= 1.0) {
            return Err(PipelineError::Config(
                "[select] lda_threshold and rep_percentile must lie in (0, 1]".into(),
            ));
        }
        if !(self.eval.test_fraction > 0.0 && self.eval.test_fraction < 1.0) || self.eval.k_max == 0 {
            return Err(PipelineError::Config(
                "[eval] needs 0 < test_fraction < 1 and k_max >= 1".into(),
            ));
        }
        if !(self.plot.width > 0.0 && self.plot.height > 0.0) {
            return Err(PipelineError::Config("[plot] width and height must be positive".into()));
        }
        self.synth.validate().map_err(|e| bad("synth", e))?;
        Ok(())
    }

    /// Number of topics the selected pipeline produces.
    pub fn num_topics(&self) -> usize {
        match self.pipeline {
            SourceModel::Lda => self.lda.k,
            SourceModel::EmbedKMeans => self.kmeans.k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn sections_parse() {
        let cfg = PipelineConfig::from_toml(
            "pipeline = \"embed\"\nthreads = 2\n[paths]\ncorpus = \"posts.jsonl\"\n[lda]\nk = 5\n[kmeans]\nk = 7\nrestarts = 3\n[sweep]\nk_max = 6\n",
        )
        .unwrap();
        assert_eq!(cfg.pipeline, SourceModel::EmbedKMeans);
        assert_eq!(cfg.lda.k, 5);
        assert_eq!(cfg.kmeans.restarts, 3);
        assert_eq!(cfg.num_topics(), 7);
        assert_eq!(cfg.sweep.candidates(), vec![2, 3, 4, 5, 6]);
        assert_eq!(cfg.paths.corpus.as_deref(), Some(Path::new("posts.jsonl")));
    }

    #[test]
    fn errors_name_the_field() {
        let e = PipelineConfig::from_toml("[lda]\nkk = 5\n").unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("kk"), "{e}");
        let e = PipelineConfig::from_toml("[lda]\nk = \"five\"\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let mut cfg = PipelineConfig::default();
        cfg.eval.test_fraction = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert_eq!(
            Stage::sequence(SourceModel::EmbedKMeans)[1..3],
            [Stage::Embed, Stage::Cluster]
        );
    }
}
