use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{sha256_file, Manifest};
use super::{PipelineConfig, PipelineError, PipelineResult, Stage};
use crate::cluster;
use crate::coherence::{self, SweepReport};
use crate::corpus::{
    build_corpus, load_corpus, load_lemma_table, write_records, FieldMap, PostKind, PostRecord, PreprocessConfig,
    TokenizedCorpus,
};
use crate::embed::{self, ClassifierModel, EmbeddingModel};
use crate::error::{Error, Result};
use crate::eval::{self, EngagementReport, LabeledComment, PrAtKReport, SourceModel};
use crate::lda;
use crate::project;
use crate::synthgen::{self, PlantedSpec};
use crate::viz::{self, BarMode, PlotSpec, PALETTE};

const CORPUS: &str = "corpus.tfcorp";
const POSTS: &str = "posts.jsonl";
const INGEST_REPORT: &str = "ingest.json";
const LDA_MODEL: &str = "lda.model";
const DOC_TOPICS: &str = "doc-topics.csv";
const SWEEP_CSV: &str = "sweep.csv";
const SWEEP_JSON: &str = "sweep.json";
const EMBEDDING: &str = "embedding.tfvec";
const KMEANS: &str = "kmeans.model";
const ASSIGNMENTS: &str = "assignments.csv";
const PROJECTION: &str = "projection.csv";
const LABELED: &str = "labeled.jsonl";
const LABEL_REPORT: &str = "label.json";
const CLASSIFIER: &str = "classifier.tfcls";
const TEST_SET: &str = "test.jsonl";
const TRAIN_REPORT: &str = "train-clf.json";
const PR_CSV: &str = "pr-at-k.csv";
const PR_JSON: &str = "pr-at-k.json";
const ENGAGEMENT_CSV: &str = "engagement.csv";
const ENGAGEMENT_JSON: &str = "engagement.json";
const SVG_SWEEP: &str = "sweep-coherence.svg";
const SVG_MAP: &str = "project-topic-map.svg";
const SVG_PR: &str = "eval-pr-at-k.svg";
const SVG_TOTALS: &str = "engagement-totals.svg";
const SVG_MEANS: &str = "engagement-means.svg";
const MANIFEST_DIR: &str = "manifests";

const TOP_WORDS: usize = 10;
const ANNOTATION_WORDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    Skipped,
}

/// Held-out P/R@k together with the protocol that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PrFile {
    protocol: String,
    test_fraction: f64,
    split_seed: u64,
    report: PrAtKReport,
}

struct Plan {
    inputs: Vec<(String, PathBuf)>,
    config: serde_json::Value,
    seed: Option<u64>,
}

fn topics_file(p: SourceModel) -> &'static str {
    match p {
        SourceModel::Lda => "topics-lda.csv",
        SourceModel::EmbedKMeans => "topics-embed.csv",
    }
}

fn top_words_file(p: SourceModel) -> &'static str {
    match p {
        SourceModel::Lda => "top-words-lda.csv",
        SourceModel::EmbedKMeans => "top-words-embed.csv",
    }
}

fn topic_stage(p: SourceModel) -> Stage {
    match p {
        SourceModel::Lda => Stage::Lda,
        SourceModel::EmbedKMeans => Stage::Cluster,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Rows of a CSV whose first column is a free-form id and whose remaining
/// `cols - 1` columns never contain commas.
fn read_id_rows(path: &Path, cols: usize) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let mut fields: Vec<String> = line.rsplitn(cols, ',').map(str::to_string).collect();
        if fields.len() != cols {
            return Err(Error::format(
                path,
                format!("line {} has fewer than {cols} columns", i + 1),
            ));
        }
        fields.reverse();
        rows.push(fields);
    }
    Ok(rows)
}

fn parse<T: std::str::FromStr>(path: &Path, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::format(path, format!("cannot parse {field:?}")))
}

/// (doc id, topic, representative) in corpus order.
fn read_topics(path: &Path) -> Result<Vec<(String, usize, bool)>> {
    read_id_rows(path, 3)?
        .into_iter()
        .map(|r| Ok((r[0].clone(), parse(path, &r[1])?, parse(path, &r[2])?)))
        .collect()
}

fn read_doc_topics(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cols = text.lines().next().map_or(0, |h| h.split(',').count());
    read_id_rows(path, cols)?
        .into_iter()
        .map(|r| r[1..].iter().map(|v| parse(path, v)).collect())
        .collect()
}

/// Topic to its top words, in rank order.
fn read_top_words(path: &Path) -> Result<BTreeMap<usize, Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::format(path, format!("bad row {line:?}")));
        }
        out.entry(parse(path, f[0])?).or_default().push(f[2].to_string());
    }
    Ok(out)
}

fn doc_vectors(model: &EmbeddingModel, corpus: &TokenizedCorpus) -> Vec<Vec<f64>> {
    (0..corpus.len())
        .map(|d| model.doc_vector(&corpus.doc_words(d)).values)
        .collect()
}

/// The default palette, extended with evenly spread hues when there are
/// more than 12 topics.
fn palette_for(n: usize) -> Vec<String> {
    let mut p: Vec<String> = PALETTE.iter().map(|c| c.to_string()).collect();
    let extra = n.saturating_sub(p.len());
    for i in 0..extra {
        let hue = 360.0 * i as f64 / extra as f64;
        p.push(format!("hsl({hue:.0},55%,45%)"));
    }
    p
}

/// Executes stages against one work directory.
pub struct Runner {
    cfg: PipelineConfig,
    work: PathBuf,
}

impl Runner {
    pub fn new(cfg: PipelineConfig) -> PipelineResult<Self> {
        cfg.validate()?;
        let work = cfg.paths.work_dir.clone();
        std::fs::create_dir_all(work.join(MANIFEST_DIR)).map_err(|e| Error::io(&work, e))?;
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            log::debug!("global thread pool already configured: {e}");
        }
        Ok(Runner { cfg, work })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn work_dir(&self) -> &Path {
        &self.work
    }

    fn w(&self, name: &str) -> PathBuf {
        self.work.join(name)
    }

    fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.work.join(MANIFEST_DIR).join(format!("{stage}.json"))
    }

    /// Runs `stage` unless its manifest shows identical config, inputs and
    /// intact outputs.
    pub fn run(&self, stage: Stage) -> PipelineResult<StageOutcome> {
        let plan = self.plan(stage)?;
        let mut inputs = BTreeMap::new();
        for (name, path) in &plan.inputs {
            inputs.insert(name.clone(), sha256_file(path)?);
        }
        let mut manifest = Manifest {
            stage: stage.name().into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: plan.seed,
            config: plan.config,
            inputs,
            outputs: BTreeMap::new(),
        };
        let path = self.manifest_path(stage);
        if let Some(prev) = Manifest::load(&path)? {
            if prev.same_plan(&manifest) && prev.outputs_intact(&self.work)? {
                info!("[{stage}] inputs and config unchanged; skipped");
                return Ok(StageOutcome::Skipped);
            }
        }
        let outputs = self.execute(stage)?;
        for name in outputs {
            manifest.outputs.insert(name.clone(), sha256_file(&self.w(&name))?);
        }
        manifest.save(&path)?;
        Ok(StageOutcome::Ran)
    }

    /// Every stage of the configured pipeline, in order.
    pub fn run_all(&self) -> PipelineResult<Vec<(Stage, StageOutcome)>> {
        let mut out = Vec::new();
        for stage in Stage::sequence(self.cfg.pipeline) {
            out.push((stage, self.run(stage)?));
        }
        Ok(out)
    }

    fn need(&self, stage: Stage, file: &str, producer: Stage) -> PipelineResult<(String, PathBuf)> {
        let path = self.w(file);
        if !path.exists() {
            return Err(PipelineError::MissingDependency {
                stage,
                needed: producer,
            });
        }
        Ok((file.to_string(), path))
    }

    fn preprocess_config(&self) -> Result<PreprocessConfig> {
        let lemma_table = match &self.cfg.paths.lemma_table {
            Some(p) => Some(load_lemma_table(p)?),
            None => None,
        };
        Ok(PreprocessConfig {
            lemma_table,
            min_token_len: self.cfg.preprocess.min_token_len,
            keep_emoji: self.cfg.preprocess.keep_emoji,
        })
    }

    fn lemma_input(&self) -> PipelineResult<Option<(String, PathBuf)>> {
        match &self.cfg.paths.lemma_table {
            Some(p) if !p.exists() => Err(PipelineError::Config(format!(
                "lemma table {} does not exist",
                p.display()
            ))),
            Some(p) => Ok(Some(("lemma_table".into(), p.clone()))),
            None => Ok(None),
        }
    }

    fn embed_config(&self) -> embed::EmbedConfig {
        let mut e = self.cfg.embed.clone();
        e.threads = e.threads.min(self.cfg.threads);
        e
    }

    fn plan(&self, stage: Stage) -> PipelineResult<Plan> {
        let c = &self.cfg;
        let pipeline = c.pipeline;
        let topics = || self.need(stage, topics_file(pipeline), topic_stage(pipeline));
        let plan = match stage {
            Stage::Ingest => {
                let corpus = c.paths.corpus.clone().ok_or_else(|| {
                    PipelineError::Config("paths.corpus is not set (use --corpus or [paths] corpus)".into())
                })?;
                if !corpus.exists() {
                    return Err(PipelineError::Config(format!(
                        "corpus file {} does not exist",
                        corpus.display()
                    )));
                }
                let mut inputs = vec![("corpus".to_string(), corpus)];
                inputs.extend(self.lemma_input()?);
                Plan {
                    inputs,
                    config: json!({"fields": c.fields, "preprocess": c.preprocess}),
                    seed: None,
                }
            }
            Stage::Lda => Plan {
                inputs: vec![self.need(stage, CORPUS, Stage::Ingest)?],
                config: json!({"lda": c.lda, "lda_threshold": c.select.lda_threshold}),
                seed: Some(c.lda.seed),
            },
            Stage::Sweep => Plan {
                inputs: vec![self.need(stage, CORPUS, Stage::Ingest)?],
                config: json!({"sweep": c.sweep, "lda": c.lda}),
                seed: Some(c.lda.seed),
            },
            Stage::Embed => Plan {
                inputs: vec![self.need(stage, CORPUS, Stage::Ingest)?],
                config: json!({"embed": self.embed_config()}),
                seed: Some(c.embed.seed),
            },
            Stage::Cluster => Plan {
                inputs: vec![
                    self.need(stage, CORPUS, Stage::Ingest)?,
                    self.need(stage, EMBEDDING, Stage::Embed)?,
                ],
                config: json!({"kmeans": c.kmeans, "rep_percentile": c.select.rep_percentile}),
                seed: Some(c.kmeans.seed),
            },
            Stage::Project => {
                let inputs = match pipeline {
                    SourceModel::Lda => vec![self.need(stage, DOC_TOPICS, Stage::Lda)?, topics()?],
                    SourceModel::EmbedKMeans => vec![
                        self.need(stage, CORPUS, Stage::Ingest)?,
                        self.need(stage, EMBEDDING, Stage::Embed)?,
                        topics()?,
                    ],
                };
                Plan {
                    inputs,
                    config: json!({"pipeline": pipeline, "projection": c.projection}),
                    seed: Some(c.projection.seed),
                }
            }
            Stage::Label => {
                let mut inputs = vec![self.need(stage, POSTS, Stage::Ingest)?, topics()?];
                if c.preprocess.replies {
                    inputs.extend(self.lemma_input()?);
                }
                Plan {
                    inputs,
                    config: json!({"pipeline": pipeline, "preprocess": c.preprocess}),
                    seed: None,
                }
            }
            Stage::TrainClf => Plan {
                inputs: vec![self.need(stage, LABELED, Stage::Label)?],
                config: json!({
                    "classifier": c.classifier,
                    "test_fraction": c.eval.test_fraction,
                    "split_seed": c.eval.seed,
                }),
                seed: Some(c.classifier.seed),
            },
            Stage::Eval => Plan {
                inputs: vec![
                    self.need(stage, CLASSIFIER, Stage::TrainClf)?,
                    self.need(stage, TEST_SET, Stage::TrainClf)?,
                ],
                config: json!({"k_max": c.eval.k_max}),
                seed: None,
            },
            Stage::Engagement => Plan {
                inputs: vec![self.need(stage, POSTS, Stage::Ingest)?, topics()?],
                config: json!({"pipeline": pipeline, "topics": c.num_topics()}),
                seed: None,
            },
            Stage::Plot => {
                let mut names = vec![
                    PROJECTION,
                    topics_file(pipeline),
                    top_words_file(pipeline),
                    PR_JSON,
                    ENGAGEMENT_JSON,
                ];
                if pipeline == SourceModel::Lda {
                    names.push(SWEEP_JSON);
                }
                let inputs: Vec<(String, PathBuf)> = names
                    .into_iter()
                    .filter(|n| self.w(n).exists())
                    .map(|n| (n.to_string(), self.w(n)))
                    .collect();
                if !inputs
                    .iter()
                    .any(|(n, _)| n != topics_file(pipeline) && n != top_words_file(pipeline))
                {
                    return Err(PipelineError::MissingDependency {
                        stage,
                        needed: Stage::Project,
                    });
                }
                Plan {
                    inputs,
                    config: json!({"pipeline": pipeline, "plot": c.plot}),
                    seed: None,
                }
            }
        };
        Ok(plan)
    }

    fn execute(&self, stage: Stage) -> PipelineResult<Vec<String>> {
        let outputs = match stage {
            Stage::Ingest => self.ingest(),
            Stage::Lda => self.lda(),
            Stage::Sweep => self.sweep(),
            Stage::Embed => self.embed(),
            Stage::Cluster => self.cluster(),
            Stage::Project => self.project(),
            Stage::Label => self.label(),
            Stage::TrainClf => self.train_clf(),
            Stage::Eval => self.eval(),
            Stage::Engagement => self.engagement(),
            Stage::Plot => self.plot(),
        }?;
        Ok(outputs.into_iter().map(str::to_string).collect())
    }

    fn corpus(&self) -> Result<TokenizedCorpus> {
        TokenizedCorpus::load(&self.w(CORPUS))
    }

    fn posts(&self) -> Result<Vec<PostRecord>> {
        Ok(load_corpus(&self.w(POSTS), &FieldMap::default())?.records)
    }

    fn topic_map(&self) -> Result<HashMap<String, u32>> {
        Ok(read_topics(&self.w(topics_file(self.cfg.pipeline)))?
            .into_iter()
            .map(|(id, t, _)| (id, t as u32))
            .collect())
    }

    fn ingest(&self) -> Result<Vec<&'static str>> {
        let path = self.cfg.paths.corpus.as_ref().expect("checked by plan");
        let loaded = load_corpus(path, &self.cfg.fields)?;
        let pp = self.preprocess_config()?;
        let (corpus, build) = build_corpus(&loaded.records, Some(PostKind::News), &pp, self.cfg.preprocess.min_df)?;
        corpus.save(&self.w(CORPUS))?;
        write_records(&self.w(POSTS), &loaded.records)?;
        let news = loaded.records.iter().filter(|r| r.kind == PostKind::News).count();
        let summary = json!({
            "records": loaded.records.len(),
            "news": news,
            "replies": loaded.records.len() - news,
            "malformed_lines": loaded.errors.iter().map(|e| e.line).collect::<Vec<_>>(),
            "orphan_replies": loaded.orphans.len(),
            "documents": corpus.len(),
            "dropped_documents": build.dropped,
            "vocabulary": corpus.vocabulary.len(),
            "tokens": corpus.total_tokens(),
        });
        write_json(&self.w(INGEST_REPORT), &summary)?;
        info!(
            "[ingest] {} records ({news} news), {} documents, vocabulary {}",
            loaded.records.len(),
            corpus.len(),
            corpus.vocabulary.len()
        );
        Ok(vec![CORPUS, POSTS, INGEST_REPORT])
    }

    fn lda(&self) -> Result<Vec<&'static str>> {
        let corpus = self.corpus()?;
        let (model, doc_topics) = lda::fit_with_topics(&corpus, &self.cfg.lda)?;
        model.save(&self.w(LDA_MODEL))?;
        let k = model.num_topics();

        let mut out = String::from("doc_id");
        for t in 0..k {
            out.push_str(&format!(",topic_{t}"));
        }
        out.push('\n');
        for (doc, dt) in corpus.docs.iter().zip(&doc_topics) {
            out.push_str(&doc.id);
            for p in &dt.probs {
                out.push_str(&format!(",{p:.9}"));
            }
            out.push('\n');
        }
        write_text(&self.w(DOC_TOPICS), &out)?;

        let reps = lda::representatives(&doc_topics, self.cfg.select.lda_threshold)?;
        let mut out = String::from("doc_id,topic,representative\n");
        for (d, (doc, dt)) in corpus.docs.iter().zip(&doc_topics).enumerate() {
            out.push_str(&format!("{},{},{}\n", doc.id, dt.argmax(), reps.topic_of(d).is_some()));
        }
        write_text(&self.w(topics_file(SourceModel::Lda)), &out)?;

        let n = TOP_WORDS.min(model.vocab_size());
        let mut out = String::from("topic,rank,word,weight\n");
        for t in 0..k {
            for (r, (word, w)) in lda::top_words(&model, t, n)?.into_iter().enumerate() {
                out.push_str(&format!("{t},{},{word},{w:.9}\n", r + 1));
            }
        }
        write_text(&self.w(top_words_file(SourceModel::Lda)), &out)?;
        let selected: usize = reps.by_topic.values().map(Vec::len).sum();
        info!(
            "[lda] K={k}, {selected} of {} posts representative at threshold {} ({} ties)",
            corpus.len(),
            self.cfg.select.lda_threshold,
            reps.ties.len()
        );
        Ok(vec![
            LDA_MODEL,
            DOC_TOPICS,
            topics_file(SourceModel::Lda),
            top_words_file(SourceModel::Lda),
        ])
    }

    fn sweep(&self) -> Result<Vec<&'static str>> {
        let corpus = self.corpus()?;
        let s = &self.cfg.sweep;
        let report = coherence::sweep(&corpus, &s.candidates(), s.runs, &self.cfg.lda, &s.coherence())?;
        write_text(&self.w(SWEEP_CSV), &report.to_csv())?;
        write_json(&self.w(SWEEP_JSON), &report)?;
        info!(
            "[sweep] selected K={} over {} candidates",
            report.selected,
            report.rows.len()
        );
        Ok(vec![SWEEP_CSV, SWEEP_JSON])
    }

    fn embed(&self) -> Result<Vec<&'static str>> {
        let corpus = self.corpus()?;
        let model = embed::train_unsupervised(&corpus, &self.embed_config())?;
        model.save(&self.w(EMBEDDING))?;
        info!("[embed] {} words, dim {}", model.words().len(), model.dim());
        Ok(vec![EMBEDDING])
    }

    fn cluster(&self) -> Result<Vec<&'static str>> {
        let corpus = self.corpus()?;
        let model = EmbeddingModel::load(&self.w(EMBEDDING))?;
        let vectors = doc_vectors(&model, &corpus);
        let fit = cluster::fit(&vectors, &self.cfg.kmeans)?;
        fit.model.save(&self.w(KMEANS))?;
        let ids: Vec<String> = corpus.docs.iter().map(|d| d.id.clone()).collect();
        cluster::write_assignments(&self.w(ASSIGNMENTS), &ids, &fit)?;

        let reps = cluster::representatives(&fit.model, &vectors, self.cfg.select.rep_percentile)?;
        let mut out = String::from("doc_id,topic,representative\n");
        for (d, (id, &c)) in ids.iter().zip(&fit.assignments).enumerate() {
            let rep = reps.get(&c).is_some_and(|m| m.binary_search(&d).is_ok());
            out.push_str(&format!("{id},{c},{rep}\n"));
        }
        write_text(&self.w(topics_file(SourceModel::EmbedKMeans)), &out)?;

        // Most frequent words of each cluster stand in for LDA's top words.
        let k = fit.model.k();
        let mut counts: Vec<HashMap<u32, u64>> = vec![HashMap::new(); k];
        for (doc, &c) in corpus.docs.iter().zip(&fit.assignments) {
            for &t in &doc.tokens {
                *counts[c].entry(t).or_default() += 1;
            }
        }
        let mut out = String::from("topic,rank,word,weight\n");
        for (c, m) in counts.into_iter().enumerate() {
            let total: u64 = m.values().sum();
            let mut words: Vec<(u32, u64)> = m.into_iter().collect();
            words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            for (r, (w, n)) in words.into_iter().take(TOP_WORDS).enumerate() {
                let word = corpus.vocabulary.word_of(w).unwrap_or("?");
                out.push_str(&format!("{c},{},{word},{:.9}\n", r + 1, n as f64 / total as f64));
            }
        }
        write_text(&self.w(top_words_file(SourceModel::EmbedKMeans)), &out)?;
        info!(
            "[cluster] k={k}, inertia {:.6}, best restart {}",
            fit.model.inertia, fit.restart
        );
        Ok(vec![
            KMEANS,
            ASSIGNMENTS,
            topics_file(SourceModel::EmbedKMeans),
            top_words_file(SourceModel::EmbedKMeans),
        ])
    }

    fn project(&self) -> Result<Vec<&'static str>> {
        let topics = read_topics(&self.w(topics_file(self.cfg.pipeline)))?;
        let vectors = match self.cfg.pipeline {
            SourceModel::Lda => read_doc_topics(&self.w(DOC_TOPICS))?,
            SourceModel::EmbedKMeans => {
                let model = EmbeddingModel::load(&self.w(EMBEDDING))?;
                doc_vectors(&model, &self.corpus()?)
            }
        };
        if vectors.len() != topics.len() {
            return Err(Error::invalid(format!(
                "{} document vectors but {} topic rows; rerun the topic stage",
                vectors.len(),
                topics.len()
            )));
        }
        let emb = project::project(&vectors, &self.cfg.projection)?;
        let ids: Vec<String> = topics.iter().map(|t| t.0.clone()).collect();
        let labels: Vec<usize> = topics.iter().map(|t| t.1).collect();
        project::write_projection(&self.w(PROJECTION), &ids, &emb, &labels)?;
        info!("[project] {} points", emb.points.len());
        Ok(vec![PROJECTION])
    }

    fn label(&self) -> Result<Vec<&'static str>> {
        let map = self.topic_map()?;
        let replies: Vec<PostRecord> = self
            .posts()?
            .into_iter()
            .filter(|r| r.kind == PostKind::Reply)
            .collect();
        let pp = if self.cfg.preprocess.replies {
            Some(self.preprocess_config()?)
        } else {
            None
        };
        let set = eval::build_labeled(&map, &replies, pp.as_ref(), self.cfg.pipeline)?;
        write_jsonl(&self.w(LABELED), &set.items)?;
        write_json(
            &self.w(LABEL_REPORT),
            &json!({"labeled": set.items.len(), "orphans": set.orphans, "empty": set.empty, "unlabeled": set.unlabeled}),
        )?;
        info!(
            "[label] {} labelled replies ({} orphans, {} empty, {} with untopiced parent)",
            set.items.len(),
            set.orphans,
            set.empty,
            set.unlabeled
        );
        Ok(vec![LABELED, LABEL_REPORT])
    }

    fn train_clf(&self) -> Result<Vec<&'static str>> {
        let items: Vec<LabeledComment> = read_jsonl(&self.w(LABELED))?;
        let (train, test) = eval::split_labeled(&items, self.cfg.eval.test_fraction, self.cfg.eval.seed)?;
        let data: Vec<(u32, Vec<String>)> = train.iter().map(|c| (c.label, c.tokens.clone())).collect();
        let (clf, report) = embed::train_supervised(&data, &self.cfg.classifier)?;
        clf.save(&self.w(CLASSIFIER))?;
        write_jsonl(&self.w(TEST_SET), &test)?;
        write_json(
            &self.w(TRAIN_REPORT),
            &json!({
                "train": train.len(),
                "test": test.len(),
                "labels": clf.num_labels(),
                "dropped": report.dropped,
                "epoch_loss": report.epoch_loss,
            }),
        )?;
        info!(
            "[train-clf] {} train / {} test items, {} labels",
            train.len(),
            test.len(),
            clf.num_labels()
        );
        Ok(vec![CLASSIFIER, TEST_SET, TRAIN_REPORT])
    }

    fn eval(&self) -> Result<Vec<&'static str>> {
        let clf = ClassifierModel::load(&self.w(CLASSIFIER))?;
        let test: Vec<LabeledComment> = read_jsonl(&self.w(TEST_SET))?;
        let mut k_max = self.cfg.eval.k_max;
        if k_max > clf.num_labels() {
            warn!(
                "[eval] k_max {k_max} exceeds the {} labels; using {}",
                clf.num_labels(),
                clf.num_labels()
            );
            k_max = clf.num_labels();
        }
        let report = eval::pr_at_k(&clf, &test, k_max)?;
        write_text(&self.w(PR_CSV), &report.to_csv())?;
        let file = PrFile {
            protocol: "stratified hold-out split of labelled replies".into(),
            test_fraction: self.cfg.eval.test_fraction,
            split_seed: self.cfg.eval.seed,
            report,
        };
        write_json(&self.w(PR_JSON), &file)?;
        info!(
            "[eval] P@1 {:.4} on {} held-out replies",
            file.report.rows[0].precision, file.report.test_size
        );
        Ok(vec![PR_CSV, PR_JSON])
    }

    fn engagement(&self) -> Result<Vec<&'static str>> {
        let map = self.topic_map()?;
        let news: Vec<PostRecord> = self.posts()?.into_iter().filter(|r| r.kind == PostKind::News).collect();
        let report = eval::engagement_by_topic(&news, &map, self.cfg.num_topics());
        write_text(&self.w(ENGAGEMENT_CSV), &report.to_csv())?;
        write_json(&self.w(ENGAGEMENT_JSON), &report)?;
        info!(
            "[engagement] {} topics, {} unassigned news posts",
            report.topics.len(),
            report.unassigned
        );
        Ok(vec![ENGAGEMENT_CSV, ENGAGEMENT_JSON])
    }

    fn spec(&self, title: &str, x: &str, y: &str, series: usize) -> PlotSpec {
        PlotSpec {
            width: self.cfg.plot.width,
            height: self.cfg.plot.height,
            palette: palette_for(series),
            ..PlotSpec::titled(title, x, y)
        }
    }

    fn plot(&self) -> Result<Vec<&'static str>> {
        let pipeline = self.cfg.pipeline;
        let mut written = Vec::new();

        if self.w(PROJECTION).exists() {
            let rows = read_id_rows(&self.w(PROJECTION), 4)?;
            let path = self.w(PROJECTION);
            let mut points = Vec::with_capacity(rows.len());
            let mut labels = Vec::with_capacity(rows.len());
            for r in &rows {
                points.push([parse::<f64>(&path, &r[1])?, parse::<f64>(&path, &r[2])?]);
                labels.push(parse::<usize>(&path, &r[3])?);
            }
            let topics_path = self.w(topics_file(pipeline));
            let representative: Vec<bool> = if topics_path.exists() {
                let t = read_topics(&topics_path)?;
                if t.len() == points.len() {
                    t.iter().map(|r| r.2).collect()
                } else {
                    Vec::new()
                }
            } else {
                Vec::new()
            };
            let words_path = self.w(top_words_file(pipeline));
            let annotations: BTreeMap<usize, String> = if words_path.exists() {
                read_top_words(&words_path)?
                    .into_iter()
                    .map(|(t, w)| (t, w.into_iter().take(ANNOTATION_WORDS).collect::<Vec<_>>().join(" ")))
                    .collect()
            } else {
                BTreeMap::new()
            };
            let series = labels.iter().max().map_or(0, |m| m + 1);
            let svg = viz::scatter(
                &points,
                &labels,
                &representative,
                &annotations,
                &self.spec("Topic map", "", "", series),
            )?;
            write_text(&self.w(SVG_MAP), &svg)?;
            written.push(SVG_MAP);
        }

        if pipeline == SourceModel::Lda && self.w(SWEEP_JSON).exists() {
            let report: SweepReport = read_json(&self.w(SWEEP_JSON))?;
            let ks: Vec<usize> = report.rows.iter().map(|r| r.k).collect();
            let mean: Vec<f64> = report.rows.iter().map(|r| r.mean).collect();
            let std: Vec<f64> = report.rows.iter().map(|r| r.std).collect();
            let svg = viz::error_bar_curve(
                &ks,
                &mean,
                &std,
                Some(report.selected),
                &self.spec("Topic coherence", "number of topics K", "mean C_V", 1),
            )?;
            write_text(&self.w(SVG_SWEEP), &svg)?;
            written.push(SVG_SWEEP);
        }

        if self.w(PR_JSON).exists() {
            let file: PrFile = read_json(&self.w(PR_JSON))?;
            let svg = viz::pr_curve(&file.report, &self.spec("Precision and recall at k", "k", "", 2))?;
            write_text(&self.w(SVG_PR), &svg)?;
            written.push(SVG_PR);
        }

        if self.w(ENGAGEMENT_JSON).exists() {
            let report: EngagementReport = read_json(&self.w(ENGAGEMENT_JSON))?;
            for (mode, name, title) in [
                (BarMode::Totals, SVG_TOTALS, "Engagement per topic (totals)"),
                (BarMode::Means, SVG_MEANS, "Engagement per topic (per news post)"),
            ] {
                let svg = viz::grouped_bars(&report, mode, &self.spec(title, "topic", "", 3))?;
                write_text(&self.w(name), &svg)?;
                written.push(name);
            }
        }
        info!("[plot] wrote {}", written.join(", "));
        Ok(written)
    }
}

/// Writes a planted-topic corpus as JSON Lines and, optionally, its
/// ground-truth `doc_id,topic` map.
pub fn synth(spec: &PlantedSpec, out: &Path, truth: Option<&Path>) -> Result<usize> {
    let planted = synthgen::generate(spec)?;
    planted.write_jsonl(out)?;
    if let Some(path) = truth {
        let mut text = String::from("doc_id,topic\n");
        for (id, t) in planted.news_topics() {
            text.push_str(&format!("{id},{t}\n"));
        }
        write_text(path, &text)?;
    }
    info!("[synth] {} records to {}", planted.records.len(), out.display());
    Ok(planted.records.len())
}
