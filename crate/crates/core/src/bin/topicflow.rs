use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topicflow::embed::EmbedConfig;
use topicflow::eval::SourceModel;
use topicflow::pipeline::{parse_pipeline, synth, PipelineConfig, PipelineError, Runner, Stage, StageOutcome};

#[derive(Parser, Debug)]
#[command(
    name = "topicflow",
    version,
    about = "Topic discovery and reply-topic evaluation for news posts"
)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for artifacts and manifests.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,

    /// Input corpus (JSON Lines).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,

    /// Topic pipeline: lda or embed.
    #[arg(long, alias = "source-model", global = true, value_parser = parse_pipeline)]
    pipeline: Option<SourceModel>,

    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load, validate and preprocess the corpus.
    Ingest(IngestArgs),
    /// Coherence sweep over the number of LDA topics.
    Sweep(SweepArgs),
    /// Fit LDA and select representative posts.
    Lda(LdaArgs),
    /// Train subword skip-gram embeddings.
    Embed(EmbedArgs),
    /// k-means over document vectors.
    Cluster(ClusterArgs),
    /// 2-D projection of the document representation.
    Project(ProjectArgs),
    /// Label replies with their parent's topic.
    Label,
    /// Train the reply classifier on the training split.
    #[command(name = "train-clf")]
    TrainClf(TrainArgs),
    /// Precision and recall at k on the held-out split.
    Eval(EvalArgs),
    /// Engagement aggregated per topic.
    Engagement,
    /// Render SVG figures from existing artifacts.
    Plot(PlotArgs),
    /// Run every stage of the selected pipeline.
    All(AllArgs),
    /// Write a planted-topic corpus with known ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    lemma_table: Option<PathBuf>,
    #[arg(long)]
    min_token_len: Option<usize>,
    #[arg(long)]
    keep_emoji: bool,
    #[arg(long)]
    min_df: Option<u64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    k_step: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args, Debug)]
struct LdaArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    passes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum dominant-topic probability for a representative post.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    neg: Option<usize>,
    #[arg(long)]
    min_n: Option<usize>,
    #[arg(long)]
    max_n: Option<usize>,
    #[arg(long)]
    buckets: Option<u32>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl EmbedArgs {
    fn apply(&self, e: &mut EmbedConfig) {
        set(&mut e.dim, self.dim);
        set(&mut e.window, self.window);
        set(&mut e.negatives, self.neg);
        set(&mut e.min_n, self.min_n);
        set(&mut e.max_n, self.max_n);
        set(&mut e.buckets, self.buckets);
        set(&mut e.lr, self.lr);
        set(&mut e.epochs, self.epochs);
        set(&mut e.min_count, self.min_count);
        set(&mut e.seed, self.seed);
    }
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of each cluster, nearest the centroid, kept as representative.
    #[arg(long)]
    rep_percentile: Option<f64>,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long)]
    neighbors: Option<usize>,
    #[arg(long)]
    min_dist: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    neg_rate: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Seed of the train/test split.
    #[arg(long = "split-seed")]
    split_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    split: EvalArgs,
    #[command(flatten)]
    model: EmbedArgs,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    height: Option<f64>,
}

#[derive(Args, Debug)]
struct AllArgs {
    /// Seed for every randomised stage.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Also write the planted news topics as doc_id,topic.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    docs_per_topic: Option<usize>,
    #[arg(long)]
    vocab_per_topic: Option<usize>,
    #[arg(long)]
    noise_vocab: Option<usize>,
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long)]
    replies_per_news: Option<usize>,
    #[arg(long)]
    reply_correlation: Option<f64>,
    /// Topic whose engagement means are scaled by --engagement-factor.
    #[arg(long)]
    high_engagement: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    engagement_factor: f64,
    #[arg(long)]
    seed: Option<u64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_eval(cfg: &mut PipelineConfig, a: &EvalArgs) {
    set(&mut cfg.eval.test_fraction, a.test_fraction);
    set(&mut cfg.eval.k_max, a.k_max);
    set(&mut cfg.eval.seed, a.split_seed);
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    set(&mut cfg.paths.work_dir, cli.work_dir.clone());
    if cli.corpus.is_some() {
        cfg.paths.corpus = cli.corpus.clone();
    }
    set(&mut cfg.pipeline, cli.pipeline);
    set(&mut cfg.threads, cli.threads);

    match &cli.command {
        Command::Ingest(a) => {
            if a.lemma_table.is_some() {
                cfg.paths.lemma_table = a.lemma_table.clone();
            }
            set(&mut cfg.preprocess.min_token_len, a.min_token_len);
            cfg.preprocess.keep_emoji |= a.keep_emoji;
            set(&mut cfg.preprocess.min_df, a.min_df);
        }
        Command::Sweep(a) => {
            let s = &mut cfg.sweep;
            set(&mut s.k_min, a.k_min);
            set(&mut s.k_max, a.k_max);
            set(&mut s.k_step, a.k_step);
            set(&mut s.runs, a.runs);
            set(&mut s.top_n, a.top_n);
            set(&mut s.window, a.window);
        }
        Command::Lda(a) => {
            let l = &mut cfg.lda;
            set(&mut l.k, a.k);
            if a.alpha.is_some() {
                l.alpha = a.alpha;
            }
            if a.eta.is_some() {
                l.eta = a.eta;
            }
            set(&mut l.tau0, a.tau0);
            set(&mut l.kappa, a.kappa);
            set(&mut l.batch_size, a.batch_size);
            set(&mut l.passes, a.passes);
            set(&mut l.seed, a.seed);
            set(&mut cfg.select.lda_threshold, a.threshold);
        }
        Command::Embed(a) => a.apply(&mut cfg.embed),
        Command::Cluster(a) => {
            let k = &mut cfg.kmeans;
            set(&mut k.k, a.k);
            set(&mut k.restarts, a.restarts);
            set(&mut k.max_iter, a.max_iter);
            set(&mut k.tol, a.tol);
            set(&mut k.seed, a.seed);
            set(&mut cfg.select.rep_percentile, a.rep_percentile);
        }
        Command::Project(a) => {
            let p = &mut cfg.projection;
            set(&mut p.n_neighbors, a.neighbors);
            set(&mut p.min_dist, a.min_dist);
            set(&mut p.epochs, a.epochs);
            set(&mut p.neg_rate, a.neg_rate);
            set(&mut p.seed, a.seed);
        }
        Command::TrainClf(a) => {
            apply_eval(&mut cfg, &a.split);
            a.model.apply(&mut cfg.classifier);
        }
        Command::Eval(a) => apply_eval(&mut cfg, a),
        Command::Plot(a) => {
            set(&mut cfg.plot.width, a.width);
            set(&mut cfg.plot.height, a.height);
        }
        Command::All(a) => {
            if let Some(seed) = a.seed {
                cfg.set_seed(seed);
            }
        }
        Command::Synth(a) => {
            let s = &mut cfg.synth;
            set(&mut s.topics, a.topics);
            set(&mut s.docs_per_topic, a.docs_per_topic);
            set(&mut s.vocab_per_topic, a.vocab_per_topic);
            set(&mut s.noise_vocab, a.noise_vocab);
            set(&mut s.noise_rate, a.noise_rate);
            set(&mut s.replies_per_news, a.replies_per_news);
            set(&mut s.reply_correlation, a.reply_correlation);
            set(&mut s.seed, a.seed);
            if let Some(t) = a.high_engagement {
                if t >= s.topics {
                    return Err(PipelineError::Config(format!(
                        "--high-engagement {t} is not a topic index below {}",
                        s.topics
                    )));
                }
                *s = s.clone().with_high_engagement(t, a.engagement_factor);
            }
        }
        Command::Label | Command::Engagement => {}
    }
    Ok(cfg)
}

fn stage_of(command: &Command) -> Option<Stage> {
    Some(match command {
        Command::Ingest(_) => Stage::Ingest,
        Command::Sweep(_) => Stage::Sweep,
        Command::Lda(_) => Stage::Lda,
        Command::Embed(_) => Stage::Embed,
        Command::Cluster(_) => Stage::Cluster,
        Command::Project(_) => Stage::Project,
        Command::Label => Stage::Label,
        Command::TrainClf(_) => Stage::TrainClf,
        Command::Eval(_) => Stage::Eval,
        Command::Engagement => Stage::Engagement,
        Command::Plot(_) => Stage::Plot,
        Command::All(_) | Command::Synth(_) => return None,
    })
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = build_config(cli)?;
    if let Command::Synth(a) = &cli.command {
        cfg.synth
            .validate()
            .map_err(|e| PipelineError::Config(format!("[synth] {e}")))?;
        synth(&cfg.synth, &a.out, a.truth.as_deref())?;
        return Ok(());
    }
    let runner = Runner::new(cfg)?;
    let report = |stage: Stage, outcome: StageOutcome| match outcome {
        StageOutcome::Ran => eprintln!("[{stage}] done"),
        StageOutcome::Skipped => eprintln!("[{stage}] up to date"),
    };
    match stage_of(&cli.command) {
        Some(stage) => report(stage, runner.run(stage)?),
        None => {
            for (stage, outcome) in runner.run_all()? {
                report(stage, outcome);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
