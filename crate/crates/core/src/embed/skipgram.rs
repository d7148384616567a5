use std::sync::atomic::{AtomicU64, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::subword::{SharedMatrix, SubwordTable};
use super::{EmbedConfig, EmbeddingModel, Gradient};
use crate::corpus::TokenizedCorpus;
use crate::error::{Error, Result};

/// `ln(sigmoid(x))` without overflow.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Negative-sampling loss for hidden vector `h`; `outputs[0]` is the true
/// context and the rest are negatives. Adds dL/dh to `grad_hidden` and
/// writes `coeffs[i]` such that dL/du_i = coeffs[i] * h.
pub(crate) fn sgns_kernel(h: &[f64], outputs: &[Vec<f64>], grad_hidden: &mut [f64], coeffs: &mut Vec<f64>) -> f64 {
    coeffs.clear();
    let mut loss = 0.0;
    for (i, u) in outputs.iter().enumerate() {
        let s: f64 = u.iter().zip(h).map(|(a, b)| a * b).sum();
        let label = if i == 0 { 1.0 } else { 0.0 };
        loss -= if i == 0 { log_sigmoid(s) } else { log_sigmoid(-s) };
        let g = sigmoid(s) - label;
        for (gh, x) in grad_hidden.iter_mut().zip(u) {
            *gh += g * x;
        }
        coeffs.push(g);
    }
    loss
}

struct Shard<'a> {
    input: &'a SharedMatrix<'a>,
    output: &'a SharedMatrix<'a>,
    word_rows: &'a [Vec<usize>],
    sampler: &'a WeightedIndex<f64>,
    progress: &'a AtomicU64,
    total: f64,
    cfg: &'a EmbedConfig,
}

impl Shard<'_> {
    fn run(&self, docs: &[Vec<u32>], rng: &mut ChaCha8Rng) {
        let dim = self.cfg.dim;
        let mut hidden = vec![0.0; dim];
        let mut grad = vec![0.0; dim];
        let mut coeffs = Vec::with_capacity(self.cfg.negatives + 1);
        let mut targets = Vec::with_capacity(self.cfg.negatives + 1);
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.cfg.negatives + 1);
        for doc in docs {
            let done = self.progress.fetch_add(doc.len() as u64, Ordering::Relaxed) as f64;
            let lr = self.cfg.lr * (1.0 - done / self.total).max(0.0);
            for (i, &center) in doc.iter().enumerate() {
                let radius = rng.gen_range(1..=self.cfg.window);
                let rows = &self.word_rows[center as usize];
                let lo = i.saturating_sub(radius);
                let hi = (i + radius).min(doc.len() - 1);
                for (j, &ctx) in doc.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    hidden.iter_mut().for_each(|x| *x = 0.0);
                    for &r in rows {
                        self.input.add_row_to(r, &mut hidden, 1.0);
                    }
                    targets.clear();
                    targets.push(ctx as usize);
                    while targets.len() <= self.cfg.negatives {
                        let n = self.sampler.sample(rng);
                        if n != ctx as usize {
                            targets.push(n);
                        }
                    }
                    outputs.clear();
                    outputs.extend(targets.iter().map(|&t| self.output.read_row(t)));
                    grad.iter_mut().for_each(|x| *x = 0.0);
                    sgns_kernel(&hidden, &outputs, &mut grad, &mut coeffs);
                    for (&t, &c) in targets.iter().zip(&coeffs) {
                        self.output.axpy(t, &hidden, -lr * c);
                    }
                    for &r in rows {
                        self.input.axpy(r, &grad, -lr);
                    }
                }
            }
        }
    }
}

/// Skip-gram with negative sampling over subword-enriched input vectors.
///
/// Words with collection frequency below `min_count` are removed before
/// training. With `threads == 1` the result depends only on the corpus and
/// config; with more threads, document shards update the shared matrices
/// without locks and results vary from run to run.
pub fn train_unsupervised(corpus: &TokenizedCorpus, cfg: &EmbedConfig) -> Result<EmbeddingModel> {
    cfg.validate()?;
    let vocab = &corpus.vocabulary;
    let mut remap = vec![None; vocab.len()];
    let mut words = Vec::new();
    let mut counts = Vec::new();
    for id in 0..vocab.len() as u32 {
        let cf = vocab.coll_freq(id);
        if cf >= cfg.min_count {
            remap[id as usize] = Some(words.len() as u32);
            words.push(vocab.word_of(id).unwrap_or_default().to_string());
            counts.push(cf as f64);
        }
    }
    if words.len() < 2 {
        return Err(Error::Empty(format!(
            "fewer than two words occur at least {} times",
            cfg.min_count
        )));
    }
    let docs: Vec<Vec<u32>> = corpus
        .docs
        .iter()
        .map(|d| {
            d.tokens
                .iter()
                .filter_map(|&t| remap.get(t as usize).copied().flatten())
                .collect()
        })
        .filter(|d: &Vec<u32>| d.len() > 1)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = SubwordTable::new(words, cfg.dim, cfg.min_n, cfg.max_n, cfg.buckets);
    table.init_uniform(&mut rng);
    let mut output = vec![0.0f32; table.words.len() * cfg.dim];

    let weights: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
    let sampler = WeightedIndex::new(&weights).map_err(|e| Error::invalid(e.to_string()))?;
    let tokens_per_epoch: usize = docs.iter().map(Vec::len).sum();
    let total = (tokens_per_epoch * cfg.epochs).max(1) as f64;
    let progress = AtomicU64::new(0);

    let shards = cfg.threads.min(docs.len()).max(1);
    let chunk = docs.len().div_ceil(shards).max(1);
    let mut rngs: Vec<ChaCha8Rng> = (0..shards)
        .map(|s| ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1 + s as u64)))
        .collect();

    let word_rows = table.word_rows.clone();
    for epoch in 0..cfg.epochs {
        {
            let input_view = SharedMatrix::new(&mut table.matrix, cfg.dim);
            let output_view = SharedMatrix::new(&mut output, cfg.dim);
            let shard = Shard {
                input: &input_view,
                output: &output_view,
                word_rows: &word_rows,
                sampler: &sampler,
                progress: &progress,
                total,
                cfg,
            };
            if shards == 1 {
                shard.run(&docs, &mut rngs[0]);
            } else {
                rayon::scope(|s| {
                    for (part, rng) in docs.chunks(chunk).zip(rngs.iter_mut()) {
                        let shard = &shard;
                        s.spawn(move |_| shard.run(part, rng));
                    }
                });
            }
        }
        if table.matrix.iter().chain(&output).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                stage: "embed",
                step: epoch,
            });
        }
        log::debug!("[embed] epoch {} of {} done", epoch + 1, cfg.epochs);
    }
    Ok(EmbeddingModel {
        config: cfg.clone(),
        input: table,
        output,
    })
}

impl EmbeddingModel {
    fn output_rows(&self, context: &str, negatives: &[&str]) -> Result<Vec<usize>> {
        std::iter::once(context)
            .chain(negatives.iter().copied())
            .map(|w| {
                self.word_id(w)
                    .map(|i| i as usize)
                    .ok_or_else(|| Error::invalid(format!("'{w}' is not in the vocabulary")))
            })
            .collect()
    }

    fn output_row(&self, r: usize) -> Vec<f64> {
        let d = self.dim();
        self.output[r * d..(r + 1) * d].iter().map(|&x| f64::from(x)).collect()
    }

    /// Negative-sampling loss of one (center, context) pair with the given
    /// negatives, in `f64` from the current parameters.
    pub fn pair_loss(&self, center: &str, context: &str, negatives: &[&str]) -> Result<f64> {
        Ok(self.pair_loss_and_gradient(center, context, negatives)?.0)
    }

    /// Gradient of [`EmbeddingModel::pair_loss`] with respect to every input
    /// and output row it touches.
    pub fn pair_gradient(&self, center: &str, context: &str, negatives: &[&str]) -> Result<Gradient> {
        Ok(self.pair_loss_and_gradient(center, context, negatives)?.1)
    }

    fn pair_loss_and_gradient(&self, center: &str, context: &str, negatives: &[&str]) -> Result<(f64, Gradient)> {
        let targets = self.output_rows(context, negatives)?;
        let rows = self.input_rows(center);
        let hidden = self.input.sum_rows(&rows);
        let outputs: Vec<Vec<f64>> = targets.iter().map(|&t| self.output_row(t)).collect();
        let mut grad = vec![0.0; self.dim()];
        let mut coeffs = Vec::new();
        let loss = sgns_kernel(&hidden, &outputs, &mut grad, &mut coeffs);
        let input_grads = vec![grad; rows.len()];
        let output_grads: Vec<Vec<f64>> = coeffs.iter().map(|c| hidden.iter().map(|h| c * h).collect()).collect();
        Ok((
            loss,
            Gradient {
                input: Gradient::accumulate(&rows, &input_grads),
                output: Gradient::accumulate(&targets, &output_grads),
            },
        ))
    }
}
