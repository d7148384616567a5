use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::subword::{SharedMatrix, SubwordTable};
use super::{check_finite, read_table, write_table, EmbedConfig, Gradient};
use crate::binio::{BinReader, BinWriter};
use crate::error::{Error, Result};

const CLS_MAGIC: &[u8] = b"TFCLS1";

/// Softmax cross-entropy of `W h` against `target`. Adds dL/dh to
/// `grad_hidden` and writes `coeffs[l]` with dL/dW_l = coeffs[l] * h.
pub(crate) fn softmax_kernel(
    h: &[f64],
    weights: &[Vec<f64>],
    target: usize,
    grad_hidden: &mut [f64],
    coeffs: &mut Vec<f64>,
) -> f64 {
    let probs = softmax(&logits(h, weights));
    coeffs.clear();
    for (l, (p, w)) in probs.iter().zip(weights).enumerate() {
        let g = p - if l == target { 1.0 } else { 0.0 };
        for (gh, x) in grad_hidden.iter_mut().zip(w) {
            *gh += g * x;
        }
        coeffs.push(g);
    }
    -probs[target].max(f64::MIN_POSITIVE).ln()
}

fn logits(h: &[f64], weights: &[Vec<f64>]) -> Vec<f64> {
    weights
        .iter()
        .map(|w| w.iter().zip(h).map(|(a, b)| a * b).sum())
        .collect()
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedReport {
    /// Examples dropped because no token had an input row.
    pub dropped: usize,
    /// Mean training loss per epoch, measured while training.
    pub epoch_loss: Vec<f64>,
}

/// Ranked labels with their probabilities. `uniform` marks input with no
/// known token, where every label gets the same score.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub ranked: Vec<(u32, f64)>,
    pub uniform: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    config: EmbedConfig,
    input: SubwordTable,
    /// Label values, indexed by first appearance in the training data.
    labels: Vec<u32>,
    /// Row-major `labels x dim`.
    output: Vec<f32>,
}

/// Trains a softmax classifier on the mean of the input rows (words and
/// n-gram buckets) of each example. Examples with no tokens are dropped.
pub fn train_supervised<S: AsRef<str>>(
    labeled: &[(u32, Vec<S>)],
    cfg: &EmbedConfig,
) -> Result<(ClassifierModel, SupervisedReport)> {
    cfg.validate()?;
    let mut labels = Vec::new();
    let mut label_index = HashMap::new();
    let mut freq: HashMap<&str, u64> = HashMap::new();
    let mut words: Vec<String> = Vec::new();
    for (label, tokens) in labeled {
        if tokens.is_empty() {
            continue;
        }
        label_index.entry(*label).or_insert_with(|| {
            labels.push(*label);
            labels.len() - 1
        });
        for t in tokens {
            let c = freq.entry(t.as_ref()).or_insert(0);
            if *c == 0 {
                words.push(t.as_ref().to_string());
            }
            *c += 1;
        }
    }
    if labels.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least two distinct labels, found {}",
            labels.len()
        )));
    }
    words.retain(|w| freq[w.as_str()] >= cfg.min_count);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = SubwordTable::new(words, cfg.dim, cfg.min_n, cfg.max_n, cfg.buckets);
    table.init_uniform(&mut rng);
    let mut output = vec![0.0f32; labels.len() * cfg.dim];

    let mut examples: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut dropped = 0;
    for (label, tokens) in labeled {
        let rows: Vec<usize> = tokens.iter().flat_map(|t| table.token_rows(t.as_ref())).collect();
        if rows.is_empty() {
            dropped += 1;
        } else {
            examples.push((label_index[label], rows));
        }
    }
    if dropped > 0 {
        log::warn!("[train-clf] dropped {dropped} examples without usable tokens");
    }

    let total = (examples.len() * cfg.epochs) as f64;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut seen = 0usize;
    let dim = cfg.dim;
    let mut hidden = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut coeffs = Vec::new();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let input = SharedMatrix::new(&mut table.matrix, dim);
        let out = SharedMatrix::new(&mut output, dim);
        let mut loss_sum = 0.0;
        for &e in &order {
            let (target, rows) = &examples[e];
            let lr = cfg.lr * (1.0 - seen as f64 / total);
            seen += 1;
            hidden.iter_mut().for_each(|x| *x = 0.0);
            let scale = 1.0 / rows.len() as f64;
            for &r in rows {
                input.add_row_to(r, &mut hidden, scale);
            }
            let weights: Vec<Vec<f64>> = (0..labels.len()).map(|l| out.read_row(l)).collect();
            grad.iter_mut().for_each(|x| *x = 0.0);
            loss_sum += softmax_kernel(&hidden, &weights, *target, &mut grad, &mut coeffs);
            for (l, &c) in coeffs.iter().enumerate() {
                out.axpy(l, &hidden, -lr * c);
            }
            for &r in rows {
                input.axpy(r, &grad, -lr * scale);
            }
        }
        let mean = loss_sum / examples.len().max(1) as f64;
        if !mean.is_finite() || table.matrix.iter().chain(&output).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                stage: "train-clf",
                step: epoch,
            });
        }
        log::debug!("[train-clf] epoch {} loss {mean:.6}", epoch + 1);
        epoch_loss.push(mean);
    }
    Ok((
        ClassifierModel {
            config: cfg.clone(),
            input: table,
            labels,
            output,
        },
        SupervisedReport { dropped, epoch_loss },
    ))
}

impl ClassifierModel {
    pub fn config(&self) -> &EmbedConfig {
        &self.config
    }

    /// Label values in index order.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn input_matrix(&self) -> &[f32] {
        &self.input.matrix
    }

    pub fn input_matrix_mut(&mut self) -> &mut [f32] {
        &mut self.input.matrix
    }

    pub fn output_matrix(&self) -> &[f32] {
        &self.output
    }

    pub fn output_matrix_mut(&mut self) -> &mut [f32] {
        &mut self.output
    }

    fn rows_of<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().flat_map(|t| self.input.token_rows(t.as_ref())).collect()
    }

    fn hidden(&self, rows: &[usize]) -> Vec<f64> {
        let mut h = self.input.sum_rows(rows);
        h.iter_mut().for_each(|x| *x /= rows.len() as f64);
        h
    }

    fn weights(&self) -> Vec<Vec<f64>> {
        self.output
            .chunks(self.input.dim)
            .map(|r| r.iter().map(|&x| f64::from(x)).collect())
            .collect()
    }

    /// Softmax probabilities in label-index order; `true` when no token was
    /// known and the probabilities are uniform.
    pub fn probabilities<S: AsRef<str>>(&self, tokens: &[S]) -> (Vec<f64>, bool) {
        let rows = self.rows_of(tokens);
        if rows.is_empty() {
            let l = self.labels.len();
            return (vec![1.0 / l as f64; l], true);
        }
        (softmax(&logits(&self.hidden(&rows), &self.weights())), false)
    }

    /// The `k` most probable labels, ties broken by ascending label index.
    pub fn predict_topk<S: AsRef<str>>(&self, tokens: &[S], k: usize) -> Result<Prediction> {
        if k == 0 || k > self.labels.len() {
            return Err(Error::invalid(format!(
                "k must be in 1..={}, got {k}",
                self.labels.len()
            )));
        }
        let (probs, uniform) = self.probabilities(tokens);
        let mut idx: Vec<usize> = (0..probs.len()).collect();
        idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        Ok(Prediction {
            ranked: idx[..k].iter().map(|&i| (self.labels[i], probs[i])).collect(),
            uniform,
        })
    }

    /// Cross-entropy of one example; `label` must be a trained label.
    pub fn example_loss<S: AsRef<str>>(&self, tokens: &[S], label: u32) -> Result<f64> {
        Ok(self.loss_and_gradient(tokens, label)?.0)
    }

    /// Gradient of [`ClassifierModel::example_loss`] with respect to the
    /// input rows of the example and every label row.
    pub fn example_gradient<S: AsRef<str>>(&self, tokens: &[S], label: u32) -> Result<Gradient> {
        Ok(self.loss_and_gradient(tokens, label)?.1)
    }

    fn loss_and_gradient<S: AsRef<str>>(&self, tokens: &[S], label: u32) -> Result<(f64, Gradient)> {
        let target = self
            .labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::invalid(format!("unknown label {label}")))?;
        let rows = self.rows_of(tokens);
        if rows.is_empty() {
            return Err(Error::invalid("example has no known tokens"));
        }
        let h = self.hidden(&rows);
        let mut grad = vec![0.0; self.input.dim];
        let mut coeffs = Vec::new();
        let loss = softmax_kernel(&h, &self.weights(), target, &mut grad, &mut coeffs);
        let n = rows.len() as f64;
        let row_grad: Vec<f64> = grad.iter().map(|g| g / n).collect();
        let out_rows: Vec<usize> = (0..self.labels.len()).collect();
        let out_grads: Vec<Vec<f64>> = coeffs.iter().map(|c| h.iter().map(|x| c * x).collect()).collect();
        Ok((
            loss,
            Gradient {
                input: Gradient::accumulate(&rows, &vec![row_grad; rows.len()]),
                output: Gradient::accumulate(&out_rows, &out_grads),
            },
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BinWriter::create(path, CLS_MAGIC)?;
        w.json(&self.config)?;
        write_table(&mut w, &self.input)?;
        w.len(self.labels.len())?;
        w.u32s(&self.labels)?;
        w.f32s(&self.output)?;
        w.finish()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BinReader::open(path, CLS_MAGIC)?;
        let config: EmbedConfig = r.json()?;
        config.validate()?;
        let input = read_table(&mut r, &config)?;
        let l = r.len()?;
        let labels = r.u32s(l)?;
        if l < 2 {
            return Err(Error::format(path, "classifier needs at least two labels"));
        }
        let output = r.f32s(l * config.dim)?;
        r.expect_eof()?;
        check_finite(path, &output)?;
        Ok(ClassifierModel {
            config,
            input,
            labels,
            output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_shift_invariant() {
        let p = softmax(&[1.0, 2.0, 3.0]);
        let q = softmax(&[101.0, 102.0, 103.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(softmax(&[1000.0, -1000.0])[0] > 0.999);
    }

    fn toy() -> Vec<(u32, Vec<String>)> {
        (0..20)
            .map(|i| {
                let (label, stem) = if i % 2 == 0 { (7, "alfa") } else { (3, "beta") };
                (label, vec![format!("{stem}{}", i % 3), format!("{stem}x")])
            })
            .collect()
    }

    fn cfg() -> EmbedConfig {
        EmbedConfig {
            dim: 10,
            buckets: 500,
            epochs: 20,
            lr: 0.2,
            ..Default::default()
        }
    }

    #[test]
    fn labels_follow_first_appearance() {
        let (m, report) = train_supervised(&toy(), &cfg()).unwrap();
        assert_eq!(m.labels(), &[7, 3]);
        assert_eq!(report.dropped, 0);
        assert_eq!(report.epoch_loss.len(), 20);
    }

    #[test]
    fn single_label_fails() {
        let data = vec![(1u32, vec!["a"]), (1, vec!["b"])];
        assert!(train_supervised(&data, &cfg()).is_err());
        let with_empty = vec![(1u32, vec!["a"]), (2, vec![])];
        assert!(train_supervised(&with_empty, &cfg()).is_err());
    }

    #[test]
    fn predict_topk_contract() {
        let (m, _) = train_supervised(&toy(), &cfg()).unwrap();
        let p = m.predict_topk(&["alfa1", "alfax"], 2).unwrap();
        assert_eq!(p.ranked[0].0, 7);
        assert!((p.ranked.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-9);
        let empty: [&str; 0] = [];
        let u = m.predict_topk(&empty, 2).unwrap();
        assert!(u.uniform);
        assert_eq!(u.ranked, vec![(7, 0.5), (3, 0.5)]);
        assert!(m.predict_topk(&["alfa1"], 0).is_err());
        assert!(m.predict_topk(&["alfa1"], 3).is_err());
    }
}
