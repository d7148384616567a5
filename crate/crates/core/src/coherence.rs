//! C_V topic coherence and the topic-count sweep built on it.
//!
//! Word probabilities come from a boolean sliding window: every window of
//! `window` consecutive tokens inside one document counts as a virtual
//! document, and a word (or pair) is counted once per window containing it.
//! Documents no longer than the window form a single window. Each top word
//! is confirmed against the whole top-word set through the cosine of their
//! NPMI context vectors; the topic score is the mean confirmation.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedCorpus;
use crate::error::{Error, Result};
use crate::lda::{self, LdaConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceConfig {
    pub top_n: usize,
    pub window: usize,
    pub gamma_exp: f64,
    pub epsilon: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            top_n: 10,
            window: 110,
            gamma_exp: 1.0,
            epsilon: 1e-12,
        }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_n < 2 {
            return Err(Error::invalid("top_n must be >= 2"));
        }
        if self.window < 1 {
            return Err(Error::invalid("window must be >= 1"));
        }
        if !(self.epsilon >= 0.0) || !self.gamma_exp.is_finite() {
            return Err(Error::invalid("epsilon must be >= 0 and gamma finite"));
        }
        Ok(())
    }
}

/// Window occurrence counts for a fixed word list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowCounts {
    words: Vec<u32>,
    index: HashMap<u32, usize>,
    single: Vec<u64>,
    /// Symmetric `n x n`; the diagonal repeats `single`.
    pair: Vec<u64>,
    total: u64,
}

impl WindowCounts {
    pub fn words(&self) -> &[u32] {
        &self.words
    }

    /// Number of windows in the whole corpus.
    pub fn total_windows(&self) -> u64 {
        self.total
    }

    pub fn count(&self, word: u32) -> Option<u64> {
        self.index.get(&word).map(|&i| self.single[i])
    }

    pub fn pair_count(&self, a: u32, b: u32) -> Option<u64> {
        let (i, j) = (*self.index.get(&a)?, *self.index.get(&b)?);
        Some(self.pair[i * self.words.len() + j])
    }

    pub fn prob(&self, word: u32) -> Option<f64> {
        self.count(word).map(|c| c as f64 / self.total.max(1) as f64)
    }

    pub fn joint_prob(&self, a: u32, b: u32) -> Option<f64> {
        self.pair_count(a, b).map(|c| c as f64 / self.total.max(1) as f64)
    }
}

/// Counts, for every word and word pair of `words`, the sliding windows
/// (step 1, never crossing documents) that contain them.
pub fn window_counts(corpus: &TokenizedCorpus, words: &[u32], window: usize) -> Result<WindowCounts> {
    if words.is_empty() {
        return Err(Error::invalid("window counts need at least one word"));
    }
    if window < 1 {
        return Err(Error::invalid("window must be >= 1"));
    }
    let v = corpus.vocabulary.len() as u32;
    if let Some(&bad) = words.iter().find(|&&w| w >= v) {
        return Err(Error::invalid(format!("word id {bad} is not in the vocabulary")));
    }
    let mut unique = Vec::new();
    let mut index = HashMap::new();
    for &w in words {
        if let std::collections::hash_map::Entry::Vacant(e) = index.entry(w) {
            e.insert(unique.len());
            unique.push(w);
        }
    }
    let n = unique.len();

    let (single, pair, total) = corpus
        .docs
        .par_iter()
        .fold(
            || (vec![0u64; n], vec![0u64; n * n], 0u64),
            |(mut single, mut pair, mut total), doc| {
                count_doc(&doc.tokens, &index, window, &mut single, &mut pair, &mut total);
                (single, pair, total)
            },
        )
        .reduce(
            || (vec![0u64; n], vec![0u64; n * n], 0u64),
            |(mut s1, mut p1, t1), (s2, p2, t2)| {
                s1.iter_mut().zip(&s2).for_each(|(a, b)| *a += b);
                p1.iter_mut().zip(&p2).for_each(|(a, b)| *a += b);
                (s1, p1, t1 + t2)
            },
        );
    Ok(WindowCounts {
        words: unique,
        index,
        single,
        pair,
        total,
    })
}

fn count_doc(
    tokens: &[u32],
    index: &HashMap<u32, usize>,
    window: usize,
    single: &mut [u64],
    pair: &mut [u64],
    total: &mut u64,
) {
    if tokens.is_empty() {
        return;
    }
    let n = single.len();
    let slots: Vec<Option<usize>> = tokens.iter().map(|t| index.get(t).copied()).collect();
    let width = window.min(tokens.len());
    let mut inside = vec![0usize; n];
    for s in slots[..width].iter().flatten() {
        inside[*s] += 1;
    }
    let mut present = Vec::with_capacity(n);
    let windows = tokens.len() - width + 1;
    for start in 0..windows {
        if start > 0 {
            if let Some(s) = slots[start - 1] {
                inside[s] -= 1;
            }
            if let Some(s) = slots[start + width - 1] {
                inside[s] += 1;
            }
        }
        present.clear();
        present.extend((0..n).filter(|&i| inside[i] > 0));
        for (a, &i) in present.iter().enumerate() {
            single[i] += 1;
            pair[i * n + i] += 1;
            for &j in &present[a + 1..] {
                pair[i * n + j] += 1;
                pair[j * n + i] += 1;
            }
        }
        *total += 1;
    }
}

/// Normalised pointwise mutual information from window probabilities.
///
/// Pairs with a zero marginal score 0; a pair present in every window
/// scores 1 (the limit of the formula as the joint probability tends to 1).
/// The result is clamped to [-1, 1].
pub fn npmi(p_joint: f64, p_a: f64, p_b: f64, epsilon: f64) -> f64 {
    if p_a == 0.0 || p_b == 0.0 {
        return 0.0;
    }
    if p_joint >= 1.0 {
        return 1.0;
    }
    let log_joint = (p_joint + epsilon).ln();
    // The smoothing pushes always-co-occurring pairs a hair above 1.
    ((log_joint - (p_a.ln() + p_b.ln())) / -log_joint).clamp(-1.0, 1.0)
}

/// Coherence of each topic plus their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub per_topic: Vec<f64>,
    pub mean: f64,
    /// (topic, word) pairs whose word occurs in no window.
    pub unseen: Vec<(usize, String)>,
}

/// C_V coherence of word lists over `corpus`. Each topic needs at least two
/// words, all of them in the corpus vocabulary.
pub fn cv_score<S: AsRef<str>>(topics: &[Vec<S>], corpus: &TokenizedCorpus, cfg: &CoherenceConfig) -> Result<CvReport> {
    cfg.validate()?;
    if topics.is_empty() {
        return Err(Error::invalid("no topics to score"));
    }
    let mut id_lists = Vec::with_capacity(topics.len());
    for (t, words) in topics.iter().enumerate() {
        if words.len() < 2 {
            return Err(Error::invalid(format!("topic {t} has fewer than two words")));
        }
        let ids = words
            .iter()
            .map(|w| {
                corpus
                    .vocabulary
                    .id_of(w.as_ref())
                    .ok_or_else(|| Error::invalid(format!("topic {t}: word {:?} not in vocabulary", w.as_ref())))
            })
            .collect::<Result<Vec<u32>>>()?;
        id_lists.push(ids);
    }
    let all: Vec<u32> = id_lists.iter().flatten().copied().collect();
    let counts = window_counts(corpus, &all, cfg.window)?;

    let mut unseen = Vec::new();
    let mut per_topic = Vec::with_capacity(id_lists.len());
    for (t, ids) in id_lists.iter().enumerate() {
        for &w in ids {
            if counts.count(w) == Some(0) {
                let word = corpus.vocabulary.word_of(w).unwrap_or_default().to_string();
                log::warn!("coherence: topic {t} word {word:?} occurs in no window");
                unseen.push((t, word));
            }
        }
        per_topic.push(topic_cv(ids, &counts, cfg));
    }
    let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok(CvReport {
        per_topic,
        mean,
        unseen,
    })
}

fn signed_pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else {
        x.signum() * x.abs().powf(e)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// One-set segmentation: each word against the full set.
fn topic_cv(ids: &[u32], counts: &WindowCounts, cfg: &CoherenceConfig) -> f64 {
    let n = ids.len();
    let vectors: Vec<Vec<f64>> = ids
        .iter()
        .map(|&a| {
            ids.iter()
                .map(|&b| {
                    let p = npmi(
                        counts.joint_prob(a, b).unwrap_or(0.0),
                        counts.prob(a).unwrap_or(0.0),
                        counts.prob(b).unwrap_or(0.0),
                        cfg.epsilon,
                    );
                    signed_pow(p, cfg.gamma_exp)
                })
                .collect()
        })
        .collect();
    let mut set_vector = vec![0.0; n];
    for v in &vectors {
        for (s, x) in set_vector.iter_mut().zip(v) {
            *s += x;
        }
    }
    vectors.iter().map(|v| cosine(v, &set_vector)).sum::<f64>() / n as f64
}

/// C_V of an LDA model's topics, using each topic's `top_n` words (capped
/// at the vocabulary size).
pub fn model_cv(model: &lda::LdaModel, corpus: &TokenizedCorpus, cfg: &CoherenceConfig) -> Result<CvReport> {
    let n = cfg.top_n.min(model.vocab_size());
    let topics = (0..model.num_topics())
        .map(|t| Ok(lda::top_words(model, t, n)?.into_iter().map(|(w, _)| w).collect()))
        .collect::<Result<Vec<Vec<String>>>>()?;
    cv_score(&topics, corpus, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub mean: f64,
    /// Population standard deviation over the successful runs.
    pub std: f64,
    pub scores: Vec<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Candidates whose every run failed, with the first error.
    pub excluded: Vec<(usize, String)>,
    pub selected: usize,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,mean_cv,std_cv,selected\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.9},{:.9},{}", r.k, r.mean, r.std, r.k == self.selected);
        }
        out
    }
}

/// Trains `runs` models per candidate topic count (seeds `seed + run`) and
/// picks the count with the highest mean C_V; ties favour the smaller count.
pub fn sweep(
    corpus: &TokenizedCorpus,
    k_candidates: &[usize],
    runs: usize,
    template: &LdaConfig,
    cfg: &CoherenceConfig,
) -> Result<SweepReport> {
    if runs < 1 {
        return Err(Error::invalid("sweep needs runs >= 1"));
    }
    if k_candidates.is_empty() {
        return Err(Error::invalid("sweep needs at least one candidate K"));
    }
    cfg.validate()?;
    let mut ks: Vec<usize> = k_candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();

    let cells: Vec<(usize, usize)> = ks.iter().flat_map(|&k| (0..runs).map(move |r| (k, r))).collect();
    let outcomes: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(k, run)| {
            let lda_cfg = LdaConfig {
                k,
                seed: template.seed.wrapping_add(run as u64),
                ..template.clone()
            };
            let model = lda::fit(corpus, &lda_cfg)?;
            Ok(model_cv(&model, corpus, cfg)?.mean)
        })
        .collect();

    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (ci, &k) in ks.iter().enumerate() {
        let mut scores = Vec::new();
        let mut first_err = None;
        for res in &outcomes[ci * runs..(ci + 1) * runs] {
            match res {
                Ok(s) => scores.push(*s),
                Err(e) => {
                    log::warn!("[sweep] K={k}: run failed: {e}");
                    first_err.get_or_insert_with(|| e.to_string());
                }
            }
        }
        if scores.is_empty() {
            excluded.push((k, first_err.unwrap_or_default()));
            continue;
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len() as f64;
        rows.push(SweepRow {
            k,
            mean,
            std: var.sqrt(),
            failures: runs - scores.len(),
            scores,
        });
    }
    let best = rows
        .iter()
        .fold(None::<&SweepRow>, |best, r| match best {
            Some(b) if b.mean >= r.mean => Some(b),
            _ => Some(r),
        })
        .ok_or_else(|| Error::Empty("every sweep candidate failed".into()))?;
    let selected = best.k;
    Ok(SweepReport {
        rows,
        excluded,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus_of(docs: &[&str]) -> TokenizedCorpus {
        let lists: Vec<(String, Vec<&str>)> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("d{i}"), d.split_whitespace().collect()))
            .collect();
        TokenizedCorpus::from_token_lists(&lists).unwrap()
    }

    fn ids(c: &TokenizedCorpus, ws: &[&str]) -> Vec<u32> {
        ws.iter().map(|w| c.vocabulary.id_of(w).unwrap()).collect()
    }

    #[test]
    fn short_doc_is_one_window() {
        let c = corpus_of(&["a b"]);
        let w = ids(&c, &["a", "b"]);
        let wc = window_counts(&c, &w, 110).unwrap();
        assert_eq!(wc.total_windows(), 1);
        assert_eq!(wc.count(w[0]), Some(1));
        assert_eq!(wc.count(w[1]), Some(1));
        assert_eq!(wc.pair_count(w[0], w[1]), Some(1));
    }

    #[test]
    fn sliding_windows_enumerated() {
        let c = corpus_of(&["a b c"]);
        let w = ids(&c, &["a", "b", "c"]);
        let wc = window_counts(&c, &w, 2).unwrap();
        assert_eq!(wc.total_windows(), 2);
        assert_eq!(wc.pair_count(w[0], w[2]), Some(0));
        assert_eq!(wc.pair_count(w[0], w[1]), Some(1));
        assert_eq!(wc.pair_count(w[1], w[2]), Some(1));
        assert_eq!(wc.count(w[1]), Some(2));
    }

    #[test]
    fn window_count_errors() {
        let c = corpus_of(&["a b c"]);
        assert!(window_counts(&c, &[], 3).is_err());
        assert!(window_counts(&c, &[7], 3).is_err());
        assert!(window_counts(&c, &[0], 0).is_err());
    }

    #[test]
    fn self_npmi_is_one() {
        for p in [0.01, 0.3, 0.5, 0.99] {
            assert_eq!(npmi(p, p, p, 0.0), 1.0);
            assert!((npmi(p, p, p, 1e-12) - 1.0).abs() < 1e-9);
        }
        assert_eq!(npmi(1.0, 1.0, 1.0, 1e-12), 1.0);
    }

    #[test]
    fn independent_words_have_zero_npmi() {
        assert!(npmi(0.25, 0.5, 0.5, 0.0).abs() < 1e-15);
        assert!(npmi(0.06, 0.2, 0.3, 1e-12).abs() < 1e-9);
    }

    #[test]
    fn never_cooccurring_is_minus_one_in_the_limit() {
        let v = npmi(0.0, 0.5, 0.5, 1e-12);
        assert!(v < -0.94 && v >= -1.0, "{v}");
    }

    #[test]
    fn cv_errors_and_flags() {
        let c = corpus_of(&["a b c", "c d"]);
        let cfg = CoherenceConfig::default();
        assert!(cv_score(&[vec!["a"]], &c, &cfg).is_err());
        assert!(cv_score(&[vec!["a", "zzz"]], &c, &cfg).is_err());
        let empty: Vec<Vec<&str>> = vec![];
        assert!(cv_score(&empty, &c, &cfg).is_err());
        let r = cv_score(&[vec!["a", "d"]], &c, &cfg).unwrap();
        assert!(r.unseen.is_empty());
        assert!(r.per_topic[0].is_finite());
    }

    #[test]
    fn csv_has_header_and_selected_flag() {
        let rep = SweepReport {
            rows: vec![
                SweepRow {
                    k: 2,
                    mean: 0.5,
                    std: 0.0,
                    scores: vec![0.5],
                    failures: 0,
                },
                SweepRow {
                    k: 3,
                    mean: 0.6,
                    std: 0.1,
                    scores: vec![0.5, 0.7],
                    failures: 0,
                },
            ],
            excluded: vec![],
            selected: 3,
        };
        let csv = rep.to_csv();
        assert_eq!(
            csv,
            "k,mean_cv,std_cv,selected\n2,0.500000000,0.000000000,false\n3,0.600000000,0.100000000,true\n"
        );
    }

    #[test]
    fn single_run_sweep_has_zero_std_and_ties_pick_smaller_k() {
        let c = corpus_of(&["a b c d", "a b c", "e f g h", "e f g", "a b e f"]);
        let tmpl = LdaConfig {
            batch_size: 8,
            passes: 3,
            ..Default::default()
        };
        let cfg = CoherenceConfig {
            top_n: 3,
            ..Default::default()
        };
        let rep = sweep(&c, &[3, 2, 3], 1, &tmpl, &cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.rows.iter().all(|r| r.std == 0.0));
        assert!(sweep(&c, &[], 1, &tmpl, &cfg).is_err());
        assert!(sweep(&c, &[2], 0, &tmpl, &cfg).is_err());
    }

    #[test]
    fn failing_candidates_are_excluded() {
        let c = corpus_of(&["a b c d", "e f g h"]);
        let tmpl = LdaConfig {
            batch_size: 8,
            passes: 2,
            ..Default::default()
        };
        let cfg = CoherenceConfig {
            top_n: 2,
            ..Default::default()
        };
        let rep = sweep(&c, &[0, 2], 2, &tmpl, &cfg).unwrap();
        assert_eq!(rep.excluded.len(), 1);
        assert_eq!(rep.excluded[0].0, 0);
        assert_eq!(rep.selected, 2);
    }

    proptest! {
        #[test]
        fn npmi_bounded_and_symmetric(
            docs in prop::collection::vec(prop::collection::vec(0u32..6, 1..15), 1..8),
            window in 1usize..6,
        ) {
            let lists: Vec<(String, Vec<String>)> = docs.iter().enumerate()
                .map(|(i, d)| (format!("d{i}"), d.iter().map(|t| format!("w{t}")).collect()))
                .collect();
            let c = TokenizedCorpus::from_token_lists(&lists).unwrap();
            let all: Vec<u32> = (0..c.vocabulary.len() as u32).collect();
            let wc = window_counts(&c, &all, window).unwrap();
            for &a in &all {
                for &b in &all {
                    let (pa, pb) = (wc.prob(a).unwrap(), wc.prob(b).unwrap());
                    let x = npmi(wc.joint_prob(a, b).unwrap(), pa, pb, 1e-12);
                    let y = npmi(wc.joint_prob(b, a).unwrap(), pb, pa, 1e-12);
                    prop_assert_eq!(x, y);
                    if wc.pair_count(a, b).unwrap() > 0 {
                        prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&x), "{}", x);
                    }
                }
            }
        }

        #[test]
        fn cv_invariant_under_reorder_and_duplication(
            docs in prop::collection::vec(prop::collection::vec(0u32..5, 2..10), 2..6),
            rotate in 0usize..5,
        ) {
            let lists: Vec<(String, Vec<String>)> = docs.iter().enumerate()
                .map(|(i, d)| (format!("d{i}"), d.iter().map(|t| format!("w{t}")).collect()))
                .collect();
            let c = TokenizedCorpus::from_token_lists(&lists).unwrap();
            let words: Vec<String> = c.vocabulary.words().to_vec();
            prop_assume!(words.len() >= 2);
            let cfg = CoherenceConfig { window: 3, ..Default::default() };
            let base = cv_score(&[words.clone()], &c, &cfg).unwrap().mean;

            let mut rotated = words.clone();
            let r = rotate % rotated.len();
            rotated.rotate_left(r);
            let s_words = cv_score(&[rotated], &c, &cfg).unwrap().mean;
            prop_assert!((base - s_words).abs() < 1e-12);

            let mut permuted = c.clone();
            permuted.docs.reverse();
            let s_perm = cv_score(&[words.clone()], &permuted, &cfg).unwrap().mean;
            prop_assert!((base - s_perm).abs() < 1e-12);

            let mut doubled = c.clone();
            doubled.docs.extend(c.docs.iter().cloned());
            let s_dup = cv_score(&[words], &doubled, &cfg).unwrap().mean;
            prop_assert!((base - s_dup).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&base));
        }
    }
}
