//! Labelled-reply datasets, stratified splits, precision/recall at k, and
//! per-topic engagement.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{preprocess, PostKind, PostRecord, PreprocessConfig};
use crate::embed::ClassifierModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceModel {
    Lda,
    #[serde(rename = "embed")]
    EmbedKMeans,
}

/// A reply carrying its parent news post's latent topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledComment {
    pub label: u32,
    pub tokens: Vec<String>,
    pub reply_id: String,
    pub parent_id: String,
    pub source_model: SourceModel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    pub items: Vec<LabeledComment>,
    /// Replies whose parent is missing from the corpus.
    pub orphans: usize,
    /// Replies with no tokens left after preprocessing.
    pub empty: usize,
    /// Replies whose parent exists but has no topic (e.g. it was dropped
    /// from the tokenised corpus).
    pub unlabeled: usize,
}

/// Pairs every non-orphan reply with its parent's topic. `preprocessing`
/// of `None` only lowercases and splits on whitespace.
pub fn build_labeled(
    topics: &HashMap<String, u32>,
    replies: &[PostRecord],
    preprocessing: Option<&PreprocessConfig>,
    source_model: SourceModel,
) -> Result<LabeledSet> {
    let mut set = LabeledSet::default();
    for r in replies.iter().filter(|r| r.kind == PostKind::Reply) {
        let parent = match (&r.parent_id, r.orphan) {
            (Some(p), false) => p,
            _ => {
                set.orphans += 1;
                continue;
            }
        };
        let Some(&label) = topics.get(parent) else {
            set.unlabeled += 1;
            continue;
        };
        let tokens = match preprocessing {
            Some(cfg) => preprocess(&r.text, cfg),
            None => r.text.to_lowercase().split_whitespace().map(str::to_string).collect(),
        };
        if tokens.is_empty() {
            set.empty += 1;
            continue;
        }
        set.items.push(LabeledComment {
            label,
            tokens,
            reply_id: r.id.clone(),
            parent_id: parent.clone(),
            source_model,
        });
    }
    if set.items.is_empty() {
        return Err(Error::Empty("no reply could be labelled with a parent topic".into()));
    }
    Ok(set)
}

/// Stratified split: each label sends `round(n * test_fraction)` items to
/// the test side, clamped to `[1, n - 1]`; a label with one item stays in
/// train. Both sides keep the input order.
pub fn split<T: Clone>(
    items: &[T],
    label_of: impl Fn(&T) -> u32,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_label: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        by_label.entry(label_of(item)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; items.len()];
    for (label, mut idx) in by_label {
        let n = idx.len();
        if n == 1 {
            log::warn!("[eval] label {label} has a single item; it stays in the training set");
            continue;
        }
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        idx.shuffle(&mut rng);
        for &i in &idx[..n_test] {
            is_test[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (item, t) in items.iter().zip(is_test) {
        if t {
            test.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    Ok((train, test))
}

/// Convenience form of [`split`] for labelled comments.
pub fn split_labeled(
    items: &[LabeledComment],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledComment>, Vec<LabeledComment>)> {
    split(items, |c| c.label, test_fraction, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrRow {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrAtKReport {
    pub rows: Vec<PrRow>,
    pub test_size: usize,
    pub labels: usize,
}

impl PrAtKReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,precision,recall,hits\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.9},{:.9},{}\n", r.k, r.precision, r.recall, r.hits));
        }
        out
    }
}

/// Precision and recall at `k = 1..=k_max` with one true label per item.
pub fn pr_at_k(model: &ClassifierModel, test: &[LabeledComment], k_max: usize) -> Result<PrAtKReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set is empty".into()));
    }
    let labels = model.num_labels();
    if k_max == 0 || k_max > labels {
        return Err(Error::invalid(format!("k_max must be in 1..={labels}, got {k_max}")));
    }
    // Rank of each item's true label, if it is among the top k_max.
    let ranks: Vec<Option<usize>> = test
        .par_iter()
        .map(|c| {
            model
                .predict_topk(&c.tokens, k_max)
                .map(|p| p.ranked.iter().position(|&(l, _)| l == c.label))
        })
        .collect::<Result<_>>()?;
    Ok(pr_from_ranks(&ranks, k_max, labels))
}

/// P/R@k for k in 1..=k_max from the 0-based rank of each item's true
/// label (`None` when it is outside the top `k_max`).
pub fn pr_from_ranks(ranks: &[Option<usize>], k_max: usize, labels: usize) -> PrAtKReport {
    let n = ranks.len() as f64;
    let rows = (1..=k_max)
        .map(|k| {
            let hits = ranks.iter().filter(|r| r.is_some_and(|r| r < k)).count();
            PrRow {
                k,
                precision: hits as f64 / (k as f64 * n),
                recall: hits as f64 / n,
                hits,
            }
        })
        .collect();
    PrAtKReport {
        rows,
        test_size: ranks.len(),
        labels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Likes,
    Replies,
    Retweets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEngagement {
    pub topic: u32,
    pub posts: u64,
    pub likes: u64,
    pub replies: u64,
    pub retweets: u64,
    pub mean_likes: f64,
    pub mean_replies: f64,
    pub mean_retweets: f64,
    /// No news post has this topic; means are reported as 0.
    pub empty: bool,
}

impl TopicEngagement {
    pub fn total(&self, m: Measure) -> u64 {
        match m {
            Measure::Likes => self.likes,
            Measure::Replies => self.replies,
            Measure::Retweets => self.retweets,
        }
    }

    pub fn mean(&self, m: Measure) -> f64 {
        match m {
            Measure::Likes => self.mean_likes,
            Measure::Replies => self.mean_replies,
            Measure::Retweets => self.mean_retweets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementReport {
    pub topics: Vec<TopicEngagement>,
    /// News posts without a topic.
    pub unassigned: u64,
}

impl EngagementReport {
    /// Topics ordered by a measure, highest first; ties by topic index.
    pub fn ranking(&self, m: Measure, means: bool) -> Vec<u32> {
        let mut t: Vec<&TopicEngagement> = self.topics.iter().collect();
        t.sort_by(|a, b| {
            let (x, y) = if means {
                (a.mean(m), b.mean(m))
            } else {
                (a.total(m) as f64, b.total(m) as f64)
            };
            y.total_cmp(&x).then(a.topic.cmp(&b.topic))
        });
        t.iter().map(|e| e.topic).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "topic,posts,likes_total,replies_total,retweets_total,likes_mean,replies_mean,retweets_mean,empty\n",
        );
        for t in &self.topics {
            out.push_str(&format!(
                "{},{},{},{},{},{:.9},{:.9},{:.9},{}\n",
                t.topic,
                t.posts,
                t.likes,
                t.replies,
                t.retweets,
                t.mean_likes,
                t.mean_replies,
                t.mean_retweets,
                t.empty
            ));
        }
        out
    }
}

/// Sums and per-post means of likes, replies and retweets of the news posts
/// of each topic `0..num_topics` (extended if the map holds larger ids).
pub fn engagement_by_topic(news: &[PostRecord], topics: &HashMap<String, u32>, num_topics: usize) -> EngagementReport {
    let n = topics
        .values()
        .map(|&t| t as usize + 1)
        .max()
        .unwrap_or(0)
        .max(num_topics);
    let mut acc = vec![[0u64; 4]; n];
    let mut unassigned = 0;
    for r in news.iter().filter(|r| r.kind == PostKind::News) {
        match topics.get(&r.id) {
            Some(&t) => {
                let a = &mut acc[t as usize];
                a[0] += 1;
                a[1] += r.likes;
                a[2] += r.reply_count;
                a[3] += r.retweets;
            }
            None => unassigned += 1,
        }
    }
    let mean = |total: u64, posts: u64| if posts == 0 { 0.0 } else { total as f64 / posts as f64 };
    EngagementReport {
        topics: acc
            .iter()
            .enumerate()
            .map(|(t, a)| TopicEngagement {
                topic: t as u32,
                posts: a[0],
                likes: a[1],
                replies: a[2],
                retweets: a[3],
                mean_likes: mean(a[1], a[0]),
                mean_replies: mean(a[2], a[0]),
                mean_retweets: mean(a[3], a[0]),
                empty: a[0] == 0,
            })
            .collect(),
        unassigned,
    }
}

/// Normalised mutual information with arithmetic-mean normalisation. Two
/// single-cluster labelings score 1.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid("labelings must be non-empty and of equal length"));
    }
    let n = a.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pa: HashMap<usize, f64> = HashMap::new();
    let mut pb: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0 / n;
        *pa.entry(x).or_default() += 1.0 / n;
        *pb.entry(y).or_default() += 1.0 / n;
    }
    let entropy = |p: &HashMap<usize, f64>| -> f64 { -p.values().map(|&v| v * v.ln()).sum::<f64>() };
    let (ha, hb) = (entropy(&pa), entropy(&pb));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mi: f64 = joint.iter().map(|(&(x, y), &p)| p * (p / (pa[&x] * pb[&y])).ln()).sum();
    Ok((mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pr_identities(labels in 2usize..12, raw in prop::collection::vec(0usize..12, 1..60)) {
            let ranks: Vec<Option<usize>> = raw.iter().map(|&r| Some(r % labels)).collect();
            let rep = pr_from_ranks(&ranks, labels, labels);
            for w in rep.rows.windows(2) {
                prop_assert!(w[1].recall >= w[0].recall);
                prop_assert!(w[1].precision <= w[0].precision || w[1].hits > w[0].hits);
            }
            for r in &rep.rows {
                prop_assert!((r.precision - r.recall / r.k as f64).abs() <= 1e-15);
            }
            prop_assert_eq!(rep.rows.last().unwrap().recall, 1.0);
        }
    }

    fn news(id: &str, likes: u64, retweets: u64, replies: u64) -> PostRecord {
        PostRecord {
            likes,
            retweets,
            reply_count: replies,
            ..PostRecord::news(id, "texto")
        }
    }

    #[test]
    fn labeled_pairs_follow_parents() {
        let topics: HashMap<String, u32> = [("n1".to_string(), 3), ("n2".to_string(), 1)].into();
        let mut orphan = PostRecord::reply("r3", "n9", "hola mundo");
        orphan.orphan = true;
        let replies = vec![
            PostRecord::reply("r1", "n1", "Gran acuerdo de paz"),
            PostRecord::reply("r2", "n1", "la paz llegó"),
            orphan,
            PostRecord::reply("r4", "n2", "!!! ?"),
            PostRecord::reply("r5", "n7", "sin tema"),
        ];
        let set = build_labeled(&topics, &replies, Some(&PreprocessConfig::default()), SourceModel::Lda).unwrap();
        assert_eq!(set.items.len(), 2);
        assert!(set.items.iter().all(|c| c.label == 3));
        assert_eq!((set.orphans, set.empty, set.unlabeled), (1, 1, 1));
        assert!(build_labeled(&topics, &replies[3..4], None, SourceModel::Lda).is_ok());
        assert!(build_labeled(&HashMap::new(), &replies, None, SourceModel::Lda).is_err());
    }

    #[test]
    fn split_is_stratified() {
        let items: Vec<u32> = (0..300).map(|i| i % 3).collect();
        let (train, test) = split(&items, |&l| l, 0.2, 5).unwrap();
        for l in 0..3 {
            assert_eq!(test.iter().filter(|&&x| x == l).count(), 20);
            assert_eq!(train.iter().filter(|&&x| x == l).count(), 80);
        }
        let (a, b) = split(&[7u32, 7], |&l| l, 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        let (a, b) = split(&[1u32, 2, 2, 2], |&l| l, 0.01, 1).unwrap();
        assert_eq!(b, vec![2]);
        assert!(a.contains(&1));
        assert!(split(&items, |&l| l, 1.0, 1).is_err());
        let idx: Vec<usize> = (0..50).collect();
        assert_eq!(
            split(&idx, |&i| (i % 2) as u32, 0.3, 9).unwrap(),
            split(&idx, |&i| (i % 2) as u32, 0.3, 9).unwrap()
        );
    }

    #[test]
    fn engagement_arithmetic() {
        let topics: HashMap<String, u32> = [("a".to_string(), 0), ("b".to_string(), 0)].into();
        let posts = vec![news("a", 2, 1, 0), news("b", 4, 3, 5), news("c", 100, 0, 0)];
        let r = engagement_by_topic(&posts, &topics, 2);
        assert_eq!(r.topics[0].likes, 6);
        assert_eq!(r.topics[0].mean_likes, 3.0);
        assert_eq!(r.topics[0].mean_replies, 2.5);
        assert!(r.topics[1].empty);
        assert_eq!(r.topics[1].mean_likes, 0.0);
        assert_eq!(r.unassigned, 1);
        let mut rev = posts.clone();
        rev.reverse();
        assert_eq!(engagement_by_topic(&rev, &topics, 2), r);
        assert_eq!(r.ranking(Measure::Likes, false), vec![0, 1]);
    }

    #[test]
    fn nmi_edge_cases() {
        assert!((nmi(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap() - 1.0).abs() < 1e-12);
        assert!(nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap().abs() < 1e-12);
        assert_eq!(nmi(&[0, 0], &[1, 1]).unwrap(), 1.0);
        assert!(nmi(&[0], &[0, 1]).is_err());
    }
}
