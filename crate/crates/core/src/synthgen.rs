//! Planted-topic corpora with known ground truth.
//!
//! Each topic owns a disjoint set of pseudo-words; news posts draw from
//! their topic's words plus a shared noise vocabulary, and replies draw
//! from the parent's topic with a given probability.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{write_records, PostRecord};
use crate::error::{Error, Result};

const CONSONANTS: &[&str] = &[
    "b", "c", "d", "f", "g", "j", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "ll",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementMeans {
    pub likes: f64,
    pub retweets: f64,
    pub replies: f64,
}

impl Default for EngagementMeans {
    fn default() -> Self {
        EngagementMeans {
            likes: 20.0,
            retweets: 8.0,
            replies: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedSpec {
    pub topics: usize,
    pub vocab_per_topic: usize,
    /// Size of the vocabulary shared by all topics.
    pub noise_vocab: usize,
    /// Probability that a news token comes from the shared vocabulary.
    pub noise_rate: f64,
    pub docs_per_topic: usize,
    pub doc_len_min: usize,
    pub doc_len_max: usize,
    pub replies_per_news: usize,
    /// Probability that a reply token comes from the parent's topic rather
    /// than uniformly from the whole vocabulary.
    pub reply_correlation: f64,
    /// Per-topic engagement means; empty means the default for every topic.
    pub engagement: Vec<EngagementMeans>,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            topics: 5,
            vocab_per_topic: 30,
            noise_vocab: 100,
            noise_rate: 0.1,
            docs_per_topic: 400,
            doc_len_min: 8,
            doc_len_max: 20,
            replies_per_news: 2,
            reply_correlation: 0.8,
            engagement: Vec::new(),
            seed: 1,
        }
    }
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.topics == 0 || self.vocab_per_topic == 0 || self.docs_per_topic == 0 || self.doc_len_min == 0 {
            return Err(Error::invalid(
                "topics, vocabulary, documents and lengths must be at least 1",
            ));
        }
        if self.doc_len_min > self.doc_len_max {
            return Err(Error::invalid("doc_len_min must not exceed doc_len_max"));
        }
        for (name, p) in [
            ("noise_rate", self.noise_rate),
            ("reply_correlation", self.reply_correlation),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.noise_rate > 0.0 && self.noise_vocab == 0 {
            return Err(Error::invalid("noise_rate > 0 needs a non-empty noise vocabulary"));
        }
        if !self.engagement.is_empty() && self.engagement.len() != self.topics {
            return Err(Error::invalid("engagement needs one entry per topic"));
        }
        for e in &self.engagement {
            if [e.likes, e.retweets, e.replies]
                .iter()
                .any(|m| !(*m >= 0.0 && m.is_finite()))
            {
                return Err(Error::invalid("engagement means must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Default engagement everywhere except `topic`, which gets `factor`
    /// times the default means.
    pub fn with_high_engagement(mut self, topic: usize, factor: f64) -> Self {
        let base = EngagementMeans::default();
        self.engagement = (0..self.topics)
            .map(|t| {
                let f = if t == topic { factor } else { 1.0 };
                EngagementMeans {
                    likes: base.likes * f,
                    retweets: base.retweets * f,
                    replies: base.replies * f,
                }
            })
            .collect();
        self
    }
}

/// A generated corpus: news posts first, then replies.
#[derive(Debug, Clone, PartialEq)]
pub struct Planted {
    pub records: Vec<PostRecord>,
    /// News id to planted topic.
    pub topics: HashMap<String, u32>,
    pub topic_vocab: Vec<Vec<String>>,
    pub noise_vocab: Vec<String>,
}

impl Planted {
    /// Ground-truth topics of news posts in record order.
    pub fn news_topics(&self) -> Vec<(String, u32)> {
        self.records
            .iter()
            .filter_map(|r| self.topics.get(&r.id).map(|&t| (r.id.clone(), t)))
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        write_records(path, &self.records)
    }
}

fn pseudo_words<R: Rng>(rng: &mut R, count: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.gen_range(2..=4);
        let w: String = (0..syllables)
            .map(|_| format!("{}{}", CONSONANTS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
            .collect();
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

pub fn generate(spec: &PlantedSpec) -> Result<Planted> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken = HashSet::new();
    let topic_vocab: Vec<Vec<String>> = (0..spec.topics)
        .map(|_| pseudo_words(&mut rng, spec.vocab_per_topic, &mut taken))
        .collect();
    let noise_vocab = pseudo_words(&mut rng, spec.noise_vocab, &mut taken);
    let all_words: Vec<&String> = topic_vocab.iter().flatten().chain(&noise_vocab).collect();

    let mut order: Vec<usize> = (0..spec.topics * spec.docs_per_topic)
        .map(|i| i % spec.topics)
        .collect();
    order.shuffle(&mut rng);

    let default_means = EngagementMeans::default();
    let mut records = Vec::new();
    let mut replies = Vec::new();
    let mut topics = HashMap::new();
    for (i, &t) in order.iter().enumerate() {
        let len = rng.gen_range(spec.doc_len_min..=spec.doc_len_max);
        let words: Vec<&str> = (0..len)
            .map(|_| {
                if rng.gen_bool(spec.noise_rate) {
                    noise_vocab.choose(&mut rng).unwrap().as_str()
                } else {
                    topic_vocab[t].choose(&mut rng).unwrap().as_str()
                }
            })
            .collect();
        let id = format!("news{i:06}");
        let means = spec.engagement.get(t).unwrap_or(&default_means);
        let mut post = PostRecord::news(id.clone(), words.join(" "));
        post.likes = poisson(&mut rng, means.likes);
        post.retweets = poisson(&mut rng, means.retweets);
        post.reply_count = poisson(&mut rng, means.replies);
        records.push(post);
        topics.insert(id.clone(), t as u32);

        for r in 0..spec.replies_per_news {
            let len = rng.gen_range(spec.doc_len_min..=spec.doc_len_max);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.gen_bool(spec.reply_correlation) {
                        topic_vocab[t].choose(&mut rng).unwrap().as_str()
                    } else {
                        all_words.choose(&mut rng).unwrap().as_str()
                    }
                })
                .collect();
            replies.push(PostRecord::reply(
                format!("reply{i:06}-{r}"),
                id.clone(),
                words.join(" "),
            ));
        }
    }
    records.extend(replies);
    Ok(Planted {
        records,
        topics,
        topic_vocab,
        noise_vocab,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{preprocess, PostKind, PreprocessConfig};

    fn small() -> PlantedSpec {
        PlantedSpec {
            docs_per_topic: 20,
            ..Default::default()
        }
    }

    #[test]
    fn counts_and_determinism() {
        let spec = PlantedSpec {
            docs_per_topic: 400,
            ..Default::default()
        };
        let p = generate(&spec).unwrap();
        assert_eq!(p.topics.len(), 2000);
        assert_eq!(p.topics.values().collect::<HashSet<_>>().len(), 5);
        assert_eq!(p.records.len(), 2000 * 3);
        assert_eq!(generate(&spec).unwrap(), p);
        assert_ne!(generate(&PlantedSpec { seed: 2, ..spec }).unwrap().records, p.records);
    }

    #[test]
    fn words_survive_preprocessing() {
        let p = generate(&small()).unwrap();
        let cfg = PreprocessConfig::default();
        for r in p.records.iter().take(50) {
            assert_eq!(preprocess(&r.text, &cfg).join(" "), r.text);
        }
    }

    #[test]
    fn full_correlation_without_noise_stays_in_topic() {
        let spec = PlantedSpec {
            noise_rate: 0.0,
            noise_vocab: 0,
            reply_correlation: 1.0,
            ..small()
        };
        let p = generate(&spec).unwrap();
        let owner: HashMap<&str, u32> = p
            .topic_vocab
            .iter()
            .enumerate()
            .flat_map(|(t, ws)| ws.iter().map(move |w| (w.as_str(), t as u32)))
            .collect();
        for r in &p.records {
            let t = match r.kind {
                PostKind::News => p.topics[&r.id],
                PostKind::Reply => p.topics[r.parent_id.as_ref().unwrap()],
            };
            assert!(r.text.split(' ').all(|w| owner[w] == t));
        }
    }

    #[test]
    fn engagement_concentrates_near_means() {
        let spec = PlantedSpec {
            docs_per_topic: 400,
            ..Default::default()
        }
        .with_high_engagement(2, 5.0);
        let p = generate(&spec).unwrap();
        for t in 0..5u32 {
            let posts: Vec<&PostRecord> = p.records.iter().filter(|r| p.topics.get(&r.id) == Some(&t)).collect();
            let mean = posts.iter().map(|r| r.likes).sum::<u64>() as f64 / posts.len() as f64;
            let expect = spec.engagement[t as usize].likes;
            assert!((mean - expect).abs() < 0.1 * expect, "topic {t}: {mean} vs {expect}");
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&PlantedSpec { topics: 0, ..small() }).is_err());
        assert!(generate(&PlantedSpec {
            reply_correlation: 1.5,
            ..small()
        })
        .is_err());
        assert!(generate(&PlantedSpec {
            doc_len_min: 9,
            doc_len_max: 3,
            ..small()
        })
        .is_err());
        assert!(generate(&PlantedSpec {
            noise_vocab: 0,
            ..small()
        })
        .is_err());
    }
}
