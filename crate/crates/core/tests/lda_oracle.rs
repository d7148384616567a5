//! Online LDA against a plain batch variational EM written token by token.

use statrs::function::gamma::digamma;
use topicflow::corpus::TokenizedCorpus;
use topicflow::lda::{self, LdaConfig, LdaTrainer};

/// 20 documents: ten over {a0..a4}, ten over {b0..b4}.
fn disjoint_corpus() -> TokenizedCorpus {
    let mut docs = Vec::new();
    for d in 0..20usize {
        let prefix = if d < 10 { "a" } else { "b" };
        let toks: Vec<String> = (0..8)
            .map(|i| format!("{prefix}{}", (d * 3 + i * 7 + i * i) % 5))
            .collect();
        docs.push((format!("doc{d}"), toks));
    }
    TokenizedCorpus::from_token_lists(&docs).unwrap()
}

fn is_a_doc(c: &TokenizedCorpus, d: usize) -> bool {
    c.doc_words(d)[0].starts_with('a')
}

struct Oracle {
    gamma: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
}

/// Textbook smoothed LDA variational EM: per-token responsibilities, full
/// E-step to convergence, closed-form topic update. Seeded with a tiny LCG.
fn batch_em_oracle(c: &TokenizedCorpus, k: usize, alpha: f64, eta: f64, seed: u64) -> Oracle {
    let v = c.vocabulary.len();
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 33) as f64) / ((1u64 << 31) as f64)
    };
    let mut lambda: Vec<Vec<f64>> = (0..k).map(|_| (0..v).map(|_| 0.5 + next()).collect()).collect();
    let mut gamma = vec![vec![1.0; k]; c.len()];
    for _ in 0..500 {
        let mut new_lambda = vec![vec![eta; v]; k];
        for (d, doc) in c.docs.iter().enumerate() {
            let mut g = vec![alpha + doc.tokens.len() as f64 / k as f64; k];
            for _ in 0..200 {
                let psi_sum = digamma(g.iter().sum());
                let mut next_g = vec![alpha; k];
                for &w in &doc.tokens {
                    let mut phi: Vec<f64> = (0..k)
                        .map(|t| {
                            let lsum: f64 = lambda[t].iter().sum();
                            (digamma(g[t]) - psi_sum + digamma(lambda[t][w as usize]) - digamma(lsum)).exp()
                        })
                        .collect();
                    let z: f64 = phi.iter().sum();
                    phi.iter_mut().for_each(|p| *p /= z);
                    for t in 0..k {
                        next_g[t] += phi[t];
                    }
                }
                let delta: f64 = next_g.iter().zip(&g).map(|(a, b)| (a - b).abs()).sum();
                g = next_g;
                if delta < 1e-10 {
                    break;
                }
            }
            let psi_sum = digamma(g.iter().sum());
            for &w in &doc.tokens {
                let mut phi: Vec<f64> = (0..k)
                    .map(|t| {
                        let lsum: f64 = lambda[t].iter().sum();
                        (digamma(g[t]) - psi_sum + digamma(lambda[t][w as usize]) - digamma(lsum)).exp()
                    })
                    .collect();
                let z: f64 = phi.iter().sum();
                phi.iter_mut().for_each(|p| *p /= z);
                for t in 0..k {
                    new_lambda[t][w as usize] += phi[t];
                }
            }
            gamma[d] = g;
        }
        lambda = new_lambda;
    }
    Oracle { gamma, lambda }
}

fn argmax(xs: &[f64]) -> usize {
    (0..xs.len()).fold(0, |b, i| if xs[i] > xs[b] { i } else { b })
}

#[test]
fn disjoint_vocabularies_separate_like_batch_em() {
    let c = disjoint_corpus();
    let oracle = batch_em_oracle(&c, 2, 0.5, 0.5, 3);

    // The oracle itself must separate the two groups confidently.
    let oracle_topic_a = argmax(&oracle.gamma[0]);
    for d in 0..c.len() {
        let g = &oracle.gamma[d];
        let p = g[argmax(g)] / g.iter().sum::<f64>();
        assert!(p > 0.9, "oracle doc {d} max prob {p}");
        assert_eq!(argmax(g) == oracle_topic_a, is_a_doc(&c, d));
    }

    let cfg = LdaConfig {
        k: 2,
        batch_size: 5,
        passes: 30,
        seed: 11,
        ..Default::default()
    };
    let (model, train_topics) = lda::fit_with_topics(&c, &cfg).unwrap();
    let topic_a = train_topics[0].argmax();
    for d in 0..c.len() {
        let inferred = lda::infer(&model, &c.docs[d].tokens).topics;
        assert!(inferred.max() > 0.9, "doc {d}: {:?}", inferred.probs);
        assert_eq!(inferred.argmax() == topic_a, is_a_doc(&c, d), "doc {d}");
        // Inference with frozen topics agrees with the training-time gamma.
        assert_eq!(inferred.argmax(), train_topics[d].argmax());
    }

    // Top words of the A topic are exactly the A words, as in the oracle.
    let top: Vec<String> = lda::top_words(&model, topic_a, 5)
        .unwrap()
        .into_iter()
        .map(|(w, _)| w)
        .collect();
    let mut oracle_rank: Vec<usize> = (0..c.vocabulary.len()).collect();
    let row = &oracle.lambda[oracle_topic_a];
    oracle_rank.sort_by(|&x, &y| row[y].total_cmp(&row[x]));
    let mut oracle_top: Vec<String> = oracle_rank[..5]
        .iter()
        .map(|&w| c.vocabulary.word_of(w as u32).unwrap().to_string())
        .collect();
    let mut ours = top.clone();
    ours.sort();
    oracle_top.sort();
    assert_eq!(ours, oracle_top);
    assert!(ours.iter().all(|w| w.starts_with('a')));
}

#[test]
fn full_batch_bound_is_non_decreasing() {
    let c = disjoint_corpus();
    for seed in 0..3 {
        let cfg = LdaConfig {
            k: 3,
            batch_size: c.len(),
            passes: 1,
            seed,
            ..Default::default()
        };
        let mut trainer = LdaTrainer::new(&c, &cfg).unwrap();
        assert!(trainer.is_full_batch());
        let mut prev = f64::NEG_INFINITY;
        for it in 0..40 {
            trainer.pass().unwrap();
            let b = trainer.bound();
            assert!(b.is_finite());
            assert!(
                b >= prev - 1e-6 * prev.abs(),
                "seed {seed} iteration {it}: bound fell from {prev} to {b}"
            );
            prev = b;
        }
    }
}

#[test]
fn online_updates_keep_lambda_positive() {
    let c = disjoint_corpus();
    let cfg = LdaConfig {
        k: 4,
        batch_size: 3,
        passes: 1,
        kappa: 0.51,
        tau0: 0.0,
        ..Default::default()
    };
    let mut trainer = LdaTrainer::new(&c, &cfg).unwrap();
    for _ in 0..10 {
        trainer.pass().unwrap();
        assert!(trainer.snapshot().lambda().iter().all(|&x| x > 0.0 && x.is_finite()));
    }
}
