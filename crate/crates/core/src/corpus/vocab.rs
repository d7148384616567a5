use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use super::preprocess::{preprocess, PreprocessConfig};
use super::records::{PostKind, PostRecord};
use crate::binio::{fnv1a64, BinReader, BinWriter};
use crate::error::{Error, Result};

const CORPUS_MAGIC: &[u8] = b"TFCORP1";

/// Word/id bijection with per-word document and collection frequencies.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
    doc_freq: Vec<u64>,
    coll_freq: Vec<u64>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(word, df, cf)` triples; ids follow input order.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, u64, u64)>) -> Result<Self> {
        let mut v = Vocabulary::default();
        for (word, df, cf) in entries {
            if df == 0 || cf == 0 {
                return Err(Error::invalid(format!("word {word:?} has zero frequency")));
            }
            if v.index.contains_key(&word) {
                return Err(Error::invalid(format!("duplicate word {word:?}")));
            }
            v.index.insert(word.clone(), v.words.len() as u32);
            v.words.push(word);
            v.doc_freq.push(df);
            v.coll_freq.push(cf);
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word_of(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn doc_freq(&self, id: u32) -> u64 {
        self.doc_freq[id as usize]
    }

    pub fn coll_freq(&self, id: u32) -> u64 {
        self.coll_freq[id as usize]
    }

    /// Content hash of the ordered word list, used to pair models with corpora.
    pub fn content_hash(&self) -> u64 {
        let mut bytes = Vec::new();
        for w in &self.words {
            bytes.extend_from_slice(w.as_bytes());
            bytes.push(0);
        }
        fnv1a64(&bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<u32>,
}

/// Documents as word-id sequences over a shared vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedCorpus {
    pub docs: Vec<Document>,
    pub vocabulary: Vocabulary,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    /// Ids of records with no surviving tokens.
    pub dropped: Vec<String>,
}

impl TokenizedCorpus {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }

    /// Token strings of one document.
    pub fn doc_words(&self, doc: usize) -> Vec<&str> {
        self.docs[doc]
            .tokens
            .iter()
            .map(|&t| self.vocabulary.words[t as usize].as_str())
            .collect()
    }

    /// Builds a corpus directly from token lists, keeping every word.
    pub fn from_token_lists<S: AsRef<str>>(docs: &[(String, Vec<S>)]) -> Result<Self> {
        let owned: Vec<(String, Vec<String>)> = docs
            .iter()
            .map(|(id, toks)| (id.clone(), toks.iter().map(|t| t.as_ref().to_string()).collect()))
            .collect();
        let (corpus, _) = assemble(owned, 1)?;
        Ok(corpus)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BinWriter::create(path, CORPUS_MAGIC)?;
        w.len(self.vocabulary.len())?;
        for (i, word) in self.vocabulary.words.iter().enumerate() {
            w.str(word)?;
            w.u64(self.vocabulary.doc_freq[i])?;
            w.u64(self.vocabulary.coll_freq[i])?;
        }
        w.len(self.docs.len())?;
        for d in &self.docs {
            w.str(&d.id)?;
            w.len(d.tokens.len())?;
            w.u32s(&d.tokens)?;
        }
        w.finish()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BinReader::open(path, CORPUS_MAGIC)?;
        let nv = r.len()?;
        let mut entries = Vec::with_capacity(nv);
        for _ in 0..nv {
            let word = r.str()?;
            let df = r.u64()?;
            let cf = r.u64()?;
            entries.push((word, df, cf));
        }
        let vocabulary = Vocabulary::from_entries(entries).map_err(|e| Error::format(path, e.to_string()))?;
        let nd = r.len()?;
        let mut docs = Vec::with_capacity(nd);
        for _ in 0..nd {
            let id = r.str()?;
            let n = r.len()?;
            let tokens = r.u32s(n)?;
            if tokens.iter().any(|&t| t as usize >= nv) {
                return Err(Error::format(path, format!("doc {id}: token id out of range")));
            }
            docs.push(Document { id, tokens });
        }
        r.expect_eof()?;
        Ok(TokenizedCorpus { docs, vocabulary })
    }
}

/// Tokenises records (optionally only one kind) and builds the vocabulary.
///
/// Words with document frequency below `min_df` are removed; documents left
/// without tokens are dropped and listed in the report. Word ids follow
/// first appearance in record order.
pub fn build_corpus(
    records: &[PostRecord],
    kind: Option<PostKind>,
    cfg: &PreprocessConfig,
    min_df: u64,
) -> Result<(TokenizedCorpus, BuildReport)> {
    if min_df < 1 {
        return Err(Error::invalid("min_df must be >= 1"));
    }
    cfg.validate()?;
    let selected: Vec<&PostRecord> = records.iter().filter(|r| kind.is_none_or(|k| r.kind == k)).collect();
    let tokenized: Vec<(String, Vec<String>)> = selected
        .par_iter()
        .map(|r| (r.id.clone(), preprocess(&r.text, cfg)))
        .collect();
    assemble(tokenized, min_df)
}

fn assemble(tokenized: Vec<(String, Vec<String>)>, min_df: u64) -> Result<(TokenizedCorpus, BuildReport)> {
    let n_input = tokenized.len();
    // First-appearance order, with df/cf counted over the full input.
    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, (u64, u64)> = HashMap::new();
    for (_, toks) in &tokenized {
        let mut seen_here: std::collections::HashSet<&str> = Default::default();
        for t in toks {
            let e = counts.entry(t.clone()).or_insert_with(|| {
                order.push(t.clone());
                (0, 0)
            });
            e.1 += 1;
            if seen_here.insert(t) {
                e.0 += 1;
            }
        }
    }
    let vocabulary = Vocabulary::from_entries(order.into_iter().filter(|w| counts[w].0 >= min_df).map(|w| {
        let (df, cf) = counts[&w];
        (w, df, cf)
    }))?;

    let mut docs = Vec::new();
    let mut report = BuildReport::default();
    for (id, toks) in tokenized {
        let ids: Vec<u32> = toks.iter().filter_map(|t| vocabulary.id_of(t)).collect();
        if ids.is_empty() {
            report.dropped.push(id);
        } else {
            docs.push(Document { id, tokens: ids });
        }
    }
    if docs.is_empty() {
        return Err(Error::Empty(format!(
            "all {n_input} documents are empty after preprocessing (min_df = {min_df})"
        )));
    }
    Ok((TokenizedCorpus { docs, vocabulary }, report))
}
