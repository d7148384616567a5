use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};

/// Text normalisation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    /// Surface form to lemma, both lowercase. `None` means identity.
    pub lemma_table: Option<HashMap<String, String>>,
    /// Tokens with fewer characters are dropped.
    pub min_token_len: usize,
    pub keep_emoji: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lemma_table: None,
            min_token_len: 2,
            keep_emoji: false,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_token_len < 1 {
            return Err(Error::invalid("min_token_len must be >= 1"));
        }
        if let Some(table) = &self.lemma_table {
            for (k, v) in table {
                if *k != k.to_lowercase() || *v != v.to_lowercase() {
                    return Err(Error::invalid(format!(
                        "lemma table entry {k:?} -> {v:?} is not lowercase"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").expect("static regex"))
}

fn is_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ClosePunctuation
            | ConnectorPunctuation
            | DashPunctuation
            | FinalPunctuation
            | InitialPunctuation
            | OpenPunctuation
            | OtherPunctuation
    )
}

fn is_emoji_like(c: char) -> bool {
    // Variation selector 16 and the zero-width joiner glue emoji sequences.
    c == '\u{FE0F}' || c == '\u{200D}' || get_general_category(c) == GeneralCategory::OtherSymbol
}

/// Normalises a raw post into tokens.
///
/// Steps run in a fixed order: strip URLs, drop `#`/`@` tokens, lowercase,
/// delete punctuation, split on whitespace, lemmatise, drop short tokens.
pub fn preprocess(text: &str, cfg: &PreprocessConfig) -> Vec<String> {
    let no_urls = url_pattern().replace_all(text, " ");
    let kept: Vec<&str> = no_urls
        .split_whitespace()
        .filter(|t| !t.starts_with('#') && !t.starts_with('@'))
        .collect();
    let lowered = kept.join(" ").to_lowercase();
    let cleaned: String = lowered
        .chars()
        .filter(|&c| !is_punctuation(c) && (cfg.keep_emoji || !is_emoji_like(c)))
        .collect();
    cleaned
        .split_whitespace()
        .map(|tok| match &cfg.lemma_table {
            Some(table) => table.get(tok).cloned().unwrap_or_else(|| tok.to_string()),
            None => tok.to_string(),
        })
        .filter(|tok| tok.chars().count() >= cfg.min_token_len)
        .collect()
}

/// Reads a two-column `surface<TAB>lemma` table. Blank lines and lines
/// starting with `#` are ignored; entries are lowercased.
pub fn load_lemma_table(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(surface), Some(lemma), None) if !surface.is_empty() && !lemma.is_empty() => {
                table.insert(surface.to_lowercase(), lemma.to_lowercase());
            }
            _ => {
                return Err(Error::format(
                    path,
                    format!("line {}: expected two tab-separated columns", i + 1),
                ))
            }
        }
    }
    Ok(table)
}
