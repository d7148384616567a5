//! Ingestion, text normalisation and vocabulary construction.

mod preprocess;
mod records;
mod vocab;

pub use preprocess::{load_lemma_table, preprocess, PreprocessConfig};
pub use records::{flag_orphans, load_corpus, write_records, FieldMap, LineError, LoadReport, PostKind, PostRecord};
pub use vocab::{build_corpus, BuildReport, Document, TokenizedCorpus, Vocabulary};
