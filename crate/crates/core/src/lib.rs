//! Latent topic discovery for short news posts and the replies they receive.
//!
//! Two interchangeable topic pipelines are provided: online variational
//! Bayes LDA ([`lda`]), and subword embeddings ([`embed`]) clustered with
//! k-means ([`cluster`]). Topic counts are chosen by C_V coherence
//! ([`coherence`]); replies inherit their parent post's topic and a
//! supervised classifier is scored on them ([`eval`]). [`project`] and
//! [`viz`] produce 2D topic maps and SVG reports, [`pipeline`] drives the
//! whole flow from the command line, and [`synthgen`] builds planted-topic
//! corpora with known ground truth.

pub(crate) mod binio;
pub mod error;

pub mod cluster;
pub mod coherence;
pub mod corpus;
pub mod embed;
pub mod eval;
pub mod lda;
pub mod pipeline;
pub mod project;
pub mod synthgen;
pub mod viz;

pub use error::{Error, Result};
