//! Toolkit for German legal named-entity recognition over the LER corpus:
//! CoNLL reading and writing, IOB chunking, entity-level scoring, stratified
//! fold construction and subword label projection.

pub mod align;
pub mod chunk;
pub mod conll;
pub mod folds;
pub mod metrics;
pub mod schema;

pub use chunk::{chunk, unchunk, ChunkPolicy, EntitySpan};
pub use conll::{parse_corpus, parse_str, write_corpus, Corpus, ReadOptions, Sentence, Token};
pub use metrics::{evaluate, EvaluationReport};
pub use schema::{parse_tag, CoarseClass, EntityClass, FineClass, Granularity, LabelTag, ParseMode};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
