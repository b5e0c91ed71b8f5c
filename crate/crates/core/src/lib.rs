//! De-identification of free text: an offset-preserving tokenizer, rule
//! recognizers, a pluggable NER backend, span merging and suppression, plus
//! IOB2 corpus tooling, span-level scoring and inter-annotator agreement.

pub mod config;
pub mod corpus;
pub mod dataset_builder;
pub mod deidentify;
pub mod error;
pub mod eval;
pub mod ner_adapter;
pub mod recognizers;
pub mod tokenizer;

pub use config::{load_config, PipelineConfig};
pub use corpus::{Annotation, Document, Label, Tag, TagMode, TaggedToken, Token};
pub use deidentify::{deidentify_corpus, deidentify_document, merge_spans, suppress, DeidReport, Pipeline, SelectedSpan, SuppressionStrategy};
pub use error::{BackendError, Error, Result};
pub use eval::{evaluate_corpus, kappa_from_agreements, metrics, EvalMode, EvalTable, OverlapRule};
pub use recognizers::{CandidateSpan, Lexicon, RecognizerSet};
pub use tokenizer::{tokenize, TokenizerConfig};
