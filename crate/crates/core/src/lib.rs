//! Log template extraction with a two-tier pre-query cache in front of an
//! in-context-learning LLM.
//!
//! The pipeline has three stages:
//!
//! 1. [`preprocess`] strips headers and deduplicates; [`sampler`] draws two
//!    small, complexity-weighted candidate pools with 1-D DBSCAN.
//! 2. [`metatrain`] turns the meta pool into a 0-shot..K-shot fine-tuning file.
//! 3. [`pipeline`] parses a log stream: [`cache`] answers repeats and
//!    structural matches; on a miss, [`selector`] retrieves BM25 neighbours
//!    from the inference pool, [`llm`] builds the prompt and queries the model,
//!    and the answer is cached.
//!
//! [`evaluator`] scores the output against ground truth.

pub mod cache;
pub mod evaluator;
pub mod exec;
pub mod llm;
pub mod metatrain;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod sampler;
pub mod selector;

pub use exec::Execution;
pub use model::{
    normalize, split_template, tokenize, LogRecord, ParseResult, Source, Template, TokenizedLog, WILDCARD,
};
