//! Sentence splitting and hybrid length/dictionary sentence alignment.
//!
//! The aligner is a Gale-Church style dynamic program over character
//! lengths, with each matched bead's cost lowered by a weighted bilingual
//! dictionary coverage score.

mod cost;
mod ladder;
mod split;

pub use cost::{
    dict_score, estimate_length_ratio, length_cost, normal_cdf, AlignerConfig, BeadKind,
    BeadPriors, Dictionary,
};
pub use ladder::{align_ladder, extract_pairs, AlignmentLadder, Bead, BeadScorer};
pub use split::{sentence_split, SentenceSplitter};

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("alignment needs {cells} cells, above the limit of {limit}")]
    SizeLimitExceeded { cells: usize, limit: usize },
    #[error("ladder does not match the sentence lists: {0}")]
    LadderMismatch(String),
    #[error("malformed ladder line: {0}")]
    MalformedLadder(String),
    #[error("malformed dictionary line {line}: {content:?}")]
    MalformedDictionary { line: usize, content: String },
    #[error("invalid aligner configuration: {0}")]
    InvalidConfig(String),
}
