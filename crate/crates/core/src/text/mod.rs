//! Tokenization, vocabularies and padded id batches.

mod batch;
mod tokenize;
mod vocab;

pub use batch::{pad_batch, EncodedBatch, EncodedPair};
pub use tokenize::{is_punctuation, tokenize, Tokenizer};
pub use vocab::{
    TokenId, Vocabulary, BOS, BOS_TOKEN, EOS, EOS_TOKEN, PAD, PAD_TOKEN, UNK, UNK_TOKEN,
};

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("id {0} is outside the vocabulary")]
    UnknownId(TokenId),
    #[error("vocabulary is frozen; cannot insert {0:?}")]
    FrozenVocabulary(String),
    #[error("malformed vocabulary line {line}: {content:?}")]
    MalformedVocabulary { line: usize, content: String },
    #[error("vocabulary does not start with the reserved specials")]
    MissingSpecials,
    #[error("duplicate vocabulary token {0:?}")]
    DuplicateToken(String),
}
