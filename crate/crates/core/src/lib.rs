//! Sentence alignment, corpus tooling, LSTM encoder-decoder translation
//! models with hand-written backpropagation, and smoothed BLEU evaluation
//! for low-resource bitexts.

pub mod align;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod nn;
pub mod text;
pub mod train;
