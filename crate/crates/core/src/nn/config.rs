use serde::{Deserialize, Serialize};

use super::NnError;

/// Architecture of an LSTM encoder-decoder. The two switches give the four
/// model variants: baseline, attention, bidirectional, and both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub bidirectional: bool,
    pub attention: bool,
    /// Decoder dropout on output features, in `[0, 1)`.
    pub dropout_rate: f64,
    pub src_vocab_size: usize,
    pub tgt_vocab_size: usize,
    pub max_decode_len: usize,
}

pub const DEFAULT_EMBED_DIM: usize = 128;
pub const DEFAULT_HIDDEN_DIM: usize = 300;
pub const DEFAULT_DROPOUT: f64 = 0.2;
pub const DEFAULT_MAX_DECODE_LEN: usize = 50;

impl ModelConfig {
    /// Baseline (unidirectional, no attention) model with default sizes.
    pub fn new(src_vocab_size: usize, tgt_vocab_size: usize) -> Self {
        Self {
            embed_dim: DEFAULT_EMBED_DIM,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            bidirectional: false,
            attention: false,
            dropout_rate: DEFAULT_DROPOUT,
            src_vocab_size,
            tgt_vocab_size,
            max_decode_len: DEFAULT_MAX_DECODE_LEN,
        }
    }

    pub fn with_variant(mut self, bidirectional: bool, attention: bool) -> Self {
        self.bidirectional = bidirectional;
        self.attention = attention;
        self
    }

    pub fn with_dims(mut self, embed_dim: usize, hidden_dim: usize) -> Self {
        self.embed_dim = embed_dim;
        self.hidden_dim = hidden_dim;
        self
    }

    /// Width of one encoder state: `H`, or `2H` when bidirectional.
    pub fn encoder_dim(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden_dim
        } else {
            self.hidden_dim
        }
    }

    /// Width of the decoder features fed to the output projection.
    pub fn feature_dim(&self) -> usize {
        if self.attention {
            self.hidden_dim + self.encoder_dim()
        } else {
            self.hidden_dim
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match (self.bidirectional, self.attention) {
            (false, false) => "lstm",
            (false, true) => "lstm+attention",
            (true, false) => "lstm+bidirectional",
            (true, true) => "lstm+bidirectional+attention",
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(NnError::InvalidConfig("dimensions must be positive".into()));
        }
        if self.src_vocab_size < 5 || self.tgt_vocab_size < 5 {
            return Err(NnError::InvalidConfig(
                "vocabularies need the four specials plus at least one token".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NnError::InvalidConfig(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if self.max_decode_len == 0 {
            return Err(NnError::InvalidConfig("max_decode_len must be positive".into()));
        }
        Ok(())
    }
}
