use std::collections::HashMap;
use std::fmt::Write as _;

use super::TextError;

pub type TokenId = usize;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const BOS: TokenId = 2;
pub const EOS: TokenId = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";

const SPECIALS: [&str; 4] = [PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN];

/// Token to id bijection. Ids 0..4 are the reserved specials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_of: HashMap<String, TokenId>,
    token_of: Vec<String>,
    frozen: bool,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// An unfrozen vocabulary holding only the specials.
    pub fn new() -> Self {
        let token_of: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let id_of = token_of.iter().cloned().zip(0..).collect();
        Self {
            id_of,
            token_of,
            frozen: false,
        }
    }

    /// Builds a frozen vocabulary from tokenized training sentences.
    ///
    /// Tokens with frequency `>= min_freq` get ids from 4 upward, ordered by
    /// descending frequency and then lexicographically.
    pub fn build<'a, I, S>(sentences: I, min_freq: usize) -> Self
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for sentence in sentences {
            for token in sentence {
                *counts.entry(token.as_ref()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(tok, n)| n >= min_freq.max(1) && !SPECIALS.contains(&tok))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut vocab = Self::new();
        for (token, _) in ranked {
            vocab
                .insert(token)
                .expect("fresh vocabulary is not frozen");
        }
        vocab.freeze();
        vocab
    }

    pub fn insert(&mut self, token: &str) -> Result<TokenId, TextError> {
        if let Some(&id) = self.id_of.get(token) {
            return Ok(id);
        }
        if self.frozen {
            return Err(TextError::FrozenVocabulary(token.to_string()));
        }
        let id = self.token_of.len();
        self.token_of.push(token.to_string());
        self.id_of.insert(token.to_string(), id);
        Ok(id)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_of.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.token_of.get(id).map(String::as_str)
    }

    /// Maps tokens to ids, substituting UNK for out-of-vocabulary tokens.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(UNK))
            .collect()
    }

    /// Maps ids back to tokens. Specials are returned as their literals.
    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<String>, TextError> {
        ids.iter()
            .map(|&id| {
                self.token(id)
                    .map(str::to_string)
                    .ok_or(TextError::UnknownId(id))
            })
            .collect()
    }

    /// `token TAB id` lines, sorted by id, specials included.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, token) in self.token_of.iter().enumerate() {
            let _ = writeln!(out, "{token}\t{id}");
        }
        out
    }

    /// Parses the `to_tsv` format. The result is frozen.
    pub fn from_tsv(text: &str) -> Result<Self, TextError> {
        let mut token_of = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = || TextError::MalformedVocabulary {
                line: lineno + 1,
                content: line.to_string(),
            };
            let (token, id) = line.rsplit_once('\t').ok_or_else(bad)?;
            let id: TokenId = id.trim().parse().map_err(|_| bad())?;
            if id != token_of.len() {
                return Err(bad());
            }
            token_of.push(token.to_string());
        }
        if token_of.len() < SPECIALS.len()
            || token_of.iter().zip(SPECIALS).any(|(t, s)| t != s)
        {
            return Err(TextError::MissingSpecials);
        }
        let mut id_of = HashMap::with_capacity(token_of.len());
        for (id, token) in token_of.iter().enumerate() {
            if id_of.insert(token.clone(), id).is_some() {
                return Err(TextError::DuplicateToken(token.clone()));
            }
        }
        Ok(Self {
            id_of,
            token_of,
            frozen: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn build(lines: &[&str], min_freq: usize) -> Vocabulary {
        let sents: Vec<Vec<String>> = lines.iter().map(|l| toks(l)).collect();
        Vocabulary::build(sents.iter().map(Vec::as_slice), min_freq)
    }

    #[test]
    fn frequency_order() {
        let v = build(&["a a b"], 1);
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), Some(5));
        assert_eq!(v.len(), 6);
    }

    #[test]
    fn lexicographic_tie_break() {
        let v = build(&["b a"], 1);
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), Some(5));
    }

    #[test]
    fn min_freq_maps_rare_tokens_to_unk() {
        let v = build(&["a a b"], 2);
        assert_eq!(v.id("a"), Some(4));
        assert_eq!(v.id("b"), None);
        assert_eq!(v.encode(&toks("a b")), vec![4, UNK]);
    }

    #[test]
    fn encode_substitutes_unk() {
        let v = build(&["a"], 1);
        assert_eq!(v.encode(&["a", "zzz"]), vec![4, 1]);
    }

    #[test]
    fn decode_returns_special_literals() {
        let v = build(&["a"], 1);
        assert_eq!(v.decode(&[4, 3]).unwrap(), vec!["a", EOS_TOKEN]);
        assert!(matches!(v.decode(&[99]), Err(TextError::UnknownId(99))));
    }

    #[test]
    fn round_trip_in_vocab() {
        let v = build(&["le chat dort", "le chien mange"], 1);
        let s = toks("le chien dort");
        assert_eq!(v.decode(&v.encode(&s)).unwrap(), s);
    }

    #[test]
    fn frozen_rejects_insertion() {
        let mut v = build(&["a"], 1);
        assert!(v.is_frozen());
        assert_eq!(v.insert("a").unwrap(), 4);
        assert!(matches!(v.insert("new"), Err(TextError::FrozenVocabulary(_))));
        let mut open = Vocabulary::new();
        assert_eq!(open.insert("x").unwrap(), 4);
    }

    #[test]
    fn tsv_round_trip_and_determinism() {
        let a = build(&["z y x x", "y w"], 1);
        let b = build(&["z y x x", "y w"], 1);
        assert_eq!(a.to_tsv(), b.to_tsv());
        assert!(a.to_tsv().starts_with("<pad>\t0\n<unk>\t1\n<s>\t2\n</s>\t3\n"));
        assert_eq!(Vocabulary::from_tsv(&a.to_tsv()).unwrap(), a);
    }

    #[test]
    fn tsv_rejects_gaps_and_missing_specials() {
        assert!(Vocabulary::from_tsv("<pad>\t0\n<unk>\t1\n").is_err());
        assert!(Vocabulary::from_tsv("<pad>\t0\n<unk>\t1\n<s>\t2\n</s>\t3\na\t5\n").is_err());
    }
}
