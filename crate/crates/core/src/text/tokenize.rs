//! Word-level tokenization.

/// Whitespace tokenizer that optionally peels punctuation off word edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tokenizer {
    /// Emit leading/trailing punctuation characters as their own tokens.
    pub detach_punctuation: bool,
    pub lowercase: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self {
            detach_punctuation: true,
            lowercase: false,
        }
    }
}

/// Punctuation for edge detachment: ASCII punctuation plus the quote and
/// dash characters common in French typography.
pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '«' | '»' | '…' | '“' | '”' | '‘' | '’' | '„' | '–' | '—' | '¿' | '¡' | '·'
        )
}

impl Tokenizer {
    /// Whitespace-only splitting, the raw "word count" view of a sentence.
    pub fn whitespace() -> Self {
        Self {
            detach_punctuation: false,
            lowercase: false,
        }
    }

    pub fn tokenize(&self, sentence: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        for word in sentence.split_whitespace() {
            if self.detach_punctuation {
                self.push_detached(word, &mut tokens);
            } else {
                tokens.push(self.case(word));
            }
        }
        tokens
    }

    /// Number of tokens without allocating them.
    pub fn count(&self, sentence: &str) -> usize {
        if !self.detach_punctuation {
            return sentence.split_whitespace().count();
        }
        sentence
            .split_whitespace()
            .map(|word| {
                let (lead, core, trail) = split_edges(word);
                lead.chars().count() + usize::from(!core.is_empty()) + trail.chars().count()
            })
            .sum()
    }

    fn push_detached(&self, word: &str, out: &mut Vec<String>) {
        let (lead, core, trail) = split_edges(word);
        out.extend(lead.chars().map(String::from));
        if !core.is_empty() {
            out.push(self.case(core));
        }
        out.extend(trail.chars().map(String::from));
    }

    fn case(&self, s: &str) -> String {
        if self.lowercase {
            s.to_lowercase()
        } else {
            s.to_string()
        }
    }
}

/// Splits a word into (leading punctuation, core, trailing punctuation).
/// A word made only of punctuation is returned entirely as the leading part.
fn split_edges(word: &str) -> (&str, &str, &str) {
    let start = word
        .char_indices()
        .find(|&(_, c)| !is_punctuation(c))
        .map_or(word.len(), |(i, _)| i);
    if start == word.len() {
        return (word, "", "");
    }
    let end = word
        .char_indices()
        .rev()
        .find(|&(_, c)| !is_punctuation(c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(start);
    (&word[..start], &word[start..end], &word[end..])
}

/// Convenience wrapper around the default tokenizer.
pub fn tokenize(sentence: &str) -> Vec<String> {
    Tokenizer::default().tokenize(sentence)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detaches_final_period() {
        assert_eq!(tokenize("Je mange."), vec!["Je", "mange", "."]);
    }

    #[test]
    fn collapses_whitespace() {
        assert_eq!(tokenize("a  b"), vec!["a", "b"]);
        assert_eq!(tokenize("  a\tb \n"), vec!["a", "b"]);
    }

    #[test]
    fn empty_sentence() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn keeps_interior_apostrophes_and_splits_quotes() {
        assert_eq!(
            tokenize("«l'homme» dit-il..."),
            vec!["«", "l'homme", "»", "dit-il", ".", ".", "."]
        );
    }

    #[test]
    fn lowercase_is_opt_in() {
        let t = Tokenizer {
            lowercase: true,
            ..Tokenizer::default()
        };
        assert_eq!(t.tokenize("Ëlle Lit!"), vec!["ëlle", "lit", "!"]);
        assert_eq!(tokenize("Ëlle"), vec!["Ëlle"]);
    }

    #[test]
    fn whitespace_mode_keeps_punctuation_attached() {
        assert_eq!(Tokenizer::whitespace().tokenize("Je mange."), vec!["Je", "mange."]);
    }

    #[test]
    fn count_matches_tokenize() {
        for s in ["Je mange.", "« Oui ! »", "...", "a  b", "", "l'eau, s'il-vous-plaît?"] {
            for t in [Tokenizer::default(), Tokenizer::whitespace()] {
                assert_eq!(t.count(s), t.tokenize(s).len(), "{s:?}");
            }
        }
    }
}
