use std::collections::HashSet;

/// Rule-based sentence splitter.
///
/// A boundary is placed after a run of terminators (`. ! ? …`), optionally
/// followed by closing quotes or brackets, when whitespace follows and the
/// next word starts with an uppercase letter, an opening quote or a digit.
/// A `.` that ends a listed abbreviation never closes a sentence.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

const FRENCH_ABBREVIATIONS: &[&str] = &[
    "M.", "MM.", "Mme.", "Mmes.", "Mlle.", "Mlles.", "Dr.", "Pr.", "Me.", "Mgr.", "St.", "Ste.",
    "etc.", "cf.", "p.", "pp.", "art.", "al.", "av.", "bd.", "ex.", "vol.", "chap.", "n°.", "No.",
    "J.-C.", "c.-à-d.",
];

const ENGLISH_ABBREVIATIONS: &[&str] = &[
    "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "St.", "Jr.", "Sr.", "vs.", "etc.", "e.g.", "i.e.",
    "No.", "Fig.", "cf.",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '»' | '”' | '’' | ')' | ']')
}

fn opens_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || matches!(c, '"' | '\'' | '«' | '“' | '‘' | '(' | '—' | '-')
}

impl SentenceSplitter {
    pub fn new<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            abbreviations: abbreviations.into_iter().map(Into::into).collect(),
        }
    }

    /// Default abbreviation list for a language hint (`fr`, `en`, ...).
    /// Unknown hints get the French list, which also covers Wolof texts.
    pub fn for_language(lang_hint: &str) -> Self {
        match lang_hint.to_ascii_lowercase().as_str() {
            "en" | "english" => Self::new(ENGLISH_ABBREVIATIONS.iter().copied()),
            _ => Self::new(FRENCH_ABBREVIATIONS.iter().copied()),
        }
    }

    pub fn add_abbreviation(&mut self, abbreviation: impl Into<String>) {
        self.abbreviations.insert(abbreviation.into());
    }

    pub fn split(&self, text: &str) -> Vec<String> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut sentences = Vec::new();
        let mut start = 0;
        let mut k = 0;
        while k < chars.len() {
            let (_, c) = chars[k];
            if !is_terminator(c) {
                k += 1;
                continue;
            }
            let run_start = k;
            while k < chars.len() && is_terminator(chars[k].1) {
                k += 1;
            }
            // closers, possibly space-separated as in French typography
            loop {
                let mut j = k;
                while j < chars.len() && chars[j].1.is_whitespace() {
                    j += 1;
                }
                let closes = j < chars.len()
                    && is_closer(chars[j].1)
                    && (j == k || !matches!(chars[j].1, '"' | '\''));
                if closes {
                    k = j + 1;
                } else {
                    break;
                }
            }
            let end = chars.get(k).map_or(text.len(), |&(i, _)| i);
            let mut next = k;
            while next < chars.len() && chars[next].1.is_whitespace() {
                next += 1;
            }
            let boundary = next > k
                && next < chars.len()
                && opens_sentence(chars[next].1)
                && !self.is_abbreviation(text, start, chars[run_start].0, run_start, &chars);
            if boundary {
                push_trimmed(&mut sentences, &text[start..end]);
                start = chars[next].0;
                k = next;
            }
        }
        push_trimmed(&mut sentences, &text[start..]);
        sentences
    }

    /// True when the terminator run begins with a single `.` that ends a
    /// known abbreviation.
    fn is_abbreviation(
        &self,
        text: &str,
        sentence_start: usize,
        dot_byte: usize,
        run_start: usize,
        chars: &[(usize, char)],
    ) -> bool {
        if chars[run_start].1 != '.' || chars.get(run_start + 1).is_some_and(|&(_, c)| is_terminator(c)) {
            return false;
        }
        let word_start = text[sentence_start..dot_byte]
            .char_indices()
            .rev()
            .find(|&(_, c)| c.is_whitespace() || matches!(c, '(' | '«' | '"' | '“'))
            .map_or(sentence_start, |(i, c)| sentence_start + i + c.len_utf8());
        let word = &text[word_start..dot_byte + 1];
        self.abbreviations.contains(word)
    }
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// Splits paragraph text into sentences with the default rules for `lang_hint`.
pub fn sentence_split(text: &str, lang_hint: &str) -> Vec<String> {
    SentenceSplitter::for_language(lang_hint).split(text)
}
