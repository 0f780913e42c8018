use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use super::AlignError;
use crate::text::Tokenizer;

/// Number of source and target sentences grouped by one bead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BeadKind {
    OneOne,
    OneZero,
    ZeroOne,
    TwoOne,
    OneTwo,
    TwoTwo,
}

impl BeadKind {
    pub const ALL: [BeadKind; 6] = [
        BeadKind::OneOne,
        BeadKind::OneZero,
        BeadKind::ZeroOne,
        BeadKind::TwoOne,
        BeadKind::OneTwo,
        BeadKind::TwoTwo,
    ];

    /// Order in which equal-cost candidates are preferred: 1-1 first, then
    /// the remaining kinds by their `m-n` label.
    pub const PREFERENCE: [BeadKind; 6] = [
        BeadKind::OneOne,
        BeadKind::ZeroOne,
        BeadKind::OneZero,
        BeadKind::OneTwo,
        BeadKind::TwoOne,
        BeadKind::TwoTwo,
    ];

    /// (source sentences, target sentences)
    pub fn sizes(self) -> (usize, usize) {
        match self {
            BeadKind::OneOne => (1, 1),
            BeadKind::OneZero => (1, 0),
            BeadKind::ZeroOne => (0, 1),
            BeadKind::TwoOne => (2, 1),
            BeadKind::OneTwo => (1, 2),
            BeadKind::TwoTwo => (2, 2),
        }
    }

    pub fn from_sizes(src: usize, tgt: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.sizes() == (src, tgt))
    }

    /// Kind with the two sides swapped.
    pub fn transposed(self) -> Self {
        let (s, t) = self.sizes();
        Self::from_sizes(t, s).expect("kind set is closed under transposition")
    }

    pub fn is_matched(self) -> bool {
        let (s, t) = self.sizes();
        s > 0 && t > 0
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (s, t) = self.sizes();
        write!(f, "{s}-{t}")
    }
}

impl FromStr for BeadKind {
    type Err = AlignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AlignError::MalformedLadder(format!("unknown bead kind {s:?}"));
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let a = a.parse().map_err(|_| bad())?;
        let b = b.parse().map_err(|_| bad())?;
        Self::from_sizes(a, b).ok_or_else(bad)
    }
}

/// Prior probability of each bead kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeadPriors([f64; 6]);

impl BeadPriors {
    pub fn new(f: impl Fn(BeadKind) -> f64) -> Result<Self, AlignError> {
        let priors = BeadKind::ALL.map(f);
        if priors.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(AlignError::InvalidConfig("bead priors must be positive".into()));
        }
        Ok(Self(priors))
    }

    pub fn get(&self, kind: BeadKind) -> f64 {
        self.0[kind.index()]
    }

    /// Same priors with source and target roles swapped.
    pub fn transposed(&self) -> Self {
        Self(BeadKind::ALL.map(|k| self.get(k.transposed())))
    }
}

impl Default for BeadPriors {
    /// Gale & Church's bead frequencies.
    fn default() -> Self {
        Self(BeadKind::ALL.map(|k| match k {
            BeadKind::OneOne => 0.89,
            BeadKind::OneZero | BeadKind::ZeroOne => 0.0099,
            BeadKind::TwoOne | BeadKind::OneTwo => 0.089 / 2.0,
            BeadKind::TwoTwo => 0.011,
        }))
    }
}

/// Bilingual word list: source token to the set of its target translations.
/// Entries are stored lowercased.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    entries: HashMap<String, HashSet<String>>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: &str, target: &str) {
        self.entries
            .entry(source.to_lowercase())
            .or_default()
            .insert(target.to_lowercase());
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(HashSet::len).sum()
    }

    pub fn translations(&self, source: &str) -> Option<&HashSet<String>> {
        self.entries.get(source)
    }

    /// Target-to-source dictionary.
    pub fn inverted(&self) -> Self {
        let mut inv = Self::new();
        for (s, ts) in &self.entries {
            for t in ts {
                inv.insert(t, s);
            }
        }
        inv
    }

    /// Parses `source TAB target` lines; blank lines are skipped.
    pub fn from_tsv(text: &str) -> Result<Self, AlignError> {
        let mut dict = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (s, t) = line
                .split_once('\t')
                .filter(|(s, t)| !s.trim().is_empty() && !t.trim().is_empty())
                .ok_or_else(|| AlignError::MalformedDictionary {
                    line: i + 1,
                    content: line.to_string(),
                })?;
            dict.insert(s.trim(), t.trim());
        }
        Ok(dict)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignerConfig {
    /// Expected target characters per source character.
    pub mean_length_ratio: f64,
    /// Variance of the length difference per source character.
    pub length_variance: f64,
    pub bead_priors: BeadPriors,
    /// Weight of the dictionary score subtracted from each matched bead.
    pub dict_weight: f64,
    pub dictionary: Option<Dictionary>,
    /// Largest `n_src * n_tgt` the dynamic program will accept.
    pub max_cells: usize,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        Self {
            mean_length_ratio: 1.0,
            length_variance: 6.8,
            bead_priors: BeadPriors::default(),
            dict_weight: 1.5,
            dictionary: None,
            max_cells: 4_000_000,
        }
    }
}

impl AlignerConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.mean_length_ratio) || !positive(self.length_variance) {
            return Err(AlignError::InvalidConfig(
                "length ratio and variance must be positive".into(),
            ));
        }
        if !(self.dict_weight >= 0.0 && self.dict_weight.is_finite()) {
            return Err(AlignError::InvalidConfig("dictionary weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// Total target characters over total source characters, or 1 when either
/// side is empty.
pub fn estimate_length_ratio<S: AsRef<str>>(src: &[S], tgt: &[S]) -> f64 {
    let chars = |xs: &[S]| xs.iter().map(|s| s.as_ref().chars().count()).sum::<usize>();
    let (s, t) = (chars(src), chars(tgt));
    if s == 0 || t == 0 {
        1.0
    } else {
        t as f64 / s as f64
    }
}

/// Standard normal CDF, Abramowitz & Stegun 26.2.17 (|error| < 7.5e-8).
pub fn normal_cdf(x: f64) -> f64 {
    const P: f64 = 0.231_641_9;
    const B: [f64; 5] = [
        0.319_381_530,
        -0.356_563_782,
        1.781_477_937,
        -1.821_255_978,
        1.330_274_429,
    ];
    let z = x.abs();
    let t = 1.0 / (1.0 + P * z);
    let poly = t * (B[0] + t * (B[1] + t * (B[2] + t * (B[3] + t * B[4]))));
    let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let upper = density * poly;
    if x >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}

const MIN_MATCH_PROBABILITY: f64 = 1e-100;

/// Gale-Church bead cost from character lengths: the negative log prior of
/// the bead kind plus, for matched kinds, the negative log of the two-sided
/// tail probability of the normalized length difference.
pub fn length_cost(l_src: usize, l_tgt: usize, kind: BeadKind, cfg: &AlignerConfig) -> f64 {
    let prior_cost = -cfg.bead_priors.get(kind).ln();
    if !kind.is_matched() {
        return prior_cost;
    }
    let ls = (l_src as f64).max(1.0);
    let delta = (l_tgt as f64 - ls * cfg.mean_length_ratio) / (ls * cfg.length_variance).sqrt();
    let p = (2.0 * (1.0 - normal_cdf(delta.abs()))).clamp(MIN_MATCH_PROBABILITY, 1.0);
    prior_cost - p.ln()
}

fn dict_tokens(sentence: &str) -> impl Iterator<Item = String> {
    const TOKENIZER: Tokenizer = Tokenizer {
        detach_punctuation: true,
        lowercase: true,
    };
    TOKENIZER.tokenize(sentence).into_iter()
}

/// Fraction of distinct (lowercased) source tokens with at least one
/// dictionary translation among the target tokens.
pub fn dict_score<S: AsRef<str>>(src: &[S], tgt: &[S], dictionary: &Dictionary) -> f64 {
    if dictionary.is_empty() {
        return 0.0;
    }
    let src_tokens: HashSet<String> = src.iter().flat_map(|s| dict_tokens(s.as_ref())).collect();
    let tgt_tokens: HashSet<String> = tgt.iter().flat_map(|s| dict_tokens(s.as_ref())).collect();
    coverage(src_tokens.iter().map(String::as_str), &tgt_tokens, dictionary)
}

pub(crate) fn coverage<'a>(
    src_tokens: impl Iterator<Item = &'a str>,
    tgt_tokens: &HashSet<String>,
    dictionary: &Dictionary,
) -> f64 {
    let mut total = 0usize;
    let mut covered = 0usize;
    for tok in src_tokens {
        total += 1;
        if dictionary
            .translations(tok)
            .is_some_and(|ts| ts.iter().any(|t| tgt_tokens.contains(t)))
        {
            covered += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    }
}

/// Per-sentence data the dynamic program reuses across cells.
pub(crate) struct SentenceFeatures {
    pub chars: usize,
    pub tokens: HashSet<String>,
}

impl SentenceFeatures {
    pub fn new(sentence: &str, with_tokens: bool) -> Self {
        Self {
            chars: sentence.chars().count(),
            tokens: if with_tokens {
                dict_tokens(sentence).collect()
            } else {
                HashSet::new()
            },
        }
    }
}
