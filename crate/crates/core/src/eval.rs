//! Sentence-level cumulative BLEU with Chen & Cherry smoothing method 4.
//!
//! Scores are computed per sentence against a single reference and
//! macro-averaged over the corpus. Reported values are percentages.

use std::collections::HashMap;
use std::fmt::Write as _;

/// Cumulative BLEU weight vectors for orders 1..4.
pub const BLEU_WEIGHTS: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.5, 0.5, 0.0, 0.0],
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0],
    [0.25, 0.25, 0.25, 0.25],
];

/// Default `k` for smoothing method 4.
pub const METHOD4_K: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{hypotheses} hypotheses but {references} references")]
    CountMismatch { hypotheses: usize, references: usize },
    #[error("cannot evaluate an empty corpus")]
    Empty,
}

/// Clipped n-gram matches and hypothesis n-gram count for one order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Precision {
    pub numerator: usize,
    pub denominator: usize,
}

impl Precision {
    /// Ratio with the denominator floored at 1, so an order longer than the
    /// hypothesis reads as 0/1.
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator.max(1) as f64
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts
            .entry(w.iter().map(AsRef::as_ref).collect())
            .or_insert(0) += 1;
    }
    counts
}

/// Modified n-gram precision: each hypothesis n-gram count is clipped by
/// its count in the reference.
pub fn modified_precision<S: AsRef<str>>(hyp: &[S], reference: &[S], n: usize) -> Precision {
    assert!(n >= 1, "n-gram order must be positive");
    let hyp_counts = ngram_counts(hyp, n);
    let ref_counts = ngram_counts(reference, n);
    let numerator = hyp_counts
        .iter()
        .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    Precision {
        numerator,
        denominator: (hyp.len() + 1).saturating_sub(n),
    }
}

/// The four per-order precisions of a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NGramProfile {
    pub orders: [Precision; 4],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl NGramProfile {
    pub fn new<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Self {
        Self {
            orders: std::array::from_fn(|i| modified_precision(hyp, reference, i + 1)),
            hyp_len: hyp.len(),
            ref_len: reference.len(),
        }
    }
}

pub fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len >= ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

/// Smoothing method 4: each zero-match order, in ascending order, gets
/// `1 / (2^c * k / ln(hyp_len))` matches, with `c` counting the zero orders
/// seen so far from 1. Hypotheses of length <= 1 are left unsmoothed.
pub fn smooth_method4(precisions: &[Precision], hyp_len: usize, k: f64) -> Vec<f64> {
    let mut counter = 1;
    precisions
        .iter()
        .map(|p| {
            if p.numerator == 0 && hyp_len > 1 {
                let matches = 1.0 / (2f64.powi(counter) * k / (hyp_len as f64).ln());
                counter += 1;
                matches / p.denominator.max(1) as f64
            } else {
                p.value()
            }
        })
        .collect()
}

/// Brevity penalty times the weighted geometric mean of the smoothed
/// precisions. Zero as soon as any weighted order has zero precision.
pub fn cumulative_bleu<S: AsRef<str>>(hyp: &[S], reference: &[S], weights: &[f64; 4]) -> f64 {
    let profile = NGramProfile::new(hyp, reference);
    bleu_from_profile(&profile, weights, METHOD4_K)
}

pub fn bleu_from_profile(profile: &NGramProfile, weights: &[f64; 4], k: f64) -> f64 {
    let bp = brevity_penalty(profile.hyp_len, profile.ref_len);
    if bp == 0.0 {
        return 0.0;
    }
    let smoothed = smooth_method4(&profile.orders, profile.hyp_len, k);
    let mut log_sum = 0.0;
    for (&w, &p) in weights.iter().zip(&smoothed) {
        if w > 0.0 {
            if p <= 0.0 {
                return 0.0;
            }
            log_sum += w * p.ln();
        }
    }
    bp * log_sum.exp()
}

/// BLEU-1..4 for one sentence, as fractions in [0, 1].
pub fn sentence_bleu<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> [f64; 4] {
    let profile = NGramProfile::new(hyp, reference);
    BLEU_WEIGHTS.map(|w| bleu_from_profile(&profile, &w, METHOD4_K))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    /// Macro-averaged cumulative BLEU-1..4, in percent.
    pub bleu: [f64; 4],
    /// Macro-averaged brevity penalty.
    pub brevity_penalty: f64,
    /// Corpus-summed per-order precisions (unsmoothed).
    pub precisions: [f64; 4],
    pub sentences: usize,
    /// Teacher-forced token accuracy in percent, when available.
    pub accuracy: Option<f64>,
}

impl BleuReport {
    pub const HEADER: &'static str = "model\taccuracy\tbleu1\tbleu2\tbleu3\tbleu4";

    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.accuracy = Some(accuracy * 100.0);
        self
    }

    /// Tab-separated row: model, accuracy, BLEU-1..4 (percentages, two decimals).
    pub fn to_row(&self, model: &str) -> String {
        let mut row = String::from(model);
        match self.accuracy {
            Some(a) => {
                let _ = write!(row, "\t{a:.2}");
            }
            None => row.push_str("\t-"),
        }
        for b in self.bleu {
            let _ = write!(row, "\t{b:.2}");
        }
        row
    }
}

/// Macro-averaged sentence BLEU over tokenized hypothesis/reference pairs.
pub fn evaluate_corpus<S: AsRef<str>>(
    hypotheses: &[Vec<S>],
    references: &[Vec<S>],
) -> Result<BleuReport, EvalError> {
    if hypotheses.len() != references.len() {
        return Err(EvalError::CountMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = hypotheses.len() as f64;
    let mut bleu = [0.0; 4];
    let mut bp_sum = 0.0;
    let mut num = [0usize; 4];
    let mut den = [0usize; 4];
    for (hyp, reference) in hypotheses.iter().zip(references) {
        let profile = NGramProfile::new(hyp, reference);
        for (acc, w) in bleu.iter_mut().zip(&BLEU_WEIGHTS) {
            *acc += bleu_from_profile(&profile, w, METHOD4_K);
        }
        bp_sum += brevity_penalty(profile.hyp_len, profile.ref_len);
        for (i, p) in profile.orders.iter().enumerate() {
            num[i] += p.numerator;
            den[i] += p.denominator;
        }
    }
    Ok(BleuReport {
        bleu: bleu.map(|b| 100.0 * b / n),
        brevity_penalty: bp_sum / n,
        precisions: std::array::from_fn(|i| num[i] as f64 / den[i].max(1) as f64),
        sentences: hypotheses.len(),
        accuracy: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn t(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn clipped_unigram_precision() {
        let p = modified_precision(&t("the the the the the the the"), &t("the cat is on the mat"), 1);
        assert_eq!(p, Precision { numerator: 2, denominator: 7 });
    }

    #[test]
    fn identical_and_disjoint_precision() {
        let s = t("a b c d e");
        for n in 1..=5 {
            let p = modified_precision(&s, &s, n);
            assert_eq!(p.numerator, p.denominator);
            assert_eq!(p.denominator, 6 - n);
        }
        assert_eq!(modified_precision(&t("a b"), &t("c d"), 1).numerator, 0);
        assert_eq!(modified_precision(&t("a b"), &t("a b"), 3).denominator, 0);
    }

    #[test]
    fn brevity_penalty_values() {
        assert_eq!(brevity_penalty(10, 10), 1.0);
        assert_abs_diff_eq!(brevity_penalty(5, 10), (-1f64).exp(), epsilon = 1e-15);
        assert_eq!(brevity_penalty(12, 10), 1.0);
        assert_eq!(brevity_penalty(0, 3), 0.0);
    }

    #[test]
    fn method4_three_token_case() {
        let profile = NGramProfile::new(&t("a b c"), &t("a x c"));
        let s = smooth_method4(&profile.orders, 3, METHOD4_K);
        assert_abs_diff_eq!(s[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 3f64.ln() / 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[2], 3f64.ln() / 20.0, epsilon = 1e-12);
        // fourth order: hypothesis too short, 0/1 with counter 3
        assert_abs_diff_eq!(s[3], 3f64.ln() / 40.0, epsilon = 1e-12);
        let b2 = cumulative_bleu(&t("a b c"), &t("a x c"), &BLEU_WEIGHTS[1]);
        assert_abs_diff_eq!(b2, ((2.0 / 3.0) * (3f64.ln() / 20.0)).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(b2, 0.19137, epsilon = 1e-5);
    }

    #[test]
    fn method4_no_op_when_all_match() {
        let p = [Precision { numerator: 3, denominator: 4 }, Precision { numerator: 1, denominator: 3 }];
        assert_eq!(smooth_method4(&p, 4, METHOD4_K), vec![0.75, 1.0 / 3.0]);
    }

    #[test]
    fn single_token_hypothesis_is_not_smoothed() {
        let profile = NGramProfile::new(&t("a"), &t("a b"));
        let s = smooth_method4(&profile.orders, 1, METHOD4_K);
        assert_eq!(s, vec![1.0, 0.0, 0.0, 0.0]);
        let b = sentence_bleu(&t("a"), &t("a b"));
        assert_abs_diff_eq!(b[0], (-1f64).exp(), epsilon = 1e-15);
        assert_eq!(&b[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn bleu1_is_bp_times_p1() {
        let (h, r) = (t("a b b d"), t("a b c d e f"));
        let b1 = cumulative_bleu(&h, &r, &BLEU_WEIGHTS[0]);
        assert_abs_diff_eq!(b1, brevity_penalty(4, 6) * 0.75, epsilon = 1e-15);
    }

    #[test]
    fn identical_sentences_score_one() {
        let s = t("jàmm ngeen fanaan ci jàmm");
        for b in sentence_bleu(&s, &s) {
            assert_abs_diff_eq!(b, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn corpus_report() {
        let hyps = vec![t("a b c d"), t("x y z w")];
        let report = evaluate_corpus(&hyps, &hyps).unwrap();
        for b in report.bleu {
            assert_abs_diff_eq!(b, 100.0, epsilon = 1e-12);
        }
        assert_eq!(report.sentences, 2);

        let single = evaluate_corpus(&[t("a b c")], &[t("a x c")]).unwrap();
        let s = sentence_bleu(&t("a b c"), &t("a x c"));
        for k in 0..4 {
            assert_abs_diff_eq!(single.bleu[k], 100.0 * s[k], epsilon = 1e-12);
        }
        assert!(matches!(
            evaluate_corpus(&[t("a")], &[]),
            Err(EvalError::CountMismatch { hypotheses: 1, references: 0 })
        ));
    }

    #[test]
    fn report_row_layout() {
        let r = evaluate_corpus(&[t("a b c d")], &[t("a b c d")]).unwrap().with_accuracy(0.5);
        assert_eq!(r.to_row("lstm"), "lstm\t50.00\t100.00\t100.00\t100.00\t100.00");
        assert_eq!(BleuReport::HEADER.split('\t').count(), 6);
    }

    fn sentence() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec((0u8..6).prop_map(|i| format!("w{i}")), 0..12)
    }

    proptest! {
        #[test]
        fn smoothing_never_raises_nonzero_precision(h in sentence(), r in sentence()) {
            let profile = NGramProfile::new(&h, &r);
            let s = smooth_method4(&profile.orders, h.len(), METHOD4_K);
            for (p, v) in profile.orders.iter().zip(&s) {
                if p.numerator > 0 {
                    prop_assert_eq!(*v, p.value());
                }
                if h.len() > 1 && p.denominator > 0 {
                    prop_assert!(*v > 0.0 && *v <= 1.0);
                }
            }
        }

        #[test]
        fn scores_in_unit_interval(h in sentence(), r in sentence()) {
            for (k, b) in sentence_bleu(&h, &r).into_iter().enumerate() {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
                if h.len() > k && (b - 1.0).abs() < 1e-12 {
                    // a perfect score forces equal token multisets, not equal order
                    let (mut hs, mut rs) = (h.clone(), r.clone());
                    hs.sort();
                    rs.sort();
                    prop_assert_eq!(hs, rs);
                }
                if h == r && h.len() > k {
                    prop_assert!((b - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn duplicating_pairs_leaves_report_unchanged(pairs in prop::collection::vec((sentence(), sentence()), 1..8)) {
            let (h, r): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            let once = evaluate_corpus(&h, &r).unwrap();
            let h2: Vec<_> = h.iter().chain(&h).cloned().collect();
            let r2: Vec<_> = r.iter().chain(&r).cloned().collect();
            let twice = evaluate_corpus(&h2, &r2).unwrap();
            for k in 0..4 {
                prop_assert!((once.bleu[k] - twice.bleu[k]).abs() < 1e-9);
            }
        }
    }
}
