use ndarray::Array2;

use super::vocab::{TokenId, BOS, EOS, PAD};

/// A numericalized sentence pair without specials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub source: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

impl EncodedPair {
    pub fn new(source: Vec<TokenId>, target: Vec<TokenId>) -> Self {
        Self { source, target }
    }
}

/// Right-padded id matrices for one mini-batch.
///
/// Source rows are `tokens + EOS`; target input rows are `BOS + tokens`
/// and target output rows are `tokens + EOS`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub src_ids: Array2<TokenId>,
    pub src_mask: Array2<bool>,
    pub tgt_in_ids: Array2<TokenId>,
    pub tgt_out_ids: Array2<TokenId>,
    pub tgt_mask: Array2<bool>,
}

impl EncodedBatch {
    pub fn batch_size(&self) -> usize {
        self.src_ids.nrows()
    }

    pub fn src_len(&self) -> usize {
        self.src_ids.ncols()
    }

    pub fn tgt_len(&self) -> usize {
        self.tgt_in_ids.ncols()
    }

    /// Number of non-PAD target positions.
    pub fn target_tokens(&self) -> usize {
        self.tgt_mask.iter().filter(|&&m| m).count()
    }
}

pub fn pad_batch(pairs: &[EncodedPair]) -> EncodedBatch {
    let rows = pairs.len();
    let src_width = pairs.iter().map(|p| p.source.len() + 1).max().unwrap_or(0);
    let tgt_width = pairs.iter().map(|p| p.target.len() + 1).max().unwrap_or(0);

    let mut src_ids = Array2::from_elem((rows, src_width), PAD);
    let mut src_mask = Array2::from_elem((rows, src_width), false);
    let mut tgt_in_ids = Array2::from_elem((rows, tgt_width), PAD);
    let mut tgt_out_ids = Array2::from_elem((rows, tgt_width), PAD);
    let mut tgt_mask = Array2::from_elem((rows, tgt_width), false);

    for (r, pair) in pairs.iter().enumerate() {
        for (t, &id) in pair.source.iter().chain([EOS].iter()).enumerate() {
            src_ids[[r, t]] = id;
            src_mask[[r, t]] = true;
        }
        for (t, &id) in [BOS].iter().chain(pair.target.iter()).enumerate() {
            tgt_in_ids[[r, t]] = id;
        }
        for (t, &id) in pair.target.iter().chain([EOS].iter()).enumerate() {
            tgt_out_ids[[r, t]] = id;
            tgt_mask[[r, t]] = true;
        }
    }

    EncodedBatch {
        src_ids,
        src_mask,
        tgt_in_ids,
        tgt_out_ids,
        tgt_mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn source_rows_end_with_eos_and_pad() {
        let b = pad_batch(&[
            EncodedPair::new(vec![10, 11], vec![7]),
            EncodedPair::new(vec![12, 13, 14, 15], vec![7]),
        ]);
        assert_eq!(b.src_len(), 5);
        assert_eq!(b.src_ids.row(0).to_vec(), vec![10, 11, EOS, PAD, PAD]);
        assert_eq!(
            b.src_mask.row(0).to_vec(),
            vec![true, true, true, false, false]
        );
        assert_eq!(b.src_ids.row(1).to_vec(), vec![12, 13, 14, 15, EOS]);
    }

    #[test]
    fn teacher_forcing_shift() {
        let b = pad_batch(&[EncodedPair::new(vec![5], vec![7, 8])]);
        assert_eq!(b.tgt_in_ids, array![[BOS, 7, 8]]);
        assert_eq!(b.tgt_out_ids, array![[7, 8, EOS]]);
        assert_eq!(b.tgt_mask, array![[true, true, true]]);
    }

    #[test]
    fn single_pair_has_no_padding() {
        let b = pad_batch(&[EncodedPair::new(vec![4, 5, 6], vec![4, 5])]);
        assert!(b.src_mask.iter().all(|&m| m));
        assert!(b.tgt_mask.iter().all(|&m| m));
        assert_eq!(b.src_len(), 4);
        assert_eq!(b.tgt_len(), 3);
    }

    proptest! {
        #[test]
        fn row_invariants(lens in prop::collection::vec((1usize..8, 1usize..8), 1..6)) {
            let pairs: Vec<EncodedPair> = lens
                .iter()
                .map(|&(s, t)| EncodedPair::new((4..4 + s).collect(), (4..4 + t).collect()))
                .collect();
            let b = pad_batch(&pairs);
            prop_assert_eq!(b.tgt_in_ids.dim(), b.tgt_out_ids.dim());
            for (r, p) in pairs.iter().enumerate() {
                let src_cells = b.src_mask.row(r).iter().filter(|&&m| m).count();
                prop_assert_eq!(src_cells, p.source.len() + 1);
                for t in 0..b.src_len() {
                    prop_assert_eq!(b.src_mask[[r, t]], b.src_ids[[r, t]] != PAD);
                }
                let n = p.target.len();
                prop_assert_eq!(b.tgt_out_ids[[r, n]], EOS);
                for t in 0..n {
                    prop_assert_eq!(b.tgt_out_ids[[r, t]], b.tgt_in_ids[[r, t + 1]]);
                }
                for t in 0..b.tgt_len() {
                    prop_assert_eq!(b.tgt_mask[[r, t]], b.tgt_out_ids[[r, t]] != PAD);
                }
            }
        }
    }
}
