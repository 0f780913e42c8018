use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis};

use super::NnError;

/// Multiplicative attention for one decoder state.
///
/// Scores are `enc_t . (W_a h)` over non-PAD steps; PAD steps get weight
/// exactly 0. Returns `(context, weights)`.
pub fn attend(
    h_dec: ArrayView1<'_, f64>,
    enc_states: ArrayView2<'_, f64>,
    src_mask: ArrayView1<'_, bool>,
    w_a: ArrayView2<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>), NnError> {
    let h = h_dec.to_owned().insert_axis(Axis(0));
    let enc = enc_states.to_owned().insert_axis(Axis(0));
    let mask = src_mask.to_owned().insert_axis(Axis(0));
    let out = attend_batch(&h, enc.view(), mask.view(), w_a)?;
    Ok((out.context.row(0).to_owned(), out.weights.row(0).to_owned()))
}

/// Forward values of batched attention, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    /// `W_a h` per row, `[B x He]`.
    pub proj: Array2<f64>,
    /// `[B x T]`
    pub weights: Array2<f64>,
    /// `[B x He]`
    pub context: Array2<f64>,
}

/// Softmax over the non-PAD entries of `scores`; PAD entries become 0.
pub(crate) fn masked_softmax(scores: ArrayView1<'_, f64>, mask: ArrayView1<'_, bool>) -> Result<Array1<f64>, NnError> {
    let max = scores
        .iter()
        .zip(mask.iter())
        .filter(|(_, &m)| m)
        .map(|(&s, _)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(NnError::AllPadded);
    }
    let mut out = Array1::zeros(scores.len());
    let mut total = 0.0;
    for ((o, &s), &m) in out.iter_mut().zip(scores.iter()).zip(mask.iter()) {
        if m {
            *o = (s - max).exp();
            total += *o;
        }
    }
    out /= total;
    Ok(out)
}

pub(crate) fn attend_batch(
    h: &Array2<f64>,
    enc: ArrayView3<'_, f64>,
    mask: ArrayView2<'_, bool>,
    w_a: ArrayView2<'_, f64>,
) -> Result<AttentionCache, NnError> {
    let (bsz, steps, width) = enc.dim();
    let proj = h.dot(&w_a.t());
    let mut weights = Array2::zeros((bsz, steps));
    let mut context = Array2::zeros((bsz, width));
    for b in 0..bsz {
        let states = enc.index_axis(Axis(0), b);
        let scores = states.dot(&proj.row(b));
        let alpha = masked_softmax(scores.view(), mask.row(b))?;
        context.row_mut(b).assign(&alpha.dot(&states));
        weights.row_mut(b).assign(&alpha);
    }
    Ok(AttentionCache { proj, weights, context })
}

/// Backpropagates `d_context` through attention. Adds into `d_enc` and
/// `d_w_a`, and returns the gradient w.r.t. the decoder state.
pub(crate) fn attend_backward(
    cache: &AttentionCache,
    h: &Array2<f64>,
    enc: ArrayView3<'_, f64>,
    w_a: ArrayView2<'_, f64>,
    d_context: ArrayView2<'_, f64>,
    d_enc: &mut Array3<f64>,
    d_w_a: &mut Array2<f64>,
) -> Array2<f64> {
    let (bsz, _, width) = enc.dim();
    let mut d_proj = Array2::zeros((bsz, width));
    for b in 0..bsz {
        let states = enc.index_axis(Axis(0), b);
        let alpha = cache.weights.row(b);
        let dctx = d_context.row(b);
        let d_alpha = states.dot(&dctx);
        let mean = alpha.dot(&d_alpha);
        let d_scores = &alpha * &(&d_alpha - mean);

        let mut d_states = d_enc.index_axis_mut(Axis(0), b);
        for (t, mut row) in d_states.outer_iter_mut().enumerate() {
            if alpha[t] != 0.0 || d_scores[t] != 0.0 {
                row.scaled_add(alpha[t], &dctx);
                row.scaled_add(d_scores[t], &cache.proj.row(b));
            }
        }
        d_proj.row_mut(b).assign(&d_scores.dot(&states));
    }
    *d_w_a += &d_proj.t().dot(h);
    d_proj.dot(&w_a)
}
