use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis};
use rand::{Rng, RngCore};

use super::attention::{attend_backward, attend_batch, AttentionCache};
use super::config::ModelConfig;
use super::lstm::{step_backward, step_forward, StepCache};
use super::params::{Gradients, Parameters};
use super::NnError;
use crate::text::{EncodedBatch, TokenId};

/// Encoder outputs for a batch plus what the backward pass needs.
#[derive(Debug, Clone)]
pub struct Encoding {
    /// Per-step encoder states, `[B x T_src x encoder_dim]`. PAD steps
    /// hold the carried state and are ignored downstream.
    pub states: Array3<f64>,
    pub h0: Array2<f64>,
    pub c0: Array2<f64>,
    src_ids: Array2<TokenId>,
    src_mask: Array2<bool>,
    fwd: Vec<StepCache>,
    /// Backward-direction caches in time order.
    bwd: Vec<StepCache>,
    /// Concatenated boundary states fed to the bridge, `(h, c)`.
    bridge_inputs: Option<(Array2<f64>, Array2<f64>)>,
}

impl Encoding {
    pub fn src_mask(&self) -> ArrayView2<'_, bool> {
        self.src_mask.view()
    }
}

fn mask_column(mask: ArrayView2<'_, bool>, t: usize) -> Array1<f64> {
    mask.column(t).mapv(|m| if m { 1.0 } else { 0.0 })
}

fn check_ids(ids: ArrayView2<'_, TokenId>, vocab: usize) -> Result<(), NnError> {
    match ids.iter().find(|&&id| id >= vocab) {
        Some(&id) => Err(NnError::TokenOutOfRange { id, vocab }),
        None => Ok(()),
    }
}

fn embed(table: &Array2<f64>, ids: ArrayView1<'_, TokenId>) -> Array2<f64> {
    table.select(Axis(0), ids.as_slice().unwrap_or(&ids.to_vec()))
}

fn scatter_rows(table: &mut Array2<f64>, ids: ArrayView1<'_, TokenId>, rows: &Array2<f64>) {
    for (&id, row) in ids.iter().zip(rows.outer_iter()) {
        let mut dst = table.row_mut(id);
        dst += &row;
    }
}

/// Runs the encoder over right-padded source rows.
///
/// A unidirectional encoder hands its last non-PAD state to the decoder.
/// A bidirectional one concatenates both directions per step and maps the
/// forward last and backward first states through the bridge.
pub fn encode(
    params: &Parameters,
    cfg: &ModelConfig,
    src_ids: ArrayView2<'_, TokenId>,
    src_mask: ArrayView2<'_, bool>,
) -> Result<Encoding, NnError> {
    check_ids(src_ids, cfg.src_vocab_size)?;
    if src_ids.dim() != src_mask.dim() {
        return Err(NnError::ShapeMismatch("source ids and mask differ in shape".into()));
    }
    let (bsz, steps) = src_ids.dim();
    let hd = cfg.hidden_dim;
    let zeros = Array2::<f64>::zeros((bsz, hd));
    let mut states = Array3::zeros((bsz, steps, cfg.encoder_dim()));

    let (mut h_f, mut c_f) = (zeros.clone(), zeros.clone());
    let mut fwd = Vec::with_capacity(steps);
    for t in 0..steps {
        let x = embed(&params.src_embedding, src_ids.column(t));
        let (h, c, cache) = step_forward(&params.encoder_fwd, x, &h_f, &c_f, Some(mask_column(src_mask, t)));
        states.slice_mut(s![.., t, ..hd]).assign(&h);
        fwd.push(cache);
        (h_f, c_f) = (h, c);
    }

    let mut bwd = Vec::new();
    let (h0, c0, bridge_inputs) = match (&params.encoder_bwd, &params.bridge) {
        (Some(w_bwd), Some(bridge)) => {
            let (mut h_b, mut c_b) = (zeros.clone(), zeros);
            for t in (0..steps).rev() {
                let x = embed(&params.src_embedding, src_ids.column(t));
                let (h, c, cache) = step_forward(w_bwd, x, &h_b, &c_b, Some(mask_column(src_mask, t)));
                states.slice_mut(s![.., t, hd..]).assign(&h);
                bwd.push(cache);
                (h_b, c_b) = (h, c);
            }
            bwd.reverse();
            let z_h = concatenate![Axis(1), h_f, h_b];
            let z_c = concatenate![Axis(1), c_f, c_b];
            let h0 = (z_h.dot(&bridge.w_h.t()) + &bridge.b_h).mapv(f64::tanh);
            let c0 = (z_c.dot(&bridge.w_c.t()) + &bridge.b_c).mapv(f64::tanh);
            (h0, c0, Some((z_h, z_c)))
        }
        (None, None) => (h_f, c_f, None),
        _ => return Err(NnError::ShapeMismatch("bidirectional tensors are incomplete".into())),
    };

    Ok(Encoding {
        states,
        h0,
        c0,
        src_ids: src_ids.to_owned(),
        src_mask: src_mask.to_owned(),
        fwd,
        bwd,
        bridge_inputs,
    })
}

#[derive(Debug, Clone)]
struct DecoderStep {
    tokens: Array1<TokenId>,
    lstm: StepCache,
    h: Array2<f64>,
    attention: Option<AttentionCache>,
    /// Inverted-dropout multipliers, absent when dropout is off.
    dropout: Option<Array2<f64>>,
    /// Output features after dropout.
    features: Array2<f64>,
}

/// One teacher-forced or free-running decoder step. Returns the new
/// states, the logits `[B x V]` and the step cache.
#[allow(clippy::too_many_arguments)]
fn decoder_step(
    params: &Parameters,
    cfg: &ModelConfig,
    enc: &Encoding,
    tokens: ArrayView1<'_, TokenId>,
    h_prev: &Array2<f64>,
    c_prev: &Array2<f64>,
    dropout: Option<&mut dyn RngCore>,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>, DecoderStep), NnError> {
    let x = embed(&params.tgt_embedding, tokens);
    let (h, c, lstm) = step_forward(&params.decoder, x, h_prev, c_prev, None);

    let (mut features, attention) = match &params.attention {
        Some(w_a) => {
            let cache = attend_batch(&h, enc.states.view(), enc.src_mask.view(), w_a.view())?;
            (concatenate![Axis(1), h, cache.context], Some(cache))
        }
        None => (h.clone(), None),
    };

    let rate = cfg.dropout_rate;
    let dropout = match dropout {
        Some(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            let multipliers = features.mapv(|_| if rng.random::<f64>() < rate { 0.0 } else { keep });
            features *= &multipliers;
            Some(multipliers)
        }
        _ => None,
    };

    let logits = features.dot(&params.output_w.t()) + &params.output_b;
    let step = DecoderStep { tokens: tokens.to_owned(), lstm, h: h.clone(), attention, dropout, features };
    Ok((h, c, logits, step))
}

/// Everything a teacher-forced forward pass produced.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `[B x T_tgt x V_tgt]`
    pub logits: Array3<f64>,
    pub encoding: Encoding,
    steps: Vec<DecoderStep>,
}

impl ForwardPass {
    /// Decoder output features (after dropout) at step `t`, `[B x F]`.
    pub fn features(&self, t: usize) -> ArrayView2<'_, f64> {
        self.steps[t].features.view()
    }
}

fn reborrow<'a>(rng: &'a mut Option<&mut dyn RngCore>) -> Option<&'a mut dyn RngCore> {
    match rng {
        Some(r) => Some(&mut **r),
        None => None,
    }
}

/// Teacher-forced decoding of `tgt_in` given an encoding. Dropout is
/// applied to the output features when `dropout` carries an rng.
pub fn decode_train(
    params: &Parameters,
    cfg: &ModelConfig,
    encoding: Encoding,
    tgt_in: ArrayView2<'_, TokenId>,
    mut dropout: Option<&mut dyn RngCore>,
) -> Result<ForwardPass, NnError> {
    check_ids(tgt_in, cfg.tgt_vocab_size)?;
    let (bsz, steps) = tgt_in.dim();
    if bsz != encoding.h0.nrows() {
        return Err(NnError::ShapeMismatch("source and target batch sizes differ".into()));
    }
    let mut logits = Array3::zeros((bsz, steps, cfg.tgt_vocab_size));
    let mut caches = Vec::with_capacity(steps);
    let (mut h, mut c) = (encoding.h0.clone(), encoding.c0.clone());
    for t in 0..steps {
        let (h1, c1, step_logits, cache) =
            decoder_step(params, cfg, &encoding, tgt_in.column(t), &h, &c, reborrow(&mut dropout))?;
        logits.index_axis_mut(Axis(1), t).assign(&step_logits);
        caches.push(cache);
        (h, c) = (h1, c1);
    }
    Ok(ForwardPass { logits, encoding, steps: caches })
}

pub fn forward(
    params: &Parameters,
    cfg: &ModelConfig,
    batch: &EncodedBatch,
    dropout: Option<&mut dyn RngCore>,
) -> Result<ForwardPass, NnError> {
    let encoding = encode(params, cfg, batch.src_ids.view(), batch.src_mask.view())?;
    decode_train(params, cfg, encoding, batch.tgt_in_ids.view(), dropout)
}

/// Mean negative log-likelihood over non-PAD target positions, with its
/// gradient w.r.t. the logits (zero at PAD positions).
pub fn masked_cross_entropy(
    logits: ArrayView3<'_, f64>,
    tgt_out: ArrayView2<'_, TokenId>,
    tgt_mask: ArrayView2<'_, bool>,
) -> (f64, Array3<f64>) {
    let count = tgt_mask.iter().filter(|&&m| m).count().max(1) as f64;
    let mut grad = Array3::zeros(logits.raw_dim());
    let mut total = 0.0;
    for ((b, t), &keep) in tgt_mask.indexed_iter() {
        if !keep {
            continue;
        }
        let row = logits.slice(s![b, t, ..]);
        let max = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let log_z = max + row.mapv(|v| (v - max).exp()).sum().ln();
        let gold = tgt_out[[b, t]];
        total -= row[gold] - log_z;
        let mut g = grad.slice_mut(s![b, t, ..]);
        g.assign(&row.mapv(|v| (v - log_z).exp() / count));
        g[gold] -= 1.0 / count;
    }
    (total / count, grad)
}

/// Reverse-mode gradients of the loss whose logit gradient is `d_logits`.
pub fn backward(params: &Parameters, cfg: &ModelConfig, pass: &ForwardPass, d_logits: &Array3<f64>) -> Gradients {
    let hd = cfg.hidden_dim;
    let enc = &pass.encoding;
    let mut grads = Parameters::zeros(cfg);
    let mut d_enc = Array3::zeros(enc.states.raw_dim());
    let bsz = enc.h0.nrows();
    let (mut dh, mut dc) = (Array2::<f64>::zeros((bsz, hd)), Array2::<f64>::zeros((bsz, hd)));

    for (t, step) in pass.steps.iter().enumerate().rev() {
        let dl = d_logits.index_axis(Axis(1), t);
        grads.output_w += &dl.t().dot(&step.features);
        grads.output_b += &dl.sum_axis(Axis(0));
        let mut d_features = dl.dot(&params.output_w);
        if let Some(m) = &step.dropout {
            d_features *= m;
        }
        dh += &d_features.slice(s![.., ..hd]);
        if let (Some(cache), Some(w_a), Some(d_w_a)) = (&step.attention, &params.attention, grads.attention.as_mut()) {
            dh += &attend_backward(
                cache,
                &step.h,
                enc.states.view(),
                w_a.view(),
                d_features.slice(s![.., hd..]),
                &mut d_enc,
                d_w_a,
            );
        }
        let out = step_backward(&params.decoder, &step.lstm, &dh, &dc, &mut grads.decoder);
        scatter_rows(&mut grads.tgt_embedding, step.tokens.view(), &out.dx);
        (dh, dc) = (out.dh_prev, out.dc_prev);
    }

    let (mut dh_f, mut dc_f, dh_c_b) = match (&params.bridge, &enc.bridge_inputs, grads.bridge.as_mut()) {
        (Some(bridge), Some((z_h, z_c)), Some(g)) => {
            let d_pre_h = &dh * &enc.h0.mapv(|v| 1.0 - v * v);
            let d_pre_c = &dc * &enc.c0.mapv(|v| 1.0 - v * v);
            g.w_h += &d_pre_h.t().dot(z_h);
            g.b_h += &d_pre_h.sum_axis(Axis(0));
            g.w_c += &d_pre_c.t().dot(z_c);
            g.b_c += &d_pre_c.sum_axis(Axis(0));
            let dz_h = d_pre_h.dot(&bridge.w_h);
            let dz_c = d_pre_c.dot(&bridge.w_c);
            (
                dz_h.slice(s![.., ..hd]).to_owned(),
                dz_c.slice(s![.., ..hd]).to_owned(),
                Some((dz_h.slice(s![.., hd..]).to_owned(), dz_c.slice(s![.., hd..]).to_owned())),
            )
        }
        _ => (dh, dc, None),
    };

    for t in (0..enc.fwd.len()).rev() {
        let d_out = &dh_f + &d_enc.slice(s![.., t, ..hd]);
        let out = step_backward(&params.encoder_fwd, &enc.fwd[t], &d_out, &dc_f, &mut grads.encoder_fwd);
        scatter_rows(&mut grads.src_embedding, enc.src_ids.column(t), &out.dx);
        (dh_f, dc_f) = (out.dh_prev, out.dc_prev);
    }

    if let (Some((mut dh_b, mut dc_b)), Some(w_bwd), Some(g_bwd)) =
        (dh_c_b, &params.encoder_bwd, grads.encoder_bwd.as_mut())
    {
        for (t, cache) in enc.bwd.iter().enumerate() {
            let d_out = &dh_b + &d_enc.slice(s![.., t, hd..]);
            let out = step_backward(w_bwd, cache, &d_out, &dc_b, g_bwd);
            scatter_rows(&mut grads.src_embedding, enc.src_ids.column(t), &out.dx);
            (dh_b, dc_b) = (out.dh_prev, out.dc_prev);
        }
    }
    grads
}

/// Forward pass, masked cross-entropy and full backward pass on a batch.
pub fn loss_and_gradients(
    params: &Parameters,
    cfg: &ModelConfig,
    batch: &EncodedBatch,
    dropout: Option<&mut dyn RngCore>,
) -> Result<(f64, Gradients), NnError> {
    let pass = forward(params, cfg, batch, dropout)?;
    let (loss, d_logits) = masked_cross_entropy(pass.logits.view(), batch.tgt_out_ids.view(), batch.tgt_mask.view());
    if !loss.is_finite() {
        return Err(NnError::NonFiniteDetected("loss".into()));
    }
    let grads = backward(params, cfg, &pass, &d_logits);
    if !grads.is_finite() {
        return Err(NnError::NonFiniteDetected("gradients".into()));
    }
    Ok((loss, grads))
}

/// Dropout-off loss on a batch, returned with the logits.
pub fn evaluate_batch(
    params: &Parameters,
    cfg: &ModelConfig,
    batch: &EncodedBatch,
) -> Result<(f64, Array3<f64>), NnError> {
    let pass = forward(params, cfg, batch, None)?;
    let (loss, _) = masked_cross_entropy(pass.logits.view(), batch.tgt_out_ids.view(), batch.tgt_mask.view());
    if !loss.is_finite() {
        return Err(NnError::NonFiniteDetected("loss".into()));
    }
    Ok((loss, pass.logits))
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding of one source sentence given as token ids without
/// specials. The output stops before EOS and never exceeds
/// `cfg.max_decode_len` tokens.
pub fn greedy_decode(params: &Parameters, cfg: &ModelConfig, source: &[TokenId]) -> Result<Vec<TokenId>, NnError> {
    use crate::text::{BOS, EOS};

    let row: Vec<TokenId> = source.iter().copied().chain([EOS]).collect();
    let src_ids = Array2::from_shape_vec((1, row.len()), row).expect("row shape");
    let src_mask = Array2::from_elem(src_ids.raw_dim(), true);
    let enc = encode(params, cfg, src_ids.view(), src_mask.view())?;

    let (mut h, mut c) = (enc.h0.clone(), enc.c0.clone());
    let mut token = Array1::from_elem(1, BOS);
    let mut out = Vec::new();
    while out.len() < cfg.max_decode_len {
        let (h1, c1, logits, _) = decoder_step(params, cfg, &enc, token.view(), &h, &c, None)?;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteDetected("decoder logits".into()));
        }
        let next = argmax(logits.row(0));
        if next == EOS {
            break;
        }
        out.push(next);
        token[0] = next;
        (h, c) = (h1, c1);
    }
    Ok(out)
}
