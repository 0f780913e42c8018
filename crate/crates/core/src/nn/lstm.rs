use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis, Zip};

use super::params::LstmWeights;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One LSTM step on single vectors.
///
/// Returns `(h, c)` with `c = f*c_prev + i*g` and `h = o*tanh(c)`.
pub fn lstm_cell(
    x: ArrayView1<'_, f64>,
    h_prev: ArrayView1<'_, f64>,
    c_prev: ArrayView1<'_, f64>,
    weights: &LstmWeights,
) -> (Array1<f64>, Array1<f64>) {
    let row = |v: ArrayView1<'_, f64>| v.to_owned().insert_axis(Axis(0));
    let (h, c, _) = step_forward(weights, row(x), &row(h_prev), &row(c_prev), None);
    (h.row(0).to_owned(), c.row(0).to_owned())
}

/// Values saved by [`step_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    /// Activated gates `[i | f | g | o]`, `[B x 4H]`.
    gates: Array2<f64>,
    tanh_c: Array2<f64>,
    /// Per-row 1/0 carry mask; `None` means every row advances.
    mask: Option<Array1<f64>>,
}

/// Batched LSTM step. Rows whose mask is 0 keep their previous state.
pub(crate) fn step_forward(
    w: &LstmWeights,
    x: Array2<f64>,
    h_prev: &Array2<f64>,
    c_prev: &Array2<f64>,
    mask: Option<Array1<f64>>,
) -> (Array2<f64>, Array2<f64>, StepCache) {
    let hd = w.hidden_dim();
    let mut gates = x.dot(&w.w_x.t()) + h_prev.dot(&w.w_h.t()) + &w.b;
    gates.slice_mut(s![.., ..2 * hd]).mapv_inplace(sigmoid);
    gates.slice_mut(s![.., 2 * hd..3 * hd]).mapv_inplace(f64::tanh);
    gates.slice_mut(s![.., 3 * hd..]).mapv_inplace(sigmoid);

    let i = gates.slice(s![.., ..hd]);
    let f = gates.slice(s![.., hd..2 * hd]);
    let g = gates.slice(s![.., 2 * hd..3 * hd]);
    let o = gates.slice(s![.., 3 * hd..]);
    let c_new = &f * c_prev + &i * &g;
    let tanh_c = c_new.mapv(f64::tanh);
    let h_new = &o * &tanh_c;

    let (h, c) = match &mask {
        None => (h_new, c_new),
        Some(m) => (carry(&h_new, h_prev, m), carry(&c_new, c_prev, m)),
    };
    let cache = StepCache {
        x,
        h_prev: h_prev.clone(),
        c_prev: c_prev.clone(),
        gates,
        tanh_c,
        mask,
    };
    (h, c, cache)
}

fn carry(new: &Array2<f64>, prev: &Array2<f64>, mask: &Array1<f64>) -> Array2<f64> {
    let mut out = prev.clone();
    for (r, &m) in mask.iter().enumerate() {
        if m != 0.0 {
            out.row_mut(r).assign(&new.row(r));
        }
    }
    out
}

/// Gradients flowing out of one step: w.r.t. the input and both previous
/// states.
pub(crate) struct StepGrads {
    pub dx: Array2<f64>,
    pub dh_prev: Array2<f64>,
    pub dc_prev: Array2<f64>,
}

/// Backpropagates `dh`, `dc` (w.r.t. the step's returned states) through
/// one step, accumulating weight gradients into `grads`.
pub(crate) fn step_backward(
    w: &LstmWeights,
    cache: &StepCache,
    dh: &Array2<f64>,
    dc: &Array2<f64>,
    grads: &mut LstmWeights,
) -> StepGrads {
    let hd = w.hidden_dim();
    let (mut dh_new, mut dc_out) = (dh.clone(), dc.clone());
    let (mut dh_prev, mut dc_prev) = (Array2::zeros(dh.raw_dim()), Array2::zeros(dc.raw_dim()));
    if let Some(m) = &cache.mask {
        for (r, &keep) in m.iter().enumerate() {
            if keep == 0.0 {
                dh_prev.row_mut(r).assign(&dh.row(r));
                dc_prev.row_mut(r).assign(&dc.row(r));
                dh_new.row_mut(r).fill(0.0);
                dc_out.row_mut(r).fill(0.0);
            }
        }
    }

    let gates = &cache.gates;
    let i = gates.slice(s![.., ..hd]);
    let f = gates.slice(s![.., hd..2 * hd]);
    let g = gates.slice(s![.., 2 * hd..3 * hd]);
    let o = gates.slice(s![.., 3 * hd..]);

    let mut dc_new = dc_out;
    Zip::from(&mut dc_new)
        .and(&dh_new)
        .and(o)
        .and(&cache.tanh_c)
        .for_each(|d, &dh, &o, &t| *d += dh * o * (1.0 - t * t));

    let d_i = &dc_new * &g * &i * &i.mapv(|v| 1.0 - v);
    let d_f = &dc_new * &cache.c_prev * &f * &f.mapv(|v| 1.0 - v);
    let d_g = &dc_new * &i * &g.mapv(|v| 1.0 - v * v);
    let d_o = &dh_new * &cache.tanh_c * &o * &o.mapv(|v| 1.0 - v);
    let d_pre = concatenate![Axis(1), d_i, d_f, d_g, d_o];

    dc_prev += &(&dc_new * &f);
    grads.w_x += &d_pre.t().dot(&cache.x);
    grads.w_h += &d_pre.t().dot(&cache.h_prev);
    grads.b += &d_pre.sum_axis(Axis(0));
    dh_prev += &d_pre.dot(&w.w_h);
    let dx = d_pre.dot(&w.w_x);
    StepGrads { dx, dh_prev, dc_prev }
}
