use ndarray::{s, Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;

/// Half-width of the uniform initialization range.
pub const INIT_SCALE: f64 = 0.08;
pub const FORGET_BIAS: f64 = 1.0;

/// One LSTM layer. Gate rows are stacked `[input; forget; cell; output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    /// `[4H x input]`
    pub w_x: Array2<f64>,
    /// `[4H x H]`
    pub w_h: Array2<f64>,
    /// `[4H]`
    pub b: Array1<f64>,
}

impl LstmWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Array2::zeros((4 * hidden, input)),
            w_h: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.ncols()
    }
}

/// Affine + tanh maps from concatenated boundary encoder states to the
/// decoder's initial hidden and cell states.
#[derive(Debug, Clone, PartialEq)]
pub struct Bridge {
    /// `[H x 2H]`
    pub w_h: Array2<f64>,
    pub b_h: Array1<f64>,
    pub w_c: Array2<f64>,
    pub b_c: Array1<f64>,
}

/// Every trainable tensor of a model. The same structure holds gradients
/// and optimizer moments; optional parts exist only for the variants that
/// use them.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub src_embedding: Array2<f64>,
    pub tgt_embedding: Array2<f64>,
    pub encoder_fwd: LstmWeights,
    pub encoder_bwd: Option<LstmWeights>,
    pub bridge: Option<Bridge>,
    pub decoder: LstmWeights,
    /// `[encoder_dim x H]`
    pub attention: Option<Array2<f64>>,
    /// `[V_tgt x feature_dim]`
    pub output_w: Array2<f64>,
    pub output_b: Array1<f64>,
}

pub type Gradients = Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRole {
    Embedding,
    Weight,
    Bias,
}

impl TensorRole {
    /// Only weight matrices take L2 weight decay.
    pub fn decays(self) -> bool {
        self == TensorRole::Weight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: &'static str,
    pub role: TensorRole,
}

const fn info(name: &'static str, role: TensorRole) -> TensorInfo {
    TensorInfo { name, role }
}

macro_rules! visit_tensors {
    ($p:expr, $view:ident, $opt:ident, $f:expr) => {{
        use TensorRole::*;
        let p = $p;
        let mut f = $f;
        f(info("src_embedding", Embedding), p.src_embedding.$view().into_dyn());
        f(info("tgt_embedding", Embedding), p.tgt_embedding.$view().into_dyn());
        f(info("encoder.fwd.w_x", Weight), p.encoder_fwd.w_x.$view().into_dyn());
        f(info("encoder.fwd.w_h", Weight), p.encoder_fwd.w_h.$view().into_dyn());
        f(info("encoder.fwd.b", Bias), p.encoder_fwd.b.$view().into_dyn());
        if let Some(w) = p.encoder_bwd.$opt() {
            f(info("encoder.bwd.w_x", Weight), w.w_x.$view().into_dyn());
            f(info("encoder.bwd.w_h", Weight), w.w_h.$view().into_dyn());
            f(info("encoder.bwd.b", Bias), w.b.$view().into_dyn());
        }
        if let Some(b) = p.bridge.$opt() {
            f(info("bridge.w_h", Weight), b.w_h.$view().into_dyn());
            f(info("bridge.b_h", Bias), b.b_h.$view().into_dyn());
            f(info("bridge.w_c", Weight), b.w_c.$view().into_dyn());
            f(info("bridge.b_c", Bias), b.b_c.$view().into_dyn());
        }
        f(info("decoder.w_x", Weight), p.decoder.w_x.$view().into_dyn());
        f(info("decoder.w_h", Weight), p.decoder.w_h.$view().into_dyn());
        f(info("decoder.b", Bias), p.decoder.b.$view().into_dyn());
        if let Some(a) = p.attention.$opt() {
            f(info("attention.w_a", Weight), a.$view().into_dyn());
        }
        f(info("output.w", Weight), p.output_w.$view().into_dyn());
        f(info("output.b", Bias), p.output_b.$view().into_dyn());
    }};
}

impl Parameters {
    /// All-zero tensors with the shapes implied by `cfg`.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (e, h) = (cfg.embed_dim, cfg.hidden_dim);
        Self {
            src_embedding: Array2::zeros((cfg.src_vocab_size, e)),
            tgt_embedding: Array2::zeros((cfg.tgt_vocab_size, e)),
            encoder_fwd: LstmWeights::zeros(e, h),
            encoder_bwd: cfg.bidirectional.then(|| LstmWeights::zeros(e, h)),
            bridge: cfg.bidirectional.then(|| Bridge {
                w_h: Array2::zeros((h, 2 * h)),
                b_h: Array1::zeros(h),
                w_c: Array2::zeros((h, 2 * h)),
                b_c: Array1::zeros(h),
            }),
            decoder: LstmWeights::zeros(e, h),
            attention: cfg.attention.then(|| Array2::zeros((cfg.encoder_dim(), h))),
            output_w: Array2::zeros((cfg.tgt_vocab_size, cfg.feature_dim())),
            output_b: Array1::zeros(cfg.tgt_vocab_size),
        }
    }

    /// Uniform(-0.08, 0.08) weights and embeddings, zero biases except the
    /// LSTM forget-gate slices, which start at 1.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut params = Self::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(-INIT_SCALE, INIT_SCALE).expect("valid range");
        params.for_each_mut(|info, mut t| {
            if info.role != TensorRole::Bias {
                t.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
            }
        });
        let h = cfg.hidden_dim;
        for lstm in [Some(&mut params.encoder_fwd), params.encoder_bwd.as_mut(), Some(&mut params.decoder)]
            .into_iter()
            .flatten()
        {
            lstm.b.slice_mut(s![h..2 * h]).fill(FORGET_BIAS);
        }
        params
    }

    pub fn for_each<'a, F>(&'a self, f: F)
    where
        F: FnMut(TensorInfo, ArrayViewD<'a, f64>),
    {
        visit_tensors!(self, view, as_ref, f)
    }

    pub fn for_each_mut<F>(&mut self, f: F)
    where
        F: FnMut(TensorInfo, ArrayViewMutD<'_, f64>),
    {
        visit_tensors!(self, view_mut, as_mut, f)
    }

    /// Names, roles and shapes in canonical order.
    pub fn layout(&self) -> Vec<(TensorInfo, Vec<usize>)> {
        let mut out = Vec::new();
        self.for_each(|info, t| out.push((info, t.shape().to_vec())));
        out
    }

    pub fn num_scalars(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, t| n += t.len());
        n
    }

    /// Visits matching tensors of `self` and `other` pairwise.
    ///
    /// Panics when the two sets have different layouts.
    pub fn zip_mut_with<F>(&mut self, other: &Parameters, mut f: F)
    where
        F: FnMut(TensorInfo, ArrayViewMutD<'_, f64>, ArrayViewD<'_, f64>),
    {
        let mut others = Vec::new();
        other.for_each(|info, t| others.push((info, t)));
        let mut it = others.into_iter();
        self.for_each_mut(|info, t| {
            let (oinfo, o) = it.next().expect("parameter layouts differ");
            assert_eq!(info, oinfo, "parameter layouts differ");
            assert_eq!(t.shape(), o.shape(), "shape mismatch in {}", info.name);
            f(info, t, o);
        });
        assert!(it.next().is_none(), "parameter layouts differ");
    }

    pub fn same_layout(&self, other: &Parameters) -> bool {
        let a: Vec<_> = self.layout().into_iter().map(|(i, s)| (i.name, s)).collect();
        let b: Vec<_> = other.layout().into_iter().map(|(i, s)| (i.name, s)).collect();
        a == b
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|_, t| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }

    /// L2 norm over every scalar of every tensor.
    pub fn global_norm(&self) -> f64 {
        let mut sq = 0.0;
        self.for_each(|_, t| sq += t.iter().map(|v| v * v).sum::<f64>());
        sq.sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.for_each_mut(|_, mut t| t.mapv_inplace(|v| v * factor));
    }

    /// Flattened copy of every scalar in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        self.for_each(|_, t| out.extend(t.iter().copied()));
        out
    }
}
