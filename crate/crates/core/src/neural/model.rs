//! The four quantile forecasters. All of them map a feature vector (and, for
//! the encoder-decoder variants, a past-PV window) to a flat T x Q output
//! which is reshaped row-major into a quantile matrix.
//!
//! The MLP and the LSTM network read the weather feature block directly; the
//! encoder-decoder variants run an LSTM over the past-PV sequence one scalar
//! per step, then hand the final hidden state together with the weather
//! features to their decoder.

use chrono::NaiveDateTime;
use ndarray::{concatenate, s, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::loss::{huber_pinball_grad_unchecked, huber_pinball_unchecked, HuberConfig};
use crate::types::{QuantileLevels, QuantileMatrix};

use super::layers::{Activation, Dense, DenseGrad, LstmCell, LstmGrad, LstmStepCache};
use super::spec::{Architecture, ModelSpec};
use super::NeuralError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    hidden: Dense,
    out: Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNet {
    cell: LstmCell,
    ff: Dense,
    out: Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ed1 {
    encoder: LstmCell,
    hidden: Dense,
    out: Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ed2 {
    encoder: LstmCell,
    decoder: LstmCell,
    ff: Dense,
    out: Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Net {
    Mlp(Mlp),
    Lstm(LstmNet),
    Ed1(Ed1),
    Ed2(Ed2),
}

/// A forecaster with its shape contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNet {
    pub spec: ModelSpec,
    net: Net,
}

/// Parameter gradients mirroring a network's layer structure; doubles as the
/// Adam moment buffers.
#[derive(Debug, Clone)]
pub enum NetGrads {
    Mlp {
        hidden: DenseGrad,
        out: DenseGrad,
    },
    Lstm {
        cell: LstmGrad,
        ff: DenseGrad,
        out: DenseGrad,
    },
    Ed1 {
        encoder: LstmGrad,
        hidden: DenseGrad,
        out: DenseGrad,
    },
    Ed2 {
        encoder: LstmGrad,
        decoder: LstmGrad,
        ff: DenseGrad,
        out: DenseGrad,
    },
}

impl NeuralNet {
    /// Builds a network with seeded uniform fan-in initialization; identical
    /// seeds produce identical parameters.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self, NeuralError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_out = spec.n_output();
        let net = match spec.arch {
            Architecture::Mlp => {
                let h = spec.mlp_hidden_width()?;
                Net::Mlp(Mlp {
                    hidden: Dense::new(&mut rng, spec.n_input, h, Activation::Relu),
                    out: Dense::new(&mut rng, h, n_out, Activation::Identity),
                })
            }
            Architecture::Lstm => {
                let u = spec.lstm_units()?;
                let ff = spec.lstm_ff_width()?;
                Net::Lstm(LstmNet {
                    cell: LstmCell::new(&mut rng, spec.n_input, u),
                    ff: Dense::new(&mut rng, u, ff, Activation::Relu),
                    out: Dense::new(&mut rng, ff, n_out, Activation::Identity),
                })
            }
            Architecture::Ed1 => {
                let enc = spec.ed_encoder_units()?;
                let h = spec.ed_decoder_hidden()?;
                Net::Ed1(Ed1 {
                    encoder: LstmCell::new(&mut rng, 1, enc),
                    hidden: Dense::new(&mut rng, enc + spec.n_input, h, Activation::Relu),
                    out: Dense::new(&mut rng, h, n_out, Activation::Identity),
                })
            }
            Architecture::Ed2 => {
                let enc = spec.ed_encoder_units()?;
                let h = spec.ed_decoder_hidden()?;
                Net::Ed2(Ed2 {
                    encoder: LstmCell::new(&mut rng, 1, enc),
                    decoder: LstmCell::new(&mut rng, enc + spec.n_input, enc),
                    ff: Dense::new(&mut rng, enc, h, Activation::Relu),
                    out: Dense::new(&mut rng, h, n_out, Activation::Identity),
                })
            }
        };
        Ok(Self { spec, net })
    }

    fn check_batch(
        &self,
        feats: ArrayView2<'_, f64>,
        past: Option<ArrayView2<'_, f64>>,
    ) -> Result<(), NeuralError> {
        if feats.ncols() != self.spec.n_input {
            return Err(NeuralError::ShapeMismatch(format!(
                "expected {} input features, got {}",
                self.spec.n_input,
                feats.ncols()
            )));
        }
        if self.spec.arch.uses_past_sequence() {
            let past = past.ok_or_else(|| {
                NeuralError::ShapeMismatch("encoder-decoder model requires a past window".into())
            })?;
            let expected = self.spec.past_len.expect("validated at construction");
            if past.ncols() != expected {
                return Err(NeuralError::ShapeMismatch(format!(
                    "expected past window of {expected}, got {}",
                    past.ncols()
                )));
            }
            if past.nrows() != feats.nrows() {
                return Err(NeuralError::ShapeMismatch(format!(
                    "{} feature rows vs {} past rows",
                    feats.nrows(),
                    past.nrows()
                )));
            }
        }
        Ok(())
    }

    /// Raw network output for a batch, one flat T x Q row per sample.
    pub fn forward_batch(
        &self,
        feats: ArrayView2<'_, f64>,
        past: Option<ArrayView2<'_, f64>>,
    ) -> Result<Array2<f64>, NeuralError> {
        self.check_batch(feats, past)?;
        Ok(match &self.net {
            Net::Mlp(m) => m.out.forward(m.hidden.forward(feats).view()),
            Net::Lstm(m) => {
                let b = feats.nrows();
                let zero_h = Array2::zeros((b, m.cell.units));
                let zero_c = Array2::zeros((b, m.cell.units));
                let (h, _) = m.cell.step(feats, zero_h.view(), zero_c.view());
                m.out.forward(m.ff.forward(h.view()).view())
            }
            Net::Ed1(m) => {
                let ctx = encode(&m.encoder, past.expect("checked"));
                let z = concatenate(Axis(1), &[ctx.view(), feats]).expect("row counts agree");
                m.out.forward(m.hidden.forward(z.view()).view())
            }
            Net::Ed2(m) => {
                let ctx = encode(&m.encoder, past.expect("checked"));
                let z = concatenate(Axis(1), &[ctx.view(), feats]).expect("row counts agree");
                let b = z.nrows();
                let zero_h = Array2::zeros((b, m.decoder.units));
                let zero_c = Array2::zeros((b, m.decoder.units));
                let (h, _) = m.decoder.step(z.view(), zero_h.view(), zero_c.view());
                m.out.forward(m.ff.forward(h.view()).view())
            }
        })
    }

    /// Forecast for one sample: the flat output reshaped row-major to T x Q
    /// with quantile crossing repaired.
    pub fn forward_matrix(
        &self,
        feats: ArrayView1<'_, f64>,
        past: Option<ArrayView1<'_, f64>>,
        issue_time: NaiveDateTime,
        horizon_indices: Vec<usize>,
        levels: QuantileLevels,
    ) -> Result<QuantileMatrix, NeuralError> {
        if horizon_indices.len() != self.spec.horizon_len || levels.len() != self.spec.n_quantiles {
            return Err(NeuralError::ShapeMismatch(format!(
                "matrix shape {}x{} does not match model output {}x{}",
                horizon_indices.len(),
                levels.len(),
                self.spec.horizon_len,
                self.spec.n_quantiles
            )));
        }
        let feats2 = feats.insert_axis(Axis(0));
        let past2 = past.map(|p| p.insert_axis(Axis(0)));
        let out = self.forward_batch(feats2, past2.as_ref().map(|p| p.view()))?;
        let values = Array2::from_shape_vec(
            (self.spec.horizon_len, self.spec.n_quantiles),
            out.row(0).to_vec(),
        )
        .expect("row-major reshape of the output vector");
        let mut zm = QuantileMatrix::new(issue_time, horizon_indices, levels, values)
            .map_err(|e| NeuralError::ShapeMismatch(e.to_string()))?;
        zm.enforce_monotonicity();
        Ok(zm)
    }

    /// Mean Huber-smoothed multi-output quantile loss of a batch and the
    /// gradient of that loss with respect to every parameter.
    pub fn loss_and_grads(
        &self,
        feats: ArrayView2<'_, f64>,
        past: Option<ArrayView2<'_, f64>>,
        targets: ArrayView2<'_, f64>,
        levels: &QuantileLevels,
        huber: HuberConfig,
    ) -> Result<(f64, NetGrads), NeuralError> {
        self.check_batch(feats, past)?;
        if targets.nrows() != feats.nrows() || targets.ncols() != self.spec.horizon_len {
            return Err(NeuralError::ShapeMismatch(format!(
                "targets {:?} do not match batch of {} x {} steps",
                targets.dim(),
                feats.nrows(),
                self.spec.horizon_len
            )));
        }
        if levels.len() != self.spec.n_quantiles {
            return Err(NeuralError::ShapeMismatch(format!(
                "{} levels vs {} model quantiles",
                levels.len(),
                self.spec.n_quantiles
            )));
        }

        match &self.net {
            Net::Mlp(m) => {
                let (a, c_hidden) = m.hidden.forward_cached(feats);
                let (out, c_out) = m.out.forward_cached(a.view());
                let (loss, d_out) = output_loss_grad(&out, targets, levels, huber.delta);
                let mut g_out = m.out.zero_grad();
                let mut g_hidden = m.hidden.zero_grad();
                let da = m.out.backward(&c_out, d_out.view(), &mut g_out);
                m.hidden.backward(&c_hidden, da.view(), &mut g_hidden);
                Ok((
                    loss,
                    NetGrads::Mlp {
                        hidden: g_hidden,
                        out: g_out,
                    },
                ))
            }
            Net::Lstm(m) => {
                let b = feats.nrows();
                let zero_h = Array2::zeros((b, m.cell.units));
                let zero_c = Array2::zeros((b, m.cell.units));
                let (h, _, cache) = m.cell.step_cached(feats, zero_h.view(), zero_c.view());
                let (a, c_ff) = m.ff.forward_cached(h.view());
                let (out, c_out) = m.out.forward_cached(a.view());
                let (loss, d_out) = output_loss_grad(&out, targets, levels, huber.delta);
                let mut g_out = m.out.zero_grad();
                let mut g_ff = m.ff.zero_grad();
                let mut g_cell = m.cell.zero_grad();
                let da = m.out.backward(&c_out, d_out.view(), &mut g_out);
                let dh = m.ff.backward(&c_ff, da.view(), &mut g_ff);
                let zero_dc = Array2::zeros((b, m.cell.units));
                m.cell
                    .backward_step(&cache, dh.view(), zero_dc.view(), &mut g_cell);
                Ok((
                    loss,
                    NetGrads::Lstm {
                        cell: g_cell,
                        ff: g_ff,
                        out: g_out,
                    },
                ))
            }
            Net::Ed1(m) => {
                let past = past.expect("checked");
                let (ctx, caches) = encode_cached(&m.encoder, past);
                let z = concatenate(Axis(1), &[ctx.view(), feats]).expect("row counts agree");
                let (a, c_hidden) = m.hidden.forward_cached(z.view());
                let (out, c_out) = m.out.forward_cached(a.view());
                let (loss, d_out) = output_loss_grad(&out, targets, levels, huber.delta);
                let mut g_out = m.out.zero_grad();
                let mut g_hidden = m.hidden.zero_grad();
                let mut g_enc = m.encoder.zero_grad();
                let da = m.out.backward(&c_out, d_out.view(), &mut g_out);
                let dz = m.hidden.backward(&c_hidden, da.view(), &mut g_hidden);
                let d_ctx = dz.slice(s![.., 0..m.encoder.units]).to_owned();
                backprop_encoder(&m.encoder, &caches, d_ctx, &mut g_enc);
                Ok((
                    loss,
                    NetGrads::Ed1 {
                        encoder: g_enc,
                        hidden: g_hidden,
                        out: g_out,
                    },
                ))
            }
            Net::Ed2(m) => {
                let past = past.expect("checked");
                let b = feats.nrows();
                let (ctx, caches) = encode_cached(&m.encoder, past);
                let z = concatenate(Axis(1), &[ctx.view(), feats]).expect("row counts agree");
                let zero_h = Array2::zeros((b, m.decoder.units));
                let zero_c = Array2::zeros((b, m.decoder.units));
                let (h, _, dec_cache) = m.decoder.step_cached(z.view(), zero_h.view(), zero_c.view());
                let (a, c_ff) = m.ff.forward_cached(h.view());
                let (out, c_out) = m.out.forward_cached(a.view());
                let (loss, d_out) = output_loss_grad(&out, targets, levels, huber.delta);
                let mut g_out = m.out.zero_grad();
                let mut g_ff = m.ff.zero_grad();
                let mut g_dec = m.decoder.zero_grad();
                let mut g_enc = m.encoder.zero_grad();
                let da = m.out.backward(&c_out, d_out.view(), &mut g_out);
                let dh = m.ff.backward(&c_ff, da.view(), &mut g_ff);
                let zero_dc = Array2::zeros((b, m.decoder.units));
                let (dz, _, _) =
                    m.decoder
                        .backward_step(&dec_cache, dh.view(), zero_dc.view(), &mut g_dec);
                let d_ctx = dz.slice(s![.., 0..m.encoder.units]).to_owned();
                backprop_encoder(&m.encoder, &caches, d_ctx, &mut g_enc);
                Ok((
                    loss,
                    NetGrads::Ed2 {
                        encoder: g_enc,
                        decoder: g_dec,
                        ff: g_ff,
                        out: g_out,
                    },
                ))
            }
        }
    }

    pub fn zero_grads(&self) -> NetGrads {
        match &self.net {
            Net::Mlp(m) => NetGrads::Mlp {
                hidden: m.hidden.zero_grad(),
                out: m.out.zero_grad(),
            },
            Net::Lstm(m) => NetGrads::Lstm {
                cell: m.cell.zero_grad(),
                ff: m.ff.zero_grad(),
                out: m.out.zero_grad(),
            },
            Net::Ed1(m) => NetGrads::Ed1 {
                encoder: m.encoder.zero_grad(),
                hidden: m.hidden.zero_grad(),
                out: m.out.zero_grad(),
            },
            Net::Ed2(m) => NetGrads::Ed2 {
                encoder: m.encoder.zero_grad(),
                decoder: m.decoder.zero_grad(),
                ff: m.ff.zero_grad(),
                out: m.out.zero_grad(),
            },
        }
    }

    /// Visits every parameter in a fixed canonical order.
    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut f64)) {
        match &mut self.net {
            Net::Mlp(m) => {
                visit_dense(&mut m.hidden, f);
                visit_dense(&mut m.out, f);
            }
            Net::Lstm(m) => {
                visit_lstm(&mut m.cell, f);
                visit_dense(&mut m.ff, f);
                visit_dense(&mut m.out, f);
            }
            Net::Ed1(m) => {
                visit_lstm(&mut m.encoder, f);
                visit_dense(&mut m.hidden, f);
                visit_dense(&mut m.out, f);
            }
            Net::Ed2(m) => {
                visit_lstm(&mut m.encoder, f);
                visit_lstm(&mut m.decoder, f);
                visit_dense(&mut m.ff, f);
                visit_dense(&mut m.out, f);
            }
        }
    }

    pub fn n_params(&self) -> usize {
        let mut n = 0;
        let mut clone = self.clone();
        clone.visit_params_mut(&mut |_| n += 1);
        n
    }

    /// Zeroes every parameter; test hook for ablation oracles.
    pub fn zero_all_params(&mut self) {
        self.visit_params_mut(&mut |p| *p = 0.0);
    }

    /// Zeroes the encoder of an encoder-decoder net; test hook.
    pub fn zero_encoder(&mut self) -> Result<(), NeuralError> {
        match &mut self.net {
            Net::Ed1(m) => {
                m.encoder.wx.fill(0.0);
                m.encoder.wh.fill(0.0);
                m.encoder.b.fill(0.0);
                Ok(())
            }
            Net::Ed2(m) => {
                m.encoder.wx.fill(0.0);
                m.encoder.wh.fill(0.0);
                m.encoder.b.fill(0.0);
                Ok(())
            }
            _ => Err(NeuralError::ShapeMismatch(
                "model has no encoder to zero".into(),
            )),
        }
    }
}

/// Mutable access to a network's layers, used by the optimizer.
pub enum LayersMut<'a> {
    Mlp {
        hidden: &'a mut Dense,
        out: &'a mut Dense,
    },
    Lstm {
        cell: &'a mut LstmCell,
        ff: &'a mut Dense,
        out: &'a mut Dense,
    },
    Ed1 {
        encoder: &'a mut LstmCell,
        hidden: &'a mut Dense,
        out: &'a mut Dense,
    },
    Ed2 {
        encoder: &'a mut LstmCell,
        decoder: &'a mut LstmCell,
        ff: &'a mut Dense,
        out: &'a mut Dense,
    },
}

impl NeuralNet {
    pub fn with_layers_mut(&mut self, f: impl FnOnce(LayersMut<'_>)) {
        match &mut self.net {
            Net::Mlp(m) => f(LayersMut::Mlp {
                hidden: &mut m.hidden,
                out: &mut m.out,
            }),
            Net::Lstm(m) => f(LayersMut::Lstm {
                cell: &mut m.cell,
                ff: &mut m.ff,
                out: &mut m.out,
            }),
            Net::Ed1(m) => f(LayersMut::Ed1 {
                encoder: &mut m.encoder,
                hidden: &mut m.hidden,
                out: &mut m.out,
            }),
            Net::Ed2(m) => f(LayersMut::Ed2 {
                encoder: &mut m.encoder,
                decoder: &mut m.decoder,
                ff: &mut m.ff,
                out: &mut m.out,
            }),
        }
    }
}

impl NetGrads {
    /// Flattens in the same canonical order as `visit_params_mut`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let push_dense = |g: &DenseGrad, out: &mut Vec<f64>| {
            out.extend(g.dw.iter());
            out.extend(g.db.iter());
        };
        let push_lstm = |g: &LstmGrad, out: &mut Vec<f64>| {
            out.extend(g.dwx.iter());
            out.extend(g.dwh.iter());
            out.extend(g.db.iter());
        };
        match self {
            NetGrads::Mlp { hidden, out: o } => {
                push_dense(hidden, &mut out);
                push_dense(o, &mut out);
            }
            NetGrads::Lstm { cell, ff, out: o } => {
                push_lstm(cell, &mut out);
                push_dense(ff, &mut out);
                push_dense(o, &mut out);
            }
            NetGrads::Ed1 {
                encoder,
                hidden,
                out: o,
            } => {
                push_lstm(encoder, &mut out);
                push_dense(hidden, &mut out);
                push_dense(o, &mut out);
            }
            NetGrads::Ed2 {
                encoder,
                decoder,
                ff,
                out: o,
            } => {
                push_lstm(encoder, &mut out);
                push_lstm(decoder, &mut out);
                push_dense(ff, &mut out);
                push_dense(o, &mut out);
            }
        }
        out
    }
}

fn visit_dense(d: &mut Dense, f: &mut dyn FnMut(&mut f64)) {
    for p in d.w.iter_mut() {
        f(p);
    }
    for p in d.b.iter_mut() {
        f(p);
    }
}

fn visit_lstm(c: &mut LstmCell, f: &mut dyn FnMut(&mut f64)) {
    for p in c.wx.iter_mut() {
        f(p);
    }
    for p in c.wh.iter_mut() {
        f(p);
    }
    for p in c.b.iter_mut() {
        f(p);
    }
}

/// Runs the encoder over the past window, one scalar input per step, and
/// returns the final hidden state.
fn encode(cell: &LstmCell, past: ArrayView2<'_, f64>) -> Array2<f64> {
    let b = past.nrows();
    let mut h = Array2::zeros((b, cell.units));
    let mut c = Array2::zeros((b, cell.units));
    for t in 0..past.ncols() {
        let x_t = past.slice(s![.., t..t + 1]);
        let (h2, c2) = cell.step(x_t, h.view(), c.view());
        h = h2;
        c = c2;
    }
    h
}

fn encode_cached(cell: &LstmCell, past: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<LstmStepCache>) {
    let b = past.nrows();
    let mut h = Array2::zeros((b, cell.units));
    let mut c = Array2::zeros((b, cell.units));
    let mut caches = Vec::with_capacity(past.ncols());
    for t in 0..past.ncols() {
        let x_t = past.slice(s![.., t..t + 1]);
        let (h2, c2, cache) = cell.step_cached(x_t, h.view(), c.view());
        h = h2;
        c = c2;
        caches.push(cache);
    }
    (h, caches)
}

/// Backpropagation through time over the encoder steps; only the final
/// hidden state feeds the decoder, so the cell gradient starts at zero.
fn backprop_encoder(
    cell: &LstmCell,
    caches: &[LstmStepCache],
    d_h_last: Array2<f64>,
    grad: &mut LstmGrad,
) {
    let mut d_h = d_h_last;
    let mut d_c = Array2::zeros(d_h.dim());
    for cache in caches.iter().rev() {
        let (_, d_h_prev, d_c_prev) = cell.backward_step(cache, d_h.view(), d_c.view(), grad);
        d_h = d_h_prev;
        d_c = d_c_prev;
    }
}

/// Batch-mean Huber pinball loss over the flat output block and its gradient
/// with respect to that block. Output column `k * Q + q` is the level-q
/// forecast for horizon step k.
fn output_loss_grad(
    out: &Array2<f64>,
    targets: ArrayView2<'_, f64>,
    levels: &QuantileLevels,
    delta: f64,
) -> (f64, Array2<f64>) {
    let b = out.nrows();
    let n_q = levels.len();
    let mut grad = Array2::zeros(out.dim());
    let mut total = 0.0;
    for bi in 0..b {
        for (k, &y) in targets.row(bi).iter().enumerate() {
            for (qi, q) in levels.iter().enumerate() {
                let idx = k * n_q + qi;
                let yhat = out[(bi, idx)];
                total += huber_pinball_unchecked(q, y, yhat, delta);
                grad[(bi, idx)] = huber_pinball_grad_unchecked(q, y, yhat, delta) / b as f64;
            }
        }
    }
    (total / b as f64, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_spec(arch: Architecture) -> ModelSpec {
        // n_input 6, T=2, Q=2, 4-step past window for the ED variants.
        let past = arch.uses_past_sequence().then_some(4);
        ModelSpec::new(arch, 6, 2, 2, past).unwrap()
    }

    fn toy_batch(b: usize, spec: &ModelSpec, seed: u64) -> (Array2<f64>, Option<Array2<f64>>, Array2<f64>) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feats = Array2::from_shape_fn((b, spec.n_input), |_| rng.random_range(-1.0..1.0));
        let past = spec
            .past_len
            .map(|p| Array2::from_shape_fn((b, p), |_| rng.random_range(0.0..1.0)));
        let targets = Array2::from_shape_fn((b, spec.horizon_len), |_| rng.random_range(0.0..1.0));
        (feats, past, targets)
    }

    fn finite_difference_check(arch: Architecture) {
        let spec = toy_spec(arch);
        let net = NeuralNet::new(spec, 11).unwrap();
        let (feats, past, targets) = toy_batch(3, &spec, 99);
        let levels = QuantileLevels::new(vec![0.25, 0.75]).unwrap();
        let huber = HuberConfig::new(1e-2).unwrap();

        let (_, grads) = net
            .loss_and_grads(
                feats.view(),
                past.as_ref().map(|p| p.view()),
                targets.view(),
                &levels,
                huber,
            )
            .unwrap();
        let analytic = grads.flatten();
        assert_eq!(analytic.len(), net.n_params());

        let h = 1e-5;
        let mut max_rel: f64 = 0.0;
        for (idx, &a) in analytic.iter().enumerate() {
            let loss_at = |offset: f64| {
                let mut probe = net.clone();
                let mut i = 0usize;
                probe.visit_params_mut(&mut |p| {
                    if i == idx {
                        *p += offset;
                    }
                    i += 1;
                });
                probe
                    .loss_and_grads(
                        feats.view(),
                        past.as_ref().map(|p| p.view()),
                        targets.view(),
                        &levels,
                        huber,
                    )
                    .unwrap()
                    .0
            };
            let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        }
        assert!(
            max_rel <= 1e-4,
            "{arch:?}: max relative gradient error {max_rel}"
        );
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        finite_difference_check(Architecture::Mlp);
    }

    #[test]
    fn lstm_gradients_match_finite_differences() {
        finite_difference_check(Architecture::Lstm);
    }

    #[test]
    fn ed1_gradients_match_finite_differences() {
        finite_difference_check(Architecture::Ed1);
    }

    #[test]
    fn ed2_gradients_match_finite_differences() {
        finite_difference_check(Architecture::Ed2);
    }

    #[test]
    fn perfect_prediction_has_zero_loss_and_gradient() {
        // Zero parameters produce a constant zero output; zero targets then
        // sit exactly at the smooth minimum.
        let spec = toy_spec(Architecture::Mlp);
        let mut net = NeuralNet::new(spec, 3).unwrap();
        net.zero_all_params();
        let (feats, _, _) = toy_batch(2, &spec, 5);
        let targets = Array2::zeros((2, spec.horizon_len));
        let levels = QuantileLevels::new(vec![0.25, 0.75]).unwrap();
        let (loss, grads) = net
            .loss_and_grads(
                feats.view(),
                None,
                targets.view(),
                &levels,
                HuberConfig::default(),
            )
            .unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.flatten().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn same_seed_same_output() {
        let spec = toy_spec(Architecture::Ed2);
        let a = NeuralNet::new(spec, 1234).unwrap();
        let b = NeuralNet::new(spec, 1234).unwrap();
        assert_eq!(a, b);
        let (feats, past, _) = toy_batch(4, &spec, 8);
        let ya = a
            .forward_batch(feats.view(), past.as_ref().map(|p| p.view()))
            .unwrap();
        let yb = b
            .forward_batch(feats.view(), past.as_ref().map(|p| p.view()))
            .unwrap();
        assert_eq!(ya, yb);
        let c = NeuralNet::new(spec, 1235).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ed1_with_zeroed_encoder_matches_decoder_only_oracle() {
        let spec = toy_spec(Architecture::Ed1);
        let mut net = NeuralNet::new(spec, 77).unwrap();
        net.zero_encoder().unwrap();
        let (feats, past, _) = toy_batch(3, &spec, 13);
        let out = net
            .forward_batch(feats.view(), past.as_ref().map(|p| p.view()))
            .unwrap();

        // Decoder-only oracle: zero context concatenated with the features.
        let Net::Ed1(inner) = &net.net else { panic!() };
        let enc_units = inner.encoder.units;
        let zero_ctx = Array2::zeros((3, enc_units));
        let z = concatenate(Axis(1), &[zero_ctx.view(), feats.view()]).unwrap();
        let expected = inner.out.forward(inner.hidden.forward(z.view()).view());
        assert_eq!(out, expected);
    }

    #[test]
    fn forward_matrix_reshapes_row_major_and_repairs_crossings() {
        let spec = toy_spec(Architecture::Mlp);
        let net = NeuralNet::new(spec, 21).unwrap();
        let (feats, _, _) = toy_batch(1, &spec, 1);
        let issue =
            NaiveDateTime::parse_from_str("2020-08-02T06:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
        let levels = QuantileLevels::new(vec![0.25, 0.75]).unwrap();
        let zm = net
            .forward_matrix(feats.row(0), None, issue, vec![24, 25], levels.clone())
            .unwrap();
        assert_eq!(zm.n_steps(), 2);
        assert_eq!(zm.n_quantiles(), 2);
        assert!(zm.is_monotone());

        // Raw flat output reordered row-major, then sorted per row.
        let raw = net.forward_batch(feats.view(), None).unwrap();
        for k in 0..2 {
            let mut row: Vec<f64> = (0..2).map(|q| raw[(0, k * 2 + q)]).collect();
            row.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(zm.row(k).to_vec(), row);
        }
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let spec = toy_spec(Architecture::Ed1);
        let net = NeuralNet::new(spec, 0).unwrap();
        let feats = Array2::zeros((2, spec.n_input));
        // missing past window
        assert!(net.forward_batch(feats.view(), None).is_err());
        // wrong feature width
        let bad = Array2::zeros((2, 3));
        let past = Array2::zeros((2, 4));
        assert!(net.forward_batch(bad.view(), Some(past.view())).is_err());
        // wrong past width
        let bad_past = Array2::zeros((2, 7));
        assert!(net.forward_batch(feats.view(), Some(bad_past.view())).is_err());
    }

    #[test]
    fn day_ahead_output_width_is_630() {
        let spec = ModelSpec::for_gate(
            Architecture::Mlp,
            &crate::types::Gate::DayAhead12.schedule(),
            9,
        )
        .unwrap();
        assert_eq!(spec.n_output(), 630);
        assert_eq!(spec.horizon_len, 70);
    }
}
