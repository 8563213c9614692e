//! Mini-batch training of the quantile networks with adaptive moment
//! estimation and the Huber-smoothed multi-output quantile loss.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::loss::HuberConfig;
use crate::types::QuantileLevels;

use super::layers::{Dense, DenseGrad, LstmCell, LstmGrad};
use super::model::{LayersMut, NetGrads, NeuralNet};
use super::spec::Architecture;
use super::NeuralError;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub huber: HuberConfig,
}

impl TrainConfig {
    /// Per-architecture defaults: the MLP trains at 1e-2 with batches of 8,
    /// the recurrent models at 1e-3 with batches of 64, all for 500 epochs.
    pub fn for_architecture(arch: Architecture) -> Self {
        let (learning_rate, batch_size) = match arch {
            Architecture::Mlp => (1e-2, 8),
            Architecture::Lstm | Architecture::Ed1 | Architecture::Ed2 => (1e-3, 64),
        };
        Self {
            learning_rate,
            epochs: 500,
            batch_size,
            seed: 0,
            huber: HuberConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.learning_rate <= 0.0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(NeuralError::InvalidSpec(format!(
                "bad training configuration: lr={} epochs={} batch={}",
                self.learning_rate, self.epochs, self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    /// Mean training loss per epoch, averaged over samples.
    pub epoch_loss: Vec<f64>,
}

/// Adam first/second moment buffers plus the step counter.
pub struct AdamState {
    m: NetGrads,
    v: NetGrads,
    t: u64,
}

impl AdamState {
    pub fn for_net(net: &NeuralNet) -> Self {
        Self {
            m: net.zero_grads(),
            v: net.zero_grads(),
            t: 0,
        }
    }
}

fn adam_slice(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, t: u64) {
    let bc1 = 1.0 - BETA1.powi(t as i32);
    let bc2 = 1.0 - BETA2.powi(t as i32);
    for i in 0..p.len() {
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
}

fn adam_dense(p: &mut Dense, g: &DenseGrad, m: &mut DenseGrad, v: &mut DenseGrad, lr: f64, t: u64) {
    adam_slice(
        p.w.as_slice_mut().expect("standard layout"),
        g.dw.as_slice().expect("standard layout"),
        m.dw.as_slice_mut().expect("standard layout"),
        v.dw.as_slice_mut().expect("standard layout"),
        lr,
        t,
    );
    adam_slice(
        p.b.as_slice_mut().expect("standard layout"),
        g.db.as_slice().expect("standard layout"),
        m.db.as_slice_mut().expect("standard layout"),
        v.db.as_slice_mut().expect("standard layout"),
        lr,
        t,
    );
}

fn adam_lstm(p: &mut LstmCell, g: &LstmGrad, m: &mut LstmGrad, v: &mut LstmGrad, lr: f64, t: u64) {
    adam_slice(
        p.wx.as_slice_mut().expect("standard layout"),
        g.dwx.as_slice().expect("standard layout"),
        m.dwx.as_slice_mut().expect("standard layout"),
        v.dwx.as_slice_mut().expect("standard layout"),
        lr,
        t,
    );
    adam_slice(
        p.wh.as_slice_mut().expect("standard layout"),
        g.dwh.as_slice().expect("standard layout"),
        m.dwh.as_slice_mut().expect("standard layout"),
        v.dwh.as_slice_mut().expect("standard layout"),
        lr,
        t,
    );
    adam_slice(
        p.b.as_slice_mut().expect("standard layout"),
        g.db.as_slice().expect("standard layout"),
        m.db.as_slice_mut().expect("standard layout"),
        v.db.as_slice_mut().expect("standard layout"),
        lr,
        t,
    );
}

/// One optimizer step. The gradient structure must come from the same
/// network; the enum arms always agree by construction.
pub fn adam_step(net: &mut NeuralNet, grads: &NetGrads, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let t = state.t;
    net.with_layers_mut(|layers| match (layers, grads, &mut state.m, &mut state.v) {
        (
            LayersMut::Mlp { hidden, out },
            NetGrads::Mlp { hidden: gh, out: go },
            NetGrads::Mlp { hidden: mh, out: mo },
            NetGrads::Mlp { hidden: vh, out: vo },
        ) => {
            adam_dense(hidden, gh, mh, vh, lr, t);
            adam_dense(out, go, mo, vo, lr, t);
        }
        (
            LayersMut::Lstm { cell, ff, out },
            NetGrads::Lstm { cell: gc, ff: gf, out: go },
            NetGrads::Lstm { cell: mc, ff: mf, out: mo },
            NetGrads::Lstm { cell: vc, ff: vf, out: vo },
        ) => {
            adam_lstm(cell, gc, mc, vc, lr, t);
            adam_dense(ff, gf, mf, vf, lr, t);
            adam_dense(out, go, mo, vo, lr, t);
        }
        (
            LayersMut::Ed1 { encoder, hidden, out },
            NetGrads::Ed1 { encoder: ge, hidden: gh, out: go },
            NetGrads::Ed1 { encoder: me, hidden: mh, out: mo },
            NetGrads::Ed1 { encoder: ve, hidden: vh, out: vo },
        ) => {
            adam_lstm(encoder, ge, me, ve, lr, t);
            adam_dense(hidden, gh, mh, vh, lr, t);
            adam_dense(out, go, mo, vo, lr, t);
        }
        (
            LayersMut::Ed2 { encoder, decoder, ff, out },
            NetGrads::Ed2 { encoder: ge, decoder: gd, ff: gf, out: go },
            NetGrads::Ed2 { encoder: me, decoder: md, ff: mf, out: mo },
            NetGrads::Ed2 { encoder: ve, decoder: vd, ff: vf, out: vo },
        ) => {
            adam_lstm(encoder, ge, me, ve, lr, t);
            adam_lstm(decoder, gd, md, vd, lr, t);
            adam_dense(ff, gf, mf, vf, lr, t);
            adam_dense(out, go, mo, vo, lr, t);
        }
        _ => unreachable!("gradient structure does not match the network"),
    });
}

/// Trains a network in place and returns the per-epoch mean training loss.
/// Batches are reshuffled every epoch from the seeded generator, so a given
/// (network seed, training seed) pair is fully reproducible.
pub fn train(
    net: &mut NeuralNet,
    feats: ArrayView2<'_, f64>,
    past: Option<ArrayView2<'_, f64>>,
    targets: ArrayView2<'_, f64>,
    levels: &QuantileLevels,
    cfg: &TrainConfig,
) -> Result<TrainResult, NeuralError> {
    cfg.validate()?;
    let n = feats.nrows();
    if n == 0 {
        return Err(NeuralError::EmptySampleSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::for_net(net);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let bf: Array2<f64> = feats.select(Axis(0), chunk);
            let bp: Option<Array2<f64>> = past.map(|p| p.select(Axis(0), chunk));
            let bt: Array2<f64> = targets.select(Axis(0), chunk);
            let (loss, grads) = net.loss_and_grads(
                bf.view(),
                bp.as_ref().map(|p| p.view()),
                bt.view(),
                levels,
                cfg.huber,
            )?;
            adam_step(net, &grads, &mut state, cfg.learning_rate);
            loss_sum += loss * chunk.len() as f64;
        }
        let mean = loss_sum / n as f64;
        if !mean.is_finite() {
            return Err(NeuralError::DivergenceDetected { epoch });
        }
        epoch_loss.push(mean);
    }
    Ok(TrainResult { epoch_loss })
}
