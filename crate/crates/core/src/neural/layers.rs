//! Building blocks for the hand-rolled networks: a fully connected layer and
//! an LSTM cell, both operating on batches stored as (samples, features),
//! with explicit backward passes.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

fn uniform_fan_in(rng: &mut impl Rng, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

/// Fully connected layer; weights stored (input, output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

/// Parameter gradients of a [`Dense`] layer; also reused as Adam moment
/// buffers since they share the parameter shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseGrad {
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
}

pub struct DenseCache {
    input: Array2<f64>,
    pre_activation: Array2<f64>,
}

impl Dense {
    pub fn new(rng: &mut impl Rng, input: usize, output: usize, act: Activation) -> Self {
        Self {
            w: uniform_fan_in(rng, input, output, input),
            b: Array1::zeros(output),
            act,
        }
    }

    pub fn input_width(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.dot(&self.w);
        z += &self.b;
        z.mapv_inplace(|v| self.act.apply(v));
        z
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, DenseCache) {
        let mut z = x.dot(&self.w);
        z += &self.b;
        let y = z.mapv(|v| self.act.apply(v));
        (
            y,
            DenseCache {
                input: x.to_owned(),
                pre_activation: z,
            },
        )
    }

    /// Returns the gradient w.r.t. the layer input and accumulates the
    /// parameter gradients into `grad`.
    pub fn backward(
        &self,
        cache: &DenseCache,
        d_out: ArrayView2<'_, f64>,
        grad: &mut DenseGrad,
    ) -> Array2<f64> {
        let mut dz = d_out.to_owned();
        dz.zip_mut_with(&cache.pre_activation, |d, &z| *d *= self.act.deriv(z));
        grad.dw += &cache.input.t().dot(&dz);
        grad.db += &dz.sum_axis(Axis(0));
        dz.dot(&self.w.t())
    }

    pub fn zero_grad(&self) -> DenseGrad {
        DenseGrad {
            dw: Array2::zeros(self.w.dim()),
            db: Array1::zeros(self.b.len()),
        }
    }
}

/// LSTM cell with concatenated gate weights laid out as [input | forget |
/// candidate | output] blocks along the 4u axis. Weights stored
/// (input, 4 units) and (units, 4 units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmGrad {
    pub dwx: Array2<f64>,
    pub dwh: Array2<f64>,
    pub db: Array1<f64>,
}

/// Everything the backward pass needs from one forward step.
pub struct LstmStepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    gate_i: Array2<f64>,
    gate_f: Array2<f64>,
    gate_g: Array2<f64>,
    gate_o: Array2<f64>,
    tanh_c_new: Array2<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmCell {
    /// Forget-gate bias starts at 1 so the cell initially retains its state.
    pub fn new(rng: &mut impl Rng, input: usize, units: usize) -> Self {
        let wx = uniform_fan_in(rng, input, 4 * units, input);
        let wh = uniform_fan_in(rng, units, 4 * units, units);
        let mut b = Array1::zeros(4 * units);
        b.slice_mut(s![units..2 * units]).fill(1.0);
        Self { wx, wh, b, units }
    }

    pub fn input_width(&self) -> usize {
        self.wx.nrows()
    }

    /// One gated update: sigmoid input/forget/output gates, tanh candidate,
    /// `c' = f*c + i*g`, `h' = o * tanh(c')`.
    pub fn step(
        &self,
        x: ArrayView2<'_, f64>,
        h_prev: ArrayView2<'_, f64>,
        c_prev: ArrayView2<'_, f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let (h, c, _) = self.step_inner(x, h_prev, c_prev);
        (h, c)
    }

    pub fn step_cached(
        &self,
        x: ArrayView2<'_, f64>,
        h_prev: ArrayView2<'_, f64>,
        c_prev: ArrayView2<'_, f64>,
    ) -> (Array2<f64>, Array2<f64>, LstmStepCache) {
        self.step_inner(x, h_prev, c_prev)
    }

    fn step_inner(
        &self,
        x: ArrayView2<'_, f64>,
        h_prev: ArrayView2<'_, f64>,
        c_prev: ArrayView2<'_, f64>,
    ) -> (Array2<f64>, Array2<f64>, LstmStepCache) {
        let u = self.units;
        let mut a = x.dot(&self.wx);
        a += &h_prev.dot(&self.wh);
        a += &self.b;
        let gate_i = a.slice(s![.., 0..u]).mapv(sigmoid);
        let gate_f = a.slice(s![.., u..2 * u]).mapv(sigmoid);
        let gate_g = a.slice(s![.., 2 * u..3 * u]).mapv(f64::tanh);
        let gate_o = a.slice(s![.., 3 * u..4 * u]).mapv(sigmoid);
        let c_new = &gate_f * &c_prev + &gate_i * &gate_g;
        let tanh_c_new = c_new.mapv(f64::tanh);
        let h_new = &gate_o * &tanh_c_new;
        let cache = LstmStepCache {
            x: x.to_owned(),
            h_prev: h_prev.to_owned(),
            c_prev: c_prev.to_owned(),
            gate_i,
            gate_f,
            gate_g,
            gate_o,
            tanh_c_new,
        };
        (h_new, c_new, cache)
    }

    /// Backpropagates one step. `d_h` and `d_c` are the gradients flowing
    /// into this step's outputs; returns (d_x, d_h_prev, d_c_prev) and
    /// accumulates parameter gradients into `grad`.
    pub fn backward_step(
        &self,
        cache: &LstmStepCache,
        d_h: ArrayView2<'_, f64>,
        d_c: ArrayView2<'_, f64>,
        grad: &mut LstmGrad,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let d_o = &d_h.to_owned() * &cache.tanh_c_new;
        let d_c_total = &d_h.to_owned() * &cache.gate_o * cache.tanh_c_new.mapv(|t| 1.0 - t * t)
            + &d_c.to_owned();
        let d_i = &d_c_total * &cache.gate_g;
        let d_g = &d_c_total * &cache.gate_i;
        let d_f = &d_c_total * &cache.c_prev;
        let d_c_prev = &d_c_total * &cache.gate_f;

        let da_i = d_i * cache.gate_i.mapv(|v| v * (1.0 - v));
        let da_f = d_f * cache.gate_f.mapv(|v| v * (1.0 - v));
        let da_g = d_g * cache.gate_g.mapv(|v| 1.0 - v * v);
        let da_o = d_o * cache.gate_o.mapv(|v| v * (1.0 - v));
        let d_a = concatenate(
            Axis(1),
            &[da_i.view(), da_f.view(), da_g.view(), da_o.view()],
        )
        .expect("gate blocks share the batch dimension");

        grad.dwx += &cache.x.t().dot(&d_a);
        grad.dwh += &cache.h_prev.t().dot(&d_a);
        grad.db += &d_a.sum_axis(Axis(0));
        let d_x = d_a.dot(&self.wx.t());
        let d_h_prev = d_a.dot(&self.wh.t());
        (d_x, d_h_prev, d_c_prev)
    }

    pub fn zero_grad(&self) -> LstmGrad {
        LstmGrad {
            dwx: Array2::zeros(self.wx.dim()),
            dwh: Array2::zeros(self.wh.dim()),
            db: Array1::zeros(self.b.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_identity_weights_pass_input_through() {
        let mut d = Dense::new(&mut ChaCha8Rng::seed_from_u64(0), 3, 3, Activation::Identity);
        d.w = Array2::eye(3);
        d.b.fill(0.0);
        let x = array![[1.0, -2.0, 3.0]];
        assert_eq!(d.forward(x.view()), x);
    }

    #[test]
    fn dense_zero_weights_relu_clamps_bias() {
        let mut d = Dense::new(&mut ChaCha8Rng::seed_from_u64(0), 2, 3, Activation::Relu);
        d.w.fill(0.0);
        d.b = array![-1.0, 0.5, 2.0];
        let y = d.forward(array![[7.0, -4.0]].view());
        assert_eq!(y, array![[0.0, 0.5, 2.0]]);
    }

    #[test]
    fn dense_matches_hand_computed_matrix_product() {
        let mut d = Dense::new(&mut ChaCha8Rng::seed_from_u64(0), 3, 2, Activation::Identity);
        d.w = array![[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]];
        d.b = array![0.5, -0.5];
        let x = array![[1.0, 0.0, -1.0], [2.0, 1.0, 0.0]];
        // Brute-force dot products per output unit.
        let mut expected = Array2::zeros((2, 2));
        for r in 0..2 {
            for c in 0..2 {
                let mut acc = d.b[c];
                for j in 0..3 {
                    acc += x[(r, j)] * d.w[(j, c)];
                }
                expected[(r, c)] = acc;
            }
        }
        assert_eq!(d.forward(x.view()), expected);
    }

    #[test]
    fn lstm_zero_parameters_halve_the_cell_state() {
        let mut cell = LstmCell::new(&mut ChaCha8Rng::seed_from_u64(0), 2, 3);
        cell.wx.fill(0.0);
        cell.wh.fill(0.0);
        cell.b.fill(0.0);
        let x = array![[1.0, -1.0]];
        let h0 = Array2::zeros((1, 3));
        let c0 = array![[0.8, -0.4, 2.0]];
        let (h1, c1) = cell.step(x.view(), h0.view(), c0.view());
        for j in 0..3 {
            assert!((c1[(0, j)] - 0.5 * c0[(0, j)]).abs() < 1e-15);
            let expect_h = 0.5 * (0.5 * c0[(0, j)]).tanh();
            assert!((h1[(0, j)] - expect_h).abs() < 1e-15);
        }
    }

    #[test]
    fn lstm_hidden_state_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cell = LstmCell::new(&mut rng, 4, 6);
        let x = Array2::from_shape_fn((5, 4), |_| rng.random_range(-10.0..10.0));
        let mut h = Array2::zeros((5, 6));
        let mut c = Array2::zeros((5, 6));
        for _ in 0..20 {
            let (h2, c2) = cell.step(x.view(), h.view(), c.view());
            h = h2;
            c = c2;
        }
        assert!(h.iter().all(|&v| v > -1.0 && v < 1.0));
    }

    #[test]
    fn lstm_step_matches_scalar_oracle() {
        // Independent scalar-by-scalar evaluation of the gate algebra.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cell = LstmCell::new(&mut rng, 2, 2);
        let x = array![[0.3, -0.7]];
        let h_prev = array![[0.1, -0.2]];
        let c_prev = array![[0.5, 0.25]];
        let (h, c) = cell.step(x.view(), h_prev.view(), c_prev.view());

        let u = 2;
        for j in 0..u {
            let pre = |block: usize| {
                let col = block * u + j;
                let mut a = cell.b[col];
                for t in 0..2 {
                    a += x[(0, t)] * cell.wx[(t, col)];
                    a += h_prev[(0, t)] * cell.wh[(t, col)];
                }
                a
            };
            let i = sigmoid(pre(0));
            let f = sigmoid(pre(1));
            let g = pre(2).tanh();
            let o = sigmoid(pre(3));
            let c_expect = f * c_prev[(0, j)] + i * g;
            let h_expect = o * c_expect.tanh();
            assert!((c[(0, j)] - c_expect).abs() < 1e-14);
            assert!((h[(0, j)] - h_expect).abs() < 1e-14);
        }
    }

    #[test]
    fn forget_gate_bias_initializes_to_one() {
        let cell = LstmCell::new(&mut ChaCha8Rng::seed_from_u64(0), 3, 4);
        for j in 0..4 {
            assert_eq!(cell.b[j], 0.0);
            assert_eq!(cell.b[4 + j], 1.0);
            assert_eq!(cell.b[8 + j], 0.0);
            assert_eq!(cell.b[12 + j], 0.0);
        }
    }
}
