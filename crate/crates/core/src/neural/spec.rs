//! Architecture selection and layer sizing. The hidden widths follow fixed
//! formulas of the input and output widths; integer divisions truncate
//! toward zero and every width must come out at least 1.

use crate::types::{GateSchedule, PAST_PV_STEPS};
use serde::{Deserialize, Serialize};

use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    Mlp,
    Lstm,
    Ed1,
    Ed2,
}

impl Architecture {
    pub fn uses_past_sequence(self) -> bool {
        matches!(self, Architecture::Ed1 | Architecture::Ed2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::Lstm => "lstm",
            Architecture::Ed1 => "ed1",
            Architecture::Ed2 => "ed2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input_width: usize,
    pub output_width: usize,
    pub relu: bool,
}

/// Shape contract of one model: feature width in, a T x Q quantile block out,
/// and for the encoder-decoder variants the length of the past-PV window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub n_input: usize,
    pub horizon_len: usize,
    pub n_quantiles: usize,
    /// Flattened length of the past window fed to the encoder.
    pub past_len: Option<usize>,
}

impl ModelSpec {
    pub fn new(
        arch: Architecture,
        n_input: usize,
        horizon_len: usize,
        n_quantiles: usize,
        past_len: Option<usize>,
    ) -> Result<Self, NeuralError> {
        if n_input == 0 || horizon_len == 0 || n_quantiles == 0 {
            return Err(NeuralError::InvalidSpec(
                "input, horizon and quantile counts must be positive".into(),
            ));
        }
        if arch.uses_past_sequence() && past_len.unwrap_or(0) == 0 {
            return Err(NeuralError::InvalidSpec(
                "encoder-decoder models need a non-empty past window".into(),
            ));
        }
        let spec = Self {
            arch,
            n_input,
            horizon_len,
            n_quantiles,
            past_len,
        };
        // Force the sizing formulas to be realizable up front.
        for layer in spec.layer_specs()? {
            if layer.input_width == 0 || layer.output_width == 0 {
                return Err(NeuralError::InvalidSpec(format!(
                    "layer width collapsed to zero: {layer:?}"
                )));
            }
        }
        Ok(spec)
    }

    /// Spec for one forecasting gate: two weather channels per horizon step
    /// in, the quantile block out, a 3-hour past window for the ED variants.
    pub fn for_gate(
        arch: Architecture,
        schedule: &GateSchedule,
        n_quantiles: usize,
    ) -> Result<Self, NeuralError> {
        let past = arch.uses_past_sequence().then_some(PAST_PV_STEPS);
        Self::new(
            arch,
            schedule.n_weather_features(),
            schedule.horizon_length(),
            n_quantiles,
            past,
        )
    }

    pub fn n_output(&self) -> usize {
        self.horizon_len * self.n_quantiles
    }

    fn sized(&self, base: i64, num: i64, den: i64) -> Result<usize, NeuralError> {
        let w = base + num / den;
        if w < 1 {
            Err(NeuralError::InvalidSpec(format!(
                "sizing formula produced width {w} for {:?}",
                self.arch
            )))
        } else {
            Ok(w as usize)
        }
    }

    /// MLP hidden width: `n_input + (n_output - n_input) / 2`.
    pub fn mlp_hidden_width(&self) -> Result<usize, NeuralError> {
        let (i, o) = (self.n_input as i64, self.n_output() as i64);
        self.sized(i, o - i, 2)
    }

    /// LSTM recurrent units: `n_input + (n_output - n_input) / 3`.
    pub fn lstm_units(&self) -> Result<usize, NeuralError> {
        let (i, o) = (self.n_input as i64, self.n_output() as i64);
        self.sized(i, o - i, 3)
    }

    /// LSTM feed-forward width: `n_input + 2 * (n_output - n_input) / 3`.
    pub fn lstm_ff_width(&self) -> Result<usize, NeuralError> {
        let (i, o) = (self.n_input as i64, self.n_output() as i64);
        self.sized(i, 2 * (o - i), 3)
    }

    /// Encoder units: twice the past window width.
    pub fn ed_encoder_units(&self) -> Result<usize, NeuralError> {
        let p = self.past_len.ok_or_else(|| {
            NeuralError::InvalidSpec("encoder sizing requires a past window".into())
        })?;
        Ok(2 * p)
    }

    /// Decoder hidden width: `n_output / 2`.
    pub fn ed_decoder_hidden(&self) -> Result<usize, NeuralError> {
        self.sized(0, self.n_output() as i64, 2)
    }

    /// The realized layer stack.
    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>, NeuralError> {
        let out = self.n_output();
        let dense = |i, o, relu| LayerSpec {
            kind: LayerKind::Dense,
            input_width: i,
            output_width: o,
            relu,
        };
        let lstm = |i, o| LayerSpec {
            kind: LayerKind::Lstm,
            input_width: i,
            output_width: o,
            relu: false,
        };
        Ok(match self.arch {
            Architecture::Mlp => {
                let h = self.mlp_hidden_width()?;
                vec![dense(self.n_input, h, true), dense(h, out, false)]
            }
            Architecture::Lstm => {
                let u = self.lstm_units()?;
                let ff = self.lstm_ff_width()?;
                vec![
                    lstm(self.n_input, u),
                    dense(u, ff, true),
                    dense(ff, out, false),
                ]
            }
            Architecture::Ed1 => {
                let enc = self.ed_encoder_units()?;
                let h = self.ed_decoder_hidden()?;
                vec![
                    lstm(1, enc),
                    dense(enc + self.n_input, h, true),
                    dense(h, out, false),
                ]
            }
            Architecture::Ed2 => {
                let enc = self.ed_encoder_units()?;
                let h = self.ed_decoder_hidden()?;
                vec![
                    lstm(1, enc),
                    lstm(enc + self.n_input, enc),
                    dense(enc, h, true),
                    dense(h, out, false),
                ]
            }
        })
    }
}
