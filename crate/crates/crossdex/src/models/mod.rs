//! The model zoo: every forecasting architecture behind one contract.
//!
//! All models map a 30-day input window to a 30-day forecast (lengths
//! configurable). The linear auto-regression solves its weights in
//! closed form; everything else trains with adam on mean squared
//! error, full-batch when the session is smaller than the batch size.
//! Models sensitive to input scale normalize per observation in strict
//! mode; the tolerant ones (linear/relu MLPs, KGate, the CNNs) see raw
//! values.
//!
//! A model is reset (parameters reinitialized from a seed) before
//! every training session. Same spec, seed, and data give bit-identical
//! trained parameters and predictions.

mod ar;
mod cnn;
mod gmdh;
mod kgate;
mod mlp;
mod net;
mod rbf;
mod recurrent;

pub use ar::ArModel;
pub use gmdh::{GmdhModel, GMDH_IMPROVEMENT_TOL, GMDH_MAX_LAYERS, GMDH_SURVIVORS};
pub use mlp::Activation;
pub use net::NetForecaster;

#[cfg(test)]
mod zoo_tests;

use crate::windowing::Observation;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("predict called before train")]
    NotTrained,
    #[error("input window has {got} days, model expects {expected}")]
    BadInputLength { expected: usize, got: usize },
    #[error("observation shape mismatch: expected {expected_input}-day input / {expected_label}-day label, got {got_input}/{got_label}")]
    BadObservation {
        expected_input: usize,
        expected_label: usize,
        got_input: usize,
        got_label: usize,
    },
    #[error("training session is empty")]
    EmptySession,
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("prediction contains non-finite values")]
    NonFiniteOutput,
    #[error("bad model configuration: {0}")]
    BadConfig(String),
    #[error("linear solve failed: {0}")]
    Solve(#[from] crate::numcore::NumError),
    #[error("cannot deserialize model blob: {0}")]
    BadBlob(String),
}

/// Every architecture in the zoo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ar,
    MlpLinear,
    MlpRelu,
    MlpLogistic,
    MlpTanh,
    LstmVec,
    LstmVal,
    GruVec,
    GruVal,
    CnnSeq,
    Scnn,
    Rbf,
    Kgate,
    Gmdh,
}

impl ModelKind {
    pub const ALL: [ModelKind; 14] = [
        ModelKind::Ar,
        ModelKind::MlpLinear,
        ModelKind::MlpRelu,
        ModelKind::MlpLogistic,
        ModelKind::MlpTanh,
        ModelKind::LstmVec,
        ModelKind::LstmVal,
        ModelKind::GruVec,
        ModelKind::GruVal,
        ModelKind::CnnSeq,
        ModelKind::Scnn,
        ModelKind::Rbf,
        ModelKind::Kgate,
        ModelKind::Gmdh,
    ];

    /// Kinds that train with adam on a differentiable graph (everything
    /// except the closed-form AR and the self-organizing GMDH).
    pub const ANN: [ModelKind; 12] = [
        ModelKind::MlpLinear,
        ModelKind::MlpRelu,
        ModelKind::MlpLogistic,
        ModelKind::MlpTanh,
        ModelKind::LstmVec,
        ModelKind::LstmVal,
        ModelKind::GruVec,
        ModelKind::GruVal,
        ModelKind::CnnSeq,
        ModelKind::Scnn,
        ModelKind::Rbf,
        ModelKind::Kgate,
    ];

    /// Scale-tolerant kinds see raw values; the rest normalize.
    pub fn default_normalize(self) -> bool {
        !matches!(
            self,
            ModelKind::Ar
                | ModelKind::MlpLinear
                | ModelKind::MlpRelu
                | ModelKind::Kgate
                | ModelKind::CnnSeq
                | ModelKind::Scnn
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ar => "ar",
            ModelKind::MlpLinear => "mlp-linear",
            ModelKind::MlpRelu => "mlp-relu",
            ModelKind::MlpLogistic => "mlp-logistic",
            ModelKind::MlpTanh => "mlp-tanh",
            ModelKind::LstmVec => "lstm-vec",
            ModelKind::LstmVal => "lstm-val",
            ModelKind::GruVec => "gru-vec",
            ModelKind::GruVal => "gru-val",
            ModelKind::CnnSeq => "cnn-seq",
            ModelKind::Scnn => "scnn",
            ModelKind::Rbf => "rbf",
            ModelKind::Kgate => "kgate",
            ModelKind::Gmdh => "gmdh",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                format!(
                    "unknown model kind `{s}` (expected one of: {})",
                    names.join(", ")
                )
            })
    }
}

/// Two-hidden-layer sizing: m and 2m+1 neurons for an m-dimensional
/// input, the minimal universal-approximation configuration. Recurrent
/// hidden state uses `hidden2` for parameter-budget parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSizing {
    pub hidden1: usize,
    pub hidden2: usize,
}

impl LayerSizing {
    pub fn for_input(m: usize) -> Self {
        LayerSizing {
            hidden1: m,
            hidden2: 2 * m + 1,
        }
    }
}

/// Gradient-descent hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams {
            epochs: 1000,
            lr: 0.01,
            batch_size: 32,
        }
    }
}

/// How sequence-to-value recurrent models consume a training session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seq2ValTraining {
    /// One long context: all session days but the last as input, the
    /// final day as the single label.
    FullSession,
    /// Sliding (window → next day) pairs inside the session.
    SlidingWindows,
}

/// Everything needed to build and train one model deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSpec {
    pub kind: ModelKind,
    pub input_len: usize,
    pub output_len: usize,
    pub normalize: bool,
    pub seed: u64,
    pub training: TrainingParams,
    pub seq2val_training: Seq2ValTraining,
}

impl ForecasterSpec {
    pub fn new(kind: ModelKind) -> Self {
        ForecasterSpec {
            kind,
            input_len: 30,
            output_len: 30,
            normalize: kind.default_normalize(),
            seed: 0,
            training: TrainingParams::default(),
            seq2val_training: Seq2ValTraining::FullSession,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.training.epochs = epochs;
        self
    }

    pub fn with_lengths(mut self, input_len: usize, output_len: usize) -> Self {
        self.input_len = input_len;
        self.output_len = output_len;
        self
    }

    pub fn sizing(&self) -> LayerSizing {
        LayerSizing::for_input(self.input_len)
    }
}

/// One training session: the sliding observations plus the session's
/// full run of days (sequence-to-value models train on the latter).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSession {
    pub observations: Vec<Observation>,
    pub days: Vec<f64>,
}

impl TrainSession {
    pub fn new(observations: Vec<Observation>, days: Vec<f64>) -> Self {
        TrainSession { observations, days }
    }

    /// Observations only; sequence-to-value models in full-session mode
    /// cannot train on this.
    pub fn from_observations(observations: Vec<Observation>) -> Self {
        TrainSession {
            observations,
            days: Vec::new(),
        }
    }
}

/// Serialized trained model: kind tag plus the model's own state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelBlob {
    pub kind: ModelKind,
    pub state: serde_json::Value,
}

/// The uniform contract every model implements.
pub trait Forecaster: Send {
    fn spec(&self) -> &ForecasterSpec;

    fn is_trained(&self) -> bool;

    /// Returns the model to a freshly-initialized state drawn from
    /// `seed`; called before every training session.
    fn reset(&mut self, seed: u64);

    fn train(&mut self, session: &TrainSession) -> Result<(), ModelError>;

    /// Maps an `input_len`-day window to an `output_len`-day forecast.
    fn predict(&self, window: &[f64]) -> Result<Vec<f64>, ModelError>;

    /// Self-describing snapshot of the trained state.
    fn to_blob(&self) -> ModelBlob;
}

/// Builds a freshly-initialized forecaster for a spec.
pub fn build_forecaster(spec: &ForecasterSpec) -> Result<Box<dyn Forecaster>, ModelError> {
    if spec.input_len == 0 || spec.output_len == 0 {
        return Err(ModelError::BadConfig(
            "input_len and output_len must be >= 1".into(),
        ));
    }
    match spec.kind {
        ModelKind::Ar => Ok(Box::new(ar::ArModel::new(spec.clone()))),
        ModelKind::Gmdh => Ok(Box::new(gmdh::GmdhModel::new(spec.clone())?)),
        _ => Ok(Box::new(net::NetForecaster::new(spec.clone())?)),
    }
}

/// Restores a forecaster from its serialized blob.
pub fn load_forecaster(blob: &ModelBlob) -> Result<Box<dyn Forecaster>, ModelError> {
    fn de<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Result<T, ModelError> {
        serde_json::from_value(v.clone()).map_err(|e| ModelError::BadBlob(e.to_string()))
    }
    match blob.kind {
        ModelKind::Ar => Ok(Box::new(de::<ar::ArModel>(&blob.state)?)),
        ModelKind::Gmdh => Ok(Box::new(de::<gmdh::GmdhModel>(&blob.state)?)),
        _ => Ok(Box::new(de::<net::NetForecaster>(&blob.state)?)),
    }
}

/// Uniform(−1/√fan_in, +1/√fan_in) initialization used by every
/// trainable tensor.
pub(crate) fn init_uniform(
    rng: &mut rand_chacha::ChaCha20Rng,
    shape: Vec<usize>,
    fan_in: usize,
) -> crate::numcore::Tensor {
    use rand::Rng;
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    crate::numcore::Tensor::from_vec(shape, data)
}

pub(crate) fn check_observations(
    spec: &ForecasterSpec,
    observations: &[Observation],
) -> Result<(), ModelError> {
    if observations.is_empty() {
        return Err(ModelError::EmptySession);
    }
    for obs in observations {
        if obs.input.len() != spec.input_len || obs.label.len() != spec.output_len {
            return Err(ModelError::BadObservation {
                expected_input: spec.input_len,
                expected_label: spec.output_len,
                got_input: obs.input.len(),
                got_label: obs.label.len(),
            });
        }
    }
    Ok(())
}

pub(crate) fn check_window(spec: &ForecasterSpec, window: &[f64]) -> Result<(), ModelError> {
    if window.len() != spec.input_len {
        return Err(ModelError::BadInputLength {
            expected: spec.input_len,
            got: window.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Random synthetic session with `n_obs` observations matching the
    /// window geometry, values in a positive range.
    pub fn random_session(spec: &ForecasterSpec, n_obs: usize, seed: u64) -> TrainSession {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let total = n_obs - 1 + spec.input_len + spec.output_len;
        let days: Vec<f64> = (0..total + 10)
            .map(|_| 50.0 + 50.0 * rng.gen::<f64>())
            .collect();
        let observations = (0..n_obs)
            .map(|o| Observation {
                input: days[o..o + spec.input_len].to_vec(),
                label: days[o + spec.input_len..o + spec.input_len + spec.output_len].to_vec(),
                start_index: o,
            })
            .collect();
        TrainSession::new(observations, days)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for kind in ModelKind::ALL {
            let parsed: ModelKind = kind.name().parse().unwrap();
            assert_eq!(parsed, kind);
        }
        assert!("transformer".parse::<ModelKind>().is_err());
    }

    #[test]
    fn normalize_defaults_follow_scale_tolerance() {
        for kind in [
            ModelKind::Ar,
            ModelKind::MlpLinear,
            ModelKind::MlpRelu,
            ModelKind::Kgate,
            ModelKind::CnnSeq,
            ModelKind::Scnn,
        ] {
            assert!(!kind.default_normalize(), "{kind}");
        }
        for kind in [
            ModelKind::MlpLogistic,
            ModelKind::MlpTanh,
            ModelKind::LstmVec,
            ModelKind::LstmVal,
            ModelKind::GruVec,
            ModelKind::GruVal,
            ModelKind::Rbf,
            ModelKind::Gmdh,
        ] {
            assert!(kind.default_normalize(), "{kind}");
        }
    }

    #[test]
    fn layer_sizing_rule() {
        let s = LayerSizing::for_input(30);
        assert_eq!((s.hidden1, s.hidden2), (30, 61));
        assert_eq!(s.hidden2, 2 * s.hidden1 + 1);
    }
}
