//! Self-organizing network grown by generations of pairwise
//! squared-polynomial neurons `f(x_i, x_j) = (w1·x_i + w2·x_j + w0)²`.
//!
//! Each generation fits one candidate neuron per unordered feature pair
//! to the current scalar residual (adam on MSE over the fit split) and
//! keeps the best `GMDH_SURVIVORS` by validation MSE. Generations are
//! added while the best validation MSE keeps improving, up to
//! `GMDH_MAX_LAYERS`. A closed-form linear readout maps the final
//! survivors to the full output vector.
//!
//! The structure search is single-criterion: its scalar target is the
//! per-observation mean of the label values, which is what minimizing
//! the mean MSE over all output dimensions with a scalar emitter
//! reduces to.

use super::{
    check_observations, check_window, init_uniform, Forecaster, ForecasterSpec, ModelBlob,
    ModelError, TrainSession,
};
use crate::numcore::{solve_least_squares, AdamState, Ridge, Tensor};
use crate::windowing::{denormalize, normalize_window};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Neurons kept per generation.
pub const GMDH_SURVIVORS: usize = 30;
/// Hard cap on generations.
pub const GMDH_MAX_LAYERS: usize = 5;
/// Minimum validation-MSE improvement to accept another generation.
pub const GMDH_IMPROVEMENT_TOL: f64 = 1e-6;

/// Fraction of observations used for fitting; the rest validate.
const FIT_FRACTION: f64 = 0.75;

const TRAIN_RNG_SALT: u64 = 0x517c_c1b7_2722_0a95;

/// One squared-polynomial neuron on feature pair (i, j).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub i: usize,
    pub j: usize,
    /// Weights (w1, w2, w0).
    pub w: [f64; 3],
}

impl Neuron {
    pub fn eval(&self, xi: f64, xj: f64) -> f64 {
        let z = self.w[0] * xi + self.w[1] * xj + self.w[2];
        z * z
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmdhModel {
    spec: ForecasterSpec,
    layers: Vec<Vec<Neuron>>,
    /// `[survivors + 1, output_len]`; last row is the bias.
    readout: Option<Tensor>,
}

impl GmdhModel {
    pub fn new(spec: ForecasterSpec) -> Result<Self, ModelError> {
        if spec.input_len < 2 {
            return Err(ModelError::BadConfig(
                "pairwise neurons need at least 2 inputs".into(),
            ));
        }
        Ok(GmdhModel {
            spec,
            layers: Vec::new(),
            readout: None,
        })
    }

    pub fn layers(&self) -> &[Vec<Neuron>] {
        &self.layers
    }

    /// Validation MSE of the full grown model (readout included) on the
    /// validation split of the given session, in original value space;
    /// used by representability checks.
    pub fn validation_mse(&self, session: &TrainSession) -> Result<f64, ModelError> {
        check_observations(&self.spec, &session.observations)?;
        let (_, val) = split_ranges(session.observations.len());
        let mut acc = 0.0;
        let mut count = 0;
        for r in val {
            let obs = &session.observations[r];
            let pred = self.predict(&obs.input)?;
            for (p, l) in pred.iter().zip(&obs.label) {
                acc += (p - l) * (p - l);
                count += 1;
            }
        }
        Ok(acc / count as f64)
    }

    /// Normalized features, scalar search target, and label matrix rows.
    #[allow(clippy::type_complexity)]
    fn prepare(
        &self,
        session: &TrainSession,
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>), ModelError> {
        check_observations(&self.spec, &session.observations)?;
        let out_len = self.spec.output_len;
        let mut features = Vec::with_capacity(session.observations.len());
        let mut target = Vec::with_capacity(session.observations.len());
        let mut labels = Vec::with_capacity(session.observations.len() * out_len);
        for obs in &session.observations {
            let (input, label) = if self.spec.normalize {
                let nw = normalize_window(&obs.input);
                let label = crate::windowing::normalize_with(&obs.label, nw.lo, nw.hi);
                (nw.values, label)
            } else {
                (obs.input.clone(), obs.label.clone())
            };
            target.push(label.iter().sum::<f64>() / label.len() as f64);
            features.push(input);
            labels.extend(label);
        }
        Ok((features, target, labels))
    }
}

fn split_ranges(n: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    if n < 2 {
        return (0..n, 0..n);
    }
    let n_fit = (((n as f64) * FIT_FRACTION).ceil() as usize).clamp(1, n - 1);
    (0..n_fit, n_fit..n)
}

/// Adam fit of one candidate neuron to the residual over the fit rows.
#[allow(clippy::too_many_arguments)]
fn fit_neuron(
    i: usize,
    j: usize,
    features: &[Vec<f64>],
    residual: &[f64],
    fit: std::ops::Range<usize>,
    epochs: usize,
    lr: f64,
    rng: &mut ChaCha20Rng,
) -> Neuron {
    let mut w = vec![init_uniform(rng, vec![3], 2)];
    let mut adam = AdamState::new(lr, &w);
    let n_fit = fit.len() as f64;
    for _ in 0..epochs {
        let mut grad = [0.0f64; 3];
        let wd = w[0].data();
        let (w1, w2, w0) = (wd[0], wd[1], wd[2]);
        for r in fit.clone() {
            let (xi, xj) = (features[r][i], features[r][j]);
            let z = w1 * xi + w2 * xj + w0;
            let err = z * z - residual[r];
            let common = 4.0 * err * z / n_fit;
            grad[0] += common * xi;
            grad[1] += common * xj;
            grad[2] += common;
        }
        if grad.iter().any(|v| !v.is_finite()) {
            break;
        }
        let grads = vec![Tensor::vector(grad.to_vec())];
        adam.step(&mut w, &grads);
    }
    let wd = w[0].data();
    Neuron {
        i,
        j,
        w: [wd[0], wd[1], wd[2]],
    }
}

fn neuron_mse(
    neuron: &Neuron,
    features: &[Vec<f64>],
    residual: &[f64],
    rows: std::ops::Range<usize>,
) -> f64 {
    let mut acc = 0.0;
    for r in rows.clone() {
        let pred = neuron.eval(features[r][neuron.i], features[r][neuron.j]);
        acc += (pred - residual[r]) * (pred - residual[r]);
    }
    acc / rows.len() as f64
}

/// Held-out MSE of a linear readout fitted on the fit split only.
fn readout_val_mse(
    features: &[Vec<f64>],
    labels: &[f64],
    out_len: usize,
    fit: std::ops::Range<usize>,
    val: std::ops::Range<usize>,
) -> f64 {
    let width = features[0].len();
    let mut x = Vec::with_capacity(fit.len() * (width + 1));
    let mut y = Vec::with_capacity(fit.len() * out_len);
    for r in fit.clone() {
        x.extend_from_slice(&features[r]);
        x.push(1.0);
        y.extend_from_slice(&labels[r * out_len..(r + 1) * out_len]);
    }
    let readout = match solve_least_squares(
        &Tensor::matrix(fit.len(), width + 1, x),
        &Tensor::matrix(fit.len(), out_len, y),
        Ridge::Auto,
    ) {
        Ok(w) => w,
        Err(_) => return f64::INFINITY,
    };
    let mut acc = 0.0;
    let mut count = 0usize;
    for r in val {
        for c in 0..out_len {
            let mut pred = readout.at(width, c);
            for (k, f) in features[r].iter().enumerate() {
                pred += f * readout.at(k, c);
            }
            let err = pred - labels[r * out_len + c];
            acc += err * err;
            count += 1;
        }
    }
    if count == 0 {
        return f64::INFINITY;
    }
    acc / count as f64
}

impl Forecaster for GmdhModel {
    fn spec(&self) -> &ForecasterSpec {
        &self.spec
    }

    fn is_trained(&self) -> bool {
        self.readout.is_some()
    }

    fn reset(&mut self, seed: u64) {
        self.spec.seed = seed;
        self.layers.clear();
        self.readout = None;
    }

    fn train(&mut self, session: &TrainSession) -> Result<(), ModelError> {
        let (inputs, target, labels) = self.prepare(session)?;
        let n = inputs.len();
        let (fit, val) = split_ranges(n);
        let mut rng = ChaCha20Rng::seed_from_u64(self.spec.seed ^ TRAIN_RNG_SALT);
        let epochs = self.spec.training.epochs;
        let lr = self.spec.training.lr;

        self.layers.clear();
        let mut features = inputs;
        let mut residual = target;
        let mut prev_best = f64::INFINITY;

        for generation in 0..GMDH_MAX_LAYERS {
            let width = features[0].len();
            let mut candidates = Vec::with_capacity(width * (width - 1) / 2);
            for i in 0..width {
                for j in i + 1..width {
                    let neuron = fit_neuron(
                        i,
                        j,
                        &features,
                        &residual,
                        fit.clone(),
                        epochs,
                        lr,
                        &mut rng,
                    );
                    let mse = neuron_mse(&neuron, &features, &residual, val.clone());
                    candidates.push((neuron, mse));
                }
            }
            candidates.retain(|(_, mse)| mse.is_finite());
            if candidates.is_empty() {
                return Err(ModelError::Diverged { epoch: generation });
            }
            candidates.sort_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .unwrap()
                    .then(a.0.i.cmp(&b.0.i))
                    .then(a.0.j.cmp(&b.0.j))
            });
            let survivors: Vec<Neuron> = candidates
                .into_iter()
                .take(GMDH_SURVIVORS)
                .map(|(neuron, _)| neuron)
                .collect();

            let mut next_features = Vec::with_capacity(n);
            for feats in &features {
                next_features.push(
                    survivors
                        .iter()
                        .map(|nu| nu.eval(feats[nu.i], feats[nu.j]))
                        .collect::<Vec<f64>>(),
                );
            }

            // External criterion: the candidate generation survives only
            // if the whole grown model (readout fitted on the fit split)
            // keeps improving on held-out observations. Deeper layers
            // square already-squared features, so on noisy data this
            // stops growth before the readout turns explosive.
            let model_val = readout_val_mse(
                &next_features,
                &labels,
                self.spec.output_len,
                fit.clone(),
                val.clone(),
            );
            if !(model_val.is_finite() && prev_best - model_val >= GMDH_IMPROVEMENT_TOL)
                && generation > 0
            {
                break;
            }

            // Advance the residual by the generation's best neuron.
            let best = survivors[0];
            for (r, feats) in features.iter().enumerate() {
                residual[r] -= best.eval(feats[best.i], feats[best.j]);
            }
            features = next_features;
            self.layers.push(survivors);
            prev_best = model_val;
        }

        // Closed-form readout from the last generation's survivors.
        let width = features[0].len();
        let mut x = Vec::with_capacity(n * (width + 1));
        for feats in &features {
            x.extend_from_slice(feats);
            x.push(1.0);
        }
        let readout = solve_least_squares(
            &Tensor::matrix(n, width + 1, x),
            &Tensor::matrix(n, self.spec.output_len, labels),
            Ridge::Auto,
        )?;
        self.readout = Some(readout);
        Ok(())
    }

    fn predict(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        let readout = self.readout.as_ref().ok_or(ModelError::NotTrained)?;
        check_window(&self.spec, window)?;

        let norm = self.spec.normalize.then(|| normalize_window(window));
        let mut features: Vec<f64> = match &norm {
            Some(nw) => nw.values.clone(),
            None => window.to_vec(),
        };
        for layer in &self.layers {
            features = layer
                .iter()
                .map(|nu| nu.eval(features[nu.i], features[nu.j]))
                .collect();
        }

        let out_len = self.spec.output_len;
        let mut out = vec![0.0; out_len];
        for (k, f) in features.iter().enumerate() {
            for c in 0..out_len {
                out[c] += f * readout.at(k, c);
            }
        }
        for c in 0..out_len {
            out[c] += readout.at(features.len(), c);
        }
        if let Some(nw) = norm {
            out = denormalize(&out, nw.lo, nw.hi);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteOutput);
        }
        Ok(out)
    }

    fn to_blob(&self) -> ModelBlob {
        ModelBlob {
            kind: self.spec.kind,
            state: serde_json::to_value(self).expect("GMDH state serializes"),
        }
    }
}
