//! Closed-form multivariate linear auto-regression: the label window is
//! a linear map of the input window plus a bias, fitted by least
//! squares in one shot.

use super::{
    check_observations, check_window, Forecaster, ForecasterSpec, ModelBlob, ModelError,
    TrainSession,
};
use crate::numcore::{solve_least_squares, Ridge, Tensor};
use crate::windowing::{denormalize, normalize_window};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArModel {
    spec: ForecasterSpec,
    /// `[input_len + 1, output_len]`; last row is the bias.
    weights: Option<Tensor>,
}

impl ArModel {
    pub fn new(spec: ForecasterSpec) -> Self {
        ArModel {
            spec,
            weights: None,
        }
    }

    /// The fitted coefficient matrix, for tests and inspection.
    pub fn weights(&self) -> Option<&Tensor> {
        self.weights.as_ref()
    }

    fn design_row(&self, window: &[f64]) -> Vec<f64> {
        if self.spec.normalize {
            let nw = normalize_window(window);
            let mut row = nw.values;
            row.push(1.0);
            row
        } else {
            let mut row = window.to_vec();
            row.push(1.0);
            row
        }
    }
}

impl Forecaster for ArModel {
    fn spec(&self) -> &ForecasterSpec {
        &self.spec
    }

    fn is_trained(&self) -> bool {
        self.weights.is_some()
    }

    fn reset(&mut self, seed: u64) {
        self.spec.seed = seed;
        self.weights = None;
    }

    fn train(&mut self, session: &TrainSession) -> Result<(), ModelError> {
        check_observations(&self.spec, &session.observations)?;
        let n = session.observations.len();
        let p = self.spec.input_len + 1;
        let q = self.spec.output_len;

        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n * q);
        for obs in &session.observations {
            if self.spec.normalize {
                let nw = normalize_window(&obs.input);
                x.extend_from_slice(&nw.values);
                x.push(1.0);
                y.extend(crate::windowing::normalize_with(&obs.label, nw.lo, nw.hi));
            } else {
                x.extend_from_slice(&obs.input);
                x.push(1.0);
                y.extend_from_slice(&obs.label);
            }
        }
        let w = solve_least_squares(
            &Tensor::matrix(n, p, x),
            &Tensor::matrix(n, q, y),
            Ridge::Auto,
        )?;
        self.weights = Some(w);
        Ok(())
    }

    fn predict(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        let w = self.weights.as_ref().ok_or(ModelError::NotTrained)?;
        check_window(&self.spec, window)?;
        let row = self.design_row(window);
        let q = self.spec.output_len;
        let mut out = vec![0.0; q];
        for (i, v) in row.iter().enumerate() {
            for j in 0..q {
                out[j] += v * w.at(i, j);
            }
        }
        if self.spec.normalize {
            let nw = normalize_window(window);
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
            state: serde_json::to_value(self).expect("AR state serializes"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::windowing::Observation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Observations whose labels are an exact linear map of the inputs.
    fn linear_session(
        w_true: &Tensor,
        bias: &[f64],
        n: usize,
        input_len: usize,
        seed: u64,
    ) -> TrainSession {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let out_len = bias.len();
        let observations = (0..n)
            .map(|i| {
                let input: Vec<f64> = (0..input_len).map(|_| rng.gen_range(1.0..100.0)).collect();
                let label: Vec<f64> = (0..out_len)
                    .map(|j| {
                        bias[j]
                            + input
                                .iter()
                                .enumerate()
                                .map(|(k, v)| v * w_true.at(k, j))
                                .sum::<f64>()
                    })
                    .collect();
                Observation {
                    input,
                    label,
                    start_index: i,
                }
            })
            .collect();
        TrainSession::from_observations(observations)
    }

    #[test]
    fn recovers_exact_linear_generator() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (input_len, out_len) = (8, 5);
        let w_true = Tensor::matrix(
            input_len,
            out_len,
            (0..input_len * out_len)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        );
        let bias: Vec<f64> = (0..out_len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let session = linear_session(&w_true, &bias, 40, input_len, 2);

        let spec = ForecasterSpec::new(ModelKind::Ar).with_lengths(input_len, out_len);
        let mut model = ArModel::new(spec);
        model.train(&session).unwrap();

        // In-sample MSE below 1e-16 per point.
        let mut mse = 0.0;
        let mut count = 0;
        for obs in &session.observations {
            let pred = model.predict(&obs.input).unwrap();
            for (p, l) in pred.iter().zip(&obs.label) {
                mse += (p - l) * (p - l);
                count += 1;
            }
        }
        mse /= count as f64;
        assert!(mse < 1e-16, "in-sample MSE {mse}");

        // Recovered coefficients match the generator.
        let w = model.weights().unwrap();
        for i in 0..input_len {
            for j in 0..out_len {
                assert!((w.at(i, j) - w_true.at(i, j)).abs() < 1e-8);
            }
        }
        for j in 0..out_len {
            assert!((w.at(input_len, j) - bias[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn identity_weights_reproduce_input() {
        // Learned on data where label == input.
        let session = {
            let mut rng = ChaCha20Rng::seed_from_u64(3);
            let observations = (0..20)
                .map(|i| {
                    let input: Vec<f64> = (0..6).map(|_| rng.gen_range(1.0..50.0)).collect();
                    Observation {
                        input: input.clone(),
                        label: input,
                        start_index: i,
                    }
                })
                .collect();
            TrainSession::from_observations(observations)
        };
        let spec = ForecasterSpec::new(ModelKind::Ar).with_lengths(6, 6);
        let mut model = ArModel::new(spec);
        model.train(&session).unwrap();
        let x = vec![5.0, 10.0, 1.0, 7.0, 3.0, 9.0];
        let pred = model.predict(&x).unwrap();
        for (p, v) in pred.iter().zip(&x) {
            assert!((p - v).abs() < 1e-7, "{p} vs {v}");
        }
    }

    #[test]
    fn predict_before_train_is_an_error() {
        let model = ArModel::new(ForecasterSpec::new(ModelKind::Ar).with_lengths(4, 4));
        assert!(matches!(
            model.predict(&[1.0; 4]),
            Err(ModelError::NotTrained)
        ));
    }

    #[test]
    fn empty_session_is_an_error() {
        let mut model = ArModel::new(ForecasterSpec::new(ModelKind::Ar).with_lengths(4, 4));
        assert!(matches!(
            model.train(&TrainSession::from_observations(vec![])),
            Err(ModelError::EmptySession)
        ));
    }

    #[test]
    fn normalized_mode_predicts_and_survives_constant_windows() {
        let mut spec = ForecasterSpec::new(ModelKind::Ar).with_lengths(5, 3);
        spec.normalize = true;
        let w_true = Tensor::matrix(5, 3, (0..15).map(|i| 0.05 * i as f64).collect());
        let session = linear_session(&w_true, &[1.0, 2.0, 3.0], 30, 5, 13);
        let mut model = ArModel::new(spec);
        model.train(&session).unwrap();
        let pred = model.predict(&session.observations[0].input).unwrap();
        assert!(pred.iter().all(|v| v.is_finite()));
        // Degenerate window: the 0.5-midpoint rule keeps it constant-safe.
        assert_eq!(model.predict(&[9.0; 5]).unwrap(), vec![9.0; 3]);
    }

    #[test]
    fn blob_round_trips() {
        let spec = ForecasterSpec::new(ModelKind::Ar).with_lengths(5, 3);
        let w_true = Tensor::matrix(5, 3, (0..15).map(|i| i as f64 * 0.1).collect());
        let session = linear_session(&w_true, &[0.0, 1.0, -1.0], 25, 5, 7);
        let mut model = ArModel::new(spec);
        model.train(&session).unwrap();
        let blob = model.to_blob();
        let restored = crate::models::load_forecaster(&blob).unwrap();
        let x = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(model.predict(&x).unwrap(), restored.predict(&x).unwrap());
    }
}
