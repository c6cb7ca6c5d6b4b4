//! Shared scaffold for every gradient-trained architecture: parameter
//! initialization, the full-batch adam loop on MSE, strict
//! normalization glue, and prediction (including the iterated one-step
//! mode of sequence-to-value recurrent models).

use super::cnn;
use super::kgate;
use super::mlp::{self, Activation};
use super::rbf;
use super::recurrent::{self, CellKind, RecurrentMode};
use super::{
    check_observations, check_window, Forecaster, ForecasterSpec, ModelBlob, ModelError, ModelKind,
    Seq2ValTraining, TrainSession,
};
use crate::numcore::{AdamState, Graph, NodeId, Tensor};
use crate::windowing::{denormalize, normalize_window};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Salt separating the parameter-init stream from training-time draws
/// (RBF center picks) on the same seed.
const TRAIN_RNG_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum ArchKind {
    Mlp(Activation),
    Rbf,
    KGate,
    CnnSeq,
    Scnn,
    Recurrent(CellKind, RecurrentMode),
}

fn arch_for(spec: &ForecasterSpec) -> Result<ArchKind, ModelError> {
    Ok(match spec.kind {
        ModelKind::MlpLinear => ArchKind::Mlp(Activation::None),
        ModelKind::MlpRelu => ArchKind::Mlp(Activation::Relu),
        ModelKind::MlpLogistic => ArchKind::Mlp(Activation::Logistic),
        ModelKind::MlpTanh => ArchKind::Mlp(Activation::Tanh),
        ModelKind::Rbf => ArchKind::Rbf,
        ModelKind::Kgate => ArchKind::KGate,
        ModelKind::CnnSeq => {
            cnn::check_input_len(false, spec.input_len)?;
            ArchKind::CnnSeq
        }
        ModelKind::Scnn => {
            cnn::check_input_len(true, spec.input_len)?;
            ArchKind::Scnn
        }
        ModelKind::LstmVec => ArchKind::Recurrent(CellKind::Lstm, RecurrentMode::Vec),
        ModelKind::LstmVal => ArchKind::Recurrent(CellKind::Lstm, RecurrentMode::Val),
        ModelKind::GruVec => ArchKind::Recurrent(CellKind::Gru, RecurrentMode::Vec),
        ModelKind::GruVal => ArchKind::Recurrent(CellKind::Gru, RecurrentMode::Val),
        ModelKind::Ar | ModelKind::Gmdh => {
            return Err(ModelError::BadConfig(format!(
                "{} is not a gradient-trained network",
                spec.kind
            )))
        }
    })
}

/// One gradient-trained forecaster; the architecture decides the
/// forward pass, everything else is shared.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetForecaster {
    spec: ForecasterSpec,
    arch: ArchKind,
    params: Vec<Tensor>,
    trained: bool,
}

impl NetForecaster {
    pub fn new(spec: ForecasterSpec) -> Result<Self, ModelError> {
        let arch = arch_for(&spec)?;
        let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
        let params = init_params(arch, &spec, &mut rng);
        Ok(NetForecaster {
            spec,
            arch,
            params,
            trained: false,
        })
    }

    /// Parameter tensors in registration order, for tests.
    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn n_parameters(&self) -> usize {
        self.params.iter().map(|t| t.len()).sum()
    }

    /// Graph forward pass on a prepared input matrix; public for
    /// gradient-check harnesses.
    pub fn forward(&self, g: &mut Graph, param_ids: &[NodeId], x: NodeId) -> NodeId {
        forward(self.arch, &self.spec, g, param_ids, x)
    }

    /// Marks the model trained without running an optimizer step;
    /// predictions come from the initialization.
    fn mark_trained(&mut self) {
        self.trained = true;
    }

    /// Builds the `[rows, T]` input and `[rows, d]` target matrices for
    /// this architecture and session.
    fn training_data(&self, session: &TrainSession) -> Result<(Tensor, Tensor), ModelError> {
        if let ArchKind::Recurrent(_, RecurrentMode::Val) = self.arch {
            return self.seq2val_training_data(session);
        }
        check_observations(&self.spec, &session.observations)?;
        let n = session.observations.len();
        let (d_in, d_out) = (self.spec.input_len, self.spec.output_len);
        let mut x = Vec::with_capacity(n * d_in);
        let mut y = Vec::with_capacity(n * d_out);
        for obs in &session.observations {
            if self.spec.normalize {
                let nw = normalize_window(&obs.input);
                x.extend_from_slice(&nw.values);
                y.extend(crate::windowing::normalize_with(&obs.label, nw.lo, nw.hi));
            } else {
                x.extend_from_slice(&obs.input);
                y.extend_from_slice(&obs.label);
            }
        }
        Ok((Tensor::matrix(n, d_in, x), Tensor::matrix(n, d_out, y)))
    }

    fn seq2val_training_data(
        &self,
        session: &TrainSession,
    ) -> Result<(Tensor, Tensor), ModelError> {
        let days = &session.days;
        match self.spec.seq2val_training {
            Seq2ValTraining::FullSession => {
                // All days but the last as one long context, the final
                // day as the single label.
                if days.len() < 2 {
                    return Err(ModelError::EmptySession);
                }
                let (ctx, label) = days.split_at(days.len() - 1);
                let (x, y) = self.one_step_pair(ctx, label[0]);
                Ok((
                    Tensor::matrix(1, ctx.len(), x),
                    Tensor::matrix(1, 1, vec![y]),
                ))
            }
            Seq2ValTraining::SlidingWindows => {
                let w = self.spec.input_len;
                if days.len() < w + 1 {
                    return Err(ModelError::EmptySession);
                }
                let n = days.len() - w;
                let mut x = Vec::with_capacity(n * w);
                let mut y = Vec::with_capacity(n);
                for t in 0..n {
                    let (xr, yr) = self.one_step_pair(&days[t..t + w], days[t + w]);
                    x.extend(xr);
                    y.push(yr);
                }
                Ok((Tensor::matrix(n, w, x), Tensor::matrix(n, 1, y)))
            }
        }
    }

    fn one_step_pair(&self, ctx: &[f64], label: f64) -> (Vec<f64>, f64) {
        if self.spec.normalize {
            let nw = normalize_window(ctx);
            let yl = crate::windowing::normalize_with(&[label], nw.lo, nw.hi)[0];
            (nw.values, yl)
        } else {
            (ctx.to_vec(), label)
        }
    }

    /// One forward evaluation of a single prepared row.
    fn eval_row(&self, row: &[f64]) -> Vec<f64> {
        let mut g = Graph::new();
        let pids: Vec<NodeId> = self.params.iter().map(|t| g.leaf(t.clone())).collect();
        let x = g.leaf(Tensor::matrix(1, row.len(), row.to_vec()));
        let out = forward(self.arch, &self.spec, &mut g, &pids, x);
        g.value(out).data().to_vec()
    }
}

impl Forecaster for NetForecaster {
    fn spec(&self) -> &ForecasterSpec {
        &self.spec
    }

    fn is_trained(&self) -> bool {
        self.trained
    }

    fn reset(&mut self, seed: u64) {
        self.spec.seed = seed;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        self.params = init_params(self.arch, &self.spec, &mut rng);
        self.trained = false;
    }

    fn train(&mut self, session: &TrainSession) -> Result<(), ModelError> {
        let (x, y) = self.training_data(session)?;
        let mut train_rng = ChaCha20Rng::seed_from_u64(self.spec.seed ^ TRAIN_RNG_SALT);
        if self.arch == ArchKind::Rbf {
            rbf::seed_centers(&mut self.params, &x, &mut train_rng);
        }

        let tp = self.spec.training;
        if tp.epochs == 0 {
            self.mark_trained();
            return Ok(());
        }

        let n = x.rows();
        let batches: Vec<(usize, usize)> = (0..n)
            .step_by(tp.batch_size.max(1))
            .map(|s| (s, (s + tp.batch_size.max(1)).min(n) - s))
            .collect();

        let mut adam = AdamState::new(tp.lr, &self.params);
        for epoch in 0..tp.epochs {
            for &(start, len) in &batches {
                let mut g = Graph::new();
                let pids: Vec<NodeId> = self.params.iter().map(|t| g.leaf(t.clone())).collect();
                let xb = g.leaf(slice_row_block(&x, start, len));
                let yb = g.leaf(slice_row_block(&y, start, len));
                let pred = forward(self.arch, &self.spec, &mut g, &pids, xb);
                let loss = g.mse(pred, yb);
                if !g.value(loss).item().is_finite() {
                    return Err(ModelError::Diverged { epoch });
                }
                let grads = g.backward(loss);
                let gvec: Vec<Tensor> = pids.iter().map(|id| grads.get(*id).clone()).collect();
                adam.step(&mut self.params, &gvec);
            }
        }
        self.mark_trained();
        Ok(())
    }

    fn predict(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        if !self.trained {
            return Err(ModelError::NotTrained);
        }
        check_window(&self.spec, window)?;

        let out = if let ArchKind::Recurrent(_, RecurrentMode::Val) = self.arch {
            // Iterated one-step forecasting over the rolling window.
            let mut rolling = window.to_vec();
            let mut out = Vec::with_capacity(self.spec.output_len);
            for _ in 0..self.spec.output_len {
                let next = if self.spec.normalize {
                    let nw = normalize_window(&rolling);
                    let pred = self.eval_row(&nw.values);
                    denormalize(&pred, nw.lo, nw.hi)[0]
                } else {
                    self.eval_row(&rolling)[0]
                };
                out.push(next);
                rolling.remove(0);
                rolling.push(next);
            }
            out
        } else if self.spec.normalize {
            let nw = normalize_window(window);
            let pred = self.eval_row(&nw.values);
            denormalize(&pred, nw.lo, nw.hi)
        } else {
            self.eval_row(window)
        };

        if out.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteOutput);
        }
        Ok(out)
    }

    fn to_blob(&self) -> ModelBlob {
        ModelBlob {
            kind: self.spec.kind,
            state: serde_json::to_value(self).expect("net state serializes"),
        }
    }
}

fn init_params(arch: ArchKind, spec: &ForecasterSpec, rng: &mut ChaCha20Rng) -> Vec<Tensor> {
    match arch {
        ArchKind::Mlp(_) => mlp::init(spec, rng),
        ArchKind::Rbf => rbf::init(spec, rng),
        ArchKind::KGate => kgate::init(spec, rng),
        ArchKind::CnnSeq => cnn::init_seq(spec, rng),
        ArchKind::Scnn => cnn::init_scnn(spec, rng),
        ArchKind::Recurrent(cell, mode) => recurrent::init(cell, mode, spec, rng),
    }
}

fn forward(
    arch: ArchKind,
    spec: &ForecasterSpec,
    g: &mut Graph,
    p: &[NodeId],
    x: NodeId,
) -> NodeId {
    match arch {
        ArchKind::Mlp(act) => mlp::forward(act, g, p, x),
        ArchKind::Rbf => rbf::forward(g, p, x),
        ArchKind::KGate => kgate::forward(g, p, x),
        ArchKind::CnnSeq => cnn::forward_seq(g, p, x),
        ArchKind::Scnn => cnn::forward_scnn(g, p, x),
        ArchKind::Recurrent(cell, _) => recurrent::forward(cell, spec.sizing().hidden2, g, p, x),
    }
}

fn slice_row_block(t: &Tensor, start: usize, len: usize) -> Tensor {
    let cols = t.cols();
    Tensor::matrix(
        len,
        cols,
        t.data()[start * cols..(start + len) * cols].to_vec(),
    )
}
