//! Plain two-hidden-layer perceptrons, sized m and 2m+1 for an
//! m-dimensional input, with a linear output layer.

use super::{init_uniform, ForecasterSpec};
use crate::numcore::{Graph, NodeId, Tensor};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Hidden-layer nonlinearity. `None` gives the pure linear regression
/// network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    None,
    Relu,
    Logistic,
    Tanh,
}

pub(crate) fn init(spec: &ForecasterSpec, rng: &mut ChaCha20Rng) -> Vec<Tensor> {
    let m = spec.input_len;
    let sizing = spec.sizing();
    let (h1, h2) = (sizing.hidden1, sizing.hidden2);
    vec![
        init_uniform(rng, vec![m, h1], m),
        init_uniform(rng, vec![h1], m),
        init_uniform(rng, vec![h1, h2], h1),
        init_uniform(rng, vec![h2], h1),
        init_uniform(rng, vec![h2, spec.output_len], h2),
        init_uniform(rng, vec![spec.output_len], h2),
    ]
}

pub(crate) fn forward(activation: Activation, g: &mut Graph, p: &[NodeId], x: NodeId) -> NodeId {
    let act = |g: &mut Graph, h: NodeId| match activation {
        Activation::None => h,
        Activation::Relu => g.relu(h),
        Activation::Logistic => g.sigmoid(h),
        Activation::Tanh => g.tanh(h),
    };
    let h1 = g.matmul(x, p[0]);
    let h1 = g.add_rowvec(h1, p[1]);
    let h1 = act(g, h1);
    let h2 = g.matmul(h1, p[2]);
    let h2 = g.add_rowvec(h2, p[3]);
    let h2 = act(g, h2);
    let out = g.matmul(h2, p[4]);
    g.add_rowvec(out, p[5])
}
