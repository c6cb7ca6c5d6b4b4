//! 1-D convolutional forecasters.
//!
//! `CnnSeq` is a plain stack: conv(5) → relu → conv(3) → relu →
//! flatten → dense. `Scnn` is one parallel cell of conv branches with
//! kernel sizes 3/5/7/11/13, 16 filters each, relu, global average
//! pooling per branch, concatenated into 80 features, then dense.

use super::{init_uniform, ForecasterSpec, ModelError};
use crate::numcore::{Graph, NodeId, Tensor};
use rand_chacha::ChaCha20Rng;

pub(crate) const SCNN_KERNELS: [usize; 5] = [3, 5, 7, 11, 13];
pub(crate) const FILTERS: usize = 16;
const SEQ_K1: usize = 5;
const SEQ_K2: usize = 3;

pub(crate) fn check_input_len(kind_is_scnn: bool, input_len: usize) -> Result<(), ModelError> {
    let need = if kind_is_scnn {
        *SCNN_KERNELS.iter().max().unwrap()
    } else {
        SEQ_K1 + SEQ_K2 - 1
    };
    if input_len < need {
        return Err(ModelError::BadConfig(format!(
            "input of {input_len} days is shorter than the largest kernel span {need}"
        )));
    }
    Ok(())
}

pub(crate) fn init_seq(spec: &ForecasterSpec, rng: &mut ChaCha20Rng) -> Vec<Tensor> {
    let flat = FILTERS * (spec.input_len + 2 - SEQ_K1 - SEQ_K2);
    vec![
        init_uniform(rng, vec![FILTERS, 1, SEQ_K1], SEQ_K1),
        init_uniform(rng, vec![FILTERS], SEQ_K1),
        init_uniform(rng, vec![FILTERS, FILTERS, SEQ_K2], FILTERS * SEQ_K2),
        init_uniform(rng, vec![FILTERS], FILTERS * SEQ_K2),
        init_uniform(rng, vec![flat, spec.output_len], flat),
        init_uniform(rng, vec![spec.output_len], flat),
    ]
}

pub(crate) fn forward_seq(g: &mut Graph, p: &[NodeId], x: NodeId) -> NodeId {
    let n = g.value(x).rows();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let xi = g.slice_rows(x, i, 1);
        let h1 = g.conv1d(xi, p[0], p[1]);
        let h1 = g.relu(h1);
        let h2 = g.conv1d(h1, p[2], p[3]);
        let h2 = g.relu(h2);
        rows.push(g.flatten(h2));
    }
    let feats = g.stack_rows(&rows);
    let out = g.matmul(feats, p[4]);
    g.add_rowvec(out, p[5])
}

pub(crate) fn init_scnn(spec: &ForecasterSpec, rng: &mut ChaCha20Rng) -> Vec<Tensor> {
    let mut params = Vec::new();
    for k in SCNN_KERNELS {
        params.push(init_uniform(rng, vec![FILTERS, 1, k], k));
        params.push(init_uniform(rng, vec![FILTERS], k));
    }
    let width = SCNN_KERNELS.len() * FILTERS;
    params.push(init_uniform(rng, vec![width, spec.output_len], width));
    params.push(init_uniform(rng, vec![spec.output_len], width));
    params
}

pub(crate) fn forward_scnn(g: &mut Graph, p: &[NodeId], x: NodeId) -> NodeId {
    let n = g.value(x).rows();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let xi = g.slice_rows(x, i, 1);
        let mut branches = Vec::with_capacity(SCNN_KERNELS.len());
        for b in 0..SCNN_KERNELS.len() {
            let h = g.conv1d(xi, p[2 * b], p[2 * b + 1]);
            let h = g.relu(h);
            branches.push(g.row_means(h));
        }
        rows.push(g.concat(&branches));
    }
    let feats = g.stack_rows(&rows);
    let out = g.matmul(feats, p[2 * SCNN_KERNELS.len()]);
    g.add_rowvec(out, p[2 * SCNN_KERNELS.len() + 1])
}
