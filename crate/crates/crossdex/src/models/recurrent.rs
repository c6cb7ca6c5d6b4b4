//! LSTM and GRU cells, hidden size 2m+1 for parameter-budget parity
//! with the feed-forward sizing rule.
//!
//! Sequence-to-vector: consume the window stepwise, dense-map the final
//! hidden state to the whole forecast. Sequence-to-value: a readout to
//! one next-day value, trained on the session's long context and
//! iterated at test time.

use super::{init_uniform, ForecasterSpec};
use crate::numcore::{Graph, NodeId, Tensor};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) enum CellKind {
    Lstm,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) enum RecurrentMode {
    /// Emit the full forecast vector from the final hidden state.
    Vec,
    /// Emit one next-day value; iterate for a multi-day forecast.
    Val,
}

pub(crate) fn readout_dim(mode: RecurrentMode, spec: &ForecasterSpec) -> usize {
    match mode {
        RecurrentMode::Vec => spec.output_len,
        RecurrentMode::Val => 1,
    }
}

/// LSTM parameters: Wx [1, 4H], Wh [H, 4H], b [4H], readout [H, d], bias [d].
/// Gate order inside the fused blocks: input, forget, cell, output.
pub(crate) fn init(
    cell: CellKind,
    mode: RecurrentMode,
    spec: &ForecasterSpec,
    rng: &mut ChaCha20Rng,
) -> Vec<Tensor> {
    let h = spec.sizing().hidden2;
    let d = readout_dim(mode, spec);
    match cell {
        CellKind::Lstm => vec![
            init_uniform(rng, vec![1, 4 * h], 1),
            init_uniform(rng, vec![h, 4 * h], h),
            init_uniform(rng, vec![4 * h], h),
            init_uniform(rng, vec![h, d], h),
            init_uniform(rng, vec![d], h),
        ],
        // GRU: fused (z, r) block, then the candidate block.
        CellKind::Gru => vec![
            init_uniform(rng, vec![1, 2 * h], 1),
            init_uniform(rng, vec![h, 2 * h], h),
            init_uniform(rng, vec![2 * h], h),
            init_uniform(rng, vec![1, h], 1),
            init_uniform(rng, vec![h, h], h),
            init_uniform(rng, vec![h], h),
            init_uniform(rng, vec![h, d], h),
            init_uniform(rng, vec![d], h),
        ],
    }
}

/// Runs the cell over `x` of shape [n, T] (scalar input per step) and
/// maps the final hidden state through the readout.
pub(crate) fn forward(
    cell: CellKind,
    hidden: usize,
    g: &mut Graph,
    p: &[NodeId],
    x: NodeId,
) -> NodeId {
    let (n, t_len) = (g.value(x).rows(), g.value(x).cols());
    let mut h = g.leaf(Tensor::zeros(vec![n, hidden]));
    match cell {
        CellKind::Lstm => {
            let mut c = g.leaf(Tensor::zeros(vec![n, hidden]));
            for t in 0..t_len {
                let xt = g.slice_cols(x, t, 1);
                let from_x = g.matmul(xt, p[0]);
                let from_h = g.matmul(h, p[1]);
                let pre = g.add(from_x, from_h);
                let pre = g.add_rowvec(pre, p[2]);
                let i = g.slice_cols(pre, 0, hidden);
                let i = g.sigmoid(i);
                let f = g.slice_cols(pre, hidden, hidden);
                let f = g.sigmoid(f);
                let gg = g.slice_cols(pre, 2 * hidden, hidden);
                let gg = g.tanh(gg);
                let o = g.slice_cols(pre, 3 * hidden, hidden);
                let o = g.sigmoid(o);
                let keep = g.mul(f, c);
                let write = g.mul(i, gg);
                c = g.add(keep, write);
                let ct = g.tanh(c);
                h = g.mul(o, ct);
            }
            let out = g.matmul(h, p[3]);
            g.add_rowvec(out, p[4])
        }
        CellKind::Gru => {
            for t in 0..t_len {
                let xt = g.slice_cols(x, t, 1);
                let from_x = g.matmul(xt, p[0]);
                let from_h = g.matmul(h, p[1]);
                let pre = g.add(from_x, from_h);
                let pre = g.add_rowvec(pre, p[2]);
                let z = g.slice_cols(pre, 0, hidden);
                let z = g.sigmoid(z);
                let r = g.slice_cols(pre, hidden, hidden);
                let r = g.sigmoid(r);
                let cand_x = g.matmul(xt, p[3]);
                let cand_h = g.matmul(h, p[4]);
                let gated = g.mul(r, cand_h);
                let cand = g.add(cand_x, gated);
                let cand = g.add_rowvec(cand, p[5]);
                let cand = g.tanh(cand);
                let keep = g.mul(z, h);
                let inv_z = g.affine(z, -1.0, 1.0);
                let write = g.mul(inv_z, cand);
                h = g.add(keep, write);
            }
            let out = g.matmul(h, p[6]);
            g.add_rowvec(out, p[7])
        }
    }
}
