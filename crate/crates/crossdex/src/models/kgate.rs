//! Gated cells modulating a linear trunk with tanh- and
//! sigmoid-activated transformations of the network input:
//! `z = (W·x_layer + tanh(Wt·x0) ⊙ (Wa·x0)) ⊙ σ(Ws·x0)`.
//!
//! Two stacked cells sized m and 2m+1, then a linear output layer. The
//! gate transforms always read the network input `x0`, not the layer
//! input.

use super::{init_uniform, ForecasterSpec};
use crate::numcore::{Graph, NodeId, Tensor};
use rand_chacha::ChaCha20Rng;

/// Per cell: trunk W, b then gate (Wt, bt), (Wa, ba), (Ws, bs).
const TENSORS_PER_CELL: usize = 8;

pub(crate) fn init(spec: &ForecasterSpec, rng: &mut ChaCha20Rng) -> Vec<Tensor> {
    let m = spec.input_len;
    let sizing = spec.sizing();
    let mut params = Vec::new();
    // Cell 1: m -> hidden1, cell 2: hidden1 -> hidden2.
    for (cell_in, cell_out) in [(m, sizing.hidden1), (sizing.hidden1, sizing.hidden2)] {
        params.push(init_uniform(rng, vec![cell_in, cell_out], cell_in)); // trunk
        params.push(init_uniform(rng, vec![cell_out], cell_in));
        for _ in 0..3 {
            // Gates read x0 of width m.
            params.push(init_uniform(rng, vec![m, cell_out], m));
            params.push(init_uniform(rng, vec![cell_out], m));
        }
    }
    params.push(init_uniform(
        rng,
        vec![sizing.hidden2, spec.output_len],
        sizing.hidden2,
    ));
    params.push(init_uniform(rng, vec![spec.output_len], sizing.hidden2));
    params
}

fn cell(g: &mut Graph, p: &[NodeId], x0: NodeId, xi: NodeId) -> NodeId {
    let trunk = g.matmul(xi, p[0]);
    let trunk = g.add_rowvec(trunk, p[1]);
    let t = g.matmul(x0, p[2]);
    let t = g.add_rowvec(t, p[3]);
    let t = g.tanh(t);
    let a = g.matmul(x0, p[4]);
    let a = g.add_rowvec(a, p[5]);
    let s = g.matmul(x0, p[6]);
    let s = g.add_rowvec(s, p[7]);
    let s = g.sigmoid(s);
    let modulated = g.mul(t, a);
    let core = g.add(trunk, modulated);
    g.mul(core, s)
}

pub(crate) fn forward(g: &mut Graph, p: &[NodeId], x: NodeId) -> NodeId {
    let z1 = cell(g, &p[..TENSORS_PER_CELL], x, x);
    let z2 = cell(g, &p[TENSORS_PER_CELL..2 * TENSORS_PER_CELL], x, z1);
    let out = g.matmul(z2, p[2 * TENSORS_PER_CELL]);
    g.add_rowvec(out, p[2 * TENSORS_PER_CELL + 1])
}
