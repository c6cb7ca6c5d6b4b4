//! Radial basis function network: 2m+1 Gaussian units
//! `a_k · exp(−b_k · ‖x − c_k‖²)` followed by a linear readout.
//!
//! Widths stay positive through a softplus reparameterization
//! (`b_k = softplus(β_k)`); a raw negative width blows the exponential
//! up. Centers are re-seeded from randomly chosen training input
//! windows at the start of every training run.

use super::{init_uniform, ForecasterSpec};
use crate::numcore::{Graph, NodeId, Tensor};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// Parameter order: centers [u, m], amplitudes a [u], raw widths β [u],
/// readout W [u, out], readout bias [out].
pub(crate) fn init(spec: &ForecasterSpec, rng: &mut ChaCha20Rng) -> Vec<Tensor> {
    let m = spec.input_len;
    let u = spec.sizing().hidden2;
    vec![
        init_uniform(rng, vec![u, m], m),
        init_uniform(rng, vec![u], m),
        init_uniform(rng, vec![u], m),
        init_uniform(rng, vec![u, spec.output_len], u),
        init_uniform(rng, vec![spec.output_len], u),
    ]
}

/// Overwrites the centers with rows drawn from the training inputs
/// (with replacement; sessions are usually smaller than the unit count).
pub(crate) fn seed_centers(params: &mut [Tensor], x: &Tensor, rng: &mut ChaCha20Rng) {
    let (u, m) = (params[0].rows(), params[0].cols());
    let n = x.rows();
    for k in 0..u {
        let pick = rng.gen_range(0..n);
        for j in 0..m {
            params[0].set(k, j, x.at(pick, j));
        }
    }
}

pub(crate) fn forward(g: &mut Graph, p: &[NodeId], x: NodeId) -> NodeId {
    let n = g.value(x).rows();
    let u = g.value(p[0]).rows();

    // Squared distances via ‖x‖² + ‖c‖² − 2 x·cᵀ.
    let x2 = g.square(x);
    let xs = g.row_sums(x2);
    let c2 = g.square(p[0]);
    let cs = g.row_sums(c2);
    let ct = g.transpose(p[0]);
    let cross = g.matmul(x, ct);
    let cross2 = g.scale(cross, -2.0);
    let xs_mat = g.repeat_cols(xs, u);
    let cs_mat = g.repeat_rows(cs, n);
    let d2 = g.add(xs_mat, cs_mat);
    let d2 = g.add(d2, cross2);

    let b = g.softplus(p[2]);
    let b_mat = g.repeat_rows(b, n);
    let scaled = g.mul(d2, b_mat);
    let neg = g.scale(scaled, -1.0);
    let e = g.exp(neg);
    let a_mat = g.repeat_rows(p[1], n);
    let h = g.mul(a_mat, e);

    let out = g.matmul(h, p[3]);
    g.add_rowvec(out, p[4])
}
