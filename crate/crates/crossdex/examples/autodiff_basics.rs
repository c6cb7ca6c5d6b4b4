//! The reverse-mode tape underneath every trainable model: build a
//! small expression, run backward, and compare against central finite
//! differences.
//!
//! ```bash
//! cargo run -p crossdex --example autodiff_basics
//! ```

use crossdex::numcore::{Graph, NodeId, Tensor};

fn main() {
    // loss = mean( tanh(x W + b)^2 )
    let w0 = Tensor::matrix(3, 2, vec![0.4, -0.7, 0.2, 0.9, -0.3, 0.5]);
    let b0 = Tensor::vector(vec![0.1, -0.2]);
    let x0 = Tensor::matrix(2, 3, vec![0.5, -1.0, 0.25, 1.5, 0.75, -0.5]);

    let loss_of = |w: &Tensor, b: &Tensor| -> f64 {
        let mut g = Graph::new();
        let (w, b, x) = (g.leaf(w.clone()), g.leaf(b.clone()), g.leaf(x0.clone()));
        let h = g.matmul(x, w);
        let h = g.add_rowvec(h, b);
        let t = g.tanh(h);
        let sq = g.square(t);
        let loss = g.mean(sq);
        g.value(loss).item()
    };

    let mut g = Graph::new();
    let w = g.leaf(w0.clone());
    let b = g.leaf(b0.clone());
    let x = g.leaf(x0.clone());
    let h = g.matmul(x, w);
    let h = g.add_rowvec(h, b);
    let t = g.tanh(h);
    let sq = g.square(t);
    let loss = g.mean(sq);
    println!("loss = {:.6}", g.value(loss).item());

    let grads = g.backward(loss);
    report("dL/dW", &w0, grads.get(w), |i, p| {
        let mut up = p.clone();
        up.data_mut()[i] += 1e-5;
        let mut dn = p.clone();
        dn.data_mut()[i] -= 1e-5;
        (loss_of(&up, &b0) - loss_of(&dn, &b0)) / 2e-5
    });
    report("dL/db", &b0, grads.get(b), |i, p| {
        let mut up = p.clone();
        up.data_mut()[i] += 1e-5;
        let mut dn = p.clone();
        dn.data_mut()[i] -= 1e-5;
        (loss_of(&w0, &up) - loss_of(&w0, &dn)) / 2e-5
    });

    // Classic single-variable check: d(x^2)/dx at 3 is 6.
    let mut g = Graph::new();
    let xv = g.leaf(Tensor::scalar(3.0));
    let y = g.square(xv);
    let dy = g.backward(y);
    println!("d(x^2)/dx at 3 = {}", dy.get(xv).data()[0]);
    let _: NodeId = y;
}

fn report(name: &str, at: &Tensor, analytic: &Tensor, fd: impl Fn(usize, &Tensor) -> f64) {
    println!("{name}:");
    for i in 0..at.len() {
        let a = analytic.data()[i];
        let f = fd(i, at);
        println!(
            "  [{i}] tape {a:+.8}  finite-diff {f:+.8}  |Δ| {:.2e}",
            (a - f).abs()
        );
    }
}
