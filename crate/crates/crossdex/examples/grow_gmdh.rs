//! Growing a self-organizing polynomial network: candidate neurons
//! `(w1·x_i + w2·x_j + w0)²` over every feature pair, survivor
//! selection by validation error, generations added while validation
//! keeps improving.
//!
//! The target here is exactly representable by one neuron, so the
//! search should stop after a single generation with near-zero error.
//!
//! ```bash
//! cargo run -p crossdex --example grow_gmdh
//! ```

use crossdex::models::{Forecaster, ForecasterSpec, GmdhModel, ModelKind, TrainSession};
use crossdex::windowing::Observation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let m = 6;

    // y = (x_1 + x_4)^2: one squared-polynomial neuron, exactly.
    let observations: Vec<Observation> = (0..160)
        .map(|r| {
            let input: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let y = (input[1] + input[4]) * (input[1] + input[4]);
            Observation {
                input,
                label: vec![y],
                start_index: r,
            }
        })
        .collect();
    let session = TrainSession::from_observations(observations);

    let mut spec = ForecasterSpec::new(ModelKind::Gmdh).with_lengths(m, 1);
    spec.normalize = false;
    spec.seed = 12;
    let mut model = GmdhModel::new(spec).unwrap();
    model.train(&session).unwrap();

    println!("target: y = (x_1 + x_4)^2 over {m} inputs, 160 observations");
    println!("grown generations: {}", model.layers().len());
    let best = model.layers()[0][0];
    println!(
        "best generation-1 neuron: pair (x_{}, x_{}), weights ({:+.4}, {:+.4}, {:+.4})",
        best.i, best.j, best.w[0], best.w[1], best.w[2]
    );
    println!(
        "validation MSE: {:.3e}",
        model.validation_mse(&session).unwrap()
    );
    println!("(a sign flip of all three weights is the same neuron; the square absorbs it)");
}
