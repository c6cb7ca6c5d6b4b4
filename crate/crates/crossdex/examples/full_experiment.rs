//! The whole laboratory end to end, in memory: synthesize two
//! correlated markets, train a small model zoo on each index's
//! sessions, cross-test in a circular fashion, and ask the signed-rank
//! test whether cross-training hurt.
//!
//! ```bash
//! cargo run -p crossdex --example full_experiment
//! ```

use crossdex::harness::{compare_cross_vs_ablation, run_experiment, ExperimentConfig, IndexSpec};
use crossdex::models::{ForecasterSpec, ModelKind};
use crossdex::report::{ablation_table, cross_table, Format};
use crossdex::series::save_series;
use crossdex::windowing::WindowConfig;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = crossdex::synth::correlated_gbm("ALPHA", "BETA", 1200, 31, 0.95).unwrap();
    let pa = dir.path().join("alpha.csv");
    let pb = dir.path().join("beta.csv");
    save_series(&a, &pa).unwrap();
    save_series(&b, &pb).unwrap();

    let model = |kind: ModelKind, epochs: usize| {
        let mut spec = ForecasterSpec::new(kind);
        spec.training.epochs = epochs;
        spec
    };
    let cfg = ExperimentConfig {
        indexes: vec![
            IndexSpec {
                symbol: "ALPHA".into(),
                path: pa,
            },
            IndexSpec {
                symbol: "BETA".into(),
                path: pb,
            },
        ],
        models: vec![
            model(ModelKind::Ar, 0),
            model(ModelKind::MlpLinear, 120),
            model(ModelKind::LstmVec, 15),
        ],
        window: WindowConfig::default(),
        seed: 2024,
        mu_shifts: vec![0.0, 0.02],
        output_dir: dir.path().join("out"),
    };

    println!("two correlated synthetic markets (rho = 0.95), 1200 days -> 9 sessions each");
    println!(
        "training {} models on every index, testing circularly...\n",
        cfg.models.len()
    );
    let matrix = run_experiment(&cfg, None).unwrap();

    for index in matrix.indexes() {
        println!("self-trained accuracy on {index}:");
        print!("{}", ablation_table(&matrix, &index, Format::Md).unwrap());
        println!();
    }
    for model in matrix.models() {
        println!("cross-trained MAPE for {model} (rows trained on, columns tested on):");
        print!("{}", cross_table(&matrix, &model, Format::Md).unwrap());
        println!();
    }

    for mu in [0.0, 0.02] {
        println!("signed-rank: self vs cross per session, shift mu = {mu}");
        println!(
            "{:<12} {:>6} -> {:<6} {:>9} {:>9} {:>9}",
            "model", "train", "test", "greater", "less", "two-side"
        );
        for row in compare_cross_vs_ablation(&matrix, mu).unwrap() {
            println!(
                "{:<12} {:>6} -> {:<6} {:>9.5} {:>9.5} {:>9.5}",
                row.model,
                row.train_index,
                row.test_index,
                row.result.p_greater,
                row.result.p_less,
                row.result.p_two_sided
            );
        }
        println!();
    }
    println!("small `greater` p-values would mean cross-training beat self-training.");
}
