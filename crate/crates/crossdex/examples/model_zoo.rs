//! Every model kind behind the one Forecaster contract: reset, train on
//! a session, forecast the next 30 days.
//!
//! Training budgets here are kept tiny so the tour runs in seconds;
//! accuracy is not the point.
//!
//! ```bash
//! cargo run -p crossdex --example model_zoo
//! ```

use crossdex::metrics::mape;
use crossdex::models::{build_forecaster, ForecasterSpec, ModelKind, TrainSession};
use crossdex::windowing::{extract_observations, plan_sessions, WindowConfig};

fn main() {
    let series = crossdex::synth::gbm("DEMO", 360, 123).unwrap();
    let values = series.closes();
    let cfg = WindowConfig::default();
    let plan = plan_sessions(values.len(), &cfg).unwrap();
    let pair = &plan.pairs[0];
    let session = TrainSession::new(
        extract_observations(&values, pair, &cfg),
        values[pair.train_start..pair.train_end].to_vec(),
    );

    // Bridge window: the last 30 training-session days, forecasting the
    // first 30 days of the test session.
    let bridge = pair.test_window_starts[0];
    let input = &values[bridge..bridge + cfg.input_len];
    let actual = &values[bridge + cfg.input_len..bridge + cfg.input_len + cfg.label_len];

    println!(
        "{:<14} {:>10} {:>12} {:>8}",
        "model", "params", "bridge MAPE", "norm"
    );
    for kind in ModelKind::ALL {
        let mut spec = ForecasterSpec::new(kind);
        spec.seed = 5;
        spec.training.epochs = match kind {
            ModelKind::Ar => 0,
            ModelKind::LstmVal | ModelKind::GruVal => 40,
            ModelKind::Gmdh => 60,
            _ => 60,
        };
        let mut model = build_forecaster(&spec).unwrap();
        model.reset(11);
        model.train(&session).unwrap();
        let forecast = model.predict(input).unwrap();
        let err = mape(actual, &forecast).unwrap();
        println!(
            "{:<14} {:>10} {:>12.4} {:>8}",
            kind.name(),
            param_count(&spec),
            err,
            if spec.normalize { "strict" } else { "raw" }
        );
    }
    println!("\n(30 days ahead from one 120-day session; tiny epoch budgets)");
}

fn param_count(spec: &ForecasterSpec) -> String {
    match spec.kind {
        ModelKind::Ar => format!("{}", (spec.input_len + 1) * spec.output_len),
        ModelKind::Gmdh => "grown".into(),
        _ => crossdex::models::NetForecaster::new(spec.clone())
            .map(|m| m.n_parameters().to_string())
            .unwrap_or_default(),
    }
}
