//! Session partitioning: cut a series into 120-day sessions, slide the
//! 30-in/30-out training observations, and show that no training label
//! ever touches the paired test session.
//!
//! ```bash
//! cargo run -p crossdex --example session_planning
//! ```

use crossdex::windowing::{plan_sessions, WindowConfig};

fn main() {
    let cfg = WindowConfig::default();
    let series_len = 480; // four whole sessions -> three train/test pairs

    let plan = plan_sessions(series_len, &cfg).unwrap();
    println!(
        "{series_len}-day series, {}-day sessions -> {} train/test pairs\n",
        cfg.session_len,
        plan.n_pairs()
    );

    for pair in &plan.pairs {
        let max_label_end = pair
            .observation_starts
            .iter()
            .map(|s| s + cfg.input_len + cfg.label_len)
            .max()
            .unwrap();
        println!(
            "pair {}: train days [{}, {}), {} observations, labels end by day {}, buffer [{}, {}), test days [{}, {}), {} rolling windows (bridge at {})",
            pair.session_id,
            pair.train_start,
            pair.train_end,
            pair.observation_starts.len(),
            max_label_end,
            pair.buffer_start,
            pair.train_end,
            pair.test_start,
            pair.test_end,
            pair.test_window_starts.len(),
            pair.test_window_starts[0],
        );
        assert!(max_label_end <= pair.test_start, "leakage!");
    }

    println!("\nJSON audit of the first pair:");
    let audit = serde_json::to_string_pretty(&plan.pairs[0]).unwrap();
    println!("{audit}");

    // Normalization is strict: parameters come from the window alone.
    let window = [104.0, 99.0, 101.5, 108.0];
    let nw = crossdex::windowing::normalize_window(&window);
    println!(
        "\nwindow {window:?} normalizes to {:?} with (lo, hi) = ({}, {})",
        nw.values, nw.lo, nw.hi
    );
    let back = crossdex::windowing::denormalize(&nw.values, nw.lo, nw.hi);
    println!("denormalizing returns {back:?}");
}
