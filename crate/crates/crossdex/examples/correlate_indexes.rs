//! Calendar alignment and Pearson correlation: generate a correlated
//! synthetic pair, drop a few days from one side to desynchronize the
//! calendars, then correlate on the intersection.
//!
//! ```bash
//! cargo run -p crossdex --example correlate_indexes
//! ```

use crossdex::series::{align, pearson, IndexSeries};
use crossdex::synth;

fn main() {
    let (a, b) = synth::correlated_gbm("ALPHA", "BETA", 2500, 7, 0.9).unwrap();
    println!(
        "generated {} and {} ({} days each), requested log-return correlation 0.90",
        a.name(),
        b.name(),
        a.len()
    );
    println!(
        "measured log-return correlation: {:.4}",
        synth::log_return_correlation(&a, &b)
    );

    // Simulate exchange-holiday asynchrony: BETA misses every 97th day.
    let thinned: Vec<_> = b
        .points()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 97 != 0)
        .map(|(_, p)| *p)
        .collect();
    let b = IndexSeries::new("BETA", thinned, "example").unwrap();

    let pair = align(&a, &b).unwrap();
    println!(
        "\ncalendars: {} vs {} days, {} shared after the inner join",
        a.len(),
        b.len(),
        pair.dates.len()
    );

    let r = pearson(&pair).unwrap();
    println!("Pearson correlation of raw levels: {:.4}", r);
    println!(
        "(levels correlate differently from returns: GBM paths share shocks, while\n levels accumulate them)"
    );
}
