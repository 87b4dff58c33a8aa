//! The analytic benchmark end to end: model, confirmation and search.

use gpival::pipeline::cli::scenario_summary;
use gpival::pipeline::scenario::{run_sine_benchmark, SineOptions};

fn main() -> gpival::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let run = run_sine_benchmark(seed, &SineOptions::default())?;
    println!("{}", serde_json::to_string_pretty(&scenario_summary("sine-wave", seed, &run))?);
    Ok(())
}
