//! Searching the sine-wave model for points likely to fall below -0.75.

use gpival::pipeline::scenario::{run_sine_benchmark, SineOptions};

fn main() -> gpival::Result<()> {
    let run = run_sine_benchmark(0, &SineOptions::default())?;
    let r = &run.report;
    println!("population {} -> {} distinct points after search", r.population, r.snapped);
    for row in &r.rows {
        println!(
            "  ({:.3}, {:.3})  estimate {:+.4}  error {:.4}  P {:.3}",
            row.config[0], row.config[1], row.delta_db, row.model_error_db, row.probability
        );
    }
    Ok(())
}
