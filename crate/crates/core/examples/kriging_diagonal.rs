//! Kriging the sine-wave benchmark along the diagonal with a 99 % interval.

use gpival::bench_oracles::{sine_wave, OracleField, SINE_NOISE_STD};
use gpival::config_space::ConfigSpace;
use gpival::pipeline::scenario::measure;
use gpival::sampling::{generate_initial_sample, LhsPlan};
use gpival::pipeline::{create_model, ModelOptions};

fn main() -> gpival::Result<()> {
    let space = ConfigSpace::unit_cube(2);
    let field = OracleField::sine_wave(3);
    let sample = measure(&field, generate_initial_sample(&space, &LhsPlan::initial(3).with_size(50))?)?;
    let build = create_model(&space, sample, &ModelOptions::isotropic().with_noise_std(SINE_NOISE_STD))?;
    let model = &build.model;
    println!("{:?}", model.variogram());

    println!("{:>6} {:>9} {:>9} {:>9}", "t", "f", "estimate", "99% half");
    let mut covered = 0;
    for i in 0..=20 {
        let t = i as f64 / 20.0;
        let p = model.krige(&[t, t])?;
        let f = sine_wave(&[t, t]);
        let half = 2.576 * p.inflated_std;
        covered += usize::from((f - p.mean).abs() <= half);
        println!("{t:>6.2} {f:>9.4} {:>9.4} {half:>9.4}", p.mean);
    }
    println!("{covered}/21 points inside the interval");
    Ok(())
}
