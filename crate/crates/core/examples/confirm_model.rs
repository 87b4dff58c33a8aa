//! Confirmation of a synthetic-device model against an independent test
//! sample, then of the same model with a deliberately wrong range.

use gpival::bench_oracles::DeviceProfile;
use gpival::confirmation::{confirm, Thresholds};
use gpival::kriging::GpiModel;
use gpival::pipeline::cli::render_confirmation;
use gpival::pipeline::scenario::{run_device_scenario, DeviceOptions};
use gpival::variogram::{nrmse, VariogramModel};

fn main() -> gpival::Result<()> {
    let run = run_device_scenario(DeviceProfile::Structured, 0, &DeviceOptions::default())?;
    println!("{}", render_confirmation(&run.confirmation));

    let model = run.model();
    let v = model.variogram();
    let wrong = VariogramModel::new(v.shape, v.nugget, v.sill, 4.0 * v.range)?;
    let emp = model.empirical().expect("pipeline models keep their variogram").clone();
    let bad = GpiModel::new(
        model.sample().clone(),
        model.anisotropy().clone(),
        wrong,
        nrmse(&wrong, &emp)?,
        model.space().clone(),
    )?
    .with_empirical(emp);
    let report = confirm(&bad, &run.test, &Thresholds::default())?;
    println!("with the range off by 4x:\n{}", render_confirmation(&report));
    Ok(())
}
