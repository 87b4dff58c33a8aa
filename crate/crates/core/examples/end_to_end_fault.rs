//! A synthetic SAR device with an injected fault pocket: the search reports
//! configurations inside the pocket, while the benign device reports none.

use gpival::bench_oracles::DeviceProfile;
use gpival::pipeline::cli::render_report;
use gpival::pipeline::scenario::{run_device_scenario, DeviceOptions};

fn main() -> gpival::Result<()> {
    let opts = DeviceOptions::default();
    for profile in [DeviceProfile::InjectedFault, DeviceProfile::Structured] {
        let run = run_device_scenario(profile, 5, &opts)?;
        let inside = run.report.rows.iter().filter(|r| run.field.in_pocket(&r.config)).count();
        println!("{profile:?}: {} critical rows, {inside} inside the fault pocket", run.report.rows.len());
        if !run.report.rows.is_empty() {
            println!("{}", render_report(run.model().space(), &run.report));
        }
    }
    Ok(())
}
