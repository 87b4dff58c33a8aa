//! Maximin Latin hypercube initial sample and a disjoint test sample over the
//! SAR space, written as measurement-request CSV.

use gpival::config_space::build_sar_array_space;
use gpival::pipeline::io::{write_sample_csv, SampleTable};
use gpival::sampling::{generate_initial_sample, generate_test_sample, LhsPlan};

fn main() -> gpival::Result<()> {
    let space = build_sar_array_space();
    let initial = generate_initial_sample(&space, &LhsPlan::initial(7).with_size(40))?;
    let test = generate_test_sample(&space, &LhsPlan::test(8).with_size(10), &initial)?;
    assert!(initial.iter().all(|p| space.is_valid(p)));
    assert!(test.iter().all(|t| !initial.contains(t)));

    let csv = write_sample_csv(&space, &SampleTable::requests(initial))?;
    let text = String::from_utf8_lossy(&csv);
    for line in text.lines().take(4) {
        println!("{line}");
    }
    println!("... {} request rows, plus {} test configurations", text.lines().count() - 1, test.len());
    Ok(())
}
