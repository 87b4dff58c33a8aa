//! The array-system SAR configuration space: dimensions, sources, MPE and
//! nearest snapping of an arbitrary point.

use gpival::config_space::{build_sar_array_space, mpe};

fn main() -> gpival::Result<()> {
    let space = build_sar_array_space();
    println!("{} dimensions", space.dim());
    for d in &space.dimensions {
        println!("  {:<10} [{}, {}]", d.name, d.lower, d.upper);
    }
    println!("sources at {:?} MHz", space.source_frequencies());
    println!("MPE for 30 % system / 15 % source uncertainty: {:.4} dB", mpe(0.30, 0.15));

    let mid: Vec<f64> = space.lower().iter().zip(space.upper()).map(|(a, b)| 0.5 * (a + b)).collect();
    match space.snap_nearest(&mid) {
        Some(p) => println!("center {mid:.1?}\n  snaps to {:?} ({})", p.0, space.source_name(&p).unwrap_or("?")),
        None => println!("center {mid:.1?} has no measurable neighbour"),
    }
    Ok(())
}
