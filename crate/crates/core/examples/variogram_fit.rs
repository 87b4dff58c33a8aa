//! Empirical variogram of the sine-wave benchmark and its fitted models.

use gpival::bench_oracles::OracleField;
use gpival::config_space::ConfigSpace;
use gpival::pipeline::scenario::measure;
use gpival::sampling::{generate_initial_sample, LhsPlan};
use gpival::variogram::{empirical_variogram, fit, nrmse, AnisotropyMap, Binning, NuggetMode, VariogramShape};

fn main() -> gpival::Result<()> {
    let space = ConfigSpace::unit_cube(2);
    let field = OracleField::sine_wave(1);
    let sample = measure(&field, generate_initial_sample(&space, &LhsPlan::initial(1).with_size(50))?)?;
    let emp = empirical_variogram(&sample, &AnisotropyMap::identity(2), Binning::ISOTROPIC)?;

    for (h, g, c) in emp.populated().iter().step_by(6) {
        println!("lag {h:.3}  semivariance {g:.4}  pairs {c}");
    }
    for shape in VariogramShape::ALL {
        let v = fit(&emp, shape, NuggetMode::Free)?;
        println!(
            "{shape:?}: nugget {:.4} sill {:.4} range {:.3}  NRMSE {:.3}",
            v.nugget,
            v.sill,
            v.range,
            nrmse(&v, &emp)?
        );
    }
    Ok(())
}
