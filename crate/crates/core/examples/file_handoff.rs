//! The file handoff between parties: a request CSV is filled with
//! measurements, fitted into a model file, and the model is read back
//! elsewhere. Every write goes through a recorder that leaves a manifest.

use gpival::bench_oracles::OracleField;
use gpival::config_space::ConfigSpace;
use gpival::pipeline::io::{read_sample_csv, write_sample_csv, ModelFile, RunRecorder, SampleTable};
use gpival::pipeline::{create_model, ModelOptions};
use gpival::sampling::{generate_initial_sample, LhsPlan};

fn main() -> gpival::Result<()> {
    let dir = tempfile::tempdir()?;
    let space = ConfigSpace::unit_cube(2);
    let field = OracleField::sine_wave(2);

    // lab: fill in the requested measurements
    let points = generate_initial_sample(&space, &LhsPlan::initial(2).with_size(50))?;
    let mut table = SampleTable::requests(points);
    table.values = table.points.iter().map(|p| Some(field.eval(p))).collect();
    let sample_path = dir.path().join("sample.csv");
    std::fs::write(&sample_path, write_sample_csv(&space, &table)?)?;

    // modeller: fit and publish the model
    let mut rec = RunRecorder::start("fit", serde_json::json!({ "shape": "gaussian" }));
    let sample = read_sample_csv(&space, &rec.read_input(&sample_path)?)?.into_valued()?;
    let build = create_model(&space, sample, &ModelOptions::isotropic())?;
    let model_path = dir.path().join("model.json");
    rec.write_output(&model_path, &ModelFile::from_build(&build).to_json()?)?;
    let (manifest_path, manifest) = rec.finish()?;
    println!("wrote {} ({})", model_path.display(), &manifest.outputs[0].sha256[..16]);
    println!("manifest {}", manifest_path.display());

    // reviewer: reload and check the predictions agree
    let model = ModelFile::from_json(&std::fs::read(&model_path)?)?.into_model()?;
    let x = [0.3, 0.8];
    let (a, b) = (build.model.krige(&x)?, model.krige(&x)?);
    assert_eq!(a, b);
    println!("prediction at {x:?}: {:.5} +- {:.5} in both copies", a.mean, a.inflated_std);
    Ok(())
}
