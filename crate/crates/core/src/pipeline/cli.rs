//! Command-line front end. Exit codes: 0 pass, 1 validation failure,
//! 2 usage or I/O error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bench_oracles::{synthetic_device, synthetic_mpe, DeviceProfile, OracleField};
use crate::config_space::{build_sar_array_space, build_sar_scanning_space, ConfigSpace};
use crate::confirmation::{confirm, ConfirmationReport, Stage, Thresholds};
use crate::critical_search::{run_critical_search, CriticalReport, SearchParams};
use crate::error::{Error, Result};
use crate::pipeline::io::{
    read_sample_csv, report_json, verify_measurements, write_qq_csv, write_report_csv, write_sample_csv, ModelFile,
    RunRecorder, SampleTable, VerifyReport,
};
use crate::pipeline::scenario::{measure, run_device_scenario, run_sine_benchmark, DeviceOptions, ScenarioRun, SineOptions};
use crate::pipeline::{create_model, ModelOptions};
use crate::sampling::{generate_initial_sample, generate_test_sample, LhsPlan, SampleMode};
use crate::variogram::{NuggetMode, VariogramShape};

#[derive(Debug, Parser)]
#[command(name = "gpival", version, about = "Kriging-model validation of measurement systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a configuration space as JSON.
    Space(SpaceArgs),
    /// Draw an initial or test sample (a measurement request CSV).
    Sample(SampleArgs),
    /// Fit a model to a measured sample.
    Fit(FitArgs),
    /// Confirm a model against an independent test sample.
    Confirm(ConfirmArgs),
    /// Search a confirmed model for critical configurations.
    Search(SearchArgs),
    /// Check follow-up measurements against the MPE.
    Verify(VerifyArgs),
    /// Run a synthetic end-to-end scenario.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    /// `sar-array`, `sar-scanning`, `unit:<n>` or a space JSON file.
    #[arg(long, default_value = "sar-array")]
    pub space: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Initial,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleArg {
    Sine,
    Structured,
    Noisy,
    Fault,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value = "sar-array")]
    pub space: String,
    /// Sample size; 400 for initial samples and 50 for test samples by default.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "initial")]
    pub mode: ModeArg,
    /// Sample the test points must avoid.
    #[arg(long)]
    pub existing: Option<PathBuf>,
    /// Fill the value column from a synthetic oracle instead of leaving it blank.
    #[arg(long, value_enum)]
    pub oracle: Option<OracleArg>,
    /// Oracle seed; defaults to 0.
    #[arg(long, default_value_t = 0)]
    pub oracle_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NuggetArg {
    Free,
    Zero,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, default_value = "sar-array")]
    pub space: String,
    /// Measured sample CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "gaussian")]
    pub shape: VariogramShape,
    #[arg(long, value_enum, default_value = "free")]
    pub nugget: NuggetArg,
    /// Skip directional fits and use the identity anisotropy map.
    #[arg(long)]
    pub isotropic: bool,
    /// Known measurement-noise standard deviation in dB (nugget floor).
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfirmArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Measured test sample CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// NRMSE acceptance threshold.
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    /// Report JSON; QQ data goes to `<out>.qq.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub sensitivity: f64,
    #[arg(long, default_value_t = 0.1)]
    pub repulsion: f64,
    #[arg(long, default_value_t = 8)]
    pub iterations: usize,
    /// Population caps as `min,max`.
    #[arg(long, default_value = "10,1000", value_parser = parse_caps)]
    pub caps: (usize, usize),
    /// Symmetric thresholds ±MPE in dB; defaults to the 30 % / 15 % budget.
    #[arg(long)]
    pub mpe: Option<f64>,
    /// Smallest reported failure probability.
    #[arg(long, default_value_t = 0.05)]
    pub floor: f64,
    /// Report CSV; the JSON form goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// CSV with a `measured_dB` column (and optionally `mpe_dB`).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub mpe: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Sine,
    Structured,
    Noisy,
    Fault,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum, default_value = "sine")]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial sample size.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub sensitivity: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, value_parser = parse_caps)]
    pub caps: Option<(usize, usize)>,
    /// Summary JSON.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_caps(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected min,max")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a == 0 || a > b {
        return Err(format!("need 0 < min <= max, got {a},{b}"));
    }
    Ok((a, b))
}

/// Result of a command that completed without errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

/// Entry point of the `gpival` binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Space(a) => cmd_space(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Confirm(a) => cmd_confirm(a),
        Command::Search(a) => cmd_search(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    }
}

/// Named built-in space or a JSON file (recorded as an input).
fn resolve_space(spec: &str, rec: &mut RunRecorder) -> Result<ConfigSpace> {
    match spec {
        "sar-array" => Ok(build_sar_array_space()),
        "sar-scanning" => Ok(build_sar_scanning_space()),
        _ => {
            if let Some(n) = spec.strip_prefix("unit:") {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad unit cube dimension in {spec:?}")))?;
                if n == 0 {
                    return Err(Error::InvalidInput("unit cube needs at least one dimension".into()));
                }
                return Ok(ConfigSpace::unit_cube(n));
            }
            let bytes = rec.read_input(Path::new(spec))?;
            ConfigSpace::from_json(std::str::from_utf8(&bytes).map_err(|e| Error::InvalidInput(e.to_string()))?)
        }
    }
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    out.with_file_name(name)
}

fn finish(rec: RunRecorder) -> Result<()> {
    let (path, _) = rec.finish()?;
    eprintln!("manifest: {}", path.display());
    Ok(())
}

fn cmd_space(a: SpaceArgs) -> Result<Outcome> {
    let mut rec = RunRecorder::start("space", json!({ "space": a.space }));
    let space = resolve_space(&a.space, &mut rec)?;
    let mut text = space.to_json()?;
    text.push('\n');
    rec.write_output(&a.out, text.as_bytes())?;
    println!("{} dimensions: {}", space.dim(), space.names().join(", "));
    finish(rec)?;
    Ok(Outcome::Pass)
}

fn cmd_sample(a: SampleArgs) -> Result<Outcome> {
    let size = a.size.unwrap_or(match a.mode {
        ModeArg::Initial => crate::sampling::DEFAULT_INITIAL_SIZE,
        ModeArg::Test => crate::sampling::DEFAULT_TEST_SIZE,
    });
    let mut rec = RunRecorder::start(
        "sample",
        json!({ "space": a.space, "size": size, "mode": format!("{:?}", a.mode).to_lowercase(),
                "oracle": a.oracle.map(|o| format!("{o:?}").to_lowercase()) }),
    );
    rec.seed("sample", a.seed);
    let space = resolve_space(&a.space, &mut rec)?;
    let points = match a.mode {
        ModeArg::Initial => {
            if a.existing.is_some() {
                return Err(Error::InvalidInput("--existing only applies to test samples".into()));
            }
            generate_initial_sample(&space, &LhsPlan::initial(a.seed).with_size(size))?
        }
        ModeArg::Test => {
            let existing = match &a.existing {
                Some(p) => read_sample_csv(&space, &rec.read_input(p)?)?.points,
                None => Vec::new(),
            };
            let plan = LhsPlan { size, seed: a.seed, mode: SampleMode::Test };
            generate_test_sample(&space, &plan, &existing)?
        }
    };
    let mut table = SampleTable::requests(points);
    if a.mode == ModeArg::Test {
        table.ids = (0..table.ids.len()).map(|i| format!("t{i:04}")).collect();
    }
    if let Some(o) = a.oracle {
        rec.seed("oracle", a.oracle_seed);
        let field = oracle_field(o, &space, a.oracle_seed)?;
        let measured = measure(&field, table.points.clone())?;
        table.values = measured.values.into_iter().map(Some).collect();
    }
    rec.write_output(&a.out, &write_sample_csv(&space, &table)?)?;
    println!("wrote {} configurations to {}", table.points.len(), a.out.display());
    finish(rec)?;
    Ok(Outcome::Pass)
}

fn oracle_field(o: OracleArg, space: &ConfigSpace, seed: u64) -> Result<OracleField> {
    Ok(match o {
        OracleArg::Sine => {
            let f = OracleField::sine_wave(seed);
            if space.lower() != f.domain.lower() || space.upper() != f.domain.upper() {
                return Err(Error::InvalidInput("the sine oracle needs the space unit:2".into()));
            }
            f
        }
        OracleArg::Structured => synthetic_device(space, DeviceProfile::Structured, seed),
        OracleArg::Noisy => synthetic_device(space, DeviceProfile::Noisy, seed),
        OracleArg::Fault => synthetic_device(space, DeviceProfile::InjectedFault, seed),
    })
}

fn cmd_fit(a: FitArgs) -> Result<Outcome> {
    let options = ModelOptions {
        shape: a.shape,
        nugget: match a.nugget {
            NuggetArg::Free => NuggetMode::Free,
            NuggetArg::Zero => NuggetMode::FixedZero,
        },
        anisotropic: !a.isotropic,
        noise_std: a.noise_std,
        ..ModelOptions::default()
    };
    let mut rec = RunRecorder::start("fit", json!({ "space": a.space, "options": options }));
    let space = resolve_space(&a.space, &mut rec)?;
    let sample = read_sample_csv(&space, &rec.read_input(&a.input)?)?.into_valued()?;
    let build = create_model(&space, sample, &options)?;
    rec.write_output(&a.out, &ModelFile::from_build(&build).to_json()?)?;
    let m = &build.model;
    let v = m.variogram();
    println!(
        "{:?} variogram: nugget {:.6} sill {:.6} range {:.6}; NRMSE {:.4}; {} outliers",
        v.shape,
        v.nugget,
        v.sill,
        v.range,
        m.fit_nrmse(),
        m.outliers().len()
    );
    if let Some(r) = &build.anisotropy_report {
        if r.sills_dissimilar {
            eprintln!("warning: directional sills differ by {:.0} %", 100.0 * r.sill_spread);
        }
        if r.nugget_not_small {
            eprintln!("warning: directional nugget up to {:.0} % of the sill", 100.0 * r.max_nugget_ratio);
        }
    }
    finish(rec)?;
    Ok(Outcome::Pass)
}

fn load_model(path: &Path, rec: &mut RunRecorder) -> Result<crate::kriging::GpiModel> {
    ModelFile::from_json(&rec.read_input(path)?)?.into_model()
}

pub fn render_confirmation(r: &ConfirmationReport) -> String {
    let mut s = String::new();
    let flag = |b: bool| if b { "pass" } else { "FAIL" };
    let _ = writeln!(s, "{:<16} {:>12} {:>16} {:>6}", "stage", "value", "criterion", "");
    let g = &r.goodness_of_fit;
    let _ = writeln!(s, "{:<16} {:>12.4} {:>16} {:>6}", "NRMSE", g.nrmse, format!("<= {}", g.alpha), flag(g.pass));
    let w = &r.shapiro_wilk;
    let _ = writeln!(s, "{:<16} {:>12.4} {:>16} {:>6}", "Shapiro-Wilk p", w.p_value, format!("> {}", w.alpha), flag(w.pass));
    let q = &r.qq;
    let _ = writeln!(s, "{:<16} {:>12.4} {:>16} {:>6}", "QQ location", q.location, "|mu| <= 1", flag(q.location_pass));
    let _ = writeln!(s, "{:<16} {:>12.4} {:>16} {:>6}", "QQ scale", q.scale, "0.5 ..= 1.5", flag(q.scale_pass));
    let _ = match r.failed_stage {
        None => writeln!(s, "overall: pass"),
        Some(st) => writeln!(s, "overall: FAIL at {st}"),
    };
    s
}

fn cmd_confirm(a: ConfirmArgs) -> Result<Outcome> {
    let thresholds = Thresholds::default().with_alpha(a.alpha);
    let mut rec = RunRecorder::start("confirm", json!({ "thresholds": thresholds }));
    let model = load_model(&a.model, &mut rec)?;
    let test = read_sample_csv(model.space(), &rec.read_input(&a.input)?)?.into_valued()?;
    let report = confirm(&model, &test, &thresholds)?;
    let mut body = serde_json::to_vec_pretty(&report)?;
    body.push(b'\n');
    rec.write_output(&a.out, &body)?;
    rec.write_output(&sibling(&a.out, ".qq.csv"), &write_qq_csv(&report.qq.points)?)?;
    print!("{}", render_confirmation(&report));
    finish(rec)?;
    Ok(Outcome::from_pass(report.overall))
}

pub fn render_report(space: &ConfigSpace, report: &CriticalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "population {}, {} distinct snapped configurations, {} with failure probability >= {}",
        report.population,
        report.snapped,
        report.rows.len(),
        report.params.report_floor
    );
    let names = space.names();
    for (i, r) in report.rows.iter().take(20).enumerate() {
        let cfg: Vec<String> = names.iter().zip(r.config.iter()).map(|(n, v)| format!("{n}={v}")).collect();
        let _ = writeln!(
            s,
            "{i:>3} {:<8} {} delta {:+.3} dB error {:.3} dB P {:.1} %",
            r.source.as_deref().unwrap_or("-"),
            cfg.join(" "),
            r.delta_db,
            r.model_error_db,
            100.0 * r.probability
        );
    }
    if report.rows.len() > 20 {
        let _ = writeln!(s, "... {} more rows", report.rows.len() - 20);
    }
    s
}

fn cmd_search(a: SearchArgs) -> Result<Outcome> {
    let mut params = SearchParams::symmetric(a.mpe.unwrap_or_else(synthetic_mpe));
    params.sensitivity = a.sensitivity;
    params.repulsion = a.repulsion;
    params.iterations = a.iterations;
    params.caps = a.caps;
    params.report_floor = a.floor;
    params.validate()?;
    let mut rec = RunRecorder::start("search", json!({ "params": params }));
    rec.seed("search", a.seed);
    let model = load_model(&a.model, &mut rec)?;
    let report = run_critical_search(&model, &params, a.seed)?;
    rec.write_output(&a.out, &write_report_csv(model.space(), &report.rows)?)?;
    rec.write_output(&sibling(&a.out, ".json"), &report_json(&report)?)?;
    print!("{}", render_report(model.space(), &report));
    finish(rec)?;
    Ok(Outcome::Pass)
}

pub fn render_verify(v: &VerifyReport) -> String {
    let mut s = String::new();
    for r in &v.rows {
        let _ = writeln!(
            s,
            "{:>3} {:<8} {:+.3} dB  MPE {:.3} dB  {}",
            r.row,
            r.antenna.as_deref().unwrap_or("-"),
            r.measured_db,
            r.mpe_db,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    let _ = if v.overall {
        writeln!(s, "overall: pass ({} rows)", v.rows.len())
    } else {
        writeln!(s, "overall: FAIL, rows {:?} exceed the MPE", v.failures)
    };
    s
}

fn cmd_verify(a: VerifyArgs) -> Result<Outcome> {
    let mpe = a.mpe.unwrap_or_else(synthetic_mpe);
    let mut rec = RunRecorder::start("verify", json!({ "mpe": mpe }));
    let bytes = rec.read_input(&a.input)?;
    let v = verify_measurements(&bytes, mpe)?;
    print!("{}", render_verify(&v));
    if let Some(out) = &a.out {
        let mut body = serde_json::to_vec_pretty(&v)?;
        body.push(b'\n');
        rec.write_output(out, &body)?;
        finish(rec)?;
    }
    Ok(Outcome::from_pass(v.overall))
}

/// JSON summary of a benchmark run.
pub fn scenario_summary(name: &str, seed: u64, run: &ScenarioRun) -> serde_json::Value {
    let m = run.model();
    let in_pocket = run.report.rows.iter().filter(|r| run.field.in_pocket(&r.config)).count();
    json!({
        "scenario": name,
        "seed": seed,
        "variogram": m.variogram(),
        "fit_nrmse": m.fit_nrmse(),
        "anisotropy": m.anisotropy(),
        "outliers": m.outliers().len(),
        "confirmation": {
            "overall": run.confirmation.overall,
            "failed_stage": run.confirmation.failed_stage.map(Stage::name),
            "nrmse": run.confirmation.goodness_of_fit.nrmse,
            "sw_p": run.confirmation.shapiro_wilk.p_value,
            "qq_location": run.confirmation.qq.location,
            "qq_scale": run.confirmation.qq.scale,
        },
        "search": {
            "population": run.report.population,
            "rows": run.report.rows.len(),
            "rows_in_fault_pocket": in_pocket,
        },
        "pocket": run.field.pocket(),
        "report": run.report.rows,
    })
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<Outcome> {
    let name = format!("{:?}", a.scenario).to_lowercase();
    let (rec, run) = match a.scenario {
        ScenarioArg::Sine => {
            let mut o = SineOptions::default();
            apply_overrides(&mut o.params, &a);
            if let Some(k) = a.size {
                o.size = k;
            }
            let mut rec = RunRecorder::start("benchmark", json!({ "scenario": name, "options": o }));
            rec.seed("scenario", a.seed);
            (rec, run_sine_benchmark(a.seed, &o)?)
        }
        s => {
            let profile = match s {
                ScenarioArg::Structured => DeviceProfile::Structured,
                ScenarioArg::Noisy => DeviceProfile::Noisy,
                _ => DeviceProfile::InjectedFault,
            };
            let mut o = DeviceOptions::default();
            apply_overrides(&mut o.params, &a);
            if let Some(k) = a.size {
                o.initial = k;
            }
            let mut rec = RunRecorder::start("benchmark", json!({ "scenario": name, "options": o }));
            rec.seed("scenario", a.seed);
            (rec, run_device_scenario(profile, a.seed, &o)?)
        }
    };
    write_benchmark(rec, &a, &name, &run)
}

fn apply_overrides(p: &mut SearchParams, a: &BenchmarkArgs) {
    if let Some(s) = a.sensitivity {
        p.sensitivity = s;
    }
    if let Some(m) = a.iterations {
        p.iterations = m;
    }
    if let Some(c) = a.caps {
        p.caps = c;
    }
}

fn write_benchmark(mut rec: RunRecorder, a: &BenchmarkArgs, name: &str, run: &ScenarioRun) -> Result<Outcome> {
    let summary = scenario_summary(name, a.seed, run);
    let mut body = serde_json::to_vec_pretty(&summary)?;
    body.push(b'\n');
    rec.write_output(&a.out, &body)?;
    let v = run.model().variogram();
    println!(
        "{name} seed {}: variogram n {:.4} s {:.4} r {:.4}, NRMSE {:.3}",
        a.seed,
        v.nugget,
        v.sill,
        v.range,
        run.model().fit_nrmse()
    );
    print!("{}", render_confirmation(&run.confirmation));
    print!("{}", render_report(run.model().space(), &run.report));
    finish(rec)?;
    Ok(Outcome::from_pass(run.confirmation.overall))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caps_parser() {
        assert_eq!(parse_caps("10,1000").unwrap(), (10, 1000));
        assert!(parse_caps("10").is_err());
        assert!(parse_caps("20,10").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
