use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tiltei_core::diagnostics::{bias_variance_sweep, BiasVarianceConfig};
use tiltei_core::io::{
    export_results, fisher_at_center, fisher_curve_rows, ingest_tilt_csv, load_config, load_study_config,
    read_measurements_csv, run_inversion, simulate_from_config, truth_rows, write_csv, write_json,
    write_measurements, RunConfig,
};
use tiltei_core::synthetic::{noise_sweep_study, NoiseStudyConfig};
use tiltei_core::{Error, Result};

#[derive(Parser)]
#[command(name = "tiltei", version, about = "Flexural rigidity identification from rotation influence lines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate measurements from the [truth] section.
    Simulate(Common),
    /// Turn raw tilt traces into a measurement set.
    Ingest(Common),
    /// Infer the rigidity profile and export bands, fit and diagnostics.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Measurement CSV; defaults to measurements.csv in the output directory.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Fisher information of the sensor layout at the prior centre.
    Fisher(Common),
    /// Band width and detection against the noise level.
    SweepNoise(Common),
    /// Bias-variance trade-off against mesh size and sensor count.
    SweepBv(Common),
}

fn run_config(c: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = load_config(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let out = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn study_config(c: &Common) -> Result<(tiltei_core::io::StudyFile, PathBuf)> {
    let mut f = load_study_config(&c.config)?;
    if let Some(s) = c.seed {
        f.seed = s;
    }
    let out = c.out.clone().unwrap_or_else(|| f.output.dir.clone());
    Ok((f, out))
}

#[derive(Serialize)]
struct NoiseRow {
    sigma_mm_per_m: f64,
    mean_band_width: f64,
    detection_rate: f64,
    detected: bool,
}

#[derive(Serialize)]
struct NoiseElementRow {
    sigma_mm_per_m: f64,
    x_left: f64,
    x_right: f64,
    truth: f64,
    mean_ei: f64,
    band_width: f64,
}

#[derive(Serialize)]
struct BvRow {
    n_sensors: usize,
    n_elements: usize,
    lambda: f64,
    truth: f64,
    rmse: f64,
    bias2: f64,
    variance: f64,
    mse_se: f64,
    failures: usize,
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(c) => {
            let (cfg, out) = run_config(&c)?;
            let (data, truth) = simulate_from_config(&cfg)?;
            let m = out.join("measurements.csv");
            write_measurements(&m, &data)?;
            announce(&m);
            let t = out.join("truth.csv");
            write_csv(&t, &truth_rows(&truth))?;
            announce(&t);
        }
        Command::Ingest(c) => {
            let (cfg, out) = run_config(&c)?;
            let data = ingest_tilt_csv(&cfg)?;
            let m = out.join("measurements.csv");
            write_measurements(&m, &data)?;
            announce(&m);
            println!("kept crossings {:?}, rejected {:?}", data.kept, data.rejected);
        }
        Command::Invert { common, data } => {
            let (cfg, out) = run_config(&common)?;
            let data_path = data.unwrap_or_else(|| out.join("measurements.csv"));
            let data = read_measurements_csv(&data_path)?;
            let bundle = run_inversion(&cfg, &data)?;
            let p = export_results(&bundle, &out)?;
            for path in [&p.ei_profile, &p.fit, &p.fisher_curves, &p.report] {
                announce(path);
            }
            println!(
                "{}: sigma^2 = {:.4e}, tau = {:.4e}, lambda = {:.4e}",
                bundle.hyper.method, bundle.hyper.sigma2, bundle.hyper.tau, bundle.hyper.lambda
            );
        }
        Command::Fisher(c) => {
            let (cfg, out) = run_config(&c)?;
            let report = fisher_at_center(&cfg)?;
            let names: Vec<String> = cfg.sensors().iter().map(|s| s.id.clone()).collect();
            let curves = out.join("fisher_curves.csv");
            write_csv(&curves, &fisher_curve_rows(&report, &names))?;
            announce(&curves);
            let json = out.join("fisher.json");
            write_json(&json, &report)?;
            announce(&json);
            println!("identifiable rank {} of {}", report.spectrum.rank, report.x_mid.len());
        }
        Command::SweepNoise(c) => {
            let (f, out) = study_config(&c)?;
            let study_cfg = f.study.noise.unwrap_or_else(NoiseStudyConfig::default);
            let study = noise_sweep_study(&study_cfg, f.seed)?;
            let rows: Vec<NoiseRow> = study
                .levels
                .iter()
                .map(|l| NoiseRow {
                    sigma_mm_per_m: l.sigma_mm_per_m,
                    mean_band_width: l.mean_band_width,
                    detection_rate: l.detection_rate,
                    detected: l.detected,
                })
                .collect();
            let s = &study;
            let elements: Vec<NoiseElementRow> = s
                .levels
                .iter()
                .flat_map(|l| {
                    (0..s.x_left.len()).map(move |j| NoiseElementRow {
                        sigma_mm_per_m: l.sigma_mm_per_m,
                        x_left: s.x_left[j],
                        x_right: s.x_right[j],
                        truth: s.truth[j],
                        mean_ei: l.mean_ei[j],
                        band_width: l.element_width[j],
                    })
                })
                .collect();
            let a = out.join("noise_levels.csv");
            write_csv(&a, &rows)?;
            announce(&a);
            let b = out.join("noise_elements.csv");
            write_csv(&b, &elements)?;
            announce(&b);
            let j = out.join("noise_study.json");
            write_json(&j, &study)?;
            announce(&j);
        }
        Command::SweepBv(c) => {
            let (f, out) = study_config(&c)?;
            let bv = f.study.bv.unwrap_or_else(BiasVarianceConfig::default);
            let records = bias_variance_sweep(&bv, f.seed)?;
            let rows: Vec<BvRow> = records
                .iter()
                .map(|r| BvRow {
                    n_sensors: r.n_sensors,
                    n_elements: r.n_elements,
                    lambda: r.lambda,
                    truth: r.truth,
                    rmse: r.rmse,
                    bias2: r.bias2,
                    variance: r.variance,
                    mse_se: r.mse_se,
                    failures: r.failures,
                })
                .collect();
            let a = out.join("bv_sweep.csv");
            write_csv(&a, &rows)?;
            announce(&a);
            let j = out.join("bv_sweep.json");
            write_json(&j, &records)?;
            announce(&j);
        }
    }
    Ok(())
}

fn report(e: &Error) {
    match e.root() {
        Error::Validation(list) => {
            eprintln!("error: {e}");
            for item in list {
                eprintln!("  - {item}");
            }
        }
        _ => eprintln!("error: {e}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
