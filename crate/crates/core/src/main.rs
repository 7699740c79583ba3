use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use landau_speclab::birman_schwinger::BsSystem;
use landau_speclab::config::{parse_config, RunConfig};
use landau_speclab::output::{counting_csv, index_csv, parse_spectrum_csv, render_svg, spectrum_csv, to_json, write_text};
use landau_speclab::par;
use landau_speclab::pipeline::{
    all_passed, basis_check, charvals_stage, counting_function, counting_rows, ensure_dir, moment_stage,
    run_pipeline, spectrum_stage, Check,
};
use landau_speclab::{Error, Result};

const THREADS_ENV: &str = "LANDAU_SPECLAB_THREADS";

#[derive(Parser)]
#[command(name = "landau-speclab", version, about = "Complex eigenvalues near Landau levels")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; LANDAU_SPECLAB_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Eigensolver tolerance (overrides analysis.tol).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Orthonormality of the truncated Landau basis.
    BasisCheck,
    /// Berezin–Toeplitz counting table.
    Toeplitz,
    /// Truncated spectrum and sector localization.
    Spectrum,
    /// Characteristic values and contour indices over the annulus.
    Charvals,
    /// Lieb–Thirring moment sums.
    Lt,
    /// Full pipeline with every artifact.
    Run,
    /// SVG of an existing spectrum.csv in the output directory.
    Plot,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("--config", "a configuration file is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    if let Some(tol) = cli.tol {
        cfg.analysis.tol = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads(cli: &Cli) -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::config(THREADS_ENV, format!("`{v}` is not a thread count"))),
        Err(_) => Ok(cli.threads.unwrap_or(0)),
    }
}

fn report_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!(
            "{:<32} {:>12.4e} <= {:<10.3e} {}",
            c.name,
            c.value,
            c.limit,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    all_passed(checks)
}

fn execute(cli: &Cli) -> Result<bool> {
    let cfg = load(cli)?;
    let dir = cfg.output.directory.clone();
    match cli.command {
        Command::BasisCheck => {
            let rep = basis_check(&cfg.landau)?;
            print!("{}", to_json(&rep)?);
            Ok(report_checks(&rep.checks))
        }
        Command::Toeplitz => {
            ensure_dir(&dir)?;
            let stage = spectrum_stage(&cfg)?;
            let cf = counting_function(&cfg)?;
            write_text(&dir.join("counting.csv"), &counting_csv(&counting_rows(&cfg, &cf, Some(&stage.spectrum)))?)?;
            println!("wrote {}", dir.join("counting.csv").display());
            Ok(true)
        }
        Command::Spectrum => {
            ensure_dir(&dir)?;
            let stage = spectrum_stage(&cfg)?;
            write_text(&dir.join("spectrum.csv"), &spectrum_csv(&stage.rows())?)?;
            print!("{}", to_json(&stage.localization)?);
            Ok(report_checks(&stage.checks))
        }
        Command::Charvals => {
            ensure_dir(&dir)?;
            let stage = spectrum_stage(&cfg)?;
            let sys = BsSystem::new(&stage.hamiltonian).map_err(|e| e.in_module("birman-schwinger"))?;
            let cv = charvals_stage(&cfg, &sys, &stage)?;
            write_text(&dir.join("index.csv"), &index_csv(&cv.rows)?)?;
            print!("{}", to_json(&cv.summary)?);
            Ok(report_checks(&cv.checks))
        }
        Command::Lt => {
            let stage = spectrum_stage(&cfg)?;
            let cf = counting_function(&cfg)?;
            let (rep, checks) = moment_stage(&cfg, &stage, Some(&cf))?;
            print!("{}", to_json(&rep)?);
            Ok(report_checks(&checks))
        }
        Command::Run => {
            let rep = run_pipeline(&cfg)?;
            println!("artifacts in {}", dir.display());
            Ok(report_checks(&rep.checks))
        }
        Command::Plot => {
            let path = dir.join("spectrum.csv");
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let rows = parse_spectrum_csv(&text)?;
            let r0 = cfg.r0();
            let pts: Vec<Complex64> = rows.iter().map(|r| r.k).filter(|k| k.norm() < r0).collect();
            let sector = landau_speclab::spectrum::SectorSpec {
                alpha: cfg.potential.alpha,
                sign_j: cfg.potential.sign_j,
                delta: cfg.analysis.delta,
                r: cfg.analysis.r,
                r0,
            };
            let svg = dir.join("spectrum.svg");
            write_text(&svg, &render_svg(&pts, &[sector], "eigenvalues near the level"))?;
            println!("wrote {}", svg.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let n = match threads(&cli) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match par::with_threads(n, || execute(&cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
