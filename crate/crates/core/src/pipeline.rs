//! End-to-end run: build, spectrum, cluster, localization, characteristic
//! values, counting comparison, moments, and artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::basis::{landau_level, radial_block, LandauConfig};
use crate::birman_schwinger::{characteristic_values, AssumptionReport, BsSystem, CharValueReport, SplitReport};
use crate::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::lieb_thirring::{lt_report, MomentReport, IDENTITY_TOL};
use crate::output::{
    counting_csv, index_csv, render_svg, spectrum_csv, to_json, write_text, CountingRow, IndexRow, SpectrumRow,
};
use crate::par;
use crate::profile::Profile;
use crate::spectrum::{
    annulus_count, bendixson_violation, build_hamiltonian, cluster_near_level, discrete_spectrum, localization_report,
    sector_test, self_adjoint_deviation, ComplexSpectrum, Hamiltonian, LocalizationReport, SectorSpec,
};
use crate::toeplitz::{
    counting_query, model_phi, toeplitz_eigs_general, toeplitz_eigs_radial, CountingFunction,
};

/// One asserted invariant: passes iff `value ≤ limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            limit,
            passed: value <= limit,
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisCheckReport {
    pub levels: Vec<f64>,
    pub dimension: usize,
    /// max |⟨φ_a, φ_b⟩ − δ_ab| over all blocks.
    pub orthonormality_error: f64,
    pub checks: Vec<Check>,
}

/// Orthonormality of the truncated basis, from the Galerkin matrix of U ≡ 1.
pub fn basis_check(cfg: &LandauConfig) -> Result<BasisCheckReport> {
    let one = Profile::Constant { value: 1.0 };
    let blocks: Vec<i64> = cfg.block_range().collect();
    let errs = par::try_map_range(blocks.len(), |i| {
        let (modes, gram) = radial_block(cfg, &one, blocks[i])?;
        let n = modes.len();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((gram[(a, b)] - target).norm());
            }
        }
        Ok::<_, Error>(worst)
    })
    .map_err(|e| e.in_module("landau-basis"))?;
    let orthonormality_error = errs.into_iter().fold(0.0, f64::max);
    let levels = (0..=cfg.q_max).map(|q| landau_level(q, cfg.b)).collect::<Result<Vec<_>>>()?;
    Ok(BasisCheckReport {
        levels,
        dimension: cfg.modes().len(),
        orthonormality_error,
        checks: vec![Check::new("basis_orthonormality", orthonormality_error, 1e-10)],
    })
}

/// Hamiltonian, its full spectrum (k measured from the analysis level) and
/// the cluster threshold < |k| < r0.
pub struct SpectrumStage {
    pub hamiltonian: Hamiltonian,
    pub spectrum: ComplexSpectrum,
    pub cluster: ComplexSpectrum,
    pub sector: SectorSpec,
    pub localization: LocalizationReport,
    pub checks: Vec<Check>,
}

impl SpectrumStage {
    pub fn rows(&self) -> Vec<SpectrumRow> {
        self.spectrum
            .entries
            .iter()
            .map(|e| SpectrumRow {
                level_q: self.spectrum.level_q,
                block_m: e.block,
                lambda: e.lambda,
                k: e.k,
                multiplicity: e.multiplicity,
                residual: e.residual,
                in_sector: sector_test(e.k, &self.sector),
            })
            .collect()
    }

    /// Cluster entries with r < |k| < r0.
    pub fn annulus(&self) -> ComplexSpectrum {
        let mut out = self.cluster.clone();
        out.entries.retain(|e| e.k.norm() > self.sector.r);
        out
    }
}

pub fn spectrum_stage(cfg: &RunConfig) -> Result<SpectrumStage> {
    let tag = |e: Error| e.in_module("perturbed-spectrum");
    let a = &cfg.analysis;
    let h = build_hamiltonian(&cfg.landau, &cfg.potential).map_err(tag)?;
    let spectrum = discrete_spectrum(&h, a.level_q, a.tol).map_err(tag)?;
    let r0 = cfg.r0();
    let cluster = cluster_near_level(&spectrum, a.level_q, r0).map_err(tag)?;
    let sector = SectorSpec {
        alpha: cfg.potential.alpha,
        sign_j: cfg.potential.sign_j,
        delta: a.delta,
        r: a.r,
        r0,
    };
    let mut checks = vec![Check::new("bendixson_strip", bendixson_violation(&h, &spectrum).map_err(tag)?, 0.0)];
    if cfg.potential.alpha.sin() == 0.0 {
        checks.push(Check::new(
            "self_adjoint_agreement",
            self_adjoint_deviation(&h, &spectrum).map_err(tag)?,
            1e-8 * (1.0 + h.v_sup),
        ));
    }
    let mut stage = SpectrumStage {
        hamiltonian: h,
        spectrum,
        cluster,
        sector,
        localization: LocalizationReport {
            inside: 0,
            outside: 0,
            worst_angle: 0.0,
        },
        checks,
    };
    stage.localization = localization_report(&stage.annulus(), &sector);
    Ok(stage)
}

pub fn counting_function(cfg: &RunConfig) -> Result<CountingFunction> {
    let u = &cfg.potential.profile;
    let q = cfg.analysis.level_q;
    if u.is_radial() {
        toeplitz_eigs_radial(q, u, &cfg.landau)
    } else {
        toeplitz_eigs_general(q, u, &cfg.landau)
    }
    .map_err(|e| e.in_module("toeplitz-spectra"))
}

pub fn r_grid(cfg: &RunConfig) -> Vec<f64> {
    let a = &cfg.analysis;
    let n = a.r_grid_points;
    let (lo, hi) = (a.r_grid_min.ln(), a.r_grid_max.ln());
    (0..n)
        .map(|i| match i {
            0 => a.r_grid_min,
            _ if i == n - 1 => a.r_grid_max,
            _ => (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

pub fn counting_rows(cfg: &RunConfig, cf: &CountingFunction, spectrum: Option<&ComplexSpectrum>) -> Vec<CountingRow> {
    let class = cfg.potential.profile.model_class();
    let r0 = cfg.r0();
    r_grid(cfg)
        .into_iter()
        .map(|r| {
            let n_toeplitz = counting_query(cf, r);
            let phi_model = class.as_ref().and_then(|c| model_phi(c, cfg.landau.b, r).ok());
            CountingRow {
                r,
                log_r: r.ln(),
                n_toeplitz,
                n_annulus: spectrum.map_or(0, |s| annulus_count(s, cfg.analysis.level_q, r, r0)),
                phi_model,
                ratio: phi_model.filter(|&p| p > 0.0).map(|p| n_toeplitz as f64 / p),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CharValueSummary {
    pub found: usize,
    pub total_multiplicity: i64,
    pub boundary_index: i64,
    pub scan_total: i64,
    pub unresolved: usize,
    pub grid_offset: f64,
    pub max_position_error: f64,
}

pub struct CharValueStage {
    pub report: CharValueReport,
    pub rows: Vec<IndexRow>,
    pub summary: CharValueSummary,
    pub max_bs_distance: f64,
    pub checks: Vec<Check>,
}

fn nearest(points: &[Complex64], z: Complex64) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p - z).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Characteristic values over the annulus, compared with the eigenvalue cluster.
pub fn charvals_stage(cfg: &RunConfig, sys: &BsSystem, stage: &SpectrumStage) -> Result<CharValueStage> {
    let tag = |e: Error| e.in_module("birman-schwinger");
    let a = &cfg.analysis;
    let q = a.level_q;
    let annulus = stage.annulus();
    let dists = par::try_map_range(annulus.entries.len(), |i| {
        sys.bs_check(annulus.entries[i].lambda).map(|c| c.min_dist_to_minus_one)
    })
    .map_err(tag)?;
    let max_bs_distance = dists.into_iter().fold(0.0, f64::max);

    let report = characteristic_values(sys, q, a.r, cfg.r0(), cfg.scan_grid()).map_err(tag)?;
    let ks: Vec<Complex64> = annulus.entries.iter().map(|e| e.k).collect();
    let found: Vec<Complex64> = report.values.iter().map(|v| v.k).collect();
    let mut max_position_error: f64 = 0.0;
    let mut mismatched = 0usize;
    let mut rows = Vec::with_capacity(report.values.len());
    for v in &report.values {
        let (idx, d) = nearest(&ks, v.k).unwrap_or((usize::MAX, f64::INFINITY));
        max_position_error = max_position_error.max(d);
        let multiplicity_cluster = if idx == usize::MAX { 0 } else { annulus.entries[idx].multiplicity };
        if v.multiplicity != multiplicity_cluster as i64 {
            mismatched += 1;
        }
        rows.push(IndexRow {
            k: v.k,
            multiplicity_index: v.multiplicity,
            multiplicity_cluster,
        });
    }
    for &k in &ks {
        let d = nearest(&found, k).map_or(f64::INFINITY, |p| p.1);
        max_position_error = max_position_error.max(d);
    }
    let total_multiplicity: i64 = report.values.iter().map(|v| v.multiplicity).sum();
    let count = ks.len() as i64;
    let checks = vec![
        Check::new("bs_min_distance", max_bs_distance, 1e-8),
        Check::new("charvals_count", (total_multiplicity - count).abs() as f64, 0.0),
        Check::new("charvals_position", if ks.is_empty() && found.is_empty() { 0.0 } else { max_position_error }, 1e-7),
        Check::new("index_vs_cluster_multiplicity", mismatched as f64, 0.0),
        Check::new("boundary_index", (report.boundary_index - count).abs() as f64, 0.0),
        Check::new("unresolved_cells", report.unresolved.len() as f64, 0.0),
    ];
    let summary = CharValueSummary {
        found: report.values.len(),
        total_multiplicity,
        boundary_index: report.boundary_index,
        scan_total: report.scan_total,
        unresolved: report.unresolved.len(),
        grid_offset: report.grid_offset,
        max_position_error: if ks.is_empty() && found.is_empty() { 0.0 } else { max_position_error },
    };
    Ok(CharValueStage {
        report,
        rows,
        summary,
        max_bs_distance,
        checks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorChecks {
    pub test_point: Complex64,
    pub split: SplitReport,
    pub cauchy_error: f64,
    pub assumption: AssumptionReport,
}

pub fn operator_checks(cfg: &RunConfig, sys: &BsSystem) -> Result<(OperatorChecks, Vec<Check>)> {
    let tag = |e: Error| e.in_module("birman-schwinger");
    let q = cfg.analysis.level_q;
    let k = Complex64::from_polar((cfg.analysis.r * cfg.r0()).sqrt(), 1.0);
    let op = sys.weighted_resolvent(k, q).map_err(tag)?;
    let split = sys.singular_split_check(&op).map_err(tag)?;
    let rho = 0.5 * sys.pole_distance(q, k);
    let cauchy_error = sys.cauchy_check(q, k, rho, 64).map_err(tag)?;
    let assumption = sys.assumption_check(q, cfg.potential.alpha).map_err(tag)?;
    let checks = vec![
        Check::new("split_reconstruction", split.reconstruction_error, 1e-12),
        Check::new("split_derivative", split.derivative_error, 1e-6),
        Check::new("spectral_identity", split.spectral_identity_error, 1e-9),
        Check::new("cauchy_reconstruction", cauchy_error, 1e-7),
    ];
    Ok((
        OperatorChecks {
            test_point: k,
            split,
            cauchy_error,
            assumption,
        },
        checks,
    ))
}

pub fn moment_stage(
    cfg: &RunConfig,
    stage: &SpectrumStage,
    cf: Option<&CountingFunction>,
) -> Result<(MomentReport, Vec<Check>)> {
    let rep = lt_report(
        &stage.spectrum,
        cfg.landau.q_max,
        &stage.cluster,
        cf,
        &stage.sector,
        cfg.analysis.p,
    )
    .map_err(|e| e.in_module("lieb-thirring"))?;
    let checks = vec![
        Check::new("lt_stepwise_identity", rep.identity_error, IDENTITY_TOL),
        Check::new("lt_sandwich", if rep.sandwich_holds { 0.0 } else { 1.0 }, 0.0),
        Check::new("lt_global_finite", if rep.global_sum.is_finite() { 0.0 } else { 1.0 }, 0.0),
    ];
    Ok((rep, checks))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub files: Vec<String>,
    pub dimension: usize,
    pub level_q: usize,
    pub cluster_size: usize,
    pub annulus_count: usize,
    pub localization: LocalizationReport,
    pub characteristic_values: CharValueSummary,
    pub operator: OperatorChecks,
    pub moments: MomentReport,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub crate_version: &'static str,
    pub parallel: bool,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs every stage and writes the artifacts into `cfg.output.directory`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    let started = now();
    cfg.validate()?;
    let dir: PathBuf = cfg.output.directory.clone();
    ensure_dir(&dir)?;

    let stage = spectrum_stage(cfg)?;
    let sys = BsSystem::new(&stage.hamiltonian).map_err(|e| e.in_module("birman-schwinger"))?;
    let cv = charvals_stage(cfg, &sys, &stage)?;
    let (operator, op_checks) = operator_checks(cfg, &sys)?;
    let cf = counting_function(cfg)?;
    let counting = counting_rows(cfg, &cf, Some(&stage.spectrum));
    let (moments, lt_checks) = moment_stage(cfg, &stage, Some(&cf))?;

    let mut files = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<()> {
        write_text(&dir.join(name), &text)?;
        files.push(name.to_string());
        Ok(())
    };
    if cfg.wants(Format::Csv) {
        emit("spectrum.csv", spectrum_csv(&stage.rows())?)?;
        emit("counting.csv", counting_csv(&counting)?)?;
        emit("index.csv", index_csv(&cv.rows)?)?;
    }
    if cfg.wants(Format::Svg) {
        let pts: Vec<Complex64> = stage.cluster.entries.iter().map(|e| e.k).collect();
        emit("spectrum.svg", render_svg(&pts, &[stage.sector], "eigenvalues near the level"))?;
    }

    let mut checks = stage.checks.clone();
    checks.extend(cv.checks.iter().cloned());
    checks.extend(op_checks);
    checks.extend(lt_checks);
    let passed = all_passed(&checks);
    if cfg.wants(Format::Json) {
        files.push("report.json".into());
        files.push("provenance.json".into());
    }
    let report = RunReport {
        files,
        dimension: stage.hamiltonian.dim(),
        level_q: cfg.analysis.level_q,
        cluster_size: stage.cluster.total(),
        annulus_count: stage.annulus().total(),
        localization: stage.localization,
        characteristic_values: cv.summary,
        operator,
        moments,
        checks,
        passed,
    };
    if cfg.wants(Format::Json) {
        write_text(&dir.join("report.json"), &to_json(&report)?)?;
        let prov = Provenance {
            config_sha256: config_hash(cfg),
            crate_version: env!("CARGO_PKG_VERSION"),
            parallel: cfg!(feature = "parallel"),
            threads: par::current_threads(),
            started_unix: started,
            finished_unix: now(),
        };
        write_text(&dir.join("provenance.json"), &to_json(&prov)?)?;
    }
    Ok(report)
}
