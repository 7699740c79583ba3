//! TOML run configuration.
//!
//! ```toml
//! [landau]
//! b = 1.0          # q_max = 5, j_max = 60 by default
//!
//! [potential]
//! alpha = 0.7853981633974483
//! sign_j = -1
//! profile = { kind = "power_decay", u0 = 5.0, m = 4.0 }
//!
//! [analysis]        # every key optional
//! level_q = 1
//! r = 0.01
//! r0 = 0.6          # 0.3·2b
//!
//! [output]
//! directory = "out"
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::basis::LandauConfig;
use crate::birman_schwinger::{ScanGrid, START_CONTOUR_NODES};
use crate::error::{Error, Result};
use crate::profile::{PotentialSpec, Profile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_level")]
    pub level_q: usize,
    #[serde(default = "default_r")]
    pub r: f64,
    /// Defaults to 0.3·2b.
    #[serde(default)]
    pub r0: Option<f64>,
    /// Sector slope for the localization test.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_grid_lo")]
    pub r_grid_min: f64,
    #[serde(default = "default_grid_hi")]
    pub r_grid_max: f64,
    #[serde(default = "default_grid_points")]
    pub r_grid_points: usize,
    #[serde(default = "default_nodes")]
    pub contour_nodes: usize,
    #[serde(default = "default_scan")]
    pub grid_radial: usize,
    #[serde(default = "default_scan")]
    pub grid_angular: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_level() -> usize {
    1
}
fn default_r() -> f64 {
    0.01
}
fn default_delta() -> f64 {
    0.3
}
fn default_p() -> f64 {
    3.0
}
fn default_grid_lo() -> f64 {
    1e-6
}
fn default_grid_hi() -> f64 {
    0.1
}
fn default_grid_points() -> usize {
    10
}
fn default_nodes() -> usize {
    START_CONTOUR_NODES
}
fn default_scan() -> usize {
    40
}
fn default_tol() -> f64 {
    1e-10
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            level_q: default_level(),
            r: default_r(),
            r0: None,
            delta: default_delta(),
            p: default_p(),
            r_grid_min: default_grid_lo(),
            r_grid_max: default_grid_hi(),
            r_grid_points: default_grid_points(),
            contour_nodes: default_nodes(),
            grid_radial: default_scan(),
            grid_angular: default_scan(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub landau: LandauConfig,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn r0(&self) -> f64 {
        self.analysis.r0.unwrap_or(0.3 * self.landau.gap())
    }

    pub fn scan_grid(&self) -> ScanGrid {
        ScanGrid {
            radial: self.analysis.grid_radial,
            angular: self.analysis.grid_angular,
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    pub fn validate(&self) -> Result<()> {
        self.landau.validate()?;
        self.potential.validate()?;
        let a = &self.analysis;
        if a.level_q > self.landau.q_max {
            return Err(Error::config("analysis.level_q", format!("exceeds landau.q_max = {}", self.landau.q_max)));
        }
        let r0 = self.r0();
        if !(r0 > 0.0 && r0 < self.landau.gap()) {
            return Err(Error::config("analysis.r0", format!("must lie in (0, 2b = {})", self.landau.gap())));
        }
        if !(a.r > 0.0 && a.r.is_finite()) {
            return Err(Error::config("analysis.r", "must be finite and > 0"));
        }
        if a.r >= r0 {
            return Err(Error::config("analysis.r", format!("r = {} must be below r0 = {r0}", a.r)));
        }
        if !(a.delta > 0.0 && a.delta.is_finite()) {
            return Err(Error::config("analysis.delta", "must be finite and > 0"));
        }
        if !(a.p >= 2.0 && a.p.is_finite()) {
            return Err(Error::config("analysis.p", "moment exponent must be ≥ 2"));
        }
        if let Profile::PowerDecay { m, .. } = &self.potential.profile {
            if a.p * m <= 4.0 {
                return Err(Error::config(
                    "potential.profile.m",
                    format!(
                        "p·m = {} ≤ 4: the power-decay profile is not in L^{{p/2}}(R²) for p = {}",
                        a.p * m,
                        a.p
                    ),
                ));
            }
        }
        if !(a.r_grid_min > 0.0 && a.r_grid_min < a.r_grid_max && a.r_grid_max.is_finite()) {
            return Err(Error::config("analysis.r_grid_min", "need 0 < r_grid_min < r_grid_max"));
        }
        if a.r_grid_points < 2 {
            return Err(Error::config("analysis.r_grid_points", "need at least 2 points"));
        }
        if a.contour_nodes < 16 || !a.contour_nodes.is_power_of_two() {
            return Err(Error::config("analysis.contour_nodes", "must be a power of two ≥ 16"));
        }
        if a.grid_radial == 0 || a.grid_angular < 3 {
            return Err(Error::config("analysis.grid_radial", "scan grid needs ≥ 1 radial and ≥ 3 angular cells"));
        }
        if !(a.tol > 0.0 && a.tol < 1.0) {
            return Err(Error::config("analysis.tol", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Parses and validates a TOML document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let at = e
            .span()
            .map(|s| {
                let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_else(|| "document".into());
        Error::config(at, e.message().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}
