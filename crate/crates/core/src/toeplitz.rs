//! Berezin–Toeplitz spectra p_q U p_q, counting functions, and the model
//! laws for the three decay classes.

use serde::{Deserialize, Serialize};

use crate::basis::{galerkin_general, radial_matrix_element_log, BasisIndex, LandauConfig};
use crate::error::{Error, Result};
use crate::linalg::eig_hermitian;
use crate::par;
use crate::profile::{ModelClass, Profile};
use crate::special::{ln_lower_gamma_regularized, LogValue};

/// Descending Toeplitz eigenvalues of one level, kept both linearly and as
/// logarithms so that thresholds far below f64 resolution stay meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingFunction {
    pub level_q: usize,
    pub truncation_j_max: usize,
    pub eigenvalues: Vec<f64>,
    /// ln of each eigenvalue; -∞ for zeros.
    pub ln_eigenvalues: Vec<f64>,
}

impl CountingFunction {
    /// Builds from log-form eigenvalues; negative round-off is clipped to zero.
    pub fn from_log_values(level_q: usize, truncation_j_max: usize, values: Vec<LogValue>) -> Self {
        let mut ln: Vec<f64> = values
            .into_iter()
            .map(|v| if v.sign > 0 { v.ln_abs } else { f64::NEG_INFINITY })
            .collect();
        ln.sort_by(|a, b| b.total_cmp(a));
        let eigenvalues = ln.iter().map(|l| l.exp()).collect();
        Self {
            level_q,
            truncation_j_max,
            eigenvalues,
            ln_eigenvalues: ln,
        }
    }

    /// Builds from linear eigenvalues.
    pub fn from_values(level_q: usize, truncation_j_max: usize, values: Vec<f64>) -> Self {
        let mut pairs: Vec<(f64, f64)> = values
            .into_iter()
            .map(|v| {
                let v = v.max(0.0);
                (v, v.ln())
            })
            .collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        Self {
            level_q,
            truncation_j_max,
            eigenvalues: pairs.iter().map(|p| p.0).collect(),
            ln_eigenvalues: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Smallest retained eigenvalue (log), the truncation diagnostic.
    pub fn ln_floor(&self) -> f64 {
        self.ln_eigenvalues.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Eigenvalues ⟨φ_{q,j}, U φ_{q,j}⟩, j ≤ j_max, of a radial U. The q = 0 disk
/// uses the closed incomplete-gamma form; everything else uses quadrature.
pub fn toeplitz_eigs_radial(q: usize, u: &Profile, cfg: &LandauConfig) -> Result<CountingFunction> {
    if let (0, Profile::Disk { radius, height }) = (q, u) {
        let xi = 0.5 * cfg.b * radius * radius;
        let ln_h = height.ln();
        let values = par::map_range(cfg.j_max + 1, |j| ln_lower_gamma_regularized(j, xi).scale_ln(ln_h));
        return Ok(CountingFunction::from_log_values(q, cfg.j_max, values));
    }
    toeplitz_eigs_quadrature(q, u, cfg)
}

/// Same as [`toeplitz_eigs_radial`] but always by quadrature.
pub fn toeplitz_eigs_quadrature(q: usize, u: &Profile, cfg: &LandauConfig) -> Result<CountingFunction> {
    let values = par::try_map_range(cfg.j_max + 1, |j| radial_matrix_element_log(q, q, j, u, cfg))?;
    Ok(CountingFunction::from_log_values(q, cfg.j_max, values))
}

/// Eigenvalues of the Galerkin matrix of any profile on level q.
pub fn toeplitz_eigs_general(q: usize, u: &Profile, cfg: &LandauConfig) -> Result<CountingFunction> {
    if q > cfg.q_max {
        return Err(Error::Dimension(format!("level {q} exceeds q_max = {}", cfg.q_max)));
    }
    let modes: Vec<BasisIndex> = (0..=cfg.j_max).map(|j| BasisIndex::new(q, j)).collect();
    let mat = galerkin_general(cfg, u, &modes)?;
    let eig = eig_hermitian(&mat, 1e-9)?;
    let values = eig.values.iter().map(|z| z.re).collect();
    Ok(CountingFunction::from_values(q, cfg.j_max, values))
}

/// N(r) = #{s > r}.
pub fn counting_query(cf: &CountingFunction, r: f64) -> usize {
    counting_query_ln(cf, r.ln())
}

/// N(e^{ln_r}), compared in log space.
pub fn counting_query_ln(cf: &CountingFunction, ln_r: f64) -> usize {
    cf.ln_eigenvalues.partition_point(|&l| l > ln_r)
}

/// Model counting law of the class at threshold r ∈ (0, e⁻¹).
pub fn model_phi(class: &ModelClass, b: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("threshold r = {r} must lie in (0, 1/e)")));
    }
    model_phi_ln(class, b, r.ln())
}

/// [`model_phi`] with the threshold given as ln r < −1.
pub fn model_phi_ln(class: &ModelClass, b: f64, ln_r: f64) -> Result<f64> {
    if !(ln_r < -1.0) {
        return Err(Error::Domain(format!("threshold ln r = {ln_r} must be below -1")));
    }
    if !(b > 0.0) {
        return Err(Error::Parameter(format!("field strength b = {b} must be positive")));
    }
    let l = -ln_r;
    match *class {
        ModelClass::A1 { m, u0_integral } => {
            if !(m > 0.0) || !(u0_integral >= 0.0) {
                return Err(Error::Parameter(format!("A1 needs m > 0 and ∫u₀^(2/m) ≥ 0, got m = {m}")));
            }
            let c_m = b / (4.0 * std::f64::consts::PI) * u0_integral;
            Ok(c_m * (2.0 * l / m).exp())
        }
        ModelClass::A2 { mu, beta } => {
            if !(mu > 0.0) || !(beta > 0.0) {
                return Err(Error::Parameter(format!("A2 needs μ > 0 and β > 0, got μ = {mu}, β = {beta}")));
            }
            Ok(if beta < 1.0 {
                0.5 * b * mu.powf(-1.0 / beta) * l.powf(1.0 / beta)
            } else if beta == 1.0 {
                l / (2.0 * mu / b).ln_1p()
            } else {
                beta / (beta - 1.0) * l / l.ln()
            })
        }
        ModelClass::A3 => Ok(l / l.ln()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub r: f64,
    pub ln_r: f64,
    pub count: usize,
    pub phi: Option<f64>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rows: Vec<FitRow>,
    /// Least-squares slope of ln N against ln(1/r).
    pub slope: Option<f64>,
    /// Grid points at or below the smallest retained eigenvalue.
    pub dropped: usize,
    pub ln_floor: f64,
    /// N is constant over the grid: the profile shows no decay to fit.
    pub out_of_class: bool,
}

/// Ratios N(r)/φ(r) and the log-log slope over the resolvable part of a grid
/// given as ln r values.
pub fn asymptotic_fit(cf: &CountingFunction, class: Option<&ModelClass>, b: f64, ln_grid: &[f64]) -> Result<FitReport> {
    let floor = cf.ln_floor();
    let no_class = class.is_none();
    let mut rows = Vec::new();
    for &ln_r in ln_grid {
        if ln_r <= floor && !no_class {
            continue;
        }
        let count = counting_query_ln(cf, ln_r);
        let phi = match class {
            Some(c) if ln_r < -1.0 => Some(model_phi_ln(c, b, ln_r)?),
            _ => None,
        };
        rows.push(FitRow {
            r: ln_r.exp(),
            ln_r,
            count,
            phi,
            ratio: phi.map(|p| count as f64 / p),
        });
    }
    if rows.is_empty() && !no_class {
        return Err(Error::Range(format!(
            "no grid point lies above the smallest retained eigenvalue e^{floor:.3}"
        )));
    }
    let constant = rows.len() > 1 && rows.iter().all(|r| r.count == rows[0].count);
    if no_class || constant {
        return Ok(FitReport {
            dropped: ln_grid.len() - rows.len(),
            rows,
            slope: None,
            ln_floor: floor,
            out_of_class: true,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.count > 0)
        .map(|r| (-r.ln_r, (r.count as f64).ln()))
        .collect();
    let slope = least_squares_slope(&pts);
    Ok(FitReport {
        dropped: ln_grid.len() - rows.len(),
        rows,
        slope,
        ln_floor: floor,
        out_of_class: false,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `n` points geometrically spaced from `lo` to `hi`, as ln values.
pub fn ln_geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
