//! Symmetric-gauge Landau eigenbasis and Galerkin matrices of potentials.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::par;
use crate::profile::Profile;
use crate::quadrature::{gauss_legendre, integrate_log};
use crate::special::{laguerre_log, ln_factorial, LogValue};

fn default_q_max() -> usize {
    5
}

fn default_j_max() -> usize {
    60
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandauConfig {
    pub b: f64,
    #[serde(default = "default_q_max")]
    pub q_max: usize,
    #[serde(default = "default_j_max")]
    pub j_max: usize,
}

impl LandauConfig {
    pub fn new(b: f64, q_max: usize, j_max: usize) -> Result<Self> {
        let cfg = Self { b, q_max, j_max };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::config("landau.b", "field strength must be finite and > 0"));
        }
        if self.j_max < self.q_max {
            return Err(Error::config("landau.j_max", "j_max must be at least q_max"));
        }
        Ok(())
    }

    /// Gap between consecutive levels, 2b.
    pub fn gap(&self) -> f64 {
        2.0 * self.b
    }

    pub fn contains(&self, idx: BasisIndex) -> bool {
        idx.q <= self.q_max && idx.j <= self.j_max
    }

    /// Every retained mode, level-major.
    pub fn modes(&self) -> Vec<BasisIndex> {
        (0..=self.q_max)
            .flat_map(|q| (0..=self.j_max).map(move |j| BasisIndex { q, j }))
            .collect()
    }

    /// Angular momenta carried by the retained modes.
    pub fn block_range(&self) -> std::ops::RangeInclusive<i64> {
        -(self.q_max as i64)..=self.j_max as i64
    }

    /// Retained modes with angular momentum m, by increasing level.
    pub fn block_modes(&self, m: i64) -> Vec<BasisIndex> {
        (0..=self.q_max)
            .filter_map(|q| {
                let j = m + q as i64;
                (j >= 0 && j as usize <= self.j_max).then_some(BasisIndex { q, j: j as usize })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    pub q: usize,
    pub j: usize,
}

impl BasisIndex {
    pub fn new(q: usize, j: usize) -> Self {
        Self { q, j }
    }

    /// Angular momentum j − q.
    pub fn m(&self) -> i64 {
        self.j as i64 - self.q as i64
    }

    /// (Laguerre degree, Laguerre order) = (min(q, j), |j − q|).
    pub fn laguerre_indices(&self) -> (usize, usize) {
        (self.q.min(self.j), self.m().unsigned_abs() as usize)
    }
}

/// Λ_q = 2bq.
pub fn landau_level(q: usize, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("field strength b = {b} must be positive")));
    }
    Ok(2.0 * b * q as f64)
}

/// √(n!/(n+a)!) ξ^{a/2} L_n^a(ξ) e^{-ξ/2}: the radial factor in ξ = br²/2,
/// normalised so that ∫₀^∞ f² dξ = 1.
pub fn radial_amplitude_log(n: usize, a: usize, xi: f64) -> LogValue {
    let poly = laguerre_log(n, a, xi);
    if poly.is_zero() {
        return LogValue::ZERO;
    }
    let power = if a == 0 {
        0.0
    } else if xi == 0.0 {
        return LogValue::ZERO;
    } else {
        0.5 * a as f64 * xi.ln()
    };
    poly.scale_ln(0.5 * (ln_factorial(n) - ln_factorial(n + a)) + power - 0.5 * xi)
}

/// φ_{q,j}(r, θ).
pub fn eval_basis(idx: BasisIndex, cfg: &LandauConfig, r: f64, theta: f64) -> Result<Complex64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius r = {r} must be nonnegative")));
    }
    if !cfg.contains(idx) {
        return Err(Error::Domain(format!("mode {idx:?} lies outside the truncation")));
    }
    let (n, a) = idx.laguerre_indices();
    let xi = 0.5 * cfg.b * r * r;
    let amp = radial_amplitude_log(n, a, xi).scale_ln(0.5 * (cfg.b / (2.0 * PI)).ln());
    Ok(Complex64::from_polar(1.0, idx.m() as f64 * theta) * amp.to_f64())
}

/// ⟨φ_{q,j}, U φ_{q′,j′}⟩ with j′ = j − q + q′ (equal angular momentum), in
/// sign/log form, for a radial profile U.
pub fn radial_matrix_element_log(q: usize, q2: usize, j: usize, u: &Profile, cfg: &LandauConfig) -> Result<LogValue> {
    let m = j as i64 - q as i64;
    let j2 = m + q2 as i64;
    if j2 < 0 {
        return Err(Error::Domain(format!("no mode at level {q2} with angular momentum {m}")));
    }
    if !u.is_radial() {
        return Err(Error::Domain("radial matrix elements need a radial profile".into()));
    }
    let (n1, a) = BasisIndex::new(q, j).laguerre_indices();
    let (n2, _) = BasisIndex::new(q2, j2 as usize).laguerre_indices();
    let b = cfg.b;
    integrate_log(&u.xi_domain(b), |xi| {
        let uv = u.radial_ln_value((2.0 * xi / b).sqrt());
        if uv.is_zero() {
            return LogValue::ZERO;
        }
        uv.mul(radial_amplitude_log(n1, a, xi)).mul(radial_amplitude_log(n2, a, xi))
    })
}

pub fn radial_matrix_element(q: usize, q2: usize, j: usize, u: &Profile, cfg: &LandauConfig) -> Result<f64> {
    Ok(radial_matrix_element_log(q, q2, j, u, cfg)?.to_f64())
}

/// Galerkin matrix of a radial U on the modes of angular momentum m.
pub fn radial_block(cfg: &LandauConfig, u: &Profile, m: i64) -> Result<(Vec<BasisIndex>, ComplexMatrix)> {
    let modes = cfg.block_modes(m);
    let n = modes.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |k| (i, k))).collect();
    let vals = par::try_map_range(pairs.len(), |p| {
        let (i, k) = pairs[p];
        radial_matrix_element(modes[i].q, modes[k].q, modes[i].j, u, cfg)
    })?;
    let mut mat = ComplexMatrix::zeros(n, n);
    for (&(i, k), v) in pairs.iter().zip(vals) {
        mat[(i, k)] = Complex64::new(v, 0.0);
        mat[(k, i)] = Complex64::new(v, 0.0);
    }
    Ok((modes, mat))
}

/// Gauss–Legendre nodes per radial panel in [`galerkin_general`].
const PANEL_NODES: usize = 16;

/// Galerkin matrix ⟨φ_A, U φ_B⟩ over arbitrary modes for any profile, by
/// polar quadrature: angular Fourier coefficients of U at each radial node,
/// composite Gauss–Legendre in ξ.
pub fn galerkin_general(cfg: &LandauConfig, u: &Profile, modes: &[BasisIndex]) -> Result<ComplexMatrix> {
    let n = modes.len();
    if n == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }
    let b = cfg.b;
    let d_max = modes.iter().map(|i| i.m()).max().unwrap_or(0) - modes.iter().map(|i| i.m()).min().unwrap_or(0);
    let d_max = d_max as usize;
    let a_max = modes
        .iter()
        .map(|i| {
            let (deg, ord) = i.laguerre_indices();
            (ord + 2 * deg) as f64
        })
        .fold(0.0, f64::max);
    let decay_limit = a_max + 12.0 * a_max.sqrt() + 60.0;
    let xi_max = match u.support_radius() {
        Some(r) => (0.5 * b * r * r).min(decay_limit),
        None => decay_limit,
    };
    let panels = ((xi_max.ceil() as usize).max(64)).max(1);
    let width = xi_max / panels as f64;
    let rule = gauss_legendre(PANEL_NODES);
    let mut xis = Vec::with_capacity(panels * PANEL_NODES);
    let mut weights = Vec::with_capacity(panels * PANEL_NODES);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        for (&t, &lw) in rule.nodes.iter().zip(&rule.ln_weights) {
            xis.push(mid + 0.5 * width * t);
            weights.push(0.5 * width * lw.exp());
        }
    }
    let n_theta = (4 * d_max + 64).next_power_of_two();
    let per_node: Vec<(Vec<Complex64>, Vec<f64>)> = par::map_range(xis.len(), |k| {
        let xi = xis[k];
        let r = (2.0 * xi / b).sqrt();
        let fourier = u.angular_fourier(r, d_max, n_theta);
        let amps = modes
            .iter()
            .map(|idx| {
                let (deg, ord) = idx.laguerre_indices();
                radial_amplitude_log(deg, ord, xi).to_f64()
            })
            .collect();
        (fourier, amps)
    });
    let rows: Vec<Vec<Complex64>> = par::map_range(n, |i| {
        (0..n)
            .map(|k| {
                let d = (modes[i].m() - modes[k].m() + d_max as i64) as usize;
                let mut acc = Complex64::new(0.0, 0.0);
                for (node, (fourier, amps)) in per_node.iter().enumerate() {
                    acc += fourier[d] * (weights[node] * amps[i] * amps[k]);
                }
                acc
            })
            .collect()
    });
    ComplexMatrix::new(n, n, rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> LandauConfig {
        LandauConfig::new(1.0, 3, 8).unwrap()
    }

    #[test]
    fn levels() {
        assert_eq!(landau_level(3, 2.0).unwrap(), 12.0);
        assert_eq!(landau_level(0, 5.0).unwrap(), 0.0);
        assert_eq!(landau_level(1, 0.5).unwrap(), 1.0);
        assert!(matches!(landau_level(1, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn basis_at_origin() {
        let c = cfg();
        let v = eval_basis(BasisIndex::new(0, 0), &c, 0.0, 0.3).unwrap();
        assert!((v.re - (1.0 / (2.0 * PI)).sqrt()).abs() < 1e-15 && v.im == 0.0);
        assert_eq!(eval_basis(BasisIndex::new(0, 1), &c, 0.0, 0.0).unwrap().norm(), 0.0);
        assert!(eval_basis(BasisIndex::new(0, 0), &c, -1.0, 0.0).is_err());
    }

    #[test]
    fn config_invariants() {
        assert!(LandauConfig::new(0.0, 1, 2).is_err());
        assert!(LandauConfig::new(1.0, 3, 2).is_err());
        let c = cfg();
        assert_eq!(c.modes().len(), 4 * 9);
        let total: usize = c.block_range().map(|m| c.block_modes(m).len()).sum();
        assert_eq!(total, c.modes().len());
        assert_eq!(c.block_modes(-3), vec![BasisIndex::new(3, 0)]);
        assert_eq!(c.block_modes(8), vec![BasisIndex::new(0, 8)]);
    }

    #[test]
    fn constant_potential_is_identity_on_blocks() {
        let c = cfg();
        let one = Profile::Constant { value: 1.0 };
        for m in [-2, 0, 3] {
            let (_, blk) = radial_block(&c, &one, m).unwrap();
            let id = ComplexMatrix::identity(blk.n_rows());
            assert!(blk.sub(&id).unwrap().max_abs() < 1e-12, "m = {m}");
        }
    }

    #[test]
    fn disk_lowest_level_is_incomplete_gamma() {
        let c = LandauConfig::new(2.0, 0, 5).unwrap();
        let s = radial_matrix_element(0, 0, 0, &Profile::disk(1.0, 1.0), &c).unwrap();
        assert!((s - (1.0 - (-1f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn general_galerkin_matches_radial_blocks_for_constant_potential() {
        let c = LandauConfig::new(1.0, 1, 4).unwrap();
        let g = galerkin_general(&c, &Profile::Constant { value: 2.0 }, &c.modes()).unwrap();
        let id = ComplexMatrix::identity(g.n_rows()).scale(Complex64::new(2.0, 0.0));
        assert!(g.sub(&id).unwrap().max_abs() < 1e-10);
    }
}
