//! Truncated H = H₀ + e^{iα}J|V|, its discrete spectrum, and the sector and
//! counting statements near a Landau level.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{galerkin_general, landau_level, radial_block, BasisIndex, LandauConfig};
use crate::error::{Error, Result};
use crate::linalg::{bendixson_bounds, cluster_sizes, eig_general, eig_hermitian, ComplexMatrix, CLUSTER_RADIUS};
use crate::par;
use crate::profile::PotentialSpec;

/// One diagonal block of the truncated Hamiltonian. `m` is the angular
/// momentum, or `None` for the unblocked matrix of a non-radial profile.
#[derive(Debug, Clone)]
pub struct Block {
    pub m: Option<i64>,
    pub modes: Vec<BasisIndex>,
    /// Galerkin matrix of |V| on `modes`.
    pub gram: ComplexMatrix,
    /// Unperturbed levels 2bq on `modes`.
    pub levels: Vec<f64>,
    pub matrix: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub cfg: LandauConfig,
    pub coupling: Complex64,
    pub sign_j: i32,
    pub alpha: f64,
    pub v_sup: f64,
    pub blocks: Vec<Block>,
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.modes.len()).sum()
    }

    /// The block-diagonal assembly as one matrix (blocks in order).
    pub fn full_matrix(&self) -> ComplexMatrix {
        let refs: Vec<&ComplexMatrix> = self.blocks.iter().map(|b| &b.matrix).collect();
        ComplexMatrix::block_diagonal(&refs)
    }
}

fn assemble(cfg: &LandauConfig, coupling: Complex64, m: Option<i64>, modes: Vec<BasisIndex>, gram: ComplexMatrix) -> Block {
    let levels: Vec<f64> = modes.iter().map(|i| 2.0 * cfg.b * i.q as f64).collect();
    let n = modes.len();
    let matrix = ComplexMatrix::from_fn(n, n, |i, k| {
        let d = if i == k { levels[i] } else { 0.0 };
        Complex64::new(d, 0.0) + coupling * gram[(i, k)]
    });
    Block {
        m,
        modes,
        gram,
        levels,
        matrix,
    }
}

/// Radial profiles give one block per angular momentum m ∈ [−q_max, j_max];
/// other profiles give a single block over every retained mode.
pub fn build_hamiltonian(cfg: &LandauConfig, pot: &PotentialSpec) -> Result<Hamiltonian> {
    cfg.validate()?;
    pot.validate()?;
    let coupling = pot.coupling();
    let blocks = if pot.profile.is_radial() {
        let ms: Vec<i64> = cfg.block_range().collect();
        par::try_map_range(ms.len(), |i| {
            let (modes, gram) = radial_block(cfg, &pot.profile, ms[i])?;
            Ok::<_, Error>(assemble(cfg, coupling, Some(ms[i]), modes, gram))
        })?
    } else {
        let modes = cfg.modes();
        let gram = galerkin_general(cfg, &pot.profile, &modes)?;
        vec![assemble(cfg, coupling, None, modes, gram)]
    };
    Ok(Hamiltonian {
        cfg: *cfg,
        coupling,
        sign_j: pot.sign_j,
        alpha: pot.alpha,
        v_sup: pot.profile.sup_norm(),
        blocks,
    })
}

/// Unblocked assembly over every retained mode by the general polar
/// quadrature, used to cross-check the block decomposition.
pub fn build_unblocked(cfg: &LandauConfig, pot: &PotentialSpec) -> Result<Hamiltonian> {
    pot.validate()?;
    let coupling = pot.coupling();
    let modes = cfg.modes();
    let gram = galerkin_general(cfg, &pot.profile, &modes)?;
    Ok(Hamiltonian {
        cfg: *cfg,
        coupling,
        sign_j: pot.sign_j,
        alpha: pot.alpha,
        v_sup: pot.profile.sup_norm(),
        blocks: vec![assemble(cfg, coupling, None, modes, gram)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub lambda: Complex64,
    /// Λ_q − λ for the spectrum's analysis level.
    pub k: Complex64,
    pub block: Option<i64>,
    pub multiplicity: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    pub b: f64,
    pub level_q: usize,
    pub v_sup: f64,
    pub entries: Vec<SpectrumEntry>,
}

impl ComplexSpectrum {
    /// Same entries with k measured from level q.
    pub fn relative_to(&self, q: usize) -> Self {
        let lq = 2.0 * self.b * q as f64;
        let mut out = self.clone();
        out.level_q = q;
        for e in &mut out.entries {
            e.k = Complex64::new(lq, 0.0) - e.lambda;
        }
        out
    }

    /// Σ multiplicity-weighted entries, i.e. the entry count.
    pub fn total(&self) -> usize {
        self.entries.len()
    }
}

/// Union of the block spectra, blocks in order, each block's values sorted
/// by (Re, Im). Multiplicities cluster across blocks within 1e-7·2b.
pub fn discrete_spectrum(h: &Hamiltonian, level_q: usize, tol: f64) -> Result<ComplexSpectrum> {
    let lq = landau_level(level_q, h.cfg.b)?;
    let results = par::try_map_range(h.blocks.len(), |i| eig_general(&h.blocks[i].matrix, tol))?;
    let mut entries = Vec::with_capacity(h.dim());
    for (blk, res) in h.blocks.iter().zip(results) {
        for (&lambda, &residual) in res.values.iter().zip(&res.residuals) {
            entries.push(SpectrumEntry {
                lambda,
                k: Complex64::new(lq, 0.0) - lambda,
                block: blk.m,
                multiplicity: 1,
                residual,
            });
        }
    }
    let values: Vec<Complex64> = entries.iter().map(|e| e.lambda).collect();
    let sizes = cluster_sizes(&values, CLUSTER_RADIUS * h.cfg.gap());
    for (e, s) in entries.iter_mut().zip(sizes) {
        e.multiplicity = s;
    }
    Ok(ComplexSpectrum {
        b: h.cfg.b,
        level_q,
        v_sup: h.v_sup,
        entries,
    })
}

/// |k| at or below this is an unperturbed remnant of the level.
pub fn zero_threshold(v_sup: f64) -> f64 {
    1e-10f64.max(1e-8 * v_sup)
}

/// Entries with threshold < |Λ_q − λ| < r0.
pub fn cluster_near_level(spec: &ComplexSpectrum, q: usize, r0: f64) -> Result<ComplexSpectrum> {
    let gap = 2.0 * spec.b;
    if !(r0 > 0.0 && r0 < gap) {
        return Err(Error::Domain(format!("cluster radius r0 = {r0} must lie in (0, 2b = {gap})")));
    }
    let thr = zero_threshold(spec.v_sup);
    let mut out = spec.relative_to(q);
    out.entries.retain(|e| {
        let a = e.k.norm();
        a > thr && a < r0
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec {
    pub alpha: f64,
    pub sign_j: i32,
    pub delta: f64,
    pub r: f64,
    pub r0: f64,
}

impl SectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < self.r0) {
            return Err(Error::Parameter(format!("sector needs 0 < r < r0, got r = {}, r0 = {}", self.r, self.r0)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Parameter(format!("sector slope δ = {} must be positive", self.delta)));
        }
        Ok(())
    }

    /// z = −J·k·e^{−iα}, the point the sector is tested on.
    pub fn rotate(&self, k: Complex64) -> Complex64 {
        -f64::from(self.sign_j) * k * Complex64::from_polar(1.0, -self.alpha)
    }
}

/// k ∈ ∓e^{iα}C_δ(r, r0) for J = ±1.
pub fn sector_test(k: Complex64, sec: &SectorSpec) -> bool {
    let z = sec.rotate(k);
    z.re >= sec.r && z.re <= sec.r0 && z.im.abs() <= sec.delta * z.re
}

/// Σ multiplicity over entries with r < |Λ_q − λ| < r0.
pub fn annulus_count(spec: &ComplexSpectrum, q: usize, r: f64, r0: f64) -> usize {
    let lq = 2.0 * spec.b * q as f64;
    spec.entries
        .iter()
        .filter(|e| {
            let a = (Complex64::new(lq, 0.0) - e.lambda).norm();
            a > r && a < r0
        })
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub inside: usize,
    pub outside: usize,
    /// max |arg(−J·k·e^{−iα})| over the cluster.
    pub worst_angle: f64,
}

pub fn localization_report(spec: &ComplexSpectrum, sec: &SectorSpec) -> LocalizationReport {
    let mut rep = LocalizationReport {
        inside: 0,
        outside: 0,
        worst_angle: 0.0,
    };
    for e in &spec.entries {
        if sector_test(e.k, sec) {
            rep.inside += 1;
        } else {
            rep.outside += 1;
        }
        rep.worst_angle = rep.worst_angle.max(sec.rotate(e.k).arg().abs());
    }
    rep
}

/// Largest violation of the per-block numerical-range strips and of the
/// global strip Re λ ∈ [−‖V‖, 2b·q_max + ‖V‖], |Im λ| ≤ ‖V‖·|sin α|.
pub fn bendixson_violation(h: &Hamiltonian, spec: &ComplexSpectrum) -> Result<f64> {
    let bounds = par::try_map_range(h.blocks.len(), |i| bendixson_bounds(&h.blocks[i].matrix, 1e-9))?;
    let mut worst: f64 = 0.0;
    let mut start = 0;
    for (blk, ((re_lo, re_hi), (im_lo, im_hi))) in h.blocks.iter().zip(bounds) {
        let slack = 1e-9 * blk.matrix.norm().max(1.0);
        for e in &spec.entries[start..start + blk.modes.len()] {
            let l = e.lambda;
            worst = worst
                .max(re_lo - slack - l.re)
                .max(l.re - re_hi - slack)
                .max(im_lo - slack - l.im)
                .max(l.im - im_hi - slack);
        }
        start += blk.modes.len();
    }
    let v = h.v_sup;
    let top = 2.0 * h.cfg.b * h.cfg.q_max as f64 + v;
    let im_bound = v * h.alpha.sin().abs();
    let slack = 1e-9 * (top + 1.0);
    for e in &spec.entries {
        let l = e.lambda;
        worst = worst
            .max(-v - slack - l.re)
            .max(l.re - top - slack)
            .max(l.im.abs() - im_bound - slack);
    }
    Ok(worst.max(0.0))
}

/// max |λ_general − λ_hermitian| over blocks, for α = 0 runs.
pub fn self_adjoint_deviation(h: &Hamiltonian, spec: &ComplexSpectrum) -> Result<f64> {
    let herm = par::try_map_range(h.blocks.len(), |i| eig_hermitian(&h.blocks[i].matrix, 1e-9))?;
    let mut worst: f64 = 0.0;
    let mut start = 0;
    for (blk, res) in h.blocks.iter().zip(herm) {
        let mut gen: Vec<Complex64> = spec.entries[start..start + blk.modes.len()].iter().map(|e| e.lambda).collect();
        gen.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (g, hv) in gen.iter().zip(&res.values) {
            worst = worst.max((g - hv).norm());
        }
        start += blk.modes.len();
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sector_examples() {
        let sec = SectorSpec {
            alpha: 0.0,
            sign_j: -1,
            delta: 0.5,
            r: 0.01,
            r0: 0.3,
        };
        assert!(sector_test(c(0.1, 0.0), &sec));
        assert!(!sector_test(c(0.1, 0.06), &sec));
        assert!(!sector_test(c(-0.1, 0.0), &sec));
    }

    #[test]
    fn zero_potential_gives_levels() {
        let cfg = LandauConfig::new(1.5, 3, 6).unwrap();
        let pot = PotentialSpec::new(0.3, -1, Profile::Constant { value: 0.0 });
        let h = build_hamiltonian(&cfg, &pot).unwrap();
        let spec = discrete_spectrum(&h, 1, 1e-10).unwrap();
        assert_eq!(spec.total(), 4 * 7);
        for e in &spec.entries {
            let q = (e.lambda.re / 3.0).round();
            assert_eq!(e.lambda, c(3.0 * q, 0.0));
            assert_eq!(e.multiplicity, 7);
        }
        assert!(cluster_near_level(&spec, 1, 0.9).unwrap().entries.is_empty());
        assert!(matches!(cluster_near_level(&spec, 1, 3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn single_mode_is_scalar() {
        let cfg = LandauConfig::new(1.0, 0, 0).unwrap();
        let pot = PotentialSpec::new(PI / 3.0, -1, Profile::disk(1.0, 0.2));
        let h = build_hamiltonian(&cfg, &pot).unwrap();
        let s = h.blocks[0].gram[(0, 0)].re;
        assert!((s - 0.2 * (1.0 - (-0.5f64).exp())).abs() < 1e-13);
        let spec = discrete_spectrum(&h, 0, 1e-10).unwrap();
        assert!((spec.entries[0].lambda - pot.coupling() * s).norm() < 1e-15);
        assert_eq!(cluster_near_level(&spec, 0, 0.5).unwrap().entries.len(), 1);
    }

    #[test]
    fn hermitian_case() {
        let cfg = LandauConfig::new(1.0, 2, 8).unwrap();
        let pot = PotentialSpec::new(0.0, -1, Profile::power(5.0, 4.0));
        let h = build_hamiltonian(&cfg, &pot).unwrap();
        for b in &h.blocks {
            assert!(b.matrix.hermitian_deviation() <= 1e-12);
        }
        let spec = discrete_spectrum(&h, 1, 1e-10).unwrap();
        assert!(spec.entries.iter().all(|e| e.lambda.im.abs() <= 1e-10));
        assert!(self_adjoint_deviation(&h, &spec).unwrap() < 1e-10);
        assert_eq!(bendixson_violation(&h, &spec).unwrap(), 0.0);
        let cl = cluster_near_level(&spec, 1, 0.6).unwrap();
        assert!(cl.entries.iter().all(|e| e.k.re > 0.0));
    }

    #[test]
    fn annulus_and_localization() {
        let spec = ComplexSpectrum {
            b: 1.0,
            level_q: 1,
            v_sup: 1.0,
            entries: [0.05, 0.15]
                .iter()
                .map(|&a| SpectrumEntry {
                    lambda: c(2.0, 0.0) - Complex64::from_polar(a, 0.7),
                    k: Complex64::from_polar(a, 0.7),
                    block: Some(0),
                    multiplicity: 1,
                    residual: 0.0,
                })
                .collect(),
        };
        assert_eq!(annulus_count(&spec, 1, 0.1, 0.2), 1);
        let sec = SectorSpec {
            alpha: 0.7,
            sign_j: -1,
            delta: 0.1,
            r: 0.01,
            r0: 0.3,
        };
        let rep = localization_report(&spec, &sec);
        assert_eq!((rep.inside, rep.outside), (2, 0));
        assert!(rep.worst_angle < 1e-12);
    }
}
