//! Weighted resolvent T(λ) = e^{iα}J·G(H₀ − λ)⁻¹G with G = |V|^{1/2} on the
//! truncation, its split at a level, determinants, winding-number indices,
//! characteristic values, and the invertibility check on 𝒜_q′(0)Π_q.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::BasisIndex;
use crate::error::{Error, Result};
use crate::linalg::{
    det_lu, eig_general, eig_hermitian, hermitian_eigenvalues, hermitian_sqrt, singular_values, solve, ComplexMatrix,
};
use crate::par;
use crate::spectrum::Hamiltonian;

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Numerical kernel threshold defining Π_q.
pub const KERNEL_THRESHOLD: f64 = 1e-10;
/// Smallest singular value above which I − e^{iα}𝒜_q′(0)Π_q counts as invertible.
pub const INVERTIBLE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone)]
struct BsBlock {
    m: Option<i64>,
    modes: Vec<BasisIndex>,
    levels: Vec<f64>,
    g: ComplexMatrix,
    gram: ComplexMatrix,
}

/// Precomputed square-root factors of every block of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct BsSystem {
    pub b: f64,
    pub q_max: usize,
    pub coupling: C64,
    pub sign_j: i32,
    blocks: Vec<BsBlock>,
}

#[derive(Debug, Clone)]
pub struct Split {
    /// e^{iα}J·G p_q G / k.
    pub singular: ComplexMatrix,
    /// 𝒜_q(k) = e^{iα}J·G Σ_{q′≠q} p_{q′}(H₀ − Λ_q + k)⁻¹ G.
    pub regular: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct BSOperator {
    pub k: C64,
    pub level_q: usize,
    pub matrix: ComplexMatrix,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    /// ‖singular + regular − T‖ / ‖T‖.
    pub reconstruction_error: f64,
    /// Finite-difference versus analytic d𝒜_q/dk, relative to the analytic norm.
    pub derivative_error: f64,
    /// Max deviation between the nonzero spectra of G p_q G and p_q|V|p_q.
    pub spectral_identity_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsCheck {
    pub min_dist_to_minus_one: f64,
    pub det_value: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub smallest_singular_value: f64,
    pub invertible: bool,
    /// Total dimension of the numerical kernel Π_q.
    pub kernel_dim: usize,
    pub factor: C64,
}

impl BsSystem {
    pub fn new(h: &Hamiltonian) -> Result<Self> {
        let blocks = par::try_map_range(h.blocks.len(), |i| {
            let blk = &h.blocks[i];
            let g = hermitian_sqrt(&blk.gram.hermitian_part(), 1e-8)?;
            Ok::<_, Error>(BsBlock {
                m: blk.m,
                modes: blk.modes.clone(),
                levels: blk.levels.clone(),
                g,
                gram: blk.gram.clone(),
            })
        })?;
        Ok(Self {
            b: h.cfg.b,
            q_max: h.cfg.q_max,
            coupling: h.coupling,
            sign_j: h.sign_j,
            blocks,
        })
    }

    pub fn level(&self, q: usize) -> f64 {
        2.0 * self.b * q as f64
    }

    /// λ_q(k) = Λ_q − k.
    pub fn lambda(&self, q: usize, k: C64) -> C64 {
        C64::new(self.level(q), 0.0) - k
    }

    fn check_pole(&self, lambda: C64) -> Result<()> {
        for q in 0..=self.q_max {
            let l = self.level(q);
            if (lambda - l).norm() <= 1e-14 * (1.0 + l) {
                return Err(Error::Pole { level: q });
            }
        }
        Ok(())
    }

    /// Block labels in order.
    pub fn block_labels(&self) -> Vec<Option<i64>> {
        self.blocks.iter().map(|b| b.m).collect()
    }

    /// c·G diag(w) G.
    fn sandwich(&self, blk: &BsBlock, w: &[C64], c: C64) -> ComplexMatrix {
        let n = blk.levels.len();
        let g = &blk.g;
        ComplexMatrix::from_fn(n, n, |i, k| {
            let mut acc = ZERO;
            for (l, wl) in w.iter().enumerate() {
                if *wl != ZERO {
                    acc += g[(i, l)] * *wl * g[(l, k)];
                }
            }
            c * acc
        })
    }

    fn t_block(&self, blk: &BsBlock, lambda: C64) -> ComplexMatrix {
        let w: Vec<C64> = blk.levels.iter().map(|&d| ONE / (C64::new(d, 0.0) - lambda)).collect();
        self.sandwich(blk, &w, self.coupling)
    }

    /// T(λ) on the whole truncation, blocks in order.
    pub fn t_full(&self, lambda: C64) -> Result<ComplexMatrix> {
        self.check_pole(lambda)?;
        let parts: Vec<ComplexMatrix> = self.blocks.iter().map(|b| self.t_block(b, lambda)).collect();
        let refs: Vec<&ComplexMatrix> = parts.iter().collect();
        Ok(ComplexMatrix::block_diagonal(&refs))
    }

    fn level_mask(&self, blk: &BsBlock, q: usize) -> Vec<bool> {
        blk.modes.iter().map(|m| m.q == q).collect()
    }

    /// T(λ_q(k)) with its split into the 1/k part on level q and the regular part.
    pub fn weighted_resolvent(&self, k: C64, q: usize) -> Result<BSOperator> {
        if q > self.q_max {
            return Err(Error::Dimension(format!("level {q} exceeds q_max = {}", self.q_max)));
        }
        let lambda = self.lambda(q, k);
        let matrix = self.t_full(lambda)?;
        let lq = self.level(q);
        let mut sing = Vec::new();
        let mut reg = Vec::new();
        for blk in &self.blocks {
            let mask = self.level_mask(blk, q);
            let ws: Vec<C64> = mask.iter().map(|&on| if on { ONE / k } else { ZERO }).collect();
            let wr: Vec<C64> = blk
                .levels
                .iter()
                .zip(&mask)
                .map(|(&d, &on)| if on { ZERO } else { ONE / (C64::new(d - lq, 0.0) + k) })
                .collect();
            sing.push(self.sandwich(blk, &ws, self.coupling));
            reg.push(self.sandwich(blk, &wr, self.coupling));
        }
        let diag = |v: &[ComplexMatrix]| ComplexMatrix::block_diagonal(&v.iter().collect::<Vec<_>>());
        Ok(BSOperator {
            k,
            level_q: q,
            matrix,
            split: Some(Split {
                singular: diag(&sing),
                regular: diag(&reg),
            }),
        })
    }

    /// d𝒜_q/dk = −e^{iα}J·G Σ_{q′≠q} p_{q′}(H₀ − Λ_q + k)⁻² G.
    pub fn regular_derivative(&self, k: C64, q: usize) -> ComplexMatrix {
        let lq = self.level(q);
        let parts: Vec<ComplexMatrix> = self
            .blocks
            .iter()
            .map(|blk| {
                let w: Vec<C64> = blk
                    .modes
                    .iter()
                    .zip(&blk.levels)
                    .map(|(m, &d)| {
                        if m.q == q {
                            ZERO
                        } else {
                            let x = C64::new(d - lq, 0.0) + k;
                            -ONE / (x * x)
                        }
                    })
                    .collect();
                self.sandwich(blk, &w, self.coupling)
            })
            .collect();
        ComplexMatrix::block_diagonal(&parts.iter().collect::<Vec<_>>())
    }

    /// Reconstruction, analyticity of the regular part, and the spectral
    /// identity between G p_q G and p_q|V|p_q.
    pub fn singular_split_check(&self, op: &BSOperator) -> Result<SplitReport> {
        let split = op
            .split
            .as_ref()
            .ok_or_else(|| Error::Consistency("operator carries no split".into()))?;
        let norm = op.matrix.norm().max(f64::MIN_POSITIVE);
        let recon = split.singular.add(&split.regular)?.sub(&op.matrix)?.norm() / norm;
        if recon > 1e-12 {
            return Err(Error::Consistency(format!(
                "singular + regular differs from T by {recon:e} (relative)"
            )));
        }
        let (k, q) = (op.k, op.level_q);
        let h = 1e-4 * k.norm().max(1e-3);
        let step = C64::new(h, 0.0);
        let plus = self.weighted_resolvent(k + step, q)?.split.unwrap().regular;
        let minus = self.weighted_resolvent(k - step, q)?.split.unwrap().regular;
        let fd = plus.sub(&minus)?.scale(C64::new(0.5 / h, 0.0));
        let exact = self.regular_derivative(k, q);
        let derivative_error = fd.sub(&exact)?.norm() / exact.norm().max(1e-300);
        let spectral_identity_error = self.spectral_identity_error(q)?;
        Ok(SplitReport {
            reconstruction_error: recon,
            derivative_error,
            spectral_identity_error,
        })
    }

    /// Nonzero eigenvalues of G p_q G against those of p_q|V|p_q.
    pub fn spectral_identity_error(&self, q: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for blk in &self.blocks {
            let mask = self.level_mask(blk, q);
            let w: Vec<C64> = mask.iter().map(|&on| if on { ONE } else { ZERO }).collect();
            let gpg = self.sandwich(blk, &w, ONE);
            let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
            let pvp = ComplexMatrix::from_fn(idx.len(), idx.len(), |a, c| blk.gram[(idx[a], idx[c])]);
            let scale = blk.gram.max_abs().max(f64::MIN_POSITIVE);
            let cut = 1e-9 * scale;
            let mut e1: Vec<f64> = hermitian_eigenvalues(&gpg.hermitian_part(), 1e-8)?
                .into_iter()
                .filter(|&v| v > cut)
                .collect();
            let mut e2: Vec<f64> = hermitian_eigenvalues(&pvp.hermitian_part(), 1e-8)?
                .into_iter()
                .filter(|&v| v > cut)
                .collect();
            e1.sort_by(f64::total_cmp);
            e2.sort_by(f64::total_cmp);
            if e1.len() != e2.len() {
                let n = e1.len().min(e2.len());
                let extra = e1[..e1.len() - n].iter().chain(&e2[..e2.len() - n]).fold(0.0f64, |a, &v| a.max(v));
                worst = worst.max(extra);
                e1 = e1[e1.len() - n..].to_vec();
                e2 = e2[e2.len() - n..].to_vec();
            }
            for (a, c) in e1.iter().zip(&e2) {
                worst = worst.max((a - c).abs());
            }
        }
        Ok(worst)
    }

    /// Split at the spectral cutoff 1_{(s/2,∞)}(B_q), B_q = G p_q G: returns
    /// the relative reconstruction error of (cutoff part + remainder).
    pub fn cutoff_split_error(&self, k: C64, q: usize, s: f64) -> Result<f64> {
        let op = self.weighted_resolvent(k, q)?;
        let mut highs = Vec::new();
        for blk in &self.blocks {
            let mask = self.level_mask(blk, q);
            let w: Vec<C64> = mask.iter().map(|&on| if on { ONE } else { ZERO }).collect();
            let bq = self.sandwich(blk, &w, ONE).hermitian_part();
            let eig = eig_hermitian(&bq, 1e-8)?;
            let v = eig.vectors.expect("vectors");
            let n = bq.n_rows();
            let keep: Vec<usize> = (0..n).filter(|&i| eig.values[i].re > 0.5 * s).collect();
            let high = ComplexMatrix::from_fn(n, n, |i, c| {
                keep.iter()
                    .map(|&l| v[(i, l)] * eig.values[l].re * v[(c, l)].conj())
                    .sum::<C64>()
            });
            highs.push(high.scale(self.coupling / k));
        }
        let high = ComplexMatrix::block_diagonal(&highs.iter().collect::<Vec<_>>());
        let rest = op.matrix.sub(&high)?;
        Ok(high.add(&rest)?.sub(&op.matrix)?.norm() / op.matrix.norm().max(f64::MIN_POSITIVE))
    }

    /// min_i |1 + μ_i(T(λ))| and det(I + T(λ)).
    pub fn bs_check(&self, lambda: C64) -> Result<BsCheck> {
        self.check_pole(lambda)?;
        let per = par::try_map_range(self.blocks.len(), |i| {
            let t = self.t_block(&self.blocks[i], lambda);
            let n = t.n_rows();
            let ipt = ComplexMatrix::identity(n).add(&t)?;
            let det = det_lu(&ipt)?;
            let eig = eig_general(&t, 1e-6)?;
            let md = eig.values.iter().map(|mu| (ONE + mu).norm()).fold(f64::INFINITY, f64::min);
            Ok::<_, Error>((md, det))
        })?;
        let mut min_dist = f64::INFINITY;
        let mut det = ONE;
        for (md, d) in per {
            min_dist = min_dist.min(md);
            det *= d;
        }
        Ok(BsCheck {
            min_dist_to_minus_one: min_dist,
            det_value: det,
        })
    }

    fn active_blocks(&self) -> impl Iterator<Item = &BsBlock> {
        self.blocks.iter().filter(|b| b.g.max_abs() > 0.0)
    }

    /// Complex logarithm of det(I + T(λ_q(k))) as a sum of block logarithms.
    pub fn ln_det(&self, q: usize, k: C64) -> Result<C64> {
        let lambda = self.lambda(q, k);
        self.check_pole(lambda)?;
        let mut acc = ZERO;
        for blk in self.active_blocks() {
            let t = self.t_block(blk, lambda);
            let d = det_lu(&ComplexMatrix::identity(t.n_rows()).add(&t)?)?;
            acc += d.ln();
        }
        Ok(acc)
    }

    /// Winding of det(I + T(λ_q(k))) along a circle, summed over block
    /// factors so that the near-zero test applies to each factor separately.
    pub fn det_index(&self, q: usize, gamma: &ContourSpec) -> Result<i64> {
        let active: Vec<&BsBlock> = self.active_blocks().collect();
        let per = par::try_map_range(active.len(), |i| {
            let blk = active[i];
            index_contour_log(
                |k| {
                    let lambda = self.lambda(q, k);
                    self.check_pole(lambda)?;
                    let t = self.t_block(blk, lambda);
                    Ok(det_lu(&ComplexMatrix::identity(t.n_rows()).add(&t)?)?.ln())
                },
                gamma,
            )
        })?;
        Ok(per.into_iter().sum())
    }

    /// d/dk ln det(I + T(λ_q(k))) = tr((I + T)⁻¹ dT/dk).
    pub fn log_derivative(&self, q: usize, k: C64) -> Result<C64> {
        let lambda = self.lambda(q, k);
        self.check_pole(lambda)?;
        let mut acc = ZERO;
        for blk in self.active_blocks() {
            let t = self.t_block(blk, lambda);
            let n = t.n_rows();
            let w: Vec<C64> = blk
                .levels
                .iter()
                .map(|&d| {
                    let x = C64::new(d, 0.0) - lambda;
                    -ONE / (x * x)
                })
                .collect();
            let dt = self.sandwich(blk, &w, self.coupling);
            let x = solve(&ComplexMatrix::identity(n).add(&t)?, &dt)?;
            acc += x.trace();
        }
        Ok(acc)
    }

    /// 𝒜_q′(0) = −J·G Σ_{q′≠q} p_{q′}(H₀ − Λ_q)⁻¹ G per block.
    fn a_prime(&self, blk: &BsBlock, q: usize) -> ComplexMatrix {
        let lq = self.level(q);
        let w: Vec<C64> = blk
            .modes
            .iter()
            .zip(&blk.levels)
            .map(|(m, &d)| if m.q == q { ZERO } else { C64::new(1.0 / (d - lq), 0.0) })
            .collect();
        self.sandwich(blk, &w, C64::new(-f64::from(self.sign_j), 0.0))
    }

    /// Projector onto the numerical kernel of G p_q G.
    fn kernel_projector(&self, blk: &BsBlock, q: usize) -> Result<(ComplexMatrix, usize)> {
        let mask = self.level_mask(blk, q);
        let w: Vec<C64> = mask.iter().map(|&on| if on { ONE } else { ZERO }).collect();
        let bq = self.sandwich(blk, &w, ONE).hermitian_part();
        let n = bq.n_rows();
        let eig = eig_hermitian(&bq, 1e-8)?;
        let v = eig.vectors.expect("vectors");
        let ker: Vec<usize> = (0..n).filter(|&i| eig.values[i].re.abs() < KERNEL_THRESHOLD).collect();
        let p = ComplexMatrix::from_fn(n, n, |i, c| ker.iter().map(|&l| v[(i, l)] * v[(c, l)].conj()).sum::<C64>());
        Ok((p, ker.len()))
    }

    /// Smallest singular value of I − e^{iα}𝒜_q′(0)Π_q.
    pub fn assumption_check(&self, q: usize, alpha: f64) -> Result<AssumptionReport> {
        self.assumption_check_with_factor(q, C64::from_polar(1.0, alpha))
    }

    /// As [`Self::assumption_check`] with e^{iα} replaced by `factor`.
    pub fn assumption_check_with_factor(&self, q: usize, factor: C64) -> Result<AssumptionReport> {
        let per = par::try_map_range(self.blocks.len(), |i| {
            let blk = &self.blocks[i];
            let (pi, dim) = self.kernel_projector(blk, q)?;
            let ap = self.a_prime(blk, q).matmul(&pi)?;
            let n = ap.n_rows();
            let m = ComplexMatrix::identity(n).sub(&ap.scale(factor))?;
            let s = singular_values(&m)?;
            Ok::<_, Error>((s.last().copied().unwrap_or(1.0), dim))
        })?;
        let smallest = per.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let smallest = if smallest.is_finite() { smallest } else { 1.0 };
        Ok(AssumptionReport {
            smallest_singular_value: smallest,
            invertible: smallest > INVERTIBLE_THRESHOLD,
            kernel_dim: per.iter().map(|p| p.1).sum(),
            factor,
        })
    }

    /// Eigenvalues of 𝒜_q′(0)Π_q over all blocks.
    pub fn a_prime_pi_eigenvalues(&self, q: usize) -> Result<Vec<C64>> {
        let per = par::try_map_range(self.blocks.len(), |i| {
            let blk = &self.blocks[i];
            let (pi, _) = self.kernel_projector(blk, q)?;
            let ap = self.a_prime(blk, q).matmul(&pi)?;
            Ok::<_, Error>(eig_general(&ap, 1e-6)?.values)
        })?;
        Ok(per.into_iter().flatten().collect())
    }

    /// Max entrywise deviation between T(λ_q(k0)) and its Cauchy-integral
    /// reconstruction (circle mean) on a circle of the given radius.
    pub fn cauchy_check(&self, q: usize, k0: C64, radius: f64, nodes: usize) -> Result<f64> {
        let direct = self.t_full(self.lambda(q, k0))?;
        let mut acc = ComplexMatrix::zeros(direct.n_rows(), direct.n_cols());
        for i in 0..nodes {
            let k = k0 + C64::from_polar(radius, 2.0 * PI * i as f64 / nodes as f64);
            acc = acc.add(&self.t_full(self.lambda(q, k))?)?;
        }
        let mean = acc.scale(C64::new(1.0 / nodes as f64, 0.0));
        Ok(mean.sub(&direct)?.max_abs())
    }

    /// Distance from k to the nearest pole of k ↦ T(λ_q(k)).
    pub fn pole_distance(&self, q: usize, k: C64) -> f64 {
        (0..=self.q_max)
            .map(|p| (k - C64::new(self.level(q) - self.level(p), 0.0)).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// ∏(1 + μ_i)·exp(Σ_{k=1}^{⌈p⌉−1} (−μ_i)^k / k) over the eigenvalues of K.
pub fn regularized_det(kmat: &ComplexMatrix, p: f64) -> Result<C64> {
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("regularization order p = {p} must be ≥ 1")));
    }
    let order = p.ceil() as u32;
    let eig = eig_general(kmat, 1e-8)?;
    let mut det = ONE;
    for mu in eig.values {
        let mut corr = ZERO;
        let mut pow = ONE;
        for k in 1..order {
            pow *= -mu;
            corr += pow / k as f64;
        }
        det *= (ONE + mu) * corr.exp();
    }
    Ok(det)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub center: C64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn circle(center: C64, radius: f64) -> Self {
        Self {
            center,
            radius,
            nodes: START_CONTOUR_NODES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Parameter(format!("contour radius {} must be positive", self.radius)));
        }
        if self.nodes < 16 || !self.nodes.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "contour nodes {} must be a power of two ≥ 16",
                self.nodes
            )));
        }
        Ok(())
    }
}

pub const START_CONTOUR_NODES: usize = 64;
pub const MAX_CONTOUR_NODES: usize = 65536;
const NEAR_ZERO_LN: f64 = -29.933_606_208_922_594; // ln 1e-13

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Winding number of a scalar function along a circle.
pub fn index_contour(f: impl Fn(C64) -> C64 + Sync, gamma: &ContourSpec) -> Result<i64> {
    index_contour_log(|z| Ok(f(z).ln()), gamma)
}

/// Winding number from a complex logarithm ln f (only Im mod 2π and Re are
/// used), by phase unwrapping with node doubling.
pub fn index_contour_log(lnf: impl Fn(C64) -> Result<C64> + Sync, gamma: &ContourSpec) -> Result<i64> {
    gamma.validate()?;
    let point = |i: usize, n: usize| gamma.center + C64::from_polar(gamma.radius, 2.0 * PI * i as f64 / n as f64);
    let mut n = gamma.nodes;
    let mut samples = par::try_map_range(n, |i| lnf(point(i, n)))?;
    let mut prev: Option<i64> = None;
    loop {
        let (mut lo, mut hi, mut at) = (f64::INFINITY, f64::NEG_INFINITY, 0);
        for (i, s) in samples.iter().enumerate() {
            let re = if s.re.is_nan() { f64::NEG_INFINITY } else { s.re };
            if re < lo {
                lo = re;
                at = i;
            }
            hi = hi.max(re);
        }
        if !(lo - hi > NEAR_ZERO_LN) || samples.iter().any(|s| !s.im.is_finite()) {
            return Err(Error::ContourThroughZero {
                min_abs: lo.exp(),
                max_abs: hi.exp(),
                at: point(at, n),
            });
        }
        let total: f64 = (0..n)
            .map(|i| wrap(samples[(i + 1) % n].im - samples[i].im))
            .sum::<f64>()
            / (2.0 * PI);
        let nearest = total.round();
        let near = (total - nearest).abs() < 1e-3;
        if near && prev == Some(nearest as i64) {
            return Ok(nearest as i64);
        }
        prev = near.then_some(nearest as i64);
        if 2 * n > MAX_CONTOUR_NODES {
            return Err(Error::Resolution { nodes: n, winding: total });
        }
        let odd = par::try_map_range(n, |i| lnf(point(2 * i + 1, 2 * n)))?;
        let mut merged = Vec::with_capacity(2 * n);
        for (e, o) in samples.into_iter().zip(odd) {
            merged.push(e);
            merged.push(o);
        }
        samples = merged;
        n *= 2;
    }
}

/// A located characteristic value k with its contour index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharValue {
    pub k: C64,
    pub multiplicity: i64,
    /// Radius of the circle used for the index.
    pub radius: f64,
}

/// A polar cell [ρ_a, ρ_b] × [θ_a, θ_b] of the k-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarCell {
    pub rho: (f64, f64),
    pub theta: (f64, f64),
    pub winding: i64,
}

impl PolarCell {
    fn center(&self) -> C64 {
        C64::from_polar((self.rho.0 * self.rho.1).sqrt(), 0.5 * (self.theta.0 + self.theta.1))
    }

    fn diameter(&self) -> f64 {
        (self.rho.1 - self.rho.0).max(self.rho.1 * (self.theta.1 - self.theta.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharValueReport {
    pub values: Vec<CharValue>,
    /// Cells whose refinement did not converge, reported instead of guessed.
    pub unresolved: Vec<PolarCell>,
    /// Index of the annulus boundary (outer minus inner circle).
    pub boundary_index: i64,
    /// Sum of the scan-cell windings.
    pub scan_total: i64,
    /// Angular offset applied to the scan grid (nonzero after a jitter).
    pub grid_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub radial: usize,
    pub angular: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            radial: 40,
            angular: 40,
        }
    }
}

const EDGE_MIN_DEPTH: u32 = 3;
const EDGE_MAX_DEPTH: u32 = 48;
const EDGE_MAX_STEP: f64 = 0.3;
const NEWTON_CELL: f64 = 1e-4;
const JITTER_ATTEMPTS: usize = 6;

struct Scanner<'a> {
    sys: &'a BsSystem,
    q: usize,
}

impl Scanner<'_> {
    fn ln_f(&self, k: C64) -> Result<C64> {
        let v = self.sys.ln_det(self.q, k)?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::ContourThroughZero {
                min_abs: 0.0,
                max_abs: 0.0,
                at: k,
            });
        }
        Ok(v)
    }

    /// Phase change of f along z(t), t ∈ [0, 1], by adaptive bisection.
    fn path_phase(&self, z: &dyn Fn(f64) -> C64, l0: C64, l1: C64) -> Result<f64> {
        self.segment(z, 0.0, 1.0, l0, l1, 0)
    }

    fn segment(&self, z: &dyn Fn(f64) -> C64, t0: f64, t1: f64, l0: C64, l1: C64, depth: u32) -> Result<f64> {
        let d = wrap(l1.im - l0.im);
        if depth >= EDGE_MIN_DEPTH && d.abs() < EDGE_MAX_STEP {
            return Ok(d);
        }
        if depth >= EDGE_MAX_DEPTH {
            return Err(Error::ContourThroughZero {
                min_abs: l0.re.min(l1.re).exp(),
                max_abs: l0.re.max(l1.re).exp(),
                at: z(0.5 * (t0 + t1)),
            });
        }
        let tm = 0.5 * (t0 + t1);
        let lm = self.ln_f(z(tm))?;
        Ok(self.segment(z, t0, tm, l0, lm, depth + 1)? + self.segment(z, tm, t1, lm, l1, depth + 1)?)
    }

    fn arc(&self, rho: f64, th0: f64, th1: f64, l0: C64, l1: C64) -> Result<f64> {
        self.path_phase(&|t| C64::from_polar(rho, th0 + t * (th1 - th0)), l0, l1)
    }

    fn ray(&self, th: f64, r0: f64, r1: f64, l0: C64, l1: C64) -> Result<f64> {
        self.path_phase(&|t| C64::from_polar(r0 + t * (r1 - r0), th), l0, l1)
    }

    fn winding_of(total_phase: f64) -> Result<i64> {
        let w = total_phase / (2.0 * PI);
        if (w - w.round()).abs() > 1e-2 {
            return Err(Error::Resolution { nodes: 0, winding: w });
        }
        Ok(w.round() as i64)
    }

    fn cell_winding(&self, rho: (f64, f64), th: (f64, f64)) -> Result<i64> {
        let corners = [
            C64::from_polar(rho.0, th.0),
            C64::from_polar(rho.1, th.0),
            C64::from_polar(rho.1, th.1),
            C64::from_polar(rho.0, th.1),
        ];
        let l: Vec<C64> = corners.iter().map(|&z| self.ln_f(z)).collect::<Result<_>>()?;
        let total = self.ray(th.0, rho.0, rho.1, l[0], l[1])? + self.arc(rho.1, th.0, th.1, l[1], l[2])?
            - self.ray(th.1, rho.0, rho.1, l[3], l[2])?
            - self.arc(rho.0, th.0, th.1, l[0], l[3])?;
        Self::winding_of(total)
    }

    /// Grid scan with shared edges; returns the cells with nonzero winding.
    fn scan(&self, r: f64, r0: f64, grid: ScanGrid, offset: f64) -> Result<Vec<PolarCell>> {
        let nr = grid.radial;
        let na = grid.angular;
        let rhos: Vec<f64> = (0..=nr).map(|i| r * (r0 / r).powf(i as f64 / nr as f64)).collect();
        let ths: Vec<f64> = (0..=na).map(|j| offset + 2.0 * PI * j as f64 / na as f64).collect();
        let vert = |i: usize, j: usize| C64::from_polar(rhos[i], ths[j % na]);
        let lv = par::try_map_range((nr + 1) * na, |p| self.ln_f(vert(p / na, p % na)))?;
        let lvert = |i: usize, j: usize| lv[i * na + j % na];
        // arcs: (i, j) for i in 0..=nr, j in 0..na; rays: (i, j) for i in 0..nr, j in 0..na
        let arcs = par::try_map_range((nr + 1) * na, |p| {
            let (i, j) = (p / na, p % na);
            self.arc(rhos[i], ths[j], ths[j + 1], lvert(i, j), lvert(i, j + 1))
        })?;
        let rays = par::try_map_range(nr * na, |p| {
            let (i, j) = (p / na, p % na);
            self.ray(ths[j], rhos[i], rhos[i + 1], lvert(i, j), lvert(i + 1, j))
        })?;
        let mut cells = Vec::new();
        for i in 0..nr {
            for j in 0..na {
                let total = rays[i * na + j] + arcs[(i + 1) * na + j]
                    - rays[i * na + (j + 1) % na]
                    - arcs[i * na + j];
                let w = Self::winding_of(total)?;
                if w != 0 {
                    cells.push(PolarCell {
                        rho: (rhos[i], rhos[i + 1]),
                        theta: (ths[j], ths[j + 1]),
                        winding: w,
                    });
                }
            }
        }
        Ok(cells)
    }

    /// Quadtree refinement of a cell down to Newton size.
    fn refine(&self, cell: PolarCell, out: &mut Vec<PolarCell>) -> Result<()> {
        if cell.diameter() <= NEWTON_CELL * cell.rho.1 {
            out.push(cell);
            return Ok(());
        }
        let rm = (cell.rho.0 * cell.rho.1).sqrt();
        let tm = 0.5 * (cell.theta.0 + cell.theta.1);
        let mut found = 0;
        for rho in [(cell.rho.0, rm), (rm, cell.rho.1)] {
            for th in [(cell.theta.0, tm), (tm, cell.theta.1)] {
                let w = self.cell_winding(rho, th)?;
                if w != 0 {
                    found += w;
                    self.refine(PolarCell { rho, theta: th, winding: w }, out)?;
                }
            }
        }
        if found != cell.winding {
            return Err(Error::Consistency(format!(
                "sub-cell windings sum to {found}, parent cell has {}",
                cell.winding
            )));
        }
        Ok(())
    }

    /// Modified Newton for a root of multiplicity w.
    fn newton(&self, cell: &PolarCell) -> Result<Option<C64>> {
        let mut k = cell.center();
        let w = cell.winding as f64;
        for _ in 0..60 {
            let ld = match self.sys.log_derivative(self.q, k) {
                Ok(v) => v,
                // landed exactly on the zero
                Err(Error::Singular { .. }) => break,
                Err(e) => return Err(e),
            };
            if !(ld.norm() > 0.0) || !ld.re.is_finite() {
                return Ok(None);
            }
            let step = w / ld;
            k -= step;
            if step.norm() <= 4.0 * f64::EPSILON * k.norm() {
                break;
            }
        }
        let c = cell.center();
        Ok(((k - c).norm() <= 3.0 * cell.diameter()).then_some(k))
    }
}

/// Zeros of k ↦ det(I + T(λ_q(k))) in the annulus r < |k| < r0, with
/// contour-index multiplicities.
pub fn characteristic_values(sys: &BsSystem, q: usize, r: f64, r0: f64, grid: ScanGrid) -> Result<CharValueReport> {
    if !(r > 0.0 && r < r0) {
        return Err(Error::Parameter(format!("annulus needs 0 < r < r0, got {r}, {r0}")));
    }
    let gap = 2.0 * sys.b;
    if sys.q_max > 0 && r0 >= gap {
        return Err(Error::Domain(format!("annulus radius r0 = {r0} reaches the next level at 2b = {gap}")));
    }
    let sc = Scanner { sys, q };
    let outer = sys.det_index(q, &ContourSpec::circle(ZERO, r0))?;
    let inner = sys.det_index(q, &ContourSpec::circle(ZERO, r))?;
    let boundary_index = outer - inner;

    let golden = 0.618_033_988_749_894_9;
    let mut attempt = 0;
    let (cells, offset) = loop {
        let offset = 2.0 * PI / grid.angular as f64 * ((golden * attempt as f64) % 1.0);
        match sc.scan(r, r0, grid, offset) {
            Ok(c) => break (c, offset),
            Err(Error::ContourThroughZero { .. }) | Err(Error::Resolution { .. }) if attempt + 1 < JITTER_ATTEMPTS => {
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let scan_total: i64 = cells.iter().map(|c| c.winding).sum();

    let leaves = par::try_map_range(cells.len(), |i| {
        let mut out = Vec::new();
        sc.refine(cells[i], &mut out)?;
        Ok::<_, Error>(out)
    })?;
    let leaves: Vec<PolarCell> = leaves.into_iter().flatten().collect();
    let roots = par::try_map_range(leaves.len(), |i| sc.newton(&leaves[i]))?;

    let mut unresolved = Vec::new();
    let mut found: Vec<C64> = Vec::new();
    for (cell, root) in leaves.iter().zip(roots) {
        match root {
            Some(k) if k.norm() > r && k.norm() < r0 => {
                if !found.iter().any(|f| (f - k).norm() <= 1e-9 * r0) {
                    found.push(k);
                }
            }
            Some(_) => {}
            None => unresolved.push(*cell),
        }
    }
    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let values = par::try_map_range(found.len(), |i| {
        let k = found[i];
        let nearest = found
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, f)| (f - k).norm())
            .fold(f64::INFINITY, f64::min);
        let radius = 1e-3f64.min(0.45 * nearest).min(0.45 * k.norm());
        let multiplicity = sys.det_index(q, &ContourSpec::circle(k, radius))?;
        Ok::<_, Error>(CharValue { k, multiplicity, radius })
    })?;
    Ok(CharValueReport {
        values,
        unresolved,
        boundary_index,
        scan_total,
        grid_offset: offset,
    })
}
