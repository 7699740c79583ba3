//! Moment sums: the weighted global sum over the whole spectrum and the local
//! comparison of Σ|k|^p with the integral of the annulus counting function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::pairwise_sum;
use crate::spectrum::{ComplexSpectrum, SectorSpec};
use crate::toeplitz::{counting_query, CountingFunction};

/// Relative slack on the identity and sandwich checks.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: f64,
    pub global_sum: f64,
    /// Σ|k|^p over the cluster entries with r < |k| < r0.
    pub local_sum: f64,
    /// ∫_r^{r0} p s^{p−1} n(s, r0) ds, evaluated step by step.
    pub integral_form: f64,
    pub ratio: Option<f64>,
    /// |local_sum − integral_form − r^p·n(r, r0)| / local_sum.
    pub identity_error: f64,
    /// Σ μ^p with μ = Re(−J·k·e^{−iα}) over entries with μ > 0.
    pub mu_sum: f64,
    /// ∫_r^{r0} p s^{p−1} n_μ(s) ds for the μ-based counting function.
    pub mu_integral_form: f64,
    /// Σ|k|^p over the same entries as `mu_sum`.
    pub k_sum_in_sector: f64,
    /// Measured worst slope max |Im z|/Re z, z = −J·k·e^{−iα}.
    pub delta: f64,
    pub sandwich_holds: bool,
    /// Entries with μ ≤ 0, left out of the sandwich.
    pub excluded: usize,
    /// ∫_r^{r0} p s^{p−1} N_toeplitz(s) ds when a counting function is given.
    pub toeplitz_integral: Option<f64>,
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("moment exponent p = {p} must be ≥ 2")));
    }
    Ok(())
}

/// Σ dist(λ, {2bq : q ≤ q_max})^p / (1+|λ|)^{2p} over all entries.
pub fn lt_global_sum(spec: &ComplexSpectrum, q_max: usize, p: f64) -> Result<f64> {
    check_p(p)?;
    let terms: Vec<f64> = spec
        .entries
        .iter()
        .map(|e| {
            let d = (0..=q_max)
                .map(|q| (e.lambda - Complex64::new(2.0 * spec.b * q as f64, 0.0)).norm())
                .fold(f64::INFINITY, f64::min);
            d.powf(p) / (1.0 + e.lambda.norm()).powf(2.0 * p)
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// ∫_lo^hi p s^{p−1} n(s) ds for n(s) = #{a ∈ values : a > s}, values sorted
/// ascending and all inside (lo, hi).
fn step_integral(values: &[f64], lo: f64, p: f64) -> f64 {
    let n = values.len();
    let mut terms = Vec::with_capacity(n);
    let mut prev = lo.powf(p);
    for (i, &a) in values.iter().enumerate() {
        let cur = a.powf(p);
        terms.push((n - i) as f64 * (cur - prev));
        prev = cur;
    }
    pairwise_sum(&terms)
}

/// Local moments of a cluster (k measured from its level) over r < |k| < r0.
/// `global_sum` is taken over the cluster itself.
pub fn lt_local_comparison(
    cluster: &ComplexSpectrum,
    counting: Option<&CountingFunction>,
    sec: &SectorSpec,
    p: f64,
) -> Result<MomentReport> {
    check_p(p)?;
    sec.validate()?;
    let (r, r0) = (sec.r, sec.r0);
    let mut mods: Vec<f64> = cluster
        .entries
        .iter()
        .map(|e| e.k.norm())
        .filter(|&a| a > r && a < r0)
        .collect();
    mods.sort_by(f64::total_cmp);
    let pows: Vec<f64> = mods.iter().map(|a| a.powf(p)).collect();
    let local_sum = pairwise_sum(&pows);
    let integral_form = step_integral(&mods, r, p);
    let tail = r.powf(p) * mods.len() as f64;
    let identity_error = if local_sum > 0.0 {
        (local_sum - integral_form - tail).abs() / local_sum
    } else {
        (integral_form + tail).abs()
    };

    let mut mus = Vec::new();
    let mut ks = Vec::new();
    let mut delta: f64 = 0.0;
    let mut excluded = 0;
    for e in &cluster.entries {
        let a = e.k.norm();
        if !(a > r && a < r0) {
            continue;
        }
        let z = sec.rotate(e.k);
        if z.re <= 0.0 {
            excluded += 1;
            continue;
        }
        mus.push(z.re);
        ks.push(a.powf(p));
        delta = delta.max(z.im.abs() / z.re);
    }
    let mu_pows: Vec<f64> = mus.iter().map(|m| m.powf(p)).collect();
    let mu_sum = pairwise_sum(&mu_pows);
    let k_sum_in_sector = pairwise_sum(&ks);
    let slack = 1.0 + IDENTITY_TOL;
    let sandwich_holds =
        mu_sum <= k_sum_in_sector * slack && k_sum_in_sector <= (1.0 + delta * delta).powf(p / 2.0) * mu_sum * slack;
    let mut mu_sorted: Vec<f64> = mus.into_iter().filter(|&m| m > r && m < r0).collect();
    mu_sorted.sort_by(f64::total_cmp);
    let mu_integral_form = step_integral(&mu_sorted, r, p);

    let toeplitz_integral = counting.map(|cf| {
        let mut vals: Vec<f64> = cf.eigenvalues.iter().copied().filter(|&s| s > r && s < r0).collect();
        vals.sort_by(f64::total_cmp);
        let inside = step_integral(&vals, r, p);
        // eigenvalues at or above r0 contribute the full interval
        let above = counting_query(cf, r0) as f64 - cf.eigenvalues.iter().filter(|&&s| s == r0).count() as f64;
        inside + above.max(0.0) * (r0.powf(p) - r.powf(p))
    });

    Ok(MomentReport {
        p,
        global_sum: global_over_cluster(cluster, p),
        local_sum,
        integral_form,
        ratio: (local_sum > 0.0 && integral_form > 0.0).then(|| local_sum / integral_form),
        identity_error,
        mu_sum,
        mu_integral_form,
        k_sum_in_sector,
        delta,
        sandwich_holds,
        excluded,
        toeplitz_integral,
    })
}

fn global_over_cluster(cluster: &ComplexSpectrum, p: f64) -> f64 {
    let terms: Vec<f64> = cluster
        .entries
        .iter()
        .map(|e| e.k.norm().powf(p) / (1.0 + e.lambda.norm()).powf(2.0 * p))
        .collect();
    pairwise_sum(&terms)
}

/// Local comparison with `global_sum` replaced by the sum over `full`.
pub fn lt_report(
    full: &ComplexSpectrum,
    q_max: usize,
    cluster: &ComplexSpectrum,
    counting: Option<&CountingFunction>,
    sec: &SectorSpec,
    p: f64,
) -> Result<MomentReport> {
    let mut rep = lt_local_comparison(cluster, counting, sec, p)?;
    rep.global_sum = lt_global_sum(full, q_max, p)?;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::SpectrumEntry;

    fn spectrum(b: f64, q: usize, lambdas: &[Complex64]) -> ComplexSpectrum {
        let lq = Complex64::new(2.0 * b * q as f64, 0.0);
        ComplexSpectrum {
            b,
            level_q: q,
            v_sup: 1.0,
            entries: lambdas
                .iter()
                .map(|&lambda| SpectrumEntry {
                    lambda,
                    k: lq - lambda,
                    block: Some(0),
                    multiplicity: 1,
                    residual: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn global_sum_examples() {
        let s = spectrum(1.0, 1, &[Complex64::new(1.9, 0.0)]);
        let v = lt_global_sum(&s, 5, 2.0).unwrap();
        assert!((v - 0.01 / 2.9f64.powi(4)).abs() < 1e-18);
        assert!((v - 1.4139e-4).abs() < 1e-8);
        assert_eq!(lt_global_sum(&spectrum(1.0, 1, &[]), 5, 2.0).unwrap(), 0.0);
        let more = spectrum(1.0, 1, &[Complex64::new(1.9, 0.0), Complex64::new(4.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert_eq!(lt_global_sum(&more, 5, 2.0).unwrap(), v);
        assert!(lt_global_sum(&s, 5, 1.5).is_err());
    }

    #[test]
    fn single_eigenvalue_identity() {
        let s = spectrum(1.0, 1, &[Complex64::new(1.9, 0.0)]);
        let sec = SectorSpec {
            alpha: 0.0,
            sign_j: -1,
            delta: 1e-6,
            r: 1e-3,
            r0: 0.3,
        };
        let rep = lt_local_comparison(&s, None, &sec, 2.0).unwrap();
        assert!((rep.local_sum - 0.01).abs() < 1e-16);
        assert!((rep.integral_form - (0.01 - 1e-6)).abs() < 1e-16);
        assert!(rep.identity_error < 1e-12);
        assert!(rep.sandwich_holds);
        assert_eq!(rep.delta, 0.0);
        assert_eq!(rep.mu_sum, rep.k_sum_in_sector);
    }

    #[test]
    fn excluded_entries_are_counted() {
        // k = 0.1 gives μ = 0.1 for J = −1, α = 0; k = −0.1 gives μ < 0
        let s = spectrum(1.0, 1, &[Complex64::new(1.9, 0.0), Complex64::new(2.1, 0.0)]);
        let sec = SectorSpec {
            alpha: 0.0,
            sign_j: -1,
            delta: 0.1,
            r: 1e-3,
            r0: 0.3,
        };
        let rep = lt_local_comparison(&s, None, &sec, 3.0).unwrap();
        assert_eq!(rep.excluded, 1);
        assert!(rep.identity_error < 1e-12);
    }
}
