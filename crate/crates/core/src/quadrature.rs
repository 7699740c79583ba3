//! Gauss–Laguerre and Gauss–Legendre rules with log-domain weights, and an
//! adaptive node-doubling integrator for integrands given in sign/log form.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::special::{LogSum, LogValue};

pub const START_NODES: usize = 64;
pub const MAX_NODES: usize = 4096;
pub const REL_TOL: f64 = 1e-11;
/// Estimates that cancel below this fraction of ∫|g| are compared absolutely.
const CANCELLATION_FLOOR: f64 = 0.1;

/// Nodes and natural-log weights of a Gaussian rule.
#[derive(Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub ln_weights: Vec<f64>,
}

/// Eigenvalues of a symmetric tridiagonal matrix (implicit QL, no vectors).
/// `off[i]` couples rows i and i+1.
fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

/// Double-double scalar used to evaluate L_n and L_{n+1} at Gauss–Laguerre
/// nodes; plain f64 recurrences leave ~1e-12 relative noise on the small nodes.
#[derive(Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let t = Self::two_sum(self.lo, o.lo);
        let hi = s.hi;
        let lo = s.lo + t.hi;
        let u = Self::two_sum(hi, lo);
        Self::two_sum(u.hi, u.lo + t.lo)
    }

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Self::two_sum(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    fn div_f64(self, d: f64) -> Self {
        let q1 = self.hi / d;
        let r = self.add(Self::from(q1).mul(Self::from(d)).neg());
        let q2 = r.hi / d;
        Self::two_sum(q1, q2)
    }

    fn scale(self, f: f64) -> Self {
        Self {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// (L_{n-1}(x), L_n(x), L_{n+1}(x)) for a = 0 with a shared power-of-two scale.
fn laguerre_triple_dd(n: usize, x: f64) -> (f64, f64, f64, f64) {
    let xd = Dd::from(x);
    let mut prev = Dd::from(1.0);
    let mut cur = Dd::from(1.0).add(xd.neg());
    let mut ln_scale = 0.0;
    let mut before = Dd::from(0.0);
    for k in 1..=n {
        let kf = k as f64;
        let coef = Dd::from(2.0 * kf + 1.0).add(xd.neg());
        let next = coef.mul(cur).add(prev.mul(Dd::from(-kf))).div_f64(kf + 1.0);
        before = prev;
        prev = cur;
        cur = next;
        let big = cur.hi.abs().max(prev.hi.abs());
        if big > 1e150 {
            let e = big.log2().floor();
            let f = (-e).exp2();
            before = before.scale(f);
            prev = prev.scale(f);
            cur = cur.scale(f);
            ln_scale += e * std::f64::consts::LN_2;
        }
    }
    // After the loop: before = L_{n-1}, prev = L_n, cur = L_{n+1}.
    (before.to_f64(), prev.to_f64(), cur.to_f64(), ln_scale)
}

fn build_laguerre(n: usize) -> Rule {
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + 1.0).collect();
    let off: Vec<f64> = (1..n).map(|i| i as f64).collect();
    let mut nodes = tridiagonal_eigenvalues(&diag, &off);
    let ln_np1_sq = 2.0 * ((n + 1) as f64).ln();
    let mut ln_weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        let mut last = laguerre_triple_dd(n, *x);
        for _ in 0..6 {
            let (lm1, ln, _, _) = last;
            // x L_n' = n (L_n - L_{n-1})
            let step = *x * ln / (n as f64 * (ln - lm1));
            if !step.is_finite() {
                break;
            }
            *x -= step;
            last = laguerre_triple_dd(n, *x);
            if step.abs() <= 1e-17 * x.abs() {
                break;
            }
        }
        let (_, _, lp1, ln_scale) = last;
        ln_weights.push(x.ln() - ln_np1_sq - 2.0 * (lp1.abs().ln() + ln_scale));
    }
    Rule { nodes, ln_weights }
}

fn build_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut ln_weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        ln_weights[i] = w.ln();
        ln_weights[n - 1 - i] = w.ln();
    }
    Rule { nodes, ln_weights }
}

type Cache = Mutex<HashMap<usize, Arc<Rule>>>;

fn cached(cache: &'static OnceLock<Cache>, n: usize, build: fn(usize) -> Rule) -> Arc<Rule> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().unwrap_or_else(|e| e.into_inner());
    guard.entry(n).or_insert_with(|| Arc::new(build(n))).clone()
}

/// n-point Gauss–Laguerre rule for weight e^{-x} on [0, ∞).
pub fn gauss_laguerre(n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(&CACHE, n, build_laguerre)
}

/// n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(&CACHE, n, build_legendre)
}

/// Integration domain on the half line: Gauss–Legendre panels between
/// consecutive `breaks`, plus a Gauss–Laguerre tail from the last break when
/// `tail` is set.
#[derive(Debug, Clone)]
pub struct Domain {
    pub breaks: Vec<f64>,
    pub tail: bool,
    /// The first panel [a, b] is integrated in u with ξ = a + (b−a)u^p, for
    /// integrands with a ξ^{1/p}-type singularity at a.
    pub head_power: Option<u32>,
}

impl Domain {
    pub fn half_line() -> Self {
        Self {
            breaks: vec![0.0],
            tail: true,
            head_power: None,
        }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self {
            breaks: vec![a, b],
            tail: false,
            head_power: None,
        }
    }

    /// Half line with a graded head panel [0, head].
    pub fn half_line_graded(head: f64, power: u32) -> Self {
        Self {
            breaks: vec![0.0, head],
            tail: true,
            head_power: Some(power),
        }
    }
}

fn estimate(domain: &Domain, n: usize, g: &(dyn Fn(f64) -> LogValue + Sync)) -> (LogValue, LogValue) {
    let mut acc = LogSum::new();
    if domain.breaks.len() >= 2 {
        let rule = gauss_legendre(n);
        for (i, w) in domain.breaks.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            if let (0, Some(p)) = (i, domain.head_power) {
                // ξ = a + (b−a)u^p, dξ = p(b−a)u^{p−1} du, u ∈ (0, 1)
                let pf = f64::from(p);
                let ln_jac = (pf * (b - a)).ln();
                for (&t, &lw) in rule.nodes.iter().zip(&rule.ln_weights) {
                    let u = 0.5 * (1.0 + t);
                    let x = a + (b - a) * u.powi(p as i32);
                    acc.push(g(x).scale_ln(lw + 0.5f64.ln() + ln_jac + (pf - 1.0) * u.ln()));
                }
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let ln_half = half.ln();
            for (&t, &lw) in rule.nodes.iter().zip(&rule.ln_weights) {
                acc.push(g(mid + half * t).scale_ln(lw + ln_half));
            }
        }
    }
    if domain.tail {
        let start = *domain.breaks.last().unwrap_or(&0.0);
        let rule = gauss_laguerre(n);
        for (&t, &lw) in rule.nodes.iter().zip(&rule.ln_weights) {
            acc.push(g(start + t).scale_ln(lw + t));
        }
    }
    acc.finish()
}

fn agree(prev: LogValue, cur: LogValue, cur_abs: LogValue) -> bool {
    if cur_abs.is_zero() {
        return prev.is_zero() || prev.ln_abs < -700.0;
    }
    let m = cur_abs.ln_abs;
    let rel = |v: LogValue| v.scale_ln(-m).to_f64();
    let (p, c, a) = (rel(prev), rel(cur), 1.0);
    (p - c).abs() <= REL_TOL * c.abs().max(CANCELLATION_FLOOR * a)
}

/// ∫ g over the domain, doubling nodes from [`START_NODES`] until successive
/// estimates agree to [`REL_TOL`] or [`MAX_NODES`] is reached.
pub fn integrate_log(domain: &Domain, g: impl Fn(f64) -> LogValue + Sync) -> Result<LogValue> {
    let mut n = START_NODES;
    let (mut prev, _) = estimate(domain, n, &g);
    while n < MAX_NODES {
        n *= 2;
        let (cur, cur_abs) = estimate(domain, n, &g);
        if agree(prev, cur, cur_abs) {
            return Ok(cur);
        }
        if n == MAX_NODES {
            return Err(Error::Accuracy {
                previous: prev.to_f64(),
                last: cur.to_f64(),
                nodes: n,
            });
        }
        prev = cur;
    }
    Ok(prev)
}
