//! Special functions carried in sign/log form.

use std::cmp::Ordering;

/// A real number stored as `sign · exp(ln_abs)`; `sign == 0` means exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub sign: i8,
    pub ln_abs: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        sign: 0,
        ln_abs: f64::NEG_INFINITY,
    };
    pub const ONE: LogValue = LogValue { sign: 1, ln_abs: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: if x > 0.0 { 1 } else { -1 },
                ln_abs: x.abs().ln(),
            }
        }
    }

    pub fn positive(ln_abs: f64) -> Self {
        Self { sign: 1, ln_abs }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.ln_abs.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn mul(self, other: Self) -> Self {
        if self.sign == 0 || other.sign == 0 {
            Self::ZERO
        } else {
            Self {
                sign: self.sign * other.sign,
                ln_abs: self.ln_abs + other.ln_abs,
            }
        }
    }

    pub fn scale_ln(self, ln_factor: f64) -> Self {
        if self.sign == 0 {
            self
        } else {
            Self {
                sign: self.sign,
                ln_abs: self.ln_abs + ln_factor,
            }
        }
    }

    /// Orders by signed value.
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        let key = |v: &Self| (v.sign, if v.sign < 0 { -v.ln_abs } else { v.ln_abs });
        let (a, b) = (key(self), key(other));
        a.0.cmp(&b.0).then(a.1.total_cmp(&b.1))
    }
}

/// Sums signed log-domain terms without overflow or underflow.
#[derive(Debug, Default, Clone)]
pub struct LogSum {
    terms: Vec<LogValue>,
}

impl LogSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: LogValue) {
        if v.sign != 0 && v.ln_abs.is_finite() {
            self.terms.push(v);
        }
    }

    /// Returns (signed sum, sum of magnitudes).
    pub fn finish(&self) -> (LogValue, LogValue) {
        let Some(max) = self.terms.iter().map(|t| t.ln_abs).reduce(f64::max) else {
            return (LogValue::ZERO, LogValue::ZERO);
        };
        let (mut signed, mut abs) = (0.0, 0.0);
        for t in &self.terms {
            let x = (t.ln_abs - max).exp();
            signed += f64::from(t.sign) * x;
            abs += x;
        }
        (
            LogValue::from_f64(signed).scale_ln(max),
            LogValue::from_f64(abs).scale_ln(max),
        )
    }
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// ln n!.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else if n < 32 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

const RESCALE_HIGH: f64 = 1e150;
const RESCALE_LOW: f64 = 1e-150;

/// Runs the Laguerre three-term recurrence for L_k^a(x), k = 0..=n, keeping a
/// running log scale. Returns (L_{n-1}, L_n, ln_scale) with true values
/// `L · exp(ln_scale)`; for n = 0, L_{-1} is reported as 0.
fn laguerre_pair(n: usize, a: f64, x: f64) -> (f64, f64, f64) {
    if n == 0 {
        return (0.0, 1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + a - x;
    let mut ln_scale = 0.0;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        let big = cur.abs().max(prev.abs());
        if big > RESCALE_HIGH || (big < RESCALE_LOW && big > 0.0) {
            prev /= big;
            cur /= big;
            ln_scale += big.ln();
        }
    }
    (prev, cur, ln_scale)
}

/// Generalized Laguerre polynomial L_n^a(x) in sign/log form.
pub fn laguerre_log(n: usize, a: usize, x: f64) -> LogValue {
    laguerre_log_real(n, a as f64, x)
}

pub(crate) fn laguerre_log_real(n: usize, a: f64, x: f64) -> LogValue {
    let (_, cur, ln_scale) = laguerre_pair(n, a, x);
    LogValue::from_f64(cur).scale_ln(ln_scale)
}

/// ln P(n+1, x) = ln(γ(n+1, x)/n!), the regularized lower incomplete gamma
/// function at integer order, for x ≥ 0. Returns `LogValue::ZERO` at x = 0.
pub fn ln_lower_gamma_regularized(n: usize, x: f64) -> LogValue {
    if x <= 0.0 {
        return LogValue::ZERO;
    }
    let order = n as f64 + 1.0;
    if x < order {
        // e^{-x} x^{n+1}/(n+1)! · Σ_i x^i (n+1)!/(n+1+i)!
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut i = 0.0;
        loop {
            term *= x / (order + 1.0 + i);
            sum += term;
            i += 1.0;
            if term < sum * 1e-17 {
                break;
            }
        }
        LogValue::positive(-x + order * x.ln() - ln_factorial(n + 1) + sum.ln())
    } else {
        // P = 1 - Q, Q = e^{-x} Σ_{k≤n} x^k/k!, and Q ≲ 1/2 in this regime.
        let mut acc = LogSum::new();
        let lx = x.ln();
        for k in 0..=n {
            acc.push(LogValue::positive(k as f64 * lx - ln_factorial(k) - x));
        }
        let q = acc.finish().0.to_f64();
        LogValue::positive((-q).ln_1p())
    }
}
