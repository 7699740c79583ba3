use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use landau_speclab::special::{laguerre_log, ln_factorial, ln_lower_gamma_regularized};

fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        let (_, digits) = n.to_u64_digits();
        return digits.iter().rev().fold(0.0f64, |acc, &d| acc * 2f64.powi(64) + d as f64).ln();
    }
    let shift = bits - 64;
    let top: BigInt = n.abs() >> shift;
    let (_, d) = top.to_u64_digits();
    (d[0] as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

fn ln_rational(r: &BigRational) -> f64 {
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

fn binomial(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// L_n^a(x) = Σ_k (−1)^k C(n+a, n−k) x^k / k!, exactly.
fn laguerre_exact(n: u64, a: u64, x: u64) -> BigRational {
    let mut sum = BigRational::zero();
    for k in 0..=n {
        let term = BigRational::new(binomial(n + a, n - k) * BigInt::from(x).pow(k as u32), factorial(k));
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

#[test]
fn laguerre_matches_exact_rational() {
    let exact = laguerre_exact(50, 10, 30);
    let got = laguerre_log(50, 10, 30.0);
    let sign = if exact.numer().sign() == Sign::Minus { -1 } else { 1 };
    assert_eq!(got.sign, sign);
    let want = ln_rational(&exact.abs());
    assert!((got.ln_abs - want).abs() < 1e-10, "{} vs {want}", got.ln_abs);
    // frozen: L_50^10(30) = 3625088.1635972533...
    assert!((want - 15.103_389_166_967_507).abs() < 1e-12);
    assert!((got.to_f64() / 3_625_088.163_597_253_3 - 1.0).abs() < 1e-10);
}

#[test]
fn laguerre_small_cases_are_exact() {
    for (n, a, x) in [(0, 0, 3), (1, 0, 2), (5, 3, 7), (12, 0, 1), (20, 4, 11)] {
        let exact = laguerre_exact(n, a, x);
        let got = laguerre_log(n as usize, a as usize, x as f64);
        if exact.is_zero() {
            assert!(got.is_zero());
            continue;
        }
        let sign = if exact.numer().sign() == Sign::Minus { -1 } else { 1 };
        assert_eq!(got.sign, sign, "n={n} a={a} x={x}");
        assert!((got.ln_abs - ln_rational(&exact.abs())).abs() < 1e-11, "n={n} a={a} x={x}");
    }
}

/// ln P(j+1, x) from exact partial sums: −x + ln Σ_{k>j} x^k/k! when that
/// tail is the smaller side, else ln(1 − e^{−x} Σ_{k≤j} x^k/k!).
fn ln_incomplete_gamma_exact(j: u64, x: u64) -> f64 {
    let xb = BigInt::from(x);
    if j + 1 > x {
        let mut term = BigRational::new(xb.pow(j as u32 + 1), factorial(j + 1));
        let mut sum = BigRational::zero();
        let mut k = j + 1;
        loop {
            sum += &term;
            k += 1;
            term = term * BigRational::new(xb.clone(), BigInt::from(k));
            if ln_rational(&term) - ln_rational(&sum) < -92.0 {
                break;
            }
        }
        -(x as f64) + ln_rational(&sum)
    } else {
        let head = (0..=j).fold(BigRational::zero(), |acc, k| {
            acc + BigRational::new(xb.pow(k as u32), factorial(k))
        });
        let q = (-(x as f64) + ln_rational(&head)).exp();
        (-q).ln_1p()
    }
}

#[test]
fn incomplete_gamma_matches_exact_series() {
    for (j, x) in [(0, 1), (10, 1), (200, 1), (50, 30), (30, 80), (1000, 900), (3, 40)] {
        let want = ln_incomplete_gamma_exact(j, x);
        let got = ln_lower_gamma_regularized(j as usize, x as f64);
        assert_eq!(got.sign, 1);
        assert!((got.ln_abs - want).abs() <= 1e-12 * want.abs().max(1e-300), "j={j} x={x}: {} vs {want}", got.ln_abs);
    }
}

#[test]
fn incomplete_gamma_frozen_values() {
    let frozen = [
        (0, 1.0, -0.458_675_145_387_081_9),
        (10, 1.0, -18.415_915_478_317_81),
        (200, 1.0, -869.530_329_433_040_8),
        (30, 80.0, -1.332_650_461_414_992e-10),
        (50, 30.0, -8.118_373_509_230_641),
        (1000, 900.0, -7.619_814_708_313_4),
    ];
    for (j, x, v) in frozen {
        let got = ln_lower_gamma_regularized(j, x).ln_abs;
        assert!((got - v).abs() < 1e-12 * v.abs().max(1.0), "j={j}: {got} vs {v}");
    }
}

#[test]
fn ln_factorial_matches_exact() {
    for n in [0u64, 1, 5, 31, 32, 100, 1000] {
        let want = ln_bigint(&factorial(n));
        assert!((ln_factorial(n as usize) - want).abs() < 1e-12 * want.max(1.0), "n={n}");
    }
}
