use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use landau_speclab::linalg::{
    bendixson_bounds, det_lu, eig_general, eig_hermitian, schatten_norm, singular_values, solve, ComplexMatrix,
};

fn random(n: usize, m: usize, seed: u64) -> ComplexMatrix {
    let mut rng = StdRng::seed_from_u64(seed);
    ComplexMatrix::from_fn(n, m, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn hermitian(n: usize, seed: u64) -> ComplexMatrix {
    let a = random(n, n, seed);
    a.add(&a.adjoint()).unwrap().scale(C64::new(0.5, 0.0))
}

fn frobenius(m: &ComplexMatrix) -> f64 {
    m.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn general_eigenvalues_match_trace_and_determinant(n in 1usize..12, seed in any::<u64>()) {
        let a = random(n, n, seed);
        let eig = eig_general(&a, 1e-9).unwrap();
        prop_assert_eq!(eig.values.len(), n);
        let tr: C64 = eig.values.iter().sum();
        prop_assert!((tr - a.trace()).norm() <= 1e-10 * n as f64 * frobenius(&a));
        let prod: C64 = eig.values.iter().product();
        let det = det_lu(&a).unwrap();
        prop_assert!((prod - det).norm() <= 1e-9 * det.norm().max(1e-12), "{} vs {}", prod, det);
        for w in eig.values.windows(2) {
            prop_assert!((w[0].re, w[0].im) <= (w[1].re, w[1].im));
        }
    }

    #[test]
    fn graded_hermitian_pairs_are_orthonormal(n in 2usize..14, seed in any::<u64>(), grade in 0.0f64..6.0) {
        let h = hermitian(n, seed);
        let d: Vec<f64> = (0..n).map(|i| 10f64.powf(-grade * i as f64 / n as f64)).collect();
        let g = ComplexMatrix::from_fn(n, n, |i, j| h[(i, j)] * d[i] * d[j]);
        let eig = eig_hermitian(&g, 1e-9).unwrap();
        for r in &eig.residuals {
            prop_assert!(*r <= 1e-12, "residual {}", r);
        }
        let v = eig.vectors.unwrap();
        let gram = v.adjoint().matmul(&v).unwrap();
        prop_assert!(gram.sub(&ComplexMatrix::identity(n)).unwrap().max_abs() <= 1e-12);
        for w in eig.values.windows(2) {
            prop_assert!(w[0].re <= w[1].re);
        }
    }

    #[test]
    fn singular_values_are_roots_of_gram_eigenvalues(rows in 1usize..10, cols in 1usize..10, seed in any::<u64>()) {
        let a = random(rows, cols, seed);
        let s = singular_values(&a).unwrap();
        prop_assert_eq!(s.len(), rows.min(cols));
        let gram = if rows >= cols { a.adjoint().matmul(&a) } else { a.matmul(&a.adjoint()) }.unwrap();
        let mut ev: Vec<f64> = eig_hermitian(&gram, 1e-9).unwrap().values.iter().map(|z| z.re).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        let scale = frobenius(&a).powi(2);
        for (si, e) in s.iter().zip(&ev) {
            prop_assert!((si * si - e).abs() <= 1e-12 * scale.max(1.0));
        }
        let s2 = schatten_norm(&a, 2.0).unwrap();
        prop_assert!((s2 - frobenius(&a)).abs() <= 1e-12 * frobenius(&a).max(1.0));
    }

    #[test]
    fn solve_and_determinant_multiplicativity(n in 1usize..10, s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = random(n, n, s1);
        let b = random(n, n, s2);
        let x = solve(&a, &b).unwrap();
        let r = a.matmul(&x).unwrap().sub(&b).unwrap().max_abs();
        let cond = frobenius(&a) * frobenius(&x);
        prop_assert!(r <= 1e-12 * cond.max(1.0));
        let lhs = det_lu(&a.matmul(&b).unwrap()).unwrap();
        let rhs = det_lu(&a).unwrap() * det_lu(&b).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1e-12));
    }

    #[test]
    fn spectrum_lies_in_numerical_range_strip(n in 1usize..10, seed in any::<u64>()) {
        let a = random(n, n, seed);
        let ((re_lo, re_hi), (im_lo, im_hi)) = bendixson_bounds(&a, 1e-9).unwrap();
        let slack = 1e-12 * frobenius(&a);
        for z in eig_general(&a, 1e-9).unwrap().values {
            prop_assert!(z.re >= re_lo - slack && z.re <= re_hi + slack);
            prop_assert!(z.im >= im_lo - slack && z.im <= im_hi + slack);
        }
    }
}

#[test]
fn non_hermitian_input_is_rejected() {
    let a = random(4, 4, 7);
    assert!(eig_hermitian(&a, 1e-10).is_err());
}

#[test]
fn known_small_spectra() {
    // [[2, 1], [1, 2]] has eigenvalues 1 and 3
    let m = ComplexMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
    let v = eig_hermitian(&m, 1e-12).unwrap().values;
    assert!((v[0].re - 1.0).abs() < 1e-14 && (v[1].re - 3.0).abs() < 1e-14);
    // rotation generator: eigenvalues ±i
    let r = ComplexMatrix::from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
    let e = eig_general(&r, 1e-12).unwrap().values;
    assert!((e[0] - C64::new(0.0, -1.0)).norm() < 1e-14);
    assert!((e[1] - C64::new(0.0, 1.0)).norm() < 1e-14);
    assert_eq!(singular_values(&r).unwrap(), vec![1.0, 1.0]);
}
