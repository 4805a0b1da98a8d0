//! Independent oracles shared by the integration suites.
//!
//! Everything here deliberately avoids the library's own numerical paths:
//! the matrix exponential oracle is a scaled Taylor series, the ZOH
//! quadrature oracle propagates the integrand column by RK4 and sums a
//! trapezoid rule, the eigenvalue oracle builds matrices from roots chosen
//! in closed form, and the spectral-radius oracle is plain power
//! iteration.

#![allow(dead_code)] // each test target uses a different subset

use platoon::numerics::Matrix;
use rand::rngs::StdRng;
use rand::Rng;

/// Matrix exponential by argument scaling and a straight Taylor series.
pub fn taylor_expm(a: &Matrix) -> Matrix {
    let n = a.rows();
    let norm = a.norm_1();
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(s));
    let mut term = Matrix::identity(n);
    let mut sum = Matrix::identity(n);
    for k in 1..60 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        sum = sum.add(&term);
        if term.max_abs() < 1e-300 {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Quadrature oracle for the ZOH input gain: integrates Y' = A Y from
/// Y(0) = B by RK4 on `steps` substeps and accumulates the trapezoid sum
/// of ∫ Y ds column-wise. Independent of the augmented-exponential route.
pub fn quadrature_gamma(a: &Matrix, b: &Matrix, ts: f64, steps: usize) -> Matrix {
    let n = a.rows();
    let m = b.cols();
    let h = ts / steps as f64;
    let mut gamma = Matrix::zeros(n, m);
    for col in 0..m {
        let mut y: Vec<f64> = (0..n).map(|i| b[(i, col)]).collect();
        let mut acc = vec![0.0_f64; n];
        for _ in 0..steps {
            let y_prev = y.clone();
            let k1 = a.matvec(&y);
            let k2 = a.matvec(&add_scaled(&y, &k1, h / 2.0));
            let k3 = a.matvec(&add_scaled(&y, &k2, h / 2.0));
            let k4 = a.matvec(&add_scaled(&y, &k3, h));
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                acc[i] += 0.5 * h * (y_prev[i] + y[i]);
            }
        }
        for i in 0..n {
            gamma[(i, col)] = acc[i];
        }
    }
    gamma
}

fn add_scaled(y: &[f64], k: &[f64], s: f64) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + s * b).collect()
}

/// 500-iteration power iteration; converges to the spectral radius for
/// matrices with a dominant real eigenvalue (e.g. entrywise-nonnegative
/// random matrices).
pub fn power_iteration_radius(a: &Matrix, iterations: usize) -> f64 {
    let n = a.rows();
    let mut v = vec![1.0_f64; n];
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let w = a.matvec(&v);
        lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lambda == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|x| x / lambda).collect();
    }
    lambda
}

/// Random matrix with entries in [-1, 1).
pub fn random_matrix(rng: &mut StdRng, n: usize) -> Matrix {
    let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(n, n, data)
}

/// Random strictly stable matrix (Gershgorin-shifted).
pub fn random_stable_matrix(rng: &mut StdRng, n: usize) -> Matrix {
    let mut a = random_matrix(rng, n);
    let shift = a.norm_1() + 0.1;
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    a
}

/// Random entrywise-nonnegative matrix (Perron root dominates).
pub fn random_nonnegative_matrix(rng: &mut StdRng, n: usize) -> Matrix {
    let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect();
    Matrix::from_vec(n, n, data)
}

/// Roots for the closed-form eigenvalue oracle: `pairs` complex-conjugate
/// pairs plus `reals` real roots, all drawn from moderate ranges.
pub fn random_roots(rng: &mut StdRng, pairs: usize, reals: usize) -> Vec<(f64, f64)> {
    let mut roots = Vec::new();
    for _ in 0..pairs {
        let re = rng.random_range(-2.0..2.0);
        let im = rng.random_range(0.1..2.0);
        roots.push((re, im));
        roots.push((re, -im));
    }
    for _ in 0..reals {
        roots.push((rng.random_range(-3.0..3.0), 0.0));
    }
    roots
}

/// Companion matrix of the monic polynomial with the given roots, then a
/// random well-conditioned similarity so the input is not Hessenberg.
/// The eigenvalues are the chosen roots, known in closed form.
pub fn matrix_with_roots(rng: &mut StdRng, roots: &[(f64, f64)]) -> Matrix {
    // multiply out (x - r_i) with real coefficient arithmetic over
    // conjugate pairs: coefficients stay real
    let n = roots.len();
    let mut degree = 0usize;
    let mut i = 0usize;
    let mut poly = vec![1.0_f64]; // ascending, constant first
    while i < roots.len() {
        let (re, im) = roots[i];
        if im == 0.0 {
            // multiply by (x - re)
            let mut next = vec![0.0; poly.len() + 1];
            for (k, c) in poly.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= re * c;
            }
            poly = next;
            degree += 1;
            i += 1;
        } else {
            // multiply by (x^2 - 2 re x + re^2 + im^2)
            let p = -2.0 * re;
            let q = re * re + im * im;
            let mut next = vec![0.0; poly.len() + 2];
            for (k, c) in poly.iter().enumerate() {
                next[k + 2] += c;
                next[k + 1] += p * c;
                next[k] += q * c;
            }
            poly = next;
            degree += 2;
            i += 2;
        }
    }
    assert_eq!(degree, n);

    // companion matrix: ones on the subdiagonal, last column holds the
    // negated ascending coefficients
    let mut c = Matrix::zeros(n, n);
    for k in 0..(n - 1) {
        c[(k + 1, k)] = 1.0;
    }
    for (k, coeff) in poly.iter().take(n).enumerate() {
        c[(k, n - 1)] = -coeff;
    }

    // similarity transform T C T^{-1} with T = I + 0.2 R
    let t = Matrix::identity(n).add(&random_matrix(rng, n).scale(0.2));
    let tc = t.matmul(&c);
    // solve X T = T C  =>  T^T X^T = (T C)^T
    let xt = t
        .transpose()
        .solve(&tc.transpose())
        .expect("T is well conditioned");
    xt.transpose()
}

/// Greedy multiset match: worst-case distance between computed
/// eigenvalues and expected roots.
pub fn multiset_match_distance(computed: &[(f64, f64)], expected: &[(f64, f64)]) -> f64 {
    assert_eq!(computed.len(), expected.len());
    let mut remaining: Vec<(f64, f64)> = expected.to_vec();
    let mut worst = 0.0_f64;
    for c in computed {
        let (idx, dist) = remaining
            .iter()
            .enumerate()
            .map(|(i, e)| (i, ((c.0 - e.0).powi(2) + (c.1 - e.1).powi(2)).sqrt()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("nonempty");
        worst = worst.max(dist);
        remaining.swap_remove(idx);
    }
    worst
}
