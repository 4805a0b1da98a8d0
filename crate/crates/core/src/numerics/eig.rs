//! Dense real eigenvalue solver: balancing, Householder reduction to
//! Hessenberg form, then the Francis double-shift QR iteration.
//!
//! Follows the classic EISPACK/JAMA `balanc`/`orthes`/`hqr` route, with one
//! deliberate difference: the QR iteration carries an explicit budget and
//! reports `NoConvergence` instead of spinning. A stability verdict must
//! never rest on unconverged eigenvalues.

use super::{Matrix, NumericsError};
use num_complex::Complex64;

const EPS: f64 = f64::EPSILON;
/// QR sweeps allowed per deflation before giving up (exceptional shifts
/// fire at 10, 20 and 30).
const MAX_ITER_PER_EIG: usize = 50;

/// All eigenvalues of a square matrix, with multiplicity, in deflation order.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex64>, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![Complex64::new(a[(0, 0)], 0.0)]);
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let (wr, wi) = hqr(&mut h)?;
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(a: &Matrix) -> Result<f64, NumericsError> {
    Ok(eigenvalues(a)?.iter().fold(0.0_f64, |m, l| m.max(l.norm())))
}

/// Diagonal similarity scaling that roughly equalizes row and column norms
/// (EISPACK `balanc`, radix 2, no permutation step). Eigenvalues are
/// unchanged; accuracy of the QR iteration improves for badly scaled input.
fn balance(h: &mut Matrix) {
    let n = h.rows();
    let radix = 2.0_f64;
    let sqrdx = radix * radix;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += h[(j, i)].abs();
                    r += h[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / radix;
                let mut f = 1.0;
                let s = c + r;
                let mut cc = c;
                while cc < g {
                    f *= radix;
                    cc *= sqrdx;
                }
                g = r * radix;
                while cc > g {
                    f /= radix;
                    cc /= sqrdx;
                }
                if (cc + r) / f < 0.95 * s {
                    done = false;
                    let ginv = 1.0 / f;
                    for j in 0..n {
                        h[(i, j)] *= ginv;
                    }
                    for j in 0..n {
                        h[(j, i)] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Householder reduction to upper Hessenberg form (EISPACK `orthes`,
/// transforms not accumulated — only eigenvalues are wanted).
fn hessenberg(h: &mut Matrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0_f64; n];
    for m in 1..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        // H <- (I - u u'/h) H (I - u u'/h)
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }
    // zero out the part below the first subdiagonal
    for i in 2..n {
        for j in 0..(i - 1) {
            h[(i, j)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (EISPACK/JAMA
/// `hqr`, eigenvalue part only). Returns (real, imaginary) parts.
fn hqr(hm: &mut Matrix) -> Result<(Vec<f64>, Vec<f64>), NumericsError> {
    let nn = hm.rows() as isize;
    let mut wr = vec![0.0_f64; nn as usize];
    let mut wi = vec![0.0_f64; nn as usize];
    let low: isize = 0;
    let high: isize = nn - 1;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
    let (mut s, mut z, mut x, mut y, mut w);

    let h = |m: &Matrix, i: isize, j: isize| m[(i as usize, j as usize)];

    // overall matrix norm used in the convergence tests
    let mut norm = 0.0;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += h(hm, i, j).abs();
        }
    }

    let mut total_iter = 0usize;
    let mut n = high;
    let mut iter = 0usize;
    while n >= low {
        // look for a single small subdiagonal element
        let mut l = n;
        while l > low {
            s = h(hm, l - 1, l - 1).abs() + h(hm, l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if h(hm, l, l - 1).abs() < EPS * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // one root found
            wr[n as usize] = h(hm, n, n) + exshift;
            wi[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // two roots found
            w = h(hm, n, n - 1) * h(hm, n - 1, n);
            p = (h(hm, n - 1, n - 1) - h(hm, n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = h(hm, n, n) + exshift;
            if q >= 0.0 {
                // real pair
                z = if p >= 0.0 { p + z } else { p - z };
                wr[(n - 1) as usize] = x + z;
                wr[n as usize] = if z != 0.0 { x - w / z } else { x + z };
                wi[(n - 1) as usize] = 0.0;
                wi[n as usize] = 0.0;
            } else {
                // complex pair
                wr[(n - 1) as usize] = x + p;
                wr[n as usize] = x + p;
                wi[(n - 1) as usize] = z;
                wi[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // no convergence yet: form shift
            x = h(hm, n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h(hm, n - 1, n - 1);
                w = h(hm, n, n - 1) * h(hm, n - 1, n);
            }

            if iter == 10 || iter == 20 || iter == 30 {
                // exceptional shift (Wilkinson's ad hoc form)
                exshift += x;
                for i in low..=n {
                    let v = h(hm, i, i) - x;
                    hm[(i as usize, i as usize)] = v;
                }
                s = h(hm, n, n - 1).abs() + h(hm, n - 1, n - 2).abs();
                y = 0.75 * s;
                x = y;
                w = -0.4375 * s * s;
            }

            iter += 1;
            total_iter += 1;
            if iter > MAX_ITER_PER_EIG {
                return Err(NumericsError::NoConvergence {
                    iterations: total_iter,
                });
            }

            // look for two consecutive small subdiagonal elements
            let mut m = n - 2;
            while m >= l {
                z = h(hm, m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / h(hm, m + 1, m) + h(hm, m, m + 1);
                q = h(hm, m + 1, m + 1) - z - r - s;
                r = h(hm, m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h(hm, m, m - 1).abs() * (q.abs() + r.abs())
                    < EPS
                        * (p.abs()
                            * (h(hm, m - 1, m - 1).abs() + z.abs() + h(hm, m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                hm[(i as usize, (i - 2) as usize)] = 0.0;
                if i > m + 2 {
                    hm[(i as usize, (i - 3) as usize)] = 0.0;
                }
            }

            // double QR step over rows l..n, columns m..n
            for k in m..n {
                let notlast = k != n - 1;
                if k != m {
                    p = h(hm, k, k - 1);
                    q = h(hm, k + 1, k - 1);
                    r = if notlast { h(hm, k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        hm[(k as usize, (k - 1) as usize)] = -s * x;
                    } else if l != m {
                        let v = -h(hm, k, k - 1);
                        hm[(k as usize, (k - 1) as usize)] = v;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    // row modification
                    for j in k..nn {
                        p = h(hm, k, j) + q * h(hm, k + 1, j);
                        if notlast {
                            p += r * h(hm, k + 2, j);
                            let v = h(hm, k + 2, j) - p * z;
                            hm[((k + 2) as usize, j as usize)] = v;
                        }
                        let v0 = h(hm, k, j) - p * x;
                        hm[(k as usize, j as usize)] = v0;
                        let v1 = h(hm, k + 1, j) - p * y;
                        hm[((k + 1) as usize, j as usize)] = v1;
                    }
                    // column modification
                    for i in 0..=(n.min(k + 3)) {
                        p = x * h(hm, i, k) + y * h(hm, i, k + 1);
                        if notlast {
                            p += z * h(hm, i, k + 2);
                            let v = h(hm, i, k + 2) - p * r;
                            hm[(i as usize, (k + 2) as usize)] = v;
                        }
                        let v0 = h(hm, i, k) - p;
                        hm[(i as usize, k as usize)] = v0;
                        let v1 = h(hm, i, k + 1) - p * q;
                        hm[(i as usize, (k + 1) as usize)] = v1;
                    }
                }
            }
        }
    }
    Ok((wr, wi))
}
