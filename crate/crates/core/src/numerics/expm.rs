//! Matrix exponential (scaling-and-squaring with a degree-13 Padé core)
//! and the exact zero-order-hold discretization pair built from it.

use super::{Matrix, NumericsError};

/// Padé-13 numerator/denominator coefficients (Higham's scaling-and-squaring).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm bound under which the degree-13 Padé approximant is accurate to
/// double precision.
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential `e^A`.
///
/// Scaling-and-squaring: A is halved until its 1-norm is below the Padé-13
/// threshold, the rational approximant is evaluated, and the result is
/// squared back up. Relative accuracy is at machine level for the
/// well-conditioned small matrices used in this crate.
pub fn expm(a: &Matrix) -> Result<Matrix, NumericsError> {
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
        return Ok(Matrix::zeros(0, 0));
    }

    let norm = a.norm_1();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let a_scaled = a.scale(0.5f64.powi(s as i32));

    let b = &PADE13;
    let ident = Matrix::identity(n);
    let a2 = a_scaled.matmul(&a_scaled);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);

    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let u_inner = a6
        .matmul(&a6.scale(b[13]).add(&a4.scale(b[11])).add(&a2.scale(b[9])))
        .add(&a6.scale(b[7]))
        .add(&a4.scale(b[5]))
        .add(&a2.scale(b[3]))
        .add(&ident.scale(b[1]));
    let u = a_scaled.matmul(&u_inner);
    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let v = a6
        .matmul(&a6.scale(b[12]).add(&a4.scale(b[10])).add(&a2.scale(b[8])))
        .add(&a6.scale(b[6]))
        .add(&a4.scale(b[4]))
        .add(&a2.scale(b[2]))
        .add(&ident.scale(b[0]));

    // (V - U) X = (V + U)
    let mut x = v.sub(&u).solve(&v.add(&u))?;
    for _ in 0..s {
        x = x.matmul(&x);
    }
    Ok(x)
}

/// Exact ZOH discretization of `ẋ = A x + B u` over one sample of length `ts`:
/// returns `Phi = e^{A ts}` and `Gamma = (∫₀^ts e^{A s} ds) B`.
///
/// Both blocks are read off the exponential of the augmented matrix
/// `ts·[[A, B], [0, 0]]`, which is exact for piecewise-constant input.
pub fn zoh_pair(a: &Matrix, b: &Matrix, ts: f64) -> Result<(Matrix, Matrix), NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.rows() != a.rows() {
        return Err(NumericsError::DimensionMismatch {
            expected: (a.rows(), b.cols()),
            got: (b.rows(), b.cols()),
        });
    }
    if !(ts > 0.0) || !ts.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let n = a.rows();
    let m = b.cols();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.set_block(0, 0, a);
    aug.set_block(0, n, b);
    let e = expm(&aug.scale(ts))?;
    Ok((e.block(0, 0, n, n), e.block(0, n, n, m)))
}
