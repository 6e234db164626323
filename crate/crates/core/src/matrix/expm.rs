use nalgebra::DMatrix;

use super::MatrixError;

// Degree-13 diagonal Padé coefficients for exp.
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

// Largest 1-norm for which the unscaled degree-13 approximant is accurate to
// unit roundoff.
const THETA13: f64 = 5.371920351148152;

fn norm1(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(A)` by scaling and squaring with a degree-13 Padé approximant.
pub fn matrix_exp(a: &DMatrix<f64>) -> Result<DMatrix<f64>, MatrixError> {
    let (n, m) = a.shape();
    if n != m {
        return Err(MatrixError::NonSquare { rows: n, cols: m });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(MatrixError::NonFinite);
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if n == 1 {
        let v = a[(0, 0)].exp();
        return if v.is_finite() {
            Ok(DMatrix::from_element(1, 1, v))
        } else {
            Err(MatrixError::Overflow)
        };
    }

    let norm = norm1(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-squarings);

    let b = &PADE13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (b[13] * &a6 + b[11] * &a4 + b[9] * &a2)
        + b[7] * &a6
        + b[5] * &a4
        + b[3] * &a2
        + b[1] * &ident;
    let u = &scaled * u_inner;
    let v = &a6 * (b[12] * &a6 + b[10] * &a4 + b[8] * &a2)
        + b[6] * &a6
        + b[4] * &a4
        + b[2] * &a2
        + b[0] * &ident;

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or(MatrixError::Singular)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(MatrixError::Overflow);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{max_abs, SubIntensity};

    #[test]
    fn zero_matrix_gives_identity() {
        let e = matrix_exp(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e, DMatrix::identity(3, 3));
    }

    #[test]
    fn diagonal_case() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let e = matrix_exp(&a).unwrap();
        assert!((e[(0, 0)] - (-1f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn nilpotent_case() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = matrix_exp(&a).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(max_abs(&(e - want)) < 1e-15);
    }

    #[test]
    fn rotation_generator_with_large_norm() {
        // exp of [[0, w], [-w, 0]] is a rotation by w radians.
        let w = 60.0;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0]);
        let e = matrix_exp(&a).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[w.cos(), w.sin(), -w.sin(), w.cos()]);
        assert!(max_abs(&(e - want)) < 1e-12);
    }

    #[test]
    fn overflow_is_reported() {
        let a = DMatrix::from_element(2, 2, 400.0);
        assert_eq!(matrix_exp(&a), Err(MatrixError::Overflow));
    }

    #[test]
    fn embedded_generator_block_identity() {
        let t = SubIntensity::from_rows(&[
            vec![-0.1722, 0.1585, 0.0],
            vec![0.0, -0.5663, 0.5664],
            vec![0.0, 0.0, -0.0052],
        ])
        .unwrap();
        for &s in &[0.5, 3.0, 40.0, 400.0] {
            let full = matrix_exp(&(t.full_generator() * s)).unwrap();
            let block = t.exp(s).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((full[(i, j)] - block[(i, j)]).abs() < 1e-10);
                }
                let rowsum: f64 = block.row(i).iter().sum();
                assert!((full[(i, 3)] - (1.0 - rowsum)).abs() < 1e-10);
            }
            assert!((full[(3, 3)] - 1.0).abs() < 1e-12);
        }
    }
}
