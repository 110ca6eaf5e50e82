//! Small dense complex matrices stored row-major in slices.

use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn matmul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Gauss–Jordan inverse with partial pivoting. Returns the inverse and the
/// smallest pivot modulus relative to the largest entry of `a`, or `None` when
/// a pivot vanishes.
pub fn inverse(a: &[Complex64], n: usize) -> Option<(Vec<Complex64>, f64)> {
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if scale == 0.0 {
        return None;
    }
    let mut m = a.to_vec();
    let mut inv = vec![ZERO; n * n];
    for i in 0..n {
        inv[i * n + i] = Complex64::new(1.0, 0.0);
    }
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x * n + col].norm().total_cmp(&m[y * n + col].norm()))
            .unwrap();
        let pv = m[piv * n + col];
        min_pivot = min_pivot.min(pv.norm() / scale);
        if pv.norm() <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
                inv.swap(piv * n + j, col * n + j);
            }
        }
        let r = Complex64::new(1.0, 0.0) / pv;
        for j in 0..n {
            m[col * n + j] *= r;
            inv[col * n + j] *= r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row * n + col];
            if f == ZERO {
                continue;
            }
            for j in 0..n {
                let (mc, ic) = (m[col * n + j], inv[col * n + j]);
                m[row * n + j] -= f * mc;
                inv[row * n + j] -= f * ic;
            }
        }
    }
    Some((inv, min_pivot))
}

/// Max-row-sum norm.
pub fn norm_one_inf(a: &[Complex64], n: usize) -> f64 {
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn to_na(a: &[Complex64], n: usize) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(n, n, a)
}

fn from_na(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    let mut out = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
    out
}

pub fn expm(a: &[Complex64], n: usize) -> Vec<Complex64> {
    from_na(&to_na(a, n).exp())
}

/// `exp(X)` together with its directional derivative along `dx`, read off
/// the block exponential `exp([[X, dX], [0, X]]) = [[e^X, D], [0, e^X]]`.
pub fn expm_with_derivative(x: &[Complex64], dx: &[Complex64], n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut big = DMatrix::from_element(2 * n, 2 * n, ZERO);
    for i in 0..n {
        for j in 0..n {
            big[(i, j)] = x[i * n + j];
            big[(n + i, n + j)] = x[i * n + j];
            big[(i, n + j)] = dx[i * n + j];
        }
    }
    let e = big.exp();
    let mut ex = vec![ZERO; n * n];
    let mut d = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            ex[i * n + j] = e[(i, j)];
            d[i * n + j] = e[(i, n + j)];
        }
    }
    (ex, d)
}

/// `exp(X)` with its derivatives along every `dxs[k]`, from one block
/// exponential whose first block row is `[X, dX_1, ..., dX_m]` above a
/// block diagonal of `X`.
pub fn expm_with_derivatives(x: &[Complex64], dxs: &[Vec<Complex64>], n: usize) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
    let m = dxs.len() + 1;
    let mut big = DMatrix::from_element(m * n, m * n, ZERO);
    for b in 0..m {
        for i in 0..n {
            for j in 0..n {
                big[(b * n + i, b * n + j)] = x[i * n + j];
            }
        }
    }
    for (k, dx) in dxs.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                big[(i, (k + 1) * n + j)] = dx[i * n + j];
            }
        }
    }
    let e = big.exp();
    let block = |b: usize| -> Vec<Complex64> {
        (0..n * n).map(|ij| e[(ij / n, b * n + ij % n)]).collect()
    };
    (block(0), (1..m).map(block).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inverse_roundtrip() {
        let a = [c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0), c(3.0, 0.5)];
        let (inv, piv) = inverse(&a, 2).unwrap();
        assert!(piv > 0.1);
        let id = matmul(&a, &inv, 2);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[i * 2 + j] - c(want, 0.0)).norm() < 1e-14);
            }
        }
        assert!(inverse(&[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)], 2).is_none());
    }

    #[test]
    fn exponential_of_generator() {
        // exp(iθσ_z) = diag(e^{iθ}, e^{-iθ})
        let th = 0.7;
        let e = expm(&[c(0.0, th), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -th)], 2);
        assert!((e[0] - Complex64::from_polar(1.0, th)).norm() < 1e-14);
        assert!((e[3] - Complex64::from_polar(1.0, -th)).norm() < 1e-14);
    }

    #[test]
    fn block_derivative_matches_finite_difference() {
        let x = [c(0.1, 0.4), c(0.3, 0.0), c(-0.2, 0.1), c(0.0, -0.5)];
        let dx = [c(0.0, 1.0), c(0.5, 0.0), c(0.2, 0.0), c(-0.3, 0.2)];
        let (_, d) = expm_with_derivative(&x, &dx, 2);
        let h = 1e-5;
        let xp: Vec<_> = x.iter().zip(&dx).map(|(a, b)| a + b * h).collect();
        let xm: Vec<_> = x.iter().zip(&dx).map(|(a, b)| a - b * h).collect();
        let (ep, em) = (expm(&xp, 2), expm(&xm, 2));
        for e in 0..4 {
            let fd = (ep[e] - em[e]) / (2.0 * h);
            assert!((fd - d[e]).norm() < 1e-8);
        }
    }

    #[test]
    fn stacked_derivatives_match_single_direction() {
        let x = [c(0.1, 0.4), c(0.3, 0.0), c(-0.2, 0.1), c(0.0, -0.5)];
        let dxs = vec![
            vec![c(0.0, 1.0), c(0.5, 0.0), c(0.2, 0.0), c(-0.3, 0.2)],
            vec![c(0.7, 0.0), c(0.0, -0.1), c(0.0, 0.3), c(0.2, 0.2)],
        ];
        let (ex, ds) = expm_with_derivatives(&x, &dxs, 2);
        for (dx, d) in dxs.iter().zip(&ds) {
            let (e1, d1) = expm_with_derivative(&x, dx, 2);
            for k in 0..4 {
                assert!((ex[k] - e1[k]).norm() < 1e-14);
                assert!((d[k] - d1[k]).norm() < 1e-14);
            }
        }
    }
}
