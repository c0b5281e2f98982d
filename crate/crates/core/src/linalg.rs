//! Fixed-size dense linear algebra for the 4x4 to 8x8 matrices used here.

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is in the graph
use num_traits::Float as _;

pub type Mat<const N: usize> = [[f64; N]; N];

pub fn identity<const N: usize>() -> Mat<N> {
    let mut m = [[0.0; N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mat_mul<const N: usize>(a: &Mat<N>, b: &Mat<N>) -> Mat<N> {
    let mut c = [[0.0; N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            for j in 0..N {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn transpose<const N: usize>(a: &Mat<N>) -> Mat<N> {
    let mut t = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            t[j][i] = a[i][j];
        }
    }
    t
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff<const N: usize>(a: &Mat<N>, b: &Mat<N>) -> f64 {
    let mut m = 0.0f64;
    for i in 0..N {
        for j in 0..N {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
///
/// A pivot below `1e-12` times the largest diagonal entry fails with the
/// offending index and pivot value.
pub fn cholesky<const N: usize>(a: &Mat<N>) -> Result<Mat<N>, (usize, f64)> {
    let scale = (0..N).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    let mut l = [[0.0; N]; N];
    for j in 0..N {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 1e-12 * scale) {
            return Err((j, d));
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..N {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    Ok(l)
}

/// Cholesky factor of a positive-semidefinite matrix: pivots that fall below
/// the relative tolerance are treated as exact zeros and their column is
/// dropped, so sampling through the factor never leaves the support.
pub fn cholesky_semidefinite<const N: usize>(a: &Mat<N>, rel_tol: f64) -> Mat<N> {
    let scale = (0..N).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    let mut l = [[0.0; N]; N];
    for j in 0..N {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d <= rel_tol * scale {
            continue;
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..N {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    l
}

/// Inverse and determinant of an SPD matrix via its Cholesky factor.
pub fn inverse_spd<const N: usize>(a: &Mat<N>) -> Result<(Mat<N>, f64), (usize, f64)> {
    let l = cholesky(a)?;
    let det = (0..N).map(|i| l[i][i] * l[i][i]).product();
    // invert L by forward substitution, then A^-1 = L^-T L^-1
    let mut linv = [[0.0; N]; N];
    for i in 0..N {
        linv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s -= l[i][k] * linv[k][j];
            }
            linv[i][j] = s / l[i][i];
        }
    }
    let mut inv = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..N {
                s += linv[k][i] * linv[k][j];
            }
            inv[i][j] = s;
            inv[j][i] = s;
        }
    }
    Ok((inv, det))
}

/// Determinant of a general real matrix by partial-pivot elimination.
pub fn det<const N: usize>(a: &Mat<N>) -> f64 {
    let mut m = *a;
    let mut det = 1.0;
    for c in 0..N {
        let p = (c..N)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap_or(c);
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..N {
            let f = m[r][c] / m[c][c];
            for k in c..N {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

/// Solves `a x = b` for a general real system. Returns `None` when singular.
pub fn solve<const N: usize>(a: &Mat<N>, b: &[f64; N]) -> Option<[f64; N]> {
    let mut m = *a;
    let mut x = *b;
    for c in 0..N {
        let p = (c..N).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c] == 0.0 || !m[p][c].is_finite() {
            return None;
        }
        m.swap(p, c);
        x.swap(p, c);
        for r in c + 1..N {
            let f = m[r][c] / m[c][c];
            for k in c..N {
                m[r][k] -= f * m[c][k];
            }
            x[r] -= f * x[c];
        }
    }
    for r in (0..N).rev() {
        let mut s = x[r];
        for k in r + 1..N {
            s -= m[r][k] * x[k];
        }
        x[r] = s / m[r][r];
    }
    Some(x)
}

/// Determinant of a complex matrix and the solution of `a x = b`.
pub fn complex_det_solve<const N: usize>(
    a: &[[Complex64; N]; N],
    b: &[Complex64; N],
) -> Option<(Complex64, [Complex64; N])> {
    let mut m = *a;
    let mut x = *b;
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..N {
        let p = (c..N).max_by(|&i, &j| m[i][c].norm().total_cmp(&m[j][c].norm()))?;
        if m[p][c].norm() == 0.0 {
            return None;
        }
        if p != c {
            m.swap(p, c);
            x.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..N {
            let f = m[r][c] / m[c][c];
            for k in c..N {
                let t = m[c][k];
                m[r][k] -= f * t;
            }
            let t = x[c];
            x[r] -= f * t;
        }
    }
    for r in (0..N).rev() {
        let mut s = x[r];
        for k in r + 1..N {
            s -= m[r][k] * x[k];
        }
        x[r] = s / m[r][r];
    }
    Some((det, x))
}

/// Covariance of the `free` variables conditioned on the `pinned` ones
/// (Schur complement `S_ff - S_fp S_pp^-1 S_pf`).
pub fn schur_complement<const N: usize, const P: usize, const F: usize>(
    cov: &Mat<N>,
    pinned: [usize; P],
    free: [usize; F],
) -> Option<Mat<F>> {
    let mut spp = [[0.0; P]; P];
    for (i, &pi) in pinned.iter().enumerate() {
        for (j, &pj) in pinned.iter().enumerate() {
            spp[i][j] = cov[pi][pj];
        }
    }
    let (spp_inv, _) = inverse_spd(&spp).ok()?;
    let mut out = [[0.0; F]; F];
    for (i, &fi) in free.iter().enumerate() {
        for (j, &fj) in free.iter().enumerate() {
            let mut s = cov[fi][fj];
            for (k, &pk) in pinned.iter().enumerate() {
                for (l, &pl) in pinned.iter().enumerate() {
                    s -= cov[fi][pk] * spp_inv[k][l] * cov[pl][fj];
                }
            }
            out[i][j] = s;
        }
    }
    // symmetrize away rounding
    for i in 0..F {
        for j in 0..i {
            let m = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = m;
            out[j][i] = m;
        }
    }
    Some(out)
}
