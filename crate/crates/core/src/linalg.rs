//! Small dense linear algebra: SVD with a fixed sign convention, Gram-Schmidt
//! QR with rank detection, and a truncated pseudo-inverse.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, Scalar};

/// Default cap on either dimension of matrices handed to [`svd_small`].
pub const SMALL_MATRIX_CAP: usize = 1024;

/// Thin SVD `A = U diag(sigma) V*` with `sigma` descending.
#[derive(Debug, Clone)]
pub struct SmallSvd<S: Scalar> {
    /// `rows x k` left singular vectors, `k = min(rows, cols)`.
    pub u: DMatrix<S>,
    pub sigma: Vec<f64>,
    /// `cols x k` right singular vectors (not conjugate-transposed).
    pub v: DMatrix<S>,
}

/// SVD of a matrix with both dimensions at most `cap`.
///
/// Singular values are sorted descending; the first component of each left
/// singular vector whose modulus exceeds round-off is made real and
/// non-negative (the right vector absorbs the matching phase).
pub fn svd_small<S: Scalar>(a: &DMatrix<S>, cap: usize) -> Result<SmallSvd<S>> {
    let (m, n) = a.shape();
    if m > cap || n > cap {
        return Err(Error::Config(format!(
            "svd_small: {m}x{n} exceeds the small-matrix cap {cap}"
        )));
    }
    let k = m.min(n);
    if k == 0 {
        return Ok(SmallSvd {
            u: DMatrix::zeros(m, 0),
            sigma: Vec::new(),
            v: DMatrix::zeros(n, 0),
        });
    }
    if a.iter().any(|x| !x.modulus().is_finite()) {
        return Err(Error::Numerical("svd_small: non-finite entries".into()));
    }
    let svd = nalgebra::linalg::SVD::try_new(a.clone(), true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("svd_small: SVD did not converge".into()))?;
    let u_raw = svd.u.expect("requested U");
    let vt_raw = svd.v_t.expect("requested V^T");

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut u = DMatrix::<S>::zeros(m, k);
    let mut v = DMatrix::<S>::zeros(n, k);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(svd.singular_values[src].max(0.0));
        let ucol = u_raw.column(src);
        let scale = ucol.norm();
        let pivot = ucol.iter().find(|x| x.modulus() > 1e-12 * scale).copied();
        // phase that makes the pivot real and non-negative
        let phase = match pivot {
            Some(z) => z.conjugate() / S::from_real(z.modulus()),
            None => S::one(),
        };
        u.column_mut(dst).copy_from(&(ucol * phase));
        let vcol: DVector<S> = vt_raw.row(src).transpose().map(|x| x.conjugate());
        v.column_mut(dst).copy_from(&(vcol * phase));
    }
    Ok(SmallSvd { u, sigma, v })
}

/// Result of [`orthonormalize`]: `B = Q R`.
#[derive(Debug, Clone)]
pub struct ThinQr<S: Scalar> {
    /// `n x l`; columns of dependent inputs are zero.
    pub q: DMatrix<S>,
    /// `l x l` upper triangular; zero diagonal marks a dependent input column.
    pub r: DMatrix<S>,
    /// Indices of the independent columns, ascending.
    pub kept: Vec<usize>,
}

impl<S: Scalar> ThinQr<S> {
    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// The orthonormal columns only (`n x rank`).
    pub fn q_compact(&self) -> DMatrix<S> {
        self.q.select_columns(&self.kept)
    }

    /// Rows of `R` belonging to the kept columns (`rank x l`).
    pub fn r_compact(&self) -> DMatrix<S> {
        self.r.select_rows(&self.kept)
    }
}

/// Relative size below which a Gram-Schmidt residual counts as dependent.
const DEPENDENCE_TOL: f64 = 1e-10;

/// Gram-Schmidt QR with re-orthogonalization (two passes per column).
pub fn orthonormalize<S: Scalar>(b: &DMatrix<S>) -> ThinQr<S> {
    let (n, l) = b.shape();
    let mut q = DMatrix::<S>::zeros(n, l);
    let mut r = DMatrix::<S>::zeros(l, l);
    let mut kept = Vec::with_capacity(l);
    for j in 0..l {
        let mut w: DVector<S> = b.column(j).into_owned();
        let norm0 = w.norm();
        if norm0 == 0.0 {
            continue;
        }
        for _pass in 0..2 {
            for &i in &kept {
                let qi = q.column(i);
                let h = qi.dotc(&w);
                r[(i, j)] += h;
                w.axpy(-h, &qi, S::one());
            }
        }
        let norm = w.norm();
        if norm > DEPENDENCE_TOL * norm0 {
            r[(j, j)] = S::from_real(norm);
            q.column_mut(j).copy_from(&(w / S::from_real(norm)));
            kept.push(j);
        }
    }
    ThinQr { q, r, kept }
}

/// Pseudo-inverse dropping singular values below `rcond * sigma_max`.
pub fn pseudo_inverse<S: Scalar>(a: &DMatrix<S>, rcond: f64) -> Result<DMatrix<S>> {
    let (m, n) = a.shape();
    let svd = svd_small(a, usize::MAX)?;
    let cutoff = svd.sigma.first().copied().unwrap_or(0.0) * rcond;
    let mut out = DMatrix::<S>::zeros(n, m);
    for (t, &s) in svd.sigma.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            break;
        }
        let vt = svd.v.column(t);
        let ut = svd.u.column(t);
        // out += v_t (1/s) u_t^*
        out.gerc(S::from_real(1.0 / s), &vt, &ut, S::one());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reconstruct<S: Scalar>(s: &SmallSvd<S>) -> DMatrix<S> {
        let k = s.sigma.len();
        let sig = DMatrix::<S>::from_fn(k, k, |i, j| if i == j { S::from_real(s.sigma[i]) } else { S::zero() });
        &s.u * sig * s.v.adjoint()
    }

    fn random_real(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.random::<f64>() - 0.5)
    }

    fn random_complex(m: usize, n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn svd_of_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let s = svd_small(&a, SMALL_MATRIX_CAP).unwrap();
        assert!((s.sigma[0] - 3.0).abs() < 1e-14 && (s.sigma[1] - 1.0).abs() < 1e-14);
        assert!((s.u[(1, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((reconstruct(&s) - a).norm() < 1e-13);
    }

    #[test]
    fn svd_of_rank_one_outer_product() {
        // |u| = 2, |v| = 3 -> sigma_1 = 6
        let u = DVector::from_vec(vec![2.0, 0.0]);
        let v = DVector::from_vec(vec![0.0, 3.0, 0.0]);
        let a = &u * v.transpose();
        let s = svd_small(&a, SMALL_MATRIX_CAP).unwrap();
        assert!((s.sigma[0] - 6.0).abs() < 1e-13);
        assert!(s.sigma[1].abs() < 1e-13);
    }

    #[test]
    fn svd_of_zero() {
        let s = svd_small(&DMatrix::<f64>::zeros(3, 4), SMALL_MATRIX_CAP).unwrap();
        assert!(s.sigma.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn svd_reconstruction_and_convention() {
        for seed in 0..5 {
            let a = random_complex(9, 6, seed);
            let s = svd_small(&a, SMALL_MATRIX_CAP).unwrap();
            assert!((reconstruct(&s) - &a).norm() <= 1e-10 * a.norm());
            assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
            for t in 0..s.sigma.len() {
                let first = s.u.column(t).iter().find(|x| x.norm() > 1e-12).copied().unwrap();
                assert!(first.im.abs() < 1e-14 && first.re > 0.0);
            }
            let b = random_real(5, 8, seed);
            let s = svd_small(&b, SMALL_MATRIX_CAP).unwrap();
            assert!((reconstruct(&s) - &b).norm() <= 1e-10 * b.norm());
        }
    }

    #[test]
    fn svd_is_deterministic() {
        let a = random_complex(16, 16, 9);
        let s1 = svd_small(&a, SMALL_MATRIX_CAP).unwrap();
        let s2 = svd_small(&a, SMALL_MATRIX_CAP).unwrap();
        assert_eq!(s1.sigma, s2.sigma);
        assert_eq!(s1.u, s2.u);
        assert_eq!(s1.v, s2.v);
    }

    #[test]
    fn svd_cap_is_enforced() {
        assert!(svd_small(&DMatrix::<f64>::zeros(5, 3), 4).is_err());
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut a = DMatrix::<f64>::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(svd_small(&a, 8), Err(Error::Numerical(_))));
    }

    #[test]
    fn qr_of_orthonormal_input() {
        let b = DMatrix::<f64>::identity(5, 3);
        let qr = orthonormalize(&b);
        assert_eq!(qr.rank(), 3);
        assert!((&qr.q - &b).norm() < 1e-15);
        assert!((&qr.r - DMatrix::<f64>::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn qr_detects_dependence() {
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let qr = orthonormalize(&b);
        assert_eq!(qr.rank(), 1);
        assert_eq!(qr.r[(1, 1)], 0.0);
        assert!((&qr.q * &qr.r - &b).norm() < 1e-15);
    }

    #[test]
    fn qr_residual_and_orthonormality() {
        let b = random_real(8, 3, 4);
        let qr = orthonormalize(&b);
        assert!((&qr.q * &qr.r - &b).norm() <= 1e-12 * b.norm());
        let q = qr.q_compact();
        assert!((q.adjoint() * &q - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
        let c = random_complex(10, 4, 5);
        let qr = orthonormalize(&c);
        assert!((&qr.q * &qr.r - &c).norm() <= 1e-12 * c.norm());
        let q = qr.q_compact();
        assert!((q.adjoint() * &q - DMatrix::<Complex64>::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_of_full_rank_tall() {
        let a = random_real(7, 3, 8);
        let p = pseudo_inverse(&a, 1e-12).unwrap();
        assert!((&p * &a - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
    }
}
