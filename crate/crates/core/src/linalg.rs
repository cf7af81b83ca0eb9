//! Small dense linear-algebra helpers shared by the synthesis and detector code.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Tolerance used for symmetry and semidefiniteness checks on covariances.
pub const PSD_TOL: f64 = 1e-12;

/// Eigenvalues below this are treated as singular when an inverse square root is requested.
pub const SQRT_CLIP: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn check_square(m: &DMatrix<f64>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim(what, "square matrix", crate::error::shape(m)));
    }
    Ok(m.nrows())
}

/// Checks symmetry to `PSD_TOL` and that no eigenvalue is below `-PSD_TOL`.
pub fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    check_square(m, what)?;
    if m.nrows() == 0 {
        return Ok(());
    }
    let asym = (m - m.transpose()).amax();
    if asym > PSD_TOL {
        return Err(Error::NotPsd {
            what: what.into(),
            detail: format!("asymmetry {asym:e}"),
        });
    }
    let min_eig = SymmetricEigen::new(symmetrize(m)).eigenvalues.min();
    if min_eig < -PSD_TOL {
        return Err(Error::NotPsd {
            what: what.into(),
            detail: format!("smallest eigenvalue {min_eig:e}"),
        });
    }
    Ok(())
}

/// Symmetric square root of a PSD matrix; tiny negative eigenvalues are clipped to zero.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Symmetric inverse square root of a positive definite matrix.
pub fn inv_sqrt_pd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if let Some(l) = eig.eigenvalues.iter().find(|&&l| l < SQRT_CLIP) {
        return Err(Error::Singular(format!("{what} (eigenvalue {l:e})")));
    }
    let roots = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    check_square(m, what)?;
    m.clone().try_inverse().ok_or_else(|| Error::Singular(what.to_string()))
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn inverse_pd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    check_square(m, what)?;
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what} (not positive definite)")))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Solves `P = A P Aᵀ + W` for Schur `A` by Smith doubling.
pub fn solve_stein(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let radius = crate::lti::spectral_radius(a)?;
    if radius >= 1.0 {
        return Err(Error::NotSchur {
            what: "Stein equation state matrix".into(),
            radius,
        });
    }
    let mut p = w.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        let delta = &ak * &p * ak.transpose();
        p += &delta;
        ak = &ak * &ak;
        if delta.norm() <= 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    Ok(symmetrize(&p))
}

/// Block-diagonal concatenation of two matrices.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.ncols(), b.ncols());
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// Smallest singular value among the `min(rows, cols)` singular values.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn psd_checks() {
        assert!(check_psd(&dmatrix![1.0, 0.0; 0.0, 0.0], "s").is_ok());
        assert!(check_psd(&dmatrix![1.0, 0.1; 0.0, 1.0], "s").is_err());
        assert!(check_psd(&dmatrix![1.0, 2.0; 2.0, 1.0], "s").is_err());
    }

    #[test]
    fn square_roots() {
        let m = dmatrix![4.0, 1.0; 1.0, 3.0];
        let s = sqrt_psd(&m);
        assert_relative_eq!(&s * &s, m, epsilon = 1e-12);
        let is = inv_sqrt_pd(&m, "m").unwrap();
        assert_relative_eq!(&is * &m * &is, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert!(inv_sqrt_pd(&dmatrix![1.0, 0.0; 0.0, 0.0], "m").is_err());
    }

    #[test]
    fn stein_matches_series() {
        let a = dmatrix![0.5, 0.2; -0.1, 0.3];
        let w = dmatrix![1.0, 0.0; 0.0, 2.0];
        let p = solve_stein(&a, &w).unwrap();
        assert_relative_eq!(&a * &p * a.transpose() + &w, p, epsilon = 1e-12);
        assert!(solve_stein(&dmatrix![1.5], &dmatrix![1.0]).is_err());
    }
}
