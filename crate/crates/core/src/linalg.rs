//! Small dense symmetric-matrix helpers on top of nalgebra.

use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues treated as tied when they agree to this relative tolerance.
const TIE_TOL: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix with eigenvalues in decreasing
/// order and deterministic eigenvector signs.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let d = m.nrows();
        let eig = SymmetricEigen::new(m.clone());
        let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let lead: Vec<usize> = (0..d)
            .map(|j| argmax_abs(&eig.eigenvectors.column(j).into_owned()))
            .collect();

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            let (va, vb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
            if (va - vb).abs() <= TIE_TOL * scale.max(f64::MIN_POSITIVE) {
                lead[a].cmp(&lead[b])
            } else {
                vb.partial_cmp(&va).unwrap_or(Ordering::Equal)
            }
        });

        let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let mut vectors = DMatrix::zeros(d, d);
        for (dst, &src) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(src).into_owned();
            canonicalize_sign(&mut v);
            vectors.set_column(dst, &v);
        }
        SymEigen { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    /// `V diag(eigs) Vᵀ` in this eigenbasis.
    pub fn compose(&self, eigs: &[f64]) -> DMatrix<f64> {
        compose(&self.vectors, eigs)
    }
}

pub fn compose(basis: &DMatrix<f64>, eigs: &[f64]) -> DMatrix<f64> {
    let scaled = basis * DMatrix::from_diagonal(&DVector::from_column_slice(eigs));
    let mut out = scaled * basis.transpose();
    symmetrize(&mut out);
    out
}

fn argmax_abs(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    best
}

/// Flip `v` so that its first non-negligible coordinate is positive.
pub fn canonicalize_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() <= rel_tol * scale
}

/// Cholesky factorisation of a symmetric positive definite matrix.
pub fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if !is_symmetric(m, SYMMETRY_TOL) {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    Cholesky::new(m.clone()).ok_or_else(|| Error::numerical("matrix is not positive definite"))
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut inv = cholesky(m)?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Validate that `m` is symmetric positive definite.
pub fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    cholesky(m).map(|_| ())
}

/// Whether `a − b` is positive semidefinite up to `tol` (relative to `a`).
pub fn loewner_ge(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    let diff = a - b;
    let min = SymmetricEigen::new(diff).eigenvalues.min();
    min >= -tol * a.amax().max(f64::MIN_POSITIVE)
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending_with_canonical_signs() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let e = SymEigen::new(&m);
        assert_eq!(e.values, vec![4.0, 1.0]);
        assert_eq!(e.vector(0), DVector::from_vec(vec![0.0, 1.0]));
        assert_eq!(e.vector(1), DVector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn ties_resolved_by_index() {
        let e = SymEigen::new(&DMatrix::identity(3, 3));
        for i in 0..3 {
            assert!((e.vector(i)[i] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn compose_round_trips() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let e = SymEigen::new(&m);
        assert!(rel_frobenius(&e.compose(&e.values), &m) < 1e-13);
    }

    #[test]
    fn rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(check_spd(&m), Err(Error::Numerical(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(check_spd(&asym), Err(Error::InvalidInput(_))));
    }
}
