use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{GeometryError, Result};

pub type C64 = Complex64;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Square complex matrix equal to its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(DMatrix<C64>);

fn asymmetry(m: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn max_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

impl HermitianMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(GeometryError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let residual = asymmetry(&m);
        if residual > HERMITIAN_TOLERANCE * max_entry(&m).max(f64::MIN_POSITIVE) {
            return Err(GeometryError::NotHermitian { residual });
        }
        Ok(Self::from_hermitian_part(m))
    }

    /// `(M + M*) / 2`, for matrices that are Hermitian only up to discretisation error.
    pub fn from_hermitian_part(m: DMatrix<C64>) -> Self {
        let adj = m.adjoint();
        Self((m + adj) * C64::new(0.5, 0.0))
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        Self(DMatrix::from_diagonal_element(dim, dim, C64::new(c, 0.0)))
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.map(|z| z * c))
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn eigen(&self) -> HermitianEigen {
        decompose(&self.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen().values[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigen().values.last().expect("non-empty matrix")
    }
}

/// Eigenvalues in descending order with unit eigenvectors in the matching columns.
#[derive(Clone, Debug, Serialize)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    #[serde(skip)]
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k).iter().copied().collect()
    }
}

fn decompose(m: &DMatrix<C64>) -> HermitianEigen {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        // phase: first non-negligible component real positive
        let pivot = v
            .iter()
            .find(|z| z.norm() > 1e-10)
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        for i in 0..n {
            vectors[(i, col)] = v[i] * phase;
        }
    }
    HermitianEigen { values, vectors }
}

/// Eigendecomposition of a Hermitian matrix with descending eigenvalues.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> Result<HermitianEigen> {
    Ok(HermitianMatrix::new(m.clone())?.eigen())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PsdComparison {
    pub holds: bool,
    pub min_gap: f64,
}

/// Loewner order test `lower <= upper`: the smallest eigenvalue of `upper - lower`
/// must be at least `-tol`.
pub fn psd_order(lower: &HermitianMatrix, upper: &HermitianMatrix, tol: f64) -> Result<PsdComparison> {
    if lower.dim() != upper.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: lower.dim(),
            found: upper.dim(),
        });
    }
    let diff = HermitianMatrix::from_hermitian_part(upper.matrix() - lower.matrix());
    let min_gap = diff.min_eigenvalue();
    Ok(PsdComparison {
        holds: min_gap >= -tol,
        min_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_and_diagonal() {
        let e = HermitianMatrix::identity(2).eigen();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let d = HermitianMatrix::from_real_diagonal(&[1.0, 3.0]).eigen();
        assert!((d.values[0] - 3.0).abs() < 1e-14 && (d.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_with_imaginary_coupling() {
        // characteristic polynomial (2 - x)^2 - |i|^2 = 0 -> x = 3, 1
        let m = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let e = hermitian_eigen(&m).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        for k in 0..2 {
            let v = e.vectors.column(k).into_owned();
            let r = &m * &v - v * c(e.values[k], 0.0);
            assert!(r.norm() < 1e-10 * 3.0);
            assert!(e.vectors[(0, k)].im.abs() < 1e-14 && e.vectors[(0, k)].re > 0.0);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(hermitian_eigen(&m), Err(GeometryError::NotHermitian { .. })));
    }

    #[test]
    fn psd_examples() {
        let zero = HermitianMatrix::scaled_identity(2, 0.0);
        let id = HermitianMatrix::identity(2);
        let r = psd_order(&zero, &id, 1e-12).unwrap();
        assert!(r.holds && (r.min_gap - 1.0).abs() < 1e-14);
        let a = HermitianMatrix::from_real_diagonal(&[2.0, 0.0]);
        let r = psd_order(&a, &id, 1e-12).unwrap();
        assert!(!r.holds && (r.min_gap + 1.0).abs() < 1e-14);
        // coth(1)/2 against 2
        let x = HermitianMatrix::scaled_identity(1, 0.5 / 1f64.tanh());
        let y = HermitianMatrix::scaled_identity(1, 2.0);
        let r = psd_order(&x, &y, 1e-3).unwrap();
        assert!(r.holds && (r.min_gap - 1.343_482).abs() < 1e-5);
        assert!(psd_order(&id, &HermitianMatrix::identity(3), 0.0).is_err());
    }

    fn random_hermitian(n: usize, entries: &[f64]) -> DMatrix<C64> {
        let a = DMatrix::from_fn(n, n, |i, j| c(entries[2 * (i * n + j)], entries[2 * (i * n + j) + 1]));
        let adj = a.adjoint();
        a + adj
    }

    proptest! {
        #[test]
        fn reconstruction(n in 1usize..=8, entries in prop::collection::vec(-1.0f64..1.0, 128)) {
            let m = random_hermitian(n, &entries);
            let e = hermitian_eigen(&m).unwrap();
            for w in e.values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            let d = DMatrix::from_fn(n, n, |i, j| if i == j { c(e.values[i], 0.0) } else { c(0.0, 0.0) });
            let rebuilt = &e.vectors * d * e.vectors.adjoint();
            let scale = m.norm().max(1e-300);
            prop_assert!((rebuilt - &m).norm() <= 1e-9 * scale);
        }

        #[test]
        fn psd_reflexive_and_antisymmetric(n in 1usize..=4, a in prop::collection::vec(-1.0f64..1.0, 32), b in prop::collection::vec(-1.0f64..1.0, 32)) {
            let pa = { let m = random_hermitian(n, &a); HermitianMatrix::from_hermitian_part(&m * m.adjoint()) };
            let pb = { let m = random_hermitian(n, &b); HermitianMatrix::from_hermitian_part(&m * m.adjoint()) };
            prop_assert!(psd_order(&pa, &pa, 1e-10).unwrap().holds);
            let ab = psd_order(&pa, &pb, 1e-10).unwrap().holds;
            let ba = psd_order(&pb, &pa, 1e-10).unwrap().holds;
            if ab && ba {
                prop_assert!((pa.matrix() - pb.matrix()).norm() < 1e-6 * (1.0 + pa.norm()));
            }
        }
    }
}
