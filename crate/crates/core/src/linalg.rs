//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Number of qubits for a `2^n`-dimensional space.
pub fn qubit_count(dim: usize) -> Option<usize> {
    if dim.is_power_of_two() {
        Some(dim.trailing_zeros() as usize)
    } else {
        None
    }
}

/// Bit mask selecting `site` (1-based) in a basis index; site 1 is the most
/// significant bit, so the tensor order is site 1 ⊗ site 2 ⊗ … ⊗ site N.
#[inline]
pub fn site_mask(site: usize, n_sites: usize) -> usize {
    1 << (n_sites - site)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Largest elementwise `|m - m†|`.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// `(m + m†) / 2`, in place.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        m[(j, j)] = C64::new(m[(j, j)].re, 0.0);
    }
}

fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted
/// ascending and eigenvector columns permuted to match.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    let (values, vectors) = if is_real(m) {
        let re = m.map(|z| z.re);
        let eig = re.try_symmetric_eigen(f64::EPSILON, 0).ok_or(Error::EigensolverFailure)?;
        (eig.eigenvalues, eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let eig = m
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or(Error::EigensolverFailure)?;
        (eig.eigenvalues, eig.eigenvectors)
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigensolverFailure);
    }
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the solver's order among exact ties.
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let mut cols = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        cols.set_column(dst, &vectors.column(src));
    }
    Ok((sorted, cols))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let values = if is_real(m) {
        m.map(|z| z.re).symmetric_eigenvalues()
    } else {
        m.clone().symmetric_eigenvalues()
    };
    let mut v: Vec<f64> = values.iter().copied().collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigensolverFailure);
    }
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Places a single-site operator at `site` (1-based) of an `n_sites` chain,
/// identity elsewhere.
pub fn embed_site_operator(op: &Matrix2<C64>, site: usize, n_sites: usize) -> CMatrix {
    let dim = 1usize << n_sites;
    let mask = site_mask(site, n_sites);
    CMatrix::from_fn(dim, dim, |a, b| {
        if (a & !mask) != (b & !mask) {
            return ZERO;
        }
        let ra = usize::from(a & mask != 0);
        let rb = usize::from(b & mask != 0);
        op[(ra, rb)]
    })
}

pub mod pauli {
    use super::*;

    pub fn identity() -> Matrix2<C64> {
        Matrix2::identity()
    }
    pub fn x() -> Matrix2<C64> {
        Matrix2::new(ZERO, ONE, ONE, ZERO)
    }
    pub fn y() -> Matrix2<C64> {
        Matrix2::new(ZERO, -I, I, ZERO)
    }
    pub fn z() -> Matrix2<C64> {
        Matrix2::new(ONE, ZERO, ZERO, -ONE)
    }
    /// `(σx + iσy)/2`, mapping |1⟩ to |0⟩.
    pub fn raising() -> Matrix2<C64> {
        Matrix2::new(ZERO, ONE, ZERO, ZERO)
    }
    pub fn lowering() -> Matrix2<C64> {
        Matrix2::new(ZERO, ZERO, ONE, ZERO)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raising_is_half_x_plus_iy() {
        let expected = (pauli::x() + pauli::y() * I) * C64::new(0.5, 0.0);
        assert_eq!(pauli::raising(), expected);
        assert_eq!(pauli::lowering(), pauli::raising().adjoint());
    }

    #[test]
    fn embedding_matches_kronecker() {
        let z = pauli::z();
        let id = pauli::identity();
        let kron = id.kronecker(&z).kronecker(&id);
        let emb = embed_site_operator(&z, 2, 3);
        assert_eq!(emb, CMatrix::from_iterator(8, 8, kron.iter().copied()));
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let m = CMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                C64::new([3.0, -1.0, 2.0, 0.5][i], 0.0)
            } else if i < j {
                C64::new(0.1 * (i + j) as f64, 0.05 * j as f64)
            } else {
                C64::new(0.1 * (i + j) as f64, -0.05 * i as f64)
            }
        });
        let (vals, vecs) = hermitian_eigen(&m).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            vals.iter().map(|&v| C64::new(v, 0.0)),
        ));
        let back = &vecs * d * vecs.adjoint();
        assert!((back - &m).camax() < 1e-12);
    }
}
