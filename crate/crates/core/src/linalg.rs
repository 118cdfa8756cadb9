//! Small dense complex linear algebra used by the solvers.
//!
//! Everything here operates on `nalgebra` dynamic matrices of `Complex64`.
//! Matrices are tiny (dimension at most a few dozen), so clarity wins over
//! blocking or allocation tricks.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `(A + A†) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Largest absolute value over all entries (0 for an empty matrix).
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Real part of `Tr(A B)`; the Frobenius inner product for Hermitian `A`.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// `|v⟩⟨v|`.
pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// `⟨v| A |v⟩`, real part.
pub fn expectation(a: &CMat, v: &CVec) -> f64 {
    (v.adjoint() * a * v)[(0, 0)].re
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending order.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn eigh(a: &CMat) -> HermitianEigen {
    let n = a.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    eigh(a).values[0]
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn spectral_map(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let HermitianEigen { values, vectors } = eigh(a);
    let n = a.nrows();
    let mut scaled = vectors.clone();
    for (c, &lambda) in values.iter().enumerate() {
        let w = Complex64::new(f(lambda), 0.0);
        for r in 0..n {
            scaled[(r, c)] *= w;
        }
    }
    hermitian_part(&(scaled * vectors.adjoint()))
}

/// Inverse square root restricted to the support: eigenvalues at or below
/// `rel_cutoff * λ_max` map to zero.
pub fn inv_sqrt_on_support(a: &CMat, rel_cutoff: f64) -> (CMat, CMat) {
    let HermitianEigen { values, vectors } = eigh(a);
    let lambda_max = values.last().copied().unwrap_or(0.0).max(0.0);
    let cut = rel_cutoff * lambda_max;
    let n = a.nrows();
    let mut inv = CMat::zeros(n, n);
    let mut proj = CMat::zeros(n, n);
    for (c, &lambda) in values.iter().enumerate() {
        if lambda > cut && lambda > 0.0 {
            let col = vectors.column(c).into_owned();
            let p = outer(&col);
            inv += &p * Complex64::new(1.0 / lambda.sqrt(), 0.0);
            proj += p;
        }
    }
    (hermitian_part(&inv), hermitian_part(&proj))
}

/// Cholesky factor of a Hermitian positive definite matrix, or `None`.
pub fn cholesky(a: &CMat) -> Option<Cholesky<Complex64, nalgebra::Dyn>> {
    Cholesky::new(hermitian_part(a))
}

/// Inverse of a Hermitian positive definite matrix.
pub fn hpd_inverse(a: &CMat) -> Option<CMat> {
    cholesky(a).map(|c| hermitian_part(&c.inverse()))
}

/// Largest `α ≥ 0` keeping `X + α·D` positive semidefinite, given `X ≻ 0`.
/// Returns `f64::INFINITY` when every step length is admissible.
pub fn max_psd_step(x: &CMat, d: &CMat) -> f64 {
    if x.nrows() == 1 {
        let (xv, dv) = (x[(0, 0)].re, d[(0, 0)].re);
        return if dv < 0.0 { -xv / dv } else { f64::INFINITY };
    }
    let Some(chol) = cholesky(x) else {
        return 0.0;
    };
    let l = chol.l();
    // L^{-1} D L^{-†}
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let s = &linv * d * linv.adjoint();
    let lambda = min_eigenvalue(&s);
    if lambda < 0.0 {
        -1.0 / lambda
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigh_sorts_ascending_and_reconstructs() {
        let a = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let e = eigh(&a);
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
        let diag = CMat::from_diagonal(&CVec::from_iterator(2, e.values.iter().map(|&v| c(v, 0.0))));
        let back = &e.vectors * diag * e.vectors.adjoint();
        assert!(max_abs(&(back - a)) < 1e-12);
    }

    #[test]
    fn inv_sqrt_drops_null_space() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(4.0, 0.0), c(0.0, 0.0)]));
        let (inv, proj) = inv_sqrt_on_support(&a, 1e-12);
        assert!((inv[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!(inv[(1, 1)].norm() < 1e-14);
        assert!((proj[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(proj[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn psd_step_hits_boundary() {
        let x = identity(2);
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(-2.0, 0.0), c(1.0, 0.0)]));
        assert!((max_psd_step(&x, &d) - 0.5).abs() < 1e-12);
        assert!(max_psd_step(&x, &identity(2)).is_infinite());
    }
}
