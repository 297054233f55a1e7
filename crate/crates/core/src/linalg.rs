//! Small dense helpers on complex coordinate vectors.

use nalgebra::DMatrix;
use num_complex::Complex64;

type C = Complex64;

/// Hermitian product `<a, b> = sum a_i conj(b_i)`.
#[inline]
pub fn hdot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Bilinear product `sum a_i b_i`.
#[inline]
pub fn bdot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

#[inline]
pub fn norm(a: &[C]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn scale(a: &[C], s: C) -> Vec<C> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[C], s: C, b: &[C]) -> Vec<C> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn sub(a: &[C], b: &[C]) -> Vec<C> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn conj(a: &[C]) -> Vec<C> {
    a.iter().map(|x| x.conj()).collect()
}

/// Removes from `v` its components along the orthonormal vectors `basis`.
pub fn project_out(v: &mut [C], basis: &[Vec<C>]) {
    for b in basis {
        let c = hdot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
}

/// Multiplies `w` by a unit phase so that `<w, reference>` is real and non-negative.
pub fn align_phase(w: &[C], reference: &[C]) -> Vec<C> {
    let p = hdot(reference, w);
    let r = p.norm();
    if r == 0.0 {
        return w.to_vec();
    }
    scale(w, p / r)
}

pub fn determinant(columns: &[Vec<C>]) -> C {
    let n = columns.len();
    let m = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
    m.determinant()
}

/// Fubini-Study Hermitian product of homogeneous tangent vectors at `z`
/// (any representative), normalized so that `CP^1` has area `pi`.
pub fn fs_product(z: &[C], v: &[C], w: &[C]) -> C {
    let zz = norm_sq(z);
    (hdot(v, w) * zz - hdot(v, z) * hdot(z, w)) / (zz * zz)
}

/// Largest `|x|` entry of a Hermitian matrix difference, used for residual reports.
pub fn max_abs(m: &DMatrix<C>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian pencil `a v = lambda b v` with `b` positive definite.
pub fn generalized_hermitian_eigenvalues(a: &DMatrix<C>, b: &DMatrix<C>) -> Option<Vec<f64>> {
    let chol = b.clone().cholesky()?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let m = &linv * a * linv.adjoint();
    let sym = (&m + m.adjoint()) * C::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Some(vals)
}
