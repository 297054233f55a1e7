//! Points of projective space, smooth hypersurfaces, tangent frames and the
//! restricted Fubini-Study metric.
//!
//! Conventions: `omega_FS = (i/2) dd^c log |z|^2`, so a projective line has
//! area `pi`. Hermitian metric matrices are written so that an orthonormal
//! frame of the horizontal space at a unit representative has the identity
//! matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, hdot, norm, norm_sq};
use crate::poly::HomogeneousPolynomial;

type C = Complex64;

/// Relative gradient threshold below which a point counts as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-8;

/// A point of `CP^n` stored as a unit vector whose chart coordinate (the one
/// of largest modulus) is real and positive.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectivePoint {
    coords: Vec<C>,
    chart: usize,
}

fn largest_index(z: &[C]) -> usize {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, x) in z.iter().enumerate() {
        let a = x.norm_sqr();
        if a > best_abs {
            best = i;
            best_abs = a;
        }
    }
    best
}

impl ProjectivePoint {
    pub fn new(z: Vec<C>) -> Result<Self> {
        let r = norm(&z);
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(
                "homogeneous coordinates must be finite and nonzero".into(),
            ));
        }
        let chart = largest_index(&z);
        let zc = z[chart];
        let phase = zc.conj() / zc.norm();
        let mut coords: Vec<C> = z.iter().map(|x| x * phase / r).collect();
        coords[chart] = C::new(coords[chart].norm(), 0.0);
        Ok(ProjectivePoint { coords, chart })
    }

    /// Rebuilds a point from stored normalized coordinates without
    /// renormalizing, so persisted pools reload bit-for-bit.
    pub fn from_normalized(coords: Vec<C>, chart: usize) -> Result<Self> {
        let ok = chart < coords.len()
            && (norm(&coords) - 1.0).abs() <= 1e-12
            && coords[chart].im == 0.0
            && coords[chart].re > 0.0;
        if !ok {
            return Err(Error::InvalidParameter(
                "stored point is not in normalized form".into(),
            ));
        }
        Ok(ProjectivePoint { coords, chart })
    }

    pub fn from_real(x: &[f64]) -> Result<Self> {
        Self::new(x.iter().map(|&v| C::new(v, 0.0)).collect())
    }

    pub fn coords(&self) -> &[C] {
        &self.coords
    }

    pub fn chart(&self) -> usize {
        self.chart
    }

    pub fn num_vars(&self) -> usize {
        self.coords.len()
    }

    /// Coordinatewise conjugate. The normalization is conjugation-stable, so
    /// applying this twice returns the identical point.
    pub fn conjugate(&self) -> Self {
        ProjectivePoint {
            coords: linalg::conj(&self.coords),
            chart: self.chart,
        }
    }

    /// Largest imaginary part of the normalized coordinates; zero exactly on
    /// the real locus.
    pub fn reality_residual(&self) -> f64 {
        self.coords.iter().map(|x| x.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.reality_residual() <= tol
    }

    /// Fubini-Study distance `arccos |<z, w>|`, evaluated through `atan2`
    /// to stay accurate for nearby points.
    pub fn fs_distance(&self, other: &ProjectivePoint) -> f64 {
        let c = hdot(&other.coords, &self.coords);
        let perp = linalg::axpy(&other.coords, -c, &self.coords);
        norm(&perp).atan2(c.norm())
    }

    /// Half the Fubini-Study distance to the conjugate point: a proxy for the
    /// distance to the real locus that vanishes exactly there.
    pub fn distance_to_real_proxy(&self) -> f64 {
        0.5 * self.fs_distance(&self.conjugate())
    }

    /// Affine coordinates `z / z_chart`.
    pub fn affine(&self, chart: usize) -> Vec<C> {
        let zc = self.coords[chart];
        self.coords.iter().map(|x| x / zc).collect()
    }
}

/// The antiholomorphic involution of `CP^n` induced by complex conjugation.
pub fn conjugation(pt: &ProjectivePoint) -> ProjectivePoint {
    pt.conjugate()
}

/// Orthonormal basis of the holomorphic tangent space of a hypersurface at a
/// point, written as homogeneous vectors orthogonal to the base point.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    base: ProjectivePoint,
    vectors: Vec<Vec<C>>,
}

impl TangentFrame {
    pub fn base(&self) -> &ProjectivePoint {
        &self.base
    }

    pub fn vectors(&self) -> &[Vec<C>] {
        &self.vectors
    }

    pub fn conjugate(&self) -> TangentFrame {
        TangentFrame {
            base: self.base.conjugate(),
            vectors: self.vectors.iter().map(|v| linalg::conj(v)).collect(),
        }
    }

    /// Largest imaginary part among the frame vectors.
    pub fn realness_residual(&self) -> f64 {
        self.vectors
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x.im.abs())
            .fold(0.0, f64::max)
    }
}

/// A hypersurface `F = 0` in `CP^n` with cached gradient polynomials.
#[derive(Clone, Debug)]
pub struct Hypersurface {
    poly: HomogeneousPolynomial,
    grad: Vec<HomogeneousPolynomial>,
    scale: f64,
}

impl Hypersurface {
    pub fn new(poly: HomogeneousPolynomial) -> Result<Self> {
        if poly.num_vars() < 3 {
            return Err(Error::InvalidPolynomial(
                "hypersurfaces need at least 3 homogeneous variables".into(),
            ));
        }
        if poly.degree() < 1 || poly.is_zero() {
            return Err(Error::InvalidPolynomial(
                "defining polynomial must be nonzero of degree >= 1".into(),
            ));
        }
        let grad = (0..poly.num_vars()).map(|i| poly.partial(i)).collect();
        let scale = poly.coefficient_scale();
        Ok(Hypersurface { poly, grad, scale })
    }

    pub fn poly(&self) -> &HomogeneousPolynomial {
        &self.poly
    }

    pub fn degree(&self) -> u32 {
        self.poly.degree()
    }

    pub fn num_vars(&self) -> usize {
        self.poly.num_vars()
    }

    /// `n` for a hypersurface in `CP^n`.
    pub fn ambient_dim(&self) -> usize {
        self.poly.num_vars() - 1
    }

    /// Complex dimension of the hypersurface.
    pub fn dim(&self) -> usize {
        self.poly.num_vars() - 2
    }

    /// `d - n - 1`: the canonical bundle is `O(d - n - 1)`.
    pub fn canonical_degree(&self) -> i64 {
        self.degree() as i64 - self.num_vars() as i64
    }

    pub fn is_real(&self) -> bool {
        self.poly.is_real()
    }

    pub fn coefficient_scale(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, z: &[C]) -> Result<C> {
        self.poly.eval(z)
    }

    pub fn gradient(&self, z: &[C]) -> Vec<C> {
        self.grad.iter().map(|g| g.eval_unchecked(z)).collect()
    }

    pub fn gradient_polys(&self) -> &[HomogeneousPolynomial] {
        &self.grad
    }

    /// `|F(z)| / (scale * |z|^d)`.
    pub fn residual(&self, z: &[C]) -> f64 {
        let r = norm(z).powi(self.degree() as i32);
        self.poly.eval_unchecked(z).norm() / (self.scale * r)
    }

    /// Gradient at `z`, or an error when it is below the singular threshold.
    pub fn smooth_gradient(&self, z: &[C]) -> Result<Vec<C>> {
        let g = self.gradient(z);
        let r = norm(z).powi(self.degree() as i32 - 1);
        let gn = norm(&g) / r;
        if gn < SINGULAR_THRESHOLD * self.scale * self.degree() as f64 {
            return Err(Error::SingularPoint(gn));
        }
        Ok(g)
    }

    /// Newton projection onto the hypersurface with minimal-norm steps,
    /// returning a unit representative. Fails if the residual stays above
    /// `tol` after `max_iter` steps.
    pub fn project(&self, z: &[C], max_iter: usize, tol: f64) -> Result<Vec<C>> {
        let mut w = linalg::scale(z, C::new(1.0 / norm(z), 0.0));
        for _ in 0..=max_iter {
            let f = self.poly.eval_unchecked(&w);
            if f.norm() <= tol * self.scale {
                return Ok(w);
            }
            let g = self.smooth_gradient(&w)?;
            let gg = norm_sq(&g);
            let step = f / gg;
            for (x, gi) in w.iter_mut().zip(&g) {
                *x -= step * gi.conj();
            }
            let r = norm(&w);
            w.iter_mut().for_each(|x| *x /= r);
        }
        let f = self.poly.eval_unchecked(&w).norm() / self.scale;
        if f <= tol {
            Ok(w)
        } else {
            Err(Error::ProjectionFailed(f))
        }
    }

    /// Unit normal `conj(grad F) / |grad F|` at a unit point of the hypersurface.
    pub fn unit_normal(&self, z: &[C]) -> Result<Vec<C>> {
        let g = self.smooth_gradient(z)?;
        let r = norm(&g);
        Ok(g.iter().map(|x| x.conj() / r).collect())
    }

    /// Orthogonal projection of a homogeneous vector onto the tangent space at
    /// the unit point `z` (removing the `z` and normal components).
    pub fn tangent_projection(&self, z: &[C], v: &[C]) -> Result<Vec<C>> {
        let nrm = self.unit_normal(z)?;
        let zn = norm(z);
        let zu: Vec<C> = z.iter().map(|x| x / zn).collect();
        let mut out = v.to_vec();
        linalg::project_out(&mut out, &[zu, nrm]);
        Ok(out)
    }

    /// Deterministic orthonormal frame of the holomorphic tangent space:
    /// Gram-Schmidt over the coordinate vectors, taking at each step the one
    /// with the largest residual (ties broken by coordinate order).
    pub fn tangent_frame(&self, pt: &ProjectivePoint) -> Result<TangentFrame> {
        let z = pt.coords();
        let n = z.len();
        let nrm = self.unit_normal(z)?;
        let mut basis: Vec<Vec<C>> = vec![z.to_vec(), nrm];
        let mut vectors = Vec::with_capacity(self.dim());
        for _ in 0..self.dim() {
            let mut best: Option<(f64, Vec<C>)> = None;
            for j in 0..n {
                let mut e = vec![C::new(0.0, 0.0); n];
                e[j] = C::new(1.0, 0.0);
                linalg::project_out(&mut e, &basis);
                // second pass for stability
                linalg::project_out(&mut e, &basis);
                let r = norm(&e);
                if best.as_ref().map_or(true, |(b, _)| r > *b + 1e-14) {
                    best = Some((r, e));
                }
            }
            let (r, mut e) = best.ok_or(Error::DegenerateFrame)?;
            if r < 1e-8 {
                return Err(Error::DegenerateFrame);
            }
            e.iter_mut().for_each(|x| *x /= r);
            basis.push(e.clone());
            vectors.push(e);
        }
        Ok(TangentFrame {
            base: pt.clone(),
            vectors,
        })
    }

    /// Matrix `g(v_i, v_j)` of the ambient Fubini-Study metric on the given
    /// homogeneous tangent vectors at `z`.
    pub fn fs_metric_matrix(&self, z: &[C], vectors: &[Vec<C>]) -> DMatrix<C> {
        let k = vectors.len();
        DMatrix::from_fn(k, k, |i, j| linalg::fs_product(z, &vectors[i], &vectors[j]))
    }

    /// Restricted Fubini-Study metric at `pt` in its tangent frame.
    pub fn fs_metric_restricted(&self, pt: &ProjectivePoint) -> Result<DMatrix<C>> {
        let frame = self.tangent_frame(pt)?;
        Ok(self.fs_metric_matrix(pt.coords(), frame.vectors()))
    }

    /// The global residue `(n-1,0)`-form evaluated on homogeneous tangent
    /// vectors: `det[z, v_1, .., v_k, e_l] / (dF/dz_l)(z)`, with `l` the
    /// index of the largest partial. Homogeneous of degree `n + 1 - d` under
    /// joint rescaling of `z` and the `v_i`, and independent of `l` on the
    /// hypersurface.
    pub fn residue_form(&self, z: &[C], vectors: &[Vec<C>]) -> Result<C> {
        if vectors.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: vectors.len(),
            });
        }
        let g = self.smooth_gradient(z)?;
        let l = largest_index(&g);
        self.residue_form_with(z, vectors, l, &g)
    }

    pub(crate) fn residue_form_with(
        &self,
        z: &[C],
        vectors: &[Vec<C>],
        l: usize,
        grad: &[C],
    ) -> Result<C> {
        let n = z.len();
        let mut cols: Vec<Vec<C>> = Vec::with_capacity(n);
        cols.push(z.to_vec());
        cols.extend(vectors.iter().cloned());
        let mut e = vec![C::new(0.0, 0.0); n];
        e[l] = C::new(1.0, 0.0);
        cols.push(e);
        Ok(linalg::determinant(&cols) / grad[l])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> Hypersurface {
        Hypersurface::new(HomogeneousPolynomial::fermat(&[1.0, 1.0, -1.0], 4).unwrap()).unwrap()
    }

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn conjugation_examples() {
        let p = ProjectivePoint::new(vec![c(1., 0.), c(0., 1.), c(0., 0.)]).unwrap();
        let q = conjugation(&p);
        let expected = ProjectivePoint::new(vec![c(1., 0.), c(0., -1.), c(0., 0.)]).unwrap();
        assert!(q.fs_distance(&expected) < 1e-14);
        let r = ProjectivePoint::from_real(&[0.3, -2.0, 1.0]).unwrap();
        assert_eq!(conjugation(&r), r);
    }

    #[test]
    fn normalization_makes_real_points_real() {
        let p = ProjectivePoint::new(vec![c(0.0, 0.3), c(0.0, -2.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(p.chart(), 1);
        assert!(p.reality_residual() < 1e-16);
        assert!((norm(p.coords()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frame_annihilates_gradient() {
        let hs = quartic();
        let z = hs
            .project(&[c(0.7, 0.2), c(0.5, -0.3), c(0.9, 0.1)], 30, 1e-14)
            .unwrap();
        let pt = ProjectivePoint::new(z).unwrap();
        let frame = hs.tangent_frame(&pt).unwrap();
        assert_eq!(frame.vectors().len(), 1);
        let g = hs.gradient(pt.coords());
        for v in frame.vectors() {
            assert!(linalg::bdot(&g, v).norm() < 1e-12);
            assert!((norm(v) - 1.0).abs() < 1e-12);
        }
        let m = hs.fs_metric_restricted(&pt).unwrap();
        assert!((m[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn singular_point_rejected() {
        // x*y*z has a singular point at [1:0:0]
        let p = HomogeneousPolynomial::from_real_terms(3, 3, &[(&[1, 1, 1], 1.0)]).unwrap();
        let hs = Hypersurface::new(p).unwrap();
        let pt = ProjectivePoint::from_real(&[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hs.tangent_frame(&pt), Err(Error::SingularPoint(_))));
    }

    #[test]
    fn residue_form_independent_of_partial() {
        let hs = quartic();
        let z = hs
            .project(&[c(0.2, 0.6), c(0.8, -0.1), c(0.4, 0.3)], 30, 1e-14)
            .unwrap();
        let pt = ProjectivePoint::new(z.clone()).unwrap();
        let frame = hs.tangent_frame(&pt).unwrap();
        let g = hs.gradient(pt.coords());
        let vals: Vec<C> = (0..3)
            .map(|l| {
                hs.residue_form_with(pt.coords(), frame.vectors(), l, &g)
                    .unwrap()
            })
            .collect();
        for v in &vals[1..] {
            assert!((v - vals[0]).norm() < 1e-12 * vals[0].norm());
        }
    }
}
