//! Hermitian metrics on hypersurfaces, evaluated on homogeneous tangent
//! vectors. Matrices use the convention `g(v, w)` with `g` the coefficient of
//! `du dū` in the metric, so that the Fubini-Study metric of `CP^1` has area
//! `pi`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bergman::BergmanData;
use crate::error::{Error, Result};
use crate::linalg::{hdot, norm_sq};
use crate::projective::{Hypersurface, ProjectivePoint};

type C = Complex64;

#[derive(Clone, Debug)]
pub enum MetricContext {
    /// Restriction of the ambient Fubini-Study metric.
    FubiniStudy,
    /// The metric `g_m` on a curve dual to `h_m` on `K`.
    Bergman(Arc<BergmanData>),
    /// `e^f` times the base metric.
    Conformal {
        base: Box<MetricContext>,
        bump: ConformalBump,
    },
    /// A constant multiple of the base metric.
    Scaled { base: Box<MetricContext>, factor: f64 },
}

impl MetricContext {
    /// Gram matrix `g(v_i, v_j)` of homogeneous tangent vectors at `z`
    /// (any representative; vectors scale with it).
    pub fn matrix(&self, hs: &Hypersurface, z: &[C], vectors: &[Vec<C>]) -> Result<DMatrix<C>> {
        match self {
            MetricContext::FubiniStudy => Ok(hs.fs_metric_matrix(z, vectors)),
            MetricContext::Bergman(bd) => {
                if hs.dim() != 1 {
                    return Err(Error::UnsupportedDimension { expected: 1, got: hs.dim() });
                }
                let s = bd.kodaira_norm_sq_checked(z)?;
                let factor = s.powf(1.0 / bd.power() as f64);
                let omegas: Vec<C> = vectors
                    .iter()
                    .map(|v| hs.residue_form(z, std::slice::from_ref(v)))
                    .collect::<Result<_>>()?;
                Ok(DMatrix::from_fn(vectors.len(), vectors.len(), |i, j| {
                    omegas[i] * omegas[j].conj() * factor
                }))
            }
            MetricContext::Conformal { base, bump } => {
                Ok(base.matrix(hs, z, vectors)? * C::new(bump.value(z).exp(), 0.0))
            }
            MetricContext::Scaled { base, factor } => Ok(base.matrix(hs, z, vectors)? * C::new(*factor, 0.0)),
        }
    }

    pub fn norm_sq(&self, hs: &Hypersurface, z: &[C], v: &[C]) -> Result<f64> {
        Ok(self.matrix(hs, z, &[v.to_vec()])?[(0, 0)].re)
    }

    pub fn scaled(self, factor: f64) -> Result<MetricContext> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidParameter(format!("metric scale {factor} must be positive")));
        }
        Ok(MetricContext::Scaled {
            base: Box::new(self),
            factor,
        })
    }

    /// Wraps `self` with a conformal factor `e^f`.
    pub fn with_bump(self, bump: ConformalBump) -> MetricContext {
        MetricContext::Conformal {
            base: Box::new(self),
            bump,
        }
    }
}

/// `gm_metric`: the curve metric whose induced metric on `K` is `h_m`.
pub fn gm_metric(hs: &Hypersurface, bd: Arc<BergmanData>) -> Result<MetricContext> {
    if hs.dim() != 1 {
        return Err(Error::UnsupportedDimension { expected: 1, got: hs.dim() });
    }
    if bd.num_vars() != hs.num_vars() {
        return Err(Error::DimensionMismatch {
            expected: hs.num_vars(),
            got: bd.num_vars(),
        });
    }
    Ok(MetricContext::Bergman(bd))
}

/// `conformal_bump(metric, center, amplitude, radius)`, symmetrized under
/// conjugation.
pub fn conformal_bump(
    metric: MetricContext,
    center: &ProjectivePoint,
    amplitude: f64,
    radius: f64,
) -> Result<MetricContext> {
    let bump = ConformalBump::new(vec![center.clone()], vec![amplitude], radius)?.symmetrize();
    Ok(metric.with_bump(bump))
}

/// Sum of smooth compactly supported bumps `A_i b(s_i)`, where
/// `s = (1 - |<z, c>|^2 / |z|^2) / sin^2(radius)` and
/// `b(s) = exp(1 - 1 / (1 - s))` for `s < 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalBump {
    centers: Vec<ProjectivePoint>,
    amplitudes: Vec<f64>,
    radius: f64,
}

fn profile(s: f64) -> (f64, f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let t = 1.0 / (1.0 - s);
    let b = (1.0 - t).exp();
    (b, -b * t * t, b * (t.powi(4) - 2.0 * t.powi(3)))
}

impl ConformalBump {
    pub fn new(centers: Vec<ProjectivePoint>, amplitudes: Vec<f64>, radius: f64) -> Result<Self> {
        if centers.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                got: amplitudes.len(),
            });
        }
        if !(radius > 0.0 && radius <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!("bump radius {radius} outside (0, pi/2]")));
        }
        if let Some(a) = amplitudes.iter().find(|a| !(**a > -1.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter(format!("bump amplitude {a} must exceed -1")));
        }
        Ok(ConformalBump {
            centers,
            amplitudes,
            radius,
        })
    }

    pub fn centers(&self) -> &[ProjectivePoint] {
        &self.centers
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Averages with the conjugate bump. Real centers merge with their
    /// conjugates, so applying this twice changes nothing.
    pub fn symmetrize(&self) -> Self {
        let mut centers: Vec<ProjectivePoint> = Vec::new();
        let mut amps: Vec<f64> = Vec::new();
        let mut add = |c: ProjectivePoint, a: f64| {
            if let Some(k) = centers.iter().position(|x| *x == c) {
                amps[k] += a;
            } else {
                centers.push(c);
                amps.push(a);
            }
        };
        for (c, &a) in self.centers.iter().zip(&self.amplitudes) {
            add(c.clone(), 0.5 * a);
            add(c.conjugate(), 0.5 * a);
        }
        ConformalBump {
            centers,
            amplitudes: amps,
            radius: self.radius,
        }
    }

    fn s_value(&self, z: &[C], c: &ProjectivePoint) -> (f64, C, f64) {
        let l = hdot(z, c.coords());
        let nz = norm_sq(z);
        let q = l.norm_sqr() / nz;
        let k = self.radius.sin().powi(2);
        ((1.0 - q) / k, l, nz)
    }

    pub fn value(&self, z: &[C]) -> f64 {
        self.centers
            .iter()
            .zip(&self.amplitudes)
            .map(|(c, a)| a * profile(self.s_value(z, c).0).0)
            .sum()
    }

    /// Complex Hessian `d_j dbar_k f` along holomorphic tangent vectors
    /// `v_j = dZ/du_j` at `z`.
    pub fn ddbar(&self, z: &[C], vectors: &[Vec<C>]) -> DMatrix<C> {
        let n = vectors.len();
        let kappa = self.radius.sin().powi(2);
        let mut out = DMatrix::zeros(n, n);
        for (c, &a) in self.centers.iter().zip(&self.amplitudes) {
            let (s, l, nz) = self.s_value(z, c);
            if s >= 1.0 || a == 0.0 {
                continue;
            }
            let (_, b1, b2) = profile(s);
            let q = l.norm_sqr() / nz;
            let lj: Vec<C> = vectors
                .iter()
                .map(|v| hdot(v, c.coords()) / l - hdot(v, z) / nz)
                .collect();
            for j in 0..n {
                for k in 0..n {
                    let g = crate::linalg::fs_product(z, &vectors[j], &vectors[k]);
                    let ddq = (lj[j] * lj[k].conj() - g) * q;
                    let dsj = -lj[j] * q / kappa;
                    let dsk = -lj[k] * q / kappa;
                    out[(j, k)] += (-ddq / kappa * b1 + dsj * dsk.conj() * b2) * a;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn symmetrize_is_idempotent() {
        let p = ProjectivePoint::new(vec![c(1.0, 0.0), c(0.2, 0.3), c(0.1, -0.4)]).unwrap();
        let r = ProjectivePoint::from_real(&[1.0, 0.5, -0.2]).unwrap();
        let b = ConformalBump::new(vec![p, r], vec![0.4, -0.3], 0.3).unwrap();
        let s = b.symmetrize();
        assert_eq!(s.centers().len(), 3);
        assert_eq!(s.symmetrize(), s);
    }

    #[test]
    fn amplitude_bound() {
        let r = ProjectivePoint::from_real(&[1.0, 0.0, 0.0]).unwrap();
        assert!(ConformalBump::new(vec![r], vec![-1.0], 0.3).is_err());
    }

    #[test]
    fn bump_is_compact() {
        let r = ProjectivePoint::from_real(&[1.0, 0.0, 0.0]).unwrap();
        let b = ConformalBump::new(vec![r], vec![0.5], 0.2).unwrap();
        assert!((b.value(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]) - 0.5).abs() < 1e-15);
        assert_eq!(b.value(&[c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)]), 0.0);
    }

    #[test]
    fn ddbar_matches_finite_differences() {
        let ctr = ProjectivePoint::new(vec![c(1.0, 0.0), c(0.1, 0.05), c(-0.05, 0.02)]).unwrap();
        let b = ConformalBump::new(vec![ctr], vec![0.7], 0.4).unwrap();
        // affine CP^2 chart Z = (1, u1, u2)
        let u0 = [c(0.15, -0.05), c(0.02, 0.1)];
        let z = |u: &[C]| vec![c(1.0, 0.0), u[0], u[1]];
        let vecs = vec![
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        ];
        let exact = b.ddbar(&z(&u0), &vecs);
        let h = 1e-4;
        let f = |dx: [f64; 4]| {
            let u = [u0[0] + c(dx[0], dx[1]), u0[1] + c(dx[2], dx[3])];
            b.value(&z(&u))
        };
        let d2 = |a: usize, bb: usize| {
            let mut pp = [0.0; 4];
            let mut pm = [0.0; 4];
            let mut mp = [0.0; 4];
            let mut mm = [0.0; 4];
            pp[a] += h;
            pp[bb] += h;
            pm[a] += h;
            pm[bb] -= h;
            mp[a] -= h;
            mp[bb] += h;
            mm[a] -= h;
            mm[bb] -= h;
            (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h)
        };
        for j in 0..2 {
            for k in 0..2 {
                let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
                let fd = c(d2(xj, xk) + d2(yj, yk), d2(xj, yk) - d2(yj, xk)) * 0.25;
                assert!((fd - exact[(j, k)]).norm() < 1e-5, "{j}{k}: {fd} vs {}", exact[(j, k)]);
            }
        }
    }
}
