//! Gram matrices of canonical sections, orthonormal real bases, the Kodaira
//! pullback quantities built from them, and the curvature diagnostic for the
//! metric induced on `K`.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::{CanonicalSection, LocalFrame, SectionBasis};
use crate::error::{Error, Result};
use crate::linalg::{self, fs_product};
use crate::metric::MetricContext;
use crate::poly::{monomial_jacobian, monomial_values, Exponent, HomogeneousPolynomial};
use crate::projective::{Hypersurface, ProjectivePoint};
use crate::sampling::SamplePool;

type C = Complex64;

const GRAM_CHUNK: usize = 1024;
/// Relative Cholesky pivot below which a Gram matrix counts as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-10;
/// Largest admissible imaginary part of a real Gram matrix, relative to its
/// largest entry.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Monte-Carlo Gram matrix with entrywise standard errors.
#[derive(Clone, Debug)]
pub struct GramEstimate {
    pub matrix: DMatrix<C>,
    pub standard_errors: DMatrix<f64>,
    pub samples: usize,
}

impl GramEstimate {
    pub fn max_standard_error(&self) -> f64 {
        self.standard_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_imaginary(&self) -> f64 {
        self.matrix.iter().map(|x| x.im.abs()).fold(0.0, f64::max)
    }
}

/// Pointwise weight `|Omega|^{2m}_h` of the unit residue form on an
/// orthonormal FS frame, under metric `g`: `(|Omega(V)|^2 / det g(V))^m`.
fn residue_weight(hs: &Hypersurface, pt: &ProjectivePoint, metric: &MetricContext, m: u32) -> Result<f64> {
    let frame = hs.tangent_frame(pt)?;
    let omega = hs.residue_form(pt.coords(), frame.vectors())?;
    let det = match metric {
        MetricContext::FubiniStudy => 1.0,
        _ => metric.matrix(hs, pt.coords(), frame.vectors())?.determinant().re,
    };
    if !(det > 0.0) {
        return Err(Error::DegenerateFrame);
    }
    Ok((omega.norm_sqr() / det).powi(m as i32))
}

/// `G_ij = sum_p w_p <s_i, s_j>_{h^m}(p)` over a complex-locus pool.
pub fn gram_matrix(
    hs: &Hypersurface,
    basis: &SectionBasis,
    pool: &SamplePool,
    metric: &MetricContext,
) -> Result<GramEstimate> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let m = basis.power();
    let (support, coeffs) = basis.expand();
    let k = basis.len();
    let npts = pool.len() as f64;
    // Points from one line are correlated, so standard errors are computed
    // over line clusters.
    let cluster = pool.line_cluster(hs);
    let chunk = cluster * (GRAM_CHUNK / cluster).max(1);
    type Partial = (DMatrix<C>, DMatrix<f64>, DMatrix<C>, f64);
    let partials: Vec<Result<Partial>> = pool
        .points
        .par_chunks(chunk)
        .zip(pool.weights.par_chunks(chunk))
        .map(|(pts, ws)| {
            let mut sum = DMatrix::<C>::zeros(k, k);
            let mut sq = DMatrix::<f64>::zeros(k, k);
            let mut cross = DMatrix::<C>::zeros(k, k);
            let mut nsq = 0.0;
            for (cp, cw) in pts.chunks(cluster).zip(ws.chunks(cluster)) {
                let mut u = DMatrix::<C>::zeros(k, k);
                for (pt, &w) in cp.iter().zip(cw) {
                    let t = residue_weight(hs, pt, metric, m)? * w * npts;
                    let mono = nalgebra::DVector::from_vec(monomial_values(&support, pt.coords()));
                    let vals = &coeffs * mono;
                    for i in 0..k {
                        for j in 0..k {
                            u[(i, j)] += vals[i] * vals[j].conj() * t;
                        }
                    }
                }
                let nc = cp.len() as f64;
                sq += u.map(|x| x.norm_sqr());
                cross += &u * C::new(nc, 0.0);
                nsq += nc * nc;
                sum += u;
            }
            Ok((sum, sq, cross, nsq))
        })
        .collect();
    let mut sum = DMatrix::<C>::zeros(k, k);
    let mut sq = DMatrix::<f64>::zeros(k, k);
    let mut cross = DMatrix::<C>::zeros(k, k);
    let mut nsq = 0.0;
    for p in partials {
        let (s, q, c, n2) = p?;
        sum += s;
        sq += q;
        cross += c;
        nsq += n2;
    }
    let mean = sum / C::new(npts, 0.0);
    let clusters = pool.len().div_ceil(cluster) as f64;
    let se = DMatrix::from_fn(k, k, |i, j| {
        let mu = mean[(i, j)];
        let ss = (sq[(i, j)] - 2.0 * (mu.conj() * cross[(i, j)]).re + mu.norm_sqr() * nsq).max(0.0);
        (clusters / (clusters - 1.0).max(1.0) * ss).sqrt() / npts
    });
    let est = GramEstimate {
        matrix: mean,
        standard_errors: se,
        samples: pool.len(),
    };
    complex_cholesky_check(&est.matrix)?;
    Ok(est)
}

fn complex_cholesky_check(g: &DMatrix<C>) -> Result<()> {
    let n = g.nrows();
    let mut l = DMatrix::<C>::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > PIVOT_TOLERANCE * g[(j, j)].re.abs()) || !(g[(j, j)].re > 0.0) {
            return Err(Error::QuadratureTooCoarse { index: j, pivot: d });
        }
        let dj = d.sqrt();
        l[(j, j)] = C::new(dj, 0.0);
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(())
}

/// Inverse lower Cholesky factor of a real symmetric positive definite matrix.
fn real_cholesky_inverse(g: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = g.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > PIVOT_TOLERANCE * g[(j, j)].abs()) || !(g[(j, j)] > 0.0) {
            return Err(Error::QuadratureTooCoarse { index: j, pivot: d });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    let diag = (0..n).map(|i| l[(i, i)]).collect();
    // forward substitution L X = I
    let mut inv = DMatrix::<f64>::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[(i, k)] * inv[(k, c)];
            }
            inv[(i, c)] = s / l[(i, i)];
        }
    }
    Ok((inv, diag))
}

fn real_part_checked(g: &DMatrix<C>) -> Result<DMatrix<f64>> {
    let scale = g.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let imag = g.iter().map(|x| x.im.abs()).fold(0.0, f64::max);
    if imag > IMAGINARY_TOLERANCE * scale {
        return Err(Error::NonRealGram(imag / scale));
    }
    Ok(g.map(|x| x.re))
}

/// Orthonormalizes a real-representative basis against `g` by the
/// lower-triangular factorization `G = L L^T`, `kappa = L^{-1} b`.
pub fn orthonormal_real_basis(g: &DMatrix<C>, basis: &SectionBasis) -> Result<SectionBasis> {
    Ok(orthonormalize(g, basis)?.0)
}

fn orthonormalize(g: &DMatrix<C>, basis: &SectionBasis) -> Result<(SectionBasis, DMatrix<f64>, Vec<f64>)> {
    if g.nrows() != basis.len() || g.ncols() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: g.nrows(),
        });
    }
    if let Some(s) = basis.sections().iter().find(|s| !s.has_real_representative()) {
        return Err(Error::InvalidParameter(format!(
            "basis section {} is not real",
            s.representative()
        )));
    }
    let gr = real_part_checked(g)?;
    let (linv, diag) = real_cholesky_inverse(&gr)?;
    let resid = &linv * &gr * linv.transpose() - DMatrix::<f64>::identity(gr.nrows(), gr.nrows());
    let residual = resid.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let num_vars = basis.sections()[0].representative().num_vars();
    let degree = basis.sections()[0].representative().degree();
    let mut out = Vec::with_capacity(basis.len());
    for i in 0..basis.len() {
        let mut p = HomogeneousPolynomial::zero(num_vars, degree);
        for j in 0..=i {
            p.add_scaled(basis.sections()[j].representative(), C::new(linv[(i, j)], 0.0))?;
        }
        out.push(CanonicalSection::from_parts(basis.power(), p));
    }
    Ok((
        SectionBasis::orthonormalized(basis.power(), out, residual),
        linv,
        diag,
    ))
}

/// Provenance of a Bergman basis.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Normalization {
    pub power: u32,
    pub dimension: usize,
    pub pool_seed: u64,
    pub pool_size: usize,
    pub pool_lines: usize,
    pub total_measure: f64,
    pub gram_residual: f64,
    pub gram_standard_error_max: f64,
    pub gram_imaginary_max: f64,
    pub cholesky_diagonal: Vec<f64>,
}

/// Orthonormal real basis `kappa_i` of the real sections of `K^m`, with the
/// section `phi_m = sum kappa_i^2`.
#[derive(Clone, Debug)]
pub struct BergmanData {
    power: u32,
    num_vars: usize,
    basis: SectionBasis,
    support: Vec<Exponent>,
    coeffs: DMatrix<f64>,
    phi: CanonicalSection,
    normalization: Normalization,
}

impl BergmanData {
    /// Orthonormalizes the monomial basis of `K^m` against the FS-induced
    /// inner product estimated on `pool`.
    pub fn build(hs: &Hypersurface, m: u32, pool: &SamplePool) -> Result<Self> {
        let raw = crate::canonical::section_space_basis(hs, m)?;
        let gram = gram_matrix(hs, &raw, pool, &MetricContext::FubiniStudy)?;
        let (basis, _, diag) = orthonormalize(&gram.matrix, &raw)?;
        let normalization = Normalization {
            power: m,
            dimension: basis.len(),
            pool_seed: pool.seed,
            pool_size: pool.len(),
            pool_lines: pool.lines,
            total_measure: pool.total_measure,
            gram_residual: basis.gram_residual().unwrap_or(0.0),
            gram_standard_error_max: gram.max_standard_error(),
            gram_imaginary_max: gram.max_imaginary(),
            cholesky_diagonal: diag,
        };
        Self::from_basis(hs, basis, normalization)
    }

    /// Wraps an orthonormal real basis.
    pub fn from_basis(hs: &Hypersurface, basis: SectionBasis, normalization: Normalization) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidParameter("empty basis".into()));
        }
        if let Some(s) = basis.sections().iter().find(|s| !s.has_real_representative()) {
            return Err(Error::InvalidParameter(format!(
                "basis section {} is not real",
                s.representative()
            )));
        }
        let power = basis.power();
        let (support, cm) = basis.expand();
        let coeffs = cm.map(|x| x.re);
        let first = basis.sections()[0].representative();
        let mut sq = HomogeneousPolynomial::zero(first.num_vars(), 2 * first.degree());
        for s in basis.sections() {
            sq.add_scaled(&s.representative().mul(s.representative())?, C::new(1.0, 0.0))?;
        }
        let phi = CanonicalSection::new(hs, 2 * power, sq.reduce_mod(hs.poly())?)?;
        Ok(BergmanData {
            power,
            num_vars: hs.num_vars(),
            basis,
            support,
            coeffs,
            phi,
            normalization,
        })
    }

    /// Replaces `kappa` by `O kappa` for a real orthogonal `O`.
    pub fn remixed(&self, hs: &Hypersurface, o: &DMatrix<f64>) -> Result<Self> {
        let k = self.basis.len();
        if o.nrows() != k || o.ncols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: o.nrows(),
            });
        }
        let dev = (o * o.transpose() - DMatrix::<f64>::identity(k, k)).abs().max();
        if dev > 1e-12 {
            return Err(Error::InvalidParameter(format!("matrix not orthogonal ({dev:e})")));
        }
        let s = self.basis.sections();
        let rep = s[0].representative();
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let mut p = HomogeneousPolynomial::zero(rep.num_vars(), rep.degree());
            for j in 0..k {
                p.add_scaled(s[j].representative(), C::new(o[(i, j)], 0.0))?;
            }
            out.push(CanonicalSection::from_parts(self.power, p));
        }
        let basis = SectionBasis::orthonormalized(self.power, out, self.basis.gram_residual().unwrap_or(0.0));
        Self::from_basis(hs, basis, self.normalization.clone())
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn basis(&self) -> &SectionBasis {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// `kappa_i(z)` at homogeneous coordinates `z`.
    pub fn values(&self, z: &[C]) -> Vec<C> {
        let mono = monomial_values(&self.support, z);
        (0..self.coeffs.nrows())
            .map(|i| {
                self.coeffs
                    .row(i)
                    .iter()
                    .zip(&mono)
                    .map(|(c, v)| v * *c)
                    .sum()
            })
            .collect()
    }

    /// Values and the Jacobian rows `d kappa_i / dz`.
    pub fn jacobian(&self, z: &[C]) -> (Vec<C>, Vec<Vec<C>>) {
        let (mv, mj) = monomial_jacobian(&self.support, z);
        let k = self.coeffs.nrows();
        let mut vals = vec![C::new(0.0, 0.0); k];
        let mut jac = vec![vec![C::new(0.0, 0.0); z.len()]; k];
        for i in 0..k {
            for (t, c) in self.coeffs.row(i).iter().enumerate() {
                if *c == 0.0 {
                    continue;
                }
                vals[i] += mv[t] * *c;
                for (a, d) in jac[i].iter_mut().zip(&mj[t]) {
                    *a += d * *c;
                }
            }
        }
        (vals, jac)
    }

    /// `sum |kappa_i(z)|^2`.
    pub fn kodaira_norm_sq(&self, z: &[C]) -> f64 {
        linalg::norm_sq(&self.values(z))
    }

    pub fn phi(&self) -> &CanonicalSection {
        &self.phi
    }

    pub(crate) fn check_base_point(&self, vals: &[C], z: &[C]) -> Result<f64> {
        let s = linalg::norm_sq(vals);
        let scale = self.coeffs.norm_squared() * linalg::norm_sq(z).powi(self.basis.sections()[0].representative().degree() as i32);
        if !(s > 1e-24 * scale) {
            return Err(Error::BasePoint(s / scale));
        }
        Ok(s)
    }

    /// `sum |kappa_i(z)|^2`, rejecting base points.
    pub fn kodaira_norm_sq_checked(&self, z: &[C]) -> Result<f64> {
        self.check_base_point(&self.values(z), z)
    }

    /// `|phi_m|_{h_m} = |sum a_i^2| / sum |a_i|^2` at homogeneous `z`.
    pub fn hm_norm_phi_at(&self, z: &[C]) -> Result<f64> {
        let a = self.values(z);
        let s = self.check_base_point(&a, z)?;
        Ok(linalg::bdot(&a, &a).norm() / s)
    }

    /// `omega_m(v_j, v_k) = (1/m) g_FS(d kappa v_j, d kappa v_k)` at `kappa(z)`.
    pub fn metric_on(&self, z: &[C], vectors: &[Vec<C>]) -> Result<DMatrix<C>> {
        let (a, jac) = self.jacobian(z);
        self.check_base_point(&a, z)?;
        let dv: Vec<Vec<C>> = vectors
            .iter()
            .map(|v| jac.iter().map(|row| linalg::bdot(row, v)).collect())
            .collect();
        let inv_m = 1.0 / self.power as f64;
        Ok(DMatrix::from_fn(vectors.len(), vectors.len(), |j, k| {
            fs_product(&a, &dv[j], &dv[k]) * inv_m
        }))
    }

    /// Serialized basis followed by the normalization record.
    pub fn to_text(&self) -> String {
        let mut s = self.basis.to_text();
        s.push_str(&format!(
            "# normalization {}\n",
            serde_json::to_string(&self.normalization).unwrap_or_default()
        ));
        s
    }
}

/// `rho_m = sum |kappa_i|^2_{h^m}` for `h` induced by the FS metric.
pub fn density_of_states(hs: &Hypersurface, bd: &BergmanData, pt: &ProjectivePoint) -> Result<f64> {
    let a = bd.values(pt.coords());
    let s = bd.check_base_point(&a, pt.coords())?;
    Ok(residue_weight(hs, pt, &MetricContext::FubiniStudy, bd.power)? * s)
}

/// `omega_m` on the FS-orthonormal tangent frame at `pt`.
pub fn bergman_metric(hs: &Hypersurface, bd: &BergmanData, pt: &ProjectivePoint) -> Result<DMatrix<C>> {
    let frame = hs.tangent_frame(pt)?;
    bd.metric_on(pt.coords(), frame.vectors())
}

pub fn phi_m(bd: &BergmanData) -> &CanonicalSection {
    bd.phi()
}

pub fn hm_norm_phi(bd: &BergmanData, pt: &ProjectivePoint) -> Result<f64> {
    bd.hm_norm_phi_at(pt.coords())
}

/// Mean and coefficient of variation of `rho_m` over points.
pub fn density_dispersion(hs: &Hypersurface, bd: &BergmanData, points: &[ProjectivePoint]) -> Result<(f64, f64)> {
    let vals: Vec<f64> = points
        .par_iter()
        .map(|p| density_of_states(hs, bd, p))
        .collect::<Result<_>>()?;
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, var.sqrt() / mean))
}

/// Complex Hessian `d_j dbar_k f` of a real function of `u in C^k` by central
/// differences with step `h` in each real direction.
pub fn complex_hessian_fd<F>(f: F, u0: &[C], h: f64) -> Result<DMatrix<C>>
where
    F: Fn(&[C]) -> Result<f64>,
{
    let k = u0.len();
    let eval = |shift: &[(usize, f64)]| -> Result<f64> {
        let mut u = u0.to_vec();
        for &(r, s) in shift {
            let d = if r % 2 == 0 { C::new(s, 0.0) } else { C::new(0.0, s) };
            u[r / 2] += d;
        }
        f(&u)
    };
    let f0 = eval(&[])?;
    let nr = 2 * k;
    let mut d2 = DMatrix::<f64>::zeros(nr, nr);
    for a in 0..nr {
        d2[(a, a)] = (eval(&[(a, h)])? - 2.0 * f0 + eval(&[(a, -h)])?) / (h * h);
        for b in (a + 1)..nr {
            let v = (eval(&[(a, h), (b, h)])? - eval(&[(a, h), (b, -h)])? - eval(&[(a, -h), (b, h)])?
                + eval(&[(a, -h), (b, -h)])?)
                / (4.0 * h * h);
            d2[(a, b)] = v;
            d2[(b, a)] = v;
        }
    }
    Ok(DMatrix::from_fn(k, k, |j, l| {
        let (xj, yj, xl, yl) = (2 * j, 2 * j + 1, 2 * l, 2 * l + 1);
        C::new(d2[(xj, xl)] + d2[(yj, yl)], d2[(xj, yl)] - d2[(yj, xl)]) * 0.25
    }))
}

/// Richardson-extrapolated [`complex_hessian_fd`]: `(4 H(h) - H(2h)) / 3`,
/// fourth order in `h`.
pub fn complex_hessian_richardson<F>(f: F, u0: &[C], h: f64) -> Result<DMatrix<C>>
where
    F: Fn(&[C]) -> Result<f64>,
{
    let fine = complex_hessian_fd(&f, u0, h)?;
    let coarse = complex_hessian_fd(&f, u0, 2.0 * h)?;
    Ok((fine * C::new(4.0, 0.0) - coarse) / C::new(3.0, 0.0))
}

/// Curvature of the metric induced on `K` by `metric` at one point.
#[derive(Clone, Debug)]
pub struct CurvatureSample {
    /// `d dbar log det g` in the chart coordinates of `frame`.
    pub curvature: DMatrix<C>,
    /// `g` on the coordinate vectors.
    pub metric: DMatrix<C>,
    /// Eigenvalues of the curvature relative to `g`, ascending.
    pub eigenvalues: Vec<f64>,
    pub frame: LocalFrame,
    pub local_coords: Vec<C>,
}

/// Log-determinant of `metric` on the coordinate vectors of `frame` at the
/// lifted point over local coordinates `u`.
pub fn log_det_in_chart(
    hs: &Hypersurface,
    metric: &MetricContext,
    frame: &LocalFrame,
    u: &[C],
    guess: C,
) -> Result<f64> {
    let z = frame.lift(hs, u, guess)?;
    let vecs = frame.coordinate_vectors(hs, &z);
    let d = metric.matrix(hs, &z, &vecs)?.determinant().re;
    if !(d > 0.0) {
        return Err(Error::DegenerateFrame);
    }
    Ok(d.ln())
}

/// `d dbar log det g` by Richardson-extrapolated central differences with
/// step `h` in the chart of the conventional frame at `pt`.
pub fn k_curvature(
    hs: &Hypersurface,
    metric: &MetricContext,
    pt: &ProjectivePoint,
    h: f64,
) -> Result<CurvatureSample> {
    let frame = LocalFrame::at(hs, pt)?;
    let zaff = frame.affine_point(hs, pt)?;
    let u0 = frame.local_coords(&zaff);
    let guess = zaff[frame.distinguished()];
    let curvature = complex_hessian_richardson(|u| log_det_in_chart(hs, metric, &frame, u, guess), &u0, h)?;
    let vecs = frame.coordinate_vectors(hs, &zaff);
    let g = metric.matrix(hs, &zaff, &vecs)?;
    let eigenvalues = linalg::generalized_hermitian_eigenvalues(&curvature, &g).ok_or(Error::DegenerateFrame)?;
    Ok(CurvatureSample {
        curvature,
        metric: g,
        eigenvalues,
        frame,
        local_coords: u0,
    })
}

/// Default finite-difference steps for the curvature diagnostic, as
/// fractions of the unit chart radius.
pub const STENCIL_SCALES: [f64; 2] = [1e-3, 1e-4];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub samples: usize,
    pub scales: [f64; 2],
    /// Smallest curvature eigenvalue (relative to `g`) over all samples.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Largest disagreement of curvature eigenvalues between the two stencil
    /// sizes, relative to the larger of 1 and the eigenvalue.
    pub stencil_disagreement: f64,
    /// Fraction of samples whose curvature form is positive definite.
    pub positive_fraction: f64,
    pub holds: bool,
    pub per_sample_min: Vec<f64>,
}

/// Sign of the curvature form `d dbar log det g` of the metric induced on `K`
/// over the given points, at two stencil sizes.
pub fn assumption_check(
    hs: &Hypersurface,
    metric: &MetricContext,
    points: &[ProjectivePoint],
    scales: [f64; 2],
) -> Result<AssumptionReport> {
    if points.is_empty() {
        return Err(Error::EmptyPool);
    }
    let rows: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|p| {
            let a = k_curvature(hs, metric, p, scales[0])?;
            let b = k_curvature(hs, metric, p, scales[1])?;
            let dis = a
                .eigenvalues
                .iter()
                .zip(&b.eigenvalues)
                .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
                .fold(0.0, f64::max);
            Ok((b.eigenvalues[0], *b.eigenvalues.last().unwrap(), dis))
        })
        .collect::<Result<_>>()?;
    let min_eigenvalue = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let max_eigenvalue = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let stencil_disagreement = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let positive = rows.iter().filter(|r| r.0 > 0.0).count();
    Ok(AssumptionReport {
        samples: points.len(),
        scales,
        min_eigenvalue,
        max_eigenvalue,
        stencil_disagreement,
        positive_fraction: positive as f64 / points.len() as f64,
        holds: min_eigenvalue > 0.0,
        per_sample_min: rows.iter().map(|r| r.0).collect(),
    })
}

/// Per-sample CSV: `rho_m`, `|phi_m|_{h_m}` and the smallest eigenvalue of
/// `omega_m` relative to the FS metric.
pub fn write_diagnostics<W: Write>(
    hs: &Hypersurface,
    bd: &BergmanData,
    points: &[ProjectivePoint],
    out: W,
) -> Result<()> {
    let rows: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|p| {
            let rho = density_of_states(hs, bd, p)?;
            let phi = hm_norm_phi(bd, p)?;
            let frame = hs.tangent_frame(p)?;
            let om = bd.metric_on(p.coords(), frame.vectors())?;
            let g = hs.fs_metric_matrix(p.coords(), frame.vectors());
            let ev = linalg::generalized_hermitian_eigenvalues(&om, &g).ok_or(Error::DegenerateFrame)?;
            Ok((rho, phi, ev[0]))
        })
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "rho", "hm_norm_phi", "omega_min_eig"])?;
    for (i, (a, b, c)) in rows.iter().enumerate() {
        w.write_record([i.to_string(), format!("{a:?}"), format!("{b:?}"), format!("{c:?}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_inverse_of_diagonal() {
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0, 0.25]));
        let (inv, diag) = real_cholesky_inverse(&g).unwrap();
        assert_eq!(diag, vec![2.0, 3.0, 0.5]);
        assert!((inv[(1, 1)] - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(inv[(1, 0)], 0.0);
    }

    #[test]
    fn singular_gram_rejected() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(real_cholesky_inverse(&g), Err(Error::QuadratureTooCoarse { index: 1, .. })));
    }

    #[test]
    fn hessian_fd_of_log_fs() {
        // log(1 + |u|^2) has d dbar = 1 / (1 + |u|^2)^2
        let u0 = [C::new(0.3, -0.2)];
        let h = complex_hessian_fd(|u| Ok((1.0 + u[0].norm_sqr()).ln()), &u0, 1e-4).unwrap();
        let exact = 1.0 / (1.0 + u0[0].norm_sqr()).powi(2);
        assert!((h[(0, 0)] - exact).norm() < 1e-7);
    }
}
