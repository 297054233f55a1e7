//! Pointwise calibration checks: maxima of section norms along the real
//! locus, phase alignment of frame values there, and comass ratios on real
//! orthonormal frames.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bergman::BergmanData;
use crate::canonical::CanonicalSection;
use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::HomogeneousPolynomial;
use crate::projective::{Hypersurface, ProjectivePoint};
use crate::sampling::{chunk_rng, SamplePool};

type C = Complex64;

/// Pointwise norm of a section, normalized so that its maximum is 1.
pub trait NormEvaluator: Sync {
    fn norm_at(&self, pt: &ProjectivePoint) -> Result<f64>;
}

impl<F> NormEvaluator for F
where
    F: Fn(&ProjectivePoint) -> Result<f64> + Sync,
{
    fn norm_at(&self, pt: &ProjectivePoint) -> Result<f64> {
        self(pt)
    }
}

/// `(sum z_i^2)^k` with its FS norm `(|sum z_i^2| / sum |z_i|^2)^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct FermatPhi {
    k: u32,
    num_vars: usize,
}

pub fn fermat_phi(k: u32, num_vars: usize) -> Result<FermatPhi> {
    if k == 0 || num_vars < 2 {
        return Err(Error::InvalidParameter(format!(
            "fermat_phi needs k >= 1 and at least 2 variables (got k = {k}, {num_vars})"
        )));
    }
    Ok(FermatPhi { k, num_vars })
}

impl FermatPhi {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn polynomial(&self) -> HomogeneousPolynomial {
        let sq = HomogeneousPolynomial::fermat(&vec![1.0; self.num_vars], 2).expect("valid");
        sq.pow(self.k).expect("valid")
    }

    /// As a section of `K` on `hs`, which needs `d - n - 1 = 2k`.
    pub fn on(&self, hs: &Hypersurface) -> Result<CanonicalSection> {
        if hs.canonical_degree() != 2 * self.k as i64 {
            return Err(Error::InvalidParameter(format!(
                "(sum z^2)^{} is a section of K only when d - n - 1 = {}, got {}",
                self.k,
                2 * self.k,
                hs.canonical_degree()
            )));
        }
        CanonicalSection::new(hs, 1, self.polynomial())
    }

    pub fn norm(&self, z: &[C]) -> f64 {
        (linalg::bdot(z, z).norm() / linalg::norm_sq(z)).powi(self.k as i32)
    }
}

impl NormEvaluator for FermatPhi {
    fn norm_at(&self, pt: &ProjectivePoint) -> Result<f64> {
        if pt.num_vars() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: pt.num_vars(),
            });
        }
        Ok(self.norm(pt.coords()))
    }
}

impl NormEvaluator for BergmanData {
    fn norm_at(&self, pt: &ProjectivePoint) -> Result<f64> {
        self.hm_norm_phi_at(pt.coords())
    }
}

/// Binned margin `real_max - |phi|` against distance to the real locus.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MarginBin {
    pub distance_lo: f64,
    pub distance_hi: f64,
    pub count: usize,
    pub mean_margin: f64,
    pub min_margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub label: String,
    pub complex_count: usize,
    pub real_count: usize,
    pub complex_max: f64,
    pub real_max: f64,
    pub real_min: f64,
    /// `max |value - 1|` over the real pool.
    pub equality_residual: f64,
    /// Smallest `real_max - value` over the complex pool.
    pub min_margin: f64,
    pub margin_histogram: Vec<MarginBin>,
    /// Least-squares `margin ~ a d^2` over complex samples with `d <= fit_radius`.
    pub quadratic_coefficient: f64,
    pub quadratic_r2: f64,
    pub fit_radius: f64,
    pub fit_count: usize,
    /// Every complex sample farther than `strict_distance` from the real
    /// locus has positive margin.
    pub strict: bool,
    pub strict_distance: f64,
    #[serde(skip)]
    pub samples: Vec<ProfileSample>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProfileSample {
    pub real_locus: bool,
    pub distance: f64,
    pub value: f64,
}

pub const HISTOGRAM_BINS: usize = 16;
pub const FIT_RADIUS: f64 = 0.25;
pub const STRICT_DISTANCE: f64 = 1e-3;

pub fn max_profile<E: NormEvaluator + ?Sized>(
    label: &str,
    eval: &E,
    complex: &SamplePool,
    real: &SamplePool,
) -> Result<CalibrationReport> {
    if complex.is_empty() || real.is_empty() {
        return Err(Error::EmptyPool);
    }
    let sample = |pts: &[ProjectivePoint], on_real: bool| -> Result<Vec<ProfileSample>> {
        pts.par_iter()
            .map(|p| {
                Ok(ProfileSample {
                    real_locus: on_real,
                    distance: p.distance_to_real_proxy(),
                    value: eval.norm_at(p)?,
                })
            })
            .collect()
    };
    let cs = sample(&complex.points, false)?;
    let rs = sample(&real.points, true)?;
    let complex_max = cs.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
    let real_max = rs.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
    let real_min = rs.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let equality_residual = rs.iter().map(|s| (s.value - 1.0).abs()).fold(0.0, f64::max);
    let margins: Vec<(f64, f64)> = cs.iter().map(|s| (s.distance, real_max - s.value)).collect();
    let min_margin = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);

    let dmax = margins.iter().map(|m| m.0).fold(0.0, f64::max).max(1e-300);
    let width = dmax / HISTOGRAM_BINS as f64;
    let mut bins: Vec<MarginBin> = (0..HISTOGRAM_BINS)
        .map(|b| MarginBin {
            distance_lo: b as f64 * width,
            distance_hi: (b + 1) as f64 * width,
            count: 0,
            mean_margin: 0.0,
            min_margin: f64::INFINITY,
        })
        .collect();
    for &(d, mg) in &margins {
        let b = ((d / width) as usize).min(HISTOGRAM_BINS - 1);
        bins[b].count += 1;
        bins[b].mean_margin += mg;
        bins[b].min_margin = bins[b].min_margin.min(mg);
    }
    for b in &mut bins {
        if b.count > 0 {
            b.mean_margin /= b.count as f64;
        } else {
            b.min_margin = 0.0;
        }
    }

    let near: Vec<(f64, f64)> = margins.iter().copied().filter(|m| m.0 <= FIT_RADIUS).collect();
    let sxx: f64 = near.iter().map(|m| m.0.powi(4)).sum();
    let sxy: f64 = near.iter().map(|m| m.0 * m.0 * m.1).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mean_y = near.iter().map(|m| m.1).sum::<f64>() / near.len().max(1) as f64;
    let ss_res: f64 = near.iter().map(|m| (m.1 - a * m.0 * m.0).powi(2)).sum();
    let ss_tot: f64 = near.iter().map(|m| (m.1 - mean_y).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };

    let far: Vec<f64> = margins.iter().filter(|m| m.0 > STRICT_DISTANCE).map(|m| m.1).collect();
    let strict = !far.is_empty() && far.iter().all(|&m| m > 0.0);

    let mut samples = rs;
    samples.extend(cs);
    Ok(CalibrationReport {
        label: label.to_string(),
        complex_count: complex.len(),
        real_count: real.len(),
        complex_max,
        real_max,
        real_min,
        equality_residual,
        min_margin,
        margin_histogram: bins,
        quadratic_coefficient: a,
        quadratic_r2: r2,
        fit_radius: FIT_RADIUS,
        fit_count: near.len(),
        strict,
        strict_distance: STRICT_DISTANCE,
        samples,
    })
}

impl CalibrationReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["locus", "distance", "value"])?;
        for s in &self.samples {
            w.write_record([
                if s.real_locus { "real" } else { "complex" }.to_string(),
                format!("{:?}", s.distance),
                format!("{:?}", s.value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `P(z) * Omega(z; V)^m` on the FS-orthonormal tangent frame at each point.
/// At real points the frame is real.
pub fn frame_values(hs: &Hypersurface, s: &CanonicalSection, points: &[ProjectivePoint]) -> Result<Vec<C>> {
    points
        .par_iter()
        .map(|p| {
            let frame = hs.tangent_frame(p)?;
            let omega = hs.residue_form(p.coords(), frame.vectors())?;
            Ok(s.poly_value(p.coords()) * omega.powu(s.power()))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ThetaAlignment {
    /// Phase in `[-pi/2, pi/2)`.
    pub theta: f64,
    /// `max |Im(e^{i theta} v)| / |v|`.
    pub residual: f64,
}

/// Phase making all frame values real. Real frames carry no orientation,
/// so values are only defined up to sign and `theta` is determined mod `pi`.
pub fn theta_alignment(values: &[C]) -> Result<ThetaAlignment> {
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if values.is_empty() || values.iter().any(|v| !(v.norm() > 1e-14 * scale)) {
        return Err(Error::InvalidParameter("section vanishes on the real locus".into()));
    }
    let doubled: C = values.iter().map(|v| (v / v.norm()).powu(2)).sum();
    let alpha = 0.5 * doubled.arg();
    let mut theta = -alpha;
    if theta >= FRAC_PI_2 {
        theta -= std::f64::consts::PI;
    }
    if theta < -FRAC_PI_2 {
        theta += std::f64::consts::PI;
    }
    let rot = C::from_polar(1.0, theta);
    let residual = values
        .iter()
        .map(|v| (rot * v).im.abs() / v.norm())
        .fold(0.0, f64::max);
    Ok(ThetaAlignment { theta, residual })
}

/// Holomorphic coordinates, on a unitary basis, of a real orthonormal frame
/// given by the columns of `x` (a `2k x r` real matrix): column `c` maps to
/// `sum_j (x[2j, c] + i x[2j+1, c]) w_j`.
pub fn unitary_coordinates(x: &DMatrix<f64>) -> DMatrix<C> {
    let k = x.nrows() / 2;
    DMatrix::from_fn(k, x.ncols(), |j, c| C::new(x[(2 * j, c)], x[(2 * j + 1, c)]))
}

/// `|dz_1 ^ ... ^ dz_k (e_1, ..., e_k)|` for a frame in unitary coordinates.
pub fn decomposable_form_value(coords: &DMatrix<C>) -> f64 {
    coords.determinant().norm()
}

/// Random real orthonormal `k`-frame in `R^{2k}` from the QR factorization
/// of a Gaussian matrix.
pub fn random_real_frame<R: rand::Rng + ?Sized>(rng: &mut R, k: usize) -> Result<DMatrix<f64>> {
    let g: DMatrix<f64> = DMatrix::from_fn(2 * k, k, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    if (0..k).any(|i| r[(i, i)].abs() < 1e-10) {
        return Err(Error::DegenerateFrame);
    }
    Ok(qr.q())
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComassReport {
    pub trials: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    /// Ratio on the real span of the unitary frame itself.
    pub lagrangian_ratio: f64,
}

/// Ratio `|phi(e_1..e_n)| / |phi|_h` over random real orthonormal frames of
/// `T_pt M` for the FS metric; a section of `K^p` is evaluated on the frame
/// `p` times.
pub fn comass_check(
    hs: &Hypersurface,
    s: &CanonicalSection,
    pt: &ProjectivePoint,
    trials: usize,
    seed: u64,
) -> Result<ComassReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("comass check needs at least one trial".into()));
    }
    let frame = hs.tangent_frame(pt)?;
    let w = frame.vectors();
    let k = w.len();
    let z = pt.coords();
    let p = s.poly_value(z);
    let omega_w = hs.residue_form(z, w)?;
    let norm = p.norm() * omega_w.norm().powi(s.power() as i32);
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter("section vanishes at the comass point".into()));
    }
    let value_on = |x: &DMatrix<f64>| -> Result<f64> {
        let u = unitary_coordinates(x);
        let vecs: Vec<Vec<C>> = (0..k)
            .map(|c| {
                let mut v = vec![C::new(0.0, 0.0); z.len()];
                for (j, wj) in w.iter().enumerate() {
                    for (a, b) in v.iter_mut().zip(wj) {
                        *a += u[(j, c)] * b;
                    }
                }
                v
            })
            .collect();
        let om = hs.residue_form(z, &vecs)?;
        Ok(p.norm() * om.norm().powi(s.power() as i32) / norm)
    };
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = chunk_rng(seed, t as u64);
            value_on(&random_real_frame(&mut rng, k)?)
        })
        .collect::<Result<_>>()?;
    let mut lag = DMatrix::<f64>::zeros(2 * k, k);
    for j in 0..k {
        lag[(2 * j, j)] = 1.0;
    }
    Ok(ComassReport {
        trials,
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        mean_ratio: ratios.iter().sum::<f64>() / trials as f64,
        lagrangian_ratio: value_on(&lag)?,
    })
}
