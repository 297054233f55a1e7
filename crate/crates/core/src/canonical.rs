//! Sections of powers of the canonical bundle of a hypersurface, realized as
//! homogeneous polynomials through the residue (adjunction) trivialization.
//!
//! On a degree-`d` hypersurface `M` in `CP^n`, `K(M) = O(d - n - 1)`, and a
//! section of `K^m` is `P * Omega^m` where `P` has degree `m (d - n - 1)` and
//! `Omega` is the global residue form. In the affine chart `z_c = 1` with a
//! distinguished coordinate `w_l`, the residue frame is
//! `dw_rest / (dF/dw_l)`; it agrees with `Omega` up to the sign of the
//! permutation `(c, rest.., l)`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::MetricContext;
use crate::poly::{monomials, Exponent, HomogeneousPolynomial};
use crate::projective::{Hypersurface, ProjectivePoint};

type C = Complex64;

/// A section of `K(M)^power` through its polynomial representative.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalSection {
    power: u32,
    representative: HomogeneousPolynomial,
}

impl CanonicalSection {
    pub fn new(hs: &Hypersurface, power: u32, representative: HomogeneousPolynomial) -> Result<Self> {
        let k = hs.canonical_degree();
        if k <= 0 {
            return Err(Error::CanonicalNotPositive {
                degree: hs.degree(),
                ambient: hs.ambient_dim(),
            });
        }
        let expected = power as i64 * k;
        if representative.degree() as i64 != expected || representative.num_vars() != hs.num_vars() {
            return Err(Error::InvalidPolynomial(format!(
                "section of K^{power} needs degree {expected} in {} variables, got degree {} in {}",
                hs.num_vars(),
                representative.degree(),
                representative.num_vars()
            )));
        }
        Ok(CanonicalSection {
            power,
            representative,
        })
    }

    pub(crate) fn from_parts(power: u32, representative: HomogeneousPolynomial) -> Self {
        CanonicalSection {
            power,
            representative,
        }
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn representative(&self) -> &HomogeneousPolynomial {
        &self.representative
    }

    pub fn has_real_representative(&self) -> bool {
        self.representative.is_real()
    }

    pub fn scale(&self, c: C) -> Self {
        CanonicalSection {
            power: self.power,
            representative: self.representative.scale(c),
        }
    }

    /// Value of the representative at homogeneous coordinates `z`.
    pub fn poly_value(&self, z: &[C]) -> C {
        self.representative.eval_unchecked(z)
    }
}

/// Residue frame of `K` on the affine chart `z_chart = 1`, with `distinguished`
/// the solved-for coordinate and the remaining affine coordinates as local
/// coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalFrame {
    chart: usize,
    distinguished: usize,
    rest: Vec<usize>,
    sign: i8,
}

fn permutation_sign(p: &[usize]) -> i8 {
    let mut sign = 1;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            if p[i] > p[j] {
                sign = -sign;
            }
        }
    }
    sign
}

impl LocalFrame {
    pub fn new(hs: &Hypersurface, chart: usize, distinguished: usize) -> Result<Self> {
        let n = hs.num_vars();
        if chart >= n || distinguished >= n || chart == distinguished {
            return Err(Error::InvalidParameter(format!(
                "invalid frame (chart {chart}, distinguished {distinguished}) for {n} variables"
            )));
        }
        let rest: Vec<usize> = (0..n).filter(|&j| j != chart && j != distinguished).collect();
        let mut perm = vec![chart];
        perm.extend(&rest);
        perm.push(distinguished);
        Ok(LocalFrame {
            chart,
            distinguished,
            sign: permutation_sign(&perm),
            rest,
        })
    }

    /// The conventional frame at `pt`: chart of the largest coordinate,
    /// distinguished coordinate maximizing `|dF/dz_j|` among the others.
    pub fn at(hs: &Hypersurface, pt: &ProjectivePoint) -> Result<Self> {
        let c = pt.chart();
        let g = hs.smooth_gradient(pt.coords())?;
        let l = (0..g.len())
            .filter(|&j| j != c)
            .max_by(|&a, &b| g[a].norm().partial_cmp(&g[b].norm()).unwrap().then(b.cmp(&a)))
            .unwrap();
        Self::new(hs, c, l)
    }

    pub fn chart(&self) -> usize {
        self.chart
    }

    pub fn distinguished(&self) -> usize {
        self.distinguished
    }

    pub fn rest(&self) -> &[usize] {
        &self.rest
    }

    /// Sign relating this frame to the global residue form.
    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// Affine representative `z / z_chart`, checking frame nondegeneracy.
    pub fn affine_point(&self, hs: &Hypersurface, pt: &ProjectivePoint) -> Result<Vec<C>> {
        let z = pt.coords();
        let zc = z[self.chart].norm();
        let zaff = pt.affine(self.chart);
        let partial = hs.gradient_polys()[self.distinguished].eval_unchecked(&zaff).norm();
        let gscale = linalg::norm(&hs.gradient(&zaff));
        if zc < 1e-8 || !(partial > 1e-8 * gscale) {
            return Err(Error::ChartDegenerate {
                chart_coord: zc,
                partial,
            });
        }
        Ok(zaff)
    }

    /// Local coordinates (the non-distinguished affine coordinates).
    pub fn local_coords(&self, affine: &[C]) -> Vec<C> {
        self.rest.iter().map(|&r| affine[r]).collect()
    }

    /// Homogeneous tangent vectors `d Z / d u_j` at the affine point `z_aff`.
    pub fn coordinate_vectors(&self, hs: &Hypersurface, z_aff: &[C]) -> Vec<Vec<C>> {
        let g = hs.gradient(z_aff);
        let gl = g[self.distinguished];
        self.rest
            .iter()
            .map(|&r| {
                let mut v = vec![C::new(0.0, 0.0); z_aff.len()];
                v[r] = C::new(1.0, 0.0);
                v[self.distinguished] = -g[r] / gl;
                v
            })
            .collect()
    }

    /// Solves for the distinguished coordinate at local coordinates `u`,
    /// starting Newton from `guess`.
    pub fn lift(&self, hs: &Hypersurface, u: &[C], guess: C) -> Result<Vec<C>> {
        let n = hs.num_vars();
        let mut z = vec![C::new(0.0, 0.0); n];
        z[self.chart] = C::new(1.0, 0.0);
        for (k, &r) in self.rest.iter().enumerate() {
            z[r] = u[k];
        }
        z[self.distinguished] = guess;
        let dl = &hs.gradient_polys()[self.distinguished];
        for _ in 0..50 {
            let f = hs.poly().eval_unchecked(&z);
            let scale = hs.poly().monomial_norm(&z).max(1e-300);
            if f.norm() <= 1e-15 * scale {
                return Ok(z);
            }
            let df = dl.eval_unchecked(&z);
            if df.norm() == 0.0 {
                break;
            }
            let step = f / df;
            z[self.distinguished] -= step;
            if step.norm() <= 1e-17 * z[self.distinguished].norm().max(1.0) {
                return Ok(z);
            }
        }
        let f = hs.poly().eval_unchecked(&z).norm() / hs.poly().monomial_norm(&z).max(1e-300);
        if f < 1e-12 {
            Ok(z)
        } else {
            Err(Error::StencilOutsideChart)
        }
    }

    /// `dw_rest / (dF/dw_l)` evaluated on homogeneous tangent vectors at any
    /// representative `z`, computed in affine coordinates.
    pub fn form_value(&self, hs: &Hypersurface, z: &[C], vectors: &[Vec<C>]) -> C {
        let zc = z[self.chart];
        let zaff: Vec<C> = z.iter().map(|x| x / zc).collect();
        let k = self.rest.len();
        let m = DMatrix::from_fn(k, k, |i, j| {
            let r = self.rest[i];
            let v = &vectors[j];
            (v[r] * zc - z[r] * v[self.chart]) / (zc * zc)
        });
        let fl = hs.gradient_polys()[self.distinguished].eval_unchecked(&zaff);
        m.determinant() / fl
    }
}

/// A list of sections of `K^power`.
#[derive(Clone, Debug)]
pub struct SectionBasis {
    power: u32,
    sections: Vec<CanonicalSection>,
    orthonormal: bool,
    gram_residual: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BasisManifest {
    pub power: u32,
    pub dimension: usize,
    pub orthonormal: bool,
    pub gram_residual: Option<f64>,
}

impl SectionBasis {
    pub fn new(power: u32, sections: Vec<CanonicalSection>) -> Result<Self> {
        if sections.iter().any(|s| s.power != power) {
            return Err(Error::InvalidParameter("sections of mixed power".into()));
        }
        Ok(SectionBasis {
            power,
            sections,
            orthonormal: false,
            gram_residual: None,
        })
    }

    pub(crate) fn orthonormalized(power: u32, sections: Vec<CanonicalSection>, residual: f64) -> Self {
        SectionBasis {
            power,
            sections,
            orthonormal: true,
            gram_residual: Some(residual),
        }
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn sections(&self) -> &[CanonicalSection] {
        &self.sections
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn gram_residual(&self) -> Option<f64> {
        self.gram_residual
    }

    /// Monomial support in descending graded-lex order together with the
    /// coefficient matrix (rows: sections, columns: monomials).
    pub fn expand(&self) -> (Vec<Exponent>, DMatrix<C>) {
        let mut exps: Vec<Exponent> = self
            .sections
            .iter()
            .flat_map(|s| s.representative.terms().map(|(e, _)| e.clone()))
            .collect();
        exps.sort();
        exps.dedup();
        exps.reverse();
        let m = DMatrix::from_fn(self.sections.len(), exps.len(), |i, j| {
            self.sections[i].representative.coefficient(&exps[j])
        });
        (exps, m)
    }

    /// Rank of the representatives after reduction modulo `F`.
    pub fn rank_modulo(&self, hs: &Hypersurface) -> Result<usize> {
        let reduced: Vec<HomogeneousPolynomial> = self
            .sections
            .iter()
            .map(|s| s.representative.reduce_mod(hs.poly()))
            .collect::<Result<_>>()?;
        let mut exps: Vec<Exponent> = reduced
            .iter()
            .flat_map(|p| p.terms().map(|(e, _)| e.clone()))
            .collect();
        exps.sort();
        exps.dedup();
        if exps.is_empty() {
            return Ok(0);
        }
        let m = DMatrix::from_fn(reduced.len(), exps.len(), |i, j| reduced[i].coefficient(&exps[j]));
        Ok(m.rank(1e-10 * m.norm().max(1.0)))
    }

    pub fn manifest(&self) -> BasisManifest {
        BasisManifest {
            power: self.power,
            dimension: self.sections.len(),
            orthonormal: self.orthonormal,
            gram_residual: self.gram_residual,
        }
    }

    /// Manifest line followed by one polynomial record per section.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# manifest {}",
            serde_json::to_string(&self.manifest()).unwrap_or_default()
        );
        for (i, sec) in self.sections.iter().enumerate() {
            let _ = writeln!(s, "# section {i}");
            s.push_str(&sec.representative.to_text());
        }
        s
    }

    pub fn from_text(hs: &Hypersurface, text: &str) -> Result<Self> {
        let manifest: BasisManifest = text
            .lines()
            .find_map(|l| l.trim().strip_prefix("# manifest "))
            .ok_or(Error::Parse {
                line: 1,
                msg: "missing basis manifest".into(),
            })
            .and_then(|j| Ok(serde_json::from_str(j)?))?;
        let sections = HomogeneousPolynomial::parse_many(text)?
            .into_iter()
            .map(|p| CanonicalSection::new(hs, manifest.power, p))
            .collect::<Result<Vec<_>>>()?;
        if sections.len() != manifest.dimension {
            return Err(Error::Parse {
                line: 1,
                msg: format!(
                    "manifest dimension {} but {} records",
                    manifest.dimension,
                    sections.len()
                ),
            });
        }
        Ok(SectionBasis {
            power: manifest.power,
            sections,
            orthonormal: manifest.orthonormal,
            gram_residual: manifest.gram_residual,
        })
    }
}

/// Monomial basis of `H^0(K^m)`: monomials of degree `m (d - n - 1)` not
/// divisible by the leading monomial of `F`.
pub fn section_space_basis(hs: &Hypersurface, m: u32) -> Result<SectionBasis> {
    let k = hs.canonical_degree();
    if k <= 0 {
        return Err(Error::CanonicalNotPositive {
            degree: hs.degree(),
            ambient: hs.ambient_dim(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("power m must be at least 1".into()));
    }
    let degree = m * k as u32;
    let (lead, _) = hs.poly().leading_term().expect("nonzero defining polynomial");
    let sections = monomials(hs.num_vars(), degree)
        .into_iter()
        .filter(|e| !lead.iter().zip(e).all(|(a, b)| a <= b))
        .map(|e| {
            let p = HomogeneousPolynomial::monomial(e, C::new(1.0, 0.0))?;
            CanonicalSection::new(hs, m, p)
        })
        .collect::<Result<Vec<_>>>()?;
    SectionBasis::new(m, sections)
}

/// Coefficient `a` with `s = a * frame^m` at `pt`.
pub fn evaluate_section(
    hs: &Hypersurface,
    s: &CanonicalSection,
    pt: &ProjectivePoint,
    frame: &LocalFrame,
) -> Result<C> {
    let zaff = frame.affine_point(hs, pt)?;
    let sign = if frame.sign < 0 && s.power % 2 == 1 { -1.0 } else { 1.0 };
    Ok(s.poly_value(&zaff) * sign)
}

/// Pointwise norm of `s` for the metric on `K^m` induced by `metric`, using
/// the conventional frame at `pt`.
pub fn section_norm_g(
    hs: &Hypersurface,
    s: &CanonicalSection,
    pt: &ProjectivePoint,
    metric: &MetricContext,
) -> Result<f64> {
    let frame = LocalFrame::at(hs, pt)?;
    section_norm_in_frame(hs, s, pt, &frame, metric)
}

/// As [`section_norm_g`] but through an explicit frame; the result does not
/// depend on the frame.
pub fn section_norm_in_frame(
    hs: &Hypersurface,
    s: &CanonicalSection,
    pt: &ProjectivePoint,
    frame: &LocalFrame,
    metric: &MetricContext,
) -> Result<f64> {
    let a = evaluate_section(hs, s, pt, frame)?;
    Ok(a.norm() * frame_norm(hs, pt, frame, metric)?.powi(s.power as i32))
}

/// `|dw_rest / (dF/dw_l)|_h` where `h` is the metric on `K` induced by `metric`.
pub fn frame_norm(
    hs: &Hypersurface,
    pt: &ProjectivePoint,
    frame: &LocalFrame,
    metric: &MetricContext,
) -> Result<f64> {
    let zaff = frame.affine_point(hs, pt)?;
    let vecs = frame.coordinate_vectors(hs, &zaff);
    let g = metric.matrix(hs, &zaff, &vecs)?;
    let det = g.determinant().re;
    if !(det > 0.0) {
        return Err(Error::ChartDegenerate {
            chart_coord: zaff[frame.chart].norm(),
            partial: det,
        });
    }
    let fl = hs.gradient_polys()[frame.distinguished].eval_unchecked(&zaff);
    Ok(1.0 / (det.sqrt() * fl.norm()))
}

/// Pull back by the conjugation and conjugate: conjugates the coefficients.
pub fn sigma_pullback(s: &CanonicalSection) -> CanonicalSection {
    CanonicalSection {
        power: s.power,
        representative: s.representative.conj(),
    }
}

/// `|P(z)| / sum |c_a| |z^a|` at a unit representative: a scale-invariant
/// proximity score that vanishes exactly on the zero divisor.
pub fn divisor_proximity(s: &CanonicalSection, pt: &ProjectivePoint) -> f64 {
    divisor_proximity_at(s, pt.coords())
}

pub(crate) fn divisor_proximity_at(s: &CanonicalSection, z: &[C]) -> f64 {
    let den = s.representative.monomial_norm(z);
    if den == 0.0 {
        return 0.0;
    }
    s.representative.eval_unchecked(z).norm() / den
}
