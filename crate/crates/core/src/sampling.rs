//! Monte-Carlo point clouds on hypersurfaces and their real loci.
//!
//! Points come from intersecting random lines with the hypersurface. A
//! unitarily invariant random line meets the hypersurface in a point set whose
//! intensity is proportional to the Fubini-Study volume, so uniform weights
//! give a quadrature for the FS volume measure. For real loci the same
//! argument with real lines gives the induced length/area measure, and the
//! mean number of real roots per line estimates the volume (Crofton).
//!
//! Lines are processed in fixed-size chunks, each with its own ChaCha stream
//! derived from `(seed, chunk index)`, so pools are bitwise identical for any
//! number of worker threads.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projective::{Hypersurface, ProjectivePoint};

type C = Complex64;

/// Lines handled by one deterministic RNG stream.
pub const LINES_PER_CHUNK: usize = 256;
/// Newton polish target for roots and projected points.
pub const ROOT_RESIDUAL: f64 = 1e-12;
/// Lines drawn without a single real intersection before giving up.
pub const REAL_RETRY_BUDGET: usize = 4096;

const CHUNKS_PER_BATCH: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locus {
    Complex,
    Real,
}

/// Weighted point cloud on a hypersurface or on its real locus.
#[derive(Clone, Debug)]
pub struct SamplePool {
    pub points: Vec<ProjectivePoint>,
    pub weights: Vec<f64>,
    /// Estimate of the total FS volume of the locus; equals the weight sum.
    pub total_measure: f64,
    /// Monte-Carlo standard error of `total_measure`.
    pub standard_error: f64,
    pub seed: u64,
    pub locus: Locus,
    /// Number of random lines consumed.
    pub lines: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PoolManifest {
    pub locus: Locus,
    pub seed: u64,
    pub count: usize,
    pub num_vars: usize,
    pub lines: usize,
    pub total_measure: f64,
    pub standard_error: f64,
    pub residual_max: f64,
    pub residual_mean: f64,
    pub reality_residual_max: f64,
}

/// RNG for a chunk: the run seed selects the key, the chunk index the stream.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C> {
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C::new(re, im)
        })
        .collect()
}

pub fn real_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Volume of `CP^k` with `omega_FS = (i/2) dd^c log|z|^2`: `pi^k / k!`.
pub fn cp_volume(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * std::f64::consts::PI / j as f64)
}

/// Volume of `RP^k` with the metric induced from FS (the unit round sphere mod `+-1`).
pub fn rp_volume(k: usize) -> f64 {
    // vol(S^k) by the two-step recursion from S^0 = 2, S^1 = 2 pi.
    let mut s = if k % 2 == 0 { 2.0 } else { 2.0 * std::f64::consts::PI };
    let mut j = if k % 2 == 0 { 0 } else { 1 };
    while j < k {
        j += 2;
        s *= 2.0 * std::f64::consts::PI / (j as f64 - 1.0);
    }
    s / 2.0
}

fn horner(coeffs: &[C], s: C) -> (C, C, f64) {
    let mut p = C::new(0.0, 0.0);
    let mut dp = C::new(0.0, 0.0);
    let mut scale = 0.0;
    let sa = s.norm();
    for c in coeffs.iter().rev() {
        dp = dp * s + p;
        p = p * s + c;
        scale = scale * sa + c.norm();
    }
    (p, dp, scale)
}

/// Roots of `sum coeffs[k] s^k` from the eigenvalues of the companion matrix,
/// each polished by Newton's method.
pub fn polynomial_roots(coeffs: &[C]) -> Result<Vec<C>> {
    let d = coeffs.len().saturating_sub(1);
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[d];
    let cmax = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if lead.norm() <= 1e-13 * cmax {
        return Err(Error::RootFinding);
    }
    let companion = DMatrix::from_fn(d, d, |i, j| {
        if j == d - 1 {
            -coeffs[i] / lead
        } else if i == j + 1 {
            C::new(1.0, 0.0)
        } else {
            C::new(0.0, 0.0)
        }
    });
    let schur = Schur::try_new(companion, 1e-15, 1000).ok_or(Error::RootFinding)?;
    let (_, t) = schur.unpack();
    let mut roots: Vec<C> = (0..d).map(|i| t[(i, i)]).collect();
    for r in roots.iter_mut() {
        for _ in 0..50 {
            let (p, dp, scale) = horner(coeffs, *r);
            if p.norm() <= ROOT_RESIDUAL * 1e-2 * scale {
                break;
            }
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            *r -= step;
            if step.norm() <= 1e-16 * r.norm().max(1.0) {
                break;
            }
        }
        let (p, _, scale) = horner(coeffs, *r);
        if !(p.norm() <= 1e-9 * scale) {
            return Err(Error::RootFinding);
        }
    }
    Ok(roots)
}

/// Intersection of the complex line `{s a + b}` with the hypersurface.
fn complex_line_points(hs: &Hypersurface, a: &[C], b: &[C]) -> Result<Vec<ProjectivePoint>> {
    let coeffs = hs.poly().restrict_to_line(a, b)?;
    let roots = polynomial_roots(&coeffs)?;
    roots
        .into_iter()
        .map(|s| {
            let z: Vec<C> = a.iter().zip(b).map(|(x, y)| s * x + y).collect();
            let z = hs.project(&z, 5, ROOT_RESIDUAL)?;
            hs.smooth_gradient(&z)?;
            ProjectivePoint::new(z)
        })
        .collect()
}

/// Real intersections of the real line `{s a + b}` with the hypersurface.
fn real_line_points(hs: &Hypersurface, a: &[f64], b: &[f64]) -> Result<Vec<ProjectivePoint>> {
    let ac: Vec<C> = a.iter().map(|&x| C::new(x, 0.0)).collect();
    let bc: Vec<C> = b.iter().map(|&x| C::new(x, 0.0)).collect();
    let coeffs = hs.poly().restrict_to_line(&ac, &bc)?;
    let roots = polynomial_roots(&coeffs)?;
    let mut out = Vec::new();
    for s in roots {
        if s.im.abs() > 1e-7 * (1.0 + s.norm()) {
            continue;
        }
        // real Newton on the real restriction
        let mut x = s.re;
        for _ in 0..30 {
            let (p, dp, _) = horner(&coeffs, C::new(x, 0.0));
            if dp.re == 0.0 {
                break;
            }
            let step = p.re / dp.re;
            x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let z: Vec<C> = ac.iter().zip(&bc).map(|(p, q)| p * x + q).collect();
        let z = hs.project(&z, 5, ROOT_RESIDUAL)?;
        hs.smooth_gradient(&z)?;
        out.push(ProjectivePoint::new(z.iter().map(|c| C::new(c.re, 0.0)).collect())?);
    }
    Ok(out)
}

/// Samples `count` points on the complex hypersurface. For real
/// hypersurfaces every line is paired with its conjugate and points are
/// stored as adjacent conjugate pairs, so the empirical measure is exactly
/// conjugation invariant (an odd `count` is rounded up).
pub fn sample_complex_locus(hs: &Hypersurface, count: usize, seed: u64) -> Result<SamplePool> {
    if count == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let symmetric = hs.is_real();
    let count = if symmetric { count + count % 2 } else { count };
    let d = hs.degree() as usize;
    let per_line = if symmetric { 2 * d } else { d };
    let lines_needed = count.div_ceil(per_line);
    let chunks = lines_needed.div_ceil(LINES_PER_CHUNK);
    let n = hs.num_vars();
    let per_chunk: Vec<Result<Vec<ProjectivePoint>>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = chunk_rng(seed, chunk as u64);
            let lines = LINES_PER_CHUNK.min(lines_needed - chunk * LINES_PER_CHUNK);
            let mut pts = Vec::with_capacity(lines * per_line);
            let mut done = 0;
            let mut failures = 0usize;
            while done < lines {
                let a = complex_gaussian(&mut rng, n);
                let b = complex_gaussian(&mut rng, n);
                match complex_line_points(hs, &a, &b) {
                    Ok(p) => {
                        for q in p {
                            if symmetric {
                                let c = q.conjugate();
                                pts.push(q);
                                pts.push(c);
                            } else {
                                pts.push(q);
                            }
                        }
                        done += 1;
                    }
                    Err(e) => {
                        failures += 1;
                        log::warn!("resampling line in chunk {chunk}: {e}");
                        if failures > 10 * LINES_PER_CHUNK {
                            return Err(e);
                        }
                    }
                }
            }
            Ok(pts)
        })
        .collect();
    let mut points = Vec::with_capacity(count);
    for chunk in per_chunk {
        points.extend(chunk?);
    }
    points.truncate(count);
    // Every accepted complex line contributes exactly d roots, so the Crofton
    // count has zero variance.
    let total = cp_volume(hs.ambient_dim() - 1) * d as f64;
    let w = total / points.len() as f64;
    Ok(SamplePool {
        weights: vec![w; points.len()],
        points,
        total_measure: total,
        standard_error: 0.0,
        seed,
        locus: Locus::Complex,
        lines: lines_needed,
    })
}

/// Samples `count` points on the real locus of a hypersurface with real
/// coefficients.
pub fn sample_real_locus(hs: &Hypersurface, count: usize, seed: u64) -> Result<SamplePool> {
    if !hs.is_real() {
        return Err(Error::InvalidParameter(
            "real-locus sampling needs a polynomial with real coefficients".into(),
        ));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let n = hs.num_vars();
    let mut points: Vec<ProjectivePoint> = Vec::with_capacity(count);
    let mut roots_seen = 0usize;
    let mut lines_used = 0usize;
    let mut sum_sq = 0.0;
    let mut batch = 0usize;
    'outer: loop {
        let start = batch * CHUNKS_PER_BATCH;
        let results: Vec<Result<Vec<Vec<ProjectivePoint>>>> = (start..start + CHUNKS_PER_BATCH)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = chunk_rng(seed, chunk as u64);
                let mut per_line = Vec::with_capacity(LINES_PER_CHUNK);
                let mut failures = 0usize;
                while per_line.len() < LINES_PER_CHUNK {
                    let a = real_gaussian(&mut rng, n);
                    let b = real_gaussian(&mut rng, n);
                    match real_line_points(hs, &a, &b) {
                        Ok(p) => per_line.push(p),
                        Err(e) => {
                            failures += 1;
                            log::warn!("resampling real line in chunk {chunk}: {e}");
                            if failures > 10 * LINES_PER_CHUNK {
                                return Err(e);
                            }
                        }
                    }
                }
                Ok(per_line)
            })
            .collect();
        for chunk in results {
            for line in chunk? {
                lines_used += 1;
                let k = line.len();
                roots_seen += k;
                sum_sq += (k * k) as f64;
                for p in line {
                    if points.len() < count {
                        points.push(p);
                    }
                }
                if points.len() >= count {
                    break 'outer;
                }
                if roots_seen == 0 && lines_used >= REAL_RETRY_BUDGET {
                    return Err(Error::EmptyRealLocus { lines: lines_used });
                }
            }
        }
        batch += 1;
        if lines_used > REAL_RETRY_BUDGET + 10_000 * count {
            return Err(Error::EmptyRealLocus { lines: lines_used });
        }
    }
    let lines = lines_used as f64;
    let mean = roots_seen as f64 / lines;
    let var = (sum_sq / lines - mean * mean).max(0.0);
    let vol = rp_volume(hs.ambient_dim() - 1);
    let total = vol * mean;
    let se = vol * (var / lines).sqrt();
    let w = total / points.len() as f64;
    Ok(SamplePool {
        weights: vec![w; points.len()],
        points,
        total_measure: total,
        standard_error: se,
        seed,
        locus: Locus::Real,
        lines: lines_used,
    })
}

/// Number of clusters when points closer than `radius` (FS distance) are linked.
pub fn linked_components(points: &[ProjectivePoint], radius: f64) -> usize {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if points[i].fs_distance(&points[j]) < radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

impl SamplePool {
    /// Number of consecutive points drawn from one line of a complex-locus
    /// pool on `hs`; these are the independent units of the estimate.
    pub fn line_cluster(&self, hs: &Hypersurface) -> usize {
        match self.locus {
            Locus::Complex if hs.is_real() => 2 * hs.degree() as usize,
            _ => hs.degree() as usize,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn manifest(&self, hs: &Hypersurface) -> PoolManifest {
        let residuals: Vec<f64> = self.points.iter().map(|p| hs.residual(p.coords())).collect();
        let n = residuals.len().max(1) as f64;
        PoolManifest {
            locus: self.locus,
            seed: self.seed,
            count: self.points.len(),
            num_vars: hs.num_vars(),
            lines: self.lines,
            total_measure: self.total_measure,
            standard_error: self.standard_error,
            residual_max: residuals.iter().copied().fold(0.0, f64::max),
            residual_mean: residuals.iter().sum::<f64>() / n,
            reality_residual_max: self
                .points
                .iter()
                .map(|p| p.reality_residual())
                .fold(0.0, f64::max),
        }
    }

    /// Writes `# <manifest json>` followed by one CSV row per point:
    /// real/imaginary parts of each coordinate, weight, chart index.
    pub fn write_csv<W: Write>(&self, hs: &Hypersurface, mut out: W) -> Result<()> {
        writeln!(out, "# {}", serde_json::to_string(&self.manifest(hs))?)?;
        let nv = hs.num_vars();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = Vec::with_capacity(2 * nv + 2);
        for i in 0..nv {
            header.push(format!("re{i}"));
            header.push(format!("im{i}"));
        }
        header.push("weight".into());
        header.push("chart".into());
        w.write_record(&header)?;
        for (p, wt) in self.points.iter().zip(&self.weights) {
            let mut row: Vec<String> = Vec::with_capacity(2 * nv + 2);
            for z in p.coords() {
                row.push(format!("{:?}", z.re));
                row.push(format!("{:?}", z.im));
            }
            row.push(format!("{wt:?}"));
            row.push(p.chart().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, hs: &Hypersurface, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(hs, std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<(SamplePool, PoolManifest)> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let json = first.trim().strip_prefix('#').ok_or(Error::Parse {
            line: 1,
            msg: "missing manifest header".into(),
        })?;
        let manifest: PoolManifest = serde_json::from_str(json.trim())?;
        let mut rdr = csv::Reader::from_reader(reader);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let nv = manifest.num_vars;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let perr = |msg: &str| Error::Parse {
                line: i + 3,
                msg: msg.to_string(),
            };
            if rec.len() != 2 * nv + 2 {
                return Err(perr("wrong column count"));
            }
            let vals: Vec<f64> = rec
                .iter()
                .take(2 * nv + 1)
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| perr("bad float"))?;
            let z: Vec<C> = (0..nv).map(|k| C::new(vals[2 * k], vals[2 * k + 1])).collect();
            let chart: usize = rec[2 * nv + 1].parse().map_err(|_| perr("bad chart index"))?;
            points.push(ProjectivePoint::from_normalized(z, chart)?);
            weights.push(vals[2 * nv]);
        }
        let pool = SamplePool {
            points,
            weights,
            total_measure: manifest.total_measure,
            standard_error: manifest.standard_error,
            seed: manifest.seed,
            locus: manifest.locus,
            lines: manifest.lines,
        };
        Ok((pool, manifest))
    }

    pub fn load(path: &Path) -> Result<(SamplePool, PoolManifest)> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
