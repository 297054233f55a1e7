//! Loops on plane curves: lengths, the tracked `2m`-th root `xi_m` of
//! `phi_m`, guarded homotopies, and discrete geodesic curvature.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bergman::BergmanData;
use crate::canonical::{divisor_proximity_at, CanonicalSection, LocalFrame};
use crate::error::{Error, Result};
use crate::linalg::{self, align_phase, hdot, norm, norm_sq};
use crate::metric::MetricContext;
use crate::projective::{Hypersurface, ProjectivePoint};
use crate::sampling::{chunk_rng, complex_gaussian, sample_real_locus};

type C = Complex64;

/// Default lower bound on `divisor_proximity(phi_m, .)` along homotopies.
pub const DEFAULT_GUARD_FLOOR: f64 = 1e-3;
/// Tolerance on the relative residual of loop vertices.
pub const VERTEX_RESIDUAL: f64 = 1e-10;
/// Largest FS distance between adjacent vertices.
pub const MAX_VERTEX_GAP: f64 = 0.5;
const MAX_BISECTIONS: usize = 40;
const CLOSURE_TOLERANCE: f64 = 1e-6;

fn require_curve(hs: &Hypersurface) -> Result<()> {
    if hs.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            expected: 1,
            got: hs.dim(),
        });
    }
    Ok(())
}

/// A closed polygon of points on a curve, stored cyclically: the segment
/// after the last vertex returns to the first.
#[derive(Clone, Debug, PartialEq)]
pub struct Loop {
    points: Vec<ProjectivePoint>,
}

/// Quadrature node on a loop segment: a point (affine representative) with
/// the velocity of the segment path there.
#[derive(Clone, Debug)]
pub struct Node {
    pub z: Vec<C>,
    pub velocity: Vec<C>,
    pub weight: f64,
}

/// Nodes per segment used by default. One node is the midpoint rule.
pub const DEFAULT_NODES: usize = 4;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w): (Vec<f64>, Vec<f64>) = match nodes {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = 0.6f64.sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let r = (6.0f64 / 5.0).sqrt() * 2.0 / 7.0;
            let a = (3.0 / 7.0 - r).sqrt();
            let b = (3.0 / 7.0 + r).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let r = 2.0 * (10.0f64 / 7.0).sqrt();
            let a = (5.0 - r).sqrt() / 3.0;
            let b = (5.0 + r).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
        }
        _ => {
            return Err(Error::InvalidParameter(format!("{nodes} quadrature nodes (1 to 5 supported)")));
        }
    };
    Ok((x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect()))
}

impl Loop {
    pub fn new(hs: &Hypersurface, points: Vec<ProjectivePoint>) -> Result<Self> {
        require_curve(hs)?;
        if points.len() < 3 {
            return Err(Error::InvalidParameter("a loop needs at least 3 vertices".into()));
        }
        for (k, p) in points.iter().enumerate() {
            let r = hs.residual(p.coords());
            if !(r <= VERTEX_RESIDUAL) {
                return Err(Error::InvalidParameter(format!("vertex {k} off the curve (residual {r:e})")));
            }
            let q = &points[(k + 1) % points.len()];
            let gap = p.fs_distance(q);
            if gap > MAX_VERTEX_GAP {
                return Err(Error::InvalidParameter(format!("vertices {k} and next are {gap} apart")));
            }
        }
        Ok(Loop { points })
    }

    pub fn points(&self) -> &[ProjectivePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_residual(&self, hs: &Hypersurface) -> f64 {
        self.points.iter().map(|p| hs.residual(p.coords())).fold(0.0, f64::max)
    }

    pub fn max_reality_residual(&self) -> f64 {
        self.points.iter().map(|p| p.reality_residual()).fold(0.0, f64::max)
    }

    /// Quadrature nodes along the loop, in order. Segment `k` is the straight
    /// path, in the local coordinate of the conventional frame at vertex `k`,
    /// from vertex `k` to vertex `k + 1`, lifted to the curve.
    pub fn quadrature_nodes(&self, hs: &Hypersurface, nodes: usize) -> Result<Vec<Node>> {
        let (xs, ws) = gauss_legendre(nodes)?;
        let n = self.points.len();
        let per: Vec<Vec<Node>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let pa = &self.points[k];
                let pb = &self.points[(k + 1) % n];
                let frame = LocalFrame::at(hs, pa)?;
                let za = frame.affine_point(hs, pa)?;
                let zb = pb.affine(frame.chart());
                if !zb.iter().all(|x| x.is_finite()) {
                    return Err(Error::ChartDegenerate {
                        chart_coord: pb.coords()[frame.chart()].norm(),
                        partial: 0.0,
                    });
                }
                let ua = frame.local_coords(&za)[0];
                let du = frame.local_coords(&zb)[0] - ua;
                let l = frame.distinguished();
                xs.iter()
                    .zip(&ws)
                    .map(|(&t, &w)| {
                        let guess = za[l] + (zb[l] - za[l]) * t;
                        let z = frame.lift(hs, &[ua + du * t], guess)?;
                        let v = frame.coordinate_vectors(hs, &z).swap_remove(0);
                        Ok(Node {
                            velocity: linalg::scale(&v, du),
                            z,
                            weight: w,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(per.into_iter().flatten().collect())
    }

    /// Smallest `divisor_proximity(s, .)` over vertices and quadrature nodes,
    /// with the segment where it occurs.
    pub fn proximity_floor(&self, hs: &Hypersurface, s: &CanonicalSection) -> Result<(f64, usize)> {
        let nodes = self.quadrature_nodes(hs, DEFAULT_NODES)?;
        let mut best = (f64::INFINITY, 0);
        for (k, p) in self.points.iter().enumerate() {
            let mut v = divisor_proximity_at(s, p.coords());
            for nd in &nodes[k * DEFAULT_NODES..(k + 1) * DEFAULT_NODES] {
                v = v.min(divisor_proximity_at(s, &nd.z));
            }
            if v < best.0 {
                best = (v, k);
            }
        }
        Ok(best)
    }
}

fn real_newton(hs: &Hypersurface, x: &mut [f64]) -> Result<()> {
    for _ in 0..50 {
        let z: Vec<C> = x.iter().map(|&v| C::new(v, 0.0)).collect();
        let f = hs.poly().eval_unchecked(&z).re;
        if f.abs() <= 1e-15 * hs.coefficient_scale() {
            return Ok(());
        }
        let g: Vec<f64> = hs.gradient(&z).iter().map(|c| c.re).collect();
        let gg: f64 = g.iter().map(|v| v * v).sum();
        if gg == 0.0 {
            break;
        }
        for (a, b) in x.iter_mut().zip(&g) {
            *a -= f * b / gg;
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= r);
    }
    let z: Vec<C> = x.iter().map(|&v| C::new(v, 0.0)).collect();
    if hs.residual(&z) <= 1e-13 {
        Ok(())
    } else {
        Err(Error::ProjectionFailed(hs.residual(&z)))
    }
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit3(v: [f64; 3]) -> [f64; 3] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / r, v[1] / r, v[2] / r]
}

fn dot3(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Traces the real component through a real-locus sample and resamples it
/// to `count` vertices equally spaced in FS arclength.
pub fn real_locus_loop(hs: &Hypersurface, count: usize) -> Result<Loop> {
    require_curve(hs)?;
    if !hs.is_real() {
        return Err(Error::InvalidParameter("real locus of a non-real curve".into()));
    }
    if count < 3 {
        return Err(Error::InvalidParameter("a loop needs at least 3 vertices".into()));
    }
    let start_pt = sample_real_locus(hs, 1, 0)?.points.swap_remove(0);
    let mut x: Vec<f64> = start_pt.coords().iter().map(|c| c.re).collect();
    real_newton(hs, &mut x)?;
    let start = x.clone();
    let tangent = |x: &[f64]| -> [f64; 3] {
        let z: Vec<C> = x.iter().map(|&v| C::new(v, 0.0)).collect();
        let g: Vec<f64> = hs.gradient(&z).iter().map(|c| c.re).collect();
        unit3(cross(x, &g))
    };
    let h = 1e-3;
    let mut t_prev = tangent(&x);
    let mut trace = vec![x.clone()];
    let max_steps = 2_000_000;
    for step in 0..max_steps {
        let mut t = tangent(&x);
        if dot3(&t, &t_prev) < 0.0 {
            t = [-t[0], -t[1], -t[2]];
        }
        // midpoint predictor, then Newton back onto the curve
        let mut mid: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a + 0.5 * h * b).collect();
        let r = mid.iter().map(|v| v * v).sum::<f64>().sqrt();
        mid.iter_mut().for_each(|v| *v /= r);
        let mut tm = tangent(&mid);
        if dot3(&tm, &t) < 0.0 {
            tm = [-tm[0], -tm[1], -tm[2]];
        }
        let mut next: Vec<f64> = x.iter().zip(&tm).map(|(a, b)| a + h * b).collect();
        let r = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        next.iter_mut().for_each(|v| *v /= r);
        real_newton(hs, &mut next)?;
        t_prev = tm;
        x = next;
        // closed in projective space: back at +start or -start
        let d = dot3(&x, &start).abs().min(1.0).acos();
        if step > 10 && d < 0.75 * h {
            break;
        }
        if step + 1 == max_steps {
            return Err(Error::Ordering("real component did not close".into()));
        }
        trace.push(x.clone());
    }
    // cumulative arclength (closing chord included)
    let n = trace.len();
    let dist = |a: &[f64], b: &[f64]| dot3(a, b).abs().min(1.0).acos();
    let mut cum = vec![0.0; n + 1];
    for k in 0..n {
        cum[k + 1] = cum[k] + dist(&trace[k], &trace[(k + 1) % n]);
    }
    let total = cum[n];
    let mut points = Vec::with_capacity(count);
    let mut j = 0;
    for i in 0..count {
        let s = total * i as f64 / count as f64;
        while cum[j + 1] < s {
            j += 1;
        }
        let a = &trace[j];
        let mut b = trace[(j + 1) % n].clone();
        if dot3(a, &b) < 0.0 {
            b.iter_mut().for_each(|v| *v = -*v);
        }
        let seg = cum[j + 1] - cum[j];
        let t = if seg > 0.0 { (s - cum[j]) / seg } else { 0.0 };
        let mut p: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (1.0 - t) * u + t * v).collect();
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        p.iter_mut().for_each(|v| *v /= r);
        real_newton(hs, &mut p)?;
        points.push(ProjectivePoint::from_real(&p)?);
    }
    Loop::new(hs, points)
}

/// Length of the loop under `metric`, by Gauss-Legendre quadrature with
/// [`DEFAULT_NODES`] nodes per segment.
pub fn loop_length(hs: &Hypersurface, lp: &Loop, metric: &MetricContext) -> Result<f64> {
    loop_length_with(hs, lp, metric, DEFAULT_NODES)
}

/// As [`loop_length`] with `nodes` per segment; `nodes = 1` is the midpoint
/// rule.
pub fn loop_length_with(hs: &Hypersurface, lp: &Loop, metric: &MetricContext, nodes: usize) -> Result<f64> {
    let nd = lp.quadrature_nodes(hs, nodes)?;
    let parts: Vec<f64> = nd
        .par_iter()
        .map(|n| Ok(n.weight * metric.norm_sq(hs, &n.z, &n.velocity)?.sqrt()))
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// `phi(z; v) = P(z) Omega(z; v)^p` for a section of `K^p` on a curve.
fn section_on_vector(hs: &Hypersurface, s: &CanonicalSection, z: &[C], v: &[C]) -> Result<C> {
    let om = hs.residue_form(z, std::slice::from_ref(&v.to_vec()))?;
    Ok(s.poly_value(z) * om.powu(s.power()))
}

/// Continuous `order`-th root of a complex function along a path.
#[derive(Clone, Debug)]
pub struct BranchTracker {
    order: u32,
    root: Option<C>,
    value: Option<C>,
    integral: C,
    bisections: usize,
    anchor: Option<(Vec<C>, Vec<C>)>,
}

fn principal_root(q: C, order: u32) -> C {
    q.powf(1.0 / order as f64)
}

impl BranchTracker {
    /// Tracker for `2m`-th roots.
    pub fn new(m: u32) -> Self {
        Self::with_order(2 * m)
    }

    pub fn with_order(order: u32) -> Self {
        assert!(order >= 1);
        BranchTracker {
            order,
            root: None,
            value: None,
            integral: C::new(0.0, 0.0),
            bisections: 0,
            anchor: None,
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn root(&self) -> Option<C> {
        self.root
    }

    pub fn value(&self) -> Option<C> {
        self.value
    }

    pub fn integral(&self) -> C {
        self.integral
    }

    pub fn bisections(&self) -> usize {
        self.bisections
    }

    /// `j` with `root = principal_root(value) * exp(2 pi i j / order)`.
    pub fn branch_index(&self) -> Option<u32> {
        let (r, q) = (self.root?, self.value?);
        let ratio = r / principal_root(q, self.order);
        let j = (ratio.arg() * self.order as f64 / TAU).round() as i64;
        Some(j.rem_euclid(self.order as i64) as u32)
    }

    /// Starts at `q` with the principal root (positive for positive `q`).
    pub fn start(&mut self, q: C) -> C {
        let r = principal_root(q, self.order);
        self.root = Some(r);
        self.value = Some(q);
        r
    }

    pub fn start_at(&mut self, q: C, root: C) -> Result<()> {
        let dev = (root.powu(self.order) - q).norm() / q.norm();
        if !(dev <= 1e-9) {
            return Err(Error::InvalidParameter(format!("root does not match value ({dev:e})")));
        }
        self.root = Some(root);
        self.value = Some(q);
        Ok(())
    }

    pub fn add_to_integral(&mut self, x: C) {
        self.integral += x;
    }

    pub fn reset_integral(&mut self) {
        self.integral = C::new(0.0, 0.0);
    }

    /// One continuation step; the phase of `q_new / q_old` must stay below
    /// `pi/2`.
    pub fn step(&mut self, q_new: C) -> Result<C> {
        let (r, q) = match (self.root, self.value) {
            (Some(r), Some(q)) => (r, q),
            _ => return Ok(self.start(q_new)),
        };
        if !(q_new.norm() > 0.0) || !q_new.is_finite() {
            return Err(Error::BranchResolution(0));
        }
        let ratio = q_new / q;
        if ratio.arg().abs() >= PI / 2.0 {
            return Err(Error::BranchResolution(0));
        }
        let pred = r * principal_root(ratio, self.order);
        // polish so that root^order matches q_new to rounding
        let corr = principal_root(q_new / pred.powu(self.order), self.order);
        let r_new = pred * corr;
        self.root = Some(r_new);
        self.value = Some(q_new);
        Ok(r_new)
    }

    /// Continues along `q(s)`, `s` in `[0, 1]`, with `q(0)` the current value,
    /// bisecting wherever the phase rule fails.
    pub fn follow<F>(&mut self, mut q: F) -> Result<C>
    where
        F: FnMut(f64) -> Result<C>,
    {
        let mut s0 = 0.0;
        let mut ds = 1.0f64;
        loop {
            let s1 = (s0 + ds).min(1.0);
            let q1 = q(s1)?;
            let snapshot = (self.root, self.value);
            match self.step(q1) {
                Ok(r) => {
                    if s1 >= 1.0 {
                        return Ok(r);
                    }
                    s0 = s1;
                    ds *= 2.0;
                }
                Err(Error::BranchResolution(_)) => {
                    (self.root, self.value) = snapshot;
                    self.bisections += 1;
                    ds *= 0.5;
                    if ds < 0.5f64.powi(MAX_BISECTIONS as i32) {
                        return Err(Error::BranchResolution(MAX_BISECTIONS));
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Root defect `r_end / r_start` of the continuous `order`-th root of
/// `q(t)` around a closed path `t` in `[0, 1]`, sampled at `samples` points.
pub fn loop_monodromy<F>(order: u32, q: F, samples: usize) -> Result<C>
where
    F: Fn(f64) -> Result<C>,
{
    let mut tr = BranchTracker::with_order(order);
    let r0 = tr.start(q(0.0)?);
    for k in 1..=samples {
        let (a, b) = ((k - 1) as f64 / samples as f64, k as f64 / samples as f64);
        tr.follow(|s| q(a + s * (b - a)))?;
    }
    Ok(tr.root().unwrap() / r0)
}

/// Continues the tracked root from node `a` to node `b`, where `qb` is the
/// section value on `b`'s velocity. The root is followed along the segment
/// between unit representatives, projected to the curve, on the tangent
/// projection of `a`'s velocity; the change of velocity is then applied as
/// the exact linear factor, so kinks of the polygon cannot flip the branch.
fn continue_root(
    hs: &Hypersurface,
    s: &CanonicalSection,
    tracker: &mut BranchTracker,
    a: (&[C], &[C]),
    b: (&[C], &[C]),
    qb: C,
) -> Result<C> {
    let na = norm(a.0);
    let za: Vec<C> = linalg::scale(a.0, C::new(1.0 / na, 0.0));
    let va: Vec<C> = linalg::scale(a.1, C::new(1.0 / na, 0.0));
    let p = hdot(&za, b.0);
    let ph = if p.norm() > 0.0 { p / p.norm() } else { C::new(1.0, 0.0) } / norm(b.0);
    let zb = linalg::scale(b.0, ph);
    let vb = linalg::scale(b.1, ph);
    let frame_at = |t: f64| -> Result<(Vec<C>, Vec<C>)> {
        if t >= 1.0 {
            let e = hs.tangent_projection(&zb, &va)?;
            return Ok((zb.clone(), e));
        }
        let z: Vec<C> = za.iter().zip(&zb).map(|(x, y)| x * (1.0 - t) + y * t).collect();
        let z = align_phase(&hs.project(&z, 8, 1e-14)?, &za);
        let e = hs.tangent_projection(&z, &va)?;
        Ok((z, e))
    };
    let root = tracker.follow(|t| {
        let (z, e) = frame_at(t)?;
        section_on_vector(hs, s, &z, &e)
    })?;
    let (_, e1) = frame_at(1.0)?;
    let ee = norm_sq(&e1);
    if !(ee > 0.0) {
        return Err(Error::BranchResolution(0));
    }
    let lambda = hdot(&vb, &e1) / ee;
    tracker.start_at(qb, root * lambda)?;
    Ok(root * lambda)
}

/// Integral of the tracked `2m`-th root of `phi_m` around the loop, with
/// [`DEFAULT_NODES`] Gauss-Legendre nodes per segment.
///
/// A fresh tracker starts from the principal root at the first node (positive
/// on the real locus); otherwise the root is continued from the tracker's
/// anchor, the first node of the previous loop. On success the tracker is
/// anchored at the first node of this loop and holds the integral.
pub fn xi_integral(
    hs: &Hypersurface,
    lp: &Loop,
    bd: &BergmanData,
    tracker: &mut BranchTracker,
    guard_floor: Option<f64>,
) -> Result<C> {
    xi_integral_with(hs, lp, bd.phi(), tracker, guard_floor, DEFAULT_NODES)
}

/// [`xi_integral`] for any section `s` of `K^p` on a curve, `p` the tracker
/// order, with `nodes` per segment.
pub fn xi_integral_with(
    hs: &Hypersurface,
    lp: &Loop,
    phi: &CanonicalSection,
    tracker: &mut BranchTracker,
    guard_floor: Option<f64>,
    nodes: usize,
) -> Result<C> {
    require_curve(hs)?;
    if tracker.order() != phi.power() {
        return Err(Error::InvalidParameter(format!(
            "tracker order {} does not match section power {}",
            tracker.order(),
            phi.power()
        )));
    }
    if let Some(floor) = guard_floor {
        let (prox, k) = lp.proximity_floor(hs, phi)?;
        if prox < floor {
            return Err(Error::GuardViolation {
                step: 0,
                vertex: k,
                proximity: prox,
                floor,
            });
        }
    }
    let nd = lp.quadrature_nodes(hs, nodes)?;
    let qs: Vec<C> = nd
        .par_iter()
        .map(|n| section_on_vector(hs, phi, &n.z, &n.velocity))
        .collect::<Result<_>>()?;
    let r0 = match tracker.anchor.take() {
        Some((z, v)) => continue_root(hs, phi, tracker, (&z, &v), (&nd[0].z, &nd[0].velocity), qs[0])?,
        None => tracker.step(qs[0])?,
    };
    let mut snapshot = tracker.clone();
    let mut total = r0 * nd[0].weight;
    let n = nd.len();
    for k in 1..=n {
        let (a, b) = (&nd[k - 1], &nd[k % n]);
        let r = continue_root(hs, phi, tracker, (&a.z, &a.velocity), (&b.z, &b.velocity), qs[k % n])?;
        if k < n {
            total += r * b.weight;
        } else {
            let defect = r / r0;
            if (defect - 1.0).norm() > CLOSURE_TOLERANCE {
                return Err(Error::MonodromyObstruction { defect });
            }
        }
    }
    snapshot.bisections = tracker.bisections;
    *tracker = snapshot;
    tracker.anchor = Some((nd[0].z.clone(), nd[0].velocity.clone()));
    tracker.reset_integral();
    tracker.add_to_integral(total);
    Ok(total)
}

/// Random low-frequency displacement field on loop vertices: three
/// trigonometric terms with complex Gaussian vector coefficients, scaled to
/// unit maximum.
#[derive(Clone, Debug)]
pub struct DisplacementField {
    cos_terms: Vec<Vec<C>>,
    sin_terms: Vec<Vec<C>>,
}

pub const DISPLACEMENT_TERMS: usize = 3;

impl DisplacementField {
    pub fn random(num_vars: usize, chart: usize, seed: u64) -> Self {
        let mut rng = chunk_rng(seed, u64::MAX);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut v = complex_gaussian(rng, num_vars);
            v[chart] = C::new(0.0, 0.0);
            v
        };
        let cos_terms = (0..DISPLACEMENT_TERMS).map(|_| draw(&mut rng)).collect();
        let sin_terms = (0..DISPLACEMENT_TERMS).map(|_| draw(&mut rng)).collect();
        DisplacementField { cos_terms, sin_terms }
    }

    /// A single term `a cos(j theta) + b sin(j theta)` of frequency `j`.
    pub fn single(cos: Vec<C>, sin: Vec<C>, frequency: usize) -> Self {
        let n = cos.len();
        let zero = vec![C::new(0.0, 0.0); n];
        let mut cos_terms = vec![zero.clone(); frequency];
        let mut sin_terms = vec![zero; frequency];
        cos_terms[frequency - 1] = cos;
        sin_terms[frequency - 1] = sin;
        DisplacementField { cos_terms, sin_terms }
    }

    fn raw(&self, theta: f64) -> Vec<C> {
        let n = self.cos_terms[0].len();
        let mut out = vec![C::new(0.0, 0.0); n];
        for (j, (a, b)) in self.cos_terms.iter().zip(&self.sin_terms).enumerate() {
            let f = (j + 1) as f64;
            let (c, s) = ((f * theta).cos(), (f * theta).sin());
            for i in 0..n {
                out[i] += a[i] * c + b[i] * s;
            }
        }
        out
    }

    /// Values at `count` equally spaced parameters, scaled so that the
    /// largest has unit norm.
    pub fn sample(&self, count: usize) -> Vec<Vec<C>> {
        let vals: Vec<Vec<C>> = (0..count).map(|k| self.raw(TAU * k as f64 / count as f64)).collect();
        let mx = vals.iter().map(|v| norm(v)).fold(0.0, f64::max);
        if mx == 0.0 {
            return vals;
        }
        vals.into_iter().map(|v| linalg::scale(&v, C::new(1.0 / mx, 0.0))).collect()
    }
}

/// Affine-chart Newton projection keeping `Z_chart = 1`.
fn affine_newton(hs: &Hypersurface, z: &mut [C], chart: usize, max_iter: usize, tol: f64) -> Result<()> {
    for _ in 0..max_iter {
        if hs.residual(z) <= tol {
            return Ok(());
        }
        let f = hs.poly().eval_unchecked(z);
        let mut g = hs.gradient(z);
        g[chart] = C::new(0.0, 0.0);
        let gg = norm_sq(&g);
        if gg == 0.0 {
            break;
        }
        for (x, gi) in z.iter_mut().zip(&g) {
            *x -= f / gg * gi.conj();
        }
    }
    let r = hs.residual(z);
    if r <= tol {
        Ok(())
    } else {
        Err(Error::ProjectionFailed(r))
    }
}

/// Moves every vertex by `scale * P_T(delta_k)` in affine chart `chart`
/// and projects back onto the curve.
pub fn displace(hs: &Hypersurface, lp: &Loop, deltas: &[Vec<C>], scale: f64, chart: usize) -> Result<Loop> {
    if deltas.len() != lp.len() {
        return Err(Error::DimensionMismatch {
            expected: lp.len(),
            got: deltas.len(),
        });
    }
    let pts: Vec<ProjectivePoint> = lp
        .points()
        .par_iter()
        .zip(deltas)
        .map(|(p, d)| {
            let mut z = p.affine(chart);
            if !z.iter().all(|x| x.is_finite()) {
                return Err(Error::ChartDegenerate {
                    chart_coord: p.coords()[chart].norm(),
                    partial: 0.0,
                });
            }
            let mut g = hs.gradient(&z);
            g[chart] = C::new(0.0, 0.0);
            let gg = norm_sq(&g);
            let gd: C = g.iter().zip(d).map(|(a, b)| a * b).sum();
            for i in 0..z.len() {
                if i != chart {
                    z[i] += (d[i] - gd / gg * g[i].conj()) * scale;
                }
            }
            affine_newton(hs, &mut z, chart, 5, 1e-11)?;
            // polish to the loop vertex tolerance
            affine_newton(hs, &mut z, chart, 20, 1e-14).or_else(|_| {
                if hs.residual(&z) <= VERTEX_RESIDUAL {
                    Ok(())
                } else {
                    Err(Error::ProjectionFailed(hs.residual(&z)))
                }
            })?;
            ProjectivePoint::new(z)
        })
        .collect::<Result<_>>()?;
    Loop::new(hs, pts)
}

/// Sequence of loops `L_0 = L, L_1, ..., L_steps`.
#[derive(Clone, Debug)]
pub struct Homotopy {
    pub loops: Vec<Loop>,
    pub amplitude: f64,
    pub seed: u64,
    pub steps: usize,
    pub chart: usize,
    pub guard_floor: f64,
    /// Smallest divisor proximity over each loop.
    pub proximity: Vec<f64>,
}

/// Chart maximizing the smallest chart coordinate along the loop.
pub fn best_chart(lp: &Loop) -> usize {
    let n = lp.points()[0].num_vars();
    (0..n)
        .max_by(|&a, &b| {
            let ma = lp.points().iter().map(|p| p.coords()[a].norm()).fold(f64::INFINITY, f64::min);
            let mb = lp.points().iter().map(|p| p.coords()[b].norm()).fold(f64::INFINITY, f64::min);
            ma.partial_cmp(&mb).unwrap().then(b.cmp(&a))
        })
        .unwrap()
}

/// Random guarded in-curve deformation of `lp` in `steps` increments of a
/// displacement field whose largest value has norm `amplitude`.
pub fn generate_homotopy(
    hs: &Hypersurface,
    lp: &Loop,
    bd: &BergmanData,
    steps: usize,
    amplitude: f64,
    seed: u64,
    guard_floor: f64,
) -> Result<Homotopy> {
    require_curve(hs)?;
    if steps == 0 {
        return Err(Error::InvalidParameter("homotopy needs at least one step".into()));
    }
    if !(amplitude >= 0.0) {
        return Err(Error::InvalidParameter(format!("amplitude {amplitude} must be nonnegative")));
    }
    let phi = bd.phi();
    let chart = best_chart(lp);
    let field = DisplacementField::random(hs.num_vars(), chart, seed).sample(lp.len());
    let mut loops = vec![lp.clone()];
    let mut proximity = Vec::with_capacity(steps + 1);
    let (p0, v0) = lp.proximity_floor(hs, phi)?;
    if p0 < guard_floor {
        return Err(Error::GuardViolation {
            step: 0,
            vertex: v0,
            proximity: p0,
            floor: guard_floor,
        });
    }
    proximity.push(p0);
    for step in 1..=steps {
        let next = if amplitude == 0.0 {
            loops.last().unwrap().clone()
        } else {
            displace(hs, loops.last().unwrap(), &field, amplitude / steps as f64, chart)?
        };
        let (p, v) = next.proximity_floor(hs, phi)?;
        if p < guard_floor {
            return Err(Error::GuardViolation {
                step,
                vertex: v,
                proximity: p,
                floor: guard_floor,
            });
        }
        proximity.push(p);
        loops.push(next);
    }
    Ok(Homotopy {
        loops,
        amplitude,
        seed,
        steps,
        chart,
        guard_floor,
        proximity,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub length: f64,
    pub xi_re: f64,
    pub xi_im: f64,
    pub xi_abs: f64,
    pub conservation: f64,
    pub proximity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComparisonReport {
    pub seed: u64,
    pub amplitude: f64,
    pub guard_floor: f64,
    pub vertices: usize,
    pub steps: usize,
    /// `10 * length(L) / vertices^2`.
    pub tolerance: f64,
    pub base_length: f64,
    pub min_length: f64,
    pub max_conservation: f64,
    /// `length(L) - Re xi(L)`; zero up to rounding on the real locus.
    pub base_equality: f64,
    pub records: Vec<StepRecord>,
    pub pass: bool,
}

/// Quadrature tolerance `10 * scale / N^2` for loops of `N` vertices.
pub fn quadrature_tolerance(scale: f64, vertices: usize) -> f64 {
    10.0 * scale / (vertices as f64).powi(2)
}

/// Tracks `xi_m` along the homotopy and checks
/// `length(L_t) >= |xi(L_t)| = |xi(L)| = length(L)` within tolerance.
pub fn verify_volume_comparison(
    hs: &Hypersurface,
    h: &Homotopy,
    bd: &BergmanData,
    metric: &MetricContext,
) -> Result<ComparisonReport> {
    let mut tracker = BranchTracker::new(bd.power());
    let mut records = Vec::with_capacity(h.loops.len());
    let mut base = None;
    for (step, lp) in h.loops.iter().enumerate() {
        let length = loop_length(hs, lp, metric)?;
        let xi = xi_integral(hs, lp, bd, &mut tracker, Some(h.guard_floor)).map_err(|e| match e {
            Error::GuardViolation {
                vertex,
                proximity,
                floor,
                ..
            } => Error::GuardViolation {
                step,
                vertex,
                proximity,
                floor,
            },
            e => e,
        })?;
        let xi0 = *base.get_or_insert(xi);
        records.push(StepRecord {
            step,
            length,
            xi_re: xi.re,
            xi_im: xi.im,
            xi_abs: xi.norm(),
            conservation: (xi - xi0).norm(),
            proximity: h.proximity[step],
        });
    }
    let base_length = records[0].length;
    let n = h.loops[0].len();
    let tol = quadrature_tolerance(base_length, n);
    let min_length = records.iter().map(|r| r.length).fold(f64::INFINITY, f64::min);
    let max_conservation = records.iter().map(|r| r.conservation).fold(0.0, f64::max);
    let base_equality = base_length - records[0].xi_re;
    let pass = records
        .iter()
        .all(|r| r.length >= base_length - tol && r.length >= r.xi_abs - tol && r.conservation <= tol);
    Ok(ComparisonReport {
        seed: h.seed,
        amplitude: h.amplitude,
        guard_floor: h.guard_floor,
        vertices: n,
        steps: h.steps,
        tolerance: tol,
        base_length,
        min_length,
        max_conservation,
        base_equality,
        records,
        pass,
    })
}

impl Homotopy {
    /// Trace CSV: `step, vertex, re_i, im_i`.
    pub fn write_trace<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let nv = self.loops[0].points()[0].num_vars();
        let mut header = vec!["step".to_string(), "vertex".to_string()];
        for i in 0..nv {
            header.push(format!("re_{i}"));
            header.push(format!("im_{i}"));
        }
        w.write_record(&header)?;
        for (s, lp) in self.loops.iter().enumerate() {
            for (k, p) in lp.points().iter().enumerate() {
                let mut rec = vec![s.to_string(), k.to_string()];
                for c in p.coords() {
                    rec.push(format!("{:?}", c.re));
                    rec.push(format!("{:?}", c.im));
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Geodesic curvature at the middle of three chart points for the conformal
/// metric `e^{2 psi} |du|^2`, given `psi` and its gradient at the middle.
pub fn discrete_geodesic_curvature(prev: C, mid: C, next: C, psi: f64, grad_psi: C) -> f64 {
    let t1 = mid - prev;
    let t2 = next - mid;
    let kappa = (t2 / t2.norm() - t1 / t1.norm()) * (2.0 / (t1.norm() + t2.norm()));
    let chord = next - prev;
    let tangent = chord / chord.norm();
    // normal component of grad psi
    let along = tangent * (grad_psi.re * tangent.re + grad_psi.im * tangent.im);
    let normal = grad_psi - along;
    (-psi).exp() * (kappa - normal).norm()
}

/// Largest discrete geodesic curvature along the loop, computed in the
/// conventional local coordinate at each vertex.
pub fn geodesic_curvature_residual(hs: &Hypersurface, lp: &Loop, metric: &MetricContext) -> Result<f64> {
    require_curve(hs)?;
    let n = lp.len();
    if n < 32 {
        return Err(Error::InvalidParameter("geodesic residual needs at least 32 vertices".into()));
    }
    let vals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let pt = &lp.points()[k];
            let frame = LocalFrame::at(hs, pt)?;
            let zaff = frame.affine_point(hs, pt)?;
            let local = |p: &ProjectivePoint| -> C {
                let a = p.affine(frame.chart());
                frame.local_coords(&a)[0]
            };
            let u = frame.local_coords(&zaff)[0];
            let up = local(&lp.points()[(k + n - 1) % n]);
            let un = local(&lp.points()[(k + 1) % n]);
            let guess = zaff[frame.distinguished()];
            let psi = |u: C| -> Result<f64> {
                let z = frame.lift(hs, &[u], guess)?;
                let v = frame.coordinate_vectors(hs, &z);
                let lam = metric.norm_sq(hs, &z, &v[0])?;
                if !(lam > 0.0) {
                    return Err(Error::DegenerateFrame);
                }
                Ok(0.5 * lam.ln())
            };
            let h = 1e-5 * (1.0 + u.norm());
            let gx = (psi(u + h)? - psi(u - h)?) / (2.0 * h);
            let gy = (psi(u + C::new(0.0, h))? - psi(u - C::new(0.0, h))?) / (2.0 * h);
            Ok(discrete_geodesic_curvature(up, u, un, psi(u)?, C::new(gx, gy)))
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Deterministic non-geodesic control: displaces the loop within the curve
/// by `amplitude` times a single frequency-`frequency` field along `i` times
/// the real tangent.
pub fn wiggle(hs: &Hypersurface, lp: &Loop, amplitude: f64, frequency: usize) -> Result<Loop> {
    let chart = best_chart(lp);
    let n = lp.len();
    let deltas: Vec<Vec<C>> = (0..n)
        .map(|k| {
            let next = lp.points()[(k + 1) % n].affine(chart);
            let prev = lp.points()[(k + n - 1) % n].affine(chart);
            let t = linalg::sub(&next, &prev);
            let w = amplitude * (TAU * frequency as f64 * k as f64 / n as f64).sin() / norm(&t);
            linalg::scale(&t, C::new(0.0, w))
        })
        .collect();
    displace(hs, lp, &deltas, 1.0, chart)
}
