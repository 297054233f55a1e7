#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use lagcal_core::bergman::BergmanData;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use lagcal_core::{sample_complex_locus, sample_real_locus, Complex64, HomogeneousPolynomial, Hypersurface, SamplePool};

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// x^4 + y^4 - z^4
pub fn quartic() -> Hypersurface {
    Hypersurface::new(HomogeneousPolynomial::fermat(&[1.0, 1.0, -1.0], 4).unwrap()).unwrap()
}

pub fn quintic_curve() -> Hypersurface {
    Hypersurface::new(HomogeneousPolynomial::fermat(&[1.0, 1.0, 1.0], 5).unwrap()).unwrap()
}

pub fn quintic_surface() -> Hypersurface {
    Hypersurface::new(HomogeneousPolynomial::fermat(&[1.0, 1.0, 1.0, 1.0], 5).unwrap()).unwrap()
}

pub fn plane_line() -> Hypersurface {
    Hypersurface::new(HomogeneousPolynomial::from_real_terms(3, 1, &[(&[0, 0, 1], 1.0)]).unwrap()).unwrap()
}

pub fn quartic_pool() -> &'static SamplePool {
    static POOL: OnceLock<SamplePool> = OnceLock::new();
    POOL.get_or_init(|| sample_complex_locus(&quartic(), 40_000, 11).unwrap())
}

pub fn quartic_real_pool() -> &'static SamplePool {
    static POOL: OnceLock<SamplePool> = OnceLock::new();
    POOL.get_or_init(|| sample_real_locus(&quartic(), 1000, 12).unwrap())
}

/// Bergman data on the quartic for m = 1..=3 from a shared pool.
pub fn quartic_bergman(m: u32) -> Arc<BergmanData> {
    static DATA: OnceLock<Vec<Arc<BergmanData>>> = OnceLock::new();
    DATA.get_or_init(|| {
        (1..=3)
            .map(|m| Arc::new(BergmanData::build(&quartic(), m, quartic_pool()).unwrap()))
            .collect()
    })[m as usize - 1]
        .clone()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn unit_disk<R: Rng>(rng: &mut R) -> C {
    loop {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if a * a + b * b <= 1.0 {
            return c(a, b);
        }
    }
}

/// Mean and standard error of `pi * f` for `x` uniform in the unit disk.
pub fn disk_mc<F: Fn(C) -> f64>(n: usize, seed: u64, f: F) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..n).map(|_| PI * f(unit_disk(&mut rng))).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// FS area density `g(v, v)` at `z` along `v`.
pub fn fs_density(z: &[C], v: &[C]) -> f64 {
    let zz: f64 = z.iter().map(|a| a.norm_sqr()).sum();
    let vv: f64 = v.iter().map(|a| a.norm_sqr()).sum();
    let vz: C = v.iter().zip(z).map(|(a, b)| a * b.conj()).sum();
    (vv * zz - vz.norm_sqr()) / (zz * zz)
}

/// FS area of x^4 + y^4 + w^4 = 0 (unitarily equivalent to the quartic).
/// The six regions ordered by coordinate modulus are isometric; on
/// |x| <= |y| <= |w| = 1 the curve is a graph over x in the unit disk with
/// four branches of equal density.
pub fn quartic_area_mc(n: usize, seed: u64) -> (f64, f64) {
    let (m, se) = disk_mc(n, seed, |x| {
        let y = (-(C::new(1.0, 0.0) + x.powu(4))).powf(0.25);
        if !(x.norm() <= y.norm() && y.norm() <= 1.0) {
            return 0.0;
        }
        let z = [x, y, c(1.0, 0.0)];
        let v = [c(1.0, 0.0), -x.powu(3) / y.powu(3), c(0.0, 0.0)];
        4.0 * fs_density(&z, &v)
    });
    (6.0 * m, 6.0 * se)
}
