mod common;

use std::f64::consts::FRAC_PI_2;

use common::*;
use lagcal_core::bergman::BergmanData;
use lagcal_core::calibration::*;
use lagcal_core::*;
use nalgebra::DMatrix;

#[test]
fn fermat_phi_examples() {
    for k in 1..=3 {
        let f = fermat_phi(k, 3).unwrap();
        assert_eq!(f.norm(&[c(1., 0.), c(0., 0.), c(0., 0.)]), 1.0);
        assert_eq!(f.norm(&[c(1., 0.), c(0., 1.), c(0., 0.)]), 0.0);
        assert!((f.norm(&[c(2., 0.), c(0., 1.), c(0., 0.)]) - 0.6f64.powi(k as i32)).abs() < 1e-15);
    }
    assert!(fermat_phi(0, 3).is_err());
    // (sum z^2) is a section of K on the quintic curve but not on the quartic
    assert!(fermat_phi(1, 3).unwrap().on(&quintic_curve()).is_ok());
    assert!(fermat_phi(1, 3).unwrap().on(&quartic()).is_err());
}

#[test]
fn quintic_curve_profile() {
    let hs = quintic_curve();
    let complex = sample_complex_locus(&hs, 20_000, 1).unwrap();
    let real = sample_real_locus(&hs, 1000, 2).unwrap();
    let rep = max_profile("sum z^2", &fermat_phi(1, 3).unwrap(), &complex, &real).unwrap();
    assert!(rep.equality_residual <= 1e-10);
    assert!(rep.complex_max <= 1.0 + 1e-12);
    assert!(rep.real_max >= rep.complex_max - 1e-12);
    assert!(rep.min_margin >= -1e-12);
    assert!(rep.strict);
    assert!(rep.quadratic_r2 >= 0.9, "R^2 = {}", rep.quadratic_r2);
    assert!(rep.quadratic_coefficient > 0.0);
    let bins: usize = rep.margin_histogram.iter().map(|b| b.count).sum();
    assert_eq!(bins, rep.complex_count);
}

#[test]
fn constant_evaluator_has_no_margin() {
    let one = |_: &ProjectivePoint| -> Result<f64> { Ok(1.0) };
    let rep = max_profile("one", &one, quartic_pool(), quartic_real_pool()).unwrap();
    assert_eq!(rep.min_margin, 0.0);
    assert!(rep.margin_histogram.iter().all(|b| b.count == 0 || b.mean_margin == 0.0));
    assert!(!rep.strict);
}

#[test]
fn empty_pools_are_rejected() {
    let mut empty = quartic_real_pool().clone();
    empty.points.clear();
    empty.weights.clear();
    let r = max_profile("x", &fermat_phi(1, 3).unwrap(), quartic_pool(), &empty);
    assert!(r.is_err());
}

#[test]
fn bergman_profile_on_the_quartic() {
    for m in 1..=3 {
        let bd = quartic_bergman(m);
        let rep = max_profile("phi", bd.as_ref(), quartic_pool(), quartic_real_pool()).unwrap();
        assert!(rep.equality_residual <= 1e-10);
        assert!(rep.complex_max <= 1.0 + 1e-12);
    }
}

#[test]
fn theta_examples() {
    let vals = vec![c(1.0, 0.0), c(0.2, 0.0), c(3.0, 0.0)];
    let t = theta_alignment(&vals).unwrap();
    assert_eq!((t.theta, t.residual), (0.0, 0.0));
    let rot: Vec<C> = vals.iter().map(|v| v * c(0.0, 1.0)).collect();
    let t = theta_alignment(&rot).unwrap();
    assert!((t.theta + FRAC_PI_2).abs() < 1e-15);
    assert!(theta_alignment(&[c(1.0, 0.0), c(0.0, 0.0)]).is_err());

    let hs = quartic();
    for m in 1..=3 {
        let bd = quartic_bergman(m);
        let v = frame_values(&hs, bd.phi(), &quartic_real_pool().points).unwrap();
        let t = theta_alignment(&v).unwrap();
        assert!(t.residual <= 1e-8, "m={m}: {}", t.residual);
    }
}

#[test]
fn comass_model_examples() {
    let real = DMatrix::from_row_slice(4, 2, &[1., 0., 0., 0., 0., 1., 0., 0.]);
    assert!((decomposable_form_value(&unitary_coordinates(&real)) - 1.0).abs() < 1e-15);
    let complex_line = DMatrix::from_row_slice(4, 2, &[1., 0., 0., 1., 0., 0., 0., 0.]);
    assert_eq!(decomposable_form_value(&unitary_coordinates(&complex_line)), 0.0);
}

#[test]
fn comass_on_the_quintic_surface() {
    let hs = quintic_surface();
    let pool = sample_complex_locus(&hs, 20_000, 5).unwrap();
    let bd = BergmanData::build(&hs, 1, &pool).unwrap();
    for (i, p) in pool.points[..20].iter().enumerate() {
        let rep = comass_check(&hs, bd.phi(), p, 1000, i as u64).unwrap();
        assert!(rep.max_ratio <= 1.0 + 1e-9);
        assert!((rep.lagrangian_ratio - 1.0).abs() < 1e-9);
        assert!(rep.mean_ratio < rep.max_ratio);
    }
    let a = comass_check(&hs, bd.phi(), &pool.points[0], 50, 3).unwrap();
    let b = comass_check(&hs, bd.phi(), &pool.points[0], 50, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn report_serializes() {
    let rep = max_profile("sum z^2", &fermat_phi(1, 3).unwrap(), quartic_pool(), quartic_real_pool()).unwrap();
    let json = serde_json::to_string(&rep).unwrap();
    assert!(json.contains("\"quadratic_r2\""));
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + rep.complex_count + rep.real_count);
}
