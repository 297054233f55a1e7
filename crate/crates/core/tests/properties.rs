mod common;

use common::*;
use lagcal_core::bergman::{bergman_metric, density_of_states, gram_matrix, hm_norm_phi};
use lagcal_core::canonical::{
    evaluate_section, section_norm_in_frame, section_space_basis, sigma_pullback, CanonicalSection, LocalFrame,
};
use lagcal_core::homotopy::{loop_length, loop_monodromy, real_locus_loop};
use lagcal_core::metric::{ConformalBump, MetricContext};
use lagcal_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b))
}

fn cvec(n: usize) -> impl Strategy<Value = Vec<C>> {
    prop::collection::vec(complex(), n)
}

fn poly3(degree: u32) -> impl Strategy<Value = HomogeneousPolynomial> {
    let exps = lagcal_core::poly::monomials(3, degree);
    prop::collection::vec(complex(), exps.len()).prop_map(move |cs| {
        HomogeneousPolynomial::new(3, degree, exps.iter().cloned().zip(cs)).unwrap()
    })
}

/// A point of the quartic pool picked by index.
fn quartic_point() -> impl Strategy<Value = ProjectivePoint> {
    (0..quartic_pool().len()).prop_map(|i| quartic_pool().points[i].clone())
}

fn orthogonal(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_filter_map("singular", move |v| {
        let q = DMatrix::from_vec(n, n, v).qr();
        let r = q.r();
        if (0..n).any(|i| r[(i, i)].abs() < 1e-3) {
            None
        } else {
            Some(q.q())
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluation_is_homogeneous(p in poly3(5), z in cvec(3), l in complex()) {
        prop_assume!(l.norm() > 0.1);
        let zl: Vec<C> = z.iter().map(|x| x * l).collect();
        let a = p.eval(&zl).unwrap();
        let b = p.eval(&z).unwrap() * l.powu(5);
        let scale = p.monomial_norm(&zl).max(1e-300);
        prop_assert!((a - b).norm() <= 1e-12 * scale);
    }

    #[test]
    fn conjugation_is_an_involution_preserving_the_locus(pt in quartic_point()) {
        let hs = quartic();
        let s = conjugation(&pt);
        prop_assert!(hs.residual(s.coords()) <= 1e-10);
        prop_assert_eq!(conjugation(&s), pt);
    }

    #[test]
    fn section_norm_is_frame_independent(pt in quartic_point(), coeffs in cvec(6)) {
        let hs = quartic();
        let exps = lagcal_core::poly::monomials(3, 2);
        let s = CanonicalSection::new(&hs, 2, HomogeneousPolynomial::new(3, 2, exps.into_iter().zip(coeffs)).unwrap()).unwrap();
        let metric = MetricContext::FubiniStudy;
        let reference = section_norm_in_frame(&hs, &s, &pt, &LocalFrame::at(&hs, &pt).unwrap(), &metric).unwrap();
        for ch in 0..3 {
            for l in (0..3).filter(|&l| l != ch) {
                let z = pt.coords();
                let g = hs.gradient(z);
                if z[ch].norm() < 0.2 || g[l].norm() < 0.2 * g.iter().map(|x| x.norm()).fold(0.0, f64::max) {
                    continue;
                }
                let f = LocalFrame::new(&hs, ch, l).unwrap();
                let v = section_norm_in_frame(&hs, &s, &pt, &f, &metric).unwrap();
                prop_assert!(rel(v, reference) < 1e-9, "{} vs {}", v, reference);
            }
        }
    }

    #[test]
    fn chart_values_agree_after_transition(pt in quartic_point(), coeffs in cvec(3)) {
        // s = a * frame^m: the product a * frame(V)^m is chart independent
        let hs = quartic();
        let s = CanonicalSection::new(&hs, 1, HomogeneousPolynomial::new(3, 1, lagcal_core::poly::monomials(3, 1).into_iter().zip(coeffs)).unwrap()).unwrap();
        let frame = hs.tangent_frame(&pt).unwrap();
        let z = pt.coords();
        let mut values = vec![];
        for ch in 0..3 {
            for l in (0..3).filter(|&l| l != ch) {
                let g = hs.gradient(z);
                if z[ch].norm() < 0.2 || g[l].norm() < 0.2 * g.iter().map(|x| x.norm()).fold(0.0, f64::max) {
                    continue;
                }
                let f = LocalFrame::new(&hs, ch, l).unwrap();
                let a = evaluate_section(&hs, &s, &pt, &f).unwrap();
                let zaff = f.affine_point(&hs, &pt).unwrap();
                let scale = zaff[ch] / z[ch];
                let v: Vec<C> = frame.vectors()[0].iter().map(|x| x * scale).collect();
                values.push(a * f.form_value(&hs, &zaff, &[v]));
            }
        }
        for v in &values[1..] {
            prop_assert!((v - values[0]).norm() <= 1e-10 * values[0].norm().max(1e-12));
        }
    }

    #[test]
    fn sigma_pullback_is_an_antilinear_involution(coeffs in cvec(3), l in complex()) {
        let hs = quartic();
        let s = CanonicalSection::new(&hs, 1, HomogeneousPolynomial::new(3, 1, lagcal_core::poly::monomials(3, 1).into_iter().zip(coeffs)).unwrap()).unwrap();
        prop_assert_eq!(sigma_pullback(&sigma_pullback(&s)), s.clone());
        let lhs = sigma_pullback(&s.scale(l));
        let rhs = sigma_pullback(&s).scale(l.conj());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn norms_are_sigma_symmetric(pt in quartic_point(), coeffs in cvec(6)) {
        let hs = quartic();
        let exps = lagcal_core::poly::monomials(3, 2);
        let s = CanonicalSection::new(&hs, 2, HomogeneousPolynomial::new(3, 2, exps.into_iter().zip(coeffs)).unwrap()).unwrap();
        let g = MetricContext::FubiniStudy;
        let a = lagcal_core::canonical::section_norm_g(&hs, &s, &conjugation(&pt), &g).unwrap();
        let b = lagcal_core::canonical::section_norm_g(&hs, &sigma_pullback(&s), &pt, &g).unwrap();
        prop_assert!(rel(a, b) < 1e-9);
    }

    #[test]
    fn cauchy_schwarz_bound(pt in quartic_point(), m in 1u32..=3) {
        let bd = quartic_bergman(m);
        prop_assert!(hm_norm_phi(&bd, &pt).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn equality_on_the_real_locus(i in 0usize..1000, m in 1u32..=3) {
        let bd = quartic_bergman(m);
        let pt = &quartic_real_pool().points[i];
        prop_assert!((hm_norm_phi(&bd, pt).unwrap() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn scalar_fields_are_sigma_even(pt in quartic_point(), m in 1u32..=3) {
        let hs = quartic();
        let bd = quartic_bergman(m);
        let q = conjugation(&pt);
        prop_assert!(rel(density_of_states(&hs, &bd, &q).unwrap(), density_of_states(&hs, &bd, &pt).unwrap()) < 1e-9);
        prop_assert!((hm_norm_phi(&bd, &q).unwrap() - hm_norm_phi(&bd, &pt).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn basis_mixing_invariance(pt in quartic_point(), o in orthogonal(6)) {
        let hs = quartic();
        let bd = quartic_bergman(2);
        let mixed = bd.remixed(&hs, &o).unwrap();
        prop_assert!(rel(density_of_states(&hs, &mixed, &pt).unwrap(), density_of_states(&hs, &bd, &pt).unwrap()) < 1e-10);
        prop_assert!((hm_norm_phi(&mixed, &pt).unwrap() - hm_norm_phi(&bd, &pt).unwrap()).abs() < 1e-10);
        let a = bergman_metric(&hs, &mixed, &pt).unwrap()[(0, 0)].re;
        let b = bergman_metric(&hs, &bd, &pt).unwrap()[(0, 0)].re;
        prop_assert!(rel(a, b) < 1e-10);
        let p1 = mixed.phi().representative();
        let p0 = bd.phi().representative();
        let scale = p0.max_abs_coefficient();
        for (e, v) in p0.terms() {
            prop_assert!((p1.coefficient(e) - v).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn ideal_reduction(i in 0usize..14, q in poly3(0), pts in prop::collection::vec(0usize..40_000, 100)) {
        // basis element plus q F agrees on the locus
        let hs = quartic();
        let basis = section_space_basis(&hs, 4).unwrap();
        let s = basis.sections()[i].representative();
        let qf = q.mul(hs.poly()).unwrap();
        let mut t = s.clone();
        t.add_scaled(&qf, c(1.0, 0.0)).unwrap();
        for k in pts {
            let z = quartic_pool().points[k].coords();
            let a = s.eval(z).unwrap();
            let b = t.eval(z).unwrap();
            let scale = s.monomial_norm(z).max(qf.monomial_norm(z));
            prop_assert!((a - b).norm() <= 1e-10 * scale, "{:e} vs scale {:e}", (a - b).norm(), scale);
        }
    }

    #[test]
    fn bump_symmetrization_is_idempotent(zs in prop::collection::vec(cvec(3), 1..4), amp in -0.9..2.0f64, r in 0.05..1.5f64) {
        let centers: Vec<ProjectivePoint> = zs.into_iter().filter_map(|z| ProjectivePoint::new(z).ok()).collect();
        prop_assume!(!centers.is_empty());
        let amps = vec![amp; centers.len()];
        let b = ConformalBump::new(centers, amps, r).unwrap().symmetrize();
        prop_assert_eq!(b.symmetrize(), b.clone());
        for ctr in b.centers() {
            prop_assert!(b.centers().contains(&ctr.conjugate()));
        }
    }

    #[test]
    fn monodromy_is_quantized(m in 1u32..=3, cx in -0.5..0.5f64, cy in -0.5..0.5f64, wind in 1u32..=2) {
        // q = (w - w0) dw^{2m} around a circle enclosing w0 `wind` times
        let w0 = c(cx, cy);
        let q = |t: f64| {
            let th = std::f64::consts::TAU * wind as f64 * t;
            let w = C::from_polar(1.0, th);
            let dw = c(0.0, 1.0) * w;
            Ok((w - w0) * dw.powu(2 * m))
        };
        let defect = loop_monodromy(2 * m, q, 64 * wind as usize).unwrap();
        // the dw factor contributes a full turn per winding
        let expect = C::from_polar(1.0, std::f64::consts::PI * wind as f64 / m as f64) * C::from_polar(1.0, std::f64::consts::TAU * wind as f64);
        prop_assert!((defect - expect).norm() < 1e-6, "{} vs {}", defect, expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn dimension_law(d in 4u32..=8, m in 1u32..=4) {
        let hs = Hypersurface::new(HomogeneousPolynomial::fermat(&[1.0, -1.0, 1.0], d).unwrap()).unwrap();
        let g = ((d - 1) * (d - 2) / 2) as usize;
        let expect = if m == 1 { g } else { (2 * m as usize - 1) * (g - 1) };
        let b = section_space_basis(&hs, m).unwrap();
        prop_assert_eq!(b.len(), expect);
        prop_assert_eq!(b.rank_modulo(&hs).unwrap(), expect);
    }

    #[test]
    fn length_scales_with_metric(factor in 0.1..10.0f64) {
        let hs = quartic();
        let lp = real_locus_loop(&hs, 128).unwrap();
        let base = loop_length(&hs, &lp, &MetricContext::FubiniStudy).unwrap();
        let scaled = loop_length(&hs, &lp, &MetricContext::FubiniStudy.scaled(factor * factor).unwrap()).unwrap();
        prop_assert!(rel(scaled, factor * base) < 1e-12);
    }
}

#[test]
fn gram_is_stable_under_pool_doubling() {
    let hs = quartic();
    let basis = section_space_basis(&hs, 2).unwrap();
    let g = MetricContext::FubiniStudy;
    for seed in [21u64, 22, 23] {
        let a = gram_matrix(&hs, &basis, &sample_complex_locus(&hs, 20_000, seed).unwrap(), &g).unwrap();
        let b = gram_matrix(&hs, &basis, &sample_complex_locus(&hs, 40_000, seed + 1000).unwrap(), &g).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let se = a.standard_errors[(i, j)].hypot(b.standard_errors[(i, j)]);
                let dev = (a.matrix[(i, j)] - b.matrix[(i, j)]).norm();
                assert!(dev <= 3.0 * se, "seed {seed} entry ({i},{j}): {dev:e} > 3 x {se:e}");
            }
        }
    }
}
