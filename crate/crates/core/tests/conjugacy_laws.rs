mod oracle;

use num_rational::BigRational;
use num_traits::Zero;
use opdyn_core::conjugacy::{
    build_conjugacy, check_bounded_distortion, nu_by_measures, run_verification, shift_factor, unweighted_system,
    verify_conjugacy, verify_shift_factor, Distortion, NuTotal,
};
use opdyn_core::hopf::hopf_decompose;
use opdyn_core::{AtomId, AtomicSystem, Error, Magnitude, Scalar, Status};
use oracle::{load, nu_direct, random_set, random_system, rel, GenOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chains(rng: &mut ChaCha8Rng) -> AtomicSystem {
    random_system(rng, GenOptions::default())
}

/// `sum_m nu({m})` over one orbit, summed outward from the representative
/// with running products, stopping once the terms are negligible.
fn nu_sum_direct(s: &AtomicSystem, orbit: usize) -> f64 {
    let p = s.p().value();
    let mut total = oracle::mass(s, AtomId::new(orbit, 0));
    for dir in [1i64, -1] {
        let mut ln = 0.0f64;
        for j in 1..=20_000i64 {
            let m = dir * j;
            ln += if dir > 0 {
                // x = m reaches the representative after -m steps
                -s.weight(AtomId::new(orbit, m - 1)).unwrap().modulus().ln()
            } else {
                s.weight(AtomId::new(orbit, m)).unwrap().modulus().ln()
            };
            let term = (p * ln).exp() * oracle::mass(s, AtomId::new(orbit, m));
            total += term;
            if term < total * 1e-18 && j > 200 {
                break;
            }
            if !term.is_finite() || term > 1e300 {
                return f64::INFINITY;
            }
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn measure_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = chains(&mut rng);
        let pk = build_conjugacy(&s, &hopf_decompose(&s).unwrap()).unwrap();
        for _ in 0..8 {
            let b = random_set(&mut rng, &s, 30, 6);
            let via_transport = pk.nu_of(&s, &b).unwrap();
            let via_measures = nu_by_measures(&s, &pk.wandering_set, &b).unwrap();
            prop_assert_eq!(&via_transport, &via_measures);
            let direct: f64 = b.iter().map(|&x| nu_direct(&s, AtomId::new(x.orbit, 0), x)).sum();
            prop_assert!(rel(via_transport.to_f64(), direct) < 1e-12);
        }
    }

    #[test]
    fn u_two_ways(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = chains(&mut rng);
        let pk = build_conjugacy(&s, &hopf_decompose(&s).unwrap()).unwrap();
        for k in -100..=100 {
            let a = pk.u(&s, k).unwrap();
            let b = pk.u_from_measures(&s, k).unwrap();
            prop_assert!(rel(a, b) <= 1e-12, "k = {}: {} vs {}", k, a, b);
        }
    }

    #[test]
    fn distortion_is_invariant_under_unweighting(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = chains(&mut rng);
        let d = hopf_decompose(&s).unwrap();
        let k1 = check_bounded_distortion(&s, &d).unwrap().k;
        let flat = unweighted_system(&s, &d).unwrap();
        let k2 = check_bounded_distortion(&flat, &hopf_decompose(&flat).unwrap()).unwrap().k;
        match (k1, k2) {
            (Distortion::Bounded(a), Distortion::Bounded(b)) => prop_assert!(rel(a, b) <= 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn conjugacy_and_chaos_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = chains(&mut rng);
        let pk = build_conjugacy(&s, &hopf_decompose(&s).unwrap()).unwrap();
        let report = verify_conjugacy(&pk, &s, 20, seed).unwrap();
        prop_assert_eq!(report.isometry_max_deviation, 0.0);
        prop_assert_eq!(report.intertwining_max_deviation, 0.0);
        let c = &pk.chaos;
        if c.nu_finite {
            prop_assert_eq!(c.devaney_criterion, Status::ProvenTrue);
            prop_assert_eq!((c.devaney, c.mixing, c.frequently_hypercyclic),
                (Status::ProvenTrue, Status::ProvenTrue, Status::ProvenTrue));
        }
        if let Distortion::Bounded(_) = pk.distortion.k {
            prop_assert_eq!(c.devaney, c.frequently_hypercyclic);
            prop_assert_eq!(c.devaney, c.frequently_recurrent);
        }
        // totals against plain summation
        for t in &pk.orbit_totals {
            let direct = nu_sum_direct(&s, t.orbit);
            match &t.total {
                NuTotal::Finite(m) => prop_assert!(rel(m.to_f64(), direct) < 1e-9, "{} vs {}", m.to_f64(), direct),
                NuTotal::Infinite => prop_assert!(direct > 1e3 * oracle::mass(&s, t.representative)),
                NuTotal::Undetermined => prop_assert!(false, "exact data is always decided"),
            }
        }
    }
}

#[test]
fn conjugacy_holds_on_float_and_complex_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for complex in [false, true] {
        for _ in 0..10 {
            let opts = GenOptions { float: !complex, complex, ..GenOptions::default() };
            let s = random_system(&mut rng, opts);
            let pk = build_conjugacy(&s, &hopf_decompose(&s).unwrap()).unwrap();
            let r = verify_conjugacy(&pk, &s, 30, rng.gen()).unwrap();
            assert!(r.isometry_max_deviation <= 1e-10 && r.intertwining_max_deviation <= 1e-12);
        }
    }
}

#[test]
fn corrupted_transport_is_caught() {
    let s = load("sys_a.json");
    let pk = build_conjugacy(&s, &hopf_decompose(&s).unwrap()).unwrap();
    let bad = pk.with_transport_override(AtomId::new(0, 2), Scalar::rational(5, 1));
    let report = run_verification(&bad, &s, 100, 0).unwrap();
    assert!(!report.passed);
    let failure = report.failure.unwrap();
    assert_eq!(failure.atom, AtomId::new(0, 2));
    assert!(matches!(verify_conjugacy(&bad, &s, 100, 0), Err(Error::VerificationFailed { .. })));
}

#[test]
fn shift_factor_on_fixtures() {
    let a = load("sys_a.json");
    let pk = build_conjugacy(&a, &hopf_decompose(&a).unwrap()).unwrap();
    let sf = shift_factor(&pk, &a, 10).unwrap();
    assert!(sf.u.iter().all(|e| (e.u - 2.0).abs() < 1e-12));
    assert!(verify_shift_factor(&pk, &a, 50, 3).unwrap().passed);

    let b = load("sys_b.json");
    let pk = build_conjugacy(&b, &hopf_decompose(&b).unwrap()).unwrap();
    let w = opdyn_core::SampleFunction::indicator(&pk.wandering_set);
    let g = pk.gamma(&b, &w).unwrap();
    assert!((g[&0].re - 1.0).abs() < 1e-15);
    assert!(shift_factor(&pk, &b, 5).unwrap().u.iter().all(|e| e.u == 1.0));

    let d = load("sys_d.json");
    let pk = build_conjugacy(&d, &hopf_decompose(&d).unwrap()).unwrap();
    assert!(verify_shift_factor(&pk, &d, 50, 9).unwrap().passed);

    let e = load("sys_e.json");
    let pk = build_conjugacy(&e, &hopf_decompose(&e).unwrap()).unwrap();
    assert_eq!(shift_factor(&pk, &e, 5), Err(Error::DistortionUnbounded));
    let w = pk.distortion.witness.unwrap();
    assert!(w.log10_ratio > 100.0 * 1.5f64.log10() - 1.0);
}

#[test]
fn identical_chains_have_unit_distortion_by_direct_ratios() {
    let s = load("sys_e_identical.json");
    let pk = build_conjugacy(&s, &hopf_decompose(&s).unwrap()).unwrap();
    for k in -30..=30 {
        let whole: f64 = (0..2).map(|o| nu_direct(&s, AtomId::new(o, 0), AtomId::new(o, k))).sum::<f64>() / 2.0;
        let single = nu_direct(&s, AtomId::new(0, 0), AtomId::new(0, k));
        assert!(rel(whole, single) < 1e-15);
    }
    assert_eq!(pk.distortion.k, Distortion::Bounded(1.0));
    assert_eq!(pk.wandering_mass, BigRational::from_integer(2.into()));
    assert!(!pk.wandering_mass.is_zero());
    assert_eq!(pk.nu(&s, AtomId::new(1, -2)).unwrap(), Magnitude::Exact(BigRational::from_integer(4.into())));
}
