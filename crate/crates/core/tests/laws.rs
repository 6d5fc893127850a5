mod oracle;

use opdyn_core::cfs::{analyze_cfs_on, wandering_window_reduction, SpaceKind};
use opdyn_core::hopf::hopf_decompose;
use opdyn_core::lp::{analyze_lp, ln_orbit_norm};
use opdyn_core::{validate, AnalysisConfig, AtomId, AtomicSystem, Notion, SampleFunction, Scalar, Status};
use oracle::{cocycle_direct, ln_mu_n_direct, random_set, random_system, rel, rel_polar, GenOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn options(kind: u8) -> GenOptions {
    GenOptions {
        cycles: true,
        float: kind == 1,
        complex: kind == 2,
        ..GenOptions::default()
    }
}

fn random_atom(rng: &mut ChaCha8Rng, s: &AtomicSystem, radius: i64) -> AtomId {
    random_set(rng, s, radius, 1)[0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cocycle_law_and_inverse(seed in any::<u64>(), kind in 0u8..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_system(&mut rng, options(kind));
        for _ in 0..20 {
            let x = random_atom(&mut rng, &s, 30);
            let m = rng.gen_range(-50..=50);
            let n = rng.gen_range(-50..=50);
            let whole = s.cocycle(x, m + n).unwrap();
            let first = s.cocycle(x, n).unwrap();
            let rest = s.cocycle(s.iterate(x, n).unwrap(), m).unwrap();
            let product = first.mul(&rest);
            prop_assert!(rel_polar(whole.ln_abs, whole.phase.unit().arg(), product.ln_abs, product.phase.unit().arg()) <= 1e-12);

            let back = s.cocycle(s.iterate(x, n).unwrap(), -n).unwrap().mul(&first);
            prop_assert!(rel_polar(back.ln_abs, back.phase.unit().arg(), 0.0, 0.0) <= 1e-12);

            let (ln, arg) = cocycle_direct(&s, x, n).unwrap();
            prop_assert!(rel_polar(first.ln_abs, first.phase.unit().arg(), ln, arg) <= 1e-12);
            if s.has_exact_weights() {
                let exact = s.cocycle_exact(x, m + n).unwrap().unwrap();
                let split = s.cocycle_exact(x, n).unwrap().unwrap()
                    * s.cocycle_exact(s.iterate(x, n).unwrap(), m).unwrap().unwrap();
                prop_assert_eq!(exact, split);
            }
        }
    }

    #[test]
    fn norm_identity(seed in any::<u64>(), kind in 0u8..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_system(&mut rng, options(kind));
        for _ in 0..10 {
            let b = random_set(&mut rng, &s, 20, 5);
            let n = rng.gen_range(-50..=50);
            let by_operator = ln_orbit_norm(&s, &b, n).unwrap();
            let by_measure = s.ln_mu_n(&s.preimage(&b, n), n).unwrap();
            let direct = ln_mu_n_direct(&s, &b, n);
            prop_assert!(rel_polar(by_operator, 0.0, by_measure, 0.0) <= 1e-10, "{} {}", by_operator, by_measure);
            prop_assert!(rel_polar(by_operator, 0.0, direct, 0.0) <= 1e-10, "{} {}", by_operator, direct);
        }
    }

    #[test]
    fn boundedness_constant_bounds_the_operator(seed in any::<u64>(), kind in 0u8..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_system(&mut rng, GenOptions { unilateral: true, ..options(kind) });
        let c = validate(&s).unwrap().c.to_f64();
        for _ in 0..16 {
            let phi = SampleFunction::random(&s, &mut rng, 25, 8, s.is_exact());
            let image = s.apply_operator(&phi, 1).unwrap().norm_p_pow(&s).unwrap().to_f64();
            let norm = phi.norm_p_pow(&s).unwrap().to_f64();
            prop_assert!(image <= c * norm * (1.0 + 1e-12), "{} > {} * {}", image, c, norm);
        }
    }

    #[test]
    fn enlarging_a_set_never_decreases_criteria(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_system(&mut rng, options(0));
        let small = random_set(&mut rng, &s, 15, 3);
        let mut large = small.clone();
        large.extend(random_set(&mut rng, &s, 15, 4));
        large.sort();
        large.dedup();
        for n in -30..=30 {
            let a = s.ln_mu_n(&s.preimage(&small, n), n).unwrap();
            let b = s.ln_mu_n(&s.preimage(&large, n), n).unwrap();
            prop_assert!(a <= b + 1e-12);
        }
    }

    #[test]
    fn uniform_implies_expansive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_system(&mut rng, options(0));
        let cfg = AnalysisConfig::default();
        let uniform = analyze_lp(&s, Notion::Uniform, &cfg).unwrap().status;
        let expansive = analyze_lp(&s, Notion::Expansive, &cfg).unwrap().status;
        if uniform == Status::ProvenTrue {
            prop_assert_eq!(expansive, Status::ProvenTrue);
        }
        let pos = analyze_lp(&s, Notion::UniformPositive, &cfg).unwrap().status;
        if pos == Status::ProvenTrue {
            prop_assert_eq!(analyze_lp(&s, Notion::Positive, &cfg).unwrap().status, Status::ProvenTrue);
        }
    }

    #[test]
    fn proven_verdicts_match_operator_growth(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_system(&mut rng, options(0));
        let v = analyze_lp(&s, Notion::Expansive, &AnalysisConfig::default()).unwrap();
        for (i, _) in s.orbits().iter().enumerate() {
            let x = AtomId::new(i, 0);
            let base = s.ln_mass(x).unwrap();
            let mut peak = 0.0f64;
            for step in [1i64, -1] {
                let mut phi = SampleFunction::new().with(x, Scalar::real(1.0));
                for _ in 0..300 {
                    phi = s.apply_operator(&phi, step).unwrap();
                    peak = peak.max(phi.norm_p_pow(&s).unwrap().to_f64().ln() - base);
                }
            }
            let atom = v.atoms.iter().find(|a| a.atom.orbit == i).unwrap();
            match atom.status {
                Status::ProvenTrue => prop_assert!(peak > 10.0, "orbit {} peak {}", i, peak),
                Status::ProvenFalse => prop_assert!(peak < 25.0, "orbit {} peak {}", i, peak),
                _ => {}
            }
        }
    }
}

#[test]
fn wandering_reduction_is_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = AnalysisConfig::default();
    let mut checked = 0;
    while checked < 24 {
        let s = random_system(&mut rng, GenOptions { cycles: true, ..GenOptions::default() });
        let w: Vec<AtomId> = (0..s.orbits().len()).map(|i| AtomId::new(i, 0)).collect();
        let reduced = wandering_window_reduction(&s, &w).unwrap();
        let mut everything = Vec::new();
        for i in 0..s.orbits().len() {
            for pos in -25..=25 {
                if let Some(a) = s.atom(i, pos) {
                    everything.push(a);
                }
            }
        }
        everything.sort();
        everything.dedup();
        for space in [SpaceKind::BoundedFunctions, SpaceKind::VanishingAtInfinity] {
            for notion in [Notion::Expansive, Notion::Average] {
                let full = analyze_cfs_on(&s, space, notion, &cfg, &everything).unwrap().status;
                let small = analyze_cfs_on(&s, space, notion, &cfg, &reduced).unwrap().status;
                assert_eq!(full, small, "{space} {notion} on {s:?}");
            }
        }
        checked += 1;
    }
    assert!(hopf_decompose(&oracle::load("sys_a.json")).is_ok());
}

#[test]
fn norm_identity_relative_error_is_tiny_on_fixtures() {
    for (name, s) in oracle::bundled() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let b = random_set(&mut rng, &s, 10, 4);
            let n = if s.has_unilateral() { rng.gen_range(0..=40) } else { rng.gen_range(-40..=40) };
            let lhs = s.apply_operator(&SampleFunction::indicator(&b), n).unwrap().norm_p_pow(&s).unwrap();
            let rhs = s.mu_n_magnitude(&s.preimage(&b, n), n).unwrap();
            assert!(rel(lhs.to_f64(), rhs.to_f64()) <= 1e-10, "{name}");
        }
    }
}
