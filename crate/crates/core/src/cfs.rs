//! Expansivity of `C_{w,f}` on spaces of functions on a discrete space `X`.
//!
//! For discrete `X` the four classical spaces become sequence spaces:
//! bounded sequences, null sequences, and `K^X` with either the
//! compact-convergence or the pointwise topology (compact sets of a discrete
//! space are finite, so both coincide). Singletons form a base of the
//! topology, and the criteria read off the seminorms
//! `||w^(n)||_{B ∩ f^{-n}(O)}` with `O = {a}`, which equal
//! `|w^(n)(f^{-n}(a))|` when `f^{-n}(a)` lies in `B` and `0` otherwise.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::Metric;
use crate::system::{AtomId, AtomicSystem, MapKind};
use crate::verdict::{evaluate, orbit_representatives, AnalysisConfig, Notion, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    BoundedFunctions,
    VanishingAtInfinity,
    CompactConvergence,
    PointwiseConvergence,
}

impl SpaceKind {
    /// True when the bornology is generated by finite sets.
    pub fn has_finite_base(self) -> bool {
        matches!(self, SpaceKind::CompactConvergence | SpaceKind::PointwiseConvergence)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            SpaceKind::BoundedFunctions => "lb",
            SpaceKind::VanishingAtInfinity => "c0",
            SpaceKind::CompactConvergence => "compact",
            SpaceKind::PointwiseConvergence => "pointwise",
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// The set `B` of a test pair: all of `X` or a finite atom set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TestBase {
    AllOfX,
    Finite(BTreeSet<AtomId>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestPair {
    pub open: AtomId,
    pub base: TestBase,
}

/// `||w^(n)||_{B ∩ f^{-n}(O)}` for `O = {a}`; zero when the intersection is empty.
pub fn criterion_value(system: &AtomicSystem, pair: &TestPair, n: i64) -> Result<f64> {
    if !system.contains(pair.open) {
        return Err(Error::PreconditionFailed(format!("atom {} is not in the system", pair.open)));
    }
    if n < 0 {
        if let Some(i) = system.orbits().iter().position(|o| o.kind() == MapKind::UnilateralChain) {
            return Err(Error::NonInvertibleMap { orbit: i });
        }
    }
    let Some(x) = system.iterate(pair.open, -n) else {
        return Ok(0.0);
    };
    let inside = match &pair.base {
        TestBase::AllOfX => true,
        TestBase::Finite(set) => set.contains(&x),
    };
    if !inside {
        return Ok(0.0);
    }
    Ok(system.cocycle(x, n)?.modulus())
}

/// Runs one notion on the given space with one test singleton per orbit.
pub fn analyze_cfs(
    system: &AtomicSystem,
    space: SpaceKind,
    notion: Notion,
    config: &AnalysisConfig,
) -> Result<Verdict> {
    analyze_cfs_on(system, space, notion, config, &orbit_representatives(system))
}

/// Runs one notion with an explicit family of test singletons `O = {a}`.
pub fn analyze_cfs_on(
    system: &AtomicSystem,
    space: SpaceKind,
    notion: Notion,
    config: &AnalysisConfig,
    tests: &[AtomId],
) -> Result<Verdict> {
    if !notion.is_positive_variant() {
        system.require_invertible()?;
    }
    if let Some(bad) = tests.iter().find(|a| !system.contains(**a)) {
        return Err(Error::PreconditionFailed(format!("atom {bad} is not in the system")));
    }
    Ok(evaluate(
        system,
        notion,
        Metric::Sup,
        config,
        tests,
        space.has_finite_base(),
        space.short_name(),
    ))
}

/// Test singletons sufficient for the expansive and average notions when
/// both `w` and `1/w` are bounded and the iterates of `W` exhaust `X`: the
/// criterion at `f^m(a)` is the criterion at `a` up to the bounded factor
/// `w^(m)(a)`.
pub fn wandering_window_reduction(system: &AtomicSystem, wandering: &[AtomId]) -> Result<Vec<AtomId>> {
    if let Some(i) = system.orbits().iter().position(|o| o.kind() == MapKind::UnilateralChain) {
        return Err(Error::PreconditionFailed(format!(
            "orbit {i} is a unilateral chain; the reduction needs an invertible map"
        )));
    }
    for (i, o) in system.orbits().iter().enumerate() {
        for pos in o.scan_window() {
            let w = o.weight(pos);
            if !w.is_finite() {
                return Err(Error::PreconditionFailed(format!("w is unbounded at {i}:{pos}")));
            }
            if w.is_zero() {
                return Err(Error::PreconditionFailed(format!("1/w is unbounded at {i}:{pos}")));
            }
        }
    }
    if let Some(bad) = wandering.iter().find(|a| !system.contains(**a)) {
        return Err(Error::PreconditionFailed(format!("atom {bad} is not in the system")));
    }
    let covered: BTreeSet<usize> = wandering.iter().map(|a| a.orbit).collect();
    if let Some(missing) = (0..system.orbits().len()).find(|i| !covered.contains(i)) {
        return Err(Error::PreconditionFailed(format!(
            "the iterates of W miss orbit {missing}"
        )));
    }
    let mut out: Vec<AtomId> = wandering.to_vec();
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;
    use crate::system::{Orbit, TailSpec};
    use crate::verdict::Status;
    use num_rational::BigRational;
    use num_traits::One;

    fn shift(w: Scalar) -> AtomicSystem {
        let t = TailSpec::constant(w, BigRational::one());
        AtomicSystem::new(vec![Orbit::bilateral(t.clone(), t)], 1.0).unwrap()
    }

    #[test]
    fn criterion_values() {
        let s = shift(Scalar::rational(2, 1));
        let all = TestPair {
            open: AtomId::new(0, 0),
            base: TestBase::AllOfX,
        };
        assert!((criterion_value(&s, &all, 3).unwrap() - 8.0).abs() < 1e-12);
        let far = TestPair {
            open: AtomId::new(0, 0),
            base: TestBase::Finite([AtomId::new(0, 10)].into()),
        };
        assert_eq!(criterion_value(&s, &far, 3).unwrap(), 0.0);
        let unit = shift(Scalar::one());
        for n in -5..=5 {
            assert_eq!(criterion_value(&unit, &all, n).unwrap(), 1.0);
        }
    }

    #[test]
    fn shift_on_c0() {
        let s = shift(Scalar::rational(2, 1));
        let cfg = AnalysisConfig::default();
        let v = analyze_cfs(&s, SpaceKind::VanishingAtInfinity, Notion::Expansive, &cfg).unwrap();
        assert_eq!(v.status, Status::ProvenTrue);
        let unit = shift(Scalar::one());
        let v = analyze_cfs(&unit, SpaceKind::VanishingAtInfinity, Notion::Uniform, &cfg).unwrap();
        assert_eq!(v.status, Status::ProvenFalse);
    }

    #[test]
    fn shifts_on_product_spaces_are_never_expansive() {
        let s = shift(Scalar::rational(2, 1));
        let cfg = AnalysisConfig::default();
        for space in [SpaceKind::CompactConvergence, SpaceKind::PointwiseConvergence] {
            for notion in Notion::ALL {
                let v = analyze_cfs(&s, space, notion, &cfg).unwrap();
                assert_eq!(v.status, Status::ProvenFalse, "{space} {notion}");
            }
        }
    }

    #[test]
    fn cycles_on_product_spaces_follow_rates() {
        let t = TailSpec::periodic(vec![Scalar::rational(2, 1), Scalar::one(), Scalar::one()]).unwrap();
        let s = AtomicSystem::new(vec![Orbit::cycle(3, t)], 1.0).unwrap();
        let cfg = AnalysisConfig::default();
        let v = analyze_cfs(&s, SpaceKind::PointwiseConvergence, Notion::Expansive, &cfg).unwrap();
        assert_eq!(v.status, Status::ProvenTrue);
        let v = analyze_cfs(&s, SpaceKind::CompactConvergence, Notion::Positive, &cfg).unwrap();
        assert_eq!(v.status, Status::ProvenTrue);
    }

    #[test]
    fn reduction_preconditions() {
        let s = shift(Scalar::rational(2, 1));
        assert_eq!(
            wandering_window_reduction(&s, &[AtomId::new(0, 0)]).unwrap(),
            vec![AtomId::new(0, 0)]
        );
        let z = AtomicSystem::new(
            vec![s.orbits()[0].clone().with_override(3, Scalar::zero(), BigRational::one())],
            1.0,
        )
        .unwrap();
        assert!(matches!(
            wandering_window_reduction(&z, &[AtomId::new(0, 0)]),
            Err(Error::PreconditionFailed(_))
        ));
        let two = AtomicSystem::new(vec![s.orbits()[0].clone(), s.orbits()[0].clone()], 1.0).unwrap();
        assert!(wandering_window_reduction(&two, &[AtomId::new(0, 0)]).is_err());
        assert_eq!(
            wandering_window_reduction(&two, &[AtomId::new(1, 0), AtomId::new(0, 0)]).unwrap().len(),
            2
        );
    }
}
