//! Hopf decomposition of an invertible atomic system.
//!
//! Cycles are conservative (every atom returns), bilateral chains are
//! dissipative with wandering representative at position 0.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::system::{AtomId, AtomicSystem, MapKind};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitDecomposition {
    pub conservative_orbits: Vec<usize>,
    pub dissipative_orbits: Vec<usize>,
    pub wandering_set: Vec<AtomId>,
    #[serde(serialize_with = "crate::io::serialize_rational")]
    pub wandering_mass: BigRational,
}

impl OrbitDecomposition {
    pub fn is_dissipative(&self) -> bool {
        self.conservative_orbits.is_empty()
    }

    /// The orbit's wandering representative, if the orbit is dissipative.
    pub fn representative(&self, orbit: usize) -> Option<AtomId> {
        self.wandering_set.iter().copied().find(|a| a.orbit == orbit)
    }

    /// Fails unless the system is dissipative with a nonempty wandering set.
    pub fn require_dissipative(&self) -> Result<()> {
        if !self.conservative_orbits.is_empty() {
            return Err(Error::NotDissipative {
                orbits: self.conservative_orbits.clone(),
            });
        }
        if self.wandering_set.is_empty() {
            return Err(Error::EmptyWanderingSet);
        }
        Ok(())
    }
}

fn require_bijective(system: &AtomicSystem) -> Result<()> {
    match system.orbits().iter().position(|o| o.kind() == MapKind::UnilateralChain) {
        Some(orbit) => Err(Error::NonInvertibleMap { orbit }),
        None => Ok(()),
    }
}

pub fn hopf_decompose(system: &AtomicSystem) -> Result<OrbitDecomposition> {
    require_bijective(system)?;
    let mut conservative_orbits = Vec::new();
    let mut dissipative_orbits = Vec::new();
    let mut wandering_set = Vec::new();
    let mut wandering_mass = BigRational::zero();
    for (i, orbit) in system.orbits().iter().enumerate() {
        match orbit.kind() {
            MapKind::Cycle { .. } => conservative_orbits.push(i),
            MapKind::BilateralChain => {
                dissipative_orbits.push(i);
                let rep = AtomId::new(i, 0);
                wandering_mass += orbit.mass(0);
                wandering_set.push(rep);
            }
            MapKind::UnilateralChain => unreachable!("rejected above"),
        }
    }
    Ok(OrbitDecomposition {
        conservative_orbits,
        dissipative_orbits,
        wandering_set,
        wandering_mass,
    })
}

/// True iff the conservative part is null, i.e. there are no cycles.
pub fn is_dissipative(system: &AtomicSystem) -> Result<bool> {
    Ok(hopf_decompose(system)?.is_dissipative())
}

/// Smallest `n >= 1` with `f^n(x) = x`, if it is at most `limit`.
pub fn return_time(system: &AtomicSystem, atom: AtomId, limit: usize) -> Option<usize> {
    (1..=limit).find(|&n| system.iterate(atom, n as i64) == Some(atom))
}

/// Checks on `|n| <= radius` that the iterates `f^n(W)` are pairwise
/// disjoint and cover every dissipative atom with `|position| <= radius`.
pub fn check_wandering(system: &AtomicSystem, decomposition: &OrbitDecomposition, radius: i64) -> bool {
    let mut seen = std::collections::BTreeSet::new();
    for n in -radius..=radius {
        for &w in &decomposition.wandering_set {
            let Some(x) = system.iterate(w, n) else {
                return false;
            };
            if !seen.insert(x) {
                return false;
            }
        }
    }
    decomposition
        .dissipative_orbits
        .iter()
        .all(|&o| (-radius..=radius).all(|p| seen.contains(&AtomId::new(o, p))))
}
