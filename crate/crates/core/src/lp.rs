//! Expansivity of `C_{w,f}` on `L^p(mu)`.
//!
//! The criteria are stated in terms of `mu_n(f^{-n}(B))`:
//!
//! * expansive: `sup_{n in Z} mu_n(f^{-n}(B)) = inf` for every `B`;
//! * average: the Cesàro means of `mu_j(f^{-j}(B))^{1/p}` over `|j| <= n`
//!   are unbounded for every `B`;
//! * uniform: the sets split into a part where `mu_n(f^{-n}(B)) / mu(B)`
//!   diverges uniformly and a part where `mu_{-n}(f^n(B)) / mu(B)` does;
//! * the positive variants use `n >= 1` only and need no inverse.
//!
//! Enlarging `B` never decreases `mu_n(f^{-n}(B))`, and every set of
//! positive measure contains an atom, so testing singletons suffices for the
//! first two notions. For the uniform notions a set mixing both parts of the
//! partition is assigned to the part carrying at least half of its mass,
//! which keeps the ratio within a factor 2 of the singleton infimum.

use crate::error::Result;
use crate::growth::Metric;
use crate::system::{AtomicSystem, SampleFunction};
use crate::verdict::{evaluate, orbit_representatives, AnalysisConfig, Notion, Verdict};

/// Runs one notion. Bilateral notions require an invertible operator.
pub fn analyze_lp(system: &AtomicSystem, notion: Notion, config: &AnalysisConfig) -> Result<Verdict> {
    if !notion.is_positive_variant() {
        system.require_invertible()?;
    }
    let atoms = orbit_representatives(system);
    Ok(evaluate(system, notion, Metric::Lp(system.p()), config, &atoms, false, "lp"))
}

pub fn analyze_expansive_lp(system: &AtomicSystem, horizon: u32) -> Result<Verdict> {
    analyze_lp(system, Notion::Expansive, &AnalysisConfig::with_horizon(horizon))
}

pub fn analyze_average_expansive_lp(system: &AtomicSystem, horizon: u32) -> Result<Verdict> {
    analyze_lp(system, Notion::Average, &AnalysisConfig::with_horizon(horizon))
}

pub fn analyze_uniform_expansive_lp(system: &AtomicSystem, horizon: u32) -> Result<Verdict> {
    analyze_lp(system, Notion::Uniform, &AnalysisConfig::with_horizon(horizon))
}

/// One of the forward-only notions; other notions are rejected.
pub fn analyze_positive_variants_lp(system: &AtomicSystem, horizon: u32, notion: Notion) -> Result<Verdict> {
    if !notion.is_positive_variant() {
        return Err(crate::Error::PreconditionFailed(format!(
            "`{notion}` is not a forward-only notion"
        )));
    }
    analyze_lp(system, notion, &AnalysisConfig::with_horizon(horizon))
}

/// `ln ||(C_{w,f})^n chi_B||_p^p`, obtained by iterating the operator.
pub fn ln_orbit_norm(system: &AtomicSystem, atoms: &[crate::AtomId], n: i64) -> Result<f64> {
    let image = system.apply_operator(&SampleFunction::indicator(atoms), n)?;
    let norm = image.norm_p_pow(system)?;
    Ok(norm.ln())
}
