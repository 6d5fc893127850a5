//! Exponential growth rates of the criterion sequences along each orbit.
//!
//! For an atom `x` at position `k` the forward quantity is
//! `mu_n(f^{-n}{x}) / mu{x} = prod_{j=k-n}^{k-1} g_j` with local factor
//! `g_j = |w_j|^p mu_j / mu_{j+1}` (or `g_j = |w_j|` for sup-norm spaces),
//! and the backward quantity `mu_{-n}(f^n{x}) / mu{x} = prod_{j=k}^{k+n-1} 1/g_j`.
//! Far enough out both products are governed by the periodic block of the
//! relevant tail, so each orbit has two rates: `forward` from the backward
//! tail and `backward` from the forward tail. Over one period the mass
//! ratios telescope to the tail's `mass_ratio`.
//!
//! Signs are decided exactly whenever possible: with `p = a/b` the block
//! multiplier `M` satisfies `M^{2b} = R^{2b} * (prod |w|^2)^a`, a rational
//! even for float weights (every finite float is dyadic).

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::scalar::{compare_powers, ln_rational, Exponent, Scalar};
use crate::system::{AtomId, AtomicSystem, MapKind, Orbit};

/// Rates closer to zero than this are treated as undecided when no exact
/// comparison is available.
pub const RATE_TIE_TOLERANCE: f64 = 1e-9;

const MAX_EXACT_BITS: u64 = 400_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
    Zero,
    Ambiguous,
}

/// How criterion values are measured: `|w^(n)|^p` against `mu` on `L^p`,
/// or plain `|w^(n)|` on sup-norm sequence spaces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    Lp(Exponent),
    Sup,
}

impl Metric {
    fn fraction(&self) -> Option<(u32, u32)> {
        match self {
            Metric::Lp(p) => p.fraction(),
            Metric::Sup => Some((1, 1)),
        }
    }

    fn power(&self) -> f64 {
        match self {
            Metric::Lp(p) => p.value(),
            Metric::Sup => 1.0,
        }
    }

    fn uses_mass(&self) -> bool {
        matches!(self, Metric::Lp(_))
    }
}

/// Multiplier `M` of a criterion product over one period.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockGrowth {
    ln_multiplier: f64,
    period: usize,
    exact_power: Option<(BigRational, u64)>,
}

impl BlockGrowth {
    fn new(weights: &[Scalar], mass_factor: &BigRational, metric: Metric) -> Self {
        let power = metric.power();
        let ln_mass = if metric.uses_mass() { ln_rational(mass_factor) } else { 0.0 };
        let ln_multiplier = weights.iter().map(|w| power * w.ln_modulus()).sum::<f64>() + ln_mass;
        let exact_power = metric.fraction().and_then(|(a, b)| {
            let mut modsq = BigRational::one();
            for w in weights {
                modsq *= w.modulus_squared_exact()?;
            }
            if modsq.is_zero() {
                return Some((modsq, 2 * b as u64));
            }
            let factor = if metric.uses_mass() { mass_factor.clone() } else { BigRational::one() };
            let bits = |r: &BigRational| r.numer().bits() + r.denom().bits();
            if bits(&modsq) * a as u64 + bits(&factor) * 2 * b as u64 > MAX_EXACT_BITS {
                return None;
            }
            let value = num_traits::pow(factor, 2 * b as usize) * num_traits::pow(modsq, a as usize);
            Some((value, 2 * b as u64))
        });
        BlockGrowth {
            ln_multiplier,
            period: weights.len().max(1),
            exact_power,
        }
    }

    fn vanishing() -> Self {
        BlockGrowth {
            ln_multiplier: f64::NEG_INFINITY,
            period: 1,
            exact_power: Some((BigRational::zero(), 1)),
        }
    }

    /// Growth of the reciprocal product `1/M`.
    fn reciprocal(&self) -> Self {
        BlockGrowth {
            ln_multiplier: -self.ln_multiplier,
            period: self.period,
            exact_power: self.exact_power.as_ref().and_then(|(x, e)| {
                (!x.is_zero()).then(|| (x.recip(), *e))
            }),
        }
    }

    /// Exponential rate per step, `ln M / period`.
    pub fn rate(&self) -> f64 {
        self.ln_multiplier / self.period as f64
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn is_exact(&self) -> bool {
        self.exact_power.is_some()
    }

    pub fn sign(&self) -> Sign {
        if self.ln_multiplier == f64::INFINITY {
            return Sign::Positive;
        }
        if self.ln_multiplier == f64::NEG_INFINITY {
            return Sign::Negative;
        }
        if let Some((x, _)) = &self.exact_power {
            return match x.cmp(&BigRational::one()) {
                Ordering::Greater => Sign::Positive,
                Ordering::Less => Sign::Negative,
                Ordering::Equal => Sign::Zero,
            };
        }
        let r = self.rate();
        if r.abs() <= RATE_TIE_TOLERANCE {
            Sign::Ambiguous
        } else if r > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    /// Exact comparison of two rates, when both are exactly representable.
    pub fn cmp_rate(&self, other: &BlockGrowth) -> Option<Ordering> {
        let (a, b) = (self.ln_multiplier, other.ln_multiplier);
        if a.is_infinite() || b.is_infinite() {
            return self.rate().partial_cmp(&other.rate());
        }
        let (x, ex) = self.exact_power.as_ref()?;
        let (y, ey) = other.exact_power.as_ref()?;
        // ln x / (ex * px) against ln y / (ey * py)
        let lhs_exp = ey * other.period as u64;
        let rhs_exp = ex * self.period as u64;
        compare_powers(x, lhs_exp, y, rhs_exp)
    }
}

/// The two asymptotic rates of one orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitRates {
    pub orbit: usize,
    pub kind: MapKind,
    /// Rate of `mu_n(f^{-n}{x})` as `n -> +inf`.
    pub forward: BlockGrowth,
    /// Rate of `mu_{-n}(f^n{x})` as `n -> +inf`. On a unilateral chain the
    /// operator has no inverse and this only describes atoms far out on the
    /// tail.
    pub backward: BlockGrowth,
    pub has_zero_weight: bool,
}

impl OrbitRates {
    pub fn forward_sign(&self) -> Sign {
        self.forward.sign()
    }

    pub fn backward_sign(&self) -> Sign {
        self.backward.sign()
    }
}

fn cycle_weights(orbit: &Orbit, length: usize) -> Vec<Scalar> {
    (0..length as i64).map(|p| orbit.weight(p).clone()).collect()
}

pub fn orbit_rates(system: &AtomicSystem, orbit_index: usize, metric: Metric) -> OrbitRates {
    let orbit = &system.orbits()[orbit_index];
    let has_zero_weight = orbit.scan_window().iter().any(|&p| orbit.weight(p).is_zero());
    let forward_block = || {
        let f = orbit.forward();
        BlockGrowth::new(f.periodic_weights(), &f.mass_ratio().recip(), metric).reciprocal()
    };
    let (forward, backward) = match orbit.kind() {
        MapKind::Cycle { length } => {
            let g = BlockGrowth::new(&cycle_weights(orbit, length), &BigRational::one(), metric);
            let back = g.reciprocal();
            (g, back)
        }
        MapKind::BilateralChain => {
            let b = orbit.backward().expect("bilateral chains have a backward tail");
            let fwd = BlockGrowth::new(b.periodic_weights(), b.mass_ratio(), metric);
            (fwd, forward_block())
        }
        MapKind::UnilateralChain => (BlockGrowth::vanishing(), forward_block()),
    };
    OrbitRates {
        orbit: orbit_index,
        kind: orbit.kind(),
        forward,
        backward,
        has_zero_weight,
    }
}

pub fn system_rates(system: &AtomicSystem, metric: Metric) -> Vec<OrbitRates> {
    (0..system.orbits().len()).map(|i| orbit_rates(system, i, metric)).collect()
}

/// `ln` of the local factor `g_j` at a normalized position.
fn ln_local(orbit: &Orbit, position: i64, next: i64, metric: Metric) -> f64 {
    let w = orbit.weight(position);
    match metric {
        Metric::Lp(p) => {
            if w.is_zero() {
                return f64::NEG_INFINITY;
            }
            p.value() * w.ln_modulus() + orbit.ln_mass(position) - orbit.ln_mass(next)
        }
        Metric::Sup => w.ln_modulus(),
    }
}

/// One point of a criterion profile: `ln` of `mu_n(f^{-n}{x})` (or of
/// `|w^(n)(f^{-n}x)|` for sup-norm spaces).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfilePoint {
    pub n: i64,
    pub ln_value: f64,
}

/// Criterion values for `n` in `[-horizon, horizon]`, computed incrementally
/// in log-domain. Negative `n` are omitted on orbits without an inverse.
pub fn profile(system: &AtomicSystem, atom: AtomId, metric: Metric, horizon: i64) -> Vec<ProfilePoint> {
    let orbit = &system.orbits()[atom.orbit];
    let base = match metric {
        Metric::Lp(_) => orbit.ln_mass(atom.position),
        Metric::Sup => 0.0,
    };
    let mut out = Vec::with_capacity(2 * horizon as usize + 1);
    if orbit.kind().is_bijective() {
        let mut backward = Vec::with_capacity(horizon as usize);
        let mut acc = base;
        for m in 1..=horizon {
            // extends the product by 1/g at position k + m - 1
            let j = orbit.normalize(atom.position + m - 1).expect("bijective");
            let next = orbit.normalize(j + 1).expect("bijective");
            acc -= ln_local(orbit, j, next, metric);
            backward.push(ProfilePoint { n: -m, ln_value: acc });
        }
        out.extend(backward.into_iter().rev());
    }
    out.push(ProfilePoint { n: 0, ln_value: base });
    let mut acc = base;
    for n in 1..=horizon {
        let j = atom.position - n;
        match orbit.normalize(j) {
            Some(j) => {
                let next = orbit.normalize(j + 1).expect("successor exists");
                acc += ln_local(orbit, j, next, metric);
            }
            None => acc = f64::NEG_INFINITY,
        }
        out.push(ProfilePoint { n, ln_value: acc });
    }
    out
}
