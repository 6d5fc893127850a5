//! Conjugation of a dissipative `C_{w,f}` to an unweighted composition
//! operator, its bounded-distortion test, the weighted-shift factor and the
//! resulting chaos classification.
//!
//! With wandering set `W` (one representative atom `r` per chain) every atom
//! `x` lies in exactly one `f^{-n}(W)`, namely `n = r - x`. The measure
//! `nu({x}) = |w^(n)(x)|^p mu({x})` makes
//! `Pi(phi) = phi / w^(n)` on `f^{-n}(W)` an isometry `L^p(mu) -> L^p(nu)`
//! with `Pi o C_{w,f} = C_f o Pi`.
//!
//! On each tail `nu` is geometric over one period, so `nu(X)` is a finite sum
//! plus two geometric series per chain. Those series converge exactly when
//! both growth rates of the chain are negative.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::{orbit_rates, Metric, Sign, RATE_TIE_TOLERANCE};
use crate::hopf::OrbitDecomposition;
use crate::scalar::{log_sum_exp, rational_to_f64, Exponent, Magnitude, Scalar};
use crate::system::{AtomId, AtomicSystem, MapKind, Orbit, SampleFunction, TailSpec};
use crate::verdict::Status;

/// Radius of the `nu` and `u` tables stored in a package.
pub const TABLE_RADIUS: i64 = 10;
/// Default `|k|` used for unbounded-distortion witnesses.
pub const DISTORTION_HORIZON: i64 = 100;

pub const ISOMETRY_TOLERANCE: f64 = 1e-10;
pub const INTERTWINING_TOLERANCE: f64 = 1e-12;
pub const FACTOR_TOLERANCE: f64 = 1e-10;

/// `nu(X)` or the mass of one orbit.
#[derive(Clone, Debug, PartialEq)]
pub enum NuTotal {
    Finite(Magnitude),
    Infinite,
    /// The convergence of a tail series could not be decided.
    Undetermined,
}

impl NuTotal {
    pub fn is_finite(&self) -> bool {
        matches!(self, NuTotal::Finite(_))
    }

    fn add(&self, other: &NuTotal) -> NuTotal {
        match (self, other) {
            (NuTotal::Infinite, _) | (_, NuTotal::Infinite) => NuTotal::Infinite,
            (NuTotal::Undetermined, _) | (_, NuTotal::Undetermined) => NuTotal::Undetermined,
            (NuTotal::Finite(a), NuTotal::Finite(b)) => NuTotal::Finite(a.add(b)),
        }
    }
}

impl Serialize for NuTotal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NuTotal::Finite(m) => m.serialize(s),
            NuTotal::Infinite => s.serialize_str("inf"),
            NuTotal::Undetermined => s.serialize_str("undetermined"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distortion {
    Bounded(f64),
    Unbounded,
}

impl Serialize for Distortion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Distortion::Bounded(k) => s.serialize_f64(*k),
            Distortion::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

/// Where the singleton ratio `nu(f^k{x})/nu{x}` over `nu(f^k W)/nu(W)` is
/// most extreme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistortionWitness {
    pub k: i64,
    pub atom: AtomId,
    #[serde(serialize_with = "crate::io::serialize_real")]
    pub log10_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub k: Distortion,
    pub witness: Option<DistortionWitness>,
    /// Range of `k` on which the supremum was taken (bounded case) or the
    /// witness horizon (unbounded case).
    pub window: (i64, i64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaosClassification {
    pub nu_finite: bool,
    pub devaney: Status,
    /// Devaney condition evaluated orbit by orbit, independently of `nu(X)`.
    pub devaney_criterion: Status,
    pub mixing: Status,
    pub frequently_hypercyclic: Status,
    pub frequently_recurrent: Status,
    pub equivalences_note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitTotal {
    pub orbit: usize,
    pub representative: AtomId,
    pub total: NuTotal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NuEntry {
    pub atom: AtomId,
    pub nu: Magnitude,
    pub transport: Scalar,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UEntry {
    pub k: i64,
    #[serde(serialize_with = "crate::io::serialize_real")]
    pub u: f64,
}

/// Everything needed to transport `C_{w,f}` to `C_f` on `L^p(nu)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugacyPackage {
    #[serde(serialize_with = "serialize_exponent")]
    pub p: Exponent,
    pub wandering_set: Vec<AtomId>,
    #[serde(serialize_with = "crate::io::serialize_rational")]
    pub wandering_mass: BigRational,
    pub nu_total: NuTotal,
    pub orbit_totals: Vec<OrbitTotal>,
    pub nu_window: Vec<NuEntry>,
    pub u_window: Vec<UEntry>,
    pub distortion: DistortionReport,
    pub chaos: ChaosClassification,
    #[serde(skip)]
    representatives: BTreeMap<usize, i64>,
    #[serde(skip)]
    transport_overrides: BTreeMap<AtomId, Scalar>,
}

fn serialize_exponent<S: serde::Serializer>(p: &Exponent, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(p.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Wandering representatives: one atom per bilateral chain.
#[derive(Clone, Debug, PartialEq)]
struct Wandering {
    reps: BTreeMap<usize, i64>,
}

impl Wandering {
    fn new(system: &AtomicSystem, set: &[AtomId]) -> Result<Self> {
        system.require_invertible()?;
        let cycles: Vec<usize> = system
            .orbits()
            .iter()
            .enumerate()
            .filter(|(_, o)| matches!(o.kind(), MapKind::Cycle { .. }))
            .map(|(i, _)| i)
            .collect();
        if !cycles.is_empty() {
            return Err(Error::NotDissipative { orbits: cycles });
        }
        if set.is_empty() {
            return Err(Error::EmptyWanderingSet);
        }
        let mut reps = BTreeMap::new();
        for a in set {
            if !system.contains(*a) {
                return Err(Error::PreconditionFailed(format!("atom {a} is not in the system")));
            }
            if reps.insert(a.orbit, a.position).is_some() {
                return Err(Error::PreconditionFailed(format!(
                    "wandering set has two atoms on orbit {}",
                    a.orbit
                )));
            }
        }
        if let Some(missing) = (0..system.orbits().len()).find(|i| !reps.contains_key(i)) {
            return Err(Error::PreconditionFailed(format!(
                "wandering set misses chain {missing}"
            )));
        }
        Ok(Wandering { reps })
    }

    fn atoms(&self) -> Vec<AtomId> {
        self.reps.iter().map(|(&o, &p)| AtomId::new(o, p)).collect()
    }

    /// The `n` with `x in f^{-n}(W)`.
    fn steps(&self, x: AtomId) -> i64 {
        self.reps[&x.orbit] - x.position
    }

    /// `f^k(W)`.
    fn shifted(&self, k: i64) -> Vec<AtomId> {
        self.reps.iter().map(|(&o, &p)| AtomId::new(o, p + k)).collect()
    }

    fn ln_nu(&self, system: &AtomicSystem, x: AtomId) -> Result<f64> {
        let c = system.cocycle(x, self.steps(x))?;
        Ok(system.p().value() * c.ln_abs + system.ln_mass(x)?)
    }

    fn nu(&self, system: &AtomicSystem, x: AtomId) -> Result<Magnitude> {
        if system.is_exact() {
            let c = Scalar::Exact(system.cocycle_exact(x, self.steps(x))?.expect("exact weights"));
            return Ok(c.abs_pow(system.p()).mul(&Magnitude::Exact(system.mass(x)?)));
        }
        Ok(Magnitude::Float(self.ln_nu(system, x)?.exp()))
    }

    fn ln_nu_set(&self, system: &AtomicSystem, atoms: &[AtomId]) -> Result<f64> {
        let terms = atoms
            .iter()
            .map(|&a| self.ln_nu(system, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(log_sum_exp(terms))
    }

    fn transport(&self, system: &AtomicSystem, x: AtomId) -> Result<Scalar> {
        let c = system.cocycle_value(x, self.steps(x))?;
        c.inv().ok_or(Error::ZeroWeight { atom: x })
    }
}

fn orbit_total(system: &AtomicSystem, wandering: &Wandering, orbit: usize) -> Result<NuTotal> {
    let o = &system.orbits()[orbit];
    let rates = orbit_rates(system, orbit, Metric::Lp(system.p()));
    let decide = |s: Sign| match s {
        Sign::Negative => Some(true),
        Sign::Positive | Sign::Zero => Some(false),
        Sign::Ambiguous => None,
    };
    // forward rate governs the backward tail, backward rate the forward tail
    let (back_ok, fwd_ok) = (decide(rates.forward_sign()), decide(rates.backward_sign()));
    if back_ok == Some(false) || fwd_ok == Some(false) {
        return Ok(NuTotal::Infinite);
    }
    if back_ok.is_none() || fwd_ok.is_none() {
        return Ok(NuTotal::Undetermined);
    }
    let (b, a) = o.regular_bounds();
    let pf = o.forward().period() as i64;
    let pb = o.backward().expect("chain").period() as i64;
    let nu = |pos: i64| wandering.nu(system, AtomId::new(orbit, pos));
    let mut total = Magnitude::zero();
    for pos in b + 1..a {
        total = total.add(&nu(pos)?);
    }
    // geometric tail: sum of one block divided by (1 - ratio)
    let tail = |start: i64, step: i64, period: i64| -> Result<Magnitude> {
        let mut block = Magnitude::zero();
        for r in 0..period {
            block = block.add(&nu(start + step * r)?);
        }
        let first = nu(start)?;
        let next = nu(start + step * period)?;
        Ok(match (&block, &first, &next) {
            (Magnitude::Exact(s), Magnitude::Exact(x), Magnitude::Exact(y)) => {
                let ratio = y / x;
                Magnitude::Exact(s / (BigRational::one() - ratio))
            }
            _ => {
                let ratio = (next.ln() - first.ln()).exp();
                Magnitude::Float(block.to_f64() / (1.0 - ratio))
            }
        })
    };
    total = total.add(&tail(a, 1, pf)?);
    total = total.add(&tail(b, -1, pb)?);
    Ok(NuTotal::Finite(total))
}

/// Distortion over the wandering set, from closed-form `nu` values.
fn distortion(system: &AtomicSystem, wandering: &Wandering, horizon: i64) -> Result<DistortionReport> {
    let atoms = wandering.atoms();
    if atoms.len() == 1 {
        return Ok(DistortionReport {
            k: Distortion::Bounded(1.0),
            witness: None,
            window: (0, 0),
        });
    }
    let metric = Metric::Lp(system.p());
    let rates: Vec<_> = atoms.iter().map(|a| orbit_rates(system, a.orbit, metric)).collect();
    let same = |x: &crate::growth::BlockGrowth, y: &crate::growth::BlockGrowth| match x.cmp_rate(y) {
        Some(ord) => ord.is_eq(),
        None => (x.rate() - y.rate()).abs() <= RATE_TIE_TOLERANCE,
    };
    let forward_equal = rates.iter().all(|r| same(&r.backward, &rates[0].backward));
    let backward_equal = rates.iter().all(|r| same(&r.forward, &rates[0].forward));

    let ln_ratio_at = |k: i64| -> Result<Vec<f64>> {
        let ln_w = wandering.ln_nu_set(system, &atoms)?;
        let ln_fw = wandering.ln_nu_set(system, &wandering.shifted(k))?;
        atoms
            .iter()
            .map(|&x| {
                let fx = AtomId::new(x.orbit, x.position + k);
                Ok(wandering.ln_nu(system, fx)? - wandering.ln_nu(system, x)? - (ln_fw - ln_w))
            })
            .collect()
    };
    let extreme = |k: i64| -> Result<DistortionWitness> {
        let ratios = ln_ratio_at(k)?;
        let (i, r) = ratios
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("nonempty");
        Ok(DistortionWitness {
            k,
            atom: atoms[i],
            log10_ratio: r.abs() / std::f64::consts::LN_10,
        })
    };

    if !(forward_equal && backward_equal) {
        let k = if forward_equal { -horizon } else { horizon };
        return Ok(DistortionReport {
            k: Distortion::Unbounded,
            witness: Some(extreme(k)?),
            window: (-horizon, horizon),
        });
    }

    let mut lcm_f = 1i64;
    let mut lcm_b = 1i64;
    let mut hi = 0i64;
    let mut lo = 0i64;
    for a in &atoms {
        let o = &system.orbits()[a.orbit];
        let (b, top) = o.regular_bounds();
        lcm_f = lcm_f.lcm(&(o.forward().period() as i64));
        lcm_b = lcm_b.lcm(&(o.backward().expect("chain").period() as i64));
        hi = hi.max(top - a.position);
        lo = lo.min(b - a.position);
    }
    let window = (lo - lcm_b, hi + lcm_f);
    let exact = system.is_exact();
    let mut best: Option<(DistortionWitness, f64)> = None;
    for k in window.0..=window.1 {
        let candidates: Vec<(AtomId, f64)> = if exact {
            exact_ratios(system, wandering, &atoms, k)?
        } else {
            let ln = ln_ratio_at(k)?;
            atoms.iter().copied().zip(ln.into_iter().map(|r| r.abs().exp())).collect()
        };
        for (atom, value) in candidates {
            if best.as_ref().is_none_or(|(_, v)| value > *v) {
                let w = DistortionWitness {
                    k,
                    atom,
                    log10_ratio: value.log10(),
                };
                best = Some((w, value));
            }
        }
    }
    let (witness, k_value) = best.expect("nonempty window");
    Ok(DistortionReport {
        k: Distortion::Bounded(k_value),
        witness: Some(witness),
        window,
    })
}

/// `max(q, 1/q)` per atom with `q = (nu(f^k x)/nu(x)) / (nu(f^k W)/nu(W))`,
/// computed in rationals and rounded once.
fn exact_ratios(
    system: &AtomicSystem,
    wandering: &Wandering,
    atoms: &[AtomId],
    k: i64,
) -> Result<Vec<(AtomId, f64)>> {
    let exact = |m: Magnitude| match m {
        Magnitude::Exact(r) => r,
        Magnitude::Float(_) => unreachable!("exact system"),
    };
    let mut nu_w = BigRational::zero();
    let mut nu_fw = BigRational::zero();
    let mut pairs = Vec::with_capacity(atoms.len());
    for &x in atoms {
        let fx = AtomId::new(x.orbit, x.position + k);
        let a = exact(wandering.nu(system, x)?);
        let b = exact(wandering.nu(system, fx)?);
        nu_w += &a;
        nu_fw += &b;
        pairs.push((x, a, b));
    }
    let whole = nu_fw / nu_w;
    Ok(pairs
        .into_iter()
        .map(|(x, a, b)| {
            let q = (b / a) / &whole;
            let q = if q < BigRational::one() { q.recip() } else { q };
            (x, rational_to_f64(&q))
        })
        .collect())
}

const EQUIVALENCES_NOTE: &str = "C_{w,f} is conjugate to C_f on L^p(nu), so hypercyclicity, recurrence, \
Li-Yorke chaos and shadowing transfer between them; hypercyclicity is equivalent to recurrence. \
Under bounded distortion, frequent hypercyclicity, frequent recurrence and Devaney chaos coincide.";

fn classify(totals: &[OrbitTotal], nu_total: &NuTotal, distortion: &DistortionReport) -> ChaosClassification {
    let nu_finite = nu_total.is_finite();
    // An atom has finite nu-mass, so it cannot be excised; Devaney chaos
    // needs every orbit to carry finite nu-mass.
    let devaney_criterion = if totals.iter().any(|t| t.total == NuTotal::Infinite) {
        Status::ProvenFalse
    } else if totals.iter().all(|t| t.total.is_finite()) {
        Status::ProvenTrue
    } else {
        Status::Unknown
    };
    let devaney = if nu_finite { Status::ProvenTrue } else { devaney_criterion };
    let bounded = matches!(distortion.k, Distortion::Bounded(_));
    let mixing = if nu_finite { Status::ProvenTrue } else { Status::Unknown };
    let frequently_hypercyclic = if nu_finite {
        Status::ProvenTrue
    } else if bounded {
        devaney
    } else {
        Status::Unknown
    };
    let frequently_recurrent = if bounded { devaney } else { Status::Unknown };
    ChaosClassification {
        nu_finite,
        devaney,
        devaney_criterion,
        mixing,
        frequently_hypercyclic,
        frequently_recurrent,
        equivalences_note: EQUIVALENCES_NOTE.to_string(),
    }
}

/// Builds the package for the decomposition's wandering set.
pub fn build_conjugacy(system: &AtomicSystem, decomposition: &OrbitDecomposition) -> Result<ConjugacyPackage> {
    decomposition.require_dissipative()?;
    build_conjugacy_on(system, &decomposition.wandering_set)
}

/// Builds the package for an explicit wandering set (one atom per chain).
pub fn build_conjugacy_on(system: &AtomicSystem, wandering_set: &[AtomId]) -> Result<ConjugacyPackage> {
    let wandering = Wandering::new(system, wandering_set)?;
    let mut wandering_mass = BigRational::zero();
    for a in wandering.atoms() {
        wandering_mass += system.mass(a)?;
    }
    let mut orbit_totals = Vec::new();
    let mut nu_total = NuTotal::Finite(Magnitude::zero());
    for a in wandering.atoms() {
        let total = orbit_total(system, &wandering, a.orbit)?;
        nu_total = nu_total.add(&total);
        orbit_totals.push(OrbitTotal {
            orbit: a.orbit,
            representative: a,
            total,
        });
    }
    let mut nu_window = Vec::new();
    for a in wandering.atoms() {
        for d in -TABLE_RADIUS..=TABLE_RADIUS {
            let x = AtomId::new(a.orbit, a.position + d);
            nu_window.push(NuEntry {
                atom: x,
                nu: wandering.nu(system, x)?,
                transport: wandering.transport(system, x)?,
            });
        }
    }
    let u_window = (-TABLE_RADIUS..=TABLE_RADIUS)
        .map(|k| Ok(UEntry { k, u: u_from_nu(system, &wandering, k)? }))
        .collect::<Result<Vec<_>>>()?;
    let distortion = distortion(system, &wandering, DISTORTION_HORIZON)?;
    let chaos = classify(&orbit_totals, &nu_total, &distortion);
    Ok(ConjugacyPackage {
        p: system.p(),
        wandering_set: wandering.atoms(),
        wandering_mass,
        nu_total,
        orbit_totals,
        nu_window,
        u_window,
        distortion,
        chaos,
        representatives: wandering.reps,
        transport_overrides: BTreeMap::new(),
    })
}

fn u_from_nu(system: &AtomicSystem, wandering: &Wandering, k: i64) -> Result<f64> {
    let prev = wandering.ln_nu_set(system, &wandering.shifted(k - 1))?;
    let here = wandering.ln_nu_set(system, &wandering.shifted(k))?;
    Ok(((prev - here) / system.p().value()).exp())
}

/// Distortion constant of the system on `W`, with a witness when unbounded.
pub fn check_bounded_distortion(system: &AtomicSystem, decomposition: &OrbitDecomposition) -> Result<DistortionReport> {
    check_bounded_distortion_with(system, decomposition, DISTORTION_HORIZON)
}

pub fn check_bounded_distortion_with(
    system: &AtomicSystem,
    decomposition: &OrbitDecomposition,
    horizon: i64,
) -> Result<DistortionReport> {
    decomposition.require_dissipative()?;
    let wandering = Wandering::new(system, &decomposition.wandering_set)?;
    distortion(system, &wandering, horizon.max(1))
}

/// The unweighted system `(X, nu, f, 1)` with the same orbits.
///
/// Needs `nu` to be rational: an exact-weight (or real float) system with
/// integer `p`.
pub fn unweighted_system(system: &AtomicSystem, decomposition: &OrbitDecomposition) -> Result<AtomicSystem> {
    decomposition.require_dissipative()?;
    if system.p().as_integer().is_none() {
        return Err(Error::PreconditionFailed("nu is rational only for integer p".into()));
    }
    let exact = system.to_exact()?;
    let wandering = Wandering::new(&exact, &decomposition.wandering_set)?;
    let nu = |x: AtomId| -> Result<BigRational> {
        match wandering.nu(&exact, x)? {
            Magnitude::Exact(r) => Ok(r),
            Magnitude::Float(_) => unreachable!("exact system"),
        }
    };
    let mut orbits = Vec::new();
    for (i, o) in exact.orbits().iter().enumerate() {
        let (b, a) = o.regular_bounds();
        let (pf, pb) = (o.forward().period() as i64, o.backward().expect("chain").period() as i64);
        let forward = unit_tail(0, a, 1, pf, |pos| nu(AtomId::new(i, pos)))?;
        let backward = unit_tail(-1, b, -1, pb, |pos| nu(AtomId::new(i, pos)))?;
        orbits.push(Orbit::bilateral(forward, backward));
    }
    AtomicSystem::new(orbits, system.p().value())
}

/// Tail with unit weights whose masses follow `nu` from `first` in steps of
/// `step`, periodic-geometric from position `regular` on.
fn unit_tail<F>(first: i64, regular: i64, step: i64, period: i64, nu: F) -> Result<TailSpec>
where
    F: Fn(i64) -> Result<BigRational>,
{
    let transient_len = (regular - first) * step;
    let transient = (0..transient_len.max(0))
        .map(|j| Ok((Scalar::one(), nu(first + step * j)?)))
        .collect::<Result<Vec<_>>>()?;
    let start = first + step * transient_len.max(0);
    let masses = (0..period).map(|r| nu(start + step * r)).collect::<Result<Vec<_>>>()?;
    let ratio = nu(start + step * period)? / nu(start)?;
    TailSpec::new(transient, vec![Scalar::one(); period as usize], masses, ratio)
}

impl ConjugacyPackage {
    fn wandering(&self) -> Wandering {
        Wandering {
            reps: self.representatives.clone(),
        }
    }

    fn check_atom(&self, system: &AtomicSystem, x: AtomId) -> Result<()> {
        if !system.contains(x) || !self.representatives.contains_key(&x.orbit) {
            return Err(Error::PreconditionFailed(format!("atom {x} is not covered by the package")));
        }
        Ok(())
    }

    /// `nu({x})`.
    pub fn nu(&self, system: &AtomicSystem, x: AtomId) -> Result<Magnitude> {
        self.check_atom(system, x)?;
        self.wandering().nu(system, x)
    }

    pub fn ln_nu(&self, system: &AtomicSystem, x: AtomId) -> Result<f64> {
        self.check_atom(system, x)?;
        self.wandering().ln_nu(system, x)
    }

    /// Multiplier of `Pi` at `x`: `1 / w^(n)(x)` for `x in f^{-n}(W)`.
    pub fn transport(&self, system: &AtomicSystem, x: AtomId) -> Result<Scalar> {
        self.check_atom(system, x)?;
        if let Some(t) = self.transport_overrides.get(&x) {
            return Ok(t.clone());
        }
        self.wandering().transport(system, x)
    }

    /// Replaces the multiplier of `Pi` at one atom. Used to build packages
    /// that must fail verification.
    pub fn with_transport_override(mut self, atom: AtomId, value: Scalar) -> Self {
        self.transport_overrides.insert(atom, value);
        self
    }

    pub fn has_overrides(&self) -> bool {
        !self.transport_overrides.is_empty()
    }

    /// `nu(B)` for a finite atom set.
    pub fn nu_of(&self, system: &AtomicSystem, atoms: &[AtomId]) -> Result<Magnitude> {
        let mut total = Magnitude::zero();
        for &a in atoms {
            total = total.add(&self.nu(system, a)?);
        }
        Ok(total)
    }

    pub fn apply_pi(&self, system: &AtomicSystem, phi: &SampleFunction, direction: Direction) -> Result<SampleFunction> {
        let mut values = BTreeMap::new();
        for (&x, v) in &phi.values {
            let t = self.transport(system, x)?;
            let value = match direction {
                Direction::Forward => v.mul(&t),
                Direction::Inverse => v.div(&t).ok_or(Error::ZeroWeight { atom: x })?,
            };
            values.insert(x, value);
        }
        Ok(SampleFunction { values })
    }

    /// `u_k = (nu(f^{k-1}W) / nu(f^k W))^{1/p}`.
    pub fn u(&self, system: &AtomicSystem, k: i64) -> Result<f64> {
        u_from_nu(system, &self.wandering(), k)
    }

    /// `u_k` from `mu_{-k+1}(f^{k-1}W)` and `mu_{-k}(f^k W)`.
    pub fn u_from_measures(&self, system: &AtomicSystem, k: i64) -> Result<f64> {
        let w = self.wandering();
        let prev = system.ln_mu_n(&w.shifted(k - 1), -k + 1)?;
        let here = system.ln_mu_n(&w.shifted(k), -k)?;
        Ok(((prev - here) / system.p().value()).exp())
    }

    /// `Gamma(psi)(k) = nu(f^k W)^{1/p} / nu(W) * sum_{x in W} psi(f^k x) nu({x})`
    /// for `psi` on `L^p(nu)`; only nonzero entries are returned.
    pub fn gamma(&self, system: &AtomicSystem, psi: &SampleFunction) -> Result<BTreeMap<i64, Complex64>> {
        let w = self.wandering();
        let p = system.p().value();
        let ln_nu_w = w.ln_nu_set(system, &w.atoms())?;
        let ks: BTreeSet<i64> = psi
            .values
            .keys()
            .filter(|x| self.representatives.contains_key(&x.orbit))
            .map(|x| x.position - self.representatives[&x.orbit])
            .collect();
        let mut out = BTreeMap::new();
        for k in ks {
            let scale = (w.ln_nu_set(system, &w.shifted(k))? / p - ln_nu_w).exp();
            let mut sum = Complex64::new(0.0, 0.0);
            for x in w.atoms() {
                let fx = AtomId::new(x.orbit, x.position + k);
                let value = psi.get(fx);
                if !value.is_zero() {
                    sum += value.to_complex() * w.ln_nu(system, x)?.exp();
                }
            }
            if sum.norm() != 0.0 {
                out.insert(k, sum * scale);
            }
        }
        Ok(out)
    }

    /// `(B_u y)_k = u_{k+1} y_{k+1}`.
    pub fn weighted_backward_shift(
        &self,
        system: &AtomicSystem,
        y: &BTreeMap<i64, Complex64>,
    ) -> Result<BTreeMap<i64, Complex64>> {
        y.iter()
            .map(|(&k, &v)| Ok((k - 1, v * self.u(system, k)?)))
            .collect()
    }
}

/// Maximum deviations found by [`verify_conjugacy`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub samples: usize,
    pub seed: u64,
    pub exact: bool,
    pub isometry_max_deviation: f64,
    pub intertwining_max_deviation: f64,
    pub inverse_max_deviation: f64,
    pub passed: bool,
    pub failure: Option<VerificationFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationFailure {
    pub check: String,
    pub atom: AtomId,
    pub deviation: f64,
}

impl VerificationReport {
    pub fn into_result(self) -> Result<VerificationReport> {
        match &self.failure {
            None => Ok(self),
            Some(f) => Err(Error::VerificationFailed {
                check: f.check.clone(),
                atom: f.atom,
                deviation: f.deviation,
            }),
        }
    }
}

fn sample_radius(package: &ConjugacyPackage) -> i64 {
    let spread = package.representatives.values().map(|p| p.abs()).max().unwrap_or(0);
    12 + spread
}

/// Largest atomwise relative deviation between two functions, with the atom.
fn max_deviation(a: &SampleFunction, b: &SampleFunction) -> Option<(AtomId, f64)> {
    let atoms: BTreeSet<AtomId> = a.values.keys().chain(b.values.keys()).copied().collect();
    atoms
        .into_iter()
        .map(|x| (x, Scalar::relative_deviation(&a.get(x), &b.get(x))))
        .max_by(|x, y| x.1.total_cmp(&y.1))
}

/// Checks on seeded random functions that `Pi` is an isometry, intertwines
/// `C_{w,f}` with `C_f`, and is inverted by `Pi^{-1}`. Never fails; the
/// report carries the first check that exceeded its tolerance.
pub fn run_verification(
    package: &ConjugacyPackage,
    system: &AtomicSystem,
    samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exact = system.is_exact();
    let radius = sample_radius(package);
    let (mut iso, mut inter, mut inv) = (0.0f64, 0.0f64, 0.0f64);
    let mut failure: Option<VerificationFailure> = None;
    let note = |check: &str, atom: AtomId, dev: f64, tol: f64, failure: &mut Option<VerificationFailure>| {
        if dev > tol && failure.is_none() {
            *failure = Some(VerificationFailure {
                check: check.to_string(),
                atom,
                deviation: dev,
            });
        }
    };
    let p = system.p();
    for _ in 0..samples {
        let phi = SampleFunction::random(system, &mut rng, radius, 8, exact);
        let pi_phi = package.apply_pi(system, &phi, Direction::Forward)?;

        let lhs = pi_phi.norm_p_pow_with(p, |x| package.nu(system, x))?;
        let rhs = phi.norm_p_pow(system)?;
        let dev = Magnitude::relative_deviation(&lhs, &rhs);
        iso = iso.max(dev);
        if dev > ISOMETRY_TOLERANCE {
            // blame the atom whose contribution moved the most
            let mut worst = (phi.support()[0], 0.0f64);
            for (&x, v) in &phi.values {
                let a = pi_phi.get(x).abs_pow(p).mul(&package.nu(system, x)?);
                let b = v.abs_pow(p).mul(&Magnitude::Exact(system.mass(x)?));
                let d = Magnitude::relative_deviation(&a, &b);
                if d > worst.1 {
                    worst = (x, d);
                }
            }
            note("isometry", worst.0, dev, ISOMETRY_TOLERANCE, &mut failure);
        }

        let left = package.apply_pi(system, &system.apply_operator(&phi, 1)?, Direction::Forward)?;
        let right = system.compose(&pi_phi);
        if let Some((atom, dev)) = max_deviation(&left, &right) {
            inter = inter.max(dev);
            note("intertwining", atom, dev, INTERTWINING_TOLERANCE, &mut failure);
        }

        let back = package.apply_pi(system, &pi_phi, Direction::Inverse)?;
        if let Some((atom, dev)) = max_deviation(&back, &phi) {
            inv = inv.max(dev);
            note("inverse", atom, dev, INTERTWINING_TOLERANCE, &mut failure);
        }
    }
    Ok(VerificationReport {
        samples,
        seed,
        exact,
        isometry_max_deviation: iso,
        intertwining_max_deviation: inter,
        inverse_max_deviation: inv,
        passed: failure.is_none(),
        failure,
    })
}

/// As [`run_verification`], failing with the first counterexample.
pub fn verify_conjugacy(
    package: &ConjugacyPackage,
    system: &AtomicSystem,
    samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    run_verification(package, system, samples, seed)?.into_result()
}

/// The factor weights `u` on a window plus the period they settle into.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftFactor {
    pub u: Vec<UEntry>,
    /// `u_k` is periodic with this period for `k` beyond `forward_from`.
    pub forward_period: usize,
    pub forward_from: i64,
    /// `u_k` is periodic with this period for `k` below `backward_from`.
    pub backward_period: usize,
    pub backward_from: i64,
}

/// `u` over `|k| <= radius`, available under bounded distortion.
pub fn shift_factor(package: &ConjugacyPackage, system: &AtomicSystem, radius: i64) -> Result<ShiftFactor> {
    if package.distortion.k == Distortion::Unbounded {
        return Err(Error::DistortionUnbounded);
    }
    let u = (-radius..=radius)
        .map(|k| Ok(UEntry { k, u: package.u(system, k)? }))
        .collect::<Result<Vec<_>>>()?;
    let mut fp = 1usize;
    let mut bp = 1usize;
    let mut hi = 0i64;
    let mut lo = 0i64;
    for (&orbit, &rep) in &package.representatives {
        let o = &system.orbits()[orbit];
        let (b, a) = o.regular_bounds();
        fp = fp.lcm(&o.forward().period());
        bp = bp.lcm(&o.backward().expect("chain").period());
        hi = hi.max(a - rep + 1);
        lo = lo.min(b - rep);
    }
    Ok(ShiftFactor {
        u,
        forward_period: fp,
        forward_from: hi,
        backward_period: bp,
        backward_from: lo,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorReport {
    pub samples: usize,
    pub seed: u64,
    /// `Gamma o C_f` against `B_u o Gamma`.
    pub gamma_max_deviation: f64,
    /// `(Gamma o Pi) o C_{w,f}` against `B_u o (Gamma o Pi)`.
    pub gamma_pi_max_deviation: f64,
    pub passed: bool,
}

fn sequence_deviation(a: &BTreeMap<i64, Complex64>, b: &BTreeMap<i64, Complex64>) -> f64 {
    let keys: BTreeSet<i64> = a.keys().chain(b.keys()).copied().collect();
    let zero = Complex64::new(0.0, 0.0);
    keys.into_iter()
        .map(|k| {
            let (x, y) = (a.get(&k).copied().unwrap_or(zero), b.get(&k).copied().unwrap_or(zero));
            let scale = x.norm().max(y.norm());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).norm() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Checks the factor identities on seeded random functions.
pub fn verify_shift_factor(
    package: &ConjugacyPackage,
    system: &AtomicSystem,
    samples: usize,
    seed: u64,
) -> Result<FactorReport> {
    if package.distortion.k == Distortion::Unbounded {
        return Err(Error::DistortionUnbounded);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = sample_radius(package);
    let (mut g1, mut g2) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let psi = SampleFunction::random(system, &mut rng, radius, 8, false);
        let lhs = package.gamma(system, &system.compose(&psi))?;
        let rhs = package.weighted_backward_shift(system, &package.gamma(system, &psi)?)?;
        g1 = g1.max(sequence_deviation(&lhs, &rhs));

        let phi = psi;
        let gp = |f: &SampleFunction| -> Result<BTreeMap<i64, Complex64>> {
            package.gamma(system, &package.apply_pi(system, f, Direction::Forward)?)
        };
        let lhs = gp(&system.apply_operator(&phi, 1)?)?;
        let rhs = package.weighted_backward_shift(system, &gp(&phi)?)?;
        g2 = g2.max(sequence_deviation(&lhs, &rhs));
    }
    Ok(FactorReport {
        samples,
        seed,
        gamma_max_deviation: g1,
        gamma_pi_max_deviation: g2,
        passed: g1 <= FACTOR_TOLERANCE && g2 <= FACTOR_TOLERANCE,
    })
}

/// `nu(B)` by summing `mu_n(B ∩ f^{-n}(W))` over `n`, without `transport`.
pub fn nu_by_measures(system: &AtomicSystem, wandering_set: &[AtomId], atoms: &[AtomId]) -> Result<Magnitude> {
    let wandering = Wandering::new(system, wandering_set)?;
    let mut by_step: BTreeMap<i64, Vec<AtomId>> = BTreeMap::new();
    for &x in atoms {
        by_step.entry(wandering.steps(x)).or_default().push(x);
    }
    let mut total = Magnitude::zero();
    for (n, set) in by_step {
        total = total.add(&system.mu_n_magnitude(&set, n)?);
    }
    Ok(total)
}
