//! Weighted measurable systems on countable atomic spaces.
//!
//! A system is a finite list of orbits of the map `f`. Each orbit is a
//! bilateral chain (`f(n) = n + 1` on `Z`), a cycle (`f(n) = n + 1 mod L`) or
//! a unilateral chain (`f(n) = n + 1` on `N_0`, injective but not onto). Every
//! atom carries a weight `w(x)` and a positive rational mass `mu({x})`.
//!
//! Orbit data is finitely presented: a transient prefix followed by a periodic
//! block whose masses are rescaled by a fixed ratio once per period, plus an
//! optional table of per-position overrides. This makes every asymptotic
//! question about the system answerable from finitely many numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{ln_rational, log_sum_exp, Exponent, LogScalar, Magnitude, Scalar};

/// An atom, addressed by its orbit and its coordinate along the orbit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId {
    pub orbit: usize,
    pub position: i64,
}

impl AtomId {
    pub fn new(orbit: usize, position: i64) -> Self {
        AtomId { orbit, position }
    }
}

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.orbit, self.position)
    }
}

impl FromStr for AtomId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::schema("atom", format!("expected `orbit:position`, got `{s}`"));
        let (o, p) = s.split_once(':').ok_or_else(bad)?;
        Ok(AtomId {
            orbit: o.trim().parse().map_err(|_| bad())?,
            position: p.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    BilateralChain,
    Cycle { length: usize },
    UnilateralChain,
}

impl MapKind {
    pub fn is_bijective(&self) -> bool {
        !matches!(self, MapKind::UnilateralChain)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScalarField {
    #[default]
    Real,
    Complex,
}

/// Eventually periodic presentation of weights and masses along one tail.
///
/// Entry `k` is `transient[k]` for `k < transient.len()`; beyond that it is
/// `(periodic_weights[r], periodic_masses[r] * mass_ratio^q)` with
/// `k - transient.len() = q * period + r`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailSpec {
    transient: Vec<(Scalar, BigRational)>,
    periodic_weights: Vec<Scalar>,
    periodic_masses: Vec<BigRational>,
    mass_ratio: BigRational,
}

impl TailSpec {
    pub fn new(
        transient: Vec<(Scalar, BigRational)>,
        periodic_weights: Vec<Scalar>,
        periodic_masses: Vec<BigRational>,
        mass_ratio: BigRational,
    ) -> Result<Self> {
        if periodic_weights.is_empty() {
            return Err(Error::schema("period", "must be positive"));
        }
        if periodic_masses.len() != periodic_weights.len() {
            return Err(Error::schema(
                "periodic_masses",
                format!(
                    "length {} differs from period {}",
                    periodic_masses.len(),
                    periodic_weights.len()
                ),
            ));
        }
        if !mass_ratio.is_positive() {
            return Err(Error::schema("mass_ratio", "must be positive"));
        }
        if periodic_masses.iter().any(|m| !m.is_positive()) {
            return Err(Error::schema("periodic_masses", "masses must be positive"));
        }
        if transient.iter().any(|(_, m)| !m.is_positive()) {
            return Err(Error::schema("transient", "masses must be positive"));
        }
        Ok(TailSpec {
            transient,
            periodic_weights,
            periodic_masses,
            mass_ratio,
        })
    }

    /// Constant weight `w` and constant mass `m`.
    pub fn constant(w: Scalar, m: BigRational) -> Self {
        TailSpec::new(Vec::new(), vec![w], vec![m], BigRational::one()).expect("valid constant tail")
    }

    /// Periodic weights with unit masses.
    pub fn periodic(weights: Vec<Scalar>) -> Result<Self> {
        let masses = vec![BigRational::one(); weights.len()];
        TailSpec::new(Vec::new(), weights, masses, BigRational::one())
    }

    pub fn with_transient(mut self, transient: Vec<(Scalar, BigRational)>) -> Result<Self> {
        if transient.iter().any(|(_, m)| !m.is_positive()) {
            return Err(Error::schema("transient", "masses must be positive"));
        }
        self.transient = transient;
        Ok(self)
    }

    pub fn with_mass_ratio(mut self, ratio: BigRational) -> Result<Self> {
        if !ratio.is_positive() {
            return Err(Error::schema("mass_ratio", "must be positive"));
        }
        self.mass_ratio = ratio;
        Ok(self)
    }

    pub fn transient(&self) -> &[(Scalar, BigRational)] {
        &self.transient
    }

    pub fn period(&self) -> usize {
        self.periodic_weights.len()
    }

    pub fn periodic_weights(&self) -> &[Scalar] {
        &self.periodic_weights
    }

    pub fn periodic_masses(&self) -> &[BigRational] {
        &self.periodic_masses
    }

    pub fn mass_ratio(&self) -> &BigRational {
        &self.mass_ratio
    }

    fn split(&self, k: u64) -> std::result::Result<usize, (u64, usize)> {
        let t = self.transient.len() as u64;
        if k < t {
            Ok(k as usize)
        } else {
            let j = k - t;
            let p = self.period() as u64;
            Err((j / p, (j % p) as usize))
        }
    }

    pub fn weight_at(&self, k: u64) -> &Scalar {
        match self.split(k) {
            Ok(i) => &self.transient[i].0,
            Err((_, r)) => &self.periodic_weights[r],
        }
    }

    pub fn mass_at(&self, k: u64) -> BigRational {
        match self.split(k) {
            Ok(i) => self.transient[i].1.clone(),
            Err((q, r)) => {
                let scale = pow_rational(&self.mass_ratio, q);
                &self.periodic_masses[r] * scale
            }
        }
    }

    pub fn ln_mass_at(&self, k: u64) -> f64 {
        match self.split(k) {
            Ok(i) => ln_rational(&self.transient[i].1),
            Err((q, r)) => {
                ln_rational(&self.periodic_masses[r]) + q as f64 * ln_rational(&self.mass_ratio)
            }
        }
    }

    fn weights(&self) -> impl Iterator<Item = &Scalar> {
        self.transient.iter().map(|(w, _)| w).chain(self.periodic_weights.iter())
    }
}

fn pow_rational(r: &BigRational, q: u64) -> BigRational {
    if r.is_one() {
        return BigRational::one();
    }
    num_traits::pow(r.clone(), q as usize)
}

/// One orbit of `f` with its weight and mass presentation.
#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    kind: MapKind,
    forward: TailSpec,
    backward: Option<TailSpec>,
    overrides: BTreeMap<i64, (Scalar, BigRational)>,
}

impl Orbit {
    /// Chain over `Z`: `forward` covers positions `0, 1, ...`, `backward`
    /// covers positions `-1, -2, ...`.
    pub fn bilateral(forward: TailSpec, backward: TailSpec) -> Self {
        Orbit {
            kind: MapKind::BilateralChain,
            forward,
            backward: Some(backward),
            overrides: BTreeMap::new(),
        }
    }

    /// Cycle of the given length; positions `0..length` read entries of `tail`.
    pub fn cycle(length: usize, tail: TailSpec) -> Self {
        Orbit {
            kind: MapKind::Cycle { length },
            forward: tail,
            backward: None,
            overrides: BTreeMap::new(),
        }
    }

    pub fn unilateral(forward: TailSpec) -> Self {
        Orbit {
            kind: MapKind::UnilateralChain,
            forward,
            backward: None,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, position: i64, weight: Scalar, mass: BigRational) -> Self {
        self.overrides.insert(position, (weight, mass));
        self
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn forward(&self) -> &TailSpec {
        &self.forward
    }

    pub fn backward(&self) -> Option<&TailSpec> {
        self.backward.as_ref()
    }

    pub fn overrides(&self) -> &BTreeMap<i64, (Scalar, BigRational)> {
        &self.overrides
    }

    fn check(&self, index: usize) -> Result<()> {
        let field = |f: &str| format!("orbits[{index}].{f}");
        match self.kind {
            MapKind::BilateralChain if self.backward.is_none() => {
                return Err(Error::schema(field("backward"), "required for a bilateral chain"));
            }
            MapKind::Cycle { .. } | MapKind::UnilateralChain if self.backward.is_some() => {
                return Err(Error::schema(field("backward"), "only bilateral chains have a backward tail"));
            }
            MapKind::Cycle { length: 0 } => {
                return Err(Error::schema(field("kind"), "cycle length must be positive"));
            }
            _ => {}
        }
        for (&pos, (_, m)) in &self.overrides {
            if !m.is_positive() {
                return Err(Error::schema(field("overrides"), format!("mass at {pos} must be positive")));
            }
            let in_range = match self.kind {
                MapKind::BilateralChain => true,
                MapKind::Cycle { length } => pos >= 0 && (pos as usize) < length,
                MapKind::UnilateralChain => pos >= 0,
            };
            if !in_range {
                return Err(Error::schema(field("overrides"), format!("position {pos} is not on this orbit")));
            }
        }
        Ok(())
    }

    /// Canonical representative of a position (cycles reduce mod length).
    pub fn normalize(&self, position: i64) -> Option<i64> {
        match self.kind {
            MapKind::BilateralChain => Some(position),
            MapKind::Cycle { length } => Some(position.rem_euclid(length as i64)),
            MapKind::UnilateralChain => (position >= 0).then_some(position),
        }
    }

    fn tail_index(&self, position: i64) -> (&TailSpec, u64) {
        if position >= 0 {
            (&self.forward, position as u64)
        } else {
            let back = self.backward.as_ref().expect("negative positions only on bilateral chains");
            (back, (-position - 1) as u64)
        }
    }

    /// Weight at a normalized position.
    pub fn weight(&self, position: i64) -> &Scalar {
        if let Some((w, _)) = self.overrides.get(&position) {
            return w;
        }
        let (tail, k) = self.tail_index(position);
        tail.weight_at(k)
    }

    /// Mass at a normalized position.
    pub fn mass(&self, position: i64) -> BigRational {
        if let Some((_, m)) = self.overrides.get(&position) {
            return m.clone();
        }
        let (tail, k) = self.tail_index(position);
        tail.mass_at(k)
    }

    pub fn ln_mass(&self, position: i64) -> f64 {
        if let Some((_, m)) = self.overrides.get(&position) {
            return ln_rational(m);
        }
        let (tail, k) = self.tail_index(position);
        tail.ln_mass_at(k)
    }

    /// `(b, a)` such that every position `>= a` is generated by the periodic
    /// block of the forward tail and every position `<= b` by the periodic
    /// block of the backward tail, with no overrides beyond either bound.
    pub fn regular_bounds(&self) -> (i64, i64) {
        let tf = self.forward.transient.len() as i64;
        let tb = self.backward.as_ref().map_or(0, |b| b.transient.len() as i64);
        let max_override = self.overrides.keys().next_back().copied();
        let min_override = self.overrides.keys().next().copied();
        let a = max_override.map_or(tf, |m| tf.max(m + 1));
        let b = min_override.map_or(-tb - 1, |m| (-tb - 1).min(m - 1));
        (b, a)
    }

    /// A finite set of positions on which every local pattern of the orbit
    /// (weights and adjacent mass ratios) already occurs.
    pub fn scan_window(&self) -> Vec<i64> {
        match self.kind {
            MapKind::Cycle { length } => (0..length as i64).collect(),
            MapKind::UnilateralChain => {
                let (_, a) = self.regular_bounds();
                (0..=a + 2 * self.forward.period() as i64 + 1).collect()
            }
            MapKind::BilateralChain => {
                let (b, a) = self.regular_bounds();
                let pb = self.backward.as_ref().map_or(1, |t| t.period()) as i64;
                let pf = self.forward.period() as i64;
                (b - 2 * pb - 1..=a + 2 * pf + 1).collect()
            }
        }
    }

    fn all_weights(&self) -> impl Iterator<Item = &Scalar> {
        self.forward
            .weights()
            .chain(self.backward.iter().flat_map(|b| b.weights()))
            .chain(self.overrides.values().map(|(w, _)| w))
    }
}

/// A weighted `p`-measurable system on a countable atomic space.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicSystem {
    orbits: Vec<Orbit>,
    p: Exponent,
    field: ScalarField,
    invertible_claim: Option<bool>,
}

impl AtomicSystem {
    pub fn new(orbits: Vec<Orbit>, p: f64) -> Result<Self> {
        let p = Exponent::new(p).ok_or_else(|| Error::schema("p", "must be a finite real >= 1"))?;
        if orbits.is_empty() {
            return Err(Error::schema("orbits", "at least one orbit is required"));
        }
        for (i, o) in orbits.iter().enumerate() {
            o.check(i)?;
        }
        let field = if orbits.iter().flat_map(|o| o.all_weights()).all(Scalar::is_real) {
            ScalarField::Real
        } else {
            ScalarField::Complex
        };
        Ok(AtomicSystem {
            orbits,
            p,
            field,
            invertible_claim: None,
        })
    }

    /// Declares the scalar field. A real field rejects complex weights.
    pub fn with_field(mut self, field: ScalarField) -> Result<Self> {
        if field == ScalarField::Real && self.field == ScalarField::Complex {
            return Err(Error::schema("field", "complex weights in a real system"));
        }
        self.field = field;
        Ok(self)
    }

    /// Records whether the caller claims `C_{w,f}` is invertible.
    pub fn with_invertible_claim(mut self, claim: Option<bool>) -> Self {
        self.invertible_claim = claim;
        self
    }

    pub fn orbits(&self) -> &[Orbit] {
        &self.orbits
    }

    pub fn orbit(&self, index: usize) -> Result<&Orbit> {
        self.orbits
            .get(index)
            .ok_or_else(|| Error::PreconditionFailed(format!("no orbit {index}")))
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn field(&self) -> ScalarField {
        self.field
    }

    pub fn invertible_claim(&self) -> Option<bool> {
        self.invertible_claim
    }

    /// True when every weight is an exact rational.
    pub fn has_exact_weights(&self) -> bool {
        self.orbits.iter().flat_map(|o| o.all_weights()).all(Scalar::is_exact)
    }

    /// Exact weights and an integer exponent: all `p`-th powers stay rational.
    pub fn is_exact(&self) -> bool {
        self.has_exact_weights() && self.p.as_integer().is_some()
    }

    /// Converts every weight to an exact rational (floats convert exactly).
    pub fn to_exact(&self) -> Result<Self> {
        let conv = |w: &Scalar| -> Result<Scalar> {
            match w {
                Scalar::Exact(_) => Ok(w.clone()),
                Scalar::Float(c) if c.im == 0.0 => crate::scalar::f64_to_rational(c.re)
                    .map(Scalar::Exact)
                    .ok_or_else(|| Error::schema("weights", "non-finite weight")),
                Scalar::Float(_) => Err(Error::schema("weights", "complex weights have no exact form")),
            }
        };
        let conv_tail = |t: &TailSpec| -> Result<TailSpec> {
            TailSpec::new(
                t.transient
                    .iter()
                    .map(|(w, m)| Ok((conv(w)?, m.clone())))
                    .collect::<Result<_>>()?,
                t.periodic_weights.iter().map(conv).collect::<Result<_>>()?,
                t.periodic_masses.clone(),
                t.mass_ratio.clone(),
            )
        };
        let mut out = self.clone();
        for o in &mut out.orbits {
            o.forward = conv_tail(&o.forward)?;
            if let Some(b) = &o.backward {
                o.backward = Some(conv_tail(b)?);
            }
            for v in o.overrides.values_mut() {
                v.0 = conv(&v.0)?;
            }
        }
        Ok(out)
    }

    pub fn contains(&self, atom: AtomId) -> bool {
        self.orbits
            .get(atom.orbit)
            .and_then(|o| o.normalize(atom.position))
            .is_some_and(|p| p == atom.position)
    }

    fn check_atom(&self, atom: AtomId) -> Result<&Orbit> {
        if !self.contains(atom) {
            return Err(Error::PreconditionFailed(format!("atom {atom} is not in the system")));
        }
        Ok(&self.orbits[atom.orbit])
    }

    /// Normalizes an atom (reduces cycle positions); `None` when it does not exist.
    pub fn atom(&self, orbit: usize, position: i64) -> Option<AtomId> {
        let p = self.orbits.get(orbit)?.normalize(position)?;
        Some(AtomId::new(orbit, p))
    }

    pub fn weight(&self, atom: AtomId) -> Result<&Scalar> {
        Ok(self.check_atom(atom)?.weight(atom.position))
    }

    pub fn mass(&self, atom: AtomId) -> Result<BigRational> {
        Ok(self.check_atom(atom)?.mass(atom.position))
    }

    pub fn ln_mass(&self, atom: AtomId) -> Result<f64> {
        Ok(self.check_atom(atom)?.ln_mass(atom.position))
    }

    /// `f^n(x)` for `n` in `Z`; `None` when the preimage does not exist
    /// (before the head of a unilateral chain).
    pub fn iterate(&self, atom: AtomId, n: i64) -> Option<AtomId> {
        let orbit = self.orbits.get(atom.orbit)?;
        let p = orbit.normalize(atom.position.checked_add(n)?)?;
        Some(AtomId::new(atom.orbit, p))
    }

    pub fn f(&self, atom: AtomId) -> AtomId {
        self.iterate(atom, 1).expect("f is defined everywhere")
    }

    pub fn has_unilateral(&self) -> bool {
        self.orbits.iter().any(|o| o.kind == MapKind::UnilateralChain)
    }

    /// First atom (in scan order) carrying a zero weight.
    pub fn zero_weight_atom(&self) -> Option<AtomId> {
        self.orbits.iter().enumerate().find_map(|(i, o)| {
            o.scan_window()
                .into_iter()
                .find(|&pos| o.weight(pos).is_zero())
                .map(|pos| AtomId::new(i, pos))
        })
    }

    /// Whether `C_{w,f}` is treated as invertible: the explicit claim when one
    /// was made, otherwise bijective `f` with a zero-free weight.
    pub fn is_invertible(&self) -> bool {
        match self.invertible_claim {
            Some(claim) => claim && !self.has_unilateral(),
            None => !self.has_unilateral() && self.zero_weight_atom().is_none(),
        }
    }

    pub fn require_invertible(&self) -> Result<()> {
        if let Some(i) = self.orbits.iter().position(|o| o.kind == MapKind::UnilateralChain) {
            return Err(Error::NonInvertibleMap { orbit: i });
        }
        if let Some(atom) = self.zero_weight_atom() {
            return Err(Error::ZeroWeight { atom });
        }
        if self.invertible_claim == Some(false) {
            return Err(Error::NonInvertible {
                reason: "system declared non-invertible".into(),
            });
        }
        Ok(())
    }

    /// `w^(n)(x)` in log-modulus/phase form. `w^(0) = 1`.
    pub fn cocycle(&self, atom: AtomId, n: i64) -> Result<LogScalar> {
        let orbit = self.check_atom(atom)?;
        let mut acc = LogScalar::one();
        if n >= 0 {
            for j in 0..n {
                let pos = orbit.normalize(atom.position + j).expect("forward orbit exists");
                acc = acc.mul(&LogScalar::from_scalar(orbit.weight(pos)));
            }
        } else {
            if orbit.kind == MapKind::UnilateralChain {
                return Err(Error::NonInvertibleMap { orbit: atom.orbit });
            }
            for j in 1..=-n {
                let pos = orbit.normalize(atom.position - j).expect("bijective orbit");
                let w = orbit.weight(pos);
                let inv = LogScalar::from_scalar(w).inv().ok_or(Error::ZeroWeight {
                    atom: AtomId::new(atom.orbit, pos),
                })?;
                acc = acc.mul(&inv);
            }
        }
        Ok(acc)
    }

    /// `w^(n)(x)` as an exact rational, when every weight involved is exact.
    pub fn cocycle_exact(&self, atom: AtomId, n: i64) -> Result<Option<BigRational>> {
        let orbit = self.check_atom(atom)?;
        let mut acc = BigRational::one();
        let positions: Vec<i64> = if n >= 0 {
            (0..n).map(|j| atom.position + j).collect()
        } else {
            if orbit.kind == MapKind::UnilateralChain {
                return Err(Error::NonInvertibleMap { orbit: atom.orbit });
            }
            (1..=-n).map(|j| atom.position - j).collect()
        };
        for pos in positions {
            let pos = orbit.normalize(pos).expect("orbit position exists");
            let Scalar::Exact(w) = orbit.weight(pos) else {
                return Ok(None);
            };
            if n >= 0 {
                acc *= w;
            } else {
                if w.is_zero() {
                    return Err(Error::ZeroWeight {
                        atom: AtomId::new(atom.orbit, pos),
                    });
                }
                acc /= w;
            }
        }
        Ok(Some(acc))
    }

    /// `w^(n)(x)` as a scalar: exact when possible, otherwise from the log form.
    pub fn cocycle_value(&self, atom: AtomId, n: i64) -> Result<Scalar> {
        if let Some(r) = self.cocycle_exact(atom, n)? {
            return Ok(Scalar::Exact(r));
        }
        Ok(self.cocycle(atom, n)?.to_scalar())
    }

    /// `ln mu_n(B) = ln sum_{x in B} |w^(n)(x)|^p mu({x})`.
    pub fn ln_mu_n(&self, atoms: &[AtomId], n: i64) -> Result<f64> {
        let p = self.p.value();
        let terms = atoms
            .iter()
            .map(|&x| {
                let c = self.cocycle(x, n)?;
                let ln_w = if c.is_zero() { f64::NEG_INFINITY } else { p * c.ln_abs };
                Ok(ln_w + self.ln_mass(x)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(log_sum_exp(terms))
    }

    pub fn mu_n(&self, atoms: &[AtomId], n: i64) -> Result<f64> {
        Ok(self.ln_mu_n(atoms, n)?.exp())
    }

    /// `mu_n(B)`, exact in exact mode.
    pub fn mu_n_magnitude(&self, atoms: &[AtomId], n: i64) -> Result<Magnitude> {
        if self.is_exact() {
            let mut total = Magnitude::zero();
            for &x in atoms {
                let c = Scalar::Exact(self.cocycle_exact(x, n)?.expect("exact weights"));
                total = total.add(&c.abs_pow(self.p).mul(&Magnitude::Exact(self.mass(x)?)));
            }
            return Ok(total);
        }
        Ok(Magnitude::Float(self.mu_n(atoms, n)?))
    }

    /// `f^{-n}(B)` for a finite atom set, dropping atoms without preimage.
    pub fn preimage(&self, atoms: &[AtomId], n: i64) -> Vec<AtomId> {
        let mut out: Vec<AtomId> = atoms.iter().filter_map(|&a| self.iterate(a, -n)).collect();
        out.sort();
        out.dedup();
        out
    }

    /// `(C_{w,f})^n phi`, whose value at `x` is `w^(n)(x) * phi(f^n(x))`.
    pub fn apply_operator(&self, phi: &SampleFunction, n: i64) -> Result<SampleFunction> {
        if n < 0 {
            if let Some(i) = self.orbits.iter().position(|o| o.kind == MapKind::UnilateralChain) {
                return Err(Error::NonInvertibleMap { orbit: i });
            }
        }
        let mut out = BTreeMap::new();
        for (&y, v) in &phi.values {
            self.check_atom(y)?;
            let Some(x) = self.iterate(y, -n) else {
                continue;
            };
            let value = self.cocycle_value(x, n)?.mul(v);
            if !value.is_zero() {
                out.insert(x, value);
            }
        }
        Ok(SampleFunction { values: out })
    }

    /// Pure composition `phi -> phi o f` (the unweighted operator `C_f`).
    pub fn compose(&self, phi: &SampleFunction) -> SampleFunction {
        let values = phi
            .values
            .iter()
            .filter_map(|(&y, v)| self.iterate(y, -1).map(|x| (x, v.clone())))
            .collect();
        SampleFunction { values }
    }
}

/// Least constants making `C_{w,f}` (and its inverse) bounded on `L^p(mu)`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct BoundednessCertificate {
    pub c: Magnitude,
    pub c_witness: AtomId,
    pub c_tilde: Option<Magnitude>,
    pub c_tilde_witness: Option<AtomId>,
}

fn best(candidates: impl Iterator<Item = (AtomId, Magnitude)>) -> Option<(AtomId, Magnitude)> {
    let key = |a: &AtomId| (a.position.unsigned_abs(), a.orbit, a.position);
    candidates.fold(None, |acc, (atom, m)| match acc {
        None => Some((atom, m)),
        Some((ba, bm)) => {
            let (mv, bv) = (m.to_f64(), bm.to_f64());
            let better = match (&m, &bm) {
                (Magnitude::Exact(x), Magnitude::Exact(y)) => x > y || (x == y && key(&atom) < key(&ba)),
                _ => mv > bv || (mv == bv && key(&atom) < key(&ba)),
            };
            if better {
                Some((atom, m))
            } else {
                Some((ba, bm))
            }
        }
    })
}

/// Checks the well-formedness invariants and returns the least per-atom
/// constants `c = sup |w(x)|^p mu({x}) / mu({f(x)})` and, for invertible
/// systems, `c~ = sup |w~(x)|^p mu({x}) / mu({f^{-1}(x)})` with
/// `w~ = 1 / (w o f^{-1})`.
///
/// Per-atom bounds suffice: every measurable set is a countable union of
/// atoms and both sides of the defining inequality are countably additive.
/// The suprema are attained on the scan window because the local ratios are
/// periodic outside it.
pub fn validate(system: &AtomicSystem) -> Result<BoundednessCertificate> {
    for (i, o) in system.orbits.iter().enumerate() {
        for pos in o.scan_window() {
            if !o.weight(pos).is_finite() {
                return Err(Error::UnboundedWeight {
                    atom: AtomId::new(i, pos),
                });
            }
        }
    }
    if system.invertible_claim == Some(true) {
        system.require_invertible()?;
    }
    let invertible = system.is_invertible();
    let p = system.p;

    let atoms: Vec<AtomId> = system
        .orbits
        .iter()
        .enumerate()
        .flat_map(|(i, o)| o.scan_window().into_iter().map(move |pos| AtomId::new(i, pos)))
        .collect();

    let forward_ratio = |x: AtomId| -> Magnitude {
        let o = &system.orbits[x.orbit];
        let fx = system.f(x);
        let w = o.weight(x.position).abs_pow(p);
        let ratio = o.mass(x.position) / o.mass(fx.position);
        w.mul(&Magnitude::Exact(ratio))
    };
    let (c_witness, c) = best(atoms.iter().map(|&x| (x, forward_ratio(x)))).expect("nonempty system");

    let (c_tilde, c_tilde_witness) = if invertible {
        let backward_ratio = |x: AtomId| -> Magnitude {
            let o = &system.orbits[x.orbit];
            let fx_inv = system.iterate(x, -1).expect("bijective");
            let w_inv = o
                .weight(fx_inv.position)
                .inv()
                .expect("zero-free weight")
                .abs_pow(p);
            let ratio = o.mass(x.position) / o.mass(fx_inv.position);
            w_inv.mul(&Magnitude::Exact(ratio))
        };
        let (a, m) = best(atoms.iter().map(|&x| (x, backward_ratio(x)))).expect("nonempty system");
        (Some(m), Some(a))
    } else {
        (None, None)
    };

    Ok(BoundednessCertificate {
        c,
        c_witness,
        c_tilde,
        c_tilde_witness,
    })
}

/// The constant `c~` of the inverse operator; fails on non-invertible maps.
pub fn c_tilde(system: &AtomicSystem) -> Result<(Magnitude, AtomId)> {
    system.require_invertible()?;
    let cert = validate(system)?;
    Ok((cert.c_tilde.expect("invertible"), cert.c_tilde_witness.expect("invertible")))
}

/// A finitely supported function on atoms.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SampleFunction {
    pub values: BTreeMap<AtomId, Scalar>,
}

impl SampleFunction {
    pub fn new() -> Self {
        SampleFunction::default()
    }

    pub fn indicator(atoms: &[AtomId]) -> Self {
        SampleFunction {
            values: atoms.iter().map(|&a| (a, Scalar::one())).collect(),
        }
    }

    pub fn with(mut self, atom: AtomId, value: Scalar) -> Self {
        self.values.insert(atom, value);
        self
    }

    pub fn get(&self, atom: AtomId) -> Scalar {
        self.values.get(&atom).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn support(&self) -> Vec<AtomId> {
        self.values.keys().copied().collect()
    }

    /// `sum |phi(x)|^p m(x)` for an arbitrary atom measure `m`.
    pub fn norm_p_pow_with<F>(&self, p: Exponent, mut measure: F) -> Result<Magnitude>
    where
        F: FnMut(AtomId) -> Result<Magnitude>,
    {
        let mut total = Magnitude::zero();
        for (&x, v) in &self.values {
            total = total.add(&v.abs_pow(p).mul(&measure(x)?));
        }
        Ok(total)
    }

    /// `||phi||_p^p` in `L^p(mu)`.
    pub fn norm_p_pow(&self, system: &AtomicSystem) -> Result<Magnitude> {
        self.norm_p_pow_with(system.p(), |x| Ok(Magnitude::Exact(system.mass(x)?)))
    }

    /// Random function supported on up to `max_support` atoms with positions
    /// in `[-radius, radius]`. Values are small rationals when `exact`,
    /// otherwise uniform floats (complex for complex systems).
    pub fn random<R: Rng>(
        system: &AtomicSystem,
        rng: &mut R,
        radius: i64,
        max_support: usize,
        exact: bool,
    ) -> Self {
        let size = rng.gen_range(1..=max_support.max(1));
        let mut values = BTreeMap::new();
        for _ in 0..size {
            let orbit = rng.gen_range(0..system.orbits.len());
            let pos = rng.gen_range(-radius..=radius);
            let Some(atom) = system.atom(orbit, pos) else {
                continue;
            };
            let value = if exact {
                let num = loop {
                    let n: i64 = rng.gen_range(-9..=9);
                    if n != 0 {
                        break n;
                    }
                };
                Scalar::rational(num, rng.gen_range(1..=9))
            } else if system.field == ScalarField::Complex {
                Scalar::complex(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                Scalar::real(rng.gen_range(-1.0..1.0))
            };
            values.insert(atom, value);
        }
        SampleFunction { values }
    }
}
