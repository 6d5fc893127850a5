//! Reference computations used by the integration tests. Everything here
//! works from raw weights and masses with plain `f64` products and sums, so
//! it shares no arithmetic with the library under test.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use opdyn_core::io::parse_document;
use opdyn_core::{AtomId, AtomicSystem, Orbit, Scalar, ScalarField, TailSpec};
use rand::Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn fixture_text(name: &str) -> String {
    let path = fixture_dir().join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn load(name: &str) -> AtomicSystem {
    parse_document(&fixture_text(name))
        .unwrap_or_else(|e| panic!("{name}: {e}"))
        .system
}

/// Every fixture that is expected to parse, by file name.
pub fn bundled() -> Vec<(String, AtomicSystem)> {
    let mut names: Vec<String> = std::fs::read_dir(fixture_dir())
        .expect("fixture directory")
        .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json") && !n.starts_with("neg_"))
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), load(&n))).collect()
}

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Relative distance between `exp(a)` and `exp(b)` times phases, given as
/// log-modulus and argument, without forming the possibly huge values.
pub fn rel_polar(ln_a: f64, arg_a: f64, ln_b: f64, arg_b: f64) -> f64 {
    if ln_a == f64::NEG_INFINITY && ln_b == f64::NEG_INFINITY {
        return 0.0;
    }
    let top = ln_a.max(ln_b);
    let x = Complex64::from_polar((ln_a - top).exp(), arg_a);
    let y = Complex64::from_polar((ln_b - top).exp(), arg_b);
    (x - y).norm()
}

fn weight(system: &AtomicSystem, x: AtomId) -> Complex64 {
    system.weight(x).expect("atom").to_complex()
}

/// `w^(n)(x)` as (ln modulus, argument) by walking the orbit one atom at a
/// time. Returns `None` when a needed preimage is missing.
pub fn cocycle_direct(system: &AtomicSystem, x: AtomId, n: i64) -> Option<(f64, f64)> {
    let (mut ln, mut arg) = (0.0f64, 0.0f64);
    if n >= 0 {
        let mut y = x;
        for _ in 0..n {
            let w = weight(system, y);
            ln += w.norm().ln();
            arg += w.arg();
            y = system.iterate(y, 1)?;
        }
    } else {
        let mut y = x;
        for _ in 0..-n {
            y = system.iterate(y, -1)?;
            let w = weight(system, y);
            ln -= w.norm().ln();
            arg -= w.arg();
        }
    }
    Some((ln, arg))
}

pub fn mass(system: &AtomicSystem, x: AtomId) -> f64 {
    let m = system.mass(x).expect("atom");
    m.numer().to_f64().expect("finite") / m.denom().to_f64().expect("finite")
}

/// `ln mu_n(f^{-n}(B))` summed atom by atom.
pub fn ln_mu_n_direct(system: &AtomicSystem, b: &[AtomId], n: i64) -> f64 {
    let p = system.p().value();
    let mut total = 0.0f64;
    let mut top = f64::NEG_INFINITY;
    let mut terms = Vec::new();
    for &y in b {
        let Some(x) = system.iterate(y, -n) else { continue };
        let Some((ln, _)) = cocycle_direct(system, x, n) else { continue };
        let t = p * ln + mass(system, x).ln();
        top = top.max(t);
        terms.push(t);
    }
    if terms.is_empty() || top == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    for t in terms {
        total += (t - top).exp();
    }
    top + total.ln()
}

const WEIGHT_SET: [(i64, i64); 5] = [(1, 2), (1, 1), (2, 1), (3, 1), (1, 3)];
const MASS_SET: [(i64, i64); 4] = [(1, 2), (1, 1), (2, 1), (3, 2)];

pub fn random_weight<R: Rng>(rng: &mut R) -> (i64, i64) {
    WEIGHT_SET[rng.gen_range(0..WEIGHT_SET.len())]
}

fn random_mass<R: Rng>(rng: &mut R) -> BigRational {
    let (n, d) = MASS_SET[rng.gen_range(0..MASS_SET.len())];
    q(n, d)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GenOptions {
    pub cycles: bool,
    pub unilateral: bool,
    pub unit_masses: bool,
    pub float: bool,
    pub complex: bool,
}

fn to_scalar<R: Rng>(rng: &mut R, (n, d): (i64, i64), opts: GenOptions) -> Scalar {
    if opts.complex {
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = n as f64 / d as f64;
        Scalar::complex(r * theta.cos(), r * theta.sin())
    } else if opts.float {
        Scalar::real(n as f64 / d as f64)
    } else {
        Scalar::rational(n, d)
    }
}

pub fn random_tail<R: Rng>(rng: &mut R, opts: GenOptions) -> TailSpec {
    let period = rng.gen_range(1..=3);
    let transient_len = rng.gen_range(0..=3);
    let mut m = || if opts.unit_masses { BigRational::one() } else { random_mass(rng) };
    let masses: Vec<BigRational> = (0..period).map(|_| m()).collect();
    let transient_masses: Vec<BigRational> = (0..transient_len).map(|_| m()).collect();
    let ratio = if opts.unit_masses {
        BigRational::one()
    } else {
        [q(1, 2), q(1, 1), q(2, 1)][rng.gen_range(0..3)].clone()
    };
    let transient = transient_masses
        .into_iter()
        .map(|m| {
            let w = random_weight(rng);
            (to_scalar(rng, w, opts), m)
        })
        .collect();
    let weights = (0..period)
        .map(|_| {
            let w = random_weight(rng);
            to_scalar(rng, w, opts)
        })
        .collect();
    TailSpec::new(transient, weights, masses, ratio).expect("valid tail")
}

pub fn random_orbit<R: Rng>(rng: &mut R, opts: GenOptions) -> Orbit {
    let roll = rng.gen_range(0..10);
    if opts.cycles && roll < 2 {
        let len = rng.gen_range(1..=4);
        let mut weights = Vec::new();
        for _ in 0..len {
            let w = random_weight(rng);
            weights.push(to_scalar(rng, w, opts));
        }
        let masses = if opts.unit_masses {
            vec![BigRational::one(); len]
        } else {
            (0..len).map(|_| random_mass(rng)).collect()
        };
        return Orbit::cycle(len, TailSpec::new(vec![], weights, masses, BigRational::one()).expect("tail"));
    }
    if opts.unilateral && roll == 2 {
        return Orbit::unilateral(random_tail(rng, opts));
    }
    let mut o = Orbit::bilateral(random_tail(rng, opts), random_tail(rng, opts));
    if rng.gen_bool(0.3) {
        let pos = rng.gen_range(-4..=4);
        let w = random_weight(rng);
        let m = if opts.unit_masses { BigRational::one() } else { random_mass(rng) };
        o = o.with_override(pos, to_scalar(rng, w, opts), m);
    }
    o
}

pub fn random_system<R: Rng>(rng: &mut R, opts: GenOptions) -> AtomicSystem {
    let count = rng.gen_range(1..=2);
    let orbits = (0..count).map(|_| random_orbit(rng, opts)).collect();
    let p = [1.0, 2.0, 3.0][rng.gen_range(0..3)];
    let s = AtomicSystem::new(orbits, p).expect("system");
    if opts.complex {
        s.with_field(ScalarField::Complex).expect("field")
    } else {
        s
    }
}

/// Random finite atom set with positions in `[-radius, radius]`.
pub fn random_set<R: Rng>(rng: &mut R, system: &AtomicSystem, radius: i64, max: usize) -> Vec<AtomId> {
    let mut out = Vec::new();
    while out.is_empty() {
        for _ in 0..rng.gen_range(1..=max) {
            let o = rng.gen_range(0..system.orbits().len());
            if let Some(a) = system.atom(o, rng.gen_range(-radius..=radius)) {
                out.push(a);
            }
        }
        out.sort();
        out.dedup();
    }
    out
}

/// A pure bilateral shift with unit masses: explicit weights on
/// `[-t, t)`, a forward period from `t` on and a backward period below `-t`.
#[derive(Clone, Debug)]
pub struct ShiftSpec {
    pub t: i64,
    pub center: BTreeMap<i64, (i64, i64)>,
    pub forward: Vec<(i64, i64)>,
    pub backward: Vec<(i64, i64)>,
    pub p: f64,
}

impl ShiftSpec {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let t = rng.gen_range(0..=4);
        let center = (-t..t).map(|k| (k, random_weight(rng))).collect();
        let forward = (0..rng.gen_range(1..=4)).map(|_| random_weight(rng)).collect();
        let backward = (0..rng.gen_range(1..=4)).map(|_| random_weight(rng)).collect();
        let p = [1.0, 2.0][rng.gen_range(0..2)];
        ShiftSpec { t, center, forward, backward, p }
    }

    /// `|w_k|`.
    pub fn w(&self, k: i64) -> f64 {
        let (n, d) = if let Some(&v) = self.center.get(&k) {
            v
        } else if k >= self.t {
            self.forward[(k - self.t) as usize % self.forward.len()]
        } else {
            self.backward[(-self.t - 1 - k) as usize % self.backward.len()]
        };
        n as f64 / d as f64
    }

    pub fn system(&self) -> AtomicSystem {
        let one = BigRational::one;
        let s = |(n, d): (i64, i64)| Scalar::rational(n, d);
        let fwd_transient = (0..self.t).map(|k| (s(self.center[&k]), one())).collect();
        let bwd_transient = (1..=self.t).map(|j| (s(self.center[&-j]), one())).collect();
        let tail = |transient, weights: &[(i64, i64)]| {
            TailSpec::new(
                transient,
                weights.iter().map(|&w| s(w)).collect(),
                vec![one(); weights.len()],
                one(),
            )
            .expect("tail")
        };
        let orbit = Orbit::bilateral(tail(fwd_transient, &self.forward), tail(bwd_transient, &self.backward));
        AtomicSystem::new(vec![orbit], self.p).expect("system")
    }
}

/// Horizon and threshold of the shift oracle. Weights come from a set whose
/// nonzero block rates exceed 0.07 per step, so `SUP_HORIZON` steps separate
/// growth from boundedness by many orders of magnitude. The uniform check
/// scans blocks far enough out that some lie entirely in one periodic tail.
const SUP_HORIZON: i64 = 2000;
const UNIFORM_HORIZON: i64 = 600;
const UNIFORM_SPREAD: i64 = 1000;
const LN_THRESHOLD: f64 = 13.815_510_557_964_274; // ln 1e6

/// `sup_n |w_{-n} ... w_{-1}| = inf` or `sup_n |w_1 ... w_n|^{-1} = inf`.
pub fn shift_expansive(spec: &ShiftSpec) -> bool {
    let (mut fwd, mut bwd) = (0.0f64, 0.0f64);
    let (mut best_f, mut best_b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for n in 1..=SUP_HORIZON {
        fwd += spec.w(-n).ln();
        bwd -= spec.w(n).ln();
        best_f = best_f.max(fwd);
        best_b = best_b.max(bwd);
    }
    best_f > LN_THRESHOLD || best_b > LN_THRESHOLD
}

/// Cesàro means of the same products are unbounded in one direction.
pub fn shift_average_expansive(spec: &ShiftSpec) -> bool {
    let (mut fwd, mut bwd) = (0.0f64, 0.0f64);
    let (mut sum_f, mut sum_b) = (0.0f64, 0.0f64);
    let mut best = 0.0f64;
    for n in 1..=SUP_HORIZON {
        fwd += spec.w(-n).ln();
        bwd -= spec.w(n).ln();
        // the mean is at least the last term over n
        if fwd.max(bwd) > LN_THRESHOLD + (SUP_HORIZON as f64).ln() {
            return true;
        }
        sum_f += fwd.exp();
        sum_b += bwd.exp();
        best = best.max(sum_f.max(sum_b) / n as f64);
    }
    best.ln() > LN_THRESHOLD
}

/// `lim_n inf_{k in I} |w_{k-n+1} ... w_k| = inf` and
/// `lim_n inf_{k in J} |w_{k+1} ... w_{k+n}|^{-1} = inf` for one of the
/// partitions `(empty, Z)`, `(Z, empty)`, `(-N, N_0)`.
pub fn shift_uniform_expansive(spec: &ShiftSpec) -> bool {
    let n = UNIFORM_HORIZON;
    let r = UNIFORM_SPREAD;
    // prefix[i] = ln |w_lo ... w_{lo+i-1}|
    let lo = -r - n;
    let mut prefix = vec![0.0];
    for k in lo..=r + n {
        prefix.push(prefix.last().unwrap() + spec.w(k).ln());
    }
    let product = |a: i64, b: i64| prefix[(b - lo + 1) as usize] - prefix[(a - lo) as usize];
    let inf_forward =
        |ks: std::ops::RangeInclusive<i64>| ks.map(|k| product(k - n + 1, k)).fold(f64::INFINITY, f64::min);
    let inf_backward =
        |ks: std::ops::RangeInclusive<i64>| ks.map(|k| -product(k + 1, k + n)).fold(f64::INFINITY, f64::min);
    let all_backward = inf_backward(-r..=r) > LN_THRESHOLD;
    let all_forward = inf_forward(-r..=r) > LN_THRESHOLD;
    let split = inf_forward(-r..=-1) > LN_THRESHOLD && inf_backward(0..=r) > LN_THRESHOLD;
    all_backward || all_forward || split
}

/// `nu({x}) = |w^(n)(x)|^p mu({x})` for `x` in `f^{-n}(W)`, from raw data.
pub fn nu_direct(system: &AtomicSystem, rep: AtomId, x: AtomId) -> f64 {
    let n = rep.position - x.position;
    let (ln, _) = cocycle_direct(system, x, n).expect("bilateral chain");
    (system.p().value() * ln).exp() * mass(system, x)
}
