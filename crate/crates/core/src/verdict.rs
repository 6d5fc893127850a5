//! Four-valued verdicts and the per-orbit decision rules shared by the
//! `L^p` and sequence-space engines.
//!
//! Every criterion reduces to singleton atoms (each nonempty set contains an
//! atom and the criterion quantities are monotone in the set), and along an
//! orbit the criterion sequences are governed by the two rates of
//! [`OrbitRates`]. A positive rate gives exponential divergence, a negative
//! rate geometric decay, and a zero rate an eventually periodic and hence
//! bounded sequence.
//!
//! For the uniform notion an orbit needs a partition of its atoms into a
//! forward-growing part `I` and a backward-growing part `J`. Atoms far out on
//! the backward tail must sit in `I` (needs `forward > 0`) or `J` (needs
//! `forward < 0`), and atoms far out on the forward tail in `I` (needs
//! `backward < 0`) or `J` (needs `backward > 0`). Of the sign patterns only
//! `(+,-)`, `(-,+)` and `(+,+)` admit a partition; they are realized by
//! `(Z, {})`, `({}, Z)` and `(-N, N_0)` respectively.

use std::fmt;

use serde::Serialize;

use crate::growth::{profile, system_rates, Metric, OrbitRates, ProfilePoint, Sign};
use crate::scalar::log_sum_exp;
use crate::system::{AtomId, AtomicSystem, MapKind};

pub const DEFAULT_HORIZON: u32 = 100;
pub const DEFAULT_THRESHOLD: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ProvenTrue,
    ProvenFalse,
    Indicated,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::ProvenTrue => "ProvenTrue",
            Status::ProvenFalse => "ProvenFalse",
            Status::Indicated => "Indicated",
            Status::Unknown => "Unknown",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    Expansive,
    Average,
    Uniform,
    Positive,
    AveragePositive,
    UniformPositive,
}

impl Notion {
    pub const ALL: [Notion; 6] = [
        Notion::Expansive,
        Notion::Average,
        Notion::Uniform,
        Notion::Positive,
        Notion::AveragePositive,
        Notion::UniformPositive,
    ];

    /// Forward-only notions that do not need an invertible operator.
    pub fn is_positive_variant(self) -> bool {
        matches!(self, Notion::Positive | Notion::AveragePositive | Notion::UniformPositive)
    }

    fn is_average(self) -> bool {
        matches!(self, Notion::Average | Notion::AveragePositive)
    }

    pub fn name(self) -> &'static str {
        match self {
            Notion::Expansive => "expansive",
            Notion::Average => "average",
            Notion::Uniform => "uniform",
            Notion::Positive => "positive",
            Notion::AveragePositive => "average_positive",
            Notion::UniformPositive => "uniform_positive",
        }
    }
}

impl fmt::Display for Notion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Notion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Notion::ALL
            .into_iter()
            .find(|n| n.name() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown notion `{s}`"))
    }
}

/// How an orbit's atoms split between forward and backward growth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Partition {
    /// Every atom grows under forward iteration.
    AllForward,
    /// Every atom grows under backward iteration.
    AllBackward,
    /// Positions below `first_backward` grow forward, the rest backward.
    Split { first_backward: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub atom: AtomId,
    pub n: i64,
    #[serde(serialize_with = "crate::io::serialize_real")]
    pub log10_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub orbit: usize,
    pub kind: String,
    #[serde(serialize_with = "crate::io::serialize_real")]
    pub forward_rate: f64,
    pub forward_sign: Sign,
    #[serde(serialize_with = "crate::io::serialize_real")]
    pub backward_rate: f64,
    pub backward_sign: Sign,
    pub exact: bool,
}

impl RateRow {
    fn from_rates(r: &OrbitRates) -> Self {
        RateRow {
            orbit: r.orbit,
            kind: kind_name(r.kind),
            forward_rate: r.forward.rate(),
            forward_sign: r.forward_sign(),
            backward_rate: r.backward.rate(),
            backward_sign: r.backward_sign(),
            exact: r.forward.is_exact() && r.backward.is_exact(),
        }
    }
}

pub fn kind_name(kind: MapKind) -> String {
    match kind {
        MapKind::BilateralChain => "bilateral".into(),
        MapKind::UnilateralChain => "unilateral".into(),
        MapKind::Cycle { length } => format!("cycle({length})"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomVerdict {
    pub atom: AtomId,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<Partition>,
    pub witness: Witness,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub notion: Notion,
    pub space: String,
    pub status: Status,
    pub horizon: u32,
    pub witness: Option<Witness>,
    pub rates: Vec<RateRow>,
    pub atoms: Vec<AtomVerdict>,
}

impl Verdict {
    /// Partition table for the uniform notions.
    pub fn partition(&self) -> Vec<(usize, Partition)> {
        self.atoms
            .iter()
            .filter_map(|a| a.partition.map(|p| (a.atom.orbit, p)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub horizon: u32,
    pub threshold: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            horizon: DEFAULT_HORIZON,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl AnalysisConfig {
    pub fn with_horizon(horizon: u32) -> Self {
        AnalysisConfig {
            horizon: horizon.max(1),
            ..AnalysisConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Pass(Option<Partition>),
    Fail,
}

/// Decision for one orbit from fully resolved signs.
fn rule(notion: Notion, rates: &OrbitRates, forward: Sign, backward: Sign) -> Outcome {
    use Sign::*;
    let chain_like = !matches!(rates.kind, MapKind::Cycle { .. });
    match notion {
        Notion::Expansive | Notion::Average => {
            if forward == Positive || backward == Positive {
                Outcome::Pass(None)
            } else {
                Outcome::Fail
            }
        }
        Notion::Uniform => match (forward, backward) {
            (Positive, Negative) => Outcome::Pass(Some(Partition::AllForward)),
            (Negative, Positive) => Outcome::Pass(Some(Partition::AllBackward)),
            (Positive, Positive) => Outcome::Pass(Some(Partition::Split { first_backward: 0 })),
            _ => Outcome::Fail,
        },
        Notion::Positive | Notion::AveragePositive | Notion::UniformPositive => {
            if rates.kind == MapKind::UnilateralChain || rates.has_zero_weight || forward != Positive {
                return Outcome::Fail;
            }
            if notion == Notion::UniformPositive && chain_like && backward != Negative {
                return Outcome::Fail;
            }
            let partition = (notion == Notion::UniformPositive).then_some(Partition::AllForward);
            Outcome::Pass(partition)
        }
    }
}

/// Resolves an orbit, trying every concrete sign for an undecided rate; the
/// outcome is proven only when all substitutions agree.
fn decide(notion: Notion, rates: &OrbitRates) -> Option<Outcome> {
    let expand = |s: Sign| -> Vec<Sign> {
        if s == Sign::Ambiguous {
            vec![Sign::Positive, Sign::Negative, Sign::Zero]
        } else {
            vec![s]
        }
    };
    let mut seen: Option<Outcome> = None;
    for f in expand(rates.forward_sign()) {
        for b in expand(rates.backward_sign()) {
            let o = rule(notion, rates, f, b);
            match seen {
                None => seen = Some(o),
                Some(prev) if prev == o => {}
                Some(_) => return None,
            }
        }
    }
    seen
}

fn relevant_points(notion: Notion, points: &[ProfilePoint]) -> Vec<ProfilePoint> {
    points
        .iter()
        .copied()
        .filter(|pt| !notion.is_positive_variant() || pt.n >= 1)
        .collect()
}

/// `ln` of the Cesàro mean of `value_j^{1/power}` over `|j| <= n` (or
/// `1 <= j <= n` for the positive variant).
fn ln_cesaro(notion: Notion, points: &[ProfilePoint], n: i64, power: f64) -> f64 {
    let terms: Vec<f64> = points
        .iter()
        .filter(|pt| pt.n.abs() <= n && (!notion.is_positive_variant() || pt.n >= 1))
        .map(|pt| pt.ln_value / power)
        .collect();
    let count = if notion.is_positive_variant() { n } else { 2 * n + 1 };
    log_sum_exp(terms) - (count as f64).ln()
}

fn witness_for(atom: AtomId, points: &[ProfilePoint]) -> Witness {
    let best = points
        .iter()
        .copied()
        .fold(None::<ProfilePoint>, |acc, pt| match acc {
            Some(a) if a.ln_value >= pt.ln_value => Some(a),
            _ => Some(pt),
        })
        .unwrap_or(ProfilePoint { n: 0, ln_value: 0.0 });
    Witness {
        atom,
        n: best.n,
        log10_value: best.ln_value / std::f64::consts::LN_10,
    }
}

/// Finite-horizon indication: does the criterion exceed `threshold` times
/// its value at `n = 1` within the horizon?
fn horizon_check(notion: Notion, points: &[ProfilePoint], metric: Metric, config: &AnalysisConfig) -> Status {
    let ln_threshold = config.threshold.ln();
    let power = match metric {
        Metric::Lp(p) => p.value(),
        Metric::Sup => 1.0,
    };
    let (reached, baseline) = if notion.is_average() {
        (
            ln_cesaro(notion, points, config.horizon as i64, power),
            ln_cesaro(notion, points, 1, power),
        )
    } else {
        let rel = relevant_points(notion, points);
        let max = rel.iter().map(|p| p.ln_value).fold(f64::NEG_INFINITY, f64::max);
        let at_one = points.iter().find(|p| p.n == 1).map_or(f64::NEG_INFINITY, |p| p.ln_value);
        let at_zero = points.iter().find(|p| p.n == 0).map_or(0.0, |p| p.ln_value);
        (max, if at_one.is_finite() { at_one } else { at_zero })
    };
    if reached > baseline + ln_threshold {
        Status::Indicated
    } else {
        Status::Unknown
    }
}

/// Evaluates `notion` on the given test atoms.
///
/// With `finite_base` the bornology consists of finite sets: a finite `B`
/// meets `f^{-n}{a}` for only finitely many `n` when `a` lies on a chain, so
/// chains never satisfy any notion, while on a cycle `B` may be the whole
/// cycle and the rate rules apply.
pub(crate) fn evaluate(
    system: &AtomicSystem,
    notion: Notion,
    metric: Metric,
    config: &AnalysisConfig,
    atoms: &[AtomId],
    finite_base: bool,
    space: &str,
) -> Verdict {
    let rates = system_rates(system, metric);
    let horizon = config.horizon.max(1) as i64;
    let mut results = Vec::with_capacity(atoms.len());
    for &atom in atoms {
        let r = &rates[atom.orbit];
        let points = profile(system, atom, metric, horizon);
        let witness = witness_for(atom, &relevant_points(notion, &points));
        let is_chain = !matches!(r.kind, MapKind::Cycle { .. });
        let (status, partition) = if finite_base && is_chain {
            (Status::ProvenFalse, None)
        } else {
            match decide(notion, r) {
                Some(Outcome::Pass(partition)) => (Status::ProvenTrue, partition),
                Some(Outcome::Fail) => (Status::ProvenFalse, None),
                None => (horizon_check(notion, &points, metric, config), None),
            }
        };
        let witness = if finite_base && is_chain {
            Witness {
                atom,
                n: 0,
                log10_value: 0.0,
            }
        } else {
            witness
        };
        results.push(AtomVerdict {
            atom,
            status,
            partition,
            witness,
        });
    }
    let status = combine(results.iter().map(|a| a.status));
    let witness = results
        .iter()
        .find(|a| a.status == status)
        .or(results.first())
        .map(|a| a.witness);
    Verdict {
        notion,
        space: space.to_string(),
        status,
        horizon: horizon as u32,
        witness,
        rates: rates.iter().map(RateRow::from_rates).collect(),
        atoms: results,
    }
}

/// Conjunction over atoms: one failure decides, otherwise the weakest
/// positive evidence wins.
pub fn combine(statuses: impl IntoIterator<Item = Status>) -> Status {
    let mut worst = Status::ProvenTrue;
    for s in statuses {
        worst = match (worst, s) {
            (_, Status::ProvenFalse) | (Status::ProvenFalse, _) => Status::ProvenFalse,
            (_, Status::Unknown) | (Status::Unknown, _) => Status::Unknown,
            (_, Status::Indicated) | (Status::Indicated, _) => Status::Indicated,
            _ => Status::ProvenTrue,
        };
    }
    worst
}

/// One representative atom (position 0) per orbit.
pub fn orbit_representatives(system: &AtomicSystem) -> Vec<AtomId> {
    (0..system.orbits().len()).map(|i| AtomId::new(i, 0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_prefers_failure_then_unknown() {
        use Status::*;
        assert_eq!(combine([ProvenTrue, Indicated]), Indicated);
        assert_eq!(combine([Indicated, Unknown]), Unknown);
        assert_eq!(combine([Unknown, ProvenFalse, ProvenTrue]), ProvenFalse);
        assert_eq!(combine([]), ProvenTrue);
    }

    #[test]
    fn notion_names_round_trip() {
        for n in Notion::ALL {
            assert_eq!(n.name().parse::<Notion>().unwrap(), n);
        }
        assert_eq!("average-positive".parse::<Notion>().unwrap(), Notion::AveragePositive);
    }

    #[test]
    fn cesaro_of_constant_profile() {
        let pts: Vec<_> = (-3..=3).map(|n| ProfilePoint { n, ln_value: 0.0 }).collect();
        assert!(ln_cesaro(Notion::Average, &pts, 3, 1.0).abs() < 1e-15);
        assert!(ln_cesaro(Notion::AveragePositive, &pts, 3, 1.0).abs() < 1e-15);
    }
}
