//! JSON system descriptions and wire formats for scalars and atoms.
//!
//! A system file looks like
//!
//! ```json
//! {
//!   "comment": "constant weight 2 on a bilateral chain",
//!   "p": 1,
//!   "field": "real",
//!   "exact": true,
//!   "orbits": [
//!     {
//!       "kind": "bilateral",
//!       "forward":  { "period": 1, "periodic_weights": [2] },
//!       "backward": { "period": 1, "periodic_weights": [2] }
//!     }
//!   ]
//! }
//! ```
//!
//! Orbit kinds are `"bilateral"`, `"unilateral"` or `{"cycle": L}`. A tail
//! has optional `transient` entries `{weight, mass}`, `period`,
//! `periodic_weights`, optional `periodic_masses` (default all 1) and
//! optional `mass_ratio` (default 1). `overrides` maps positions to
//! `{weight, mass}`.
//!
//! Scalar literals are JSON numbers, rational strings such as `"3/4"` or
//! `"-1.5e-2"`, or `{"re": .., "im": ..}`. Strings are always exact. Numbers
//! are exact when `exact` is true and floats otherwise. Masses are always
//! exact rationals.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{Magnitude, Scalar};
use crate::system::{AtomId, AtomicSystem, MapKind, Orbit, ScalarField, TailSpec};

impl Serialize for AtomId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AtomId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        AtomId::from_str(&s).map_err(serde::de::Error::custom)
    }
}

fn rational_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serializes a rational as `"p/q"` (or `"n"` for integers).
pub fn serialize_rational<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational_string(r))
}

/// Serializes a float, writing non-finite values as the strings `"inf"`,
/// `"-inf"` or `"nan"`.
pub fn serialize_real<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    serialize_f64(*x, s)
}

fn serialize_f64<S: Serializer>(x: f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Scalar::Exact(r) => s.serialize_str(&rational_string(r)),
            Scalar::Float(c) if c.im == 0.0 => serialize_f64(c.re, s),
            Scalar::Float(c) => Complex { re: c.re, im: c.im }.serialize(s),
        }
    }
}

impl Serialize for Magnitude {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Magnitude::Exact(r) => s.serialize_str(&rational_string(r)),
            Magnitude::Float(x) => serialize_f64(*x, s),
        }
    }
}

/// Parses `"p/q"`, integers and decimals with optional exponent into an
/// exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(BigInt::from_str(&all_digits).ok()?);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    Some(if negative { -value } else { value })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Complex {
    re: f64,
    im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Literal {
    Number(serde_json::Number),
    Text(String),
    Complex(Complex),
}

impl Literal {
    fn from_scalar(s: &Scalar) -> Literal {
        match s {
            Scalar::Exact(r) => Literal::Text(rational_string(r)),
            Scalar::Float(c) if c.im == 0.0 => match serde_json::Number::from_f64(c.re) {
                Some(n) => Literal::Number(n),
                None => Literal::Text(c.re.to_string()),
            },
            Scalar::Float(c) => Literal::Complex(Complex { re: c.re, im: c.im }),
        }
    }

    fn from_rational(r: &BigRational) -> Literal {
        Literal::Text(rational_string(r))
    }

    fn weight(&self, exact: bool, field: &str) -> Result<Scalar> {
        match self {
            Literal::Number(n) if !exact => n
                .as_f64()
                .map(Scalar::real)
                .ok_or_else(|| Error::schema(field, "number out of range")),
            Literal::Number(n) => parse_rational(&n.to_string())
                .map(Scalar::Exact)
                .ok_or_else(|| Error::schema(field, format!("cannot read `{n}` as a rational"))),
            Literal::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(Scalar::real(f64::INFINITY)),
                "-inf" => Ok(Scalar::real(f64::NEG_INFINITY)),
                "nan" => Ok(Scalar::real(f64::NAN)),
                _ => parse_rational(t)
                    .map(Scalar::Exact)
                    .ok_or_else(|| Error::schema(field, format!("`{t}` is not a rational literal"))),
            },
            Literal::Complex(c) if exact => Err(Error::schema(
                field,
                format!("complex literal {}{:+}i in an exact system", c.re, c.im),
            )),
            Literal::Complex(c) => Ok(Scalar::complex(c.re, c.im)),
        }
    }

    fn mass(&self, field: &str) -> Result<BigRational> {
        let value = match self {
            Literal::Number(n) => parse_rational(&n.to_string()),
            Literal::Text(t) => parse_rational(t),
            Literal::Complex(_) => None,
        }
        .ok_or_else(|| Error::schema(field, "masses must be rational literals"))?;
        if !value.is_positive() {
            return Err(Error::schema(field, "masses must be positive"));
        }
        Ok(value)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    weight: Literal,
    mass: Literal,
}

fn one_literal() -> Literal {
    Literal::Text("1".into())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Tail {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    transient: Vec<Entry>,
    period: usize,
    periodic_weights: Vec<Literal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    periodic_masses: Option<Vec<Literal>>,
    #[serde(default = "one_literal")]
    mass_ratio: Literal,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Bilateral,
    Unilateral,
    Cycle(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrbitFile {
    kind: Kind,
    forward: Tail,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    backward: Option<Tail>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    overrides: BTreeMap<i64, Entry>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Field {
    #[default]
    Real,
    Complex,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    comment: Option<String>,
    p: f64,
    #[serde(default)]
    field: Field,
    #[serde(default)]
    exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    invertible: Option<bool>,
    orbits: Vec<OrbitFile>,
}

/// A parsed system together with its free-text comment.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemDocument {
    pub comment: Option<String>,
    pub system: AtomicSystem,
}

fn convert_tail(tail: &Tail, exact: bool, at: &str) -> Result<TailSpec> {
    if tail.period != tail.periodic_weights.len() {
        return Err(Error::schema(
            format!("{at}.periodic_weights"),
            format!("length {} differs from period {}", tail.periodic_weights.len(), tail.period),
        ));
    }
    let transient = tail
        .transient
        .iter()
        .enumerate()
        .map(|(i, e)| {
            Ok((
                e.weight.weight(exact, &format!("{at}.transient[{i}].weight"))?,
                e.mass.mass(&format!("{at}.transient[{i}].mass"))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = tail
        .periodic_weights
        .iter()
        .enumerate()
        .map(|(i, w)| w.weight(exact, &format!("{at}.periodic_weights[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let masses = match &tail.periodic_masses {
        None => vec![BigRational::one(); tail.period],
        Some(ms) => ms
            .iter()
            .enumerate()
            .map(|(i, m)| m.mass(&format!("{at}.periodic_masses[{i}]")))
            .collect::<Result<Vec<_>>>()?,
    };
    let ratio = tail.mass_ratio.mass(&format!("{at}.mass_ratio"))?;
    TailSpec::new(transient, weights, masses, ratio).map_err(|e| match e {
        Error::Schema { field, message } => Error::schema(format!("{at}.{field}"), message),
        other => other,
    })
}

fn convert(file: SystemFile) -> Result<SystemDocument> {
    let mut orbits = Vec::with_capacity(file.orbits.len());
    for (i, o) in file.orbits.iter().enumerate() {
        let at = format!("orbits[{i}]");
        let forward = convert_tail(&o.forward, file.exact, &format!("{at}.forward"))?;
        let backward = o
            .backward
            .as_ref()
            .map(|b| convert_tail(b, file.exact, &format!("{at}.backward")))
            .transpose()?;
        let mut orbit = match (o.kind, backward) {
            (Kind::Bilateral, Some(b)) => Orbit::bilateral(forward, b),
            (Kind::Bilateral, None) => {
                return Err(Error::schema(format!("{at}.backward"), "required for a bilateral chain"))
            }
            (_, Some(_)) => {
                return Err(Error::schema(
                    format!("{at}.backward"),
                    "only bilateral chains have a backward tail",
                ))
            }
            (Kind::Unilateral, None) => Orbit::unilateral(forward),
            (Kind::Cycle(len), None) => Orbit::cycle(len, forward),
        };
        for (&pos, e) in &o.overrides {
            let w = e.weight.weight(file.exact, &format!("{at}.overrides.{pos}.weight"))?;
            let m = e.mass.mass(&format!("{at}.overrides.{pos}.mass"))?;
            orbit = orbit.with_override(pos, w, m);
        }
        orbits.push(orbit);
    }
    let field = match file.field {
        Field::Real => ScalarField::Real,
        Field::Complex => ScalarField::Complex,
    };
    let system = AtomicSystem::new(orbits, file.p)?
        .with_field(field)?
        .with_invertible_claim(file.invertible);
    Ok(SystemDocument {
        comment: file.comment,
        system,
    })
}

/// Parses a system description. Syntax errors carry line and column; schema
/// errors name the offending field.
pub fn parse_document(text: &str) -> Result<SystemDocument> {
    let mut de = serde_json::Deserializer::from_str(text);
    let file: SystemFile = match serde_path_to_error::deserialize(&mut de) {
        Ok(f) => f,
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            return Err(if inner.is_syntax() || inner.is_eof() {
                Error::Parse {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                }
            } else {
                Error::Schema {
                    field: if path == "." { "<root>".into() } else { path },
                    message: inner.to_string(),
                }
            });
        }
    };
    de.end().map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    convert(file)
}

pub fn parse_system(text: &str) -> Result<AtomicSystem> {
    Ok(parse_document(text)?.system)
}

fn emit_tail(t: &TailSpec) -> Tail {
    let unit_masses = t.periodic_masses().iter().all(One::is_one);
    Tail {
        transient: t
            .transient()
            .iter()
            .map(|(w, m)| Entry {
                weight: Literal::from_scalar(w),
                mass: Literal::from_rational(m),
            })
            .collect(),
        period: t.period(),
        periodic_weights: t.periodic_weights().iter().map(Literal::from_scalar).collect(),
        periodic_masses: (!unit_masses).then(|| t.periodic_masses().iter().map(Literal::from_rational).collect()),
        mass_ratio: Literal::from_rational(t.mass_ratio()),
    }
}

/// Serializes a system so that `parse_document(emit_document(d)) == d`.
pub fn emit_document(doc: &SystemDocument) -> String {
    let s = &doc.system;
    let file = SystemFile {
        comment: doc.comment.clone(),
        p: s.p().value(),
        field: match s.field() {
            ScalarField::Real => Field::Real,
            ScalarField::Complex => Field::Complex,
        },
        exact: false,
        invertible: s.invertible_claim(),
        orbits: s
            .orbits()
            .iter()
            .map(|o| OrbitFile {
                kind: match o.kind() {
                    MapKind::BilateralChain => Kind::Bilateral,
                    MapKind::UnilateralChain => Kind::Unilateral,
                    MapKind::Cycle { length } => Kind::Cycle(length),
                },
                forward: emit_tail(o.forward()),
                backward: o.backward().map(emit_tail),
                overrides: o
                    .overrides()
                    .iter()
                    .map(|(&pos, (w, m))| {
                        (
                            pos,
                            Entry {
                                weight: Literal::from_scalar(w),
                                mass: Literal::from_rational(m),
                            },
                        )
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("system serializes")
}

pub fn emit_system(system: &AtomicSystem) -> String {
    emit_document(&SystemDocument {
        comment: None,
        system: system.clone(),
    })
}
