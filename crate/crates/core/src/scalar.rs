//! Scalar values, magnitudes and log-domain products.
//!
//! Weights and sample values are either exact rationals or complex floats.
//! Arithmetic between an exact and a float operand promotes to float, so a
//! computation stays exact exactly when every input was exact.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Natural logarithm of a positive rational, robust to operands far outside
/// the `f64` range.
pub fn ln_rational(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_bigint(r.numer().abs()) - ln_bigint(r.denom().abs())
}

fn ln_bigint(n: BigInt) -> f64 {
    let bits = n.bits();
    if bits < 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Converts a rational to `f64`, going through logarithms when the direct
/// conversion would overflow the intermediate integers.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if r.numer().bits() < 1000 && r.denom().bits() < 1000 {
        let v = r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN);
        if v.is_finite() && v != 0.0 {
            return v;
        }
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    sign * ln_rational(&r.abs()).exp()
}

/// Exact rational representation of a finite `f64`.
pub fn f64_to_rational(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

/// Exponent `p >= 1` of the `L^p` space, with its exact rational form when
/// the denominator is small enough for exact power comparisons.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent {
    value: f64,
    fraction: Option<(u32, u32)>,
}

impl Exponent {
    pub fn new(value: f64) -> Option<Self> {
        if !value.is_finite() || value < 1.0 {
            return None;
        }
        let fraction = BigRational::from_float(value).and_then(|r| {
            let num = r.numer().to_u32()?;
            let den = r.denom().to_u32()?;
            (den <= 64 && num <= 64 * 64).then_some((num, den))
        });
        Some(Exponent { value, fraction })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// `p = num / den` in lowest terms, when representable with `den <= 64`.
    pub fn fraction(&self) -> Option<(u32, u32)> {
        self.fraction
    }

    pub fn as_integer(&self) -> Option<u32> {
        match self.fraction {
            Some((n, 1)) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// A weight or function value.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(BigRational),
    Float(Complex64),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(BigRational::one())
    }

    pub fn real(x: f64) -> Self {
        Scalar::Float(Complex64::new(x, 0.0))
    }

    pub fn complex(re: f64, im: f64) -> Self {
        Scalar::Float(Complex64::new(re, im))
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Scalar::Exact(BigRational::new(num.into(), den.into()))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Float(c) => c.re == 0.0 && c.im == 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Scalar::Exact(_) => true,
            Scalar::Float(c) => c.re.is_finite() && c.im.is_finite(),
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Scalar::Exact(_) => true,
            Scalar::Float(c) => c.im == 0.0,
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        match self {
            Scalar::Exact(r) => Complex64::new(rational_to_f64(r), 0.0),
            Scalar::Float(c) => *c,
        }
    }

    pub fn modulus(&self) -> f64 {
        match self {
            Scalar::Exact(r) => rational_to_f64(&r.abs()),
            Scalar::Float(c) => c.norm(),
        }
    }

    pub fn ln_modulus(&self) -> f64 {
        match self {
            Scalar::Exact(r) => ln_rational(&r.abs()),
            Scalar::Float(c) => c.norm().ln(),
        }
    }

    /// `|z|^2` as an exact rational. Every finite float is a dyadic rational,
    /// so this is exact for both variants.
    pub fn modulus_squared_exact(&self) -> Option<BigRational> {
        match self {
            Scalar::Exact(r) => Some(r * r),
            Scalar::Float(c) => {
                let re = f64_to_rational(c.re)?;
                let im = f64_to_rational(c.im)?;
                Some(&re * &re + &im * &im)
            }
        }
    }

    pub fn phase(&self) -> Phase {
        match self {
            Scalar::Exact(r) => Phase::Sign(r.is_negative()),
            Scalar::Float(c) if c.im == 0.0 => Phase::Sign(c.re < 0.0),
            Scalar::Float(c) => Phase::Angle(c.arg()),
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            _ => Scalar::Float(self.to_complex() * other.to_complex()),
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Scalar> {
        if self.is_zero() {
            return None;
        }
        Some(match self {
            Scalar::Exact(r) => Scalar::Exact(r.recip()),
            Scalar::Float(c) => Scalar::Float(c.inv()),
        })
    }

    pub fn div(&self, other: &Scalar) -> Option<Scalar> {
        Some(self.mul(&other.inv()?))
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a - b),
            _ => Scalar::Float(self.to_complex() - other.to_complex()),
        }
    }

    /// `|z|^p`, exact when `z` is exact and `p` is an integer.
    pub fn abs_pow(&self, p: Exponent) -> Magnitude {
        match (self, p.as_integer()) {
            (Scalar::Exact(r), Some(k)) => Magnitude::Exact(num_traits::pow(r.abs(), k as usize)),
            _ => Magnitude::Float(self.modulus().powf(p.value())),
        }
    }

    /// Promotes to the float representation.
    pub fn to_float(&self) -> Scalar {
        Scalar::Float(self.to_complex())
    }

    /// Relative deviation `|a - b| / max(|a|, |b|)`, zero for equal operands.
    pub fn relative_deviation(a: &Scalar, b: &Scalar) -> f64 {
        if let (Scalar::Exact(x), Scalar::Exact(y)) = (a, b) {
            if x == y {
                return 0.0;
            }
            let scale = x.abs().max(y.abs());
            return rational_to_f64(&((x - y).abs() / scale));
        }
        let (x, y) = (a.to_complex(), b.to_complex());
        let scale = x.norm().max(y.norm());
        if scale == 0.0 {
            0.0
        } else {
            (x - y).norm() / scale
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => write!(f, "{r}"),
            Scalar::Float(c) if c.im == 0.0 => write!(f, "{}", c.re),
            Scalar::Float(c) => write!(f, "{}{:+}i", c.re, c.im),
        }
    }
}

/// A nonnegative quantity such as a measure or a `p`-th power of a norm.
#[derive(Clone, Debug, PartialEq)]
pub enum Magnitude {
    Exact(BigRational),
    Float(f64),
}

impl Magnitude {
    pub fn zero() -> Self {
        Magnitude::Exact(BigRational::zero())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Magnitude::Exact(r) => rational_to_f64(r),
            Magnitude::Float(x) => *x,
        }
    }

    pub fn ln(&self) -> f64 {
        match self {
            Magnitude::Exact(r) => ln_rational(r),
            Magnitude::Float(x) => x.ln(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Magnitude::Exact(_))
    }

    pub fn add(&self, other: &Magnitude) -> Magnitude {
        match (self, other) {
            (Magnitude::Exact(a), Magnitude::Exact(b)) => Magnitude::Exact(a + b),
            _ => Magnitude::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(&self, other: &Magnitude) -> Magnitude {
        match (self, other) {
            (Magnitude::Exact(a), Magnitude::Exact(b)) => Magnitude::Exact(a * b),
            _ => Magnitude::Float(self.to_f64() * other.to_f64()),
        }
    }

    pub fn relative_deviation(a: &Magnitude, b: &Magnitude) -> f64 {
        if let (Magnitude::Exact(x), Magnitude::Exact(y)) = (a, b) {
            if x == y {
                return 0.0;
            }
            let scale = x.abs().max(y.abs());
            return rational_to_f64(&((x - y).abs() / scale));
        }
        let (x, y) = (a.to_f64(), b.to_f64());
        let scale = x.abs().max(y.abs());
        if scale == 0.0 {
            0.0
        } else {
            (x - y).abs() / scale
        }
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Magnitude::Exact(r) => write!(f, "{r}"),
            Magnitude::Float(x) => write!(f, "{x}"),
        }
    }
}

/// Argument channel of a log-domain scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Phase {
    /// Real value; `true` means negative.
    Sign(bool),
    /// Complex argument in `(-pi, pi]`.
    Angle(f64),
}

impl Phase {
    pub fn positive() -> Self {
        Phase::Sign(false)
    }

    fn angle(self) -> f64 {
        match self {
            Phase::Sign(false) => 0.0,
            Phase::Sign(true) => PI,
            Phase::Angle(a) => a,
        }
    }

    pub fn mul(self, other: Phase) -> Phase {
        match (self, other) {
            (Phase::Sign(a), Phase::Sign(b)) => Phase::Sign(a ^ b),
            _ => Phase::Angle(wrap_angle(self.angle() + other.angle())),
        }
    }

    pub fn inv(self) -> Phase {
        match self {
            Phase::Sign(s) => Phase::Sign(s),
            Phase::Angle(a) => Phase::Angle(wrap_angle(-a)),
        }
    }

    pub fn unit(self) -> Complex64 {
        match self {
            Phase::Sign(false) => Complex64::new(1.0, 0.0),
            Phase::Sign(true) => Complex64::new(-1.0, 0.0),
            Phase::Angle(a) => Complex64::from_polar(1.0, a),
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// A scalar stored as `exp(ln_abs) * phase`. Zero has `ln_abs = -inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogScalar {
    pub ln_abs: f64,
    pub phase: Phase,
}

impl LogScalar {
    pub fn one() -> Self {
        LogScalar {
            ln_abs: 0.0,
            phase: Phase::positive(),
        }
    }

    pub fn from_scalar(s: &Scalar) -> Self {
        if s.is_zero() {
            return LogScalar {
                ln_abs: f64::NEG_INFINITY,
                phase: Phase::positive(),
            };
        }
        LogScalar {
            ln_abs: s.ln_modulus(),
            phase: s.phase(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_abs == f64::NEG_INFINITY
    }

    pub fn mul(&self, other: &LogScalar) -> LogScalar {
        if self.is_zero() || other.is_zero() {
            return LogScalar {
                ln_abs: f64::NEG_INFINITY,
                phase: Phase::positive(),
            };
        }
        LogScalar {
            ln_abs: self.ln_abs + other.ln_abs,
            phase: self.phase.mul(other.phase),
        }
    }

    pub fn inv(&self) -> Option<LogScalar> {
        (!self.is_zero()).then(|| LogScalar {
            ln_abs: -self.ln_abs,
            phase: self.phase.inv(),
        })
    }

    pub fn modulus(&self) -> f64 {
        self.ln_abs.exp()
    }

    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.phase.unit() * self.ln_abs.exp()
    }

    pub fn to_scalar(&self) -> Scalar {
        Scalar::Float(self.to_complex())
    }
}

/// Numerically stable `ln(sum(exp(terms)))`; `-inf` for an empty or all-zero sum.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Compares `x^a` against `y^b` for positive rationals without leaving exact
/// arithmetic. Returns `None` when the powers would be unreasonably large.
pub fn compare_powers(x: &BigRational, a: u64, y: &BigRational, b: u64) -> Option<Ordering> {
    const MAX_BITS: u64 = 400_000;
    let size = |r: &BigRational, e: u64| (r.numer().bits() + r.denom().bits()).saturating_mul(e);
    if size(x, a) > MAX_BITS || size(y, b) > MAX_BITS {
        return None;
    }
    let lhs = num_traits::pow(x.clone(), usize::try_from(a).ok()?);
    let rhs = num_traits::pow(y.clone(), usize::try_from(b).ok()?);
    Some(lhs.cmp(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_fraction_detection() {
        assert_eq!(Exponent::new(2.0).unwrap().as_integer(), Some(2));
        assert_eq!(Exponent::new(1.5).unwrap().fraction(), Some((3, 2)));
        assert_eq!(Exponent::new(2.7).unwrap().fraction(), None);
        assert!(Exponent::new(0.5).is_none());
        assert!(Exponent::new(f64::NAN).is_none());
    }

    #[test]
    fn ln_rational_handles_huge_operands() {
        let big = num_traits::pow(BigRational::from_integer(2.into()), 5000);
        let got = ln_rational(&big);
        assert!((got - 5000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((rational_to_f64(&big.recip()) - 0.0).abs() < 1e-300);
    }

    #[test]
    fn phase_products_stay_real_for_real_inputs() {
        let a = LogScalar::from_scalar(&Scalar::real(-2.0));
        let b = LogScalar::from_scalar(&Scalar::rational(-1, 3));
        let prod = a.mul(&b);
        assert_eq!(prod.phase, Phase::Sign(false));
        assert!((prod.to_complex().re - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn complex_phase_wraps() {
        let i = LogScalar::from_scalar(&Scalar::complex(0.0, 1.0));
        let mut acc = LogScalar::one();
        for _ in 0..4 {
            acc = acc.mul(&i);
        }
        let z = acc.to_complex();
        assert!((z.re - 1.0).abs() < 1e-12 && z.im.abs() < 1e-12);
    }

    #[test]
    fn exact_arithmetic_stays_exact() {
        let a = Scalar::rational(2, 3);
        let b = Scalar::rational(3, 4);
        assert_eq!(a.mul(&b), Scalar::rational(1, 2));
        assert_eq!(a.div(&b).unwrap(), Scalar::rational(8, 9));
        assert!(Scalar::zero().inv().is_none());
        let p = Exponent::new(2.0).unwrap();
        assert_eq!(a.abs_pow(p), Magnitude::Exact(BigRational::new(4.into(), 9.into())));
        assert!(!a.mul(&Scalar::real(1.0)).is_exact());
    }

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let v = [1.0f64, 2.0, 3.0];
        let direct = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(v) - direct).abs() < 1e-14);
        assert_eq!(log_sum_exp(Vec::new()), f64::NEG_INFINITY);
    }

    #[test]
    fn compare_powers_is_exact() {
        let two = BigRational::from_integer(2.into());
        let three = BigRational::from_integer(3.into());
        // 2^3 = 8 < 9 = 3^2
        assert_eq!(compare_powers(&two, 3, &three, 2), Some(Ordering::Less));
        assert_eq!(compare_powers(&two, 2, &two, 2), Some(Ordering::Equal));
    }
}
