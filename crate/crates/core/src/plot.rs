//! CSV growth profiles for plotting `log10` criterion values against `n`.

use std::fmt::Write;

use crate::growth::{profile, Metric};
use crate::system::{AtomId, AtomicSystem};

pub const CSV_HEADER: &str = "n,log10_value,sign";

/// One row per `n` in `[-horizon, horizon]`; `sign` is `+`, `-` or `0` for
/// the sign of `log10_value`, and `zero` when the value itself vanishes.
pub fn profile_csv(system: &AtomicSystem, atom: AtomId, metric: Metric, horizon: i64) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for point in profile(system, atom, metric, horizon) {
        let log10 = point.ln_value / std::f64::consts::LN_10;
        let (value, sign) = if log10 == f64::NEG_INFINITY {
            ("-inf".to_string(), "zero")
        } else if log10 > 0.0 {
            (format!("{log10:.12}"), "+")
        } else if log10 < 0.0 {
            (format!("{log10:.12}"), "-")
        } else {
            (format!("{log10:.12}"), "0")
        };
        writeln!(out, "{},{},{}", point.n, value, sign).expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;
    use crate::system::{Orbit, TailSpec};
    use num_rational::BigRational;
    use num_traits::One;

    #[test]
    fn rows_cover_the_horizon() {
        let t = TailSpec::constant(Scalar::rational(10, 1), BigRational::one());
        let s = AtomicSystem::new(vec![Orbit::bilateral(t.clone(), t)], 1.0).unwrap();
        let csv = profile_csv(&s, AtomId::new(0, 0), Metric::Lp(s.p()), 3);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[1], "-3,-3.000000000000,-");
        assert_eq!(lines[4], "0,0.000000000000,0");
        assert_eq!(lines[7], "3,3.000000000000,+");
    }
}
