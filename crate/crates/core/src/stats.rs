//! Pearson's χ² goodness-of-fit test on measurement counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::OutcomeDistribution;
use crate::simulator::Counts;

/// Expected probabilities below this are pooled into the forbidden group.
pub const FORBIDDEN_PROBABILITY: f64 = 1e-12;

const MAX_ITERATIONS: usize = 10_000;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;

/// Outcome of a goodness-of-fit test.
///
/// `statistic` is `+∞` when an outcome with zero expected probability was
/// observed; the p-value is then exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Result {
    #[serde(with = "extended_f64")]
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`,
/// which plain JSON numbers cannot carry.
pub mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// `ln Γ(s)` by the Lanczos approximation (g = 7, nine terms).
pub fn ln_gamma(s: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if s < 0.5 {
        // Reflection: Γ(s) Γ(1-s) = π / sin(πs)
        let pi = std::f64::consts::PI;
        return (pi / (pi * s).sin()).abs().ln() - ln_gamma(1.0 - s);
    }
    let z = s - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma function `Q(s, x) = Γ(s, x) / Γ(s)`.
///
/// Uses the power series of the lower function for `x < s + 1` and a Lentz
/// continued fraction otherwise.
pub fn regularized_gamma_q(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Validation(format!("gamma shape must be positive, got {s}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Validation(format!("gamma argument must be non-negative, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let log_prefactor = -x + s * x.ln() - ln_gamma(s);
    if x < s + 1.0 {
        let mut ap = s;
        let mut term = 1.0 / s;
        let mut sum = term;
        for _ in 0..MAX_ITERATIONS {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                let p = sum * log_prefactor.exp();
                return Ok((1.0 - p).clamp(0.0, 1.0));
            }
        }
        Err(Error::Numeric(format!(
            "incomplete gamma series did not converge for s={s}, x={x}"
        )))
    } else {
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITERATIONS {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                return Ok((log_prefactor.exp() * h).clamp(0.0, 1.0));
            }
        }
        Err(Error::Numeric(format!(
            "incomplete gamma continued fraction did not converge for s={s}, x={x}"
        )))
    }
}

/// Upper tail of the χ² distribution with `dof` degrees of freedom.
pub fn chi2_sf(statistic: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(Error::Degenerate("χ² test with zero degrees of freedom".into()));
    }
    if statistic.is_nan() || statistic < 0.0 {
        return Err(Error::Validation(format!("invalid χ² statistic {statistic}")));
    }
    if statistic.is_infinite() {
        return Ok(0.0);
    }
    regularized_gamma_q(dof as f64 / 2.0, statistic / 2.0)
}

/// Pearson goodness-of-fit of observed counts against an expected distribution.
///
/// Outcomes with expected probability below [`FORBIDDEN_PROBABILITY`] form a
/// forbidden group: any hit there yields `statistic = ∞` and `p = 0`. The
/// remaining bins give `Σ (O - Np)² / (Np)` with one degree of freedom fewer
/// than the number of bins. When only one bin survives the outcome is
/// deterministic, and with no forbidden hits the observation agrees exactly:
/// `statistic = 0`, `p = 1`, and the pooled group is counted as the second
/// category (`dof = 1`).
pub fn chi2_gof(observed: &Counts, expected: &OutcomeDistribution) -> Result<Chi2Result> {
    if observed.n_qubits() != expected.n_qubits() {
        return Err(Error::Dimension(format!(
            "{}-qubit counts against a {}-qubit distribution",
            observed.n_qubits(),
            expected.n_qubits()
        )));
    }
    let shots = observed.shots();
    if shots == 0 {
        return Err(Error::Validation("goodness-of-fit needs at least one shot".into()));
    }
    let n = shots as f64;
    let dense = observed.to_dense();
    let mut statistic = 0.0;
    let mut surviving = 0usize;
    let mut forbidden_hits = 0u64;
    for (&o, &p) in dense.iter().zip(expected.probs()) {
        if p < FORBIDDEN_PROBABILITY {
            forbidden_hits += o;
            continue;
        }
        surviving += 1;
        let e = n * p;
        statistic += (o as f64 - e).powi(2) / e;
    }
    if forbidden_hits > 0 {
        return Ok(Chi2Result {
            statistic: f64::INFINITY,
            dof: surviving.saturating_sub(1).max(1),
            p_value: 0.0,
        });
    }
    match surviving {
        0 => Err(Error::Degenerate("expected distribution has no support".into())),
        1 if dense.len() > 1 => Ok(Chi2Result {
            statistic: 0.0,
            dof: 1,
            p_value: 1.0,
        }),
        _ => {
            let dof = surviving - 1;
            Ok(Chi2Result {
                statistic,
                dof,
                p_value: chi2_sf(statistic, dof)?,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> OutcomeDistribution {
        OutcomeDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn gamma_q_examples() {
        assert_eq!(regularized_gamma_q(2.5, 0.0).unwrap(), 1.0);
        assert!((regularized_gamma_q(1.0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-10);
        let mut last = 1.0;
        for x in [0.1, 1.0, 5.0, 20.0, 60.0, 200.0] {
            let q = regularized_gamma_q(0.5, x).unwrap();
            assert!(q <= last);
            last = q;
        }
        assert!(last < 1e-80);
        assert!(regularized_gamma_q(0.0, 1.0).is_err());
        assert!(regularized_gamma_q(1.0, -1.0).is_err());
    }

    #[test]
    fn gamma_q_integer_shape_closed_form() {
        // Q(k, x) = e^{-x} Σ_{j<k} x^j / j!
        for k in 1..6 {
            for x in [0.3, 2.0, 7.5] {
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..k {
                    term *= x / j as f64;
                    sum += term;
                }
                let closed = (-x).exp() * sum;
                assert!((regularized_gamma_q(k as f64, x).unwrap() - closed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perfect_fit() {
        let counts = Counts::from_dense(2, &[250, 250, 250, 250]).unwrap();
        let r = chi2_gof(&counts, &dist(&[0.25; 4])).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 3);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn forbidden_hit_is_decisive() {
        let counts = Counts::from_dense(2, &[0, 1500, 0, 1500]).unwrap();
        let r = chi2_gof(&counts, &dist(&[0.5, 0.0, 0.0, 0.5])).unwrap();
        assert!(r.statistic.is_infinite());
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn deterministic_expectation() {
        let counts = Counts::from_dense(2, &[100, 0, 0, 0]).unwrap();
        let r = chi2_gof(&counts, &dist(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn five_percent_critical_value() {
        let p = chi2_sf(3.841, 1).unwrap();
        assert!((p - 0.05).abs() < 5e-4, "{p}");
        assert!(matches!(chi2_sf(1.0, 0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn bin_permutation_invariance() {
        let counts = Counts::from_dense(2, &[30, 25, 20, 25]).unwrap();
        let expected = dist(&[0.4, 0.2, 0.2, 0.2]);
        let permuted_counts = Counts::from_dense(2, &[25, 20, 25, 30]).unwrap();
        let permuted = dist(&[0.2, 0.2, 0.2, 0.4]);
        let a = chi2_gof(&counts, &expected).unwrap();
        let b = chi2_gof(&permuted_counts, &permuted).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
        assert!((a.p_value - b.p_value).abs() < 1e-12);
    }

    #[test]
    fn infinite_statistic_json() {
        let r = Chi2Result {
            statistic: f64::INFINITY,
            dof: 1,
            p_value: 0.0,
        };
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<Chi2Result>(&text).unwrap(), r);
    }
}
