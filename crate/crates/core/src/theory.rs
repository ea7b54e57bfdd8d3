//! Closed-form side: regime tables, lifespan bound formulas, the a-priori
//! bound functions and the quantities of the pointwise blow-up iteration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

fn require_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("p must exceed 1, got {p}")))
    }
}

/// The five lifespan regimes of the `|u_t|^p` problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// `a > 0`, `p(1+a)+b > 0`: global existence.
    Global,
    /// `a = 0`, `b >= -p`: `exp(c eps^{-(p-1)})`.
    ExpPMinus1,
    /// `a > 0`, `p(1+a)+b = 0`: `exp(c eps^{-p(p-1)})`.
    ExpPPMinus1,
    /// `a < 0`, `b >= -p`: `c eps^{-(p-1)/(-a)}`.
    PolyA,
    /// `p(1+a)+b < 0`, `b < -p`: `c eps^{-p(p-1)/(-p(1+a)-b)}`.
    PolyPab,
}

impl RegimeKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegimeKind::Global => "global",
            RegimeKind::ExpPMinus1 => "exp_p_minus_1",
            RegimeKind::ExpPPMinus1 => "exp_p_p_minus_1",
            RegimeKind::PolyA => "poly_a",
            RegimeKind::PolyPab => "poly_pab",
        }
    }

    pub fn is_global(&self) -> bool {
        *self == RegimeKind::Global
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, RegimeKind::ExpPMinus1 | RegimeKind::ExpPPMinus1)
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regime {
    pub kind: RegimeKind,
    /// Power of `1/eps` in the polynomial regimes.
    pub exponent: Option<f64>,
    pub formula: String,
}

impl Regime {
    /// Power `q` such that the exponential regimes read `exp(c eps^{-q})`.
    pub fn exp_power(&self, p: f64) -> Option<f64> {
        match self.kind {
            RegimeKind::ExpPMinus1 => Some(p - 1.0),
            RegimeKind::ExpPPMinus1 => Some(p * (p - 1.0)),
            _ => None,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exponent {
            Some(e) => write!(f, "{} exponent {}", self.kind, e),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// Maps `(p, a, b)` to its unique regime; the five cases partition `p > 1`.
pub fn classify_regime(p: f64, a: f64, b: f64) -> Result<Regime> {
    require_p(p)?;
    let q = p * (1.0 + a) + b;
    let (kind, exponent, formula) = if a > 0.0 && q > 0.0 {
        (RegimeKind::Global, None, "T = inf".to_string())
    } else if a > 0.0 && q == 0.0 {
        (
            RegimeKind::ExpPPMinus1,
            None,
            "exp(c eps^-(p(p-1)))".to_string(),
        )
    } else if a == 0.0 && b >= -p {
        (
            RegimeKind::ExpPMinus1,
            None,
            "exp(c eps^-(p-1))".to_string(),
        )
    } else if a < 0.0 && b >= -p {
        (
            RegimeKind::PolyA,
            Some((p - 1.0) / -a),
            "c eps^-((p-1)/(-a))".to_string(),
        )
    } else if q < 0.0 && b < -p {
        (
            RegimeKind::PolyPab,
            Some(p * (p - 1.0) / -q),
            "c eps^-(p(p-1)/(-p(1+a)-b))".to_string(),
        )
    } else {
        // unreachable for finite inputs; NaN lands here
        return Err(Error::Domain(format!(
            "(p, a, b) = ({p}, {a}, {b}) is not classifiable"
        )));
    };
    Ok(Regime {
        kind,
        exponent,
        formula,
    })
}

/// Regime formula with constant `c`; `inf` in the global case.
pub fn lifespan_bound(p: f64, a: f64, b: f64, epsilon: f64, c: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !(c > 0.0) {
        return Err(Error::Domain("epsilon and c must be positive".into()));
    }
    let regime = classify_regime(p, a, b)?;
    Ok(match regime.kind {
        RegimeKind::Global => f64::INFINITY,
        RegimeKind::ExpPMinus1 => (c * epsilon.powf(-(p - 1.0))).exp(),
        RegimeKind::ExpPPMinus1 => (c * epsilon.powf(-p * (p - 1.0))).exp(),
        RegimeKind::PolyA | RegimeKind::PolyPab => {
            c * epsilon.powf(-regime.exponent.expect("polynomial exponent"))
        }
    })
}

/// Growth factor `E_{a,b}(T)` of the a-priori estimate for `L'_{a,b}(|U|^p)`.
pub fn e_ab(t: f64, p: f64, a: f64, b: f64, radius: f64) -> Result<f64> {
    if !(t >= 0.0) || !(radius >= 1.0) {
        return Err(Error::Domain("T >= 0 and R >= 1 required".into()));
    }
    let regime = classify_regime(p, a, b)?;
    Ok(match regime.kind {
        RegimeKind::Global => 1.0,
        RegimeKind::ExpPMinus1 => (t + 3.0 * radius).ln().powf(p),
        RegimeKind::ExpPPMinus1 => (t + 3.0 * radius).ln(),
        RegimeKind::PolyA => (t + 2.0 * radius).powf(-a * p),
        RegimeKind::PolyPab => (t + 2.0 * radius).powf(-(p * (1.0 + a) + b)),
    })
}

/// `D_a(T)`: 1, `log(T+3R)` or `(T+2R)^{-a}` for `a > 0`, `a = 0`, `a < 0`.
pub fn d_a(t: f64, a: f64, radius: f64) -> Result<f64> {
    if !(t >= 0.0) || !(radius >= 1.0) {
        return Err(Error::Domain("T >= 0 and R >= 1 required".into()));
    }
    Ok(if a > 0.0 {
        1.0
    } else if a == 0.0 {
        (t + 3.0 * radius).ln()
    } else {
        (t + 2.0 * radius).powf(-a)
    })
}

// ---------------------------------------------------------------------------
// blow-up iteration

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("{x} is not finite")))
}

fn rpow(x: &BigRational, k: u32) -> BigRational {
    num_traits::pow(x.clone(), k as usize)
}

/// `a_1 = 0`, `a_{n+1} = p^2 a_n + p + 1`, in exact arithmetic.
pub fn a_n_recursion(p: &BigRational, n: usize) -> BigRational {
    let p2 = p * p;
    let step = p + BigRational::one();
    let mut a = BigRational::zero();
    for _ in 1..n {
        a = &p2 * &a + &step;
    }
    a
}

/// `(p^{2(n-1)} - 1)/(p - 1)`: the closed form consistent with `a_1 = 0`.
pub fn a_n_closed(p: &BigRational, n: usize) -> BigRational {
    (rpow(p, 2 * (n as u32 - 1)) - BigRational::one()) / (p - BigRational::one())
}

/// `(p^{2n-1} - 1)/(p - 1)` as printed alongside the recursion. It gives
/// `a_1 = 1` and actually equals `p a_n + 1` of the recursion.
pub fn a_n_printed(p: &BigRational, n: usize) -> BigRational {
    (rpow(p, 2 * n as u32 - 1) - BigRational::one()) / (p - BigRational::one())
}

/// `S_{p^2} = Σ_{j>=1} j p^{-2j} = p^2/(p^2-1)^2`.
pub fn s_p2(p: f64) -> Result<f64> {
    require_p(p)?;
    let p2 = p * p;
    Ok(p2 / ((p2 - 1.0) * (p2 - 1.0)))
}

/// Partial sum `Σ_{j=1}^{terms} j p^{-2j}`.
pub fn s_p2_partial(p: f64, terms: usize) -> f64 {
    let x = 1.0 / (p * p);
    let mut pow = 1.0;
    let mut sum = 0.0;
    for j in 1..=terms {
        pow *= x;
        sum += j as f64 * pow;
    }
    sum
}

/// `C_0`, `C_1` and `C_g` of the pointwise iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupConstants {
    pub p: f64,
    pub c0: f64,
    pub c1: f64,
    pub cg: f64,
}

impl BlowupConstants {
    /// `C_0 = 3^{-|a|} 2^{-|b|} / (8 sqrt 2)`, `C_1 = C_0^{p+1} (p-1)^p`.
    pub fn from_weights(p: f64, a: f64, b: f64, cg: f64) -> Result<Self> {
        require_p(p)?;
        let c0 = 3f64.powf(-a.abs()) * 2f64.powf(-b.abs()) / (8.0 * std::f64::consts::SQRT_2);
        let c1 = c0.powf(p + 1.0) * (p - 1.0).powf(p);
        Ok(Self { p, c0, c1, cg })
    }

    /// Constants with `C_1` given directly.
    pub fn with_c1(p: f64, c1: f64, cg: f64) -> Result<Self> {
        require_p(p)?;
        Ok(Self {
            p,
            c0: f64::NAN,
            c1,
            cg,
        })
    }

    /// `C_2 = C_1 / (2^{p+1} (-p(1+a)-b)^{p+1})` for `p(1+a)+b < 0`.
    pub fn c2(&self, a: f64, b: f64) -> Result<f64> {
        let q = -(self.p * (1.0 + a) + b);
        if !(q > 0.0) {
            return Err(Error::Domain("C_2 needs p(1+a)+b < 0".into()));
        }
        Ok(self.c1 / (2f64.powf(self.p + 1.0) * q.powf(self.p + 1.0)))
    }

    /// `C_1^{1/(p+1)} p^{-2p S(p-1)} C_g^{p-1}`, the factor shared by both
    /// threshold conditions.
    pub fn threshold_factor(&self, c: f64) -> Result<f64> {
        let p = self.p;
        let s = s_p2(p)?;
        Ok(c.powf(1.0 / (p + 1.0)) * p.powf(-2.0 * p * s * (p - 1.0)) * self.cg.powf(p - 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupSequenceState {
    pub n: usize,
    pub a_n: BigRational,
    /// `log M_n`; `M_n` itself underflows within a few steps.
    pub log_m: f64,
    pub c0: f64,
    pub c1: f64,
    pub cg: f64,
    pub s_p2: f64,
}

impl BlowupSequenceState {
    pub fn a_n_f64(&self) -> f64 {
        self.a_n.to_f64().unwrap_or(f64::NAN)
    }

    pub fn m_n(&self) -> f64 {
        self.log_m.exp()
    }
}

/// `a_n` exactly and `log M_{n+1} = log C_1 - 2pn log p + p^2 log M_n` for
/// `n = 1..=n_max`.
pub fn blowup_sequence(
    p: &BigRational,
    consts: &BlowupConstants,
    n_max: usize,
    m1: f64,
) -> Result<Vec<BlowupSequenceState>> {
    let pf = p.to_f64().unwrap_or(f64::NAN);
    require_p(pf)?;
    if n_max == 0 || !(m1 > 0.0) {
        return Err(Error::Domain("n_max >= 1 and M_1 > 0 required".into()));
    }
    let s = s_p2(pf)?;
    let p2 = p * p;
    let step = p + BigRational::one();
    let mut a_n = BigRational::zero();
    let mut log_m = m1.ln();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        out.push(BlowupSequenceState {
            n,
            a_n: a_n.clone(),
            log_m,
            c0: consts.c0,
            c1: consts.c1,
            cg: consts.cg,
            s_p2: s,
        });
        a_n = &p2 * &a_n + &step;
        log_m = consts.c1.ln() - 2.0 * pf * n as f64 * pf.ln() + pf * pf * log_m;
    }
    Ok(out)
}

/// Unrolled form `log M_{n+1} = (p^{2n}-1)/(p^2-1) log C_1
/// - p^{2n} Σ_{j<=n} j p^{-2j} log p^{2p} + p^{2n} log M_1`.
pub fn log_m_unrolled(p: f64, c1: f64, m1: f64, n: usize) -> f64 {
    let p2n = p.powi(2 * n as i32);
    let partial = s_p2_partial(p, n);
    (p2n - 1.0) / (p * p - 1.0) * c1.ln() - p2n * partial * (2.0 * p * p.ln()) + p2n * m1.ln()
}

/// Constant part of `K_1`/`K_2`: `(p^2-1)^{-1} log C - S log p^{2p} + log M_1`.
fn k_offset(p: f64, c: f64, m1: f64) -> Result<f64> {
    Ok(c.ln() / (p * p - 1.0) - s_p2(p)? * 2.0 * p * p.ln() + m1.ln())
}

fn in_region_d(x: f64, t: f64, radius: f64) -> bool {
    t + x.abs() >= radius && t - x.abs() >= radius
}

/// `K_1(x,t) = (p-1)^{-1} log log((1+t-x)/(1+R)) + (p^2-1)^{-1} log C_1 - S log p^{2p} + log M_1`,
/// defined on `D` with `t - x > R`.
pub fn k1(x: f64, t: f64, p: f64, radius: f64, m1: f64, c1: f64) -> Result<f64> {
    require_p(p)?;
    if !in_region_d(x, t, radius) || !(t - x > radius) {
        return Err(Error::Domain(format!(
            "(x, t) = ({x}, {t}) outside the K_1 domain"
        )));
    }
    let inner = ((1.0 + t - x) / (1.0 + radius)).ln();
    Ok(inner.ln() / (p - 1.0) + k_offset(p, c1, m1)?)
}

/// `K_2(x,t) = (p-1)^{-1} log (1+t-x)^{-p(1+a)-b} + (p^2-1)^{-1} log C_2 - S log p^{2p} + log M_1`
/// on `D_{a,b} = D ∩ {1+t-x > 2^{1/(-p(1+a)-b)} (1+R)}`.
#[allow(clippy::too_many_arguments)]
pub fn k2(x: f64, t: f64, p: f64, a: f64, b: f64, radius: f64, m1: f64, c2: f64) -> Result<f64> {
    require_p(p)?;
    let q = -(p * (1.0 + a) + b);
    if !(q > 0.0) {
        return Err(Error::Domain("K_2 needs p(1+a)+b < 0".into()));
    }
    if !in_region_d(x, t, radius) || !(1.0 + t - x > 2f64.powf(1.0 / q) * (1.0 + radius)) {
        return Err(Error::Domain(format!(
            "(x, t) = ({x}, {t}) outside D_(a,b)"
        )));
    }
    Ok(q * (1.0 + t - x).ln() / (p - 1.0) + k_offset(p, c2, m1)?)
}

/// Printed sufficient condition at `x_0 = t_0/2`:
/// `2^{-1} log(t_0) C_1^{1/(p+1)} p^{-2pS(p-1)} (C_g eps^p)^{p-1} > 1`.
pub fn con1(t0: f64, consts: &BlowupConstants, epsilon: f64) -> Result<bool> {
    let p = consts.p;
    let lhs = 0.5 * t0.ln() * consts.threshold_factor(consts.c1)? * epsilon.powf(p * (p - 1.0));
    Ok(lhs > 1.0)
}

/// The condition equivalent to `K_1(t_0/2, t_0) > 0`: `½ log t_0` of [`con1`]
/// replaced by `log((1+t_0/2)/(1+R))`. The printed form implies this one
/// whenever `t_0 > 4(1+R)^2`.
pub fn con1_exact(t0: f64, radius: f64, consts: &BlowupConstants, epsilon: f64) -> Result<bool> {
    let p = consts.p;
    let log_term = ((1.0 + 0.5 * t0) / (1.0 + radius)).ln();
    let lhs = log_term * consts.threshold_factor(consts.c1)? * epsilon.powf(p * (p - 1.0));
    Ok(lhs > 1.0)
}

/// Printed sufficient condition
/// `2^{p(1+a)+b} t_0^{-p(1+a)-b} C_2^{1/(p+1)} p^{-2pS(p-1)} (C_g eps^p)^{p-1} > 1`.
pub fn con2(t0: f64, a: f64, b: f64, consts: &BlowupConstants, epsilon: f64) -> Result<bool> {
    let p = consts.p;
    let q = -(p * (1.0 + a) + b);
    let c2 = consts.c2(a, b)?;
    let lhs = (0.5 * t0).powf(q) * consts.threshold_factor(c2)? * epsilon.powf(p * (p - 1.0));
    Ok(lhs > 1.0)
}

/// The condition equivalent to `K_2(t_0/2, t_0) > 0` (`t_0/2` replaced by `1 + t_0/2`).
pub fn con2_exact(t0: f64, a: f64, b: f64, consts: &BlowupConstants, epsilon: f64) -> Result<bool> {
    let p = consts.p;
    let q = -(p * (1.0 + a) + b);
    let c2 = consts.c2(a, b)?;
    let lhs = (1.0 + 0.5 * t0).powf(q) * consts.threshold_factor(c2)? * epsilon.powf(p * (p - 1.0));
    Ok(lhs > 1.0)
}

/// `(1+t-x)^{mq} - (1+R)^{mq} > 2^{-1} (1+t-x)^{mq}` with `q = -p(1+a)-b`.
pub fn halfup_holds(one_plus_t_minus_x: f64, radius: f64, q: f64, m: f64) -> bool {
    let big = one_plus_t_minus_x.powf(m * q);
    big - (1.0 + radius).powf(m * q) > 0.5 * big
}

/// `ε_3` (case `p(1+a)+b = 0`) and, when `p(1+a)+b < 0`, `ε_4`, solved from
/// their defining equations
/// `4(1+R)^2 = 2 Φ^{-1} ε_3^{-p(p-1)}` and
/// `2^{1/(-p(1+a)-b)}(1+R) - 1/2 = Φ^{-1} ε_4^{-p(p-1)/(-p(1+a)-b)}`, where
/// `Φ = C_1^{1/(p+1)} p^{-2pS(p-1)} C_g^{p-1}`.
pub fn epsilon_thresholds(
    p: f64,
    a: f64,
    b: f64,
    radius: f64,
    consts: &BlowupConstants,
) -> Result<(f64, Option<f64>)> {
    require_p(p)?;
    let phi = consts.threshold_factor(consts.c1)?;
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::Domain("threshold factor must be positive".into()));
    }
    let k = p * (p - 1.0);
    let eps3 = (2.0 * (1.0 + radius).powi(2) * phi).powf(-1.0 / k);
    let q = -(p * (1.0 + a) + b);
    let eps4 = if q > 0.0 {
        let lhs = 2f64.powf(1.0 / q) * (1.0 + radius) - 0.5;
        if !(lhs > 0.0) {
            return Err(Error::Domain("non-positive radicand for eps_4".into()));
        }
        Some((lhs * phi).powf(-q / k))
    } else {
        None
    };
    Ok((eps3, eps4))
}

// ---------------------------------------------------------------------------
// phase diagrams

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    /// The `|u_t|^p` table.
    DtTable,
    /// The `|u|^p` table for `∫ g ≠ 0`.
    UNonzeroTable,
    /// The `|u|^p` table for `∫ g = 0`.
    UZeroTable,
}

impl FromStr for PhaseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt_table" | "dt-table" => Ok(PhaseMode::DtTable),
            "u_nonzero_table" | "u-nonzero-table" => Ok(PhaseMode::UNonzeroTable),
            "u_zero_table" | "u-zero-table" => Ok(PhaseMode::UZeroTable),
            other => Err(Error::Domain(format!("unknown phase-diagram mode {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCell {
    pub a: f64,
    pub b: f64,
    pub label: String,
    pub exponent: Option<f64>,
}

/// Table for the `|u|^p` problem with `∫ g ≠ 0`.
pub fn classify_u_nonzero(p: f64, a: f64, b: f64) -> (String, Option<f64>) {
    let s = a + b;
    if a > 0.0 && s > 0.0 {
        ("global".into(), None)
    } else if (s == 0.0 && a > 0.0) || (a == 0.0 && b > 0.0) {
        ("exp(Cε^{−(p−1)})".into(), None)
    } else if a == 0.0 && b == 0.0 {
        ("exp(Cε^{−(p−1)/2})".into(), None)
    } else if a < 0.0 && b > 0.0 {
        ("Cε^{−(p−1)/(−a)}".into(), Some((p - 1.0) / -a))
    } else if a < 0.0 && b == 0.0 {
        ("φ⁻¹(Cε^{−(p−1)})".into(), None)
    } else {
        // a + b < 0 and b < 0
        ("Cε^{−(p−1)/(−a−b)}".into(), Some((p - 1.0) / -s))
    }
}

/// Table for the `|u|^p` problem with `∫ g = 0`.
pub fn classify_u_zero(p: f64, a: f64, b: f64) -> (String, Option<f64>) {
    let s = a + b;
    let k = p * (p - 1.0);
    if a > 0.0 && s > 0.0 {
        ("global".into(), None)
    } else if a == 0.0 && b > 0.0 {
        ("exp(Cε^{−(p−1)})".into(), None)
    } else if s == 0.0 && a > 0.0 {
        ("exp(Cε^{−p(p−1)})".into(), None)
    } else if a == 0.0 && b == 0.0 {
        ("exp(Cε^{−p(p−1)/(p+1)})".into(), None)
    } else if a < 0.0 && b > 0.0 {
        ("Cε^{−(p−1)/(−a)}".into(), Some((p - 1.0) / -a))
    } else if a < 0.0 && b == 0.0 {
        ("ψ₁⁻¹(Cε^{−p(p−1)})".into(), None)
    } else if a < 0.0 && b < 0.0 {
        ("Cε^{−p(p−1)/(−pa−b)}".into(), Some(k / (-p * a - b)))
    } else if a == 0.0 && b < 0.0 {
        ("ψ₂⁻¹(Cε^{−p(p−1)})".into(), None)
    } else {
        // a + b < 0 and a > 0
        ("Cε^{−p(p−1)/(−a−b)}".into(), Some(k / -s))
    }
}

/// Label of one `(a, b)` point in the chosen table.
pub fn phase_label(p: f64, a: f64, b: f64, mode: PhaseMode) -> Result<(String, Option<f64>)> {
    require_p(p)?;
    Ok(match mode {
        PhaseMode::DtTable => {
            let r = classify_regime(p, a, b)?;
            (r.kind.name().to_string(), r.exponent)
        }
        PhaseMode::UNonzeroTable => classify_u_nonzero(p, a, b),
        PhaseMode::UZeroTable => classify_u_zero(p, a, b),
    })
}

/// `k`-th of `n` equispaced points on `[lo, hi]`, computed so that symmetric
/// ranges hit 0 exactly.
fn grid_point(lo: f64, hi: f64, k: usize, n: usize) -> f64 {
    let m = (n - 1) as f64;
    (lo * (m - k as f64) + hi * k as f64) / m
}

/// Regime labels on an `n_a × n_b` grid, `a` varying slowest.
pub fn phase_diagram(
    p: f64,
    a_range: (f64, f64),
    b_range: (f64, f64),
    n_a: usize,
    n_b: usize,
    mode: PhaseMode,
) -> Result<Vec<PhaseCell>> {
    if n_a < 2 || n_b < 2 {
        return Err(Error::Domain(
            "phase diagram needs at least 2 points per axis".into(),
        ));
    }
    let finite = [a_range.0, a_range.1, b_range.0, b_range.1];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("phase diagram ranges must be finite".into()));
    }
    let mut cells = Vec::with_capacity(n_a * n_b);
    for ia in 0..n_a {
        let a = grid_point(a_range.0, a_range.1, ia, n_a);
        for ib in 0..n_b {
            let b = grid_point(b_range.0, b_range.1, ib, n_b);
            let (label, exponent) = phase_label(p, a, b, mode)?;
            cells.push(PhaseCell {
                a,
                b,
                label,
                exponent,
            });
        }
    }
    Ok(cells)
}

/// CSV `a,b,label,exponent`.
pub fn write_phase_csv<W: Write>(cells: &[PhaseCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "b", "label", "exponent"])?;
    for c in cells {
        let e = c.exponent.map(|e| e.to_string()).unwrap_or_default();
        w.write_record([c.a.to_string(), c.b.to_string(), c.label.clone(), e])?;
    }
    w.flush()?;
    Ok(())
}

/// Integer convenience for the exact recursion checks.
pub fn rational_int(k: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(k))
}
