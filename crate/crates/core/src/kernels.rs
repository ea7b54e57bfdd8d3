//! Pointwise weights, free-wave formulas and trapezoid quadrature of the
//! Duhamel operators on the characteristic lattice.

use crate::error::{Error, Result};
use crate::model::{InitialData, Lattice, ModelParams, NodeField};

/// Japanese bracket `<x> = sqrt(1 + x^2)`.
#[inline]
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// `(1 + y^2)^{e}`, with cheap paths for the exponents that occur most.
#[inline]
fn bracket_sq_pow(y2: f64, e: f64) -> f64 {
    let base = 1.0 + y2;
    if e == 0.0 {
        1.0
    } else if e == -0.5 {
        1.0 / base.sqrt()
    } else if e == -1.0 {
        1.0 / base
    } else if e == 0.5 {
        base.sqrt()
    } else if e == 1.0 {
        base
    } else {
        base.powf(e)
    }
}

/// Precomputed exponents of the source weight
/// `<t+<x>>^{-(1+a)} <t-<x>>^{-(1+b)}`.
#[derive(Debug, Clone, Copy)]
pub struct SourceWeight {
    half_plus: f64,
    half_minus: f64,
}

impl SourceWeight {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            half_plus: -0.5 * (1.0 + params.a),
            half_minus: -0.5 * (1.0 + params.b),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let bx = bracket(x);
        let plus = t + bx;
        let minus = t - bx;
        bracket_sq_pow(plus * plus, self.half_plus) * bracket_sq_pow(minus * minus, self.half_minus)
    }
}

/// `<t+<x>>^{-(1+a)} <t-<x>>^{-(1+b)}`; strictly positive and finite.
pub fn nonlinear_weight(x: f64, t: f64, params: &ModelParams) -> f64 {
    SourceWeight::new(params).eval(x, t)
}

/// The two characteristic brackets at a space-time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPoint {
    pub x: f64,
    pub t: f64,
    /// `<t + <x>>`
    pub value_plus: f64,
    /// `<t - <x>>`
    pub value_minus: f64,
}

impl WeightPoint {
    pub fn at(x: f64, t: f64) -> Self {
        let bx = bracket(x);
        Self {
            x,
            t,
            value_plus: bracket(t + bx),
            value_minus: bracket(t - bx),
        }
    }

    /// `2^{-1}(1+t+|x|) <= <t+<x>> <= sqrt2 (1+t+|x|)` and
    /// `3^{-1}(1+|t-|x||) <= <t-<x>> <= sqrt2 (1+|t-|x||)`.
    pub fn sandwich_holds(&self) -> bool {
        let s2 = std::f64::consts::SQRT_2;
        let far = 1.0 + self.t + self.x.abs();
        let near = 1.0 + (self.t - self.x.abs()).abs();
        0.5 * far <= self.value_plus
            && self.value_plus <= s2 * far
            && near / 3.0 <= self.value_minus
            && self.value_minus <= s2 * near
    }
}

/// `eps/2 {f'(x+t) - f'(x-t) + g(x+t) + g(x-t)}`.
pub fn free_solution_dt(x: f64, t: f64, data: &InitialData, epsilon: f64) -> f64 {
    let r = x + t;
    let l = x - t;
    0.5 * epsilon * (data.df(r) - data.df(l) + data.g(r) + data.g(l))
}

/// d'Alembert value `eps u^0(x,t)`; the `g` integral uses the closed-form primitive.
pub fn free_solution(x: f64, t: f64, data: &InitialData, epsilon: f64) -> f64 {
    let r = x + t;
    let l = x - t;
    epsilon * (0.5 * (data.f(r) + data.f(l)) + 0.5 * data.g_integral(l, r))
}

/// Weight `w(x,t)` of the sup-norm in which the iteration contracts.
///
/// `χ = 1` exactly when `t - |x| > R` (strict). `a = -1` uses the
/// `-1 <= a < 0` branch. For `a = 0` and `R = 1` the outer branch is
/// `1 / log(t + |x| + 1)`, which is infinite at the origin.
pub fn weight_w(x: f64, t: f64, params: &ModelParams) -> f64 {
    let a = params.a;
    let r = params.radius;
    let ax = x.abs();
    let inside = t - ax > r;
    if inside {
        if a < -1.0 {
            (1.0 + t + ax).powf(1.0 + a)
        } else {
            (1.0 + t - ax).powf(1.0 + a)
        }
    } else if a > 0.0 {
        1.0
    } else if a == 0.0 {
        1.0 / (t + ax + r).ln()
    } else {
        (t + ax + r).powf(a)
    }
}

/// Anything that can provide values on lattice nodes.
pub trait NodeSource {
    /// Value at spatial index `i`, level `n`; `None` if the node is not available.
    fn node(&self, i: i64, n: usize) -> Option<f64>;
}

impl NodeSource for NodeField {
    fn node(&self, i: i64, n: usize) -> Option<f64> {
        self.get(i, n)
    }
}

impl<F: Fn(i64, usize) -> Option<f64>> NodeSource for F {
    fn node(&self, i: i64, n: usize) -> Option<f64> {
        self(i, n)
    }
}

fn fetch(src: &impl NodeSource, i: i64, n: usize) -> Result<f64> {
    src.node(i, n).ok_or(Error::MissingNode { i, n })
}

/// Trapezoid value of `L'_{a,b}(F)` at node `(i, n)`, summing `F·W` along the
/// two backward characteristics `x ± (t - s)`.
pub fn duhamel_lprime(
    src: &impl NodeSource,
    lattice: &Lattice,
    i: usize,
    n: usize,
    params: &ModelParams,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let w = SourceWeight::new(params);
    let h = lattice.h;
    let mut total = 0.0;
    for m in 0..=n {
        let coef = if m == 0 || m == n { 0.5 } else { 1.0 };
        let t = lattice.t(m);
        let back = (n - m) as i64;
        for k in [i as i64 + back, i as i64 - back] {
            let v = fetch(src, k, m)?;
            let x = (k - lattice.center as i64) as f64 * h;
            total += coef * v * w.eval(x, t);
        }
    }
    Ok(0.5 * h * total)
}

/// 2D trapezoid value of `L_{a,b}(F)` at node `(i, n)` over the backward
/// characteristic triangle.
pub fn duhamel_l(
    src: &impl NodeSource,
    lattice: &Lattice,
    i: usize,
    n: usize,
    params: &ModelParams,
) -> Result<f64> {
    let w = SourceWeight::new(params);
    let h = lattice.h;
    let mut outer = 0.0;
    for m in 0..n {
        let coef = if m == 0 { 0.5 } else { 1.0 };
        let t = lattice.t(m);
        let half = (n - m) as i64;
        let mut inner = 0.0;
        for k in (i as i64 - half)..=(i as i64 + half) {
            let c = if k == i as i64 - half || k == i as i64 + half {
                0.5
            } else {
                1.0
            };
            let v = fetch(src, k, m)?;
            let x = (k - lattice.center as i64) as f64 * h;
            inner += c * v * w.eval(x, t);
        }
        outer += coef * inner * h;
    }
    // the level m = n has zero width
    Ok(0.5 * h * outer)
}
