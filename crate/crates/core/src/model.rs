//! Domain types shared by every module: model parameters, initial data,
//! the characteristic lattice and run results.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that a length is an integer
/// multiple of the lattice step.
pub const ALIGNMENT_TOL: f64 = 1e-9;

/// Exponents and amplitude of `u_tt - u_xx = |u_t|^p / (<t+<x>>^{1+a} <t-<x>>^{1+b})`
/// with data `(eps f, eps g)` supported in `|x| <= R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub radius: f64,
}

impl ModelParams {
    pub fn new(p: f64, a: f64, b: f64, epsilon: f64, radius: f64) -> Self {
        Self {
            p,
            a,
            b,
            epsilon,
            radius,
        }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    /// `p(1+a)+b`, the quantity separating the interior regimes.
    pub fn interaction(&self) -> f64 {
        self.p * (1.0 + self.a) + self.b
    }
}

/// Built-in compactly supported profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Zero,
    /// `(1 - (x/R)^2)^3` on `|x| < R`.
    Bump,
    /// Two bumps of radius `R/2` centred at `±R/2`.
    BumpPair,
}

/// `(1-s^2)^3` and its first two derivatives, zero for `|s| >= 1`.
fn bump_shape(s: f64) -> (f64, f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let value = q * q * q;
    let d1 = -6.0 * s * q * q;
    let d2 = -6.0 * q * q + 24.0 * s * s * q;
    (value, d1, d2)
}

/// Antiderivative of `(1-s^2)^3` normalised to vanish at `s = -1`.
fn bump_primitive(s: f64) -> f64 {
    let s = s.clamp(-1.0, 1.0);
    let s2 = s * s;
    // s - s^3 + 3 s^5 / 5 - s^7 / 7, plus 16/35
    s * (1.0 + s2 * (-1.0 + s2 * (0.6 - s2 / 7.0))) + 16.0 / 35.0
}

/// One component (`f` or `g`) of the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub family: Family,
    pub amplitude: f64,
}

impl Profile {
    pub const ZERO: Profile = Profile {
        family: Family::Zero,
        amplitude: 0.0,
    };

    pub fn bump(amplitude: f64) -> Self {
        Self {
            family: Family::Bump,
            amplitude,
        }
    }

    pub fn bump_pair(amplitude: f64) -> Self {
        Self {
            family: Family::BumpPair,
            amplitude,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.family == Family::Zero || self.amplitude == 0.0
    }

    /// Value, first and second derivative at `x` for support radius `radius`.
    pub fn jet(&self, x: f64, radius: f64) -> (f64, f64, f64) {
        match self.family {
            Family::Zero => (0.0, 0.0, 0.0),
            Family::Bump => {
                let (v, d1, d2) = bump_shape(x / radius);
                let k = self.amplitude;
                (k * v, k * d1 / radius, k * d2 / (radius * radius))
            }
            Family::BumpPair => {
                let r = 0.5 * radius;
                let (v1, d11, d21) = bump_shape((x - r) / r);
                let (v2, d12, d22) = bump_shape((x + r) / r);
                let k = self.amplitude;
                (
                    k * (v1 + v2),
                    k * (d11 + d12) / r,
                    k * (d21 + d22) / (r * r),
                )
            }
        }
    }

    pub fn value(&self, x: f64, radius: f64) -> f64 {
        self.jet(x, radius).0
    }

    pub fn derivative(&self, x: f64, radius: f64) -> f64 {
        self.jet(x, radius).1
    }

    pub fn second_derivative(&self, x: f64, radius: f64) -> f64 {
        self.jet(x, radius).2
    }

    /// `∫_{-∞}^x` of the profile, in closed form.
    pub fn primitive(&self, x: f64, radius: f64) -> f64 {
        match self.family {
            Family::Zero => 0.0,
            Family::Bump => self.amplitude * radius * bump_primitive(x / radius),
            Family::BumpPair => {
                let r = 0.5 * radius;
                self.amplitude * r * (bump_primitive((x - r) / r) + bump_primitive((x + r) / r))
            }
        }
    }

    /// Total integral over the real line.
    pub fn integral(&self, radius: f64) -> f64 {
        self.primitive(radius, radius)
    }

    /// Supremum of `|value|` and `|derivative|`, respectively.
    pub fn sup_bounds(&self, radius: f64) -> (f64, f64) {
        match self.family {
            Family::Zero => (0.0, 0.0),
            // max |d/ds (1-s^2)^3| = 96 / (25 sqrt 5) at s = 1/sqrt 5
            Family::Bump => {
                let k = self.amplitude.abs();
                (k, k * 96.0 / (25.0 * 5f64.sqrt()) / radius)
            }
            Family::BumpPair => {
                let k = self.amplitude.abs();
                (k, k * 96.0 / (25.0 * 5f64.sqrt()) / (0.5 * radius))
            }
        }
    }
}

/// Initial displacement `f` and velocity `g`, both supported in `|x| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub f: Profile,
    pub g: Profile,
    #[serde(rename = "R")]
    pub radius: f64,
}

impl InitialData {
    pub fn new(f: Profile, g: Profile, radius: f64) -> Self {
        Self { f, g, radius }
    }

    pub fn zero(radius: f64) -> Self {
        Self::new(Profile::ZERO, Profile::ZERO, radius)
    }

    /// `f ≡ 0`, `g` a single bump; the default for blow-up sweeps.
    pub fn speed_bump(amplitude: f64, radius: f64) -> Self {
        Self::new(Profile::ZERO, Profile::bump(amplitude), radius)
    }

    pub fn f(&self, x: f64) -> f64 {
        self.f.value(x, self.radius)
    }

    pub fn df(&self, x: f64) -> f64 {
        self.f.derivative(x, self.radius)
    }

    pub fn d2f(&self, x: f64) -> f64 {
        self.f.second_derivative(x, self.radius)
    }

    pub fn g(&self, x: f64) -> f64 {
        self.g.value(x, self.radius)
    }

    /// `∫_{lo}^{hi} g`.
    pub fn g_integral(&self, lo: f64, hi: f64) -> f64 {
        self.g.primitive(hi, self.radius) - self.g.primitive(lo, self.radius)
    }

    /// Upper bound for `sup |u_t^0|` (unscaled by epsilon).
    pub fn free_speed_bound(&self) -> f64 {
        let (_, df) = self.f.sup_bounds(self.radius);
        let (g, _) = self.g.sup_bounds(self.radius);
        df + g
    }
}

/// Lattice request: `Δx = Δt = h` up to `t_max`, spatial margin `pad` beyond `t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub h: f64,
    pub t_max: f64,
    pub pad: f64,
}

impl GridSpec {
    pub fn new(h: f64, t_max: f64, pad: f64) -> Self {
        Self { h, t_max, pad }
    }

    /// Same horizon and margin with half the step.
    pub fn refined(&self) -> Self {
        Self {
            h: 0.5 * self.h,
            ..*self
        }
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self)
    }
}

fn integer_ratio(len: f64, h: f64) -> Option<usize> {
    let r = len / h;
    let n = r.round();
    if !r.is_finite() || n < 0.0 || (r - n).abs() > ALIGNMENT_TOL * r.abs().max(1.0) {
        None
    } else {
        Some(n as usize)
    }
}

/// Node set `x_i = -(t_max + pad) + i h`, `t_n = n h`. Because `Δx = Δt`,
/// `x_i ± t_n` is always a lattice abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub h: f64,
    /// Index of the last time level (`t_max = levels * h`).
    pub levels: usize,
    /// `x_{center} = 0`; there are `2 * center + 1` spatial nodes.
    pub center: usize,
}

impl Lattice {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        if !(grid.h > 0.0) || !grid.h.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "h must be positive, got {}",
                grid.h
            )));
        }
        let levels = integer_ratio(grid.t_max, grid.h).ok_or_else(|| {
            Error::InvalidGrid(format!(
                "t_max / h = {} is not an integer",
                grid.t_max / grid.h
            ))
        })?;
        let pad = integer_ratio(grid.pad, grid.h).ok_or_else(|| {
            Error::InvalidGrid(format!("pad / h = {} is not an integer", grid.pad / grid.h))
        })?;
        Ok(Self {
            h: grid.h,
            levels,
            center: levels + pad,
        })
    }

    pub fn nodes(&self) -> usize {
        2 * self.center + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.center as f64) * self.h
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.h
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.levels)
    }

    pub fn contains(&self, i: i64) -> bool {
        i >= 0 && (i as usize) < self.nodes()
    }

    /// Inclusive index range of nodes with `|x_i| <= t_n + radius`.
    pub fn support_range(&self, n: usize, radius: f64) -> (usize, usize) {
        let reach =
            ((n as f64 * self.h + radius) / self.h * (1.0 + ALIGNMENT_TOL)).floor() as usize;
        let reach = reach.min(self.center);
        (self.center - reach, self.center + reach)
    }

    /// Largest level index with `t_n <= t` (within alignment tolerance).
    pub fn level_at(&self, t: f64) -> usize {
        let n = (t / self.h * (1.0 + ALIGNMENT_TOL) + ALIGNMENT_TOL).floor();
        (n.max(0.0) as usize).min(self.levels)
    }
}

/// A single failed invariant reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks every type invariant; empty result means the configuration is usable.
pub fn validate(params: &ModelParams, data: &InitialData, grid: &GridSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let finite = [
        ("p", params.p),
        ("a", params.a),
        ("b", params.b),
        ("epsilon", params.epsilon),
        ("R", params.radius),
    ];
    for (name, v) in finite {
        if !v.is_finite() {
            out.push(Violation::new(name, format!("{name} must be finite")));
        }
    }
    if !(params.p > 1.0) {
        out.push(Violation::new("p", "p must exceed 1"));
    }
    if !(params.radius >= 1.0) {
        out.push(Violation::new("R", "R must be ≥ 1"));
    }
    if !(params.epsilon >= 0.0) {
        out.push(Violation::new("epsilon", "epsilon must be ≥ 0"));
    }
    if data.radius != params.radius {
        out.push(Violation::new(
            "data.R",
            format!(
                "data radius {} differs from model radius {}",
                data.radius, params.radius
            ),
        ));
    }
    for (name, prof) in [("f", data.f), ("g", data.g)] {
        if !prof.amplitude.is_finite() {
            out.push(Violation::new(
                name,
                format!("{name} amplitude must be finite"),
            ));
        }
    }
    if !(grid.h > 0.0) || !grid.h.is_finite() {
        out.push(Violation::new("grid.h", "h must be positive"));
    } else {
        if !(grid.t_max > 0.0) || integer_ratio(grid.t_max, grid.h).is_none() {
            out.push(Violation::new(
                "grid.t_max",
                "t_max must be a positive multiple of h",
            ));
        }
        if integer_ratio(grid.pad, grid.h).is_none() {
            out.push(Violation::new("grid.pad", "pad must be a multiple of h"));
        }
    }
    if !(grid.pad >= params.radius) {
        out.push(Violation::new("grid.pad", "pad must be ≥ R"));
    }
    out
}

/// Validates and converts violations into an error.
pub fn ensure_valid(params: &ModelParams, data: &InitialData, grid: &GridSpec) -> Result<()> {
    let violations = validate(params, data, grid);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(violations))
    }
}

/// Node values on a [`Lattice`]: `levels[n][i]` is the value at `(x_i, t_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField {
    pub lattice: Lattice,
    pub levels: Vec<Vec<f64>>,
}

impl NodeField {
    pub fn zeros(lattice: Lattice, levels: usize) -> Self {
        Self {
            lattice,
            levels: vec![vec![0.0; lattice.nodes()]; levels + 1],
        }
    }

    /// Samples `f(x, t)` at every node up to level `levels`.
    pub fn from_fn(lattice: Lattice, levels: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let levels = (0..=levels)
            .map(|n| {
                let t = lattice.t(n);
                (0..lattice.nodes()).map(|i| f(lattice.x(i), t)).collect()
            })
            .collect();
        Self { lattice, levels }
    }

    /// Index of the last stored level.
    pub fn last_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn get(&self, i: i64, n: usize) -> Option<f64> {
        if !self.lattice.contains(i) {
            return None;
        }
        self.levels.get(n).map(|row| row[i as usize])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            lattice: self.lattice,
            levels: self
                .levels
                .iter()
                .map(|row| row.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Node-wise `sup |self - other|` over the common levels.
    pub fn sup_diff(&self, other: &NodeField) -> f64 {
        self.levels
            .iter()
            .zip(other.levels.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Solution of the characteristic integral equation for `U = u_t`.
#[derive(Debug, Clone)]
pub struct CharField {
    pub grid: GridSpec,
    pub lattice: Lattice,
    /// Every level when the run kept full storage; `None` for sup-only runs.
    pub levels: Option<NodeField>,
    /// Last completed level.
    pub last_level: usize,
    /// `sup |U|` per completed level.
    pub sup_history: Vec<f64>,
    /// `sup |w U|` per completed level, for the weight of [`Self::weight_params`].
    pub weighted_sup_history: Vec<f64>,
    pub weight_params: ModelParams,
    /// Trapezoid sums of `|U|^p W` along each backward characteristic of the
    /// two families through the nodes of the last completed level.
    pub plus_sums: Vec<f64>,
    pub minus_sums: Vec<f64>,
}

impl CharField {
    pub fn value(&self, i: usize, n: usize) -> Option<f64> {
        self.levels.as_ref().and_then(|l| l.get(i as i64, n))
    }

    pub fn u_t(&self) -> Option<&NodeField> {
        self.levels.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifespanStatus {
    Blowup,
    Survived,
    InnerIterationFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupCause {
    ThresholdExceeded,
    FixedPointDiverged,
}

impl fmt::Display for LifespanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LifespanStatus::Blowup => "blowup",
            LifespanStatus::Survived => "survived",
            LifespanStatus::InnerIterationFailed => "inner_iteration_failed",
        };
        f.write_str(s)
    }
}

/// Outcome of one time-marching run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanEstimate {
    pub status: LifespanStatus,
    #[serde(rename = "T_blow")]
    pub t_blow: Option<f64>,
    pub h: f64,
    pub cause: Option<BlowupCause>,
    #[serde(skip)]
    pub sup_history: Vec<f64>,
}

impl LifespanEstimate {
    pub fn survived(h: f64, sup_history: Vec<f64>) -> Self {
        Self {
            status: LifespanStatus::Survived,
            t_blow: None,
            h,
            cause: None,
            sup_history,
        }
    }

    /// `true` for both detected blow-up and inner fixed-point failure.
    pub fn is_blowup(&self) -> bool {
        self.t_blow.is_some()
    }

    /// JSON lifespan record `{status, T_blow, h, cause}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("lifespan record serializes")
    }
}

/// Run configuration as read from JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub f: Profile,
    pub g: Profile,
    pub grid: GridSpec,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.p, self.a, self.b, self.epsilon, self.radius)
    }

    pub fn data(&self) -> InitialData {
        InitialData::new(self.f, self.g, self.radius)
    }
}
