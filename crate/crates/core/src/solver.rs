//! Time marching of `u_t = eps u_t^0 + L'_{a,b}(|u_t|^p)` on the
//! characteristic lattice, plus the Picard-iteration diagnostics.
//!
//! Each characteristic line carries a running trapezoid sum
//! `h (G_0/2 + G_1 + ... + G_m)` of `G = |U|^p W` over the nodes already
//! computed on it; lines of the `x + t = const` family are indexed by
//! `i + n`, the `x - t = const` family by `i - n + N`. The unknown value at
//! `(x_i, t_n)` then solves the scalar equation
//!
//! ```text
//! z = eps u_t^0 + (S_plus + S_minus) / 2 + (h/2) W |z|^p
//! ```
//!
//! so every node costs O(1) and a full run O(N^2).

use log::debug;

use crate::error::{Error, Result};
use crate::kernels::{free_solution_dt, weight_w, SourceWeight};
use crate::model::{
    ensure_valid, BlowupCause, CharField, GridSpec, InitialData, Lattice, LifespanEstimate,
    LifespanStatus, ModelParams, NodeField,
};

/// `|z|^p` with an exact path for `p = 2`.
#[inline]
pub fn abs_pow(z: f64, p: f64) -> f64 {
    if p == 2.0 {
        z * z
    } else if p == 3.0 {
        z.abs() * z * z
    } else {
        z.abs().powf(p)
    }
}

/// How much of the field a march keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    /// Every level is retained in [`CharField::levels`].
    Full,
    /// Only per-level sups are retained.
    SupOnly,
}

/// Controls for [`march`].
#[derive(Debug, Clone, Copy)]
pub struct MarchConfig {
    /// Detection threshold on `sup |U|`; `None` selects [`default_blow_threshold`].
    pub blow_threshold: Option<f64>,
    /// Relative residual `|Φ(z) - z| <= inner_tol · max(1, |z|)`.
    pub inner_tol: f64,
    pub inner_max: usize,
    pub damping: f64,
    pub storage: Storage,
    /// Record `sup |w U|` for every level (one extra weight evaluation per node).
    pub track_weighted: bool,
}

impl Default for MarchConfig {
    fn default() -> Self {
        Self {
            blow_threshold: None,
            inner_tol: 1e-12,
            inner_max: 50,
            damping: 0.5,
            storage: Storage::SupOnly,
            track_weighted: true,
        }
    }
}

impl MarchConfig {
    pub fn full() -> Self {
        Self {
            storage: Storage::Full,
            ..Self::default()
        }
    }
}

/// `10^6 (1 + sup |eps u_t^0|)`.
pub fn default_blow_threshold(params: &ModelParams, data: &InitialData) -> f64 {
    1e6 * (1.0 + params.epsilon * data.free_speed_bound())
}

/// Damped fixed point for `z = c + kappa |z|^p`, started from one undamped step.
/// Returns `None` if the residual does not drop below tolerance.
#[inline]
fn solve_endpoint(c: f64, kappa: f64, p: f64, cfg: &MarchConfig) -> Option<f64> {
    let mut z = c + kappa * abs_pow(c, p);
    for _ in 0..cfg.inner_max {
        let phi = c + kappa * abs_pow(z, p);
        if !phi.is_finite() {
            return None;
        }
        if (phi - z).abs() <= cfg.inner_tol * z.abs().max(1.0) {
            return Some(z);
        }
        z += cfg.damping * (phi - z);
    }
    None
}

/// Integrates the characteristic integral equation level by level.
///
/// Stops at the first level whose `sup |U|` exceeds the threshold (status
/// `Blowup`), where a node's endpoint equation fails to converge
/// (`InnerIterationFailed`), or at `t_max` (`Survived`). A detected time is
/// reported as the midpoint between the last resolved level and the
/// detection level.
pub fn march(
    params: &ModelParams,
    data: &InitialData,
    grid: &GridSpec,
    cfg: &MarchConfig,
) -> Result<(CharField, LifespanEstimate)> {
    ensure_valid(params, data, grid)?;
    let threshold = cfg
        .blow_threshold
        .unwrap_or_else(|| default_blow_threshold(params, data));
    let free_sup = params.epsilon * data.free_speed_bound();
    if !(threshold > free_sup) {
        return Err(Error::Precondition(format!(
            "blow-up threshold {threshold} must exceed sup|eps u_t^0| = {free_sup}"
        )));
    }
    if !(cfg.inner_tol > 0.0) || cfg.inner_max == 0 {
        return Err(Error::Precondition(
            "inner_tol > 0 and inner_max >= 1 required".into(),
        ));
    }

    let lat = Lattice::new(grid)?;
    let h = lat.h;
    let big_n = lat.levels;
    let nodes = lat.nodes();
    let p = params.p;
    let eps = params.epsilon;
    let radius = params.radius;
    let source = SourceWeight::new(params);

    let mut plus_open = vec![0.0; nodes + big_n + 1];
    let mut minus_open = vec![0.0; nodes + big_n + 1];
    let mut row = vec![0.0; nodes];
    let mut g_row = vec![0.0; nodes];
    let mut g_new = vec![0.0; nodes];

    let mut sup_history = Vec::with_capacity(big_n + 1);
    let mut weighted_history = Vec::with_capacity(big_n + 1);
    let mut stored: Vec<Vec<f64>> = Vec::new();

    let weighted_sup = |row: &[f64], lo: usize, hi: usize, t: f64| -> f64 {
        let mut m = 0.0f64;
        for (i, &v) in row.iter().enumerate().take(hi + 1).skip(lo) {
            if v != 0.0 {
                m = m.max((weight_w(lat.x(i), t, params) * v).abs());
            }
        }
        m
    };

    // level 0: U = eps g (the f' terms cancel), no Duhamel contribution
    let (lo, hi) = lat.support_range(0, radius);
    let mut sup0 = 0.0f64;
    for i in lo..=hi {
        let x = lat.x(i);
        let u = free_solution_dt(x, 0.0, data, eps);
        row[i] = u;
        sup0 = sup0.max(u.abs());
        let g = abs_pow(u, p) * source.eval(x, 0.0);
        g_row[i] = g;
        plus_open[i] = 0.5 * h * g;
        minus_open[i + big_n] = 0.5 * h * g;
    }
    sup_history.push(sup0);
    weighted_history.push(if cfg.track_weighted {
        weighted_sup(&row, lo, hi, 0.0)
    } else {
        f64::NAN
    });
    if cfg.storage == Storage::Full {
        stored.push(row.clone());
    }

    let mut last_level = 0;
    let mut outcome: Option<(LifespanStatus, BlowupCause, usize)> = None;

    for n in 1..=big_n {
        let t = lat.t(n);
        let (lo, hi) = lat.support_range(n, radius);
        row.iter_mut().for_each(|v| *v = 0.0);
        let mut sup = 0.0f64;
        let mut failed = None;
        for i in lo..=hi {
            let x = lat.x(i);
            let known = 0.5 * (plus_open[i + n] + minus_open[i + big_n - n]);
            let c = free_solution_dt(x, t, data, eps) + known;
            let w = source.eval(x, t);
            match solve_endpoint(c, 0.5 * h * w, p, cfg) {
                Some(z) => {
                    row[i] = z;
                    g_new[i] = abs_pow(z, p) * w;
                    sup = sup.max(z.abs());
                }
                None if c.is_finite() => {
                    failed = Some(LifespanStatus::InnerIterationFailed);
                    break;
                }
                None => {
                    failed = Some(LifespanStatus::Blowup);
                    break;
                }
            }
        }
        if let Some(status) = failed {
            let cause = match status {
                LifespanStatus::InnerIterationFailed => BlowupCause::FixedPointDiverged,
                _ => BlowupCause::ThresholdExceeded,
            };
            outcome = Some((status, cause, n));
            break;
        }
        if !sup.is_finite() {
            outcome = Some((LifespanStatus::Blowup, BlowupCause::ThresholdExceeded, n));
            break;
        }
        // the support only grows, so [lo, hi] covers every nonzero entry
        for i in lo..=hi {
            plus_open[i + n] += h * g_new[i];
            minus_open[i + big_n - n] += h * g_new[i];
        }
        g_row[lo..=hi].copy_from_slice(&g_new[lo..=hi]);
        last_level = n;
        sup_history.push(sup);
        weighted_history.push(if cfg.track_weighted {
            weighted_sup(&row, lo, hi, t)
        } else {
            f64::NAN
        });
        if cfg.storage == Storage::Full {
            stored.push(row.clone());
        }
        if sup > threshold {
            outcome = Some((LifespanStatus::Blowup, BlowupCause::ThresholdExceeded, n));
            break;
        }
    }

    // closed trapezoid sums through the nodes of the last completed level
    let plus_sums: Vec<f64> = (0..nodes)
        .map(|i| plus_open[i + last_level] - 0.5 * h * g_row[i])
        .collect();
    let minus_sums: Vec<f64> = (0..nodes)
        .map(|i| minus_open[i + big_n - last_level] - 0.5 * h * g_row[i])
        .collect();

    let estimate = match outcome {
        None => LifespanEstimate::survived(h, sup_history.clone()),
        Some((status, cause, n)) => {
            debug!(
                "march stopped at level {n} (t = {}) with {status}",
                lat.t(n)
            );
            LifespanEstimate {
                status,
                t_blow: Some(lat.t(n) - 0.5 * h),
                h,
                cause: Some(cause),
                sup_history: sup_history.clone(),
            }
        }
    };
    let levels = match cfg.storage {
        Storage::Full => Some(NodeField {
            lattice: lat,
            levels: stored,
        }),
        Storage::SupOnly => None,
    };
    let field = CharField {
        grid: *grid,
        lattice: lat,
        levels,
        last_level,
        sup_history,
        weighted_sup_history: weighted_history,
        weight_params: *params,
        plus_sums,
        minus_sums,
    };
    Ok((field, estimate))
}

/// `sup |w U|` over the nodes of `field` with `t_n <= t`.
///
/// Zero values contribute zero even where `w` is infinite.
pub fn weighted_norm(field: &NodeField, params: &ModelParams, t: f64) -> f64 {
    let lat = field.lattice;
    let top = lat.level_at(t).min(field.last_level());
    let mut m = 0.0f64;
    for n in 0..=top {
        let tn = lat.t(n);
        for (i, &v) in field.levels[n].iter().enumerate() {
            if v != 0.0 {
                m = m.max((weight_w(lat.x(i), tn, params) * v).abs());
            }
        }
    }
    m
}

/// `‖U‖ = sup_{t <= T} |w U|` of a marched field.
///
/// Without stored levels the per-level history recorded during the march
/// is used, which requires the same weight (`a` and `R`).
pub fn weighted_sup_norm(field: &CharField, params: &ModelParams, t: f64) -> Result<f64> {
    if let Some(levels) = &field.levels {
        return Ok(weighted_norm(levels, params, t));
    }
    let wp = field.weight_params;
    if wp.a != params.a || wp.radius != params.radius {
        return Err(Error::Precondition(
            "field has no stored levels and was marched with a different weight".into(),
        ));
    }
    let top = field.lattice.level_at(t).min(field.last_level);
    let hist = &field.weighted_sup_history[..=top];
    if hist.iter().any(|v| v.is_nan()) {
        return Err(Error::Precondition(
            "weighted history was not tracked".into(),
        ));
    }
    Ok(hist.iter().copied().fold(0.0, f64::max))
}

/// Explicit trapezoid evaluation of `L'_{a,b}(v)` at every node of levels
/// `0..=levels.last_level()`, given precomputed source weights.
///
/// `v` must vanish outside the lattice (true for any field supported in
/// `|x| <= t + R` when `pad >= R`).
pub fn lprime_field(v: &NodeField, weights: &NodeField) -> NodeField {
    let lat = v.lattice;
    let h = lat.h;
    let top = v.last_level();
    let nodes = lat.nodes();
    let mut plus_open = vec![0.0; nodes + top + 1];
    let mut minus_open = vec![0.0; nodes + top + 1];
    let mut out = NodeField::zeros(lat, top);
    for n in 0..=top {
        let vr = &v.levels[n];
        let wr = &weights.levels[n];
        let orow = &mut out.levels[n];
        for i in 0..nodes {
            let g = vr[i] * wr[i];
            let kp = i + n;
            let km = i + top - n;
            if n > 0 {
                // integral = open sum so far + h/2 G_n on each family
                orow[i] = 0.5 * (plus_open[kp] + minus_open[km]) + 0.5 * h * g;
                plus_open[kp] += h * g;
                minus_open[km] += h * g;
            } else {
                plus_open[kp] = 0.5 * h * g;
                minus_open[km] = 0.5 * h * g;
            }
        }
    }
    out
}

/// Source weights `W(x_i, t_n)` on the levels `0..=levels`.
pub fn source_weight_field(lattice: Lattice, levels: usize, params: &ModelParams) -> NodeField {
    let w = SourceWeight::new(params);
    NodeField::from_fn(lattice, levels, |x, t| w.eval(x, t))
}

/// `eps u_t^0` sampled on the levels `0..=levels`.
pub fn free_dt_field(lattice: Lattice, levels: usize, data: &InitialData, eps: f64) -> NodeField {
    NodeField::from_fn(lattice, levels, |x, t| free_solution_dt(x, t, data, eps))
}

/// One row of [`PicardReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardStep {
    pub j: usize,
    /// `‖U_j‖`
    pub norm: f64,
    /// `‖U_{j+1} - U_j‖`
    pub diff: f64,
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    pub steps: Vec<PicardStep>,
    /// `U_2 = L'(|eps u_t^0|^p)`.
    pub second: NodeField,
    /// Last iterate computed.
    pub last: NodeField,
    /// Iteration at which a non-finite value appeared.
    pub diverged_at: Option<usize>,
}

impl PicardReport {
    /// `‖U_{j+1} - U_j‖ / ‖U_j - U_{j-1}‖` for `j >= 2`, skipping zero
    /// denominators and numerators already at roundoff level relative to `‖U_j‖`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.steps
            .windows(2)
            .filter(|w| w[0].diff > 0.0 && w[1].diff > ROUNDOFF_FLOOR * w[1].norm)
            .map(|w| w[1].diff / w[0].diff)
            .collect()
    }
}

/// Differences below this multiple of the iterate norm are roundoff.
const ROUNDOFF_FLOOR: f64 = 1e3 * f64::EPSILON;

struct PicardSetup {
    lattice: Lattice,
    top: usize,
    free: NodeField,
    weights: NodeField,
}

fn picard_setup(
    params: &ModelParams,
    data: &InitialData,
    grid: &GridSpec,
    t: f64,
) -> Result<PicardSetup> {
    ensure_valid(params, data, grid)?;
    let lattice = Lattice::new(grid)?;
    if t > lattice.t_max() * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "T = {t} exceeds grid horizon {}",
            lattice.t_max()
        )));
    }
    let top = lattice.level_at(t);
    Ok(PicardSetup {
        lattice,
        top,
        free: free_dt_field(lattice, top, data, params.epsilon),
        weights: source_weight_field(lattice, top, params),
    })
}

fn picard_step(u: &NodeField, setup: &PicardSetup, p: f64) -> NodeField {
    let mut src = u.clone();
    for (row, frow) in src.levels.iter_mut().zip(setup.free.levels.iter()) {
        for (v, f) in row.iter_mut().zip(frow.iter()) {
            *v = abs_pow(*v + f, p);
        }
    }
    lprime_field(&src, &setup.weights)
}

fn diff_field(a: &NodeField, b: &NodeField) -> NodeField {
    let mut out = a.clone();
    for (ra, rb) in out.levels.iter_mut().zip(b.levels.iter()) {
        for (x, y) in ra.iter_mut().zip(rb.iter()) {
            *x -= y;
        }
    }
    out
}

/// Materialises `U_{j+1} = L'(|U_j + eps u_t^0|^p)`, `U_1 = 0`, on `[0, T]`
/// and records weighted norms of the iterates and their differences.
pub fn picard_iterate(
    params: &ModelParams,
    data: &InitialData,
    grid: &GridSpec,
    t: f64,
    j_max: usize,
) -> Result<PicardReport> {
    if j_max < 2 {
        return Err(Error::Precondition("j_max must be at least 2".into()));
    }
    let setup = picard_setup(params, data, grid, t)?;
    let mut current = NodeField::zeros(setup.lattice, setup.top);
    let mut steps = Vec::with_capacity(j_max);
    let mut second = None;
    let mut diverged_at = None;
    for j in 1..=j_max {
        let next = picard_step(&current, &setup, params.p);
        if j == 1 {
            second = Some(next.clone());
        }
        let norm = weighted_norm(&current, params, t);
        let diff = weighted_norm(&diff_field(&next, &current), params, t);
        if !norm.is_finite() || !diff.is_finite() || !next.sup_abs().is_finite() {
            diverged_at = Some(j);
            break;
        }
        steps.push(PicardStep { j, norm, diff });
        current = next;
    }
    Ok(PicardReport {
        steps,
        second: second.expect("at least one iteration"),
        last: current,
        diverged_at,
    })
}

/// Iterates until the unweighted sup difference drops below `tol` and returns
/// the total `u_t = U + eps u_t^0` on `[0, T]`.
pub fn picard_limit(
    params: &ModelParams,
    data: &InitialData,
    grid: &GridSpec,
    t: f64,
    tol: f64,
    j_max: usize,
) -> Result<NodeField> {
    let setup = picard_setup(params, data, grid, t)?;
    let mut current = NodeField::zeros(setup.lattice, setup.top);
    for _ in 0..j_max {
        let next = picard_step(&current, &setup, params.p);
        let d = next.sup_diff(&current);
        current = next;
        if !d.is_finite() {
            break;
        }
        if d < tol {
            let mut total = current;
            for (row, frow) in total.levels.iter_mut().zip(setup.free.levels.iter()) {
                for (v, f) in row.iter_mut().zip(frow.iter()) {
                    *v += f;
                }
            }
            return Ok(total);
        }
    }
    Err(Error::Domain(format!(
        "Picard iteration did not reach {tol} in {j_max} steps"
    )))
}

/// Largest `eps` in `[lo, hi]` for which every observed contraction ratio is
/// at most 1/2, located by bisection.
pub fn contraction_threshold(
    params: &ModelParams,
    data: &InitialData,
    grid: &GridSpec,
    t: f64,
    j_max: usize,
    (mut lo, mut hi): (f64, f64),
    iterations: usize,
) -> Result<f64> {
    let contracts = |eps: f64| -> Result<bool> {
        let rep = picard_iterate(&params.with_epsilon(eps), data, grid, t, j_max)?;
        Ok(rep.diverged_at.is_none() && rep.contraction_ratios().iter().all(|&r| r <= 0.5))
    };
    if !contracts(lo)? {
        return Err(Error::Domain(format!("no contraction even at eps = {lo}")));
    }
    if contracts(hi)? {
        return Ok(hi);
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if contracts(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `u(x_i, t_n) = eps f(x_i) + trapezoid ∫_0^{t_n} U(x_i, s) ds`.
pub fn reconstruct_u(field: &CharField, data: &InitialData, epsilon: f64) -> Result<NodeField> {
    let levels = field
        .levels
        .as_ref()
        .ok_or_else(|| Error::Precondition("reconstruction needs a fully stored field".into()))?;
    let lat = field.lattice;
    let h = lat.h;
    let mut out = NodeField::zeros(lat, levels.last_level());
    for i in 0..lat.nodes() {
        out.levels[0][i] = epsilon * data.f(lat.x(i));
    }
    for n in 1..=levels.last_level() {
        for i in 0..lat.nodes() {
            out.levels[n][i] =
                out.levels[n - 1][i] + 0.5 * h * (levels.levels[n - 1][i] + levels.levels[n][i]);
        }
    }
    Ok(out)
}

/// `sup |D_tt u - D_xx u - |U|^p W|` over interior nodes (one-node margin).
pub fn pde_residual(u: &NodeField, field: &CharField, params: &ModelParams) -> Result<f64> {
    let levels = field
        .levels
        .as_ref()
        .ok_or_else(|| Error::Precondition("residual needs a fully stored field".into()))?;
    let lat = u.lattice;
    let h2 = lat.h * lat.h;
    let top = u.last_level().min(levels.last_level());
    let w = SourceWeight::new(params);
    let mut sup = 0.0f64;
    for n in 1..top {
        let t = lat.t(n);
        let (um, u0, up) = (&u.levels[n - 1], &u.levels[n], &u.levels[n + 1]);
        for i in 1..lat.nodes() - 1 {
            let dtt = (up[i] - 2.0 * u0[i] + um[i]) / h2;
            let dxx = (u0[i + 1] - 2.0 * u0[i] + u0[i - 1]) / h2;
            let src = abs_pow(levels.levels[n][i], params.p) * w.eval(lat.x(i), t);
            sup = sup.max((dtt - dxx - src).abs());
        }
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::duhamel_lprime;
    use crate::model::Profile;

    fn setup(eps: f64, a: f64, b: f64) -> (ModelParams, InitialData) {
        (
            ModelParams::new(2.0, a, b, eps, 1.0),
            InitialData::speed_bump(1.0, 1.0),
        )
    }

    #[test]
    fn zero_amplitude_survives_with_zero_field() {
        let (p, d) = setup(0.0, 0.0, 0.0);
        let (field, est) =
            march(&p, &d, &GridSpec::new(0.1, 5.0, 1.0), &MarchConfig::full()).unwrap();
        assert_eq!(est.status, LifespanStatus::Survived);
        assert!(est.t_blow.is_none());
        assert_eq!(field.u_t().unwrap().sup_abs(), 0.0);
    }

    #[test]
    fn endpoint_solver_converges_and_fails() {
        let cfg = MarchConfig::default();
        let z = solve_endpoint(0.3, 0.01, 2.0, &cfg).unwrap();
        assert!((z - 0.3 - 0.01 * z * z).abs() < 1e-12);
        // 4 kappa c > 1: no real fixed point
        assert!(solve_endpoint(10.0, 0.1, 2.0, &cfg).is_none());
    }

    #[test]
    fn level_satisfies_discrete_integral_equation() {
        let (p, d) = setup(0.4, -0.5, 0.0);
        let grid = GridSpec::new(0.1, 3.0, 1.0);
        let (field, _) = march(&p, &d, &grid, &MarchConfig::full()).unwrap();
        let u = field.u_t().unwrap();
        let lat = field.lattice;
        let pw = u.map(|v| abs_pow(v, 2.0));
        for &(i, n) in &[
            (lat.center, 10usize),
            (lat.center + 7, 20),
            (lat.center - 13, 25),
        ] {
            let l = duhamel_lprime(&pw, &lat, i, n, &p).unwrap();
            let rhs = free_solution_dt(lat.x(i), lat.t(n), &d, p.epsilon) + l;
            assert!((u.levels[n][i] - rhs).abs() < 1e-11, "node {i},{n}");
        }
    }

    #[test]
    fn accumulators_match_recomputation() {
        let (p, d) = setup(0.3, 0.0, 0.0);
        let grid = GridSpec::new(0.1, 4.0, 1.0);
        let (field, _) = march(&p, &d, &grid, &MarchConfig::full()).unwrap();
        let lat = field.lattice;
        let u = field.u_t().unwrap();
        let w = SourceWeight::new(&p);
        let top = field.last_level;
        for i in (lat.center - 40..=lat.center + 40).step_by(9) {
            let mut plus = 0.0;
            let mut minus = 0.0;
            for m in 0..=top {
                let c = if m == 0 || m == top { 0.5 } else { 1.0 };
                let back = top - m;
                let (ip, im) = (i + back, i as i64 - back as i64);
                if ip < lat.nodes() {
                    plus += c * abs_pow(u.levels[m][ip], 2.0) * w.eval(lat.x(ip), lat.t(m));
                }
                if im >= 0 {
                    let im = im as usize;
                    minus += c * abs_pow(u.levels[m][im], 2.0) * w.eval(lat.x(im), lat.t(m));
                }
            }
            assert!((field.plus_sums[i] - lat.h * plus).abs() < 1e-13);
            assert!((field.minus_sums[i] - lat.h * minus).abs() < 1e-13);
        }
    }

    #[test]
    fn support_is_exact() {
        let d = InitialData::new(Profile::bump(0.5), Profile::bump_pair(1.0), 1.0);
        let p = ModelParams::new(2.0, -0.5, -1.0, 0.5, 1.0);
        let (field, _) =
            march(&p, &d, &GridSpec::new(0.05, 3.0, 2.0), &MarchConfig::full()).unwrap();
        let lat = field.lattice;
        for (n, row) in field.u_t().unwrap().levels.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                if lat.x(i).abs() > lat.t(n) + 1.0 + 1e-9 {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn even_data_gives_even_field() {
        let (p, d) = setup(0.5, -0.3, -0.5);
        let (field, _) =
            march(&p, &d, &GridSpec::new(0.05, 3.0, 1.0), &MarchConfig::full()).unwrap();
        let lat = field.lattice;
        for row in &field.u_t().unwrap().levels {
            for k in 0..=lat.center {
                let (l, r) = (row[lat.center - k], row[lat.center + k]);
                assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()).max(1e-300));
            }
        }
    }

    #[test]
    fn unweighted_blowup_is_detected() {
        let (p, d) = setup(0.5, -1.0, -1.0);
        let (_, est) = march(
            &p,
            &d,
            &GridSpec::new(0.05, 20.0, 1.0),
            &MarchConfig::default(),
        )
        .unwrap();
        assert!(est.is_blowup());
        let t = est.t_blow.unwrap();
        assert!(t > 0.0 && t < 20.0);
    }

    #[test]
    fn threshold_below_free_wave_is_rejected() {
        let (p, d) = setup(0.5, -1.0, -1.0);
        let cfg = MarchConfig {
            blow_threshold: Some(0.1),
            ..MarchConfig::default()
        };
        assert!(matches!(
            march(&p, &d, &GridSpec::new(0.1, 1.0, 1.0), &cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn weighted_norm_examples() {
        let (p, d) = setup(0.0, 0.0, 0.0);
        let (field, _) =
            march(&p, &d, &GridSpec::new(0.1, 2.0, 1.0), &MarchConfig::full()).unwrap();
        assert_eq!(weighted_sup_norm(&field, &p, 2.0).unwrap(), 0.0);

        let p = ModelParams::new(2.0, -0.5, 0.0, 1.0, 1.0);
        let lat = GridSpec::new(0.1, 2.0, 1.0).lattice().unwrap();
        let inv = NodeField::from_fn(lat, lat.levels, |x, t| {
            if x.abs() <= t + 1.0 {
                1.0 / weight_w(x, t, &p)
            } else {
                0.0
            }
        });
        assert!((weighted_norm(&inv, &p, 2.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sup_only_history_matches_full_storage() {
        let (p, d) = setup(0.3, -0.5, 0.0);
        let grid = GridSpec::new(0.1, 5.0, 1.0);
        let (full, _) = march(&p, &d, &grid, &MarchConfig::full()).unwrap();
        let (lean, _) = march(&p, &d, &grid, &MarchConfig::default()).unwrap();
        let a = weighted_sup_norm(&full, &p, 4.0).unwrap();
        let b = weighted_sup_norm(&lean, &p, 4.0).unwrap();
        assert!((a - b).abs() < 1e-14 * a);
        let other = p.with_epsilon(1.0);
        assert!(weighted_sup_norm(&lean, &ModelParams { a: 0.1, ..other }, 4.0).is_err());
    }

    #[test]
    fn picard_zero_amplitude_is_identically_zero() {
        let (p, d) = setup(0.0, 0.5, 0.0);
        let rep = picard_iterate(&p, &d, &GridSpec::new(0.1, 3.0, 1.0), 3.0, 4).unwrap();
        assert!(rep.steps.iter().all(|s| s.norm == 0.0 && s.diff == 0.0));
        assert_eq!(rep.last.sup_abs(), 0.0);
    }

    #[test]
    fn second_iterate_is_duhamel_of_free_wave() {
        let (p, d) = setup(0.2, 0.5, 0.0);
        let grid = GridSpec::new(0.1, 3.0, 1.0);
        let rep = picard_iterate(&p, &d, &grid, 3.0, 2).unwrap();
        let lat = grid.lattice().unwrap();
        let src = free_dt_field(lat, lat.levels, &d, 0.2).map(|v| v * v);
        for n in [0usize, 5, 17, 30] {
            for i in (0..lat.nodes()).step_by(5) {
                let direct = match duhamel_lprime(&src, &lat, i, n, &p) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                assert!((rep.second.levels[n][i] - direct).abs() < 1e-14);
            }
        }
        assert_eq!(rep.steps[0].norm, 0.0);
    }

    #[test]
    fn reconstruction_of_free_wave_matches_dalembert() {
        let d = InitialData::speed_bump(1.0, 1.0);
        let p = ModelParams::new(2.0, 0.0, 0.0, 0.0, 1.0);
        let err = |h: f64| {
            let grid = GridSpec::new(h, 2.0, 1.0);
            let lat = grid.lattice().unwrap();
            let free = free_dt_field(lat, lat.levels, &d, 1.0);
            let field = CharField {
                grid,
                lattice: lat,
                levels: Some(free),
                last_level: lat.levels,
                sup_history: vec![],
                weighted_sup_history: vec![],
                weight_params: p,
                plus_sums: vec![],
                minus_sums: vec![],
            };
            let u = reconstruct_u(&field, &d, 1.0).unwrap();
            let exact = NodeField::from_fn(lat, lat.levels, |x, t| {
                crate::kernels::free_solution(x, t, &d, 1.0)
            });
            u.sup_diff(&exact)
        };
        let (e1, e2) = (err(0.04), err(0.02));
        assert!(e1 < 1e-3);
        let ratio = e1 / e2;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn zero_solution_has_zero_residual() {
        let (p, d) = setup(0.0, 0.0, 0.0);
        let (field, _) =
            march(&p, &d, &GridSpec::new(0.1, 2.0, 1.0), &MarchConfig::full()).unwrap();
        let u = reconstruct_u(&field, &d, 0.0).unwrap();
        assert_eq!(u.sup_abs(), 0.0);
        assert_eq!(pde_residual(&u, &field, &p).unwrap(), 0.0);
    }
}
