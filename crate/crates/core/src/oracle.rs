//! Explicit leapfrog discretisation of
//! `u_tt - u_xx = W(x,t) |u_t|^p` on a uniform grid, used to cross-check
//! the characteristic solver.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::SourceWeight;
use crate::model::{
    BlowupCause, CharField, InitialData, LifespanEstimate, LifespanStatus, ModelParams,
};
use crate::solver::{abs_pow, default_blow_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeapfrogConfig {
    pub dx: f64,
    pub cfl: f64,
    pub t_max: f64,
    /// Threshold on `sup |u_t|`; `None` selects the solver default.
    pub blow_threshold: Option<f64>,
}

impl LeapfrogConfig {
    pub fn new(dx: f64, t_max: f64) -> Self {
        Self {
            dx,
            cfl: 0.9,
            t_max,
            blow_threshold: None,
        }
    }
}

/// Node-sampled leapfrog solution. `x_j = (j - half) dx`, `t_n = n dt`.
#[derive(Debug, Clone)]
pub struct LeapfrogField {
    pub dx: f64,
    pub dt: f64,
    pub half: usize,
    pub epsilon: f64,
    /// `u` at every computed step.
    pub u: Vec<Vec<f64>>,
    /// `u_t` at `t = 0`, i.e. `eps g`.
    pub ut0: Vec<f64>,
}

impl LeapfrogField {
    pub fn nodes(&self) -> usize {
        2 * self.half + 1
    }

    pub fn x(&self, j: usize) -> f64 {
        (j as f64 - self.half as f64) * self.dx
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Steps at which the centred `u_t` is available: `0..=last_ut_step()`.
    pub fn last_ut_step(&self) -> usize {
        self.u.len().saturating_sub(2)
    }

    /// `u_t` at step `n`: `eps g` at `n = 0`, `(u^{n+1} - u^{n-1}) / 2dt` otherwise.
    pub fn u_t(&self, n: usize) -> Option<Vec<f64>> {
        if n == 0 {
            return Some(self.ut0.clone());
        }
        if n + 1 >= self.u.len() {
            return None;
        }
        let (up, um) = (&self.u[n + 1], &self.u[n - 1]);
        Some(
            up.iter()
                .zip(um)
                .map(|(a, b)| (a - b) / (2.0 * self.dt))
                .collect(),
        )
    }

    fn u_t_at(&self, j: usize, n: usize) -> f64 {
        if n == 0 {
            self.ut0[j]
        } else {
            (self.u[n + 1][j] - self.u[n - 1][j]) / (2.0 * self.dt)
        }
    }

    /// `u_t` at node `j`, linearly interpolated in time; `None` past the last centred step.
    pub fn u_t_interp(&self, j: usize, t: f64) -> Option<f64> {
        if j >= self.nodes() || t < 0.0 {
            return None;
        }
        let s = t / self.dt;
        let n0 = s.floor() as usize;
        let last = self.last_ut_step();
        if n0 > last || (n0 == last && s - n0 as f64 > 1e-9) {
            return None;
        }
        if n0 == last {
            return Some(self.u_t_at(j, n0));
        }
        let th = s - n0 as f64;
        Some((1.0 - th) * self.u_t_at(j, n0) + th * self.u_t_at(j, n0 + 1))
    }

    /// `½ Σ (u_t^2 + u_x^2) dx` at step `n`, with forward differences for `u_x`.
    pub fn energy(&self, n: usize) -> Option<f64> {
        let ut = self.u_t(n)?;
        let u = &self.u[n];
        let mut e = 0.0;
        for j in 0..self.nodes() {
            let ux = if j + 1 < self.nodes() {
                (u[j + 1] - u[j]) / self.dx
            } else {
                0.0
            };
            e += ut[j] * ut[j] + ux * ux;
        }
        Some(0.5 * e * self.dx)
    }

    /// Nearest grid index for `x`.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let j = (x / self.dx).round() + self.half as f64;
        if j < 0.0 || j > (self.nodes() - 1) as f64 {
            None
        } else {
            Some(j as usize)
        }
    }
}

/// Three-level scheme with `dt = cfl dx` on `[-(t_max+R+1), t_max+R+1]`.
///
/// The source at step `n` uses the second-order one-sided
/// `(3u^n - 4u^{n-1} + u^{n-2}) / 2dt` as `u_t`; on the first step it uses
/// `2(u^1 - u^0)/dt - eps g`.
pub fn leapfrog_solve(
    params: &ModelParams,
    data: &InitialData,
    cfg: &LeapfrogConfig,
) -> Result<(LeapfrogField, LifespanEstimate)> {
    if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
        return Err(Error::Precondition(format!(
            "cfl must lie in (0, 1], got {}",
            cfg.cfl
        )));
    }
    if !(cfg.dx > 0.0) || !(cfg.t_max > 0.0) || !cfg.t_max.is_finite() {
        return Err(Error::Precondition(
            "dx > 0 and finite t_max > 0 required".into(),
        ));
    }
    if !(params.p > 1.0) || !(params.epsilon >= 0.0) {
        return Err(Error::Precondition("p > 1 and eps >= 0 required".into()));
    }
    let threshold = cfg
        .blow_threshold
        .unwrap_or_else(|| default_blow_threshold(params, data));
    let (dx, dt, eps, p) = (cfg.dx, cfg.cfl * cfg.dx, params.epsilon, params.p);
    let half_width = cfg.t_max + params.radius + 1.0;
    let half = (half_width / dx - 1e-9).ceil() as usize;
    let nodes = 2 * half + 1;
    let steps = (cfg.t_max / dt - 1e-9).ceil() as usize;
    let xs: Vec<f64> = (0..nodes).map(|j| (j as f64 - half as f64) * dx).collect();
    let w = SourceWeight::new(params);
    let lambda2 = (dt / dx) * (dt / dx);

    let u0: Vec<f64> = xs.iter().map(|&x| eps * data.f(x)).collect();
    let ut0: Vec<f64> = xs.iter().map(|&x| eps * data.g(x)).collect();
    let mut field = LeapfrogField {
        dx,
        dt,
        half,
        epsilon: eps,
        u: Vec::with_capacity(steps + 1),
        ut0: ut0.clone(),
    };

    // first step
    let mut u1 = vec![0.0; nodes];
    for j in 1..nodes - 1 {
        let x = xs[j];
        let uxx = eps * data.d2f(x);
        let s0 = w.eval(x, 0.0) * abs_pow(ut0[j], p);
        u1[j] = u0[j] + dt * ut0[j] + 0.5 * dt * dt * (uxx + s0);
    }
    let mut v: Vec<f64> = (0..nodes)
        .map(|j| 2.0 * (u1[j] - u0[j]) / dt - ut0[j])
        .collect();
    field.u.push(u0);
    field.u.push(u1);

    let mut status = LifespanStatus::Survived;
    let mut t_blow = None;
    let mut cause = None;
    let mut sup_history = vec![ut0.iter().fold(0.0f64, |m, v| m.max(v.abs()))];
    for n in 1..steps {
        let t = n as f64 * dt;
        let sup_v = v.iter().fold(
            0.0f64,
            |m, z| if z.is_nan() { f64::NAN } else { m.max(z.abs()) },
        );
        sup_history.push(sup_v);
        if !sup_v.is_finite() || sup_v > threshold {
            status = LifespanStatus::Blowup;
            t_blow = Some(t - 0.5 * dt);
            cause = Some(BlowupCause::ThresholdExceeded);
            break;
        }
        let (cur, prev) = (&field.u[n], &field.u[n - 1]);
        let mut next = vec![0.0; nodes];
        for j in 1..nodes - 1 {
            let lap = cur[j + 1] - 2.0 * cur[j] + cur[j - 1];
            let src = w.eval(xs[j], t) * abs_pow(v[j], p);
            next[j] = 2.0 * cur[j] - prev[j] + lambda2 * lap + dt * dt * src;
        }
        for j in 0..nodes {
            v[j] = (3.0 * next[j] - 4.0 * cur[j] + prev[j]) / (2.0 * dt);
        }
        field.u.push(next);
    }
    let estimate = LifespanEstimate {
        status,
        t_blow,
        h: dt,
        cause,
        sup_history,
    };
    Ok((field, estimate))
}

/// Space-time box `[t_lo, t_hi] × [x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Window {
    pub fn new(t_lo: f64, t_hi: f64, x_lo: f64, x_hi: f64) -> Self {
        Self {
            t_lo,
            t_hi,
            x_lo,
            x_hi,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.t_hi >= self.t_lo && self.x_hi >= self.x_lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldComparison {
    /// `sup |u_t^march - u_t^leapfrog|` over the common nodes.
    pub sup_diff: f64,
    /// `sup |u_t^march|` over the same nodes.
    pub sup_ref: f64,
    pub nodes: usize,
}

impl FieldComparison {
    pub fn relative(&self) -> f64 {
        if self.sup_ref == 0.0 {
            self.sup_diff
        } else {
            self.sup_diff / self.sup_ref
        }
    }
}

/// Compares march `u_t` with leapfrog `u_t` at the march nodes inside
/// `window`: nearest leapfrog node in space, linear interpolation in time.
pub fn compare_fields(
    march: &CharField,
    leapfrog: &LeapfrogField,
    window: &Window,
) -> Result<FieldComparison> {
    if window.is_empty() {
        return Err(Error::Precondition("empty comparison window".into()));
    }
    let u = march
        .u_t()
        .ok_or_else(|| Error::Precondition("march field must be stored in full".into()))?;
    let lat = march.lattice;
    let mut out = FieldComparison {
        sup_diff: 0.0,
        sup_ref: 0.0,
        nodes: 0,
    };
    for (n, row) in u.levels.iter().enumerate() {
        let t = lat.t(n);
        if t < window.t_lo - 1e-12 || t > window.t_hi + 1e-12 {
            continue;
        }
        for (i, &val) in row.iter().enumerate() {
            let x = lat.x(i);
            if x < window.x_lo - 1e-12 || x > window.x_hi + 1e-12 {
                continue;
            }
            let Some(j) = leapfrog.nearest(x) else {
                continue;
            };
            let Some(other) = leapfrog.u_t_interp(j, t) else {
                continue;
            };
            out.sup_diff = out.sup_diff.max((val - other).abs());
            out.sup_ref = out.sup_ref.max(val.abs());
            out.nodes += 1;
        }
    }
    if out.nodes == 0 {
        return Err(Error::Precondition(
            "no common nodes in the comparison window".into(),
        ));
    }
    Ok(out)
}
