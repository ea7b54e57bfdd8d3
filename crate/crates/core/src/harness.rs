//! Sweeps over `eps`, lifespan-exponent fits, a-priori ratio checks, CSV
//! emission and the command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    ensure_valid, CharField, GridSpec, InitialData, Lattice, LifespanEstimate, ModelParams,
    NodeField, Profile, RunConfig,
};
use crate::solver::{
    abs_pow, free_dt_field, lprime_field, march, source_weight_field, weighted_norm, MarchConfig,
    Storage,
};
use crate::theory::{
    blowup_sequence, classify_regime, d_a, e_ab, lifespan_bound, phase_diagram, rational_from_f64,
    write_phase_csv, BlowupConstants, PhaseMode, RegimeKind,
};

/// Relative `T(h)` vs `T(h/2)` gap below which a blow-up entry counts as resolved.
pub const RESOLVED_TOL: f64 = 0.05;
/// Exponential-regime sweeps skip `eps` whose predicted `T` exceeds this multiple of `R`.
pub const EXP_REACH: f64 = 1e4;

// ---------------------------------------------------------------------------
// sweeps

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// `epsilon` is ignored; each ladder entry replaces it.
    pub params: ModelParams,
    pub data: InitialData,
    pub ladder: Vec<f64>,
    pub grid: GridSpec,
    pub threads: Option<usize>,
    pub march: MarchConfig,
}

impl SweepConfig {
    pub fn new(params: ModelParams, data: InitialData, ladder: Vec<f64>, grid: GridSpec) -> Self {
        Self {
            params,
            data,
            ladder,
            grid,
            threads: None,
            march: MarchConfig {
                storage: Storage::SupOnly,
                track_weighted: false,
                ..MarchConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub coarse: Option<LifespanEstimate>,
    pub fine: Option<LifespanEstimate>,
    /// Predicted `T` beyond numerical reach; not run.
    pub skipped: bool,
    pub error: Option<String>,
    pub resolved: bool,
}

impl SweepEntry {
    pub fn status_label(&self) -> String {
        if self.skipped {
            return "out_of_reach".into();
        }
        if self.error.is_some() {
            return "error".into();
        }
        match (&self.coarse, &self.fine) {
            (Some(c), Some(f)) if c.is_blowup() && f.is_blowup() => "blowup".into(),
            (Some(c), Some(f)) if c.status == f.status => c.status.to_string(),
            _ => "mixed".into(),
        }
    }

    pub fn t_coarse(&self) -> Option<f64> {
        self.coarse.as_ref().and_then(|e| e.t_blow)
    }

    pub fn t_fine(&self) -> Option<f64> {
        self.fine.as_ref().and_then(|e| e.t_blow)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub params: ModelParams,
    pub h: f64,
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    /// `(eps, T(h/2))` of the resolved blow-up entries.
    pub fn resolved_pairs(&self) -> Vec<(f64, f64)> {
        self.entries
            .iter()
            .filter(|e| e.resolved)
            .filter_map(|e| e.t_fine().map(|t| (e.epsilon, t)))
            .collect()
    }
}

/// `eps` at which `lifespan_bound(.., c = 1)` equals `t`.
pub fn predicted_epsilon(p: f64, a: f64, b: f64, t: f64) -> Result<f64> {
    let regime = classify_regime(p, a, b)?;
    match regime.kind {
        RegimeKind::Global => Err(Error::Precondition(
            "global regime has no finite lifespan".into(),
        )),
        RegimeKind::PolyA | RegimeKind::PolyPab => Ok(t.powf(-1.0 / regime.exponent.unwrap())),
        RegimeKind::ExpPMinus1 | RegimeKind::ExpPPMinus1 => {
            if !(t > 1.0) {
                return Err(Error::Precondition("exponential regimes need T > 1".into()));
            }
            let q = regime.exp_power(p).unwrap();
            Ok(t.ln().powf(-1.0 / q))
        }
    }
}

/// Geometric ladder of `points` values of `eps`, ascending, whose predicted
/// lifespans (constant 1) span `[t_lo, t_hi]`.
pub fn default_ladder(
    p: f64,
    a: f64,
    b: f64,
    (t_lo, t_hi): (f64, f64),
    points: usize,
) -> Result<Vec<f64>> {
    if points < 2 || !(t_hi > t_lo) || !(t_lo > 0.0) {
        return Err(Error::Precondition(
            "ladder needs >= 2 points and 0 < t_lo < t_hi".into(),
        ));
    }
    let e_lo = predicted_epsilon(p, a, b, t_hi)?;
    let e_hi = predicted_epsilon(p, a, b, t_lo)?;
    let ratio = (e_hi / e_lo).powf(1.0 / (points - 1) as f64);
    Ok((0..points).map(|k| e_lo * ratio.powi(k as i32)).collect())
}

fn run_one(cfg: &SweepConfig, eps: f64, exponential: bool) -> SweepEntry {
    let mut entry = SweepEntry {
        epsilon: eps,
        coarse: None,
        fine: None,
        skipped: false,
        error: None,
        resolved: false,
    };
    let p = &cfg.params;
    if exponential {
        if let Ok(t) = lifespan_bound(p.p, p.a, p.b, eps, 1.0) {
            if t > EXP_REACH * p.radius {
                entry.skipped = true;
                return entry;
            }
        }
    }
    let params = p.with_epsilon(eps);
    let run = |grid: &GridSpec| march(&params, &cfg.data, grid, &cfg.march).map(|(_, e)| e);
    match run(&cfg.grid).and_then(|c| run(&cfg.grid.refined()).map(|f| (c, f))) {
        Ok((c, f)) => {
            entry.resolved = match (c.t_blow, f.t_blow) {
                (Some(tc), Some(tf)) => ((tc - tf) / tf).abs() < RESOLVED_TOL,
                (None, None) => true,
                _ => false,
            };
            debug!("eps {eps}: T(h) {:?} T(h/2) {:?}", c.t_blow, f.t_blow);
            entry.coarse = Some(c);
            entry.fine = Some(f);
        }
        Err(e) => entry.error = Some(e.to_string()),
    }
    entry
}

/// Marches every `eps` of the ladder at `h` and `h/2`. Entries are returned
/// in ascending `eps` whatever the execution order; per-run failures are
/// recorded in the entry.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.ladder.is_empty() {
        return Err(Error::Precondition("empty epsilon ladder".into()));
    }
    let p = &cfg.params;
    let regime = classify_regime(p.p, p.a, p.b)?;
    if regime.kind.is_global() {
        return Err(Error::Precondition(
            "global-existence regime (a > 0 and p(1+a)+b > 0): T(eps) is infinite, nothing to sweep".into(),
        ));
    }
    if !cfg.data.f.is_zero() || !(cfg.data.g.amplitude > 0.0) {
        return Err(Error::Precondition(
            "blow-up sweeps need f = 0 and a positive g amplitude".into(),
        ));
    }
    if cfg.ladder.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::Precondition("ladder values must be positive".into()));
    }
    ensure_valid(p, &cfg.data, &cfg.grid)?;
    let mut ladder = cfg.ladder.clone();
    ladder.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let exponential = regime.kind.is_exponential();
    info!("sweep of {} values, regime {}", ladder.len(), regime.kind);
    let work = || -> Vec<SweepEntry> {
        ladder
            .par_iter()
            .map(|&e| run_one(cfg, e, exponential))
            .collect()
    };
    let entries = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Precondition(e.to_string()))?
            .install(work),
        None => work(),
    };
    Ok(SweepResult {
        params: *p,
        h: cfg.grid.h,
        entries,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV `epsilon,status,T_h,T_h2,resolved`.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "status", "T_h", "T_h2", "resolved"])?;
    for e in &result.entries {
        w.write_record([
            e.epsilon.to_string(),
            e.status_label(),
            opt(e.t_coarse()),
            opt(e.t_fine()),
            e.resolved.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// fits

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// `log T` on `log eps`.
    Power,
    /// `log T` on `eps^{-q}`.
    Exponential { q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    pub mode: FitMode,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

/// Ordinary least squares `y = slope x + intercept` with its `r^2`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return Err(Error::Precondition(format!(
            "a fit needs at least 3 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - slope * x - intercept;
            r * r
        })
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r2))
}

/// Fits `(eps, T)` pairs; pairs with non-positive or non-finite entries are dropped.
pub fn fit_exponent(pairs: &[(f64, f64)], mode: FitMode) -> Result<FitReport> {
    let valid: Vec<_> = pairs
        .iter()
        .filter(|(e, t)| *e > 0.0 && *t > 0.0 && e.is_finite() && t.is_finite())
        .collect();
    let ys: Vec<f64> = valid.iter().map(|(_, t)| t.ln()).collect();
    let xs: Vec<f64> = match mode {
        FitMode::Power => valid.iter().map(|(e, _)| e.ln()).collect(),
        FitMode::Exponential { q } => valid.iter().map(|(e, _)| e.powf(-q)).collect(),
    };
    let (slope, intercept, r2) = least_squares(&xs, &ys)?;
    Ok(FitReport {
        mode,
        slope,
        intercept,
        r2,
        n_points: xs.len(),
    })
}

// ---------------------------------------------------------------------------
// a-priori ratios

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestField {
    /// `U = eps u_t^0`.
    Free,
    /// `U = U_2 = L'(|eps u_t^0|^p)`.
    #[value(name = "picard-u2", alias = "picard_U2", alias = "picard_u2")]
    PicardU2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AprioriRow {
    #[serde(rename = "T")]
    pub t: f64,
    /// `‖L'(|U|^p)‖ / (E_{a,b}(T) ‖U‖^p)`.
    pub ratio_e: f64,
    /// `‖L'(|U^0|^{p-1} |U|)‖ / (D_a(T) ‖U^0‖^{p-1} ‖U‖)` with `U^0 = eps u_t^0`
    /// restricted to the band `(t-R)_+ <= |x| <= t+R`.
    pub ratio_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport {
    pub rows: Vec<AprioriRow>,
    pub max_e: f64,
    pub max_d: f64,
}

impl AprioriReport {
    /// `max_{T' <= T} r(T')` along the ladder.
    pub fn running_max_e(&self) -> Vec<f64> {
        running_max(self.rows.iter().map(|r| r.ratio_e))
    }

    pub fn running_max_d(&self) -> Vec<f64> {
        running_max(self.rows.iter().map(|r| r.ratio_d))
    }

    /// `(max - min) / min` of a running-max sequence.
    pub fn spread(seq: &[f64]) -> f64 {
        let lo = seq.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = seq.iter().copied().fold(0.0, f64::max);
        if lo == 0.0 {
            if hi == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (hi - lo) / lo
        }
    }
}

fn running_max(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut m = 0.0f64;
    it.map(|v| {
        m = m.max(v);
        m
    })
    .collect()
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn band_restrict(u: &NodeField, radius: f64) -> NodeField {
    let lat = u.lattice;
    let mut out = u.clone();
    for (n, row) in out.levels.iter_mut().enumerate() {
        let t = lat.t(n);
        for (i, v) in row.iter_mut().enumerate() {
            let ax = lat.x(i).abs();
            if ax < (t - radius).max(0.0) || ax > t + radius {
                *v = 0.0;
            }
        }
    }
    out
}

/// Ratios `r(T)` for every `T` of the ladder on a lattice of step `h`.
pub fn verify_apriori(
    params: &ModelParams,
    data: &InitialData,
    h: f64,
    t_ladder: &[f64],
    field: TestField,
) -> Result<AprioriReport> {
    if t_ladder.is_empty() {
        return Err(Error::Precondition("empty T ladder".into()));
    }
    let t_top = t_ladder.iter().copied().fold(0.0, f64::max);
    let grid = GridSpec::new(h, t_top, params.radius);
    ensure_valid(params, data, &grid)?;
    let lat = Lattice::new(&grid)?;
    let top = lat.levels;
    let weights = source_weight_field(lat, top, params);
    let free = free_dt_field(lat, top, data, params.epsilon);
    let p = params.p;
    let base = band_restrict(&free, params.radius);
    let u = match field {
        TestField::Free => free,
        TestField::PicardU2 => lprime_field(&free.map(|v| abs_pow(v, p)), &weights),
    };
    let mut mixed = u.map(f64::abs);
    for (row, brow) in mixed.levels.iter_mut().zip(base.levels.iter()) {
        for (v, b) in row.iter_mut().zip(brow.iter()) {
            *v *= abs_pow(*b, p - 1.0);
        }
    }
    let lu = lprime_field(&u.map(|v| abs_pow(v, p)), &weights);
    let lm = lprime_field(&mixed, &weights);
    let mut rows = Vec::with_capacity(t_ladder.len());
    for &t in t_ladder {
        let nu = weighted_norm(&u, params, t);
        let nb = weighted_norm(&base, params, t);
        if !nu.is_finite() || !nb.is_finite() {
            return Err(Error::Domain(
                "test field has infinite weighted norm".into(),
            ));
        }
        let e = e_ab(t, p, params.a, params.b, params.radius)?;
        let d = d_a(t, params.a, params.radius)?;
        rows.push(AprioriRow {
            t,
            ratio_e: ratio(weighted_norm(&lu, params, t), e * nu.powf(p)),
            ratio_d: ratio(weighted_norm(&lm, params, t), d * nb.powf(p - 1.0) * nu),
        });
    }
    let max_e = rows.iter().map(|r| r.ratio_e).fold(0.0, f64::max);
    let max_d = rows.iter().map(|r| r.ratio_d).fold(0.0, f64::max);
    Ok(AprioriReport { rows, max_e, max_d })
}

/// CSV `T,ratio_E,ratio_D`.
pub fn write_apriori_csv<W: Write>(report: &AprioriReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "ratio_E", "ratio_D"])?;
    for r in &report.rows {
        w.write_record([
            r.t.to_string(),
            r.ratio_e.to_string(),
            r.ratio_d.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `t,x,u_t` of a fully stored march, level by level.
pub fn write_field_csv<W: Write>(field: &CharField, out: W) -> Result<()> {
    let levels = field
        .u_t()
        .ok_or_else(|| Error::Precondition("field dump needs a fully stored march".into()))?;
    let lat = field.lattice;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "u_t"])?;
    for (n, row) in levels.levels.iter().enumerate() {
        let t = lat.t(n).to_string();
        for (i, v) in row.iter().enumerate() {
            w.write_record([t.as_str(), &lat.x(i).to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(
    name = "wave-lifespan",
    about = "Lifespan experiments for u_tt - u_xx = |u_t|^p / weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "R")]
    radius: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// JSON run configuration; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// March one configuration and print its lifespan record.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Lifespans over a ladder of eps at h and h/2.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated eps values; default is a ladder from predicted lifespans.
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
        #[arg(long, default_value_t = 20.0)]
        t_lo: f64,
        #[arg(long, default_value_t = 200.0)]
        t_hi: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
    },
    /// Print the regime of (p, a, b).
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the lifespan bound formula.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Regime labels on an (a, b) grid.
    PhaseDiagram {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ModeArg::DtTable)]
        mode: ModeArg,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        a_min: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        a_max: f64,
        #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
        b_min: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        b_max: f64,
        #[arg(long, default_value_t = 41)]
        na: usize,
        #[arg(long, default_value_t = 41)]
        nb: usize,
    },
    /// Ratios of the a-priori estimates over a ladder of T.
    VerifyApriori {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = TestField::Free)]
        field: TestField,
        #[arg(long, value_delimiter = ',', default_value = "10,20,40,80")]
        ladder: Vec<f64>,
    },
    /// First terms of the pointwise blow-up iteration.
    BlowupSeq {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        m1: f64,
        #[arg(long, default_value_t = 1.0)]
        cg: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[allow(clippy::enum_variant_names)]
enum ModeArg {
    DtTable,
    UNonzeroTable,
    UZeroTable,
}

impl From<ModeArg> for PhaseMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::DtTable => PhaseMode::DtTable,
            ModeArg::UNonzeroTable => PhaseMode::UNonzeroTable,
            ModeArg::UZeroTable => PhaseMode::UZeroTable,
        }
    }
}

/// Merged view of the config file and flags.
struct Resolved {
    p: f64,
    a: f64,
    b: f64,
    eps: f64,
    radius: f64,
    f: Profile,
    g: Profile,
    h: f64,
    t_max: Option<f64>,
    pad: Option<f64>,
}

impl Common {
    fn resolve(&self) -> Result<Resolved> {
        let cfg = match &self.config {
            Some(path) => Some(RunConfig::from_json(&std::fs::read_to_string(path)?)?),
            None => None,
        };
        let pick = |flag: Option<f64>, from: Option<f64>, name: &str| -> Result<f64> {
            flag.or(from)
                .ok_or_else(|| Error::Precondition(format!("missing --{name}")))
        };
        Ok(Resolved {
            p: pick(self.p, cfg.map(|c| c.p), "p")?,
            a: pick(self.a, cfg.map(|c| c.a), "a")?,
            b: pick(self.b, cfg.map(|c| c.b), "b")?,
            eps: self.eps.or(cfg.map(|c| c.epsilon)).unwrap_or(0.0),
            radius: self.radius.or(cfg.map(|c| c.radius)).unwrap_or(1.0),
            f: cfg.map(|c| c.f).unwrap_or(Profile::ZERO),
            g: cfg.map(|c| c.g).unwrap_or(Profile::bump(1.0)),
            h: self.h.or(cfg.map(|c| c.grid.h)).unwrap_or(0.1),
            t_max: self.tmax.or(cfg.map(|c| c.grid.t_max)),
            pad: cfg.map(|c| c.grid.pad),
        })
    }
}

impl Resolved {
    fn params(&self) -> ModelParams {
        ModelParams::new(self.p, self.a, self.b, self.eps, self.radius)
    }

    fn data(&self) -> InitialData {
        InitialData::new(self.f, self.g, self.radius)
    }

    fn grid(&self, default_t_max: f64) -> GridSpec {
        GridSpec::new(
            self.h,
            self.t_max.unwrap_or(default_t_max),
            self.pad.unwrap_or(self.radius.max(1.0)),
        )
    }
}

fn with_output<F>(path: &Option<PathBuf>, stdout: &mut dyn Write, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_)
        | Error::InvalidGrid(_)
        | Error::Precondition(_)
        | Error::Domain(_) => 1,
        _ => 2,
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Solve { common } => {
            let r = common.resolve()?;
            let (params, data, grid) = (r.params(), r.data(), r.grid(10.0));
            let cfg = if common.out.is_some() {
                MarchConfig::full()
            } else {
                MarchConfig::default()
            };
            let (field, est) = march(&params, &data, &grid, &cfg)?;
            if common.out.is_some() {
                with_output(&common.out, out, |w| write_field_csv(&field, w))?;
            }
            writeln!(out, "{}", est.to_json())?;
        }
        Command::Sweep {
            common,
            ladder,
            t_lo,
            t_hi,
            points,
        } => {
            let r = common.resolve()?;
            let ladder = match ladder {
                Some(l) => l,
                None => default_ladder(r.p, r.a, r.b, (t_lo, t_hi), points)?,
            };
            let mut cfg = SweepConfig::new(r.params(), r.data(), ladder, r.grid(10.0 * t_hi));
            cfg.threads = common.threads;
            let result = sweep(&cfg)?;
            with_output(&common.out, out, |w| write_sweep_csv(&result, w))?;
            if common.out.is_some() {
                if let Ok(fit) = fit_exponent(&result.resolved_pairs(), FitMode::Power) {
                    writeln!(
                        out,
                        "power fit: slope {:.4} r2 {:.4} points {}",
                        fit.slope, fit.r2, fit.n_points
                    )?;
                }
            }
        }
        Command::Classify { common } => {
            let r = common.resolve()?;
            writeln!(out, "{}", classify_regime(r.p, r.a, r.b)?)?;
        }
        Command::Bounds { common, c } => {
            let r = common.resolve()?;
            let t = lifespan_bound(r.p, r.a, r.b, r.eps, c)?;
            if t.is_infinite() {
                writeln!(out, "inf")?;
            } else {
                writeln!(out, "{t:.4}")?;
            }
        }
        Command::PhaseDiagram {
            common,
            mode,
            a_min,
            a_max,
            b_min,
            b_max,
            na,
            nb,
        } => {
            let p = common
                .p
                .ok_or_else(|| Error::Precondition("missing --p".into()))?;
            let cells = phase_diagram(p, (a_min, a_max), (b_min, b_max), na, nb, mode.into())?;
            with_output(&common.out, out, |w| write_phase_csv(&cells, w))?;
        }
        Command::VerifyApriori {
            common,
            field,
            ladder,
        } => {
            let mut r = common.resolve()?;
            if common.eps.is_none() && common.config.is_none() {
                r.eps = 0.1;
            }
            if common.h.is_none() && common.config.is_none() {
                r.h = 0.05;
            }
            let report = verify_apriori(&r.params(), &r.data(), r.h, &ladder, field)?;
            with_output(&common.out, out, |w| write_apriori_csv(&report, w))?;
        }
        Command::BlowupSeq { common, n, m1, cg } => {
            let r = common.resolve()?;
            let consts = BlowupConstants::from_weights(r.p, r.a, r.b, cg)?;
            let seq = blowup_sequence(&rational_from_f64(r.p)?, &consts, n, m1)?;
            writeln!(out, "n,a_n,log_M_n")?;
            for s in &seq {
                writeln!(out, "{},{},{}", s.n, s.a_n, s.log_m)?;
            }
        }
    }
    Ok(())
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 1 on invalid input, 2 on runtime failure.
pub fn run_cli<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("wave-lifespan").chain(args.iter().copied());
        let code = run_cli(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn fit_on_exact_power_data() {
        let pairs: Vec<_> = [0.1, 0.2, 0.3, 0.5]
            .iter()
            .map(|&e: &f64| (e, e.powi(-2)))
            .collect();
        let f = fit_exponent(&pairs, FitMode::Power).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-9);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(f.n_points, 4);
    }

    #[test]
    fn fit_on_exact_exponential_data() {
        let pairs: Vec<_> = [0.5, 0.7, 1.0, 1.5]
            .iter()
            .map(|&e: &f64| (e, (3.0 / e).exp()))
            .collect();
        let f = fit_exponent(&pairs, FitMode::Exponential { q: 1.0 }).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-9);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_needs_three_points() {
        assert!(fit_exponent(&[(0.1, 10.0), (0.2, 5.0)], FitMode::Power).is_err());
        assert!(fit_exponent(&[(0.1, 10.0), (0.2, 5.0), (0.3, f64::NAN)], FitMode::Power).is_err());
    }

    #[test]
    fn default_ladder_spans_predicted_range() {
        let l = default_ladder(2.0, -0.5, 0.0, (20.0, 200.0), 8).unwrap();
        assert_eq!(l.len(), 8);
        assert!((l[0] - 200f64.powf(-0.5)).abs() < 1e-12);
        assert!((l[7] - 20f64.powf(-0.5)).abs() < 1e-12);
        assert!(l.windows(2).all(|w| w[0] < w[1]));
        assert!(default_ladder(2.0, 1.0, 0.0, (20.0, 200.0), 8).is_err());
    }

    #[test]
    fn sweep_rejects_global_and_empty() {
        let data = InitialData::speed_bump(1.0, 1.0);
        let grid = GridSpec::new(0.1, 10.0, 1.0);
        let global = SweepConfig::new(
            ModelParams::new(2.0, 1.0, 0.0, 0.0, 1.0),
            data,
            vec![0.1],
            grid,
        );
        let msg = sweep(&global).unwrap_err().to_string();
        assert!(msg.contains("global"), "{msg}");
        let empty = SweepConfig::new(
            ModelParams::new(2.0, -1.0, -1.0, 0.0, 1.0),
            data,
            vec![],
            grid,
        );
        assert!(sweep(&empty).is_err());
    }

    #[test]
    fn sweep_orders_and_decreases() {
        let data = InitialData::speed_bump(1.0, 1.0);
        let grid = GridSpec::new(0.1, 30.0, 1.0);
        let cfg = SweepConfig::new(
            ModelParams::new(2.0, -1.0, -1.0, 0.0, 1.0),
            data,
            vec![0.8, 0.2, 0.5, 0.35],
            grid,
        );
        let res = sweep(&cfg).unwrap();
        let eps: Vec<_> = res.entries.iter().map(|e| e.epsilon).collect();
        assert_eq!(eps, vec![0.2, 0.35, 0.5, 0.8]);
        let ts: Vec<_> = res.entries.iter().map(|e| e.t_fine().unwrap()).collect();
        assert!(ts.windows(2).all(|w| w[0] > w[1]), "{ts:?}");
        assert!(res.entries.iter().all(|e| e.status_label() == "blowup"));
    }

    #[test]
    fn zero_field_gives_zero_ratios() {
        let params = ModelParams::new(2.0, 0.0, 0.0, 0.0, 2.0);
        let data = InitialData::speed_bump(1.0, 2.0);
        let rep = verify_apriori(&params, &data, 0.1, &[5.0, 10.0], TestField::Free).unwrap();
        assert!(rep
            .rows
            .iter()
            .all(|r| r.ratio_e == 0.0 && r.ratio_d == 0.0));
    }

    #[test]
    fn cli_classify_and_bounds() {
        let (code, out, _) = cli(&["classify", "--p", "2", "--a", "-0.5", "--b", "0"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "poly_a exponent 2");
        let (code, out, _) = cli(&[
            "bounds", "--p", "2", "--a", "0", "--b", "0", "--eps", "0.1", "--c", "1",
        ]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "22026.4658");
    }

    #[test]
    fn cli_exit_codes() {
        let (code, _, err) = cli(&["classify", "--bogus", "1"]);
        assert_eq!(code, 1);
        assert!(err.contains("Usage"), "{err}");
        let (code, _, _) = cli(&["classify", "--p", "1", "--a", "0", "--b", "0"]);
        assert_eq!(code, 1);
        let (code, _, _) = cli(&[
            "solve", "--p", "2", "--a", "0", "--b", "0", "--eps", "0.1", "--R", "0.5",
        ]);
        assert_eq!(code, 1);
        let (code, _, _) = cli(&[
            "solve",
            "--p",
            "2",
            "--a",
            "0",
            "--b",
            "0",
            "--eps",
            "0.1",
            "--out",
            "/nonexistent/dir/f.csv",
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn cli_solve_prints_record() {
        let (code, out, _) = cli(&[
            "solve", "--p", "2", "--a", "-1", "--b", "-1", "--eps", "0.5", "--tmax", "20",
        ]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        assert!(v["T_blow"].as_f64().unwrap() > 5.0);
        assert_eq!(v["h"].as_f64().unwrap(), 0.1);
    }
}
