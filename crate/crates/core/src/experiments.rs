//! Parameter sweeps, critical control bounds, achievable targets and the named
//! scenarios that regenerate each numerical study.
//!
//! Every sweep point is an independent job run on the rayon pool; result tables
//! keep input order, and every controlled run uses the configuration seed, so a
//! sweep is a pure function of its inputs.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Overrides;
use crate::equilibria::{endemic_report, hopf_curve, region_map, transcritical_u1, RegionCell, RegionClass};
use crate::error::{Error, Result};
use crate::integrator::{simulate, simulate_from, ControlSchedule, StepConfig, Trajectory};
use crate::io::{self, Cell};
use crate::model::{initial_state, ControlInput, Dynamics, System, SystemParams};
use crate::nmpc::{run_nmpc, ControlResult, NmpcConfig};

/// One axis of a sweep: a numeric configuration key and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base_params: SystemParams,
    pub base_cfg: NmpcConfig,
    /// A configuration key such as `system.tau` or `control.M1`.
    pub axis: String,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "sweep needs at least one value".into(),
            });
        }
        if self.values.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "sweep values must be sorted".into(),
            });
        }
        self.point(self.values[0]).map(|_| ())
    }

    /// Base parameters and configuration with the axis set to `value`.
    pub fn point(&self, value: f64) -> Result<(SystemParams, NmpcConfig)> {
        let mut o = Overrides::default();
        o.set(&self.axis, &value.to_string())?;
        if o.number(&self.axis).is_none() {
            return Err(Error::Config {
                key: self.axis.clone(),
                reason: "sweep axis must be numeric".into(),
            });
        }
        let (mut params, mut cfg) = (self.base_params, self.base_cfg.clone());
        o.apply_system(&mut params)?;
        o.apply_control(&mut cfg)?;
        Ok((params, cfg))
    }
}

/// Final outputs of one sweep point; `error` is set instead when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub final_i: Option<f64>,
    pub final_n: Option<f64>,
    pub controllable: Option<bool>,
    pub error: Option<String>,
}

/// Zero control held for `T`, on the same step grid as the controller.
pub fn run_uncontrolled(params: &SystemParams, cfg: &NmpcConfig) -> Result<Trajectory> {
    let schedule = ControlSchedule::constant(cfg.dt, cfg.steps(), ControlInput::ZERO)?;
    simulate(&Dynamics::new(*params, System::Constant), &schedule, &cfg.step)
}

/// Runs every point of `spec`, either uncontrolled or under the receding-horizon controller.
pub fn sweep(spec: &SweepSpec, controlled: bool) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    Ok(spec
        .values
        .par_iter()
        .map(|&value| {
            let outcome = spec.point(value).and_then(|(params, cfg)| {
                if controlled {
                    let r = run_nmpc(&params, &cfg)?;
                    Ok((r.final_i, r.final_n, Some(r.controllable)))
                } else {
                    let t = run_uncontrolled(&params, &cfg)?;
                    let (i, n) = t.final_output().expect("non-empty trajectory");
                    Ok((i, n, None))
                }
            });
            match outcome {
                Ok((i, n, ok)) => SweepRow {
                    value,
                    final_i: Some(i),
                    final_n: Some(n),
                    controllable: ok,
                    error: None,
                },
                Err(e) => {
                    log::warn!("sweep point {} = {value} failed: {e}", spec.axis);
                    SweepRow {
                        value,
                        final_i: None,
                        final_n: None,
                        controllable: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect())
}

/// [`sweep`] along the infection rate.
pub fn sweep_tau(spec: &SweepSpec, controlled: bool) -> Result<Vec<SweepRow>> {
    if spec.axis != "system.tau" {
        return Err(Error::Config {
            key: spec.axis.clone(),
            reason: "sweep_tau needs the axis `system.tau`".into(),
        });
    }
    sweep(spec, controlled)
}

/// Search interval and absolute tolerance of a bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bisection {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl Bisection {
    /// Search for the critical SI-cutting bound.
    pub const M1: Bisection = Bisection { lo: 0.1, hi: 30.0, tol: 0.1 };

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi && self.tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "search",
                reason: format!("need lo < hi and tol > 0, got {self:?}"),
            });
        }
        Ok(())
    }

    /// Bisection for the target degree, capped at the initial degree.
    pub fn target(params: &SystemParams) -> Bisection {
        Bisection { lo: 0.1, hi: params.initial_degree, tol: 0.1 }
    }
}

/// Shrinks `[lo, hi]`, where `pred(hi) == at_hi != pred(lo)`, until it is at most `tol` wide.
fn bisect<F: Fn(f64) -> Result<bool>>(mut lo: f64, mut hi: f64, tol: f64, at_hi: bool, pred: F) -> Result<(f64, f64, usize)> {
    let mut runs = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        runs += 1;
        if pred(mid)? == at_hi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalBoundResult {
    pub tau: f64,
    pub m2: f64,
    pub m1_critical: f64,
    pub bisection_tolerance: f64,
    /// Largest bound found not controllable; `None` when the search floor already is.
    pub not_controllable_at: Option<f64>,
    /// Smallest bound found controllable.
    pub controllable_at: f64,
    /// Whether re-running at `m1_critical ∓ tolerance` reproduced the bracket.
    pub verified: bool,
    pub runs: usize,
}

fn controllable(params: &SystemParams, cfg: &NmpcConfig) -> Result<bool> {
    Ok(run_nmpc(params, cfg)?.controllable)
}

/// Smallest `M1` for which the closed loop is controllable, by bisection on the verdict.
///
/// A search floor that is already controllable is reported as the critical value
/// (the uncontrolled system may reach the targets on its own).
pub fn critical_m1(
    tau: f64,
    m2: f64,
    base_cfg: &NmpcConfig,
    params: &SystemParams,
    search: Bisection,
) -> Result<CriticalBoundResult> {
    search.validate()?;
    let params = params.with_tau(tau);
    params.validate()?;
    let with_m1 = |m1: f64| NmpcConfig { m1, m2, ..base_cfg.clone() };
    let pred = |m1: f64| controllable(&params, &with_m1(m1));

    if !pred(search.hi)? {
        return Err(Error::BracketInvalid(format!(
            "not controllable at M1 = {} (tau = {tau}, M2 = {m2})",
            search.hi
        )));
    }
    if pred(search.lo)? {
        return Ok(CriticalBoundResult {
            tau,
            m2,
            m1_critical: search.lo,
            bisection_tolerance: search.tol,
            not_controllable_at: None,
            controllable_at: search.lo,
            verified: true,
            runs: 2,
        });
    }
    let (lo, hi, runs) = bisect(search.lo, search.hi, search.tol, true, pred)?;
    let m1_critical = 0.5 * (lo + hi);
    let below = (m1_critical - search.tol).max(search.lo);
    let verified = pred(m1_critical + search.tol)? && !pred(below)?;
    if !verified {
        log::warn!("critical bound {m1_critical} at tau = {tau}, M2 = {m2} did not reproduce its bracket");
    }
    Ok(CriticalBoundResult {
        tau,
        m2,
        m1_critical,
        bisection_tolerance: search.tol,
        not_controllable_at: Some(lo),
        controllable_at: hi,
        verified,
        runs: runs + 4,
    })
}

/// One point of a critical-bound curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalRow {
    pub tau: f64,
    pub m2: f64,
    pub result: Option<CriticalBoundResult>,
    pub error: Option<String>,
}

/// [`critical_m1`] over every `(M2, τ)` pair, ordered by `M2` then `τ`.
pub fn critical_curves(
    taus: &[f64],
    m2s: &[f64],
    cfg: &NmpcConfig,
    params: &SystemParams,
    search: Bisection,
) -> Vec<CriticalRow> {
    let pairs: Vec<(f64, f64)> = m2s.iter().flat_map(|&m2| taus.iter().map(move |&t| (m2, t))).collect();
    pairs
        .par_iter()
        .map(|&(m2, tau)| match critical_m1(tau, m2, cfg, params, search) {
            Ok(r) => CriticalRow { tau, m2, result: Some(r), error: None },
            Err(e) => CriticalRow { tau, m2, result: None, error: Some(e.to_string()) },
        })
        .collect()
}

/// Adjacent points of a curve where the critical bound drops as `τ` grows.
pub fn monotonicity_violations(rows: &[CriticalRow]) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for w in rows.windows(2) {
        if w[0].m2 != w[1].m2 {
            continue;
        }
        if let (Some(a), Some(b)) = (&w[0].result, &w[1].result) {
            if b.m1_critical + b.bisection_tolerance < a.m1_critical {
                out.push((a.m2, a.tau, b.tau));
            }
        }
    }
    out
}

/// Highest target degree `n*` (with `I* = 0`) the controller reaches under the given bounds.
pub fn achievable_target(
    m1: f64,
    m2: f64,
    tau: f64,
    cfg: &NmpcConfig,
    params: &SystemParams,
    search: Bisection,
) -> Result<f64> {
    search.validate()?;
    let params = params.with_tau(tau);
    params.validate()?;
    let pred = |n_target: f64| {
        let cfg = NmpcConfig { m1, m2, n_target, i_target: 0.0, ..cfg.clone() };
        controllable(&params, &cfg)
    };
    if !pred(search.lo)? {
        return Err(Error::NoAchievableTarget { m1 });
    }
    if pred(search.hi)? {
        return Ok(search.hi);
    }
    let (lo, _, _) = bisect(search.lo, search.hi, search.tol, false, pred)?;
    Ok(lo)
}

/// Constant-control grid for the regime map: `u1` linear, `u2` logarithmic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionGrid {
    pub u1: (f64, f64, usize),
    pub u2: (f64, f64, usize),
}

impl Default for RegionGrid {
    fn default() -> Self {
        Self {
            u1: (0.0, 120.0, 20),
            u2: (1e-4, 10.0, 20),
        }
    }
}

impl RegionGrid {
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self> {
        let count = |key: &str, slot: &mut usize| {
            if let Some(x) = o.number(key) {
                *slot = x as usize;
            }
        };
        count("grid.u1_points", &mut self.u1.2);
        count("grid.u2_points", &mut self.u2.2);
        for (key, slot) in [
            ("grid.u1_min", &mut self.u1.0),
            ("grid.u1_max", &mut self.u1.1),
            ("grid.u2_min", &mut self.u2.0),
            ("grid.u2_max", &mut self.u2.1),
        ] {
            if let Some(x) = o.number(key) {
                *slot = x;
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, n) = self.u1;
        if !(a >= 0.0 && b >= a && n >= 1 && (n > 1 || a == b)) {
            return Err(Error::Config {
                key: "grid.u1".into(),
                reason: format!("need 0 <= min <= max and at least one point, got {:?}", self.u1),
            });
        }
        let (a, b, n) = self.u2;
        if !(a > 0.0 && b >= a && n >= 1 && (n > 1 || a == b)) {
            return Err(Error::Config {
                key: "grid.u2".into(),
                reason: format!("need 0 < min <= max and at least one point, got {:?}", self.u2),
            });
        }
        Ok(())
    }

    pub fn u1_values(&self) -> Vec<f64> {
        linspace(self.u1.0, self.u1.1, self.u1.2)
    }

    pub fn u2_values(&self) -> Vec<f64> {
        let (a, b, n) = self.u2;
        let mut v: Vec<f64> = linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect();
        if let Some(first) = v.first_mut() {
            *first = a;
        }
        if n > 1 {
            v[n - 1] = b;
        }
        v
    }
}

/// `u2` interval scanned for Hopf points; wide enough to contain the whole curve below the transcritical line.
pub const HOPF_U2_RANGE: (f64, f64) = (1e-5, 100.0);

/// `u1` grid along which the Hopf curve is traced: 30 points up to the transcritical value.
pub fn hopf_u1_grid(params: &SystemParams) -> Vec<f64> {
    linspace(1.0, transcritical_u1(params).max(1.0), 30)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Constant control held for `t_end` from the initial state.
pub fn run_constant(params: &SystemParams, u: ControlInput, dt: f64, t_end: f64) -> Result<Trajectory> {
    let steps = (t_end / dt).round() as usize;
    let schedule = ControlSchedule::constant(dt, steps, u)?;
    simulate(&Dynamics::new(*params, System::Constant), &schedule, &StepConfig::default())
}

/// Long-run behaviour of a constant-control trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LongRun {
    pub final_i: f64,
    /// `|I(T) - I(T - 10)|`.
    pub late_drift: f64,
    /// Comparison window length.
    pub window: f64,
    /// Peak-to-peak `I` over `[T - 2w, T - w]` and `[T - w, T]`.
    pub amplitudes: (f64, f64),
}

impl LongRun {
    pub fn of(traj: &Trajectory, window: f64) -> Self {
        let t_end = *traj.times.last().expect("non-empty trajectory");
        let i_at = |t: f64| {
            let k = traj.times.partition_point(|&s| s < t - 1e-9).min(traj.len() - 1);
            traj.states[k].i
        };
        let amplitude = |a: f64, b: f64| {
            let (lo, hi) = traj
                .times
                .iter()
                .zip(&traj.states)
                .filter(|(t, _)| **t >= a - 1e-9 && **t <= b + 1e-9)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, x)| (lo.min(x.i), hi.max(x.i)));
            hi - lo
        };
        Self {
            final_i: i_at(t_end),
            late_drift: (i_at(t_end) - i_at(t_end - 10.0)).abs(),
            window,
            amplitudes: (amplitude(t_end - 2.0 * window, t_end - window), amplitude(t_end - window, t_end)),
        }
    }

    /// Whether the simulated behaviour is the one `class` predicts: extinction,
    /// a settled or damping oscillation, or an oscillation that fails to damp.
    pub fn agrees_with(&self, class: RegionClass, params: &SystemParams) -> bool {
        let n = params.n();
        let (early, late) = self.amplitudes;
        match class {
            RegionClass::DiseaseFreeStable => self.final_i < 1e-3,
            RegionClass::EndemicStable => {
                self.final_i > 0.0 && (late <= early || late <= 1e-9 * n) && self.late_drift < 1e-3 * n
            }
            RegionClass::Oscillatory => late > 1e-9 * n && late >= (1.0 - AMPLITUDE_SAMPLING_TOL) * early,
        }
    }
}

/// Relative peak-to-peak difference attributable to sampling a settled cycle on the output grid.
const AMPLITUDE_SAMPLING_TOL: f64 = 1e-2;

/// Length of a spot-check run.
pub const SPOT_CHECK_T: f64 = 200.0;
/// Relative size of the prevalence kick applied to an endemic equilibrium before a spot-check run.
pub const SPOT_CHECK_KICK: f64 = 0.01;
/// Shortest comparison window, and the transient allowed before the first window.
const SPOT_CHECK_WINDOW: f64 = 25.0;

/// Verdict of one long-run spot-check; `agrees` is `None` when the cell's
/// slowest oscillation is too slow to compare two full periods within the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpotCheck {
    pub cell: RegionCell,
    pub agrees: Option<bool>,
    pub run: LongRun,
}

/// Long-run simulation behind the regime of one grid cell.
///
/// Disease-free cells start from the initial state. Endemic and oscillatory
/// cells start from the endemic equilibrium with `[I]` raised by
/// [`SPOT_CHECK_KICK`], and the peak-to-peak prevalence over the last two
/// periods of the dominant oscillatory mode shows whether the kick damps or
/// grows. From the initial state, small `u2` instead produces relaxation
/// cycles far longer than the run.
pub fn spot_check(params: &SystemParams, cell: &RegionCell) -> Result<SpotCheck> {
    let u = ControlInput::new(cell.u1, cell.u2);
    let steps = (SPOT_CHECK_T / 0.1).round() as usize;
    let schedule = ControlSchedule::constant(0.1, steps, u)?;
    let dynamics = Dynamics::new(*params, System::Constant);
    let report = match cell.class {
        RegionClass::DiseaseFreeStable => None,
        _ => endemic_report(params, u)?,
    };
    let (x0, window) = match &report {
        None => (initial_state(params), SPOT_CHECK_WINDOW),
        Some(r) => {
            let mut x = r.state;
            x.i *= 1.0 + SPOT_CHECK_KICK;
            let dominant = r
                .eigenvalues
                .iter()
                .max_by(|a, b| a.re.total_cmp(&b.re))
                .expect("four eigenvalues");
            let period = if dominant.im.abs() > 0.0 { std::f64::consts::TAU / dominant.im.abs() } else { 0.0 };
            (x, period.max(SPOT_CHECK_WINDOW))
        }
    };
    let traj = simulate_from(&x0, &dynamics, &schedule, &StepConfig::default(), false)?;
    let run = LongRun::of(&traj, window);
    let conclusive = 2.0 * window + SPOT_CHECK_WINDOW <= SPOT_CHECK_T;
    Ok(SpotCheck {
        cell: *cell,
        agrees: conclusive.then(|| run.agrees_with(cell.class, params)),
        run,
    })
}

/// Whether `I` first drops below `dip` and later climbs above `rebound`.
pub fn resurgence(traj: &Trajectory, dip: f64, rebound: f64) -> Option<(f64, f64)> {
    let first = traj.states.iter().position(|x| x.i < dip)?;
    let later = traj.states[first..].iter().position(|x| x.i > rebound)?;
    Some((traj.times[first], traj.times[first + later]))
}

/// Named studies accepted by [`scenario_run`].
pub const SCENARIOS: &[&str] = &[
    "regionmap",
    "resurgence",
    "fig3",
    "fig4",
    "fig5-left",
    "fig5-right",
    "fig6",
    "stepsize",
    "damping",
    "table2",
];

fn canonical(name: &str) -> Option<&'static str> {
    let alias = match name {
        "fig1" => "regionmap",
        "fig2" => "resurgence",
        "fig7" => "stepsize",
        "fig8" => "damping",
        other => other,
    };
    SCENARIOS.iter().copied().find(|s| *s == alias)
}

/// Damping weight sets of the damping study: heavy increment penalties, prevalence
/// only, and degree only.
pub const DAMPING_SETS: [(&str, [f64; 4]); 3] = [
    ("increments", [1e4, 1e6, 1.0, 1e6]),
    ("prevalence_only", [1.0, 0.0, 0.0, 0.0]),
    ("degree_only", [0.0, 0.0, 1.0, 0.0]),
];

/// Step sizes of the step-size study.
pub const STEP_SIZES: [f64; 4] = [0.2, 1.0, 5.0, 10.0];

/// `(M1, n*)` reference rows of the achievable-target study.
pub const TABLE2: [(f64, f64); 4] = [(7.8, 10.0), (6.0, 7.6), (4.5, 6.0), (3.5, 4.4)];

struct Context<'a> {
    name: &'static str,
    overrides: &'a Overrides,
    out: &'a Path,
    files: Vec<String>,
}

impl Context<'_> {
    /// Scenario defaults for the system and controller, then the user's overrides.
    fn setup(&self, params: SystemParams, cfg: NmpcConfig) -> Result<(SystemParams, NmpcConfig)> {
        let (mut params, mut cfg) = (params, cfg);
        self.overrides.apply_system(&mut params)?;
        self.overrides.apply_control(&mut cfg)?;
        Ok((params, cfg))
    }

    fn trajectory(&mut self, file: &str, traj: &Trajectory, params: &SystemParams) -> Result<()> {
        io::create_in(self.out, file, |f| io::write_trajectory(f, traj, params))?;
        self.files.push(file.to_string());
        Ok(())
    }

    fn table(&mut self, file: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        io::create_in(self.out, file, |f| io::write_table(f, header, rows))?;
        self.files.push(file.to_string());
        Ok(())
    }

    fn nmpc(&mut self, file: &str, params: &SystemParams, cfg: &NmpcConfig) -> Result<Value> {
        let r: ControlResult = run_nmpc(params, cfg)?;
        self.trajectory(file, &r.trajectory, params)?;
        Ok(json!({
            "file": file,
            "params": params,
            "config": cfg,
            "final_I": r.final_i,
            "final_n": r.final_n,
            "dev_I": r.dev_i,
            "dev_n": r.dev_n,
            "controllable": r.controllable,
            "stalled_steps": r.stalled_steps,
        }))
    }
}

/// Runs a named study with its reference parameters plus `overrides`, writing
/// CSV artifacts and `summary.json` into `out`; returns the summary.
pub fn scenario_run(name: &str, overrides: &Overrides, out: &Path) -> Result<Value> {
    let name = canonical(name).ok_or_else(|| Error::UnknownScenario(name.to_string()))?;
    let mut cx = Context { name, overrides, out, files: Vec::new() };
    let nmpc_default = |tau: f64, m1: f64, m2: f64| {
        (SystemParams::default().with_tau(tau), NmpcConfig { m1, m2, ..NmpcConfig::default() })
    };

    let results = match name {
        "regionmap" => regionmap(&mut cx)?,
        "resurgence" => {
            let (params, cfg) = cx.setup(SystemParams::default(), NmpcConfig { horizon: 200.0, ..NmpcConfig::default() })?;
            let u = overrides_control(overrides, ControlInput::new(90.0, 0.05))?;
            let traj = run_constant(&params, u, cfg.dt, cfg.horizon)?;
            cx.trajectory("trajectory.csv", &traj, &params)?;
            let dip = 0.1 * params.initial_infected;
            let found = resurgence(&traj, dip, 5.0 * dip);
            json!({
                "params": params,
                "control": u,
                "T": cfg.horizon,
                "dip_threshold": dip,
                "resurgent": found.is_some(),
                "dip_time": found.map(|f| f.0),
                "rebound_time": found.map(|f| f.1),
                "min_I": traj.states.iter().map(|x| x.i).fold(f64::INFINITY, f64::min),
            })
        }
        "fig3" => {
            let (params, cfg) = nmpc_default(0.1, 1.0, 0.001);
            let (params, cfg) = cx.setup(params, cfg)?;
            let spec = SweepSpec {
                base_params: params,
                base_cfg: cfg.clone(),
                axis: "system.tau".into(),
                values: vec![0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.2, 0.3, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            };
            let free = sweep_tau(&spec, false)?;
            let ctrl = sweep_tau(&spec, true)?;
            let rows: Vec<Vec<Cell>> = free
                .iter()
                .map(|r| ("uncontrolled", r))
                .chain(ctrl.iter().map(|r| ("controlled", r)))
                .map(|(mode, r)| {
                    vec![mode.into(), r.value.into(), r.final_i.into(), r.final_n.into(), r.controllable.map_or(Cell::Empty, Cell::from)]
                })
                .collect();
            cx.table("tau_sweep.csv", &["mode", "tau", "I_T", "n_T", "controllable"], &rows)?;
            json!({ "params": params, "config": cfg, "uncontrolled": free, "controlled": ctrl })
        }
        "fig4" => {
            let (params, cfg) = nmpc_default(2.0, 18.0, 0.001);
            let (params, cfg) = cx.setup(params, cfg)?;
            cx.nmpc("trajectory.csv", &params, &cfg)?
        }
        "fig6" => {
            let (params, cfg) = nmpc_default(1.0, 6.0, 0.5);
            let (params, cfg) = cx.setup(params, cfg)?;
            let mut runs = Vec::new();
            for n_target in [params.initial_degree, 7.5] {
                let cfg = NmpcConfig { n_target, ..cfg.clone() };
                runs.push(cx.nmpc(&format!("trajectory_n{n_target}.csv"), &params, &cfg)?);
            }
            json!({ "runs": runs })
        }
        "stepsize" => {
            let (params, cfg) = nmpc_default(1.0, 7.8, 0.5);
            let (params, cfg) = cx.setup(params, cfg)?;
            let mut runs = Vec::new();
            for dt in STEP_SIZES {
                let cfg = NmpcConfig { dt, ..cfg.clone() };
                runs.push(cx.nmpc(&format!("trajectory_dt{dt}.csv"), &params, &cfg)?);
            }
            json!({ "runs": runs })
        }
        "damping" => {
            let (params, cfg) = nmpc_default(1.0, 7.8, 0.5);
            let (params, cfg) = cx.setup(params, cfg)?;
            let mut runs = Vec::new();
            for (label, lambdas) in DAMPING_SETS {
                let cfg = NmpcConfig { lambdas, ..cfg.clone() };
                let mut run = cx.nmpc(&format!("trajectory_{label}.csv"), &params, &cfg)?;
                run["label"] = json!(label);
                runs.push(run);
            }
            json!({ "runs": runs })
        }
        "table2" => {
            let (params, cfg) = nmpc_default(1.0, 7.8, 0.5);
            let (params, cfg) = cx.setup(params, cfg)?;
            let search = Bisection::target(&params);
            let rows: Vec<(f64, Result<f64>)> = TABLE2
                .par_iter()
                .map(|&(m1, _)| (m1, achievable_target(m1, cfg.m2, params.tau, &cfg, &params, search)))
                .collect();
            let table: Vec<Vec<Cell>> = rows
                .iter()
                .map(|(m1, r)| vec![(*m1).into(), r.as_ref().ok().copied().into()])
                .collect();
            cx.table("table2.csv", &["M1", "n_star"], &table)?;
            let entries: Vec<Value> = rows
                .iter()
                .map(|(m1, r)| match r {
                    Ok(n) => json!({ "M1": m1, "n_star": n }),
                    Err(e) => json!({ "M1": m1, "error": e.to_string() }),
                })
                .collect();
            json!({ "params": params, "config": cfg, "search": search, "rows": entries })
        }
        "fig5-left" | "fig5-right" => {
            let (params, cfg) = nmpc_default(1.0, 1.0, 0.001);
            let (params, cfg) = cx.setup(params, cfg)?;
            let (taus, m2s) = if name == "fig5-left" {
                ((1..=30).map(|k| k as f64 / 10.0).collect::<Vec<_>>(), vec![0.001, 0.1, 0.5])
            } else {
                (vec![params.tau], linspace(-3.0, 0.0, 13).into_iter().map(|e| 10f64.powf(e)).collect())
            };
            let rows = critical_curves(&taus, &m2s, &cfg, &params, Bisection::M1);
            let table: Vec<Vec<Cell>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.m2.into(),
                        r.tau.into(),
                        r.result.as_ref().map(|c| c.m1_critical).into(),
                        r.result.as_ref().map_or(Cell::Empty, |c| c.verified.into()),
                    ]
                })
                .collect();
            cx.table("critical_curves.csv", &["M2", "tau", "M1_critical", "verified"], &table)?;
            let violations = monotonicity_violations(&rows);
            for (m2, a, b) in &violations {
                log::warn!("critical M1 drops between tau = {a} and {b} at M2 = {m2}");
            }
            json!({ "params": params, "config": cfg, "search": Bisection::M1, "rows": rows, "monotonicity_violations": violations })
        }
        _ => unreachable!("scenario list and dispatch disagree"),
    };

    let overrides_json: serde_json::Map<String, Value> = overrides
        .iter()
        .map(|(k, v)| {
            let v = match v {
                crate::config::Value::Real(x) => json!(x),
                crate::config::Value::Count(n) => json!(n),
                crate::config::Value::Word(w) => json!(w),
            };
            (k.to_string(), v)
        })
        .collect();
    let summary = json!({
        "scenario": cx.name,
        "overrides": overrides_json,
        "results": results,
        "files": cx.files,
    });
    std::fs::create_dir_all(out)?;
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn overrides_control(o: &Overrides, default: ControlInput) -> Result<ControlInput> {
    let u = ControlInput::new(
        o.number("control.u1").unwrap_or(default.u1),
        o.number("control.u2").unwrap_or(default.u2),
    );
    u.validate()?;
    Ok(u)
}

/// Representative constant controls of the three regimes at the default parameters.
pub const REGIME_EXAMPLES: [(RegionClass, ControlInput); 3] = [
    (RegionClass::EndemicStable, ControlInput { u1: 20.0, u2: 10.0 }),
    (RegionClass::Oscillatory, ControlInput { u1: 20.0, u2: 0.01 }),
    (RegionClass::DiseaseFreeStable, ControlInput { u1: 100.0, u2: 0.01 }),
];

fn regionmap(cx: &mut Context<'_>) -> Result<Value> {
    let (params, _) = cx.setup(SystemParams::default(), NmpcConfig::default())?;
    let grid = RegionGrid::default().with_overrides(cx.overrides)?;
    let cells: Vec<RegionCell> = region_map(&params, &grid.u1_values(), &grid.u2_values())?;
    io::create_in(cx.out, "regions.csv", |f| io::write_regions(f, &cells))?;
    cx.files.push("regions.csv".into());

    let threshold = transcritical_u1(&params);
    let hopf = hopf_curve(&params, &hopf_u1_grid(&params), HOPF_U2_RANGE)?;
    let rows: Vec<Vec<Cell>> = hopf.iter().map(|&(a, b)| vec![a.into(), b.into()]).collect();
    cx.table("hopf.csv", &["u1", "u2"], &rows)?;

    let mut examples = Vec::new();
    for (class, u) in REGIME_EXAMPLES {
        let traj = run_constant(&params, u, 0.1, 200.0)?;
        let file = format!("trajectory_{}.csv", class.as_str());
        cx.trajectory(&file, &traj, &params)?;
        examples.push(json!({ "class": class, "control": u, "file": file, "long_run": LongRun::of(&traj, SPOT_CHECK_WINDOW) }));
    }
    let count = |c: RegionClass| cells.iter().filter(|x| x.class == c).count();
    Ok(json!({
        "params": params,
        "grid": grid,
        "transcritical_u1": threshold,
        "counts": {
            "endemic_stable": count(RegionClass::EndemicStable),
            "oscillatory": count(RegionClass::Oscillatory),
            "disease_free_stable": count(RegionClass::DiseaseFreeStable),
        },
        "hopf_points": hopf.len(),
        "examples": examples,
    }))
}
