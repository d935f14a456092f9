//! Fixed-step RK4 integration of the pairwise system under piecewise-constant control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{initial_state, mean_degree, ControlInput, Dynamics, ModelState, SystemParams};

/// Inner-step policy for one control interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    /// Minimum number of RK4 substeps per control interval.
    pub substeps: usize,
    /// Upper bound on the substep length; long intervals get more substeps.
    pub max_substep: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            substeps: 20,
            max_substep: 0.01,
        }
    }
}

impl StepConfig {
    /// Exactly `substeps` substeps regardless of the interval length.
    pub fn fixed(substeps: usize) -> Self {
        Self {
            substeps,
            max_substep: f64::INFINITY,
        }
    }

    pub fn substeps_for(&self, dt: f64) -> usize {
        let by_length = if self.max_substep.is_finite() {
            (dt / self.max_substep).ceil() as usize
        } else {
            0
        };
        self.substeps.max(by_length).max(1)
    }
}

/// Piecewise-constant controls; `steps[k]` acts on `[k dt, (k+1) dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub dt: f64,
    pub steps: Vec<ControlInput>,
}

impl ControlSchedule {
    pub fn new(dt: f64, steps: Vec<ControlInput>) -> Result<Self> {
        let s = Self { dt, steps };
        s.validate()?;
        Ok(s)
    }

    /// The same control held over `count` intervals.
    pub fn constant(dt: f64, count: usize, u: ControlInput) -> Result<Self> {
        Self::new(dt, vec![u; count])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "control.dt",
                reason: format!("step must be positive, got {}", self.dt),
            });
        }
        self.steps.iter().try_for_each(ControlInput::validate)
    }

    pub fn horizon(&self) -> f64 {
        self.steps.len() as f64 * self.dt
    }
}

/// States and outputs recorded along a simulation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ModelState>,
    /// Control applied on the interval starting at the matching time; one shorter than `states`.
    pub controls: Vec<ControlInput>,
    /// `(I, n)` at each recorded time.
    pub outputs: Vec<(f64, f64)>,
}

impl Trajectory {
    fn start(x0: ModelState, params: &SystemParams) -> Self {
        Self {
            times: vec![0.0],
            states: vec![x0],
            controls: Vec::new(),
            outputs: vec![output_h(&x0, params)],
        }
    }

    fn push(&mut self, t: f64, x: ModelState, params: &SystemParams) {
        self.times.push(t);
        self.states.push(x);
        self.outputs.push(output_h(&x, params));
    }

    pub fn final_state(&self) -> Option<&ModelState> {
        self.states.last()
    }

    pub fn final_output(&self) -> Option<(f64, f64)> {
        self.outputs.last().copied()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Control in force at sample `k` (the last sample reuses the final control).
    pub fn control_at(&self, k: usize) -> ControlInput {
        self.controls
            .get(k)
            .or_else(|| self.controls.last())
            .copied()
            .unwrap_or_default()
    }
}

/// One classical RK4 step of size `h` for an autonomous field `f`.
pub fn rk4_step<const D: usize, F>(x: &[f64; D], h: f64, f: F) -> Result<[f64; D]>
where
    F: Fn(&[f64; D]) -> Result<[f64; D]>,
{
    let axpy = |a: &[f64; D], s: f64, b: &[f64; D]| -> [f64; D] { std::array::from_fn(|i| a[i] + s * b[i]) };
    let k1 = f(x)?;
    let k2 = f(&axpy(x, 0.5 * h, &k1))?;
    let k3 = f(&axpy(x, 0.5 * h, &k2))?;
    let k4 = f(&axpy(x, h, &k3))?;
    Ok(std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// Projects a state back onto `x >= 0`, `[I] <= N`. Returns the largest correction made.
pub fn clamp_state(x: &mut ModelState, params: &SystemParams) -> f64 {
    let mut worst = 0.0_f64;
    let mut a = x.to_array();
    for v in a.iter_mut() {
        if *v < 0.0 {
            worst = worst.max(-*v);
            *v = 0.0;
        }
    }
    if a[0] > params.n() {
        worst = worst.max(a[0] - params.n());
        a[0] = params.n();
    }
    *x = ModelState::from_array(a);
    worst
}

fn substep(x: &ModelState, u: ControlInput, h: f64, dynamics: &Dynamics) -> Result<ModelState> {
    let f = |a: &[f64; 4]| dynamics.rhs(&ModelState::from_array(*a), u).map(|d| d.to_array());
    let mut next = ModelState::from_array(rk4_step(&x.to_array(), h, f)?);
    let correction = clamp_state(&mut next, &dynamics.params);
    if correction > 1e-6 * dynamics.params.n() {
        log::debug!("clamped state by {correction:e} after RK4 substep");
    }
    Ok(next)
}

/// The one-interval map `x(k+1) = F(x(k), u(k))`.
pub fn step_f(x: &ModelState, u: ControlInput, dt: f64, dynamics: &Dynamics, cfg: &StepConfig) -> Result<ModelState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "control.dt",
            reason: format!("step must be positive, got {dt}"),
        });
    }
    let count = cfg.substeps_for(dt);
    let h = dt / count as f64;
    let mut state = *x;
    for k in 0..count {
        state = substep(&state, u, h, dynamics)?;
        if !state.is_finite() {
            return Err(Error::IntegrationFailure { time: (k + 1) as f64 * h });
        }
    }
    Ok(state)
}

/// The output map `h(x) = ([I], n)`.
pub fn output_h(x: &ModelState, params: &SystemParams) -> (f64, f64) {
    (x.i, mean_degree(x, params))
}

/// Simulates from the mean-field initial state, recording at control boundaries.
pub fn simulate(dynamics: &Dynamics, schedule: &ControlSchedule, cfg: &StepConfig) -> Result<Trajectory> {
    simulate_from(&initial_state(&dynamics.params), dynamics, schedule, cfg, false)
}

/// Simulates from `x0`. With `record_substeps` every RK4 substep is recorded.
pub fn simulate_from(
    x0: &ModelState,
    dynamics: &Dynamics,
    schedule: &ControlSchedule,
    cfg: &StepConfig,
    record_substeps: bool,
) -> Result<Trajectory> {
    schedule.validate()?;
    if schedule.steps.is_empty() {
        return Err(Error::InvalidParameter {
            name: "schedule",
            reason: "schedule has no steps".into(),
        });
    }
    let params = &dynamics.params;
    let mut traj = Trajectory::start(*x0, params);
    let mut x = *x0;
    let dt = schedule.dt;
    for (k, &u) in schedule.steps.iter().enumerate() {
        let t0 = k as f64 * dt;
        if record_substeps {
            let count = cfg.substeps_for(dt);
            let h = dt / count as f64;
            for j in 0..count {
                x = substep(&x, u, h, dynamics)?;
                if !x.is_finite() {
                    return Err(Error::IntegrationFailure { time: t0 + (j + 1) as f64 * h });
                }
                traj.controls.push(u);
                let t = if j + 1 == count {
                    (k + 1) as f64 * dt
                } else {
                    t0 + (j + 1) as f64 * h
                };
                traj.push(t, x, params);
            }
        } else {
            x = step_f(&x, u, dt, dynamics, cfg).map_err(|e| match e {
                Error::IntegrationFailure { time } => Error::IntegrationFailure { time: t0 + time },
                other => other,
            })?;
            traj.controls.push(u);
            traj.push((k + 1) as f64 * dt, x, params);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Guard, System};
    use approx::assert_relative_eq;

    fn constant_dynamics(tau: f64) -> Dynamics {
        Dynamics::new(SystemParams::default().with_tau(tau), System::Constant)
    }

    #[test]
    fn rk4_kernel_on_exponential_decay() {
        let mut x = [1.0];
        let h = 0.1 / 20.0;
        for _ in 0..20 {
            x = rk4_step(&x, h, |a| Ok([-a[0]])).unwrap();
        }
        assert!((x[0] - (-0.1f64).exp()).abs() < 1e-7);
        assert_relative_eq!(x[0], 0.904_837_4, epsilon = 1e-7);
        let one = rk4_step(&[1.0], 0.1, |a| Ok([-a[0]])).unwrap();
        assert!((one[0] - 0.904_837_4).abs() < 1e-6);
    }

    #[test]
    fn disease_free_full_graph_is_a_fixed_point() {
        let d = constant_dynamics(0.1);
        let x = ModelState::new(0.0, 0.0, 0.0, 999_000.0);
        for (u, dt) in [(ControlInput::ZERO, 0.1), (ControlInput::new(3.0, 0.2), 2.0)] {
            assert_eq!(step_f(&x, u, dt, &d, &StepConfig::default()).unwrap(), x);
        }
    }

    #[test]
    fn uncontrolled_step_conserves_degree() {
        let d = constant_dynamics(0.1).with_guard(Guard::Strict);
        let x = ModelState::new(10.0, 99.0, 1.0, 9801.0);
        let next = step_f(&x, ControlInput::ZERO, 0.2, &d, &StepConfig::default()).unwrap();
        assert!((next.mean_degree(&d.params) - 10.0).abs() <= 1e-8);
    }

    #[test]
    fn output_map_examples() {
        let p = SystemParams::default();
        let (i, n) = output_h(&ModelState::new(10.0, 99.0, 1.0, 9801.0), &p);
        assert_eq!(i, 10.0);
        assert_relative_eq!(n, 10.0, epsilon = 1e-12);
        assert_eq!(output_h(&ModelState::new(0.0, 0.0, 0.0, 999_000.0), &p), (0.0, 999.0));
        assert_eq!(output_h(&ModelState::default(), &p), (0.0, 0.0));
    }

    #[test]
    fn simulate_bookkeeping() {
        let d = constant_dynamics(0.1);
        let schedule = ControlSchedule::constant(0.1, 7, ControlInput::ZERO).unwrap();
        let traj = simulate(&d, &schedule, &StepConfig::default()).unwrap();
        assert_eq!(traj.len(), 8);
        assert_eq!(traj.controls.len(), 7);
        assert_eq!(traj.outputs.len(), 8);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_relative_eq!(*traj.times.last().unwrap(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn substep_recording_ends_on_the_boundary() {
        let d = constant_dynamics(0.1);
        let schedule = ControlSchedule::constant(0.1, 3, ControlInput::ZERO).unwrap();
        let coarse = simulate(&d, &schedule, &StepConfig::default()).unwrap();
        let fine = simulate_from(&coarse.states[0], &d, &schedule, &StepConfig::default(), true).unwrap();
        assert_eq!(fine.len(), 61);
        assert_eq!(fine.final_state(), coarse.final_state());
        assert_eq!(fine.times.last(), coarse.times.last());
    }

    #[test]
    fn subthreshold_epidemic_decays_without_control() {
        let d = constant_dynamics(0.04);
        let schedule = ControlSchedule::constant(0.1, 100, ControlInput::ZERO).unwrap();
        let traj = simulate(&d, &schedule, &StepConfig::default()).unwrap();
        let (i_end, _) = traj.final_output().unwrap();
        assert!(i_end < 10.0);
        assert!(traj.outputs.windows(2).all(|w| w[1].0 < w[0].0));
    }

    #[test]
    fn zero_control_keeps_degree_for_any_tau() {
        for tau in [0.01, 0.1, 0.5, 1.0, 3.0] {
            let d = constant_dynamics(tau);
            let schedule = ControlSchedule::constant(0.1, 100, ControlInput::ZERO).unwrap();
            let traj = simulate(&d, &schedule, &StepConfig::default()).unwrap();
            for &(_, n) in &traj.outputs {
                assert!((n - 10.0).abs() <= 1e-8 * 10.0, "tau {tau}: n = {n}");
            }
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let d = Dynamics::new(SystemParams::default().with_tau(1.0), System::Nmpc);
        let steps = (0..30).map(|k| ControlInput::new(k as f64 * 0.2, 0.001 * (k as f64).sin())).collect();
        let schedule = ControlSchedule::new(0.1, steps).unwrap();
        let a = simulate(&d, &schedule, &StepConfig::default()).unwrap();
        let b = simulate(&d, &schedule, &StepConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        // Error ratio between S and 2S substeps, measured against an S = 320 reference.
        let d = constant_dynamics(0.5).with_guard(Guard::Strict);
        let x0 = ModelState::new(10.0, 99.0, 1.0, 9801.0);
        let u = ControlInput::new(1.0, 0.001);
        let run = |s| step_f(&x0, u, 1.0, &d, &StepConfig::fixed(s)).unwrap().to_array();
        let reference = run(320);
        let err = |a: [f64; 4]| a.iter().zip(reference).map(|(x, r)| (x - r).abs()).fold(0.0, f64::max);
        let ratio = err(run(10)) / err(run(20));
        assert!((ratio - 16.0).abs() <= 0.3 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn long_intervals_are_subdivided() {
        let cfg = StepConfig::default();
        assert_eq!(cfg.substeps_for(0.1), 20);
        assert_eq!(cfg.substeps_for(10.0), 1000);
        assert_eq!(StepConfig::fixed(20).substeps_for(10.0), 20);
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(ControlSchedule::new(0.0, vec![ControlInput::ZERO]).is_err());
        assert!(ControlSchedule::new(0.1, vec![ControlInput::new(-1.0, 0.0)]).is_err());
        let d = constant_dynamics(0.1);
        let empty = ControlSchedule { dt: 0.1, steps: vec![] };
        assert!(simulate(&d, &empty, &StepConfig::default()).is_err());
    }
}
