//! Receding-horizon (NMPC) control of the signed-rewiring system.
//!
//! At every control instant `k` the controller picks `P` future controls that
//! minimize
//!
//! ```text
//! J = Σ_j λ1 (y1 - I*)² + λ2 Δu1² + λ3 (y2 - n*)² + λ4 Δu2²
//! ```
//!
//! over the box `0 <= u1 <= M1`, `|u2| <= M2`, applies the first control for one
//! step `dt`, and repeats until `T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{output_h, step_f, ControlSchedule, StepConfig, Trajectory};
use crate::model::{initial_state, ControlInput, Dynamics, Guard, ModelState, SsRecovery, System, SystemParams};
use crate::optimize::{minimize_box, DescentOptions};

/// Which predicted outputs enter the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostIndexing {
    /// Output after applying `u(k+j|k)`, i.e. `y(k+j+1|k)` for `j = 0..P-1`.
    #[default]
    Shifted,
    /// `y(k+j|k)` for `j = 0..P-1`, including the current output.
    Literal,
}

impl std::str::FromStr for CostIndexing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shifted" => Ok(CostIndexing::Shifted),
            "literal" => Ok(CostIndexing::Literal),
            other => Err(Error::InvalidParameter {
                name: "control.cost_indexing",
                reason: format!("expected `shifted` or `literal`, got `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmpcConfig {
    /// Upper bound on `u1`.
    pub m1: f64,
    /// Bound on `|u2|`.
    pub m2: f64,
    /// Control step.
    pub dt: f64,
    /// Length of the control period `T`.
    pub horizon: f64,
    /// Prediction horizon `P`, in steps.
    pub prediction_steps: usize,
    /// Weights `(λ1, λ2, λ3, λ4)` on prevalence, `Δu1`, degree error and `Δu2`.
    pub lambdas: [f64; 4],
    pub i_target: f64,
    pub n_target: f64,
    pub epsilon: f64,
    /// Seed for the multi-start draws.
    pub seed: u64,
    /// Random restarts in addition to the warm start.
    pub restarts: usize,
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub cost_indexing: CostIndexing,
    pub ss_recovery: SsRecovery,
    pub step: StepConfig,
}

impl Default for NmpcConfig {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 0.001,
            dt: 0.1,
            horizon: 10.0,
            prediction_steps: 5,
            lambdas: [1e4, 1.0, 1.0, 1.0],
            i_target: 0.0,
            n_target: 10.0,
            epsilon: 0.1,
            seed: 42,
            restarts: 3,
            max_iterations: 500,
            rel_tol: 1e-8,
            cost_indexing: CostIndexing::Shifted,
            ss_recovery: SsRecovery::Conserving,
            step: StepConfig::default(),
        }
    }
}

impl NmpcConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.m1.is_finite() && self.m1 > 0.0) {
            return invalid("control.M1", format!("must be positive, got {}", self.m1));
        }
        if !(self.m2.is_finite() && self.m2 >= 0.0) {
            return invalid("control.M2", format!("must be non-negative, got {}", self.m2));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return invalid("control.dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return invalid("control.T", format!("must be positive, got {}", self.horizon));
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return invalid("control.T", format!("T/dt = {ratio} is not a positive integer"));
        }
        if self.prediction_steps == 0 {
            return invalid("control.P", "prediction horizon must be at least one step".into());
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return invalid("damping", format!("weights must be non-negative, got {:?}", self.lambdas));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return invalid("targets.epsilon", format!("must be positive, got {}", self.epsilon));
        }
        if !(self.i_target.is_finite() && self.n_target.is_finite()) {
            return invalid("targets", "targets must be finite".into());
        }
        if self.max_iterations == 0 {
            return invalid("control.max_iterations", "must be at least one".into());
        }
        Ok(())
    }

    /// Number of control steps `T / dt`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn dynamics(&self, params: &SystemParams) -> Dynamics {
        Dynamics::new(*params, System::Nmpc)
            .with_ss_recovery(self.ss_recovery)
            .with_guard(Guard::Lenient)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let p = self.prediction_steps;
        let lower = (0..2 * p).map(|i| if i % 2 == 0 { 0.0 } else { -self.m2 }).collect();
        let upper = (0..2 * p).map(|i| if i % 2 == 0 { self.m1 } else { self.m2 }).collect();
        (lower, upper)
    }

    /// Whether every control lies in the admissible box.
    pub fn admissible(&self, u: &ControlInput) -> bool {
        (0.0..=self.m1).contains(&u.u1) && u.u2.abs() <= self.m2
    }
}

fn stage_cost(y: (f64, f64), du: (f64, f64), cfg: &NmpcConfig) -> f64 {
    let [l1, l2, l3, l4] = cfg.lambdas;
    l1 * (y.0 - cfg.i_target).powi(2) + l2 * du.0 * du.0 + l3 * (y.1 - cfg.n_target).powi(2) + l4 * du.1 * du.1
}

/// The horizon cost of `seq` from state `x_k`, with `Δu` at `j = 0` taken against `u_prev`.
pub fn objective_j(
    seq: &[ControlInput],
    x_k: &ModelState,
    u_prev: ControlInput,
    cfg: &NmpcConfig,
    dynamics: &Dynamics,
) -> Result<f64> {
    let params = &dynamics.params;
    let mut x = *x_k;
    let mut prev = u_prev;
    let mut total = 0.0;
    for (j, &u) in seq.iter().enumerate() {
        let du = (u.u1 - prev.u1, u.u2 - prev.u2);
        let y = match cfg.cost_indexing {
            CostIndexing::Literal => {
                let y = output_h(&x, params);
                if j + 1 < seq.len() {
                    x = step_f(&x, u, cfg.dt, dynamics, &cfg.step)?;
                }
                y
            }
            CostIndexing::Shifted => {
                x = step_f(&x, u, cfg.dt, dynamics, &cfg.step)?;
                output_h(&x, params)
            }
        };
        total += stage_cost(y, du, cfg);
        prev = u;
    }
    Ok(total)
}

fn pack(seq: &[ControlInput]) -> Vec<f64> {
    seq.iter().flat_map(|u| [u.u1, u.u2]).collect()
}

fn unpack(v: &[f64]) -> Vec<ControlInput> {
    v.chunks_exact(2).map(|c| ControlInput::new(c[0], c[1])).collect()
}

/// Optimal control sequence over the prediction horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSolution {
    pub controls: Vec<ControlInput>,
    pub objective: f64,
    /// Set when the winning start hit the iteration limit.
    pub stalled: bool,
}

/// Solves the horizon problem from `warm_start` plus `cfg.restarts` random
/// admissible starts; `stream` selects the random draws so that every control
/// instant gets its own reproducible seeds.
pub fn optimize_horizon(
    x_k: &ModelState,
    u_prev: ControlInput,
    warm_start: &[ControlInput],
    stream: u64,
    cfg: &NmpcConfig,
    dynamics: &Dynamics,
) -> Result<HorizonSolution> {
    cfg.validate()?;
    let p = cfg.prediction_steps;
    let (lower, upper) = cfg.bounds();
    let mut warm: Vec<ControlInput> = warm_start.iter().copied().take(p).collect();
    let last = warm.last().copied().unwrap_or(ControlInput::ZERO);
    warm.resize(p, last);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut starts = vec![pack(&warm)];
    for _ in 0..cfg.restarts {
        starts.push((0..2 * p).map(|i| rng.gen_range(lower[i]..=upper[i])).collect());
    }

    let opts = DescentOptions {
        max_iterations: cfg.max_iterations,
        rel_tol: cfg.rel_tol,
        ..DescentOptions::default()
    };
    let cost = |v: &[f64]| objective_j(&unpack(v), x_k, u_prev, cfg, dynamics).unwrap_or(f64::INFINITY);
    let results: Vec<_> = starts
        .par_iter()
        .map(|s| minimize_box(cost, s, &lower, &upper, &opts))
        .collect();
    let best = results
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");

    let zero = vec![0.0; 2 * p];
    let zero_value = cost(&zero);
    if zero_value < best.value {
        return Ok(HorizonSolution {
            controls: unpack(&zero),
            objective: zero_value,
            stalled: false,
        });
    }
    if !best.value.is_finite() {
        return Err(Error::IntegrationFailure { time: 0.0 });
    }
    Ok(HorizonSolution {
        controls: unpack(&best.x),
        objective: best.value,
        stalled: !best.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlResult {
    pub trajectory: Trajectory,
    pub applied_controls: ControlSchedule,
    pub final_i: f64,
    pub final_n: f64,
    pub dev_i: f64,
    pub dev_n: f64,
    pub controllable: bool,
    pub objective_history: Vec<f64>,
    /// Control instants at which the optimizer ran out of iterations.
    pub stalled_steps: usize,
}

/// Verdict of ε-controllability at the final recorded state: `(ok, |I - I*|, |n - n*|)`.
pub fn check_controllability(traj: &Trajectory, cfg: &NmpcConfig) -> Result<(bool, f64, f64)> {
    let (i, n) = traj.final_output().ok_or_else(|| Error::InvalidParameter {
        name: "trajectory",
        reason: "empty trajectory".into(),
    })?;
    let dev_i = (i - cfg.i_target).abs();
    let dev_n = (n - cfg.n_target).abs();
    Ok((dev_i <= cfg.epsilon && dev_n <= cfg.epsilon, dev_i, dev_n))
}

/// Runs the closed loop from the mean-field initial state for `T / dt` steps.
pub fn run_nmpc(params: &SystemParams, cfg: &NmpcConfig) -> Result<ControlResult> {
    params.validate()?;
    cfg.validate()?;
    let dynamics = cfg.dynamics(params);
    let x0 = initial_state(params);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0],
        controls: Vec::new(),
        outputs: vec![output_h(&x0, params)],
    };
    let mut x = x0;
    let mut u_prev = ControlInput::ZERO;
    let mut warm = vec![ControlInput::ZERO; cfg.prediction_steps];
    let mut history = Vec::with_capacity(cfg.steps());
    let mut stalled_steps = 0;

    for k in 0..cfg.steps() {
        let sol = optimize_horizon(&x, u_prev, &warm, k as u64, cfg, &dynamics)?;
        if sol.stalled {
            stalled_steps += 1;
            log::warn!("optimizer hit the iteration limit at step {k}");
        }
        let u = sol.controls[0];
        x = step_f(&x, u, cfg.dt, &dynamics, &cfg.step)?;
        traj.times.push((k + 1) as f64 * cfg.dt);
        traj.states.push(x);
        traj.outputs.push(output_h(&x, params));
        traj.controls.push(u);
        history.push(sol.objective);
        u_prev = u;
        warm = sol.controls[1..].to_vec();
        warm.push(*sol.controls.last().expect("non-empty horizon"));
    }

    let (controllable, dev_i, dev_n) = check_controllability(&traj, cfg)?;
    let (final_i, final_n) = traj.final_output().expect("recorded");
    Ok(ControlResult {
        applied_controls: ControlSchedule {
            dt: cfg.dt,
            steps: traj.controls.clone(),
        },
        trajectory: traj,
        final_i,
        final_n,
        dev_i,
        dev_n,
        controllable,
        objective_history: history,
        stalled_steps,
    })
}
