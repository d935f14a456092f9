//! Pairwise SIS dynamics on an adaptive network.
//!
//! The state tracks expected counts of infected nodes and of `SI`, `II` and
//! `SS` pairs. Pair counts follow the ordered convention in which the mean
//! degree is `(2[SI] + [SS] + [II]) / N`. Triples are closed with the
//! homogeneous closure `[ABC] ~ (n-1)/n * [AB][BC]/[B]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold below which `n` and `N - [I]` are treated as zero by the closures.
pub const CLOSURE_GUARD: f64 = 1e-9;

/// Population-level description of the epidemic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Population size `N`.
    pub population: u32,
    /// Per-contact infection rate.
    pub tau: f64,
    /// Recovery rate.
    pub gamma: f64,
    /// Infected count at `t = 0`.
    pub initial_infected: f64,
    /// Mean degree at `t = 0`.
    pub initial_degree: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            population: 1000,
            tau: 0.1,
            gamma: 1.0,
            initial_infected: 10.0,
            initial_degree: 10.0,
        }
    }
}

impl SystemParams {
    pub fn new(population: u32, tau: f64, gamma: f64, initial_infected: f64, initial_degree: f64) -> Result<Self> {
        let p = Self {
            population,
            tau,
            gamma,
            initial_infected,
            initial_degree,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same parameters with a different infection rate.
    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    /// `N` as a float.
    #[inline]
    pub fn n(&self) -> f64 {
        f64::from(self.population)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |name, reason: &str| Error::InvalidParameter {
            name,
            reason: reason.to_string(),
        };
        if self.population < 3 {
            return Err(invalid("system.N", "population must be at least 3"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(invalid("system.gamma", "recovery rate must be positive"));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(invalid("system.tau", "infection rate must be non-negative"));
        }
        if !(self.initial_infected.is_finite() && (0.0..=self.n()).contains(&self.initial_infected)) {
            return Err(invalid("system.I0", "initial infected count must lie in [0, N]"));
        }
        if !(self.initial_degree.is_finite() && self.initial_degree > 0.0 && self.initial_degree <= self.n() - 1.0)
        {
            return Err(invalid("system.n0", "initial mean degree must lie in (0, N-1]"));
        }
        Ok(())
    }
}

/// Expected singleton and pair counts at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelState {
    pub i: f64,
    pub si: f64,
    pub ii: f64,
    pub ss: f64,
}

impl ModelState {
    pub const fn new(i: f64, si: f64, ii: f64, ss: f64) -> Self {
        Self { i, si, ii, ss }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.i, self.si, self.ii, self.ss]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Largest absolute coordinate, floored at one.
    pub fn scale(&self) -> f64 {
        self.to_array().iter().fold(1.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn mean_degree(&self, params: &SystemParams) -> f64 {
        mean_degree(self, params)
    }

    /// Checks the non-negativity, `I <= N` and degree-range invariants.
    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        let n_pop = params.n();
        if !self.is_finite() || self.to_array().iter().any(|&v| v < 0.0) {
            return Err(Error::DegenerateState(format!("coordinates must be finite and non-negative: {self:?}")));
        }
        if self.i > n_pop {
            return Err(Error::DegenerateState(format!("[I] = {} exceeds N = {n_pop}", self.i)));
        }
        let n = self.mean_degree(params);
        if n > n_pop - 1.0 + 1e-6 * n_pop {
            return Err(Error::DegenerateState(format!("mean degree {n} exceeds N - 1")));
        }
        Ok(())
    }
}

/// Control rates: `u1` cuts `SI` edges, `u2` creates (or, when negative, deletes) `SS` edges.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub u1: f64,
    pub u2: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { u1: 0.0, u2: 0.0 };

    pub const fn new(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u1.is_finite() && self.u1 >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "u1",
                reason: format!("SI cutting rate must be finite and non-negative, got {}", self.u1),
            });
        }
        if !self.u2.is_finite() {
            return Err(Error::InvalidParameter {
                name: "u2",
                reason: "SS rewiring rate must be finite".into(),
            });
        }
        Ok(())
    }
}

/// Time derivative of a [`ModelState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Derivative {
    pub di: f64,
    pub dsi: f64,
    pub dii: f64,
    pub dss: f64,
}

impl Derivative {
    pub fn to_array(self) -> [f64; 4] {
        [self.di, self.dsi, self.dii, self.dss]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Max-norm of the derivative vector.
    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Which controlled system to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    /// Non-negative constant rewiring; `u2` only creates `SS` edges.
    #[default]
    Constant,
    /// Signed `u2`: positive creates `SS` edges, negative deletes them.
    Nmpc,
}

/// Coefficient of the recovery inflow `γ[SI]` in the `SS` equation of the
/// signed-control system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SsRecovery {
    /// `2γ[SI]`, which conserves edges when both controls vanish.
    #[default]
    Conserving,
    /// `γ[SI]`, as printed in the original signed-control equation.
    Literal,
}

/// How the closures treat a vanishing mean degree or susceptible count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Guard {
    /// Return zero triples. Used inside optimizer rollouts.
    #[default]
    Lenient,
    /// Fail with [`Error::DegenerateState`].
    Strict,
}

/// Mean-field pair initialization `[AB](0) = n0 [A](0)[B](0) / N`.
pub fn initial_state(params: &SystemParams) -> ModelState {
    let n_pop = params.n();
    let n0 = params.initial_degree;
    let i0 = params.initial_infected;
    let s0 = n_pop - i0;
    ModelState {
        i: i0,
        si: n0 * i0 * s0 / n_pop,
        ii: n0 * i0 * i0 / n_pop,
        ss: n0 * s0 * s0 / n_pop,
    }
}

pub fn mean_degree(state: &ModelState, params: &SystemParams) -> f64 {
    (2.0 * state.si + state.ss + state.ii) / params.n()
}

/// Closed triple counts `([SSI], [ISI])`.
pub fn closure_triples(state: &ModelState, params: &SystemParams, guard: Guard) -> Result<(f64, f64)> {
    let susceptible = params.n() - state.i;
    let n = mean_degree(state, params);
    if susceptible <= CLOSURE_GUARD || n <= CLOSURE_GUARD {
        return match guard {
            Guard::Lenient => Ok((0.0, 0.0)),
            Guard::Strict => Err(Error::DegenerateState(format!(
                "closure undefined: N - [I] = {susceptible:e}, n = {n:e}"
            ))),
        };
    }
    let factor = (n - 1.0) / n * state.si / susceptible;
    Ok((factor * state.ss, factor * state.si))
}

/// Terms shared by both systems; returns the derivative without any `SS` control term
/// and with the `SS` recovery inflow scaled by `ss_recovery_factor`.
fn uncontrolled_part(
    state: &ModelState,
    params: &SystemParams,
    u1: f64,
    ss_recovery_factor: f64,
    guard: Guard,
) -> Result<Derivative> {
    let (ssi, isi) = closure_triples(state, params, guard)?;
    let (tau, gamma) = (params.tau, params.gamma);
    Ok(Derivative {
        di: tau * state.si - gamma * state.i,
        dsi: gamma * (state.ii - state.si) + tau * (ssi - isi - state.si) - u1 * state.si,
        dii: -2.0 * gamma * state.ii + 2.0 * tau * (isi + state.si),
        dss: ss_recovery_factor * gamma * state.si - 2.0 * tau * ssi,
    })
}

/// Number of `SS` pairs that could still be added, `(N-[I])(N-[I]-1) - [SS]`.
#[inline]
fn ss_headroom(state: &ModelState, params: &SystemParams) -> f64 {
    let s = params.n() - state.i;
    s * (s - 1.0) - state.ss
}

/// Right-hand side of the constant-control system.
pub fn rhs_constant(state: &ModelState, params: &SystemParams, u: ControlInput, guard: Guard) -> Result<Derivative> {
    let mut d = uncontrolled_part(state, params, u.u1, 2.0, guard)?;
    d.dss += u.u2 * ss_headroom(state, params);
    Ok(d)
}

/// Right-hand side of the signed-control system used by the receding-horizon controller.
pub fn rhs_nmpc(
    state: &ModelState,
    params: &SystemParams,
    u: ControlInput,
    ss_recovery: SsRecovery,
    guard: Guard,
) -> Result<Derivative> {
    let factor = match ss_recovery {
        SsRecovery::Conserving => 2.0,
        SsRecovery::Literal => 1.0,
    };
    let mut d = uncontrolled_part(state, params, u.u1, factor, guard)?;
    if u.u2 > 0.0 {
        d.dss += u.u2 * ss_headroom(state, params);
    } else if u.u2 < 0.0 {
        d.dss += u.u2 * state.ss;
    }
    Ok(d)
}

/// A fully specified vector field: parameters, system variant and closure options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    pub params: SystemParams,
    pub system: System,
    pub ss_recovery: SsRecovery,
    pub guard: Guard,
}

impl Dynamics {
    pub fn new(params: SystemParams, system: System) -> Self {
        Self {
            params,
            system,
            ss_recovery: SsRecovery::default(),
            guard: Guard::default(),
        }
    }

    pub fn with_ss_recovery(mut self, ss_recovery: SsRecovery) -> Self {
        self.ss_recovery = ss_recovery;
        self
    }

    pub fn with_guard(mut self, guard: Guard) -> Self {
        self.guard = guard;
        self
    }

    pub fn rhs(&self, state: &ModelState, u: ControlInput) -> Result<Derivative> {
        match self.system {
            System::Constant => rhs_constant(state, &self.params, u, self.guard),
            System::Nmpc => rhs_nmpc(state, &self.params, u, self.ss_recovery, self.guard),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn base() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn initial_state_matches_mean_field_counts() {
        let x = initial_state(&base());
        assert_relative_eq!(x.i, 10.0);
        assert_relative_eq!(x.si, 99.0, epsilon = 1e-12);
        assert_relative_eq!(x.ii, 1.0, epsilon = 1e-12);
        assert_relative_eq!(x.ss, 9801.0, epsilon = 1e-9);
        assert_relative_eq!(x.mean_degree(&base()), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn initial_state_extremes() {
        let p = SystemParams {
            initial_infected: 0.0,
            ..base()
        };
        assert_eq!(initial_state(&p), ModelState::new(0.0, 0.0, 0.0, 10_000.0));
        let p = SystemParams {
            initial_infected: 1000.0,
            ..base()
        };
        assert_eq!(initial_state(&p), ModelState::new(1000.0, 0.0, 10_000.0, 0.0));
    }

    #[test]
    fn mean_degree_examples() {
        let p = base();
        assert_relative_eq!(mean_degree(&ModelState::new(10.0, 99.0, 1.0, 9801.0), &p), 10.0, epsilon = 1e-12);
        assert_eq!(mean_degree(&ModelState::default(), &p), 0.0);
        assert_eq!(mean_degree(&ModelState::new(0.0, 0.0, 0.0, 999_000.0), &p), 999.0);
    }

    #[test]
    fn closure_examples() {
        let p = base();
        let (ssi, isi) = closure_triples(&ModelState::new(10.0, 99.0, 1.0, 9801.0), &p, Guard::Strict).unwrap();
        assert_relative_eq!(ssi, 882.09, epsilon = 1e-9);
        assert_relative_eq!(isi, 8.91, epsilon = 1e-12);
        let (ssi, isi) = closure_triples(&ModelState::new(0.0, 0.0, 0.0, 999_000.0), &p, Guard::Strict).unwrap();
        assert_eq!((ssi, isi), (0.0, 0.0));
        let (ssi, isi) = closure_triples(&ModelState::new(5.0, 0.0, 3.0, 400.0), &p, Guard::Strict).unwrap();
        assert_eq!((ssi, isi), (0.0, 0.0));
    }

    #[test]
    fn closure_guard_modes() {
        let p = base();
        let empty = ModelState::new(3.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            closure_triples(&empty, &p, Guard::Strict),
            Err(Error::DegenerateState(_))
        ));
        assert_eq!(closure_triples(&empty, &p, Guard::Lenient).unwrap(), (0.0, 0.0));
        let all_infected = ModelState::new(1000.0, 0.0, 10.0, 0.0);
        assert!(closure_triples(&all_infected, &p, Guard::Strict).is_err());
        assert_eq!(rhs_constant(&all_infected, &p, ControlInput::ZERO, Guard::Lenient).unwrap().dii, -20.0);
    }

    #[test]
    fn rhs_constant_reference_values() {
        let d = rhs_constant(&ModelState::new(10.0, 99.0, 1.0, 9801.0), &base(), ControlInput::ZERO, Guard::Strict).unwrap();
        assert_relative_eq!(d.di, -0.1, epsilon = 1e-12);
        assert_relative_eq!(d.dsi, -20.582, epsilon = 1e-10);
        assert_relative_eq!(d.dii, 19.582, epsilon = 1e-10);
        assert_relative_eq!(d.dss, 21.582, epsilon = 1e-10);
    }

    #[test]
    fn disease_free_full_graph_is_fixed_for_any_control() {
        let p = base();
        let x = ModelState::new(0.0, 0.0, 0.0, 999_000.0);
        for u in [ControlInput::ZERO, ControlInput::new(5.0, 0.3), ControlInput::new(100.0, 2.0)] {
            assert_eq!(rhs_constant(&x, &p, u, Guard::Strict).unwrap().to_array(), [0.0; 4]);
            assert_eq!(
                rhs_nmpc(&x, &p, u, SsRecovery::Conserving, Guard::Strict).unwrap().to_array(),
                [0.0; 4]
            );
        }
    }

    #[test]
    fn rhs_nmpc_negative_u2_deletes_ss() {
        let p = base();
        let x = ModelState::new(10.0, 99.0, 1.0, 9801.0);
        let c = rhs_constant(&x, &p, ControlInput::ZERO, Guard::Strict).unwrap();
        let d = rhs_nmpc(&x, &p, ControlInput::new(0.0, -0.001), SsRecovery::Conserving, Guard::Strict).unwrap();
        assert_relative_eq!(d.dss, 11.781, epsilon = 1e-10);
        assert_eq!((d.di, d.dsi, d.dii), (c.di, c.dsi, c.dii));
    }

    #[test]
    fn rhs_nmpc_empty_network_is_fixed() {
        let d = rhs_nmpc(
            &ModelState::default(),
            &base(),
            ControlInput::new(1.0, -1.0),
            SsRecovery::Conserving,
            Guard::Lenient,
        )
        .unwrap();
        assert_eq!(d.to_array(), [0.0; 4]);
    }

    #[test]
    fn literal_ss_recovery_halves_inflow() {
        let p = base();
        let x = ModelState::new(10.0, 99.0, 1.0, 9801.0);
        let cons = rhs_nmpc(&x, &p, ControlInput::ZERO, SsRecovery::Conserving, Guard::Strict).unwrap();
        let lit = rhs_nmpc(&x, &p, ControlInput::ZERO, SsRecovery::Literal, Guard::Strict).unwrap();
        assert_relative_eq!(cons.dss - lit.dss, 99.0, epsilon = 1e-10);
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(2, 0.1, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1000, 0.1, 0.0, 10.0, 10.0).is_err());
        assert!(SystemParams::new(1000, -0.1, 1.0, 10.0, 10.0).is_err());
        assert!(SystemParams::new(1000, 0.1, 1.0, 1001.0, 10.0).is_err());
        assert!(SystemParams::new(1000, 0.1, 1.0, 10.0, 999.5).is_err());
        assert!(SystemParams::new(1000, 0.1, 1.0, 10.0, 999.0).is_ok());
        assert!(ControlInput::new(-1.0, 0.0).validate().is_err());
    }

    fn arb_state() -> impl Strategy<Value = ModelState> {
        (0.0..990.0f64, 0.0..5e3f64, 0.0..5e3f64, 1.0..5e5f64).prop_map(|(i, si, ii, ss)| ModelState::new(i, si, ii, ss))
    }

    proptest! {
        #[test]
        fn edges_conserved_without_control(x in arb_state(), tau in 0.0..3.0f64, gamma in 0.1..3.0f64) {
            let p = SystemParams { tau, gamma, ..base() };
            for d in [
                rhs_constant(&x, &p, ControlInput::ZERO, Guard::Strict).unwrap(),
                rhs_nmpc(&x, &p, ControlInput::ZERO, SsRecovery::Conserving, Guard::Strict).unwrap(),
            ] {
                let flux = 2.0 * d.dsi + d.dii + d.dss;
                let magnitude = 2.0 * d.dsi.abs() + d.dii.abs() + d.dss.abs() + 1.0;
                prop_assert!(flux.abs() <= 1e-9 * magnitude, "flux {flux} vs {magnitude}");
            }
        }

        #[test]
        fn disease_free_states_are_absorbing(ss in 0.0..999_000.0f64, u1 in 0.0..50.0f64, u2 in -1.0..1.0f64) {
            let p = base();
            let x = ModelState::new(0.0, 0.0, 0.0, ss);
            let d = rhs_nmpc(&x, &p, ControlInput::new(u1, u2), SsRecovery::Conserving, Guard::Lenient).unwrap();
            prop_assert_eq!((d.di, d.dsi, d.dii), (0.0, 0.0, 0.0));
            let d = rhs_constant(&x, &p, ControlInput::new(u1, u2.abs()), Guard::Lenient).unwrap();
            prop_assert_eq!((d.di, d.dsi, d.dii), (0.0, 0.0, 0.0));
        }

        #[test]
        fn zero_coordinates_are_not_driven_negative(
            x in arb_state(),
            mask in 0u8..16,
            u1 in 0.0..50.0f64,
            u2 in -1.0..1.0f64,
        ) {
            let p = base();
            let mut a = x.to_array();
            for (k, v) in a.iter_mut().enumerate() {
                if mask & (1 << k) != 0 { *v = 0.0; }
            }
            let x = ModelState::from_array(a);
            // Below n = 1 the closure factor (n-1)/n is negative and the bound does not hold.
            prop_assume!(x.mean_degree(&p) >= 1.0);
            let u = ControlInput::new(u1, u2);
            let d = rhs_nmpc(&x, &p, u, SsRecovery::Conserving, Guard::Lenient).unwrap().to_array();
            for k in 0..4 {
                if a[k] == 0.0 { prop_assert!(d[k] >= -1e-12, "coordinate {k}: {}", d[k]); }
            }
        }

        #[test]
        fn rhs_nmpc_is_continuous_at_zero_u2(x in arb_state(), u1 in 0.0..20.0f64) {
            let p = base();
            let at = |u2| rhs_nmpc(&x, &p, ControlInput::new(u1, u2), SsRecovery::Conserving, Guard::Strict).unwrap();
            let (l, z, r) = (at(-1e-12), at(0.0), at(1e-12));
            let tol = 1e-12 * x.scale() * x.scale() + 1e-9;
            prop_assert!((l.dss - z.dss).abs() <= tol && (r.dss - z.dss).abs() <= tol);
            let c = rhs_constant(&x, &p, ControlInput::new(u1, 0.3), Guard::Strict).unwrap();
            let n = rhs_nmpc(&x, &p, ControlInput::new(u1, 0.3), SsRecovery::Conserving, Guard::Strict).unwrap();
            prop_assert_eq!(c, n);
        }

        #[test]
        fn initial_state_reproduces_initial_degree(
            pop in 3u32..5000,
            frac_i in 0.0..=1.0f64,
            frac_n in 0.001..=1.0f64,
        ) {
            let n_pop = f64::from(pop);
            let p = SystemParams {
                population: pop,
                initial_infected: frac_i * n_pop,
                initial_degree: frac_n * (n_pop - 1.0),
                ..base()
            };
            let x = initial_state(&p);
            prop_assert!((x.mean_degree(&p) - p.initial_degree).abs() <= 1e-12 * p.initial_degree.max(1.0));
        }
    }
}
