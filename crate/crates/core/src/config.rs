//! Flat `key = value` run configuration.
//!
//! ```text
//! # strong rewiring, fast spread
//! system.tau = 2
//! control.M1 = 18
//! damping.lambda1 = 1e4
//! ```
//!
//! Keys carry a section prefix (`system.`, `control.`, `targets.`, `damping.`,
//! `grid.`). Unknown keys, repeated keys and malformed values are rejected when
//! the text is parsed; only keys that appear override the defaults.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{ControlInput, SsRecovery, SystemParams};
use crate::nmpc::NmpcConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
    Word,
}

const KEYS: &[(&str, Kind)] = &[
    ("system.N", Kind::Count),
    ("system.tau", Kind::Real),
    ("system.gamma", Kind::Real),
    ("system.I0", Kind::Real),
    ("system.n0", Kind::Real),
    ("control.M1", Kind::Real),
    ("control.M2", Kind::Real),
    ("control.dt", Kind::Real),
    ("control.T", Kind::Real),
    ("control.P", Kind::Count),
    ("control.u1", Kind::Real),
    ("control.u2", Kind::Real),
    ("control.schedule", Kind::Word),
    ("control.seed", Kind::Count),
    ("control.restarts", Kind::Count),
    ("control.max_iterations", Kind::Count),
    ("control.rel_tol", Kind::Real),
    ("control.cost_indexing", Kind::Word),
    ("control.ss_recovery", Kind::Word),
    ("targets.I", Kind::Real),
    ("targets.n", Kind::Real),
    ("targets.epsilon", Kind::Real),
    ("damping.lambda1", Kind::Real),
    ("damping.lambda2", Kind::Real),
    ("damping.lambda3", Kind::Real),
    ("damping.lambda4", Kind::Real),
    ("grid.u1_min", Kind::Real),
    ("grid.u1_max", Kind::Real),
    ("grid.u1_points", Kind::Count),
    ("grid.u2_min", Kind::Real),
    ("grid.u2_max", Kind::Real),
    ("grid.u2_points", Kind::Count),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Count(u64),
    Word(String),
}

impl Value {
    fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Count(n) => Some(*n as f64),
            Value::Word(_) => None,
        }
    }
}

/// Validated overrides, ordered by key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Overrides {
    entries: BTreeMap<&'static str, Value>,
}

impl Overrides {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                reason: format!("line {}: expected `key = value`", lineno + 1),
            })?;
            let key = key.trim();
            if out.get(key).is_some() {
                return Err(Error::Config {
                    key: key.to_string(),
                    reason: format!("line {}: set more than once", lineno + 1),
                });
            }
            out.set(key, value.trim())?;
        }
        Ok(out)
    }

    /// Sets one key, replacing any earlier value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (name, kind) = KEYS.iter().find(|(k, _)| *k == key).copied().ok_or_else(|| Error::Config {
            key: key.to_string(),
            reason: "unknown key".into(),
        })?;
        let bad = |what: &str| Error::Config {
            key: name.to_string(),
            reason: format!("expected {what}, got `{value}`"),
        };
        let parsed = match kind {
            Kind::Real => Value::Real(
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad("a finite number"))?,
            ),
            Kind::Count => Value::Count(value.parse().map_err(|_| bad("a non-negative integer"))?),
            Kind::Word if value.is_empty() => return Err(bad("a value")),
            Kind::Word => Value::Word(value.to_string()),
        };
        self.entries.insert(name, parsed);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(Value::as_f64)
    }

    pub fn word(&self, key: &str) -> Option<&str> {
        match self.get(key) {
            Some(Value::Word(w)) => Some(w),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Value)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    /// Applies the `system.` keys and validates the result.
    pub fn apply_system(&self, params: &mut SystemParams) -> Result<()> {
        if let Some(Value::Count(n)) = self.get("system.N") {
            params.population = u32::try_from(*n).map_err(|_| Error::Config {
                key: "system.N".into(),
                reason: format!("{n} is too large"),
            })?;
        }
        let fields: [(&str, &mut f64); 4] = [
            ("system.tau", &mut params.tau),
            ("system.gamma", &mut params.gamma),
            ("system.I0", &mut params.initial_infected),
            ("system.n0", &mut params.initial_degree),
        ];
        for (key, slot) in fields {
            if let Some(x) = self.number(key) {
                *slot = x;
            }
        }
        params.validate()
    }

    /// Applies the `control.`, `targets.` and `damping.` keys and validates the result.
    pub fn apply_control(&self, cfg: &mut NmpcConfig) -> Result<()> {
        let [l1, l2, l3, l4] = &mut cfg.lambdas;
        let fields: [(&str, &mut f64); 11] = [
            ("control.M1", &mut cfg.m1),
            ("control.M2", &mut cfg.m2),
            ("control.dt", &mut cfg.dt),
            ("control.T", &mut cfg.horizon),
            ("control.rel_tol", &mut cfg.rel_tol),
            ("targets.I", &mut cfg.i_target),
            ("targets.n", &mut cfg.n_target),
            ("targets.epsilon", &mut cfg.epsilon),
            ("damping.lambda1", l1),
            ("damping.lambda2", l2),
            ("damping.lambda3", l3),
        ];
        for (key, slot) in fields {
            if let Some(x) = self.number(key) {
                *slot = x;
            }
        }
        if let Some(x) = self.number("damping.lambda4") {
            *l4 = x;
        }
        let counts: [(&str, &mut usize); 3] = [
            ("control.P", &mut cfg.prediction_steps),
            ("control.restarts", &mut cfg.restarts),
            ("control.max_iterations", &mut cfg.max_iterations),
        ];
        for (key, slot) in counts {
            if let Some(Value::Count(n)) = self.get(key) {
                *slot = *n as usize;
            }
        }
        if let Some(Value::Count(seed)) = self.get("control.seed") {
            cfg.seed = *seed;
        }
        if let Some(w) = self.word("control.cost_indexing") {
            cfg.cost_indexing = w.parse()?;
        }
        if let Some(w) = self.word("control.ss_recovery") {
            cfg.ss_recovery = match w {
                "conserving" => SsRecovery::Conserving,
                "literal" => SsRecovery::Literal,
                other => {
                    return Err(Error::Config {
                        key: "control.ss_recovery".into(),
                        reason: format!("expected `conserving` or `literal`, got `{other}`"),
                    })
                }
            };
        }
        cfg.validate()
    }

    /// The constant control `(control.u1, control.u2)`, zero where unset.
    pub fn constant_control(&self) -> Result<ControlInput> {
        let u = ControlInput::new(
            self.number("control.u1").unwrap_or(0.0),
            self.number("control.u2").unwrap_or(0.0),
        );
        u.validate()?;
        Ok(u)
    }
}
