//! Steady states of the constant-control system and their stability.
//!
//! The disease-free state is handled analytically. The endemic state is found
//! by reducing the four steady-state equations to a scalar residual in `[I]`:
//! `[SI]` follows from `d[I]/dt = 0`, `[SS]` from the total edge balance, and
//! `[II]` from the quadratic obtained from `d[II]/dt = 0`. Stability is read off
//! the characteristic quartic of a finite-difference Jacobian, and the Hopf set
//! is traced with the coefficient criterion `b0 b3² = b1 (b2 b3 - b1)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{char_coeffs, eigenvalues, spectral_radius, CharCoeffs, Mat4};
use crate::model::{rhs_constant, ControlInput, Guard, ModelState, SystemParams};

/// Number of points in the `[I]` scan for endemic roots.
pub const ENDEMIC_GRID_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub state: ModelState,
    #[serde(skip)]
    pub eigenvalues: [Complex64; 4],
    pub char_coeffs: CharCoeffs,
    pub classification: Stability,
}

impl StabilityReport {
    pub fn from_jacobian(state: ModelState, j: &Mat4) -> Self {
        let coeffs = char_coeffs(j);
        let ev = eigenvalues(j);
        Self {
            state,
            eigenvalues: ev,
            char_coeffs: coeffs,
            classification: classify_spectrum(&ev),
        }
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `Stable` iff every real part is below `-tol`, `Marginal` if any lies within
/// `tol = 1e-8 * spectral radius` of zero.
pub fn classify_spectrum(ev: &[Complex64; 4]) -> Stability {
    let tol = 1e-8 * spectral_radius(ev);
    if ev.iter().any(|z| z.re.abs() <= tol) {
        Stability::Marginal
    } else if ev.iter().all(|z| z.re < -tol) {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

/// Qualitative regime of the constant-control system at `(u1, u2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionClass {
    EndemicStable,
    Oscillatory,
    DiseaseFreeStable,
}

impl RegionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionClass::EndemicStable => "endemic_stable",
            RegionClass::Oscillatory => "oscillatory",
            RegionClass::DiseaseFreeStable => "disease_free_stable",
        }
    }
}

impl std::fmt::Display for RegionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RegionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "endemic_stable" => Ok(RegionClass::EndemicStable),
            "oscillatory" => Ok(RegionClass::Oscillatory),
            "disease_free_stable" => Ok(RegionClass::DiseaseFreeStable),
            other => Err(Error::InvalidParameter {
                name: "class",
                reason: format!("unknown region class `{other}`"),
            }),
        }
    }
}

/// Infection-free state on the complete graph.
pub fn disease_free_state(params: &SystemParams) -> ModelState {
    let n = params.n();
    ModelState::new(0.0, 0.0, 0.0, n * (n - 1.0))
}

/// Analytic Jacobian of the constant-control system at the disease-free state.
///
/// The `(SS, I)` entry is `-u2 (2N - 1)`, the derivative of `u2 (N-I)(N-I-1)` at `I = 0`.
pub fn disease_free_jacobian(params: &SystemParams, u: ControlInput) -> Mat4 {
    let (tau, gamma, n) = (params.tau, params.gamma, params.n());
    [
        [-gamma, tau, 0.0, 0.0],
        [0.0, -gamma + tau * (n - 2.0) - (tau + u.u1), gamma, 0.0],
        [0.0, 2.0 * tau, -2.0 * gamma, 0.0],
        [-u.u2 * (2.0 * n - 1.0), 2.0 * gamma - 2.0 * tau * (n - 2.0), 0.0, -u.u2],
    ]
}

/// `u1` above which the disease-free state is stable, `τ(N-2) - γ`, clamped at zero.
pub fn transcritical_u1(params: &SystemParams) -> f64 {
    transcritical_raw(params).max(0.0)
}

fn transcritical_raw(params: &SystemParams) -> f64 {
    params.tau * (params.n() - 2.0) - params.gamma
}

/// Candidate steady state parametrised by `[I]`, or `None` where some pair count
/// would be negative or the `[II]` quadratic has no real root.
pub fn reduced_state(i: f64, params: &SystemParams, u: ControlInput) -> Option<ModelState> {
    let (tau, gamma, n) = (params.tau, params.gamma, params.n());
    let s = n - i;
    let si = gamma / tau * i;
    let ss = s * (s - 1.0) - 2.0 * u.u1 * gamma / (u.u2 * tau) * i;
    if !(si > 0.0 && ss > 0.0 && s > 0.0) {
        return None;
    }
    // γ II² + β II + κ = 0 from d[II]/dt = 0 after clearing the (n-1)/n denominator;
    // take the larger root.
    let c = 2.0 * si + ss;
    let a = gamma;
    let beta = gamma * c - tau * si - tau * si * si / s;
    let kappa = -tau * si * c - tau * si * si * (c - n) / s;
    let disc = beta * beta - 4.0 * a * kappa;
    if !(disc >= 0.0) {
        return None;
    }
    let root = disc.sqrt();
    let ii = if beta <= 0.0 {
        (-beta + root) / (2.0 * a)
    } else {
        2.0 * kappa / (-beta - root)
    };
    (ii > 0.0 && ii.is_finite()).then(|| ModelState::new(i, si, ii, ss))
}

/// The remaining steady-state equation, `d[SI]/dt`, along the reduced curve.
pub fn reduced_residual(i: f64, params: &SystemParams, u: ControlInput) -> Option<f64> {
    let x = reduced_state(i, params, u)?;
    rhs_constant(&x, params, u, Guard::Strict).ok().map(|d| d.dsi)
}

fn endemic_grid(n: f64) -> Vec<f64> {
    let half = ENDEMIC_GRID_POINTS / 2;
    let (lo, mid, hi) = (1e-9 * n, 0.1 * n, n * (1.0 - 1e-9));
    let ratio = (mid / lo).powf(1.0 / half as f64);
    let mut grid: Vec<f64> = (0..half).map(|k| lo * ratio.powi(k as i32)).collect();
    grid.extend((0..half).map(|k| mid + (hi - mid) * k as f64 / (half - 1) as f64));
    grid
}

fn bisect_root<F: Fn(f64) -> Option<f64>>(f: F, mut a: f64, mut b: f64, mut fa: f64, rel_tol: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a) <= rel_tol * m.abs() {
            break;
        }
        match f(m) {
            Some(0.0) => return m,
            Some(fm) if fm.signum() == fa.signum() => {
                a = m;
                fa = fm;
            }
            Some(_) => b = m,
            None => break,
        }
    }
    0.5 * (a + b)
}

/// The unique all-positive endemic steady state, if one exists.
///
/// Requires `τ > 0` and `u2 > 0`. Fails with [`Error::MultipleRoots`] if the scan
/// finds more than one admissible root.
pub fn endemic_state(params: &SystemParams, u: ControlInput) -> Result<Option<ModelState>> {
    if !(params.tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "system.tau",
            reason: "endemic reduction needs a positive infection rate".into(),
        });
    }
    if !(u.u2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "u2",
            reason: "endemic reduction needs a positive SS creation rate".into(),
        });
    }
    let f = |i: f64| reduced_residual(i, params, u);
    let grid = endemic_grid(params.n());
    let values: Vec<Option<f64>> = grid.iter().map(|&i| f(i)).collect();
    let mut roots = Vec::new();
    for k in 0..grid.len() - 1 {
        let (Some(fa), Some(fb)) = (values[k], values[k + 1]) else {
            continue;
        };
        if fa == 0.0 {
            roots.push(grid[k]);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            roots.push(bisect_root(f, grid[k], grid[k + 1], fa, 1e-10));
        }
    }
    let admissible: Vec<ModelState> = roots
        .into_iter()
        .filter_map(|i| reduced_state(i, params, u))
        .filter(|x| is_steady(x, params, u))
        .collect();
    match admissible.len() {
        0 => Ok(None),
        1 => Ok(Some(admissible[0])),
        count => Err(Error::MultipleRoots { count }),
    }
}

/// `‖rhs‖∞ <= 1e-6 * state scale` with strictly positive coordinates.
pub fn is_steady(x: &ModelState, params: &SystemParams, u: ControlInput) -> bool {
    x.to_array().iter().all(|&v| v > 0.0)
        && rhs_constant(x, params, u, Guard::Strict).is_ok_and(|d| d.max_abs() <= 1e-6 * x.scale())
}

/// Central-difference Jacobian of an arbitrary 4-dimensional field.
pub fn finite_difference_jacobian<F>(x: &[f64; 4], f: F) -> Result<Mat4>
where
    F: Fn(&[f64; 4]) -> Result<[f64; 4]>,
{
    let mut j = [[0.0; 4]; 4];
    for col in 0..4 {
        let h = (1e-6 * x[col].abs()).max(1e-6);
        let mut plus = *x;
        let mut minus = *x;
        plus[col] += h;
        minus[col] -= h;
        let (fp, fm) = (f(&plus)?, f(&minus)?);
        for row in 0..4 {
            j[row][col] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// Finite-difference Jacobian of the constant-control system.
pub fn numeric_jacobian(x: &ModelState, params: &SystemParams, u: ControlInput) -> Result<Mat4> {
    finite_difference_jacobian(&x.to_array(), |a| {
        rhs_constant(&ModelState::from_array(*a), params, u, Guard::Strict).map(|d| d.to_array())
    })
}

/// Stability of the endemic state at `(u1, u2)`, if it exists.
pub fn endemic_report(params: &SystemParams, u: ControlInput) -> Result<Option<StabilityReport>> {
    let Some(x) = endemic_state(params, u)? else {
        return Ok(None);
    };
    let j = numeric_jacobian(&x, params, u)?;
    Ok(Some(StabilityReport::from_jacobian(x, &j)))
}

/// Value of the Hopf test function and whether `sign b1 = sign b3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfResidual {
    pub value: f64,
    pub signs_agree: bool,
}

/// `g = b0 b3² - b1 (b2 b3 - b1)`; vanishes with `sign b1 = sign b3` exactly when
/// a pair of eigenvalues is purely imaginary.
pub fn hopf_test(c: &CharCoeffs) -> HopfResidual {
    HopfResidual {
        value: c.b0 * c.b3 * c.b3 - c.b1 * (c.b2 * c.b3 - c.b1),
        signs_agree: c.b1.signum() == c.b3.signum(),
    }
}

/// Hopf test function at the endemic state; `None` when there is no endemic state.
pub fn hopf_residual(params: &SystemParams, u: ControlInput) -> Result<Option<HopfResidual>> {
    Ok(endemic_report(params, u)?.map(|r| hopf_test(&r.char_coeffs)))
}

fn u2_scan(lo: f64, hi: f64) -> Vec<f64> {
    const POINTS: usize = 48;
    if lo > 0.0 {
        let ratio = (hi / lo).powf(1.0 / (POINTS - 1) as f64);
        (0..POINTS).map(|k| lo * ratio.powi(k as i32)).collect()
    } else {
        (0..POINTS).map(|k| lo + (hi - lo) * k as f64 / (POINTS - 1) as f64).collect()
    }
}

fn hopf_point(params: &SystemParams, u1: f64, lo: f64, hi: f64) -> Option<f64> {
    let g = |u2: f64| -> Option<f64> {
        if u2 <= 0.0 {
            return None;
        }
        match hopf_residual(params, ControlInput::new(u1, u2)) {
            Ok(Some(h)) if h.signs_agree => Some(h.value),
            _ => None,
        }
    };
    let scan = u2_scan(lo, hi);
    let values: Vec<Option<f64>> = scan.iter().map(|&u2| g(u2)).collect();
    (0..scan.len() - 1).find_map(|k| match (values[k], values[k + 1]) {
        (Some(0.0), Some(_)) => Some(scan[k]),
        (Some(a), Some(b)) if a.signum() != b.signum() => Some(bisect_root(g, scan[k], scan[k + 1], a, 1e-8)),
        _ => None,
    })
}

/// Points `(u1, u2*)` of the Hopf set, one per `u1` where a bracketing sign change exists in `u2_range`.
pub fn hopf_curve(params: &SystemParams, u1_grid: &[f64], u2_range: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = u2_range;
    if !(lo < hi && lo >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "u2_range",
            reason: format!("need 0 <= lo < hi, got ({lo}, {hi})"),
        });
    }
    let points: Vec<Option<(f64, f64)>> = u1_grid
        .par_iter()
        .map(|&u1| hopf_point(params, u1, lo, hi).map(|u2| (u1, u2)))
        .collect();
    Ok(points.into_iter().flatten().collect())
}

/// Regime at `(u1, u2)`; requires `u2 > 0`.
pub fn classify_region(params: &SystemParams, u: ControlInput) -> Result<RegionClass> {
    if !(u.u2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "u2",
            reason: "region classification needs u2 > 0".into(),
        });
    }
    if u.u1 > transcritical_raw(params) {
        return Ok(RegionClass::DiseaseFreeStable);
    }
    Ok(match endemic_report(params, u)? {
        Some(r) if r.classification == Stability::Unstable => RegionClass::Oscillatory,
        Some(_) => RegionClass::EndemicStable,
        None => RegionClass::Oscillatory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub u1: f64,
    pub u2: f64,
    pub class: RegionClass,
}

/// Classifies every `(u1, u2)` pair of the grid product, row-major in `u1`.
pub fn region_map(params: &SystemParams, u1_grid: &[f64], u2_grid: &[f64]) -> Result<Vec<RegionCell>> {
    let pairs: Vec<(f64, f64)> = u1_grid
        .iter()
        .flat_map(|&u1| u2_grid.iter().map(move |&u2| (u1, u2)))
        .collect();
    pairs
        .par_iter()
        .map(|&(u1, u2)| {
            classify_region(params, ControlInput::new(u1, u2)).map(|class| RegionCell { u1, u2, class })
        })
        .collect()
}
