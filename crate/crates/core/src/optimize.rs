//! Box-constrained minimization by projected gradient descent.
//!
//! Variables are mapped onto the unit box before descent so that bounds of very
//! different widths (an SI cutting rate of order ten next to an SS rate of order
//! one thousandth) are treated evenly. Gradients come from finite differences,
//! one-sided at active bounds. The trial step is the Barzilai–Borwein ratio of
//! the last two iterates (doubling the previous step when that ratio is not
//! positive), followed by Armijo backtracking on the projection arc against the
//! worst of the last few objective values. The best iterate seen is returned.

/// Stopping rules for [`minimize_box`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub max_iterations: usize,
    /// Stop once an iteration improves the objective by less than this fraction.
    pub rel_tol: f64,
    /// Finite-difference step in unit-box coordinates.
    pub fd_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tol: 1e-8,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out first.
    pub converged: bool,
}

/// Length of the window of past objective values the line search compares against.
const MEMORY: usize = 10;

struct UnitBox<'a> {
    lower: &'a [f64],
    upper: &'a [f64],
}

impl UnitBox<'_> {
    fn box_to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let w = self.upper[i] - self.lower[i];
                if w > 0.0 {
                    ((v - self.lower[i]) / w).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn unit_to_box(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, &v)| {
                let w = self.upper[i] - self.lower[i];
                if v >= 1.0 {
                    self.upper[i]
                } else {
                    (self.lower[i] + w * v).clamp(self.lower[i], self.upper[i])
                }
            })
            .collect()
    }

    fn free(&self, i: usize) -> bool {
        self.upper[i] > self.lower[i]
    }
}

/// Minimizes `f` over `lower <= x <= upper` starting from the projection of `x0`.
///
/// Non-finite objective values are treated as `+inf`, so the search backs away
/// from regions where `f` cannot be evaluated.
pub fn minimize_box<F>(f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &DescentOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(x0.len(), lower.len());
    assert_eq!(x0.len(), upper.len());
    let bx = UnitBox { lower, upper };
    let eval = |z: &[f64]| {
        let v = f(&bx.unit_to_box(z));
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let dim = x0.len();
    let mut z = bx.box_to_unit(x0);
    let mut value = eval(&z);
    let mut step = f64::NAN;
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut recent = std::collections::VecDeque::with_capacity(MEMORY);
    let (mut best_z, mut best_value) = (z.clone(), value);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        if !value.is_finite() {
            break;
        }
        let grad = gradient(&eval, &z, value, opts.fd_step, &bx);
        if let Some((prev_z, prev_grad)) = &previous {
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..dim {
                let s = z[i] - prev_z[i];
                ss += s * s;
                sy += s * (grad[i] - prev_grad[i]);
            }
            step = if sy > 0.0 && ss > 0.0 { (ss / sy).min(1e6) } else { 2.0 * step };
        }
        let pg_norm = (0..dim)
            .map(|i| ((z[i] - grad[i]).clamp(0.0, 1.0) - z[i]).abs())
            .fold(0.0, f64::max);
        if pg_norm <= 1e-14 {
            converged = true;
            break;
        }
        if !step.is_finite() {
            let gmax = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
            step = 0.25 / gmax;
        }

        if recent.len() == MEMORY {
            recent.pop_front();
        }
        recent.push_back(value);
        let reference = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..dim)
                .map(|i| if bx.free(i) { (z[i] - step * grad[i]).clamp(0.0, 1.0) } else { z[i] })
                .collect();
            let decrease: f64 = (0..dim).map(|i| grad[i] * (trial[i] - z[i])).sum();
            let trial_value = eval(&trial);
            if trial_value <= reference + 1e-4 * decrease && decrease < 0.0 {
                accepted = Some((trial, trial_value));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_value)) = accepted else {
            converged = true;
            break;
        };
        let improvement = (value - next_value).abs() / value.abs().max(f64::MIN_POSITIVE);
        previous = Some((std::mem::replace(&mut z, next), grad));
        value = next_value;
        if value < best_value {
            best_value = value;
            best_z.clone_from(&z);
        }
        if improvement < opts.rel_tol {
            converged = true;
            break;
        }
    }

    Minimum {
        x: bx.unit_to_box(&best_z),
        value: best_value,
        iterations,
        converged,
    }
}

fn gradient<E: Fn(&[f64]) -> f64>(eval: &E, z: &[f64], value: f64, h: f64, bx: &UnitBox<'_>) -> Vec<f64> {
    let mut probe = z.to_vec();
    (0..z.len())
        .map(|i| {
            if !bx.free(i) {
                return 0.0;
            }
            let g = if z[i] - h >= 0.0 && z[i] + h <= 1.0 {
                probe[i] = z[i] + h;
                let fp = eval(&probe);
                probe[i] = z[i] - h;
                let fm = eval(&probe);
                (fp - fm) / (2.0 * h)
            } else if z[i] + h <= 1.0 {
                probe[i] = z[i] + h;
                (eval(&probe) - value) / h
            } else {
                probe[i] = z[i] - h;
                (value - eval(&probe)) / h
            };
            probe[i] = z[i];
            if g.is_finite() {
                g
            } else {
                0.0
            }
        })
        .collect()
}
