//! Small dense 4x4 helpers: principal-minor characteristic coefficients and
//! eigenvalues from the characteristic quartic.

use num_complex::Complex64;

pub type Mat4 = [[f64; 4]; 4];

/// Coefficients of `λ⁴ - b3 λ³ + b2 λ² - b1 λ + b0 = det(λI - J)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct CharCoeffs {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl CharCoeffs {
    /// Monic coefficients `[c0, c1, c2, c3]` of `λ⁴ + c3 λ³ + c2 λ² + c1 λ + c0`.
    pub fn monic(&self) -> [f64; 4] {
        [self.b0, -self.b1, self.b2, -self.b3]
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let c = self.monic();
        (((z + c[3]) * z + c[2]) * z + c[1]) * z + c[0]
    }

    /// Largest coefficient magnitude, floored at one.
    pub fn scale(&self) -> f64 {
        [self.b0, self.b1, self.b2, self.b3]
            .iter()
            .fold(1.0_f64, |m, v| m.max(v.abs()))
    }
}

fn det3(m: &Mat4, r: [usize; 3]) -> f64 {
    let a = |i: usize, j: usize| m[r[i]][r[j]];
    a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
        + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
}

/// Determinant by cofactor expansion along the first row.
pub fn det4(m: &Mat4) -> f64 {
    (0..4)
        .map(|col| {
            let cols: Vec<usize> = (0..4).filter(|&c| c != col).collect();
            let minor = |i: usize, j: usize| m[i + 1][cols[j]];
            let d = minor(0, 0) * (minor(1, 1) * minor(2, 2) - minor(1, 2) * minor(2, 1))
                - minor(0, 1) * (minor(1, 0) * minor(2, 2) - minor(1, 2) * minor(2, 0))
                + minor(0, 2) * (minor(1, 0) * minor(2, 1) - minor(1, 1) * minor(2, 0));
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][col] * d
        })
        .sum()
}

pub fn char_coeffs(j: &Mat4) -> CharCoeffs {
    let b3 = (0..4).map(|i| j[i][i]).sum();
    let mut b2 = 0.0;
    for a in 0..4 {
        for b in a + 1..4 {
            b2 += j[a][a] * j[b][b] - j[a][b] * j[b][a];
        }
    }
    let b1 = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]
        .iter()
        .map(|&r| det3(j, r))
        .sum();
    CharCoeffs {
        b0: det4(j),
        b1,
        b2,
        b3,
    }
}

/// Roots of the monic quartic `λ⁴ + c3 λ³ + c2 λ² + c1 λ + c0`.
///
/// The variable is rescaled so the coefficients are O(1), the roots are found
/// by simultaneous Aberth–Ehrlich iteration and then polished with Newton steps
/// on the unscaled polynomial.
pub fn quartic_roots(c: [f64; 4]) -> [Complex64; 4] {
    // λ = s μ turns the polynomial into μ⁴ + (c3/s) μ³ + (c2/s²) μ² + (c1/s³) μ + c0/s⁴.
    let s = (0..4)
        .map(|k| c[k].abs().powf(1.0 / (4 - k) as f64))
        .fold(0.0_f64, f64::max);
    if s == 0.0 {
        return [Complex64::new(0.0, 0.0); 4];
    }
    let scaled: [f64; 4] = std::array::from_fn(|k| c[k] / s.powi(4 - k as i32));
    let p = |z: Complex64, c: &[f64; 4]| (((z + c[3]) * z + c[2]) * z + c[1]) * z + c[0];
    let dp = |z: Complex64, c: &[f64; 4]| ((4.0 * z + 3.0 * c[3]) * z + 2.0 * c[2]) * z + c[1];

    // Every root of the scaled polynomial satisfies |μ| <= 2 by the Fujiwara bound.
    let mut z: [Complex64; 4] = std::array::from_fn(|k| Complex64::from_polar(1.3, 0.4 + k as f64 * std::f64::consts::FRAC_PI_2));
    for _ in 0..500 {
        let mut largest = 0.0_f64;
        for k in 0..4 {
            let val = p(z[k], &scaled);
            if val == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = val / dp(z[k], &scaled);
            let repulsion: Complex64 = (0..4).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let w = ratio / (1.0 - ratio * repulsion);
            if w.is_finite() {
                z[k] -= w;
                largest = largest.max(w.norm() / (1.0 + z[k].norm()));
            }
        }
        if largest < 1e-16 {
            break;
        }
    }

    let mut roots = z.map(|m| m * s);
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let val = p(*r, &c);
            let d = dp(*r, &c);
            if d.norm() == 0.0 {
                break;
            }
            let candidate = *r - val / d;
            if candidate.is_finite() && p(candidate, &c).norm() < val.norm() {
                *r = candidate;
            } else {
                break;
            }
        }
        if r.im.abs() <= 1e-13 * s {
            r.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Eigenvalues of `j`, from its characteristic quartic.
pub fn eigenvalues(j: &Mat4) -> [Complex64; 4] {
    quartic_roots(char_coeffs(j).monic())
}

pub fn spectral_radius(ev: &[Complex64]) -> f64 {
    ev.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(d: [f64; 4]) -> Mat4 {
        std::array::from_fn(|i| std::array::from_fn(|j| if i == j { d[i] } else { 0.0 }))
    }

    /// Companion matrix of λ⁴ + a3 λ³ + a2 λ² + a1 λ + a0.
    fn companion(a: [f64; 4]) -> Mat4 {
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-a[0], -a[1], -a[2], -a[3]],
        ]
    }

    #[test]
    fn coefficients_of_diagonal_matrix() {
        let c = char_coeffs(&diag([-1.0, -2.0, -3.0, -4.0]));
        assert_eq!(c, CharCoeffs { b0: 24.0, b1: -50.0, b2: 35.0, b3: -10.0 });
    }

    #[test]
    fn coefficients_of_companion_matrix() {
        // λ⁴+3λ³+3λ²+3λ+2 = (λ²+1)(λ+1)(λ+2)
        let c = char_coeffs(&companion([2.0, 3.0, 3.0, 3.0]));
        assert_eq!(c, CharCoeffs { b0: 2.0, b1: -3.0, b2: 3.0, b3: -3.0 });
        let ev = eigenvalues(&companion([2.0, 3.0, 3.0, 3.0]));
        let expected = [
            Complex64::new(-2.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
        ];
        for b in expected {
            assert!(ev.iter().any(|a| (a - b).norm() < 1e-12), "{b} missing from {ev:?}");
        }
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(char_coeffs(&[[0.0; 4]; 4]), CharCoeffs::default());
        assert!(eigenvalues(&[[0.0; 4]; 4]).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn determinant_by_cofactors() {
        let m = [
            [2.0, 1.0, 0.0, 3.0],
            [0.0, -1.0, 4.0, 1.0],
            [5.0, 0.0, 1.0, 0.0],
            [1.0, 2.0, 0.0, 1.0],
        ];
        assert_relative_eq!(det4(&m), -102.0, epsilon = 1e-12);
    }

    #[test]
    fn widely_spread_spectrum() {
        let ev = eigenvalues(&diag([-1e-4, -1.0, 50.0, -900.0]));
        let expected = [-900.0, -1.0, -1e-4, 50.0];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a.re - b).abs() <= 1e-9 * 900.0 && a.im == 0.0, "{a} vs {b}");
        }
    }

    #[test]
    fn coefficients_annihilate_eigenvalues_of_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m: Mat4 = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-5.0..5.0)));
            let c = char_coeffs(&m);
            let na = nalgebra::Matrix4::from_fn(|i, j| m[i][j]);
            for z in na.complex_eigenvalues().iter() {
                let z = Complex64::new(z.re, z.im);
                let scale = c.scale() * (1.0 + z.norm()).powi(4);
                assert!(c.eval(z).norm() <= 1e-6 * scale);
            }
            let ours = eigenvalues(&m);
            let mut theirs: Vec<Complex64> = na.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect();
            for z in ours {
                let (k, d) = theirs
                    .iter()
                    .enumerate()
                    .map(|(k, w)| (k, (w - z).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                assert!(d <= 1e-6 * (1.0 + z.norm()), "{z} not matched ({d})");
                theirs.remove(k);
            }
        }
    }
}
