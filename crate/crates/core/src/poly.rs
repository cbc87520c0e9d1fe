//! Polynomial root finding for the one-dimensional subproblems.
//!
//! The exact coordinate subproblem reduces to a real polynomial of degree
//! `2B - 1`; its roots are found as eigenvalues of the companion matrix.
//! The inexact subproblem reduces to a cubic, solved in closed form with a
//! Newton polish.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Multiplies two coefficient vectors (ascending powers).
pub fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Evaluates a polynomial with ascending coefficients at `x` (Horner).
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// All complex roots of the polynomial with ascending real coefficients,
/// via the eigenvalues of the companion matrix of the monic normalization.
///
/// Leading coefficients that are negligible relative to the largest
/// coefficient are trimmed first (their roots have fled to infinity).
/// Returns an empty vector for constant or identically-zero polynomials.
pub fn companion_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let max_mag = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if max_mag == 0.0 {
        return Vec::new();
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].abs() <= 1e-14 * max_mag {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / lead;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

/// Real roots of the polynomial, filtered from the companion eigenvalues
/// with the relative imaginary-part tolerance `|Im| < 1e-8 * (1 + |Re|)`.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    companion_roots(coeffs)
        .into_iter()
        .filter(|z| z.im.abs() < 1e-8 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

/// Real roots of `c[0] + c[1] x + c[2] x^2 + c[3] x^3` by the closed-form
/// discriminant method, each polished with one Newton step.
///
/// Degenerate leading coefficients fall through to the quadratic and
/// linear formulas.
pub fn cubic_real_roots(c: &[f64; 4]) -> Vec<f64> {
    let max_mag = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max_mag == 0.0 {
        return Vec::new();
    }
    let mut roots = if c[3].abs() <= 1e-14 * max_mag {
        if c[2].abs() <= 1e-14 * max_mag {
            if c[1].abs() <= 1e-14 * max_mag {
                Vec::new()
            } else {
                vec![-c[0] / c[1]]
            }
        } else {
            quadratic_real_roots(c[0], c[1], c[2])
        }
    } else {
        // Depressed form t^3 + p t + q with x = t - b/(3a).
        let (a, b, cc, d) = (c[3], c[2], c[1], c[0]);
        let shift = -b / (3.0 * a);
        let p = (3.0 * a * cc - b * b) / (3.0 * a * a);
        let q = (2.0 * b * b * b - 9.0 * a * b * cc + 27.0 * a * a * d) / (27.0 * a * a * a);
        let disc = -4.0 * p * p * p - 27.0 * q * q;
        if disc > 0.0 {
            // Three distinct real roots: trigonometric form.
            let m = 2.0 * (-p / 3.0).sqrt();
            let theta = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
            (0..3)
                .map(|k| {
                    m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift
                })
                .collect()
        } else {
            // One real root: Cardano with a numerically-stable branch.
            let half_q = q / 2.0;
            let inner = (half_q * half_q + p * p * p / 27.0).max(0.0).sqrt();
            let u = cbrt(-half_q + inner);
            let v = cbrt(-half_q - inner);
            vec![u + v + shift]
        }
    };
    for r in roots.iter_mut() {
        *r = newton_polish(c, *r);
    }
    roots
}

fn quadratic_real_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // Stable form: avoid cancellation in the smaller-magnitude root.
    let q = -0.5 * (c1 + c1.signum() * sq);
    if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / c2, c0 / q]
    }
}

fn cbrt(x: f64) -> f64 {
    x.signum() * x.abs().powf(1.0 / 3.0)
}

fn newton_polish(c: &[f64; 4], x: f64) -> f64 {
    let f = eval(c, x);
    let df = c[1] + 2.0 * c[2] * x + 3.0 * c[3] * x * x;
    if df.abs() > 1e-300 {
        let step = f / df;
        if step.is_finite() && step.abs() < 1.0 + x.abs() {
            return x - step;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn conv_matches_hand_expansion() {
        // (1 + 2x)(3 + x) = 3 + 7x + 2x^2
        assert_eq!(conv(&[1.0, 2.0], &[3.0, 1.0]), vec![3.0, 7.0, 2.0]);
    }

    #[test]
    fn companion_recovers_known_roots() {
        // (x-1)(x-2)(x+3) = -x... expand: x^3 - 7x + 6 has roots 1, 2, -3
        let roots = sorted(real_roots(&[6.0, -7.0, 0.0, 1.0]));
        assert_eq!(roots.len(), 3);
        assert_relative_eq!(roots[0], -3.0, max_relative = 1e-10);
        assert_relative_eq!(roots[1], 1.0, max_relative = 1e-10);
        assert_relative_eq!(roots[2], 2.0, max_relative = 1e-10);
    }

    #[test]
    fn companion_filters_complex_pair() {
        // x^2 + 1: no real roots
        assert!(real_roots(&[1.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn companion_trims_negligible_leading_terms() {
        // Effectively linear: 2 - x with a vanishing cubic tail.
        let roots = real_roots(&[2.0, -1.0, 0.0, 1e-300]);
        assert_eq!(roots.len(), 1);
        assert_relative_eq!(roots[0], 2.0, max_relative = 1e-10);
    }

    #[test]
    fn zero_polynomial_has_no_roots() {
        assert!(companion_roots(&[0.0, 0.0]).is_empty());
        assert!(cubic_real_roots(&[0.0, 0.0, 0.0, 0.0]).is_empty());
    }

    #[test]
    fn cubic_three_real_roots() {
        // roots -1, 0.5, 4: (x+1)(x-1/2)(x-4) = x^3 - 3.5x^2 - 2.5... expand
        let c = conv(&conv(&[1.0, 1.0], &[-0.5, 1.0]), &[-4.0, 1.0]);
        let roots = sorted(cubic_real_roots(&[c[0], c[1], c[2], c[3]]));
        assert_eq!(roots.len(), 3);
        assert_relative_eq!(roots[0], -1.0, epsilon = 1e-10);
        assert_relative_eq!(roots[1], 0.5, epsilon = 1e-10);
        assert_relative_eq!(roots[2], 4.0, epsilon = 1e-10);
    }

    #[test]
    fn cubic_single_real_root() {
        // x^3 + x + 1: one real root near -0.6823278
        let roots = cubic_real_roots(&[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(roots.len(), 1);
        assert_relative_eq!(roots[0], -0.682_327_803_828_019_3, epsilon = 1e-10);
    }

    #[test]
    fn cubic_against_companion_on_random_coefficients() {
        use rand::Rng;
        let mut rng = crate::rng::substream(11, 0);
        for _ in 0..500 {
            let c: [f64; 4] = [
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ];
            let a = sorted(cubic_real_roots(&c));
            let b = sorted(real_roots(&c));
            assert_eq!(a.len(), b.len(), "coeffs {c:?}");
            for (x, y) in a.iter().zip(&b) {
                assert_relative_eq!(x, y, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }
}
