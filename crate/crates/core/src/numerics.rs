//! Shared numeric kernels: adaptive quadrature for the dilogarithm-type
//! integrals, central-difference Jacobians, transport of bivectors and
//! 2-forms along maps, and a small Pfaffian for volume checks.
//!
//! Jacobians are deliberately finite-difference rather than hand-coded or
//! autodiff so the verifier shares no formulas with the maps it checks.

use crate::{Error, Result};
use nalgebra::DMatrix;

/// Evaluates a real polynomial with coefficient slice `[c_0, c_1, ...]`.
pub fn eval_poly(coeffs: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * u + c;
    }
    acc
}

fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    if !(flm.is_finite() && frm.is_finite()) {
        return Err(Error::Quadrature(format!(
            "integrand not finite near [{a}, {b}]"
        )));
    }
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || depth == 0 {
        return Ok(left + right + delta / 15.0);
    }
    let l = adaptive_step(f, a, m, fa, fm, flm, left, 0.5 * tol, depth - 1)?;
    let r = adaptive_step(f, m, b, fm, fb, frm, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    if !(fa.is_finite() && fb.is_finite() && fm.is_finite()) {
        return Err(Error::Quadrature(format!(
            "integrand not finite on [{a}, {b}]"
        )));
    }
    let whole = simpson(a, fa, b, fb, fm);
    adaptive_step(&f, a, b, fa, fb, fm, whole, abs_tol, 48)
}

/// Checks positivity of the polynomial with coefficients `z` on the closed
/// segment between `a` and `b` by sampling; a sign change is located by
/// bisection and reported.
pub fn check_positive_on(coeffs: &[f64], a: f64, b: f64) -> Result<()> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let samples = 64;
    let mut prev_u = lo;
    let mut prev = eval_poly(coeffs, lo);
    if prev <= 0.0 {
        return Err(Error::Quadrature(format!("Z({lo}) = {prev} is not positive")));
    }
    for i in 1..=samples {
        let u = lo + (hi - lo) * (i as f64) / (samples as f64);
        let v = eval_poly(coeffs, u);
        if v <= 0.0 {
            let mut x0 = prev_u;
            let mut x1 = u;
            for _ in 0..60 {
                let mid = 0.5 * (x0 + x1);
                if eval_poly(coeffs, mid) > 0.0 {
                    x0 = mid;
                } else {
                    x1 = mid;
                }
            }
            return Err(Error::Quadrature(format!(
                "Z vanishes near u = {x1} inside [{lo}, {hi}]"
            )));
        }
        prev_u = u;
        prev = v;
    }
    let _ = prev;
    Ok(())
}

/// Width of the series patch around u = 0 for `log(Z(u))/u`.
const SERIES_PATCH: f64 = 1e-3;

/// Integral of `log(Z(u))/u` from `a` to `b` for a polynomial Z with
/// Z(0) = 1 and coefficient slice `coeffs = [1, z_1, ..., z_r]`.
///
/// The integrand extends analytically through u = 0; the segment
/// `[0, SERIES_PATCH]` is handled by the two-term series
/// `z_1 u + (z_2 - z_1^2/2) u^2 / 2` of its antiderivative.
pub fn quad_log_over_u(coeffs: &[f64], a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if a < 0.0 || b < 0.0 {
        return Err(Error::Quadrature(
            "log-integrand endpoints must be non-negative".into(),
        ));
    }
    if b < a {
        return Ok(-quad_log_over_u(coeffs, b, a, abs_tol)?);
    }
    check_positive_on(coeffs, a, b)?;
    let z1 = coeffs.get(1).copied().unwrap_or(0.0);
    let z2 = coeffs.get(2).copied().unwrap_or(0.0);
    let series = |u: f64| z1 * u + (z2 - 0.5 * z1 * z1) * u * u / 2.0;
    let f = |u: f64| eval_poly(coeffs, u).ln() / u;
    if a >= SERIES_PATCH {
        return integrate(f, a, b, abs_tol);
    }
    if b <= SERIES_PATCH {
        return Ok(series(b) - series(a));
    }
    Ok(series(SERIES_PATCH) - series(a) + integrate(f, SERIES_PATCH, b, abs_tol)?)
}

/// Integral of `u^(eps*j - 1) / Z(u^eps)` from `a` to `b`.
///
/// For `eps = -1` the integrand is rewritten through the reversed polynomial
/// so that only positive powers of `u` are evaluated:
/// `u^(-j-1) / Z(u^-1) = u^(r-j-1) / Z*(u)`.
pub fn quad_rational(
    coeffs: &[f64],
    j: i64,
    eps: i8,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if a < 0.0 || b < 0.0 {
        return Err(Error::Quadrature("integration endpoints must be non-negative".into()));
    }
    if b < a {
        return Ok(-quad_rational(coeffs, j, eps, b, a, abs_tol)?);
    }
    let r = (coeffs.len() - 1) as i64;
    let (pow, poly): (i64, Vec<f64>) = if eps >= 0 {
        (j - 1, coeffs.to_vec())
    } else {
        (r - j - 1, coeffs.iter().rev().copied().collect())
    };
    if a == 0.0 && pow < 0 {
        return Err(Error::Quadrature(format!(
            "integrand has a pole of order {} at the lower endpoint",
            -pow
        )));
    }
    check_positive_on(&poly, a.max(f64::MIN_POSITIVE), b)?;
    let f = move |u: f64| u.powi(pow as i32) / eval_poly(&poly, u);
    integrate(f, a, b, abs_tol)
}

/// Regularized value of the divergent integral `int_0^w du / (u Z(u))` for a
/// polynomial with Z(0) = 1: the limit of `int_g^w + log(g)` as `g -> 0`,
/// which equals `log(w) - int_0^w (Z(u) - 1) / (u Z(u)) du`.
pub fn quad_one_over_u_z_regularized(coeffs: &[f64], w: f64, abs_tol: f64) -> Result<f64> {
    if w <= 0.0 {
        return Err(Error::Quadrature("regularized bound must be positive".into()));
    }
    check_positive_on(coeffs, 0.0, w)?;
    // (Z(u) - 1)/u is the polynomial with shifted coefficients.
    let shifted: Vec<f64> = coeffs[1..].to_vec();
    let f = |u: f64| eval_poly(&shifted, u) / eval_poly(coeffs, u);
    Ok(w.ln() - integrate(f, 0.0, w, abs_tol)?)
}

/// Central-difference Jacobian of `map` at `point`.
pub fn jacobian(
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    point: &[f64],
    step: f64,
) -> DMatrix<f64> {
    let n = point.len();
    let out_dim = map(point).len();
    let mut jac = DMatrix::zeros(out_dim, n);
    let mut plus = point.to_vec();
    let mut minus = point.to_vec();
    for col in 0..n {
        plus[col] = point[col] + step;
        minus[col] = point[col] - step;
        let fp = map(&plus);
        let fm = map(&minus);
        for row in 0..out_dim {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * step);
        }
        plus[col] = point[col];
        minus[col] = point[col];
    }
    jac
}

/// Pushforward of a bivector along a map with Jacobian `j`: `J pi J^T`.
pub fn pushforward_bivector(j: &DMatrix<f64>, pi: &DMatrix<f64>) -> DMatrix<f64> {
    j * pi * j.transpose()
}

/// Pullback of a 2-form along a map with Jacobian `j`: `J^T omega J`.
pub fn pullback_2form(j: &DMatrix<f64>, omega: &DMatrix<f64>) -> DMatrix<f64> {
    j.transpose() * omega * j
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// Pfaffian of an even-dimensional skew-symmetric matrix by expansion along
/// the first row. Fine at desk scale (dim <= ~12).
pub fn pfaffian(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    if n == 0 {
        return 1.0;
    }
    if n % 2 == 1 {
        return 0.0;
    }
    if n == 2 {
        return m[(0, 1)];
    }
    let mut acc = 0.0;
    for j in 1..n {
        let keep: Vec<usize> = (0..n).filter(|&i| i != 0 && i != j).collect();
        let sub = DMatrix::from_fn(n - 2, n - 2, |r, c| m[(keep[r], keep[c])]);
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        acc += sign * m[(0, j)] * pfaffian(&sub);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Series oracle for the Euler dilogarithm at |x| <= 1; for arguments
    // below -1 the inversion formula brings them back into range.
    fn li2_oracle(x: f64) -> f64 {
        assert!(x <= 1.0);
        if x < -1.0 {
            let inv = li2_oracle(1.0 / x);
            return -std::f64::consts::PI.powi(2) / 6.0 - 0.5 * (-x).ln().powi(2) - inv;
        }
        let mut sum = 0.0;
        let mut xp = 1.0;
        for k in 1..3_000_000i64 {
            xp *= x;
            sum += xp / ((k as f64) * (k as f64));
            if xp.abs() < 1e-18 {
                break;
            }
        }
        sum
    }

    #[test]
    fn log_integral_matches_dilogarithm_series() {
        // int_0^1 log(1+u)/u du = -Li2(-1) = pi^2/12.
        let v = quad_log_over_u(&[1.0, 1.0], 0.0, 1.0, 1e-11).unwrap();
        assert_abs_diff_eq!(v, -li2_oracle(-1.0), epsilon = 1e-9);
        assert_abs_diff_eq!(v, std::f64::consts::PI.powi(2) / 12.0, epsilon = 1e-9);

        // int_1^2 log(1+u)/u du = Li2(-1) - Li2(-2).
        let v = quad_log_over_u(&[1.0, 1.0], 1.0, 2.0, 1e-11).unwrap();
        assert_abs_diff_eq!(v, li2_oracle(-1.0) - li2_oracle(-2.0), epsilon = 1e-9);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(quad_log_over_u(&[1.0, 1.0], 0.7, 0.7, 1e-11).unwrap(), 0.0);
        assert_eq!(quad_rational(&[1.0, 1.0], 1, 1, 0.3, 0.3, 1e-11).unwrap(), 0.0);
    }

    #[test]
    fn rational_integrals_match_closed_forms() {
        // int_0^1 du/(1+u) = log 2.
        let v = quad_rational(&[1.0, 1.0], 1, 1, 0.0, 1.0, 1e-11).unwrap();
        assert_abs_diff_eq!(v, 2f64.ln(), epsilon = 1e-10);
        // int_1^2 u^-2/(1+u^-1) du = int_1^2 du/(u^2+u) = log(4/3).
        let v = quad_rational(&[1.0, 1.0], 1, -1, 1.0, 2.0, 1e-11).unwrap();
        assert_abs_diff_eq!(v, (4f64 / 3.0).ln(), epsilon = 1e-10);
    }

    #[test]
    fn quadrature_converges_when_tolerance_halves() {
        let coarse = quad_log_over_u(&[1.0, 0.5, 1.0], 0.0, 3.0, 1e-9).unwrap();
        let fine = quad_log_over_u(&[1.0, 0.5, 1.0], 0.0, 3.0, 5e-10).unwrap();
        assert!((coarse - fine).abs() < 1e-9);
    }

    #[test]
    fn pole_detection() {
        // Z(u) = 1 - u vanishes at u = 1.
        assert!(quad_log_over_u(&[1.0, -1.0], 0.0, 2.0, 1e-10).is_err());
        assert!(quad_rational(&[1.0, 1.0], 1, -1, 0.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn regularized_integral_matches_limit() {
        // int_g^w du/(u(1+u)) = log(w/(1+w)) - log(g/(1+g)); adding log g and
        // letting g -> 0 leaves log(w/(1+w)).
        let w = 0.8;
        let v = quad_one_over_u_z_regularized(&[1.0, 1.0], w, 1e-12).unwrap();
        assert_abs_diff_eq!(v, (w / (1.0 + w)).ln(), epsilon = 1e-10);
    }

    #[test]
    fn jacobian_of_linear_map_is_exact() {
        let map = |x: &[f64]| vec![2.0 * x[0] - x[1], 3.0 * x[1]];
        let j = jacobian(&map, &[0.4, 1.7], 1e-5);
        assert_abs_diff_eq!(j[(0, 0)], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(j[(0, 1)], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(j[(1, 0)], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(j[(1, 1)], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn jacobian_of_monomial_map_matches_hand_derivative() {
        // y = x1 * x2^-1 at (2, 3): dy/dx = (1/3, -2/9).
        let map = |x: &[f64]| vec![x[0] / x[1]];
        let j = jacobian(&map, &[2.0, 3.0], 1e-5);
        assert_abs_diff_eq!(j[(0, 0)], 1.0 / 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[(0, 1)], -2.0 / 9.0, epsilon = 1e-8);
    }

    #[test]
    fn identity_pushforward_fixes_bivector() {
        let pi = DMatrix::from_row_slice(2, 2, &[0.0, 1.5, -1.5, 0.0]);
        let j = DMatrix::identity(2, 2);
        assert_eq!(pushforward_bivector(&j, &pi), pi);
        assert_eq!(pullback_2form(&j, &pi), pi);
    }

    #[test]
    fn pfaffian_of_standard_form() {
        // Block-diagonal J_2 x J_2 has Pfaffian 1.
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = -1.0;
        m[(2, 3)] = 1.0;
        m[(3, 2)] = -1.0;
        assert_abs_diff_eq!(pfaffian(&m), 1.0, epsilon = 1e-14);
        // Scaling one block scales the Pfaffian.
        m[(2, 3)] = 2.5;
        m[(3, 2)] = -2.5;
        assert_abs_diff_eq!(pfaffian(&m), 2.5, epsilon = 1e-14);
    }
}
