//! Normal law, inverse-Gaussian CDF and adaptive Simpson quadrature.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::error::{domain, finite, Error, Result};

/// `Γ(1/4)`.
pub const GAMMA_QUARTER: f64 = 3.625_609_908_221_908;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Argument beyond which the lower normal tail switches to the continued fraction.
const TAIL_SWITCH: f64 = 8.0;

/// `Φ(x)`, unchecked. Accepts `±∞`.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `φ(x)`, unchecked.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    finite("x", x).map(normal_cdf)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> Result<f64> {
    finite("x", x).map(normal_pdf)
}

/// `ln Φ(-b)`, accurate far into the tail.
pub fn ln_normal_tail(b: f64) -> f64 {
    if b <= TAIL_SWITCH {
        return normal_cdf(-b).ln();
    }
    // Mills ratio R(b) = 1/(b + 1/(b + 2/(b + 3/(b + ...)))).
    let mut t = b;
    for k in (1..=60).rev() {
        t = b + k as f64 / t;
    }
    -0.5 * b * b - LN_SQRT_2PI - t.ln()
}

/// `exp(e) · Φ(-b)` without forming either factor when one overflows.
#[inline]
pub fn scaled_normal_tail(e: f64, b: f64) -> f64 {
    if b <= TAIL_SWITCH && e < 700.0 {
        e.exp() * normal_cdf(-b)
    } else {
        (e + ln_normal_tail(b)).exp()
    }
}

/// CDF of the inverse-Gaussian law with mean `1/inv_mean` and shape `shape`:
/// `Φ(a(zν − 1)) + exp(2λν) Φ(−a(zν + 1))` with `a = √(λ/z)`.
///
/// `inv_mean = 0` is the infinite-mean limit `2Φ(−√(λ/z))`.
pub fn inv_gaussian_cdf(z: f64, inv_mean: f64, shape: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(domain(format!("z must be positive, got {z}")));
    }
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(domain(format!("shape must be positive, got {shape}")));
    }
    if !(inv_mean >= 0.0) || !inv_mean.is_finite() {
        return Err(domain(format!("inverse mean must be nonnegative, got {inv_mean}")));
    }
    Ok(ig_cdf(z, inv_mean, shape))
}

pub(crate) fn ig_cdf(z: f64, nu: f64, lambda: f64) -> f64 {
    if z == f64::INFINITY {
        return 1.0;
    }
    let a = (lambda / z).sqrt();
    let v = normal_cdf(a * (z * nu - 1.0)) + scaled_normal_tail(2.0 * lambda * nu, a * (z * nu + 1.0));
    v.clamp(0.0, 1.0)
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Subdivision depth enforced before the error test may accept a panel.
    pub min_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_depth: 40, min_depth: 4 }
    }
}

impl QuadratureSpec {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) || self.max_depth < 1 {
            return Err(domain("quadrature tolerances must be positive and max_depth >= 1"));
        }
        Ok(())
    }
}

/// Adaptive Simpson estimate of `∫_a^b f`.
///
/// Fails with [`Error::Accuracy`] when some panel still misses its tolerance at
/// `max_depth`; the error carries the best estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(domain(format!("need finite a < b, got [{a}, {b}]")));
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // A cheap pilot pass sets the scale for the relative tolerance.
    let pilot = {
        let mut ok = true;
        let coarse = QuadratureSpec { max_depth: spec.min_depth.max(6), ..*spec };
        simpson(&f, a, b, fa, fm, fb, whole, f64::INFINITY, 0, &coarse, &mut ok)
    };
    let tol = spec.abs_tol.max(spec.rel_tol * pilot.abs());
    let mut ok = true;
    let est = simpson(&f, a, b, fa, fm, fb, whole, tol, 0, spec, &mut ok);
    if !est.is_finite() {
        return Err(Error::Accuracy { what: "integral".into(), estimate: est });
    }
    if ok {
        Ok(est)
    } else {
        Err(Error::Accuracy { what: "integral".into(), estimate: est })
    }
}

/// Splits `[a, b]` into `panels` equal pieces and integrates each adaptively,
/// sharing the tolerance budget.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let sub = QuadratureSpec { abs_tol: spec.abs_tol / panels as f64, ..*spec };
    let mut total = 0.0;
    let mut failed = false;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == panels { b } else { lo + h };
        match integrate(&f, lo, hi, &sub) {
            Ok(v) => total += v,
            Err(Error::Accuracy { estimate, .. }) => {
                failed = true;
                total += estimate;
            }
            Err(e) => return Err(e),
        }
    }
    if failed {
        Err(Error::Accuracy { what: "integral".into(), estimate: total })
    } else {
        Ok(total)
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    spec: &QuadratureSpec,
    ok: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= spec.min_depth && delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth >= spec.max_depth || m <= a || m >= b {
        if tol.is_finite() {
            *ok = false;
        }
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, spec, ok)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, spec, ok)
}

/// `1/π`, kept here so callers of the oscillatory integrals share one constant.
pub(crate) const FRAC_1_PI: f64 = 1.0 / PI;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn normal_reference_values() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        // Reference from a 50-digit erfc evaluation.
        assert_abs_diff_eq!(std_normal_cdf(1.96).unwrap(), 0.975_002_104_851_780_1, epsilon = 1e-14);
        assert_abs_diff_eq!(std_normal_cdf(-3.0).unwrap(), 0.001_349_898_031_630_094_6, epsilon = 1e-15);
        assert_abs_diff_eq!(std_normal_pdf(0.0).unwrap(), 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert_abs_diff_eq!(std_normal_pdf(1.0).unwrap(), 0.241_970_724_519_143_37, epsilon = 1e-15);
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_pdf(f64::INFINITY).is_err());
    }

    #[test]
    fn pdf_matches_numeric_derivative_of_cdf() {
        for &x in &[-2.5, -1.0, 0.3, 1.0, 2.2] {
            let h = 1e-5;
            let d = (normal_cdf(x + h) - normal_cdf(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(d, normal_pdf(x), epsilon = 1e-9);
        }
    }

    #[test]
    fn symmetry_on_grid() {
        let mut prev = 0.0;
        for k in 0..=1600 {
            let x = -8.0 + k as f64 * 0.01;
            let p = normal_cdf(x);
            assert!((p + normal_cdf(-x) - 1.0).abs() <= 1e-14);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn log_tail_is_continuous_at_switch() {
        let below = normal_cdf(-7.999_999).ln();
        let above = ln_normal_tail(8.000_001);
        assert!((below - above).abs() < 1e-4);
        // Deep tail against the asymptotic series.
        let b: f64 = 40.0;
        let series = -0.5 * b * b - LN_SQRT_2PI - b.ln() + (1.0 - 1.0 / (b * b) + 3.0 / b.powi(4) - 15.0 / b.powi(6)).ln();
        assert_abs_diff_eq!(ln_normal_tail(b), series, epsilon = 1e-9);
    }

    #[test]
    fn inverse_gaussian_reference_points() {
        let e2 = 2f64.exp();
        assert_abs_diff_eq!(
            inv_gaussian_cdf(1.0, 1.0, 1.0).unwrap(),
            0.5 + e2 * normal_cdf(-2.0),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(inv_gaussian_cdf(1.0, 1.0, 1.0).unwrap(), 0.668_102, epsilon = 1e-6);
        assert_abs_diff_eq!(inv_gaussian_cdf(1.0, 0.0, 4.0).unwrap(), 0.045_500_263_9, epsilon = 1e-9);
        assert!(inv_gaussian_cdf(1e12, 0.5, 2.0).unwrap() > 1.0 - 1e-9);
        assert!(inv_gaussian_cdf(0.0, 1.0, 1.0).is_err());
        assert!(inv_gaussian_cdf(1.0, 1.0, 0.0).is_err());
        // Large λν: the raw product would overflow.
        let v = inv_gaussian_cdf(2.0, 1.0, 800.0).unwrap();
        assert!(v.is_finite() && v > 0.999);
    }

    fn ig_density(z: f64, mu: f64, lambda: f64) -> f64 {
        (lambda / (2.0 * PI * z.powi(3))).sqrt() * (-lambda * (z - mu).powi(2) / (2.0 * mu * mu * z)).exp()
    }

    #[test]
    fn inverse_gaussian_matches_density_quadrature() {
        let spec = QuadratureSpec::with_tol(1e-13, 1e-12);
        for &mu in &[0.5, 1.0, 2.0, 5.0] {
            for &lambda in &[0.5, 1.0, 2.0, 5.0] {
                for &z in &[0.3, 1.0, 2.5, 6.0] {
                    let q = integrate(|s| if s > 0.0 { ig_density(s, mu, lambda) } else { 0.0 }, 0.0, z, &spec)
                        .unwrap();
                    let c = inv_gaussian_cdf(z, 1.0 / mu, lambda).unwrap();
                    assert!((q - c).abs() < 1e-8, "mu={mu} lambda={lambda} z={z}: {q} vs {c}");
                }
            }
        }
    }

    #[test]
    fn quadrature_basics() {
        let s = QuadratureSpec::default();
        assert_abs_diff_eq!(integrate(f64::sin, 0.0, PI, &s).unwrap(), 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(integrate(|x| x * x, 0.0, 1.0, &s).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(integrate(|z| (8.0 * z).cos(), 0.0, PI, &s).unwrap(), 0.0, epsilon = 1e-10);
        assert!(integrate(f64::sin, 1.0, 1.0, &s).is_err());
        let bad = QuadratureSpec { abs_tol: 0.0, ..s };
        assert!(integrate(f64::sin, 0.0, 1.0, &bad).is_err());
    }

    #[test]
    fn quadrature_reports_unreachable_tolerance() {
        let s = QuadratureSpec { abs_tol: 1e-14, rel_tol: 1e-14, max_depth: 3, min_depth: 1 };
        match integrate(|x: f64| x.sqrt(), 0.0, 1.0, &s) {
            Err(Error::Accuracy { estimate, .. }) => assert!((estimate - 2.0 / 3.0).abs() < 1e-2),
            other => panic!("expected accuracy error, got {other:?}"),
        }
    }

    #[test]
    fn panels_agree_with_single_pass() {
        let s = QuadratureSpec::default();
        let f = |x: f64| (-x).exp() * (20.0 * x).cos();
        let a = integrate(f, 0.0, 3.0, &s).unwrap();
        let b = integrate_panels(f, 0.0, 3.0, 7, &s).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn quadrature_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, w in 0.5f64..6.0) {
            let s = QuadratureSpec::default();
            let f = |x: f64| (w * x).sin();
            let g = |x: f64| (-x * x).exp();
            let lhs = integrate(|x| alpha * f(x) + beta * g(x), -1.0, 2.0, &s).unwrap();
            let rhs = alpha * integrate(f, -1.0, 2.0, &s).unwrap() + beta * integrate(g, -1.0, 2.0, &s).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-8);
        }

        #[test]
        fn ig_cdf_monotone_in_z(nu in 0.0f64..3.0, lambda in 0.1f64..50.0, z in 0.01f64..20.0) {
            let a = inv_gaussian_cdf(z, nu, lambda).unwrap();
            let b = inv_gaussian_cdf(z * 1.1, nu, lambda).unwrap();
            prop_assert!(b >= a - 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
