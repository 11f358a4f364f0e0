//! Exact law of the ruin time in the fully exponential risk model.
//!
//! With `X ~ Exp(varrho)`, `Y ~ Exp(rho)`, premium `c` and level `t`, the sum
//! `S = X_1 + ... + X_{N(t)}` has
//! `P{S ≤ x} = P{S < ∞} − (1/π) ∫_0^π f(z, t, x) dz`.

use crate::basis::BasisSpec;
use crate::error::{domain, Error, Result};
use crate::special::{integrate_panels, QuadratureSpec, FRAC_1_PI};

/// Slack allowed when clamping the quadrature result into `[0, 1]`.
const CLAMP_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpModel {
    /// Rate of `X`.
    pub varrho: f64,
    /// Rate of `Y`.
    pub rho: f64,
    pub c: f64,
    /// Level to be crossed (initial capital).
    pub level: f64,
}

impl ExpModel {
    pub fn new(varrho: f64, rho: f64, c: f64, level: f64) -> Result<Self> {
        let m = Self { varrho, rho, c, level };
        if [varrho, rho, c].iter().all(|v| *v > 0.0 && v.is_finite()) && level >= 0.0 && level.is_finite() {
            Ok(m)
        } else {
            Err(domain(format!("invalid exponential model {m:?}")))
        }
    }

    /// `r = varrho / (c rho)`.
    pub fn ratio(&self) -> f64 {
        self.varrho / (self.c * self.rho)
    }

    pub fn basis(&self) -> BasisSpec {
        BasisSpec::exponential_risk(self.varrho, self.rho, self.c).expect("validated model")
    }
}

/// `P{S < ∞}`: one when `r ≥ 1`, else `r·exp(−t(c rho − varrho)/c)`.
pub fn defect_mass(m: &ExpModel) -> f64 {
    let r = m.ratio();
    if r >= 1.0 {
        1.0
    } else {
        r * (-m.level * (m.c * m.rho - m.varrho) / m.c).exp()
    }
}

/// The integrand on `(0, π)`.
///
/// Uses `1 + r − 2√r cos z = (1 − √r)² + 4√r sin²(z/2)` and
/// `cos a − cos(a + 2z) = 2 sin(a + z) sin z` to avoid cancellation near `z = 0`.
/// At `z = 0` the limit is returned: zero unless `r = 1`, where it is `2(t rho + 1)`.
pub fn integrand_f(z: f64, m: &ExpModel, x: f64) -> f64 {
    let r = m.ratio();
    let sr = r.sqrt();
    let trho = m.level * m.rho;
    if z == 0.0 {
        return if r == 1.0 { 2.0 * (trho + 1.0) } else { 0.0 };
    }
    let half = (0.5 * z).sin();
    let q = (1.0 - sr).powi(2) + 4.0 * sr * half * half;
    let a = trho * sr * z.sin();
    let osc = 2.0 * (a + z).sin() * z.sin();
    let expo = trho * (sr * z.cos() - 1.0) - x * m.c * m.rho * q;
    r * osc / q * expo.exp()
}

/// Number of quadrature panels: at least 16, and eight per oscillation of the integrand.
fn panels(m: &ExpModel) -> usize {
    let w = m.level * m.rho * m.ratio().sqrt();
    16usize.max((8.0 * w / std::f64::consts::PI).ceil() as usize)
}

/// `P{S ≤ x}`.
pub fn exact_cdf(m: &ExpModel, x: f64) -> Result<f64> {
    exact_cdf_with(m, x, &QuadratureSpec::with_tol(1e-11, 1e-10))
}

pub fn exact_cdf_with(m: &ExpModel, x: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("x must be positive and finite, got {x}")));
    }
    let integral = integrate_panels(|z| integrand_f(z, m, x), 0.0, std::f64::consts::PI, panels(m), spec)?;
    let p = defect_mass(m) - FRAC_1_PI * integral;
    if (-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&p) {
        Ok(p.clamp(0.0, 1.0))
    } else {
        Err(Error::Consistency(format!("exact CDF evaluated to {p} outside [0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn model(c: f64) -> ExpModel {
        ExpModel::new(2.0, 1.0, c, 10.0).unwrap()
    }

    #[test]
    fn defect_examples() {
        assert_eq!(defect_mass(&ExpModel::new(2.0, 1.0, 1.0, 10.0).unwrap()), 1.0);
        assert_abs_diff_eq!(defect_mass(&ExpModel::new(2.0, 1.0, 4.0, 0.0).unwrap()), 0.5, epsilon = 1e-15);
        assert!(defect_mass(&ExpModel::new(2.0, 1.0, 4.0, 1e3).unwrap()) < 1e-200);
    }

    #[test]
    fn integrand_transcription() {
        // Term-by-term evaluation of the printed form at z = π/2.
        let m = model(2.0);
        let (t, x, r) = (10.0f64, 200.0f64, 1.0f64);
        let z = std::f64::consts::FRAC_PI_2;
        let base = 1.0 + r - 2.0 * r.sqrt() * z.cos();
        let a = t * r.sqrt() * z.sin();
        let printed = r / base * (t * (r.sqrt() * z.cos() - 1.0) - x * 2.0 * base).exp() * (a.cos() - (a + 2.0 * z).cos());
        assert_abs_diff_eq!(integrand_f(z, &m, x), printed, epsilon = 1e-300);
        let m = model(3.1);
        let r = m.ratio();
        for &z in &[0.01, 0.3, 1.7, 3.0] {
            let base = 1.0 + r - 2.0 * r.sqrt() * f64::cos(z);
            let a = t * r.sqrt() * f64::sin(z);
            let printed =
                r / base * (t * (r.sqrt() * f64::cos(z) - 1.0) - 5.0 * 3.1 * base).exp() * (a.cos() - (a + 2.0 * z).cos());
            assert!((integrand_f(z, &m, 5.0) - printed).abs() <= 1e-12 * printed.abs().max(1e-12));
        }
    }

    #[test]
    fn integrand_limit_and_bound() {
        let m = model(3.0);
        assert_eq!(integrand_f(0.0, &m, 10.0), 0.0);
        assert!(integrand_f(1e-9, &m, 10.0).abs() < 1e-6);
        let r: f64 = m.ratio();
        for k in 1..200 {
            let z = k as f64 * std::f64::consts::PI / 200.0;
            let q = 1.0 + r - 2.0 * r.sqrt() * z.cos();
            let bound = r / q * 2.0 * (10.0 * (r.sqrt() - 1.0)).exp();
            assert!(integrand_f(z, &m, 3.0).abs() <= bound * (1.0 + 1e-12));
        }
        // At r = 1 the limit is finite and nonzero.
        let c = model(2.0);
        let near = integrand_f(1e-7, &c, 0.0);
        assert!((near - integrand_f(0.0, &c, 0.0)).abs() < 1e-4);
    }

    #[test]
    fn figure_anchor() {
        let p = exact_cdf(&model(2.0), 200.0).unwrap();
        assert_abs_diff_eq!(p, 0.699, epsilon = 0.005);
    }

    #[test]
    fn cdf_tends_to_defect() {
        for &c in &[1.5, 2.5, 4.0] {
            let m = model(c);
            let p = exact_cdf(&m, 1e4 * m.level).unwrap();
            assert_abs_diff_eq!(p, defect_mass(&m), epsilon = 1e-4);
        }
    }

    #[test]
    fn cdf_monotone_in_x_and_bounded_by_defect() {
        for &c in &[1.5, 2.0, 3.0] {
            let m = model(c);
            let d = defect_mass(&m);
            let mut prev = 0.0;
            for x in (1..=500).step_by(7) {
                let p = exact_cdf(&m, x as f64).unwrap();
                assert!(p >= prev - 1e-9, "c={c} x={x}: {p} < {prev}");
                assert!(p <= d + 1e-9);
                prev = p;
            }
        }
    }

    #[test]
    fn cdf_nonincreasing_in_level() {
        for &c in &[1.5, 3.0] {
            let mut prev = 1.0;
            for level in [1.0, 3.0, 10.0, 20.0] {
                let m = ExpModel::new(2.0, 1.0, c, level).unwrap();
                let p = exact_cdf(&m, 50.0).unwrap();
                assert!(p <= prev + 1e-9);
                prev = p;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn cdf_in_unit_interval(c in 1.0f64..5.0, level in 0.5f64..15.0, x in 0.1f64..300.0) {
            let m = ExpModel::new(2.0, 1.0, c, level).unwrap();
            let p = exact_cdf(&m, x).unwrap();
            prop_assert!((0.0..=defect_mass(&m) + 1e-9).contains(&p));
        }
    }
}
