//! Renewal-theoretic approximations: mean counts, the normal and Edgeworth laws of
//! cumulated rewards, and the limit law of the garbage term.

use crate::basis::MomentSet;
use crate::error::{domain, Error, Result};
use crate::special::{integrate, normal_cdf, normal_pdf, QuadratureSpec};

/// Relative size below which `σ_S²` is treated as zero.
const DEGENERACY_RTOL: f64 = 1e-12;

/// Upper limit of the `w = √|z|` integrals; `φ(w²)` is below 1e-37 past it.
const GARBAGE_W_MAX: f64 = 3.6;

fn positive_mean(mu_t: f64) -> Result<()> {
    if mu_t > 0.0 && mu_t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("mean interval must be positive, got {mu_t}")))
    }
}

/// `t/μ_T`.
pub fn renewal_mean_elementary(mu_t: f64, t: f64) -> Result<f64> {
    positive_mean(mu_t)?;
    Ok(t / mu_t)
}

/// `E N_sup(t) ≈ t/μ_T + (σ_T² − μ_T²)/(2μ_T²)`.
pub fn renewal_mean_refined(mom: &MomentSet, t: f64) -> Result<f64> {
    positive_mean(mom.mu_t)?;
    if !(mom.var_t >= 0.0) || !mom.var_t.is_finite() {
        return Err(domain("var_t must be finite and nonnegative"));
    }
    let mu2 = mom.mu_t * mom.mu_t;
    Ok(t / mom.mu_t + (mom.var_t - mu2) / (2.0 * mu2))
}

/// Centre `m_S` and scale `σ_S` of cumulated rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardApproxParams {
    pub m_s: f64,
    pub sigma_s: f64,
}

impl RewardApproxParams {
    /// `(x − m_S t)/(σ_S √t)`.
    pub fn standardize(&self, t: f64, x: f64) -> f64 {
        (x - self.m_s * t) / (self.sigma_s * t.sqrt())
    }

    /// Inverse of [`standardize`](Self::standardize).
    pub fn natural(&self, t: f64, u: f64) -> f64 {
        self.m_s * t + u * self.sigma_s * t.sqrt()
    }
}

/// `E(μ_X T − μ_T X)² / μ_T³` together with a scale for the degeneracy test.
pub(crate) fn ratio_variance(mom: &MomentSet) -> (f64, f64) {
    let (mx, mt) = (mom.mu_x, mom.mu_t);
    let a = mx * mx * mom.var_t;
    let b = 2.0 * mx * mt * mom.cov_xt;
    let c = mt * mt * mom.var_x;
    let m3 = mt.powi(3);
    ((a - b + c) / m3, (a + b.abs() + c) / m3.abs())
}

/// `m_S = μ_X/μ_T`, `σ_S² = (μ_X² σ_T² − 2μ_Xμ_T cov + μ_T² σ_X²)/μ_T³`.
pub fn reward_params(mom: &MomentSet) -> Result<RewardApproxParams> {
    mom.validate()?;
    positive_mean(mom.mu_t)?;
    let (s2, scale) = ratio_variance(mom);
    if !(s2 > DEGENERACY_RTOL * scale) {
        return Err(Error::Degenerate(format!(
            "sigma_S^2 = {s2}: X is a.s. proportional to T"
        )));
    }
    Ok(RewardApproxParams { m_s: mom.mu_x / mom.mu_t, sigma_s: s2.sqrt() })
}

/// `Φ((x − m_S t)/(σ_S √t))`.
pub fn cumulated_rewards_cdf_normal(p: &RewardApproxParams, t: f64, x: f64) -> f64 {
    normal_cdf(p.standardize(t, x))
}

/// Chebyshev–Hermite polynomial `H₂(x) = x² − 1`.
pub fn hermite_h2(x: f64) -> f64 {
    x * x - 1.0
}

/// Constants of the first Edgeworth polynomial `Q₁(x) = −(κ₃,₀ H₂(x) + 3I₁)/6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeworthQ1 {
    pub kappa30: f64,
    pub i1: f64,
}

impl EdgeworthQ1 {
    pub fn q1(&self, x: f64) -> f64 {
        -(self.kappa30 * hermite_h2(x) + 3.0 * self.i1) / 6.0
    }

    /// `Φ(u) + Q₁(u)φ(u)/√t` at a standardized point `u`.
    pub fn corrected_cdf(&self, t: f64, u: f64) -> f64 {
        normal_cdf(u) + self.q1(u) * normal_pdf(u) / t.sqrt()
    }
}

/// `κ₃,₀` and `I₁` from moments up to third order.
///
/// `κ₃,₀ σ_S³` is the third derivative at zero of the root `ψ(θ)` of
/// `ln E exp(θX − ψT) = 0`. `I₁/(2√t)` is the standardized mean offset of the
/// sum up to and including the crossing index, `E S_{N_inf(t)} − m_S t`.
pub fn edgeworth_q1(mom: &MomentSet) -> Result<EdgeworthQ1> {
    let p = reward_params(mom)?;
    let h = mom.third.ok_or(Error::MissingThirdMoments)?;
    let (mx, mt) = (mom.mu_x, mom.mu_t);
    let (vx, vt, cov) = (mom.var_x, mom.var_t, mom.cov_xt);
    let line1 = (h.h30 - 3.0 * vx * cov / mt + 6.0 * vx * vt * mx / (mt * mt) - 6.0 * vt * cov * mx * mx / mt.powi(3)) / mt;
    let line2 = -3.0 * (h.h21 - 2.0 * cov * cov / mt + vx * vt / mt) * mx / (mt * mt);
    let line3 = 3.0 * (h.h12 - vt * cov / mt) * mx * mx / mt.powi(3);
    let line4 = -(h.h03 - 3.0 * vt * vt / mt) * mx.powi(3) / mt.powi(4);
    let kappa30 = (line1 + line2 + line3 + line4) / p.sigma_s.powi(3);
    let i1 = mx * (vt / (mt * mt) + 1.0) / p.sigma_s;
    Ok(EdgeworthQ1 { kappa30, i1 })
}

/// Edgeworth-corrected CDF in natural units.
pub fn cumulated_rewards_cdf_edgeworth(p: &RewardApproxParams, q: &EdgeworthQ1, t: f64, x: f64) -> f64 {
    q.corrected_cdf(t, p.standardize(t, x))
}

fn garbage_spec() -> QuadratureSpec {
    QuadratureSpec::with_tol(1e-12, 1e-11)
}

/// `∫ Φ(x/√|z|) φ(z) dz`, the limit law of the scaled garbage term.
pub fn garbage_limit_cdf(x: f64) -> Result<f64> {
    crate::error::finite("x", x)?;
    if x == 0.0 {
        return Ok(0.5);
    }
    if x < 0.0 {
        return garbage_limit_cdf(-x).map(|p| 1.0 - p);
    }
    // z = w²: 4 ∫_0^∞ Φ(x/w) φ(w²) w dw, minus the symmetric half.
    let upper = integrate(
        |w| if w > 0.0 { (normal_cdf(x / w) - 0.5) * normal_pdf(w * w) * w } else { 0.0 },
        0.0,
        GARBAGE_W_MAX,
        &garbage_spec(),
    )?;
    Ok((0.5 + 4.0 * upper).min(1.0))
}

/// Density of the garbage limit law, `4 ∫_0^∞ φ(y/w) φ(w²) dw`.
pub fn garbage_limit_pdf(y: f64) -> Result<f64> {
    crate::error::finite("y", y)?;
    let y = y.abs();
    let v = integrate(
        |w| {
            if w > 0.0 {
                normal_pdf(y / w) * normal_pdf(w * w)
            } else if y == 0.0 {
                normal_pdf(0.0) * normal_pdf(0.0)
            } else {
                0.0
            }
        },
        0.0,
        GARBAGE_W_MAX,
        &garbage_spec(),
    )?;
    Ok(4.0 * v)
}

/// `Γ(1/4)/(2^{3/4}π)`, the peak of the garbage density.
pub fn garbage_pdf_peak() -> f64 {
    crate::special::GAMMA_QUARTER / (2f64.powf(0.75) * std::f64::consts::PI)
}

/// Factor `μ_T^{3/4}/(σ_X σ_T^{1/2} t^{1/4})` applied to the garbage term.
pub fn garbage_scale(mom: &MomentSet, t: f64) -> Result<f64> {
    positive_mean(mom.mu_t)?;
    if !(mom.var_x > 0.0) || !(mom.var_t > 0.0) {
        return Err(Error::Degenerate("garbage scaling needs sigma_X > 0 and sigma_T > 0".into()));
    }
    if !(t > 0.0) {
        return Err(domain("t must be positive"));
    }
    Ok(mom.mu_t.powf(0.75) / (mom.var_x.sqrt() * mom.var_t.powf(0.25) * t.powf(0.25)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisSpec, DistributionSpec, FirstInterval, Reward, ThirdOrder};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn t_only(mu: f64, var: f64) -> MomentSet {
        MomentSet { mu_t: mu, mu_x: 1.0, var_t: var, var_x: 0.0, cov_xt: 0.0, third: None }
    }

    #[test]
    fn renewal_means() {
        assert_eq!(renewal_mean_elementary(0.5, 100.0).unwrap(), 200.0);
        assert!(renewal_mean_elementary(0.0, 1.0).is_err());
        assert_abs_diff_eq!(renewal_mean_refined(&t_only(0.25, 0.0625), 7.0).unwrap(), 28.0, epsilon = 1e-12);
        assert_abs_diff_eq!(renewal_mean_refined(&t_only(0.5, 1.0 / 12.0), 50.0).unwrap(), 100.0 - 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(renewal_mean_refined(&t_only(2.0, 0.0), 9.0).unwrap(), 4.5 - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_refined_mean_is_time_average_of_floor() {
        // Average of floor(t/d) over t in [T, T + d) equals T/d − 1/2 for integer T/d.
        let d = 0.8;
        let n = 80_000;
        let base = 40.0;
        let avg: f64 = (0..n).map(|k| ((base + d * (k as f64 + 0.5) / n as f64) / d).floor()).sum::<f64>() / n as f64;
        let refined = renewal_mean_refined(&t_only(d, 0.0), base + 0.5 * d).unwrap();
        assert_abs_diff_eq!(avg, refined, epsilon = 1e-4);
    }

    #[test]
    fn counting_rewards_give_classical_parameters() {
        let m = MomentSet { mu_t: 2.0, mu_x: 1.0, var_t: 3.0, var_x: 0.0, cov_xt: 0.0, third: None };
        let p = reward_params(&m).unwrap();
        assert_abs_diff_eq!(p.m_s, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.sigma_s * p.sigma_s, 3.0 / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn proportional_rewards_are_degenerate() {
        let b = BasisSpec::Direct {
            t: DistributionSpec::gamma(2.0, 1.0),
            x: Reward::Proportional(3.0),
            first: FirstInterval::Ordinary,
        };
        assert!(matches!(reward_params(&b.moments()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn normal_cdf_is_centred() {
        let p = RewardApproxParams { m_s: 1.5, sigma_s: 2.0 };
        assert_abs_diff_eq!(cumulated_rewards_cdf_normal(&p, 100.0, 150.0), 0.5, epsilon = 1e-15);
        assert!(cumulated_rewards_cdf_normal(&p, 100.0, 160.0) > 0.5);
        assert_abs_diff_eq!(p.natural(100.0, p.standardize(100.0, 123.0)), 123.0, epsilon = 1e-12);
    }

    #[test]
    fn kappa30_for_independent_exponentials() {
        // ψ(θ) = θ/(1 − θ): ψ'' = 2, ψ''' = 6.
        let m = BasisSpec::direct(DistributionSpec::exp(1.0), DistributionSpec::exp(1.0)).unwrap().moments();
        let q = edgeworth_q1(&m).unwrap();
        assert_abs_diff_eq!(q.kappa30, 6.0 / 2f64.powf(1.5), epsilon = 1e-14);
        assert_abs_diff_eq!(q.i1, 2.0 / 2f64.sqrt(), epsilon = 1e-14);
    }

    /// Root of `ln M_X(θ + cψ) + ln M_Y(−ψ) = 0` for the risk pair, i.e. the
    /// cumulant rate of the reward process.
    fn psi(theta: f64, x: DistributionSpec, y: DistributionSpec, c: f64) -> f64 {
        let g = |p: f64| x.log_mgf(theta + c * p).unwrap() + y.log_mgf(-p).unwrap();
        let dg = |p: f64| c * x.d_log_mgf(theta + c * p).unwrap() - y.d_log_mgf(-p).unwrap();
        let mut p = theta;
        for _ in 0..100 {
            let step = g(p) / dg(p);
            p -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        p
    }

    #[test]
    fn kappa30_matches_cumulant_rate_oracle() {
        let (x, y, c) = (DistributionSpec::gamma(2.0, 3.0), DistributionSpec::exp(1.0), 0.5);
        let m = BasisSpec::risk(x, y, c).unwrap().moments();
        let q = edgeworth_q1(&m).unwrap();
        // ψ''(0) = 9/4 and ψ'''(0) = 153/16 from a 40-digit evaluation of the same oracle.
        assert_abs_diff_eq!(q.kappa30, 17.0 / 6.0, epsilon = 1e-12);
        let h = 5e-4;
        let d3 = (psi(2.0 * h, x, y, c) - 2.0 * psi(h, x, y, c) + 2.0 * psi(-h, x, y, c) - psi(-2.0 * h, x, y, c))
            / (2.0 * h.powi(3));
        let sigma = reward_params(&m).unwrap().sigma_s;
        assert_abs_diff_eq!(q.kappa30, d3 / sigma.powi(3), epsilon = 1e-4);
    }

    #[test]
    fn edgeworth_requires_third_moments() {
        let mut m = BasisSpec::direct(DistributionSpec::exp(1.0), DistributionSpec::exp(1.0)).unwrap().moments();
        m.third = None;
        assert_eq!(edgeworth_q1(&m), Err(Error::MissingThirdMoments));
    }

    fn generic() -> MomentSet {
        MomentSet {
            mu_t: 1.3,
            mu_x: 0.7,
            var_t: 0.9,
            var_x: 1.4,
            cov_xt: 0.3,
            third: Some(ThirdOrder { h30: 1.1, h21: -0.2, h12: 0.4, h03: 2.2 }),
        }
    }

    proptest! {
        #[test]
        fn q1_invariant_under_reward_scaling(a in 0.05f64..20.0) {
            let m = generic();
            let q = edgeworth_q1(&m).unwrap();
            let s = edgeworth_q1(&m.scale_x(a)).unwrap();
            prop_assert!((q.kappa30 - s.kappa30).abs() < 1e-10 * (1.0 + q.kappa30.abs()));
            prop_assert!((q.i1 - s.i1).abs() < 1e-10 * (1.0 + q.i1.abs()));
        }

        #[test]
        fn q1_covariant_under_time_scaling(b in 0.05f64..20.0, u in -4.0f64..4.0) {
            let m = generic();
            let q = edgeworth_q1(&m).unwrap();
            let s = edgeworth_q1(&m.scale_t(b)).unwrap();
            prop_assert!((s.kappa30 - b.sqrt() * q.kappa30).abs() < 1e-10 * (1.0 + s.kappa30.abs()));
            prop_assert!((s.i1 - b.sqrt() * q.i1).abs() < 1e-10 * (1.0 + s.i1.abs()));
            let t: f64 = 50.0;
            let lhs = q.q1(u) / t.sqrt();
            let rhs = s.q1(u) / (b * t).sqrt();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn scaling_multiplies_centre_and_spread(a in 0.05f64..20.0) {
            let m = generic();
            let p = reward_params(&m).unwrap();
            let s = reward_params(&m.scale_x(a)).unwrap();
            prop_assert!((s.m_s - a * p.m_s).abs() < 1e-12 * a);
            prop_assert!((s.sigma_s - a * p.sigma_s).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn garbage_law() {
        assert_abs_diff_eq!(garbage_limit_pdf(0.0).unwrap(), garbage_pdf_peak(), epsilon = 1e-9);
        assert_abs_diff_eq!(garbage_pdf_peak(), 0.686, epsilon = 5e-4);
        assert_eq!(garbage_limit_cdf(0.0).unwrap(), 0.5);
        for &x in &[0.1, 0.7, 2.0] {
            let p = garbage_limit_cdf(x).unwrap();
            assert_abs_diff_eq!(p + garbage_limit_cdf(-x).unwrap(), 1.0, epsilon = 1e-14);
            // cdf' = pdf
            let h = 1e-4;
            let d = (garbage_limit_cdf(x + h).unwrap() - garbage_limit_cdf(x - h).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(d, garbage_limit_pdf(x).unwrap(), epsilon = 1e-6);
        }
        assert!(garbage_limit_cdf(20.0).unwrap() > 1.0 - 1e-12);
        let spec = QuadratureSpec::with_tol(1e-11, 1e-11);
        let mass = integrate(|y| garbage_limit_pdf(y).unwrap(), -20.0, 20.0, &spec).unwrap();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn garbage_scale_guard() {
        let m = MomentSet { mu_t: 1.0, mu_x: 1.0, var_t: 1.0, var_x: 0.0, cov_xt: 0.0, third: None };
        assert!(garbage_scale(&m, 10.0).is_err());
        let m = MomentSet { var_x: 1.0, ..m };
        assert_abs_diff_eq!(garbage_scale(&m, 1e4).unwrap(), 0.1, epsilon = 1e-15);
    }
}
