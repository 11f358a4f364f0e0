//! Approximations for the risk model `T = Y − cX`: normal (proper side), Lundberg
//! exponent, Cramér constant and quasi-normal law (defective side), and the
//! inverse-Gaussian approximation that spans the critical premium.

use log::warn;
use rand_chacha::ChaCha8Rng;
use statrs::function::beta::beta_reg;

use crate::basis::{BasisSpec, DistributionSpec, MomentSet, Regime};
use crate::error::{domain, Error, Result};
use crate::montecarlo::run_indexed;
use crate::renewal::ratio_variance;
use crate::special::{normal_cdf, scaled_normal_tail};

/// Residual allowed in `E e^{κT} = 1`.
const LUNDBERG_RESIDUAL: f64 = 1e-10;

/// Relative standard error of a Monte Carlo Cramér constant that triggers a warning.
const CRAMER_WARN_RSE: f64 = 0.02;

/// `m_▽ = μ_X/μ_T`, `D_▽² = E(μ_T X − μ_X T)²/μ_T³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalApproxParams {
    pub m_down: f64,
    pub d_down_sq: f64,
}

/// Lundberg exponent, Cramér constant and the associated centre and spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiNormalParams {
    pub kappa: f64,
    pub cramer_c: f64,
    pub m_up: f64,
    pub d_up_sq: f64,
}

fn risk_parts(b: &BasisSpec) -> Result<(DistributionSpec, DistributionSpec, f64)> {
    match *b {
        BasisSpec::Risk { x, y, c } => Ok((x, y, c)),
        BasisSpec::Direct { .. } => Err(Error::Unsupported("the risk form T = Y - cX is required".into())),
    }
}

fn centre_and_spread(mom: &MomentSet) -> Result<(f64, f64)> {
    let (d2, _) = ratio_variance(mom);
    if !(d2 > 0.0) {
        return Err(Error::Degenerate(format!("variance constant {d2} is not positive")));
    }
    Ok((mom.mu_x / mom.mu_t, d2))
}

/// Normal-approximation constants for the proper regime.
pub fn normal_params(b: &BasisSpec) -> Result<NormalApproxParams> {
    if b.regime() != Regime::Proper {
        return Err(Error::Regime("normal approximation needs E T > 0 (c < c*)".into()));
    }
    let (m_down, d_down_sq) = centre_and_spread(&b.moments())?;
    Ok(NormalApproxParams { m_down, d_down_sq })
}

/// Closed forms for exponential components with `r = varrho/(c rho) > 1`:
/// `m_▽ = −1/(c(1 − r))`, `D_▽² = −2r/(c² rho (1 − r)³)`.
pub fn normal_params_exponential(varrho: f64, rho: f64, c: f64) -> Result<NormalApproxParams> {
    let r = varrho / (c * rho);
    if !(r > 1.0) {
        return Err(Error::Regime("closed forms need c < c*".into()));
    }
    Ok(NormalApproxParams {
        m_down: -1.0 / (c * (1.0 - r)),
        d_down_sq: -2.0 * r / (c * c * rho * (1.0 - r).powi(3)),
    })
}

/// `Φ((x − m_▽ t)/(D_▽ √t))` at level `t`.
pub fn proper_cdf_normal(p: &NormalApproxParams, level: f64, x: f64) -> f64 {
    normal_cdf((x - p.m_down * level) / (p.d_down_sq * level).sqrt())
}

/// `g(s) = ln E e^{sT} = ln M_Y(s) + ln M_X(−cs)` and its derivative.
fn lundberg_g(x: &DistributionSpec, y: &DistributionSpec, c: f64, s: f64) -> Option<(f64, f64)> {
    let g = y.log_mgf(s)? + x.log_mgf(-c * s)?;
    let dg = y.d_log_mgf(s)? - c * x.d_log_mgf(-c * s)?;
    Some((g, dg))
}

/// Positive root `κ` of `E e^{κT} = 1`.
///
/// `g(s) = ln E e^{sT}` is convex with `g(0) = 0` and `g'(0) = E T < 0`, so `g < 0`
/// on `(0, κ)`. A point with `g > 0` is bracketed, then Newton steps run from the
/// right end, falling back to bisection when a step leaves the bracket.
pub fn lundberg_exponent(b: &BasisSpec) -> Result<f64> {
    let (x, y, c) = risk_parts(b)?;
    if b.regime() != Regime::Defective {
        return Err(Error::Regime("no positive Lundberg root for c <= c*".into()));
    }
    let abscissa = y.mgf_abscissa();
    let eval = |s: f64| lundberg_g(&x, &y, c, s);
    let mut hi = if abscissa.is_finite() { 0.5 * abscissa } else { 1.0 };
    let mut found = false;
    for k in 0..200 {
        match eval(hi) {
            Some((g, _)) if g > 0.0 => {
                found = true;
                break;
            }
            Some(_) => {
                hi = if abscissa.is_finite() { abscissa * (1.0 - 0.5f64.powi(k + 2)) } else { 2.0 * hi };
            }
            None => return Err(domain("moment generating function diverged while bracketing")),
        }
        if abscissa.is_finite() && hi >= abscissa {
            break;
        }
    }
    if !found {
        return Err(domain("moment generating function diverges before E e^{sT} reaches 1"));
    }
    let mut lo = 0.0;
    let mut s = hi;
    for _ in 0..200 {
        let (g, dg) = eval(s).ok_or_else(|| domain("mgf evaluation failed inside the bracket"))?;
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let newton = s - g / dg;
        let next = if dg > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - s).abs() <= 1e-15 * s || hi - lo <= 1e-16 * hi {
            s = next;
            break;
        }
        s = next;
    }
    let (g, _) = eval(s).ok_or_else(|| domain("mgf evaluation failed at the root"))?;
    if g.exp_m1().abs() > LUNDBERG_RESIDUAL {
        return Err(Error::Accuracy { what: "Lundberg exponent".into(), estimate: s });
    }
    Ok(s)
}

/// The pair reweighted by `e^{κT}`; for exponential components
/// `Ŷ ~ Exp(rho − κ)`, `X̂ ~ Exp(varrho + cκ)`.
pub fn associated_basis(b: &BasisSpec, kappa: f64) -> Result<BasisSpec> {
    let (_, y, _) = risk_parts(b)?;
    if kappa >= y.mgf_abscissa() {
        return Err(domain(format!("tilt {kappa} is at or past the mgf abscissa of Y")));
    }
    b.tilted(kappa)
}

/// How the Cramér constant is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CramerMethod {
    /// Closed form if available, else the exact series, else Monte Carlo.
    Auto,
    /// `ℂ = varrho/(c rho)` for exponential components.
    ClosedForm,
    /// Spitzer sums with each `P{V_n > 0}` from the incomplete beta function
    /// (gamma-family components only).
    SpitzerSeries,
    /// Spitzer sums estimated by simulation up to `n_max`, plus a geometric tail.
    SpitzerMonteCarlo { n_max: usize, n_paths: usize, seed: u64, workers: usize },
}

impl CramerMethod {
    pub fn monte_carlo(seed: u64) -> Self {
        Self::SpitzerMonteCarlo { n_max: 200, n_paths: 100_000, seed, workers: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CramerEstimate {
    pub value: f64,
    /// Zero for deterministic routes.
    pub std_error: f64,
    /// Estimated contribution of the truncated tail of the two Spitzer sums.
    pub tail: f64,
}

fn exponential_rates(b: &BasisSpec) -> Option<(f64, f64, f64)> {
    match *b {
        BasisSpec::Risk { x: DistributionSpec::Exponential { rate: v }, y: DistributionSpec::Exponential { rate: r }, c } => {
            Some((v, r, c))
        }
        _ => None,
    }
}

/// `ℂ = (κ μ_T̂)^{−1} exp{−Σ n^{−1} P{V_n > 0} − Σ n^{−1} P{V̂_n ≤ 0}}`.
pub fn cramer_constant(b: &BasisSpec, kappa: f64, method: CramerMethod) -> Result<CramerEstimate> {
    let (x, y, c) = risk_parts(b)?;
    if b.regime() != Regime::Defective {
        return Err(Error::Regime("Cramér constant needs c > c*".into()));
    }
    let tilted = associated_basis(b, kappa)?;
    let mu_hat = tilted.mean_t();
    if !(mu_hat > 0.0) {
        return Err(Error::Consistency(format!("associated mean {mu_hat} is not positive")));
    }
    let prefactor = 1.0 / (kappa * mu_hat);
    let series_ok = x.gamma_family().is_some() && y.gamma_family().is_some() && c > 0.0;
    let method = match method {
        CramerMethod::Auto if exponential_rates(b).is_some() => CramerMethod::ClosedForm,
        CramerMethod::Auto if series_ok => CramerMethod::SpitzerSeries,
        CramerMethod::Auto => CramerMethod::monte_carlo(0),
        m => m,
    };
    match method {
        CramerMethod::ClosedForm => {
            let (v, r, c) = exponential_rates(b).ok_or_else(|| Error::Unsupported("closed form needs exponential X and Y".into()))?;
            Ok(CramerEstimate { value: v / (c * r), std_error: 0.0, tail: 0.0 })
        }
        CramerMethod::SpitzerSeries => {
            if !series_ok {
                return Err(Error::Unsupported("the exact Spitzer series needs gamma-family X and Y".into()));
            }
            let (xt, yt, _) = risk_parts(&tilted)?;
            let up = spitzer_series(&x, &y, c, false)?;
            let down = spitzer_series(&xt, &yt, c, true)?;
            Ok(CramerEstimate { value: prefactor * (-(up + down)).exp(), std_error: 0.0, tail: 0.0 })
        }
        CramerMethod::SpitzerMonteCarlo { n_max, n_paths, seed, workers } => {
            let est = spitzer_monte_carlo(b, &tilted, n_max, n_paths, seed, workers)?;
            let value = prefactor * (-est.sum).exp();
            let std_error = value * est.std_error;
            if std_error > CRAMER_WARN_RSE * value {
                warn!("Spitzer estimate of the Cramér constant is noisy: {value} ± {std_error}");
            }
            Ok(CramerEstimate { value, std_error, tail: est.tail })
        }
        CramerMethod::Auto => unreachable!(),
    }
}

/// `Σ_n n^{−1} P{V_n > 0}` (or `P{V_n ≤ 0}` when `lower`) for gamma-family `X`, `Y`:
/// with `A ~ Gamma(n k_Y, rho)` and `B = cΣX ~ Gamma(n k_X, varrho/c)`,
/// `P{A > B} = 1 − I_{a/(a+b)}(n k_Y, n k_X)`.
fn spitzer_series(x: &DistributionSpec, y: &DistributionSpec, c: f64, lower: bool) -> Result<f64> {
    let (kx, vx) = x.gamma_family().expect("checked by caller");
    let (ky, ry) = y.gamma_family().expect("checked by caller");
    let (a, b) = (ry, vx / c);
    let w = a / (a + b);
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for n in 1..=2_000_000usize {
        let nf = n as f64;
        let below = beta_reg(nf * ky, nf * kx, w);
        let p = if lower { below } else { 1.0 - below };
        let term = p / nf;
        sum += term;
        if n > 10 && term < 1e-17 * sum.max(1e-300) {
            return Ok(sum);
        }
        if n > 10 && p > 0.0 && p < prev && prev.is_finite() {
            // Geometric tail bound once the terms decay fast enough.
            let q = p / prev;
            let tail = term * q / (1.0 - q);
            if q < 0.999 && tail < 1e-15 * sum {
                return Ok(sum + tail);
            }
        }
        prev = p;
    }
    Err(Error::Accuracy { what: "Spitzer series".into(), estimate: sum })
}

struct SpitzerMc {
    sum: f64,
    std_error: f64,
    tail: f64,
}

/// Width of the windows used to fit the geometric tail.
const TAIL_WINDOW: usize = 10;

fn spitzer_monte_carlo(
    b: &BasisSpec,
    tilted: &BasisSpec,
    n_max: usize,
    n_paths: usize,
    seed: u64,
    workers: usize,
) -> Result<SpitzerMc> {
    if n_max < 4 * TAIL_WINDOW || n_paths < 2 {
        return Err(domain("Spitzer Monte Carlo needs n_max >= 40 and at least two paths"));
    }
    let orig = b.compile()?;
    let hat = tilted.compile()?;
    let mid = n_max / 2;
    // Per path: the two partial sums and hit counts in the tail-fit windows.
    let per_path = run_indexed(n_paths, seed, workers, |_, rng: &mut ChaCha8Rng| {
        let (mut v, mut w) = (0.0f64, 0.0f64);
        let mut z = 0.0;
        let mut hits = [0u32; 4];
        for n in 1..=n_max {
            v += orig.pair(rng).0;
            w += hat.pair(rng).0;
            let up = v > 0.0;
            let down = w <= 0.0;
            let inv = 1.0 / n as f64;
            z += if up { inv } else { 0.0 } + if down { inv } else { 0.0 };
            let slot = if n > mid - TAIL_WINDOW && n <= mid {
                Some(0)
            } else if n > n_max - TAIL_WINDOW {
                Some(2)
            } else {
                None
            };
            if let Some(k) = slot {
                hits[k] += up as u32;
                hits[k + 1] += down as u32;
            }
        }
        (z, hits)
    })?;
    let np = n_paths as f64;
    let mean = per_path.iter().map(|p| p.0).sum::<f64>() / np;
    let var = per_path.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (np - 1.0);
    let mut totals = [0u64; 4];
    for (_, h) in &per_path {
        for k in 0..4 {
            totals[k] += h[k] as u64;
        }
    }
    let denom = np * TAIL_WINDOW as f64;
    let mut tail = 0.0;
    for walk in 0..2 {
        let p_mid = totals[walk] as f64 / denom;
        let p_end = totals[walk + 2] as f64 / denom;
        if p_end == 0.0 {
            continue;
        }
        let q = (p_end / p_mid).powf(1.0 / (n_max - mid) as f64);
        if !(q < 1.0) {
            warn!("Spitzer summands show no geometric decay by n = {n_max}; tail left out");
            continue;
        }
        tail += p_end * q / ((n_max + 1) as f64 * (1.0 - q));
    }
    Ok(SpitzerMc { sum: mean + tail, std_error: (var / np).sqrt(), tail })
}

/// Quasi-normal constants. Exponential components use the closed forms; other
/// bases use the associated moments and `method` for `ℂ`.
pub fn quasi_normal_params(b: &BasisSpec, method: CramerMethod) -> Result<QuasiNormalParams> {
    if let (Some((v, r, c)), CramerMethod::Auto | CramerMethod::ClosedForm) = (exponential_rates(b), method) {
        return quasi_normal_params_exponential(v, r, c);
    }
    quasi_normal_params_associated(b, method)
}

/// Route through the associated pair: `m_△ = μ_X̂/μ_T̂`, `D_△² = E(μ_T̂ X̂ − μ_X̂ T̂)²/μ_T̂³`.
pub fn quasi_normal_params_associated(b: &BasisSpec, method: CramerMethod) -> Result<QuasiNormalParams> {
    let kappa = lundberg_exponent(b)?;
    let tilted = associated_basis(b, kappa)?;
    let (m_up, d_up_sq) = centre_and_spread(&tilted.moments())?;
    let cramer_c = cramer_constant(b, kappa, method)?.value;
    Ok(QuasiNormalParams { kappa, cramer_c, m_up, d_up_sq })
}

/// Closed forms for exponential components, `r = varrho/(c rho) < 1`:
/// `κ = rho(1 − r)`, `ℂ = r`, `m_△ = r/(c(1 − r))`, `D_△² = 2r/(c² rho (1 − r)³)`.
pub fn quasi_normal_params_exponential(varrho: f64, rho: f64, c: f64) -> Result<QuasiNormalParams> {
    let r = varrho / (c * rho);
    if !(r < 1.0) {
        return Err(Error::Regime("quasi-normal approximation needs c > c*".into()));
    }
    Ok(QuasiNormalParams {
        kappa: rho * (1.0 - r),
        cramer_c: r,
        m_up: r / (c * (1.0 - r)),
        d_up_sq: 2.0 * r / (c * c * rho * (1.0 - r).powi(3)),
    })
}

/// `ℂ e^{−κt} Φ((x − m_△ t)/(D_△ √t))`.
pub fn quasi_normal_cdf(p: &QuasiNormalParams, level: f64, x: f64) -> f64 {
    p.cramer_c * (-p.kappa * level).exp() * normal_cdf((x - p.m_up * level) / (p.d_up_sq * level).sqrt())
}

/// Walk level below which a defective path may be abandoned: from there the chance
/// of ever exceeding `level` is at most `e^{−κ(level − floor)} = eps`.
pub fn lundberg_floor(kappa: f64, level: f64, eps: f64) -> f64 {
    level - (1.0 / eps).ln() / kappa
}

/// Inverse-Gaussian constants: `M = EX/EY`, `D² = ((EX)² DY + (EY)² DX)/(EY)³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGaussianParams {
    pub m: f64,
    pub d_sq: f64,
    pub c: f64,
    pub level: f64,
}

impl InverseGaussianParams {
    pub fn from_basis(b: &BasisSpec, level: f64) -> Result<Self> {
        let (x, y, c) = risk_parts(b)?;
        if !(level > 0.0) || !(c > 0.0) {
            return Err(domain("level and premium must be positive"));
        }
        let (ex, ey) = (x.mean(), y.mean());
        let d_sq = (ex * ex * y.variance() + ey * ey * x.variance()) / ey.powi(3);
        if !(d_sq > 0.0) {
            return Err(Error::Degenerate("D^2 = 0 for deterministic components".into()));
        }
        Ok(Self { m: ex / ey, d_sq, c, level })
    }

    /// `λ = t/(c² D²)`.
    pub fn lambda(&self) -> f64 {
        self.level / (self.c * self.c * self.d_sq)
    }

    /// `|1 − cM|`; zero exactly at the critical premium.
    pub fn inv_mu(&self) -> f64 {
        (1.0 - self.c * self.m).abs()
    }

    /// True on the defective side `c > c*`.
    pub fn defective(&self) -> bool {
        self.c * self.m > 1.0
    }
}

/// `P{S ≤ x}` by the inverse-Gaussian approximation with `z = cx/t`.
///
/// For `c ≤ c*`: `F(z + 1; μ, λ) − F(1; μ, λ)` with `1/μ = 1 − cM`.
/// For `c > c*`: `exp(−2λ/μ̂)(F(z + 1; μ̂, λ) − F(1; μ̂, λ))` with `1/μ̂ = cM − 1`,
/// expanded so that the exponential factor multiplies only bounded terms.
pub fn inverse_gaussian_cdf_approx(p: &InverseGaussianParams, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(domain(format!("x must be positive, got {x}")));
    }
    let lambda = p.lambda();
    let nu = p.inv_mu();
    let z1 = p.c * x / p.level + 1.0;
    let (a1, a0) = ((lambda / z1).sqrt(), lambda.sqrt());
    let value = if p.defective() {
        let damp = (-2.0 * lambda * nu).exp();
        damp * (normal_cdf(a1 * (z1 * nu - 1.0)) - normal_cdf(a0 * (nu - 1.0)))
            + (normal_cdf(-a1 * (z1 * nu + 1.0)) - normal_cdf(-a0 * (nu + 1.0)))
    } else {
        let e = 2.0 * lambda * nu;
        (normal_cdf(a1 * (z1 * nu - 1.0)) - normal_cdf(a0 * (nu - 1.0)))
            + (scaled_normal_tail(e, a1 * (z1 * nu + 1.0)) - scaled_normal_tail(e, a0 * (nu + 1.0)))
    };
    Ok(value.clamp(0.0, 1.0))
}
