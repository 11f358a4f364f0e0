//! The basis `(T_i, X_i)`: component laws, exact moments, sampling and tilting.
//!
//! `T` drives the boundary (`N(t)` is the first `n` with `T_1 + ... + T_n > t`) and `X`
//! is summed. In the risk form `T = Y − cX`, so the components are dependent.

use rand::distr::Uniform;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};

use crate::error::{domain, Error, Result};

/// Law of a scalar component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Deterministic { value: f64 },
}

impl DistributionSpec {
    pub fn exp(rate: f64) -> Self {
        Self::Exponential { rate }
    }

    pub fn gamma(shape: f64, rate: f64) -> Self {
        Self::Gamma { shape, rate }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self::Uniform { lo, hi }
    }

    pub fn det(value: f64) -> Self {
        Self::Deterministic { value }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Self::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            Self::Uniform { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
            Self::Deterministic { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("invalid distribution {self:?}")))
        }
    }

    /// True when the law puts all mass on `(0, ∞)`.
    pub fn positive_support(&self) -> bool {
        match *self {
            Self::Exponential { .. } | Self::Gamma { .. } => true,
            Self::Uniform { lo, .. } => lo >= 0.0,
            Self::Deterministic { value } => value > 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Gamma { shape, rate } => shape / rate,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Deterministic { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / (rate * rate),
            Self::Gamma { shape, rate } => shape / (rate * rate),
            Self::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Self::Deterministic { .. } => 0.0,
        }
    }

    /// `E(Z − EZ)³`.
    pub fn third_central(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 2.0 / rate.powi(3),
            Self::Gamma { shape, rate } => 2.0 * shape / rate.powi(3),
            Self::Uniform { .. } | Self::Deterministic { .. } => 0.0,
        }
    }

    /// Central moments `E(Z − EZ)^k` for `k = 0..=3`.
    fn central(&self) -> [f64; 4] {
        [1.0, 0.0, self.variance(), self.third_central()]
    }

    /// Supremum of the `s` with finite `E e^{sZ}`.
    pub fn mgf_abscissa(&self) -> f64 {
        match *self {
            Self::Exponential { rate } | Self::Gamma { rate, .. } => rate,
            Self::Uniform { .. } | Self::Deterministic { .. } => f64::INFINITY,
        }
    }

    /// `ln E e^{sZ}`, or `None` past the abscissa.
    pub fn log_mgf(&self, s: f64) -> Option<f64> {
        match *self {
            Self::Exponential { rate } => (s < rate).then(|| (rate / (rate - s)).ln()),
            Self::Gamma { shape, rate } => (s < rate).then(|| shape * (rate / (rate - s)).ln()),
            Self::Uniform { lo, hi } => Some(if s.abs() * (hi - lo) < 1e-8 {
                s * 0.5 * (lo + hi) + s * s * (hi - lo).powi(2) / 24.0
            } else if s > 0.0 {
                // ln((e^{s hi} − e^{s lo}) / (s (hi − lo)))
                s * hi + (-(-(s * (hi - lo))).exp_m1()).ln() - (s * (hi - lo)).ln()
            } else {
                let u = s * (hi - lo);
                s * lo + (u.exp_m1() / u).ln()
            }),
            Self::Deterministic { value } => Some(s * value),
        }
    }

    /// `d/ds ln E e^{sZ}`.
    pub fn d_log_mgf(&self, s: f64) -> Option<f64> {
        match *self {
            Self::Exponential { rate } => (s < rate).then(|| 1.0 / (rate - s)),
            Self::Gamma { shape, rate } => (s < rate).then(|| shape / (rate - s)),
            Self::Uniform { lo, hi } => Some({
                let w = hi - lo;
                let u = s * w;
                if u.abs() < 1e-6 {
                    0.5 * (lo + hi) + s * w * w / 12.0
                } else if u > 0.0 {
                    lo + w / (-(-u).exp_m1()) - 1.0 / s
                } else {
                    hi + w / u.exp_m1() - 1.0 / s
                }
            }),
            Self::Deterministic { value } => Some(value),
        }
    }

    pub fn mgf(&self, s: f64) -> Option<f64> {
        self.log_mgf(s).map(f64::exp)
    }

    /// The law reweighted by `e^{sz}/E e^{sZ}`.
    pub fn tilt(&self, s: f64) -> Result<Self> {
        if s == 0.0 {
            return Ok(*self);
        }
        match *self {
            Self::Exponential { rate } if s < rate => Ok(Self::Exponential { rate: rate - s }),
            Self::Gamma { shape, rate } if s < rate => Ok(Self::Gamma { shape, rate: rate - s }),
            Self::Exponential { .. } | Self::Gamma { .. } => {
                Err(domain(format!("tilt {s} is past the mgf abscissa of {self:?}")))
            }
            Self::Deterministic { .. } => Ok(*self),
            Self::Uniform { .. } => Err(Error::Unsupported("exponential tilt of a uniform law".into())),
        }
    }

    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match *self {
            Self::Exponential { rate } => Sampler::Exp(Exp::new(rate).map_err(|e| domain(e.to_string()))?),
            Self::Gamma { shape, rate } => {
                Sampler::Gamma(Gamma::new(shape, 1.0 / rate).map_err(|e| domain(e.to_string()))?)
            }
            Self::Uniform { lo, hi } => Sampler::Uniform(Uniform::new(lo, hi).map_err(|e| domain(e.to_string()))?),
            Self::Deterministic { value } => Sampler::Det(value),
        })
    }

    /// Sampler for the stationary delay with density `P(T > s)/ET`.
    pub fn equilibrium_sampler(&self) -> Result<DelaySampler> {
        self.validate()?;
        if !self.positive_support() {
            return Err(domain("equilibrium delay needs a positive interval law"));
        }
        Ok(match *self {
            Self::Exponential { rate } => DelaySampler::Same(Sampler::Exp(Exp::new(rate).unwrap())),
            Self::Gamma { shape, rate } => {
                DelaySampler::ScaledSizeBiased(Sampler::Gamma(Gamma::new(shape + 1.0, 1.0 / rate).unwrap()))
            }
            Self::Uniform { lo, hi } => DelaySampler::UniformSizeBiased { lo2: lo * lo, span2: hi * hi - lo * lo },
            Self::Deterministic { value } => DelaySampler::ScaledSizeBiased(Sampler::Det(value)),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.sampler()?.draw(rng))
    }

    /// True for exponential and gamma laws, whose sums stay in the gamma family.
    pub fn gamma_family(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Exponential { rate } => Some((1.0, rate)),
            Self::Gamma { shape, rate } => Some((shape, rate)),
            _ => None,
        }
    }
}

/// Pre-built sampler for a [`DistributionSpec`].
#[derive(Debug, Clone)]
pub enum Sampler {
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
    Uniform(Uniform<f64>),
    Det(f64),
}

impl Sampler {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exp(d) => d.sample(rng),
            Self::Gamma(d) => d.sample(rng),
            Self::Uniform(d) => d.sample(rng),
            Self::Det(v) => *v,
        }
    }
}

/// Sampler for the first interval. The integrated-tail law is drawn as
/// `U · (size-biased draw)`.
#[derive(Debug, Clone)]
pub enum DelaySampler {
    Same(Sampler),
    ScaledSizeBiased(Sampler),
    UniformSizeBiased { lo2: f64, span2: f64 },
}

impl DelaySampler {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Same(s) => s.draw(rng),
            Self::ScaledSizeBiased(s) => rng.random::<f64>() * s.draw(rng),
            Self::UniformSizeBiased { lo2, span2 } => {
                let biased = (lo2 + rng.random::<f64>() * span2).sqrt();
                rng.random::<f64>() * biased
            }
        }
    }
}

/// The summed component in the direct form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reward {
    /// `X` independent of `T`.
    Independent(DistributionSpec),
    /// `X = a·T`.
    Proportional(f64),
}

/// Law of the first interval `T_1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FirstInterval {
    #[default]
    Ordinary,
    Modified(DistributionSpec),
    Equilibrium,
}

/// Proper (`ET > 0`), critical (`ET = 0`) or defective (`ET < 0`) summation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Proper,
    Critical,
    Defective,
}

/// The basis `(T_i, X_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisSpec {
    Direct { t: DistributionSpec, x: Reward, first: FirstInterval },
    /// `T = Y − cX`.
    Risk { x: DistributionSpec, y: DistributionSpec, c: f64 },
}

impl BasisSpec {
    pub fn direct(t: DistributionSpec, x: DistributionSpec) -> Result<Self> {
        let b = Self::Direct { t, x: Reward::Independent(x), first: FirstInterval::Ordinary };
        b.validate()?;
        Ok(b)
    }

    pub fn risk(x: DistributionSpec, y: DistributionSpec, c: f64) -> Result<Self> {
        let b = Self::Risk { x, y, c };
        b.validate()?;
        Ok(b)
    }

    /// The exponential model: `X ~ Exp(varrho)`, `Y ~ Exp(rho)`.
    pub fn exponential_risk(varrho: f64, rho: f64, c: f64) -> Result<Self> {
        Self::risk(DistributionSpec::exp(varrho), DistributionSpec::exp(rho), c)
    }

    pub fn with_first(self, first: FirstInterval) -> Result<Self> {
        match self {
            Self::Direct { t, x, .. } => {
                let b = Self::Direct { t, x, first };
                b.validate()?;
                Ok(b)
            }
            Self::Risk { .. } => Err(Error::Unsupported("first-interval modes apply to the direct form".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Direct { t, x, first } => {
                t.validate()?;
                if !t.positive_support() {
                    return Err(domain("direct form needs T supported on (0, inf)"));
                }
                match x {
                    Reward::Independent(d) => d.validate()?,
                    Reward::Proportional(a) if !a.is_finite() => return Err(domain("proportional factor must be finite")),
                    Reward::Proportional(_) => {}
                }
                if let FirstInterval::Modified(d) = first {
                    d.validate()?;
                    if !d.positive_support() {
                        return Err(domain("modified first interval must be positive"));
                    }
                }
                Ok(())
            }
            Self::Risk { x, y, c } => {
                x.validate()?;
                y.validate()?;
                if !x.positive_support() || !y.positive_support() {
                    return Err(domain("risk form needs positive X and Y"));
                }
                if !(*c >= 0.0) || !c.is_finite() {
                    return Err(domain(format!("premium must be nonnegative, got {c}")));
                }
                Ok(())
            }
        }
    }

    /// `c* = EY/EX`.
    pub fn critical_premium(&self) -> Result<f64> {
        match self {
            Self::Risk { x, y, .. } => Ok(y.mean() / x.mean()),
            Self::Direct { .. } => Err(Error::Unsupported("critical premium is defined for the risk form".into())),
        }
    }

    pub fn premium(&self) -> Option<f64> {
        match self {
            Self::Risk { c, .. } => Some(*c),
            Self::Direct { .. } => None,
        }
    }

    pub fn mean_t(&self) -> f64 {
        match self {
            Self::Direct { t, .. } => t.mean(),
            Self::Risk { x, y, c } => y.mean() - c * x.mean(),
        }
    }

    pub fn regime(&self) -> Regime {
        let m = self.mean_t();
        if m > 0.0 {
            Regime::Proper
        } else if m == 0.0 {
            Regime::Critical
        } else {
            Regime::Defective
        }
    }

    /// True when every `T_i` is positive.
    pub fn regular(&self) -> bool {
        matches!(self, Self::Direct { .. })
    }

    /// Exact moments of the stationary pair `(T, X)` (first interval excluded).
    pub fn moments(&self) -> MomentSet {
        let (mu_t, mu_x) = (self.mean_t(), self.mean_x());
        let h = |i: usize, j: usize| self.mixed_central(i, j);
        MomentSet {
            mu_t,
            mu_x,
            var_t: h(0, 2),
            var_x: h(2, 0),
            cov_xt: h(1, 1),
            third: Some(ThirdOrder { h30: h(3, 0), h21: h(2, 1), h12: h(1, 2), h03: h(0, 3) }),
        }
    }

    fn mean_x(&self) -> f64 {
        match self {
            Self::Direct { t, x, .. } => match x {
                Reward::Independent(d) => d.mean(),
                Reward::Proportional(a) => a * t.mean(),
            },
            Self::Risk { x, .. } => x.mean(),
        }
    }

    /// `E[(X − μ_X)^i (T − μ_T)^j]` for `i + j ≤ 3`.
    fn mixed_central(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i + j <= 3);
        match self {
            Self::Direct { t, x, .. } => {
                let ct = t.central();
                match x {
                    Reward::Independent(d) => d.central()[i] * ct[j],
                    Reward::Proportional(a) => a.powi(i as i32) * ct[i + j],
                }
            }
            Self::Risk { x, y, c } => {
                // T − μ_T = ỹ − c x̃.
                let (cx, cy) = (x.central(), y.central());
                (0..=j)
                    .map(|k| binom(j, k) * cy[k] * (-c).powi((j - k) as i32) * cx[i + j - k])
                    .sum()
            }
        }
    }

    pub fn compile(&self) -> Result<CompiledBasis> {
        self.validate()?;
        Ok(match *self {
            Self::Direct { t, x, first } => CompiledBasis {
                kind: Kind::Direct {
                    t: t.sampler()?,
                    x: match x {
                        Reward::Independent(d) => RewardSampler::Independent(d.sampler()?),
                        Reward::Proportional(a) => RewardSampler::Proportional(a),
                    },
                    first: match first {
                        FirstInterval::Ordinary => None,
                        FirstInterval::Modified(d) => Some(DelaySampler::Same(d.sampler()?)),
                        FirstInterval::Equilibrium => Some(t.equilibrium_sampler()?),
                    },
                },
            },
            Self::Risk { x, y, c } => CompiledBasis { kind: Kind::Risk { x: x.sampler()?, y: y.sampler()?, c } },
        })
    }

    /// One draw of a stationary pair `(t, x)`.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        Ok(self.compile()?.pair(rng))
    }

    /// The risk basis tilted by `e^{κT}`: `Y` by `κ`, `X` by `−cκ`.
    pub fn tilted(&self, kappa: f64) -> Result<Self> {
        match *self {
            Self::Risk { x, y, c } => Ok(Self::Risk { x: x.tilt(-c * kappa)?, y: y.tilt(kappa)?, c }),
            Self::Direct { .. } => Err(Error::Unsupported("tilting is implemented for the risk form".into())),
        }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    match (n, k) {
        (_, 0) => 1.0,
        (n, k) if k == n => 1.0,
        (n, 1) => n as f64,
        (3, 2) => 3.0,
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone)]
enum RewardSampler {
    Independent(Sampler),
    Proportional(f64),
}

#[derive(Debug, Clone)]
enum Kind {
    Direct { t: Sampler, x: RewardSampler, first: Option<DelaySampler> },
    Risk { x: Sampler, y: Sampler, c: f64 },
}

/// Sampling form of a [`BasisSpec`].
#[derive(Debug, Clone)]
pub struct CompiledBasis {
    kind: Kind,
}

impl CompiledBasis {
    #[inline]
    pub fn pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match &self.kind {
            Kind::Direct { t, x, .. } => {
                let tv = t.draw(rng);
                (tv, Self::reward(x, tv, rng))
            }
            Kind::Risk { x, y, c } => {
                let xv = x.draw(rng);
                let yv = y.draw(rng);
                (yv - c * xv, xv)
            }
        }
    }

    /// The pair at index 1, honouring the first-interval mode.
    #[inline]
    pub fn first_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match &self.kind {
            Kind::Direct { x, first: Some(f), .. } => {
                let tv = f.draw(rng);
                (tv, Self::reward(x, tv, rng))
            }
            _ => self.pair(rng),
        }
    }

    #[inline]
    fn reward<R: Rng + ?Sized>(x: &RewardSampler, tv: f64, rng: &mut R) -> f64 {
        match x {
            RewardSampler::Independent(s) => s.draw(rng),
            RewardSampler::Proportional(a) => a * tv,
        }
    }
}

/// Third-order mixed central moments `h^{i,j} = E[(X − μ_X)^i (T − μ_T)^j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThirdOrder {
    pub h30: f64,
    pub h21: f64,
    pub h12: f64,
    pub h03: f64,
}

/// Scalar moments consumed by the approximation formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub mu_t: f64,
    pub mu_x: f64,
    pub var_t: f64,
    pub var_x: f64,
    pub cov_xt: f64,
    pub third: Option<ThirdOrder>,
}

impl MomentSet {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.mu_t, self.mu_x, self.var_t, self.var_x, self.cov_xt];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(domain("moments must be finite"));
        }
        if self.var_t < 0.0 || self.var_x < 0.0 {
            return Err(domain("variances must be nonnegative"));
        }
        let bound = (self.var_x * self.var_t).sqrt();
        if self.cov_xt.abs() > bound * (1.0 + 1e-12) + 1e-300 {
            return Err(domain(format!("|cov| = {} exceeds sqrt(var_x var_t) = {bound}", self.cov_xt.abs())));
        }
        Ok(())
    }

    /// `h^{i,j}` for `i + j ≤ 3`.
    pub fn h(&self, i: usize, j: usize) -> Option<f64> {
        match (i, j) {
            (0, 0) => Some(1.0),
            (1, 0) | (0, 1) => Some(0.0),
            (2, 0) => Some(self.var_x),
            (0, 2) => Some(self.var_t),
            (1, 1) => Some(self.cov_xt),
            (3, 0) => self.third.map(|h| h.h30),
            (2, 1) => self.third.map(|h| h.h21),
            (1, 2) => self.third.map(|h| h.h12),
            (0, 3) => self.third.map(|h| h.h03),
            _ => None,
        }
    }

    /// Moments of `(T, aX)`.
    pub fn scale_x(&self, a: f64) -> Self {
        Self {
            mu_x: a * self.mu_x,
            var_x: a * a * self.var_x,
            cov_xt: a * self.cov_xt,
            third: self.third.map(|h| ThirdOrder {
                h30: a.powi(3) * h.h30,
                h21: a * a * h.h21,
                h12: a * h.h12,
                h03: h.h03,
            }),
            ..*self
        }
    }

    /// Moments of `(bT, X)`.
    pub fn scale_t(&self, b: f64) -> Self {
        Self {
            mu_t: b * self.mu_t,
            var_t: b * b * self.var_t,
            cov_xt: b * self.cov_xt,
            third: self.third.map(|h| ThirdOrder {
                h30: h.h30,
                h21: b * h.h21,
                h12: b * b * h.h12,
                h03: b.powi(3) * h.h03,
            }),
            ..*self
        }
    }
}
