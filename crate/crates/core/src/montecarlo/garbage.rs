use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::{run_indexed, SimConfig};
use crate::basis::{BasisSpec, CompiledBasis, FirstInterval, Reward};
use crate::error::{Error, Result};
use crate::renewal::{garbage_scale, renewal_mean_refined};

/// Draws the scaled garbage term
/// `μ_T^{3/4}/(σ_X σ_T^{1/2} t^{1/4}) · (S_{N_sup(t)} − S_{⌊E N_sup(t)⌋})`
/// with summands centred at `μ_X`.
///
/// `⌊E N_sup(t)⌋` comes from the refined renewal expansion. With gamma-family
/// intervals, ordinary first interval and independent gamma-family rewards no
/// summand is generated one by one: `N_sup(t)` is located by bisection on gamma
/// bridges and the reward sum between the two indices is a single gamma draw.
/// Other bases are stepped.
pub fn simulate_garbage(b: &BasisSpec, t: f64, cfg: &SimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let BasisSpec::Direct { t: tdist, x, first } = *b else {
        return Err(Error::Unsupported("garbage sampling needs positive intervals (direct form)".into()));
    };
    let mom = b.moments();
    let scale = garbage_scale(&mom, t)?;
    let m = renewal_mean_refined(&mom, t)?.floor().max(0.0) as u64;
    let mu_x = mom.mu_x;
    let fast_t = match first {
        FirstInterval::Ordinary => tdist.gamma_family(),
        _ => None,
    };
    let fast_x = match x {
        Reward::Independent(d) => d.gamma_family(),
        Reward::Proportional(_) => None,
    };
    let compiled = b.compile()?;
    let draw = |_: u64, rng: &mut ChaCha8Rng| -> f64 {
        let g = match (fast_t, fast_x) {
            (Some((k, beta)), Some((kx, bx))) => {
                let n = n_sup_by_bridges(k, beta, t, &mom, rng);
                let gap = n.abs_diff(m);
                let sum = if gap == 0 { 0.0 } else { gamma(gap as f64 * kx, bx, rng) - gap as f64 * mu_x };
                if n >= m {
                    sum
                } else {
                    -sum
                }
            }
            _ => stepped(&compiled, t, m, mu_x, rng),
        };
        scale * g
    };
    run_indexed(cfg.n_paths, cfg.seed, cfg.workers, draw)
}

#[inline]
fn gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng)
}

/// `max{n : V_n ≤ t}` for `T ~ Gamma(k, β)`, drawn exactly through the
/// conditional laws `V_mid | V_lo, V_hi` (scaled beta).
fn n_sup_by_bridges<R: Rng + ?Sized>(k: f64, beta: f64, t: f64, mom: &crate::basis::MomentSet, rng: &mut R) -> u64 {
    let mean = t / mom.mu_t;
    let sd = (t * mom.var_t / mom.mu_t.powi(3)).sqrt();
    let (mut lo, mut v_lo) = (0u64, 0.0f64);
    let mut hi = (mean + 6.0 * sd + 2.0).ceil() as u64;
    let mut v_hi;
    loop {
        v_hi = v_lo + gamma((hi - lo) as f64 * k, beta, rng);
        if v_hi > t {
            break;
        }
        let step = (hi - lo).max(1) * 2;
        lo = hi;
        v_lo = v_hi;
        hi = lo + step;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let a = gamma((mid - lo) as f64 * k, 1.0, rng);
        let c = gamma((hi - mid) as f64 * k, 1.0, rng);
        let v_mid = v_lo + (v_hi - v_lo) * (a / (a + c));
        if v_mid <= t {
            lo = mid;
            v_lo = v_mid;
        } else {
            hi = mid;
            v_hi = v_mid;
        }
    }
    lo
}

/// Steps the basis until both `V_n > t` and `n ≥ m`, recording the centred
/// reward sums at `N_sup(t)` and at `m`.
fn stepped<R: Rng + ?Sized>(b: &CompiledBasis, t: f64, m: u64, mu_x: f64, rng: &mut R) -> f64 {
    let (mut v, mut s) = (0.0f64, 0.0f64);
    let (mut s_n, mut s_m) = (None, if m == 0 { Some(0.0) } else { None });
    let mut n = 0u64;
    while s_n.is_none() || s_m.is_none() {
        let (dt, dx) = if n == 0 { b.first_pair(rng) } else { b.pair(rng) };
        if s_n.is_none() && v + dt > t {
            s_n = Some(s);
        }
        n += 1;
        v += dt;
        s += dx - mu_x;
        if n == m {
            s_m = Some(s);
        }
    }
    s_n.unwrap() - s_m.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::DistributionSpec;
    use crate::montecarlo::{ks_distance, simulate, EmpiricalCdf};
    use crate::renewal::garbage_limit_cdf;
    use rand::SeedableRng;

    #[test]
    fn bridge_count_matches_poisson_law() {
        // For Exp(1) intervals N_sup(t) ~ Poisson(t).
        let b = BasisSpec::direct(DistributionSpec::exp(1.0), DistributionSpec::exp(1.0)).unwrap();
        let mom = b.moments();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40_000;
        let t = 50.0;
        let draws: Vec<f64> = (0..n).map(|_| n_sup_by_bridges(1.0, 1.0, t, &mom, &mut rng) as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - t).abs() < 4.0 * (t / n as f64).sqrt());
        assert!((var / t - 1.0).abs() < 0.05);
    }

    #[test]
    fn bridge_count_matches_stepping_for_gamma_intervals() {
        let b = BasisSpec::direct(DistributionSpec::gamma(2.5, 1.5), DistributionSpec::exp(1.0)).unwrap();
        let mom = b.moments();
        let cfg = SimConfig { n_paths: 30_000, seed: 5, workers: 1, ..SimConfig::default() };
        let stepped = simulate(&b.pair_model().unwrap(), 40.0, &cfg).unwrap();
        let e = EmpiricalCdf::new(stepped.iter().map(|o| o.n_sup().unwrap() as f64)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bridged = EmpiricalCdf::new((0..30_000).map(|_| n_sup_by_bridges(2.5, 1.5, 40.0, &mom, &mut rng) as f64)).unwrap();
        let d = ks_distance(&e, &bridged);
        // Two-sample KS at 99.9%.
        assert!(d < 1.95 * (2.0 / 30_000f64).sqrt(), "{d}");
    }

    #[test]
    fn fast_and_stepped_garbage_agree() {
        let b = BasisSpec::direct(DistributionSpec::exp(1.0), DistributionSpec::gamma(2.0, 2.0)).unwrap();
        let cfg = SimConfig { n_paths: 20_000, seed: 9, workers: 1, ..SimConfig::default() };
        let fast = EmpiricalCdf::new(simulate_garbage(&b, 400.0, &cfg).unwrap()).unwrap();
        let compiled = b.compile().unwrap();
        let mom = b.moments();
        let scale = garbage_scale(&mom, 400.0).unwrap();
        let m = renewal_mean_refined(&mom, 400.0).unwrap().floor() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let slow = EmpiricalCdf::new((0..20_000).map(|_| scale * stepped(&compiled, 400.0, m, mom.mu_x, &mut rng))).unwrap();
        let d = ks_distance(&fast, &slow);
        assert!(d < 1.95 * (2.0 / 20_000f64).sqrt(), "{d}");
    }

    #[test]
    fn garbage_approaches_limit_law() {
        let b = BasisSpec::direct(DistributionSpec::exp(1.0), DistributionSpec::exp(1.0)).unwrap();
        let cfg = SimConfig { n_paths: 20_000, seed: 3, workers: 1, ..SimConfig::default() };
        let e = EmpiricalCdf::new(simulate_garbage(&b, 1e5, &cfg).unwrap()).unwrap();
        let grid = e.quantile_grid(200);
        let (_, hi) = crate::montecarlo::sup_distance_bounds(&e, |x| if x.is_infinite() { 1.0 } else { garbage_limit_cdf(x).unwrap() }, &grid).unwrap();
        assert!(hi < 0.08, "{hi}");
    }

    #[test]
    fn degenerate_rewards_rejected() {
        let b = BasisSpec::direct(DistributionSpec::exp(1.0), DistributionSpec::det(1.0)).unwrap();
        assert!(simulate_garbage(&b, 10.0, &SimConfig::new(10, 0)).is_err());
        let r = BasisSpec::exponential_risk(2.0, 1.0, 1.0).unwrap();
        assert!(simulate_garbage(&r, 10.0, &SimConfig::new(10, 0)).is_err());
    }
}
