use std::path::{Path, PathBuf};

use compsum::basis::{BasisSpec, DistributionSpec, MomentSet, Regime};
use compsum::exact::{exact_cdf, ExpModel};
use compsum::modular::{extract_blocks, modular_clt_params, stationary_distribution, BlockConfig, DET_Q_FLOOR};
use compsum::montecarlo::{simulate as run_paths, simulate_garbage, write_outcomes_csv, EmpiricalCdf, SimConfig, SimSummary};
use compsum::renewal::{
    cumulated_rewards_cdf_edgeworth, cumulated_rewards_cdf_normal, edgeworth_q1, garbage_limit_cdf, garbage_limit_pdf,
    renewal_mean_elementary, renewal_mean_refined, reward_params,
};
use compsum::ruin::{
    inverse_gaussian_cdf_approx, lundberg_exponent, lundberg_floor, normal_params, proper_cdf_normal, quasi_normal_cdf,
    quasi_normal_params, CramerMethod, InverseGaussianParams,
};
use log::{info, warn};

use crate::config::{parse_f64, Config, Model};
use crate::error::{CliError, Result};
use crate::output::{open_raw, Stamp, Table};
use crate::{Common, Method, SweepMethod};

const DEFAULT_LEVEL: f64 = 10.0;
const DEFAULT_HORIZON: f64 = 200.0;
/// Paths below the Lundberg floor cross later with probability at most this.
const FLOOR_EPS: f64 = 1e-12;

struct Ctx {
    cfg: Config,
    level: f64,
    horizons: Vec<f64>,
    sim: SimConfig,
    out: Option<PathBuf>,
}

impl Ctx {
    fn new(c: &Common) -> Result<Self> {
        let cfg = Config::load(&c.config)?;
        let level = match c.level {
            Some(v) => v,
            None => cfg.number("level")?.unwrap_or(DEFAULT_LEVEL),
        };
        if level <= 0.0 {
            return Err(CliError::Usage(format!("level must be positive, got {level}")));
        }
        let horizons = match &c.horizon {
            Some(s) => parse_grid(s)?,
            None => vec![cfg.number("horizon")?.unwrap_or(DEFAULT_HORIZON)],
        };
        let mut sim = SimConfig { n_paths: c.paths as usize, seed: c.seed, step_cap: c.cap, ..SimConfig::default() };
        if let Some(w) = c.workers {
            sim.workers = w as usize;
        }
        sim.validate()?;
        Ok(Self { cfg, level, horizons, sim, out: c.out.clone() })
    }

    fn stamp(&self, command: &str) -> Stamp {
        Stamp { command: command.into(), config_hash: self.cfg.hash.clone(), seed: self.sim.seed }
    }

    fn basis(&self) -> Result<BasisSpec> {
        match &self.cfg.model {
            Model::Basis(b) => Ok(*b),
            _ => Err(CliError::Usage("this command needs a risk or direct model".into())),
        }
    }

    fn moments(&self) -> Result<MomentSet> {
        match &self.cfg.model {
            Model::Basis(b) => Ok(b.moments()),
            Model::Moments(m) => Ok(*m),
            Model::Markov(_) => Err(CliError::Usage("this command needs a basis or moments model".into())),
        }
    }
}

/// A single value or `lo:hi:n` with `n ≥ 2` equally spaced points.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Usage(format!("expected a number or `lo:hi:n`, got `{s}`"));
    match parts.as_slice() {
        [v] => Ok(vec![parse_f64(v).ok_or_else(bad)?]),
        [lo, hi, n] => {
            let (lo, hi) = (parse_f64(lo).ok_or_else(bad)?, parse_f64(hi).ok_or_else(bad)?);
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if lo >= hi || n < 2 {
                return Err(CliError::Usage(format!("grid `{s}` needs lo < hi and n >= 2")));
            }
            let h = (hi - lo) / (n - 1) as f64;
            Ok((0..n).map(|k| if k == n - 1 { hi } else { lo + h * k as f64 }).collect())
        }
        _ => Err(bad()),
    }
}

fn exp_model(b: &BasisSpec, level: f64) -> Result<ExpModel> {
    match *b {
        BasisSpec::Risk { x: DistributionSpec::Exponential { rate: v }, y: DistributionSpec::Exponential { rate: r }, c } => {
            Ok(ExpModel::new(v, r, c, level)?)
        }
        _ => Err(CliError::Usage("the exact formula needs a risk model with exponential X and Y".into())),
    }
}

fn with_premium(b: &BasisSpec, c: f64) -> Result<BasisSpec> {
    match *b {
        BasisSpec::Risk { x, y, .. } => Ok(BasisSpec::risk(x, y, c)?),
        _ => Err(CliError::Usage("a premium sweep needs a risk model".into())),
    }
}

pub fn exact(c: &Common) -> Result<()> {
    let ctx = Ctx::new(c)?;
    let m = exp_model(&ctx.basis()?, ctx.level)?;
    let mut t = Table::create(ctx.out.as_deref(), &ctx.stamp("exact"), &["x", "exact"])?;
    for &x in &ctx.horizons {
        t.row(&[Some(x), Some(exact_cdf(&m, x)?)])?;
    }
    t.finish()
}

/// One approximation at `x`; `mom` is used by the renewal-type methods.
fn approx_value(method: Method, model: &Model, mom: &MomentSet, level: f64, x: f64) -> Result<f64> {
    Ok(match (method, model) {
        (Method::Normal, Model::Basis(b @ BasisSpec::Risk { .. })) => proper_cdf_normal(&normal_params(b)?, level, x),
        (Method::Normal, _) => cumulated_rewards_cdf_normal(&reward_params(mom)?, level, x),
        (Method::Qnormal, Model::Basis(b)) => quasi_normal_cdf(&quasi_normal_params(b, CramerMethod::Auto)?, level, x),
        (Method::Ig, Model::Basis(b)) => inverse_gaussian_cdf_approx(&InverseGaussianParams::from_basis(b, level)?, x)?,
        (Method::Edgeworth, _) => cumulated_rewards_cdf_edgeworth(&reward_params(mom)?, &edgeworth_q1(mom)?, level, x),
        (Method::Qnormal | Method::Ig, _) => {
            return Err(CliError::Usage("quasi-normal and inverse-Gaussian approximations need a risk model".into()))
        }
    })
}

pub fn approx(c: &Common, method: Method) -> Result<()> {
    let ctx = Ctx::new(c)?;
    let mom = ctx.moments()?;
    let name = format!("{method:?}").to_lowercase();
    let values = ctx
        .horizons
        .iter()
        .map(|&x| approx_value(method, &ctx.cfg.model, &mom, ctx.level, x))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::create(ctx.out.as_deref(), &ctx.stamp("approx"), &["x", &name])?;
    for (x, v) in ctx.horizons.iter().zip(values) {
        t.row(&[Some(*x), Some(v)])?;
    }
    t.finish()
}

/// Lundberg floor for a defective basis, when the exponent exists.
fn auto_floor(b: &BasisSpec, level: f64) -> Option<f64> {
    if b.regime() != Regime::Defective {
        return None;
    }
    match lundberg_exponent(b) {
        Ok(kappa) => Some(lundberg_floor(kappa, level, FLOOR_EPS)),
        Err(e) => {
            warn!("no Lundberg floor ({e}); defective paths run to the step cap");
            None
        }
    }
}

pub fn simulate(c: &Common) -> Result<()> {
    let mut ctx = Ctx::new(c)?;
    let out = match &ctx.cfg.model {
        Model::Basis(b) => {
            ctx.sim.floor = auto_floor(b, ctx.level);
            run_paths(&b.pair_model()?, ctx.level, &ctx.sim)?
        }
        Model::Markov(m) => run_paths(&m.compile()?, ctx.level, &ctx.sim)?,
        Model::Moments(_) => return Err(CliError::Usage("a moments model cannot be simulated".into())),
    };
    let s = SimSummary::of(&out);
    info!("crossed {} of {} paths ({} capped, {} below floor)", s.crossed, s.paths, s.capped, s.floored);
    let mut w = open_raw(ctx.out.as_deref(), &ctx.stamp("simulate"))?;
    write_outcomes_csv(&mut w, &out)?;
    w.flush()?;
    Ok(())
}

pub fn sweep(c: &Common, grid: &str, methods: &[SweepMethod]) -> Result<()> {
    let ctx = Ctx::new(c)?;
    let base = ctx.basis()?;
    let cs = parse_grid(grid)?;
    if cs.len() < 2 {
        return Err(CliError::Usage("the premium grid needs the form lo:hi:n".into()));
    }
    let [x] = ctx.horizons[..] else {
        return Err(CliError::Usage("a sweep takes a single horizon".into()));
    };
    let mut header = vec!["c".to_string()];
    header.extend(methods.iter().map(|m| format!("{m:?}").to_lowercase()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::create(ctx.out.as_deref(), &ctx.stamp("sweep"), &header)?;
    for (k, &prem) in cs.iter().enumerate() {
        let b = with_premium(&base, prem)?;
        let model = Model::Basis(b);
        let mom = b.moments();
        let mut row = vec![Some(prem)];
        for m in methods {
            let v = match m {
                SweepMethod::Exact => exp_model(&b, ctx.level).and_then(|e| Ok(exact_cdf(&e, x)?)),
                SweepMethod::Normal => approx_value(Method::Normal, &model, &mom, ctx.level, x),
                SweepMethod::Qnormal => approx_value(Method::Qnormal, &model, &mom, ctx.level, x),
                SweepMethod::Ig => approx_value(Method::Ig, &model, &mom, ctx.level, x),
                SweepMethod::Edgeworth => approx_value(Method::Edgeworth, &model, &mom, ctx.level, x),
                SweepMethod::Simulate => {
                    let cfg = SimConfig { seed: ctx.sim.seed.wrapping_add(k as u64), floor: auto_floor(&b, ctx.level), ..ctx.sim };
                    run_paths(&b.pair_model()?, ctx.level, &cfg).map_err(CliError::from).map(|out| {
                        out.iter().filter(|o| o.s_at_inf <= x).count() as f64 / out.len() as f64
                    })
                }
            };
            row.push(match v {
                Ok(v) => Some(v),
                Err(e) => {
                    info!("c = {prem}: {m:?} left blank ({e})");
                    None
                }
            });
        }
        t.row(&row)?;
    }
    t.finish()
}

pub fn renewal(c: &Common) -> Result<()> {
    let ctx = Ctx::new(c)?;
    let mom = ctx.moments()?;
    let t = ctx.level;
    let mut row = vec![Some(t), Some(renewal_mean_elementary(mom.mu_t, t)?), Some(renewal_mean_refined(&mom, t)?)];
    let mut header = vec!["t", "elementary", "refined"];
    if let Model::Basis(b @ BasisSpec::Direct { .. }) = &ctx.cfg.model {
        let out = run_paths(&b.pair_model()?, t, &ctx.sim)?;
        let n: Vec<f64> = out.iter().filter_map(|o| o.n_sup()).map(|n| n as f64).collect();
        if n.len() == out.len() && n.len() > 1 {
            let mean = n.iter().sum::<f64>() / n.len() as f64;
            let var = n.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.len() - 1) as f64;
            header.extend(["simulated", "std_error"]);
            row.extend([Some(mean), Some((var / n.len() as f64).sqrt())]);
        } else {
            warn!("some paths hit the step cap; simulated mean omitted");
        }
    }
    let mut tab = Table::create(ctx.out.as_deref(), &ctx.stamp("renewal"), &header)?;
    tab.row(&row)?;
    tab.finish()
}

/// Writes `<out>_sample.csv` and `<out>_limit.csv`.
pub fn garbage(c: &Common) -> Result<()> {
    let ctx = Ctx::new(c)?;
    let b = ctx.basis()?;
    let prefix = ctx.out.clone().unwrap_or_else(|| PathBuf::from("garbage"));
    let sample = simulate_garbage(&b, ctx.level, &ctx.sim)?;
    let e = EmpiricalCdf::new(sample)?;
    let stamp = ctx.stamp("garbage");
    let mut t = Table::create(Some(&suffixed(&prefix, "_sample.csv")), &stamp, &["value", "ecdf"])?;
    let values = e.finite_values();
    for (i, v) in values.iter().enumerate() {
        if i + 1 == values.len() || values[i + 1] != *v {
            t.row(&[Some(*v), Some((i + 1) as f64 / e.len() as f64)])?;
        }
    }
    t.finish()?;
    let mut t = Table::create(Some(&suffixed(&prefix, "_limit.csv")), &stamp, &["x", "cdf", "pdf"])?;
    for k in 0..=160 {
        let x = -4.0 + 0.05 * k as f64;
        t.row(&[Some(x), Some(garbage_limit_cdf(x)?), Some(garbage_limit_pdf(x)?)])?;
    }
    t.finish()
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn modular(c: &Common, blocks: u64, replicates: u64) -> Result<()> {
    let ctx = Ctx::new(c)?;
    let Model::Markov(chain) = &ctx.cfg.model else {
        return Err(CliError::Usage("modular needs a markov model".into()));
    };
    let bc = BlockConfig {
        replicates: replicates as usize,
        seed: ctx.sim.seed,
        workers: ctx.sim.workers,
        step_cap: ctx.sim.step_cap,
        retain: false,
    };
    let stats = extract_blocks(chain, blocks as usize, &bc)?;
    let clt = modular_clt_params(&stats, DET_Q_FLOOR)?;
    let pi = stationary_distribution(&chain.transition)?;
    let p = &stats.pooled;
    let n = p.count as f64;
    let mut t = Table::create(ctx.out.as_deref(), &ctx.stamp("modular"), &["quantity", "value", "std_error"])?;
    t.labelled("m_s", &[Some(clt.params.m_s), Some(clt.se_m_s)])?;
    t.labelled("sigma_s_sq", &[Some(clt.params.sigma_s.powi(2)), Some(clt.se_sigma_sq)])?;
    t.labelled("det_q", &[Some(clt.det_q), None])?;
    t.labelled("mean_tau", &[Some(p.mean_tau()), Some((p.cov(0, 0) / n).sqrt())])?;
    t.labelled("mean_t", &[Some(p.mean_t()), Some((p.cov(1, 1) / n).sqrt())])?;
    t.labelled("mean_x", &[Some(p.mean_x()), Some((p.cov(2, 2) / n).sqrt())])?;
    t.labelled("return_time", &[Some(1.0 / pi[chain.reference]), None])?;
    t.finish()
}
