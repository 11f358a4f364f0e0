//! Regeneration blocks of Markov-modulated sums.
//!
//! Each step moves a finite Markov chain from state `i` to `j` and draws
//! `(T, X)` from the laws attached to the transition `i → j`. Visits to a
//! reference state cut the path into an initial block and i.i.d. blocks
//! `(τ̄_k, T̄_k, X̄_k)`, whose moments give the normal approximation of the sum.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::basis::{DistributionSpec, Reward, Sampler};
use crate::error::{domain, Error, Result};
use crate::montecarlo::{run_indexed, PairModel};
use crate::renewal::RewardApproxParams;

/// Default floor on `det Q`.
pub const DET_Q_FLOOR: f64 = 1e-6;

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModulatedBasis {
    /// Row-stochastic transition matrix.
    pub transition: Vec<Vec<f64>>,
    /// `t_dist[i][j]`: law of `T` on the transition `i → j`.
    pub t_dist: Vec<Vec<DistributionSpec>>,
    /// `x_dist[i][j]`: law of `X` on the transition `i → j`.
    pub x_dist: Vec<Vec<Reward>>,
    pub initial: usize,
    pub reference: usize,
}

impl MarkovModulatedBasis {
    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        if n == 0 {
            return Err(Error::Model("chain has no states".into()));
        }
        if self.initial >= n || self.reference >= n {
            return Err(Error::Model("initial or reference state out of range".into()));
        }
        let square = |m: usize, name: &str| -> Result<()> {
            if m != n {
                Err(Error::Model(format!("{name} must have {n} rows")))
            } else {
                Ok(())
            }
        };
        square(self.t_dist.len(), "T table")?;
        square(self.x_dist.len(), "X table")?;
        for i in 0..n {
            let row = &self.transition[i];
            if row.len() != n || self.t_dist[i].len() != n || self.x_dist[i].len() != n {
                return Err(Error::Model(format!("row {i} must have {n} entries")));
            }
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::Model(format!("row {i} has a negative or non-finite probability")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Model(format!("row {i} sums to {s}")));
            }
            for j in 0..n {
                let t = &self.t_dist[i][j];
                t.validate()?;
                if !t.positive_support() {
                    return Err(Error::Model(format!("T[{i},{j}] must be supported on (0, inf)")));
                }
                if let Reward::Independent(d) = &self.x_dist[i][j] {
                    d.validate()?;
                }
            }
        }
        for s in 0..n {
            if reachable(&self.transition, s).iter().any(|r| !r) {
                return Err(Error::Model(format!("chain is not irreducible: state {s} does not reach every state")));
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<MarkovModel> {
        self.validate()?;
        let n = self.n_states();
        let mut cumulative = Vec::with_capacity(n);
        let mut cells = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0.0;
            let row: Vec<f64> = self.transition[i]
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            cumulative.push(row);
            let mut cell_row = Vec::with_capacity(n);
            for j in 0..n {
                let x = match self.x_dist[i][j] {
                    Reward::Independent(d) => CellReward::Draw(d.sampler()?),
                    Reward::Proportional(a) => CellReward::Proportional(a),
                };
                cell_row.push((self.t_dist[i][j].sampler()?, x));
            }
            cells.push(cell_row);
        }
        Ok(MarkovModel { cumulative, cells, initial: self.initial, reference: self.reference })
    }
}

fn reachable(p: &[Vec<f64>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; p.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(i) = queue.pop_front() {
        for (j, &pij) in p[i].iter().enumerate() {
            if pij > 0.0 && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

/// Stationary law `π = πP` by Gaussian elimination.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    if n == 0 || p.iter().any(|r| r.len() != n) {
        return Err(domain("transition matrix must be square and nonempty"));
    }
    // Rows 0..n-1 of (Pᵀ − I) with the last replaced by Σπ = 1.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| p[j][i] - if i == j { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("nonempty range");
        if a[piv][col].abs() < 1e-14 {
            return Err(Error::Model("stationary law is not unique".into()));
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        a[r][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

#[derive(Debug, Clone)]
enum CellReward {
    Draw(Sampler),
    Proportional(f64),
}

/// Sampling form of a [`MarkovModulatedBasis`].
#[derive(Debug, Clone)]
pub struct MarkovModel {
    cumulative: Vec<Vec<f64>>,
    cells: Vec<Vec<(Sampler, CellReward)>>,
    initial: usize,
    reference: usize,
}

impl MarkovModel {
    /// One transition from `state`; returns `(next, t, x)`.
    #[inline]
    fn step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> (usize, f64, f64) {
        let u: f64 = rng.random();
        let row = &self.cumulative[state];
        let j = row.iter().position(|c| u < *c).unwrap_or(row.len() - 1);
        let (ts, xr) = &self.cells[state][j];
        let t = ts.draw(rng);
        let x = match xr {
            CellReward::Draw(s) => s.draw(rng),
            CellReward::Proportional(a) => a * t,
        };
        (j, t, x)
    }
}

impl PairModel for MarkovModel {
    type State = usize;

    fn start<R: Rng + ?Sized>(&self, _rng: &mut R) -> usize {
        self.initial
    }

    #[inline]
    fn next_pair<R: Rng + ?Sized>(&self, state: &mut usize, rng: &mut R) -> (f64, f64) {
        let (j, t, x) = self.step(*state, rng);
        *state = j;
        (t, x)
    }

    fn regular(&self) -> bool {
        true
    }
}

/// One regeneration block: number of steps and the sums of `T` and `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockTriple {
    pub tau: u64,
    pub t: f64,
    pub x: f64,
}

impl BlockTriple {
    fn as_array(&self) -> [f64; 3] {
        [self.tau as f64, self.t, self.x]
    }
}

/// Running means and co-moments of `(τ̄, T̄, X̄)`, mergeable across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockMoments {
    pub count: u64,
    pub mean: [f64; 3],
    comoment: [[f64; 3]; 3],
}

impl BlockMoments {
    pub fn push(&mut self, b: &BlockTriple) {
        let v = b.as_array();
        self.count += 1;
        let n = self.count as f64;
        let delta: [f64; 3] = std::array::from_fn(|i| v[i] - self.mean[i]);
        for i in 0..3 {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..3 {
            for j in 0..3 {
                self.comoment[i][j] += delta[i] * (v[j] - self.mean[j]);
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: [f64; 3] = std::array::from_fn(|i| other.mean[i] - self.mean[i]);
        for i in 0..3 {
            for j in 0..3 {
                self.comoment[i][j] += other.comoment[i][j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for i in 0..3 {
            self.mean[i] += delta[i] * nb / n;
        }
        self.count += other.count;
    }

    /// Sample covariance (divisor `n − 1`); index 0 is `τ̄`, 1 is `T̄`, 2 is `X̄`.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.comoment[i][j] / (self.count - 1) as f64
    }

    pub fn mean_tau(&self) -> f64 {
        self.mean[0]
    }

    pub fn mean_t(&self) -> f64 {
        self.mean[1]
    }

    pub fn mean_x(&self) -> f64 {
        self.mean[2]
    }

    /// `E(μ_T̄ X̄ − μ_X̄ T̄)² / μ_T̄³` with estimated moments.
    pub fn sigma_sq(&self) -> f64 {
        let (mt, mx) = (self.mean_t(), self.mean_x());
        (mx * mx * self.cov(1, 1) - 2.0 * mx * mt * self.cov(1, 2) + mt * mt * self.cov(2, 2)) / mt.powi(3)
    }

    /// Correlation matrix of `(τ̄, T̄, X̄)`; `None` entries for constant components.
    pub fn correlation(&self) -> [[Option<f64>; 3]; 3] {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let d = (self.cov(i, i) * self.cov(j, j)).sqrt();
                (d > 0.0).then(|| self.cov(i, j) / d)
            })
        })
    }

    /// `det Q` over the non-constant block components. A constant `τ̄`
    /// (single-state chain) drops out; constant `T̄` or `X̄` gives zero.
    pub fn det_q(&self) -> f64 {
        let q = self.correlation();
        let get = |i: usize, j: usize| q[i][j].unwrap_or(0.0);
        if q[1][1].is_none() || q[2][2].is_none() {
            return 0.0;
        }
        if q[0][0].is_none() {
            return 1.0 - get(1, 2) * get(1, 2);
        }
        let m: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| get(i, j)));
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

/// Result of [`extract_blocks`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    /// Block 0 of each replicate.
    pub initial: Vec<BlockTriple>,
    /// Pooled moments of blocks `k ≥ 1`.
    pub pooled: BlockMoments,
    /// Moments per replicate, for batch-means errors.
    pub replicates: Vec<BlockMoments>,
    /// Blocks `k ≥ 1` in generation order, when retained.
    pub blocks: Vec<BlockTriple>,
}

impl BlockStats {
    /// Moments of an explicit block list. Blocks are accumulated in a canonical
    /// order, so any permutation of the input gives identical estimates.
    pub fn from_blocks(blocks: &[BlockTriple]) -> Self {
        let mut sorted = blocks.to_vec();
        sorted.sort_by(|a, b| a.tau.cmp(&b.tau).then(a.t.total_cmp(&b.t)).then(a.x.total_cmp(&b.x)));
        let mut pooled = BlockMoments::default();
        for b in &sorted {
            pooled.push(b);
        }
        Self { initial: Vec::new(), pooled, replicates: vec![pooled], blocks: blocks.to_vec() }
    }
}

/// Settings for [`extract_blocks`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockConfig {
    pub replicates: usize,
    pub seed: u64,
    pub workers: usize,
    /// Longest allowed block, in steps.
    pub step_cap: u64,
    pub retain: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self { replicates: 64, seed: 0, workers: 1, step_cap: 1_000_000, retain: false }
    }
}

/// Simulates `n_blocks` stationary blocks split over independent replicate
/// trajectories, each started in the initial state.
pub fn extract_blocks(b: &MarkovModulatedBasis, n_blocks: usize, cfg: &BlockConfig) -> Result<BlockStats> {
    let model = b.compile()?;
    if cfg.replicates == 0 || n_blocks < cfg.replicates {
        return Err(domain("need at least one block per replicate"));
    }
    let per = n_blocks / cfg.replicates;
    let extra = n_blocks % cfg.replicates;
    let results = run_indexed(cfg.replicates, cfg.seed, cfg.workers, |r, rng: &mut ChaCha8Rng| {
        let count = per + usize::from((r as usize) < extra);
        replicate(&model, count, cfg, rng)
    })?;
    let mut stats = BlockStats { initial: Vec::new(), pooled: BlockMoments::default(), replicates: Vec::new(), blocks: Vec::new() };
    for res in results {
        let (first, moments, blocks) = res?;
        stats.initial.push(first);
        stats.pooled.merge(&moments);
        stats.replicates.push(moments);
        stats.blocks.extend(blocks);
    }
    Ok(stats)
}

type Replicate = (BlockTriple, BlockMoments, Vec<BlockTriple>);

fn replicate<R: Rng + ?Sized>(m: &MarkovModel, count: usize, cfg: &BlockConfig, rng: &mut R) -> Result<Replicate> {
    let mut state = m.initial;
    let mut first = BlockTriple { tau: 0, t: 0.0, x: 0.0 };
    while state != m.reference {
        let (j, t, x) = m.step(state, rng);
        first = BlockTriple { tau: first.tau + 1, t: first.t + t, x: first.x + x };
        state = j;
        if first.tau >= cfg.step_cap {
            return Err(Error::Model("reference state not reached within the step cap".into()));
        }
    }
    let mut moments = BlockMoments::default();
    let mut kept = Vec::with_capacity(if cfg.retain { count } else { 0 });
    for _ in 0..count {
        let mut blk = BlockTriple { tau: 0, t: 0.0, x: 0.0 };
        loop {
            let (j, t, x) = m.step(state, rng);
            blk.tau += 1;
            blk.t += t;
            blk.x += x;
            state = j;
            if state == m.reference {
                break;
            }
            if blk.tau >= cfg.step_cap {
                return Err(Error::Model("reference state not revisited within the step cap".into()));
            }
        }
        moments.push(&blk);
        if cfg.retain {
            kept.push(blk);
        }
    }
    Ok((first, moments, kept))
}

/// Block-estimated centre and scale with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularClt {
    pub params: RewardApproxParams,
    /// Delta-method error of `m̄_S`: `σ̄_S/√(B μ_T̄)`.
    pub se_m_s: f64,
    /// Batch-means error of `σ̄_S²` over replicates; NaN with one replicate.
    pub se_sigma_sq: f64,
    pub det_q: f64,
}

/// `m̄_S = μ_X̄/μ_T̄`, `σ̄_S² = E(μ_T̄ X̄ − μ_X̄ T̄)²/μ_T̄³`, gated on `det Q > det_floor`.
pub fn modular_clt_params(s: &BlockStats, det_floor: f64) -> Result<ModularClt> {
    let p = &s.pooled;
    if p.count < 3 {
        return Err(domain("too few blocks"));
    }
    if !(p.mean_t() > 0.0) {
        return Err(Error::Degenerate("mean block length in T is not positive".into()));
    }
    let det_q = p.det_q();
    if !(det_q > det_floor) {
        return Err(Error::Degenerate(format!("det Q = {det_q} does not exceed {det_floor}")));
    }
    let s2 = p.sigma_sq();
    if !(s2 > 0.0) {
        return Err(Error::Degenerate(format!("block variance constant {s2} is not positive")));
    }
    let sigma = s2.sqrt();
    let se_m_s = sigma / (p.count as f64 * p.mean_t()).sqrt();
    let reps: Vec<f64> = s.replicates.iter().filter(|r| r.count > 2).map(BlockMoments::sigma_sq).collect();
    let se_sigma_sq = if reps.len() > 1 {
        let k = reps.len() as f64;
        let mean = reps.iter().sum::<f64>() / k;
        (reps.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        f64::NAN
    };
    Ok(ModularClt { params: RewardApproxParams { m_s: p.mean_x() / p.mean_t(), sigma_s: sigma }, se_m_s, se_sigma_sq, det_q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use crate::renewal::reward_params;
    use approx::assert_abs_diff_eq;

    fn two_state(p: f64) -> MarkovModulatedBasis {
        let t = [DistributionSpec::exp(1.0), DistributionSpec::exp(2.0)];
        let x = [Reward::Independent(DistributionSpec::exp(0.5)), Reward::Independent(DistributionSpec::uniform(0.0, 1.0))];
        MarkovModulatedBasis {
            transition: vec![vec![p, 1.0 - p], vec![1.0 - p, p]],
            t_dist: vec![vec![t[0]; 2], vec![t[1]; 2]],
            x_dist: vec![vec![x[0]; 2], vec![x[1]; 2]],
            initial: 1,
            reference: 0,
        }
    }

    fn single(t: DistributionSpec, x: Reward) -> MarkovModulatedBasis {
        MarkovModulatedBasis { transition: vec![vec![1.0]], t_dist: vec![vec![t]], x_dist: vec![vec![x]], initial: 0, reference: 0 }
    }

    #[test]
    fn validation() {
        let mut b = two_state(0.3);
        assert!(b.validate().is_ok());
        b.transition[0] = vec![0.5, 0.6];
        assert!(b.validate().is_err());
        let mut b = two_state(1.0);
        b.transition[1] = vec![0.0, 1.0];
        assert!(matches!(b.validate(), Err(Error::Model(_))));
        let mut b = two_state(0.3);
        b.t_dist[0][1] = DistributionSpec::uniform(-1.0, 1.0);
        assert!(b.validate().is_err());
        b.reference = 5;
        assert!(b.validate().is_err());
    }

    #[test]
    fn stationary_law() {
        let pi = stationary_distribution(&[vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        assert_abs_diff_eq!(pi[0], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(pi[1], 0.25, epsilon = 1e-14);
        let p = vec![vec![0.0, 0.5, 0.5], vec![0.2, 0.0, 0.8], vec![1.0, 0.0, 0.0]];
        let pi = stationary_distribution(&p).unwrap();
        for j in 0..3 {
            let v: f64 = (0..3).map(|i| pi[i] * p[i][j]).sum();
            assert_abs_diff_eq!(v, pi[j], epsilon = 1e-14);
        }
    }

    #[test]
    fn kac_return_time() {
        let b = two_state(0.3);
        let s = extract_blocks(&b, 200_000, &BlockConfig { seed: 3, ..BlockConfig::default() }).unwrap();
        let pi = stationary_distribution(&b.transition).unwrap();
        let se = (s.pooled.cov(0, 0) / s.pooled.count as f64).sqrt();
        assert!((s.pooled.mean_tau() - 1.0 / pi[0]).abs() < 3.0 * se);
        assert_abs_diff_eq!(1.0 / pi[0], 2.0, epsilon = 1e-12);
        assert_eq!(s.initial.len(), 64);
        assert!(s.initial.iter().all(|b| b.tau >= 1));
    }

    #[test]
    fn single_state_reproduces_marginal() {
        let (t, x) = (DistributionSpec::gamma(2.0, 2.0), DistributionSpec::exp(1.0));
        let b = single(t, Reward::Independent(x));
        let s = extract_blocks(&b, 400_000, &BlockConfig { seed: 1, ..BlockConfig::default() }).unwrap();
        assert_eq!(s.pooled.mean_tau(), 1.0);
        let clt = modular_clt_params(&s, DET_Q_FLOOR).unwrap();
        let marginal = reward_params(&BasisSpec::direct(t, x).unwrap().moments()).unwrap();
        assert!((clt.params.m_s - marginal.m_s).abs() < 4.0 * clt.se_m_s);
        assert!((clt.params.sigma_s.powi(2) - marginal.sigma_s.powi(2)).abs() < 4.0 * clt.se_sigma_sq);
        assert!(s.initial.iter().all(|b| b.tau == 0));
    }

    #[test]
    fn proportional_rewards_fail_condition_v() {
        let t = DistributionSpec::exp(1.0);
        let s = extract_blocks(&single(t, Reward::Proportional(1.0)), 1000, &BlockConfig::default()).unwrap();
        assert!(s.pooled.det_q() < 1e-10);
        assert!(matches!(modular_clt_params(&s, DET_Q_FLOOR), Err(Error::Degenerate(_))));
    }

    #[test]
    fn consecutive_blocks_uncorrelated() {
        let cfg = BlockConfig { replicates: 1, retain: true, seed: 12, ..BlockConfig::default() };
        let s = extract_blocks(&two_state(0.3), 100_000, &cfg).unwrap();
        for comp in [1usize, 2] {
            let v: Vec<f64> = s.blocks.iter().map(|b| b.as_array()[comp]).collect();
            let n = v.len() - 1;
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / v.len() as f64;
            let lag: f64 = v.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / n as f64;
            let rho = lag / var;
            assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "component {comp}: {rho}");
        }
    }

    #[test]
    fn estimates_are_permutation_invariant() {
        let cfg = BlockConfig { replicates: 2, retain: true, seed: 2, ..BlockConfig::default() };
        let s = extract_blocks(&two_state(0.3), 5000, &cfg).unwrap();
        let a = BlockStats::from_blocks(&s.blocks);
        let mut rev = s.blocks.clone();
        rev.reverse();
        rev.swap(0, 17);
        let b = BlockStats::from_blocks(&rev);
        assert_eq!(a.pooled, b.pooled);
        assert_eq!(modular_clt_params(&a, DET_Q_FLOOR).unwrap().params, modular_clt_params(&b, DET_Q_FLOOR).unwrap().params);
    }

    #[test]
    fn merge_matches_single_pass() {
        let cfg = BlockConfig { replicates: 1, retain: true, seed: 4, ..BlockConfig::default() };
        let s = extract_blocks(&two_state(0.6), 3000, &cfg).unwrap();
        let (mut a, mut b) = (BlockMoments::default(), BlockMoments::default());
        for (k, blk) in s.blocks.iter().enumerate() {
            if k < 1234 {
                a.push(blk)
            } else {
                b.push(blk)
            }
        }
        a.merge(&b);
        for i in 0..3 {
            assert_abs_diff_eq!(a.mean[i], s.pooled.mean[i], epsilon = 1e-12);
            for j in 0..3 {
                assert_abs_diff_eq!(a.cov(i, j), s.pooled.cov(i, j), epsilon = 1e-9);
            }
        }
    }
}
