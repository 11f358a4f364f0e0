use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{run_indexed, SimConfig};
use crate::basis::{BasisSpec, CompiledBasis};
use crate::error::Result;

/// A source of pairs `(T_i, X_i)`, possibly with internal state such as a
/// modulating Markov chain.
pub trait PairModel: Sync {
    type State;

    fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn next_pair<R: Rng + ?Sized>(&self, state: &mut Self::State, rng: &mut R) -> (f64, f64);

    /// True when every `T_i` is positive, so that the `T`-walk is monotone.
    fn regular(&self) -> bool;
}

/// Sampling model of a [`BasisSpec`].
#[derive(Debug, Clone)]
pub struct BasisModel {
    basis: CompiledBasis,
    regular: bool,
}

/// The state records whether the first pair was drawn.
impl PairModel for BasisModel {
    type State = bool;

    fn start<R: Rng + ?Sized>(&self, _rng: &mut R) -> bool {
        false
    }

    #[inline]
    fn next_pair<R: Rng + ?Sized>(&self, started: &mut bool, rng: &mut R) -> (f64, f64) {
        if *started {
            self.basis.pair(rng)
        } else {
            *started = true;
            self.basis.first_pair(rng)
        }
    }

    fn regular(&self) -> bool {
        self.regular
    }
}

impl BasisSpec {
    /// Sampling model for the simulation engine.
    pub fn pair_model(&self) -> Result<BasisModel> {
        Ok(BasisModel { basis: self.compile()?, regular: self.regular() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Crossed,
    StepCap,
    /// The walk fell below the configured floor.
    Floor,
}

/// Boundary counts and sums of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub stop: StopReason,
    /// First `n` with `V_n > t`.
    pub n_inf: Option<u64>,
    /// `S_{N_inf(t)}`, infinite when the level was not crossed.
    pub s_at_inf: f64,
    /// `S_{N_inf(t) − 1}`, infinite when the level was not crossed.
    pub s_at_sup: f64,
    /// Last `n` with `V_n ≤ t`. Known only for regular summation.
    pub n_tsup: Option<u64>,
    pub steps: u64,
}

impl PathOutcome {
    pub fn crossed(&self) -> bool {
        self.stop == StopReason::Crossed
    }

    /// `N_sup(t) = N_inf(t) − 1`.
    pub fn n_sup(&self) -> Option<u64> {
        self.n_inf.map(|n| n - 1)
    }
}

/// Walks `V_n`, `S_n` until `V_n > t`, the step cap, or the floor.
pub fn simulate_path<M: PairModel, R: Rng + ?Sized>(model: &M, t: f64, cfg: &SimConfig, rng: &mut R) -> PathOutcome {
    let mut state = model.start(rng);
    let (mut v, mut s) = (0.0f64, 0.0f64);
    let floor = cfg.floor.unwrap_or(f64::NEG_INFINITY);
    let mut n = 0u64;
    while n < cfg.step_cap {
        let (dt, dx) = model.next_pair(&mut state, rng);
        n += 1;
        let prev = s;
        v += dt;
        s += dx;
        if v > t {
            return PathOutcome {
                stop: StopReason::Crossed,
                n_inf: Some(n),
                s_at_inf: s,
                s_at_sup: prev,
                n_tsup: model.regular().then_some(n - 1),
                steps: n,
            };
        }
        if v < floor {
            return uncrossed(StopReason::Floor, n);
        }
    }
    uncrossed(StopReason::StepCap, n)
}

fn uncrossed(stop: StopReason, steps: u64) -> PathOutcome {
    PathOutcome { stop, n_inf: None, s_at_inf: f64::INFINITY, s_at_sup: f64::INFINITY, n_tsup: None, steps }
}

/// Simulates `cfg.n_paths` independent paths.
pub fn simulate<M: PairModel>(model: &M, t: f64, cfg: &SimConfig) -> Result<Vec<PathOutcome>> {
    cfg.validate()?;
    run_indexed(cfg.n_paths, cfg.seed, cfg.workers, |_, rng: &mut ChaCha8Rng| simulate_path(model, t, cfg, rng))
}

/// Crossing and censoring fractions of a batch of paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSummary {
    pub paths: usize,
    pub crossed: usize,
    pub capped: usize,
    pub floored: usize,
}

impl SimSummary {
    pub fn of(outcomes: &[PathOutcome]) -> Self {
        let count = |r: StopReason| outcomes.iter().filter(|o| o.stop == r).count();
        Self {
            paths: outcomes.len(),
            crossed: count(StopReason::Crossed),
            capped: count(StopReason::StepCap),
            floored: count(StopReason::Floor),
        }
    }

    pub fn crossing_fraction(&self) -> f64 {
        self.crossed as f64 / self.paths as f64
    }

    pub fn cap_fraction(&self) -> f64 {
        self.capped as f64 / self.paths as f64
    }

    /// Binomial standard error of the crossing fraction.
    pub fn crossing_se(&self) -> f64 {
        let p = self.crossing_fraction();
        (p * (1.0 - p) / self.paths as f64).sqrt()
    }
}
