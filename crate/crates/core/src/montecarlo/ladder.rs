use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{run_indexed, PairModel, SimConfig};
use crate::error::Result;

/// Summands between two consecutive ascending ladder epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderBlock {
    /// `ν_k − ν_{k−1}`.
    pub len: u64,
    /// `V_{ν_k} − V_{ν_{k−1}} > 0`.
    pub t_bar: f64,
    /// Sum of the `X_i` in the block.
    pub x_bar: f64,
}

/// Ladder blocks of one path up to the first passage above `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderPath {
    pub blocks: Vec<LadderBlock>,
    /// The step cap was hit before the level was crossed.
    pub truncated: bool,
    /// `S_{N_inf(t)}` accumulated summand by summand; infinite if truncated.
    pub s_at_inf: f64,
    pub n_inf: Option<u64>,
}

impl LadderPath {
    /// Index of the first block whose cumulative `T̄` exceeds `t`.
    pub fn crossing_block(&self, t: f64) -> Option<usize> {
        let mut v = 0.0;
        self.blocks.iter().position(|b| {
            v += b.t_bar;
            v > t
        })
    }

    /// `|S_{N_inf(t)} − Σ_{k ≤ B(t)} X̄_k|` relative to `Σ |X̄_k|`.
    pub fn identity_error(&self, t: f64) -> Option<f64> {
        let k = self.crossing_block(t)?;
        let sum: f64 = self.blocks[..=k].iter().map(|b| b.x_bar).sum();
        let scale: f64 = self.blocks[..=k].iter().map(|b| b.x_bar.abs()).sum::<f64>().max(1.0);
        Some((sum - self.s_at_inf).abs() / scale)
    }
}

/// Splits one path at its strictly ascending ladder epochs
/// `ν_k = inf{i > ν_{k−1} : V_i > V_{ν_{k−1}}}` until `V` first exceeds `t ≥ 0`.
pub fn ladder_dissection<M: PairModel, R: Rng + ?Sized>(model: &M, t: f64, cfg: &SimConfig, rng: &mut R) -> LadderPath {
    let mut state = model.start(rng);
    let mut blocks = Vec::new();
    let (mut v, mut s) = (0.0f64, 0.0f64);
    let (mut height, mut len, mut bx) = (0.0f64, 0u64, 0.0f64);
    let mut n = 0u64;
    while n < cfg.step_cap {
        let (dt, dx) = model.next_pair(&mut state, rng);
        n += 1;
        len += 1;
        v += dt;
        s += dx;
        bx += dx;
        if v > height {
            blocks.push(LadderBlock { len, t_bar: v - height, x_bar: bx });
            height = v;
            len = 0;
            bx = 0.0;
            if v > t {
                return LadderPath { blocks, truncated: false, s_at_inf: s, n_inf: Some(n) };
            }
        }
    }
    LadderPath { blocks, truncated: true, s_at_inf: f64::INFINITY, n_inf: None }
}

pub fn ladder_paths<M: PairModel>(model: &M, t: f64, cfg: &SimConfig) -> Result<Vec<LadderPath>> {
    cfg.validate()?;
    run_indexed(cfg.n_paths, cfg.seed, cfg.workers, |_, rng: &mut ChaCha8Rng| ladder_dissection(model, t, cfg, rng))
}
