//! Distributions of compound sums `S_{N(t)} = X_1 + ... + X_{N(t)}` where `N(t)` is the
//! first index whose partial sum of a second sequence `T_i` exceeds a level `t`.
//!
//! The crate covers the fully exponential risk model (exact ruin-time law), renewal
//! expansions with Edgeworth and garbage-term corrections, normal, quasi-normal and
//! inverse-Gaussian approximations around the critical premium, a Monte Carlo oracle
//! and regeneration-block analysis of Markov-modulated sums.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod error;
pub mod exact;
pub mod modular;
pub mod montecarlo;
pub mod renewal;
pub mod ruin;
pub mod special;

pub use basis::{BasisSpec, DistributionSpec, FirstInterval, MomentSet, Regime, Reward, ThirdOrder};
pub use error::{Error, Result};
pub use exact::ExpModel;
pub use montecarlo::{EmpiricalCdf, PathOutcome, SimConfig, StopReason};
