//! Joint optimization of document order and presentation length under a
//! fixed slot budget.
//!
//! A ranking places documents at lengths of 1..=L slots without exceeding K
//! slots. Rankings are drawn from a variable-length Plackett-Luce policy
//! over (document, length) pairs whose scores are tuned by gradient ascent
//! on the expected attractiveness objective.

pub mod baselines;
pub mod dist;
pub mod error;
pub mod exposure;
pub mod grad;
pub mod objective;
pub mod optimize;
pub mod par;
pub mod synthdata;
pub mod types;

pub use error::{Error, Result};
pub use exposure::{BaseCurve, ExposureTable};
pub use grad::{Estimator, GradientEstimate};
pub use types::{validate_ranking, AttractTable, DocLenGrid, Placement, RankingConfig, ScoreTable, VarRanking, Verdict};
