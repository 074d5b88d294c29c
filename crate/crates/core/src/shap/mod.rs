//! Shapley-value attribution for a frozen forecaster.
//!
//! A feature that is "absent" from a coalition takes its baseline value
//! (the training mean) at every time step of the window. Attributions are
//! therefore per feature, not per (feature, time step).

mod exact;
mod force;
mod game;
mod global;
mod sampled;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exact::{exact_shapley, shapley_weight, DEFAULT_EXACT_CAP};
pub use force::{force_report, Direction, ForceReport, ForceStep};
pub use game::{Coalition, FnGame, ValueFunction, WindowGame};
pub use global::{beeswarm_csv, beeswarm_export, parse_beeswarm, BeeswarmRow, GlobalImportance};
pub use sampled::sampled_shapley;

use crate::data::Normalizer;
use crate::model::{Forecaster, ModelError};
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum ShapError {
    #[error("exact enumeration over {n} features exceeds the cap of {cap}; raise the cap explicitly to proceed")]
    TooManyPlayers { n: usize, cap: usize },
    #[error("coalitions are limited to 63 players, got {0}")]
    PlayerLimit(usize),
    #[error("sampled estimation needs at least 2 permutations, got {0}")]
    TooFewPermutations(usize),
    #[error("no explanations to aggregate")]
    Empty,
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
    #[error("all attributions are zero; shares are undefined")]
    ZeroImportance,
    #[error("value function returned a non-finite value for coalition {0:#x}")]
    NonFinite(u64),
    #[error("malformed table: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Estimator {
    Exact,
    Sampled {
        permutations: usize,
        seed: u64,
        /// Per-feature standard error of the mean marginal contribution.
        std_errors: Vec<f64>,
    },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Exact => "exact",
            Estimator::Sampled { .. } => "sampled",
        }
    }

    pub fn std_error(&self, feature: usize) -> f64 {
        match self {
            Estimator::Exact => 0.0,
            Estimator::Sampled { std_errors, .. } => std_errors[feature],
        }
    }
}

/// Additive decomposition `phi0 + Σ phis = fx` for one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// Value of the empty coalition.
    pub phi0: f64,
    pub phis: Vec<f64>,
    /// Value of the full coalition.
    pub fx: f64,
    pub estimator: Estimator,
}

impl Explanation {
    /// `fx − (phi0 + Σ phis)`
    pub fn local_accuracy_gap(&self) -> f64 {
        self.fx - (self.phi0 + self.phis.iter().sum::<f64>())
    }

    /// Allowed |gap|: 1e-10 for exact enumeration, four times the largest
    /// standard error (at least 1e-10) for sampling.
    pub fn local_accuracy_tolerance(&self) -> f64 {
        match &self.estimator {
            Estimator::Exact => 1e-10,
            Estimator::Sampled { std_errors, .. } => (4.0 * std_errors.iter().fold(0.0, |a: f64, &b| a.max(b))).max(1e-10),
        }
    }

    pub fn is_locally_accurate(&self) -> bool {
        self.local_accuracy_gap().abs() <= self.local_accuracy_tolerance()
    }
}

/// Estimator selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method {
    /// Full enumeration; refuses more than `cap` features.
    Exact { cap: usize },
    Sampled { permutations: usize, seed: u64 },
}

impl Method {
    pub fn run(self, game: &dyn ValueFunction) -> Result<Explanation, ShapError> {
        match self {
            Method::Exact { cap } => exact_shapley(game, cap),
            Method::Sampled { permutations, seed } => sampled_shapley(game, permutations, seed),
        }
    }
}

/// Explains the denormalized prediction at `lead` for one normalized window,
/// with every absent feature held at its training mean (zero after
/// normalization).
pub fn explain_window(
    model: &dyn Forecaster,
    window: &Tensor,
    normalizer: &Normalizer,
    target_index: usize,
    lead: usize,
    method: Method,
) -> Result<Explanation, ShapError> {
    let baseline = vec![0.0; window.cols()];
    let game = WindowGame::new(
        model,
        window.clone(),
        baseline,
        lead,
        normalizer.mean[target_index],
        normalizer.std[target_index],
    )?;
    method.run(&game)
}
