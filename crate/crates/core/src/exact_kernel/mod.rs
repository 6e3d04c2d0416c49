//! Exact log-domain path sums over face-restricted paths.
//!
//! Point probabilities sweep the box `{c <= target}` of jump counts; the
//! partition function sweeps whole levels of `partial R_j`; second moments run
//! the pair walk of [`crate::stochastics::pair_walk`].

mod disorder;
mod moments;
mod paths;

pub use disorder::{
    dn_derivative, dn_value, log_prob_and_derivative, relevant_sites, DisorderEnvironmentDyn, DnEstimate, Mode,
    Sampling,
};
pub use moments::{second_moment_exact, second_moment_sequence};
pub use paths::{
    annealed_point_log_prob, brute_force_log_partition, brute_force_point_log_prob, partition_function,
    partition_function_from, quenched_point_log_prob, quenched_point_log_prob_site,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::ProjectedVector;
use crate::scalar::Real;

/// Fails with `ResourceLimit` when the count-box DPs for `counts` (value and
/// derivative) would need more than `budget_bytes`.
pub(crate) fn check_point_budget<T: Real>(counts: &[usize], budget_bytes: u128) -> Result<()> {
    let cell = (2 * counts.len() + 2) * std::mem::size_of::<T>();
    paths::CountBox::new(counts, budget_bytes, cell).map(|_| ())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DpKind {
    AnnealedProb,
    QuenchedProb,
    Partition,
    SecondMoment,
    DerivativePair,
}

/// Log-domain value of a path sum with its metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DpResult<T> {
    pub kind: DpKind,
    pub log_value: T,
    pub n: usize,
    pub theta: Option<ProjectedVector<T>>,
    pub seed: Option<u64>,
    /// The path set was empty and `log_value` is `-inf`.
    pub empty: bool,
}

impl<T: Real> DpResult<T> {
    pub fn new(kind: DpKind, log_value: T, n: usize) -> Self {
        Self {
            kind,
            log_value,
            n,
            theta: None,
            seed: None,
            empty: log_value == T::neg_infinity(),
        }
    }

    pub fn with_theta(mut self, theta: &[T]) -> Self {
        self.theta = Some(ProjectedVector(theta.to_vec()));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}
