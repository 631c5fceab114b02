//! Statistics over judgments, transcripts and externally computed scores.

mod agreement;
mod bradley_terry;
pub mod io;
mod odds;
mod scores;
mod similarity;
mod ttest;
mod votes;

use crate::dialogue::SocialDimension;

pub use agreement::{agreement_fraction, fleiss_kappa, KappaResult};
pub use bradley_terry::{
    check_mle_exists, fit_bradley_terry, log_likelihood, rank_dimensions, BradleyTerryFit,
    Degeneracy, MmIterator, PairwiseTally, RankedEntity, Ranking, DEFAULT_MAX_ITER,
    DEFAULT_TOLERANCE,
};
pub use odds::{odds_ratio, OddsRatio};
pub use scores::{
    validate_dimension_expression, DimensionScoreSet, DimensionTest, LengthDiscount, ScoreRecord,
};
pub use similarity::{mean_cosine_similarity, similarity_to_baseline, EmbeddingSet};
pub use ttest::{welch_t_test, WelchResult};
pub use votes::{
    default_threshold_grid, entities_of, kappa_from_votes, retained_pairs, sensitivity_sweep,
    tally_from_votes, PairVotes, SweepPoint,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("degenerate tally: {0}")]
    DegenerateTally(Degeneracy),
    #[error("unknown entity `{0}`")]
    UnknownEntity(SocialDimension),
    #[error("duplicate entity `{0}`")]
    DuplicateEntity(SocialDimension),
    #[error("items have unequal rater counts ({0} vs {1})")]
    UnequalRaterCounts(u64, u64),
    #[error("every rating falls in a single category; kappa is undefined")]
    DegenerateAllOneCategory,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("all cells of a margin are zero")]
    AllZeroMargin,
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("zero vector for `{0}`")]
    ZeroVector(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
