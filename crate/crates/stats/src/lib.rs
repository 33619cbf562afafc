//! Statistics for paired rubric evaluations: signed-rank tests, multiplicity
//! corrections, inter-rater reliability, equivalence testing, descriptive
//! summaries and contingency-table tests.
//!
//! Every test returns a [`TestResult`] carrying its method tag and effective
//! sample size; Monte Carlo results also carry the seed and replicate count.

mod contingency;
mod correlation;
mod describe;
mod equivalence;
mod error;
mod icc;
mod multiple;
mod rank;
mod result;
mod wilcoxon;

pub use contingency::{contingency_test, ContingencyMethod, ContingencyTable, DEFAULT_MC_REPLICATES, DEFAULT_MC_SEED};
pub use correlation::spearman_rho;
pub use describe::{mean_ci95, median_iqr, quantile_type7, IqrStyle, MeanCi, MedianIqr};
pub use equivalence::{tost_equivalence, EquivalenceResult, DEFAULT_ALPHA_EACH, DEFAULT_MARGIN};
pub use error::StatsError;
pub use icc::{icc_2k, IccResult};
pub use multiple::{benjamini_hochberg, bonferroni, BhResult};
pub use rank::midranks;
pub use result::{Method, TestResult};
pub use wilcoxon::{wilcoxon_signed_rank, PairedSample, WilcoxonMode, EXACT_MAX_N};
