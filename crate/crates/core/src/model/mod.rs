//! The bimodal co-sparse model: coupled sparsity, operator regularizers,
//! training data and the learning driver.

mod learn;
mod objective;
mod operator;
mod patches;
mod penalty;

pub use learn::{learn_pair, learn_pair_with, LearningReport};
pub use objective::{ambient_learning_objective, empirical_coupling, learning_objective, LearningObjective, ObjectiveValue};
pub use operator::{AnalysisOperator, LearningParams, OperatorPair};
pub use patches::{extract_training_patches, PatchDataset, DEFAULT_STD_THRESHOLD};
pub use penalty::{
    coherence_penalty, coupled_sparsity, dct_complement_basis, rank_penalty, sparsity_measure,
};

/// Pairwise summation; the result does not depend on how callers chunk the input.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
