//! Closed-form success predictions and combinatorial certificates for
//! binary input.

mod rank;
mod structure;

use thiserror::Error;

pub use rank::{
    gaussian_binomial, predicted_success, rank_full_prob, rank_full_prob_f64,
    subspace_dim_distribution, Regime, SuccessPrediction,
};
pub use structure::{
    classify_input, exhaustive_max_abs_det, hadamard_class_4, has_maximal_subset_property,
    integer_det, is_atm, max_abs_det, HadamardClass, InputClass, SignedPermutation,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TheoryError {
    #[error("dimension n = {n} is not supported")]
    Unsupported { n: usize },
    #[error("binary input required, got constellation order {order}")]
    NotBinary { order: usize },
}
