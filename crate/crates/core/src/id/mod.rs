//! Interpolative decomposition: the exact determinant-maximizing column ID
//! and the Bayesian GBT / GBTN / ARD / aggressive / IID samplers.

pub mod bayes;
pub mod exact;

pub use bayes::{
    ard_flip, fit_id, gbt_sample_y, gbt_swap_state, gbt_y_posterior, iid_swap, post_process,
    IdFit, IdHyper, IdState, IdTrace, IdVariant,
};
pub use exact::{cramer_expansion, exact_column_id, skeleton_check, transpose_row_id};
