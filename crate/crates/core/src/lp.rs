//! Local-projection estimators: base LP, random subspace LP (RSLP) with
//! equal or BIC weights, the IV and cumulative-SVAR two-stage variants, the
//! factor-augmented benchmark, and BIC selection of the subspace dimension.

pub mod bic;
pub(crate) mod engine;
pub mod estimate;
pub mod falp;
pub mod spec;
pub mod target;

pub use bic::{bic_softmax_weights, first_stage_bic};
pub use estimate::{
    bic_by_k, estimate_base_lp, estimate_base_lp_multi, estimate_lp_iv, estimate_lp_svar, estimate_rslp,
    estimate_rslp_multi, generate_draws, select_k_by_bic, DrawEstimate, IRFEstimate, IrfMeta, RslpOptions,
    SubspaceEnsemble, Weighting,
};
pub use falp::{estimate_falp, estimate_falp_multi};
pub use spec::{ControlRef, Identification, LPSpec, LeadTransform};
pub use target::make_cumulative_target;
