//! Executable checks of the closed-form results.
//!
//! * [`success_lower_bound`] / [`verify_success_bound`]: success of a
//!   collective whose labels are wrong with probability `label_error`,
//!   checked by exact enumeration.
//! * [`verify_cf_equivalence`]: success equals one exactly when the Bayes
//!   classifier is counterfactually fair on the minority.
//! * [`spurious_direction_experiment`]: a max-margin learner trained on a
//!   small minority ends up on the majority's spurious direction.
//! * [`asymptotic_1nn_error`] / [`snr_report`]: 1NN label transfer between
//!   shifted Gaussians, raw and after the fair projection.

mod bound;
mod erasure;
mod gaussian;
mod random;
mod spurious;

pub use bound::{success_lower_bound, verify_success_bound, BoundInputs, BoundReport, BoundRow};
pub use erasure::{erasure_training_distribution, verify_cf_equivalence, CfEquivalenceReport};
pub use gaussian::{
    asymptotic_1nn_error, empirical_1nn_error, fair_projection, normal_cdf, snr, snr_report,
    GaussianPairParams, SnrReport,
};
pub use random::{random_causal_spec, random_idempotent_map};
pub use spurious::{
    angle_between_deg, spurious_direction_experiment, RelabelPolicy, SpuriousConfig, SpuriousOutcome,
};
