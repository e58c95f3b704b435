//! Closed-form quantities and their numeric oracles.

pub mod entropy;
pub mod mfpt;
pub mod pacbayes;
pub mod sensitivity;

pub use entropy::{dead_zone_mass, entropy_bt, entropy_gap, entropy_szt};
pub use mfpt::{mfpt_closed, mfpt_ratio, MfptKind};
pub use pacbayes::{kl_categorical, kl_reduction, kl_split_check, pac_bayes_bound, pac_bayes_gap, KlSplitReport};
pub use sensitivity::{
    expected_ratio, feedback_events, phi_f, phi_f_quadrature, phi_r, phi_r_quadrature, sensitivity_ratio, ChannelEvents,
    FeedbackEvents, SensitivityReport, StepDist,
};
