//! Coupled solutions by Picard iteration on short windows, and the
//! certificates attached to them.

mod certificate;
mod dependence;
mod picard;

pub use certificate::{
    certify_entropy_pair, certify_with_fields, default_dual_grid, CertifyOptions, EntropyPairCertificate,
    ProbeRecord,
};
pub use dependence::{continuous_dependence_check, DependenceReport};
pub use picard::{metric_name, picard_solve, picard_window, PicardConfig, PicardSolution, PicardState, PicardWindow};
