//! Backward linear problem `d_s psi = E_{T-s} . grad psi + D Lap psi` solved
//! by a monotone explicit scheme, with audits of its a priori estimates.

mod audit;
mod probes;
mod scheme;

pub use audit::{
    audit_continuous_dependence, audit_gradient_bound, audit_l2_continuous_dependence, audit_l2_gradient,
    audit_weighted_bound, AuditConstants, ContinuousDependenceAudit, GradientAudit, L2GradientAudit,
    L2PairAudit, TimeModulus, WeightedAudit,
};
pub use probes::{default_bank, Probe};
pub use scheme::{solve_dual, solve_dual_fn, DualConfig, DualSolution, DualStep};
