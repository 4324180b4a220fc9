//! Interaction kernels, the induced nonlocal velocity `K[mu]`, drift fields
//! `E_t(x)` and their Lip0 bookkeeping.

mod convolve;
mod field;
mod kernel;
mod lip0;

pub use convolve::{convolve_direct, convolve_fft, eval_velocity, eval_velocity_on_grid};
pub use field::{FieldSource, VelocityField};
pub use kernel::{InteractionKernel, KernelForm};
pub use lip0::{
    audit_lattice, lip0_norm, lipschitz_audit, Lip0Sample, LipschitzAudit, AUDIT_MARGIN,
    AUDIT_REFINEMENT,
};
