//! Numerical laboratory for spectral gaps of random covers of a non-compact
//! hyperbolic surface.
//!
//! The crate provides, at desk scale, every computational object of the
//! underlying construction: hyperbolic resolvent kernels and their Selberg
//! transforms, cusp cutoffs with certified derivative bounds, random
//! permutation covers and tensor-product operator norms, Nystrom
//! discretization of the interior error operators, and the net-of-s
//! certification pipeline that combines all budgets.

pub mod certify;
pub mod covers;
pub mod cusp;
pub mod discretize;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod kernels;
pub mod quad;
pub mod rng;

pub use certify::{choose_t, emit_outputs, run_certify, CertifyConfig, CertifyReport};
pub use covers::{
    bc_experiment, cover_operator_norm, free_ball_norm, is_transitive, operator_norm,
    sample_cover, std_apply, CoefficientAssignment, CoverOperator, CoverSample,
};
pub use cusp::{
    cusp_error_certificate, cusp_resolvent_constant, cylinder_spectral_floor, make_cutoff_pair,
    CuspBudget, CuspCutoffPair,
};
pub use discretize::{
    assemble_a_gamma, assemble_values, build_mesh, deviation_constant, interior_norm_cover,
    interior_norm_free, mesh_adapted_cutoff, CoverPerms, InteriorCoefficients, InteriorOperator,
    InteriorPattern, Mesh,
};
pub use error::{Error, Result};
pub use estimate::{NormEstimate, NormMethod, NormSemantics};
pub use geometry::{
    cosh_dist, hyp_dist, ball_count, Cusp, CuspLocation, DomainSpec, GroupElement, MoebiusMatrix,
    PlanePoint,
};
pub use kernels::{
    radial_operator_norm, remainder_kernel, remainder_kernel_operator, resolvent_kernel,
    resolvent_kernel_dr, selberg_sweep, selberg_transform, verify_remainder_decay, CutoffProfile,
    RadialKernel, SelbergEvaluation, SpectralParam,
};
