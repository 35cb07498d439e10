//! Iwasawa `KAN` decompositions of classical matrix groups at finite scale.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense complex matrices, decompositions, norms, seeded sampling.
//! - [`frame`]: spectral frames of a Hermitian element `X₀`, which fix what
//!   "upper triangular" means.
//! - [`triangular`]: block projections `D` and `T`, the triadic splitting of
//!   the Lie algebra, and the Hilbert-matrix truncation experiment.
//! - [`families`]: the ten classical families with their structure operators.
//! - [`kan`]: the group factorization `g = k·a·n`, the nest factorization of
//!   positive matrices, and the closure and convergence studies.

pub mod error;
pub mod families;
pub mod frame;
pub mod json;
pub mod kan;
pub mod linalg;
pub mod triangular;

pub use error::{Error, Result};
pub use families::{
    algebra_membership, default_coefficients, group_membership, regular_element, sample_algebra, sample_group,
    structure_context, verify_sign_rule, FamilyTag, MembershipReport, Operator, Residual, StructureContext,
};
pub use frame::{build_frame, classify, from_frame, to_frame, Cluster, RegularityClass, SpectralFrame};
pub use kan::{
    closure_study, kan_factor, nest_factor, truncation_convergence, verify_kan, ClosureSummary, ConvergencePoint,
    KanFactors, NestFactors,
};
pub use linalg::{
    adjoint, hermitian_eig, matrix_exp, random_ginibre, schatten_norm, solve, ComplexMatrix, SchattenP, C64,
};
pub use triangular::{
    diag_expectation, hilbert_witness, triadic_decompose, triangular_projection, truncation_growth, GrowthRow,
    TriadicParts,
};
