//! Commutative contexts of normal matrices, their refinement poset, and the
//! spectral / K-theoretic presheaves living on it, together with integer
//! sheaf cohomology and the joint-diagonalizability obstruction machinery.

pub mod context;
pub mod error;
pub mod intmat;
pub mod matrix;
pub mod obstruction;
pub mod presheaf;
pub mod site;

#[cfg(test)]
pub(crate) mod testutil;

pub use context::{ProjectionResolution, SpectrumMap};
pub use error::{Error, Result};
pub use intmat::{IntMat, Snf, smith_normal_form};
pub use matrix::{
    joint_diagonalize, spectral_decompose, C64, ComplexMatrix, JointDiagonalization,
    SpectralDecomposition,
};
pub use obstruction::{
    decide_joint_diagonalizable, fts_presheaf, h0_nonempty, is_coboundary, monodromy_cocycle,
    pi0_grothendieck, CoboundaryResult, JointDiagReport, MarkedDiagonalization, MonodromyVerdict,
    PermutationCocycle, Pi0,
};
pub use presheaf::{
    cech_complex, cohomology, comparison_map, constant_presheaf, global_sections, k0_presheaf,
    poset_complex, CochainComplex, CohomologyGroup, ComparisonReport, FinAbGroup, IntPresheaf,
};
pub use site::{ContextPoset, Cover, SetPresheaf, SiteOptions};
