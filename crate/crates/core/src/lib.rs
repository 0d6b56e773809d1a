//! Convex dual solvers for a one-dimensional bar with a double-well stored
//! energy, in statics and in space-time dynamics, plus a numerical lab for
//! the dual densities of two multi-dimensional hyperelastic models.

pub mod material;
pub mod quadrature;
pub mod roots;
pub mod profile;
pub mod mesh;
pub mod linalg;
pub mod dtp;
pub mod newton;
pub mod fem_static;
pub mod fem_spacetime;
pub mod cases;
pub mod primal;
pub mod convexity;
pub mod report;

/// Chapters of the guide, compiled as doc-tests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/double-well.md")]
    pub mod double_well {}
    #[doc = include_str!("../../../book/src/dual-to-primal.md")]
    pub mod dual_to_primal {}
    #[doc = include_str!("../../../book/src/statics.md")]
    pub mod statics {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub mod dynamics {}
    #[doc = include_str!("../../../book/src/primal.md")]
    pub mod primal {}
    #[doc = include_str!("../../../book/src/convexity.md")]
    pub mod convexity {}
    #[doc = include_str!("../../../book/src/verification.md")]
    pub mod verification {}
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
}
