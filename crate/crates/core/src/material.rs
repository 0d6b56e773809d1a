//! Pointwise constitutive laws.
//!
//! The 1-D double-well density `phi(e) = ((e - 1)^2 - 1)^2` drives every
//! computation in the solver. Its wells sit at `e = 0` and `e = 2` and the
//! stiffness `phi''` is negative on `(1 - 1/sqrt(3), 1 + 1/sqrt(3))`.
//!
//! The tensor laws at the bottom (Saint Venant-Kirchhoff and the 2-D
//! incompressible neo-Hookean stress) only feed the convexity lab.

use nalgebra::{Matrix2, SMatrix};

/// Strains at which the double well vanishes.
pub const WELLS: [f64; 2] = [0.0, 2.0];

/// Lower and upper end of the negative-stiffness (spinodal) interval.
pub const SPINODAL: (f64, f64) = (1.0 - 0.577_350_269_189_625_8, 1.0 + 0.577_350_269_189_625_8);

/// Double-well energy density `((e - 1)^2 - 1)^2`.
pub fn energy_density(e: f64) -> f64 {
    let s = e - 1.0;
    let w = s * s - 1.0;
    w * w
}

/// Stress `phi'(e) = 4 (e - 1)((e - 1)^2 - 1)`.
pub fn stress(e: f64) -> f64 {
    let s = e - 1.0;
    4.0 * s * (s * s - 1.0)
}

/// Flux appearing in the weak form, `2((e - 1)^3 - (e - 1))`. Always `stress(e) / 2`.
pub fn flux(e: f64) -> f64 {
    let s = e - 1.0;
    2.0 * (s * s * s - s)
}

/// `d flux / de = 2 (3 (e - 1)^2 - 1)`.
pub fn flux_derivative(e: f64) -> f64 {
    let s = e - 1.0;
    2.0 * (3.0 * s * s - 1.0)
}

/// Stiffness `phi''(e) = 12 (e - 1)^2 - 4`.
pub fn stiffness(e: f64) -> f64 {
    let s = e - 1.0;
    12.0 * s * s - 4.0
}

/// `phi'''(e) = 24 (e - 1)`.
pub fn stiffness_derivative(e: f64) -> f64 {
    24.0 * (e - 1.0)
}

/// True when `e` lies strictly inside the negative-stiffness interval.
pub fn is_spinodal(e: f64) -> bool {
    stiffness(e) < 0.0
}

/// Saint Venant-Kirchhoff moduli.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvkParams {
    pub shear_modulus: f64,
    pub lame: f64,
    pub dim: usize,
}

/// Rejected material parameters.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaterialError {
    #[error("shear modulus must be positive, got {0}")]
    NonPositiveShear(f64),
    #[error("G + (d/2) L must be positive, got {0}")]
    BulkCondition(f64),
    #[error("dimension must be 2 or 3, got {0}")]
    Dimension(usize),
}

impl SvkParams {
    pub fn new(shear_modulus: f64, lame: f64, dim: usize) -> Result<Self, MaterialError> {
        if !(shear_modulus > 0.0) {
            return Err(MaterialError::NonPositiveShear(shear_modulus));
        }
        if dim != 2 && dim != 3 {
            return Err(MaterialError::Dimension(dim));
        }
        let bulk = shear_modulus + 0.5 * dim as f64 * lame;
        if !(bulk > 0.0) {
            return Err(MaterialError::BulkCondition(bulk));
        }
        Ok(Self {
            shear_modulus,
            lame,
            dim,
        })
    }

    /// `G + L d / 2`, the coefficient of the identity shift in `P(F)`.
    pub fn identity_shift(&self) -> f64 {
        self.shear_modulus + 0.5 * self.lame * self.dim as f64
    }
}

/// Green-Lagrange strain `(F^T F - I) / 2`.
pub fn green_lagrange<const D: usize>(f: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    (f.transpose() * f - SMatrix::<f64, D, D>::identity()) * 0.5
}

/// Stored energy `G |E|^2 + (L/2) tr(E)^2`.
pub fn svk_energy<const D: usize>(f: &SMatrix<f64, D, D>, params: &SvkParams) -> f64 {
    debug_assert_eq!(params.dim, D);
    let e = green_lagrange(f);
    let tr = e.trace();
    params.shear_modulus * e.norm_squared() + 0.5 * params.lame * tr * tr
}

/// First Piola-Kirchhoff stress `F (G F^T F + (L/2)|F|^2 I - (G + L d/2) I)`.
pub fn svk_stress<const D: usize>(f: &SMatrix<f64, D, D>, params: &SvkParams) -> SMatrix<f64, D, D> {
    debug_assert_eq!(params.dim, D);
    let id = SMatrix::<f64, D, D>::identity();
    let c = f.transpose() * f;
    let inner = c * params.shear_modulus
        + id * (0.5 * params.lame * f.norm_squared() - params.identity_shift());
    f * inner
}

/// Cofactor of a 2x2 matrix, `det(F) F^{-T}` when `F` is invertible.
pub fn cofactor(f: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(f[(1, 1)], -f[(1, 0)], -f[(0, 1)], f[(0, 0)])
}

/// `F - p cof(F)`, which equals the incompressible neo-Hookean stress (unit
/// shear modulus) whenever `det F = 1`.
pub fn neo_hookean_stress(f: &Matrix2<f64>, p: f64) -> Matrix2<f64> {
    f - cofactor(f) * p
}
