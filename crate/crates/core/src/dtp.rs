//! Dual-to-primal (DtP) mapping.
//!
//! The auxiliary potential is a shifted quadratic in the displacement (or
//! velocity) plus a shifted quadratic-and-cubic in the strain,
//!
//! ```text
//! H = c_u/2 (u - ū)^2 + c_e/2 (e - ē)^2 + c_e/3 |e - ē|^3
//! ```
//!
//! Stationarity of the Lagrangian in the primal variables gives a closed form
//! for the displacement and a scalar equation for the strain that is strictly
//! increasing as long as `c_e` dominates the dual strain gradient. The strain
//! equation is solved on the branch of `[ē - R, ē + R]` through `ē` on which it
//! is strictly increasing. Its derivative is piecewise linear in the strain
//! with a kink at `ē`, so that branch is found exactly from three slopes.

use crate::material;
use crate::roots::{newton_bisect, RootError};

/// Default half-width of the strain bracket around `ē`.
pub const DEFAULT_TRUST_RADIUS: f64 = 5.0;

/// Relative residual demanded from every strain solve.
pub const STRAIN_TOLERANCE: f64 = 1e-12;

/// Coefficients of the auxiliary potential plus the mass density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxParams {
    pub c_u: f64,
    pub c_e: f64,
    pub c_v: f64,
    pub rho0: f64,
    pub trust_radius: f64,
}

impl Default for AuxParams {
    fn default() -> Self {
        Self {
            c_u: 10.0,
            c_e: 100.0,
            c_v: 100.0,
            rho0: 1.0,
            trust_radius: DEFAULT_TRUST_RADIUS,
        }
    }
}

impl AuxParams {
    /// Checks that every coefficient is strictly positive and finite.
    pub fn validate(&self) -> Result<(), DtpError> {
        for (name, v) in [
            ("c_u", self.c_u),
            ("c_e", self.c_e),
            ("c_v", self.c_v),
            ("rho0", self.rho0),
            ("trust_radius", self.trust_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DtpError::InvalidParameter { name, value: v });
            }
        }
        Ok(())
    }

    fn tolerance(&self) -> f64 {
        STRAIN_TOLERANCE * self.c_e.max(1.0)
    }
}

/// Dual field values at a point for statics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StaticPointDual {
    pub lambda: f64,
    pub lambda_x: f64,
    pub mu: f64,
    pub mu_x: f64,
}

/// Space-time derivatives of the dual fields `L`, `P` at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DynamicPointDual {
    pub l_t: f64,
    pub l_x: f64,
    pub p_t: f64,
    pub p_x: f64,
}

/// Base state at a point. For dynamics `u_bar` holds the base velocity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointBase {
    pub u_bar: f64,
    pub e_bar: f64,
}

/// Primal values produced by the mapping (`u` is the velocity in dynamics).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPrimal {
    pub u: f64,
    pub e: f64,
}

/// Chain-rule factors of the static mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticDerivatives {
    pub du_dlambda_x: f64,
    pub du_dmu: f64,
    pub de_dlambda: f64,
    pub de_dmu_x: f64,
}

/// Chain-rule factors of the dynamic mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicDerivatives {
    pub dv_dl_t: f64,
    pub dv_dp_x: f64,
    pub de_dp_t: f64,
    pub de_dl_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DtpError {
    #[error("strain equation has no sign change on [{lo}, {hi}] (g = {g_lo}, {g_hi}); c_e too small or dual state outside the trust region")]
    NoBracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
    #[error("strain equation is not monotone on the bracket (g' = {slope} at e = {at})")]
    NonMonotone { at: f64, slope: f64 },
    #[error("strain equation derivative {slope} is numerically zero")]
    SingularDerivative { slope: f64 },
    #[error("strain solve did not reach tolerance (|g| = {residual})")]
    NoConvergence { residual: f64 },
    #[error("parameter {name} must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

impl From<RootError> for DtpError {
    fn from(e: RootError) -> Self {
        match e {
            RootError::NoBracket { lo, hi, f_lo, f_hi } => DtpError::NoBracket {
                lo,
                hi,
                g_lo: f_lo,
                g_hi: f_hi,
            },
            RootError::NoConvergence { residual, .. } => DtpError::NoConvergence { residual },
        }
    }
}

/// `c_e (e - ē)|e - ē| + c_e (e - ē)`, the strain part of `dH/de`.
fn strain_penalty(e: f64, e_bar: f64, c_e: f64) -> (f64, f64) {
    let d = e - e_bar;
    (c_e * (d * d.abs() + d), c_e * (2.0 * d.abs() + 1.0))
}

/// Static strain equation `g(e)` and its derivative.
pub fn static_strain_equation(e: f64, d: &StaticPointDual, b: &PointBase, p: &AuxParams) -> (f64, f64) {
    let (h, dh) = strain_penalty(e, b.e_bar, p.c_e);
    let g = -material::flux_derivative(e) * d.mu_x - d.lambda + h;
    let dg = -12.0 * (e - 1.0) * d.mu_x + dh;
    (g, dg)
}

/// Dynamic strain equation `g(e)` and its derivative.
pub fn dynamic_strain_equation(e: f64, d: &DynamicPointDual, b: &PointBase, p: &AuxParams) -> (f64, f64) {
    let (h, dh) = strain_penalty(e, b.e_bar, p.c_e);
    let g = h - d.p_t + d.l_x * material::stiffness(e);
    let dg = dh + d.l_x * material::stiffness_derivative(e);
    (g, dg)
}

fn solve_strain<F>(eq: F, e_bar: f64, p: &AuxParams) -> Result<f64, DtpError>
where
    F: Fn(f64) -> (f64, f64),
{
    let r = p.trust_radius;
    // g' is linear on either side of its kink at ē, so the monotone branch
    // through ē ends where that line crosses zero.
    let slope0 = eq(e_bar).1;
    if !(slope0 > 0.0) {
        return Err(DtpError::NonMonotone { at: e_bar, slope: slope0 });
    }
    let branch_end = |dir: f64| {
        let slope_end = eq(e_bar + dir * r).1;
        if slope_end > 0.0 {
            e_bar + dir * r
        } else {
            let reach = r * slope0 / (slope0 - slope_end);
            e_bar + dir * reach * (1.0 - 1e-9)
        }
    };
    let (lo, hi) = (branch_end(-1.0), branch_end(1.0));
    let tol = p.tolerance();
    let root = newton_bisect(&eq, lo, hi, e_bar, tol, 200)?;
    if root.residual > tol {
        return Err(DtpError::NoConvergence { residual: root.residual });
    }
    Ok(root.x)
}

/// Static mapping: `u = (λ_x + μ)/c_u + ū` and the root of the strain equation.
pub fn dtp_static(d: &StaticPointDual, b: &PointBase, p: &AuxParams) -> Result<PointPrimal, DtpError> {
    let u = (d.lambda_x + d.mu) / p.c_u + b.u_bar;
    let e = solve_strain(|e| static_strain_equation(e, d, b, p), b.e_bar, p)?;
    Ok(PointPrimal { u, e })
}

/// Implicit derivatives of [`dtp_static`] at a solved strain `e_hat`.
pub fn dtp_static_derivatives(
    d: &StaticPointDual,
    b: &PointBase,
    p: &AuxParams,
    e_hat: f64,
) -> Result<StaticDerivatives, DtpError> {
    let slope = static_strain_equation(e_hat, d, b, p).1;
    if slope.abs() < 1e-12 * p.c_e {
        return Err(DtpError::SingularDerivative { slope });
    }
    Ok(StaticDerivatives {
        du_dlambda_x: 1.0 / p.c_u,
        du_dmu: 1.0 / p.c_u,
        de_dlambda: 1.0 / slope,
        de_dmu_x: material::flux_derivative(e_hat) / slope,
    })
}

/// Dynamic mapping: `v = (ρ0 L_t - P_x)/c_v + v̄` and the root of the strain equation.
pub fn dtp_dynamic(d: &DynamicPointDual, b: &PointBase, p: &AuxParams) -> Result<PointPrimal, DtpError> {
    let v = (p.rho0 * d.l_t - d.p_x) / p.c_v + b.u_bar;
    let e = solve_strain(|e| dynamic_strain_equation(e, d, b, p), b.e_bar, p)?;
    Ok(PointPrimal { u: v, e })
}

/// Implicit derivatives of [`dtp_dynamic`] at a solved strain `e_hat`.
pub fn dtp_dynamic_derivatives(
    d: &DynamicPointDual,
    b: &PointBase,
    p: &AuxParams,
    e_hat: f64,
) -> Result<DynamicDerivatives, DtpError> {
    let slope = dynamic_strain_equation(e_hat, d, b, p).1;
    if slope.abs() < 1e-12 * p.c_e {
        return Err(DtpError::SingularDerivative { slope });
    }
    Ok(DynamicDerivatives {
        dv_dl_t: p.rho0 / p.c_v,
        dv_dp_x: -1.0 / p.c_v,
        de_dp_t: 1.0 / slope,
        de_dl_x: -material::stiffness(e_hat) / slope,
    })
}
