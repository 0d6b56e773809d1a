//! Plain Newton-Raphson on an assembled nonlinear system.
//!
//! Each iteration evaluates the residual, stops once its largest entry falls
//! below `tol`, and otherwise solves `J dD = -R` and updates the unknowns.
//! The convergence test is therefore always made on a freshly evaluated
//! residual at the returned iterate.

use crate::linalg::SparseMatrix;

pub use crate::linalg::{linear_solve, LinearSolveError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Accepted `max |R_i|` over the free unknowns.
    pub tol: f64,
    pub max_iter: usize,
    /// Residual norms above this abort the solve.
    pub divergence_threshold: f64,
    /// Fraction of the Newton step applied; 1 is plain Newton.
    pub damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            divergence_threshold: 1e8,
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("tol must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("max_iter must be at least 1")]
    MaxIter,
    #[error("divergence_threshold must be positive, got {0}")]
    Divergence(f64),
    #[error("damping must lie in (0, 1], got {0}")]
    Damping(f64),
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ConfigError::Tolerance(self.tol));
        }
        if self.max_iter == 0 {
            return Err(ConfigError::MaxIter);
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(ConfigError::Divergence(self.divergence_threshold));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(ConfigError::Damping(self.damping));
        }
        Ok(())
    }
}

/// Why a Newton solve stopped without converging.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NewtonFailure {
    #[error("no convergence within {0} iterations")]
    MaxIterations(usize),
    #[error("linear solve failed: {0}")]
    SingularJacobian(LinearSolveError),
    #[error("residual {0:e} exceeded the divergence threshold")]
    Diverged(f64),
    #[error("DtP mapping failed: {0}")]
    DtpFailure(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    /// Newton updates applied.
    pub iterations: usize,
    /// `max |R_i|` at each evaluated iterate, starting with the initial guess.
    pub history: Vec<f64>,
    pub converged: bool,
    pub failure: Option<NewtonFailure>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn into_result(self) -> Result<Self, NewtonFailure> {
        match self.failure.clone() {
            Some(f) => Err(f),
            None => Ok(self),
        }
    }
}

/// A square nonlinear system over the free unknowns.
pub trait NonlinearSystem {
    type Error: std::fmt::Display;

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>, Self::Error>;

    fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix, Self::Error>;

    fn residual_and_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, SparseMatrix), Self::Error> {
        Ok((self.residual(x)?, self.jacobian(x)?))
    }
}

/// Adapts a pair of closures to [`NonlinearSystem`].
pub struct FnSystem<R, J> {
    pub residual: R,
    pub jacobian: J,
}

impl<R, J, E> NonlinearSystem for FnSystem<R, J>
where
    R: Fn(&[f64]) -> Result<Vec<f64>, E>,
    J: Fn(&[f64]) -> Result<SparseMatrix, E>,
    E: std::fmt::Display,
{
    type Error = E;

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>, E> {
        (self.residual)(x)
    }

    fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix, E> {
        (self.jacobian)(x)
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Runs Newton from `initial`. Returns the last iterate together with the
/// report; the iterate satisfies `max |R| < tol` exactly when
/// `report.converged` is set.
pub fn newton_solve<S: NonlinearSystem>(system: &S, initial: Vec<f64>, config: &NewtonConfig) -> (Vec<f64>, NewtonReport) {
    let mut x = initial;
    let mut report = NewtonReport {
        iterations: 0,
        history: Vec::new(),
        converged: false,
        failure: None,
    };
    loop {
        let r = match system.residual(&x) {
            Ok(r) => r,
            Err(e) => {
                report.failure = Some(NewtonFailure::DtpFailure(e.to_string()));
                return (x, report);
            }
        };
        let d = max_abs(&r);
        report.history.push(d);
        if d < config.tol {
            report.converged = true;
            return (x, report);
        }
        if !d.is_finite() || d > config.divergence_threshold {
            report.failure = Some(NewtonFailure::Diverged(d));
            return (x, report);
        }
        if report.iterations >= config.max_iter {
            report.failure = Some(NewtonFailure::MaxIterations(config.max_iter));
            return (x, report);
        }
        let j = match system.jacobian(&x) {
            Ok(j) => j,
            Err(e) => {
                report.failure = Some(NewtonFailure::DtpFailure(e.to_string()));
                return (x, report);
            }
        };
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = match linear_solve(&j, &rhs) {
            Ok(dx) => dx,
            Err(e) => {
                report.failure = Some(NewtonFailure::SingularJacobian(e));
                return (x, report);
            }
        };
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += config.damping * di;
        }
        report.iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    fn matrix(rows: &[&[f64]]) -> SparseMatrix {
        let mut b = TripletBuilder::new(rows.len());
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    b.add(i, j, v);
                }
            }
        }
        b.build()
    }

    #[test]
    fn affine_map_takes_one_step() {
        let j = matrix(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let rhs = [1.0, -2.0];
        let sys = FnSystem {
            residual: |x: &[f64]| -> Result<Vec<f64>, String> {
                Ok(j.mul_vec(x).iter().zip(&rhs).map(|(a, b)| a - b).collect())
            },
            jacobian: |_: &[f64]| -> Result<SparseMatrix, String> { Ok(j.clone()) },
        };
        let (x, rep) = newton_solve(&sys, vec![0.0, 0.0], &NewtonConfig::default());
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_convergence_on_scalar_problem() {
        let sys = FnSystem {
            residual: |x: &[f64]| -> Result<Vec<f64>, String> { Ok(vec![x[0].powi(3) - 2.0]) },
            jacobian: |x: &[f64]| -> Result<SparseMatrix, String> { Ok(matrix(&[&[3.0 * x[0] * x[0]]])) },
        };
        let (x, rep) = newton_solve(&sys, vec![1.0], &NewtonConfig::default());
        assert!(rep.converged);
        assert!((x[0] - 2f64.cbrt()).abs() < 1e-12);
        let h = &rep.history;
        let n = h.len();
        assert!(h[n - 2] / h[n - 3] < 0.1 * h[n - 3] / h[n - 4]);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let sys = FnSystem {
            residual: |_: &[f64]| -> Result<Vec<f64>, String> { Ok(vec![1.0, 1.0]) },
            jacobian: |_: &[f64]| -> Result<SparseMatrix, String> { Ok(matrix(&[&[1.0, 1.0], &[1.0, 1.0]])) },
        };
        let (_, rep) = newton_solve(&sys, vec![0.0, 0.0], &NewtonConfig::default());
        assert!(matches!(rep.failure, Some(NewtonFailure::SingularJacobian(_))));
        assert!(!rep.converged);
    }

    #[test]
    fn evaluation_errors_propagate() {
        let sys = FnSystem {
            residual: |_: &[f64]| -> Result<Vec<f64>, String> { Err("no root".into()) },
            jacobian: |_: &[f64]| -> Result<SparseMatrix, String> { unreachable!() },
        };
        let (_, rep) = newton_solve(&sys, vec![0.0], &NewtonConfig::default());
        assert_eq!(rep.failure, Some(NewtonFailure::DtpFailure("no root".into())));
    }

    #[test]
    fn config_validation() {
        assert!(NewtonConfig::default().validate().is_ok());
        let bad = NewtonConfig { tol: -1.0, ..Default::default() };
        assert_eq!(bad.validate(), Err(ConfigError::Tolerance(-1.0)));
        let bad = NewtonConfig { damping: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
