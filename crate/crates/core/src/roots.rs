//! Safeguarded Newton iteration on a bracketed scalar root.

/// Why a bracketed solve gave up.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}] (f = {f_lo}, {f_hi})")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no convergence after {iterations} iterations, |f| = {residual}")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Result of a bracketed solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Finds `x` in `[lo, hi]` with `|f(x)| <= tol`, given `fdf(x) = (f, f')`.
///
/// Newton steps are taken from `x0` whenever they stay strictly inside the
/// current bracket; otherwise the bracket is bisected. The bracket shrinks every
/// iteration, so a sign change is always enough for convergence.
pub fn newton_bisect<F>(fdf: F, lo: f64, hi: f64, x0: f64, tol: f64, max_iter: usize) -> Result<Root, RootError>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo, hi);
    let (fa, _) = fdf(a);
    let (fb, _) = fdf(b);
    if fa.abs() <= tol {
        return Ok(Root { x: a, residual: fa.abs(), iterations: 0 });
    }
    if fb.abs() <= tol {
        return Ok(Root { x: b, residual: fb.abs(), iterations: 0 });
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(RootError::NoBracket { lo, hi, f_lo: fa, f_hi: fb });
    }
    let rising = fb > 0.0;
    let mut x = if x0 > a && x0 < b { x0 } else { 0.5 * (a + b) };
    let mut best = (f64::INFINITY, x);
    for it in 1..=max_iter {
        let (f, df) = fdf(x);
        if f.abs() < best.0 {
            best = (f.abs(), x);
        }
        if f == 0.0 {
            return Ok(Root { x, residual: 0.0, iterations: it });
        }
        let newton = x - f / df;
        // Keep polishing past `tol` until the Newton correction reaches round-off.
        if f.abs() <= tol && (newton - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Ok(Root { x: best.1, residual: best.0, iterations: it });
        }
        if (f > 0.0) == rising {
            b = x;
        } else {
            a = x;
        }
        if b - a <= 2.0 * f64::EPSILON * (a.abs() + b.abs()).max(1.0) {
            break;
        }
        x = if df != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    if best.0 <= tol {
        return Ok(Root { x: best.1, residual: best.0, iterations: max_iter });
    }
    Err(RootError::NoConvergence { iterations: max_iter, residual: best.0 })
}
