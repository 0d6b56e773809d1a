//! Pointwise dual densities for two multi-dimensional hyperelastic models,
//! evaluated numerically, together with the explicit lower and upper bounds
//! that make the corresponding dual functionals coercive.
//!
//! Saint Venant-Kirchhoff, with auxiliary potential `H(y, F) = ¼|y|⁴ +
//! ((G + L/2)/2)|FᵀF|²`:
//!
//! `g(A, a, B) = sup_{F, y} a·y + A:F + B:P(F) - H(y, F)`
//!
//! Incompressible neo-Hookean in two dimensions, with `H = ½|y|² + ½|F|² +
//! ¼p⁴`, the pressure `p` as an extra primal variable and `s` dual to the
//! constraint `det F = 1`:
//!
//! `g(A, a, B, s) = sup_{F, y, p} a·y + s(det F - 1) + A:F + B:(F - p cof F) - H`
//!
//! The `y`-part of each supremum has a closed form. The remaining supremum
//! over `F` (and `p`) is taken by multistart local ascent: a coarse grid of
//! seeds plus the explicit witnesses below, the best few refined by
//! Newton steps on a finite-difference Hessian with a gradient fallback.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix2, SMatrix, SVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::material::{cofactor, svk_stress, SvkParams};
use crate::report::Table;

/// Objective values above this count as `+∞`.
pub const INFINITY_THRESHOLD: f64 = 1e12;
/// Slack allowed in the convex-combination inequality.
pub const CONVEXITY_TOL: f64 = 1e-6;
/// Seeds fill the ball `|F| ≤ GRID_RADIUS`.
pub const GRID_RADIUS: f64 = 5.0;
pub const GRID_POINTS: usize = 17;
/// Ranked seeds refined by local ascent, on top of the pinned ones.
pub const ASCENT_STARTS: usize = 8;
const ASCENT_ITERS: usize = 300;
const RANDOM_SEEDS: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConvexityError {
    #[error("point lies in regime {actual}, not {requested}")]
    RegimeMismatch { requested: SvkRegime, actual: SvkRegime },
    #[error("SVK parameters are for d = {params}, the point has d = {point}")]
    Dimension { params: usize, point: usize },
}

/// A numeric supremum and the argument that attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct Supremum {
    pub value: f64,
    /// Column-major entries of `F`, followed by `p` for neo-Hookean.
    pub maximizer: Vec<f64>,
}

/// `sup_y a·y - ¼|y|⁴ = ¾|a|^{4/3}`.
pub fn quartic_conjugate(a_norm: f64) -> f64 {
    0.75 * a_norm.powf(4.0 / 3.0)
}

/// `sup_y a·y - ½|y|² = ½|a|²`.
pub fn quadratic_conjugate(a_norm: f64) -> f64 {
    0.5 * a_norm * a_norm
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// Ascent direction from a central-difference Hessian of `grad`, if that
/// Hessian is negative definite.
fn newton_direction(grad: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let h = 1e-5 * scale;
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let gp = grad(&xp);
        xp[j] = x[j] - h;
        let gm = grad(&xp);
        xp[j] = x[j];
        for i in 0..n {
            hess[(i, j)] = -(gp[i] - gm[i]) / (2.0 * h);
        }
    }
    let sym = (&hess + hess.transpose()) * 0.5;
    let chol = sym.cholesky()?;
    let d = chol.solve(&DVector::from_column_slice(g));
    let d: Vec<f64> = d.iter().copied().collect();
    (d.iter().all(|v| v.is_finite()) && dot(&d, g) > 0.0).then_some(d)
}

/// Local ascent from `x0`. Returns `+∞` once the objective passes
/// [`INFINITY_THRESHOLD`].
fn local_ascent(f: &dyn Fn(&[f64]) -> f64, grad: &dyn Fn(&[f64]) -> Vec<f64>, x0: &[f64]) -> (f64, Vec<f64>) {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return (f64::NEG_INFINITY, x);
    }
    let mut step = 1.0;
    for _ in 0..ASCENT_ITERS {
        if fx > INFINITY_THRESHOLD {
            return (f64::INFINITY, x);
        }
        let g = grad(&x);
        if norm(&g) == 0.0 {
            break;
        }
        let (d, mut t, newton) = match newton_direction(grad, &x, &g) {
            Some(d) => (d, 1.0, true),
            None => (g.clone(), step / norm(&g).max(1.0), false),
        };
        let slope = dot(&d, &g);
        let mut next = None;
        for _ in 0..80 {
            let xn = axpy(&x, t, &d);
            let fnew = f(&xn);
            if fnew.is_finite() && fnew >= fx + 1e-4 * t * slope {
                next = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = next else { break };
        if !newton {
            step = (2.0 * t * norm(&g).max(1.0)).min(1e6);
        }
        let gain = fnew - fx;
        x = xn;
        fx = fnew;
        if gain <= 1e-15 * fx.abs().max(1.0) {
            break;
        }
    }
    if fx > INFINITY_THRESHOLD {
        return (f64::INFINITY, x);
    }
    (fx, x)
}

/// Ascends every pinned seed and the best [`ASCENT_STARTS`] ranked seeds.
fn multistart(
    f: &dyn Fn(&[f64]) -> f64,
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
    pinned: &[Vec<f64>],
    ranked: &[Vec<f64>],
) -> Supremum {
    let mut scored: Vec<(f64, usize)> = ranked
        .iter()
        .enumerate()
        .map(|(i, x)| (f(x), i))
        .filter(|(v, _)| !v.is_nan())
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let starts = pinned
        .iter()
        .chain(scored.iter().take(ASCENT_STARTS).map(|&(_, i)| &ranked[i]));
    let mut best = Supremum {
        value: f64::NEG_INFINITY,
        maximizer: pinned.first().or(ranked.first()).cloned().unwrap_or_default(),
    };
    for x0 in starts {
        let (v, x) = local_ascent(f, grad, x0);
        if v > best.value {
            best = Supremum { value: v, maximizer: x };
            if v == f64::INFINITY {
                break;
            }
        }
    }
    best
}

/// Matrices with `|F| ≤ GRID_RADIUS` on a `GRID_POINTS`-per-entry lattice,
/// for `d = 2`.
fn grid_2x2() -> &'static [[f64; 4]] {
    static GRID: OnceLock<Vec<[f64; 4]>> = OnceLock::new();
    GRID.get_or_init(|| {
        let step = 2.0 * GRID_RADIUS / (GRID_POINTS - 1) as f64;
        let axis: Vec<f64> = (0..GRID_POINTS).map(|i| -GRID_RADIUS + step * i as f64).collect();
        let mut out = Vec::new();
        for &a in &axis {
            for &b in &axis {
                for &c in &axis {
                    for &d in &axis {
                        if a * a + b * b + c * c + d * d <= GRID_RADIUS * GRID_RADIUS + 1e-12 {
                            out.push([a, b, c, d]);
                        }
                    }
                }
            }
        }
        out
    })
}

/// Fixed pseudo-random seeds in the ball `|x| ≤ GRID_RADIUS`.
fn random_seeds(n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + n as u64);
    (0..RANDOM_SEEDS)
        .map(|_| {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = norm(&v).max(1e-12);
            let radius = GRID_RADIUS * rng.gen_range(0.0f64..1.0).sqrt();
            v.iter().map(|x| x * radius / r).collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Saint Venant-Kirchhoff
// ---------------------------------------------------------------------------

/// Arguments of the SVK dual density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvkDualPoint<const D: usize> {
    /// Pairs with the multiplier `μ` of `F = ∇y`.
    pub mu: SMatrix<f64, D, D>,
    /// Pairs with `div μ`.
    pub div_mu: SVector<f64, D>,
    /// Pairs with `∇λ`, the gradient of the equilibrium multiplier.
    pub grad_lambda: SMatrix<f64, D, D>,
}

impl<const D: usize> SvkDualPoint<D> {
    pub fn zero() -> Self {
        Self {
            mu: SMatrix::zeros(),
            div_mu: SVector::zeros(),
            grad_lambda: SMatrix::zeros(),
        }
    }

    /// `mu` and `grad_lambda` column-major, with `div_mu` between them.
    pub fn coords(&self) -> Vec<f64> {
        self.mu
            .iter()
            .chain(self.div_mu.iter())
            .chain(self.grad_lambda.iter())
            .copied()
            .collect()
    }

    /// Inverse of [`Self::coords`]. Panics on a length mismatch.
    pub fn from_coords(c: &[f64]) -> Self {
        assert_eq!(c.len(), 2 * D * D + D);
        Self {
            mu: SMatrix::from_column_slice(&c[..D * D]),
            div_mu: SVector::from_column_slice(&c[D * D..D * D + D]),
            grad_lambda: SMatrix::from_column_slice(&c[D * D + D..]),
        }
    }
}

/// Which explicit witness the lower bound uses, by the size of
/// `|∇λ|³` relative to the shifted load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SvkRegime {
    /// `|B|³ ≤ (27/512)|Ã|`, witness `F = |Ã|^{-2/3} Ã`.
    Small,
    /// `(27/512)|Ã| < |B|³ ≤ (8d/9)|Ã|`, witness `F = |B|^{-1/2}|Ã|^{-1/2} Ã / √3`.
    Intermediate,
    /// `(8d/9)|Ã| < |B|³`, witness `F = 3B`.
    Large,
}

impl SvkRegime {
    pub const ALL: [SvkRegime; 3] = [SvkRegime::Small, SvkRegime::Intermediate, SvkRegime::Large];

    pub fn case_id(self) -> u8 {
        match self {
            SvkRegime::Small => 1,
            SvkRegime::Intermediate => 2,
            SvkRegime::Large => 3,
        }
    }

    pub fn from_case_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.case_id() == id)
    }
}

impl std::fmt::Display for SvkRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "svk{}", self.case_id())
    }
}

fn check_dim<const D: usize>(params: &SvkParams) {
    assert_eq!(params.dim, D, "SVK parameters are for d = {}, the point has d = {D}", params.dim);
}

/// `2G + L`, the factor pulled out of the `F`-supremum.
fn svk_scale(params: &SvkParams) -> f64 {
    2.0 * params.shear_modulus + params.lame
}

/// Shifted load `Ã = (A - (G + Ld/2) B) / (2G + L)`.
pub fn svk_shifted_load<const D: usize>(point: &SvkDualPoint<D>, params: &SvkParams) -> SMatrix<f64, D, D> {
    check_dim::<D>(params);
    (point.mu - point.grad_lambda * params.identity_shift()) / svk_scale(params)
}

/// `A:F + B:P(F) - ((G + L/2)/2)|FᵀF|²`, the `F`-dependent part of the
/// SVK supremand.
pub fn svk_objective<const D: usize>(f: &SMatrix<f64, D, D>, point: &SvkDualPoint<D>, params: &SvkParams) -> f64 {
    let c = f.transpose() * f;
    let quartic = 0.5 * (params.shear_modulus + 0.5 * params.lame) * c.norm_squared();
    point.mu.dot(f) + point.grad_lambda.dot(&svk_stress(f, params)) - quartic
}

/// Gradient of [`svk_objective`] in `F`.
pub fn svk_objective_gradient<const D: usize>(
    f: &SMatrix<f64, D, D>,
    point: &SvkDualPoint<D>,
    params: &SvkParams,
) -> SMatrix<f64, D, D> {
    let (g, l) = (params.shear_modulus, params.lame);
    let b = &point.grad_lambda;
    let c = f.transpose() * f;
    let cubic = b * c + f * b.transpose() * f + f * f.transpose() * b;
    point.mu + cubic * g + f * (l * b.dot(f)) + b * (0.5 * l * f.norm_squared() - params.identity_shift())
        - f * c * (2.0 * (g + 0.5 * l))
}

/// `Ã:F + B:(G FFᵀF + (L/2)|F|²F)/(2G + L) - ¼|FᵀF|²`, which is
/// [`svk_objective`] divided by `2G + L`.
pub fn svk_reduced_objective<const D: usize>(
    f: &SMatrix<f64, D, D>,
    shifted: &SMatrix<f64, D, D>,
    grad_lambda: &SMatrix<f64, D, D>,
    params: &SvkParams,
) -> f64 {
    let c = f.transpose() * f;
    let cubic = (f * c) * params.shear_modulus + f * (0.5 * params.lame * f.norm_squared());
    shifted.dot(f) + grad_lambda.dot(&cubic) / svk_scale(params) - 0.25 * c.norm_squared()
}

pub fn svk_regime<const D: usize>(point: &SvkDualPoint<D>, params: &SvkParams) -> SvkRegime {
    let at = svk_shifted_load(point, params).norm();
    let b3 = point.grad_lambda.norm().powi(3);
    if b3 <= 27.0 / 512.0 * at {
        SvkRegime::Small
    } else if b3 <= 8.0 * D as f64 / 9.0 * at {
        SvkRegime::Intermediate
    } else {
        SvkRegime::Large
    }
}

/// The witness deformation gradient for `regime`, evaluated by formula
/// whether or not the point lies in that regime. Degenerate formulas
/// (zero norms in a denominator) give `F = 0`.
pub fn svk_witness<const D: usize>(point: &SvkDualPoint<D>, params: &SvkParams, regime: SvkRegime) -> SMatrix<f64, D, D> {
    let at = svk_shifted_load(point, params);
    let (an, bn) = (at.norm(), point.grad_lambda.norm());
    match regime {
        SvkRegime::Small if an > 0.0 => at * an.powf(-2.0 / 3.0),
        SvkRegime::Intermediate if an > 0.0 && bn > 0.0 => at / (3f64.sqrt() * (an * bn).sqrt()),
        SvkRegime::Large => point.grad_lambda * 3.0,
        _ => SMatrix::zeros(),
    }
}

/// Lower bound on the reduced supremum `h(Ã, B)` that the witness for
/// `regime` is constructed to certify.
pub fn svk_regime_bound(shifted_norm: f64, grad_norm: f64, dim: usize, regime: SvkRegime) -> f64 {
    let a43 = shifted_norm.powf(4.0 / 3.0);
    let b4 = grad_norm.powi(4);
    let d = dim as f64;
    match regime {
        SvkRegime::Small => 3.0 / 16.0 * (a43 + b4),
        SvkRegime::Intermediate => {
            let c = 2.0 / (3.0 * 3f64.sqrt()) - (512.0f64 / 27.0).sqrt() / 36.0;
            let r = 9.0 / (8.0 * d);
            c * (0.5 * r.powf(1.0 / 6.0) * a43 + 0.5 * r.powf(1.5) * b4)
        }
        SvkRegime::Large => {
            let c = 27.0 / (16.0 * d);
            c * b4 + c * (8.0 * d / 9.0).powf(4.0 / 3.0) * a43
        }
    }
}

/// A witness evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvkWitness<const D: usize> {
    pub regime: SvkRegime,
    pub f: SMatrix<f64, D, D>,
    /// Reduced objective at `f`.
    pub value: f64,
    /// The regime's stated lower bound on the reduced supremum.
    pub bound: f64,
}

impl<const D: usize> SvkWitness<D> {
    pub fn satisfies_bound(&self) -> bool {
        self.value >= self.bound - 1e-12 * self.bound.abs().max(1.0)
    }
}

/// Evaluates the reduced objective at the witness for `regime`. Fails if
/// the point is not in that regime.
pub fn svk_witness_value<const D: usize>(
    point: &SvkDualPoint<D>,
    params: &SvkParams,
    regime: SvkRegime,
) -> Result<SvkWitness<D>, ConvexityError> {
    if params.dim != D {
        return Err(ConvexityError::Dimension { params: params.dim, point: D });
    }
    let actual = svk_regime(point, params);
    if actual != regime {
        return Err(ConvexityError::RegimeMismatch { requested: regime, actual });
    }
    let at = svk_shifted_load(point, params);
    let f = svk_witness(point, params, regime);
    Ok(SvkWitness {
        regime,
        f,
        value: svk_reduced_objective(&f, &at, &point.grad_lambda, params),
        bound: svk_regime_bound(at.norm(), point.grad_lambda.norm(), D, regime),
    })
}

/// `¾|a|^{4/3} + (2G + L)·bound(regime)`, the lower bound on `g_svk` built
/// from the witness constants of the point's regime.
pub fn svk_lower_bound<const D: usize>(point: &SvkDualPoint<D>, params: &SvkParams) -> (SvkRegime, f64) {
    let regime = svk_regime(point, params);
    let at = svk_shifted_load(point, params);
    let h = svk_regime_bound(at.norm(), point.grad_lambda.norm(), D, regime);
    (regime, quartic_conjugate(point.div_mu.norm()) + svk_scale(params) * h)
}

/// SVK dual density.
pub fn g_svk<const D: usize>(point: &SvkDualPoint<D>, params: &SvkParams) -> f64 {
    svk_supremum(point, params, &[]).value
}

/// SVK dual density with its maximizing `F`. `extra_seeds` are added to
/// the pinned starting points.
pub fn svk_supremum<const D: usize>(point: &SvkDualPoint<D>, params: &SvkParams, extra_seeds: &[Vec<f64>]) -> Supremum {
    check_dim::<D>(params);
    let f = |x: &[f64]| svk_objective(&SMatrix::<f64, D, D>::from_column_slice(x), point, params);
    let grad = |x: &[f64]| {
        svk_objective_gradient(&SMatrix::<f64, D, D>::from_column_slice(x), point, params)
            .iter()
            .copied()
            .collect::<Vec<f64>>()
    };
    let mut pinned: Vec<Vec<f64>> = SvkRegime::ALL
        .iter()
        .map(|&r| svk_witness(point, params, r).iter().copied().collect())
        .collect();
    pinned.extend(extra_seeds.iter().filter(|s| s.len() == D * D).cloned());

    let mut ranked: Vec<Vec<f64>> = Vec::new();
    if D == 2 {
        ranked.extend(grid_2x2().iter().map(|g| g.to_vec()));
    }
    let at = svk_shifted_load(point, params);
    let b = point.grad_lambda;
    for dir in [at, b, b.transpose(), point.mu, SMatrix::<f64, D, D>::identity()] {
        let n = dir.norm();
        if n == 0.0 {
            continue;
        }
        for i in 0..GRID_POINTS {
            let t = -GRID_RADIUS + 2.0 * GRID_RADIUS * i as f64 / (GRID_POINTS - 1) as f64;
            ranked.push((dir * (t / n)).iter().copied().collect());
        }
    }
    ranked.extend(random_seeds(D * D));
    let sup = multistart(&f, &grad, &pinned, &ranked);
    Supremum {
        value: quartic_conjugate(point.div_mu.norm()) + sup.value,
        maximizer: sup.maximizer,
    }
}

// ---------------------------------------------------------------------------
// Incompressible neo-Hookean, d = 2
// ---------------------------------------------------------------------------

/// Arguments of the neo-Hookean dual density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeoHookeanDualPoint {
    pub mu: Matrix2<f64>,
    pub div_mu: Vector2<f64>,
    pub grad_lambda: Matrix2<f64>,
    /// Pairs with the multiplier of `det F = 1`.
    pub det_multiplier: f64,
}

impl NeoHookeanDualPoint {
    pub fn zero() -> Self {
        Self {
            mu: Matrix2::zeros(),
            div_mu: Vector2::zeros(),
            grad_lambda: Matrix2::zeros(),
            det_multiplier: 0.0,
        }
    }

    /// `mu`, `div_mu`, `grad_lambda` (matrices column-major), then `s`.
    pub fn coords(&self) -> Vec<f64> {
        self.mu
            .iter()
            .chain(self.div_mu.iter())
            .chain(self.grad_lambda.iter())
            .copied()
            .chain(std::iter::once(self.det_multiplier))
            .collect()
    }

    pub fn from_coords(c: &[f64]) -> Self {
        assert_eq!(c.len(), 11);
        Self {
            mu: Matrix2::from_column_slice(&c[..4]),
            div_mu: Vector2::from_column_slice(&c[4..6]),
            grad_lambda: Matrix2::from_column_slice(&c[6..10]),
            det_multiplier: c[10],
        }
    }
}

/// `s det F + A:F + B:(F - p cof F) - ¼p⁴ - ½|F|²`.
pub fn neo_hookean_objective(f: &Matrix2<f64>, p: f64, point: &NeoHookeanDualPoint) -> f64 {
    point.det_multiplier * f.determinant() + point.mu.dot(f) + point.grad_lambda.dot(&(f - cofactor(f) * p))
        - 0.25 * p.powi(4)
        - 0.5 * f.norm_squared()
}

/// Optimal pressure for fixed `F` and the resulting objective. With
/// `k = B:cof F` the `p`-part is `sup_p -pk - ¼p⁴ = ¾|k|^{4/3}` at
/// `p = -∛k`.
pub fn neo_hookean_pressure_sup(f: &Matrix2<f64>, point: &NeoHookeanDualPoint) -> (f64, f64) {
    let k = point.grad_lambda.dot(&cofactor(f));
    let p = -k.cbrt();
    let value = point.det_multiplier * f.determinant() + (point.mu + point.grad_lambda).dot(f) + 0.75 * k.abs().powf(4.0 / 3.0)
        - 0.5 * f.norm_squared();
    (p, value)
}

fn neo_hookean_gradient(f: &Matrix2<f64>, p: f64, point: &NeoHookeanDualPoint) -> (Matrix2<f64>, f64) {
    let cb = cofactor(&point.grad_lambda);
    let gf = cofactor(f) * point.det_multiplier + point.mu + point.grad_lambda - cb * p - f;
    let gp = -cb.dot(f) - p.powi(3);
    (gf, gp)
}

/// Checks growth along the ray `F = t·D`, `p = 0`, with `D = Id` for
/// `s > 0` and `D = diag(1, -1)` otherwise. True when the objective passes
/// [`INFINITY_THRESHOLD`] and is still increasing there.
pub fn neo_hookean_unbounded(point: &NeoHookeanDualPoint) -> bool {
    let dir = if point.det_multiplier > 0.0 {
        Matrix2::identity()
    } else {
        Matrix2::new(1.0, 0.0, 0.0, -1.0)
    };
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=24 {
        let t = 10f64.powi(k);
        let v = neo_hookean_objective(&(dir * t), 0.0, point);
        if v > INFINITY_THRESHOLD && v > prev {
            return true;
        }
        prev = v;
    }
    false
}

/// Which witness certifies the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeoRegime {
    /// `|A + B| ≥ |B|²/(4√8)`: `F = (A + B)/2`, `p = 0`.
    SumDominant,
    /// Otherwise: `cof F = -|B| B/√8`, `p = |B|/√2`.
    GradientDominant,
}

impl std::fmt::Display for NeoRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NeoRegime::SumDominant => "neo_sum",
            NeoRegime::GradientDominant => "neo_grad",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeoWitness {
    pub regime: NeoRegime,
    pub f: Matrix2<f64>,
    pub p: f64,
    /// Objective at `(f, p)`.
    pub value: f64,
    /// Stated lower bound on the `(F, p)`-supremum, valid for `|s| ≤ 1`.
    pub bound: f64,
}

pub fn neo_hookean_regime(point: &NeoHookeanDualPoint) -> NeoRegime {
    let sum = (point.mu + point.grad_lambda).norm();
    let b = point.grad_lambda.norm();
    if b * b / (4.0 * 8f64.sqrt()) <= sum {
        NeoRegime::SumDominant
    } else {
        NeoRegime::GradientDominant
    }
}

fn neo_witness_for(point: &NeoHookeanDualPoint, regime: NeoRegime) -> (Matrix2<f64>, f64) {
    let b = point.grad_lambda;
    match regime {
        NeoRegime::SumDominant => ((point.mu + b) * 0.5, 0.0),
        // cof is an involution on 2x2 matrices.
        NeoRegime::GradientDominant => (cofactor(&b) * (-b.norm() / 8f64.sqrt()), b.norm() / 2f64.sqrt()),
    }
}

pub fn neo_hookean_witness(point: &NeoHookeanDualPoint) -> NeoWitness {
    let regime = neo_hookean_regime(point);
    let (f, p) = neo_witness_for(point, regime);
    let q = (point.mu + point.grad_lambda).norm_squared() + point.grad_lambda.norm().powi(4);
    let bound = match regime {
        NeoRegime::SumDominant => q / 512.0,
        NeoRegime::GradientDominant => q / 64.0,
    };
    NeoWitness {
        regime,
        f,
        p,
        value: neo_hookean_objective(&f, p, point),
        bound,
    }
}

/// `½|a|² - s + c(|A + B|² + |B|⁴)` with the witness constant `c` of the
/// point's regime. Meaningful for `|s| ≤ 1`.
pub fn neo_hookean_lower_bound(point: &NeoHookeanDualPoint) -> (NeoRegime, f64) {
    let w = neo_hookean_witness(point);
    (w.regime, quadratic_conjugate(point.div_mu.norm()) - point.det_multiplier + w.bound)
}

/// `½|a|² - s + |A + B|²/(1 - |s|) + |B|⁴/(1 - |s|)²`, or `None` when
/// `|s| ≥ 1`.
pub fn neo_hookean_upper_bound(point: &NeoHookeanDualPoint) -> Option<f64> {
    let gap = 1.0 - point.det_multiplier.abs();
    (gap > 0.0).then(|| {
        quadratic_conjugate(point.div_mu.norm()) - point.det_multiplier
            + (point.mu + point.grad_lambda).norm_squared() / gap
            + point.grad_lambda.norm().powi(4) / (gap * gap)
    })
}

/// Neo-Hookean dual density; `+∞` when `|s| > 1`.
pub fn g_neo_hookean(point: &NeoHookeanDualPoint) -> f64 {
    neo_hookean_supremum(point, &[]).value
}

/// Neo-Hookean dual density with its maximizer `(F, p)`.
pub fn neo_hookean_supremum(point: &NeoHookeanDualPoint, extra_seeds: &[Vec<f64>]) -> Supremum {
    let offset = quadratic_conjugate(point.div_mu.norm()) - point.det_multiplier;
    if point.det_multiplier.abs() > 1.0 && neo_hookean_unbounded(point) {
        let dir = if point.det_multiplier > 0.0 { [1.0, 0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0, -1.0] };
        return Supremum {
            value: f64::INFINITY,
            maximizer: dir.iter().map(|x| x * INFINITY_THRESHOLD).chain([0.0]).collect(),
        };
    }
    let f = |x: &[f64]| neo_hookean_objective(&Matrix2::from_column_slice(&x[..4]), x[4], point);
    let grad = |x: &[f64]| {
        let (gf, gp) = neo_hookean_gradient(&Matrix2::from_column_slice(&x[..4]), x[4], point);
        gf.iter().copied().chain([gp]).collect::<Vec<f64>>()
    };
    let with_pressure = |fm: &[f64]| {
        let m = Matrix2::from_column_slice(fm);
        let (p, _) = neo_hookean_pressure_sup(&m, point);
        fm.iter().copied().chain([p]).collect::<Vec<f64>>()
    };
    let mut pinned: Vec<Vec<f64>> = [NeoRegime::SumDominant, NeoRegime::GradientDominant]
        .iter()
        .map(|&r| {
            let (fw, pw) = neo_witness_for(point, r);
            fw.iter().copied().chain([pw]).collect()
        })
        .collect();
    pinned.extend(extra_seeds.iter().filter(|s| s.len() == 5).cloned());
    let mut ranked: Vec<Vec<f64>> = grid_2x2().iter().map(|g| with_pressure(g)).collect();
    ranked.extend(random_seeds(4).iter().map(|g| with_pressure(g)));
    let sup = multistart(&f, &grad, &pinned, &ranked);
    if sup.value == f64::INFINITY {
        return Supremum { value: f64::INFINITY, maximizer: sup.maximizer };
    }
    // The closed-form pressure can only improve on the ascent's p.
    let fm = Matrix2::from_column_slice(&sup.maximizer[..4]);
    let (p, closed) = neo_hookean_pressure_sup(&fm, point);
    let (value, maximizer) = if closed > sup.value {
        (closed, fm.iter().copied().chain([p]).collect())
    } else {
        (sup.value, sup.maximizer)
    };
    Supremum { value: offset + value, maximizer }
}

// ---------------------------------------------------------------------------
// Sampling and bound checks
// ---------------------------------------------------------------------------

/// Largest `|s|` drawn for neo-Hookean bound checks.
pub const NEO_S_MAX: f64 = 0.99;
/// Upper bounds are checked only for `|s|` up to this value.
pub const NEO_UPPER_S_MAX: f64 = 0.9;

/// A dual density under test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualModel {
    Svk2(SvkParams),
    Svk3(SvkParams),
    NeoHookean,
}

impl DualModel {
    /// Unit shear modulus and unit Lamé constant in `d = 2` and `d = 3`,
    /// then neo-Hookean.
    pub fn standard() -> [DualModel; 3] {
        [
            DualModel::Svk2(SvkParams::new(1.0, 1.0, 2).expect("valid moduli")),
            DualModel::Svk3(SvkParams::new(1.0, 1.0, 3).expect("valid moduli")),
            DualModel::NeoHookean,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            DualModel::Svk2(_) => "svk_2d",
            DualModel::Svk3(_) => "svk_3d",
            DualModel::NeoHookean => "neo_hookean_2d",
        }
    }

    pub fn n_coords(&self) -> usize {
        match self {
            DualModel::Svk2(_) => 10,
            DualModel::Svk3(_) => 21,
            DualModel::NeoHookean => 11,
        }
    }

    /// Density at flattened coordinates (see the point types' `coords`).
    pub fn supremum(&self, coords: &[f64], extra_seeds: &[Vec<f64>]) -> Supremum {
        match self {
            DualModel::Svk2(p) => svk_supremum(&SvkDualPoint::<2>::from_coords(coords), p, extra_seeds),
            DualModel::Svk3(p) => svk_supremum(&SvkDualPoint::<3>::from_coords(coords), p, extra_seeds),
            DualModel::NeoHookean => neo_hookean_supremum(&NeoHookeanDualPoint::from_coords(coords), extra_seeds),
        }
    }

    /// Random point with log-uniformly scaled blocks so that every witness
    /// regime is visited. Neo-Hookean draws `|s| ≤ s_max`.
    pub fn sample<R: Rng>(&self, rng: &mut R, s_max: f64) -> Vec<f64> {
        let near_cancel = rng.gen_bool(0.5);
        let mut block = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
            let scale = 10f64.powf(rng.gen_range(lo..hi));
            (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()
        };
        match self {
            DualModel::Svk2(_) | DualModel::Svk3(_) => {
                let d = if matches!(self, DualModel::Svk2(_)) { 2 } else { 3 };
                let mut c = block(d * d, -1.0, 1.5);
                c.extend(block(d, -1.0, 1.0));
                c.extend(block(d * d, -1.5, 0.5));
                c
            }
            DualModel::NeoHookean => {
                // Half the points put A close to -B, where the gradient
                // witness takes over.
                let grad = block(4, -1.0, 1.0);
                let mut c = block(4, -2.5, 0.5);
                if near_cancel {
                    c.iter_mut().zip(&grad).for_each(|(a, b)| *a -= b);
                }
                c.extend(block(2, -1.0, 1.0));
                c.extend(grad);
                c.push(rng.gen_range(-s_max..s_max));
                c
            }
        }
    }

    fn rng(&self, seed: u64, stream: u64) -> ChaCha8Rng {
        let tag = match self {
            DualModel::Svk2(_) => 1,
            DualModel::Svk3(_) => 2,
            DualModel::NeoHookean => 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(tag * 16 + stream);
        rng
    }
}

/// First 16 hex digits of SHA-256 over the model label and the
/// little-endian coordinate bytes.
pub fn point_hash(model: &str, coords: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    for c in coords {
        h.update(c.to_le_bytes());
    }
    hex::encode(h.finalize())[..16].to_string()
}

fn tolerance(x: f64) -> f64 {
    1e-9 * x.abs().max(1.0)
}

/// One sampled point of a bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub model: &'static str,
    pub index: usize,
    pub hash: String,
    /// Witness regime label.
    pub regime: String,
    pub g: f64,
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
    /// Witness contribution to `g`, which the supremum must dominate.
    pub witness: f64,
    /// Whether the witness meets its own stated bound.
    pub witness_meets_bound: bool,
}

impl BoundRow {
    pub fn lower_margin(&self) -> f64 {
        self.g - self.lower_bound
    }

    pub fn upper_margin(&self) -> Option<f64> {
        self.upper_bound.map(|u| u - self.g)
    }

    pub fn witness_margin(&self) -> f64 {
        self.g - self.witness
    }

    pub fn lower_violated(&self) -> bool {
        self.lower_margin() < -tolerance(self.g)
    }

    pub fn upper_violated(&self) -> bool {
        self.upper_margin().is_some_and(|m| m < -tolerance(self.g))
    }

    pub fn sandwich_violated(&self) -> bool {
        self.witness_margin() < -tolerance(self.g)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundCheck {
    pub rows: Vec<BoundRow>,
}

impl BoundCheck {
    pub fn lower_violations(&self) -> usize {
        self.rows.iter().filter(|r| r.lower_violated()).count()
    }

    pub fn upper_violations(&self) -> usize {
        self.rows.iter().filter(|r| r.upper_violated()).count()
    }

    pub fn upper_checked(&self) -> usize {
        self.rows.iter().filter(|r| r.upper_bound.is_some()).count()
    }

    pub fn sandwich_violations(&self) -> usize {
        self.rows.iter().filter(|r| r.sandwich_violated()).count()
    }

    /// `(regime, points, lower-bound violations)`, in first-seen order.
    pub fn by_regime(&self) -> Vec<(String, usize, usize)> {
        let mut out: Vec<(String, usize, usize)> = Vec::new();
        for r in &self.rows {
            let i = match out.iter().position(|(k, _, _)| *k == r.regime) {
                Some(i) => i,
                None => {
                    out.push((r.regime.clone(), 0, 0));
                    out.len() - 1
                }
            };
            out[i].1 += 1;
            out[i].2 += r.lower_violated() as usize;
        }
        out
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "model",
            "index",
            "hash",
            "regime",
            "g",
            "lower_bound",
            "lower_margin",
            "upper_bound",
            "upper_margin",
            "witness",
            "witness_margin",
            "witness_meets_bound",
        ]);
        for r in &self.rows {
            t.push(vec![
                r.model.into(),
                r.index.into(),
                r.hash.clone().into(),
                r.regime.clone().into(),
                r.g.into(),
                r.lower_bound.into(),
                r.lower_margin().into(),
                r.upper_bound.into(),
                r.upper_margin().into(),
                r.witness.into(),
                r.witness_margin().into(),
                r.witness_meets_bound.into(),
            ]);
        }
        t
    }
}

/// Evaluates `g`, its witness lower bound and (for neo-Hookean with
/// `|s| ≤ NEO_UPPER_S_MAX`) its upper bound at `samples` seeded points.
pub fn bound_check(model: &DualModel, samples: usize, seed: u64) -> BoundCheck {
    let mut rng = model.rng(seed, 0);
    let rows = (0..samples)
        .map(|index| {
            let coords = model.sample(&mut rng, NEO_S_MAX);
            bound_row(model, index, &coords)
        })
        .collect();
    BoundCheck { rows }
}

/// Bound-check row at explicit coordinates.
pub fn bound_row(model: &DualModel, index: usize, coords: &[f64]) -> BoundRow {
    let hash = point_hash(model.label(), coords);
    let g = model.supremum(coords, &[]).value;
    let (regime, lower_bound, upper_bound, witness, witness_meets_bound) = match model {
        DualModel::Svk2(p) => svk_row_parts(&SvkDualPoint::<2>::from_coords(coords), p),
        DualModel::Svk3(p) => svk_row_parts(&SvkDualPoint::<3>::from_coords(coords), p),
        DualModel::NeoHookean => {
            let pt = NeoHookeanDualPoint::from_coords(coords);
            let (regime, lower) = neo_hookean_lower_bound(&pt);
            let w = neo_hookean_witness(&pt);
            let upper = if pt.det_multiplier.abs() <= NEO_UPPER_S_MAX { neo_hookean_upper_bound(&pt) } else { None };
            let offset = quadratic_conjugate(pt.div_mu.norm()) - pt.det_multiplier;
            (regime.to_string(), lower, upper, offset + w.value, w.value >= w.bound - tolerance(w.bound))
        }
    };
    BoundRow {
        model: model.label(),
        index,
        hash,
        regime,
        g,
        lower_bound,
        upper_bound,
        witness,
        witness_meets_bound,
    }
}

fn svk_row_parts<const D: usize>(pt: &SvkDualPoint<D>, params: &SvkParams) -> (String, f64, Option<f64>, f64, bool) {
    let (regime, lower) = svk_lower_bound(pt, params);
    let w = svk_witness_value(pt, params, regime).expect("regime taken from the point");
    let witness = quartic_conjugate(pt.div_mu.norm()) + svk_scale(params) * w.value;
    (regime.to_string(), lower, None, witness, w.satisfies_bound())
}

/// `+∞` detection at neo-Hookean points with `1 < |s| ≤ 3`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InfinityCheck {
    /// `(hash, s, g)`.
    pub rows: Vec<(String, f64, f64)>,
}

impl InfinityCheck {
    pub fn missed(&self) -> usize {
        self.rows.iter().filter(|r| r.2 != f64::INFINITY).count()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["model", "hash", "s", "g", "flagged_infinite"]);
        for (h, s, g) in &self.rows {
            t.push(vec![
                DualModel::NeoHookean.label().into(),
                h.clone().into(),
                (*s).into(),
                (*g).into(),
                (*g == f64::INFINITY).into(),
            ]);
        }
        t
    }
}

pub fn infinity_check(samples: usize, seed: u64) -> InfinityCheck {
    let model = DualModel::NeoHookean;
    let mut rng = model.rng(seed, 1);
    let rows = (0..samples)
        .map(|_| {
            let mut c = model.sample(&mut rng, NEO_S_MAX);
            let magnitude: f64 = 1.0 + rng.gen_range(1e-3..2.0);
            c[10] = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
            (point_hash(model.label(), &c), c[10], model.supremum(&c, &[]).value)
        })
        .collect();
    InfinityCheck { rows }
}

/// One convex-combination test `g(t x₁ + (1-t) x₂) ≤ t g(x₁) + (1-t) g(x₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityRow {
    pub model: &'static str,
    pub pair: usize,
    pub hash_1: String,
    pub hash_2: String,
    pub t: f64,
    pub g_combined: f64,
    pub chord: f64,
}

impl ConvexityRow {
    /// Positive when the inequality fails.
    pub fn excess(&self) -> f64 {
        self.g_combined - self.chord
    }

    pub fn violated(&self) -> bool {
        self.excess() > CONVEXITY_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexityCheck {
    pub rows: Vec<ConvexityRow>,
}

impl ConvexityCheck {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violated()).count()
    }

    pub fn worst_excess(&self) -> f64 {
        self.rows.iter().map(|r| r.excess()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["model", "pair", "hash_1", "hash_2", "t", "g_combined", "chord", "excess"]);
        for r in &self.rows {
            t.push(vec![
                r.model.into(),
                r.pair.into(),
                r.hash_1.clone().into(),
                r.hash_2.clone().into(),
                r.t.into(),
                r.g_combined.into(),
                r.chord.into(),
                r.excess().into(),
            ]);
        }
        t
    }
}

/// Convex-combination weights.
pub const COMBINATION_WEIGHTS: [f64; 3] = [0.25, 0.5, 0.75];

/// Tests convexity on `pairs` seeded random pairs. The five densities of a
/// pair (two endpoints, three combinations) share maximizers as extra
/// seeds, which only sharpens each supremum.
pub fn convexity_check(model: &DualModel, pairs: usize, seed: u64) -> ConvexityCheck {
    let mut rng = model.rng(seed, 2);
    let mut rows = Vec::new();
    for pair in 0..pairs {
        let x1 = model.sample(&mut rng, NEO_UPPER_S_MAX);
        let x2 = model.sample(&mut rng, NEO_UPPER_S_MAX);
        let mut points = vec![x1.clone(), x2.clone()];
        for t in COMBINATION_WEIGHTS {
            points.push(x1.iter().zip(&x2).map(|(a, b)| t * a + (1.0 - t) * b).collect());
        }
        let first: Vec<Supremum> = points.iter().map(|c| model.supremum(c, &[])).collect();
        let shared: Vec<Vec<f64>> = first.iter().map(|s| s.maximizer.clone()).collect();
        let g: Vec<f64> = points
            .iter()
            .zip(&first)
            .map(|(c, s)| s.value.max(model.supremum(c, &shared).value))
            .collect();
        let (h1, h2) = (point_hash(model.label(), &x1), point_hash(model.label(), &x2));
        for (k, t) in COMBINATION_WEIGHTS.iter().enumerate() {
            rows.push(ConvexityRow {
                model: model.label(),
                pair,
                hash_1: h1.clone(),
                hash_2: h2.clone(),
                t: *t,
                g_combined: g[2 + k],
                chord: t * g[0] + (1.0 - t) * g[1],
            });
        }
    }
    ConvexityCheck { rows }
}
