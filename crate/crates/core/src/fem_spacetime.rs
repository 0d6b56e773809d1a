//! Space-time finite elements for the dual elastodynamic action.
//!
//! The bar `[0, 1]` and the window `[0, T]` are meshed together with bilinear
//! quadrilaterals and solved as one boundary value problem in `(x, t)`. The
//! unknowns are the multipliers `L` (paired with momentum balance) and `P`
//! (paired with compatibility `e_t = v_x`). Primal data enter through
//! boundary integrals of the action:
//!
//! ```text
//! S = ∫∫ [-ρ₀ L_t v̂ + σ(ê) L_x + P_x v̂ - ê P_t + H]
//!     + ∫ P(0,t) v_left dt - ∫ P(1,t) v_right dt - ∫ P(x,0) e0 dx - ∫ ρ₀ L(x,0) v0 dx
//! ```
//!
//! Where no primal datum exists the paired multiplier vanishes: `L = P = 0`
//! at `t = T` and `L = 0` on the lateral edges.

use crate::dtp::{self, AuxParams, DtpError, DynamicPointDual, PointBase};
use crate::fem_static::ConstrainedSystem;
use crate::linalg::{linear_solve, LinearSolveError, SparseMatrix, TripletBuilder};
use crate::material;
use crate::newton::{newton_solve, NewtonConfig, NewtonReport, NonlinearSystem};
use crate::profile::Piecewise;
use crate::quadrature::{QuadratureRule, UnsupportedOrder};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpaceTimeError {
    #[error("final time must be positive and finite, got {0}")]
    FinalTime(f64),
    #[error("density must be positive and finite, got {0}")]
    Density(f64),
    #[error("{axis} grid needs at least one element")]
    TooFewLines { axis: &'static str },
    #[error("{axis} grid lines must increase strictly (index {index})")]
    NotIncreasing { axis: &'static str, index: usize },
    #[error("space grid must span [0, 1] and time grid must start at 0")]
    WrongSpan,
    #[error(transparent)]
    Quadrature(#[from] UnsupportedOrder),
    #[error("expected {expected} values, got {got}")]
    FieldLength { expected: usize, got: usize },
    #[error("space-time projection failed: {0}")]
    Projection(#[from] LinearSolveError),
}

/// Structured grid of bilinear elements over `[0, 1] × [0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeMesh {
    xs: Vec<f64>,
    ts: Vec<f64>,
    quad: QuadratureRule,
}

/// Shape-function data at one tensor-product quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimePoint {
    /// `(ex, et)` element indices.
    pub element: (usize, usize),
    pub x: f64,
    pub t: f64,
    pub weight: f64,
    /// Global node numbers, ordered `(i, j), (i+1, j), (i, j+1), (i+1, j+1)`.
    pub nodes: [usize; 4],
    pub n: [f64; 4],
    pub dn_dx: [f64; 4],
    pub dn_dt: [f64; 4],
}

fn check_lines(v: &[f64], axis: &'static str) -> Result<(), SpaceTimeError> {
    if v.len() < 2 {
        return Err(SpaceTimeError::TooFewLines { axis });
    }
    match v.windows(2).position(|w| !(w[1] > w[0])) {
        Some(i) => Err(SpaceTimeError::NotIncreasing { axis, index: i + 1 }),
        None => Ok(()),
    }
}

impl SpaceTimeMesh {
    pub fn new(xs: Vec<f64>, ts: Vec<f64>, quad_order: usize) -> Result<Self, SpaceTimeError> {
        check_lines(&xs, "space")?;
        check_lines(&ts, "time")?;
        if xs[0] != 0.0 || *xs.last().unwrap() != 1.0 || ts[0] != 0.0 {
            return Err(SpaceTimeError::WrongSpan);
        }
        Ok(Self {
            xs,
            ts,
            quad: QuadratureRule::gauss(quad_order)?,
        })
    }

    /// `nx × nt` equal elements with 2×2 Gauss quadrature.
    pub fn uniform(nx: usize, nt: usize, final_time: f64) -> Result<Self, SpaceTimeError> {
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(SpaceTimeError::FinalTime(final_time));
        }
        let line = |n: usize, end: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (0..=n).map(|i| end * i as f64 / n.max(1) as f64).collect();
            if let Some(l) = v.last_mut() {
                *l = end;
            }
            v
        };
        Self::new(line(nx, 1.0), line(nt, final_time), 2)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn nx(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn nt(&self) -> usize {
        self.ts.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn n_nodes(&self) -> usize {
        self.xs.len() * self.ts.len()
    }

    /// Global number of grid node `(i, j)` (space index, time index).
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.xs.len() + i
    }

    pub fn quad(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn element_points(&self, ex: usize, et: usize) -> impl Iterator<Item = SpaceTimePoint> + '_ {
        let (x0, x1) = (self.xs[ex], self.xs[ex + 1]);
        let (t0, t1) = (self.ts[et], self.ts[et + 1]);
        let (hx, ht) = (x1 - x0, t1 - t0);
        let nodes = [
            self.node(ex, et),
            self.node(ex + 1, et),
            self.node(ex, et + 1),
            self.node(ex + 1, et + 1),
        ];
        let tq: Vec<(f64, f64)> = self.quad.mapped(t0, t1).collect();
        self.quad.mapped(x0, x1).flat_map(move |(x, wx)| {
            let tq = tq.clone();
            tq.into_iter().map(move |(t, wt)| {
                let (s, r) = ((x - x0) / hx, (t - t0) / ht);
                let (fx, gx) = ([1.0 - s, s], [-1.0 / hx, 1.0 / hx]);
                let (ft, gt) = ([1.0 - r, r], [-1.0 / ht, 1.0 / ht]);
                SpaceTimePoint {
                    element: (ex, et),
                    x,
                    t,
                    weight: wx * wt,
                    nodes,
                    n: [fx[0] * ft[0], fx[1] * ft[0], fx[0] * ft[1], fx[1] * ft[1]],
                    dn_dx: [gx[0] * ft[0], gx[1] * ft[0], gx[0] * ft[1], gx[1] * ft[1]],
                    dn_dt: [fx[0] * gt[0], fx[1] * gt[0], fx[0] * gt[1], fx[1] * gt[1]],
                }
            })
        })
    }

    /// All quadrature points; elements run fastest in space.
    pub fn points(&self) -> impl Iterator<Item = SpaceTimePoint> + '_ {
        (0..self.nt()).flat_map(move |et| (0..self.nx()).flat_map(move |ex| self.element_points(ex, et)))
    }

    pub fn n_points(&self) -> usize {
        self.nx() * self.nt() * self.quad.len() * self.quad.len()
    }

    /// Evaluates a nodal bilinear field at `(x, t)`.
    pub fn interpolate(&self, nodal: &[f64], x: f64, t: f64) -> f64 {
        let ex = self.xs.partition_point(|&v| v <= x).clamp(1, self.nx()) - 1;
        let et = self.ts.partition_point(|&v| v <= t).clamp(1, self.nt()) - 1;
        let s = (x - self.xs[ex]) / (self.xs[ex + 1] - self.xs[ex]);
        let r = (t - self.ts[et]) / (self.ts[et + 1] - self.ts[et]);
        let f = |i, j| nodal[self.node(i, j)];
        (1.0 - r) * ((1.0 - s) * f(ex, et) + s * f(ex + 1, et)) + r * ((1.0 - s) * f(ex, et + 1) + s * f(ex + 1, et + 1))
    }
}

/// Primal data of an elastodynamic problem on `[0, 1] × [0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicCase {
    /// Initial strain `e0(x)`.
    pub e0: Piecewise,
    /// Initial velocity `v0(x)`.
    pub v0: Piecewise,
    /// Velocity of the left end as a function of time.
    pub v_left: Piecewise,
    /// Velocity of the right end as a function of time.
    pub v_right: Piecewise,
    pub final_time: f64,
    pub rho0: f64,
}

impl DynamicCase {
    pub fn validate(&self) -> Result<(), SpaceTimeError> {
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(SpaceTimeError::FinalTime(self.final_time));
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(SpaceTimeError::Density(self.rho0));
        }
        Ok(())
    }

    /// Auxiliary coefficients with the density of this case.
    fn aux(&self, p: &AuxParams) -> AuxParams {
        AuxParams { rho0: self.rho0, ..*p }
    }
}

/// Time-independent base state `(v̄(x), ē(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeBase {
    pub v_bar: Piecewise,
    pub e_bar: Piecewise,
}

impl SpaceTimeBase {
    /// At rest with strain `e_bar`.
    pub fn at_rest(e_bar: Piecewise) -> Self {
        Self {
            v_bar: Piecewise::constant(0.0),
            e_bar,
        }
    }

    pub fn at(&self, x: f64, _t: f64) -> PointBase {
        PointBase {
            u_bar: self.v_bar.eval(x),
            e_bar: self.e_bar.eval(x),
        }
    }
}

/// Nodal multipliers, one entry per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicDualDofs {
    pub l: Vec<f64>,
    pub p: Vec<f64>,
}

impl DynamicDualDofs {
    pub fn zeros(n_nodes: usize) -> Self {
        Self {
            l: vec![0.0; n_nodes],
            p: vec![0.0; n_nodes],
        }
    }
}

/// Free-unknown numbering. `L` is free off the lateral edges and the top
/// edge; `P` is free off the top edge. Nodes are numbered across the shorter
/// grid direction first, which keeps the Jacobian bandwidth small.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicDofMap {
    l: Vec<Option<usize>>,
    p: Vec<Option<usize>>,
    n_free: usize,
}

impl DynamicDofMap {
    pub fn new(mesh: &SpaceTimeMesh) -> Self {
        let n = mesh.n_nodes();
        let (mut l, mut p) = (vec![None; n], vec![None; n]);
        let mut next = 0;
        let mut visit = |i: usize, j: usize| {
            if j == mesh.nt() {
                return;
            }
            let k = mesh.node(i, j);
            if i > 0 && i < mesh.nx() {
                l[k] = Some(next);
                next += 1;
            }
            p[k] = Some(next);
            next += 1;
        };
        if mesh.nx() >= mesh.nt() {
            (0..=mesh.nx()).for_each(|i| (0..=mesh.nt()).for_each(|j| visit(i, j)));
        } else {
            (0..=mesh.nt()).for_each(|j| (0..=mesh.nx()).for_each(|i| visit(i, j)));
        }
        Self { l, p, n_free: next }
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn l(&self, node: usize) -> Option<usize> {
        self.l[node]
    }

    pub fn p(&self, node: usize) -> Option<usize> {
        self.p[node]
    }

    /// Nodal values with zeros at constrained nodes.
    pub fn scatter(&self, free: &[f64]) -> DynamicDualDofs {
        let pick = |m: &[Option<usize>]| m.iter().map(|i| i.map_or(0.0, |i| free[i])).collect();
        DynamicDualDofs {
            l: pick(&self.l),
            p: pick(&self.p),
        }
    }

    pub fn gather(&self, dofs: &DynamicDualDofs) -> Vec<f64> {
        let mut v = vec![0.0; self.n_free];
        for (k, (li, pi)) in self.l.iter().zip(&self.p).enumerate() {
            if let Some(i) = li {
                v[*i] = dofs.l[k];
            }
            if let Some(i) = pi {
                v[*i] = dofs.p[k];
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("DtP mapping failed in space-time element {element:?} at (x, t) = ({x}, {t}): {source}")]
pub struct SpaceTimeAssemblyError {
    pub element: (usize, usize),
    pub x: f64,
    pub t: f64,
    pub source: DtpError,
}

/// DtP output at one space-time quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicPointSample {
    pub element: (usize, usize),
    pub x: f64,
    pub t: f64,
    pub weight: f64,
    pub dual: DynamicPointDual,
    pub base: PointBase,
    pub v: f64,
    pub e: f64,
}

fn point_dual(pt: &SpaceTimePoint, dofs: &DynamicDualDofs) -> DynamicPointDual {
    let mut d = DynamicPointDual::default();
    for a in 0..4 {
        let k = pt.nodes[a];
        d.l_t += pt.dn_dt[a] * dofs.l[k];
        d.l_x += pt.dn_dx[a] * dofs.l[k];
        d.p_t += pt.dn_dt[a] * dofs.p[k];
        d.p_x += pt.dn_dx[a] * dofs.p[k];
    }
    d
}

/// Runs the dynamic DtP mapping at every quadrature point.
pub fn evaluate_dynamic_points(
    mesh: &SpaceTimeMesh,
    dofs: &DynamicDualDofs,
    base: &SpaceTimeBase,
    case: &DynamicCase,
    p: &AuxParams,
) -> Result<Vec<DynamicPointSample>, SpaceTimeAssemblyError> {
    let p = case.aux(p);
    mesh.points()
        .map(|pt| {
            let dual = point_dual(&pt, dofs);
            let b = base.at(pt.x, pt.t);
            let prim = dtp::dtp_dynamic(&dual, &b, &p).map_err(|source| SpaceTimeAssemblyError {
                element: pt.element,
                x: pt.x,
                t: pt.t,
                source,
            })?;
            Ok(DynamicPointSample {
                element: pt.element,
                x: pt.x,
                t: pt.t,
                weight: pt.weight,
                dual,
                base: b,
                v: prim.u,
                e: prim.e,
            })
        })
        .collect()
}

/// Residual over all `2 n_nodes` unknowns (index `k` is `L_k`, `n_nodes + k`
/// is `P_k`) and, if asked, the Jacobian triplets.
#[derive(Debug, Clone)]
pub struct UnconstrainedDynamicSystem {
    pub n_nodes: usize,
    pub residual: Vec<f64>,
    pub jacobian: Option<Vec<(usize, usize, f64)>>,
}

/// Assembles the first variation of the action and optionally its linearization.
pub fn assemble_dynamic_unconstrained(
    mesh: &SpaceTimeMesh,
    dofs: &DynamicDualDofs,
    base: &SpaceTimeBase,
    case: &DynamicCase,
    p: &AuxParams,
    with_jacobian: bool,
) -> Result<UnconstrainedDynamicSystem, SpaceTimeAssemblyError> {
    let n = mesh.n_nodes();
    let aux = case.aux(p);
    let rho0 = case.rho0;
    let mut r = vec![0.0; 2 * n];
    let mut jac = with_jacobian.then(|| Vec::with_capacity(mesh.nx() * mesh.nt() * 64));

    for pt in mesh.points() {
        let dual = point_dual(&pt, dofs);
        let b = base.at(pt.x, pt.t);
        let fail = |source| SpaceTimeAssemblyError {
            element: pt.element,
            x: pt.x,
            t: pt.t,
            source,
        };
        let prim = dtp::dtp_dynamic(&dual, &b, &aux).map_err(fail)?;
        let (v, e) = (prim.u, prim.e);
        let sig = material::stress(e);
        let w = pt.weight;
        for a in 0..4 {
            let k = pt.nodes[a];
            r[k] += w * (-rho0 * pt.dn_dt[a] * v + sig * pt.dn_dx[a]);
            r[n + k] += w * (pt.dn_dx[a] * v - e * pt.dn_dt[a]);
        }
        if let Some(jac) = jac.as_mut() {
            let d = dtp::dtp_dynamic_derivatives(&dual, &b, &aux, e).map_err(fail)?;
            let k = material::stiffness(e);
            for a in 0..4 {
                let (ta, xa) = (pt.dn_dt[a], pt.dn_dx[a]);
                for bb in 0..4 {
                    let (tb, xb) = (pt.dn_dt[bb], pt.dn_dx[bb]);
                    let (ka, kb) = (pt.nodes[a], pt.nodes[bb]);
                    jac.push((ka, kb, w * (-rho0 * ta * d.dv_dl_t * tb + k * xa * d.de_dl_x * xb)));
                    jac.push((ka, n + kb, w * (-rho0 * ta * d.dv_dp_x * xb + k * xa * d.de_dp_t * tb)));
                    jac.push((n + ka, kb, w * (xa * d.dv_dl_t * tb - ta * d.de_dl_x * xb)));
                    jac.push((n + ka, n + kb, w * (xa * d.dv_dp_x * xb - ta * d.de_dp_t * tb)));
                }
            }
        }
    }

    // Initial data on t = 0, integrated in x with the same rule as the volume.
    for ex in 0..mesh.nx() {
        let (a, bnd) = (mesh.xs()[ex], mesh.xs()[ex + 1]);
        let nodes = [mesh.node(ex, 0), mesh.node(ex + 1, 0)];
        for (x, w) in mesh.quad().mapped(a, bnd) {
            let s = (x - a) / (bnd - a);
            let (e0, v0) = (case.e0.eval(x), case.v0.eval(x));
            for (k, nv) in nodes.iter().zip([1.0 - s, s]) {
                r[*k] -= w * rho0 * nv * v0;
                r[n + k] -= w * nv * e0;
            }
        }
    }
    // Boundary velocities on x = 0 and x = 1.
    for et in 0..mesh.nt() {
        let (a, bnd) = (mesh.ts()[et], mesh.ts()[et + 1]);
        for (t, w) in mesh.quad().mapped(a, bnd) {
            let s = (t - a) / (bnd - a);
            let (vl, vr) = (case.v_left.eval(t), case.v_right.eval(t));
            for (j, nv) in [(et, 1.0 - s), (et + 1, s)] {
                r[n + mesh.node(0, j)] += w * nv * vl;
                r[n + mesh.node(mesh.nx(), j)] -= w * nv * vr;
            }
        }
    }

    Ok(UnconstrainedDynamicSystem {
        n_nodes: n,
        residual: r,
        jacobian: jac,
    })
}

/// Drops rows and columns of Dirichlet-constrained multipliers.
pub fn apply_dynamic_dual_bcs(system: UnconstrainedDynamicSystem, map: &DynamicDofMap) -> ConstrainedSystem {
    let n = system.n_nodes;
    let index = |g: usize| if g < n { map.l(g) } else { map.p(g - n) };
    let mut residual = vec![0.0; map.n_free()];
    for (g, v) in system.residual.iter().enumerate() {
        if let Some(i) = index(g) {
            residual[i] = *v;
        }
    }
    let jacobian = system.jacobian.map(|trip| {
        let mut b = TripletBuilder::with_capacity(map.n_free(), trip.len());
        for (gi, gj, v) in trip {
            if let (Some(i), Some(j)) = (index(gi), index(gj)) {
                b.add(i, j, v);
            }
        }
        b.build()
    });
    ConstrainedSystem { residual, jacobian }
}

/// Residual over the free unknowns.
pub fn assemble_dynamic_residual(
    mesh: &SpaceTimeMesh,
    dofs: &DynamicDualDofs,
    base: &SpaceTimeBase,
    case: &DynamicCase,
    p: &AuxParams,
) -> Result<Vec<f64>, SpaceTimeAssemblyError> {
    let sys = assemble_dynamic_unconstrained(mesh, dofs, base, case, p, false)?;
    Ok(apply_dynamic_dual_bcs(sys, &DynamicDofMap::new(mesh)).residual)
}

/// Jacobian over the free unknowns.
pub fn assemble_dynamic_jacobian(
    mesh: &SpaceTimeMesh,
    dofs: &DynamicDualDofs,
    base: &SpaceTimeBase,
    case: &DynamicCase,
    p: &AuxParams,
) -> Result<SparseMatrix, SpaceTimeAssemblyError> {
    let sys = assemble_dynamic_unconstrained(mesh, dofs, base, case, p, true)?;
    Ok(apply_dynamic_dual_bcs(sys, &DynamicDofMap::new(mesh))
        .jacobian
        .expect("jacobian requested"))
}

/// The space-time dual problem as a [`NonlinearSystem`] over the free unknowns.
pub struct DynamicProblem<'a> {
    pub mesh: &'a SpaceTimeMesh,
    pub map: DynamicDofMap,
    pub base: &'a SpaceTimeBase,
    pub case: &'a DynamicCase,
    pub aux: AuxParams,
}

impl NonlinearSystem for DynamicProblem<'_> {
    type Error = SpaceTimeAssemblyError;

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>, SpaceTimeAssemblyError> {
        let sys = assemble_dynamic_unconstrained(self.mesh, &self.map.scatter(x), self.base, self.case, &self.aux, false)?;
        Ok(apply_dynamic_dual_bcs(sys, &self.map).residual)
    }

    fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix, SpaceTimeAssemblyError> {
        let sys = assemble_dynamic_unconstrained(self.mesh, &self.map.scatter(x), self.base, self.case, &self.aux, true)?;
        Ok(apply_dynamic_dual_bcs(sys, &self.map).jacobian.expect("jacobian requested"))
    }
}

/// Converged space-time solution.
#[derive(Debug, Clone)]
pub struct DynamicSolution {
    pub mesh: SpaceTimeMesh,
    pub dofs: DynamicDualDofs,
    pub samples: Vec<DynamicPointSample>,
    pub newton: NewtonReport,
}

/// Monolithic Newton solve from zero multipliers. On failure the report and
/// last iterate are returned in the error position.
pub fn solve_dynamic(
    mesh: SpaceTimeMesh,
    base: &SpaceTimeBase,
    case: &DynamicCase,
    aux: &AuxParams,
    config: &NewtonConfig,
) -> Result<DynamicSolution, (NewtonReport, DynamicDualDofs)> {
    let map = DynamicDofMap::new(&mesh);
    let problem = DynamicProblem {
        mesh: &mesh,
        map: map.clone(),
        base,
        case,
        aux: *aux,
    };
    let (x, report) = newton_solve(&problem, vec![0.0; map.n_free()], config);
    let dofs = map.scatter(&x);
    if !report.converged {
        return Err((report, dofs));
    }
    let samples = match evaluate_dynamic_points(&mesh, &dofs, base, case, aux) {
        Ok(s) => s,
        Err(_) => return Err((report, dofs)),
    };
    Ok(DynamicSolution {
        mesh,
        dofs,
        samples,
        newton: report,
    })
}

/// L² projection of a quadrature-point field onto the bilinear space.
pub fn l2_project_spacetime(mesh: &SpaceTimeMesh, point_values: &[f64]) -> Result<Vec<f64>, SpaceTimeError> {
    if point_values.len() != mesh.n_points() {
        return Err(SpaceTimeError::FieldLength {
            expected: mesh.n_points(),
            got: point_values.len(),
        });
    }
    let n = mesh.n_nodes();
    let mut b = TripletBuilder::with_capacity(n, mesh.n_points() * 16);
    let mut rhs = vec![0.0; n];
    for (pt, f) in mesh.points().zip(point_values) {
        for a in 0..4 {
            rhs[pt.nodes[a]] += pt.weight * f * pt.n[a];
            for c in 0..4 {
                b.add(pt.nodes[a], pt.nodes[c], pt.weight * pt.n[a] * pt.n[c]);
            }
        }
    }
    Ok(linear_solve(&b.build(), &rhs)?)
}
