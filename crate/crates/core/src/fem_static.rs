//! Dual residual and Jacobian for the 1-D elastostatics problem.
//!
//! The dual fields `λ` (paired with compatibility `u_x = e`) and `μ` (paired
//! with equilibrium) are continuous and piecewise linear. At every quadrature
//! point the primal fields come from the DtP mapping; the residual is the first
//! variation of the dual functional and the Jacobian its linearization through
//! the implicit derivatives of that mapping.
//!
//! Unknowns are ordered with all `λ` nodes first, then the interior `μ` nodes;
//! `μ` vanishes at both ends.

use crate::dtp::{self, AuxParams, DtpError, PointBase, StaticPointDual};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::material;
use crate::mesh::Mesh1D;
use crate::profile::Piecewise;

/// Base state `(ū, ē)` about which the auxiliary potential is centred.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticBase {
    pub u_bar: Piecewise,
    pub e_bar: Piecewise,
}

impl StaticBase {
    /// Base with `ū(0) = 0` and `ū' = ē`.
    pub fn from_strain(e_bar: Piecewise) -> Self {
        let first = e_bar.pieces()[0].start;
        let trial = e_bar.antiderivative(first, 0.0);
        let u_bar = e_bar.antiderivative(first, -trial.eval(0.0));
        Self { u_bar, e_bar }
    }

    pub fn at(&self, x: f64) -> PointBase {
        PointBase {
            u_bar: self.u_bar.eval(x),
            e_bar: self.e_bar.eval(x),
        }
    }

    /// Largest `|ū' - ē|` over the mesh quadrature points.
    pub fn compatibility_defect(&self, mesh: &Mesh1D) -> f64 {
        let du = self.u_bar.derivative();
        mesh.points()
            .map(|p| (du.eval(p.x) - self.e_bar.eval(p.x)).abs())
            .fold(0.0, f64::max)
    }
}

/// Loading data of a static case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseBC {
    /// Slope of the bulk forcing `(u - αx)`.
    pub alpha: f64,
    /// Prescribed displacement at `x = 1`.
    pub alpha_star: f64,
    /// Whether the bulk forcing appears in the primal energy.
    pub include_bulk_term: bool,
}

/// Nodal values of both dual fields, one entry per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct DualDofs {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl DualDofs {
    pub fn zeros(n_nodes: usize) -> Self {
        Self {
            lambda: vec![0.0; n_nodes],
            mu: vec![0.0; n_nodes],
        }
    }
}

/// Numbering of the unconstrained unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofMap {
    n_nodes: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh1D) -> Self {
        Self { n_nodes: mesh.n_nodes() }
    }

    pub fn n_free(&self) -> usize {
        2 * self.n_nodes - 2
    }

    pub fn lambda(&self, node: usize) -> usize {
        node
    }

    /// Free index of `μ` at `node`, or `None` on the boundary.
    pub fn mu(&self, node: usize) -> Option<usize> {
        (node > 0 && node + 1 < self.n_nodes).then(|| self.n_nodes + node - 1)
    }

    pub fn scatter(&self, free: &[f64]) -> DualDofs {
        let mut d = DualDofs::zeros(self.n_nodes);
        for i in 0..self.n_nodes {
            d.lambda[i] = free[self.lambda(i)];
            if let Some(k) = self.mu(i) {
                d.mu[i] = free[k];
            }
        }
        d
    }

    pub fn gather(&self, dofs: &DualDofs) -> Vec<f64> {
        let mut v = vec![0.0; self.n_free()];
        for i in 0..self.n_nodes {
            v[self.lambda(i)] = dofs.lambda[i];
            if let Some(k) = self.mu(i) {
                v[k] = dofs.mu[i];
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("DtP mapping failed in element {element} at x = {x}: {source}")]
pub struct AssemblyError {
    pub element: usize,
    pub x: f64,
    pub source: DtpError,
}

/// DtP output at one quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub element: usize,
    pub x: f64,
    pub weight: f64,
    pub dual: StaticPointDual,
    pub base: PointBase,
    pub u: f64,
    pub e: f64,
}

/// Runs the DtP mapping at every quadrature point, element-major.
pub fn evaluate_points(
    mesh: &Mesh1D,
    dofs: &DualDofs,
    base: &StaticBase,
    bc: &CaseBC,
    p: &AuxParams,
) -> Result<Vec<PointSample>, AssemblyError> {
    let mut out = Vec::with_capacity(mesh.n_points());
    for pt in mesh.points() {
        let (i, j) = (pt.element, pt.element + 1);
        let dual = StaticPointDual {
            lambda: pt.n[0] * dofs.lambda[i] + pt.n[1] * dofs.lambda[j],
            lambda_x: pt.dn[0] * dofs.lambda[i] + pt.dn[1] * dofs.lambda[j],
            mu: pt.n[0] * dofs.mu[i] + pt.n[1] * dofs.mu[j],
            mu_x: pt.dn[0] * dofs.mu[i] + pt.dn[1] * dofs.mu[j],
        };
        let b = base.at(pt.x);
        // Without the bulk term μ does not enter the displacement equation.
        let mapped = if bc.include_bulk_term { dual } else { StaticPointDual { mu: 0.0, ..dual } };
        let prim = dtp::dtp_static(&mapped, &b, p).map_err(|source| AssemblyError {
            element: pt.element,
            x: pt.x,
            source,
        })?;
        out.push(PointSample {
            element: pt.element,
            x: pt.x,
            weight: pt.weight,
            dual,
            base: b,
            u: prim.u,
            e: prim.e,
        });
    }
    Ok(out)
}

/// Residual and Jacobian over all `2 n_nodes` unknowns, before constraints.
/// Index `i` is `λ_i`, index `n_nodes + i` is `μ_i`.
#[derive(Debug, Clone)]
pub struct UnconstrainedSystem {
    pub n_nodes: usize,
    pub residual: Vec<f64>,
    pub jacobian: Option<Vec<(usize, usize, f64)>>,
}

/// Assembles the volume terms of the residual and, if asked, the Jacobian.
pub fn assemble_unconstrained(
    mesh: &Mesh1D,
    dofs: &DualDofs,
    base: &StaticBase,
    bc: &CaseBC,
    p: &AuxParams,
    with_jacobian: bool,
) -> Result<UnconstrainedSystem, AssemblyError> {
    let n = mesh.n_nodes();
    let samples = evaluate_points(mesh, dofs, base, bc, p)?;
    let mut residual = vec![0.0; 2 * n];
    let mut jac = with_jacobian.then(|| Vec::with_capacity(16 * mesh.n_points()));
    let shapes: Vec<_> = mesh.points().collect();
    let bulk = if bc.include_bulk_term { 1.0 } else { 0.0 };
    for (s, pt) in samples.iter().zip(&shapes) {
        let w = s.weight;
        let nodes = [s.element, s.element + 1];
        let flux = material::flux(s.e);
        for a in 0..2 {
            let (na, dna) = (pt.n[a], pt.dn[a]);
            residual[nodes[a]] += -w * (s.u * dna + s.e * na);
            residual[n + nodes[a]] += -w * (flux * dna + bulk * (s.u - bc.alpha * s.x) * na);
        }
        if let Some(jac) = jac.as_mut() {
            let mapped = if bc.include_bulk_term { s.dual } else { StaticPointDual { mu: 0.0, ..s.dual } };
            let d = dtp::dtp_static_derivatives(&mapped, &s.base, p, s.e).map_err(|source| AssemblyError {
                element: s.element,
                x: s.x,
                source,
            })?;
            let k = material::flux_derivative(s.e);
            let cu = d.du_dlambda_x;
            let cm = bulk * d.du_dmu;
            let de = d.de_dlambda;
            for a in 0..2 {
                let (na, dna) = (pt.n[a], pt.dn[a]);
                for b in 0..2 {
                    let (nb, dnb) = (pt.n[b], pt.dn[b]);
                    let (ra, rb) = (nodes[a], nodes[b]);
                    jac.push((ra, rb, -w * (cu * dna * dnb + de * na * nb)));
                    jac.push((ra, n + rb, -w * (d.de_dmu_x * na * dnb + cm * dna * nb)));
                    jac.push((n + ra, rb, -w * (bulk * cu * na * dnb + k * de * dna * nb)));
                    jac.push((n + ra, n + rb, -w * (k * d.de_dmu_x * dna * dnb + bulk * cm * na * nb)));
                }
            }
        }
    }
    Ok(UnconstrainedSystem {
        n_nodes: n,
        residual,
        jacobian: jac,
    })
}

/// System restricted to the free unknowns.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    pub residual: Vec<f64>,
    pub jacobian: Option<SparseMatrix>,
}

/// Drops the boundary `μ` rows and columns and adds the displacement datum
/// `α* δλ(1)` to the right-end `λ` equation.
pub fn apply_dual_bcs(system: UnconstrainedSystem, bc: &CaseBC) -> ConstrainedSystem {
    let n = system.n_nodes;
    let map = DofMap { n_nodes: n };
    let free = |full: usize| if full < n { Some(map.lambda(full)) } else { map.mu(full - n) };
    let mut residual = vec![0.0; map.n_free()];
    for (i, r) in system.residual.iter().enumerate() {
        if let Some(k) = free(i) {
            residual[k] += r;
        }
    }
    residual[map.lambda(n - 1)] += bc.alpha_star;
    let jacobian = system.jacobian.map(|entries| {
        let mut b = TripletBuilder::with_capacity(map.n_free(), entries.len());
        for (i, j, v) in entries {
            if let (Some(r), Some(c)) = (free(i), free(j)) {
                b.add(r, c, v);
            }
        }
        b.build()
    });
    ConstrainedSystem { residual, jacobian }
}

/// Residual over the free unknowns.
pub fn assemble_residual(
    mesh: &Mesh1D,
    dofs: &DualDofs,
    base: &StaticBase,
    bc: &CaseBC,
    p: &AuxParams,
) -> Result<Vec<f64>, AssemblyError> {
    let sys = assemble_unconstrained(mesh, dofs, base, bc, p, false)?;
    Ok(apply_dual_bcs(sys, bc).residual)
}

/// Jacobian over the free unknowns.
pub fn assemble_jacobian(
    mesh: &Mesh1D,
    dofs: &DualDofs,
    base: &StaticBase,
    bc: &CaseBC,
    p: &AuxParams,
) -> Result<SparseMatrix, AssemblyError> {
    let sys = assemble_unconstrained(mesh, dofs, base, bc, p, true)?;
    Ok(apply_dual_bcs(sys, bc).jacobian.expect("jacobian requested"))
}

/// Residual and Jacobian from a single pass over the mesh.
pub fn assemble_system(
    mesh: &Mesh1D,
    dofs: &DualDofs,
    base: &StaticBase,
    bc: &CaseBC,
    p: &AuxParams,
) -> Result<(Vec<f64>, SparseMatrix), AssemblyError> {
    let sys = apply_dual_bcs(assemble_unconstrained(mesh, dofs, base, bc, p, true)?, bc);
    Ok((sys.residual, sys.jacobian.expect("jacobian requested")))
}
