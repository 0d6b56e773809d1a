//! One-dimensional meshes of linear elements on `[0, 1]`, with L² projection
//! of quadrature-point fields and L¹ norms.

use crate::quadrature::{QuadratureRule, UnsupportedOrder};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("mesh needs at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("node coordinates must increase strictly (node {index})")]
    NotIncreasing { index: usize },
    #[error("mesh must span [0, 1], got [{first}, {last}]")]
    WrongSpan { first: f64, last: f64 },
    #[error(transparent)]
    Quadrature(#[from] UnsupportedOrder),
    #[error("expected {expected} values, got {got}")]
    FieldLength { expected: usize, got: usize },
    #[error("mass matrix is singular at row {row}")]
    SingularMass { row: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    quad: QuadratureRule,
}

/// Shape-function data of one quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPoint {
    pub element: usize,
    pub x: f64,
    pub weight: f64,
    /// Values of the left and right shape functions.
    pub n: [f64; 2],
    /// Their derivatives.
    pub dn: [f64; 2],
}

impl Mesh1D {
    pub fn new(nodes: Vec<f64>, quad_order: usize) -> Result<Self, MeshError> {
        if nodes.len() < 2 {
            return Err(MeshError::TooFewNodes(nodes.len()));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(MeshError::NotIncreasing { index: i + 1 });
        }
        let (first, last) = (nodes[0], *nodes.last().unwrap());
        if first != 0.0 || last != 1.0 {
            return Err(MeshError::WrongSpan { first, last });
        }
        Ok(Self {
            nodes,
            quad: QuadratureRule::gauss(quad_order)?,
        })
    }

    /// `n_elements` equal elements with 2-point Gauss quadrature.
    pub fn uniform(n_elements: usize) -> Result<Self, MeshError> {
        Self::uniform_with_order(n_elements, 2)
    }

    pub fn uniform_with_order(n_elements: usize, quad_order: usize) -> Result<Self, MeshError> {
        let n = n_elements.max(1) as f64;
        let mut nodes: Vec<f64> = (0..=n_elements).map(|i| i as f64 / n).collect();
        if let Some(last) = nodes.last_mut() {
            *last = 1.0;
        }
        Self::new(nodes, quad_order)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn quad(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn points_per_element(&self) -> usize {
        self.quad.len()
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    /// Quadrature points of element `e`.
    pub fn element_points(&self, e: usize) -> impl Iterator<Item = ElementPoint> + '_ {
        let (a, b) = self.element_bounds(e);
        let h = b - a;
        self.quad.mapped(a, b).map(move |(x, weight)| {
            let s = (x - a) / h;
            ElementPoint {
                element: e,
                x,
                weight,
                n: [1.0 - s, s],
                dn: [-1.0 / h, 1.0 / h],
            }
        })
    }

    /// All quadrature points, element-major.
    pub fn points(&self) -> impl Iterator<Item = ElementPoint> + '_ {
        (0..self.n_elements()).flat_map(move |e| self.element_points(e))
    }

    pub fn n_points(&self) -> usize {
        self.n_elements() * self.quad.len()
    }

    /// Evaluates a nodal piecewise-linear field at `x`.
    pub fn interpolate(&self, nodal: &[f64], x: f64) -> f64 {
        let e = self.nodes.partition_point(|&n| n <= x).clamp(1, self.n_elements()) - 1;
        let (a, b) = self.element_bounds(e);
        let s = (x - a) / (b - a);
        nodal[e] * (1.0 - s) + nodal[e + 1] * s
    }
}

/// L² projection of a quadrature-point field onto continuous linear elements
/// (consistent mass matrix). The projection preserves the integral over
/// `[0, 1]` and reproduces fields already in the element space.
pub fn l2_project(mesh: &Mesh1D, point_values: &[f64]) -> Result<Vec<f64>, MeshError> {
    if point_values.len() != mesh.n_points() {
        return Err(MeshError::FieldLength {
            expected: mesh.n_points(),
            got: point_values.len(),
        });
    }
    let n = mesh.n_nodes();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];
    for (pt, &f) in mesh.points().zip(point_values) {
        let e = pt.element;
        for a in 0..2 {
            rhs[e + a] += pt.weight * f * pt.n[a];
            diag[e + a] += pt.weight * pt.n[a] * pt.n[a];
        }
        off[e] += pt.weight * pt.n[0] * pt.n[1];
    }
    solve_tridiagonal(&off, &diag, &off, &rhs)
}

/// Thomas algorithm for `sub[i-1] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>, MeshError> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    for i in 0..n {
        if i > 0 {
            pivot = diag[i] - sub[i - 1] * c[i - 1];
        }
        if !(pivot.abs() > f64::MIN_POSITIVE) {
            return Err(MeshError::SingularMass { row: i });
        }
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - if i > 0 { sub[i - 1] * d[i - 1] } else { 0.0 }) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Exact `∫₀¹ |f|` of a nodal piecewise-linear field.
pub fn l1_norm_nodal(mesh: &Mesh1D, nodal: &[f64]) -> f64 {
    (0..mesh.n_elements())
        .map(|e| {
            let (a, b) = mesh.element_bounds(e);
            abs_linear_integral(nodal[e], nodal[e + 1], b - a)
        })
        .sum()
}

/// `∫|f|` of the linear function from `f0` to `f1` over a length `h`.
fn abs_linear_integral(f0: f64, f1: f64, h: f64) -> f64 {
    if f0 * f1 >= 0.0 {
        0.5 * h * (f0.abs() + f1.abs())
    } else {
        0.5 * h * (f0 * f0 + f1 * f1) / (f0.abs() + f1.abs())
    }
}

/// `Σ w |f|` over the mesh quadrature points.
pub fn l1_norm_points(mesh: &Mesh1D, point_values: &[f64]) -> f64 {
    mesh.points().zip(point_values).map(|(p, f)| p.weight * f.abs()).sum()
}

/// `∫|u_h - target|` for a nodal field, with 5-point Gauss per element.
pub fn l1_error_nodal(mesh: &Mesh1D, nodal: &[f64], target: impl Fn(f64) -> f64) -> f64 {
    let rule = QuadratureRule::gauss(5).expect("5-point rule is tabulated");
    (0..mesh.n_elements())
        .map(|e| {
            let (a, b) = mesh.element_bounds(e);
            rule.mapped(a, b)
                .map(|(x, w)| {
                    let s = (x - a) / (b - a);
                    let uh = nodal[e] * (1.0 - s) + nodal[e + 1] * s;
                    w * (uh - target(x)).abs()
                })
                .sum::<f64>()
        })
        .sum()
}

/// `Σ w |f - target|` over the mesh quadrature points.
pub fn l1_error_points(mesh: &Mesh1D, point_values: &[f64], target: impl Fn(f64) -> f64) -> f64 {
    mesh.points()
        .zip(point_values)
        .map(|(p, f)| p.weight * (f - target(p.x)).abs())
        .sum()
}
