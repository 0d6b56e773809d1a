//! Named problem setups, their base states, and mesh-refinement studies.
//!
//! Every static case is a choice of loading `(α, α*, bulk term)`, a base
//! state `(ū, ē)` that doubles as the initial guess (zero dual unknowns), and
//! where known an exact target solution. Dynamic cases wrap the grain-boundary
//! equilibrium as initial data.

use std::fmt;
use std::str::FromStr;

use crate::dtp::AuxParams;
use crate::fem_static::{self, AssemblyError, CaseBC, DofMap, DualDofs, PointSample, StaticBase};
use crate::fem_spacetime::{self as st, DynamicCase, DynamicSolution, SpaceTimeBase, SpaceTimeError, SpaceTimeMesh};
use crate::linalg::SparseMatrix;
use crate::material;
use crate::mesh::{self, Mesh1D, MeshError};
use crate::newton::{newton_solve, NewtonConfig, NewtonFailure, NewtonReport, NonlinearSystem};
use crate::profile::{Piece, Piecewise};

/// Breakpoints of the three-grain bar.
pub const GRAIN_BREAKS: [f64; 4] = [0.3225, 0.3325, 0.8275, 0.8875];
/// Tabulated strains of the three-grain bar, left to right.
pub const GRAIN_STRAINS: [f64; 5] = [0.115, 0.8, 2.085, 0.8, 0.115];
/// Tabulated displacement offsets of each segment (value at the segment start).
pub const GRAIN_OFFSETS: [f64; 5] = [0.0, 0.037, 0.045, 1.077, 1.125];
/// Prescribed end displacement of the three-grain bar.
pub const GRAIN_END_DISPLACEMENT: f64 = 1.138;

/// Centres of the displacement bumps of the perturbed dynamic case: one in
/// the low-strain grain and one in the high-strain grain.
pub const BUMP_CENTRES: [f64; 2] = [0.16, 0.58];
/// Half-width of each bump.
pub const BUMP_HALF_WIDTH: f64 = 0.04;

/// Kink location for which the staircase profile is admissible.
pub const STAIRCASE_KINK: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseName {
    StressFree,
    StressedHomogeneous,
    StressedInhomogeneous,
    HatBifurcation(f64),
    GrainBoundaryStatic,
    GrainBoundaryDynamic,
    PerturbedDynamic,
}

impl CaseName {
    pub const ALL: [&'static str; 7] = [
        "stress_free",
        "stressed_homogeneous",
        "stressed_inhomogeneous",
        "hat_bifurcation",
        "grain_boundary_static",
        "grain_boundary_dynamic",
        "perturbed_dynamic",
    ];

    pub fn is_dynamic(&self) -> bool {
        matches!(self, CaseName::GrainBoundaryDynamic | CaseName::PerturbedDynamic)
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseName::StressFree => write!(f, "stress_free"),
            CaseName::StressedHomogeneous => write!(f, "stressed_homogeneous"),
            CaseName::StressedInhomogeneous => write!(f, "stressed_inhomogeneous"),
            CaseName::HatBifurcation(a) => write!(f, "hat_bifurcation({a})"),
            CaseName::GrainBoundaryStatic => write!(f, "grain_boundary_static"),
            CaseName::GrainBoundaryDynamic => write!(f, "grain_boundary_dynamic"),
            CaseName::PerturbedDynamic => write!(f, "perturbed_dynamic"),
        }
    }
}

impl FromStr for CaseName {
    type Err = CaseError;

    /// Accepts the snake-case names; the hat case optionally carries its
    /// amplitude as `hat_bifurcation(1.0)` or `hat_bifurcation:1.0`.
    fn from_str(s: &str) -> Result<Self, CaseError> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("hat_bifurcation") {
            let arg = rest.trim_start_matches([':', '(']).trim_end_matches(')');
            if arg.is_empty() {
                return Ok(CaseName::HatBifurcation(0.2));
            }
            return arg
                .parse::<f64>()
                .ok()
                .filter(|a| a.is_finite() && *a >= 0.0)
                .map(CaseName::HatBifurcation)
                .ok_or_else(|| CaseError::UnknownCase(s.to_string()));
        }
        Ok(match s {
            "stress_free" => CaseName::StressFree,
            "stressed_homogeneous" => CaseName::StressedHomogeneous,
            "stressed_inhomogeneous" => CaseName::StressedInhomogeneous,
            "grain_boundary_static" => CaseName::GrainBoundaryStatic,
            "grain_boundary_dynamic" => CaseName::GrainBoundaryDynamic,
            "perturbed_dynamic" => CaseName::PerturbedDynamic,
            _ => return Err(CaseError::UnknownCase(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CaseError {
    #[error("unknown case '{0}' (expected one of {list})", list = CaseName::ALL.join(", "))]
    UnknownCase(String),
    #[error("staircase kink x0 = {0} is infeasible: the slope beyond it must be 0 or 2, which needs x0 = 2/3")]
    InfeasibleBreakpoint(f64),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("{case} is a {kind} case")]
    WrongKind { case: String, kind: &'static str },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    SpaceTime(#[from] SpaceTimeError),
    #[error("{case} with {size}: {failure} (residual history {history:?})")]
    Newton {
        case: String,
        size: String,
        failure: NewtonFailure,
        history: Vec<f64>,
    },
    #[error("{case}: {source}")]
    Assembly { case: String, source: AssemblyError },
}

/// Tunable inputs shared by all cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseOptions {
    pub aux: AuxParams,
    /// Space-time window length for the dynamic cases.
    pub final_time: Option<f64>,
    /// Peak displacement of each bump in the perturbed dynamic case.
    pub perturbation: f64,
}

impl Default for CaseOptions {
    fn default() -> Self {
        Self {
            aux: AuxParams::default(),
            final_time: None,
            perturbation: 3e-4,
        }
    }
}

/// Exact solution of a static case.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub u: Piecewise,
    pub e: Piecewise,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseKind {
    Static {
        bc: CaseBC,
        base: StaticBase,
    },
    Dynamic {
        case: DynamicCase,
        base: SpaceTimeBase,
        /// Equilibrium strain the stability metric is measured against.
        equilibrium: Piecewise,
        nx: usize,
        nt: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub name: CaseName,
    pub kind: CaseKind,
    pub target: Option<Target>,
    /// Element counts of the refinement study (empty for dynamics).
    pub refinement: Vec<usize>,
    pub aux: AuxParams,
}

/// Shifted Legendre polynomial of degree `k` on `[0, 1]`, as monomial
/// coefficients in `x`. Degrees `k >= 1` have zero mean.
pub fn shifted_legendre(k: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![-1.0, 2.0];
    for n in 1..k {
        let nf = n as f64;
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i] -= (2.0 * nf + 1.0) * c;
            next[i + 1] += 2.0 * (2.0 * nf + 1.0) * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= nf * c;
        }
        for c in &mut next {
            *c /= nf + 1.0;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// `e0 + amplitude * P_k(x)`, which keeps the mean strain at `e0`.
fn perturbed_constant(e0: f64, amplitude: f64, k: usize) -> Piecewise {
    let mut c: Vec<f64> = shifted_legendre(k).iter().map(|v| v * amplitude).collect();
    c[0] += e0;
    Piecewise::polynomial(c)
}

fn linear_target(slope: f64) -> Target {
    Target {
        u: Piecewise::polynomial(vec![0.0, slope]),
        e: Piecewise::constant(slope),
    }
}

fn grain_starts() -> [f64; 5] {
    [0.0, GRAIN_BREAKS[0], GRAIN_BREAKS[1], GRAIN_BREAKS[2], GRAIN_BREAKS[3]]
}

/// Tabulated three-grain target: strains and the displacement formulas as
/// listed (their offsets are rounded, so `u` jumps by up to `5e-4`).
pub fn grain_boundary_target() -> Target {
    let starts = grain_starts();
    let u = Piecewise::new(
        (0..5)
            .map(|i| Piece {
                start: starts[i],
                coeffs: vec![GRAIN_OFFSETS[i], GRAIN_STRAINS[i]],
            })
            .collect(),
    );
    Target {
        u,
        e: Piecewise::piecewise_constant(&starts, &GRAIN_STRAINS),
    }
}

/// Equal-stress partner strains: the roots of `σ(e) = σ(0.8)` near the
/// tabulated grain strains, so the profile is an exact equilibrium.
pub fn grain_equilibrium_strains() -> [f64; 5] {
    let target = material::stress(GRAIN_STRAINS[1]);
    let solve = |guess: f64| {
        let mut e = guess;
        for _ in 0..50 {
            let step = (material::stress(e) - target) / material::stiffness(e);
            e -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        e
    };
    let low = solve(GRAIN_STRAINS[0]);
    let high = solve(GRAIN_STRAINS[2]);
    [low, GRAIN_STRAINS[1], high, GRAIN_STRAINS[1], low]
}

/// Piecewise-constant equilibrium strain of the three-grain bar.
pub fn grain_equilibrium_profile() -> Piecewise {
    Piecewise::piecewise_constant(&grain_starts(), &grain_equilibrium_strains())
}

/// Staircase base state: slopes 0 and 2 (3:1 split per step) averaging to
/// a slope-½ backbone on `[0, x0]`, then slope 2 up to `u(1) = 1`.
pub fn staircase_profile(x0: f64, n_steps: usize) -> Result<StaticBase, CaseError> {
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(CaseError::InfeasibleBreakpoint(x0));
    }
    let beyond = (1.0 - 0.5 * x0) / (1.0 - x0);
    if (beyond - 2.0).abs() > 1e-9 {
        return Err(CaseError::InfeasibleBreakpoint(x0));
    }
    let mut starts = Vec::new();
    let mut slopes = Vec::new();
    if n_steps == 0 {
        starts.push(0.0);
        slopes.push(0.5);
    } else {
        let w = x0 / n_steps as f64;
        for i in 0..n_steps {
            let a = i as f64 * w;
            starts.push(a);
            slopes.push(0.0);
            starts.push(a + 0.75 * w);
            slopes.push(2.0);
        }
    }
    starts.push(x0);
    slopes.push(2.0);
    Ok(StaticBase::from_strain(Piecewise::piecewise_constant(&starts, &slopes)))
}

/// Base strain of the hat case: `1 + a` on the left half, `1 - a` on the right.
pub fn hat_base(a: f64) -> StaticBase {
    StaticBase::from_strain(Piecewise::piecewise_constant(&[0.0, 0.5], &[1.0 + a, 1.0 - a]))
}

/// Builds the named case.
pub fn build_case(name: CaseName, options: &CaseOptions) -> Result<CaseSpec, CaseError> {
    options
        .aux
        .validate()
        .map_err(|e| CaseError::InvalidOption(e.to_string()))?;
    let statics = |bc: CaseBC, e_bar: Piecewise, target: Option<Target>, refinement: Vec<usize>| CaseSpec {
        name,
        kind: CaseKind::Static {
            bc,
            base: StaticBase::from_strain(e_bar),
        },
        target,
        refinement,
        aux: options.aux,
    };
    let ladder = vec![100, 1600, 8000];
    Ok(match name {
        CaseName::StressFree => statics(
            CaseBC {
                alpha: 1.0,
                alpha_star: 1.0,
                include_bulk_term: true,
            },
            perturbed_constant(1.0, 0.3, 2),
            Some(linear_target(1.0)),
            ladder,
        ),
        CaseName::StressedHomogeneous => statics(
            CaseBC {
                alpha: 0.5,
                alpha_star: 0.5,
                include_bulk_term: true,
            },
            perturbed_constant(0.5, 0.05, 2),
            Some(linear_target(0.5)),
            ladder,
        ),
        CaseName::StressedInhomogeneous => statics(
            CaseBC {
                alpha: 0.5,
                alpha_star: 1.0,
                include_bulk_term: true,
            },
            Piecewise::constant(1.2),
            None,
            vec![100, 2000, 4000, 8000],
        ),
        CaseName::HatBifurcation(a) => CaseSpec {
            name,
            kind: CaseKind::Static {
                bc: CaseBC {
                    alpha: 0.0,
                    alpha_star: 1.0,
                    include_bulk_term: false,
                },
                base: hat_base(a),
            },
            target: Some(linear_target(1.0)),
            refinement: ladder,
            aux: options.aux,
        },
        CaseName::GrainBoundaryStatic => statics(
            CaseBC {
                alpha: 0.0,
                alpha_star: GRAIN_END_DISPLACEMENT,
                include_bulk_term: false,
            },
            Piecewise::piecewise_constant(&grain_starts(), &GRAIN_STRAINS),
            Some(grain_boundary_target()),
            vec![400, 1600, 8000],
        ),
        CaseName::GrainBoundaryDynamic | CaseName::PerturbedDynamic => {
            dynamic_spec(name, options)?
        }
    })
}

/// Converged static solution on one mesh.
#[derive(Debug, Clone)]
pub struct StaticSolution {
    pub mesh: Mesh1D,
    pub dofs: DualDofs,
    pub samples: Vec<PointSample>,
    pub u_nodal: Vec<f64>,
    pub e_nodal: Vec<f64>,
    pub newton: NewtonReport,
}

impl StaticSolution {
    pub fn u_points(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.u).collect()
    }

    pub fn e_points(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.e).collect()
    }

    /// Spread `max σ(ê) - min σ(ê)` over the quadrature points.
    pub fn stress_spread(&self) -> f64 {
        let (lo, hi) = self.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            let sig = material::stress(s.e);
            (lo.min(sig), hi.max(sig))
        });
        hi - lo
    }
}

/// The static dual problem as a [`NonlinearSystem`] over the free unknowns.
pub struct StaticProblem<'a> {
    pub mesh: &'a Mesh1D,
    pub map: DofMap,
    pub base: &'a StaticBase,
    pub bc: CaseBC,
    pub aux: AuxParams,
}

impl NonlinearSystem for StaticProblem<'_> {
    type Error = AssemblyError;

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>, AssemblyError> {
        fem_static::assemble_residual(self.mesh, &self.map.scatter(x), self.base, &self.bc, &self.aux)
    }

    fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix, AssemblyError> {
        fem_static::assemble_jacobian(self.mesh, &self.map.scatter(x), self.base, &self.bc, &self.aux)
    }

    fn residual_and_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, SparseMatrix), AssemblyError> {
        fem_static::assemble_system(self.mesh, &self.map.scatter(x), self.base, &self.bc, &self.aux)
    }
}

/// Newton solve from the zero dual state followed by L² projection.
pub fn solve_static(
    name: &str,
    mesh: Mesh1D,
    base: &StaticBase,
    bc: &CaseBC,
    aux: &AuxParams,
    newton: &NewtonConfig,
) -> Result<StaticSolution, CaseError> {
    let map = DofMap::new(&mesh);
    let problem = StaticProblem {
        mesh: &mesh,
        map,
        base,
        bc: *bc,
        aux: *aux,
    };
    let (x, report) = newton_solve(&problem, vec![0.0; map.n_free()], newton);
    if let Some(failure) = report.failure.clone() {
        return Err(CaseError::Newton {
            case: name.to_string(),
            size: format!("{} elements", mesh.n_elements()),
            failure,
            history: report.history,
        });
    }
    let dofs = map.scatter(&x);
    let samples = fem_static::evaluate_points(&mesh, &dofs, base, bc, aux).map_err(|source| CaseError::Assembly {
        case: name.to_string(),
        source,
    })?;
    let u: Vec<f64> = samples.iter().map(|s| s.u).collect();
    let e: Vec<f64> = samples.iter().map(|s| s.e).collect();
    let u_nodal = mesh::l2_project(&mesh, &u)?;
    let e_nodal = mesh::l2_project(&mesh, &e)?;
    Ok(StaticSolution {
        mesh,
        dofs,
        samples,
        u_nodal,
        e_nodal,
        newton: report,
    })
}

/// Errors and fields of one static run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub case: String,
    pub n_elements: usize,
    pub aux: AuxParams,
    /// `‖û - u_t‖₁` of the projected displacement, when a target exists.
    pub u_error: Option<f64>,
    /// `‖ê - e_t‖₁` of the projected strain, when a target exists.
    pub e_error: Option<f64>,
    /// `‖ê - e_t‖₁` of the DtP strain at the quadrature points.
    pub e_error_points: Option<f64>,
    pub solution: StaticSolution,
    pub target: Option<Target>,
}

impl RunReport {
    pub fn newton(&self) -> &NewtonReport {
        &self.solution.newton
    }
}

/// Solves a static case on a uniform mesh and measures errors against its target.
pub fn run_static_case(spec: &CaseSpec, n_elements: usize, newton: &NewtonConfig) -> Result<RunReport, CaseError> {
    let CaseKind::Static { bc, base } = &spec.kind else {
        return Err(CaseError::WrongKind {
            case: spec.name.to_string(),
            kind: "dynamic",
        });
    };
    let mesh = Mesh1D::uniform(n_elements)?;
    let solution = solve_static(&spec.name.to_string(), mesh, base, bc, &spec.aux, newton)?;
    let errors = spec.target.as_ref().map(|t| {
        let m = &solution.mesh;
        (
            mesh::l1_error_nodal(m, &solution.u_nodal, |x| t.u.eval(x)),
            mesh::l1_error_nodal(m, &solution.e_nodal, |x| t.e.eval(x)),
            mesh::l1_error_points(m, &solution.e_points(), |x| t.e.eval(x)),
        )
    });
    Ok(RunReport {
        case: spec.name.to_string(),
        n_elements,
        aux: spec.aux,
        u_error: errors.map(|e| e.0),
        e_error: errors.map(|e| e.1),
        e_error_points: errors.map(|e| e.2),
        solution,
        target: spec.target.clone(),
    })
}

/// Runs every mesh of the ladder.
pub fn refinement_study(spec: &CaseSpec, ladder: &[usize], newton: &NewtonConfig) -> Result<Vec<RunReport>, CaseError> {
    ladder.iter().map(|&n| run_static_case(spec, n, newton)).collect()
}

/// One row of a self-convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfConvergenceRow {
    pub n_elements: usize,
    pub u_difference: f64,
    pub e_difference: f64,
}

/// `‖f_coarse - f_fine‖₁` for nodal fields on nested uniform meshes.
pub fn nested_l1_difference(coarse: &Mesh1D, coarse_nodal: &[f64], fine: &Mesh1D, fine_nodal: &[f64]) -> f64 {
    let diff: Vec<f64> = fine
        .nodes()
        .iter()
        .zip(fine_nodal)
        .map(|(&x, f)| coarse.interpolate(coarse_nodal, x) - f)
        .collect();
    mesh::l1_norm_nodal(fine, &diff)
}

/// Compares each coarse solution with the one on `reference` elements.
pub fn self_convergence(
    spec: &CaseSpec,
    coarse: &[usize],
    reference: usize,
    newton: &NewtonConfig,
) -> Result<Vec<SelfConvergenceRow>, CaseError> {
    let fine = run_static_case(spec, reference, newton)?;
    coarse
        .iter()
        .map(|&n| {
            let r = run_static_case(spec, n, newton)?;
            let (cm, fm) = (&r.solution.mesh, &fine.solution.mesh);
            Ok(SelfConvergenceRow {
                n_elements: n,
                u_difference: nested_l1_difference(cm, &r.solution.u_nodal, fm, &fine.solution.u_nodal),
                e_difference: nested_l1_difference(cm, &r.solution.e_nodal, fm, &fine.solution.e_nodal),
            })
        })
        .collect()
}

/// Strain of a displacement bump `A (1 - s²/w²)³`, `s = x - centre`.
pub fn bump_strain(amplitude: f64, centre: f64, half_width: f64) -> Piecewise {
    let w2 = half_width * half_width;
    let c = [
        0.0,
        -6.0 * amplitude / w2,
        0.0,
        12.0 * amplitude / (w2 * w2),
        0.0,
        -6.0 * amplitude / (w2 * w2 * w2),
    ];
    Piecewise::local_polynomial(centre - half_width, centre + half_width, centre, &c)
}

/// Small-strain wave speed `sqrt(stiffness(e) / ρ₀)`, or NaN in the spinodal region.
pub fn wave_speed(e: f64, rho0: f64) -> f64 {
    (material::stiffness(e) / rho0).sqrt()
}

fn dynamic_spec(name: CaseName, options: &CaseOptions) -> Result<CaseSpec, CaseError> {
    let equilibrium = grain_equilibrium_profile();
    let perturbed = name == CaseName::PerturbedDynamic;
    let final_time = options.final_time.unwrap_or(if perturbed { 0.05 } else { 1.0 });
    let (e0, base, nx, nt) = if perturbed {
        let e0 = BUMP_CENTRES.iter().fold(equilibrium.clone(), |acc, &c| {
            acc.add_scaled(&bump_strain(options.perturbation, c, BUMP_HALF_WIDTH), 1.0)
        });
        (e0, SpaceTimeBase::at_rest(equilibrium.clone()), 256, 64)
    } else {
        // The base uses the rounded tabulated strains, so Newton has to
        // recover the exact equal-stress values.
        let rounded = Piecewise::piecewise_constant(&grain_starts(), &GRAIN_STRAINS);
        (equilibrium.clone(), SpaceTimeBase::at_rest(rounded), 64, 64)
    };
    let case = DynamicCase {
        e0,
        v0: Piecewise::constant(0.0),
        v_left: Piecewise::constant(0.0),
        v_right: Piecewise::constant(0.0),
        final_time,
        rho0: options.aux.rho0,
    };
    case.validate()?;
    Ok(CaseSpec {
        name,
        kind: CaseKind::Dynamic {
            case,
            base,
            equilibrium,
            nx,
            nt,
        },
        target: None,
        refinement: Vec::new(),
        aux: options.aux,
    })
}

/// Result of one space-time solve.
#[derive(Debug, Clone)]
pub struct DynamicRunReport {
    pub case: String,
    pub nx: usize,
    pub nt: usize,
    pub final_time: f64,
    pub aux: AuxParams,
    pub data: DynamicCase,
    pub equilibrium: Piecewise,
    pub solution: DynamicSolution,
    /// `max |ê - e_eq|` over all quadrature points of the window.
    pub stability: f64,
}

/// `max |ê - e_eq|` over the samples.
pub fn stability_metric(samples: &[st::DynamicPointSample], equilibrium: &Piecewise) -> f64 {
    samples
        .iter()
        .map(|s| (s.e - equilibrium.eval(s.x)).abs())
        .fold(0.0, f64::max)
}

/// Monolithic space-time solve on an `nx × nt` grid.
pub fn run_dynamic_case(spec: &CaseSpec, nx: usize, nt: usize, newton: &NewtonConfig) -> Result<DynamicRunReport, CaseError> {
    let CaseKind::Dynamic {
        case, base, equilibrium, ..
    } = &spec.kind
    else {
        return Err(CaseError::WrongKind {
            case: spec.name.to_string(),
            kind: "static",
        });
    };
    let mesh = SpaceTimeMesh::uniform(nx, nt, case.final_time)?;
    let solution = st::solve_dynamic(mesh, base, case, &spec.aux, newton).map_err(|(report, _)| CaseError::Newton {
        case: spec.name.to_string(),
        size: format!("{nx} x {nt} space-time elements"),
        failure: report.failure.clone().unwrap_or(NewtonFailure::MaxIterations(newton.max_iter)),
        history: report.history,
    })?;
    let stability = stability_metric(&solution.samples, equilibrium);
    Ok(DynamicRunReport {
        case: spec.name.to_string(),
        nx,
        nt,
        final_time: case.final_time,
        aux: spec.aux,
        data: case.clone(),
        equilibrium: equilibrium.clone(),
        solution,
        stability,
    })
}

/// Nodal values at one space-time grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicFieldRow {
    pub t: f64,
    pub x: f64,
    pub u: f64,
    pub v: f64,
    pub e: f64,
}

/// Projects `v̂`, `ê` onto the grid and rebuilds `û` by integrating the left
/// end velocity in time and `ê` in space (trapezoidal rule).
pub fn dynamic_fields(report: &DynamicRunReport) -> Result<Vec<DynamicFieldRow>, CaseError> {
    let sol = &report.solution;
    let mesh = &sol.mesh;
    let v = st::l2_project_spacetime(mesh, &sol.samples.iter().map(|s| s.v).collect::<Vec<_>>())?;
    let e = st::l2_project_spacetime(mesh, &sol.samples.iter().map(|s| s.e).collect::<Vec<_>>())?;
    let mut rows = Vec::with_capacity(mesh.n_nodes());
    for (j, &t) in mesh.ts().iter().enumerate() {
        let mut u = report.data.v_left.integral(0.0, t);
        for (i, &x) in mesh.xs().iter().enumerate() {
            let k = mesh.node(i, j);
            if i > 0 {
                let km = mesh.node(i - 1, j);
                u += 0.5 * (x - mesh.xs()[i - 1]) * (e[k] + e[km]);
            }
            rows.push(DynamicFieldRow { t, x, u, v: v[k], e: e[k] });
        }
    }
    Ok(rows)
}

/// Speeds of the two packets a bump at `centre` splits into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSpeeds {
    pub left: f64,
    pub right: f64,
}

impl PacketSpeeds {
    pub fn mean(&self) -> f64 {
        0.5 * (self.left + self.right)
    }
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mt, mx) = points.iter().fold((0.0, 0.0), |(a, b), (t, x)| (a + t / n, b + x / n));
    let (num, den) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, x)| (a + (t - mt) * (x - mx), b + (t - mt) * (t - mt)));
    num / den
}

/// Tracks the centroids of `(ê - e_eq)²` on each side of `centre` within
/// `span`, per time slab, and fits their velocity over the second half of
/// the window (after the packets have separated).
pub fn packet_speeds(report: &DynamicRunReport, centre: f64, span: f64) -> PacketSpeeds {
    let nt = report.solution.mesh.nt();
    let mut acc = vec![[0.0f64; 4]; nt];
    for s in &report.solution.samples {
        let d = s.e - report.equilibrium.eval(s.x);
        let w = s.weight * d * d;
        let slot = &mut acc[s.element.1];
        if s.x > centre && s.x < centre + span {
            slot[0] += w * s.x;
            slot[1] += w;
        } else if s.x < centre && s.x > centre - span {
            slot[2] += w * s.x;
            slot[3] += w;
        }
    }
    let ts = report.solution.mesh.ts();
    let (mut right, mut left) = (Vec::new(), Vec::new());
    for (et, a) in acc.iter().enumerate().skip(nt / 2) {
        let t = 0.5 * (ts[et] + ts[et + 1]);
        right.push((t, a[0] / a[1]));
        left.push((t, a[2] / a[3]));
    }
    PacketSpeeds {
        left: -slope(&left),
        right: slope(&right),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in CaseName::ALL {
            let parsed: CaseName = n.parse().unwrap();
            assert!(parsed.to_string().starts_with(n));
        }
        assert_eq!("hat_bifurcation(1.0)".parse::<CaseName>().unwrap(), CaseName::HatBifurcation(1.0));
        assert_eq!("hat_bifurcation:0.5".parse::<CaseName>().unwrap(), CaseName::HatBifurcation(0.5));
        assert!(matches!("nope".parse::<CaseName>(), Err(CaseError::UnknownCase(_))));
    }

    #[test]
    fn grain_target_table_values() {
        let t = grain_boundary_target();
        assert!((t.u.eval(0.8275) - 1.077).abs() < 1e-15);
        assert_eq!(t.e.eval(0.5), 2.085);
        assert!((t.e.integral(0.0, 1.0) - 1.1381).abs() < 1e-4);
    }

    #[test]
    fn equilibrium_strains_share_stress() {
        let s = grain_equilibrium_strains();
        let sig = material::stress(0.8);
        for e in s {
            assert!((material::stress(e) - sig).abs() < 1e-13);
        }
        assert!((s[0] - 0.115).abs() < 1e-3 && (s[2] - 2.085).abs() < 1e-3);
    }

    #[test]
    fn staircase_shapes() {
        let two = staircase_profile(STAIRCASE_KINK, 0).unwrap();
        assert_eq!(two.e_bar.pieces().len(), 2);
        assert!((two.u_bar.eval(STAIRCASE_KINK) - STAIRCASE_KINK / 2.0).abs() < 1e-12);
        assert!((two.u_bar.eval(1.0) - 1.0).abs() < 1e-12);
        let steps = staircase_profile(STAIRCASE_KINK, 5).unwrap();
        for p in steps.e_bar.pieces() {
            assert!(p.coeffs[0] == 0.0 || p.coeffs[0] == 2.0);
        }
        for b in steps.u_bar.breakpoints() {
            assert!((steps.u_bar.eval(b) - steps.u_bar.eval_left(b)).abs() < 1e-12);
        }
        assert!((steps.u_bar.eval(1.0) - 1.0).abs() < 1e-12);
        assert!(matches!(staircase_profile(0.5, 3), Err(CaseError::InfeasibleBreakpoint(_))));
    }

    #[test]
    fn legendre_has_zero_mean() {
        for k in 1..6 {
            let p = Piecewise::polynomial(shifted_legendre(k));
            assert!(p.integral(0.0, 1.0).abs() < 1e-13);
            assert!((p.eval(1.0) - 1.0).abs() < 1e-12);
        }
    }
}
