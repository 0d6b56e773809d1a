//! Reference primal elastodynamics: linear Galerkin elements in space with a
//! lumped mass matrix and explicit central differences in time.
//!
//! Used only as a contrast to the dual space-time solve. Wherever the strain
//! enters the spinodal region the primal system is not hyperbolic, and
//! round-off grows without bound.

use crate::fem_spacetime::DynamicCase;
use crate::material;
use crate::mesh::Mesh1D;

/// Safety factor applied to the CFL time step.
pub const CFL_SAFETY: f64 = 0.1;
/// Strain magnitude above which a run is declared blown up.
pub const BLOW_UP_STRAIN: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrimalError {
    #[error("time step {dt} exceeds the stable bound {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("density must be positive and finite, got {0}")]
    Density(f64),
}

/// Nodal displacement and velocity at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalState {
    pub step: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Element strains.
    pub e: Vec<f64>,
}

impl PrimalState {
    pub fn max_abs_strain(&self) -> f64 {
        self.e.iter().fold(0.0, |m, e| if e.is_finite() { m.max(e.abs()) } else { f64::INFINITY })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalOptions {
    /// Keep every `record_every`-th state (the initial state is always kept).
    pub record_every: usize,
    pub blow_up_strain: f64,
}

impl Default for PrimalOptions {
    fn default() -> Self {
        Self {
            record_every: 1,
            blow_up_strain: BLOW_UP_STRAIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalRun {
    pub dt: f64,
    pub states: Vec<PrimalState>,
    pub blow_up: bool,
    /// Step at which the blow-up was detected. That state is not recorded.
    pub blow_up_step: Option<usize>,
    pub blow_up_time: Option<f64>,
}

/// Largest `|stiffness|` over `[lo, hi]`.
pub fn max_abs_stiffness(lo: f64, hi: f64) -> f64 {
    let mut m = material::stiffness(lo).abs().max(material::stiffness(hi).abs());
    if lo <= 1.0 && 1.0 <= hi {
        m = m.max(material::stiffness(1.0).abs());
    }
    m
}

/// Stable explicit time step: `CFL_SAFETY · h_min / c`, with the wave speed
/// `c` from the largest `|stiffness|` over the initial strain range.
pub fn cfl_time_step(case: &DynamicCase, mesh: &Mesh1D) -> f64 {
    let strains: Vec<f64> = initial_state(case, mesh).2;
    let (lo, hi) = strains.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    let c = (max_abs_stiffness(lo, hi) / case.rho0).sqrt().max(f64::MIN_POSITIVE);
    let h = mesh.nodes().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    CFL_SAFETY * h / c
}

fn strains(mesh: &Mesh1D, u: &[f64]) -> Vec<f64> {
    mesh.nodes()
        .windows(2)
        .zip(u.windows(2))
        .map(|(x, u)| (u[1] - u[0]) / (x[1] - x[0]))
        .collect()
}

/// `u(x, 0) = ∫₀ˣ e0`, `v(x, 0) = v0(x)`, and element strains.
fn initial_state(case: &DynamicCase, mesh: &Mesh1D) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let anti = case.e0.antiderivative(case.e0.pieces()[0].start, 0.0);
    let shift = anti.eval(0.0);
    let u: Vec<f64> = mesh.nodes().iter().map(|&x| anti.eval(x) - shift).collect();
    let v: Vec<f64> = mesh.nodes().iter().map(|&x| case.v0.eval(x)).collect();
    let e = strains(mesh, &u);
    (u, v, e)
}

/// Nodal accelerations `M⁻¹(-f_int)` from element stresses; boundary nodes
/// are left at zero and driven by the boundary velocities instead.
fn accelerations(mesh: &Mesh1D, e: &[f64], mass: &[f64]) -> Vec<f64> {
    let n = mesh.n_nodes();
    let mut a = vec![0.0; n];
    for (k, &ek) in e.iter().enumerate() {
        let s = material::stress(ek);
        a[k] += s;
        a[k + 1] -= s;
    }
    a[0] = 0.0;
    a[n - 1] = 0.0;
    for (ai, m) in a.iter_mut().zip(mass) {
        *ai /= m;
    }
    a
}

/// Kinetic plus stored energy `Σ ½ M v² + Σ h φ(e)`.
pub fn total_energy(mesh: &Mesh1D, state: &PrimalState, rho0: f64) -> f64 {
    let mass = lumped_mass(mesh, rho0);
    let kinetic: f64 = state.v.iter().zip(&mass).map(|(v, m)| 0.5 * m * v * v).sum();
    let stored: f64 = mesh
        .nodes()
        .windows(2)
        .zip(&state.e)
        .map(|(x, &e)| (x[1] - x[0]) * material::energy_density(e))
        .sum();
    kinetic + stored
}

fn lumped_mass(mesh: &Mesh1D, rho0: f64) -> Vec<f64> {
    let mut m = vec![0.0; mesh.n_nodes()];
    for (k, x) in mesh.nodes().windows(2).enumerate() {
        let half = 0.5 * rho0 * (x[1] - x[0]);
        m[k] += half;
        m[k + 1] += half;
    }
    m
}

/// Integrates `n_steps` central-difference steps with default options.
pub fn evolve_primal(case: &DynamicCase, mesh: &Mesh1D, dt: f64, n_steps: usize) -> Result<PrimalRun, PrimalError> {
    evolve_primal_with(case, mesh, dt, n_steps, &PrimalOptions::default())
}

/// Central differences in velocity-Verlet form. Stops early, flagging
/// `blow_up`, once any strain is non-finite or exceeds the threshold.
pub fn evolve_primal_with(
    case: &DynamicCase,
    mesh: &Mesh1D,
    dt: f64,
    n_steps: usize,
    options: &PrimalOptions,
) -> Result<PrimalRun, PrimalError> {
    if !(case.rho0 > 0.0 && case.rho0.is_finite()) {
        return Err(PrimalError::Density(case.rho0));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PrimalError::TimeStep(dt));
    }
    let limit = cfl_time_step(case, mesh);
    if dt > limit * (1.0 + 1e-12) {
        return Err(PrimalError::CflViolation { dt, limit });
    }
    let mass = lumped_mass(mesh, case.rho0);
    let last = mesh.n_nodes() - 1;
    let (mut u, mut v, mut e) = initial_state(case, mesh);
    let (ul0, ur0) = (u[0], u[last]);
    v[0] = case.v_left.eval(0.0);
    v[last] = case.v_right.eval(0.0);
    let mut a = accelerations(mesh, &e, &mass);
    let every = options.record_every.max(1);
    let mut run = PrimalRun {
        dt,
        states: vec![PrimalState {
            step: 0,
            t: 0.0,
            u: u.clone(),
            v: v.clone(),
            e: e.clone(),
        }],
        blow_up: false,
        blow_up_step: None,
        blow_up_time: None,
    };
    for step in 1..=n_steps {
        let t = step as f64 * dt;
        for i in 1..last {
            v[i] += 0.5 * dt * a[i];
            u[i] += dt * v[i];
        }
        u[0] = ul0 + case.v_left.integral(0.0, t);
        u[last] = ur0 + case.v_right.integral(0.0, t);
        e = strains(mesh, &u);
        a = accelerations(mesh, &e, &mass);
        for i in 1..last {
            v[i] += 0.5 * dt * a[i];
        }
        v[0] = case.v_left.eval(t);
        v[last] = case.v_right.eval(t);
        let blown = e.iter().any(|x| !x.is_finite() || x.abs() > options.blow_up_strain)
            || v.iter().any(|x| !x.is_finite());
        if blown {
            run.blow_up = true;
            run.blow_up_step = Some(step);
            run.blow_up_time = Some(t);
            break;
        }
        if step % every == 0 || step == n_steps {
            run.states.push(PrimalState {
                step,
                t,
                u: u.clone(),
                v: v.clone(),
                e: e.clone(),
            });
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::bump_strain;
    use crate::profile::Piecewise;

    fn case(e0: Piecewise) -> DynamicCase {
        DynamicCase {
            e0,
            v0: Piecewise::constant(0.0),
            v_left: Piecewise::constant(0.0),
            v_right: Piecewise::constant(0.0),
            final_time: 1.0,
            rho0: 1.0,
        }
    }

    #[test]
    fn stiffness_bound_covers_the_vertex() {
        assert_eq!(max_abs_stiffness(0.9, 1.1), 4.0);
        assert!((max_abs_stiffness(2.0, 2.5) - 23.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_steps() {
        let m = Mesh1D::uniform(20).unwrap();
        let c = case(Piecewise::constant(2.5));
        let dt = cfl_time_step(&c, &m);
        assert!(matches!(evolve_primal(&c, &m, 2.0 * dt, 1), Err(PrimalError::CflViolation { .. })));
        assert!(evolve_primal(&c, &m, dt, 1).is_ok());
    }

    #[test]
    fn homogeneous_state_stays_put() {
        let m = Mesh1D::uniform(16).unwrap();
        let c = case(Piecewise::constant(2.5));
        let run = evolve_primal(&c, &m, cfl_time_step(&c, &m), 200).unwrap();
        assert!(!run.blow_up);
        let last = run.states.last().unwrap();
        assert!(last.e.iter().all(|e| (e - 2.5).abs() < 1e-12));
    }

    #[test]
    fn convex_regime_conserves_energy() {
        let m = Mesh1D::uniform(100).unwrap();
        let c = case(Piecewise::constant(2.5).add_scaled(&bump_strain(2e-3, 0.5, 0.1), 1.0));
        let dt = cfl_time_step(&c, &m);
        let run = evolve_primal_with(&c, &m, dt, (0.1 / dt) as usize, &PrimalOptions { record_every: 50, ..Default::default() })
            .unwrap();
        assert!(!run.blow_up);
        let e0 = total_energy(&m, &run.states[0], 1.0);
        for s in &run.states {
            assert!((total_energy(&m, s, 1.0) - e0).abs() <= 1e-2 * e0);
        }
    }

    #[test]
    fn threshold_crossing_stops_recording() {
        // Inside the spinodal region the perturbation departs from e = 1;
        // a low threshold catches the departure.
        let m = Mesh1D::uniform(40).unwrap();
        let c = case(Piecewise::constant(1.0).add_scaled(&bump_strain(1e-3, 0.5, 0.1), 1.0));
        let dt = cfl_time_step(&c, &m);
        let opts = PrimalOptions { record_every: 100, blow_up_strain: 1.2 };
        let run = evolve_primal_with(&c, &m, dt, 200_000, &opts).unwrap();
        assert!(run.blow_up);
        let stop = run.blow_up_step.unwrap();
        assert!(run.states.iter().all(|s| s.step < stop));
        assert!(run.states.iter().all(|s| s.max_abs_strain() <= 1.2));
    }
}
