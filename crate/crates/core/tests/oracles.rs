//! Frozen reference values, each computed outside this crate (30-digit
//! arithmetic or closed forms) and compared at a stated tolerance.

use dual_elasticity::cases::{self, CaseName, CaseOptions};
use dual_elasticity::convexity;
use dual_elasticity::material;
use dual_elasticity::mesh::{self, Mesh1D};
use dual_elasticity::newton::NewtonConfig;
use dual_elasticity::profile::Piecewise;
use dual_elasticity::quadrature::QuadratureRule;
use nalgebra::Matrix2;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn grain_partner_strains_share_the_middle_stress() {
    // Roots of 4(e-1)((e-1)^2-1) = 0.768 near 0.115 and 2.085.
    let e = cases::grain_equilibrium_strains();
    assert!(close(e[0], 0.115_114_219_820_389_53, 1e-14), "{}", e[0]);
    assert!(close(e[2], 2.084_885_780_179_610_5, 1e-14), "{}", e[2]);
    assert_eq!(e[0], e[4]);
    assert!(close(material::stress(0.8), 0.768, 1e-15));
}

#[test]
fn wave_speeds_in_the_wells() {
    let c = 2.828_427_124_746_190_1;
    assert!(close(cases::wave_speed(0.0, 1.0), c, 1e-15));
    assert!(close(cases::wave_speed(2.0, 1.0), c, 1e-15));
    assert!(close(cases::wave_speed(0.0, 4.0), c / 2.0, 1e-15));
    assert!(cases::wave_speed(1.0, 1.0).is_nan());
}

#[test]
fn spinodal_edge() {
    assert!(close(material::SPINODAL.0, 0.422_649_730_810_374_24, 1e-15));
    assert!(material::stiffness(material::SPINODAL.0).abs() < 1e-14);
}

#[test]
fn legendre_degree_two() {
    // 6x^2 - 6x + 1.
    assert_eq!(cases::shifted_legendre(2), vec![1.0, -6.0, 6.0]);
    let p3 = Piecewise::polynomial(cases::shifted_legendre(3));
    assert!(p3.integral(0.0, 1.0).abs() < 1e-14);
    assert!(close(p3.eval(1.0), 1.0, 1e-14));
}

#[test]
fn gauss_rules_integrate_monomials() {
    for n in 1..=5 {
        let q = QuadratureRule::gauss(n).unwrap();
        for k in 0..2 * n {
            let approx: f64 = q.mapped(0.0, 1.0).map(|(x, w)| w * x.powi(k as i32)).sum();
            assert!(close(approx, 1.0 / (k as f64 + 1.0), 1e-14), "n={n} k={k}");
        }
    }
}

#[test]
fn grain_target_displacement_ends_at_the_tabulated_value() {
    let t = cases::grain_boundary_target();
    assert!((t.u.eval(1.0) - cases::GRAIN_END_DISPLACEMENT).abs() < 1e-3);
    assert_eq!(t.e.eval(0.5), 2.085);
}

#[test]
fn bump_has_zero_net_strain() {
    let b = cases::bump_strain(3e-4, 0.5, 0.04);
    assert!(b.integral(0.0, 1.0).abs() < 1e-15);
    // Strain is -6A s/w^2 (1 - s^2/w^2)^2; at s = w/2 that is -3A/w (9/16).
    let s = 0.02;
    assert!(close(b.eval(0.5 + s), -3.0 * 3e-4 / 0.04 * 0.5625, 1e-12));
}

#[test]
fn l1_norm_of_a_linear_nodal_field() {
    let m = Mesh1D::uniform(4).unwrap();
    let nodal: Vec<f64> = m.nodes().iter().map(|x| x - 0.5).collect();
    assert!(close(mesh::l1_norm_nodal(&m, &nodal), 0.25, 1e-14));
}

#[test]
fn neo_hookean_pure_load_supremum() {
    // s = 0, B = 0, A = diag(2, 1): sup over F of A:F - |F|^2/2 is |A|^2/2 = 2.5.
    let mut p = convexity::NeoHookeanDualPoint::zero();
    p.mu = Matrix2::new(2.0, 0.0, 0.0, 1.0);
    let sup = convexity::neo_hookean_supremum(&p, &[]);
    assert!(close(sup.value, 2.5, 1e-9), "{}", sup.value);
    assert!(close(convexity::quartic_conjugate(8.0), 12.0, 1e-15));
}

#[test]
fn stress_free_ladder_is_frozen() {
    let spec = cases::build_case(CaseName::StressFree, &CaseOptions::default()).unwrap();
    let r = cases::run_static_case(&spec, 100, &NewtonConfig::default()).unwrap();
    let (eu, ee) = (r.u_error.unwrap(), r.e_error.unwrap());
    // Relative, since the values are far below one.
    assert!((eu / 1.265e-4 - 1.0).abs() < 5e-3, "{eu}");
    assert!((ee / 8.709e-5 - 1.0).abs() < 5e-3, "{ee}");
}
