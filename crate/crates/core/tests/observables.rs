use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use efimov_core::hyperangular::{AdiabaticSurface, AngularLayout};
use efimov_core::kinematics::{jacobi_scaling, JacobiSet, MassTriple};
use efimov_core::observables::{isosceles_side_ratio, GridSpec, Observables};
use efimov_core::potentials2b::calibrate_depth;
use efimov_core::quadrature::gauss_legendre;
use efimov_core::radial3b::{coupled_bound_states, RadialOptions, ThreeBodyModel, ThreeBodyState};
use efimov_core::Error;
use proptest::prelude::*;

fn masses() -> MassTriple {
    MassTriple::heavy_heavy_light(133.0, 6.0).unwrap()
}

struct Fixture {
    surface: AdiabaticSurface,
    state: ThreeBodyState,
}

/// Ground state at d = 2.75 on a short hyperradial grid.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let m = ThreeBodyModel {
            masses: masses(),
            potential: calibrate_depth(1.0, 798.0 / 139.0, 2.75).unwrap(),
            rho_min: 1e-3,
            rho_max: 2e3,
            rho_points: 120,
            layout: AngularLayout::default(),
            n_ch: 3,
            radial: RadialOptions::default(),
        };
        let surface = m.surface(2.75).unwrap();
        let state = coupled_bound_states(&surface, None, 1, &m.radial).unwrap().remove(0);
        Fixture { surface, state }
    })
}

fn observables() -> &'static Observables<'static> {
    static O: OnceLock<Observables<'static>> = OnceLock::new();
    O.get_or_init(|| Observables::new(&fixture().surface, masses()).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn radii_follow_the_s_law() {
    let (obs, st) = (observables(), &fixture().state);
    for set in JacobiSet::ALL {
        let one = obs.msr_jacobi(st, set, 1.0).unwrap();
        assert!(one.x2 > 0.0 && one.y2 > 0.0);
        for s in [0.0, 0.2, 0.6] {
            let r = obs.msr_jacobi(st, set, s).unwrap();
            let f = (2.0 + s * s) / 3.0;
            assert!(rel(r.x2 / f, one.x2) < 1e-12);
            assert!(rel(r.y2 / f, one.y2) < 1e-12);
            assert!(rel(r.pure_x2 / f, one.pure_x2) < 1e-12);
            assert_eq!(r.ratio, one.ratio);
        }
        let ratio = obs.radii_ratio(st, set).unwrap();
        assert!(rel(ratio, one.ratio) < 1e-12);
        let phys = obs.distance_ratio(st, set).unwrap();
        assert!(rel(phys, one.physical_ratio) < 1e-12);
    }
}

#[test]
fn normalization_scales_with_s() {
    let (obs, st) = (observables(), &fixture().state);
    let c1 = obs.normalization(st, 1.0).unwrap();
    for s in [0.2, 0.5, 0.6] {
        let c = obs.normalization(st, s).unwrap();
        assert!(rel(c * c / (s * s), c1 * c1) < 1e-12);
    }
    assert_eq!(obs.normalization(st, 0.0).unwrap(), 0.0);
    assert!(matches!(obs.normalization(st, 1.5), Err(Error::Domain(_))));
}

#[test]
fn heavy_exchange_symmetry() {
    let (obs, st) = (observables(), &fixture().state);
    let a = obs.msr_jacobi(st, JacobiSet::Two, 1.0).unwrap();
    let b = obs.msr_jacobi(st, JacobiSet::Three, 1.0).unwrap();
    assert!(rel(a.x2, b.x2) < 1e-12 && rel(a.y2, b.y2) < 1e-12);
    assert!(rel(a.pure_x2, b.pure_x2) < 1e-12);
    for (rho, alpha, u) in [(3.0, 0.3, -0.7), (10.0, 1.2, 0.4), (40.0, 0.05, 0.99)] {
        let p = obs.total_wavefunction(st, JacobiSet::Two, rho, alpha, u).unwrap();
        // Exchanging the heavy particles maps x_2 to -x_3 and y_2 to y_3, so u flips.
        let q = obs.total_wavefunction(st, JacobiSet::Three, rho, alpha, -u).unwrap();
        assert!((p - q).abs() < 1e-12 * p.abs().max(1e-300), "{p} vs {q}");
    }
}

/// Direct `(alpha, u)` quadrature of `|Psi|^2` in each set's own coordinates.
fn brute_force(obs: &Observables, st: &ThreeBodyState, set: JacobiSet, rho: f64) -> (f64, f64) {
    let gl = gauss_legendre(8);
    let (mut norm, mut x2) = (0.0, 0.0);
    for i in 0..300 {
        let (a0, a1) = (FRAC_PI_2 * i as f64 / 300.0, FRAC_PI_2 * (i + 1) as f64 / 300.0);
        for (alpha, wa) in gl.mapped(a0, a1) {
            let (s, c) = alpha.sin_cos();
            let mut acc = 0.0;
            for k in 0..24 {
                let (u0, u1) = (-1.0 + k as f64 / 12.0, -1.0 + (k + 1) as f64 / 12.0);
                for (u, wu) in gl.mapped(u0, u1) {
                    let psi = obs.total_wavefunction(st, set, rho, alpha, u).unwrap();
                    acc += wu * psi * psi;
                }
            }
            let m = 8.0 * PI * PI * wa * s * s * c * c * acc;
            norm += m;
            x2 += s * s * m;
        }
    }
    (norm, x2)
}

#[test]
fn angular_integrals_match_direct_quadrature() {
    let (obs, st) = (observables(), &fixture().state);
    // Surface points, so that only the angular quadrature is compared.
    let grid = fixture().surface.rho();
    for target in [4.0, 15.0, 60.0] {
        let rho = grid[grid.iter().position(|&r| r > target).unwrap()];
        let (norm, x2) = obs.angular_integrals(st, rho).unwrap();
        for set in JacobiSet::ALL {
            let (bn, bx) = brute_force(obs, st, set, rho);
            assert!(rel(norm, bn) < 1e-6, "rho={rho} set {}: {norm} vs {bn}", set.index());
            let k = set.index() - 1;
            assert!(rel(x2[k], bx) < 1e-6, "rho={rho} set {}: {} vs {bx}", set.index(), x2[k]);
        }
    }
}

#[test]
fn wavefunction_outside_grid_is_an_error() {
    let (obs, st) = (observables(), &fixture().state);
    for rho in [1e-4, 3e3] {
        let r = obs.total_wavefunction(st, JacobiSet::One, rho, 0.5, 0.0);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
    assert!(matches!(obs.total_wavefunction(st, JacobiSet::Two, 1.0, 2.0, 0.0), Err(Error::Domain(_))));
}

#[test]
fn density_marginals_match_radii() {
    let (obs, st) = (observables(), &fixture().state);
    let radii = obs.msr_jacobi(st, JacobiSet::One, 1.0).unwrap();
    let sc = jacobi_scaling(&masses(), JacobiSet::One);
    let (rx2, ry2) = (radii.x2 / (sc.c_x * sc.c_x), radii.y2 / (sc.c_y * sc.c_y));
    let grid = GridSpec {
        rx_max: 12.0 * rx2.sqrt(),
        ry_max: 12.0 * ry2.sqrt(),
        nx: 121,
        ny: 121,
    };
    let g = obs.density_grid(st, JacobiSet::One, grid).unwrap();
    assert!(g.values.iter().all(|&v| v >= 0.0));
    assert!((g.integrate(|_, _| 1.0) - 1.0).abs() < 1e-12);
    assert!(g.clipped < 1e-5, "{}", g.clipped);
    let mx = g.integrate(|x, _| x * x);
    let my = g.integrate(|_, y| y * y);
    assert!(rel(mx, rx2) < 1e-4, "{mx} vs {rx2}");
    assert!(rel(my, ry2) < 1e-4, "{my} vs {ry2}");
    let text = g.render(&["test".into()]);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 121);
}

#[test]
fn rigid_isosceles_triangle() {
    let m = masses();
    let (a, c) = (1.0_f64, 1.75_f64);
    let h = (c * c - a * a / 4.0).sqrt();
    let pos = [[-a / 2.0, 0.0, 0.0], [a / 2.0, 0.0, 0.0], [0.0, h, 0.0]];
    let (cx, cy) = JacobiSet::One.vectors(&m);
    let comb = |w: [f64; 3]| -> f64 {
        (0..3)
            .map(|k| (0..3).map(|p| w[p] * pos[p][k]).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let jacobi = comb(cy) / comb(cx);
    let factor = efimov_core::kinematics::distance_ratio_factor(&m, JacobiSet::One);
    assert!((factor * jacobi - h / a).abs() < 1e-12);
    assert!((isosceles_side_ratio(h / a) - c).abs() < 1e-12);
    assert!((isosceles_side_ratio(1.64) - 1.75).abs() < 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ratio_is_independent_of_s(s in 0.01f64..1.0) {
        let (obs, st) = (observables(), &fixture().state);
        for set in JacobiSet::ALL {
            let a = obs.msr_jacobi(st, set, s).unwrap();
            let b = obs.msr_jacobi(st, set, 1.0).unwrap();
            prop_assert!(rel(a.ratio, b.ratio) < 1e-12);
            prop_assert!(rel(a.x2 + a.y2, (2.0 + s * s) / 3.0 * (b.x2 + b.y2)) < 1e-12);
        }
    }
}
