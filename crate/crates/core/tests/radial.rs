mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use common::constant_surface;
use efimov_core::hyperangular::{AdiabaticSurface, AngularLayout};
use efimov_core::kinematics::MassTriple;
use efimov_core::potentials2b::calibrate_depth;
use efimov_core::radial3b::{
    centrifugal_constant, coupled_bound_states, effective_potentials, efimov_scale_factor,
    Couplings, OuterBoundary, RadialOptions, ThreeBodyModel,
};
use efimov_core::Error;

#[test]
fn inverse_square_tail_gives_geometric_spectrum() {
    for (d, s0) in [(3.0, 2.0), (2.5, 2.5)] {
        let lambda = -(s0 * s0 + 0.25) - centrifugal_constant(d);
        let surface = constant_surface(d, lambda, 1.0, 1e6);
        let opts = RadialOptions {
            intervals: 300,
            ..Default::default()
        };
        let states = coupled_bound_states(&surface, None, 6, &opts).unwrap();
        assert!(states.len() >= 5, "{}", states.len());
        let f = efimov_scale_factor(&states, None, lambda).unwrap();
        let exact = (2.0 * PI / s0).exp();
        assert!((f.s0 - s0).abs() < 1e-12);
        assert!((f.predicted / exact - 1.0).abs() < 1e-12);
        // Pairs well inside the hard wall, where log-periodicity is exact up to (kappa r0)^2.
        for r in &f.ratios[1..4] {
            assert!((r / exact - 1.0).abs() < 5e-3, "d={d}: {r} vs {exact}");
        }
        for (k, st) in states.iter().enumerate() {
            assert_eq!(st.nodes, k);
            assert!((st.norm() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn scale_factor_needs_three_levels() {
    let surface = constant_surface(3.0, -10.0, 1.0, 1e3);
    let opts = RadialOptions {
        convergence: None,
        ..Default::default()
    };
    let states = coupled_bound_states(&surface, None, 2, &opts).unwrap();
    assert!(matches!(efimov_scale_factor(&states, None, -10.0), Err(Error::Domain(_))));
}

#[test]
fn repulsive_tail_binds_nothing() {
    let surface = constant_surface(3.0, -3.0, 1.0, 1e3);
    let st = coupled_bound_states(&surface, None, 3, &RadialOptions::default()).unwrap();
    assert!(st.is_empty());
}

fn model(n_ch: usize) -> ThreeBodyModel {
    ThreeBodyModel {
        masses: MassTriple::heavy_heavy_light(133.0, 6.0).unwrap(),
        potential: calibrate_depth(1.0, 798.0 / 139.0, 2.75).unwrap(),
        rho_min: 1e-3,
        rho_max: 1e5,
        rho_points: 200,
        layout: AngularLayout::default(),
        n_ch,
        radial: RadialOptions::default(),
    }
}

fn surface_25() -> &'static AdiabaticSurface {
    static S: OnceLock<AdiabaticSurface> = OnceLock::new();
    S.get_or_init(|| model(3).surface(2.5).unwrap())
}

#[test]
fn bound_levels_below_threshold_are_converged_and_normalised() {
    let m = model(3);
    let e2 = m.twobody_threshold(2.5).unwrap().unwrap();
    // Convergence under doubling of the radial grid is checked inside.
    let states = coupled_bound_states(surface_25(), Some(e2), 3, &m.radial).unwrap();
    assert_eq!(states.len(), 3);
    assert!(states[0].energy < e2 && e2 < 0.0);
    for (k, st) in states.iter().enumerate() {
        assert!(st.energy < e2);
        assert_eq!(st.nodes, k);
        assert!((st.norm() - 1.0).abs() < 1e-10);
        assert!(!st.box_limited());
        let (lo, hi) = st.rho_range();
        assert_eq!(st.channel(0, lo).unwrap(), 0.0);
        assert!(st.channel(0, hi).unwrap().abs() < 1e-12);
    }
}

#[test]
fn effective_potential_tail_is_atom_dimer_centrifugal() {
    let s = surface_25();
    let e2 = model(3).twobody_threshold(2.5).unwrap().unwrap();
    let w = effective_potentials(s);
    let rho = s.rho();
    let expect = (2.5 - 1.0) * (2.5 - 3.0) / 4.0;
    for (k, r) in rho.iter().enumerate().filter(|(_, r)| (2e3..=2e4).contains(*r)) {
        let tail = r * r * (w[0][k] - 2.0 * e2);
        assert!((tail - expect).abs() < 1e-3, "rho={r}: {tail}");
    }
}

#[test]
fn adding_channels_never_raises_the_ground_state() {
    let e2 = model(1).twobody_threshold(2.5).unwrap();
    let opts = RadialOptions {
        convergence: None,
        ..Default::default()
    };
    let mut last = 0.0;
    for n_ch in 1..=3 {
        let s = if n_ch == 3 {
            surface_25().clone()
        } else {
            model(n_ch).surface(2.5).unwrap()
        };
        let e = coupled_bound_states(&s, e2, 1, &opts).unwrap()[0].energy;
        assert!(e <= last + 1e-8 * e.abs(), "n_ch={n_ch}: {e} vs {last}");
        last = e;
    }
}

#[test]
fn diagonal_couplings_bind_less() {
    let e2 = model(3).twobody_threshold(2.5).unwrap();
    let full = coupled_bound_states(surface_25(), e2, 1, &RadialOptions::default()).unwrap();
    let diag = RadialOptions {
        couplings: Couplings::Diagonal,
        ..Default::default()
    };
    let single = coupled_bound_states(surface_25(), e2, 1, &diag).unwrap();
    assert!(full[0].energy < single[0].energy);
}

#[test]
fn outer_boundary_does_not_move_deep_levels() {
    let e2 = model(3).twobody_threshold(2.5).unwrap();
    let opts = RadialOptions {
        outer: OuterBoundary::Threshold,
        ..Default::default()
    };
    let a = coupled_bound_states(surface_25(), e2, 3, &opts).unwrap();
    let b = coupled_bound_states(surface_25(), e2, 3, &RadialOptions::default()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.energy / y.energy - 1.0).abs() < 1e-9);
    }
}

#[test]
fn nothing_is_bound_in_three_dimensions() {
    let row = model(3).spectrum(3.0, 3).unwrap();
    assert!(row.twobody.is_none());
    assert!(row.states.is_empty());
}
