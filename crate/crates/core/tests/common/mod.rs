//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use efimov_core::bspline::SplineBasis;
use efimov_core::hyperangular::{rho_grid, AdiabaticSurface, AngularEigenpair, AngularSolution};
use efimov_core::potentials2b::GaussianPotential;
use efimov_core::quadrature::gauss_legendre;
use nalgebra::{DMatrix, DVector};

/// Single channel with a constant `lambda` and no couplings.
pub fn constant_surface(d: f64, lambda: f64, rho_min: f64, rho_max: f64) -> AdiabaticSurface {
    let basis = Arc::new(SplineBasis::new(vec![0.0, 1.0], 2, false, false));
    let solutions = rho_grid(rho_min, rho_max, 120)
        .unwrap()
        .into_iter()
        .map(|rho| AngularSolution {
            rho,
            basis: basis.clone(),
            channels: vec![AngularEigenpair {
                eigenvalue: lambda,
                slope: 0.0,
                coeffs: DVector::zeros(2),
                coeff_slope: DVector::zeros(2),
            }],
            couplings: DMatrix::zeros(1, 1),
            derivative_overlaps: DMatrix::zeros(1, 1),
        })
        .collect();
    AdiabaticSurface {
        dimension: d,
        n_ch: 1,
        solutions,
    }
}

/// Three-dimensional Faddeev equation in the sine basis `sin(2 n alpha)`,
/// where the rotation acts diagonally with `sin(2 n g) / (n sin 2g)`.
pub fn sine_basis_spectrum(pot: &GaussianPotential, c_x: f64, gamma: f64, rho: f64, n: usize) -> Vec<f64> {
    let gl = gauss_legendre(40);
    let pieces = 400;
    let mut v = DMatrix::<f64>::zeros(n, n);
    for p in 0..pieces {
        let lo = FRAC_PI_2 * p as f64 / pieces as f64;
        let hi = FRAC_PI_2 * (p + 1) as f64 / pieces as f64;
        for (a, w) in gl.mapped(lo, hi) {
            let pot_val = 2.0 * rho * rho * pot.value(rho * a.sin() / c_x);
            let s: Vec<f64> = (1..=n).map(|k| (4.0 / PI).sqrt() * (2.0 * k as f64 * a).sin()).collect();
            for i in 0..n {
                for j in 0..n {
                    v[(i, j)] += w * pot_val * s[i] * s[j];
                }
            }
        }
    }
    let rot: Vec<f64> = (1..=n)
        .map(|k| (2.0 * k as f64 * gamma).sin() / (k as f64 * (2.0 * gamma).sin()))
        .collect();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = (i + 1) as f64;
        a[(i, i)] = 4.0 * k * k - 4.0;
        for j in 0..n {
            a[(i, j)] += v[(i, j)] * (1.0 + rot[j]);
        }
    }
    let mut ev: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.re).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}
