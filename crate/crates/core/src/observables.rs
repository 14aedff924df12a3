//! Mean-square radii and densities of a d-dimensional state read as a
//! deformed three-dimensional wave function.
//!
//! The d-space Jacobi vectors are taken as ordinary 3D vectors `x~`, `y~`
//! whose components along the squeezing axis are the true ones divided by
//! `s`. Expectation values then use the 3D measure
//! `dV~ = 8 pi^2 rho^5 sin^2(alpha) cos^2(alpha) drho dalpha du`, with flat `du`
//! in the cosine between `x~` and `y~`, and the isotropy of the integrals in
//! the tilde coordinates gives `<x^2> = (2 + s^2)/3 * ∫x~^2|Psi|^2 / ∫|Psi|^2`.
//!
//! The total wave function is the Faddeev sum over the two heavy-light
//! components, `Phi_n(alpha_2) + Phi_n(alpha_3)`. Because the measure is
//! invariant under kinematic rotations, all angular integrals are done in the
//! frame of set 2: same-component terms reduce to one-dimensional integrals in
//! that component's own set, and the cross term only needs the direction
//! average of the rotated component and its first `u` moment.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bspline::{SplineBasis, MAX_ORDER};
use crate::error::{Error, Result};
use crate::hyperangular::{AdiabaticSurface, AngularSolution};
use crate::kinematics::{
    distance_ratio_factor, jacobi_scaling, kinematic_angle, rotated_hyperangle, JacobiSet, MassTriple,
};
use crate::quadrature::{gauss_legendre, Rule};
use crate::radial3b::ThreeBodyState;

const NODES: usize = 8;
const U_NODES: usize = 64;

/// `8 pi^2` from the four direction angles of `x~` and `y~` at fixed `u`.
const DIRECTIONS: f64 = 8.0 * PI * PI;

fn set_slot(set: JacobiSet) -> usize {
    set.index() - 1
}

/// `(A, B)` in `sin^2(alpha_rot) = A + B u` for a rotation by `gamma`.
fn rotated_weights(s: f64, c: f64, gamma: f64) -> (f64, f64) {
    let (sg, cg) = gamma.sin_cos();
    (cg * cg * s * s + sg * sg * c * c, 2.0 * sg * cg * s * c)
}

/// `r0_j = 1/2 ∫ B_j(alpha') du` and `r1_j = 1/2 ∫ u B_j(alpha') du` over the
/// rotated hyperangle `alpha'(alpha, u)`, as dense rows over the basis.
///
/// The integral is taken in `alpha'` itself, where `du = sin(2 alpha') / |B| dalpha'`,
/// split at the spline breakpoints so each piece is smooth.
fn average_rows(basis: &SplineBasis, gl: &Rule, alpha: f64, gamma: f64, r0: &mut [f64], r1: &mut [f64]) {
    r0.fill(0.0);
    r1.fill(0.0);
    let (s, c) = alpha.sin_cos();
    let (base, cross) = rotated_weights(s, c, gamma);
    let mut rows = [[0.0; 3]; MAX_ORDER];
    let order = basis.order();
    if cross.abs() < 1e-14 {
        let first = basis.eval_into(base.sqrt().min(1.0).asin(), 0, &mut rows) as usize;
        for k in 0..order {
            r0[first + k] = rows[k][0];
        }
        return;
    }
    let (sm, sp) = ((alpha - gamma).sin().abs(), (alpha + gamma).sin().abs());
    let lo = sm.min(sp).asin();
    let hi = sm.max(sp).asin();
    let b = cross.abs();
    let sign = cross.signum();
    let mut cuts = vec![lo];
    cuts.extend(basis.breakpoints().iter().copied().filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    for w in cuts.windows(2) {
        for (ap, wq) in gl.mapped(w[0], w[1]) {
            // 1 + u or 1 - u, written to stay accurate near the ends.
            let v = (ap - lo).sin() * (ap + lo).sin() / b;
            let u = sign * (v - 1.0);
            let jac = 0.5 * wq * (2.0 * ap).sin() / b;
            let first = basis.eval_into(ap, 0, &mut rows) as usize;
            for k in 0..order {
                r0[first + k] += jac * rows[k][0];
                r1[first + k] += jac * u * rows[k][0];
            }
        }
    }
}

/// Points where the outer integrand may have a kink: the spline breakpoints
/// and their images under the rotation by `g`.
fn outer_cuts(bp: &[f64], g: f64, own: bool) -> Vec<f64> {
    let mut cuts = vec![0.0, FRAC_PI_2];
    for &b in bp {
        if own {
            cuts.push(b);
        }
        cuts.extend([g + b, g - b, b - g, PI - g - b]);
    }
    cuts.retain(|&x| (0.0..=FRAC_PI_2).contains(&x));
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    cuts
}

/// Angular matrix elements at one hyperradius in the 3D measure.
#[derive(Debug, Clone)]
struct AngularMoments {
    /// `∫ dOmega~ Psi_n Psi_m` for the total angular functions.
    norm: DMatrix<f64>,
    /// `∫ dOmega~ sin^2(alpha_j) Psi_n Psi_m`, per set.
    x2: [DMatrix<f64>; 3],
    /// Same with the set-`j` direction average of `Psi` in place of `Psi`.
    pure_norm: [DMatrix<f64>; 3],
    pure_x2: [DMatrix<f64>; 3],
}

struct Angles {
    g23: f64,
    g21: f64,
    g31: f64,
    g12: f64,
}

impl Angles {
    fn new(masses: &MassTriple) -> Result<Self> {
        use JacobiSet::*;
        Ok(Self {
            g23: kinematic_angle(masses, Two, Three)?.radians(),
            g21: kinematic_angle(masses, Two, One)?.radians(),
            g31: kinematic_angle(masses, Three, One)?.radians(),
            g12: kinematic_angle(masses, One, Two)?.radians(),
        })
    }
}

fn angular_moments(sol: &AngularSolution, angles: &Angles, n_ch: usize, nodes: usize) -> AngularMoments {
    let basis = &sol.basis;
    let nb = basis.len();
    let order = basis.order();
    let gl = gauss_legendre(nodes);
    let coeffs: Vec<&[f64]> = (0..n_ch).map(|n| sol.channels[n].coeffs.as_slice()).collect();
    let zero = || DMatrix::<f64>::zeros(n_ch, n_ch);
    let mut m = AngularMoments {
        norm: zero(),
        x2: [zero(), zero(), zero()],
        pure_norm: [zero(), zero(), zero()],
        pure_x2: [zero(), zero(), zero()],
    };
    let mut r0 = vec![0.0; nb];
    let mut r1 = vec![0.0; nb];
    let mut rows = [[0.0; 3]; MAX_ORDER];
    let dot = |r: &[f64], c: &[f64]| r.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();

    // Set-2 frame: full estimator for every set, pure estimator for sets 2 and 3.
    let cuts = outer_cuts(basis.breakpoints(), angles.g23.abs(), true);
    let mut a = vec![0.0; n_ch];
    let mut p = vec![0.0; n_ch];
    let mut q = vec![0.0; n_ch];
    for w in cuts.windows(2) {
        for (alpha, wq) in gl.mapped(w[0], w[1]) {
            let (s, c) = alpha.sin_cos();
            let meas = DIRECTIONS * wq * s * s * c * c;
            let first = basis.eval_into(alpha, 0, &mut rows) as usize;
            average_rows(basis, &gl, alpha, angles.g23, &mut r0, &mut r1);
            for n in 0..n_ch {
                a[n] = (0..order).map(|k| rows[k][0] * coeffs[n][first + k]).sum();
                p[n] = 2.0 * dot(&r0, coeffs[n]);
                q[n] = 2.0 * dot(&r1, coeffs[n]);
            }
            // sin^2 of the set-j hyperangle: in the set-2 frame (A + B u) and,
            // for the set-3 component, in its own frame (A' only survives).
            let weights = [
                (rotated_weights(s, c, angles.g21), rotated_weights(s, c, angles.g31).0),
                ((s * s, 0.0), rotated_weights(s, c, -angles.g23).0),
                (rotated_weights(s, c, angles.g23), s * s),
            ];
            for i in 0..n_ch {
                for j in 0..n_ch {
                    let aa = a[i] * a[j];
                    let ap = a[i] * p[j] + p[i] * a[j];
                    m.norm[(i, j)] += meas * (4.0 * aa + ap);
                    for (slot, &((wa, wb), wc)) in weights.iter().enumerate() {
                        let aq = a[i] * q[j] + q[i] * a[j];
                        m.x2[slot][(i, j)] += meas * (2.0 * wa * aa + wa * ap + wb * aq + 2.0 * wc * aa);
                    }
                    let pi = a[i] + 0.5 * p[i];
                    let pj = a[j] + 0.5 * p[j];
                    for slot in [1, 2] {
                        m.pure_norm[slot][(i, j)] += 2.0 * meas * pi * pj;
                        m.pure_x2[slot][(i, j)] += 2.0 * meas * s * s * pi * pj;
                    }
                }
            }
        }
    }

    // Set-1 frame: the direction average of both components, equal by symmetry.
    let cuts = outer_cuts(basis.breakpoints(), angles.g12.abs(), false);
    for w in cuts.windows(2) {
        for (alpha, wq) in gl.mapped(w[0], w[1]) {
            let (s, c) = alpha.sin_cos();
            let meas = DIRECTIONS * wq * s * s * c * c;
            average_rows(basis, &gl, alpha, angles.g12, &mut r0, &mut r1);
            for n in 0..n_ch {
                p[n] = 2.0 * dot(&r0, coeffs[n]);
            }
            for i in 0..n_ch {
                for j in 0..n_ch {
                    m.pure_norm[0][(i, j)] += 2.0 * meas * p[i] * p[j];
                    m.pure_x2[0][(i, j)] += 2.0 * meas * s * s * p[i] * p[j];
                }
            }
        }
    }
    m
}

/// Four-point Lagrange weights on a uniform grid, for position `x` in grid units.
fn lagrange4(x: f64, len: usize) -> (usize, [f64; 4]) {
    let i = (x.floor().max(0.0) as usize).min(len - 2);
    let j0 = i.saturating_sub(1).min(len - 4);
    let xs = x - j0 as f64;
    let mut w = [0.0; 4];
    for (a, wa) in w.iter_mut().enumerate() {
        *wa = (0..4)
            .filter(|&b| b != a)
            .map(|b| (xs - b as f64) / (a as f64 - b as f64))
            .product();
    }
    (j0, w)
}

/// Hyperradial integrals entering the radii of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialMoments {
    /// `∫ dV~ |Psi|^2`.
    pub norm: f64,
    /// `∫ dV~ x~_j^2 |Psi|^2` and `∫ dV~ y~_j^2 |Psi|^2` per set.
    pub x2: [f64; 3],
    pub y2: [f64; 3],
    /// The same three integrals for the set-`j` direction average of `Psi`.
    pub pure_norm: [f64; 3],
    pub pure_x2: [f64; 3],
    pub pure_y2: [f64; 3],
}

/// Mean-square Jacobi radii of one state in one set at one squeezing `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformedRadii {
    pub s: f64,
    pub set: JacobiSet,
    /// `<x^2>` and `<y^2>` with the full Faddeev wave function.
    pub x2: f64,
    pub y2: f64,
    /// The same from the direction-averaged wave function alone.
    pub pure_x2: f64,
    pub pure_y2: f64,
    /// `<y^2>^{1/2} / <x^2>^{1/2}`, independent of `s`.
    pub ratio: f64,
    /// `<r_y^2>^{1/2} / <r_x^2>^{1/2}`.
    pub physical_ratio: f64,
}

/// Rectangular grid in the physical distances `(r_x, r_y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub rx_max: f64,
    pub ry_max: f64,
    pub nx: usize,
    pub ny: usize,
}

/// `F(r_x, r_y)` on a grid, normalised to unit integral.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub set: JacobiSet,
    pub dimension: f64,
    pub s: f64,
    pub rx: Vec<f64>,
    pub ry: Vec<f64>,
    /// Row-major, one row per `r_x`.
    pub values: Vec<f64>,
    /// Probability outside the grid, estimated from the exact norm.
    pub clipped: f64,
}

impl DensityGrid {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.ry.len() + iy]
    }

    /// Trapezoid weights of a uniform axis starting at zero.
    fn weights(axis: &[f64]) -> Vec<f64> {
        let h = axis[1] - axis[0];
        let mut w = vec![h; axis.len()];
        w[0] = 0.5 * h;
        *w.last_mut().unwrap() = 0.5 * h;
        w
    }

    /// `∫∫ g(r_x, r_y) F dr_x dr_y` with the trapezoid rule.
    pub fn integrate(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let (wx, wy) = (Self::weights(&self.rx), Self::weights(&self.ry));
        let mut total = 0.0;
        for (ix, &x) in self.rx.iter().enumerate() {
            for (iy, &y) in self.ry.iter().enumerate() {
                total += wx[ix] * wy[iy] * g(x, y) * self.at(ix, iy);
            }
        }
        total
    }

    /// `#` header then one line per `r_x`, 9 significant digits.
    pub fn render(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        let _ = writeln!(out, "# d = {}", self.dimension);
        let _ = writeln!(out, "# set = {}", self.set.index());
        let _ = writeln!(out, "# s = {}", self.s);
        let _ = writeln!(
            out,
            "# r_x = 0..{} ({} points), r_y = 0..{} ({} points)",
            self.rx.last().unwrap(),
            self.rx.len(),
            self.ry.last().unwrap(),
            self.ry.len()
        );
        if self.clipped > 1e-3 {
            let _ = writeln!(out, "# warning: grid clips {:.3e} of the probability", self.clipped);
        }
        for ix in 0..self.rx.len() {
            let row: Vec<String> = (0..self.ry.len()).map(|iy| format!("{:.8e}", self.at(ix, iy))).collect();
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Observables of states living on one adiabatic surface.
pub struct Observables<'a> {
    surface: &'a AdiabaticSurface,
    masses: MassTriple,
    angles: Angles,
    t0: f64,
    dt: f64,
    moments: Vec<AngularMoments>,
}

impl<'a> Observables<'a> {
    /// Precomputes the angular matrix elements on every surface point and
    /// checks them against a doubled quadrature at a few hyperradii.
    pub fn new(surface: &'a AdiabaticSurface, masses: MassTriple) -> Result<Self> {
        let rho = surface.rho();
        let k = rho.len();
        if k < 4 {
            return Err(Error::domain("surface needs at least 4 hyperradii"));
        }
        let t0 = rho[0].ln();
        let dt = (rho[k - 1].ln() - t0) / (k - 1) as f64;
        let angles = Angles::new(&masses)?;
        let n_ch = surface.n_ch;
        let moments: Vec<AngularMoments> = surface
            .solutions
            .par_iter()
            .map(|sol| angular_moments(sol, &angles, n_ch, NODES))
            .collect();
        for idx in [k / 4, k / 2, 3 * k / 4] {
            let fine = angular_moments(&surface.solutions[idx], &angles, n_ch, 2 * NODES);
            let coarse = &moments[idx];
            let scale = coarse.norm.amax();
            let mut diff = (&fine.norm - &coarse.norm).amax();
            for s in 0..3 {
                diff = diff
                    .max((&fine.x2[s] - &coarse.x2[s]).amax())
                    .max((&fine.pure_norm[s] - &coarse.pure_norm[s]).amax())
                    .max((&fine.pure_x2[s] - &coarse.pure_x2[s]).amax());
            }
            if diff > 1e-6 * scale {
                return Err(Error::numerical(format!(
                    "angular moments at rho = {} change by {diff:e} when the quadrature is doubled",
                    rho[idx]
                )));
            }
        }
        Ok(Self {
            surface,
            masses,
            angles,
            t0,
            dt,
            moments,
        })
    }

    fn check_state(&self, state: &ThreeBodyState) -> Result<()> {
        if state.dimension != self.surface.dimension || state.n_ch() != self.surface.n_ch {
            return Err(Error::domain("state does not belong to this surface"));
        }
        Ok(())
    }

    fn grid_position(&self, rho: f64) -> Result<f64> {
        let x = (rho.ln() - self.t0) / self.dt;
        let k = self.moments.len() as f64;
        if !(x >= -1e-9 && x <= k - 1.0 + 1e-9) {
            return Err(Error::domain(format!("hyperradius {rho} outside the surface grid")));
        }
        Ok(x.clamp(0.0, k - 1.0))
    }

    /// `Phi_n(rho, alpha)` of one component, cubic in `ln rho` between surface points.
    fn components(&self, rho: f64, alpha: f64) -> Result<Vec<f64>> {
        let (j0, w) = lagrange4(self.grid_position(rho)?, self.moments.len());
        Ok((0..self.surface.n_ch)
            .map(|n| (0..4).map(|a| w[a] * self.surface.solutions[j0 + a].component(n, alpha)).sum())
            .collect())
    }

    /// `Psi(rho, alpha, u)` in the coordinates of `set`.
    pub fn total_wavefunction(&self, state: &ThreeBodyState, set: JacobiSet, rho: f64, alpha: f64, u: f64) -> Result<f64> {
        self.check_state(state)?;
        let d = self.surface.dimension;
        let mut total = 0.0;
        for comp in [JacobiSet::Two, JacobiSet::Three] {
            let a = if comp == set {
                if !(0.0..=FRAC_PI_2).contains(&alpha) || !(-1.0..=1.0).contains(&u) {
                    return Err(Error::domain(format!("(alpha, u) = ({alpha}, {u}) out of range")));
                }
                alpha
            } else {
                rotated_hyperangle(alpha, u, kinematic_angle(&self.masses, set, comp)?)?
            };
            let phi = self.components(rho, a)?;
            for (n, p) in phi.iter().enumerate() {
                total += state.channel(n, rho)? * p;
            }
        }
        Ok(total * rho.powf(-0.5 * (2.0 * d - 1.0)))
    }

    /// Angular moments at `rho` contracted with `f_n f_m`, in the order
    /// norm, x2 per set, pure norm per set, pure x2 per set.
    fn contracted(&self, state: &ThreeBodyState, rho: f64) -> Result<[f64; 10]> {
        let n_ch = self.surface.n_ch;
        let f: Vec<f64> = (0..n_ch).map(|n| state.channel(n, rho)).collect::<Result<_>>()?;
        let (j0, w) = lagrange4(self.grid_position(rho)?, self.moments.len());
        let mut out = [0.0; 10];
        for (aw, m) in w.iter().zip(&self.moments[j0..j0 + 4]) {
            let mats = [
                &m.norm,
                &m.x2[0],
                &m.x2[1],
                &m.x2[2],
                &m.pure_norm[0],
                &m.pure_norm[1],
                &m.pure_norm[2],
                &m.pure_x2[0],
                &m.pure_x2[1],
                &m.pure_x2[2],
            ];
            for (o, mat) in out.iter_mut().zip(mats) {
                for i in 0..n_ch {
                    for j in 0..n_ch {
                        *o += aw * f[i] * f[j] * mat[(i, j)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// `∫ dOmega~ |Psi|^2` and `∫ dOmega~ sin^2(alpha_j) |Psi|^2` per set at fixed `rho`.
    pub fn angular_integrals(&self, state: &ThreeBodyState, rho: f64) -> Result<(f64, [f64; 3])> {
        self.check_state(state)?;
        let c = self.contracted(state, rho)?;
        let scale = rho.powf(-(2.0 * self.surface.dimension - 1.0));
        Ok((scale * c[0], [scale * c[1], scale * c[2], scale * c[3]]))
    }

    /// Hyperradial integrals of the angular moments against `f_n f_m`.
    pub fn radial_moments(&self, state: &ThreeBodyState) -> Result<RadialMoments> {
        self.check_state(state)?;
        let d = self.surface.dimension;
        let (lo, hi) = state.rho_range();
        let (t_lo, t_hi) = (lo.ln(), hi.ln());
        let pieces = 8 * self.moments.len();
        let gl = gauss_legendre(NODES);
        let mut r = RadialMoments {
            norm: 0.0,
            x2: [0.0; 3],
            y2: [0.0; 3],
            pure_norm: [0.0; 3],
            pure_x2: [0.0; 3],
            pure_y2: [0.0; 3],
        };
        let mut rho2 = 0.0;
        let mut pure_rho2 = [0.0; 3];
        for i in 0..pieces {
            let a = t_lo + (t_hi - t_lo) * i as f64 / pieces as f64;
            let b = t_lo + (t_hi - t_lo) * (i + 1) as f64 / pieces as f64;
            for (t, wq) in gl.mapped(a, b) {
                let rho = t.exp();
                let c = self.contracted(state, rho)?;
                // drho = rho dt; |Psi|^2 carries rho^{-(2d-1)}.
                let base = wq * rho.powf(6.0 - (2.0 * d - 1.0));
                let base2 = base * rho * rho;
                r.norm += base * c[0];
                rho2 += base2 * c[0];
                for s in 0..3 {
                    r.x2[s] += base2 * c[1 + s];
                    r.pure_norm[s] += base * c[4 + s];
                    pure_rho2[s] += base2 * c[4 + s];
                    r.pure_x2[s] += base2 * c[7 + s];
                }
            }
        }
        for s in 0..3 {
            r.y2[s] = rho2 - r.x2[s];
            r.pure_y2[s] = pure_rho2[s] - r.pure_x2[s];
        }
        Ok(r)
    }

    /// `C(s) = (s^2 ∫ dV~ |Psi|^2)^{1/2}`.
    pub fn normalization(&self, state: &ThreeBodyState, s: f64) -> Result<f64> {
        check_scale(s)?;
        Ok(s * self.radial_moments(state)?.norm.sqrt())
    }

    /// Mean-square Jacobi radii at squeezing `s`.
    pub fn msr_jacobi(&self, state: &ThreeBodyState, set: JacobiSet, s: f64) -> Result<DeformedRadii> {
        check_scale(s)?;
        Ok(radii_from(&self.radial_moments(state)?, &self.masses, set, s))
    }

    /// `<y^2>^{1/2} / <x^2>^{1/2}`, which does not depend on `s`.
    pub fn radii_ratio(&self, state: &ThreeBodyState, set: JacobiSet) -> Result<f64> {
        let r = self.radial_moments(state)?;
        let k = set_slot(set);
        Ok((r.y2[k] / r.x2[k]).sqrt())
    }

    /// `<r_y^2>^{1/2} / <r_x^2>^{1/2}` in physical distances.
    pub fn distance_ratio(&self, state: &ThreeBodyState, set: JacobiSet) -> Result<f64> {
        Ok(distance_ratio_factor(&self.masses, set) * self.radii_ratio(state, set)?)
    }

    /// `F(r_x, r_y) = r_x^2 r_y^2 ∫ dOmega_x dOmega_y |Psi|^2` at `s = 1`, normalised on the grid.
    pub fn density_grid(&self, state: &ThreeBodyState, set: JacobiSet, grid: GridSpec) -> Result<DensityGrid> {
        self.check_state(state)?;
        if grid.nx < 2 || grid.ny < 2 || !(grid.rx_max > 0.0 && grid.ry_max > 0.0) {
            return Err(Error::domain("density grid needs at least 2 x 2 points and positive extents"));
        }
        let scale = jacobi_scaling(&self.masses, set);
        let axis = |max: f64, n: usize| -> Vec<f64> { (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect() };
        let rx = axis(grid.rx_max, grid.nx);
        let ry = axis(grid.ry_max, grid.ny);
        let (rho_lo, rho_hi) = state.rho_range();
        let u_rule = gauss_legendre(U_NODES);
        let rows: Vec<Vec<f64>> = rx
            .par_iter()
            .map(|&x_r| {
                ry.iter()
                    .map(|&y_r| {
                        let (x, y) = (scale.c_x * x_r, scale.c_y * y_r);
                        let rho = x.hypot(y);
                        if x_r == 0.0 || y_r == 0.0 || rho <= rho_lo || rho >= rho_hi {
                            return Ok(0.0);
                        }
                        let alpha = x.atan2(y);
                        let mut acc = 0.0;
                        for (&u, &wu) in u_rule.nodes.iter().zip(&u_rule.weights) {
                            let psi = self.total_wavefunction(state, set, rho, alpha, u)?;
                            acc += wu * psi * psi;
                        }
                        Ok(DIRECTIONS * x_r * x_r * y_r * y_r * acc)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let mut out = DensityGrid {
            set,
            dimension: self.surface.dimension,
            s: 1.0,
            rx,
            ry,
            values: rows.into_iter().flatten().collect(),
            clipped: 0.0,
        };
        let raw = out.integrate(|_, _| 1.0);
        let exact = self.radial_moments(state)?.norm / (scale.c_x * scale.c_y).powi(3);
        out.clipped = (1.0 - raw / exact).max(0.0);
        for v in &mut out.values {
            *v /= raw;
        }
        Ok(out)
    }

    /// The kinematic angle between the two heavy-light sets.
    pub fn heavy_light_angle(&self) -> f64 {
        self.angles.g23
    }
}

fn check_scale(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("scale parameter {s} outside [0, 1]")));
    }
    Ok(())
}

/// Radii of one set from the hyperradial integrals.
pub fn radii_from(r: &RadialMoments, masses: &MassTriple, set: JacobiSet, s: f64) -> DeformedRadii {
    let k = set_slot(set);
    let f = (2.0 + s * s) / 3.0;
    let ratio = (r.y2[k] / r.x2[k]).sqrt();
    DeformedRadii {
        s,
        set,
        x2: f * r.x2[k] / r.norm,
        y2: f * r.y2[k] / r.norm,
        pure_x2: f * r.pure_x2[k] / r.pure_norm[k],
        pure_y2: f * r.pure_y2[k] / r.pure_norm[k],
        ratio,
        physical_ratio: distance_ratio_factor(masses, set) * ratio,
    }
}

/// Heavy-light over heavy-heavy distance of an isosceles triangle whose
/// light-to-midpoint over heavy-heavy distance is `set1_ratio`.
pub fn isosceles_side_ratio(set1_ratio: f64) -> f64 {
    (set1_ratio * set1_ratio + 0.25).sqrt()
}

/// Tab-separated radii table: `d  set  ratio_jacobi  ratio_distance  x2  y2  s`.
pub fn radii_table(rows: &[(f64, DeformedRadii)], header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("# d\tset\tratio_jacobi\tratio_distance\tx2\ty2\ts\n");
    for (d, r) in rows {
        let _ = writeln!(
            out,
            "{:.6}\t{}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}\t{}",
            d,
            r.set.index(),
            r.ratio,
            r.physical_ratio,
            r.x2,
            r.y2,
            r.s
        );
    }
    out
}
