//! s-wave hyperangular Faddeev problem for two identical heavy particles and a
//! light one, in continuous dimension `d`.
//!
//! With `x = rho sin(alpha)`, `y = rho cos(alpha)` the mass-scaled Jacobi
//! coordinates of a heavy-light set, the symmetric Faddeev component `Phi(alpha)`
//! (the same function in sets 2 and 3) satisfies
//!
//! ```text
//! Lambda^2 Phi + 2 rho^2 V(rho sin(alpha) / c_x) [Phi + R Phi] = nu(rho) Phi
//! ```
//!
//! where `Lambda^2` is the s-wave grand-angular operator, with free eigenvalues
//! `K (K + 2d - 2)`, and `R` re-expresses the other component in this set and
//! averages it over the relative direction `u` with weight `(1 - u^2)^{(d-3)/2}`.
//! The heavy-heavy component vanishes because that pair does not interact.
//!
//! The unreduced component is expanded in B-splines on a breakpoint set built
//! for each hyperradius. It is uniform in the pair distance across the range
//! of the potential, then grows geometrically out to the free region. At large
//! `rho` the eigenvalue carries `2 rho^2` times the discretised two-body energy,
//! so the potential region has to be resolved at a fixed relative accuracy for
//! every `rho`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Schur};
use rayon::prelude::*;

use crate::bspline::{SplineBasis, MAX_ORDER};
use crate::error::{Error, Result};
use crate::kinematics::{jacobi_scaling, kinematic_angle, JacobiSet, MassTriple, RotationAngle};
use crate::potentials2b::GaussianPotential;
use crate::quadrature::{gauss_jacobi, gauss_legendre, jacobi_norm_sq, jacobi_p, jacobi_weight_integral, Rule};

fn check_dimension(d: f64) -> Result<()> {
    if !(2.0..=3.0).contains(&d) {
        return Err(Error::domain(format!("dimension {d} outside [2, 3]")));
    }
    Ok(())
}

/// Exponent of the relative-direction weight `(1 - u^2)^e`.
fn direction_exponent(d: f64) -> f64 {
    0.5 * (d - 3.0)
}

/// Heavy-heavy-light system with a heavy-light Gaussian and no heavy-heavy interaction.
#[derive(Debug, Clone)]
pub struct AngularSystem {
    pub dimension: f64,
    pub masses: MassTriple,
    pub potential: GaussianPotential,
}

impl AngularSystem {
    pub fn new(dimension: f64, masses: MassTriple, potential: GaussianPotential) -> Result<Self> {
        check_dimension(dimension)?;
        if masses.mass(1) != masses.mass(2) {
            return Err(Error::Precondition(
                "particles 1 and 2 must be the identical heavy pair".into(),
            ));
        }
        Ok(Self {
            dimension,
            masses,
            potential,
        })
    }

    /// `c_x` of the heavy-light Jacobi sets; the pair distance is `x / c_x`.
    pub fn c_x(&self) -> f64 {
        jacobi_scaling(&self.masses, JacobiSet::Two).c_x
    }

    /// Rotation carrying set 2 into set 3.
    pub fn rotation(&self) -> RotationAngle {
        kinematic_angle(&self.masses, JacobiSet::Two, JacobiSet::Three)
            .expect("sets 2 and 3 are distinct")
    }

    /// `2 rho^2 V` and its `rho` derivative at hyperangle `alpha`.
    fn coupling(&self, rho: f64, alpha: f64) -> (f64, f64) {
        let s = alpha.sin() / self.c_x();
        let r = rho * s;
        let b = self.potential.range;
        let q = r / b;
        let v = -self.potential.depth * (-q * q).exp();
        let dv = -2.0 * q / b * v;
        (2.0 * rho * rho * v, 4.0 * rho * v + 2.0 * rho * rho * dv * s)
    }

    /// Largest `alpha` at which the potential term matters at this `rho`.
    fn potential_edge(&self, rho: f64) -> f64 {
        let s = POTENTIAL_REACH * self.potential.range * self.c_x() / rho;
        if s >= 1.0 {
            FRAC_PI_2
        } else {
            s.asin()
        }
    }
}

/// Pair distance, in units of the range, beyond which the Gaussian is dropped (`exp(-56)`).
const POTENTIAL_REACH: f64 = 7.5;

// ---------------------------------------------------------------------------
// Free hyperspherical basis

/// Orthonormal free s-wave functions
/// `phi_K(alpha) = N_K (sin(alpha) cos(alpha))^{(d-1)/2} P_n^{(a,a)}(cos 2 alpha)`,
/// `K = 2n`, `a = d/2 - 1`.
#[derive(Debug, Clone)]
pub struct AngularBasis {
    dimension: f64,
    norms: Vec<f64>,
    x_rule: Rule,
}

pub fn free_basis(d: f64, n_b: usize) -> Result<AngularBasis> {
    check_dimension(d)?;
    if n_b < 8 {
        return Err(Error::domain(format!("angular basis needs at least 8 functions, got {n_b}")));
    }
    let a = 0.5 * d - 1.0;
    let norms = (0..n_b)
        .map(|n| (2f64.powf(d) / jacobi_norm_sq(n, a, a)).sqrt())
        .collect();
    Ok(AngularBasis {
        dimension: d,
        norms,
        x_rule: gauss_jacobi(n_b + 2, a, a),
    })
}

impl AngularBasis {
    pub fn dimension(&self) -> f64 {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// Hypermomentum `K` of function `i`.
    pub fn k_value(&self, i: usize) -> usize {
        2 * i
    }

    /// `K (K + 2d - 2)`.
    pub fn free_eigenvalue(&self, i: usize) -> f64 {
        let k = self.k_value(i) as f64;
        k * (k + 2.0 * self.dimension - 2.0)
    }

    /// `(K + d - 1)^2`, the eigenvalue of the reduced operator
    /// `-d^2/dalpha^2 + (d-1)(d-3)/4 (1/sin^2 + 1/cos^2)`.
    pub fn reduced_free_eigenvalue(&self, i: usize) -> f64 {
        let k = self.k_value(i) as f64;
        (k + self.dimension - 1.0).powi(2)
    }

    fn jacobi_index(&self) -> f64 {
        0.5 * self.dimension - 1.0
    }

    /// `Phi_K = phi_K / (sin cos)^{(d-1)/2}`.
    pub fn unreduced(&self, i: usize, alpha: f64) -> f64 {
        let a = self.jacobi_index();
        self.norms[i] * jacobi_p(i, a, a, (2.0 * alpha).cos())
    }

    pub fn reduced(&self, i: usize, alpha: f64) -> f64 {
        let sc = alpha.sin() * alpha.cos();
        sc.powf(0.5 * (self.dimension - 1.0)) * self.unreduced(i, alpha)
    }

    /// `∫_0^{pi/2} phi_i phi_j dalpha` by Gauss-Jacobi quadrature in `cos 2 alpha`.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.len();
        let a = self.jacobi_index();
        let scale = 2f64.powf(-self.dimension);
        let mut g = DMatrix::zeros(n, n);
        for (&x, &w) in self.x_rule.nodes.iter().zip(&self.x_rule.weights) {
            let p: Vec<f64> = (0..n).map(|i| self.norms[i] * jacobi_p(i, a, a, x)).collect();
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += scale * w * p[i] * p[j];
                }
            }
        }
        g
    }

    /// Matrix of the rotation-and-average operator in this basis.
    pub fn rotation_matrix(&self, gamma: RotationAngle, u_nodes: usize) -> DMatrix<f64> {
        let n = self.len();
        let a = self.jacobi_index();
        let e = direction_exponent(self.dimension);
        let u_rule = gauss_jacobi(u_nodes, e, e);
        let z = jacobi_weight_integral(e, e);
        let scale = 2f64.powf(-self.dimension);
        let (sg, cg) = gamma.radians().sin_cos();
        let mut r = DMatrix::zeros(n, n);
        for (&x, &w) in self.x_rule.nodes.iter().zip(&self.x_rule.weights) {
            let s2 = 0.5 * (1.0 - x);
            let c2 = 0.5 * (1.0 + x);
            let base = cg * cg * s2 + sg * sg * c2;
            let cross = 2.0 * sg * cg * (s2 * c2).sqrt();
            let mut avg = vec![0.0; n];
            for (&u, &wu) in u_rule.nodes.iter().zip(&u_rule.weights) {
                let xr = 1.0 - 2.0 * (base + cross * u);
                for (j, acc) in avg.iter_mut().enumerate() {
                    *acc += wu * jacobi_p(j, a, a, xr);
                }
            }
            for i in 0..n {
                let pi = self.norms[i] * jacobi_p(i, a, a, x);
                for j in 0..n {
                    r[(i, j)] += scale * w * pi * self.norms[j] * avg[j] / z;
                }
            }
        }
        r
    }
}

/// Applies the rotation-and-average operator to a function given by its
/// coefficients in `basis`, returning the coefficients of the result.
pub fn rotation_apply(basis: &AngularBasis, coeffs: &[f64], gamma: RotationAngle) -> Result<Vec<f64>> {
    if coeffs.len() != basis.len() {
        return Err(Error::domain(format!(
            "expected {} coefficients, got {}",
            basis.len(),
            coeffs.len()
        )));
    }
    let g = gamma.radians();
    if !(g.abs() < FRAC_PI_2) {
        return Err(Error::domain(format!("rotation angle {g} outside (-pi/2, pi/2)")));
    }
    let nodes = basis.len() + 2;
    let c = DVector::from_column_slice(coeffs);
    let out = basis.rotation_matrix(gamma, nodes) * &c;
    let check = basis.rotation_matrix(gamma, 2 * nodes) * &c;
    let diff = (&out - &check).amax();
    if diff > 1e-12 * (1.0 + c.amax()) {
        return Err(Error::numerical(format!(
            "direction quadrature not converged (change {diff:e} on doubling)"
        )));
    }
    Ok(out.iter().copied().collect())
}

// ---------------------------------------------------------------------------
// Spline discretisation

/// Resolution of the per-hyperradius spline basis.
///
/// `n_b = 60` gives a pair-distance step of `0.2 b` over the potential, a
/// geometric growth factor of 1.25 beyond it and a largest step of 0.05 rad.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngularLayout {
    pub n_b: usize,
}

impl Default for AngularLayout {
    fn default() -> Self {
        Self { n_b: 60 }
    }
}

impl AngularLayout {
    fn r_step(&self) -> f64 {
        12.0 / self.n_b as f64
    }

    fn growth(&self) -> f64 {
        1.0 + 15.0 / self.n_b as f64
    }

    fn max_step(&self) -> f64 {
        3.0 / self.n_b as f64
    }

    fn breakpoints(&self, system: &AngularSystem, rho: f64) -> Vec<f64> {
        let h_max = self.max_step();
        let h_in = (self.r_step() * system.potential.range * system.c_x() / rho).min(h_max);
        let edge = system.potential_edge(rho);
        let n_in = ((edge / h_in).ceil() as usize).max(1);
        let mut bp: Vec<f64> = (0..=n_in).map(|i| edge * i as f64 / n_in as f64).collect();
        let mut h = edge / n_in as f64;
        while *bp.last().unwrap() < FRAC_PI_2 {
            h = (h * self.growth()).min(h_max);
            let last = *bp.last().unwrap();
            if FRAC_PI_2 - last < 1.5 * h {
                bp.push(FRAC_PI_2);
            } else {
                bp.push(last + h);
            }
        }
        bp
    }
}

const ORDER: usize = 6;
const NODES_PER_INTERVAL: usize = 10;
const ROTATION_NODES: usize = 8;

#[derive(Debug, Clone)]
struct QuadPoint {
    alpha: f64,
    weight: f64,
    first: usize,
    val: [f64; ORDER],
    der: [f64; ORDER],
}

#[derive(Debug, Clone)]
struct RotationRules {
    exponent: f64,
    plain: Rule,
    left: Rule,
    right: Rule,
    both: Rule,
    norm: f64,
}

impl RotationRules {
    fn new(d: f64) -> Self {
        let e = direction_exponent(d);
        Self {
            exponent: e,
            plain: gauss_legendre(ROTATION_NODES),
            left: gauss_jacobi(ROTATION_NODES, 0.0, e),
            right: gauss_jacobi(ROTATION_NODES, e, 0.0),
            both: gauss_jacobi(ROTATION_NODES, e, e),
            norm: jacobi_weight_integral(e, e),
        }
    }
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Bisects pieces until none is longer than its distance to an endpoint it
/// does not own, so the endpoint singularities of the direction weight stay
/// far away in relative terms.
fn graded(cuts: &[f64]) -> Vec<f64> {
    fn split(a: f64, b: f64, lo: f64, hi: f64, depth: usize, out: &mut Vec<f64>) {
        let mut allowed = f64::INFINITY;
        if a > lo {
            allowed = allowed.min(a - lo);
        }
        if b < hi {
            allowed = allowed.min(hi - b);
        }
        if b - a <= allowed || depth == 0 {
            out.push(b);
            return;
        }
        let m = 0.5 * (a + b);
        split(a, m, lo, hi, depth - 1, out);
        split(m, b, lo, hi, depth - 1, out);
    }
    let (lo, hi) = (cuts[0], cuts[cuts.len() - 1]);
    let mut out = vec![lo];
    for w in cuts.windows(2) {
        split(w[0], w[1], lo, hi, 48, &mut out);
    }
    out
}

/// `(R B_j)(alpha)` for all `j` with non-zero value, as `(first_j, values)`.
///
/// The direction average is done in the rotated hyperangle `alpha'` itself,
/// split at the spline breakpoints so every piece integrates a polynomial
/// times a smooth factor. End pieces absorb the `(1 - u^2)^e` weight into a
/// Gauss-Jacobi rule.
fn rotation_row(basis: &SplineBasis, rules: &RotationRules, alpha: f64, gamma: f64) -> (usize, Vec<f64>) {
    let g = gamma.abs();
    let lo = (alpha - g).abs();
    let hi = (alpha + g).min(PI - alpha - g);
    let (sa, ca) = alpha.sin_cos();
    let (sg, cg) = g.sin_cos();
    let bb = 2.0 * sg * cg * sa * ca;
    let mut rows = [[0.0; 3]; MAX_ORDER];

    if bb <= 1e-300 || hi - lo <= 1e-15 * hi {
        let first = basis.eval_into(0.5 * (lo + hi), 0, &mut rows) as usize;
        return (first, rows[..ORDER].iter().map(|r| r[0]).collect());
    }

    let bp = basis.breakpoints();
    let first = basis.interval(lo);
    let last = basis.interval(hi) + ORDER - 1;
    let mut row = vec![0.0; last - first + 1];

    let e = rules.exponent;
    let singular = e != 0.0;
    let mut cuts = vec![lo];
    cuts.extend(bp.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    if singular {
        cuts = graded(&cuts);
    }
    let n_piece = cuts.len() - 1;
    for p in 0..n_piece {
        let (p0, p1) = (cuts[p], cuts[p + 1]);
        let is_left = singular && p == 0;
        let is_right = singular && p + 1 == n_piece;
        let rule = match (is_left, is_right) {
            (true, true) => &rules.both,
            (true, false) => &rules.left,
            (false, true) => &rules.right,
            (false, false) => &rules.plain,
        };
        let half = 0.5 * (p1 - p0);
        let mid = 0.5 * (p1 + p0);
        for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
            let ap = mid + half * x;
            let mut f = half * wx * (2.0 * ap).sin() / bb;
            if singular {
                // 1 + u and 1 - u, or their ratio to the Gauss-Jacobi factor.
                let lower = if is_left {
                    half * sinc(ap - lo) * (ap + lo).sin() / bb
                } else {
                    (ap - lo).sin() * (ap + lo).sin() / bb
                };
                let upper = if is_right {
                    half * sinc(hi - ap) * (hi + ap).sin() / bb
                } else {
                    (hi - ap).sin() * (hi + ap).sin() / bb
                };
                f *= (lower * upper).powf(e);
            }
            let j0 = basis.eval_into(ap, 0, &mut rows) as usize;
            for (k, r) in rows.iter().take(ORDER).enumerate() {
                row[j0 + k - first] += f * r[0];
            }
        }
    }
    for v in &mut row {
        *v /= rules.norm;
    }
    (first, row)
}

/// Spline Galerkin discretisation of the hyperangular problem, built for one
/// hyperradius and usable in a small neighbourhood of it.
#[derive(Debug, Clone)]
pub struct AngularSolver {
    system: AngularSystem,
    gamma: f64,
    basis: Arc<SplineBasis>,
    points: Vec<QuadPoint>,
    rows: Vec<(usize, Vec<f64>)>,
    kinetic: DMatrix<f64>,
    mass: DMatrix<f64>,
    metric: DMatrix<f64>,
}

/// One adiabatic channel at a fixed hyperradius.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularEigenpair {
    /// `nu(rho)`, in the units of `Lambda^2`.
    pub eigenvalue: f64,
    /// `d nu / d rho`.
    pub slope: f64,
    /// Spline coefficients of `Phi`, normalised so the total angular function
    /// `Phi(alpha_2) + Phi(alpha_3)` has unit norm in the metric of [`AngularSolver::metric`].
    pub coeffs: DVector<f64>,
    /// `d coeffs / d rho`.
    pub coeff_slope: DVector<f64>,
}

/// All requested channels at one hyperradius.
#[derive(Debug, Clone)]
pub struct AngularSolution {
    pub rho: f64,
    pub basis: Arc<SplineBasis>,
    pub channels: Vec<AngularEigenpair>,
    /// `P_nm = <Phi_n | d/drho Phi_m>`.
    pub couplings: DMatrix<f64>,
    /// `D_nm = <d/drho Phi_n | d/drho Phi_m>`; `Q_nn = -D_nn`.
    pub derivative_overlaps: DMatrix<f64>,
}

impl AngularSolution {
    /// `Phi_n(alpha)` of one component in its own Jacobi set.
    pub fn component(&self, n: usize, alpha: f64) -> f64 {
        self.basis.combine(self.channels[n].coeffs.as_slice(), alpha, 0)
    }

    fn flip(&mut self, n: usize) {
        let ch = &mut self.channels[n];
        ch.coeffs.neg_mut();
        ch.coeff_slope.neg_mut();
        let m = self.couplings.nrows();
        for k in 0..m {
            if k != n {
                self.couplings[(n, k)] = -self.couplings[(n, k)];
                self.couplings[(k, n)] = -self.couplings[(k, n)];
                self.derivative_overlaps[(n, k)] = -self.derivative_overlaps[(n, k)];
                self.derivative_overlaps[(k, n)] = -self.derivative_overlaps[(k, n)];
            }
        }
    }
}

impl AngularSolver {
    pub fn new(system: &AngularSystem, rho: f64, layout: AngularLayout) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::domain(format!("hyperradius must be positive, got {rho}")));
        }
        if layout.n_b < 8 {
            return Err(Error::domain(format!("angular basis size {} below 8", layout.n_b)));
        }
        let d = system.dimension;
        let bp = layout.breakpoints(system, rho);
        let basis = Arc::new(SplineBasis::new(bp.clone(), ORDER, false, false));
        let n = basis.len();

        let gl = gauss_legendre(NODES_PER_INTERVAL);
        let at_zero = gauss_jacobi(NODES_PER_INTERVAL, 0.0, d - 1.0);
        let at_top = gauss_jacobi(NODES_PER_INTERVAL, d - 1.0, 0.0);
        let n_int = bp.len() - 1;
        let mut points = Vec::with_capacity(n_int * NODES_PER_INTERVAL);
        let mut rows = [[0.0; 3]; MAX_ORDER];
        for iv in 0..n_int {
            let (lo, hi) = (bp[iv], bp[iv + 1]);
            let half = 0.5 * (hi - lo);
            let (rule, kind) = if iv == 0 {
                (&at_zero, 1)
            } else if iv + 1 == n_int {
                (&at_top, 2)
            } else {
                (&gl, 0)
            };
            for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
                let alpha = lo + half * (1.0 + x);
                let (s, c) = alpha.sin_cos();
                // (sin cos)^{d-1}, with the endpoint power carried by the rule.
                let w = match kind {
                    1 => (sinc(alpha) * c).powf(d - 1.0) * half.powf(d - 1.0),
                    2 => (sinc(FRAC_PI_2 - alpha) * s).powf(d - 1.0) * half.powf(d - 1.0),
                    _ => (s * c).powf(d - 1.0),
                };
                let first = basis.eval_into(alpha, 1, &mut rows) as usize;
                let mut val = [0.0; ORDER];
                let mut der = [0.0; ORDER];
                for k in 0..ORDER {
                    val[k] = rows[k][0];
                    der[k] = rows[k][1];
                }
                points.push(QuadPoint {
                    alpha,
                    weight: half * wx * w,
                    first,
                    val,
                    der,
                });
            }
        }

        let gamma = system.rotation().radians();
        let rules = RotationRules::new(d);
        let rot_rows: Vec<(usize, Vec<f64>)> = points
            .iter()
            .map(|q| rotation_row(&basis, &rules, q.alpha, gamma))
            .collect();

        let mut kinetic = DMatrix::zeros(n, n);
        let mut mass = DMatrix::zeros(n, n);
        let mut cross = DMatrix::zeros(n, n);
        for (q, (rf, row)) in points.iter().zip(&rot_rows) {
            for a in 0..ORDER {
                let i = q.first + a;
                for b in 0..ORDER {
                    let j = q.first + b;
                    kinetic[(i, j)] += q.weight * q.der[a] * q.der[b];
                    mass[(i, j)] += q.weight * q.val[a] * q.val[b];
                }
                for (k, &r) in row.iter().enumerate() {
                    cross[(i, rf + k)] += q.weight * q.val[a] * r;
                }
            }
        }
        let metric = &mass + 0.5 * (&cross + cross.transpose());

        Ok(Self {
            system: system.clone(),
            gamma,
            basis,
            points,
            rows: rot_rows,
            kinetic,
            mass,
            metric,
        })
    }

    pub fn basis(&self) -> &Arc<SplineBasis> {
        &self.basis
    }

    /// Gram matrix of the total angular functions: `M + M_R`.
    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn rotation_angle(&self) -> f64 {
        self.gamma
    }

    /// `sum_q c(alpha_q) w_q B(alpha_q) [B(alpha_q) + (R B)(alpha_q)]^T` over the potential region.
    fn potential_matrix(&self, rho: f64, derivative: bool) -> DMatrix<f64> {
        let n = self.basis.len();
        let edge = self.system.potential_edge(rho);
        let mut h = DMatrix::zeros(n, n);
        for (q, (rf, row)) in self.points.iter().zip(&self.rows) {
            if q.alpha > edge {
                continue;
            }
            let (v, dv) = self.system.coupling(rho, q.alpha);
            let c = q.weight * if derivative { dv } else { v };
            for a in 0..ORDER {
                let i = q.first + a;
                let ca = c * q.val[a];
                for b in 0..ORDER {
                    h[(i, q.first + b)] += ca * q.val[b];
                }
                for (k, &r) in row.iter().enumerate() {
                    h[(i, rf + k)] += ca * r;
                }
            }
        }
        h
    }

    pub fn hamiltonian(&self, rho: f64) -> DMatrix<f64> {
        &self.kinetic + self.potential_matrix(rho, false)
    }

    /// Eigenvalue estimates from the dense spectrum of `(H - sigma M)^{-1} M`,
    /// ascending by real part.
    fn shifted_spectrum(&self, h: &DMatrix<f64>, sigma: f64) -> Result<Vec<(f64, f64)>> {
        // The QR sweep occasionally stalls on clustered small eigenvalues of the
        // inverse; a slightly different shift breaks the cluster.
        for attempt in 0..4 {
            let shift = sigma - attempt as f64 * (0.37 + 0.01 * sigma.abs());
            let a = h - &self.mass * shift;
            let Some(b) = a.lu().solve(&self.mass) else { continue };
            let max_iter = 60 * b.nrows();
            let Some(schur) = Schur::try_new(b, f64::EPSILON, max_iter) else { continue };
            let mus = schur.complex_eigenvalues();
            // mu = 1/(nu - shift); values at the roundoff floor are unresolved
            // high-lying states whose sign is noise.
            let floor = 1e-13 * mus.iter().fold(0.0_f64, |m, mu| m.max(mu.norm()));
            let mut nus: Vec<(f64, f64)> = mus
                .iter()
                .filter(|mu| mu.norm() > floor)
                .map(|mu| {
                    let nu = mu.inv();
                    (shift + nu.re, nu.im)
                })
                .collect();
            nus.sort_by(|x, y| x.0.total_cmp(&y.0));
            return Ok(nus);
        }
        Err(Error::numerical(format!("eigenvalue iteration failed near shift {sigma}")))
    }

    /// Two-sided Rayleigh quotient iteration from an estimate.
    fn polish(&self, h: &DMatrix<f64>, estimate: f64) -> Result<(f64, DVector<f64>, DVector<f64>)> {
        let n = h.nrows();
        let m = &self.mass;
        let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.3 * ((i as f64) * 0.37).sin());
        let mut y = x.clone();
        let mut nu = estimate;
        let mut nudges = 0;
        for it in 0..8 {
            let a = h - m * nu;
            let solved = a
                .clone()
                .lu()
                .solve(&(m * &x))
                .zip(a.transpose().lu().solve(&(m.transpose() * &y)));
            let Some((xn, yn)) = solved else {
                // Shift landed on an eigenvalue to working precision.
                nudges += 1;
                if nudges > 4 {
                    return Err(Error::numerical(format!("singular shifted operator at nu = {nu}")));
                }
                nu += 1e-12 * (1.0 + nu.abs());
                continue;
            };
            x = xn;
            y = yn;
            x /= x.amax();
            y /= y.amax();
            let next = y.dot(&(h * &x)) / y.dot(&(m * &x));
            let done = (next - nu).abs() <= 1e-14 * (1.0 + next.abs()) && it > 0;
            nu = next;
            if done {
                break;
            }
        }
        Ok((nu, x, y))
    }

    /// Lowest `n_ch` channels at `rho` with their `rho` derivatives.
    pub fn solve(&self, rho: f64, n_ch: usize) -> Result<AngularSolution> {
        if n_ch == 0 || n_ch + 2 > self.basis.len() {
            return Err(Error::domain(format!("cannot extract {n_ch} channels")));
        }
        let h = self.hamiltonian(rho);
        let lower = -4.0 * rho * rho * self.system.potential.depth - 10.0;
        let rough = self.shifted_spectrum(&h, lower)?;
        let nu0 = rough[0].0;
        let sigma = nu0 - 1.0 - 0.05 * nu0.abs();
        let est = self.shifted_spectrum(&h, sigma)?;
        for (i, &(re, im)) in est.iter().take(n_ch).enumerate() {
            if im.abs() > 1e-10 * re.abs().max(1.0) {
                return Err(Error::numerical(format!(
                    "complex angular eigenvalue {re} + {im}i in channel {i} at rho = {rho}"
                )));
            }
        }

        let hp = self.potential_matrix(rho, true);
        let m = &self.mass;
        let metric = &self.metric;
        let n = h.nrows();
        let mut channels = Vec::with_capacity(n_ch);
        for &(guess, _) in est.iter().take(n_ch) {
            let (nu, mut x, y) = self.polish(&h, guess)?;
            let norm = x.dot(&(metric * &x));
            if !(norm > 0.0) {
                return Err(Error::numerical(format!(
                    "channel at nu = {nu} has non-positive norm {norm} (spurious Faddeev solution)"
                )));
            }
            x /= norm.sqrt();
            // Sign: positive at the pair coalescence point.
            if self.basis.combine(x.as_slice(), 0.0, 0) < 0.0 {
                x.neg_mut();
            }
            let ymx = y.dot(&(m * &x));
            let slope = y.dot(&(&hp * &x)) / ymx;
            let rhs = -(&hp * &x - m * &x * slope);
            let nx = metric * &x;
            let mut bordered = DMatrix::zeros(n + 1, n + 1);
            bordered.view_mut((0, 0), (n, n)).copy_from(&(&h - m * nu));
            bordered.view_mut((0, n), (n, 1)).copy_from(&nx);
            bordered.view_mut((n, 0), (1, n)).copy_from(&nx.transpose());
            let mut b = DVector::zeros(n + 1);
            b.rows_mut(0, n).copy_from(&rhs);
            let sol = bordered
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::numerical(format!("singular bordered system at rho = {rho}")))?;
            channels.push(AngularEigenpair {
                eigenvalue: nu,
                slope,
                coeffs: x,
                coeff_slope: sol.rows(0, n).into_owned(),
            });
        }
        for w in channels.windows(2) {
            if w[1].eigenvalue <= w[0].eigenvalue {
                return Err(Error::numerical(format!(
                    "angular eigenvalues collapsed at rho = {rho}: {} and {}",
                    w[0].eigenvalue, w[1].eigenvalue
                )));
            }
        }

        let nxp: Vec<DVector<f64>> = channels.iter().map(|c| metric * &c.coeff_slope).collect();
        let couplings = DMatrix::from_fn(n_ch, n_ch, |a, b| channels[a].coeffs.dot(&nxp[b]));
        let derivative_overlaps =
            DMatrix::from_fn(n_ch, n_ch, |a, b| channels[a].coeff_slope.dot(&nxp[b]));
        Ok(AngularSolution {
            rho,
            basis: self.basis.clone(),
            channels,
            couplings,
            derivative_overlaps,
        })
    }

    /// Values of `Phi_n + R Phi_n` at this solver's quadrature points, with weights.
    fn probe(&self, sol: &AngularSolution) -> Probe {
        let n_ch = sol.channels.len();
        let mut alpha = Vec::with_capacity(self.points.len());
        let mut weight = Vec::with_capacity(self.points.len());
        let mut total = vec![Vec::with_capacity(self.points.len()); n_ch];
        for (q, (rf, row)) in self.points.iter().zip(&self.rows) {
            alpha.push(q.alpha);
            weight.push(q.weight);
            for (t, ch) in total.iter_mut().zip(&sol.channels) {
                let c = &ch.coeffs;
                let own: f64 = (0..ORDER).map(|a| q.val[a] * c[q.first + a]).sum();
                let rot: f64 = row.iter().enumerate().map(|(k, r)| r * c[rf + k]).sum();
                t.push(own + rot);
            }
        }
        Probe { alpha, weight, total }
    }
}

struct Probe {
    alpha: Vec<f64>,
    weight: Vec<f64>,
    total: Vec<Vec<f64>>,
}

/// Lowest `n_ch` adiabatic channels at one hyperradius.
pub fn angular_eigen(
    system: &AngularSystem,
    rho: f64,
    layout: AngularLayout,
    n_ch: usize,
) -> Result<AngularSolution> {
    AngularSolver::new(system, rho, layout)?.solve(rho, n_ch)
}

// ---------------------------------------------------------------------------
// Adiabatic surface

/// Geometric grid of `points` hyperradii on `[min, max]`.
pub fn rho_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min && points >= 2) {
        return Err(Error::domain(format!(
            "bad hyperradial grid [{min}, {max}] with {points} points"
        )));
    }
    let ratio = (max / min).ln() / (points - 1) as f64;
    Ok((0..points).map(|i| min * (ratio * i as f64).exp()).collect())
}

/// Adiabatic potentials and couplings on a hyperradial grid.
#[derive(Debug, Clone)]
pub struct AdiabaticSurface {
    pub dimension: f64,
    pub n_ch: usize,
    pub solutions: Vec<AngularSolution>,
}

impl AdiabaticSurface {
    pub fn rho(&self) -> Vec<f64> {
        self.solutions.iter().map(|s| s.rho).collect()
    }

    pub fn lambda(&self, n: usize) -> Vec<f64> {
        self.solutions.iter().map(|s| s.channels[n].eigenvalue).collect()
    }

    /// `Q_nn = <Phi_n | d^2/drho^2 Phi_n> = -<d Phi_n | d Phi_n>`.
    pub fn q_diag(&self, n: usize) -> Vec<f64> {
        self.solutions
            .iter()
            .map(|s| -s.derivative_overlaps[(n, n)])
            .collect()
    }

    /// Tab-separated dump: `rho`, `lambda_n`, `Q_nn`.
    pub fn dump(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        out.push_str("# rho");
        for n in 0..self.n_ch {
            let _ = write!(out, "\tlambda_{n}");
        }
        for n in 0..self.n_ch {
            let _ = write!(out, "\tQ_{n}{n}");
        }
        out.push('\n');
        for s in &self.solutions {
            let _ = write!(out, "{:.10e}", s.rho);
            for n in 0..self.n_ch {
                let _ = write!(out, "\t{:.10e}", s.channels[n].eigenvalue);
            }
            for n in 0..self.n_ch {
                let _ = write!(out, "\t{:.10e}", -s.derivative_overlaps[(n, n)]);
            }
            out.push('\n');
        }
        out
    }
}

/// Solves the angular problem on every grid point (in parallel), then fixes
/// phases and checks channel continuity between neighbours.
pub fn adiabatic_surface(
    system: &AngularSystem,
    grid: &[f64],
    layout: AngularLayout,
    n_ch: usize,
) -> Result<AdiabaticSurface> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("hyperradial grid must be increasing with at least 2 points"));
    }
    // One spare channel guards the top one against swaps during tracking.
    let solved: Vec<(AngularSolution, Probe)> = grid
        .par_iter()
        .map(|&rho| {
            let solver = AngularSolver::new(system, rho, layout)?;
            let sol = solver.solve(rho, n_ch + 1)?;
            let probe = solver.probe(&sol);
            Ok((sol, probe))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut solutions: Vec<AngularSolution> = Vec::with_capacity(solved.len());
    let mut prev: Option<usize> = None;
    for (mut sol, probe) in solved {
        if let Some(k) = prev {
            let old = &solutions[k];
            let overlap = DMatrix::from_fn(n_ch + 1, n_ch + 1, |a, b| {
                probe
                    .alpha
                    .iter()
                    .zip(&probe.weight)
                    .zip(&probe.total[b])
                    .map(|((&al, &w), &t)| w * old.component(a, al) * t)
                    .sum::<f64>()
            });
            for a in 0..n_ch {
                let mut ranked: Vec<(usize, f64)> =
                    (0..=n_ch).map(|b| (b, overlap[(a, b)].abs())).collect();
                ranked.sort_by(|x, y| y.1.total_cmp(&x.1));
                let (best, top) = ranked[0];
                let second = ranked[1].1;
                if best != a || top - second < 0.1 {
                    return Err(Error::Tracking {
                        rho_lo: old.rho,
                        rho_hi: sol.rho,
                        detail: format!(
                            "channel {a}: best overlap {top:.3} with channel {best}, next {second:.3}"
                        ),
                    });
                }
                if overlap[(a, a)] < 0.0 {
                    sol.flip(a);
                }
            }
        }
        solutions.push(sol);
        prev = Some(solutions.len() - 1);
    }
    for sol in &mut solutions {
        sol.channels.truncate(n_ch);
        sol.couplings = sol.couplings.view((0, 0), (n_ch, n_ch)).into_owned();
        sol.derivative_overlaps = sol.derivative_overlaps.view((0, 0), (n_ch, n_ch)).into_owned();
    }
    Ok(AdiabaticSurface {
        dimension: system.dimension,
        n_ch,
        solutions,
    })
}
