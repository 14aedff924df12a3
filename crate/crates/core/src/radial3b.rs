//! Coupled hyperradial equations on an adiabatic surface.
//!
//! With `Psi = rho^{-(2d-1)/2} sum_n f_n(rho) Phi_n(rho, Omega)` the channel
//! functions obey
//!
//! ```text
//! -f_n'' + (lambda_n + c_d)/rho^2 f_n - sum_m (2 P_nm f_m' + Q_nm f_m) = 2 E f_n
//! ```
//!
//! with `c_d = (2d-1)(2d-3)/4`. Writing `Q = P' - D`, where
//! `D_nm = <dPhi_n|dPhi_m>`, and integrating by parts gives a symmetric
//! bilinear form. This is discretised with B-splines in `t = ln rho`. Energies
//! come from Sylvester inertia counts of the banded `H - 2E M`, which keeps full
//! relative accuracy for levels spread over many decades, and vectors come from
//! inverse iteration.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::bspline::{SplineBasis, MAX_ORDER};
use crate::error::{Error, Result};
use crate::hyperangular::{adiabatic_surface, rho_grid, AdiabaticSurface, AngularLayout, AngularSystem};
use crate::kinematics::MassTriple;
use crate::potentials2b::{twobody_bound_states, GaussianPotential};
use crate::quadrature::gauss_legendre;

/// `(2d-1)(2d-3)/4`.
pub fn centrifugal_constant(d: f64) -> f64 {
    (2.0 * d - 1.0) * (2.0 * d - 3.0) / 4.0
}

/// `W_n(rho) = (lambda_n + c_d)/rho^2 - Q_nn` on the surface grid, one vector per channel.
pub fn effective_potentials(surface: &AdiabaticSurface) -> Vec<Vec<f64>> {
    let c = centrifugal_constant(surface.dimension);
    (0..surface.n_ch)
        .map(|n| {
            surface
                .solutions
                .iter()
                .map(|s| {
                    (s.channels[n].eigenvalue + c) / (s.rho * s.rho) + s.derivative_overlaps[(n, n)]
                })
                .collect()
        })
        .collect()
}

/// Which non-adiabatic couplings enter the radial equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Couplings {
    /// `P` and `D` in full.
    Full,
    /// Only the diagonal `Q_nn = -D_nn`; channels decouple.
    Diagonal,
}

/// Condition on the open channel at the outer edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterBoundary {
    /// `f(rho_max) = 0` in every channel.
    Dirichlet,
    /// Log-derivative `(3 - d) / (2 rho_max)` in channel 0, the zero-energy
    /// atom-dimer tail, so a level crossing the two-body threshold is counted
    /// exactly when it crosses, independent of the box size.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialOptions {
    /// Spline intervals in `ln rho`.
    pub intervals: usize,
    pub couplings: Couplings,
    pub outer: OuterBoundary,
    /// Largest relative energy change allowed when the intervals are doubled;
    /// `None` skips the check.
    pub convergence: Option<f64>,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            intervals: 400,
            couplings: Couplings::Full,
            outer: OuterBoundary::Dirichlet,
            convergence: Some(1e-6),
        }
    }
}

const ORDER: usize = 6;
const NODES: usize = 8;

/// Surface quantities interpolated in `t = ln rho`.
///
/// `lambda / (1 + rho^2)` is cubic-Hermite interpolated with exact slopes;
/// `rho P` and `rho^2 D` use four-point Lagrange interpolation.
struct SurfaceInterp {
    t0: f64,
    dt: f64,
    n_ch: usize,
    g: Vec<Vec<f64>>,
    dg: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
    dd: Vec<Vec<f64>>,
}

struct SurfacePoint {
    lambda: Vec<f64>,
    p: Vec<f64>,
    d: Vec<f64>,
}

impl SurfaceInterp {
    fn new(surface: &AdiabaticSurface) -> Result<Self> {
        let rho = surface.rho();
        let k = rho.len();
        if k < 4 {
            return Err(Error::domain("surface needs at least 4 hyperradii"));
        }
        let t: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
        let dt = (t[k - 1] - t[0]) / (k - 1) as f64;
        if t.iter().enumerate().any(|(i, &ti)| (ti - t[0] - dt * i as f64).abs() > 1e-9 * dt) {
            return Err(Error::domain("surface grid must be geometric in rho"));
        }
        let n_ch = surface.n_ch;
        let nn = n_ch * n_ch;
        let mut g = vec![Vec::with_capacity(k); n_ch];
        let mut dg = vec![Vec::with_capacity(k); n_ch];
        let mut p = vec![Vec::with_capacity(k); nn];
        let mut dd = vec![Vec::with_capacity(k); nn];
        for s in &surface.solutions {
            let r = s.rho;
            let den = 1.0 + r * r;
            for n in 0..n_ch {
                let lam = s.channels[n].eigenvalue;
                let dlam = r * s.channels[n].slope;
                g[n].push(lam / den);
                dg[n].push((dlam * den - lam * 2.0 * r * r) / (den * den));
            }
            // Antisymmetric P and symmetric D make the discrete operator exactly symmetric.
            let (pm, dm) = (&s.couplings, &s.derivative_overlaps);
            for a in 0..n_ch {
                for b in 0..n_ch {
                    p[a * n_ch + b].push(0.5 * r * (pm[(a, b)] - pm[(b, a)]));
                    dd[a * n_ch + b].push(0.5 * r * r * (dm[(a, b)] + dm[(b, a)]));
                }
            }
        }
        Ok(Self {
            t0: t[0],
            dt,
            n_ch,
            g,
            dg,
            p,
            dd,
        })
    }

    fn at(&self, t: f64) -> SurfacePoint {
        let k = self.g[0].len();
        let x = ((t - self.t0) / self.dt).clamp(0.0, (k - 1) as f64);
        let i = (x.floor() as usize).min(k - 2);
        let s = x - i as f64;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        let rho = t.exp();
        let den = 1.0 + rho * rho;
        let lambda = (0..self.n_ch)
            .map(|n| {
                let (g, dg) = (&self.g[n], &self.dg[n]);
                den * (h00 * g[i] + h10 * self.dt * dg[i] + h01 * g[i + 1] + h11 * self.dt * dg[i + 1])
            })
            .collect();
        let j0 = i.saturating_sub(1).min(k - 4);
        let xs = x - j0 as f64;
        let mut w = [0.0; 4];
        for (a, wa) in w.iter_mut().enumerate() {
            *wa = (0..4)
                .filter(|&b| b != a)
                .map(|b| (xs - b as f64) / (a as f64 - b as f64))
                .product();
        }
        let lagrange = |v: &Vec<f64>| (0..4).map(|a| w[a] * v[j0 + a]).sum::<f64>();
        let p = self.p.iter().map(|v| lagrange(v) / rho).collect();
        let d = self.dd.iter().map(|v| lagrange(v) / (rho * rho)).collect();
        SurfacePoint { lambda, p, d }
    }
}

/// Symmetric banded matrix stored by lower bands.
#[derive(Debug, Clone)]
struct Banded {
    n: usize,
    bw: usize,
    a: Vec<f64>,
}

impl Banded {
    fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            a: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)`.
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(r, c);
        self.a[k] += v;
    }

    /// `self - s * other`.
    fn shifted(&self, other: &Banded, s: f64) -> Banded {
        Banded {
            n: self.n,
            bw: self.bw,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x - s * y).collect(),
        }
    }

    /// In-place `L D L^T`; returns the number of negative pivots.
    fn ldlt(&mut self) -> usize {
        let (n, bw) = (self.n, self.bw);
        let mut negative = 0;
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut djj = self.a[self.idx(j, j)];
            for k in k0..j {
                let l = self.a[self.idx(j, k)];
                djj -= l * l * self.a[self.idx(k, k)];
            }
            if djj == 0.0 {
                djj = f64::EPSILON * (1.0 + self.a[self.idx(j, j)].abs());
            }
            let jj = self.idx(j, j);
            self.a[jj] = djj;
            if djj < 0.0 {
                negative += 1;
            }
            for i in j + 1..(j + bw + 1).min(n) {
                let mut v = self.a[self.idx(i, j)];
                for k in i.saturating_sub(bw).max(k0)..j {
                    v -= self.a[self.idx(i, k)] * self.a[self.idx(j, k)] * self.a[self.idx(k, k)];
                }
                let ij = self.idx(i, j);
                self.a[ij] = v / djj;
            }
        }
        negative
    }

    /// Solves with a factor produced by [`ldlt`](Self::ldlt).
    fn solve_factored(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            for k in i.saturating_sub(bw)..i {
                b[i] -= self.a[self.idx(i, k)] * b[k];
            }
        }
        for (i, v) in b.iter_mut().enumerate() {
            *v /= self.a[self.idx(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..(i + bw + 1).min(n) {
                b[i] -= self.a[self.idx(k, i)] * b[k];
            }
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..=i {
                let v = self.a[self.idx(i, j)];
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }
}

/// Discretised radial problem.
struct RadialProblem {
    basis: SplineBasis,
    n_ch: usize,
    /// DOF index of (spline, channel), if active.
    dof: Vec<Option<usize>>,
    h: Banded,
    m: Banded,
}

impl RadialProblem {
    fn new(surface: &AdiabaticSurface, opts: &RadialOptions, intervals: usize) -> Result<Self> {
        let interp = SurfaceInterp::new(surface)?;
        let d = surface.dimension;
        let c = centrifugal_constant(d);
        let n_ch = surface.n_ch;
        let rho = surface.rho();
        let (t_lo, t_hi) = (rho[0].ln(), rho[rho.len() - 1].ln());
        let bp: Vec<f64> = (0..=intervals)
            .map(|i| t_lo + (t_hi - t_lo) * i as f64 / intervals as f64)
            .collect();
        let basis = SplineBasis::new(bp.clone(), ORDER, false, false);
        let nb = basis.len();
        let robin = opts.outer == OuterBoundary::Threshold;
        let mut dof = vec![None; nb * n_ch];
        let mut count = 0;
        for i in 0..nb {
            for n in 0..n_ch {
                let edge = i == 0 || (i == nb - 1 && !(robin && n == 0));
                if !edge {
                    dof[i * n_ch + n] = Some(count);
                    count += 1;
                }
            }
        }
        let bw = ORDER * n_ch;
        let mut h = Banded::zeros(count, bw);
        let mut m = Banded::zeros(count, bw);
        let gl = gauss_legendre(NODES);
        let full = opts.couplings == Couplings::Full;
        let mut rows = [[0.0; 3]; MAX_ORDER];
        for iv in 0..intervals {
            for (t, wq) in gl.mapped(bp[iv], bp[iv + 1]) {
                let r = t.exp();
                let sp = interp.at(t);
                let first = basis.eval_into(t, 1, &mut rows) as usize;
                for a in 0..ORDER {
                    let (ba, da) = (rows[a][0], rows[a][1]);
                    for b in 0..=a {
                        let (bb, db) = (rows[b][0], rows[b][1]);
                        for n in 0..n_ch {
                            let Some(i) = dof[(first + a) * n_ch + n] else { continue };
                            for mm in 0..n_ch {
                                let Some(j) = dof[(first + b) * n_ch + mm] else { continue };
                                if b == a && mm > n {
                                    continue;
                                }
                                let mut v = 0.0;
                                if n == mm {
                                    let u = (sp.lambda[n] + c) / (r * r);
                                    v += da * db / r + r * ba * bb * (u + sp.d[n * n_ch + n]);
                                    m.add(i, j, wq * r * ba * bb);
                                } else if full {
                                    let p = sp.p[n * n_ch + mm];
                                    v += (da * bb - ba * db) * p + r * ba * bb * sp.d[n * n_ch + mm];
                                }
                                h.add(i, j, wq * v);
                            }
                        }
                    }
                }
            }
        }
        if robin {
            // -beta f(R) g(R) from the natural boundary term.
            let r_max = rho[rho.len() - 1];
            let beta = (3.0 - d) / (2.0 * r_max);
            if let Some(i) = dof[(nb - 1) * n_ch] {
                h.add(i, i, -beta);
            }
        }
        Ok(Self {
            basis,
            n_ch,
            dof,
            h,
            m,
        })
    }

    /// Number of eigenvalues `2E` below `s`.
    fn count_below(&self, s: f64) -> usize {
        self.h.shifted(&self.m, s).ldlt()
    }

    /// `k`-th eigenvalue of `H a = s M a` below `ceiling`, by bisection in `ln(ceiling - s)`.
    fn eigenvalue(&self, k: usize, ceiling: f64) -> f64 {
        let mut depth = 1.0_f64;
        while self.count_below(ceiling - depth) > k {
            depth *= 4.0;
        }
        let mut deep = depth.ln();
        let mut shallow = deep - 1.0;
        while self.count_below(ceiling - shallow.exp()) <= k {
            deep = shallow;
            shallow -= 2.0;
        }
        while deep - shallow > 1e-13 {
            let mid = 0.5 * (deep + shallow);
            if self.count_below(ceiling - mid.exp()) > k {
                shallow = mid;
            } else {
                deep = mid;
            }
        }
        ceiling - (0.5 * (deep + shallow)).exp()
    }

    fn eigenvector(&self, s: f64) -> Vec<f64> {
        let n = self.h.n;
        let shift = s - 1e-9 * s.abs().max(1e-300);
        let mut f = self.h.shifted(&self.m, shift);
        f.ldlt();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 * 0.61).sin()).collect();
        for _ in 0..4 {
            let mut b = self.m.mul(&x);
            f.solve_factored(&mut b);
            let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = b.into_iter().map(|v| v / norm).collect();
        }
        let mx = self.m.mul(&x);
        let norm = x.iter().zip(&mx).map(|(a, b)| a * b).sum::<f64>().sqrt();
        x.iter().map(|v| v / norm).collect()
    }

    /// Channel coefficient vectors over the full spline basis.
    fn unpack(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let nb = self.basis.len();
        (0..self.n_ch)
            .map(|n| {
                (0..nb)
                    .map(|i| self.dof[i * self.n_ch + n].map_or(0.0, |k| x[k]))
                    .collect()
            })
            .collect()
    }
}

/// One three-body level with its channel functions.
#[derive(Debug, Clone)]
pub struct ThreeBodyState {
    /// Energy relative to three free particles.
    pub energy: f64,
    pub dimension: f64,
    /// Zeros of the dominant channel function.
    pub nodes: usize,
    /// Relative energy change when the outer boundary condition is swapped;
    /// above 1% the level is not contained by the box.
    pub edge_shift: f64,
    basis: SplineBasis,
    coeffs: Vec<Vec<f64>>,
}

impl ThreeBodyState {
    /// Whether the level is sensitive to the box edge beyond 1%.
    pub fn box_limited(&self) -> bool {
        self.edge_shift > 0.01
    }

    pub fn n_ch(&self) -> usize {
        self.coeffs.len()
    }

    pub fn rho_range(&self) -> (f64, f64) {
        (self.basis.lo().exp(), self.basis.hi().exp())
    }

    /// `f_n(rho)`.
    pub fn channel(&self, n: usize, rho: f64) -> Result<f64> {
        let (lo, hi) = self.rho_range();
        if !(rho >= lo * (1.0 - 1e-12) && rho <= hi * (1.0 + 1e-12)) {
            return Err(Error::domain(format!("hyperradius {rho} outside [{lo}, {hi}]")));
        }
        Ok(self.basis.combine(&self.coeffs[n], rho.ln(), 0))
    }

    /// `sum_n ∫ |f_n|^2 drho`.
    pub fn norm(&self) -> f64 {
        let gl = gauss_legendre(NODES);
        let bp = self.basis.breakpoints();
        let mut s = 0.0;
        for w in bp.windows(2) {
            for (t, wq) in gl.mapped(w[0], w[1]) {
                for c in &self.coeffs {
                    let f = self.basis.combine(c, t, 0);
                    s += wq * t.exp() * f * f;
                }
            }
        }
        s
    }
}

fn dominant_nodes(basis: &SplineBasis, coeffs: &[Vec<f64>]) -> usize {
    let weights: Vec<f64> = coeffs.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let n = (0..coeffs.len())
        .max_by(|&a, &b| weights[a].total_cmp(&weights[b]))
        .unwrap_or(0);
    let c = &coeffs[n];
    let samples = 20 * basis.len();
    let vals: Vec<f64> = (0..=samples)
        .map(|i| basis.combine(c, basis.lo() + (basis.hi() - basis.lo()) * i as f64 / samples as f64, 0))
        .collect();
    let peak = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut nodes = 0;
    let mut last = 0.0;
    for v in vals {
        if v.abs() < 1e-6 * peak {
            continue;
        }
        if last != 0.0 && v.signum() != last {
            nodes += 1;
        }
        last = v.signum();
    }
    nodes
}

/// Two-body threshold seen at large `rho`, or zero when the pair is unbound.
fn threshold_of(threshold: Option<f64>) -> f64 {
    threshold.unwrap_or(0.0).min(0.0)
}

/// Number of three-body levels below the two-body threshold `threshold`
/// (`None` for an unbound pair).
pub fn bound_count(surface: &AdiabaticSurface, threshold: Option<f64>, opts: &RadialOptions) -> Result<usize> {
    let problem = RadialProblem::new(surface, opts, opts.intervals)?;
    Ok(problem.count_below(2.0 * threshold_of(threshold)))
}

/// Lowest three-body levels below the two-body threshold, at most `n_states`.
///
/// Fewer are returned when fewer are bound.
pub fn coupled_bound_states(
    surface: &AdiabaticSurface,
    threshold: Option<f64>,
    n_states: usize,
    opts: &RadialOptions,
) -> Result<Vec<ThreeBodyState>> {
    let ceiling = 2.0 * threshold_of(threshold);
    let solve = |intervals: usize| -> Result<(RadialProblem, Vec<f64>)> {
        let problem = RadialProblem::new(surface, opts, intervals)?;
        let n = problem.count_below(ceiling).min(n_states);
        let levels = (0..n).map(|k| problem.eigenvalue(k, ceiling)).collect();
        Ok((problem, levels))
    };
    let (problem, levels) = solve(opts.intervals)?;
    if let Some(tol) = opts.convergence {
        let (_, fine) = solve(2 * opts.intervals)?;
        for (k, (a, b)) in levels.iter().zip(&fine).enumerate() {
            if ((a - b) / b).abs() > tol {
                return Err(Error::numerical(format!(
                    "level {k} not converged in the radial grid: E = {} with {} intervals, {} with {}",
                    0.5 * a,
                    opts.intervals,
                    0.5 * b,
                    2 * opts.intervals
                )));
            }
        }
    }
    // Sensitivity to the outer edge: the same levels with the other boundary condition.
    let other = RadialOptions {
        outer: match opts.outer {
            OuterBoundary::Dirichlet => OuterBoundary::Threshold,
            OuterBoundary::Threshold => OuterBoundary::Dirichlet,
        },
        ..*opts
    };
    let alt = RadialProblem::new(surface, &other, opts.intervals)?;
    let alt_count = alt.count_below(ceiling);
    Ok(levels
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let x = problem.eigenvector(s);
            let coeffs = problem.unpack(&x);
            let edge_shift = if k < alt_count {
                ((alt.eigenvalue(k, ceiling) - s) / s).abs()
            } else {
                f64::INFINITY
            };
            ThreeBodyState {
                energy: 0.5 * s,
                dimension: surface.dimension,
                nodes: dominant_nodes(&problem.basis, &coeffs),
                edge_shift,
                basis: problem.basis.clone(),
                coeffs,
            }
        })
        .collect())
}

/// Consecutive energy ratios and the scale-invariant prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFactors {
    /// `E_k / E_{k+1}` measured from the two-body threshold.
    pub ratios: Vec<f64>,
    /// `s_0` from the large-`rho` plateau of `lambda_0`.
    pub s0: f64,
    /// `exp(2 pi / s_0)`.
    pub predicted: f64,
}

/// Energy ratios of consecutive levels and `exp(2 pi / s_0)` from `lambda_inf`.
pub fn efimov_scale_factor(states: &[ThreeBodyState], threshold: Option<f64>, lambda_inf: f64) -> Result<ScaleFactors> {
    if states.len() < 3 {
        return Err(Error::domain(format!("need at least 3 levels, got {}", states.len())));
    }
    let d = states[0].dimension;
    let e2 = threshold_of(threshold);
    let s0_sq = -(lambda_inf + centrifugal_constant(d)) - 0.25;
    if s0_sq <= 0.0 {
        return Err(Error::domain(format!(
            "plateau lambda = {lambda_inf} gives no attractive inverse-square tail"
        )));
    }
    let s0 = s0_sq.sqrt();
    let ratios = states
        .windows(2)
        .map(|w| (w[0].energy - e2) / (w[1].energy - e2))
        .collect();
    Ok(ScaleFactors {
        ratios,
        s0,
        predicted: (2.0 * PI / s0).exp(),
    })
}

/// Everything needed to go from a dimension to a three-body spectrum.
#[derive(Debug, Clone, Copy)]
pub struct ThreeBodyModel {
    pub masses: MassTriple,
    /// Heavy-light interaction; the heavy-heavy pair does not interact.
    pub potential: GaussianPotential,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_points: usize,
    pub layout: AngularLayout,
    pub n_ch: usize,
    pub radial: RadialOptions,
}

/// Levels at one dimension.
#[derive(Debug, Clone)]
pub struct SpectrumRow {
    pub dimension: f64,
    /// Heavy-light ground-state energy, if bound.
    pub twobody: Option<f64>,
    pub states: Vec<ThreeBodyState>,
}

impl ThreeBodyModel {
    pub fn heavy_light_reduced_mass(&self) -> f64 {
        self.masses.pair_reduced_mass(1, 3)
    }

    pub fn twobody_threshold(&self, d: f64) -> Result<Option<f64>> {
        Ok(twobody_bound_states(&self.potential, self.heavy_light_reduced_mass(), d)?.threshold())
    }

    pub fn surface(&self, d: f64) -> Result<AdiabaticSurface> {
        let system = AngularSystem::new(d, self.masses, self.potential)?;
        let grid = rho_grid(self.rho_min, self.rho_max, self.rho_points)?;
        adiabatic_surface(&system, &grid, self.layout, self.n_ch)
    }

    /// Up to `n_states` lowest levels below the breakup threshold at `d`.
    pub fn spectrum(&self, d: f64, n_states: usize) -> Result<SpectrumRow> {
        let twobody = self.twobody_threshold(d)?;
        let surface = self.surface(d)?;
        let states = coupled_bound_states(&surface, twobody, n_states, &self.radial)?;
        Ok(SpectrumRow {
            dimension: d,
            twobody,
            states,
        })
    }

    /// Whether level `state_index` lies below the breakup threshold at `d`.
    ///
    /// Uses the threshold boundary condition so the answer does not depend on the box.
    pub fn is_bound(&self, d: f64, state_index: usize) -> Result<bool> {
        let twobody = self.twobody_threshold(d)?;
        let surface = self.surface(d)?;
        let opts = RadialOptions {
            outer: OuterBoundary::Threshold,
            ..self.radial
        };
        Ok(bound_count(&surface, twobody, &opts)? > state_index)
    }
}

/// Spectra over a dimension grid, sorted by dimension.
pub fn spectrum_scan(model: &ThreeBodyModel, dims: &[f64], n_states: usize) -> Result<Vec<SpectrumRow>> {
    let mut rows: Vec<SpectrumRow> = dims
        .par_iter()
        .map(|&d| model.spectrum(d, n_states))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.dimension.total_cmp(&b.dimension));
    Ok(rows)
}

/// Tab-separated `d  E2  E3[0..n]`, unbound entries as `NaN`.
pub fn spectrum_table(rows: &[SpectrumRow], n_states: usize, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        out.push_str(&format!("# {h}\n"));
    }
    out.push_str("# d\tE2");
    for k in 0..n_states {
        out.push_str(&format!("\tE3_{k}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&spectrum_line(row, n_states));
    }
    out
}

/// One row of [`spectrum_table`], newline included.
pub fn spectrum_line(row: &SpectrumRow, n_states: usize) -> String {
    let mut out = format!("{:.6}\t{:.10e}", row.dimension, row.twobody.unwrap_or(f64::NAN));
    for k in 0..n_states {
        let e = row.states.get(k).map_or(f64::NAN, |s| s.energy);
        out.push_str(&format!("\t{e:.10e}"));
    }
    out.push('\n');
    out
}

/// Result of following a level down in dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Disappearance {
    /// The level meets the breakup threshold at this dimension.
    At(f64),
    /// The level stays bound over the whole range.
    Survives,
}

/// Dimension at which level `state_index` meets the two-body threshold, bisected to `1e-3`.
///
/// The level must be bound at the upper end of `range`.
pub fn disappearance_dimension(model: &ThreeBodyModel, state_index: usize, range: (f64, f64)) -> Result<Disappearance> {
    let (mut lo, mut hi) = range;
    if !(lo < hi) {
        return Err(Error::domain(format!("empty dimension range [{lo}, {hi}]")));
    }
    if !model.is_bound(hi, state_index)? {
        return Err(Error::Precondition(format!("level {state_index} is not bound at d = {hi}")));
    }
    if model.is_bound(lo, state_index)? {
        return Ok(Disappearance::Survives);
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if model.is_bound(mid, state_index)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Disappearance::At(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};

    #[test]
    fn centrifugal_constants() {
        assert_eq!(centrifugal_constant(3.0), 3.75);
        assert_eq!(centrifugal_constant(2.0), 0.75);
        assert_eq!(centrifugal_constant(2.75), 2.8125);
    }

    fn sample(n: usize, bw: usize) -> (Banded, DMatrix<f64>) {
        let mut b = Banded::zeros(n, bw);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                let v = if i == j {
                    (i as f64 * 0.7).sin() * 3.0 + 0.5
                } else {
                    ((i * 31 + j * 17) as f64).cos()
                };
                b.add(i, j, v);
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        (b, d)
    }

    #[test]
    fn inertia_counts_negative_eigenvalues() {
        let (b, d) = sample(40, 5);
        let ev = SymmetricEigen::new(d).eigenvalues;
        for shift in [-6.0, -2.0, 0.0, 1.5, 4.0] {
            let mut ident = Banded::zeros(40, 5);
            for i in 0..40 {
                ident.add(i, i, 1.0);
            }
            let count = b.shifted(&ident, shift).ldlt();
            let expect = ev.iter().filter(|&&e| e < shift).count();
            assert_eq!(count, expect, "shift {shift}");
        }
    }

    #[test]
    fn banded_solve_matches_dense() {
        let (mut b, d) = sample(30, 4);
        let x: Vec<f64> = (0..30).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let rhs = b.mul(&x);
        let dense = &d * nalgebra::DVector::from_column_slice(&x);
        for (u, v) in rhs.iter().zip(dense.iter()) {
            assert!((u - v).abs() < 1e-13);
        }
        b.ldlt();
        let mut sol = rhs;
        b.solve_factored(&mut sol);
        for (u, v) in sol.iter().zip(&x) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }
}
