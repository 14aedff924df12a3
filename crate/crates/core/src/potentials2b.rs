//! Gaussian two-body interaction and the s-wave two-body problem in
//! continuous dimension `d`.
//!
//! The regular radial function `R(r) = u(r) / r^{(d-1)/2}` obeys
//!
//! ```text
//! R'' + (d-1)/r R' = 2 mu (V(r) - E) R
//! ```
//!
//! which we integrate outward with RK4 up to a matching radius beyond the
//! Gaussian. Beyond that radius the solution is known in closed form
//! (`A + B r^{2-d}` at threshold, modified Bessel functions below it), so the
//! number of zeros on `(0, inf)` is obtained exactly from the log-derivative at
//! the matching radius. By the oscillation theorem that count equals the
//! number of bound states below `E`; energies follow by bisection in `ln(-E)`.
//! This handles exponentially weak binding near `d = 2` that no finite box
//! can resolve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPotential {
    /// `S` in `V(r) = -S exp(-(r/b)^2)`; positive is attractive.
    pub depth: f64,
    /// `b`, the length unit of the problem.
    pub range: f64,
}

impl GaussianPotential {
    pub fn new(depth: f64, range: f64) -> Result<Self> {
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::domain(format!("Gaussian range must be positive, got {range}")));
        }
        if !(depth.is_finite() && depth >= 0.0) {
            return Err(Error::domain(format!("Gaussian depth must be non-negative, got {depth}")));
        }
        Ok(Self { depth, range })
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::domain(format!("negative distance {r}")));
        }
        Ok(self.value(r))
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        let q = r / self.range;
        -self.depth * (-q * q).exp()
    }

    /// Radius beyond which the potential is below `1e-30 S`.
    pub fn cutoff_radius(&self) -> f64 {
        8.5 * self.range
    }
}

/// `(d-1)(d-3)/4`, the s-wave centrifugal coefficient of the reduced radial equation.
pub fn centrifugal_coefficient(d: f64) -> f64 {
    (d - 1.0) * (d - 3.0) / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBodySpectrum {
    pub dimension: f64,
    pub reduced_mass: f64,
    /// Bound energies, ascending, all negative.
    pub energies: Vec<f64>,
}

impl TwoBodySpectrum {
    /// Lowest atom-dimer breakup threshold, the two-body ground state.
    pub fn threshold(&self) -> Option<f64> {
        self.ground()
    }

    pub fn ground(&self) -> Option<f64> {
        self.energies.first().copied()
    }
}

fn check_dimension(d: f64) -> Result<()> {
    if !(2.0..=3.0).contains(&d) {
        return Err(Error::domain(format!("dimension {d} outside [2, 3]")));
    }
    Ok(())
}

/// Outcome of one outward integration.
#[derive(Debug, Clone, Copy)]
struct Shot {
    inner_nodes: usize,
    log_deriv: f64,
    r_match: f64,
}

fn shoot(pot: &GaussianPotential, mu: f64, d: f64, energy: f64, steps_per_unit: f64) -> Shot {
    let r_match = pot.cutoff_radius();
    let k_max = (2.0 * mu * (pot.depth + energy.abs())).sqrt() * pot.range;
    let n = ((r_match / pot.range) * steps_per_unit * (1.0 + k_max)).ceil() as usize;
    let h = r_match / n as f64;
    let two_mu = 2.0 * mu;

    let rhs = |r: f64, y: [f64; 2]| -> [f64; 2] {
        [y[1], -(d - 1.0) / r * y[1] + two_mu * (pot.value(r) - energy) * y[0]]
    };

    // Series start: R = 1 + c r^2.
    let r0 = 1e-3 * h;
    let c = two_mu * (pot.value(0.0) - energy) / (2.0 * d);
    let mut y = [1.0 + c * r0 * r0, 2.0 * c * r0];
    let mut r = r0;
    let mut nodes = 0;
    let step = |r: f64, y: [f64; 2], h: f64| {
        let k1 = rhs(r, y);
        let k2 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    };
    // First partial step to land on the uniform grid.
    let first = h - r0;
    let next = step(r, y, first);
    if next[0].signum() != y[0].signum() {
        nodes += 1;
    }
    y = next;
    r = h;
    for i in 1..n {
        let next = step(r, y, h);
        if next[0] != 0.0 && next[0].signum() != y[0].signum() {
            nodes += 1;
        }
        y = next;
        r = (i + 1) as f64 * h;
        let scale = y[0].abs().max(y[1].abs());
        if scale > 1e200 {
            y = [y[0] / scale, y[1] / scale];
        }
    }
    Shot {
        inner_nodes: nodes,
        log_deriv: y[1] / y[0],
        r_match: r,
    }
}

/// `K_nu'(z) / K_nu(z)` from `K_nu(z) = ∫_0^inf exp(-z cosh t) cosh(nu t) dt`.
///
/// The trapezoidal rule is spectrally accurate for this integrand; valid for
/// any real `nu` and `z > 0`, including `z` far below machine epsilon.
pub fn bessel_k_log_derivative(nu: f64, z: f64) -> f64 {
    assert!(z > 0.0);
    let h = 0.05 / z.sqrt().max(1.0);
    // exp(-z (cosh t - 1)) < 1e-300 beyond t_max.
    let t_max = (1.0 + 700.0 / z).acosh() + 1.0;
    let n = (t_max / h).ceil() as usize;
    let mut k = 0.0;
    let mut dk = 0.0;
    for i in 0..=n {
        let t = i as f64 * h;
        let w = if i == 0 { 0.5 } else { 1.0 };
        let ch = t.cosh();
        let f = (-z * (ch - 1.0) + nu * t).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
        k += w * f;
        dk += w * ch * f;
    }
    -dk / k
}

/// Log-derivative `R'/R` at `r` of the solution that decays (or, at threshold,
/// stays bounded) at infinity in the potential-free region.
fn decaying_log_derivative(d: f64, mu: f64, energy: f64, r: f64) -> f64 {
    let nu = 0.5 * (d - 2.0);
    if energy >= 0.0 {
        return (2.0 - d) / r;
    }
    let kappa = (-2.0 * mu * energy).sqrt();
    -nu / r + kappa * bessel_k_log_derivative(nu, kappa * r)
}

const STEPS_PER_UNIT: f64 = 400.0;

/// Number of bound states with energy strictly below `energy` (`energy <= 0`).
pub fn count_below(pot: &GaussianPotential, mu: f64, d: f64, energy: f64) -> usize {
    let shot = shoot(pot, mu, d, energy, STEPS_PER_UNIT);
    let tail = decaying_log_derivative(d, mu, energy, shot.r_match);
    shot.inner_nodes + usize::from(shot.log_deriv < tail)
}

/// Signed measure of the zero-energy regular solution at infinity: proportional
/// to the coefficient `A` of the constant (non-decaying) tail `R -> A`,
/// normalised by `R(r_match)`. Changes sign where a state crosses threshold.
pub fn threshold_coefficient(pot: &GaussianPotential, mu: f64, d: f64) -> f64 {
    let shot = shoot(pot, mu, d, 0.0, STEPS_PER_UNIT);
    let r = shot.r_match;
    if (d - 2.0).abs() < 1e-12 {
        return -shot.log_deriv;
    }
    1.0 - shot.log_deriv * r / (2.0 - d)
}

/// All s-wave bound states of the pair in dimension `d`.
pub fn twobody_bound_states(pot: &GaussianPotential, mu: f64, d: f64) -> Result<TwoBodySpectrum> {
    check_dimension(d)?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::domain(format!("reduced mass must be positive, got {mu}")));
    }
    let mut energies = Vec::new();
    if pot.depth > 0.0 {
        let n = count_below(pot, mu, d, 0.0);
        // Coarse and fine integrations must agree on the count.
        let check = shoot(pot, mu, d, 0.0, 2.0 * STEPS_PER_UNIT);
        let n_fine = check.inner_nodes
            + usize::from(check.log_deriv < decaying_log_derivative(d, mu, 0.0, check.r_match));
        if n != n_fine {
            return Err(Error::numerical(format!(
                "two-body state count not converged under step halving ({n} vs {n_fine}) at d = {d}, S = {}",
                pot.depth
            )));
        }
        for k in 0..n {
            energies.push(bisect_level(pot, mu, d, k)?);
        }
    }
    Ok(TwoBodySpectrum {
        dimension: d,
        reduced_mass: mu,
        energies,
    })
}

/// Energy of level `k` (0-based) by bisection on `ln(-E)`.
fn bisect_level(pot: &GaussianPotential, mu: f64, d: f64, k: usize) -> Result<f64> {
    // Deep end: no states below -S. Shallow end: as close to zero as f64 allows.
    let mut deep = pot.depth.ln();
    let mut shallow = -700.0_f64;
    if count_below(pot, mu, d, -shallow.exp()) < k + 1 {
        return Err(Error::numerical(format!(
            "level {k} lies above -1e-304 at d = {d}; binding too weak to resolve"
        )));
    }
    // count_below(-exp(y)) >= k + 1 at y = shallow, < k + 1 at y = deep.
    while deep - shallow > 1e-13 * (1.0 + deep.abs().max(shallow.abs())) {
        let mid = 0.5 * (deep + shallow);
        if count_below(pot, mu, d, -mid.exp()) > k {
            shallow = mid;
        } else {
            deep = mid;
        }
    }
    Ok(-(0.5 * (deep + shallow)).exp())
}

/// Dimension where the first two-body bound state reaches zero energy.
pub fn critical_dimension(pot: &GaussianPotential, mu: f64) -> Result<f64> {
    if count_below(pot, mu, 3.0, 0.0) > 0 {
        return Err(Error::Precondition(format!(
            "pair is already bound at d = 3 (S = {})",
            pot.depth
        )));
    }
    if count_below(pot, mu, 2.0, 0.0) == 0 {
        return Err(Error::Precondition(format!(
            "pair is unbound at d = 2 (S = {})",
            pot.depth
        )));
    }
    let (mut bound, mut unbound) = (2.0_f64, 3.0_f64);
    while unbound - bound > 1e-12 {
        let mid = 0.5 * (bound + unbound);
        if count_below(pot, mu, mid, 0.0) > 0 {
            bound = mid;
        } else {
            unbound = mid;
        }
    }
    Ok(0.5 * (bound + unbound))
}

/// Depth `S` whose first bound state sits exactly at threshold in dimension `target_de`.
pub fn calibrate_depth(range: f64, mu: f64, target_de: f64) -> Result<GaussianPotential> {
    if !(target_de > 2.0 && target_de < 3.0) {
        return Err(Error::domain(format!("target dimension {target_de} outside (2, 3)")));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::domain(format!("reduced mass must be positive, got {mu}")));
    }
    // Work in the scale-free strength g = 2 mu S b^2.
    let unit = 1.0 / (2.0 * mu * range * range);
    let bound_at = |g: f64| {
        let pot = GaussianPotential { depth: g * unit, range };
        count_below(&pot, mu, target_de, 0.0) > 0
    };
    let (mut lo, mut hi) = (0.0_f64, 2.0_f64);
    while !bound_at(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if bound_at(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    GaussianPotential::new(0.5 * (lo + hi) * unit, range)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_values() {
        let v = GaussianPotential::new(1.0, 1.0).unwrap();
        assert_eq!(v.eval(0.0).unwrap(), -1.0);
        assert!(v.eval(40.0).unwrap().abs() < 1e-300);
        let v = GaussianPotential::new(2.684, 1.0).unwrap();
        assert!((v.eval(1.0).unwrap() + 2.684 / std::f64::consts::E).abs() < 1e-15);
        assert!(v.eval(-0.5).is_err());
        assert!(GaussianPotential::new(1.0, 0.0).is_err());
        assert!(GaussianPotential::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn centrifugal_limits() {
        assert_eq!(centrifugal_coefficient(3.0), 0.0);
        assert_eq!(centrifugal_coefficient(2.0), -0.25);
    }

    #[test]
    fn bessel_k_ratio_closed_forms() {
        // K_{1/2}(z) = sqrt(pi/2z) e^{-z}.
        for &z in &[1e-30, 1e-3, 0.7, 5.0, 120.0] {
            let exact = -1.0 - 0.5 / z;
            let got = bessel_k_log_derivative(0.5, z);
            assert!((got / exact - 1.0).abs() < 1e-12, "z={z}: {got} vs {exact}");
        }
        // K_0'(1) / K_0(1) = -K_1(1)/K_0(1) (tabulated values).
        let exact = -0.601_907_230_197_234_6 / 0.421_024_438_240_708_3;
        assert!((bessel_k_log_derivative(0.0, 1.0) - exact).abs() < 1e-13);
    }

    #[test]
    fn free_particle_has_no_states() {
        let v = GaussianPotential::new(0.0, 1.0).unwrap();
        for d in [2.0, 2.5, 3.0] {
            assert!(twobody_bound_states(&v, 1.0, d).unwrap().energies.is_empty());
        }
    }

    #[test]
    fn weak_attraction_binds_in_two_dimensions() {
        for s in [1e-2, 1e-1, 1.0] {
            let v = GaussianPotential::new(s, 1.0).unwrap();
            assert_eq!(count_below(&v, 1.0, 2.0, 0.0), 1, "S = {s}");
        }
    }

    #[test]
    fn dimension_out_of_range() {
        let v = GaussianPotential::new(1.0, 1.0).unwrap();
        assert!(twobody_bound_states(&v, 1.0, 3.5).is_err());
        assert!(calibrate_depth(1.0, 1.0, 3.2).is_err());
        assert!(calibrate_depth(1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn critical_dimension_preconditions() {
        assert!(matches!(
            critical_dimension(&GaussianPotential::new(5.0, 1.0).unwrap(), 1.0),
            Err(Error::Precondition(_))
        ));
    }
}
