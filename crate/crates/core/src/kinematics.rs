//! Masses, Jacobi sets and kinematic rotations.
//!
//! Particles are numbered 1, 2, 3; for the systems handled here 1 and 2 are
//! the identical heavy pair and 3 is the light particle. All Jacobi vectors
//! are mass-scaled with `m_ref = 1`:
//!
//! ```text
//! x = sqrt(mu_ij) (r_i - r_j),   y = sqrt(mu_(ij)k) (r_k - R_ij)
//! ```
//!
//! so the hyperradius `rho^2 = x^2 + y^2` is the same in every set.
//!
//! Pairs are oriented anti-cyclically: set 1 uses `x ∝ r2 - r1`, set 2 uses
//! `x ∝ r1 - r3`, set 3 uses `x ∝ r3 - r2`. With this choice every change of
//! set is a proper rotation of the `(x, y)` frame, and the kinematic angle
//! `gamma(i -> j)`, defined by `x_j = cos(gamma) x_i + sin(gamma) y_i`, is
//! positive when `j` follows `i` cyclically (1 -> 2 -> 3 -> 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three particle masses in units of `m_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassTriple {
    m: [f64; 3],
}

impl MassTriple {
    pub fn new(m1: f64, m2: f64, m3: f64) -> Result<Self> {
        let m = [m1, m2, m3];
        if m.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::domain(format!("masses must be finite and positive, got {m:?}")));
        }
        Ok(Self { m })
    }

    /// Two identical heavy particles (1, 2) and a light one (3).
    pub fn heavy_heavy_light(heavy: f64, light: f64) -> Result<Self> {
        Self::new(heavy, heavy, light)
    }

    /// Mass of particle `p` (1-based).
    pub fn mass(&self, p: usize) -> f64 {
        self.m[p - 1]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.m
    }

    pub fn total(&self) -> f64 {
        self.m.iter().sum()
    }

    /// Reduced mass of the pair `(i, j)`, 1-based.
    pub fn pair_reduced_mass(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.mass(i), self.mass(j));
        a * b / (a + b)
    }

    /// True when particles 1 and 2 are identical.
    pub fn has_identical_pair(&self) -> bool {
        self.m[0] == self.m[1]
    }
}

/// The three Jacobi sets. Set 1 has the heavy-heavy pair on `x`; sets 2 and 3
/// have heavy-light pairs and map onto each other under heavy exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JacobiSet {
    One,
    Two,
    Three,
}

impl JacobiSet {
    pub const ALL: [JacobiSet; 3] = [JacobiSet::One, JacobiSet::Two, JacobiSet::Three];

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(JacobiSet::One),
            2 => Ok(JacobiSet::Two),
            3 => Ok(JacobiSet::Three),
            _ => Err(Error::domain(format!("Jacobi set must be 1, 2 or 3, got {i}"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            JacobiSet::One => 1,
            JacobiSet::Two => 2,
            JacobiSet::Three => 3,
        }
    }

    /// Oriented pair `(i, j)` joined by `x` (`x ∝ r_i - r_j`), 1-based.
    pub fn pair(self) -> (usize, usize) {
        match self {
            JacobiSet::One => (2, 1),
            JacobiSet::Two => (1, 3),
            JacobiSet::Three => (3, 2),
        }
    }

    /// Particle joined to the pair's centre of mass by `y`.
    pub fn spectator(self) -> usize {
        match self {
            JacobiSet::One => 3,
            JacobiSet::Two => 2,
            JacobiSet::Three => 1,
        }
    }

    /// Image of the set under exchange of the two heavy particles.
    pub fn heavy_exchange(self) -> Self {
        match self {
            JacobiSet::One => JacobiSet::One,
            JacobiSet::Two => JacobiSet::Three,
            JacobiSet::Three => JacobiSet::Two,
        }
    }

    /// Coefficients of `x` and `y` on the particle positions.
    pub fn vectors(self, masses: &MassTriple) -> ([f64; 3], [f64; 3]) {
        let (i, j) = self.pair();
        let k = self.spectator();
        let s = jacobi_scaling(masses, self);
        let (mi, mj) = (masses.mass(i), masses.mass(j));
        let mut x = [0.0; 3];
        x[i - 1] = s.c_x;
        x[j - 1] = -s.c_x;
        let mut y = [0.0; 3];
        y[k - 1] = s.c_y;
        y[i - 1] = -s.c_y * mi / (mi + mj);
        y[j - 1] = -s.c_y * mj / (mi + mj);
        (x, y)
    }
}

/// `x = c_x r_x`, `y = c_y r_y` for one Jacobi set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiScaling {
    pub c_x: f64,
    pub c_y: f64,
}

impl JacobiScaling {
    /// `c_y / c_x = sqrt(mu_(ij)k / mu_ij)`, the square-root mass factor relating
    /// the two kinds of Jacobi-to-distance scaling.
    pub fn mass_factor(&self) -> f64 {
        self.c_y / self.c_x
    }
}

pub fn jacobi_scaling(masses: &MassTriple, set: JacobiSet) -> JacobiScaling {
    let (i, j) = set.pair();
    let k = set.spectator();
    let mu_x = masses.pair_reduced_mass(i, j);
    let mij = masses.mass(i) + masses.mass(j);
    let mu_y = masses.mass(k) * mij / (mij + masses.mass(k));
    JacobiScaling {
        c_x: mu_x.sqrt(),
        c_y: mu_y.sqrt(),
    }
}

/// Factor converting the Jacobi rms ratio `<y^2>^{1/2}/<x^2>^{1/2}` into the
/// physical ratio `<r_y^2>^{1/2}/<r_x^2>^{1/2}`; equal to `c_x / c_y`.
pub fn distance_ratio_factor(masses: &MassTriple, set: JacobiSet) -> f64 {
    let s = jacobi_scaling(masses, set);
    s.c_x / s.c_y
}

/// Kinematic rotation angle in radians, `x_to = cos(g) x_from + sin(g) y_from`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationAngle(pub f64);

impl RotationAngle {
    pub fn radians(self) -> f64 {
        self.0
    }
}

fn mass_dot(a: &[f64; 3], b: &[f64; 3], m: &[f64; 3]) -> f64 {
    (0..3).map(|p| a[p] * b[p] / m[p]).sum()
}

/// Angle of the kinematic rotation carrying set `from` into set `to`.
///
/// `|tan gamma| = sqrt(m_c M / (m_a m_b))` where `a`, `b` are the spectators
/// of the two sets and `c` is the particle common to both pairs.
pub fn kinematic_angle(masses: &MassTriple, from: JacobiSet, to: JacobiSet) -> Result<RotationAngle> {
    if from == to {
        return Err(Error::domain("kinematic rotation needs two distinct Jacobi sets"));
    }
    let m = masses.as_array();
    let (xi, yi) = from.vectors(masses);
    let (xj, _) = to.vectors(masses);
    let a = mass_dot(&xj, &xi, &m);
    let b = mass_dot(&xj, &yi, &m);
    // x_j and -x_j give the same hyperangle, so fold into (-pi/2, pi/2).
    Ok(RotationAngle((b / a).atan()))
}

/// Hyperangle in the rotated set from `(alpha, u)` of the original set, where
/// `u` is the cosine between `x` and `y`.
pub fn rotated_hyperangle(alpha: f64, u: f64, gamma: RotationAngle) -> Result<f64> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&alpha) {
        return Err(Error::domain(format!("hyperangle {alpha} outside [0, pi/2]")));
    }
    if !(-1.0..=1.0).contains(&u) {
        return Err(Error::domain(format!("direction cosine {u} outside [-1, 1]")));
    }
    Ok(rotated_hyperangle_unchecked(alpha, u, gamma.0))
}

#[inline]
pub(crate) fn rotated_sin2(alpha: f64, u: f64, gamma: f64) -> f64 {
    let (sg, cg) = gamma.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    (cg * cg * sa * sa + sg * sg * ca * ca + 2.0 * sg * cg * sa * ca * u).clamp(0.0, 1.0)
}

#[inline]
pub(crate) fn rotated_hyperangle_unchecked(alpha: f64, u: f64, gamma: f64) -> f64 {
    rotated_sin2(alpha, u, gamma).sqrt().asin()
}
