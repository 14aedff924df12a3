//! Run configuration: a TOML subset with one `key = value` per line and
//! sections written as dotted prefixes (`basis.n_ch = 3`) or `[basis]` headers.
//!
//! ```text
//! masses = [133.0, 133.0, 6.0]
//! potential.target_de = 2.75
//! potential.strength = 0.16422824
//! dimension.range = [2.5, 2.75]
//! dimension.step = 0.01
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hyperangular::AngularLayout;
use crate::kinematics::{JacobiSet, MassTriple};
use crate::potentials2b::GaussianPotential;
use crate::radial3b::{Couplings, OuterBoundary, RadialOptions, ThreeBodyModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `[m1, m2, m3]` with particles 1 and 2 heavy.
    pub masses: [f64; 3],
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub dimension: DimensionConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub observables: ObservablesConfig,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    /// Gaussian range `b`.
    pub range: f64,
    /// Dimension where the heavy-light pair is bound at zero energy.
    pub target_de: Option<f64>,
    /// Depth `S`; when absent it is calibrated to `target_de`.
    pub strength: Option<f64>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            range: 1.0,
            target_de: None,
            strength: None,
        }
    }
}

/// Either an explicit list of dimensions or an inclusive range with a step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimensionConfig {
    pub values: Option<Vec<f64>>,
    pub range: Option<[f64; 2]>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub n_b: usize,
    pub n_ch: usize,
    /// `false` keeps only the diagonal `Q` couplings.
    pub couplings: bool,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            n_b: 60,
            n_ch: 3,
            couplings: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_points: usize,
    pub radial_intervals: usize,
    /// Outer boundary condition matched to the atom-dimer decay.
    pub threshold_boundary: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rho_min: 1e-3,
            rho_max: 1e5,
            rho_points: 200,
            radial_intervals: 400,
            threshold_boundary: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservablesConfig {
    /// Number of three-body levels listed in the spectrum table.
    pub levels: usize,
    /// Level whose radii and densities are reported, 0 for the ground state.
    pub state: usize,
    pub sets: Vec<usize>,
    pub s: Vec<f64>,
}

impl Default for ObservablesConfig {
    fn default() -> Self {
        Self {
            levels: 5,
            state: 3,
            sets: vec![1, 2],
            s: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityConfig {
    /// Points per axis.
    pub points: usize,
    /// Axis length in units of the larger rms distance of the state.
    pub extent: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            points: 101,
            extent: 3.0,
        }
    }
}

/// Execution settings; they never change the numbers written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub workers: usize,
    pub out: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            workers: 1,
            out: "out".into(),
        }
    }
}

fn invalid(key: &str, msg: impl Into<String>) -> Error {
    Error::config(key, msg)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn in_dimension_range(key: &str, d: f64) -> Result<()> {
    if (2.0..=3.0).contains(&d) {
        Ok(())
    } else {
        Err(invalid(key, format!("range outside [2,3]: {d}")))
    }
}

/// Parses and validates a configuration, filling defaults.
pub fn validate_config(text: &str) -> Result<RunConfig> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| {
        // The offending key is the left-hand side of the line the error points at.
        let key = e
            .span()
            .and_then(|span| text[..span.start].rsplit('\n').next().map(|head| (head, span.start)))
            .map(|(head, start)| {
                let line_end = text[start..].find('\n').map_or(text.len(), |k| start + k);
                let line = &text[start - head.len()..line_end];
                line.split('=').next().unwrap_or(line).trim().to_string()
            })
            .unwrap_or_else(|| "<syntax>".into());
        invalid(&key, e.message().to_string())
    })?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().to_string();
        let key = match msg.split('`').nth(1) {
            Some(k) if msg.starts_with("missing field") => {
                if path == "." || path.is_empty() {
                    k.to_string()
                } else {
                    format!("{path}.{k}")
                }
            }
            _ => path,
        };
        invalid(&key, msg)
    })?;
    cfg.check()?;
    Ok(cfg)
}

impl RunConfig {
    fn check(&self) -> Result<()> {
        for m in self.masses {
            positive("masses", m)?;
        }
        if self.masses[0] != self.masses[1] {
            return Err(invalid("masses", "particles 1 and 2 must be identical"));
        }
        positive("potential.range", self.potential.range)?;
        if let Some(d) = self.potential.target_de {
            if !(d > 2.0 && d < 3.0) {
                return Err(invalid("potential.target_de", format!("must lie in (2, 3), got {d}")));
            }
        }
        if let Some(s) = self.potential.strength {
            positive("potential.strength", s)?;
        }
        if self.potential.target_de.is_none() && self.potential.strength.is_none() {
            return Err(invalid("potential", "needs `target_de` or `strength`"));
        }
        let dim = &self.dimension;
        if let Some(values) = &dim.values {
            if dim.range.is_some() || dim.step.is_some() {
                return Err(invalid("dimension", "give either `values` or `range` with `step`"));
            }
            for &d in values {
                in_dimension_range("dimension.values", d)?;
            }
        }
        if let Some([lo, hi]) = dim.range {
            in_dimension_range("dimension.range", lo)?;
            in_dimension_range("dimension.range", hi)?;
            if lo > hi {
                return Err(invalid("dimension.range", "lower end above upper end"));
            }
            match dim.step {
                Some(step) => positive("dimension.step", step)?,
                None => return Err(invalid("dimension.step", "required with `dimension.range`")),
            }
        } else if dim.step.is_some() {
            return Err(invalid("dimension.range", "required with `dimension.step`"));
        }
        if self.basis.n_b < 8 {
            return Err(invalid("basis.n_b", "needs at least 8 functions"));
        }
        if self.basis.n_ch == 0 || self.basis.n_ch >= self.basis.n_b {
            return Err(invalid("basis.n_ch", "must lie in [1, n_b)"));
        }
        positive("grid.rho_min", self.grid.rho_min)?;
        if !(self.grid.rho_max > self.grid.rho_min) {
            return Err(invalid("grid.rho_max", "must exceed grid.rho_min"));
        }
        if self.grid.rho_points < 4 {
            return Err(invalid("grid.rho_points", "needs at least 4 points"));
        }
        if self.grid.radial_intervals < 8 {
            return Err(invalid("grid.radial_intervals", "needs at least 8 intervals"));
        }
        let obs = &self.observables;
        if obs.levels == 0 {
            return Err(invalid("observables.levels", "must be positive"));
        }
        if obs.state >= obs.levels {
            return Err(invalid("observables.state", "must be below observables.levels"));
        }
        if obs.sets.is_empty() {
            return Err(invalid("observables.sets", "must not be empty"));
        }
        for &set in &obs.sets {
            JacobiSet::from_index(set).map_err(|_| invalid("observables.sets", format!("no Jacobi set {set}")))?;
        }
        if obs.s.is_empty() {
            return Err(invalid("observables.s", "must not be empty"));
        }
        for &s in &obs.s {
            if !(s > 0.0 && s <= 1.0) {
                return Err(invalid("observables.s", format!("must lie in (0, 1], got {s}")));
            }
        }
        if self.density.points < 2 {
            return Err(invalid("density.points", "needs at least 2 points"));
        }
        positive("density.extent", self.density.extent)?;
        if self.run.workers == 0 {
            return Err(invalid("run.workers", "must be positive"));
        }
        Ok(())
    }

    /// Canonical TOML text; parses back to the same configuration.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// SHA-256 of the canonical text with the execution settings blanked,
    /// so that outputs do not depend on the worker count or directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.run = RunSection::default();
        let hash = Sha256::digest(c.to_text().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn mass_triple(&self) -> Result<MassTriple> {
        let [a, b, c] = self.masses;
        MassTriple::new(a, b, c)
    }

    /// Heavy-light reduced mass, the `mu` of the calibrated pair.
    pub fn heavy_light_mu(&self) -> f64 {
        let [h, _, l] = self.masses;
        h * l / (h + l)
    }

    /// Dimensions of a scan in configuration order; an empty list is an error.
    pub fn dimensions(&self) -> Result<Vec<f64>> {
        let dims = match (&self.dimension.values, self.dimension.range, self.dimension.step) {
            (Some(v), _, _) => v.clone(),
            (None, Some([lo, hi]), Some(step)) => {
                let n = ((hi - lo) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| ((lo + k as f64 * step) * 1e9).round() / 1e9).collect()
            }
            _ => Vec::new(),
        };
        if dims.is_empty() {
            return Err(invalid("dimension", "no dimensions to scan"));
        }
        Ok(dims)
    }

    pub fn sets(&self) -> Vec<JacobiSet> {
        self.observables
            .sets
            .iter()
            .map(|&s| JacobiSet::from_index(s).expect("validated"))
            .collect()
    }

    pub fn model(&self, potential: GaussianPotential) -> Result<ThreeBodyModel> {
        Ok(ThreeBodyModel {
            masses: self.mass_triple()?,
            potential,
            rho_min: self.grid.rho_min,
            rho_max: self.grid.rho_max,
            rho_points: self.grid.rho_points,
            layout: AngularLayout { n_b: self.basis.n_b },
            n_ch: self.basis.n_ch,
            radial: RadialOptions {
                intervals: self.grid.radial_intervals,
                couplings: if self.basis.couplings {
                    Couplings::Full
                } else {
                    Couplings::Diagonal
                },
                outer: if self.grid.threshold_boundary {
                    OuterBoundary::Threshold
                } else {
                    OuterBoundary::Dirichlet
                },
                ..Default::default()
            },
        })
    }
}
