//! Orchestration of the calibrate, twobody, scan, radii and density runs.
//!
//! Every run returns its output files as `(name, contents)` pairs so that
//! the caller decides where they go. Contents depend only on the
//! configuration: scan points run in parallel and are assembled in order.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::kinematics::{jacobi_scaling, JacobiSet};
use crate::observables::{radii_from, radii_table, DeformedRadii, GridSpec, Observables, RadialMoments};
use crate::potentials2b::{calibrate_depth, critical_dimension, twobody_bound_states, GaussianPotential};
use crate::radial3b::{coupled_bound_states, spectrum_line, spectrum_table, SpectrumRow};

/// Tolerance on the achieved critical dimension of a calibration.
pub const CALIBRATION_TOLERANCE: f64 = 1e-6;

pub type OutputFile = (String, String);

fn header(cfg: &RunConfig, kind: &str) -> Vec<String> {
    vec![format!("efimov {kind}"), format!("config sha256 = {}", cfg.digest())]
}

/// The configured depth, or the depth calibrated to `potential.target_de`.
pub fn resolve_potential(cfg: &RunConfig) -> Result<GaussianPotential> {
    match (cfg.potential.strength, cfg.potential.target_de) {
        (Some(s), _) => GaussianPotential::new(s, cfg.potential.range),
        (None, Some(d)) => calibrate_depth(cfg.potential.range, cfg.heavy_light_mu(), d),
        (None, None) => Err(Error::config("potential", "needs `target_de` or `strength`")),
    }
}

/// Calibration record: `key = value` lines with the depth and the dimension it achieves.
pub fn run_calibrate(cfg: &RunConfig) -> Result<OutputFile> {
    let target = cfg
        .potential
        .target_de
        .ok_or_else(|| Error::config("potential.target_de", "required for calibration"))?;
    let mu = cfg.heavy_light_mu();
    let pot = calibrate_depth(cfg.potential.range, mu, target)?;
    let achieved = critical_dimension(&pot, mu)?;
    if (achieved - target).abs() > CALIBRATION_TOLERANCE {
        return Err(Error::numerical(format!(
            "calibrated depth gives d_E = {achieved}, target {target}"
        )));
    }
    let mut out = String::new();
    for h in header(cfg, "calibration") {
        let _ = writeln!(out, "# {h}");
    }
    let _ = writeln!(out, "S = {:.12e}", pot.depth);
    let _ = writeln!(out, "b = {}", pot.range);
    let _ = writeln!(out, "mu = {:.12e}", mu);
    let _ = writeln!(out, "target_de = {target}");
    let _ = writeln!(out, "d_E = {achieved:.9}");
    let _ = writeln!(out, "tolerance = {CALIBRATION_TOLERANCE:e}");
    if let Some(committed) = cfg.potential.strength {
        let _ = writeln!(out, "committed_S = {committed}");
        let d = critical_dimension(&GaussianPotential::new(committed, cfg.potential.range)?, mu)?;
        let _ = writeln!(out, "committed_d_E = {d:.9}");
    }
    Ok(("calibration.txt".into(), out))
}

/// Heavy-light bound states at each scan dimension.
pub fn run_twobody(cfg: &RunConfig) -> Result<OutputFile> {
    let pot = resolve_potential(cfg)?;
    let mu = cfg.heavy_light_mu();
    let dims = cfg.dimensions()?;
    let rows: Vec<String> = dims
        .par_iter()
        .map(|&d| match twobody_bound_states(&pot, mu, d) {
            Ok(spec) => {
                let e = spec.ground().unwrap_or(f64::NAN);
                format!("{d:.6}\t{}\t{e:.10e}\n", spec.energies.len())
            }
            Err(e) => format!("# d = {d:.6} failed: {e}\n"),
        })
        .collect();
    let mut out = String::new();
    for h in header(cfg, "two-body spectrum") {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("# d\tn_bound\tE2\n");
    out.extend(rows);
    Ok(("twobody.tsv".into(), out))
}

/// Everything computed at one scan dimension.
struct ScanPoint {
    row: SpectrumRow,
    moments: Option<RadialMoments>,
}

fn scan_point(cfg: &RunConfig, pot: GaussianPotential, d: f64, with_radii: bool) -> Result<ScanPoint> {
    let model = cfg.model(pot)?;
    let twobody = model.twobody_threshold(d)?;
    let surface = model.surface(d)?;
    let states = coupled_bound_states(&surface, twobody, cfg.observables.levels, &model.radial)?;
    let moments = match states.get(cfg.observables.state) {
        Some(state) if with_radii => Some(Observables::new(&surface, model.masses)?.radial_moments(state)?),
        _ => None,
    };
    Ok(ScanPoint {
        row: SpectrumRow {
            dimension: d,
            twobody,
            states,
        },
        moments,
    })
}

fn scan(cfg: &RunConfig, with_radii: bool) -> Result<Vec<(f64, Result<ScanPoint>)>> {
    let pot = resolve_potential(cfg)?;
    let dims = cfg.dimensions()?;
    Ok(dims
        .par_iter()
        .map(|&d| (d, scan_point(cfg, pot, d, with_radii)))
        .collect())
}

fn radii_files(cfg: &RunConfig, points: &[(f64, Result<ScanPoint>)]) -> Result<Vec<OutputFile>> {
    let masses = cfg.mass_triple()?;
    let state = cfg.observables.state;
    let mut full = Vec::new();
    let mut swave = Vec::new();
    let mut notes = Vec::new();
    for (d, point) in points {
        match point {
            Ok(ScanPoint { moments: Some(m), .. }) => {
                for set in cfg.sets() {
                    for &s in &cfg.observables.s {
                        let r = radii_from(m, &masses, set, s);
                        full.push((*d, r));
                        let ratio = (r.pure_y2 / r.pure_x2).sqrt();
                        swave.push((
                            *d,
                            DeformedRadii {
                                x2: r.pure_x2,
                                y2: r.pure_y2,
                                ratio,
                                physical_ratio: r.physical_ratio / r.ratio * ratio,
                                ..r
                            },
                        ));
                    }
                }
            }
            Ok(_) => notes.push(format!("d = {d:.6}: state {state} not bound")),
            Err(e) => notes.push(format!("d = {d:.6} failed: {e}")),
        }
    }
    let mut head = header(cfg, "radii");
    head.push(format!("state = {state}"));
    let mut full_head = head.clone();
    full_head.push("estimator = total wave function".into());
    let mut swave_head = head;
    swave_head.push("estimator = s-wave projection in each set".into());
    for n in &notes {
        full_head.push(n.clone());
        swave_head.push(n.clone());
    }
    Ok(vec![
        ("radii.tsv".into(), radii_table(&full, &full_head)),
        ("radii_swave.tsv".into(), radii_table(&swave, &swave_head)),
    ])
}

/// Spectrum table plus both radii tables; failed points appear as `#` rows.
pub fn run_scan(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    let points = scan(cfg, true)?;
    let n = cfg.observables.levels;
    let mut spectrum = spectrum_table(&[], n, &header(cfg, "three-body spectrum"));
    for (d, point) in &points {
        match point {
            Ok(p) => spectrum.push_str(&spectrum_line(&p.row, n)),
            Err(e) => spectrum.push_str(&format!("# d = {d:.6} failed: {e}\n")),
        }
    }
    let mut files = vec![("spectrum.tsv".to_string(), spectrum)];
    files.extend(radii_files(cfg, &points)?);
    Ok(files)
}

/// The two radii tables alone.
pub fn run_radii(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    radii_files(cfg, &scan(cfg, true)?)
}

/// Grid axes covering `extent` times the larger rms distance of the state.
pub fn density_axes(radii: &DeformedRadii, cfg: &RunConfig, set: JacobiSet) -> Result<GridSpec> {
    let sc = jacobi_scaling(&cfg.mass_triple()?, set);
    let rx = radii.x2.sqrt() / sc.c_x;
    let ry = radii.y2.sqrt() / sc.c_y;
    let ext = cfg.density.extent * rx.max(ry);
    Ok(GridSpec {
        rx_max: ext,
        ry_max: ext,
        nx: cfg.density.points,
        ny: cfg.density.points,
    })
}

fn density_point(cfg: &RunConfig, pot: GaussianPotential, d: f64) -> Result<Vec<OutputFile>> {
    let model = cfg.model(pot)?;
    let k = cfg.observables.state;
    let twobody = model.twobody_threshold(d)?;
    let surface = model.surface(d)?;
    let states = coupled_bound_states(&surface, twobody, k + 1, &model.radial)?;
    let state = states
        .get(k)
        .ok_or_else(|| Error::Precondition(format!("state {k} not bound at d = {d}")))?;
    let obs = Observables::new(&surface, model.masses)?;
    let mut files = Vec::new();
    for set in cfg.sets() {
        let radii = obs.msr_jacobi(state, set, 1.0)?;
        let grid = obs.density_grid(state, set, density_axes(&radii, cfg, set)?)?;
        let mut head = header(cfg, "density");
        head.push(format!("state = {k}"));
        let name = format!("density_d{d:.4}_set{}.tsv", set.index());
        files.push((name, grid.render(&head)));
    }
    Ok(files)
}

/// One density grid per `(d, set)` at `s = 1`.
pub fn run_density(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    let pot = resolve_potential(cfg)?;
    let dims = cfg.dimensions()?;
    let per_d: Vec<Result<Vec<OutputFile>>> = dims.par_iter().map(|&d| density_point(cfg, pot, d)).collect();
    let mut files = Vec::new();
    for r in per_d {
        files.extend(r?);
    }
    Ok(files)
}
