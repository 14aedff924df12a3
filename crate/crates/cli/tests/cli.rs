use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BASE: &str = "masses = [133.0, 133.0, 6.0]\npotential.target_de = 2.75\n";

/// Small grids so that a three-body point takes seconds.
const QUICK: &str = "potential.strength = 0.16422824
grid.rho_max = 1e3
grid.rho_points = 60
grid.radial_intervals = 200
observables.levels = 2
observables.state = 0
density.points = 21
";

fn efimov(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_efimov"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn calibration_is_accurate_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let o = efimov(dir.path(), BASE, &["calibrate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read_to_string(dir.path().join("out/calibration.txt")).unwrap();
    let d_e: f64 = first
        .lines()
        .find_map(|l| l.strip_prefix("d_E = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((d_e - 2.75).abs() <= 1e-6);
    assert!(first.starts_with("# efimov calibration\n# config sha256 = "));
    let o = efimov(dir.path(), BASE, &["calibrate"]);
    assert!(o.status.success());
    assert_eq!(first, fs::read_to_string(dir.path().join("out/calibration.txt")).unwrap());
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("masses = [133.0, 133.0, 6.0]\npotential.target_de = 3.2\n", "calibrate", "potential.target_de"),
        (&format!("{BASE}dimension.range = [1.5, 3]\ndimension.step = 0.1\n"), "scan", "range outside [2,3]"),
        (&format!("{BASE}basis.n_ch = 3\nbasis.n_ch = 2\n"), "scan", "basis.n_ch"),
        (&format!("{BASE}basis.size = 3\n"), "scan", "basis.size"),
        (&format!("{BASE}dimension.values = []\n"), "twobody", "dimension"),
    ];
    for (config, cmd, needle) in cases {
        let o = efimov(dir.path(), config, &[cmd]);
        assert_eq!(o.status.code(), Some(2), "{config}");
        assert!(stderr(&o).contains(needle), "{}", stderr(&o));
    }
    let o = efimov(dir.path(), BASE, &["scan", "--set", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn twobody_table_is_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{BASE}dimension.values = [2.0, 2.5, 2.75, 3.0]\n");
    let o = efimov(dir.path(), &cfg, &["twobody", "--workers", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let one = fs::read_to_string(dir.path().join("out/twobody.tsv")).unwrap();
    let o = efimov(dir.path(), &cfg, &["twobody", "--workers", "3"]);
    assert!(o.status.success());
    assert_eq!(one, fs::read_to_string(dir.path().join("out/twobody.tsv")).unwrap());
    let rows: Vec<&str> = one.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("2.000000\t1\t"));
    assert!(rows[3].starts_with("3.000000\t0\tNaN"));
}

#[test]
fn scan_writes_spectrum_and_radii() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{BASE}{QUICK}dimension.values = [2.75, 2.7]\n");
    let o = efimov(dir.path(), &cfg, &["scan", "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spectrum = fs::read_to_string(dir.path().join("out/spectrum.tsv")).unwrap();
    let rows: Vec<&str> = spectrum.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("2.750000\t"));
    for name in ["radii.tsv", "radii_swave.tsv"] {
        let radii = fs::read_to_string(dir.path().join("out").join(name)).unwrap();
        assert!(radii.contains("# d\tset\tratio_jacobi\tratio_distance\tx2\ty2\ts\n"));
        let rows: Vec<Vec<&str>> = radii
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split('\t').collect())
            .collect();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.len() == 7));
    }
    let first = spectrum.clone();
    let o = efimov(dir.path(), &cfg, &["scan", "--workers", "1"]);
    assert!(o.status.success());
    assert_eq!(first, fs::read_to_string(dir.path().join("out/spectrum.tsv")).unwrap());
}

#[test]
fn density_writes_one_grid_per_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{BASE}{QUICK}dimension.values = [2.75]\n");
    let o = efimov(dir.path(), &cfg, &["density"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for set in [1, 2] {
        let text = fs::read_to_string(dir.path().join(format!("out/density_d2.7500_set{set}.tsv"))).unwrap();
        assert!(text.contains(&format!("# set = {set}\n")));
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 21);
        assert!(rows.iter().all(|r| r.split('\t').count() == 21));
    }
    let o = efimov(dir.path(), &cfg, &["density", "--set", "1"]);
    assert!(o.status.success());
}

#[test]
fn density_of_unbound_state_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{BASE}{QUICK}dimension.values = [3.0]\n");
    let o = efimov(dir.path(), &cfg, &["density"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not bound at d = 3"), "{}", stderr(&o));
}
