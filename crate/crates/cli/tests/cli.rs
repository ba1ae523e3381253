use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bohmchaos"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn spectrum_of_small_uncoupled_basis() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "k2.toml", "epsilon = 0\ncutoff = 2\n");
    let o = run(tmp.path(), &["spectrum", "--config", &cfg, "--out", "sp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got: Vec<f64> = csv_rows(&tmp.path().join("sp/spectrum.csv"))
        .iter()
        .map(|r| r[1].parse().unwrap())
        .collect();
    let wy = std::f64::consts::FRAC_1_SQRT_2;
    let mut want: Vec<f64> = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        .iter()
        .map(|&(nx, ny)| (nx as f64 + 0.5) + (ny as f64 + 0.5) * wy)
        .collect();
    want.sort_by(f64::total_cmp);
    assert_eq!(got.len(), 6);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-12, "{g} vs {w}");
    }
    let m = manifest(&tmp.path().join("sp"));
    assert_eq!(m["subcommand"], "spectrum");
    assert_eq!(m["summary"]["dim"], 6);
}

#[test]
fn eav_time_average_at_strong_coupling() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "e.toml", "epsilon = 0.09\n[run]\nsample_dt = 100\n");
    let o = run(tmp.path(), &["eav", "--config", &cfg, "--out", "e"]);
    assert!(o.status.success());
    let avg = manifest(&tmp.path().join("e"))["summary"]["time_average"].as_f64().unwrap();
    assert!((avg - 3.29).abs() < 0.05, "{avg}");
}

#[test]
fn uncoupled_rotation_number_is_constant() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "rn.toml",
        "epsilon = 0\n[run]\nscan_points = 5\n[rotation]\ncrossings = 200\n",
    );
    let o = run(tmp.path(), &["rn", "--config", &cfg, "--out", "rn"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&tmp.path().join("rn/rn.csv"));
    assert_eq!(rows.len(), 5);
    let target = 2.0 - std::f64::consts::SQRT_2;
    for r in rows {
        let rn: f64 = r[1].parse().unwrap();
        assert!((rn - target).abs() < 1e-3, "{rn}");
        assert_eq!(r[3], "0");
    }
}

#[test]
fn manifest_config_reproduces_bytes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "f.toml",
        "epsilon = 0.05\nseed = 11\nt_end = 30\n[run]\nensemble = 3\nfraction_step = 5\n",
    );
    let o = run(tmp.path(), &["fraction", "--config", &cfg, "--out", "a"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&tmp.path().join("a"));
    let recorded = write(tmp.path(), "recorded.toml", m["config"].as_str().unwrap());
    let o = run(tmp.path(), &["fraction", "--config", &recorded, "--out", "b"]);
    assert!(o.status.success());
    let artifacts: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(artifacts.contains(&"trajectories/traj_0002.csv"));
    for name in artifacts.iter().filter(|n| n.ends_with(".csv")) {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let again = manifest(&tmp.path().join("b"));
    assert_eq!(again["seed"], 11);
    assert_eq!(again["summary"], m["summary"]);
}

#[test]
fn flags_override_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", "epsilon = 0.05\nseed = 3\n");
    let o = run(
        tmp.path(),
        &["levels", "--config", &cfg, "--epsilon", "0.02", "--seed", "8", "--t-end", "2", "--out", "l"],
    );
    assert!(o.status.success());
    let m = manifest(&tmp.path().join("l"));
    assert_eq!(m["epsilon"], 0.02);
    assert_eq!(m["seed"], 8);
    assert_eq!(csv_rows(&tmp.path().join("l/levels.csv")).len(), 5);
}

#[test]
fn config_errors_exit_2_with_line() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["spectrum", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon required"));

    let cfg = write(tmp.path(), "u.toml", "epsilon = 0.05\n[run]\nensembl = 4\n");
    let o = run(tmp.path(), &["spectrum", "--config", &cfg, "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("ensembl"), "{err}");

    let cfg = write(tmp.path(), "n.toml", "epsilon = 0.05\n[params]\nomega_y = -1\n");
    let o = run(tmp.path(), &["spectrum", "--config", &cfg, "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = run(tmp.path(), &["spectrum", "--config", "missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn escaping_section_exits_4_with_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "esc.toml",
        "epsilon = 0.1\n[run]\nenergy = 5.0\norbits = 4\ncrossings = 50\n",
    );
    let o = run(tmp.path(), &["section", "--config", &cfg, "--out", "s"]);
    assert_eq!(o.status.code(), Some(4));
    let m = manifest(&tmp.path().join("s"));
    assert_eq!(m["summary"]["escaped"], 4);
    assert!(m["summary"]["dominated"].is_string());
    assert!(tmp.path().join("s/orbits.csv").exists());
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "epsilon = 0.1\n[run]\nenergy = 5.0\n");
    let o = run(tmp.path(), &["rn", "--config", &cfg, "--out", "r"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!tmp.path().join("r/manifest.json").exists());
}

#[test]
fn density_writes_pgm_with_sidecar() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "d.toml",
        "epsilon = 0.05\n[run]\ntimes = [0, 10]\nresolution = 40\npgm = \"ascii\"\n",
    );
    let o = run(tmp.path(), &["density", "--config", &cfg, "--out", "d"]);
    assert!(o.status.success());
    let pgm = fs::read_to_string(tmp.path().join("d/density_001.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n40 40\n255\n"));
    let side: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("d/density_001.pgm.json")).unwrap()).unwrap();
    let raw = csv_rows(&tmp.path().join("d/density_001.csv"));
    let peak = raw.iter().map(|r| r[2].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert_eq!(side["scale"].as_f64().unwrap(), peak);
    assert_eq!(raw.len(), 1600);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&path).unwrap();
            let cfg = bohmchaos_cli::parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let again = bohmchaos_cli::parse_config(&cfg.canonical()).unwrap();
            assert_eq!(again, cfg, "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
