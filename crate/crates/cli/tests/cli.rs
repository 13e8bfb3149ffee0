use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dnls_cli::config::{bundled, RunConfig, BUNDLED};
use dnls_core::grids::{read_snapshot, write_snapshot, GridSpec, RadialField, Space};

const SMALL_PROBE: &str = r#"
rng_seed = 1

[model]
n = 2
alpha = 0.5
sign = "defocusing"
p = 2.0

[grid]
size = 3000
r_max = 650.0
k_max = 4.0

[initial_data]
kind = "gaussian"
width = 3.0
amplitude = 0.05
band = [0.8, 1.4]

[schedule]
t_end = 20.0
snapshot_times = [5.0, 20.0]
"#;

fn dnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn bundled_configs_parse() {
    for (name, _) in BUNDLED {
        let cfg = bundled(name).unwrap();
        assert_eq!(cfg.schedule.t_end, 200.0);
        assert_eq!(cfg.model.comparison, name.ends_with("shortrange"), "{name}");
    }
    assert!(bundled("examples/2d_p2_longrange.toml").is_ok());
    assert!(bundled("nope").is_err());
}

#[test]
fn dimension_four_is_a_parse_error_with_location() {
    let bad = SMALL_PROBE.replace("n = 2", "n = 4");
    let err = format!("{:#}", RunConfig::parse(&bad).unwrap_err());
    assert!(err.contains("dimension must be 2 or 3"), "{err}");
    assert!(err.contains("line"), "{err}");
    assert!(err.contains('n'), "{err}");
}

#[test]
fn unknown_fields_are_named() {
    let bad = SMALL_PROBE.replace("p = 2.0", "p = 2.0\npower = 3");
    let err = format!("{:#}", RunConfig::parse(&bad).unwrap_err());
    assert!(err.contains("power"), "{err}");
}

#[test]
fn json_is_accepted_and_round_trips() {
    let cfg = RunConfig::parse(SMALL_PROBE).unwrap();
    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(RunConfig::parse(&json).unwrap(), cfg);
    assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn three_dimensional_p_one_and_a_half_is_rejected_by_the_probe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL_PROBE.replace("n = 2", "n = 3").replace("p = 2.0", "p = 1.5");
    let path = write(dir.path(), "c.toml", &cfg);
    let out = dnls(&["probe", "--config", path.to_str().unwrap(), "--output", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    let msg = text(&out);
    assert!(msg.contains("outside admissible range"), "{msg}");
    assert!(msg.contains("q >= 3 in three dimensions"), "{msg}");
}

#[test]
fn probe_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "c.toml", SMALL_PROBE);
    // the resolved config (including the output directory) is embedded, so
    // both runs write to the same path and the first is moved aside
    let out_dir = dir.path().join("out");
    let run = |threads: &str| {
        let o = dnls(&[
            "probe",
            "--config",
            path.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", text(&o));
        assert!(text(&o).contains("verdict: "), "{}", text(&o));
    };
    run("1");
    let a = dir.path().join("first");
    std::fs::rename(&out_dir, &a).unwrap();
    run("2");
    for file in ["report.json", "series.csv", "psi_t5.bin", "psi_t5.json", "psi_t20.bin"] {
        let x = std::fs::read(a.join(file)).unwrap();
        assert!(x == std::fs::read(out_dir.join(file)).unwrap(), "{file} differs between runs");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["provenance"]["binary_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(report["provenance"]["config"]["model"]["p"], 2.0);
    assert!(report["report"]["verdict"].is_string());
    let csv = std::fs::read_to_string(a.join("series.csv")).unwrap();
    assert!(csv.starts_with("# dnls "));
    assert!(csv.lines().any(|l| l == "t,B,C,mass,supnorm"));
    let psi = read_snapshot(std::fs::File::open(a.join("psi_t20.bin")).unwrap(), None).unwrap();
    assert_eq!(psi.len(), 3000);
}

fn transform_config(dir: &Path) -> (PathBuf, GridSpec) {
    let cfg = r#"
[model]
n = 3
alpha = 0.5
sign = "defocusing"
p = 1.3
"#;
    (write(dir, "t.toml", cfg), GridSpec::with_defaults(3).unwrap())
}

fn save(path: &Path, f: &RadialField) {
    write_snapshot(std::fs::File::create(path).unwrap(), f).unwrap();
}

#[test]
fn genft_round_trip_on_a_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, grid) = transform_config(dir.path());
    // a wide Gaussian: the generalized spectrum of a field with f(0) != 0
    // decays like 1/k², and the part beyond K_max is lost in the round trip
    let f = RadialField::from_real_fn(&grid, Space::Position, |r| (-r * r / 18.0).exp());
    let input = dir.path().join("g.bin");
    save(&input, &f);
    let out = dir.path().join("o");
    let o = dnls(&[
        "transform",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--which",
        "genft",
    ]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("|in|"));
    let sharp = out.join("genft.bin");
    let o = dnls(&[
        "transform",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--input",
        sharp.to_str().unwrap(),
        "--which",
        "genft-adjoint",
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let back = read_snapshot(std::fs::File::open(out.join("genft_adjoint.bin")).unwrap(), Some(&grid)).unwrap();
    let err = back.sub(&f).unwrap().l2_norm() / f.l2_norm();
    assert!(err <= 1e-3, "{err:e}");
}

#[test]
fn waveop_of_zero_and_fourier_involution() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, grid) = transform_config(dir.path());
    let zero = dir.path().join("z.bin");
    save(&zero, &RadialField::zeros(&grid, Space::Position));
    let out = dir.path().join("o");
    let o = dnls(&[
        "transform",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--input",
        zero.to_str().unwrap(),
        "--which",
        "waveop",
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let w = read_snapshot(std::fs::File::open(out.join("waveop.bin")).unwrap(), None).unwrap();
    assert!(w.values.iter().all(|v| v.norm() == 0.0));

    let f = RadialField::from_real_fn(&grid, Space::Position, |r| (1.0 + r * r) * (-r * r / 3.0).exp());
    let input = dir.path().join("f.bin");
    save(&input, &f);
    let o = dnls(&[
        "transform",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--which",
        "fourier",
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let once = out.join("fourier.bin");
    let twice_dir = dir.path().join("o2");
    let o = dnls(&[
        "transform",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        twice_dir.to_str().unwrap(),
        "--input",
        once.to_str().unwrap(),
        "--which",
        "fourier",
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let back = read_snapshot(std::fs::File::open(twice_dir.join("fourier.bin")).unwrap(), None).unwrap();
    assert_eq!(back.space(), Space::Position);
    assert!(back.sub(&f).unwrap().l2_norm() <= 1e-6 * f.l2_norm());
}

#[test]
fn transform_grid_mismatch_names_both_headers() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, _) = transform_config(dir.path());
    let other = GridSpec::new(3, 128, 10.0, 5.0).unwrap();
    let input = dir.path().join("f.bin");
    save(&input, &RadialField::zeros(&other, Space::Position));
    let o =
        dnls(&["transform", "--config", cfg.to_str().unwrap(), "--input", input.to_str().unwrap(), "--which", "genft"]);
    assert!(!o.status.success());
    let msg = text(&o);
    assert!(msg.contains("N=128") && msg.contains("N=4096"), "{msg}");
}

#[test]
fn evolve_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL_PROBE.replace("t_end = 20.0", "t_end = 5.0").replace("p = 2.0", "p = 2.0\ncomparison = true")
        + "\n[sweep]\np = [1.5, 3.0]\nalpha = [0.5]\nsign = [\"defocusing\"]\n";
    let path = write(dir.path(), "c.toml", &cfg);
    let out = dir.path().join("ev");
    let o = dnls(&["evolve", "--config", path.to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(out.join("evolve.json").exists() && out.join("psi_t5.bin").exists());

    let out = dir.path().join("sw");
    let o = dnls(&["sweep", "--config", path.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o));
    let index: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("index.json")).unwrap()).unwrap();
    let cells = index["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    assert_eq!(cells[1]["p"], 3.0);
    assert!(out.join("cell_001").join("report.json").exists());
}

#[test]
fn missing_config_is_an_error() {
    let o = dnls(&["probe"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("--config"));
}
