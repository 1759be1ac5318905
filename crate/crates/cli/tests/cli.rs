use std::path::Path;
use std::process::{Command, Output};

fn lagoon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagoon"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const SMOKE: [&str; 8] = [
    "optimize",
    "--synth-tide",
    "0,4,44700,0",
    "--prices",
    "flat:50",
    "--objective",
    "max-energy",
    "--lp",
];

#[test]
fn optimize_smoke_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = lagoon(dir.path(), &SMOKE);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["schedule.json", "series.csv", "model.lp"] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("max-energy: energy "), "{stdout}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut first = SMOKE.to_vec();
    first.extend(["--substep", "60", "--out-dir", "a"]);
    let mut second = SMOKE.to_vec();
    second.extend(["--substep", "60", "--out-dir", "b"]);
    assert_eq!(code(&lagoon(dir.path(), &first)), 0);
    assert_eq!(code(&lagoon(dir.path(), &second)), 0);
    for f in ["schedule.json", "series.csv", "model.lp"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn check_accepts_optimized_and_rejects_corrupted_schedule() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lagoon(dir.path(), &SMOKE)), 0);
    let ok = lagoon(dir.path(), &["check", "--schedule", "out/schedule.json"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));

    let path = dir.path().join("out/schedule.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let level = &mut doc["steps"][10]["z_in_end_m"];
    *level = serde_json::json!(level.as_f64().unwrap() + 0.25);
    std::fs::write(
        dir.path().join("bad.json"),
        serde_json::to_string(&doc).unwrap(),
    )
    .unwrap();
    let bad = lagoon(dir.path(), &["check", "--schedule", "bad.json"]);
    assert_eq!(code(&bad), 2);
    let listing = String::from_utf8(bad.stdout).unwrap();
    assert!(
        listing.lines().any(|l| l.starts_with("balance_10\t")),
        "{listing}"
    );
}

#[test]
fn simulate_and_storage_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lagoon(dir.path(), &SMOKE)), 0);
    let sim = lagoon(
        dir.path(),
        &[
            "simulate",
            "--schedule",
            "out/schedule.json",
            "--substep",
            "30",
        ],
    );
    assert_eq!(code(&sim), 0, "{}", String::from_utf8_lossy(&sim.stderr));
    assert!(dir.path().join("out/simulated.csv").is_file());
    assert!(dir.path().join("out/deviation.json").is_file());

    let st = lagoon(
        dir.path(),
        &["storage", "--synth-tide", "0,4,44700,0", "--out-dir", "s"],
    );
    assert_eq!(code(&st), 0);
    let text = std::fs::read_to_string(dir.path().join("s/storage.csv")).unwrap();
    assert_eq!(text.lines().count(), 49);
    assert!(text.starts_with("timestamp,z_out_m,storage_head_m,stored_energy_mwh\n"));
}

#[test]
fn export_lp_writes_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = lagoon(
        dir.path(),
        &[
            "export-lp",
            "--synth-tide",
            "0,4,44700,0",
            "--steps",
            "4",
            "--prices",
            "flat:10",
            "--lp",
            "m.lp",
        ],
    );
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("m.lp")).unwrap();
    assert!(text.starts_with("\\ ") && text.ends_with("End\n"));
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = lagoon(dir.path(), &["optimize", "--bogus"]);
    assert_eq!(code(&unknown), 1);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage:"));
    assert_eq!(code(&lagoon(dir.path(), &["optimize"])), 1);
    assert_eq!(
        code(&lagoon(dir.path(), &["optimize", "--synth-tide", "1,2"])),
        1
    );
    assert_eq!(
        code(&lagoon(
            dir.path(),
            &[
                "optimize",
                "--synth-tide",
                "0,4,44700,0",
                "--prices",
                "flat:x"
            ]
        )),
        1
    );
    assert_eq!(
        code(&lagoon(dir.path(), &["optimize", "--tide", "missing.csv"])),
        1
    );
    assert_eq!(
        code(&lagoon(
            dir.path(),
            &["check", "--schedule", "missing.json"]
        )),
        1
    );
    assert_eq!(code(&lagoon(dir.path(), &["--help"])), 0);
}

#[test]
fn csv_inputs_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut tide = String::from("timestamp,value\n");
    let mut prices = String::from("timestamp,value\n");
    for k in 0..=24 {
        let ts = format!("2024-03-01T{:02}:{:02}:00", k / 2, (k % 2) * 30);
        tide.push_str(&format!(
            "{ts},{}\n",
            3.0 * (k as f64 * 1800.0 * std::f64::consts::TAU / 44_700.0).sin()
        ));
        if k < 24 {
            prices.push_str(&format!(
                "{ts},{}\n",
                if k % 5 == 0 { -5.0 } else { 40.0 + k as f64 }
            ));
        }
    }
    std::fs::write(dir.path().join("tide.csv"), tide).unwrap();
    std::fs::write(dir.path().join("prices.csv"), prices).unwrap();
    std::fs::write(dir.path().join("lagoon.toml"), "n_turbines = 4\n").unwrap();
    let out = lagoon(
        dir.path(),
        &[
            "optimize",
            "--config",
            "lagoon.toml",
            "--tide",
            "tide.csv",
            "--prices",
            "prices.csv",
            "--objective",
            "max-revenue",
            "--dz",
            "0.02",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/schedule.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(doc["config"]["n_turbines"], 4);
    assert_eq!(doc["steps"].as_array().unwrap().len(), 24);
    assert_eq!(doc["steps"][1]["timestamp"], "2024-03-01T00:30:00");

    std::fs::write(
        dir.path().join("short.csv"),
        "timestamp,value\n2024-03-01T00:00:00,1\n",
    )
    .unwrap();
    let short = lagoon(
        dir.path(),
        &["optimize", "--tide", "tide.csv", "--prices", "short.csv"],
    );
    assert_eq!(code(&short), 1);
}

#[test]
fn infeasible_tide_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = lagoon(dir.path(), &["optimize", "--synth-tide", "0,4,44700,5"]);
    assert_eq!(code(&out), 2);
}
