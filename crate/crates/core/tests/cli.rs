use std::fs;
use std::process::Command;

use mutcat::experiment::{parse_config, run_experiment, PARTIAL_MARKER};

fn mutcat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mutcat"))
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let status = mutcat()
            .args([
                "infinite-rate",
                "--reps",
                "20",
                "--seed",
                "17",
                "--snapshots",
                "0.25,0.5",
            ])
            .args(["--sites", "3", "--x0", "1,0;0,1;0,0", "--y", "0,1;0,0;0,0"])
            .arg("--output")
            .arg(&out)
            .env_remove("MUTCAT_OUT_DIR")
            .status()
            .unwrap();
        assert!(status.success());
        (
            fs::read(out.join("infinite-rate.csv")).unwrap(),
            fs::read(out.join("events.csv")).unwrap(),
        )
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let text = String::from_utf8(a.0).unwrap();
    assert!(text.starts_with("rep,t,site,present_type,mass\n"));
    assert_eq!(text.lines().count(), 1 + 20 * 3 * 4);
}

#[test]
fn oracle_subcommand_passes_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = mutcat()
        .arg("oracle")
        .env("MUTCAT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    assert!(csv.starts_with("quantity,delta,closed_form,quadrature,abs_diff\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(!dir.path().join(PARTIAL_MARKER).exists());
}

#[test]
fn invalid_flags_are_rejected_with_the_key() {
    let out = mutcat().args(["duality", "--epsilon", "-1"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn help_lists_every_subcommand() {
    let out = mutcat().arg("--help").output().unwrap();
    let help = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "oracle",
        "finite-rate",
        "infinite-rate",
        "duality",
        "gamma-sweep",
        "moments",
    ] {
        assert!(help.contains(sub), "{sub} missing from --help");
    }
}

#[test]
fn simulator_failure_leaves_partial_marker() {
    let dir = tempfile::tempdir().unwrap();
    let kernel = dir.path().join("growth.csv");
    fs::write(&kernel, "50\n").unwrap();
    let text = format!(
        "kind = finite-rate\nsites = 1\nx0 = 1,0\ny = 0,0\nreps = 2\nkernel = custom:{}\noutput = {}\n",
        kernel.display(),
        dir.path().join("out").display()
    );
    let cfg = parse_config(&text).unwrap();
    std::env::remove_var("MUTCAT_OUT_DIR");
    assert!(run_experiment(&cfg).is_err());
    let out = dir.path().join("out");
    assert!(out.join(PARTIAL_MARKER).exists());
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"partial\"") && manifest.contains("blew up"));
}

#[test]
fn config_file_round_trip_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.conf");
    fs::write(&path, "kind = moments\nreps = 50\ntimes = 0.5, 1\n").unwrap();
    let out = mutcat()
        .arg("run")
        .arg("--config")
        .arg(&path)
        .arg("--print-config")
        .output()
        .unwrap();
    assert!(out.status.success());
    let printed = String::from_utf8(out.stdout).unwrap();
    let cfg = parse_config(&printed).unwrap();
    assert_eq!(cfg.reps, 50);
    assert_eq!(cfg.emit(), printed.trim_end());
}
