use std::path::Path;
use std::process::{Command, Output};

use carbon_fbsde::{exit, Experiment, ExperimentConfig};

fn carbon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carbon-fbsde")).current_dir(dir).args(args).output().expect("spawn carbon-fbsde")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn lists_every_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = carbon(dir.path(), &["--list-experiments"]);
    assert_eq!(out.status.code(), Some(exit::OK as i32));
    let text = String::from_utf8(out.stdout).unwrap();
    for e in Experiment::ALL {
        assert!(text.contains(e.name()), "{} missing from {text}", e.name());
    }
}

#[test]
fn usage_errors_exit_with_usage_status() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown_experiment.conf", "experiment = figure2\n"),
        ("unknown_key.conf", "experiment = bau_oracle\nratio = 2\n"),
        ("bad_value.conf", "experiment = bau_oracle\nsigma = -0.3\n"),
        ("no_experiment.conf", "seed = 3\n"),
    ];
    for (name, body) in cases {
        let conf = write_config(dir.path(), name, body);
        let out = carbon(dir.path(), &["run", &conf]);
        assert_eq!(out.status.code(), Some(exit::USAGE as i32), "{name}");
        assert!(!out.stderr.is_empty(), "{name}");
    }
    assert_eq!(carbon(dir.path(), &["run", "missing.conf"]).status.code(), Some(exit::USAGE as i32));
    assert_eq!(carbon(dir.path(), &[]).status.code(), Some(exit::USAGE as i32));
    assert_eq!(carbon(dir.path(), &["--threads", "0", "run", "missing.conf"]).status.code(), Some(exit::USAGE as i32));
}

#[test]
fn header_parses_back_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::quick(Experiment::BauOracle);
    cfg.output_dir = "out".into();
    let conf = write_config(dir.path(), "bau.conf", &cfg.render());
    let out = carbon(dir.path(), &["run", &conf, "--seed", "17"]);
    // The coarse grid may miss the oracle tolerance; the tables are written either way.
    assert!(matches!(out.status.code(), Some(0) | Some(1)), "{}", String::from_utf8_lossy(&out.stderr));
    cfg.seed = 17;
    for entry in std::fs::read_dir(dir.path().join("out")).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(text.starts_with("# carbon-fbsde "));
        assert_eq!(ExperimentConfig::from_header(&text).unwrap(), cfg);
    }
}

#[test]
fn failed_check_exits_with_check_status() {
    let dir = tempfile::tempdir().unwrap();
    // The GBM control decays too slowly for its check.
    let mut cfg = ExperimentConfig::quick(Experiment::DiracMass);
    cfg.output_dir = "out".into();
    let conf = write_config(dir.path(), "dirac.conf", &cfg.render());
    let out = carbon(dir.path(), &["run", &conf]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(exit::CHECK_FAILED as i32), "{stderr}");
    assert!(stderr.contains("dirac_gbm_halving_decay"), "{stderr}");
}

#[test]
fn outputs_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::quick(Experiment::ToyInvariants);
    cfg.output_dir = "out".into();
    let conf = write_config(dir.path(), "toy.conf", &cfg.render());
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let cwd = dir.path().join(threads);
        std::fs::create_dir(&cwd).unwrap();
        let out = carbon(&cwd, &["--threads", threads, "run", &conf]);
        assert!(matches!(out.status.code(), Some(0) | Some(1)));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(cwd.join("out"))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        runs.push(files);
    }
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
}
