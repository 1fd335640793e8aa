use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = "\
dim = 2
init_noise = 0.1
steps = 40
t_min = 20
t_max = 200
mixture.0.weight = 0.5
mixture.0.mean = 4, 0
mixture.1.weight = 0.5
mixture.1.mean = -4, 0
reward = proximity
reward.target = 4, 0
";

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("pairdistill-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn pairdistill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairdistill")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn config_errors_exit_nonzero_with_line() {
    let dir = scratch("bad");
    let cfg = write_config(&dir, &format!("{CONFIG}tau = -1\n"));
    let out = pairdistill(&["run", &cfg]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 12") && err.contains("tau"), "{err}");

    let cfg = write_config(&dir, CONFIG);
    let out = pairdistill(&["run", &cfg, "--set", "colour=red"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key 'colour'"));

    assert!(!pairdistill(&["run", dir.join("missing.cfg").to_str().unwrap()]).status.success());
    assert!(!pairdistill(&["sweep-tau", &cfg, "--taus", "0.1"]).status.success());
    assert!(!pairdistill(&["sweep-tau", &cfg, "--taus", "0.1,-2"]).status.success());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn every_subcommand_writes_its_outputs() {
    let dir = scratch("ok");
    let cfg = write_config(&dir, CONFIG);
    let out_dir = |n: &str| dir.join(n).to_str().unwrap().to_owned();

    let out = pairdistill(&["run", &cfg, "--out", &out_dir("run"), "--steps", "10", "--set", "seed=4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.join("run/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 11);

    let out = pairdistill(&["baseline-sds", &cfg, "--out", &out_dir("sds")]);
    assert!(out.status.success());
    let trace = std::fs::read_to_string(dir.join("sds/trace.csv")).unwrap();
    assert!(trace.lines().nth(1).unwrap().contains(",,,,"), "{trace}");

    let out = pairdistill(&["sweep-tau", &cfg, "--taus", "0.01,0,inf", "--out", &out_dir("sweep")]);
    assert!(out.status.success());
    for sub in ["tau_0.01", "tau_0", "tau_inf"] {
        assert!(dir.join("sweep").join(sub).join("params.txt").is_file(), "{sub}");
    }
    assert_eq!(std::fs::read_to_string(dir.join("sweep/summary.csv")).unwrap().lines().count(), 4);

    let out = pairdistill(&["ablate-pairs", &cfg, "--out", &out_dir("pairs")]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("paired s_gap difference"));
    let gaps = std::fs::read_to_string(dir.join("pairs/s_gap.csv")).unwrap();
    assert_eq!(gaps.lines().count(), 41);
    std::fs::remove_dir_all(dir).unwrap();
}
