use std::fs;
use std::path::Path;
use std::process::Command;

use attractor_forge::noise::read_path;

fn forge(args: &[&str], config: &str, dir: &Path) -> (i32, String) {
    let cfg = dir.join("experiment.cfg");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_attractor-forge"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env("ATTRACTOR_FORGE_THREADS", "1")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

const CERTIFY_PME: &str = "\
[grid]
n = 100

[drift]
family = pme
r = 3
eta = 0

[certify]
condition = H2'
trials = 50
";

const RATES_QUARTIC: &str = "\
[grid]
n = 2

[drift]
family = pointwise
p = 4
lambda_scale = SCALE

[noise]
kind = zero
dt = 0.01
t_start = 0
t_end = 20

[solver]
dt = 0.01

[rates]
x = const:1
y = const:-1
times = 1, 5, 20
";

#[test]
fn certify_pme_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, log) = forge(&["certify"], CERTIFY_PME, dir.path());
    assert_eq!(code, 0, "{log}");
    let csv = fs::read_to_string(dir.path().join("out/certify.csv")).unwrap();
    assert!(csv.starts_with("## attractor-forge v"));
    assert!(csv.contains("##   trials = 50"));
    let row = csv.lines().find(|l| l.starts_with("H2'")).unwrap();
    assert!(row.contains(",true,"), "{row}");
}

#[test]
fn pullback_outside_noise_window_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
[grid]
n = 8

[drift]
family = rde
p = 2

[noise]
kind = qwiener
t_start = -5
t_end = 0

[pullback]
s_list = -1, -10
";
    let (code, log) = forge(&["pullback"], cfg, dir.path());
    assert_eq!(code, 2, "{log}");
}

#[test]
fn rates_flag_injected_violation() {
    let dir = tempfile::tempdir().unwrap();
    let (code, log) = forge(&["rates"], &RATES_QUARTIC.replace("SCALE", "1"), dir.path());
    assert_eq!(code, 0, "{log}");
    let (code, log) = forge(&["rates"], &RATES_QUARTIC.replace("SCALE", "2"), dir.path());
    assert_eq!(code, 1, "{log}");
    let csv = fs::read_to_string(dir.path().join("out/rates.csv")).unwrap();
    assert!(csv.contains("# kind=polynomial"));
}

#[test]
fn runs_are_deterministic() {
    let cfg = "\
[experiment]
save_noise = true

[grid]
n = 8

[drift]
family = rde
p = 2

[noise]
kind = qwiener
t_start = -3
t_end = 0

[pullback]
s_list = -0.5, -1, -3
bundle_size = 4
";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(forge(&["pullback", "--seed", "9"], cfg, a.path()).0, 0);
    assert_eq!(forge(&["pullback", "--seed", "9"], cfg, b.path()).0, 0);
    for name in ["pullback.csv", "eta0.csv", "noise.txt"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    let text = fs::read_to_string(a.path().join("out/pullback.csv")).unwrap();
    assert!(text.contains("##   seed = 9"));
}

#[test]
fn simulate_writes_trajectory_and_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
[grid]
n = 16

[drift]
family = pme
r = 3

[noise]
kind = qwiener
t_start = 0
t_end = 1

[simulate]
initial = sine:2:1
";
    let (code, log) = forge(&["simulate"], cfg, dir.path());
    assert_eq!(code, 0, "{log}");
    let traj = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let header = traj.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "t,norm_H_S,norm_V_S,norm_S_S,newton_iters");
    assert!(dir.path().join("out/energy.csv").exists());
}

#[test]
fn noise_gen_output_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "\
[grid]
n = 6

[noise]
kind = fbm
hurst = 0.3
t_start = -1
t_end = 1
dt = 0.05
";
    let (code, log) = forge(&["noise-gen", "--seed", "4"], cfg, dir.path());
    assert_eq!(code, 0, "{log}");
    let text = fs::read(dir.path().join("out/noise.txt")).unwrap();
    let path = read_path(text.as_slice()).unwrap();
    assert_eq!(path.seed(), attractor_forge::rng::derive_seed(4, 0));
    assert_eq!(path.snapshots().len(), 41);
}

#[test]
fn bad_config_and_thread_setting_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, log) = forge(&["certify"], &CERTIFY_PME.replace("n = 100", "n = 100\nn = 3"), dir.path());
    assert_eq!(code, 2);
    assert!(log.contains("line 3"), "{log}");
    let cfg = dir.path().join("experiment.cfg");
    let out = Command::new(env!("CARGO_BIN_EXE_attractor-forge"))
        .args(["certify", "--config"])
        .arg(&cfg)
        .env("ATTRACTOR_FORGE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
