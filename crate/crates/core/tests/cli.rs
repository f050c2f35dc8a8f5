use std::path::Path;
use std::process::{Command, Output};

fn hbl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbl"))
        .args(args)
        .env_remove("HBL_SEED")
        .env_remove("HBL_THREADS")
        .output()
        .expect("binary runs")
}

fn body(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn cc_twice_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let common = ["cc", "--steps", "16", "--paths", "20000", "--steps-fine", "1024", "--seed", "7"];
    let out = hbl(&[&common[..], &["--threads", "1", "--out", a.to_str().unwrap()]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = hbl(&[&common[..], &["--threads", "3", "--out", b.to_str().unwrap()]].concat());
    assert!(out.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = body(&a);
    assert!(text.contains("# seed = 7"));
    assert!(text.contains("N,M,estimate,std_error,target,pass\n16,20000,"));
}

#[test]
fn barrier_with_unit_correlation_exits_one() {
    let out = hbl(&["barrier", "--preset", "high", "--rho", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("|rho| != 1"));
}

#[test]
fn decompose_with_small_feller_index_exits_one() {
    let out = hbl(&["decompose", "--kappa", "0.5", "--theta", "0.125", "--sigma", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Feller index"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["rates", "--steps", "16,x"][..],
        &["rates", "--bogus"],
        &["nosuchcommand"],
        &["rates", "--preset", "medium"],
        &["rates", "--sigma", "-0.2"],
        &["cc", "--steps", "3", "--steps-fine", "1024"],
        &["selftest", "--quick", "--full"],
    ] {
        assert_eq!(hbl(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_and_environment_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("p.conf");
    std::fs::write(&conf, "# custom\nmu = 0.01\nkappa = 2\ntheta = 0.05\nsigma = 0.3\nrho = -0.4\nx0 = 0\nv0 = 0.05\nT = 0.5\n").unwrap();
    let csv = dir.path().join("r.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_hbl"))
        .args(["rates", "--config", conf.to_str().unwrap(), "--steps", "8,16", "--steps-fine", "256"])
        .args(["--paths", "1000", "--out", csv.to_str().unwrap()])
        .env("HBL_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = body(&csv);
    assert!(text.contains("# seed = 99"));
    assert!(text.contains("\"rho\":-0.4"));
    assert!(text.contains("\"T\":0.5"));
    assert!(text.lines().any(|l| l.starts_with("custom,")));
}

#[test]
fn rates_dump_paths() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("paths.csv");
    let out = hbl(&[
        "rates", "--steps", "8,16", "--steps-fine", "128", "--paths", "1000", "--scheme", "reference",
        "--dump-paths", dump.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = body(&dump);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "path_id,k,t_k,xhat,vhat");
    assert_eq!(rows.len(), 1 + 8 * 9);
    assert!(String::from_utf8_lossy(&out.stdout).contains("preset,nu,N,N_f,M,"));
}

#[test]
fn bridge_check_and_moments_run() {
    let out = hbl(&["bridge-check", "--paths", "1000", "--steps", "4", "--refine", "6"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("N,n,M,ks_stat,mean_abs_I,scaled_mean,lower_bound,upper_bound\n4,6,1000,"));
    let out = hbl(&["moments", "--paths", "1000", "--steps-fine", "64", "--preset", "low"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ks_exact_vs_reference"));
}
