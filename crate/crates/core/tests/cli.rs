use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("latfront-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn latfront(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latfront"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("LATFRONT_WORKERS", "2")
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
}

/// Rows of a CSV as (header, numeric cells by name).
fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, rows) = table(path);
    let k = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name} in {h:?}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

const SMALL: [&str; 10] = ["--n-lo", "-30", "--n-hi", "30", "--l-count", "8", "--T", "5", "--frame-half-length", "40"];

#[test]
fn unperturbed_simulation_stays_on_the_front() {
    let d = scratch("amp0");
    let mut args = vec!["simulate", "--amp", "0"];
    args.extend(SMALL);
    ok(&latfront(&args, &d));
    for c in ["theta_l2", "theta_linf", "thetadiff_l2", "thetadiff_linf", "w_p2", "w_pinf"] {
        let v = column(&d.join("simulate.csv"), c);
        assert!(v.iter().all(|x| x.abs() <= 1e-9), "{c}: {v:?}");
    }
}

#[test]
fn identical_runs_write_identical_bytes() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    let mut args = vec!["simulate", "--seed", "7", "--perturb", "random_local"];
    args.extend(SMALL);
    ok(&latfront(&args, &a));
    ok(&latfront(&args, &b));
    for f in ["simulate.csv", "run.conf"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let digest = |d: &Path| {
        std::fs::read_to_string(d.join("manifest.txt")).unwrap().lines().filter(|l| l.starts_with("sha256.")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(digest(&a), digest(&b));
}

#[test]
fn run_file_reproduces_the_run_and_flags_override_it() {
    let (a, b, c) = (scratch("conf-a"), scratch("conf-b"), scratch("conf-c"));
    ok(&latfront(&["wave", "--rho", "0.5", "--dir", "2,1", "--L", "30"], &a));
    let conf = a.join("run.conf");
    ok(&latfront(&["wave", "--config", conf.to_str().unwrap()], &b));
    assert_eq!(std::fs::read(a.join("wave.csv")).unwrap(), std::fs::read(b.join("wave.csv")).unwrap());
    assert_eq!(std::fs::read(a.join("run.conf")).unwrap(), std::fs::read(b.join("run.conf")).unwrap());
    ok(&latfront(&["wave", "--config", conf.to_str().unwrap(), "--rho", "0.6"], &c));
    let text = std::fs::read_to_string(c.join("run.conf")).unwrap();
    assert!(text.contains("rho = 0.6") && text.contains("dir = 2,1"), "{text}");
}

#[test]
fn configuration_errors_exit_with_two() {
    let d = scratch("bad");
    let conf = d.join("bad.conf");
    std::fs::write(&conf, "rho = 0.5\nrh0 = 0.4\n").unwrap();
    for args in [
        vec!["wave", "--config", conf.to_str().unwrap()],
        vec!["wave", "--no-such-flag", "1"],
        vec!["wave", "--rho", "1.5"],
        vec!["wave", "--gamma", "0"],
        vec!["wave", "--dir", "2,2"],
        vec!["wave", "--h", "-0.1"],
    ] {
        let o = latfront(&args, &d.join("out"));
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn failed_decay_bound_exits_with_four() {
    let d = scratch("fit");
    let mut args = vec!["simulate"];
    args.extend(SMALL);
    args.extend(["--T", "20"]);
    ok(&latfront(&args, &d.join("sim")));
    let csv = d.join("sim/simulate.csv");
    let fit = |bounds: &str, out: &str| latfront(&["decay-fit", "--in", csv.to_str().unwrap(), "--window", "5,20", "--bounds", bounds], &d.join(out));
    ok(&fit("thetadiff_linf:0.1", "pass"));
    assert_eq!(fit("theta_linf:50", "fail").status.code(), Some(4));
    let (h, rows) = table(&d.join("fail/decay_fit.csv"));
    assert_eq!(h[0], "column");
    assert_eq!(rows.len(), 6);
    std::fs::write(d.join("junk.csv"), "t,theta_l2\n1,x\n").unwrap();
    let o = latfront(&["decay-fit", "--in", d.join("junk.csv").to_str().unwrap()], &d.join("junk"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn polar_sweep_is_positive() {
    let d = scratch("polar");
    ok(&latfront(&["melnikov-polar", "--rho", "0.9", "--gamma", "1e-5", "--thetas", "12", "--require-positive", "true"], &d));
    let m = column(&d.join("melnikov_polar.csv"), "M");
    assert_eq!(m.len(), 12);
    assert!(m.iter().all(|x| *x > 0.0), "{m:?}");
    let theta = column(&d.join("melnikov_polar.csv"), "theta");
    let target = column(&d.join("melnikov_polar.csv"), "theta_target");
    for (a, b) in theta.iter().zip(&target) {
        let gap = (a - b).rem_euclid(std::f64::consts::TAU);
        assert!(gap.min(std::f64::consts::TAU - gap) < 2e-3);
    }
}

#[test]
fn pinning_bracket_is_narrow() {
    let d = scratch("pin");
    let o = latfront(&["pin", "--dir", "1,0", "--gamma", "1e-6"], &d);
    ok(&o);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("rho* in ["), "{stdout}");
    let manifest = std::fs::read_to_string(d.join("manifest.txt")).unwrap();
    let width: f64 = manifest.lines().find_map(|l| l.strip_prefix("achieved.bracket_width = ")).unwrap().parse().unwrap();
    assert!(width > 0.0 && width <= 1e-4);
}

#[test]
fn stored_profile_feeds_the_spectral_commands() {
    let d = scratch("profile");
    ok(&latfront(&["wave", "--rho", "0.7", "--dir", "1,1"], &d.join("w")));
    let profile = d.join("w/profile.txt");
    ok(&latfront(&["spectrum", "--profile", profile.to_str().unwrap(), "--samples", "5"], &d.join("s")));
    let re = column(&d.join("s/spectrum.csv"), "re_lambda");
    assert_eq!(re.len(), 5);
    assert!(re[2].abs() < 1e-8 && re.iter().all(|x| *x < 1e-8));
    let o = latfront(&["melnikov", "--profile", profile.to_str().unwrap(), "--require-positive", "true"], &d.join("m"));
    ok(&o);
    assert!(column(&d.join("m/melnikov.csv"), "M_integral")[0] > 0.0);
    ok(&latfront(&["ess-spec", "--rho", "0.7", "--dir", "1,1"], &d.join("e")));
    let max_re = column(&d.join("e/ess_spec.csv"), "max_re");
    assert!(max_re.iter().all(|x| *x < 0.0));
}
