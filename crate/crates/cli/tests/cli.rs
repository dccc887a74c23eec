use std::process::{Command, Output};

fn coharq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coharq")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const HEADER: &str = "snr_db,scheme,policy,k,m,user,metric,mc_value,mc_ci95,analytic_value,trials,seed";

#[test]
fn analytic_cdf_matches_the_two_term_closed_form() {
    let o = coharq(&["analytic", "--op", "cdf-rtd", "--n", "1", "--m", "1", "--lambdas", "1,2", "--x", &2f64.ln().to_string()]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    let e = (-1f64).exp();
    assert!((v - (1.0 - 2.0 * e + e * e)).abs() < 1e-12, "{v}");

    let o = coharq(&["analytic", "--op", "cdf-inr", "--n", "1", "--m", "0", "--power", "2", "--x", "1"]);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - (1.0 - (-(1f64.exp() - 1.0) / 2.0).exp())).abs() < 1e-9, "{v}");

    let o = coharq(&["analytic", "--op", "diversity", "--donors", "1", "--m", "2"]);
    assert_eq!(stdout(&o).trim(), "3");
}

#[test]
fn sweep_writes_csv_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = coharq(&[
            "sweep", "--scheme", "rtd", "--policy", "coord", "--snr-db", "0:5:10", "--trials", "4000", "--seed", "9",
            "--out", path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(path).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER);
    assert!(text.lines().any(|l| l.starts_with("10.0,rtd,coord-k2,2,2,1,outage,")));
}

#[test]
fn trace_has_one_line_per_assigned_band() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let o = coharq(&[
        "sweep", "--snr-db", "0", "--trials", "10", "--trace", path.to_str().unwrap(), "--trace-packets", "5",
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "trial,slot,band,user,scheme,decoded_users,failed_users");
    assert!(text.lines().count() > 5);
}

#[test]
fn optimize_picks_from_the_grid() {
    let o = coharq(&["optimize", "--scheme", "inr", "--snr-db", "-30", "--grid", "0.1,1,5", "--trials", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rates: Vec<&str> = text.lines().filter(|l| l.contains(",opt_rate,")).collect();
    assert_eq!(rates.len(), 2);
    assert!(rates.iter().all(|l| l.contains(",opt_rate,,,0.1,")), "{rates:?}");
}

#[test]
fn batch_runs_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k3.csv");
    let cfg = dir.path().join("runs.toml");
    std::fs::write(
        &cfg,
        format!(
            r#"
[[run]]
name = "three users"
scheme = "inr"
policy = "coord"
k = 3
m = 2
snr_db = [0.0, 10.0]
trials = 1000
out = "{}"

[[run]]
scheme = "rtd"
policy = "noncoord"
k = 1
m = 3
snr_db = "0:10:20"
trials = 1000
"#,
            out.display()
        ),
    )
    .unwrap();
    let o = coharq(&["batch", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().any(|l| l.starts_with("20.0,rtd,noncoord,1,3,1,outage,")));
    let k3 = std::fs::read_to_string(&out).unwrap();
    assert!(k3.lines().any(|l| l.contains(",random-split-k3,3,2,3,outage,")));
}

#[test]
fn preset_reruns_are_byte_identical() {
    let args = ["run", "--preset", "fig1b", "--trials", "2000", "--snr-db", "10", "--lambda2", "1,8"];
    let (a, b) = (coharq(&args), coharq(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).lines().any(|l| l.contains("fairness[lambda2=8]")));
}

#[test]
fn exit_codes() {
    // Configuration errors.
    assert_eq!(coharq(&["run", "--preset", "fig9"]).status.code(), Some(2));
    assert_eq!(coharq(&["sweep", "--scheme", "qam"]).status.code(), Some(2));
    assert_eq!(coharq(&["sweep", "--k", "2", "--lambdas", "1,2,3", "--trials", "10"]).status.code(), Some(2));
    assert_eq!(coharq(&["batch", "--config", "/nonexistent/runs.toml"]).status.code(), Some(2));
    // Too few resolvable points for a slope.
    let o = coharq(&["sweep", "--snr-db", "0:10:20", "--trials", "1000", "--fit-slope", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("raise the trial count"));
    // Usage errors come from the argument parser.
    assert_eq!(coharq(&["sweep", "--bogus"]).status.code(), Some(2));
}
