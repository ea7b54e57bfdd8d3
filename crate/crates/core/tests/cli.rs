use std::fs;

use wave_lifespan::harness::run_cli;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("wave-lifespan").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|k| dir.path().join(format!("s{k}.csv"))).collect();
    for (k, path) in paths.iter().enumerate() {
        let threads = if k == 0 { "1" } else { "2" };
        let (code, _, err) = run(&[
            "sweep", "--p", "2", "--a", "-1", "--b", "-1", "--tmax", "30", "--ladder", "0.8,0.2,0.5",
            "--threads", threads, "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    let (a, b) = (fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("epsilon,status,T_h,T_h2,resolved\n0.2,blowup,"));
}

#[test]
fn sweep_rejects_global_regime() {
    let (code, _, err) = run(&["sweep", "--p", "2", "--a", "1", "--b", "0", "--ladder", "0.1"]);
    assert_eq!(code, 1);
    assert!(err.contains("global"));
}

#[test]
fn solve_with_config_writes_field_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"p":2,"a":-1,"b":-1,"epsilon":0.5,"R":1,
            "f":{"family":"zero","amplitude":0},"g":{"family":"bump","amplitude":1},
            "grid":{"h":0.1,"t_max":3,"pad":1}}"#,
    )
    .unwrap();
    let dump = dir.path().join("field.csv");
    let (code, out, err) = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dump.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let rec: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(rec["status"], "survived");
    let text = fs::read_to_string(&dump).unwrap();
    assert!(text.starts_with("t,x,u_t\n0,-4,0\n"));
    assert_eq!(text.lines().count(), 1 + 31 * 81);
}

#[test]
fn bad_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"p":1,"a":0,"b":0,"epsilon":0.5,"R":1,
            "f":{"family":"zero","amplitude":0},"g":{"family":"bump","amplitude":1},
            "grid":{"h":0.1,"t_max":3,"pad":1}}"#,
    )
    .unwrap();
    let (code, _, err) = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("p must exceed 1"), "{err}");
}

#[test]
fn phase_diagram_and_apriori_csv() {
    let (code, out, _) = run(&["phase-diagram", "--p", "2", "--mode", "u-zero-table", "--na", "3", "--nb", "3"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().next(), Some("a,b,label,exponent"));
    assert_eq!(out.lines().count(), 10);
    let (code, out, err) = run(&[
        "verify-apriori", "--p", "2", "--a", "-0.5", "--b", "0", "--h", "0.1", "--ladder", "5,10",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("T,ratio_E,ratio_D\n5,"));
}

#[test]
fn blowup_sequence_table() {
    let (code, out, _) = run(&["blowup-seq", "--p", "2", "--a", "0", "--b", "0", "--n", "3"]);
    assert_eq!(code, 0);
    let rows: Vec<_> = out.lines().collect();
    assert_eq!(rows[0], "n,a_n,log_M_n");
    assert!(rows[1].starts_with("1,0,0"));
    assert!(rows[3].starts_with("3,15,"));
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("sweep"));
}
