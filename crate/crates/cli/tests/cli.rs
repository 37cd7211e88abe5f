use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fopid() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fopid"));
    c.env_remove("FOPID_OUT_DIR");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    fopid()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Second line of a two-line CSV on stdout.
fn row(o: &Output) -> Vec<f64> {
    stdout(o)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect()
}

fn read_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn golden(name: &str) -> String {
    fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/golden")
            .join(name),
    )
    .unwrap()
}

#[test]
fn gains_for_oscillatory_plant() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "gains", "--method", "he", "--Q1", "0.643793", "--Q2", "0.02965", "--Q3", "0.062444",
            "--R", "0.34342", "--K", "1", "--L", "0.5", "--T", "2", "--alpha", "1.5",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("Kp,Ki,Kd,lambda,mu"));
    let v = row(&o);
    for (got, want) in v.iter().zip([0.7092, 0.5692, 1.8411]) {
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
    }
}

#[test]
fn rule_matches_golden_and_table_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["rule", "--LT", "1", "--alpha", "1.2", "--K", "1"],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o), golden("rule_lt1_alpha1.2.csv"));
    let want = [0.8149, 0.3449, 1.6216, 0.9846, 0.1507];
    let rmse = [0.104, 0.06512, 0.09768, 0.05212, 0.1268];
    for ((g, w), r) in row(&o).iter().zip(want).zip(rmse) {
        assert!((g - w).abs() <= 3.0 * r, "{g} vs {w}");
    }
    let o = run(
        &["rule", "--LT", "0.25", "--alpha", "1.4", "--K", "2"],
        dir.path(),
    );
    assert_eq!(stdout(&o), golden("rule_lt0.25_alpha1.4_k2.csv"));
}

#[test]
fn rule_warns_outside_domain() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["rule", "--LT", "6", "--alpha", "1.2"], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside the fitted domain"));
}

#[test]
fn integer_order_step_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "step",
            "--K",
            "1.5",
            "--L",
            "0.5",
            "--T",
            "2",
            "--alpha",
            "1",
            "--horizon",
            "20",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let (header, rows) = read_csv(&dir.path().join("step.csv"));
    assert_eq!(header, "t,y,u");
    assert_eq!(rows.len(), 2001);
    for r in &rows {
        let t: f64 = r[0].parse().unwrap();
        let y: f64 = r[1].parse().unwrap();
        let exact = if t < 0.5 {
            0.0
        } else {
            1.5 * (1.0 - (-(t - 0.5) / 2.0).exp())
        };
        assert!((y - exact).abs() <= 1e-3, "t={t}: {y} vs {exact}");
    }
}

#[test]
fn bode_starts_near_zero_db() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["step", "--bode", "--horizon", "5"], dir.path());
    assert!(o.status.success());
    let (header, rows) = read_csv(&dir.path().join("bode.csv"));
    assert_eq!(header, "omega,magnitude_db,phase_deg");
    let db: f64 = rows[0][1].parse().unwrap();
    assert!(db.abs() < 0.01, "{db}");
}

#[test]
fn simulate_reports_indices() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "simulate", "--Q1", "0.643793", "--Q2", "0.02965", "--Q3", "0.062444", "--R",
            "0.34342", "--lambda", "1.133782", "--mu", "0.449655", "--method", "he",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines().skip(1);
    assert_eq!(lines.next(), Some("Kp,Ki,Kd,lambda,mu,itse,isdco"));
    let v: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert!((v[5] / 0.816633 - 1.0).abs() < 0.2);
    assert!((v[6] / 8.217709 - 1.0).abs() < 0.2);
    let (header, rows) = read_csv(&dir.path().join("simulate.csv"));
    assert_eq!(header, "t,y,u,x1,x2,x3");
    assert_eq!(rows.len(), 10001);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(
            &["rule", "--LT", "1", "--alpha", "1", "--K", "0"],
            dir.path()
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(run(&["step", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(
        run(&["step", "--T", "-1"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["simulate", "--Kp", "1"], dir.path()).status.code(),
        Some(2)
    );
    let undetectable = ["gains", "--Q1", "0", "--Q2", "0", "--Q3", "0", "--R", "1"];
    assert_eq!(run(&undetectable, dir.path()).status.code(), Some(3));
    assert_eq!(run(&["--version"], dir.path()).status.code(), Some(0));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# integer-order plant\nalpha = 1\nhorizon = 5\nbode = true\nseed = 3\nout-dir = from_cfg\n").unwrap();
    let o = run(
        &["--config", cfg.to_str().unwrap(), "step", "--horizon", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&dir.path().join("from_cfg/step.csv"));
    assert_eq!(rows.len(), 201);
    assert!(dir.path().join("from_cfg/bode.csv").exists());

    fs::write(&cfg, "alpha = 1\nbode = maybe\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "step"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["--config", "missing.cfg", "step"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = fopid()
        .args(["step", "--horizon", "1"])
        .env("FOPID_OUT_DIR", dir.path().join("env_out"))
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("env_out/step.csv").exists());
}

const SMALL_DESIGN: [&str; 12] = [
    "design",
    "--population",
    "8",
    "--generations",
    "3",
    "--horizon",
    "20",
    "--seed",
    "11",
    "--method",
    "cai,he",
    "--restarts",
];

#[test]
fn design_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL_DESIGN.to_vec();
    args.push("2");
    let a = run(&[&args[..], &["--out-dir", "a"]].concat(), dir.path());
    let b = run(&[&args[..], &["--out-dir", "b"]].concat(), dir.path());
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a)
        .lines()
        .any(|l| l.starts_with("verdict,cai_vs_he,")));
    for f in [
        "front_cai.csv",
        "front_he.csv",
        "median_cai.csv",
        "median_he.csv",
    ] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let (header, _) = read_csv(&dir.path().join("a/front_he.csv"));
    assert_eq!(
        header,
        "J1_itse,J2_isdco,Q1,Q2,Q3,R,lambda,mu,Kp,Ki,Kd,method"
    );
}

#[test]
fn reduced_design_and_nominal_sweep_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "design",
            "--method",
            "he",
            "--population",
            "40",
            "--generations",
            "40",
            "--seed",
            "1",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let (_, front) = read_csv(&dir.path().join("front_he.csv"));
    assert!(front.len() >= 10, "{}", front.len());

    let (_, median) = read_csv(&dir.path().join("median_he.csv"));
    let m = &median[0];
    let o = run(
        &[
            "sweep",
            "--Kp",
            &m[8],
            "--Ki",
            &m[9],
            "--Kd",
            &m[10],
            "--lambda",
            &m[6],
            "--mu",
            &m[7],
            "--delays",
            "0.5",
            "--time-constants",
            "2",
            "--out-dir",
            "s",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let (header, cells) = read_csv(&dir.path().join("s/sweep.csv"));
    assert_eq!(header, "L,T,itse,isdco");
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0][2], m[0]);
    assert_eq!(cells[0][3], m[1]);
}

#[test]
fn default_sweep_grid_is_five_by_five() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "sweep",
            "--Kp",
            "0.7",
            "--Ki",
            "0.57",
            "--Kd",
            "1.84",
            "--lambda",
            "1.13",
            "--mu",
            "0.45",
            "--horizon",
            "30",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let (_, cells) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(cells.len(), 25);
    assert_eq!(cells[12][0].parse::<f64>().unwrap(), 0.5);
}
