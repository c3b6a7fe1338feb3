use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[grid]
origin = [1.5, 0.0, 1.5]
x_extent = 1.0
z_extent = 1.0
spacing = 0.1
centering = "node"
[array]
n_mics = 8
arms = 2
[run]
t_g_ms = 50.0
m = 3
"#;

fn cli(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moving-source"))
        .args(args)
        .env("MOVING_SOURCE_OUT", out)
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn staged_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let cfg = cfg.to_str().unwrap();
    let h = out.join("h.htm");
    let h = h.to_str().unwrap();

    let o = cli(&out, &["simulate", "--config", cfg]);
    assert!(o.status.success(), "{}", text(&o));
    let o = cli(&out, &["transfer", "--config", cfg, "--save-transfer", h]);
    assert!(o.status.success(), "{}", text(&o));
    let o = cli(&out, &["invert", "--config", cfg, "--load-transfer", h]);
    assert!(o.status.success(), "{}", text(&o));
    let o = cli(&out, &["analyze", "--config", cfg, "--plot-data"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("peak (2.000, 2.000)"), "{}", text(&o));
    for f in ["recording.bin", "result.bin", "lcurve.csv", "map.csv", "map.gnuplot", "beamwidth.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }

    // a stored matrix for another seed no longer matches the selection
    let o = cli(&out, &["invert", "--config", cfg, "--seed", "9", "--load-transfer", h]);
    assert!(!o.status.success());
    assert!(text(&o).contains("hash mismatch"), "{}", text(&o));

    // a damaged matrix file is rejected
    let mut bytes = std::fs::read(h).unwrap();
    let n = bytes.len();
    bytes[n - 5] ^= 0x10;
    std::fs::write(h, &bytes).unwrap();
    let o = cli(&out, &["invert", "--config", cfg, "--load-transfer", h]);
    assert!(!o.status.success());
    assert!(text(&o).contains("hash mismatch"), "{}", text(&o));
}

#[test]
fn sweep_reports_runs_and_rejects_bad_plans() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, format!("{TINY}\n[sweep]\nseeds = [0, 1]\n")).unwrap();
    let out = dir.path().join("sweep");
    let o = cli(&out, &["sweep", "--config", cfg.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).starts_with("2 runs"));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(out.join("run-0002/map.csv").exists());

    std::fs::write(&cfg, format!("{TINY}\n[sweep]\nf0 = [250.0]\nm = [5]\n")).unwrap();
    let o = cli(&dir.path().join("bad"), &["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o).contains("only 3 DFT bins"), "{}", text(&o));

    std::fs::write(&cfg, format!("{TINY}\n[sweep]\nm = []\n")).unwrap();
    let o = cli(&dir.path().join("bad"), &["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o).contains("sweep axis `m` is empty"), "{}", text(&o));
}

#[test]
fn verify_is_repeatable_and_tolerance_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, t) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("t"));
    let o = cli(&a, &["verify", "--only", "1,2,5,9"]);
    assert!(o.status.success(), "{}", text(&o));
    let o = cli(&b, &["verify", "--only", "1,2,5,9"]);
    assert!(o.status.success(), "{}", text(&o));
    let sa = std::fs::read_to_string(a.join("verify-summary.txt")).unwrap();
    assert_eq!(sa, std::fs::read_to_string(b.join("verify-summary.txt")).unwrap());
    assert!(sa.ends_with("4/4 checks passed\n"), "{sa}");

    let o = cli(&t, &["verify", "--only", "1,2,5,9", "--tight"]);
    assert!(o.status.success(), "{}", text(&o));
    let st = std::fs::read_to_string(t.join("verify-summary.txt")).unwrap();
    let verdicts = |s: &str| s.lines().map(|l| l.split(':').next().unwrap().to_owned()).collect::<Vec<_>>();
    assert_eq!(verdicts(&sa), verdicts(&st));
}

#[test]
fn bad_arguments_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["simulate", "--profile", "huge"]);
    assert!(!o.status.success());
    let o = cli(dir.path(), &["verify", "--only", "13"]);
    assert!(!o.status.success());
    assert!(text(&o).contains("ids run from 1 to 12"));
}
