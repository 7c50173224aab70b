use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn h4bp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_h4bp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn number_after(text: &str, key: &str) -> f64 {
    let rest = &text[text.find(key).unwrap_or_else(|| panic!("`{key}` missing in\n{text}")) + key.len()..];
    rest.split_whitespace().next().unwrap().parse().unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn info_reports_linear_periods() {
    let o = h4bp(&["info", "--mu", "0.00095"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!((number_after(&s, "short period =") - 6.35271).abs() < 1e-5);
    assert!((number_after(&s, "long period  =") - 44.8422).abs() < 1e-4);
    assert_eq!(s.matches("mu_k =").count(), 10);
}

#[test]
fn info_without_tertiary_mass() {
    let s = stdout(&h4bp(&["info", "--mu", "0"]));
    assert!(s.contains("L3  absent") && s.contains("L4  absent"), "{s}");
}

#[test]
fn info_flags_critical_mass() {
    let s = stdout(&h4bp(&["info", "--mu", "0.011942"]));
    assert!(s.contains("near-degenerate"), "{s}");
    assert!(!stdout(&h4bp(&["info"])).contains("near-degenerate"));
}

#[test]
fn invalid_mass_is_a_bad_argument() {
    assert_eq!(code(&h4bp(&["info", "--mu", "0.8"])), 2);
    assert_eq!(code(&h4bp(&["info", "--mu", "abc"])), 2);
}

#[test]
fn empty_family_list_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = h4bp(&["trace", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn config_errors_are_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"families": ["short"], "speed": 3}"#).unwrap();
    assert_eq!(code(&h4bp(&["trace", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn unwritable_output_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = h4bp(&["trace", "--family", "short", "--max-members", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
}

#[test]
fn command_line_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.json");
    let text = format!(
        r#"{{"families": ["short"], "limits": {{"maxMembers": 6}}, "outputDir": {:?}}}"#,
        out.to_str().unwrap()
    );
    fs::write(&cfg, text).unwrap();
    let o = h4bp(&["trace", "--config", cfg.to_str().unwrap(), "--max-members", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("short/members.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}

/// Family f is stable in both directions over its whole traced stretch.
#[test]
fn family_f_trace_plot_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = h4bp(&["trace", "--family", "f", "--max-members", "300", "--out", out.to_str().unwrap(), "--plot"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(out.join("f/members.csv")).unwrap();
    assert!(csv.starts_with("index,C,x0,y0,vx0,vy0,T,a_h,a_v,half_a,half_d,symmetry,collision\n"));
    let c = column(&csv, "C");
    assert_eq!(c.len(), 300);
    assert!(c.windows(2).all(|w| w[1] < w[0]));
    assert!(column(&csv, "a_h").iter().chain(&column(&csv, "a_v")).all(|a| a.abs() < 2.0));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let sums = manifest["checksums"].as_object().unwrap();
    for f in ["members.csv", "events.json", "characteristic.svg", "stability_h.svg", "stability_v.svg", "orbits.svg"] {
        assert!(sums.contains_key(&format!("f/{f}")), "{f}");
    }
    assert_eq!(manifest["config"]["limits"]["maxMembers"], 300);

    let v = h4bp(&["verify", out.to_str().unwrap()]);
    assert_eq!(code(&v), 0, "{}", stdout(&v));

    // Plotting again reproduces the traced charts byte for byte.
    let before = fs::read(out.join("f/orbits.svg")).unwrap();
    assert_eq!(code(&h4bp(&["plot", out.to_str().unwrap()])), 0);
    assert_eq!(fs::read(out.join("f/orbits.svg")).unwrap(), before);

    let path = out.join("f/members.csv");
    let mut bytes = fs::read(&path).unwrap();
    let k = bytes.len() / 2;
    bytes[k] ^= 1;
    fs::write(&path, bytes).unwrap();
    let v = h4bp(&["verify", out.to_str().unwrap()]);
    assert_eq!(code(&v), 5);
    assert!(stdout(&v).contains("f/members.csv: checksum mismatch"));
}

#[test]
fn empty_record_plots_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("short");
    fs::create_dir(&fam).unwrap();
    fs::write(fam.join("members.csv"), "index,C,x0,y0,vx0,vy0,T,a_h,a_v,half_a,half_d,symmetry,collision\n").unwrap();
    let o = h4bp(&["plot", fam.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for f in ["characteristic.svg", "stability_h.svg", "stability_v.svg", "orbits.svg"] {
        let svg = fs::read_to_string(fam.join(f)).unwrap();
        assert!(svg.contains("empty record"), "{f}");
    }
}

#[test]
fn missing_or_corrupt_records_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&h4bp(&["plot", dir.path().join("nothing").to_str().unwrap()])), 5);
    assert_eq!(code(&h4bp(&["verify", dir.path().to_str().unwrap()])), 5);
    let fam = dir.path().join("g");
    fs::create_dir(&fam).unwrap();
    fs::write(fam.join("members.csv"), "index,C\n0,1\n").unwrap();
    assert_eq!(code(&h4bp(&["plot", fam.to_str().unwrap()])), 5);
}

#[test]
fn verify_runs_a_single_criterion() {
    let o = h4bp(&["verify", "--criterion", "table2"]);
    let s = stdout(&o);
    assert_eq!(code(&o), 0, "{s}");
    assert_eq!(s.lines().count(), 1);
    let line: serde_json::Value = serde_json::from_str(s.trim()).unwrap();
    assert_eq!(line["name"], "table2");
    assert_eq!(line["pass"], true);
    assert_eq!(line["checks"].as_array().unwrap().len(), 12);
}

#[test]
fn unknown_criterion_is_a_bad_argument() {
    assert_eq!(code(&h4bp(&["verify", "--criterion", "table9"])), 2);
    assert!(!Path::new("h4bp-out").exists());
}
