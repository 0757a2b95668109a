use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use heat_content::special::erf;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heat-content"))
}

fn run(args: &[&str], cfg: Option<&Path>, out: &Path) -> Output {
    let mut c = bin();
    c.args(args).arg("--out").arg(out).env_remove("HEAT_CONTENT_THREADS");
    if let Some(p) = cfg {
        c.arg("--config").arg(p);
    }
    c.output().expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(format!("{name}.toml"));
    fs::write(&p, format!("name = \"{name}\"\n{body}")).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_shows_builtins() {
    let o = bin().arg("list").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("heisenberg") && s.contains("disc") && s.contains("grushin_strip"));
}

#[test]
fn predict_tables() {
    let dir = tempfile::tempdir().unwrap();
    let disc = write_cfg(dir.path(), "disc", "[domain]\nspec = \"disc R=1\"\n");
    let o = run(&["predict"], Some(&disc), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("c1 = -3.544908"), "{}", stdout(&o));
    assert!(dir.path().join("disc.predict.json").exists());

    let interval = write_cfg(dir.path(), "iv", "[domain]\nspec = \"interval a=0 b=1\"\n");
    let o = run(&["predict"], Some(&interval), dir.path());
    assert!(stdout(&o).contains("c1 = -1.128379"), "{}", stdout(&o));

    let ball = write_cfg(dir.path(), "hb", "[domain]\nspec = \"heis_ball R=1\"\n");
    let o = run(&["predict"], Some(&ball), dir.path());
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("characteristic"));
}

#[test]
fn exact_interval_matches_erf_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "iv",
        "[domain]\nspec = \"interval a=0 b=1\"\n[ladder]\nt_min = 1e-4\nt_max = 1e-1\ncount = 8\n",
    );
    let o = run(&["estimate", "--emit-plot-data"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("iv.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,value,stderr,n,kind,backend"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 16);
    for r in rows.iter().filter(|r| r[4] == "H") {
        let t: f64 = r[0].parse().unwrap();
        let v: f64 = r[1].parse().unwrap();
        let oracle = erf(1.0 / (2.0 * t.sqrt())) + 2.0 * (t / std::f64::consts::PI).sqrt() * ((-1.0 / (4.0 * t)).exp() - 1.0);
        assert!((v - oracle).abs() < 1e-9, "t={t}: {v} vs {oracle}");
    }
    // H + K = |Ω| row by row
    let (h, k): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r[4] == "H");
    for (a, b) in h.iter().zip(&k) {
        assert_eq!(a[0], b[0]);
        let s: f64 = a[1].parse::<f64>().unwrap() + b[1].parse::<f64>().unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("iv.json")).unwrap()).unwrap();
    assert!(json["version"].as_str().unwrap().starts_with("heat-content"));
    assert_eq!(json["config"]["domain"]["spec"], "interval a=0 b=1");
    assert!(dir.path().join("iv.dat").exists());
}

#[test]
fn mc_results_are_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[domain]\nspec = \"disc R=1\"\n[estimate]\nbackend = \"mc\"\n[sde]\nn_paths = 2000\n[ladder]\nt_min = 1e-3\nt_max = 4e-3\ncount = 3\n";
    let cfg = write_cfg(dir.path(), "mc", body);
    let out = dir.path().join("out");
    let read = |seed: &str| {
        let o = run(&["estimate", "--seed", seed], Some(&cfg), &out);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(out.join("mc.csv")).unwrap(), fs::read(out.join("mc.json")).unwrap())
    };
    let a = read("11");
    let c = read("12");
    let b = read("11");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
    let text = String::from_utf8(a.0).unwrap();
    let vals: Vec<(String, String, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[4].to_string(), f[1].parse().unwrap())
        })
        .collect();
    for i in 0..3 {
        assert_eq!(vals[i].0, vals[i + 3].0);
        assert!((vals[i].2 + vals[i + 3].2 - std::f64::consts::PI).abs() < 1e-12);
    }
}

#[test]
fn verify_passes_and_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"[domain]
spec = "disc R=1"
[fit]
exponents = [0.0, 0.5, 1.0, 1.5, 2.0]
check = [0.5, 1.5]
[fit.thresholds]
z_max = 3.0
rel_max = 1e-2
abs_floor = 1e-2
"#;
    let cfg = write_cfg(dir.path(), "disc", body);
    let o = run(&["verify"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("verdict: PASS"));

    // scale the stored curve by 1.1: the fitted coefficients no longer match
    let path = dir.path().join("disc.json");
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    for e in json["curves"][0]["estimates"].as_array_mut().unwrap() {
        let v = e["value"].as_f64().unwrap();
        e["value"] = serde_json::json!(1.1 * v);
    }
    fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
    let o = run(&["verify"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));

    let o = run(&["fit"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("coef[0.5]"));
}

#[test]
fn heisenberg_slab_weighted_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"[domain]
spec = "heis_slab L=2 patch=[-1,1]^2"
[weight]
name = "product"
label = "poly-plateau"
factors = [
  { type = "polynomial", axis = 0, coeffs = [1.0, 0.5, -0.3] },
  { type = "plateau", axis = 0, inner = [-0.5, 0.5], outer = [-0.9, 0.9] },
  { type = "plateau", axis = 1, inner = [-0.5, 0.5], outer = [-0.9, 0.9] },
  { type = "plateau", axis = 2, inner = [-0.5, 0.5], outer = [-0.9, 0.9] },
]
[estimate]
kind = "Hchi"
[fit]
exponents = [0.0, 0.5, 1.0, 1.5, 2.0]
check = [0.5, 1.0, 1.5]
[fit.thresholds]
z_max = 3.0
rel_max = 1e-6
abs_floor = 1e-6
"#;
    let cfg = write_cfg(dir.path(), "slab", body);
    let o = run(&["verify"], Some(&cfg), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["estimate"], None, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let bad = write_cfg(dir.path(), "bad", "[domain]\nspec = \"torus\"\n");
    assert_eq!(run(&["estimate"], Some(&bad), dir.path()).status.code(), Some(2));
    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["predict"], Some(&missing), dir.path()).status.code(), Some(2));
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
