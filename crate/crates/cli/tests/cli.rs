use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn inls(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inls")).args(args).current_dir(dir).output().expect("binary runs")
}

/// Runs `cmd` with an optional config document; returns the exit code and the run directory.
fn run(tmp: &TempDir, name: &str, cmd: &str, config: Option<&str>, extra: &[&str]) -> (i32, PathBuf) {
    let out = tmp.path().join(name);
    let mut args = vec![cmd.to_string(), "--out".into(), out.to_str().unwrap().into()];
    if let Some(doc) = config {
        let p = tmp.path().join(format!("{name}.toml"));
        fs::write(&p, doc).unwrap();
        args.push("--config".into());
        args.push(p.to_str().unwrap().into());
    }
    args.extend(extra.iter().map(|s| s.to_string()));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = inls(&args, tmp.path());
    (o.status.code().expect("exited"), out)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, rows) = read_csv(path);
    let j = h.iter().position(|c| c == name).unwrap();
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

const FLAT_RADIAL: &str = r#"
[grid]
geometry = "radial"
n = 128
half_width = 30.0
[problem]
tau0 = 20.0
v = { kind = "constant", value = 0.0 }
g = { kind = "constant", value = 1.0 }
[construct]
tau_max = 40.0
"#;

#[test]
fn groundstate_defaults_give_the_1d_mass() {
    let tmp = TempDir::new().unwrap();
    let (code, dir) = run(&tmp, "gs", "groundstate", None, &[]);
    assert_eq!(code, 0);
    let s = summary(&dir);
    let mass = s["result"]["mass"].as_f64().unwrap();
    assert!((mass - 2.720699).abs() < 1e-6, "mass {mass}");
    assert_eq!(s["passed"], Value::Bool(true));
    assert!(dir.join("config.toml").exists());
    let q = column(&dir.join("groundstate.csv"), "q");
    assert_eq!(q.len(), 1024);
}

#[test]
fn unknown_key_is_a_schema_violation_with_its_path() {
    let tmp = TempDir::new().unwrap();
    let doc = "[grid]\ngeometry = \"line\"\nn = 64\nhalf_width = 10.0\nspacing = 1\n";
    fs::write(tmp.path().join("c.toml"), doc).unwrap();
    let o = inls(&["groundstate", "--config", "c.toml", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`grid.spacing`"));
}

#[test]
fn wrong_type_is_a_schema_violation_with_its_path() {
    let tmp = TempDir::new().unwrap();
    let doc = "[grid]\ngeometry = \"line\"\nn = \"many\"\nhalf_width = 10.0\n";
    fs::write(tmp.path().join("c.toml"), doc).unwrap();
    let o = inls(&["groundstate", "--config", "c.toml", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`grid.n`"));
}

#[test]
fn semantic_violations_report_their_path() {
    let tmp = TempDir::new().unwrap();
    for (doc, path) in [
        ("[modulation]\ndecay = 1.5\n", "modulation.decay"),
        ("[evolve]\nequation = \"remainder\"\n", "evolve.equation"),
        ("subcommand = \"modes\"\n", "subcommand"),
        ("[construct]\ndelta = 2.5\n", "construct"),
    ] {
        fs::write(tmp.path().join("c.toml"), doc).unwrap();
        let o = inls(&["evolve", "--config", "c.toml", "--out", "o"], tmp.path());
        assert_eq!(o.status.code(), Some(3), "{doc}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(&format!("`{path}`")), "{doc}");
    }
}

#[test]
fn usage_errors_exit_3_and_help_exits_0() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(inls(&["nonsense"], tmp.path()).status.code(), Some(3));
    assert_eq!(inls(&["evolve", "--seed", "x"], tmp.path()).status.code(), Some(3));
    assert_eq!(inls(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn verify_passes_on_the_euclidean_surface() {
    let tmp = TempDir::new().unwrap();
    let doc = "[problem.surface]\nkind = \"euclidean\"\n[verify]\ncorpus = 30\n";
    let (code, dir) = run(&tmp, "v", "verify", Some(doc), &[]);
    assert_eq!(code, 0);
    let (_, rows) = read_csv(&dir.join("interpolation.csv"));
    assert_eq!(rows.len(), 9);
}

#[test]
fn growing_surface_fails_admissibility() {
    let tmp = TempDir::new().unwrap();
    let (code, dir) = run(&tmp, "b", "surface", Some("[problem.surface]\nkind = \"bowl\"\nk = 2\n"), &[]);
    assert_eq!(code, 2);
    assert_eq!(summary(&dir)["result"]["admissibility"]["bounded"], Value::Bool(false));
}

#[test]
fn flat_demo_follows_the_explicit_profile() {
    let tmp = TempDir::new().unwrap();
    let (code, dir) = run(&tmp, "d", "demo", Some(FLAT_RADIAL), &[]);
    assert_eq!(code, 0);
    let rate = dir.join("rate.csv");
    let (g, e) = (column(&rate, "grad_rate"), column(&rate, "explicit_rate"));
    for (a, b) in g.iter().zip(&e) {
        assert!((a / b - 1.0).abs() < 1e-10, "{a} vs {b}");
    }
    let mass = column(&rate, "mass");
    assert!(mass.iter().all(|m| (m - mass[0]).abs() < 1e-10 * mass[0]));
}

#[test]
fn non_convergence_exits_1_with_outputs() {
    let tmp = TempDir::new().unwrap();
    let doc = "[grid]\ngeometry = \"radial\"\nn = 128\nhalf_width = 30.0\n[construct]\ntau_max = 40.0\nmax_iter = 1\n";
    let (code, dir) = run(&tmp, "c", "construct", Some(doc), &[]);
    assert_eq!(code, 1);
    let s = summary(&dir);
    assert_eq!(s["result"]["status"]["status"], "max_iterations");
    assert!(s["failure"].is_string());
    assert!(dir.join("iterations.csv").exists());
}

#[test]
fn construct_converges_on_a_small_surface_run() {
    let tmp = TempDir::new().unwrap();
    let doc = "[grid]\ngeometry = \"radial\"\nn = 128\nhalf_width = 30.0\n[construct]\ntau_max = 60.0\n[output]\nw_snapshots = [30.0]\n";
    let (code, dir) = run(&tmp, "c", "construct", Some(doc), &[]);
    assert_eq!(code, 0);
    let taus = column(&dir.join("w_snapshots.csv"), "tau");
    assert_eq!(taus, vec![30.0]);
    let (_, rows) = read_csv(&dir.join("w_0.csv"));
    assert_eq!(rows.len(), 128);
}

#[test]
fn power_forcing_reproduces_the_decay_table() {
    let tmp = TempDir::new().unwrap();
    let (code, dir) = run(&tmp, "m", "modulation", Some("[modulation]\nforcing = \"power\"\n"), &[]);
    assert_eq!(code, 0);
    let tau = column(&dir.join("modulation.csv"), "tau");
    assert_eq!(tau.len(), 2001);
}

#[test]
fn modes_run_reports_gram_and_growth() {
    let tmp = TempDir::new().unwrap();
    let doc = "[grid]\ngeometry = \"line\"\nn = 256\nhalf_width = 24.0\n[modes]\nt_end = 4.0\nsamples = 8\nrandom_fields = 2\n";
    let (code, dir) = run(&tmp, "m", "modes", Some(doc), &[]);
    assert_eq!(code, 0);
    // d = 1: N1, N2, N3, N4, N5, N6 squared
    assert_eq!(read_csv(&dir.join("gram.csv")).1.len(), 36);
    assert_eq!(read_csv(&dir.join("growth.csv")).1.len(), 2 * 9);
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = TempDir::new().unwrap();
    let doc = "[evolve]\nsnapshots = [0.5]\n";
    let (_, a) = run(&tmp, "a", "evolve", Some(doc), &["--seed", "11"]);
    let (_, b) = run(&tmp, "b", "evolve", Some(doc), &["--seed", "11"]);
    assert_eq!(files(&a), files(&b));
    let cfg = a.join("config.toml");
    let (_, c) = run(&tmp, "c", "evolve", None, &["--config", cfg.to_str().unwrap()]);
    assert_eq!(files(&a), files(&c));
    let (_, d) = run(&tmp, "d", "evolve", Some(doc), &["--seed", "12"]);
    assert_ne!(files(&a)["evolve.csv"], files(&d)["evolve.csv"]);
}

fn matches(pattern: &str, name: &str) -> bool {
    match pattern.split_once('*') {
        None => pattern == name,
        Some((pre, post)) => name
            .strip_prefix(pre)
            .and_then(|r| r.strip_suffix(post))
            .is_some_and(|mid| !mid.is_empty() && mid.bytes().all(|b| b.is_ascii_digit())),
    }
}

#[test]
fn every_csv_matches_the_checked_in_schema() {
    let schema: toml::Table =
        toml::from_str(&fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/csv.toml")).unwrap()).unwrap();
    let entries = schema["file"].as_array().unwrap();
    let tmp = TempDir::new().unwrap();
    let small_line = "[grid]\ngeometry = \"line\"\nn = 256\nhalf_width = 24.0\n";
    let runs = [
        ("groundstate", small_line.to_string()),
        ("modes", format!("{small_line}[modes]\nt_end = 1.0\nsamples = 2\nrandom_fields = 1\n")),
        ("modulation", "[modulation]\nnodes = 201\ntau_max = 200.0\nwindow = [40.0, 150.0]\n".to_string()),
        (
            "evolve",
            format!("{small_line}[evolve]\nequation = \"transformed\"\nt0 = 1.0\nt1 = 1.2\ninitial = \"ground_state\"\nrows = 3\nsnapshots = [1.1]\n"),
        ),
        ("construct", FLAT_RADIAL.to_string()),
        ("demo", FLAT_RADIAL.to_string()),
        ("surface", String::new()),
        ("verify", "[verify]\ncorpus = 6\n".to_string()),
    ];
    let mut seen = vec![false; entries.len()];
    for (cmd, doc) in runs {
        let (code, dir) = run(&tmp, cmd, cmd, Some(&doc), &[]);
        assert!(code == 0 || code == 2, "{cmd} exited {code}");
        for name in files(&dir).keys().filter(|n| n.ends_with(".csv")) {
            let k = entries
                .iter()
                .position(|e| matches(e["name"].as_str().unwrap(), name))
                .unwrap_or_else(|| panic!("{cmd}: {name} missing from the schema"));
            seen[k] = true;
            let e = &entries[k];
            let cols: Vec<&str> = e["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
            let subs: Vec<&str> = e["subcommands"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
            assert!(subs.contains(&cmd), "{name} not declared for {cmd}");
            let (header, rows) = read_csv(&dir.join(name));
            assert_eq!(header, cols, "{cmd}: {name}");
            assert!(rows.iter().all(|r| r.len() == cols.len()));
        }
    }
    for (e, s) in entries.iter().zip(&seen) {
        assert!(s, "schema entry {} never produced", e["name"]);
    }
}
