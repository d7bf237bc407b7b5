use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn mubp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mubp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn construct(dir: &TempDir, family: &str, n: usize) -> PathBuf {
    let path = dir.path().join(format!("{family}-{n}.json"));
    let o = mubp(&[
        "construct",
        "--family",
        family,
        "--n",
        &n.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    path
}

fn structured(args: &[&str]) -> (i32, Value) {
    let mut all = vec!["--format", "structured"];
    all.extend_from_slice(args);
    let o = mubp(&all);
    (
        code(&o),
        serde_json::from_str(&stdout(&o))
            .unwrap_or_else(|e| panic!("{e}: {}{}", stdout(&o), stderr(&o))),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn every_construction_verifies() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("qubit-triple", 1),
        ("qubit-triple", 2),
        ("qubit-triple", 3),
        ("qutrit-quadruple", 1),
        ("qutrit-quadruple", 2),
        ("product-triple2x3", 1),
        ("direct-triple2x5", 1),
        ("indirect-triple2x5", 1),
        ("indirect-d4", 1),
        ("domino3x3", 1),
    ];
    for (family, n) in cases {
        let path = construct(&dir, family, n);
        let (c, report) = structured(&["verify", p(&path)]);
        assert_eq!(c, 0, "{family} {n}");
        assert!(
            report["report"]["max_mu_deviation"].as_f64().unwrap() < 1e-12,
            "{family} {n}"
        );
        assert_eq!(report["tol"].as_f64(), Some(1e-9));
        assert_eq!(report["seed"].as_u64(), Some(0));
        assert!(report["tool_version"].is_string());
    }
}

#[test]
fn identical_bases_fail_verification() {
    let dir = TempDir::new().unwrap();
    let path = construct(&dir, "qubit-triple", 1);
    let mut file: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let first = file["bases"][0].clone();
    file["bases"][1] = first;
    std::fs::write(&path, file.to_string()).unwrap();
    let o = mubp(&["verify", p(&path)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("worst pair"), "{}", stdout(&o));
}

#[test]
fn bound_for_qubit_qutrit() {
    let o = mubp(&["bound", "--signature", "2,3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("3 Proven"), "{}", stdout(&o));
    let (_, r) = structured(&["bound", "--signature", "4,5"]);
    assert_eq!(r["bound"]["bound"].as_u64(), Some(5));
    assert_eq!(r["bound"]["status"], "Conjectured");
}

#[test]
fn malformed_files_exit_with_diagnostics() {
    let dir = TempDir::new().unwrap();
    let path = construct(&dir, "qubit-triple", 2);
    let mut file: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();

    let mut short = file.clone();
    short["bases"][1]["vectors"][2][1] = serde_json::json!([[1.0, 0.0]]);
    let bad = dir.path().join("short.json");
    std::fs::write(&bad, short.to_string()).unwrap();
    let o = mubp(&["verify", p(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("bases[1].vectors[2][1]") && stderr(&o).contains("factor length"),
        "{}",
        stderr(&o)
    );

    file["bases"][0]["vectors"][0][0] = serde_json::json!([[2.0, 0.0], [0.0, 0.0]]);
    let unnorm = dir.path().join("unnorm.json");
    std::fs::write(&unnorm, file.to_string()).unwrap();
    let o = mubp(&["verify", p(&unnorm)]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("norm") && stderr(&o).contains("bases[0].vectors[0][0]"),
        "{}",
        stderr(&o)
    );
    assert_eq!(code(&mubp(&["--normalize", "verify", p(&unnorm)])), 0);

    let broken = dir.path().join("broken.json");
    std::fs::write(
        &broken,
        "{\n  \"signature\": [2, 2],\n  \"bases\": [ {\"name\": 3} ]\n}",
    )
    .unwrap();
    let o = mubp(&["verify", p(&broken)]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("bases[0].name") && stderr(&o).contains("line 3"),
        "{}",
        stderr(&o)
    );

    assert_eq!(code(&mubp(&["verify", "--no-such-flag", p(&path)])), 2);
}

#[test]
fn round_trip_keeps_sets_equivalent() {
    let dir = TempDir::new().unwrap();
    let path = construct(&dir, "qutrit-quadruple", 2);
    let text = std::fs::read_to_string(&path).unwrap();
    let copy = dir.path().join("copy.json");
    let parsed: Value = serde_json::from_str(&text).unwrap();
    std::fs::write(&copy, serde_json::to_string(&parsed).unwrap()).unwrap();
    let reread: Value = serde_json::from_str(&std::fs::read_to_string(&copy).unwrap()).unwrap();
    assert_eq!(reread, parsed);
    let (c, r) = structured(&["equiv", p(&path), p(&copy)]);
    assert_eq!(c, 0);
    assert!(r["verdict"]["Equivalent"].is_object());
}

#[test]
fn direct_and_indirect_triples_are_inequivalent() {
    let dir = TempDir::new().unwrap();
    let a = construct(&dir, "direct-triple2x5", 1);
    let b = construct(&dir, "indirect-triple2x5", 1);
    let (c, r) = structured(&["equiv", p(&a), p(&b)]);
    assert_eq!(c, 1);
    assert!(r["verdict"]["Inequivalent"].is_object(), "{r}");
}

#[test]
fn structure_commands() {
    let dir = TempDir::new().unwrap();
    let d4 = construct(&dir, "indirect-d4", 1);
    let (c, r) = structured(&["classify", p(&d4)]);
    assert_eq!(c, 0);
    assert_eq!(r["classes"][0]["class"]["kind"], "Indirect");
    assert_eq!(
        r["classes"][0]["class"]["per_subsystem_basis_count"],
        serde_json::json!([1, 2])
    );

    let domino = construct(&dir, "domino3x3", 1);
    let (c, r) = structured(&["extract-ortho", p(&domino)]);
    assert_eq!(c, 0);
    assert_eq!(r["subsets"].as_array().unwrap().len(), 9);
    let (c, _) = structured(&["group", p(&domino)]);
    assert_eq!(c, 0);

    let big = construct(&dir, "direct-triple2x5", 1);
    let o = mubp(&["extract-ortho", "--subsystem", "1", p(&big)]);
    assert_eq!(code(&o), 2, "dimension 5 is outside the supported range");
}

#[test]
fn search_extends_pair_deterministically() {
    let dir = TempDir::new().unwrap();
    let path = construct(&dir, "qubit-triple", 2);
    let mut file: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    file["bases"].as_array_mut().unwrap().truncate(2);
    let pair = dir.path().join("pair.json");
    std::fs::write(&pair, file.to_string()).unwrap();
    let out = dir.path().join("found.json");
    let args = [
        "--restarts",
        "16",
        "--seed",
        "5",
        "search",
        p(&pair),
        "--out",
        p(&out),
    ];
    let first = mubp(&args);
    assert_eq!(code(&first), 0, "{}{}", stdout(&first), stderr(&first));
    assert_eq!(stdout(&mubp(&args)), stdout(&first));
    assert_eq!(code(&mubp(&["verify", p(&out)])), 0);

    // The full triple cannot be extended.
    let o = mubp(&["--restarts", "8", "search", p(&path)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("bounded away"), "{}", stdout(&o));

    assert_eq!(
        code(&mubp(&["search", "--signature", "2,2", "--probe-bound"])),
        2
    );
    assert_eq!(code(&mubp(&["search"])), 2);
}

#[test]
fn entangle_reports_maximally_entangled_vectors() {
    let dir = TempDir::new().unwrap();
    let path = construct(&dir, "qubit-triple", 2);
    let vectors = dir.path().join("vectors.json");
    let (c, r) = structured(&[
        "--restarts",
        "40",
        "entangle",
        p(&path),
        "--out",
        p(&vectors),
    ]);
    assert_eq!(c, 0);
    assert!(r["vectors_found"].as_u64().unwrap() > 0);
    for a in r["audits"].as_array().unwrap() {
        assert_eq!(a["maximally_entangled"], true);
        assert!(a["mixedness_deviation"].as_f64().unwrap() < 1e-8);
    }
    assert!(vectors.exists());
}
