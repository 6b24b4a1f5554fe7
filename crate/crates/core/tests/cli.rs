mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{fixture_dir, json_files};
use serde_json::Value;

fn eqflow<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_eqflow"))
        .args(args)
        .env_remove("EQFLOW_TOL")
        .output()
        .expect("run eqflow")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn corpus(name: &str) -> PathBuf {
    fixture_dir("cli").join("corpus").join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const ARC: &str = r#"{"from":"a","to":"b","g":{"kind":"cost","c":1}}"#;

fn with_arc(arcs: &str, q: &str) -> String {
    format!(r#"{{"nodes":["a","b"],"arcs":[{arcs}],"q":{q}}}"#)
}

fn with_g(g: &str) -> String {
    with_arc(&format!(r#"{{"from":"a","to":"b","g":{g}}}"#), "{}")
}

#[test]
fn malformed_problems_exit_2_naming_the_field() {
    let cases: Vec<(String, &str)> = vec![
        ("{".into(), "EOF"),
        (r#"{"arcs":[],"q":{}}"#.into(), "missing field `nodes`"),
        (r#"{"nodes":3,"arcs":[],"q":{}}"#.into(), "nodes:"),
        (
            with_arc(r#"{"from":"a","g":{"kind":"cost","c":1}}"#, "{}"),
            "arcs[0]: missing field `to`",
        ),
        (
            with_arc(r#"{"from":"zz","to":"b","g":{"kind":"cost","c":1}}"#, "{}"),
            "arcs[0].from",
        ),
        (with_g(r#"{"kind":"quadratic"}"#), "arcs[0].g.kind"),
        (
            with_g(r#"{"kind":"affine","slope":0,"intercept":0}"#),
            "arcs[0].g.slope",
        ),
        (
            with_g(r#"{"kind":"affine","slope":"1","intercept":0}"#),
            "arcs[0].g",
        ),
        (
            with_g(r#"{"kind":"pwl","points":[[1,0],[0,1]],"left_slope":1,"right_slope":1}"#),
            "arcs[0].g.points[1]",
        ),
        (
            with_g(r#"{"kind":"pwl","points":[],"left_slope":1,"right_slope":1}"#),
            "arcs[0].g.points",
        ),
        (
            with_g(r#"{"kind":"pwl","points":[[0,0]],"left_slope":-1,"right_slope":1}"#),
            "arcs[0].g.left_slope",
        ),
        (with_g(r#"{"kind":"penalty","n":1e999}"#), "arcs[0].g.n"),
        (with_g(r#"{"kind":"cost"}"#), "missing field `c`"),
        (with_arc(ARC, r#"{"zz":1}"#), "q.zz"),
        (with_arc(ARC, r#"{"a":"x"}"#), "q.a"),
        (with_arc(ARC, r#"{"a":-1,"b":2}"#), "\"field\":\"q\""),
        (r#"{"nodes":["a","a"],"arcs":[],"q":{}}"#.into(), "nodes[1]"),
        (with_arc(&format!("{ARC},{ARC}"), "{}"), "arcs[1]"),
        (
            with_arc(r#"{"from":"a","to":"a","g":{"kind":"cost","c":1}}"#, "{}"),
            "arcs[0]",
        ),
        (
            r#"{"nodes":["a"],"arcs":[],"q":{},"extra":1}"#.into(),
            "unknown field `extra`",
        ),
        (
            r#"{"meta":{"author":"x"},"nodes":["a"],"arcs":[],"q":{}}"#.into(),
            "meta.author",
        ),
        (
            with_g(r#"{"kind":"affine","slope":1,"intercept":0,"c":2}"#),
            "unknown field `c`",
        ),
    ];
    assert!(cases.len() >= 20);
    let dir = tempfile::tempdir().unwrap();
    for (i, (text, field)) in cases.iter().enumerate() {
        let path = write(dir.path(), &format!("bad{i}.json"), text);
        for cmd in ["check", "solve"] {
            let out = eqflow([cmd.as_ref(), path.as_os_str()]);
            assert_eq!(
                out.status.code(),
                Some(2),
                "case {i} ({cmd}): {}",
                stderr(&out)
            );
            let err = stderr(&out);
            assert!(err.contains(field), "case {i} ({cmd}): {err} lacks {field}");
            let v: Value = serde_json::from_str(err.trim()).unwrap();
            assert!(
                v["error"] == "parse" || v["error"] == "validation",
                "case {i}: {v}"
            );
        }
    }
}

#[test]
fn missing_file_is_an_input_error() {
    let out = eqflow(["check", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_reports_each_assumption() {
    let out = eqflow([corpus("dead_node.json")]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "missing subcommand is a usage error"
    );
    let out = eqflow(["check".as_ref(), corpus("dead_node.json").as_os_str()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["reachability"]["dead_nodes"], serde_json::json!(["lost"]));
}

#[test]
fn check_flags_infeasible_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"nodes":["a","b","c"],"arcs":[
        {"from":"a","to":"b","g":{"kind":"cost","c":1}},
        {"from":"b","to":"a","g":{"kind":"cost","c":1}}],
        "q":{"c":-1,"a":1}}"#;
    let path = write(dir.path(), "p.json", text);
    let out = eqflow(["check".as_ref(), path.as_os_str()]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], false);
    assert_eq!(v["reachability"]["pass"], false);
    assert!(stderr(&out).contains("dead_source"));
}

#[test]
fn solve_reports_profitable_loop_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"nodes":["a","b","t"],"arcs":[
        {"from":"a","to":"b","g":{"kind":"affine","slope":1,"intercept":0.5}},
        {"from":"b","to":"a","g":{"kind":"cost","c":0.25}},
        {"from":"b","to":"t","g":{"kind":"cost","c":1}}],
        "q":{"a":-1,"t":1}}"#;
    let path = write(dir.path(), "p.json", text);
    let out = eqflow(["solve".as_ref(), path.as_os_str()]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(v["error"], "profitable_loop");
    assert_eq!(v["witness"]["loop"], serde_json::json!(["a", "b"]));
}

#[test]
fn all_diagnostics_lists_every_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"nodes":["a","b","c","t"],"arcs":[
        {"from":"a","to":"b","g":{"kind":"cost","c":-1}},
        {"from":"b","to":"a","g":{"kind":"cost","c":-1}},
        {"from":"a","to":"t","g":{"kind":"cost","c":1}}],
        "q":{"a":-1,"c":-1,"t":2}}"#;
    let path = write(dir.path(), "p.json", text);
    let out = eqflow([
        "solve".as_ref(),
        path.as_os_str(),
        "--all-diagnostics".as_ref(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    let kinds: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["error"].as_str().unwrap())
        .collect();
    assert!(kinds.contains(&"dead_source"), "{kinds:?}");
    assert!(kinds.contains(&"profitable_loop"), "{kinds:?}");
}

#[test]
fn solve_ground_and_tolerance() {
    let p = corpus("diamond.json");
    let out = eqflow([
        "solve".as_ref(),
        p.as_os_str(),
        "--ground".as_ref(),
        "d".as_ref(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["solver_meta"]["ground"], "d");
    assert_eq!(v["p"]["d"], 0.0);
    assert_eq!(v["p"]["a"], -3.0);

    let out = eqflow([
        "solve".as_ref(),
        p.as_os_str(),
        "--ground".as_ref(),
        "zz".as_ref(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("\"field\":\"ground\""));

    let out = eqflow([
        "solve".as_ref(),
        p.as_os_str(),
        "--ground".as_ref(),
        "b".as_ref(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "interior nodes cannot be grounded"
    );

    let out = Command::new(env!("CARGO_BIN_EXE_eqflow"))
        .args(["solve".as_ref(), p.as_os_str()])
        .env("EQFLOW_TOL", "1e-6")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["certificate"]["tol"], 1e-6);

    let out = eqflow([
        "solve".as_ref(),
        p.as_os_str(),
        "--tol".as_ref(),
        "2e-7".as_ref(),
    ]);
    assert_eq!(stdout_json(&out)["certificate"]["tol"], 2e-7);
}

#[test]
fn verify_reports_residuals_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let p = corpus("two_sources.json");
    let o = dir.path().join("o.json");
    assert!(eqflow([
        "solve".as_ref(),
        p.as_os_str(),
        "--out".as_ref(),
        o.as_os_str()
    ])
    .status
    .success());
    let out = eqflow(["verify".as_ref(), p.as_os_str(), o.as_os_str()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    assert!(v["cs_residual"].as_f64().unwrap() <= 1e-8);

    let mut doc: Value = serde_json::from_str(&fs::read_to_string(&o).unwrap()).unwrap();
    doc["p"]["t2"] = Value::from(doc["p"]["t2"].as_f64().unwrap() + 1.0);
    let bad = write(dir.path(), "bad.json", &doc.to_string());
    let out = eqflow(["verify".as_ref(), p.as_os_str(), bad.as_os_str()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_json(&out)["max_positive_rent"].as_f64().unwrap() > 0.5);
    // A loose enough tolerance accepts it again.
    let out = eqflow([
        "verify".as_ref(),
        p.as_os_str(),
        bad.as_os_str(),
        "--tol".as_ref(),
        "10".as_ref(),
    ]);
    assert!(out.status.success());

    doc["mu"][0]["to"] = Value::from("nowhere");
    let broken = write(dir.path(), "broken.json", &doc.to_string());
    let out = eqflow(["verify".as_ref(), p.as_os_str(), broken.as_os_str()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mu[0].to"));
}

#[test]
fn tampered_variants_each_fail_verification() {
    let dir = fixture_dir("cli").join("tampered");
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    for entry in manifest.as_array().unwrap() {
        let p = corpus(entry["problem"].as_str().unwrap());
        let o = dir.join(entry["outcome"].as_str().unwrap());
        let out = eqflow(["verify".as_ref(), p.as_os_str(), o.as_os_str()]);
        assert_eq!(out.status.code(), Some(1), "{entry}");
        assert_eq!(stdout_json(&out)["pass"], false);
    }
}

#[test]
fn reduce_lists_margins_and_reduced_arcs() {
    let out = eqflow(["reduce".as_ref(), corpus("two_sources.json").as_os_str()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(
        v["sources"][0],
        serde_json::json!({"node": "s1", "mass": 1.5})
    );
    assert_eq!(
        v["targets"][1],
        serde_json::json!({"node": "t2", "mass": 3.0})
    );
    let arcs = v["arcs"].as_array().unwrap();
    assert_eq!(arcs.len(), 4);
    // s2 reaches t2 directly at cost 4 or via the hub at cost 3.5.
    let s2t2 = arcs
        .iter()
        .find(|a| a["from"] == "s2" && a["to"] == "t2")
        .unwrap();
    assert_eq!(s2t2["g"]["intercept"], -3.5);
}

#[test]
fn decompose_and_export_dot() {
    let dir = tempfile::tempdir().unwrap();
    let p = corpus("cycle.json");
    let o = dir.path().join("o.json");
    assert!(eqflow([
        "solve".as_ref(),
        p.as_os_str(),
        "--out".as_ref(),
        o.as_os_str()
    ])
    .status
    .success());
    let out = eqflow(["decompose".as_ref(), p.as_os_str(), o.as_os_str()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["loop_mass"], 0.0);
    assert_eq!(
        v["paths"][0]["nodes"],
        serde_json::json!(["s", "u", "v", "t"])
    );

    let tampered = fixture_dir("cli")
        .join("tampered")
        .join("05_cycle.outcome.json");
    let v = stdout_json(&eqflow([
        "decompose".as_ref(),
        p.as_os_str(),
        tampered.as_os_str(),
    ]));
    assert_eq!(v["loop_mass"], 1.0);

    let dot = dir.path().join("g.dot");
    let out = eqflow([
        "export-dot".as_ref(),
        p.as_os_str(),
        "--outcome".as_ref(),
        o.as_os_str(),
        "--out".as_ref(),
        dot.as_os_str(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("digraph"));
    assert!(text.contains("\"u\" -> \"v\""));
    assert!(text.contains("flow=1"));
}

#[test]
fn import_dimacs_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(
        dir.path(),
        "t.min",
        "c two-arc chain\np min 3 2\nn 1 2\nn 3 -2\na 1 2 0 10 1\na 2 3 0 10 2\n",
    );
    let prob = dir.path().join("t.json");
    let out = eqflow([
        "import-dimacs".as_ref(),
        src.as_os_str(),
        "--out".as_ref(),
        prob.as_os_str(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = eqflow(["solve".as_ref(), prob.as_os_str()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["p"]["3"], 3.0);
    assert_eq!(v["mu"][1]["flow"], 2.0);

    let bad = write(dir.path(), "bad.min", "p min 2 1\na 1 2 1 10 1\n");
    let out = eqflow(["import-dimacs".as_ref(), bad.as_os_str()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn batch_matches_single_solves() {
    let dir = tempfile::tempdir().unwrap();
    let files = json_files(&fixture_dir("cli").join("corpus"));
    for f in &files {
        fs::copy(f, dir.path().join(f.file_name().unwrap())).unwrap();
    }
    let out = eqflow(["solve".as_ref(), "--batch".as_ref(), dir.path().as_os_str()]);
    assert!(out.status.success(), "{}", stderr(&out));
    // Outputs are skipped when the directory is processed again.
    let again = eqflow(["solve".as_ref(), "--batch".as_ref(), dir.path().as_os_str()]);
    assert!(again.status.success());
    assert_eq!(
        String::from_utf8_lossy(&again.stdout).lines().count(),
        files.len()
    );
    for f in &files {
        let stem = f.file_stem().unwrap().to_string_lossy();
        let batch = fs::read(dir.path().join(format!("{stem}.outcome.json"))).unwrap();
        let single = eqflow(["solve".as_ref(), f.as_os_str()]);
        assert_eq!(batch, single.stdout, "{stem}");
    }
}

#[test]
fn batch_rejects_problem_argument() {
    let out = eqflow(["solve", "x.json", "--batch", "dir"]);
    assert_eq!(out.status.code(), Some(2));
}
