use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepagg")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn synthetic(dir: &Path) -> String {
    let data = s(&dir.join("data"));
    assert!(run(&["gen-synthetic", "--out", &data]).status.success());
    data
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic(dir.path());
    let manifest = format!("{data}/database.tsv");
    let out = s(&dir.path().join("x.dsc"));
    for args in [
        vec!["aggregate", "--manifest", &manifest, "--alpha", "0", "--out", &out],
        vec!["aggregate", "--manifest", &manifest, "--eps", "-1", "--out", &out],
        vec!["aggregate", "--manifest", &manifest, "--spatial", "box", "--out", &out],
        vec!["sweep-alpha", "--data", &data, "--alphas", "0.1", "--dims", "99"],
        vec!["ablate"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_deepagg"))
        .env("DEEPAGG_THREADS", "many")
        .args(["gen-synthetic", "--out", &data])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(&dir.path().join("x.dsc"));
    let o = run(&["aggregate", "--manifest", &s(&dir.path().join("absent.tsv")), "--out", &out]);
    assert_eq!(o.status.code(), Some(3));

    // one degenerate image: the others are still written, the run fails
    let data = synthetic(dir.path());
    std::fs::write(dir.path().join("zero.dft"), [b"DFT1".as_slice(), &1u32.to_le_bytes(), &1u32.to_le_bytes(), &1u32.to_le_bytes(), &0f32.to_le_bytes()].concat()).unwrap();
    let manifest = dir.path().join("m.tsv");
    std::fs::write(&manifest, format!("a\t{data}/tensors/db_c0_000.dft\nz\t{}\n", s(&dir.path().join("zero.dft")))).unwrap();
    let o = run(&["aggregate", "--manifest", &s(&manifest), "--spatial", "none", "--channel", "none", "--out", &out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("z:"));
    assert!(Path::new(&out).exists());
}

#[test]
fn evaluate_prints_table_and_map() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic(dir.path());
    let p = |n: &str| s(&dir.path().join(n));
    for set in ["database", "queries", "whitening"] {
        let o = run(&["aggregate", "--manifest", &format!("{data}/{set}.tsv"), "--out", &p(&format!("{set}.dsc"))]);
        assert!(o.status.success());
    }
    assert!(run(&["whiten-train", "--descriptors", &p("whitening.dsc"), "--dim", "8", "--out", &p("m.whm")]).status.success());
    assert!(run(&["index", "--descriptors", &p("database.dsc"), "--whitening", &p("m.whm"), "--out", &p("db.dsc")]).status.success());
    assert!(run(&["index", "--descriptors", &p("queries.dsc"), "--whitening", &p("m.whm"), "--out", &p("q.dsc")]).status.success());

    let o = run(&["evaluate", "--index", &p("db.dsc"), "--queries", &p("q.dsc"), "--gt", &format!("{data}/gt")]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8, "{text}");
    assert!(lines[1].starts_with("q_c0_000") && lines[1].ends_with("1.0000"));
    assert_eq!(lines[7], "mAP 1.0000");

    let o = run(&["--json", "search", "--index", &p("db.dsc"), "--queries", &p("q.dsc"), "--query", "q_c2_001", "--top", "3"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let hits = v[0]["results"].as_array().unwrap();
    assert_eq!(hits.len(), 3);
    assert!(hits.iter().all(|h| h["image_id"].as_str().unwrap().starts_with("db_c2_")));
}

#[test]
fn ablation_json_uses_cli_mode_names() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_deepagg"))
        .env("DEEPAGG_THREADS", "1")
        .args(["--json", "ablate", "--data", &data, "--dims", "8"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!((rows[5]["spatial"].as_str(), rows[5]["channel"].as_str()), (Some("agauss"), Some("echan")));
    assert_eq!(rows[5]["mAP"].as_f64(), Some(1.0));
}

#[test]
fn viz_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic(dir.path());
    let ppm = dir.path().join("h.ppm");
    for kind in ["response", "gaussian", "weighted"] {
        let o = run(&["viz", "heatmap", "--tensor", &format!("{data}/tensors/db_c1_003.dft"), "--kind", kind, "--scale", "4", "--out", &s(&ppm)]);
        assert!(o.status.success());
        let bytes = std::fs::read(&ppm).unwrap();
        let header = b"P6\n20 20\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 3 * 20 * 20);
    }

    let vecs = dir.path().join("vecs");
    assert!(run(&["viz", "vectors", "--manifest", &format!("{data}/queries.tsv"), "--out", &s(&vecs)]).status.success());
    let csv = dir.path().join("c.csv");
    assert!(run(&["viz", "corr", "--vectors", &s(&vecs), "--metric", "cosine", "--out", &s(&csv)]).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 7);
    assert!(rows[0].starts_with("id,q_c0_000,q_c0_001"));
    assert_eq!(rows[1].split(',').nth(1), Some("1.000000"));
}
