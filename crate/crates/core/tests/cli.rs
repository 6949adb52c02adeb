use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xai-disparity"))
        .args(args)
        .env_remove("AUDIT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn gen(path: &Path, pairs: usize, injection: &str, seed: u64) {
    let o = bin(&[
        "gen-data",
        "--pairs",
        &pairs.to_string(),
        "--injection",
        injection,
        "--seed",
        &seed.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

/// Grid rows between the header and the blank line before the legend.
fn grid_rows(out: &str) -> Vec<Vec<String>> {
    out.lines()
        .take_while(|l| !l.is_empty())
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect()
}

#[test]
fn gen_data_writes_twenty_rows_for_ten_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    gen(&path, 10, "none", 7);
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["pair_id", "subgroup", "text", "label"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 20);
    let mut ids: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 10);
}

#[test]
fn gen_data_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    gen(&a, 25, "noise", 3);
    gen(&b, 25, "noise", 3);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    gen(&c, 25, "noise", 4);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn length_injection_lengthens_female_texts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("len.csv");
    gen(&path, 30, "length", 1);
    let o = bin(&["validate", "--dataset", path.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let male = v["groups"][0]["mean_tokens"].as_f64().unwrap();
    let female = v["groups"][1]["mean_tokens"].as_f64().unwrap();
    assert!(female >= male + 2.0, "{male} vs {female}");
}

#[test]
fn missing_dataset_exits_2_and_names_the_path() {
    let o = bin(&["audit", "--dataset", "/no/such/dir/data.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("/no/such/dir/data.csv"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn config_errors_exit_1() {
    let o = bin(&["audit", "--dataset", "x.csv", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = bin(&["audit", "--dataset", "x.csv", "--unknown-flag"]);
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_xai-disparity"))
        .args(["audit", "--dataset", "x.csv"])
        .env("AUDIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_report_dir_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["report", "/no/such/report"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tied_audit_on_symmetric_pairs_prints_an_all_zero_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("none.csv");
    gen(&path, 40, "none", 5);
    let o = bin(&[
        "audit",
        "--dataset",
        path.to_str().unwrap(),
        "--tied-embeddings",
        "--runs",
        "2",
        "--epochs",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows = grid_rows(&out);
    assert_eq!(rows.len(), 7);
    for row in &rows[1..] {
        assert_eq!(row.len(), 7);
        assert!(row[1..].iter().all(|c| c == "0"), "{row:?}");
    }
    let config: serde_json::Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(config["tied_embeddings"], true);
    assert_eq!(config["runs"], 2);
}

#[test]
fn metric_selection_sets_the_grid_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("len.csv");
    gen(&path, 30, "length", 2);
    let o = bin(&[
        "audit",
        "--dataset",
        path.to_str().unwrap(),
        "--runs",
        "1",
        "--epochs",
        "3",
        "--methods",
        "GRAD,LIME",
        "--metrics",
        "gini,sparsity",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = grid_rows(&stdout(&o));
    assert_eq!(rows[0], ["method", "Gini", "Spars."]);
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r.len() == 3));
}

#[test]
fn report_renders_one_svg_per_cell_and_reemits_scores() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let report = dir.path().join("report");
    gen(&data, 30, "length", 9);
    let o = bin(&[
        "audit",
        "--dataset",
        data.to_str().unwrap(),
        "--runs",
        "2",
        "--epochs",
        "3",
        "--methods",
        "IG",
        "--metrics",
        "soft_sufficiency",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let audit_out = stdout(&o);

    let plots = dir.path().join("plots");
    let o = bin(&[
        "report",
        report.to_str().unwrap(),
        "--format",
        "svg",
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svgs: Vec<_> = fs::read_dir(&plots)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(svgs.len(), 1);
    assert!(svgs[0].ends_with("IG_soft_sufficiency.svg"));

    let o = bin(&["report", report.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).as_bytes(),
        fs::read(report.join("scores.csv")).unwrap()
    );

    let o = bin(&["report", report.to_str().unwrap()]);
    assert_eq!(stdout(&o), audit_out);
}

#[test]
fn train_writes_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    let model = dir.path().join("m/model.json");
    gen(&data, 20, "none", 1);
    let o = bin(&[
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--epochs",
        "5",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        summary["n_train"].as_u64().unwrap() + summary["n_test"].as_u64().unwrap(),
        40
    );
    assert!(xai_disparity::textmodel::load_model(&model).is_ok());
}
