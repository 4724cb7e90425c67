use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn scdag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scdag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = scdag(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const TINY: &str = r#"{"hidden": 8, "epochs_stage1": 1, "epochs_stage2": 2, "batch_size": 8, "classifier": "softmax", "lr_encoder": 0.01, "lr_classifier": 0.01}"#;

fn overfit(dir: &Path) -> PathBuf {
    let d = dir.join("data");
    ok(&["synth", "--kind", "overfit", "--seed", "3", "--out", p(&d)]);
    d
}

#[test]
fn match_reproduces_worked_example() {
    let t = TempDir::new().unwrap();
    let gaz = t.path().join("g.tsv");
    fs::write(
        &gaz,
        "surface\tfine_label\napple\tFood\napple\tOtherPROD\napple iphone 14\tOtherPROD\niphone 14\tOtherPROD\n",
    )
    .unwrap();
    let input = t.path().join("in.txt");
    fs::write(&input, "where to buy apple iphone 14\n").unwrap();
    let out = t.path().join("m");
    ok(&["match", "--gazetteer", p(&gaz), "--input", p(&input), "--format", "text", "--out", p(&out)]);

    let csv = fs::read_to_string(out.join("features.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 68);
    assert_eq!(header[0], "word");
    assert_eq!(header[1], "O");
    let expected: [(&str, &[&str]); 6] = [
        ("where", &["O"]),
        ("to", &["O"]),
        ("buy", &["O"]),
        ("apple", &["B-Food", "B-OtherPROD"]),
        ("iphone", &["B-OtherPROD", "I-OtherPROD"]),
        ("14", &["I-OtherPROD"]),
    ];
    for (word, ones) in expected {
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells[0], word);
        assert_eq!(cells.len(), 68);
        for (name, v) in header.iter().zip(&cells).skip(1) {
            let want = if ones.contains(name) { "1" } else { "0" };
            assert_eq!(*v, want, "{word} / {name}");
        }
    }
    assert_eq!(lines.next(), None);

    let matches = read_json(&out.join("matches.json"));
    assert_eq!(matches[0]["matches"].as_array().unwrap().len(), 3);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn match_empty_input() {
    let t = TempDir::new().unwrap();
    let gaz = t.path().join("g.tsv");
    fs::write(&gaz, "surface\tfine_label\napple\tFood\n").unwrap();
    let input = t.path().join("in.conll");
    fs::write(&input, "").unwrap();
    let out = t.path().join("m");
    ok(&["match", "--gazetteer", p(&gaz), "--input", p(&input), "--out", p(&out)]);
    assert_eq!(fs::read_to_string(out.join("features.csv")).unwrap(), "");
    assert_eq!(read_json(&out.join("matches.json")), Value::Array(vec![]));
}

#[test]
fn exit_codes() {
    let t = TempDir::new().unwrap();
    let missing = t.path().join("nope.conll");
    assert_eq!(scdag(&["evaluate", "--pred", p(&missing), "--gold", p(&missing)]).status.code(), Some(2));
    assert_eq!(scdag(&["evaluate", "--bogus-flag"]).status.code(), Some(2));

    let a = t.path().join("a.conll");
    let b = t.path().join("b.conll");
    fs::write(&a, "x\tO\n\n").unwrap();
    fs::write(&b, "x\tO\ny\tO\n\n").unwrap();
    let out = scdag(&["evaluate", "--pred", p(&a), "--gold", p(&b)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let dump = t.path().join("dump.tsv");
    fs::write(&dump, "").unwrap();
    let out = scdag(&["build-gazetteer", "--dump", p(&dump), "--train", p(&a), "--out", p(&t.path().join("g.tsv"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn build_gazetteer_k1_equals_one_to_one() {
    let t = TempDir::new().unwrap();
    let d = t.path().join("c");
    ok(&["synth", "--kind", "construction", "--seed", "5", "--out", p(&d)]);
    let (dump, reference) = (d.join("dump.tsv"), d.join("reference.conll"));
    let stat = t.path().join("stat.tsv");
    let k1 = t.path().join("k1.tsv");
    let one = t.path().join("one.tsv");
    let report = t.path().join("report.json");
    let table = ok(&[
        "build-gazetteer", "--dump", p(&dump), "--train", p(&reference), "--out", p(&stat), "--report", p(&report),
    ]);
    ok(&["build-gazetteer", "--dump", p(&dump), "--train", p(&reference), "--k", "1", "--out", p(&k1)]);
    ok(&["build-gazetteer", "--dump", p(&dump), "--train", p(&reference), "--mode", "one-to-one", "--out", p(&one)]);
    assert_eq!(fs::read_to_string(&k1).unwrap(), fs::read_to_string(&one).unwrap());

    let table = String::from_utf8(table.stdout).unwrap();
    assert!(table.contains("Total Num."));
    let overall: Vec<&str> = table.lines().last().unwrap().split_whitespace().collect();
    let pct = |s: &str| s.trim_end_matches('%').parse::<f64>().unwrap();
    assert!(pct(overall[2]) > pct(overall[3]), "{table}");
    assert!(read_json(&report)["overall_rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn invalid_config_key_lists_valid_keys() {
    let t = TempDir::new().unwrap();
    let d = overfit(t.path());
    let cfg = t.path().join("cfg.json");
    fs::write(&cfg, r#"{"hidden": 8, "learning_rate": 0.1}"#).unwrap();
    let out = scdag(&["train", "--config", p(&cfg), "--train", p(&d.join("train.conll")), "--out", p(&t.path().join("m"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("learning_rate") && err.contains("lr_encoder") && err.contains("crf_bio_mask"), "{err}");
}

fn train_tiny(root: &Path, data: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let cfg = root.join("tiny.json");
    fs::write(&cfg, TINY).unwrap();
    let out = root.join(name);
    let (train, dev, gaz) = (data.join("train.conll"), data.join("dev.conll"), data.join("gazetteer.tsv"));
    let mut args = vec![
        "train", "--config", p(&cfg), "--train", p(&train), "--dev", p(&dev), "--gazetteer", p(&gaz), "--out", p(&out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn train_is_deterministic_and_alpha_zero_logs_l4_eq_l3() {
    let t = TempDir::new().unwrap();
    let d = overfit(t.path());
    let a = train_tiny(t.path(), &d, "a", &["--seed", "7"]);
    let b = train_tiny(t.path(), &d, "b", &["--seed", "7"]);
    assert_eq!(fs::read(a.join("model.ckpt")).unwrap(), fs::read(b.join("model.ckpt")).unwrap());
    assert_eq!(
        fs::read_to_string(a.join("train_log.jsonl")).unwrap(),
        fs::read_to_string(b.join("train_log.jsonl")).unwrap()
    );
    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 4);

    let z = train_tiny(t.path(), &d, "z", &["--alpha", "0"]);
    let log = fs::read_to_string(z.join("train_log.jsonl")).unwrap();
    let mut stage2 = 0;
    for line in log.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        if rec["stage"] == 2 {
            stage2 += 1;
            assert_eq!(rec["l4"], rec["l3"]);
        }
    }
    assert!(stage2 > 0);
}

#[test]
fn single_model_ensemble_equals_predict() {
    let t = TempDir::new().unwrap();
    let d = overfit(t.path());
    let m = train_tiny(t.path(), &d, "m", &[]);
    let (dev, gaz) = (d.join("dev.conll"), d.join("gazetteer.tsv"));
    let pred = t.path().join("pred.conll");
    let logits = t.path().join("pred.logits");
    ok(&[
        "predict", "--model", p(&m.join("model.ckpt")), "--input", p(&dev), "--gazetteer", p(&gaz), "--out", p(&pred),
        "--logits", p(&logits),
    ]);
    let pred4 = t.path().join("pred4.conll");
    ok(&[
        "predict", "--model", p(&m.join("model.ckpt")), "--input", p(&dev), "--gazetteer", p(&gaz), "--out", p(&pred4),
        "--threads", "4",
    ]);
    let expected = fs::read_to_string(&pred).unwrap();
    assert_eq!(fs::read_to_string(&pred4).unwrap(), expected);

    let avg = t.path().join("avg.conll");
    ok(&["ensemble", "--method", "avg-logits", "--logits", p(&logits), "--input", p(&dev), "--out", p(&avg)]);
    assert_eq!(fs::read_to_string(&avg).unwrap(), expected);
    let vote = t.path().join("vote.conll");
    ok(&["ensemble", "--method", "vote", "--predictions", p(&pred), "--out", p(&vote)]);
    assert_eq!(fs::read_to_string(&vote).unwrap(), expected);
}

#[test]
fn crf_logits_cannot_be_averaged() {
    let t = TempDir::new().unwrap();
    let d = overfit(t.path());
    let m = train_tiny(t.path(), &d, "m", &["--classifier", "crf", "--epochs-stage2", "1"]);
    let dev = d.join("dev.conll");
    let logits = t.path().join("crf.logits");
    ok(&[
        "predict", "--model", p(&m.join("model.ckpt")), "--input", p(&dev), "--out", p(&t.path().join("p.conll")),
        "--logits", p(&logits),
    ]);
    let out = scdag(&["ensemble", "--method", "avg-logits", "--logits", p(&logits), "--input", p(&dev), "--out", p(&t.path().join("e.conll"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("token_vote"));
}

#[test]
fn evaluate_gold_against_itself() {
    let t = TempDir::new().unwrap();
    let d = overfit(t.path());
    let gold = d.join("dev.conll");
    let report = t.path().join("r.json");
    let out = ok(&["evaluate", "--pred", p(&gold), "--gold", p(&gold), "--out", p(&report)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("f-macro@F1"));
    let r = read_json(&report);
    for key in ["fine_macro", "coarse_macro"] {
        for m in ["precision", "recall", "f1"] {
            assert_eq!(r[key][m], 1.0, "{key}.{m}");
        }
    }
    assert_eq!(r["TRUE"], r["RECALLED"]);
    assert_eq!(r["TRUE"], r["PRED"]);
}

#[test]
fn augment_is_seeded() {
    let t = TempDir::new().unwrap();
    let d = overfit(t.path());
    let (train, gaz) = (d.join("train.conll"), d.join("gazetteer.tsv"));
    let run = |name: &str, seed: &str| {
        let out = t.path().join(name);
        ok(&["augment", "--input", p(&train), "--gazetteer", p(&gaz), "--rate", "1", "--seed", seed, "--out", p(&out)]);
        fs::read_to_string(out).unwrap()
    };
    let a = run("a.conll", "1");
    assert_eq!(a, run("b.conll", "1"));
    assert_ne!(a, fs::read_to_string(&train).unwrap());
    assert_eq!(scdag(&["augment", "--gazetteer", p(&gaz), "--out", p(&t.path().join("x"))]).status.code(), Some(2));
}

#[test]
fn kfold_writes_folds_and_summary() {
    let t = TempDir::new().unwrap();
    let d = overfit(t.path());
    let cfg = t.path().join("tiny.toml");
    fs::write(&cfg, "hidden = 8\nepochs_stage1 = 0\nepochs_stage2 = 1\nclassifier = \"softmax\"\n").unwrap();
    let out = t.path().join("k");
    ok(&[
        "kfold", "--config", p(&cfg), "--train", p(&d.join("train.conll")), "--gazetteer", p(&d.join("gazetteer.tsv")),
        "--k", "3", "--out", p(&out), "--test", p(&d.join("dev.conll")), "--threads", "3",
    ]);
    for i in 0..3 {
        assert!(out.join(format!("fold_{i}/model.ckpt")).exists());
    }
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["fold_dev_f1"].as_array().unwrap().len(), 3);
    assert!(s["ensemble_test"]["fine_macro"]["f1"].is_number());
    assert!(out.join("ensemble.conll").exists());
}
