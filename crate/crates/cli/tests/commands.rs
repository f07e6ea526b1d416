use std::path::{Path, PathBuf};
use std::process::Command;

use num::{BigRational, ToPrimitive};
use scanclass::segmentation::{load_manifest, save_manifest};
use scanclass::synth::{write_png, RenderStyle};
use scanclass::textclass::{save_corpus, tokenize};
use scanclass::{Document, GrayImage, ModelKind};
use scanclass_cli::commands::*;
use scanclass_cli::{exit, CliError, PipelineConfig};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scanclass"))
}

fn doc(id: &str, text: &str, label: &str) -> Document {
    Document {
        doc_id: id.into(),
        text: text.into(),
        label: Some(label.into()),
    }
}

fn synth(dir: &Path) -> SynthSummary {
    cmd_synth(dir, &RenderStyle::default(), None, 40, &PipelineConfig::default()).unwrap()
}

#[test]
fn grid_sheet_segments_into_312_labeled_blobs() {
    let dir = TempDir::new().unwrap();
    let fx = synth(dir.path());
    let s = cmd_segment(&fx.sheet, &PipelineConfig::default(), true, None).unwrap();
    assert_eq!(s.manifest_path, dir.path().join("sheet.json"));
    assert_eq!((s.blob_count, s.labeled), (312, 312));
    assert!(s.warnings.is_empty());
    let m = load_manifest(&s.manifest_path).unwrap();
    assert_eq!(m.image_path, "sheet.png");
    assert_eq!(m.blobs.iter().filter(|b| b.label == Some('Q')).count(), 12);
}

#[test]
fn blank_page_gives_empty_manifest_and_warning() {
    let dir = TempDir::new().unwrap();
    let page = dir.path().join("blank.png");
    write_png(&GrayImage::filled(40, 30, 255), &page).unwrap();
    let out = bin().arg("segment").arg(&page).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let m = load_manifest(dir.path().join("blank.json")).unwrap();
    assert!(m.blobs.is_empty());
    assert_eq!((m.image_w, m.image_h), (40, 30));
}

#[test]
fn missing_file_exits_2() {
    let out = bin().args(["segment", "/nonexistent/page.png"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no such file"));
    assert!(out.stdout.is_empty());
}

#[test]
fn export_writes_three_lines_per_blob() {
    let dir = TempDir::new().unwrap();
    let fx = synth(dir.path());
    let seg = cmd_segment(&fx.sheet, &PipelineConfig::default(), true, None).unwrap();
    let out = dir.path().join("train.txt");
    let s = cmd_export_features(&seg.manifest_path, None, &out, &PipelineConfig::default()).unwrap();
    assert_eq!(s.samples, 312);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 936);
}

#[test]
fn unlabeled_blob_exits_3_naming_it() {
    let dir = TempDir::new().unwrap();
    let fx = synth(dir.path());
    let seg = cmd_segment(&fx.sheet, &PipelineConfig::default(), true, None).unwrap();
    let mut m = load_manifest(&seg.manifest_path).unwrap();
    m.blobs[17].label = None;
    let id = m.blobs[17].id;
    save_manifest(&m, &seg.manifest_path).unwrap();

    let err = cmd_export_features(&seg.manifest_path, None, &dir.path().join("t.txt"), &PipelineConfig::default())
        .unwrap_err();
    assert_eq!(err.exit_code(), exit::UNLABELED);

    let out = bin()
        .arg("export-features")
        .arg(&seg.manifest_path)
        .arg("--out")
        .arg(dir.path().join("t.txt"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("[{id}]")));
    assert!(!dir.path().join("t.txt").exists());
}

#[test]
fn empty_manifest_exports_empty_file() {
    let dir = TempDir::new().unwrap();
    let page = dir.path().join("blank.png");
    write_png(&GrayImage::filled(10, 10, 255), &page).unwrap();
    let seg = cmd_segment(&page, &PipelineConfig::default(), false, None).unwrap();
    let out = dir.path().join("t.txt");
    let s = cmd_export_features(&seg.manifest_path, None, &out, &PipelineConfig::default()).unwrap();
    assert_eq!(s.samples, 0);
    assert_eq!(s.warnings.len(), 1);
    assert_eq!(std::fs::read(&out).unwrap(), b"");
}

#[test]
fn compare_identical_files() {
    let dir = TempDir::new().unwrap();
    let fx = synth(dir.path());
    let report_path = dir.path().join("report.json");
    let r = cmd_compare(&fx.truth, &fx.truth, Some(&report_path)).unwrap();
    assert_eq!((r.char_match_display.as_str(), r.word_match_display.as_str()), ("100.00", "100.00"));
    let saved: scanclass::DiffReport = serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(saved, r);

    let out = bin().arg("compare").arg(&fx.truth).arg(&fx.truth).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let printed: scanclass::DiffReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, r);
}

#[test]
fn compare_empty_original_exits_8() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let err = cmd_compare(&empty, &empty, None).unwrap_err();
    assert_eq!(err.exit_code(), exit::TEXT);
}

#[test]
fn commands_are_idempotent() {
    let dir = TempDir::new().unwrap();
    let fx = synth(dir.path());
    let mut cfg = PipelineConfig::default();
    cfg.hyperparams.iterations = 20;
    let seg = cmd_segment(&fx.sheet, &cfg, true, None).unwrap();
    let first_manifest = std::fs::read(&seg.manifest_path).unwrap();
    cmd_segment(&fx.sheet, &cfg, true, None).unwrap();
    assert_eq!(std::fs::read(&seg.manifest_path).unwrap(), first_manifest);

    let training = dir.path().join("t.txt");
    cmd_export_features(&seg.manifest_path, None, &training, &cfg).unwrap();
    let first_training = std::fs::read(&training).unwrap();
    let model = dir.path().join("m.json");
    cmd_train_ocr(&training, &model, ModelKind::Logreg, &cfg).unwrap();
    let first_model = std::fs::read(&model).unwrap();

    cmd_export_features(&seg.manifest_path, None, &training, &cfg).unwrap();
    cmd_train_ocr(&training, &model, ModelKind::Logreg, &cfg).unwrap();
    assert_eq!(std::fs::read(&training).unwrap(), first_training);
    assert_eq!(std::fs::read(&model).unwrap(), first_model);
}

#[test]
fn pipeline_with_centroid_model() {
    let dir = TempDir::new().unwrap();
    let fx = synth(&dir.path().join("fx"));
    let out_dir = dir.path().join("run");
    let inputs = PipelineInputs {
        train_image: &fx.sheet,
        train_manifest: None,
        test_image: &fx.page,
        truth: &fx.truth,
        out_dir: &out_dir,
        kind: ModelKind::Centroid,
    };
    let s = cmd_pipeline(&inputs, &PipelineConfig::default()).unwrap();
    assert_eq!(s.blob_count, 312);
    assert!(s.report.char_match_pct >= 98.0, "{:?}", s.report);
    for f in ["sheet.json", "training.txt", "model.json", "recognized.txt", "report.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    // Inputs are left alone.
    assert!(!fx.sheet.with_extension("json").exists());
}

#[test]
fn grid_mismatch_exits_6() {
    let dir = TempDir::new().unwrap();
    let fx = synth(dir.path());
    let out = bin()
        .args(["segment", "--grid", "--alphabet", "ABCDEFGHIJKLMNOPQRSTUVWXYZ0"])
        .arg(&fx.sheet)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_and_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, r#"{"serve_port": 80}"#).unwrap();
    let out = bin().arg("--config").arg(&cfg_path).args(["compare", "a", "b"]).output().unwrap();
    assert_eq!(out.status.code(), Some(9));

    let fx = synth(dir.path());
    let out = bin()
        .arg("--config")
        .arg(&cfg_path)
        .args(["--port", "8080", "compare"])
        .arg(&fx.truth)
        .arg(&fx.truth)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));

    std::fs::write(&cfg_path, r#"{"min_area": 100000}"#).unwrap();
    let out = bin().arg("--config").arg(&cfg_path).arg("segment").arg(&fx.sheet).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("0 blobs"));
}

#[test]
fn bad_config_file_exits_9() {
    let dir = TempDir::new().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, "{ nope").unwrap();
    let out = bin().arg("--config").arg(&cfg_path).args(["compare", "a", "b"]).output().unwrap();
    assert_eq!(out.status.code(), Some(9));
    assert!(matches!(
        PipelineConfig::load(&cfg_path),
        Err(CliError::Config(_))
    ));
}

// The 4-document fixture: two training documents per class.
fn hand_fixture() -> (Vec<Document>, Vec<Document>) {
    let train = vec![
        doc("1", "cat cat fish", "A"),
        doc("2", "cat bird", "A"),
        doc("3", "dog dog fish", "B"),
        doc("4", "dog bird bird", "B"),
    ];
    let test = vec![
        doc("t1", "cat fish", "A"),
        doc("t2", "bird bird fish", "A"),
        doc("t3", "dog", "B"),
        doc("t4", "fish fish", "B"),
    ];
    (train, test)
}

// Multinomial NB with add-one smoothing in exact rational arithmetic.
fn rational_predict(train: &[Document], text: &str) -> String {
    let mut classes: Vec<String> = train.iter().map(|d| d.label.clone().unwrap()).collect();
    classes.sort();
    classes.dedup();
    let mut vocab: Vec<String> = train.iter().flat_map(|d| tokenize(&d.text, false)).collect();
    vocab.sort();
    vocab.dedup();
    let v = vocab.len() as i64;
    let mut best: Option<(BigRational, String)> = None;
    for c in &classes {
        let docs: Vec<&Document> = train.iter().filter(|d| d.label.as_ref() == Some(c)).collect();
        let tokens: Vec<String> = docs.iter().flat_map(|d| tokenize(&d.text, false)).collect();
        let mut score = BigRational::new(docs.len().into(), train.len().into());
        for t in tokenize(text, false) {
            if !vocab.contains(&t) {
                continue;
            }
            let count = tokens.iter().filter(|w| **w == t).count() as i64;
            score *= BigRational::new((count + 1).into(), (tokens.len() as i64 + v).into());
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, c.clone()));
        }
    }
    best.unwrap().1
}

#[test]
fn eval_nb_on_hand_fixture_matches_rational_oracle() {
    let dir = TempDir::new().unwrap();
    let (train, test) = hand_fixture();
    let train_path = dir.path().join("train.json");
    let test_path = dir.path().join("test.json");
    save_corpus(&train, &train_path).unwrap();
    save_corpus(&test, &test_path).unwrap();

    let model = dir.path().join("nb.json");
    let s = cmd_train_nb(&train_path, &model, &PipelineConfig::default()).unwrap();
    assert_eq!(s.classes, vec!["A", "B"]);
    let report = dir.path().join("eval.json");
    let eval = cmd_eval_nb(&model, &test_path, Some(&report)).unwrap();

    let correct = test
        .iter()
        .filter(|d| rational_predict(&train, &d.text) == *d.label.as_ref().unwrap())
        .count();
    let expected = BigRational::new(correct.into(), test.len().into());
    assert_eq!(eval.accuracy, expected.to_f64().unwrap());
    assert_eq!(eval.n_test, 4);
    assert!(report.is_file());

    let inputs: Vec<PathBuf> = test
        .iter()
        .map(|d| {
            let p = dir.path().join(format!("{}.txt", d.doc_id));
            std::fs::write(&p, &d.text).unwrap();
            p
        })
        .collect();
    for (c, d) in cmd_classify(&model, &inputs).unwrap().iter().zip(&test) {
        assert_eq!(c.label, rational_predict(&train, &d.text));
        let sum: f64 = c.posteriors.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ingest_smart_files_and_directories() {
    let dir = TempDir::new().unwrap();
    let smart = dir.path().join("med.all");
    std::fs::write(
        &smart,
        ".I 1\n.T\nA title\n.W\nblood pressure study\n.X\n1 2 3\n.I 2\n.W\nheart rate\n",
    )
    .unwrap();
    let class_dir = dir.path().join("classes").join("cisi");
    std::fs::create_dir_all(&class_dir).unwrap();
    std::fs::write(class_dir.join("a.txt"), "library indexing").unwrap();

    let out = dir.path().join("corpus.json");
    let s = cmd_ingest_corpus(
        &[("med".into(), smart)],
        &[dir.path().join("classes")],
        &out,
    )
    .unwrap();
    assert_eq!(s.documents, 3);
    assert_eq!(s.per_class["med"], 2);
    assert_eq!(s.per_class["cisi"], 1);
    let docs = scanclass::textclass::load_corpus(&out).unwrap();
    assert_eq!(docs[0].doc_id, "med:1");
    assert_eq!(docs[0].text.trim(), "blood pressure study");

    let out = bin()
        .args(["ingest-corpus", "--out"])
        .arg(dir.path().join("x.json"))
        .arg("--class")
        .arg(format!("med={}", dir.path().join("missing.all").display()))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replication_reports_both_modes() {
    let mut docs = Vec::new();
    for i in 0..60 {
        docs.push(doc(&format!("a{i}"), &format!("alpha beta common{} gamma", i % 7), "A"));
        docs.push(doc(&format!("b{i}"), &format!("delta epsilon common{} zeta", i % 5), "B"));
    }
    let split = SplitSpec {
        n_train: 100,
        n_test: 20,
        seed: 3,
        k: 5,
    };
    let r = replicate_nb(&docs, split, false).unwrap();
    assert_eq!(r.significant.n_test, 20);
    assert_eq!(r.full_bag.n_train, 100);
    assert_eq!(r.significant.feature_mode, "significant_k(5)");
    assert_eq!(r.full_bag.feature_mode, "full_bag");
    assert_eq!(r.regression_warning.is_some(), r.full_bag.accuracy < r.significant.accuracy);
    assert_eq!(replicate_nb(&docs, split, false).unwrap(), r);
}
