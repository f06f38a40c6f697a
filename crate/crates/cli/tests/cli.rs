use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cascade_cli::RunConfig;
use cascade_core::oracle_eval;
use cascade_core::question::parse_canonical_line;
use serde_json::Value;

fn cascade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write_config(dir: &Path, value: &Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

/// A 1-digit, 1-layer model small enough to train in seconds.
fn tiny_config() -> Value {
    let mut v = serde_json::to_value(RunConfig::default()).unwrap();
    v["model"]["n_digits"] = 1.into();
    v["model"]["n_layers"] = 1.into();
    v["model"]["n_heads"] = 2.into();
    v["model"]["d_head"] = 8.into();
    v["model"]["d_model"] = 16.into();
    v["model"]["d_mlp"] = 32.into();
    v["model"]["context_len"] = 7.into();
    v["data"]["n_digits"] = 1.into();
    v["train"]["total_steps"] = 30.into();
    v["train"]["batch_size"] = 16.into();
    v["interp"]["analysis"]["probe_size"] = 40.into();
    v["interp"]["analysis"]["reference_size"] = 100.into();
    v["interp"]["analysis"]["tagging"]["pca_per_value"] = 10.into();
    v["interp"]["analysis"]["tagging"]["n_pairs"] = 10.into();
    v
}

#[test]
fn bundled_default_config_matches_defaults() {
    let cfg = RunConfig::load(&configs().join("default.json")).unwrap();
    assert_eq!(cfg, RunConfig::default());
    let o = cascade(&["show-config"]);
    assert!(o.status.success());
    let shown: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(shown, serde_json::to_value(RunConfig::default()).unwrap());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&RunConfig::default().hash()));
}

#[test]
fn bundled_desk_configs_load() {
    let add = RunConfig::load(&configs().join("add3.json"))
        .unwrap()
        .train_config();
    assert_eq!(
        (add.model.n_digits, add.model.n_layers, add.model.n_heads),
        (3, 2, 3)
    );
    assert_eq!((add.total_steps, add.stop_loss), (10_000, None));
    let mixed = RunConfig::load(&configs().join("mixed3.json")).unwrap();
    assert_eq!(mixed.data.curriculum.sub, 0.8);
    assert_eq!(mixed.model.d_model, add.model.d_model);
    assert!(matches!(
        mixed.train_config().init,
        cascade_train::Init::FromAddition { .. }
    ));
}

#[test]
fn unknown_keys_are_all_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = serde_json::to_value(RunConfig::default()).unwrap();
    v["trian"] = Value::Null;
    v["model"]["n_layer"] = 2.into();
    v["interp"]["analysis"]["tagging"]["pca_thresh"] = 0.5.into();
    let path = write_config(dir.path(), &v);
    let o = cascade(&["--config", path.to_str().unwrap(), "show-config"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    let details = err["details"].to_string();
    for key in [
        "trian",
        "model.n_layer",
        "interp.analysis.tagging.pca_thresh",
    ] {
        assert!(details.contains(key), "{key} missing from {details}");
    }
}

#[test]
fn invalid_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = serde_json::to_value(RunConfig::default()).unwrap();
    v["version"] = 99.into();
    let path = write_config(dir.path(), &v);
    let o = cascade(&["--config", path.to_str().unwrap(), "show-config"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("version"));
}

#[test]
fn config_hash_ignores_key_order_and_tracks_seeds() {
    let a = RunConfig::default();
    let text = serde_json::to_string(&a).unwrap();
    let mut value: serde_json::Map<String, Value> = serde_json::from_str(&text).unwrap();
    let reversed: serde_json::Map<String, Value> =
        std::mem::take(&mut value).into_iter().rev().collect();
    let b = RunConfig::from_json(&Value::Object(reversed).to_string()).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    let c = a.clone().with_seed(7);
    assert_ne!(a.hash(), c.hash());
    assert_eq!(c.model.seed, 7);
    assert_eq!(c.data.seed, 7);
    assert_eq!(c.interp.analysis.seed, 7);
}

#[test]
fn oracle_answers_and_rejects() {
    let o = cascade(&["oracle", "555+448"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "+1003");
    assert_eq!(stdout(&cascade(&["oracle", "123-456"])).trim(), "-0333");
    let bad = cascade(&["oracle", "12+x"]);
    assert_eq!(bad.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(err["error"], "arith");
}

#[test]
fn generated_data_matches_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let o = cascade(&["--out", out.to_str().unwrap(), "gen-data", "--batches", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("data.txt")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2 * RunConfig::default().train.batch_size);
    for line in lines {
        let (q, a) = parse_canonical_line(line).unwrap();
        assert_eq!(oracle_eval(&q), a, "{line}");
    }
    let run: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["config_hash"], RunConfig::default().hash());
}

#[test]
fn mock_survey_scores() {
    let dir = tempfile::tempdir().unwrap();
    let o = cascade(&["--out", dir.path().to_str().unwrap(), "survey", "--mock"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    let scores: Vec<(String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().to_string())
        })
        .collect();
    let expected = [
        ("mock-exact", "12"),
        ("mock-five-digit", "5"),
        ("mock-verbose", "12"),
        ("mock-wordy", "0"),
    ];
    for (model, score) in expected {
        assert!(
            scores.contains(&(model.to_string(), score.to_string())),
            "{model}: {csv}"
        );
    }
    assert!(dir.path().join("transcripts.json").exists());
}

#[test]
fn train_eval_analyze_render_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let cfg = cfg.to_str().unwrap();
    let train_out = dir.path().join("train");
    let o = cascade(&[
        "--config",
        cfg,
        "--out",
        train_out.to_str().unwrap(),
        "train",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = train_out.join("model.ckpt");
    assert!(ckpt.exists() && train_out.join("training_loss.json").exists());

    let eval_out = dir.path().join("eval");
    let o = cascade(&[
        "--config",
        cfg,
        "--out",
        eval_out.to_str().unwrap(),
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--n",
        "500",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(eval_out.join("eval_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["total"]["n"], 500);
    assert!(report["config_hash"].is_string());

    let analyze_out = dir.path().join("analyze");
    let o = cascade(&[
        "--config",
        cfg,
        "--out",
        analyze_out.to_str().unwrap(),
        "analyze",
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "behaviors.json",
        "features.json",
        "analysis.json",
        "run.json",
    ] {
        assert!(analyze_out.join(f).exists(), "{f}");
    }
    let maps: Vec<PathBuf> = std::fs::read_dir(analyze_out.join("maps"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert!(!maps.is_empty());

    let render_out = dir.path().join("render");
    let o = cascade(&[
        "--out",
        render_out.to_str().unwrap(),
        "render",
        "--analysis",
        analyze_out.join("analysis.json").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for m in maps {
        let redrawn = render_out.join(m.file_name().unwrap());
        assert_eq!(
            std::fs::read(&m).unwrap(),
            std::fs::read(&redrawn).unwrap(),
            "{}",
            m.display()
        );
    }
}

#[test]
fn missing_checkpoint_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cascade(&[
        "--out",
        dir.path().to_str().unwrap(),
        "eval",
        "--checkpoint",
        dir.path().join("absent.ckpt").to_str().unwrap(),
        "--n",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().len() > 0);
}
