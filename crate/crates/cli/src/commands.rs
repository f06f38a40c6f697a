use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use cascade_core::question::canonical_line;
use cascade_core::{gen_batch, oracle_eval, Question, QuestionClass};
use cascade_interp::poly::node_usage;
use cascade_interp::{
    analyze, inserted_nodes, polysemanticity_report, render_maps, Analysis, AnalysisConfig, Grid,
    PolysemanticityReport, SubtaskTag, UsefulNodes,
};
use cascade_model::{load_checkpoint, Checkpoint, ModelConfig, Placement, Transformer};
use cascade_survey::{
    run_survey, write_results, ChatCompletions, MockGateway, MockModel, PromptSuite, SurveyResults,
};
use cascade_train::{
    evaluate, seed_sweep, train, write_outputs, EvalReport, Init, SweepSummary, TrainConfig,
    TrainOutcome,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes `run.json`: the command, the config and its hash.
pub fn write_run_record(out: &Path, command: &str, cfg: &RunConfig, extra: Value) -> Result<()> {
    write_json(
        &out.join("run.json"),
        &json!({
            "command": command,
            "config_hash": cfg.hash(),
            "config": cfg,
            "extra": extra,
        }),
    )
}

fn with_hash(mut value: Value, cfg: &RunConfig) -> Value {
    if let Value::Object(map) = &mut value {
        map.insert("config_hash".into(), Value::String(cfg.hash()));
    }
    value
}

/// Writes the first `batches` training batches as `question=answer` lines.
pub fn gen_data(cfg: &RunConfig, batches: u64, out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let path = out.join("data.txt");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    for step in 0..batches {
        let batch = gen_batch(&cfg.data, cfg.train.batch_size, step);
        for (q, a) in batch.questions.iter().zip(&batch.answers) {
            writeln!(file, "{}", canonical_line(q, a))?;
        }
    }
    file.flush()?;
    write_run_record(out, "gen-data", cfg, json!({"batches": batches}))?;
    Ok(path)
}

/// `"555+448"` gives `"+1003"`.
pub fn oracle(question: &str) -> Result<String> {
    Ok(oracle_eval(&Question::parse(question, None)?).to_string())
}

pub fn train_model(cfg: &RunConfig, out: &Path, verbose: bool) -> Result<TrainOutcome> {
    let tc = cfg.train_config();
    let every = (tc.total_steps / 20).max(1);
    let outcome = train(&tc, Some(out), &mut |s| {
        if verbose && s.step % every == 0 {
            eprintln!("step {:>6} loss {:.3e} lr {:.2e}", s.step, s.loss, s.lr);
        }
    })?;
    write_outputs(out, &outcome, json!({"config_hash": cfg.hash()}))?;
    write_run_record(
        out,
        "train",
        cfg,
        json!({"final_loss": outcome.log.final_.loss}),
    )?;
    Ok(outcome)
}

/// The training config recorded in a checkpoint, when there is one.
pub fn checkpoint_train_config(ckpt: &Checkpoint) -> Option<TrainConfig> {
    serde_json::from_value(ckpt.metadata.get("train_config")?.clone()).ok()
}

pub fn eval_model(cfg: &RunConfig, checkpoint: &Path, n: u64, out: &Path) -> Result<EvalReport> {
    let ckpt = load_checkpoint(checkpoint)?;
    let curriculum =
        checkpoint_train_config(&ckpt).map_or(cfg.data.curriculum, |t| t.data.curriculum);
    let report = evaluate(
        &ckpt.model,
        ckpt.model.config.n_digits,
        n,
        curriculum,
        cfg.eval.seed,
    )?;
    write_json(
        &out.join("eval_report.json"),
        &with_hash(serde_json::to_value(&report)?, cfg),
    )?;
    std::fs::write(out.join("eval_report.csv"), report.to_csv())?;
    write_run_record(out, "eval", cfg, json!({"checkpoint": checkpoint}))?;
    Ok(report)
}

/// Serialized analysis state that `render` redraws maps from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub model: ModelConfig,
    pub tags: Vec<SubtaskTag>,
    pub useful: BTreeMap<String, UsefulNodes>,
}

pub struct AnalyzeOutput {
    pub analysis: Analysis,
    pub polysemanticity: Option<PolysemanticityReport>,
}

fn classes_of(cfg: &RunConfig, ckpt: &Checkpoint) -> Vec<QuestionClass> {
    match checkpoint_train_config(ckpt) {
        Some(t) => RunConfig {
            data: t.data,
            ..cfg.clone()
        }
        .classes(),
        None => cfg.classes(),
    }
}

/// Nodes the donor relies on for addition, mapped into the target.
pub fn inserted_from_donor(
    donor: &Transformer,
    target: &ModelConfig,
    placement: Placement,
    analysis: &AnalysisConfig,
) -> Result<std::collections::BTreeSet<cascade_model::NodeId>> {
    let a = analyze(
        donor,
        &cascade_interp::AlgorithmSchema::addition(),
        &[QuestionClass::Add],
        analysis,
    )?;
    let used = node_usage(&a.useful_by_class(), &a.tags)
        .into_values()
        .flatten()
        .collect();
    Ok(inserted_nodes(&used, &donor.config, target, placement))
}

pub fn analyze_model(
    cfg: &RunConfig,
    checkpoint: &Path,
    donor: Option<&Path>,
    out: &Path,
) -> Result<AnalyzeOutput> {
    let ckpt = load_checkpoint(checkpoint)?;
    let classes = classes_of(cfg, &ckpt);
    if classes.is_empty() {
        return Err(CliError::Usage(
            "the curriculum trains no question class".into(),
        ));
    }
    let schema = cfg.schema()?;
    let analysis = analyze(&ckpt.model, &schema, &classes, &cfg.interp.analysis)?;
    analysis.emit_facts(out)?;
    for name in ["behaviors.json", "features.json"] {
        let path = out.join(name);
        let value: Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        write_json(&path, &with_hash(value, cfg))?;
    }
    let record = AnalysisRecord {
        model: ckpt.model.config.clone(),
        tags: analysis.tags.clone(),
        useful: analysis
            .useful_by_class()
            .into_iter()
            .map(|(c, u)| (c.prefix().to_string(), u))
            .collect(),
    };
    write_json(&out.join("analysis.json"), &record)?;

    let provenance = match (donor, checkpoint_train_config(&ckpt).map(|t| t.init)) {
        (Some(path), Some(Init::FromAddition { placement, .. })) => {
            Some((path.to_path_buf(), placement))
        }
        (Some(path), _) => Some((path.to_path_buf(), Placement::default())),
        (None, Some(Init::FromAddition { path, placement })) => Some((path, placement)),
        (None, _) => None,
    };
    let polysemanticity = match provenance {
        Some((path, placement)) => {
            let donor = load_checkpoint(&path)?.model;
            let inserted =
                inserted_from_donor(&donor, &ckpt.model.config, placement, &cfg.interp.analysis)?;
            let usage = node_usage(&analysis.useful_by_class(), &analysis.tags);
            let report = polysemanticity_report(&usage, &inserted);
            write_json(
                &out.join("polysemanticity.json"),
                &with_hash(serde_json::to_value(&report)?, cfg),
            )?;
            std::fs::write(out.join("polysemanticity.csv"), report.to_csv())?;
            Some(report)
        }
        None => None,
    };
    write_run_record(
        out,
        "analyze",
        cfg,
        json!({
            "checkpoint": checkpoint,
            "tags": analysis.tags.len(),
            "constraints_passed": analysis.constraints.all_passed(),
        }),
    )?;
    Ok(AnalyzeOutput {
        analysis,
        polysemanticity,
    })
}

pub fn sweep_seeds(
    cfg: &RunConfig,
    seeds: &[u64],
    category: &str,
    out: &Path,
) -> Result<SweepSummary> {
    let summary = seed_sweep(
        &cfg.train_config(),
        seeds,
        category,
        cfg.train.sweep_workers,
    )?;
    write_json(
        &out.join("sweep.json"),
        &with_hash(serde_json::to_value(&summary)?, cfg),
    )?;
    write_run_record(out, "sweep-seeds", cfg, json!({"seeds": seeds}))?;
    Ok(summary)
}

/// Scripted models served by `survey --mock`.
pub fn mock_models() -> BTreeMap<String, MockModel> {
    BTreeMap::from([
        ("mock-exact".to_string(), MockModel::CorrectUpTo(usize::MAX)),
        ("mock-five-digit".to_string(), MockModel::CorrectUpTo(5)),
        ("mock-verbose".to_string(), MockModel::Verbose),
        ("mock-wordy".to_string(), MockModel::Words),
    ])
}

pub fn survey(cfg: &RunConfig, mock: bool, out: &Path) -> Result<SurveyResults> {
    let suite = match &cfg.survey.suite {
        Some(path) => PromptSuite::load(path)?,
        None => PromptSuite::default_addition(),
    };
    let mut gateway = cfg.survey.gateway.clone();
    let _server = if mock {
        let models = mock_models();
        let server = MockGateway::start(models.clone(), None)?;
        gateway.base_url = server.base_url();
        gateway.auth_env = None;
        gateway.models = models.into_keys().collect();
        Some(server)
    } else {
        None
    };
    let results = run_survey(&gateway, &suite, &ChatCompletions)?;
    write_results(&results, out)?;
    write_run_record(out, "survey", cfg, json!({"mock": mock}))?;
    Ok(results)
}

/// Redraws the maps of an `analysis.json` into `out`.
pub fn render(analysis: &Path, out: &Path) -> Result<Vec<Grid>> {
    let record: AnalysisRecord = serde_json::from_str(&std::fs::read_to_string(analysis)?)?;
    let grids = render_maps(&record.model, &record.tags, &record.useful);
    for g in &grids {
        g.write(out)?;
    }
    Ok(grids)
}
