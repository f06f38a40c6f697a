use std::fmt::Write as _;
use std::path::Path;

use crate::client::SurveyResults;
use crate::error::Result;

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per model, ordered by model id.
pub fn export_scores(results: &SurveyResults) -> String {
    let mut out =
        String::from("model,score,max_score,prompts_sent,prompt_tokens,completion_tokens,error\n");
    let mut rows: Vec<_> = results.models.iter().collect();
    rows.sort_by(|a, b| a.model.cmp(&b.model));
    for m in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&m.model),
            m.score,
            m.max_score,
            m.transcript.len(),
            m.usage.prompt_tokens,
            m.usage.completion_tokens,
            csv_field(m.error.as_deref().unwrap_or(""))
        );
    }
    out
}

/// Writes `scores.csv` and `transcripts.json` into `dir`.
pub fn write_results(results: &SurveyResults, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("scores.csv"), export_scores(results))?;
    let mut json = serde_json::to_string_pretty(results)?;
    json.push('\n');
    std::fs::write(dir.join("transcripts.json"), json)?;
    Ok(())
}
