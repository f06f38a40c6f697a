//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measured values; the test fails if any criterion fails.
//!
//! Criteria 7 to 9 train desk-scale models on first use and cache them in
//! `target/acceptance-cache`. A cached checkpoint is reused only when its
//! recorded training config equals the one below.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cascade_cli::commands::{analyze_model, checkpoint_train_config};
use cascade_cli::config::RunConfig;
use cascade_core::cascade::tri_fold;
use cascade_core::datagen::gen_random_question;
use cascade_core::{
    add_via_cascade, mv, oracle_eval, simulate_carries, st, sub_via_cascade, sv, tricase_borrow,
    Answer, ComplexityMeasure, Curriculum, EnrichmentConfig, Op, Quantum, Question, QuestionClass,
    Sign, TriState,
};
use cascade_interp::{
    analyze, AlgorithmSchema, AnalysisConfig, ConstraintKind, Status, SubtaskKind,
};
use cascade_model::{load_checkpoint, ModelConfig, Placement, Transformer};
use cascade_nn::gradcheck::max_relative_error;
use cascade_nn::{Tape, Tensor, Var};
use cascade_survey::{
    run_survey, ChatCompletions, GatewayConfig, MockGateway, MockModel, PromptSuite, RetryPolicy,
    SurveyError, SurveyPrompt,
};
use cascade_train::{
    clopper_pearson, complexity_histogram, evaluate, init_from_addition, train, write_outputs,
    Init, TrainConfig, TrainLog,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 372001;

type Outcome = Result<String, String>;

fn report(id: usize, name: &str, outcome: &Outcome) {
    let (status, detail) = match outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id:>2} {status} {name}: {detail}"
    );
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cache_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .and_then(Path::parent)
        .expect("workspace root")
        .join("target/acceptance-cache")
}

fn answer_value(a: &Answer) -> i128 {
    let m = a
        .digits
        .iter()
        .fold(0i128, |acc, d| acc * 10 + d.value() as i128);
    match a.sign {
        Sign::Plus => m,
        Sign::Minus => -m,
    }
}

/// Independent integer route: `D op D'` in machine arithmetic.
fn int_value(q: &Question) -> i128 {
    let d = q.d.to_u128().expect("fits") as i128;
    let dp = q.d_prime.to_u128().expect("fits") as i128;
    match q.op {
        Op::Add => d + dp,
        Op::Sub => d - dp,
    }
}

/// Checks the cascade answer against both the big-integer oracle and
/// machine arithmetic. Returns a description of the first mismatch.
fn agrees(q: &Question) -> Option<String> {
    let cascade = match q.op {
        Op::Add => add_via_cascade(q),
        Op::Sub => sub_via_cascade(q),
    };
    let oracle = oracle_eval(q);
    let expected = int_value(q);
    if cascade != oracle
        || answer_value(&oracle) != expected
        || oracle.digits.len() != q.n_digits() + 1
    {
        Some(format!(
            "{q}: cascade {cascade} oracle {oracle} integer {expected}"
        ))
    } else {
        None
    }
}

fn exhaustive_oracle() -> Outcome {
    let start = Instant::now();
    let mut checked = 0u64;
    let mut mismatches = Vec::new();
    for n in 1..=3usize {
        let top = 10u64.pow(n as u32);
        for op in [Op::Add, Op::Sub] {
            for d in 0..top {
                for dp in 0..top {
                    let q = Question::from_u64(op, d, dp, n).map_err(|e| e.to_string())?;
                    checked += 1;
                    if let Some(m) = agrees(&q) {
                        mismatches.push(m);
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        mismatches.is_empty() && secs < 60.0,
        format!(
            "{checked} questions, {} mismatches{}, {secs:.1} s (limit 60 s)",
            mismatches.len(),
            mismatches
                .first()
                .map_or(String::new(), |m| format!(" e.g. {m}"))
        ),
    )
}

fn sampled_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut checked = 0u64;
    let mut mismatches = Vec::new();
    for n in 4..=12usize {
        for op in [Op::Add, Op::Sub] {
            for _ in 0..1_000_000 {
                let q = gen_random_question(n, op, &mut rng);
                checked += 1;
                if let Some(m) = agrees(&q) {
                    mismatches.push(m);
                }
            }
        }
    }
    check(
        mismatches.is_empty(),
        format!(
            "{checked} questions (10^6 per op, n = 4..12), {} mismatches{}, {:.1} s",
            mismatches.len(),
            mismatches
                .first()
                .map_or(String::new(), |m| format!(" e.g. {m}")),
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Carry or borrow out of digit `k` from the low `k + 1` digits as integers.
fn integer_carry(q: &Question, k: usize, negated: bool) -> u8 {
    let m = 10u128.pow(k as u32 + 1);
    let (d, dp) = (q.d.to_u128().unwrap() % m, q.d_prime.to_u128().unwrap() % m);
    let bit = match (q.op, negated) {
        (Op::Add, _) => d + dp >= m,
        (Op::Sub, false) => d < dp,
        (Op::Sub, true) => dp < d,
    };
    bit as u8
}

fn tri_state_totality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let mut problems = Vec::new();
    let mut bits = 0u64;
    for _ in 0..1_000_000 {
        let n = rng.random_range(1..=12usize);
        let op = if rng.random_bool(0.5) {
            Op::Add
        } else {
            Op::Sub
        };
        let q = gen_random_question(n, op, &mut rng);
        let class = QuestionClass::of(&q);
        let simulated = simulate_carries(&q);
        for k in 0..n {
            let series = |negated: bool| {
                tri_fold((0..=k).rev().map(|i| {
                    let (a, b) = (q.d.digit(i), q.d_prime.digit(i));
                    match (op, negated) {
                        (Op::Add, _) => st(a, b, i),
                        (Op::Sub, false) => tricase_borrow(a, b, i),
                        (Op::Sub, true) => tricase_borrow(b, a, i),
                    }
                }))
            };
            let negations: &[bool] = if op == Op::Add {
                &[false]
            } else {
                &[false, true]
            };
            for &negated in negations {
                if series(negated) == TriState::Uncertain {
                    problems.push(format!("{q}: digit {k} fold is uncertain"));
                }
                let value = match op {
                    Op::Add => sv(&q, k),
                    Op::Sub => mv(&q, k, negated),
                };
                if value != integer_carry(&q, k, negated) {
                    problems.push(format!(
                        "{q}: digit {k} cascade bit {value} disagrees with integers"
                    ));
                }
                bits += 1;
            }
            let own = match class {
                QuestionClass::SubNeg => mv(&q, k, true),
                QuestionClass::SubPos => mv(&q, k, false),
                QuestionClass::Add => sv(&q, k),
            };
            if own != simulated[k] {
                problems.push(format!(
                    "{q}: digit {k} cascade bit {own} vs simulated {}",
                    simulated[k]
                ));
            }
        }
        if problems.len() > 10 {
            break;
        }
    }
    check(
        problems.is_empty(),
        format!(
            "10^6 questions, {bits} carry/borrow bits checked, {} problems{}",
            problems.len(),
            problems
                .first()
                .map_or(String::new(), |p| format!(" e.g. {p}"))
        ),
    )
}

/// `{:.2e}` with an explicitly signed exponent, e.g. `3.69e-6`, `0.00e+0`.
fn sci(x: f64) -> String {
    let s = format!("{x:.2e}");
    match s.split_once('e') {
        Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
        _ => s,
    }
}

fn clopper_pearson_fidelity() -> Outcome {
    let table = [
        (0u64, "0.00e+0", "3.69e-6"),
        (2, "2.42e-7", "7.22e-6"),
        (12621, "1.24e-2", "1.28e-2"),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (fails, lo, hi) in table {
        let (l, h) = clopper_pearson(fails, 1_000_000, 0.95);
        let (l, h) = (sci(l), sci(h));
        ok &= l == lo && h == hi;
        parts.push(format!("{fails}/10^6 -> [{l}, {h}] (table [{lo}, {hi}])"));
    }
    check(ok, parts.join("; "))
}

fn complexity_frequencies() -> Outcome {
    let expected = [0.05, 0.21, 0.34, 0.28, 0.11, 0.02];
    let h = complexity_histogram(
        5,
        Op::Add,
        1_000_000,
        ComplexityMeasure::GeneratedCount,
        SEED,
    );
    let mut ok = true;
    let mut parts = Vec::new();
    for (level, &e) in expected.iter().enumerate() {
        let f = h.frequency(Quantum {
            class: QuestionClass::Add,
            level,
        });
        ok &= (f - e).abs() <= 0.03;
        parts.push(format!("S{level} {:.1}%", 100.0 * f));
    }
    let ten = complexity_histogram(
        10,
        Op::Add,
        1_000_000,
        ComplexityMeasure::GeneratedCount,
        SEED,
    );
    let s10 = ten.frequency(Quantum {
        class: QuestionClass::Add,
        level: 10,
    });
    ok &= s10 >= 1e-4 && s10 <= 9e-4;
    let runs = complexity_histogram(5, Op::Add, 1_000_000, ComplexityMeasure::LongestRun, SEED);
    let run_parts: Vec<String> = runs
        .frequencies()
        .iter()
        .map(|(q, f)| format!("S{} {:.1}%", q.level, 100.0 * f))
        .collect();
    check(
        ok,
        format!(
            "5-digit {} (table 5/21/34/28/11/2, +-3 pp); 10-digit S10 {s10:.2e} (3e-4 within x3); longest-run measure, informational: {}",
            parts.join(" "),
            run_parts.join(" ")
        ),
    )
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn grad_error(
    name: &str,
    shapes: &[&[usize]],
    seed: u64,
    f: impl Fn(&mut Tape<f64>, &[Var]) -> Var,
) -> (String, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<_> = shapes.iter().map(|s| random(s, &mut rng)).collect();
    let err = max_relative_error(&inputs, 1e-5, |tape, v| {
        let y = f(tape, v);
        let mut wr = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let w = tape.constant(random(tape.shape(y), &mut wr));
        let p = tape.mul(y, w).unwrap();
        tape.sum(p)
    });
    (name.to_string(), err)
}

fn gradient_checks() -> Outcome {
    let ids = [3usize, 0, 5, 3, 1];
    let targets = [Some(2usize), None, Some(0), Some(4)];
    let results = vec![
        grad_error("matmul", &[&[4, 3], &[3, 5]], 1, |t, v| {
            t.matmul(v[0], v[1]).unwrap()
        }),
        grad_error("bmm", &[&[2, 3, 4], &[2, 4, 3]], 2, |t, v| {
            t.bmm(v[0], v[1], false).unwrap()
        }),
        grad_error("bmm_transposed", &[&[2, 3, 4], &[2, 5, 4]], 3, |t, v| {
            t.bmm(v[0], v[1], true).unwrap()
        }),
        grad_error("add", &[&[3, 4], &[3, 4]], 4, |t, v| {
            t.add(v[0], v[1]).unwrap()
        }),
        grad_error("add_bias", &[&[3, 4], &[4]], 5, |t, v| {
            t.add_bias(v[0], v[1]).unwrap()
        }),
        grad_error("mul", &[&[3, 4], &[3, 4]], 6, |t, v| {
            t.mul(v[0], v[1]).unwrap()
        }),
        grad_error("scale", &[&[3, 4]], 7, |t, v| t.scale(v[0], 0.37)),
        grad_error("transpose", &[&[3, 4]], 8, |t, v| {
            t.transpose(v[0]).unwrap()
        }),
        grad_error("reshape", &[&[3, 4]], 9, |t, v| {
            t.reshape(v[0], &[2, 6]).unwrap()
        }),
        grad_error("relu", &[&[4, 5]], 10, |t, v| t.relu(v[0])),
        grad_error("softmax", &[&[3, 5]], 11, |t, v| t.softmax(v[0])),
        grad_error("causal_softmax", &[&[2, 4, 4]], 12, |t, v| {
            t.causal_softmax(v[0], 0.5).unwrap()
        }),
        grad_error("layer_norm", &[&[3, 6], &[6], &[6]], 13, |t, v| {
            t.layer_norm(v[0], v[1], v[2], 1e-5).unwrap()
        }),
        grad_error("embedding", &[&[6, 4]], 14, move |t, v| {
            t.embedding(v[0], &ids).unwrap()
        }),
        grad_error("sum_leading", &[&[3, 2, 4]], 15, |t, v| {
            t.sum_leading(v[0]).unwrap()
        }),
        grad_error("sum", &[&[3, 4]], 16, |t, v| t.sum(v[0])),
        grad_error("cross_entropy", &[&[4, 5]], 17, move |t, v| {
            t.cross_entropy(v[0], &targets).unwrap().0
        }),
    ];
    let worst = results.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let failing: Vec<String> = results
        .iter()
        .filter(|(_, e)| !(*e < 1e-4))
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect();
    check(
        failing.is_empty(),
        format!(
            "{} ops in f64, worst relative error {worst:.1e} (limit 1e-4){}",
            results.len(),
            if failing.is_empty() {
                String::new()
            } else {
                format!(", failing: {}", failing.join(", "))
            }
        ),
    )
}

fn addition_config() -> TrainConfig {
    TrainConfig {
        model: ModelConfig::new(3, 2, 3, 64, SEED),
        data: EnrichmentConfig::new(3, Curriculum::add_only(), SEED),
        total_steps: 10_000,
        stop_loss: None,
        ..Default::default()
    }
}

fn mixed_config(donor: &Path) -> TrainConfig {
    TrainConfig {
        model: ModelConfig::new(3, 3, 4, 64, SEED).with_d_model(192),
        data: EnrichmentConfig::new(3, Curriculum::mixed(), SEED),
        total_steps: 10_000,
        stop_loss: None,
        init: Init::FromAddition {
            path: donor.to_path_buf(),
            placement: Placement::default(),
        },
        ..Default::default()
    }
}

/// Loads the cached model trained with `cfg`, training it first when the
/// cache is missing or was produced by a different config. Returns the
/// checkpoint path and the recorded wall time.
fn cached_model(name: &str, cfg: &TrainConfig) -> Result<(PathBuf, f64), String> {
    let dir = cache_dir().join(name);
    let path = dir.join("model.ckpt");
    let log_path = dir.join("training_loss.json");
    let cached = load_checkpoint(&path)
        .ok()
        .and_then(|c| checkpoint_train_config(&c))
        .is_some_and(|c| c == *cfg);
    if cached {
        let log: TrainLog = std::fs::read_to_string(&log_path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .ok_or_else(|| format!("unreadable {}", log_path.display()))?;
        return Ok((path, log.final_.wall_secs));
    }
    let _ = writeln!(
        std::io::stderr(),
        "training {name} into {} (not cached)",
        dir.display()
    );
    let outcome = train(cfg, None, &mut |_| {}).map_err(|e| e.to_string())?;
    write_outputs(&dir, &outcome, serde_json::json!({})).map_err(|e| e.to_string())?;
    Ok((path, outcome.log.final_.wall_secs))
}

fn desk_training(ckpt: &Path, wall_secs: f64) -> Outcome {
    let model = load_checkpoint(ckpt).map_err(|e| e.to_string())?.model;
    let report = evaluate(&model, 3, 100_000, Curriculum::add_only(), SEED ^ 7)
        .map_err(|e| e.to_string())?;
    let acc = report.total.accuracy;
    check(
        acc >= 0.999,
        format!(
            "3-digit 2L/3H addition, 10000 steps in {:.0} s; accuracy {:.5} ({} fails / 10^5, need >= 0.999)",
            wall_secs, acc, report.total.fails
        ),
    )
}

fn circuit_verification(ckpt: &Path) -> Outcome {
    let model = load_checkpoint(ckpt).map_err(|e| e.to_string())?.model;
    let n = model.config.n_digits;
    let cfg = AnalysisConfig {
        seed: SEED,
        ..Default::default()
    };
    let a = analyze(
        &model,
        &AlgorithmSchema::addition(),
        &[QuestionClass::Add],
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    let mut parts = Vec::new();
    for k in 0..n {
        let sa = a
            .tags
            .iter()
            .filter(|t| t.kind == SubtaskKind::SA && t.digit == Some(k))
            .count();
        if sa == 0 {
            problems.push(format!("no SA{k} tag"));
        }
        parts.push(format!("SA{k} x{sa}"));
    }
    for k in 1..n {
        let tags: Vec<_> = a
            .tags
            .iter()
            .filter(|t| t.kind == SubtaskKind::ST && t.digit == Some(k))
            .collect();
        if tags.is_empty() {
            problems.push(format!("no ST{k} tag"));
        }
        for t in tags {
            let pca = t.evidence.pca.as_ref().map_or(0.0, |p| p.cluster_score);
            let (rate, pairs) = t
                .evidence
                .intervention
                .as_ref()
                .map_or((0.0, 0), |s| (s.rate, s.n_pairs));
            let nodes: Vec<String> = t.nodes().iter().map(|n| n.to_string()).collect();
            parts.push(format!(
                "ST{k} {} pca {pca:.3} swap {rate:.3}/{pairs}",
                nodes.join("+")
            ));
            if pca < 0.9 || rate < 0.95 || pairs < 200 {
                problems.push(format!("ST{k} at {} below threshold", nodes.join("+")));
            }
        }
    }
    let c = &a.constraints;
    for kind in [ConstraintKind::Window, ConstraintKind::Ordering] {
        let failed = c.count(kind, Status::Fail);
        if failed > 0 {
            problems.push(format!("{failed} {kind:?} constraints fail"));
        }
        parts.push(format!(
            "{kind:?} {} pass / {} fail / {} skipped",
            c.count(kind, Status::Pass),
            failed,
            c.count(kind, Status::Skipped)
        ));
    }
    let detail = format!(
        "{}{}",
        parts.join("; "),
        if problems.is_empty() {
            String::new()
        } else {
            format!("; problems: {}", problems.join(", "))
        }
    );
    check(problems.is_empty(), detail)
}

fn same_bits(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Every donor slice must appear bit-for-bit in the target.
fn donor_slices_copied(donor: &Transformer, target: &Transformer) -> Result<usize, String> {
    let (d, dh) = (donor.config.d_model, donor.config.d_head);
    let mut compared = 0;
    let whole = |name: &str, a: &Tensor<f32>, b: &Tensor<f32>, compared: &mut usize| {
        *compared += 1;
        if same_bits(a.data(), b.data()) {
            Ok(())
        } else {
            Err(format!("{name} differs"))
        }
    };
    let dp = &donor.params;
    let tp = &target.params;
    whole("tok_embed", &dp.tok_embed, &tp.tok_embed, &mut compared)?;
    whole("pos_embed", &dp.pos_embed, &tp.pos_embed, &mut compared)?;
    for (l, (s, t)) in dp.layers.iter().zip(&tp.layers).enumerate() {
        for h in 0..donor.config.n_heads {
            let r = h * d * dh..(h + 1) * d * dh;
            for (name, a, b) in [
                ("w_q", &s.w_q, &t.w_q),
                ("w_k", &s.w_k, &t.w_k),
                ("w_v", &s.w_v, &t.w_v),
                ("w_o", &s.w_o, &t.w_o),
            ] {
                compared += 1;
                if !same_bits(&a.data()[r.clone()], &b.data()[r.clone()]) {
                    return Err(format!("layer {l} head {h} {name} differs"));
                }
            }
        }
        whole("w_in", &s.w_in, &t.w_in, &mut compared)?;
        whole("b_in", &s.b_in, &t.b_in, &mut compared)?;
        whole("w_out", &s.w_out, &t.w_out, &mut compared)?;
        whole("b_out", &s.b_out, &t.b_out, &mut compared)?;
    }
    Ok(compared)
}

fn transfer_experiment(donor_ckpt: &Path, mixed_ckpt: &Path) -> Outcome {
    let mixed_cfg = mixed_config(donor_ckpt);
    let (fresh, donor) = init_from_addition(donor_ckpt, &mixed_cfg.model, Placement::default())
        .map_err(|e| e.to_string())?;
    let copied = donor_slices_copied(&donor, &fresh);

    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut run = RunConfig::default();
    run.data = mixed_cfg.data.clone();
    run.interp.analysis.seed = SEED;
    let analysis = analyze_model(&run, mixed_ckpt, None, out.path()).map_err(|e| e.to_string())?;
    let poly = analysis
        .polysemanticity
        .ok_or("no polysemanticity report")?;
    let accuracy = load_checkpoint(mixed_ckpt)
        .map_err(|e| e.to_string())
        .and_then(|c| {
            evaluate(&c.model, 3, 100_000, Curriculum::mixed(), SEED ^ 9).map_err(|e| e.to_string())
        })?
        .total
        .accuracy;
    let detail = format!(
        "donor slices: {}; mixed model accuracy {accuracy:.5}; {} of {} inserted nodes reused for subtraction ({:.0}%, need >= 50%); {} polysemantic of {} used",
        match &copied {
            Ok(n) => format!("{n} tensors/blocks bit-exact"),
            Err(e) => e.clone(),
        },
        poly.inserted_reused_for_subtraction,
        poly.inserted,
        100.0 * poly.reused_fraction,
        poly.polysemantic,
        poly.used
    );
    check(copied.is_ok() && poly.reused_fraction >= 0.5, detail)
}

fn gateway(base_url: String, models: Vec<String>) -> GatewayConfig {
    GatewayConfig {
        base_url,
        auth_env: None,
        models,
        timeout_secs: 10.0,
        max_concurrent: 4,
        retry: RetryPolicy {
            max_attempts: 2,
            backoff_ms: 1,
        },
    }
}

fn survey_harness() -> Outcome {
    let suite = PromptSuite::default_addition();
    let checked = suite.checked().map_err(|e| e.to_string())?;
    let digits: Vec<usize> = checked.iter().map(|p| p.digits).collect();
    let mut models = std::collections::BTreeMap::new();
    models.insert(
        "all-correct".to_string(),
        MockModel::CorrectUpTo(usize::MAX),
    );
    // Failing first at prompt k (1-based) leaves prompts 1..k-1 correct.
    for k in 1..=digits.len() {
        models.insert(
            format!("fail-at-{k:02}"),
            MockModel::CorrectUpTo(digits[k - 1] - 1),
        );
    }
    let server = MockGateway::start(models.clone(), None).map_err(|e| e.to_string())?;
    let results = run_survey(
        &gateway(server.base_url(), models.keys().cloned().collect()),
        &suite,
        &ChatCompletions,
    )
    .map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    for r in &results.models {
        let expected = match r.model.strip_prefix("fail-at-") {
            Some(k) => {
                let k: usize = k.parse().unwrap();
                if k == 1 {
                    0
                } else {
                    digits[k - 2]
                }
            }
            None => 12,
        };
        if r.score != expected {
            problems.push(format!(
                "{} scored {} expected {expected}",
                r.model, r.score
            ));
        }
    }
    let mut bad = suite.clone();
    bad.prompts[6].expected = "0".into();
    let rejected = matches!(bad.checked(), Err(SurveyError::Suite(_)));
    let garbled = PromptSuite {
        operation: "addition".into(),
        prompts: vec![SurveyPrompt {
            prompt: "Answer concisely: 2+2=".into(),
            expected: "5".into(),
        }],
    };
    let rejected_small = matches!(garbled.checked(), Err(SurveyError::Suite(_)));
    if !(rejected && rejected_small) {
        problems.push("a suite with a wrong answer was accepted".into());
    }
    check(
        problems.is_empty() && results.models.len() == 13,
        format!(
            "{} mock models scored by hand-computed expectation, wrong-answer suites rejected at load: {}{}",
            results.models.len(),
            rejected && rejected_small,
            if problems.is_empty() {
                String::new()
            } else {
                format!("; {}", problems.join(", "))
            }
        ),
    )
}

#[test]
fn acceptance() {
    let mut outcomes: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f().map(|d| format!("{d} [{:.0} s]", start.elapsed().as_secs_f64()));
        report(id, name, &o);
        outcomes.push((id, name, o));
    };
    run(1, "exhaustive oracle equivalence", &mut exhaustive_oracle);
    run(2, "sampled oracle equivalence", &mut sampled_oracle);
    run(3, "tri-state totality", &mut tri_state_totality);
    run(4, "Clopper-Pearson fidelity", &mut clopper_pearson_fidelity);
    run(5, "complexity frequencies", &mut complexity_frequencies);
    run(6, "gradient correctness", &mut gradient_checks);

    let add_cfg = addition_config();
    let add = cached_model("add3", &add_cfg);
    run(7, "desk-scale training", &mut || {
        let (path, wall) = add.clone()?;
        desk_training(&path, wall)
    });
    run(8, "circuit verification", &mut || {
        circuit_verification(&add.clone()?.0)
    });
    run(9, "transfer experiment", &mut || {
        let donor = add.clone()?.0;
        let (mixed, _) = cached_model("mixed3", &mixed_config(&donor))?;
        transfer_experiment(&donor, &mixed)
    });
    run(10, "survey harness", &mut survey_harness);

    let failed: Vec<String> = outcomes
        .iter()
        .filter(|(_, _, o)| o.is_err())
        .map(|(id, name, _)| format!("{id} ({name})"))
        .collect();
    let _ = writeln!(
        std::io::stderr(),
        "acceptance: {}/{} criteria pass",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    assert!(failed.is_empty(), "failing criteria: {}", failed.join(", "));
}
